//! Rough kernel throughput check at the shapes the classifier hits hardest.
use std::time::Instant;

fn main() {
    bench_gemm("conv2-ish  ", 12544, 288, 64, 5);
    bench_gemm("conv3-ish  ", 3136, 576, 128, 5);
    bench_gemm("pd4 batch  ", 8192, 128, 1024, 3);
    bench_gemm("fc fwd     ", 8, 100352, 512, 3);
    bench_conv();
}

fn bench_gemm(name: &str, m: usize, k: usize, n: usize, reps: usize) {
    let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.001).sin()).collect();
    let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.002).cos()).collect();
    let _ = pointvox::autodiff::bench_matmul(&a, &b, m, k, n);
    let t = Instant::now();
    for _ in 0..reps {
        let _ = pointvox::autodiff::bench_matmul(&a, &b, m, k, n);
    }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    println!(
        "{name} m={m:6} k={k:6} n={n:4}  {:8.2} ms  {:6.2} GFLOP/s",
        dt * 1e3,
        2.0 * (m * k * n) as f64 / dt / 1e9
    );
}

fn bench_conv() {
    // conv2 of the RGB branch: [8,112,112,32] -> [8,112,112,64]
    let (b, h, w, cin, cout) = (8usize, 112usize, 112usize, 32usize, 64usize);
    let x: Vec<f64> = (0..b * h * w * cin).map(|i| (i as f64 * 0.01).sin()).collect();
    let k: Vec<f64> = (0..9 * cin * cout).map(|i| (i as f64 * 0.02).cos()).collect();
    let bias = vec![0.1; cout];
    let _ = pointvox::autodiff::bench_conv_forward(&x, &k, &bias, b, h, w, cin, cout);
    let t = Instant::now();
    let reps = 3;
    for _ in 0..reps {
        let _ = pointvox::autodiff::bench_conv_forward(&x, &k, &bias, b, h, w, cin, cout);
    }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    let flops = 2.0 * (b * h * w * cout * 9 * cin) as f64;
    println!(
        "conv2 fwd   batch={b} {h}x{w} {cin}->{cout}  {:8.2} ms  {:6.2} GFLOP/s",
        dt * 1e3,
        flops / dt / 1e9
    );
}
