use foa_tensor::*;
use std::time::Instant;

fn main() {
    // f32 path, shapes like the desk-scale COARSE first layers
    let input = ClipTensor::<f32>::full((16, 32, 32, 8), 0.5);
    let n = 16 * 8 * 3 * 3 * 3;
    let kernel = Conv3dKernel::<f32>::new(
        16, 8, (3, 3, 3), Padding::ZeroSame,
        (0..n).map(|v| (v as f32 * 0.01).sin() * 0.1).collect(),
        vec![0.01; 16],
    ).unwrap();
    // warmup
    let out = conv3d_forward(&input, &kernel).unwrap();
    let start = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let _ = conv3d_forward(&input, &kernel).unwrap();
    }
    let dt = start.elapsed().as_secs_f64() / reps as f64;
    let macs = 16.0 * 32.0 * 32.0 * 16.0 * 8.0 * 27.0;
    println!("forward: {:.3} ms -> {:.2} GMAC/s", dt * 1e3, macs / dt / 1e9);

    let up = ClipTensor::<f32>::full(out.shape(), 1.0);
    let start = Instant::now();
    for _ in 0..reps {
        let _ = conv3d_backward(&input, &kernel, &up).unwrap();
    }
    let dt = start.elapsed().as_secs_f64() / reps as f64;
    println!("backward: {:.3} ms -> {:.2} GMAC/s(x2)", dt * 1e3, 2.0 * macs / dt / 1e9);
}
