//! Free Gaussian packet under Crank-Nicolson: norm is kept, width grows.

use causalkit::quantum::GridWave;
use causalkit::state::CGrid;
use num_complex::Complex64;

fn main() {
    let (n, dx, dt) = (512usize, 0.0625, 0.01);
    let xs: Vec<f64> = (0..n).map(|j| (j as f64 - n as f64 / 2.0) * dx).collect();
    let data = xs.iter().map(|x| Complex64::from((-x * x / 4.0).exp())).collect();
    let mut grid = CGrid::new(data, dx);
    let scale = grid.norm2().sqrt();
    grid.data.iter_mut().for_each(|a| *a /= scale);
    let v = vec![0.0; n];
    let mut wave = GridWave::new(grid, 1.0, 1.0);
    for step in 0..=400 {
        if step % 100 == 0 {
            let p: Vec<f64> = wave.psi.data.iter().map(|a| a.norm_sqr() * dx).collect();
            let var: f64 = xs.iter().zip(&p).map(|(x, w)| x * x * w).sum();
            let t = step as f64 * dt;
            println!("t={t:.2} norm={:.15} var={var:.6} closed form={:.6}", wave.norm(), 1.0 + (t / 2.0).powi(2));
        }
        wave = wave.step(&v, dt).expect("solvable");
    }
}
