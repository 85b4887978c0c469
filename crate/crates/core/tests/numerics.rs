//! Integrators checked against independent closed forms and a dense
//! linear-algebra oracle.

use std::convert::Infallible;

use causalkit::quantum::schrodinger::crank_nicolson_step;
use causalkit::quantum::{classical_step, Particle};
use causalkit::rng::RngStream;
use causalkit::state::CGrid;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// `(1 + i dt H / 2)^-1 (1 - i dt H / 2) psi` with `H` built as a dense
/// periodic three-point matrix and solved by LU.
fn dense_cn(psi: &[Complex64], v: &[f64], dx: f64, dt: f64, m: f64, hbar: f64) -> Vec<Complex64> {
    let n = psi.len();
    let s = hbar * hbar / (2.0 * m * dx * dx);
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = Complex64::from(2.0 * s + v[j]);
        h[(j, (j + 1) % n)] -= Complex64::from(s);
        h[(j, (j + n - 1) % n)] -= Complex64::from(s);
    }
    let i_half = Complex64::new(0.0, dt / (2.0 * hbar));
    let id = DMatrix::<Complex64>::identity(n, n);
    let a = &id + &h * i_half;
    let b = &id - &h * i_half;
    let rhs = b * nalgebra::DVector::from_column_slice(psi);
    let x = a.lu().solve(&rhs).expect("non-singular");
    x.iter().copied().collect()
}

#[test]
fn crank_nicolson_matches_dense_solve() {
    let mut rng = RngStream::new(17);
    for &(n, dx, dt, m, hbar) in &[(16usize, 0.3, 0.02, 1.0, 1.0), (33, 0.1, 0.005, 2.5, 0.7)] {
        let psi: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.uniform() - 0.5, rng.uniform() - 0.5)).collect();
        let v: Vec<f64> = (0..n).map(|_| 4.0 * rng.uniform()).collect();
        let got = crank_nicolson_step(&CGrid::new(psi.clone(), dx), &v, dt, m, hbar).unwrap();
        let want = dense_cn(&psi, &v, dx, dt, m, hbar);
        for (g, w) in got.data.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn verlet_follows_the_cosine() {
    let spring = |x: f64| -> Result<f64, Infallible> { Ok(x) };
    let dt = 0.01;
    let mut p = vec![Particle { m: 1.0, x: 1.0, v: 0.0 }];
    for k in 1..=1000 {
        p = classical_step(&p, dt, &spring).unwrap();
        let t = k as f64 * dt;
        // Global error of velocity Verlet is O(dt^2).
        assert!((p[0].x - t.cos()).abs() < 1e-4 * t.max(1.0), "t = {t}");
        assert!((p[0].v + t.sin()).abs() < 1e-4 * t.max(1.0), "t = {t}");
    }
}

#[test]
fn verlet_falls_under_constant_force_exactly() {
    // V = g x, so x(t) = x0 + v0 t - g t^2 / 2, which Verlet reproduces.
    let g = 9.81;
    let gravity = move |_: f64| -> Result<f64, Infallible> { Ok(g) };
    let dt = 0.125;
    let mut p = vec![Particle { m: 2.0, x: 10.0, v: 3.0 }];
    for k in 1..=16 {
        p = classical_step(&p, dt, &gravity).unwrap();
        let t = k as f64 * dt;
        let want = 10.0 + 3.0 * t - 0.5 * (g / 2.0) * t * t;
        assert!((p[0].x - want).abs() < 1e-12);
    }
}

#[test]
fn verlet_is_time_reversible() {
    let quartic = |x: f64| -> Result<f64, Infallible> { Ok(x * x * x) };
    let start = vec![Particle { m: 1.3, x: 0.7, v: -0.2 }];
    let mut p = start.clone();
    for _ in 0..500 {
        p = classical_step(&p, 0.01, &quartic).unwrap();
    }
    p[0].v = -p[0].v;
    for _ in 0..500 {
        p = classical_step(&p, 0.01, &quartic).unwrap();
    }
    assert!((p[0].x - start[0].x).abs() < 1e-10);
    assert!((p[0].v + start[0].v).abs() < 1e-10);
}
