//! Crank–Nicolson stepping of the 1D Schrödinger equation on a periodic grid.
//!
//! `i hbar dpsi/dt = H psi` with `H = -hbar^2/(2m) d^2/dx^2 + V`. One step
//! solves `(1 + i dt H / 2hbar) psi' = (1 - i dt H / 2hbar) psi`, where the
//! second derivative is the periodic three-point difference. The left-hand
//! matrix is cyclic tridiagonal and is solved with Sherman–Morrison on top
//! of the Thomas algorithm. The discrete propagator is exactly unitary, so
//! only round-off changes the norm.

use num_complex::Complex64;
use thiserror::Error;

use crate::state::CGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("singular system in implicit step")]
    Singular,
    #[error("potential has {got} cells, wave function has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0} must be positive and finite, got {1}")]
    NonPositive(&'static str, f64),
}

/// Wave function with its mass and reduced Planck constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWave {
    pub psi: CGrid,
    pub mass: f64,
    pub hbar: f64,
}

impl GridWave {
    pub fn new(psi: CGrid, mass: f64, hbar: f64) -> Self {
        GridWave { psi, mass, hbar }
    }

    /// `sum |psi_j|^2 dx`
    pub fn norm(&self) -> f64 {
        self.psi.norm2()
    }

    pub fn step(&self, v: &[f64], dt: f64) -> Result<GridWave, SolveError> {
        let psi = crank_nicolson_step(&self.psi, v, dt, self.mass, self.hbar)?;
        Ok(GridWave { psi, ..self.clone() })
    }
}

/// Periodic second difference divided by `dx^2`.
pub fn laplacian(g: &CGrid) -> CGrid {
    let n = g.len();
    let inv = 1.0 / (g.dx * g.dx);
    let data = (0..n)
        .map(|j| {
            let l = g.data[(j + n - 1) % n];
            let r = g.data[(j + 1) % n];
            (l - 2.0 * g.data[j] + r) * inv
        })
        .collect();
    CGrid::new(data, g.dx)
}

/// Applies the discrete Hamiltonian.
pub fn apply_hamiltonian(psi: &CGrid, v: &[f64], mass: f64, hbar: f64) -> CGrid {
    let lap = laplacian(psi);
    let kin = -hbar * hbar / (2.0 * mass);
    let data = lap
        .data
        .iter()
        .zip(&psi.data)
        .zip(v)
        .map(|((l, p), vj)| kin * l + vj * p)
        .collect();
    CGrid::new(data, psi.dx)
}

pub fn crank_nicolson_step(
    psi: &CGrid,
    v: &[f64],
    dt: f64,
    mass: f64,
    hbar: f64,
) -> Result<CGrid, SolveError> {
    let n = psi.len();
    if v.len() != n {
        return Err(SolveError::LengthMismatch {
            expected: n,
            got: v.len(),
        });
    }
    for (name, x) in [("dt", dt), ("mass", mass), ("hbar", hbar)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(SolveError::NonPositive(name, x));
        }
    }
    // (1 + i dt H / 2hbar) has diagonal 1 + i g (2 s + V_j) and
    // off-diagonals -i g s, where s = hbar^2 / (2 m dx^2), g = dt / 2hbar.
    let s = hbar * hbar / (2.0 * mass * psi.dx * psi.dx);
    let g = Complex64::new(0.0, dt / (2.0 * hbar));
    let h_psi = apply_hamiltonian(psi, v, mass, hbar);
    let rhs: Vec<Complex64> = psi
        .data
        .iter()
        .zip(&h_psi.data)
        .map(|(p, h)| p - g * h)
        .collect();
    let diag: Vec<Complex64> = v.iter().map(|vj| 1.0 + g * (2.0 * s + vj)).collect();
    let off = -g * s;
    let out = match n {
        1 => {
            // The periodic Laplacian of a single cell is zero.
            let a = 1.0 + g * v[0];
            vec![rhs[0] / a]
        }
        2 => {
            // Both neighbors are the same cell.
            let (a, b, c, d) = (diag[0], 2.0 * off, 2.0 * off, diag[1]);
            let det = a * d - b * c;
            if det.norm() < f64::MIN_POSITIVE {
                return Err(SolveError::Singular);
            }
            vec![(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det]
        }
        _ => solve_cyclic(&diag, off, off, &rhs)?,
    };
    Ok(CGrid::new(out, psi.dx))
}

/// Thomas algorithm for constant off-diagonals.
fn solve_tridiagonal(
    diag: &[Complex64],
    sub: Complex64,
    sup: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>, SolveError> {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut piv = diag[0];
    if piv.norm() < f64::MIN_POSITIVE {
        return Err(SolveError::Singular);
    }
    x[0] = rhs[0] / piv;
    for i in 1..n {
        c[i - 1] = sup / piv;
        piv = diag[i] - sub * c[i - 1];
        if piv.norm() < f64::MIN_POSITIVE {
            return Err(SolveError::Singular);
        }
        x[i] = (rhs[i] - sub * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Cyclic tridiagonal solve; corners are `A[n-1][0] = sub`, `A[0][n-1] = sup`.
fn solve_cyclic(
    diag: &[Complex64],
    sub: Complex64,
    sup: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>, SolveError> {
    let n = diag.len();
    let (alpha, beta) = (sub, sup);
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(&bb, sub, sup, rhs)?;
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(&bb, sub, sup, &u)?;
    let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if denom.norm() < f64::MIN_POSITIVE {
        return Err(SolveError::Singular);
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, dx: f64, sigma: f64, k0: f64) -> CGrid {
        let x0 = n as f64 * dx / 2.0;
        let data: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = j as f64 * dx - x0;
                Complex64::from_polar((-(x * x) / (4.0 * sigma * sigma)).exp(), k0 * x)
            })
            .collect();
        let g = CGrid::new(data, dx);
        let s = g.norm2().sqrt();
        CGrid::new(g.data.iter().map(|z| z / s).collect(), dx)
    }

    /// Dense reference: A x for the cyclic matrix.
    fn cyclic_mul(diag: &[Complex64], off: Complex64, x: &[Complex64]) -> Vec<Complex64> {
        let n = diag.len();
        (0..n)
            .map(|i| diag[i] * x[i] + off * x[(i + n - 1) % n] + off * x[(i + 1) % n])
            .collect()
    }

    #[test]
    fn cyclic_solve_inverts_the_matrix() {
        let diag: Vec<Complex64> = (0..7).map(|i| Complex64::new(3.0 + i as f64, 0.5)).collect();
        let off = Complex64::new(-0.7, 0.2);
        let rhs: Vec<Complex64> = (0..7).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let x = solve_cyclic(&diag, off, off, &rhs).unwrap();
        for (a, b) in cyclic_mul(&diag, off, &x).iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let psi = CGrid::zeros(32, 0.1);
        let out = crank_nicolson_step(&psi, &[0.0; 32], 0.01, 1.0, 1.0).unwrap();
        assert!(out.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn step_preserves_norm() {
        let psi = gaussian(128, 0.1, 0.8, 2.0);
        let v: Vec<f64> = (0..128).map(|j| (j as f64 * 0.05).sin()).collect();
        let out = crank_nicolson_step(&psi, &v, 0.005, 1.0, 1.0).unwrap();
        assert!((out.norm2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_grids() {
        let one = CGrid::new(vec![Complex64::new(1.0, 0.0)], 1.0);
        let out = crank_nicolson_step(&one, &[2.0], 0.1, 1.0, 1.0).unwrap();
        assert!((out.data[0].norm() - 1.0).abs() < 1e-14);
        let two = CGrid::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)], 1.0);
        let out = crank_nicolson_step(&two, &[0.0, 1.0], 0.1, 1.0, 1.0).unwrap();
        assert!((out.norm2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let psi = CGrid::zeros(8, 0.1);
        assert!(matches!(
            crank_nicolson_step(&psi, &[0.0; 4], 0.1, 1.0, 1.0),
            Err(SolveError::LengthMismatch { .. })
        ));
        assert!(matches!(
            crank_nicolson_step(&psi, &[0.0; 8], 0.0, 1.0, 1.0),
            Err(SolveError::NonPositive("dt", _))
        ));
    }

    #[test]
    fn laplacian_of_plane_wave() {
        let n = 64;
        let dx = 0.1;
        let k = 2.0 * std::f64::consts::PI * 3.0 / (n as f64 * dx);
        let g = CGrid::new((0..n).map(|j| Complex64::from_polar(1.0, k * j as f64 * dx)).collect(), dx);
        let lap = laplacian(&g);
        let eig = (2.0 * (k * dx).cos() - 2.0) / (dx * dx);
        for (l, z) in lap.data.iter().zip(&g.data) {
            assert!((l - eig * z).norm() < 1e-9);
        }
    }
}
