//! Classical point particles under a one-dimensional potential.
//!
//! Velocity Verlet with `m x'' = -dV/dx`. The integrator is symplectic, so
//! the energy error stays bounded instead of drifting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub m: f64,
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicalError<E> {
    #[error("particle {index} has non-positive mass {m}")]
    NonPositiveMass { index: usize, m: f64 },
    #[error("timestep must be positive, got {0}")]
    NonPositiveTimestep(f64),
    #[error("gradient: {0}")]
    Gradient(E),
}

/// One velocity-Verlet step for each particle. `grad` is `dV/dx`.
pub fn classical_step<E>(
    particles: &[Particle],
    dt: f64,
    grad: &dyn Fn(f64) -> Result<f64, E>,
) -> Result<Vec<Particle>, ClassicalError<E>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ClassicalError::NonPositiveTimestep(dt));
    }
    particles
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if !(p.m > 0.0) {
                return Err(ClassicalError::NonPositiveMass { index, m: p.m });
            }
            let a0 = -grad(p.x).map_err(ClassicalError::Gradient)? / p.m;
            let x1 = p.x + p.v * dt + 0.5 * a0 * dt * dt;
            let a1 = -grad(x1).map_err(ClassicalError::Gradient)? / p.m;
            Ok(Particle {
                m: p.m,
                x: x1,
                v: p.v + 0.5 * (a0 + a1) * dt,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn free(_: f64) -> Result<f64, Infallible> {
        Ok(0.0)
    }

    #[test]
    fn free_motion() {
        let p = [Particle { m: 1.0, x: 0.0, v: 1.0 }];
        let out = classical_step(&p, 0.1, &free).unwrap();
        assert!((out[0].x - 0.1).abs() < 1e-15);
        assert_eq!(out[0].v, 1.0);
    }

    #[test]
    fn constant_force_is_exact() {
        // V = g x, so x(t) = x0 + v0 t - g t^2 / 2 for m = 1.
        let grad = |_: f64| -> Result<f64, Infallible> { Ok(9.81) };
        let mut p = vec![Particle { m: 1.0, x: 0.0, v: 3.0 }];
        for _ in 0..100 {
            p = classical_step(&p, 0.01, &grad).unwrap();
        }
        let t = 1.0;
        assert!((p[0].x - (3.0 * t - 0.5 * 9.81 * t * t)).abs() < 1e-10);
        assert!((p[0].v - (3.0 - 9.81 * t)).abs() < 1e-10);
    }

    #[test]
    fn rejects_zero_mass_and_dt() {
        let p = [Particle { m: 0.0, x: 0.0, v: 0.0 }];
        assert!(matches!(
            classical_step(&p, 0.1, &free),
            Err(ClassicalError::NonPositiveMass { index: 0, .. })
        ));
        assert!(matches!(
            classical_step(&[], -1.0, &free),
            Err(ClassicalError::NonPositiveTimestep(_))
        ));
    }
}
