//! Toy cellular automaton over a periodic line of cells.
//!
//! Each step diffuses the scalar field, moves every particle by its integer
//! velocity, and then lets particles sharing a cell interact. The
//! interaction is an elastic exchange: occupants sorted by id pass their
//! velocities one place along the ring, which for two particles is a swap.
//! Velocities are only permuted, so their sum never changes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaParticle {
    pub id: i64,
    pub pos: i64,
    pub vel: i64,
    pub species: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaWorld {
    /// Field value per cell; its length fixes the grid width.
    pub phi: Vec<f64>,
    pub particles: Vec<CaParticle>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaError {
    #[error("world has no cells")]
    Empty,
    #[error("particle {id} sits at {pos}, outside 0..{width}")]
    OutOfGrid { id: i64, pos: i64, width: usize },
}

impl CaWorld {
    pub fn width(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self) -> Result<(), CaError> {
        let w = self.width();
        if w == 0 {
            return Err(CaError::Empty);
        }
        for p in &self.particles {
            if p.pos < 0 || p.pos as usize >= w {
                return Err(CaError::OutOfGrid {
                    id: p.id,
                    pos: p.pos,
                    width: w,
                });
            }
        }
        Ok(())
    }

    pub fn momentum(&self) -> i64 {
        self.particles.iter().map(|p| p.vel).sum()
    }
}

pub fn ca_step(world: &CaWorld, alpha: f64) -> Result<CaWorld, CaError> {
    world.validate()?;
    let w = world.width();
    let phi = (0..w)
        .map(|j| {
            let l = world.phi[(j + w - 1) % w];
            let r = world.phi[(j + 1) % w];
            world.phi[j] + alpha * (l - 2.0 * world.phi[j] + r)
        })
        .collect();
    let mut particles: Vec<CaParticle> = world
        .particles
        .iter()
        .map(|p| CaParticle {
            pos: (p.pos + p.vel).rem_euclid(w as i64),
            ..*p
        })
        .collect();
    let mut cells: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, p) in particles.iter().enumerate() {
        cells.entry(p.pos).or_default().push(i);
    }
    for mut group in cells.into_values().filter(|g| g.len() >= 2) {
        group.sort_by_key(|&i| (particles[i].id, i));
        let vels: Vec<i64> = group.iter().map(|&i| particles[i].vel).collect();
        for (k, &i) in group.iter().enumerate() {
            particles[i].vel = vels[(k + 1) % vels.len()];
        }
    }
    Ok(CaWorld { phi, particles })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(id: i64, pos: i64, vel: i64) -> CaParticle {
        CaParticle {
            id,
            pos,
            vel,
            species: 0,
        }
    }

    #[test]
    fn empty_world_keeps_zero_field() {
        let w = CaWorld {
            phi: vec![0.0; 8],
            particles: vec![],
        };
        assert_eq!(ca_step(&w, DEFAULT_ALPHA).unwrap(), w);
    }

    #[test]
    fn single_particle_wraps() {
        let mut w = CaWorld {
            phi: vec![0.0; 10],
            particles: vec![particle(0, 7, 1)],
        };
        for _ in 0..5 {
            w = ca_step(&w, DEFAULT_ALPHA).unwrap();
        }
        assert_eq!(w.particles[0].pos, 2);
    }

    #[test]
    fn diffusion_conserves_field_total() {
        let w = CaWorld {
            phi: vec![0.0, 0.0, 1.0, 0.0, 0.0],
            particles: vec![],
        };
        let out = ca_step(&w, 0.2).unwrap();
        assert!((out.phi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((out.phi[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn three_way_collision_rotates() {
        let w = CaWorld {
            phi: vec![0.0; 10],
            particles: vec![particle(2, 4, 1), particle(0, 6, -1), particle(1, 5, 0)],
        };
        let out = ca_step(&w, 0.0).unwrap();
        assert!(out.particles.iter().all(|p| p.pos == 5));
        let vel = |id| out.particles.iter().find(|p| p.id == id).unwrap().vel;
        assert_eq!((vel(0), vel(1), vel(2)), (0, 1, -1));
        assert_eq!(out.momentum(), w.momentum());
    }

    #[test]
    fn rejects_invalid_worlds() {
        let w = CaWorld {
            phi: vec![],
            particles: vec![],
        };
        assert_eq!(ca_step(&w, 0.2), Err(CaError::Empty));
        let w = CaWorld {
            phi: vec![0.0; 3],
            particles: vec![particle(0, 3, 0)],
        };
        assert!(matches!(ca_step(&w, 0.2), Err(CaError::OutOfGrid { .. })));
    }
}
