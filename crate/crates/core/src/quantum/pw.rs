//! Particle/wave collections.
//!
//! A collection is two-dimensional: `particles` entangled particles on one
//! axis and discrete paths on the other. Each path fixes every attribute of
//! every particle and carries one complex amplitude. An interaction realizes
//! a single path and discards the others.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::random::{born_probabilities, BranchSignal, Chooser};
use crate::state::{TypeDesc, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwPath {
    /// `values[particle][attr]`
    pub values: Vec<Vec<Value>>,
    pub amplitude: Complex64,
    /// Phase rate applied during propagation when phase evolution is on.
    #[serde(default)]
    pub omega: f64,
}

impl PwPath {
    pub fn new(values: Vec<Vec<Value>>, amplitude: Complex64) -> Self {
        PwPath {
            values,
            amplitude,
            omega: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwCollection {
    pub attrs: Vec<String>,
    pub particles: usize,
    pub paths: Vec<PwPath>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PwError {
    #[error("pw collection has zero norm")]
    ZeroNorm,
    #[error("pw collection has no attribute `{0}`")]
    MissingAttribute(String),
    #[error("position {0} lies outside every detector bin")]
    PositionOutOfBins(f64),
    #[error("malformed pw collection: {0}")]
    Shape(String),
    #[error("expected a collapsed (single-path) collection, found {0} paths")]
    NotCollapsed(usize),
    #[error("{0}")]
    Draw(BranchSignal),
}

/// How detection combines amplitudes that land in the same bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectMode {
    /// No which-path record: `P = |sum a|^2`.
    Coherent,
    /// Which-path information exists: `P = sum |a|^2`.
    Marked,
}

impl PwCollection {
    pub fn new(attrs: Vec<String>, particles: usize, paths: Vec<PwPath>) -> Result<Self, PwError> {
        let pw = PwCollection {
            attrs,
            particles,
            paths,
        };
        pw.check_shape()?;
        Ok(pw)
    }

    fn check_shape(&self) -> Result<(), PwError> {
        if self.particles == 0 {
            return Err(PwError::Shape("needs at least one particle".into()));
        }
        if self.paths.is_empty() {
            return Err(PwError::Shape("needs at least one path".into()));
        }
        for (i, p) in self.paths.iter().enumerate() {
            if p.values.len() != self.particles
                || p.values.iter().any(|v| v.len() != self.attrs.len())
            {
                return Err(PwError::Shape(format!(
                    "path {i} does not assign every attribute of every particle"
                )));
            }
        }
        Ok(())
    }

    pub fn attr_index(&self, name: &str) -> Result<usize, PwError> {
        self.attrs
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| PwError::MissingAttribute(name.to_string()))
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.amplitude).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.paths.iter().map(|p| p.amplitude.norm_sqr()).sum()
    }

    /// Rescales amplitudes so that `sum |a|^2 = 1`.
    pub fn normalize(&mut self) -> Result<(), PwError> {
        let n = self.norm_sqr();
        if !(n > 0.0) {
            return Err(PwError::ZeroNorm);
        }
        let s = n.sqrt();
        for p in &mut self.paths {
            p.amplitude /= s;
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-9
    }

    /// Born weights of the paths.
    pub fn path_probabilities(&self) -> Result<Vec<f64>, PwError> {
        born_probabilities(&self.amplitudes()).map_err(|_| PwError::ZeroNorm)
    }

    pub(crate) fn matches_attrs(&self, decl: &[(String, TypeDesc)]) -> bool {
        self.attrs.len() == decl.len()
            && self.attrs.iter().zip(decl).all(|(a, (d, _))| a == d)
            && self.check_shape().is_ok()
            && self.paths.iter().all(|p| {
                p.values
                    .iter()
                    .all(|vals| vals.iter().zip(decl).all(|(v, (_, t))| v.shallow_matches(t)))
            })
    }

    pub(crate) fn approx_eq(&self, other: &PwCollection, tol: f64) -> bool {
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= tol;
        self.attrs == other.attrs
            && self.particles == other.particles
            && self.paths.len() == other.paths.len()
            && self.paths.iter().zip(&other.paths).all(|(a, b)| {
                close(a.amplitude.re, b.amplitude.re)
                    && close(a.amplitude.im, b.amplitude.im)
                    && close(a.omega, b.omega)
                    && a.values.iter().zip(&b.values).all(|(x, y)| {
                        x.len() == y.len() && x.iter().zip(y).all(|(u, v)| u.approx_eq(v, tol))
                    })
            })
    }

    fn real_attr(&self, path: usize, particle: usize, attr: usize) -> Result<f64, PwError> {
        self.paths[path].values[particle][attr]
            .as_f64()
            .ok_or_else(|| PwError::Shape(format!("attribute `{}` is not numeric", self.attrs[attr])))
    }
}

/// Advances every path's positions by `velocity * dt`. With `phase` on, each
/// amplitude also picks up `exp(i * omega * dt)`.
pub fn pw_propagate(pw: &PwCollection, dt: f64, phase: bool) -> Result<PwCollection, PwError> {
    let pos = pw.attr_index("position")?;
    let vel = pw.attr_index("velocity")?;
    let mut out = pw.clone();
    for (pi, path) in out.paths.iter_mut().enumerate() {
        for k in 0..pw.particles {
            let x = pw.real_attr(pi, k, pos)?;
            let v = pw.real_attr(pi, k, vel)?;
            path.values[k][pos] = Value::Real(x + v * dt);
        }
        if phase && path.omega != 0.0 {
            path.amplitude *= Complex64::from_polar(1.0, path.omega * dt);
        }
    }
    Ok(out)
}

/// Realizes an interaction: one path is drawn with Born weights, all others
/// are discarded, and the survivor is renormalized to modulus one. All
/// particles' attributes come from the same path.
pub fn pw_interact(
    pw: &PwCollection,
    chooser: &mut dyn Chooser,
) -> Result<(usize, PwCollection), PwError> {
    let probs = pw.path_probabilities()?;
    let idx = chooser
        .categorical(&probs, &|i| format!("path{i}"))
        .map_err(PwError::Draw)?;
    let mut survivor = pw.paths[idx].clone();
    let m = survivor.amplitude.norm();
    survivor.amplitude /= m;
    Ok((
        idx,
        PwCollection {
            attrs: pw.attrs.clone(),
            particles: pw.particles,
            paths: vec![survivor],
        },
    ))
}

/// Bin of `x` for ascending `edges`; bins are `[e_k, e_{k+1})` with the last
/// one closed.
pub fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len();
    if n < 2 || !(x >= edges[0] && x <= edges[n - 1]) {
        return None;
    }
    let k = edges.partition_point(|&e| e <= x);
    Some((k - 1).min(n - 2))
}

/// Unnormalized detection weight per bin.
pub fn detection_weights(
    pw: &PwCollection,
    edges: &[f64],
    mode: DetectMode,
) -> Result<Vec<f64>, PwError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PwError::Shape("bin edges must be strictly increasing".into()));
    }
    let pos = pw.attr_index("position")?;
    let bins = edges.len() - 1;
    let mut coherent = vec![Complex64::new(0.0, 0.0); bins];
    let mut marked = vec![0.0; bins];
    for (pi, path) in pw.paths.iter().enumerate() {
        let x = pw.real_attr(pi, 0, pos)?;
        let k = bin_of(edges, x).ok_or(PwError::PositionOutOfBins(x))?;
        coherent[k] += path.amplitude;
        marked[k] += path.amplitude.norm_sqr();
    }
    Ok(match mode {
        DetectMode::Coherent => coherent.iter().map(|a| a.norm_sqr()).collect(),
        DetectMode::Marked => marked,
    })
}

/// Draws the bin where the (first) particle is registered.
pub fn pw_detect(
    pw: &PwCollection,
    edges: &[f64],
    mode: DetectMode,
    chooser: &mut dyn Chooser,
) -> Result<usize, PwError> {
    let w = detection_weights(pw, edges, mode)?;
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(PwError::ZeroNorm);
    }
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    chooser
        .categorical(&probs, &|i| format!("bin{i}"))
        .map_err(PwError::Draw)
}

/// Attribute of one particle in a collapsed collection.
pub fn pw_attr(pw: &PwCollection, particle: usize, attr: &str) -> Result<Value, PwError> {
    if pw.paths.len() != 1 {
        return Err(PwError::NotCollapsed(pw.paths.len()));
    }
    let a = pw.attr_index(attr)?;
    pw.paths[0]
        .values
        .get(particle)
        .map(|v| v[a].clone())
        .ok_or_else(|| PwError::Shape(format!("no particle {particle}")))
}

/// Screen geometry for [`pw_diffract`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diffraction<'a> {
    /// Transverse screen coordinates, one path per point and input path.
    pub screen: &'a [f64],
    /// Distance from the aperture plane to the screen.
    pub distance: f64,
    /// Width of the Gaussian envelope `|env|^2` around each aperture.
    pub width: f64,
    pub flight_time: f64,
    /// Wave number.
    pub k: f64,
}

/// Fans every input path out to each screen point. Each new path starts at
/// the input path's transverse position, moves to the screen point within
/// `flight_time`, and accrues phase `k * r` over the flight (`omega = k r / T`)
/// where `r` is the path length. The fan of each input path is normalized to
/// that path's weight.
pub fn pw_diffract(pw: &PwCollection, geo: &Diffraction<'_>) -> Result<PwCollection, PwError> {
    if pw.particles != 1 {
        return Err(PwError::Shape("diffraction expects a single-particle collection".into()));
    }
    if geo.screen.is_empty() || !(geo.flight_time > 0.0) || !(geo.width > 0.0) {
        return Err(PwError::Shape("diffraction needs screen points, width > 0, flight_time > 0".into()));
    }
    let pos = pw.attr_index("position")?;
    let vel = pw.attr_index("velocity")?;
    let mut paths = Vec::with_capacity(pw.paths.len() * geo.screen.len());
    for (pi, src) in pw.paths.iter().enumerate() {
        let y0 = pw.real_attr(pi, 0, pos)?;
        let env: Vec<f64> = geo
            .screen
            .iter()
            .map(|y| (-(y - y0).powi(2) / (4.0 * geo.width * geo.width)).exp())
            .collect();
        let scale = env.iter().map(|e| e * e).sum::<f64>().sqrt();
        for (y, e) in geo.screen.iter().zip(&env) {
            let r = (geo.distance * geo.distance + (y - y0).powi(2)).sqrt();
            let mut values = src.values.clone();
            values[0][vel] = Value::Real((y - y0) / geo.flight_time);
            paths.push(PwPath {
                values,
                amplitude: src.amplitude * (e / scale),
                omega: geo.k * r / geo.flight_time,
            });
        }
    }
    PwCollection::new(pw.attrs.clone(), 1, paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn line_pw(points: &[(f64, f64, Complex64)]) -> PwCollection {
        PwCollection::new(
            vec!["position".into(), "velocity".into()],
            1,
            points
                .iter()
                .map(|&(x, v, a)| PwPath::new(vec![vec![Value::Real(x), Value::Real(v)]], a))
                .collect(),
        )
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn propagation_moves_positions_and_keeps_norm() {
        let pw = line_pw(&[(0.0, 2.0, c(0.6, 0.0)), (1.0, -1.0, c(0.0, 0.8))]);
        let out = pw_propagate(&pw, 0.5, false).unwrap();
        assert_eq!(out.paths[0].values[0][0], Value::Real(1.0));
        assert_eq!(out.paths[1].values[0][0], Value::Real(0.5));
        assert_eq!(out.amplitudes(), pw.amplitudes());
        assert!((out.norm_sqr() - pw.norm_sqr()).abs() < 1e-15);
        assert_eq!(pw_propagate(&pw, 0.0, true).unwrap(), pw);
    }

    #[test]
    fn single_path_interaction_is_certain() {
        let pw = line_pw(&[(0.0, 0.0, c(0.3, 0.4))]);
        let (i, out) = pw_interact(&pw, &mut RngStream::new(1)).unwrap();
        assert_eq!(i, 0);
        assert!((out.paths[0].amplitude.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coherent_same_bin_doubles_marked() {
        let a = Complex64::from_polar(FRAC_1_SQRT_2, 0.7);
        let pw = line_pw(&[(0.5, 0.0, a), (0.5, 0.0, a)]);
        let edges = [0.0, 1.0, 2.0];
        let coh = detection_weights(&pw, &edges, DetectMode::Coherent).unwrap();
        let mk = detection_weights(&pw, &edges, DetectMode::Marked).unwrap();
        assert!((coh[0] / mk[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn opposite_amplitudes_cancel() {
        let pw = line_pw(&[
            (0.5, 0.0, c(FRAC_1_SQRT_2, 0.0)),
            (0.5, 0.0, c(-FRAC_1_SQRT_2, 0.0)),
            (1.5, 0.0, c(0.1, 0.0)),
        ]);
        let coh = detection_weights(&pw, &[0.0, 1.0, 2.0], DetectMode::Coherent).unwrap();
        assert!(coh[0].abs() < 1e-30);
        let mut rng = RngStream::new(4);
        for _ in 0..200 {
            assert_eq!(pw_detect(&pw, &[0.0, 1.0, 2.0], DetectMode::Coherent, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn one_path_modes_agree() {
        let pw = line_pw(&[(1.2, 0.0, c(0.2, -0.9))]);
        let edges = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(
            detection_weights(&pw, &edges, DetectMode::Coherent).unwrap(),
            detection_weights(&pw, &edges, DetectMode::Marked).unwrap()
        );
    }

    #[test]
    fn positions_outside_bins_are_errors() {
        let pw = line_pw(&[(5.0, 0.0, c(1.0, 0.0))]);
        assert_eq!(
            detection_weights(&pw, &[0.0, 1.0], DetectMode::Marked),
            Err(PwError::PositionOutOfBins(5.0))
        );
    }

    #[test]
    fn bin_lookup_edges() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(bin_of(&e, 0.0), Some(0));
        assert_eq!(bin_of(&e, 1.0), Some(1));
        assert_eq!(bin_of(&e, 2.0), Some(1));
        assert_eq!(bin_of(&e, -0.1), None);
    }

    #[test]
    fn zero_norm_is_rejected() {
        let pw = line_pw(&[(0.0, 0.0, c(0.0, 0.0))]);
        assert_eq!(pw_interact(&pw, &mut RngStream::new(0)).unwrap_err(), PwError::ZeroNorm);
    }

    #[test]
    fn diffraction_fans_are_normalized() {
        let pw = line_pw(&[(-2.5, 0.0, c(FRAC_1_SQRT_2, 0.0)), (2.5, 0.0, c(FRAC_1_SQRT_2, 0.0))]);
        let screen: Vec<f64> = (0..8).map(|j| -7.0 + 2.0 * j as f64).collect();
        let out = pw_diffract(
            &pw,
            &Diffraction {
                screen: &screen,
                distance: 100.0,
                width: 60.0,
                flight_time: 1.0,
                k: 1.0,
            },
        )
        .unwrap();
        assert_eq!(out.paths.len(), 16);
        assert!(out.is_normalized());
        let moved = pw_propagate(&out, 1.0, false).unwrap();
        let x = moved.paths[3].values[0][0].as_f64().unwrap();
        assert!((x - screen[3]).abs() < 1e-12);
    }
}
