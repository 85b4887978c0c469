//! Ready-to-run models. The classical and wave models ship as CML sources;
//! the pw and automaton models are generated here from parameters and
//! receive host-built constants through `extern const`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use thiserror::Error;

use super::ca::{CaParticle, CaWorld};
use super::intrinsics::{ca_world_to_value, standard};
use super::pw::{PwCollection, PwPath};
use crate::cml::{compile_with, Diagnostic};
use crate::engine::{CausalModel, EvalError};
use crate::rng::RngStream;
use crate::state::{SystemState, Value};

pub const COUNTER_CML: &str = include_str!("../../models/counter.cml");
pub const HARMONIC_OSCILLATOR_CML: &str = include_str!("../../models/harmonic_oscillator.cml");
pub const FREE_PARTICLE_CML: &str = include_str!("../../models/free_particle.cml");
pub const SCHRODINGER_1D_CML: &str = include_str!("../../models/schrodinger_1d.cml");

pub const BUNDLED: &[&str] = &[
    "counter",
    "harmonic_oscillator",
    "free_particle",
    "schrodinger_1d",
    "double_slit",
    "entangled_pair",
    "qftca_toy",
];

#[derive(Debug, Error)]
pub enum BundledError {
    #[error("unknown model `{name}` (available: {list})", list = BUNDLED.join(", "))]
    UnknownModel { name: String },
    #[error("bad parameter `{key}`: {reason}")]
    BadParam { key: String, reason: String },
    #[error("bundled model failed to compile: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Compile(Vec<Diagnostic>),
    #[error("init failed: {0}")]
    Init(EvalError),
}

/// A compiled bundled model with its time-zero state.
#[derive(Debug, Clone)]
pub struct BundledModel {
    pub model: CausalModel,
    pub init: SystemState,
    /// CML source the model was compiled from.
    pub source: String,
    /// Observable that summarizes one run, used by histograms.
    pub outcome: Option<&'static str>,
}

/// Parsed `key=value` parameters; every key must be consumed.
struct Params<'a> {
    map: &'a BTreeMap<String, String>,
    used: Vec<&'a str>,
}

impl<'a> Params<'a> {
    fn new(map: &'a BTreeMap<String, String>) -> Self {
        Params { map, used: Vec::new() }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.used.push(key);
        self.map.get(key).map(String::as_str)
    }

    fn real(&mut self, key: &'static str, default: f64, positive: bool) -> Result<f64, BundledError> {
        let Some(s) = self.raw(key) else { return Ok(default) };
        let x: f64 = s.parse().map_err(|_| bad(key, format!("`{s}` is not a number")))?;
        if !x.is_finite() || (positive && x <= 0.0) {
            return Err(bad(key, format!("`{s}` must be a finite{} number", if positive { " positive" } else { "" })));
        }
        Ok(x)
    }

    fn int(&mut self, key: &'static str, default: i64, min: i64) -> Result<i64, BundledError> {
        let Some(s) = self.raw(key) else { return Ok(default) };
        let n: i64 = s.parse().map_err(|_| bad(key, format!("`{s}` is not an integer")))?;
        if n < min {
            return Err(bad(key, format!("must be at least {min}")));
        }
        Ok(n)
    }

    fn switch(&mut self, key: &'static str, default: bool) -> Result<bool, BundledError> {
        match self.raw(key) {
            None => Ok(default),
            Some("on" | "true") => Ok(true),
            Some("off" | "false") => Ok(false),
            Some(s) => Err(bad(key, format!("`{s}` is not on|off"))),
        }
    }

    fn finish(self) -> Result<(), BundledError> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(bad(k, "unknown parameter for this model".into())),
            None => Ok(()),
        }
    }
}

fn bad(key: &str, reason: String) -> BundledError {
    BundledError::BadParam {
        key: key.to_string(),
        reason,
    }
}

/// Shortest round-tripping literal.
fn lit(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e']) {
        s
    } else {
        format!("{s}.0")
    }
}

/// Compiles `name` with `params`.
pub fn build_bundled(name: &str, params: &BTreeMap<String, String>) -> Result<BundledModel, BundledError> {
    let mut p = Params::new(params);
    let (source, externs, outcome) = match name {
        "counter" => (COUNTER_CML.to_string(), BTreeMap::new(), Some("n")),
        "harmonic_oscillator" => (HARMONIC_OSCILLATOR_CML.to_string(), BTreeMap::new(), None),
        "free_particle" => (FREE_PARTICLE_CML.to_string(), BTreeMap::new(), None),
        "schrodinger_1d" => (SCHRODINGER_1D_CML.to_string(), BTreeMap::new(), None),
        "double_slit" => {
            let (src, ext) = double_slit(&mut p)?;
            (src, ext, Some("bin"))
        }
        "entangled_pair" => {
            let (src, ext) = entangled_pair();
            (src, ext, Some("spin_a"))
        }
        "qftca_toy" => {
            let (src, ext) = qftca_toy(&mut p)?;
            (src, ext, None)
        }
        other => return Err(BundledError::UnknownModel { name: other.to_string() }),
    };
    p.finish()?;
    let compiled = compile_with(&source, &externs, standard()).map_err(BundledError::Compile)?;
    // Bundled init blocks never draw; the stream only satisfies the API.
    let init = compiled
        .model
        .init_state(&mut RngStream::new(0))
        .map_err(BundledError::Init)?;
    Ok(BundledModel {
        model: compiled.model,
        init,
        source,
        outcome,
    })
}

/// Geometry of the two-slit setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitGeometry {
    pub separation: f64,
    pub distance: f64,
    pub k: f64,
    /// Envelope width of each slit's fan.
    pub width: f64,
    /// Number of detector bins; bin `j` spans `[2j - bins, 2j - bins + 2)`.
    pub bins: usize,
}

impl Default for SlitGeometry {
    fn default() -> Self {
        SlitGeometry {
            separation: 5.0,
            distance: 100.0,
            k: TAU,
            width: 60.0,
            bins: 64,
        }
    }
}

impl SlitGeometry {
    pub fn slits(&self) -> [f64; 2] {
        [-self.separation / 2.0, self.separation / 2.0]
    }

    /// Bin edges, two units apart and centered on zero.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|j| 2.0 * j as f64 - self.bins as f64).collect()
    }

    /// Screen points, one at each bin center.
    pub fn screen(&self) -> Vec<f64> {
        (0..self.bins).map(|j| 2.0 * j as f64 + 1.0 - self.bins as f64).collect()
    }
}

/// Source beam: one path per slit, equal amplitudes.
pub fn two_slit_source(geo: &SlitGeometry) -> PwCollection {
    let paths = geo
        .slits()
        .iter()
        .map(|&y| PwPath::new(vec![vec![Value::Real(y), Value::Real(0.0)]], Complex64::new(FRAC_1_SQRT_2, 0.0)))
        .collect();
    PwCollection::new(vec!["position".into(), "velocity".into()], 1, paths).expect("well-formed source")
}

fn double_slit(p: &mut Params<'_>) -> Result<(String, BTreeMap<String, Value>), BundledError> {
    let detector = p.switch("detector", false)?;
    let d = SlitGeometry::default();
    let geo = SlitGeometry {
        separation: p.real("separation", d.separation, true)?,
        distance: p.real("distance", d.distance, true)?,
        k: p.real("k", d.k, true)?,
        width: p.real("width", d.width, true)?,
        bins: p.int("bins", d.bins as i64, 2)? as usize,
    };
    if geo.separation / 2.0 >= geo.bins as f64 {
        return Err(bad("separation", "slits must lie within the detector span".into()));
    }
    let mut ext = BTreeMap::new();
    ext.insert("SOURCE".to_string(), Value::Pw(two_slit_source(&geo)));

    // Stages: [which-path,] diffract, fly, detect.
    let mut laws = String::new();
    let mut stage = 0;
    if detector {
        laws += &format!(
            "    // A which-path detector at the slits realizes one path.\n    \
             law WhichPath {{\n        when stage == {stage};\n        \
             then {{ beam = pw_interact(beam); stage = {}; }}\n    }}\n",
            stage + 1
        );
        stage += 1;
    }
    laws += &format!(
        "    law Diffract {{\n        when stage == {stage};\n        \
         then {{ beam = pw_diffract(beam, SCREEN, L, W, T, K); stage = {}; }}\n    }}\n",
        stage + 1
    );
    stage += 1;
    laws += &format!(
        "    law Fly {{\n        when stage == {stage};\n        \
         then {{ beam = pw_propagate(beam, T, true); stage = {}; }}\n    }}\n",
        stage + 1
    );
    stage += 1;
    laws += &format!(
        "    law Detect {{\n        when stage == {stage};\n        \
         then {{ bin = pw_detect(beam, EDGES, MARKED); stage = {}; }}\n    }}\n",
        stage + 1
    );
    stage += 1;
    let bins = geo.bins;
    let src = format!(
        "// Two slits, a screen of {bins} bins, and a particle whose paths pass both slits.\n\
         model double_slit {{\n    \
         extern const SOURCE: pw{{position: real, velocity: real}};\n    \
         const EDGES: list<real> = [2.0 * j - {bins}.0 for j in range({})];\n    \
         const SCREEN: list<real> = [2.0 * j + 1.0 - {bins}.0 for j in range({bins})];\n    \
         const L: real = {};\n    const K: real = {};\n    const W: real = {};\n    const T: real = 1.0;\n    \
         const MARKED: bool = {detector};\n    \
         state {{\n        beam: pw{{position: real, velocity: real}};\n        \
         stage: int in [0, {stage}];\n        bin: int in [0, {}];\n    }}\n    \
         init {{\n        beam = SOURCE;\n        stage = 0;\n        bin = 0;\n    }}\n    \
         halt when stage == {stage};\n{laws}}}\n",
        bins + 1,
        lit(geo.distance),
        lit(geo.k),
        lit(geo.width),
        bins - 1,
    );
    Ok((src, ext))
}

/// Two spin-1/2 particles in the singlet-like superposition of
/// (+1, -1) and (-1, +1).
pub fn entangled_source() -> PwCollection {
    let path = |a: i64, b: i64| {
        PwPath::new(
            vec![vec![Value::Int(a)], vec![Value::Int(b)]],
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        )
    };
    PwCollection::new(vec!["spin".into()], 2, vec![path(1, -1), path(-1, 1)]).expect("well-formed pair")
}

fn entangled_pair() -> (String, BTreeMap<String, Value>) {
    let mut ext = BTreeMap::new();
    ext.insert("PAIR".to_string(), Value::Pw(entangled_source()));
    let src = "// Two entangled particles; measuring realizes one joint path.\n\
model entangled_pair {
    extern const PAIR: pw{spin: int};
    state {
        pair: pw{spin: int};
        spin_a: int in {-1, 0, 1};
        spin_b: int in {-1, 0, 1};
        measured: bool;
    }
    init {
        pair = PAIR;
        spin_a = 0;
        spin_b = 0;
        measured = false;
    }
    halt when measured;
    law Measure {
        when !measured;
        then {
            let c = pw_interact(pair);
            pair = c;
            spin_a = pw_attr(c, 0, \"spin\");
            spin_b = pw_attr(c, 1, \"spin\");
            measured = true;
        }
    }
}
"
    .to_string();
    (src, ext)
}

/// Ring of `width` cells with two particles approaching head-on and a
/// unit field bump in the middle.
pub fn head_on_world(width: usize) -> CaWorld {
    let mut phi = vec![0.0; width];
    phi[width / 2] = 1.0;
    CaWorld {
        phi,
        particles: vec![
            CaParticle {
                id: 0,
                pos: (width / 5) as i64,
                vel: 1,
                species: 0,
            },
            CaParticle {
                id: 1,
                pos: (3 * width / 5) as i64,
                vel: -1,
                species: 0,
            },
        ],
    }
}

fn qftca_toy(p: &mut Params<'_>) -> Result<(String, BTreeMap<String, Value>), BundledError> {
    let width = p.int("width", 10, 5)? as usize;
    let alpha = p.real("alpha", super::ca::DEFAULT_ALPHA, false)?;
    if !(0.0..=0.5).contains(&alpha) {
        return Err(bad("alpha", "diffusion rate must lie in [0, 0.5]".into()));
    }
    let mut ext = BTreeMap::new();
    ext.insert(
        "WORLD0".to_string(),
        ca_world_to_value(&head_on_world(width), "World", "Particle"),
    );
    let src = format!(
        "// Cellular automaton of a diffusing field and colliding particles.\n\
model qftca_toy {{
    record Particle {{ id: int; pos: int; vel: int; species: int; }}
    record World {{ phi: list<real>; particles: list<Particle>; }}
    extern const WORLD0: World;
    const ALPHA: real = {};
    state {{
        world: World;
        momentum: int;
    }}
    init {{
        world = WORLD0;
        momentum = sum([p.vel for p in WORLD0.particles]);
    }}
    timestep 1.0;
    law Tick {{
        when true;
        then {{
            let next = ca_step(world, ALPHA);
            world = next;
            momentum = sum([p.vel for p in next.particles]);
        }}
    }}
}}
",
        lit(alpha)
    );
    Ok((src, ext))
}
