pub mod bundled;
pub mod ca;
pub mod classical;
pub mod intrinsics;
pub mod pw;
pub mod schrodinger;

pub use ca::{ca_step, CaParticle, CaWorld};
pub use classical::{classical_step, Particle};
pub use pw::{DetectMode, PwCollection, PwError, PwPath};
pub use schrodinger::{GridWave, SolveError};
pub use bundled::{build_bundled, BundledError, BundledModel, BUNDLED};
