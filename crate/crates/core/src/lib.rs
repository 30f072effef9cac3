//! Scrambled Cantor sets for Li-Yorke chaotic systems, built and certified
//! at finite depth with exact dyadic arithmetic.
//!
//! * [`cantor`]: binary words, the dense family `s_n`, the digraph G0 and
//!   finite Cantor schemes.
//! * [`systems`]: the full shift, subshifts of finite type and the tent map,
//!   evaluated exactly over cells.
//! * [`relations`]: finite-horizon proximality and separation checks.
//! * [`fusion`]: approximations, configurations and the fusion engine that
//!   produces G0-homomorphisms onto cliques, plus Mycielski fusion.
//! * [`scrambler`]: explicit scrambled schemes and the transversal pipeline.
//! * [`certificate`] and [`verify`]: the certificate format and its checker.
//! * [`cli`]: the `scrambled` command line.

pub mod cantor;
pub mod certificate;
pub mod cli;
pub mod dyadic;
pub mod fusion;
pub mod relations;
pub mod scrambler;
pub mod systems;
pub mod verify;

pub use cantor::{Scheme, Word};
pub use dyadic::Dyadic;
pub use systems::{Cell, SystemHandle};
