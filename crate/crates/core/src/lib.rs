//! Gravitational dephasing of coherent spin states in optical lattice clocks.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`]: constants, clock species, lattice geometry, redshift and
//!   quantum projection noise.
//! * [`dephasing`]: Bloch-vector sum over lattice layers and its Dirichlet
//!   closed form.
//! * [`threshold`]: lattice size at which the top-to-bottom redshift reaches
//!   the SQL, and the longest interrogation time before dephasing does.
//! * [`sweep`]: best 1 s stability versus ensemble size and scaling exponents.
//! * [`systematics`]: differential systematic shifts compared with the
//!   gravitational signal.
//! * [`scenario`], [`output`], [`run`]: configuration files, deterministic
//!   CSV/JSON emission and the command dispatcher behind the `gravclock` binary.

pub mod dephasing;
pub mod error;
pub mod output;
pub mod physics;
pub mod roots;
pub mod run;
pub mod scenario;
pub mod sweep;
pub mod systematics;
pub mod threshold;

pub use error::{Error, Result};
