//! Incompatibility witnesses for pairs of channels between finite-dimensional
//! von Neumann algebras.
//!
//! Algebras are direct sums of full matrix blocks, channels are stored in
//! Choi form, and every optimization over channels is a small dense SDP.

pub mod algebra;
pub mod catalog;
pub mod channel;
pub mod compat;
pub mod error;
pub mod io;
pub mod linalg;
pub mod sampling;
pub mod sdp;
pub mod witness;

pub use algebra::{Algebra, AlgebraElement, Measurement, StateEnsemble, StateFunctional};
pub use channel::{Channel, ChannelReport, Factor};
pub use compat::{check_compatibility, max_over_compatible, p_post, p_prior, p_prior_given, CompatibilityVerdict, Decision};
pub use error::{Error, Result};
pub use io::JsonFormat;
pub use linalg::{ComplexMatrix, HermitianMatrix, C64};
pub use sdp::{SdpProblem, SdpSolution, SolveStatus};
pub use witness::{DiscriminationTask, WitnessForm};
