//! Explicit-state CTL model checking by input-based three-valued
//! abstraction refinement.

pub mod bitvec3;
pub mod sysir;
pub mod genauto;
pub mod mc3;
pub mod statespace;
pub mod refine;
pub mod oracle;
pub mod cli;
