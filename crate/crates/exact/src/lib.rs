//! Exact identification of extrapolated distributions on small discrete
//! Bayesian networks with a selection variable.
//!
//! Everything is computed by brute-force enumeration of the joint, which is
//! also the ground truth the identification formulas are checked against.

pub mod builtins;
pub mod error;
pub mod factor;
pub mod identify;
pub mod net;
pub mod structure;
pub mod witness;

pub use error::{ExactError, Result};
pub use factor::{condition, conditional_mutual_information, joint, marginalize, Factor};
pub use identify::{
    conservative_identify, construct_positive_point, identify_no_shared, oracle_novel_conditional, PositivePoint,
};
pub use net::{DiscreteBayesNet, NetFile, Role, VarId, Variable};
pub use structure::{check_structure, d_separated, SpecificationPartition, StructureReport};
pub use witness::{nonidentifiability_witness, verify_witness, Witness};
