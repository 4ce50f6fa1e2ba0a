//! Exact discrete distributions over polytrees.

pub mod bayesnet;
pub mod graph;
pub mod info;
pub mod table;

pub use bayesnet::{mi_score, project_onto, Cpt, DiscreteBayesNet, ModelJson};
pub use graph::{PolytreeGraph, Skeleton};
pub use info::{
    conditional_mutual_information, entropy, hellinger_squared, kl_divergence, mutual_information,
    CmiSource,
};
pub use table::{Alphabet, JointTable, DENSE_BUDGET};
