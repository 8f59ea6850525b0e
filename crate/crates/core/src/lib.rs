//! Reference-free pairwise ranking of machine translations: data
//! preparation, a built-in logistic ranker, meta-evaluation and
//! system-level ranking.

pub mod desk;
pub mod ingest;
pub mod metaeval;
pub mod pairgen;
pub mod perturb;
pub mod provider;
pub mod ranker;
pub mod report;
pub mod rng;
pub mod sysrank;
pub mod types;
