pub mod belief_clusters;
pub mod catalog;
pub mod density;
pub mod error;
pub mod hypotheses;
pub mod ingest;
pub mod landscape;
pub mod pairs;
pub mod pipeline;
pub mod projection;
pub mod stance;
pub mod stats;
pub mod svo;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
