//! Community-spectral botnet detection pipeline: modularity analysis of
//! a traffic graph, a simulated quantum sign-extraction circuit built
//! from that spectrum, and a candidate-elimination readout, with
//! classical oracles that check every stage.

pub mod error;
pub mod graph;
pub mod hypergraph;
pub mod oracle;
pub mod pipeline;
pub mod qsp;
pub mod qsvt;
pub mod readout;
pub mod seeding;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
