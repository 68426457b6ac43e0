//! Motor-imagery EEG classification with an attention-gated spatial-temporal
//! graph convolution network over a mutual-information electrode graph.

pub mod cli;
pub mod error;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
