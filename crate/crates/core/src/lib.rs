//! Brightness-curve sonification: extract the brightness curve of a film,
//! read it as a sequence of shape gestures and render those gestures as a
//! Standard MIDI File.

pub mod cli;
pub mod compose;
pub mod config;
pub mod curve;
pub mod gesture;
pub mod ingest;
pub mod midi;
pub mod photometry;
pub mod pipeline;
pub mod plot;
pub mod prep;
pub mod report;
pub mod rng;
pub mod segmentation;
pub mod synth;
