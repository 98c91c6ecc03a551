//! Open-set fault diagnostics: latent representation learning, one-class
//! fault detection, density-based fault segmentation and the metrics used to
//! evaluate them, plus a synthetic turbofan benchmark generator.

pub mod nn;
pub mod vae;
pub mod detector;
pub mod clustering;
pub mod metrics;
pub mod datagen;
pub mod projection;
pub mod experiment;
