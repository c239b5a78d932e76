//! Blind watermarking of binary text images by modulating the thickness of
//! each character's core.

pub mod core_model;
pub mod embedder;
pub mod extractor;
pub mod channel;
pub mod cli;
pub mod corpus;
pub mod imageio;
pub mod payload;
pub mod segmentation;
