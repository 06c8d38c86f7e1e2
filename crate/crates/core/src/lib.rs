pub mod config;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod manifest;
pub mod docx;
pub mod latex;
pub mod render;
pub mod extract;
pub mod structure;
pub mod metrics;
pub mod dataset;
