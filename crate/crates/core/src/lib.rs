//! Core library for authoring pictorial charts: chart ingestion and mask
//! synthesis, title semantics, attention-based object extraction and
//! condition fusion, generation-backend orchestration, element replication
//! and data-distortion evaluation.

pub mod chart;
pub mod raster;
pub mod semantics;
pub mod attention;
pub mod genclient;
pub mod modification;
pub mod evaluation;
