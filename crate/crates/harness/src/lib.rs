//! Bundled tasks, the end-to-end pipeline, trial aggregation and reports.

pub mod assets;
pub mod corpus;
pub mod golden;
pub mod pipeline;
pub mod report;
