//! Core domain for textlab: corpus ingestion, text classifiers, and the
//! classroom model of groups, projects, analyses and labeling.

pub mod classroom;
pub mod corpus;
pub mod fixture;
pub mod store;
pub mod textclf;
pub mod wire;
