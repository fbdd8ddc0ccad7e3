//! Standard-library companion to `tracelm-core`: dataset loaders, the
//! on-disk formats every pipeline stage exchanges (model files, score
//! tables, manifests, ensemble specs, reports), and the command
//! implementations behind the `tracelm` binary.
//!
//! The pipeline is staged through files on purpose — train on one corpus,
//! score another, combine score tables from several models — and every
//! command writes a manifest echoing its fully resolved configuration so
//! any run can be reproduced exactly from its outputs.

#![forbid(unsafe_code)]

pub mod commands;
pub mod dataset;
pub mod ensemble_file;
pub mod manifest;
pub mod model_file;
pub mod report;
pub mod tables;
