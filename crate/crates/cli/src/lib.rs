//! Library side of the `genebma` command-line tool.

pub mod app;
pub mod manifest;
pub mod pipeline;
