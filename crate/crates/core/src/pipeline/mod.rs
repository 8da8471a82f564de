//! Configured end-to-end runs with a content-addressed stage cache.

pub mod cache;
pub mod config;
pub mod figures;
pub mod run;

pub use cache::{Bundle, StageCache, StageKey};
pub use config::{Preparation, Protocol, Quantity, Resolved, RunConfig, ENV_PREFIX};
pub use figures::{reproduce_figure, FigureOptions, FigureReport, FIGURE_TAGS};
pub use run::{prepare_state, run_pipeline, Manifest, Pipeline, Prepared, RunOptions, StageRecord, MANIFEST_FILE};
