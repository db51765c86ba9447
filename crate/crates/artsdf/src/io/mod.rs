//! File formats: images, camera manifests, dataset layout, checkpoints,
//! code files, and flat key-value configuration documents.

mod bin;
pub mod camera_manifest;
pub mod checkpoint;
pub mod codes;
pub mod config;
pub mod dataset;
pub mod ppm;

pub use camera_manifest::{read_cameras, write_cameras, NamedCamera};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use codes::{load_codes, save_codes, CodesFile};
pub use config::Kv;
pub use dataset::{DatasetIndex, DatasetManifest, StateViews, ViewRecord};
pub use ppm::{read_pgm, read_ppm, write_pgm, write_ppm};
