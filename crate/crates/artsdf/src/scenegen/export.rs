//! Renders a full dataset to disk: every (instance, state, view) as PPM/PGM
//! pairs plus per-state camera manifests and the dataset manifest.
//!
//! Training views subsample the 60-vertex rig with a seeded shuffle so small
//! view counts still cover the sphere; held-out instances get inference-rig
//! test views instead of training views. Re-exporting with the same
//! configuration produces byte-identical files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::camera_manifest::{write_cameras, NamedCamera};
use crate::io::dataset::{state_dir, DatasetIndex, DatasetManifest};
use crate::io::ppm::{write_pgm, write_ppm};
use crate::scenegen::cameras::{place_cameras, Camera, Intrinsics, Rig};
use crate::scenegen::render_ref::render_reference;
use crate::scenegen::{articulation_grid, build_scene, SceneKind};

/// Everything that determines a dataset's content.
#[derive(Debug, Clone)]
pub struct ExportConfig {
    pub kind: SceneKind,
    pub instances: usize,
    /// How many trailing instances are held out from training (they get
    /// test views only).
    pub holdout: usize,
    pub states: usize,
    /// Training views per state, at most 60.
    pub train_views: usize,
    /// Test views per state for held-out instances, at most 6.
    pub test_views: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub fov_y_deg: f64,
    pub camera_radius: f64,
}

impl ExportConfig {
    pub fn new(kind: SceneKind) -> ExportConfig {
        ExportConfig {
            kind,
            instances: 2,
            holdout: 0,
            states: 3,
            train_views: 12,
            test_views: 4,
            width: 64,
            height: 48,
            seed: 0,
            fov_y_deg: 65.0,
            camera_radius: 2.2,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.instances == 0 || self.states == 0 {
            return bad("need at least one instance and one state".into());
        }
        if self.holdout >= self.instances {
            return bad(format!(
                "holdout {} leaves no training instances out of {}",
                self.holdout, self.instances
            ));
        }
        if self.train_views == 0 || self.train_views > 60 {
            return bad(format!(
                "train_views {} outside 1..=60 (training rig size)",
                self.train_views
            ));
        }
        if self.test_views == 0 || self.test_views > 6 {
            return bad(format!(
                "test_views {} outside 1..=6 (inference rig size)",
                self.test_views
            ));
        }
        Ok(())
    }
}

/// Training cameras: seeded-shuffled subsample of the rotated 60-vertex rig.
pub fn training_cameras(cfg: &ExportConfig) -> Vec<Camera> {
    let intr = Intrinsics::from_fov(cfg.width, cfg.height, cfg.fov_y_deg);
    let mut cams = place_cameras(Rig::Training, cfg.seed, cfg.camera_radius, intr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0x7a1e5);
    cams.shuffle(&mut rng);
    cams.truncate(cfg.train_views);
    cams
}

/// Test cameras: first vertices of the rotated inference rig.
pub fn test_cameras(cfg: &ExportConfig) -> Vec<Camera> {
    let intr = Intrinsics::from_fov(cfg.width, cfg.height, cfg.fov_y_deg);
    let mut cams = place_cameras(Rig::Inference, cfg.seed.wrapping_add(1), cfg.camera_radius, intr);
    cams.truncate(cfg.test_views);
    cams
}

/// Render and write the whole dataset under `out_dir/<category>/`, returning
/// the loaded index. Fails on unwritable paths.
pub fn export_dataset(cfg: &ExportConfig, out_dir: &Path) -> Result<DatasetIndex> {
    cfg.validate()?;
    let root: PathBuf = out_dir.join(cfg.kind.as_str());
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;

    let train_cams = training_cameras(cfg);
    let test_cams = test_cameras(cfg);
    let holdout: BTreeSet<usize> = (cfg.instances - cfg.holdout..cfg.instances).collect();

    let mut articulations = Vec::with_capacity(cfg.instances);
    for i in 0..cfg.instances {
        let scene = build_scene(cfg.kind, cfg.seed, i);
        let grid = articulation_grid(&scene, cfg.states);
        for (j, art) in grid.iter().enumerate() {
            let dir = state_dir(&root, i, j);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut named = Vec::new();
            let is_holdout = holdout.contains(&i);
            let (cams, prefix, mask_prefix) = if is_holdout {
                (&test_cams, "test", "test_mask")
            } else {
                (&train_cams, "view", "mask")
            };
            for (v, cam) in cams.iter().enumerate() {
                let (rgb, mask) = render_reference(&scene, art, cam)?;
                write_ppm(&dir.join(format!("{prefix}_{v:03}.ppm")), &rgb)?;
                write_pgm(&dir.join(format!("{mask_prefix}_{v:03}.pgm")), &mask)?;
                named.push(NamedCamera {
                    name: format!("{prefix}_{v:03}"),
                    camera: cam.clone(),
                });
            }
            write_cameras(&dir.join("cameras.txt"), &named)?;
        }
        articulations.push(grid);
    }

    let manifest = DatasetManifest {
        category: cfg.kind.as_str().to_string(),
        seed: cfg.seed,
        width: cfg.width,
        height: cfg.height,
        instances: cfg.instances,
        holdout,
        articulations,
        train_views: cfg.train_views,
        test_views: cfg.test_views,
    };
    manifest.save(&root)?;
    DatasetIndex::load(&root)
}
