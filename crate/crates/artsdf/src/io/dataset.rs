//! Dataset directory layout and the manifest that describes it.
//!
//! A generated dataset lives under one root directory:
//!
//! ```text
//! <root>/
//!   manifest.txt                     dataset-wide metadata (below)
//!   instance_000/
//!     state_000/
//!       cameras.txt                  all cameras for this state
//!       view_000.ppm  mask_000.pgm   training views
//!       ...
//!       test_000.ppm  test_mask_000.pgm   (held-out instances only)
//!     state_001/ ...
//!   instance_001/ ...
//! ```
//!
//! The manifest records the scene category, generation seed, image size,
//! which instances are held out from training, and the ground-truth
//! articulation parameters of every state. The articulation values exist for
//! evaluation only; the trainer never reads them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::camera_manifest::{read_cameras, NamedCamera};
use crate::io::config::Kv;

const MANIFEST_NAME: &str = "manifest.txt";

/// One posed training or test view: camera plus its image files.
#[derive(Debug, Clone)]
pub struct ViewRecord {
    pub name: String,
    pub camera: crate::scenegen::cameras::Camera,
    pub rgb_path: PathBuf,
    pub mask_path: PathBuf,
}

/// The views of one (instance, state) cell.
#[derive(Debug, Clone, Default)]
pub struct StateViews {
    pub train: Vec<ViewRecord>,
    pub test: Vec<ViewRecord>,
}

/// Dataset-wide metadata stored in `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Scene category name ("laptop", "drawer", "cabinet").
    pub category: String,
    /// Seed that generated geometry, albedos, and camera rigs.
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub instances: usize,
    /// Instance indices excluded from training (inference targets).
    pub holdout: BTreeSet<usize>,
    /// Ground-truth articulation vector per `[instance][state]`, evaluation
    /// only. States correspond across instances by shared range fractions,
    /// so absolute values may differ where instance size scales a joint
    /// range.
    pub articulations: Vec<Vec<Vec<f64>>>,
    pub train_views: usize,
    pub test_views: usize,
}

impl DatasetManifest {
    pub fn save(&self, root: &Path) -> Result<()> {
        let mut kv = Kv::new();
        kv.set("format", "artsdf-dataset v1");
        kv.set("category", &self.category);
        kv.set("seed", self.seed);
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("instances", self.instances);
        kv.set(
            "holdout",
            self.holdout
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        kv.set("states", self.n_states());
        kv.set("train_views", self.train_views);
        kv.set("test_views", self.test_views);
        for (i, per_state) in self.articulations.iter().enumerate() {
            for (j, art) in per_state.iter().enumerate() {
                let mut line = String::new();
                for (d, v) in art.iter().enumerate() {
                    if d > 0 {
                        line.push(' ');
                    }
                    let _ = write!(line, "{v}");
                }
                kv.set(&format!("articulation_{i:03}_{j:03}"), line);
            }
        }
        kv.write_file(&root.join(MANIFEST_NAME))
    }

    pub fn load(root: &Path) -> Result<DatasetManifest> {
        let path = root.join(MANIFEST_NAME);
        let kv = Kv::read_file(&path)?;
        let perr = |detail: String| Error::parse(&path, detail);
        let format = kv.str("format").map_err(&perr)?;
        if format != "artsdf-dataset v1" {
            return Err(Error::VersionMismatch {
                what: "dataset manifest".into(),
                found: format.into(),
                expected: "artsdf-dataset v1".into(),
            });
        }
        let states: usize = kv.parse_as("states").map_err(&perr)?;
        let instances: usize = kv.parse_as("instances").map_err(&perr)?;
        let mut articulations = Vec::with_capacity(instances);
        for i in 0..instances {
            let mut per_state = Vec::with_capacity(states);
            for j in 0..states {
                let key = format!("articulation_{i:03}_{j:03}");
                let line = kv.str(&key).map_err(&perr)?;
                let art: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr(format!("bad articulation in '{key}'")))?;
                per_state.push(art);
            }
            articulations.push(per_state);
        }
        let holdout = kv
            .str("holdout")
            .map_err(&perr)?
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<BTreeSet<_>, _>>()
            .map_err(|_| perr("bad holdout list".into()))?;
        Ok(DatasetManifest {
            category: kv.str("category").map_err(&perr)?.to_string(),
            seed: kv.parse_as("seed").map_err(&perr)?,
            width: kv.parse_as("width").map_err(&perr)?,
            height: kv.parse_as("height").map_err(&perr)?,
            instances,
            holdout,
            articulations,
            train_views: kv.parse_as("train_views").map_err(&perr)?,
            test_views: kv.parse_as("test_views").map_err(&perr)?,
        })
    }

    pub fn n_states(&self) -> usize {
        self.articulations.first().map_or(0, Vec::len)
    }
}

/// Relative directory of one (instance, state) cell.
pub fn state_dir(root: &Path, instance: usize, state: usize) -> PathBuf {
    root.join(format!("instance_{instance:03}"))
        .join(format!("state_{state:03}"))
}

/// In-memory index of a dataset directory: manifest plus, for every
/// (instance, state), the posed views with their image paths.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    /// `views[instance][state]`.
    pub views: Vec<Vec<StateViews>>,
}

impl DatasetIndex {
    /// Read the manifest and every per-state camera file, resolving image
    /// paths by the naming convention. Verifies that every training cell has
    /// at least one view and that image sizes match the manifest.
    pub fn load(root: &Path) -> Result<DatasetIndex> {
        let manifest = DatasetManifest::load(root)?;
        let mut views = Vec::with_capacity(manifest.instances);
        for i in 0..manifest.instances {
            let mut per_state = Vec::with_capacity(manifest.n_states());
            for j in 0..manifest.n_states() {
                let dir = state_dir(root, i, j);
                let cam_path = dir.join("cameras.txt");
                let cams = read_cameras(&cam_path)?;
                let mut sv = StateViews::default();
                for NamedCamera { name, camera } in cams {
                    if camera.intrinsics.width != manifest.width
                        || camera.intrinsics.height != manifest.height
                    {
                        return Err(Error::parse(
                            &cam_path,
                            format!("camera {name} size disagrees with manifest"),
                        ));
                    }
                    if let Some(id) = name.strip_prefix("view_") {
                        sv.train.push(ViewRecord {
                            rgb_path: dir.join(format!("view_{id}.ppm")),
                            mask_path: dir.join(format!("mask_{id}.pgm")),
                            name,
                            camera,
                        });
                    } else if let Some(id) = name.strip_prefix("test_") {
                        sv.test.push(ViewRecord {
                            rgb_path: dir.join(format!("test_{id}.ppm")),
                            mask_path: dir.join(format!("test_mask_{id}.pgm")),
                            name,
                            camera,
                        });
                    } else {
                        return Err(Error::parse(
                            &cam_path,
                            format!("camera name '{name}' has no view_/test_ prefix"),
                        ));
                    }
                }
                if !manifest.holdout.contains(&i) && sv.train.is_empty() {
                    return Err(Error::parse(
                        &cam_path,
                        format!("training instance {i} state {j} has no views"),
                    ));
                }
                per_state.push(sv);
            }
            views.push(per_state);
        }
        Ok(DatasetIndex {
            root: root.to_path_buf(),
            manifest,
            views,
        })
    }

    /// Instance indices that participate in training, in ascending order.
    pub fn train_instances(&self) -> Vec<usize> {
        (0..self.manifest.instances)
            .filter(|i| !self.manifest.holdout.contains(i))
            .collect()
    }

    pub fn n_states(&self) -> usize {
        self.manifest.n_states()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_root(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("artsdf-dataset-tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn sample_manifest() -> DatasetManifest {
        let grid = vec![vec![30.0], vec![60.0], vec![90.0]];
        DatasetManifest {
            category: "laptop".into(),
            seed: 11,
            width: 64,
            height: 48,
            instances: 3,
            holdout: BTreeSet::from([2]),
            articulations: vec![grid.clone(), grid.clone(), grid],
            train_views: 12,
            test_views: 6,
        }
    }

    #[test]
    fn manifest_round_trip() {
        let root = tmp_root("manifest");
        let m = sample_manifest();
        m.save(&root).unwrap();
        let back = DatasetManifest::load(&root).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn version_mismatch_is_reported() {
        let root = tmp_root("version");
        let m = sample_manifest();
        m.save(&root).unwrap();
        let path = root.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("artsdf-dataset v1", "artsdf-dataset v9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            DatasetManifest::load(&root),
            Err(Error::VersionMismatch { .. })
        ));
    }

    #[test]
    fn empty_holdout_round_trips() {
        let root = tmp_root("noholdout");
        let mut m = sample_manifest();
        m.holdout.clear();
        m.save(&root).unwrap();
        assert_eq!(DatasetManifest::load(&root).unwrap().holdout.len(), 0);
    }
}
