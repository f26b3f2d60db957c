//! Directory layout of a paired real-noise dataset.
//!
//! ```text
//! root/
//!   manifest.json
//!   scenes/<id>/{zero,low,medium,high}.png
//!   dark/{low,medium,high}/*.png
//! ```
//!
//! `zero` is the long-exposure ground truth. Paths in `manifest.json` are
//! relative to the root; omitted fields fall back to the layout above.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentCase;
use super::synthetic::{gaussian_prior_image, StationaryNoise};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::io::{load_image, save_image, write_atomic};
use crate::operators::{DegradationKind, DegradationSpec};

pub const LEVELS: [&str; 4] = ["zero", "low", "medium", "high"];
pub const NOISY_LEVELS: [&str; 3] = ["low", "medium", "high"];
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub gain_db: f64,
    pub exposure_ms: f64,
}

/// Gain and exposure of the four capture levels.
pub fn default_acquisition() -> BTreeMap<String, Acquisition> {
    [
        ("zero", 0.0, 350.0),
        ("low", 25.0, 20.0),
        ("medium", 35.0, 8.0),
        ("high", 43.0, 2.5),
    ]
    .into_iter()
    .map(|(l, g, e)| {
        (
            l.to_string(),
            Acquisition {
                gain_db: g,
                exposure_ms: e,
            },
        )
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    #[serde(default)]
    pub paths: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ManifestFile {
    #[serde(default)]
    levels: BTreeMap<String, Acquisition>,
    #[serde(default)]
    scenes: Vec<SceneEntry>,
    #[serde(default)]
    dark: BTreeMap<String, PathBuf>,
}

/// A validated dataset tree. All paths are absolute or root-joined.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub levels: BTreeMap<String, Acquisition>,
    pub scenes: Vec<SceneEntry>,
    /// Level -> sorted dark-frame files.
    pub dark_frames: BTreeMap<String, Vec<PathBuf>>,
}

impl DatasetManifest {
    pub fn scene_path(&self, scene: &SceneEntry, level: &str) -> PathBuf {
        scene.paths[level].clone()
    }

    pub fn load_scene(&self, scene: &SceneEntry, level: &str) -> Result<PlanarImage> {
        load_image(self.scene_path(scene, level))
    }

    pub fn load_dark_frames(&self, level: &str) -> Result<Vec<PlanarImage>> {
        self.dark_frames
            .get(level)
            .ok_or_else(|| Error::InvalidArgument(format!("no dark frames for level {level:?}")))?
            .iter()
            .map(load_image)
            .collect()
    }

    pub fn acquisition(&self, level: &str) -> Option<Acquisition> {
        self.levels.get(level).copied()
    }
}

/// One case per scene at `level`, with `zero` as the reference.
///
/// The captured noise `level - zero` is added to `H zero` (cropped to the
/// measurement size), so denoising uses the captured image itself.
pub fn manifest_cases(
    manifest: &DatasetManifest,
    level: &str,
    task: &DegradationSpec,
    sigma_y: f64,
    seed: u64,
) -> Result<Vec<ExperimentCase>> {
    if !NOISY_LEVELS.contains(&level) {
        return Err(Error::InvalidArgument(format!(
            "evaluation level must be one of {NOISY_LEVELS:?}, got {level:?}"
        )));
    }
    manifest
        .scenes
        .iter()
        .enumerate()
        .map(|(i, scene)| {
            let reference = manifest.load_scene(scene, "zero")?;
            let noisy = manifest.load_scene(scene, level)?;
            if !noisy.same_shape(&reference) {
                return Err(Error::DimensionMismatch(format!(
                    "scene {}: {level} is {:?} but zero is {:?}",
                    scene.id,
                    noisy.dims(),
                    reference.dims()
                )));
            }
            let measurement = if task.kind == DegradationKind::Identity {
                noisy
            } else {
                let clean_y = task.apply_exact(&reference)?;
                let mut y = clean_y.clone();
                for c in 0..y.channels() {
                    for r in 0..y.height() {
                        for col in 0..y.width() {
                            let n = noisy.get(c, r, col) - reference.get(c, r, col);
                            y.set(c, r, col, clean_y.get(c, r, col) + n);
                        }
                    }
                }
                y
            };
            Ok(ExperimentCase {
                scene_id: scene.id.clone(),
                reference,
                measurement,
                sigma_y,
                seed: seed.wrapping_add(i as u64),
                image_id: i as u32,
            })
        })
        .collect()
}

fn pngs_in(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Read and validate `root/manifest.json`. Every problem found is listed
/// in the returned error.
pub fn load_manifest(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Manifest {
        problems: vec![format!("{}: {e}", path.display())],
    })?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        problems: vec![format!("{}: malformed JSON: {e}", path.display())],
    })?;

    let mut problems = Vec::new();
    let mut levels = default_acquisition();
    levels.extend(file.levels);
    for l in file.dark.keys().chain(file.scenes.iter().flat_map(|s| s.paths.keys())) {
        if !LEVELS.contains(&l.as_str()) {
            problems.push(format!("unknown level {l:?} (expected one of {LEVELS:?})"));
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    let mut scenes = Vec::with_capacity(file.scenes.len());
    for entry in file.scenes {
        if !seen.insert(entry.id.clone()) {
            problems.push(format!("duplicate scene id {:?}", entry.id));
        }
        let mut paths = BTreeMap::new();
        for level in LEVELS {
            let rel = entry
                .paths
                .get(level)
                .cloned()
                .unwrap_or_else(|| Path::new("scenes").join(&entry.id).join(format!("{level}.png")));
            let p = root.join(rel);
            if !p.is_file() {
                problems.push(format!("scene {:?} level {level}: missing {}", entry.id, p.display()));
            }
            paths.insert(level.to_string(), p);
        }
        scenes.push(SceneEntry { id: entry.id, paths });
    }

    let mut dark_frames = BTreeMap::new();
    for level in NOISY_LEVELS {
        let rel = file
            .dark
            .get(level)
            .cloned()
            .unwrap_or_else(|| Path::new("dark").join(level));
        let dir = root.join(rel);
        match pngs_in(&dir) {
            Ok(files) if files.is_empty() => problems.push(format!("dark frames {}: no .png files", dir.display())),
            Ok(files) => {
                dark_frames.insert(level.to_string(), files);
            }
            Err(e) => problems.push(format!("dark frames {}: {e}", dir.display())),
        }
    }

    if !problems.is_empty() {
        return Err(Error::Manifest { problems });
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        levels,
        scenes,
        dark_frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub scenes: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub dark_frames_per_level: usize,
    /// Noise standard deviation per noisy level, in `[0, 1]` units.
    pub sigma: [f64; 3],
    /// Dark frames are centered on this value so the PNGs keep both tails.
    pub pedestal: f64,
    pub seed: u64,
}

impl Default for SyntheticDataset {
    fn default() -> Self {
        Self {
            scenes: 4,
            height: 32,
            width: 32,
            channels: 3,
            dark_frames_per_level: 8,
            sigma: [0.02, 0.05, 0.1],
            pedestal: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticDataset {
    /// Write a complete tree with row-correlated noise under `root`.
    pub fn write(&self, root: impl AsRef<Path>) -> Result<DatasetManifest> {
        let root = root.as_ref();
        let mk = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        let mut file = ManifestFile {
            levels: default_acquisition(),
            ..ManifestFile::default()
        };
        let (h, w, c) = (self.height, self.width, self.channels);
        for i in 0..self.scenes {
            let id = format!("scene{i:03}");
            let dir = root.join("scenes").join(&id);
            mk(&dir)?;
            let clean = gaussian_prior_image([c, h, w], 0.5, 0.15, self.seed, i as u32);
            save_image(&clean, dir.join("zero.png"), 16)?;
            for (k, level) in NOISY_LEVELS.iter().enumerate() {
                let noise = StationaryNoise::row_correlated(self.sigma[k]).sample(
                    c,
                    h,
                    w,
                    self.seed ^ (0x5C5C_0000 + k as u64),
                    i as u32,
                );
                save_image(&clean.add(&noise)?, dir.join(format!("{level}.png")), 16)?;
            }
            file.scenes.push(SceneEntry {
                id,
                paths: BTreeMap::new(),
            });
        }
        for (k, level) in NOISY_LEVELS.iter().enumerate() {
            let dir = root.join("dark").join(level);
            mk(&dir)?;
            let noise = StationaryNoise::row_correlated(self.sigma[k]);
            for f in 0..self.dark_frames_per_level {
                let frame = noise
                    .sample(1, h, w, self.seed ^ (0xDA2C_0000 + k as u64), f as u32)
                    .map(|v| v + self.pedestal);
                save_image(&frame, dir.join(format!("{f:04}.png")), 16)?;
            }
        }
        let text = serde_json::to_string_pretty(&file).expect("manifest serializes");
        write_atomic(&root.join(MANIFEST_FILE), |out| {
            std::io::Write::write_all(out, text.as_bytes())
        })?;
        load_manifest(root)
    }
}
