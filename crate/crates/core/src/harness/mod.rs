//! Experiment orchestration: comparison runs, ablations, reports and
//! dataset trees.

mod ablation;
mod experiment;
mod manifest;
mod report;
mod synthetic;

pub use ablation::{
    ablate_patch_size, ablate_perturbation, patch_method_name, perturbation_method_name, AblationPoint, AblationResult,
};
pub use experiment::{
    run_experiment, run_experiment_with, simulate_measurement, CovarianceFor, ExperimentCase, ExperimentSpec,
    MethodSpec,
};
pub use manifest::{
    default_acquisition, load_manifest, manifest_cases, Acquisition, DatasetManifest, SceneEntry, SyntheticDataset,
    LEVELS, MANIFEST_FILE, NOISY_LEVELS,
};
pub use report::{MethodSummary, MetricReport, MetricRow, CSV_COLUMNS, CSV_PREAMBLE};
pub use synthetic::{gaussian_prior_image, PriorCases, StationaryNoise};
