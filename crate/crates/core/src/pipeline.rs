//! End-to-end case processing: fusion, entropy, doubt, metrics.
//!
//! Batch processing runs cases on the current rayon pool; results come back
//! in manifest order and every case yields exactly one report, successful or
//! not.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::doubt::{self, DoubtBreakdown, DoubtConfig};
use crate::error::{Error, Result};
use crate::fusion::{self, McSampleSet, Plane};
use crate::ingest::{self, CaseManifest, CaseReport, Semantic};
use crate::metrics::{self, MetricSet};
use crate::scalar::Real;
use crate::triage::{self, TriageConfig};
use crate::uncertainty::{self, EntropyConfig};
use crate::volgrid::{BinaryMask, GridShape, ScalarVolume};
use crate::{Volume, VolumeF32};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Fuse,
    Entropy,
    Doubt,
    Metrics,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Fuse => "fuse",
            Stage::Entropy => "entropy",
            Stage::Doubt => "doubt",
            Stage::Metrics => "metrics",
            Stage::Write => "write",
        }
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Which stages run and which volumes get written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stages {
    pub write_fused: bool,
    pub write_entropy: bool,
    pub doubt: bool,
    pub metrics: bool,
}

impl Stages {
    pub const FUSE: Stages = Stages {
        write_fused: true,
        write_entropy: false,
        doubt: false,
        metrics: false,
    };
    pub const ENTROPY: Stages = Stages {
        write_fused: false,
        write_entropy: true,
        doubt: false,
        metrics: false,
    };
    pub const DOUBT: Stages = Stages {
        write_fused: false,
        write_entropy: false,
        doubt: true,
        metrics: false,
    };
    pub const METRICS: Stages = Stages {
        write_fused: false,
        write_entropy: false,
        doubt: false,
        metrics: true,
    };
    pub const ALL: Stages = Stages {
        write_fused: true,
        write_entropy: true,
        doubt: true,
        metrics: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub doubt: DoubtConfig,
    pub entropy: EntropyConfig,
    pub triage: Option<TriageConfig>,
}

/// Everything computed for one case.
#[derive(Debug, Clone)]
pub struct CaseAnalysis {
    pub fused: Volume,
    pub segmentation: BinaryMask,
    pub entropy: Volume,
    pub doubt: DoubtBreakdown,
    pub metrics: Option<CaseMetrics>,
}

/// Metrics against ground truth. `hd95_mm` is absent when either mask is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseMetrics {
    pub dice: f64,
    pub hd95_mm: Option<f64>,
    pub volume_similarity: f64,
}

impl CaseMetrics {
    pub fn from_set(m: MetricSet) -> Self {
        CaseMetrics {
            dice: m.dice,
            hd95_mm: Some(m.hd95_mm),
            volume_similarity: m.volume_similarity,
        }
    }
}

pub fn case_metrics(pred: &BinaryMask, gt: &BinaryMask) -> Result<CaseMetrics> {
    let hd95_mm = if pred.is_empty() || gt.is_empty() {
        None
    } else {
        Some(metrics::hd95(pred, gt, gt.shape().spacing())?)
    };
    Ok(CaseMetrics {
        dice: metrics::dice(pred, gt)?,
        hd95_mm,
        volume_similarity: metrics::volume_similarity(pred, gt)?,
    })
}

/// Fused probability, segmentation, entropy and doubt for in-memory samples.
pub fn analyze<T: Real>(
    samples: &McSampleSet<T>,
    ground_truth: Option<&BinaryMask>,
    cfg: &PipelineConfig,
) -> Result<CaseAnalysis> {
    let fused: Volume = samples.fuse()?.cast();
    analyze_fused(fused, ground_truth, cfg)
}

pub fn analyze_fused(
    fused: Volume,
    ground_truth: Option<&BinaryMask>,
    cfg: &PipelineConfig,
) -> Result<CaseAnalysis> {
    let segmentation = fusion::classify(&fused);
    let entropy = uncertainty::predictive_entropy(&fused, cfg.entropy);
    let doubt = doubt::doubt_score(&entropy, &segmentation, &cfg.doubt)?;
    let metrics = ground_truth
        .map(|gt| case_metrics(&segmentation, gt))
        .transpose()?;
    Ok(CaseAnalysis {
        fused,
        segmentation,
        entropy,
        doubt,
        metrics,
    })
}

/// Fuses a case plane by plane, holding at most one plane's samples in memory.
pub fn fuse_manifest(manifest: &CaseManifest) -> std::result::Result<VolumeF32, StageError> {
    manifest.check_counts().at(Stage::Load)?;
    let mut shape: Option<GridShape> = None;
    let mut means: Vec<VolumeF32> = Vec::with_capacity(3);
    for plane in Plane::ALL {
        let samples = ingest::load_plane(manifest, plane, shape.as_ref()).at(Stage::Load)?;
        shape.get_or_insert(*samples[0].shape());
        means.push(fusion::mc_mean(&samples).at(Stage::Fuse)?);
    }
    fusion::plane_average(&means[0], &means[1], &means[2]).at(Stage::Fuse)
}

fn case_dir(out: &Path, case_id: &str) -> Result<PathBuf> {
    let ok = !case_id.is_empty()
        && case_id != "."
        && case_id != ".."
        && !case_id.contains(['/', '\\'])
        && !case_id.contains('\0');
    if !ok {
        return Err(Error::InvalidConfig(format!(
            "case id '{case_id}' cannot name an output directory"
        )));
    }
    Ok(out.join(case_id))
}

fn run_case(
    manifest: &CaseManifest,
    cfg: &PipelineConfig,
    stages: &Stages,
    out: Option<&Path>,
) -> std::result::Result<CaseReport, StageError> {
    let mut report = CaseReport::new(&manifest.case_id);
    report.echo_config(&cfg.doubt, &cfg.entropy);
    let dir = out
        .map(|o| case_dir(o, &manifest.case_id))
        .transpose()
        .at(Stage::Write)?;

    let fused32 = fuse_manifest(manifest)?;
    let shape = *fused32.shape();
    let fused: Volume = fused32.cast();
    let segmentation = fusion::classify(&fused);
    if let (Some(dir), true) = (&dir, stages.write_fused) {
        ingest::write_scalar(
            &dir.join("fused_probability.raw"),
            &fused32,
            Semantic::Probability,
        )
        .at(Stage::Write)?;
        ingest::write_mask(&dir.join("segmentation.raw"), &segmentation).at(Stage::Write)?;
    }
    drop(fused32);

    if stages.write_entropy || stages.doubt {
        let entropy: ScalarVolume<f64> = uncertainty::predictive_entropy(&fused, cfg.entropy);
        if let (Some(dir), true) = (&dir, stages.write_entropy) {
            ingest::write_scalar(&dir.join("entropy.raw"), &entropy, Semantic::Entropy)
                .at(Stage::Write)?;
        }
        if stages.doubt {
            let b = doubt::doubt_score(&entropy, &segmentation, &cfg.doubt).at(Stage::Doubt)?;
            report.set_doubt(&b);
        }
    }

    if stages.metrics {
        let gt = ingest::load_ground_truth(manifest, &shape)
            .at(Stage::Load)?
            .ok_or_else(|| Error::MissingGroundTruth(manifest.case_id.clone()))
            .at(Stage::Metrics)?;
        let m = case_metrics(&segmentation, &gt).at(Stage::Metrics)?;
        report.dice = Some(m.dice);
        report.hd95_mm = m.hd95_mm;
        report.volume_similarity = Some(m.volume_similarity);
    }
    Ok(report)
}

/// Runs one case; failures become an error report naming the stage.
pub fn process_case(
    manifest: &CaseManifest,
    cfg: &PipelineConfig,
    stages: &Stages,
    out: Option<&Path>,
) -> CaseReport {
    match run_case(manifest, cfg, stages, out) {
        Ok(r) => r,
        Err(StageError { stage, error }) => {
            let mut r = CaseReport::failed(&manifest.case_id, stage.name(), &error);
            r.echo_config(&cfg.doubt, &cfg.entropy);
            r
        }
    }
}

/// Processes all cases concurrently; output order follows `manifests`.
pub fn process_batch(
    manifests: &[CaseManifest],
    cfg: &PipelineConfig,
    stages: &Stages,
    out: Option<&Path>,
) -> Vec<CaseReport> {
    let mut reports: Vec<CaseReport> = manifests
        .par_iter()
        .map(|m| process_case(m, cfg, stages, out))
        .collect();
    if let Some(t) = &cfg.triage {
        triage::apply(&mut reports, t);
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doubt::Doubt;
    use crate::synth::{self, PhantomSpec};
    use crate::volgrid::GridShape;

    #[test]
    fn noise_free_phantom_is_clean() {
        let spec = PhantomSpec {
            grid: GridShape::cube(32).unwrap(),
            cavity: vec![synth::CavityShape::Ellipsoid {
                center: [15.0, 16.0, 16.0],
                semi_axes: [6.0, 5.0, 5.0],
            }],
            samples_per_plane: 2,
            ..PhantomSpec::default()
        }
        .noise_free();
        let case = synth::generate_phantom(&spec).unwrap();
        let a = analyze(
            &case.samples,
            Some(&case.ground_truth),
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(a.doubt.doubt, Doubt::Score(0.0));
        let m = a.metrics.unwrap();
        assert_eq!(m.dice, 1.0);
        assert_eq!(m.hd95_mm, Some(0.0));
        assert_eq!(m.volume_similarity, 1.0);
    }

    #[test]
    fn bad_case_ids_are_rejected() {
        let out = Path::new("/tmp");
        assert!(case_dir(out, "../x").is_err());
        assert!(case_dir(out, "").is_err());
        assert!(case_dir(out, "case_001").is_ok());
    }

    #[test]
    fn empty_prediction_has_no_hd95() {
        let s = GridShape::cube(5).unwrap();
        let gt = BinaryMask::from_fn(s, |x, _, _| x < 2);
        let m = case_metrics(&BinaryMask::zeros(s), &gt).unwrap();
        assert_eq!(m.dice, 0.0);
        assert_eq!(m.hd95_mm, None);
    }
}
