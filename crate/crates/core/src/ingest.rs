//! Volume files, case manifests and report serialization.
//!
//! A volume is a raw little-endian payload (x-fastest) next to a JSON sidecar
//! at `<payload path>.json`:
//!
//! ```json
//! {"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"dtype":"f32le"|"u8","semantic":"probability"}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::doubt::{Doubt, DoubtBreakdown, DoubtConfig};
use crate::error::{Error, Result};
use crate::fusion::{McSampleSet, Plane};
use crate::metrics::MetricSet;
use crate::scalar::Real;
use crate::triage::Quadrant;
use crate::uncertainty::{EntropyConfig, LogBase};
use crate::volgrid::{BinaryMask, Connectivity, GridShape, ScalarVolume};
use crate::VolumeF32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32le")]
    F32Le,
    #[serde(rename = "u8")]
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32Le => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantic {
    Intensity,
    Probability,
    Entropy,
    Distance,
    Label,
}

impl Semantic {
    pub fn name(self) -> &'static str {
        match self {
            Semantic::Intensity => "intensity",
            Semantic::Probability => "probability",
            Semantic::Entropy => "entropy",
            Semantic::Distance => "distance",
            Semantic::Label => "label",
        }
    }

    fn dtype(self) -> Dtype {
        match self {
            Semantic::Label => Dtype::U8,
            _ => Dtype::F32Le,
        }
    }

    fn admits(self, v: f32) -> bool {
        v.is_finite()
            && match self {
                Semantic::Intensity => true,
                Semantic::Probability => (0.0..=1.0).contains(&v),
                Semantic::Entropy | Semantic::Distance => v >= 0.0,
                Semantic::Label => v == 0.0 || v == 1.0,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    pub semantic: Semantic,
}

impl VolumeHeader {
    pub fn for_shape(shape: &GridShape, semantic: Semantic) -> Self {
        VolumeHeader {
            dims: shape.dims(),
            spacing: shape.spacing(),
            dtype: semantic.dtype(),
            semantic,
        }
    }

    pub fn shape(&self) -> Result<GridShape> {
        GridShape::new(self.dims, self.spacing)
    }

    pub fn payload_len(&self) -> usize {
        self.dims.iter().product::<usize>() * self.dtype.size()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedVolume {
    Scalar(VolumeF32),
    Mask(BinaryMask),
}

impl LoadedVolume {
    pub fn shape(&self) -> &GridShape {
        match self {
            LoadedVolume::Scalar(v) => v.shape(),
            LoadedVolume::Mask(m) => m.shape(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn malformed(path: &Path, field: &str, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        field: field.to_string(),
        reason: reason.into(),
    }
}

pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(Error::MissingFile(side));
    }
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| malformed(&side, "<document>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(&side, "<document>", "expected a JSON object"))?;
    for key in ["dims", "spacing", "dtype", "semantic"] {
        let v = obj
            .get(key)
            .ok_or_else(|| malformed(&side, key, "missing"))?;
        let ok = match key {
            "dims" => serde_json::from_value::<[usize; 3]>(v.clone()).map(|_| ()),
            "spacing" => serde_json::from_value::<[f64; 3]>(v.clone()).map(|_| ()),
            "dtype" => serde_json::from_value::<Dtype>(v.clone()).map(|_| ()),
            _ => serde_json::from_value::<Semantic>(v.clone()).map(|_| ()),
        };
        ok.map_err(|e| malformed(&side, key, e.to_string()))?;
    }
    let header: VolumeHeader =
        serde_json::from_value(value).map_err(|e| malformed(&side, "<document>", e.to_string()))?;
    header
        .shape()
        .map_err(|e| malformed(&side, "dims/spacing", e.to_string()))?;
    if header.dtype != header.semantic.dtype() {
        return Err(malformed(
            &side,
            "dtype",
            format!(
                "semantic '{}' requires a different dtype",
                header.semantic.name()
            ),
        ));
    }
    Ok(header)
}

/// Reads and validates a volume. Probability values must lie in [0, 1],
/// labels in {0, 1}, entropy and distance must be nonnegative, and every
/// float must be finite.
pub fn read_volume(path: &Path) -> Result<(VolumeHeader, LoadedVolume)> {
    let header = read_header(path)?;
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = header.payload_len();
    if bytes.len() != expected {
        return Err(Error::PayloadSizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let shape = header.shape()?;
    let out_of_range = |index: usize, value: f64| Error::ValueOutOfRange {
        path: path.to_path_buf(),
        index,
        value,
        semantic: header.semantic.name().to_string(),
    };
    let volume = match header.dtype {
        Dtype::U8 => {
            if let Some(index) = bytes.iter().position(|&b| b > 1) {
                return Err(out_of_range(index, bytes[index] as f64));
            }
            LoadedVolume::Mask(BinaryMask::new(shape, bytes)?)
        }
        Dtype::F32Le => {
            let data: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(index) = data.iter().position(|&v| !header.semantic.admits(v)) {
                return Err(out_of_range(index, data[index] as f64));
            }
            LoadedVolume::Scalar(ScalarVolume::new(shape, data)?)
        }
    };
    Ok((header, volume))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_volume(header: &VolumeHeader, volume: &LoadedVolume, path: &Path) -> Result<()> {
    let shape = header.shape()?;
    shape.check_same(volume.shape(), "header vs volume")?;
    let payload = match (header.dtype, volume) {
        (Dtype::U8, LoadedVolume::Mask(m)) if header.semantic == Semantic::Label => {
            m.data().to_vec()
        }
        (Dtype::F32Le, LoadedVolume::Scalar(v)) if header.semantic != Semantic::Label => {
            v.data().iter().flat_map(|x| x.to_le_bytes()).collect()
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "header dtype {:?} / semantic '{}' does not match the volume kind",
                header.dtype,
                header.semantic.name()
            )))
        }
    };
    let mut side = serde_json::to_vec_pretty(header).expect("header serializes");
    side.push(b'\n');
    write_bytes(&sidecar_path(path), &side)?;
    write_bytes(path, &payload)
}

/// Stores any real volume as `f32le`.
pub fn write_scalar<T: Real>(path: &Path, vol: &ScalarVolume<T>, semantic: Semantic) -> Result<()> {
    let header = VolumeHeader::for_shape(vol.shape(), semantic);
    write_volume(&header, &LoadedVolume::Scalar(vol.cast()), path)
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let header = VolumeHeader::for_shape(mask.shape(), Semantic::Label);
    write_volume(&header, &LoadedVolume::Mask(mask.clone()), path)
}

pub fn read_scalar(path: &Path) -> Result<VolumeF32> {
    match read_volume(path)?.1 {
        LoadedVolume::Scalar(v) => Ok(v),
        LoadedVolume::Mask(_) => Err(malformed(path, "semantic", "expected a real-valued volume")),
    }
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    match read_volume(path)?.1 {
        LoadedVolume::Mask(m) => Ok(m),
        LoadedVolume::Scalar(_) => Err(malformed(path, "semantic", "expected a label volume")),
    }
}

/// MR sequence of an optional intensity channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    T1,
    T1c,
    T2,
    #[serde(rename = "FLAIR")]
    Flair,
}

/// Input files of one case. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub case_id: String,
    pub axial: Vec<PathBuf>,
    pub coronal: Vec<PathBuf>,
    pub sagittal: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub intensity: BTreeMap<Channel, PathBuf>,
}

impl CaseManifest {
    pub fn plane(&self, plane: Plane) -> &[PathBuf] {
        match plane {
            Plane::Axial => &self.axial,
            Plane::Coronal => &self.coronal,
            Plane::Sagittal => &self.sagittal,
        }
    }

    fn resolve(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.axial
            .iter_mut()
            .chain(&mut self.coronal)
            .chain(&mut self.sagittal)
            .for_each(fix);
        self.ground_truth.iter_mut().for_each(fix);
        self.intensity.values_mut().for_each(fix);
        self
    }

    /// Sample counts equal across planes and at least one.
    pub fn check_counts(&self) -> Result<usize> {
        let t = self.axial.len();
        if t == 0 {
            return Err(Error::InconsistentT(format!(
                "case {}: no axial samples",
                self.case_id
            )));
        }
        if self.coronal.len() != t || self.sagittal.len() != t {
            return Err(Error::InconsistentT(format!(
                "case {}: axial {t}, coronal {}, sagittal {}",
                self.case_id,
                self.coronal.len(),
                self.sagittal.len()
            )));
        }
        Ok(t)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestDoc {
    One(CaseManifest),
    Many(Vec<CaseManifest>),
    Batch { cases: Vec<CaseManifest> },
}

/// Reads a manifest holding one case, an array of cases, or `{"cases": [...]}`.
pub fn read_manifests(path: &Path) -> Result<Vec<CaseManifest>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| Error::InvalidManifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let cases = match doc {
        ManifestDoc::One(c) => vec![c],
        ManifestDoc::Many(v) | ManifestDoc::Batch { cases: v } => v,
    };
    let mut seen = std::collections::BTreeSet::new();
    for c in &cases {
        if !seen.insert(c.case_id.clone()) {
            return Err(Error::InvalidManifest {
                path: path.to_path_buf(),
                reason: format!("duplicate case id '{}'", c.case_id),
            });
        }
    }
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(cases.into_iter().map(|c| c.resolve(base)).collect())
}

pub fn write_manifests(path: &Path, cases: &[CaseManifest]) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(cases).expect("manifest serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub manifest: CaseManifest,
    pub samples: McSampleSet<f32>,
    pub ground_truth: Option<BinaryMask>,
    pub intensity: BTreeMap<Channel, VolumeF32>,
}

impl LoadedCase {
    pub fn shape(&self) -> &GridShape {
        self.samples.samples(Plane::Axial)[0].shape()
    }
}

fn expect_shape(case: &str, path: &Path, want: &GridShape, got: &GridShape) -> Result<()> {
    if want != got {
        return Err(Error::ShapeMismatch(format!(
            "case {case}: {} is {:?} @ {:?}, expected {:?} @ {:?}",
            path.display(),
            got.dims(),
            got.spacing(),
            want.dims(),
            want.spacing()
        )));
    }
    Ok(())
}

/// Loads the samples of one plane, checking them against `shape` if given.
pub fn load_plane(
    manifest: &CaseManifest,
    plane: Plane,
    shape: Option<&GridShape>,
) -> Result<Vec<VolumeF32>> {
    let mut out: Vec<VolumeF32> = Vec::with_capacity(manifest.plane(plane).len());
    for path in manifest.plane(plane) {
        let (header, vol) = read_volume(path)?;
        let LoadedVolume::Scalar(v) = vol else {
            unreachable!("label dtype implies label semantic")
        };
        if header.semantic != Semantic::Probability {
            return Err(malformed(path, "semantic", "expected 'probability'"));
        }
        let want = shape
            .or(out.first().map(|v| v.shape()))
            .copied()
            .unwrap_or(*v.shape());
        expect_shape(&manifest.case_id, path, &want, v.shape())?;
        out.push(v);
    }
    Ok(out)
}

pub fn load_ground_truth(manifest: &CaseManifest, shape: &GridShape) -> Result<Option<BinaryMask>> {
    let Some(path) = &manifest.ground_truth else {
        return Ok(None);
    };
    let gt = read_mask(path)?;
    expect_shape(&manifest.case_id, path, shape, gt.shape())?;
    Ok(Some(gt))
}

/// Loads every volume of a case and cross-validates shapes and sample counts.
pub fn load_case_from(manifest: &CaseManifest) -> Result<LoadedCase> {
    manifest.check_counts()?;
    let axial = load_plane(manifest, Plane::Axial, None)?;
    let shape = *axial[0].shape();
    let coronal = load_plane(manifest, Plane::Coronal, Some(&shape))?;
    let sagittal = load_plane(manifest, Plane::Sagittal, Some(&shape))?;
    let ground_truth = load_ground_truth(manifest, &shape)?;
    let mut intensity = BTreeMap::new();
    for (&ch, path) in &manifest.intensity {
        let v = read_scalar(path)?;
        expect_shape(&manifest.case_id, path, &shape, v.shape())?;
        intensity.insert(ch, v);
    }
    Ok(LoadedCase {
        manifest: manifest.clone(),
        samples: McSampleSet::new(axial, coronal, sagittal)?,
        ground_truth,
        intensity,
    })
}

/// Loads the single case described by the manifest at `path`.
pub fn load_case(path: &Path) -> Result<LoadedCase> {
    let cases = read_manifests(path)?;
    match cases.as_slice() {
        [one] => load_case_from(one),
        _ => Err(Error::InvalidManifest {
            path: path.to_path_buf(),
            reason: format!("expected exactly one case, found {}", cases.len()),
        }),
    }
}

// ---------------------------------------------------------------------------
// reports

/// Rounds to 6 significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(round_sig6(*x)),
        None => s.serialize_none(),
    }
}

const SENTINEL_TEXT: &str = "sentinel_max";

fn ser_doubt<S: Serializer>(v: &Option<Doubt>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(Doubt::Score(x)) => s.serialize_f64(round_sig6(*x)),
        Some(Doubt::Sentinel) => s.serialize_str(SENTINEL_TEXT),
        None => s.serialize_none(),
    }
}

fn de_doubt<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Doubt>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(x)) => Ok(Some(Doubt::Score(x))),
        Some(Raw::Text(t)) if t == SENTINEL_TEXT => Ok(Some(Doubt::Sentinel)),
        Some(Raw::Text(t)) => Err(serde::de::Error::custom(format!(
            "invalid doubt value '{t}'"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Ok,
    Error,
}

/// One case's results. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub status: ReportStatus,
    pub stage: Option<String>,
    pub error: Option<String>,
    #[serde(serialize_with = "ser_doubt", deserialize_with = "de_doubt")]
    pub doubt: Option<Doubt>,
    pub masked_voxel_count: Option<usize>,
    pub outline_voxel_count: Option<usize>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub max_weighted_term: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub dice: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub hd95_mm: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub volume_similarity: Option<f64>,
    pub flagged: Option<bool>,
    pub quadrant: Option<Quadrant>,
    pub rank: Option<usize>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub entropy_threshold: Option<f64>,
    pub dilation_iterations: Option<usize>,
    pub connectivity: Option<Connectivity>,
    pub log_base: Option<LogBase>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub doubt_threshold: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub dice_threshold: Option<f64>,
}

impl CaseReport {
    pub fn new(case_id: impl Into<String>) -> Self {
        CaseReport {
            case_id: case_id.into(),
            status: ReportStatus::Ok,
            stage: None,
            error: None,
            doubt: None,
            masked_voxel_count: None,
            outline_voxel_count: None,
            max_weighted_term: None,
            dice: None,
            hd95_mm: None,
            volume_similarity: None,
            flagged: None,
            quadrant: None,
            rank: None,
            entropy_threshold: None,
            dilation_iterations: None,
            connectivity: None,
            log_base: None,
            doubt_threshold: None,
            dice_threshold: None,
        }
    }

    pub fn failed(case_id: impl Into<String>, stage: &str, error: &Error) -> Self {
        CaseReport {
            status: ReportStatus::Error,
            stage: Some(stage.to_string()),
            error: Some(format!("{}: {error}", error.kind())),
            ..CaseReport::new(case_id)
        }
    }

    pub fn echo_config(&mut self, doubt: &DoubtConfig, entropy: &EntropyConfig) {
        self.entropy_threshold = Some(doubt.entropy_threshold);
        self.dilation_iterations = Some(doubt.dilation_iterations);
        self.connectivity = Some(doubt.connectivity);
        self.log_base = Some(entropy.log_base);
    }

    pub fn set_doubt(&mut self, b: &DoubtBreakdown) {
        self.doubt = Some(b.doubt);
        self.masked_voxel_count = Some(b.masked_voxel_count);
        self.outline_voxel_count = Some(b.outline_voxel_count);
        self.max_weighted_term = Some(b.max_weighted_term);
    }

    pub fn set_metrics(&mut self, m: &MetricSet) {
        self.dice = Some(m.dice);
        self.hd95_mm = Some(m.hd95_mm);
        self.volume_similarity = Some(m.volume_similarity);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown report format '{other}'"
            ))),
        }
    }
}

pub const CSV_HEADER: [&str; 20] = [
    "case_id",
    "status",
    "stage",
    "error",
    "doubt",
    "masked_voxel_count",
    "outline_voxel_count",
    "max_weighted_term",
    "dice",
    "hd95_mm",
    "volume_similarity",
    "flagged",
    "quadrant",
    "rank",
    "entropy_threshold",
    "dilation_iterations",
    "connectivity",
    "log_base",
    "doubt_threshold",
    "dice_threshold",
];

fn csv_record(r: &CaseReport) -> Vec<String> {
    fn num(v: Option<f64>) -> String {
        v.map(|x| round_sig6(x).to_string()).unwrap_or_default()
    }
    fn int(v: Option<usize>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    vec![
        r.case_id.clone(),
        match r.status {
            ReportStatus::Ok => "ok".into(),
            ReportStatus::Error => "error".into(),
        },
        r.stage.clone().unwrap_or_default(),
        r.error.clone().unwrap_or_default(),
        match r.doubt {
            Some(Doubt::Score(x)) => round_sig6(x).to_string(),
            Some(Doubt::Sentinel) => SENTINEL_TEXT.into(),
            None => String::new(),
        },
        int(r.masked_voxel_count),
        int(r.outline_voxel_count),
        num(r.max_weighted_term),
        num(r.dice),
        num(r.hd95_mm),
        num(r.volume_similarity),
        r.flagged.map(|b| b.to_string()).unwrap_or_default(),
        r.quadrant.map(|q| q.name().to_string()).unwrap_or_default(),
        int(r.rank),
        num(r.entropy_threshold),
        int(r.dilation_iterations),
        r.connectivity
            .map(|c| c.name().to_string())
            .unwrap_or_default(),
        r.log_base.map(|b| b.name().to_string()).unwrap_or_default(),
        num(r.doubt_threshold),
        num(r.dice_threshold),
    ]
}

pub fn render_report(reports: &[CaseReport], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(reports).expect("reports serialize");
            bytes.push(b'\n');
            bytes
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for r in reports {
                w.write_record(csv_record(r)).expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}

pub fn write_report(reports: &[CaseReport], path: &Path, format: ReportFormat) -> Result<()> {
    write_bytes(path, &render_report(reports, format))
}

/// Reads a JSON report written by [`write_report`].
pub fn read_report(path: &Path) -> Result<Vec<CaseReport>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidReport {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn shape() -> GridShape {
        GridShape::new([4, 3, 2], [1.0, 0.5, 2.0]).unwrap()
    }

    #[test]
    fn out_of_range_probability() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("p.raw");
        let mut data = vec![0.25f32; 24];
        data[7] = 1.5;
        // bypass validation by writing it as intensity, then relabel the sidecar
        let v = ScalarVolume::new(shape(), data).unwrap();
        write_scalar(&p, &v, Semantic::Intensity).unwrap();
        let side = sidecar_path(&p);
        let text = fs::read_to_string(&side)
            .unwrap()
            .replace("intensity", "probability");
        fs::write(&side, text).unwrap();
        match read_volume(&p) {
            Err(Error::ValueOutOfRange {
                index: 7, value, ..
            }) => assert_eq!(value, 1.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn payload_size_mismatch() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.raw");
        let s = GridShape::cube(4).unwrap();
        write_mask(&p, &BinaryMask::zeros(s)).unwrap();
        fs::write(&p, vec![0u8; 63]).unwrap();
        assert!(matches!(
            read_volume(&p),
            Err(Error::PayloadSizeMismatch {
                expected: 64,
                found: 63,
                ..
            })
        ));
    }

    #[test]
    fn malformed_headers() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.raw");
        fs::write(&p, [0u8; 8]).unwrap();
        let cases = [
            (
                r#"{"dims":[2,2,2],"spacing":[1,1,1],"dtype":"u8"}"#,
                "semantic",
            ),
            (
                r#"{"dims":[2,2],"spacing":[1,1,1],"dtype":"u8","semantic":"label"}"#,
                "dims",
            ),
            (
                r#"{"dims":[2,2,2],"spacing":[1,1,1],"dtype":"f64","semantic":"label"}"#,
                "dtype",
            ),
            (
                r#"{"dims":[2,2,2],"spacing":[1,0,1],"dtype":"u8","semantic":"label"}"#,
                "dims/spacing",
            ),
            (
                r#"{"dims":[2,2,2],"spacing":[1,1,1],"dtype":"u8","semantic":"probability"}"#,
                "dtype",
            ),
            ("not json", "<document>"),
        ];
        for (text, want) in cases {
            fs::write(sidecar_path(&p), text).unwrap();
            match read_volume(&p) {
                Err(Error::MalformedHeader { field, .. }) => assert_eq!(field, want, "{text}"),
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn missing_files() {
        let dir = tempdir().unwrap();
        assert!(matches!(
            read_volume(&dir.path().join("nope.raw")),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn label_round_trip_and_sidecar_keys() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("l.raw");
        let m = BinaryMask::from_fn(shape(), |x, y, z| (x + y + z) % 2 == 0);
        write_mask(&p, &m).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        let mut keys: Vec<_> = side.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["dims", "dtype", "semantic", "spacing"]);
        assert_eq!(side["dtype"], "u8");
        assert_eq!(fs::read(&p).unwrap(), m.data());
    }

    #[test]
    fn report_formats() {
        let dir = tempdir().unwrap();
        let csv_path = dir.path().join("r.csv");
        write_report(&[], &csv_path, ReportFormat::Csv).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), CSV_HEADER.join(","));

        let json_path = dir.path().join("r.json");
        write_report(&[], &json_path, ReportFormat::Json).unwrap();
        assert!(read_report(&json_path).unwrap().is_empty());

        let mut r = CaseReport::new("case-1");
        r.doubt = Some(Doubt::Score(1234.56789));
        r.dice = Some(0.792);
        r.hd95_mm = Some(16.24);
        r.volume_similarity = Some(0.881);
        r.quadrant = Some(Quadrant::TrueNegative);
        r.connectivity = Some(Connectivity::Faces6);
        r.error = Some("contains, comma".into());
        write_report(std::slice::from_ref(&r), &csv_path, ReportFormat::Csv).unwrap();
        let mut rd = csv::Reader::from_path(&csv_path).unwrap();
        let rows: Vec<csv::StringRecord> = rd.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][4], "1234.57");
        assert_eq!(&rows[0][3], "contains, comma");

        write_report(std::slice::from_ref(&r), &json_path, ReportFormat::Json).unwrap();
        let back = read_report(&json_path).unwrap();
        assert_eq!(back[0].doubt, Some(Doubt::Score(1234.57)));
        assert_eq!(back[0].dice, r.dice);
        r.doubt = Some(Doubt::Score(1234.57));
        assert_eq!(back, vec![r.clone()]);

        r.doubt = Some(Doubt::Sentinel);
        write_report(std::slice::from_ref(&r), &json_path, ReportFormat::Json).unwrap();
        assert_eq!(
            read_report(&json_path).unwrap()[0].doubt,
            Some(Doubt::Sentinel)
        );
    }

    #[test]
    fn sig6_rounding() {
        assert_eq!(round_sig6(0.123456789), 0.123457);
        assert_eq!(round_sig6(123456789.0), 123457000.0);
        assert_eq!(round_sig6(0.0), 0.0);
        assert_eq!(round_sig6(-2.5e-9), -2.5e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn f32_volume_round_trip_is_bit_exact(
            dims in (1usize..6, 1usize..6, 1usize..6),
            seed in prop::collection::vec(any::<u32>(), 1..2),
        ) {
            let dir = tempdir().unwrap();
            let p = dir.path().join("v.raw");
            let s = GridShape::new([dims.0, dims.1, dims.2], [0.9, 1.0, 3.3]).unwrap();
            let mut state = seed[0] as u64 | 1;
            let data: Vec<f32> = (0..s.len()).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                // arbitrary finite bit patterns
                let v = f32::from_bits(state as u32);
                if v.is_finite() { v } else { 0.0 }
            }).collect();
            let v = ScalarVolume::new(s, data).unwrap();
            write_scalar(&p, &v, Semantic::Intensity).unwrap();
            let back = read_scalar(&p).unwrap();
            let bits = |x: &VolumeF32| x.data().iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&v));
            prop_assert_eq!(back.shape(), v.shape());
        }
    }
}
