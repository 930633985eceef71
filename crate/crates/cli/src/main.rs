//! Batch front end: fuse MC samples, compute entropy and doubt, compare
//! against ground truth, triage, and generate synthetic batches.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cavity_qa::doubt::{DoubtConfig, EmptySegmentationPolicy};
use cavity_qa::ingest::{self, CaseManifest, CaseReport, ReportFormat, ReportStatus};
use cavity_qa::pipeline::{self, PipelineConfig, Stages};
use cavity_qa::synth::{self, CavityShape, PhantomSpec};
use cavity_qa::triage::{self, TriageConfig};
use cavity_qa::uncertainty::{EntropyConfig, LogBase};
use cavity_qa::{Connectivity, Error, GridShape};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cavity-qa",
    version,
    about = "Uncertainty-driven segmentation sanity check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse MC samples; writes fused probability and segmentation volumes.
    Fuse(CaseArgs),
    /// Fuse and write the predictive entropy volume.
    Entropy(CaseArgs),
    /// Compute the doubt score of every case.
    Doubt(CaseArgs),
    /// Compare fused segmentations against ground truth.
    Metrics(CaseArgs),
    /// Flag, classify and rank the cases of an existing JSON report.
    Triage(TriageArgs),
    /// All stages: volumes, doubt, metrics when ground truth exists, and triage
    /// when a doubt threshold is given.
    Run(CaseArgs),
    /// Write a synthetic batch with manifest.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnectivityArg {
    Faces6,
    Edges18,
    Full26,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogBaseArg {
    Natural,
    Base2,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmptyPolicyArg {
    Sentinel,
    Error,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct CaseArgs {
    /// Case manifest: one case, an array of cases, or {"cases": [...]}.
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    /// Doubt threshold; cases strictly above it are flagged.
    #[arg(long)]
    doubt_threshold: Option<f64>,
    #[arg(long, default_value_t = TriageConfig::DEFAULT_DICE_THRESHOLD)]
    dice_threshold: f64,
    /// Entropy a voxel must exceed to count toward doubt.
    #[arg(long, default_value_t = 0.5)]
    entropy_threshold: f64,
    /// Dilation steps applied to the segmentation outline.
    #[arg(long, default_value_t = 2)]
    dilate_iters: usize,
    #[arg(long, value_enum, default_value = "faces6")]
    connectivity: ConnectivityArg,
    #[arg(long, value_enum, default_value = "natural")]
    log_base: LogBaseArg,
    /// Doubt of an empty segmentation: maximal sentinel, or a per-case error.
    #[arg(long, value_enum, default_value = "sentinel")]
    empty_policy: EmptyPolicyArg,
}

#[derive(Args)]
struct TriageArgs {
    /// JSON report produced by `doubt` or `run`.
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    doubt_threshold: f64,
    #[arg(long, default_value_t = TriageConfig::DEFAULT_DICE_THRESHOLD)]
    dice_threshold: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = synth::DEFAULT_BATCH_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    n_good: usize,
    #[arg(long, default_value_t = 5)]
    n_bad: usize,
    /// Cubic grid edge length in voxels (1 mm spacing).
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Samples per plane.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Drop the logit noise; samples become identical and confident.
    #[arg(long)]
    noise_free: bool,
    /// Per-sample logit noise std.
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

fn data(context: &str, e: Error) -> Failure {
    Failure::Data(format!("{context}: {}: {e}", e.kind()))
}

fn output(context: &str, e: Error) -> Failure {
    Failure::Internal(format!("{context}: {}: {e}", e.kind()))
}

fn format_of(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))
}

fn pipeline_config(a: &CaseArgs) -> Result<PipelineConfig, Failure> {
    let doubt = DoubtConfig {
        entropy_threshold: a.entropy_threshold,
        dilation_iterations: a.dilate_iters,
        connectivity: match a.connectivity {
            ConnectivityArg::Faces6 => Connectivity::Faces6,
            ConnectivityArg::Edges18 => Connectivity::Edges18,
            ConnectivityArg::Full26 => Connectivity::Full26,
        },
        empty_segmentation_policy: match a.empty_policy {
            EmptyPolicyArg::Sentinel => EmptySegmentationPolicy::SentinelMax,
            EmptyPolicyArg::Error => EmptySegmentationPolicy::Error,
        },
    };
    doubt
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let triage = a
        .doubt_threshold
        .map(|t| TriageConfig::with_dice(t, a.dice_threshold))
        .transpose()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(PipelineConfig {
        doubt,
        entropy: EntropyConfig {
            log_base: match a.log_base {
                LogBaseArg::Natural => LogBase::Natural,
                LogBaseArg::Base2 => LogBase::Base2,
            },
        },
        triage,
    })
}

fn write_reports(
    dir: &Path,
    stem: &str,
    reports: &[CaseReport],
    format: ReportFormat,
) -> Result<PathBuf, Failure> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    ingest::write_report(reports, &path, format).map_err(|e| output("writing report", e))?;
    Ok(path)
}

/// Nonzero exit when any case failed; diagnostics name the case and stage.
fn report_failures(reports: &[CaseReport]) -> Result<(), Failure> {
    let failed: Vec<&CaseReport> = reports
        .iter()
        .filter(|r| r.status == ReportStatus::Error)
        .collect();
    for r in &failed {
        eprintln!(
            "error: case {} failed at stage {}: {}",
            r.case_id,
            r.stage.as_deref().unwrap_or("?"),
            r.error.as_deref().unwrap_or("")
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!(
            "{} of {} cases failed",
            failed.len(),
            reports.len()
        )))
    }
}

fn run_cases(a: &CaseArgs, stages: Stages, with_triage: bool) -> Result<(), Failure> {
    let mut cfg = pipeline_config(a)?;
    if !with_triage {
        cfg.triage = None;
    }
    let manifests: Vec<CaseManifest> =
        ingest::read_manifests(&a.manifest).map_err(|e| data("reading manifest", e))?;
    let out = &a.common.out;
    fs::create_dir_all(out)
        .map_err(|e| Failure::Internal(format!("creating {}: {e}", out.display())))?;
    let writes_volumes = stages.write_fused || stages.write_entropy;
    let reports = pool(a.common.workers)?.install(|| {
        pipeline::process_batch(
            &manifests,
            &cfg,
            &stages,
            writes_volumes.then_some(out.as_path()),
        )
    });
    let format = format_of(a.common.format);
    write_reports(out, "report", &reports, format)?;
    if let (true, Some(_)) = (with_triage, cfg.triage) {
        write_reports(out, "triage", &triage::rank_by_doubt(&reports), format)?;
    }
    report_failures(&reports)
}

fn run_triage(a: &TriageArgs) -> Result<(), Failure> {
    let cfg = TriageConfig::with_dice(a.doubt_threshold, a.dice_threshold)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut reports = ingest::read_report(&a.report).map_err(|e| data("reading report", e))?;
    triage::apply(&mut reports, &cfg);
    fs::create_dir_all(&a.common.out)
        .map_err(|e| Failure::Internal(format!("creating {}: {e}", a.common.out.display())))?;
    write_reports(
        &a.common.out,
        "triage",
        &triage::rank_by_doubt(&reports),
        format_of(a.common.format),
    )?;
    Ok(())
}

/// Rescales the default cavity proportionally onto an `n`-voxel cube.
fn scaled_to(base: PhantomSpec, n: usize) -> Result<PhantomSpec, Failure> {
    let grid = GridShape::cube(n).map_err(|e| Failure::Usage(e.to_string()))?;
    let f = n as f64 / base.grid.dims()[0] as f64;
    let cavity = base
        .cavity
        .iter()
        .map(|c| match *c {
            CavityShape::Ellipsoid { center, semi_axes } => CavityShape::Ellipsoid {
                center: center.map(|v| v * f),
                semi_axes: semi_axes.map(|v| v * f),
            },
            CavityShape::Cuboid { min, max } => CavityShape::Cuboid {
                min: min.map(|v| v * f),
                max: max.map(|v| v * f),
            },
        })
        .collect();
    Ok(PhantomSpec {
        grid,
        cavity,
        ..base
    })
}

fn run_synth(a: &SynthArgs) -> Result<(), Failure> {
    let mut base = PhantomSpec {
        samples_per_plane: a.samples,
        ..PhantomSpec::default()
    };
    if a.size != 64 {
        base = scaled_to(base, a.size)?;
    }
    if let Some(s) = a.noise_sigma {
        base.noise.sigma = s;
    }
    if a.noise_free {
        base = base.noise_free();
    }
    base.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let specs = synth::batch_specs(&base, a.n_good, a.n_bad, a.seed);
    fs::create_dir_all(&a.out)
        .map_err(|e| Failure::Internal(format!("creating {}: {e}", a.out.display())))?;
    let mut manifests = Vec::with_capacity(specs.len());
    let mut labels = Vec::with_capacity(specs.len());
    let pool = pool(a.workers)?;
    // one case at a time keeps memory at a single case's samples
    for (case_id, corrupted, spec) in &specs {
        let case = pool
            .install(|| synth::generate_phantom(spec))
            .map_err(|e| data(&format!("case {case_id}"), e))?;
        let m = synth::write_case(&case, case_id, &a.out.join(case_id), &a.out)
            .map_err(|e| output("writing case", e))?;
        manifests.push(m);
        labels.push(format!(
            "  {{\"case_id\": \"{case_id}\", \"corrupted\": {corrupted}, \"seed\": {}}}",
            spec.seed
        ));
    }
    ingest::write_manifests(&a.out.join("manifest.json"), &manifests)
        .map_err(|e| output("writing manifest", e))?;
    let labels = if labels.is_empty() {
        "[]\n".to_string()
    } else {
        format!("[\n{}\n]\n", labels.join(",\n"))
    };
    fs::write(a.out.join("labels.json"), labels)
        .map_err(|e| Failure::Internal(format!("writing labels: {e}")))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Fuse(a) => run_cases(a, Stages::FUSE, false),
        Command::Entropy(a) => run_cases(a, Stages::ENTROPY, false),
        Command::Doubt(a) => run_cases(a, Stages::DOUBT, true),
        Command::Metrics(a) => run_cases(a, Stages::METRICS, false),
        Command::Triage(a) => run_triage(a),
        Command::Run(a) => run_cases(a, Stages::ALL, true),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
