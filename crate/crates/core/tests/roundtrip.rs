use cavity_qa::ingest::{self, ReportFormat, ReportStatus};
use cavity_qa::pipeline::{self, PipelineConfig, Stages};
use cavity_qa::synth::{self, PhantomSpec};

#[test]
fn disk_pipeline_matches_in_memory_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec {
        seed: 3,
        samples_per_plane: 3,
        ..PhantomSpec::default()
    };
    let case = synth::generate_phantom(&spec).unwrap();
    let manifest = synth::write_case(&case, "c1", &dir.path().join("c1"), dir.path()).unwrap();
    ingest::write_manifests(&dir.path().join("manifest.json"), &[manifest]).unwrap();

    let manifests = ingest::read_manifests(&dir.path().join("manifest.json")).unwrap();
    let cfg = PipelineConfig::default();
    let out = dir.path().join("out");
    let reports = pipeline::process_batch(&manifests, &cfg, &Stages::ALL, Some(&out));
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert_eq!(r.status, ReportStatus::Ok);

    let a = pipeline::analyze(&case.samples, Some(&case.ground_truth), &cfg).unwrap();
    assert_eq!(r.doubt.unwrap().as_f64(), a.doubt.doubt.as_f64());
    assert_eq!(r.dice, a.metrics.map(|m| m.dice));
    assert_eq!(r.masked_voxel_count, Some(a.doubt.masked_voxel_count));

    let seg = ingest::read_mask(&out.join("c1/segmentation.raw")).unwrap();
    assert_eq!(seg, a.segmentation);
    let fused = ingest::read_scalar(&out.join("c1/fused_probability.raw")).unwrap();
    assert!(fused
        .data()
        .iter()
        .zip(a.fused.data())
        .all(|(&f, &g)| f == g as f32));

    let path = dir.path().join("report.json");
    ingest::write_report(&reports, &path, ReportFormat::Json).unwrap();
    assert_eq!(ingest::read_report(&path).unwrap()[0].doubt, r.doubt);
}

#[test]
fn missing_sample_becomes_a_load_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec {
        grid: cavity_qa::GridShape::cube(48).unwrap(),
        samples_per_plane: 2,
        ..PhantomSpec::default()
    };
    let case = synth::generate_phantom(&spec).unwrap();
    let mut good = synth::write_case(&case, "good", &dir.path().join("good"), dir.path()).unwrap();
    let mut bad = synth::write_case(&case, "bad", &dir.path().join("bad"), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join(&bad.coronal[1])).unwrap();
    for m in [&mut bad, &mut good] {
        for p in m
            .axial
            .iter_mut()
            .chain(&mut m.coronal)
            .chain(&mut m.sagittal)
        {
            *p = dir.path().join(&*p);
        }
    }
    bad.ground_truth = None;

    let reports = pipeline::process_batch(
        &[bad, good],
        &PipelineConfig::default(),
        &Stages::DOUBT,
        None,
    );
    assert_eq!(reports[0].status, ReportStatus::Error);
    assert_eq!(reports[0].stage.as_deref(), Some("load"));
    assert!(reports[0]
        .error
        .as_deref()
        .unwrap()
        .starts_with("MissingFile"));
    assert_eq!(reports[1].status, ReportStatus::Ok);
}
