//! Generates the reference synthetic batch, scores every case, and prints
//! the doubt ranking next to each case's Dice.
//!
//! cargo run --release -p cavity-qa --example synthetic_triage [threshold]

use cavity_qa::ingest::CaseReport;
use cavity_qa::pipeline::{self, PipelineConfig};
use cavity_qa::synth::{self, PhantomSpec};
use cavity_qa::triage::{self, TriageConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let threshold: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(100.0);
    let cfg = PipelineConfig::default();
    let mut reports = Vec::new();
    let mut labels = std::collections::BTreeMap::new();
    for (id, corrupted, spec) in
        synth::batch_specs(&PhantomSpec::default(), 20, 5, synth::DEFAULT_BATCH_SEED)
    {
        let case = synth::generate_phantom(&spec)?;
        let a = pipeline::analyze(&case.samples, Some(&case.ground_truth), &cfg)?;
        let mut r = CaseReport::new(&id);
        r.set_doubt(&a.doubt);
        r.dice = a.metrics.map(|m| m.dice);
        labels.insert(id, corrupted);
        reports.push(r);
    }
    triage::apply(&mut reports, &TriageConfig::new(threshold)?);
    println!("rank  case      corrupted  doubt       dice   quadrant");
    for r in triage::rank_by_doubt(&reports) {
        println!(
            "{:>4}  {}  {:<9}  {:>10.1}  {:.3}  {}",
            r.rank.unwrap(),
            r.case_id,
            labels[&r.case_id],
            r.doubt.unwrap().as_f64(),
            r.dice.unwrap(),
            r.quadrant.map_or("-", |q| q.name())
        );
    }
    Ok(())
}
