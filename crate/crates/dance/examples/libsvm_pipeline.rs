//! Libsvm ingestion pipeline: write a file, parse it back, apply the
//! load-time shuffle, and solve one stage over a prefix window.
//!
//! ```bash
//! cargo run --example libsvm_pipeline
//! ```

use std::io::BufReader;
use std::sync::Arc;

use dance::data::{parse_libsvm, serialize_libsvm, synth_logistic};
use dance::distrib::WorkerPool;
use dance::model::{RiskSpec, RiskView};
use dance::solver::{run_stage, DanceConfig};
use nalgebra::DVector;

fn main() -> dance::Result<()> {
    let path = std::env::temp_dir().join("dance_example_train.svm");
    let generated = synth_logistic(600, 12, 42, 0.25)?;
    let mut buf = Vec::new();
    serialize_libsvm(&generated, &mut buf)?;
    std::fs::write(&path, &buf)?;
    println!("wrote {} rows to {}", generated.len(), path.display());

    let file = std::fs::File::open(&path)?;
    let parsed = parse_libsvm(BufReader::new(file), None)?;
    assert_eq!(parsed, generated, "parse ∘ serialize must be the identity");
    println!("parsed back identically (d = {})", parsed.dim());

    // freeze a new row order, then train on the first 256 rows
    let ds = Arc::new(parsed.shuffled(7));
    let spec = RiskSpec::new(0.1, 0.5)?;
    let view = RiskView::new(spec, ds.window(256)?);
    let mut pool = WorkerPool::simulated(ds.clone(), 4)?;
    pool.configure_window(256)?;
    let (w, report) = run_stage(&mut pool, &view, DVector::zeros(ds.dim()), &DanceConfig::default())?;

    println!(
        "stage n = {}: {} steps, {} rounds, ‖∇R‖ {:.3e} → {:.3e}",
        report.n, report.k_measured, report.t_measured, report.initial_grad_norm, report.final_grad_norm
    );
    println!("‖w‖ = {:.4}", w.norm());
    std::fs::remove_file(&path).ok();
    Ok(())
}
