//! Staged training on a synthetic logistic instance.
//!
//! Runs the full multistage solve (doubling sample sizes, warm starts,
//! inexact damped Newton with PCG directions) and prints one line per stage
//! plus the communication-round totals.
//!
//! ```bash
//! cargo run --release --example train_synthetic
//! ```

use std::sync::Arc;

use dance::data::synth_logistic;
use dance::distrib::WorkerPool;
use dance::model::{RiskSpec, RiskView};
use dance::solver::{run_dance, DanceConfig};

fn main() -> dance::Result<()> {
    let ds = Arc::new(synth_logistic(4096, 20, 1, 0.25)?);
    let spec = RiskSpec::new(0.1, 0.5)?;
    let cfg = DanceConfig {
        m0: 64,
        seed: 1,
        ..DanceConfig::default()
    };

    let mut pool = WorkerPool::simulated(ds.clone(), 4)?;
    let run = run_dance(&mut pool, &spec, &cfg)?;

    println!("{:>6} {:>4} {:>8} {:>12} {:>12} {:>10} {:>10}", "n", "K", "rounds", "‖∇R‖ in", "‖∇R‖ out", "K bound", "T bound");
    for s in &run.stages {
        println!(
            "{:>6} {:>4} {:>8} {:>12.3e} {:>12.3e} {:>10} {:>10}",
            s.n,
            s.k_measured,
            s.t_measured,
            s.initial_grad_norm,
            s.final_grad_norm,
            s.predicted.k_bound,
            s.predicted.round_bound,
        );
    }

    let ledger = pool.ledger_snapshot();
    println!("\ntotal communication rounds: {}", ledger.grand_total);

    let view = RiskView::new(spec, ds.window(ds.len())?);
    let grad = view.grad_full(&run.weights).norm();
    let threshold = (2.0 * spec.c).sqrt() * view.v_n();
    println!("final ‖∇R_N‖ = {grad:.3e} (stop threshold {threshold:.3e})");
    println!("final risk   = {:.6}", view.value(&run.weights)?);
    Ok(())
}
