//! Round-count invariance: the same problem solved with 1, 2, 4, and 8
//! workers produces the exact same communication-round ledger, and iterates
//! that differ only by floating-point reassociation in the reduces.
//!
//! ```bash
//! cargo run --release --example distributed_rounds
//! ```

use std::sync::Arc;

use dance::data::synth_logistic;
use dance::distrib::WorkerPool;
use dance::model::RiskSpec;
use dance::solver::{run_dance, DanceConfig};

fn main() -> dance::Result<()> {
    let ds = Arc::new(synth_logistic(2048, 16, 3, 0.25)?);
    let spec = RiskSpec::new(0.1, 0.5)?;
    let cfg = DanceConfig {
        m0: 64,
        seed: 3,
        ..DanceConfig::default()
    };

    let mut baseline = None;
    println!("{:>3} {:>8} {:>8} {:>14}", "K", "rounds", "calls", "vs K=1 (amax)");
    for k in [1usize, 2, 4, 8] {
        let mut pool = WorkerPool::simulated(ds.clone(), k)?;
        let run = run_dance(&mut pool, &spec, &cfg)?;
        let ledger = pool.ledger_snapshot();
        match &baseline {
            None => {
                println!("{k:>3} {:>8} {:>8} {:>14}", ledger.grand_total, ledger.calls.len(), "—");
                baseline = Some((ledger, run.weights));
            }
            Some((ledger0, w0)) => {
                assert_eq!(&ledger, ledger0, "ledger must not depend on K");
                let diff = (&run.weights - w0).amax();
                println!("{k:>3} {:>8} {:>8} {diff:>14.3e}", ledger.grand_total, ledger.calls.len());
            }
        }
    }
    println!("\nper-stage rounds (identical for every K):");
    for s in &baseline.unwrap().0.stages {
        println!("  n = {:>5}: {} rounds", s.n, s.rounds);
    }
    Ok(())
}
