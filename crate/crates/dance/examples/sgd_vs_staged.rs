//! Baseline comparison: the staged solver, its single-stage full-sample
//! mode, and minibatch SGD on the same instance, written as CSV traces.
//!
//! ```bash
//! cargo run --release --example sgd_vs_staged
//! ```

use std::sync::Arc;

use dance::bench::{
    run_disco_mode, run_sgd_baseline, run_staged_trace, write_csv, Evaluator, SgdParams,
};
use dance::data::synth_logistic;
use dance::distrib::WorkerPool;
use dance::model::RiskSpec;
use dance::solver::DanceConfig;

fn main() -> dance::Result<()> {
    let full = synth_logistic(5120, 20, 1, 0.25)?;
    let train = Arc::new(full.prefix(4096)?);
    let test = full.tail(4096)?;
    let spec = RiskSpec::new(0.1, 0.5)?;
    let eval = Evaluator::new(&train, Some(&test), spec);
    let cfg = DanceConfig {
        m0: 64,
        seed: 1,
        ..DanceConfig::default()
    };

    let mut pool = WorkerPool::simulated(train.clone(), 4)?;
    let (_, staged_rows) = run_staged_trace(&mut pool, &spec, &cfg, "dance", &eval, false)?;

    let mut pool = WorkerPool::simulated(train.clone(), 4)?;
    let (_, disco_rows) = run_disco_mode(&mut pool, &spec, &cfg, &eval, false)?;

    let sgd = run_sgd_baseline(
        &train,
        &spec,
        &SgdParams {
            epochs: 30.0,
            step: 0.5,
            ..SgdParams::default()
        },
        1,
        &eval,
        false,
    )?;

    let dir = std::env::temp_dir();
    for (name, rows) in [
        ("dance.csv", &staged_rows),
        ("disco.csv", &disco_rows),
        ("sgd.csv", &sgd.rows),
    ] {
        let path = dir.join(name);
        let mut buf = Vec::new();
        write_csv(rows, &mut buf)?;
        std::fs::write(&path, buf)?;
        println!("wrote {}", path.display());
    }

    println!(
        "\n{:<8} {:>12} {:>12} {:>10} {:>10}",
        "trace", "passes", "final risk", "acc train", "acc test"
    );
    for (tag, rows) in [("staged", &staged_rows), ("1-stage", &disco_rows), ("sgd", &sgd.rows)] {
        let last = rows.last().unwrap();
        println!(
            "{tag:<8} {:>12.3} {:>12.6} {:>10.4} {:>10.4}",
            last.eff_grad_evals,
            last.risk_full.unwrap_or(f64::NAN),
            last.acc_full,
            last.acc_test.unwrap_or(f64::NAN)
        );
    }
    println!("\n(passes = cumulative samples touched / N; the staged run reaches its stop rule with the fewest)");
    Ok(())
}
