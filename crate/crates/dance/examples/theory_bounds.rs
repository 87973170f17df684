//! Measured behavior against the closed-form bounds: per-stage inner
//! iterations and communication rounds next to their predicted ceilings,
//! plus the run-level totals.
//!
//! ```bash
//! cargo run --release --example theory_bounds
//! ```

use std::sync::Arc;

use dance::data::synth_logistic;
use dance::distrib::WorkerPool;
use dance::model::{RiskSpec, RiskView};
use dance::pcg::reference_minimizer;
use dance::solver::{run_dance, DanceConfig};
use dance::theory;
use nalgebra::DVector;

fn main() -> dance::Result<()> {
    let ds = Arc::new(synth_logistic(2048, 12, 1, 0.25)?);
    let spec = RiskSpec::new(0.1, 0.5)?;
    let cfg = DanceConfig {
        m0: 64,
        seed: 1,
        ..DanceConfig::default()
    };
    let mut pool = WorkerPool::simulated(ds.clone(), 4)?;
    let run = run_dance(&mut pool, &spec, &cfg)?;

    println!(
        "{:>6} {:>6} {:>9} {:>8} {:>9} {:>10} {:>10}",
        "n", "K", "K bound", "T", "T bound", "subopt", "lemma bnd"
    );
    let mut stage_inputs = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for s in &run.stages {
        // measured initial suboptimality against a dense reference solve
        let view = RiskView::new(spec, ds.window(s.n)?);
        let wstar = reference_minimizer(&view, 1e-12)?;
        let subopt =
            (view.value(&DVector::from_column_slice(&s.w_in))? - view.value(&wstar)?).max(0.0);
        let k_n = theory::inner_iter_bound(subopt, s.v_n);
        let c_n = theory::pcg_iter_bound_reduced(s.lambda_n, s.m_const, s.predicted.mu, cfg.beta);
        let t_n = theory::stage_round_bound(k_n, c_n);

        // warm-start lemma bound for stages after the first
        let lemma = prev
            .map(|(m, _)| {
                theory::warmstart_bound_general(s.n, m, spec.gamma, spec.c, wstar.norm_squared())
            })
            .transpose()?
            .map(|b| format!("{b:.3e}"))
            .unwrap_or_else(|| "—".into());

        println!(
            "{:>6} {:>6} {:>9} {:>8} {:>9} {:>10.3e} {:>10}",
            s.n, s.k_measured, k_n, s.t_measured, t_n, subopt, lemma
        );
        stage_inputs.push(theory::StageBoundInputs {
            subopt,
            v_n: s.v_n,
            c_v_n: s.lambda_n,
            m_const: s.m_const,
            mu: s.predicted.mu,
            beta: cfg.beta,
        });
        prev = Some((s.n, subopt));
    }

    let ledger = pool.ledger_snapshot();
    println!("\nmeasured total rounds:  {}", ledger.grand_total);
    println!(
        "summed stage bound:     {}",
        theory::total_round_bound_summed(&stage_inputs)
    );
    let last = run.stages.last().unwrap();
    println!(
        "closed-form indicator:  {:.3e}",
        theory::total_round_bound_closed_form(
            ds.len(),
            cfg.m0,
            spec.gamma,
            spec.c,
            last.m_const,
            cfg.beta,
            run.stages.iter().map(|s| s.predicted.mu).fold(0.0, f64::max),
            run.weights.norm_squared(),
        )
    );
    println!(
        "complexity indicator:   {:.3e}",
        theory::complexity_indicator(ds.len(), ds.dim())
    );
    Ok(())
}
