//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them all).

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dance::bench::{run_disco_mode, run_staged_trace, Evaluator};
use dance::data::{synth_logistic, Dataset};
use dance::distrib::WorkerPool;
use dance::model::{RiskSpec, RiskView};
use dance::pcg::{build_preconditioner, dense_hessian, exact_newton_reference, reference_minimizer};
use dance::solver::{damped_step, run_dance, DanceConfig, StageReport, StepRecord, StopRule};
use dance::theory;

fn rand_vec(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.abs()))
}

/// `H̃ + cV_n·I` assembled densely from a recorded subset.
fn dense_subsampled_hessian(
    view: &RiskView<'_>,
    w: &DVector<f64>,
    subset: &[usize],
) -> DMatrix<f64> {
    let d = view.dim();
    let mut h = DMatrix::zeros(d, d);
    let coef = 1.0 / subset.len() as f64;
    for &i in subset {
        let (s, row) = view.hessian_factor(w, i);
        for (&ja, &xa) in row.indices.iter().zip(row.values) {
            for (&jb, &xb) in row.indices.iter().zip(row.values) {
                h[(ja as usize, jb as usize)] += coef * s * xa * xb;
            }
        }
    }
    for j in 0..d {
        h[(j, j)] += view.lambda();
    }
    h
}

/// Criterion-3/4 workhorse: 50 damped-Newton steps at fixed n, keeping the
/// pre-step iterate of every step.
fn fifty_steps() -> (Arc<Dataset>, RiskSpec, Vec<(DVector<f64>, StepRecord)>) {
    let ds = Arc::new(synth_logistic(256, 30, 23, 0.25).unwrap());
    let spec = RiskSpec::new(0.1, 0.5).unwrap();
    let cfg = DanceConfig {
        m0: 256,
        seed: 5,
        ..DanceConfig::default()
    };
    let view = RiskView::new(spec, ds.window(256).unwrap());
    let mut pool = WorkerPool::simulated(ds.clone(), 4).unwrap();
    pool.configure_window(256).unwrap();
    let mut w = DVector::zeros(30);
    let mut steps = Vec::with_capacity(50);
    for k in 0..50 {
        let out = damped_step(&mut pool, &view, &w, &cfg, k).unwrap();
        steps.push((w.clone(), out.record));
        w = out.w_next;
    }
    (ds, spec, steps)
}

/// Iterates `w̃_0 … w̃_{K}` of a stage, replayed from the recorded
/// directions (bit-exact reconstruction).
fn replay_iterates(report: &StageReport) -> Vec<DVector<f64>> {
    let mut w = DVector::from_column_slice(&report.w_in);
    let mut iterates = vec![w.clone()];
    for rec in &report.steps {
        let dir = DVector::from_column_slice(&rec.direction);
        w = &w - dir / (1.0 + rec.delta);
        iterates.push(w.clone());
    }
    iterates
}

fn criterion5_run(workers: usize) -> (Arc<Dataset>, RiskSpec, DanceConfig, WorkerPool, dance::solver::DanceRun) {
    let ds = Arc::new(synth_logistic(4096, 20, 1, 0.25).unwrap());
    let spec = RiskSpec::new(0.1, 0.5).unwrap();
    let cfg = DanceConfig {
        m0: 64,
        seed: 1,
        ..DanceConfig::default()
    };
    let mut pool = WorkerPool::simulated(ds.clone(), workers).unwrap();
    let run = run_dance(&mut pool, &spec, &cfg).unwrap();
    (ds, spec, cfg, pool, run)
}

#[test]
fn criterion_1_woodbury_matches_dense_solve() {
    let ds = synth_logistic(200, 50, 7, 0.25).unwrap();
    let spec = RiskSpec::new(0.1, 0.5).unwrap();
    let view = RiskView::new(spec, ds.window(200).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let w = rand_vec(50, &mut rng);
    let p = build_preconditioner(&view, &w, 20, 0.3, 9).unwrap();
    let dense = p.dense().unwrap();
    let chol = Cholesky::new(dense).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let r = rand_vec(50, &mut rng);
        let fast = p.apply_inverse(&r).unwrap();
        let exact = chol.solve(&r);
        let rel = (&fast - &exact).norm() / exact.norm();
        worst = worst.max(rel);
        assert!(rel <= 1e-8, "woodbury apply off by {rel:.3e}");
    }
    println!("criterion 1: PASS (d=50, |A|=20, 100 rhs, worst rel err {worst:.3e} ≤ 1e-8)");
}

#[test]
fn criterion_2_derivatives_match_finite_differences() {
    let ds = synth_logistic(200, 30, 13, 0.25).unwrap();
    let spec = RiskSpec::new(0.1, 0.5).unwrap();
    let view = RiskView::new(spec, ds.window(200).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    for _ in 0..20 {
        let w = rand_vec(30, &mut rng);

        let g = view.grad_full(&w);
        let h_fd = 1e-6 * (1.0 + w.norm());
        let fd = DVector::from_fn(30, |j, _| {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h_fd;
            wm[j] -= h_fd;
            (view.value(&wp).unwrap() - view.value(&wm).unwrap()) / (2.0 * h_fd)
        });
        let rel_g = (&g - &fd).norm() / g.norm();
        worst_g = worst_g.max(rel_g);
        assert!(rel_g <= 1e-5, "gradient fd mismatch {rel_g:.3e}");

        let v = rand_vec(30, &mut rng);
        let hv = view.hvp_full(&w, &v);
        let h = 1e-5;
        let fd_hv =
            (view.grad_full(&(&w + h * &v)) - view.grad_full(&(&w - h * &v))) / (2.0 * h);
        let rel_h = (&hv - &fd_hv).norm() / hv.norm();
        worst_h = worst_h.max(rel_h);
        assert!(rel_h <= 1e-5, "hvp fd mismatch {rel_h:.3e}");
    }
    println!(
        "criterion 2: PASS (20 points, worst grad rel {worst_g:.3e}, worst hvp rel {worst_h:.3e} ≤ 1e-5)"
    );
}

#[test]
fn criterion_3_pcg_exit_contract_and_iteration_bound() {
    let (ds, spec, steps) = fifty_steps();
    let view = RiskView::new(spec, ds.window(256).unwrap());
    let mut excluded = 0usize;
    let mut checked = 0usize;
    for (w, rec) in &steps {
        // exit contract, re-verified against direct evaluations
        let v = DVector::from_column_slice(&rec.direction);
        let residual = (view.hvp_full(w, &v) - view.grad_full(w)).norm();
        assert!(
            residual <= rec.eps * (1.0 + 1e-9),
            "step {}: ‖Hv−∇R‖ = {residual:.3e} > ε = {:.3e}",
            rec.step,
            rec.eps
        );

        // iteration bound, conditional on the subsampling hypothesis
        let h = dense_hessian(&view, w).unwrap();
        let h_sub = dense_subsampled_hessian(&view, w, &rec.subset);
        let gap = spectral_norm(&(h_sub - h));
        if gap <= rec.mu {
            let bound = theory::pcg_iter_bound_general(
                view.lambda(),
                view.m_const(),
                rec.mu,
                rec.grad_norm,
                rec.eps,
            );
            assert!(
                rec.pcg_iters as u64 <= bound,
                "step {}: {} PCG iterations > bound {bound}",
                rec.step,
                rec.pcg_iters
            );
            checked += 1;
        } else {
            excluded += 1;
        }
    }
    assert!(checked > 0, "hypothesis never held; nothing was checked");
    println!(
        "criterion 3: PASS (50 steps, exit contract everywhere; bound checked on {checked}, excluded {excluded} where ‖H̃−H‖₂ > μ)"
    );
}

#[test]
fn criterion_4_decrement_sandwich() {
    let (ds, spec, steps) = fifty_steps();
    let view = RiskView::new(spec, ds.window(256).unwrap());
    let beta = 1.0 / 20.0;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for (w, rec) in &steps {
        if rec.eps_floor_engaged {
            // tolerance no longer follows the forcing rule near stationarity
            skipped += 1;
            continue;
        }
        let (_, exact_dec) = exact_newton_reference(&view, w).unwrap();
        assert!(
            (1.0 - beta) * exact_dec <= rec.delta && rec.delta <= (1.0 + beta) * exact_dec,
            "step {}: δ = {:.6e} outside [{:.6e}, {:.6e}]",
            rec.step,
            rec.delta,
            (1.0 - beta) * exact_dec,
            (1.0 + beta) * exact_dec
        );
        checked += 1;
    }
    assert!(checked >= 5, "too few forcing-rule steps to be meaningful");
    println!(
        "criterion 4: PASS ({checked} steps inside the (1±β)‖ũ‖ band; {skipped} near-stationary steps outside the forcing rule skipped)"
    );
}

#[test]
fn criterion_5_every_stage_reaches_statistical_accuracy() {
    let (ds, spec, _cfg, _pool, run) = criterion5_run(4);
    assert_eq!(
        run.stages.iter().map(|s| s.n).collect::<Vec<_>>(),
        vec![64, 128, 256, 512, 1024, 2048, 4096]
    );
    let mut worst_ratio = 0.0f64;
    for stage in &run.stages {
        let view = RiskView::new(spec, ds.window(stage.n).unwrap());
        let wstar = reference_minimizer(&view, 1e-12).unwrap();
        let r_star = view.value(&wstar).unwrap();
        let w_out = DVector::from_column_slice(&stage.w_out);
        let subopt = view.value(&w_out).unwrap() - r_star;
        worst_ratio = worst_ratio.max(subopt / stage.v_n);
        assert!(
            subopt <= stage.v_n,
            "stage n={}: suboptimality {subopt:.3e} > V_n = {:.3e}",
            stage.n,
            stage.v_n
        );
    }
    let view = RiskView::new(spec, ds.window(4096).unwrap());
    let final_grad = view.grad_full(&run.weights).norm();
    let threshold = (2.0 * spec.c).sqrt() * view.v_n();
    assert!(final_grad < threshold);
    println!(
        "criterion 5: PASS (7 stages all within V_n, worst subopt/V_n = {worst_ratio:.3e}; final ‖∇R_N‖ = {final_grad:.3e} < {threshold:.3e})"
    );
}

#[test]
fn criterion_6_round_ledger_and_theorem_bounds() {
    let (ds, spec, cfg, pool, run) = criterion5_run(4);
    let ledger = pool.ledger_snapshot();

    let mut stage_inputs = Vec::new();
    let mut all_hypotheses_held = true;
    for (stage, ledger_stage) in run.stages.iter().zip(&ledger.stages) {
        // exact ledger law
        let expected: u64 = stage.steps.iter().map(|s| 1 + s.pcg_iters as u64).sum();
        assert_eq!(stage.t_measured, expected, "stage n={}", stage.n);
        assert_eq!(ledger_stage.rounds, expected, "ledger stage n={}", stage.n);

        // measured initial suboptimality via the dense oracle
        let view = RiskView::new(spec, ds.window(stage.n).unwrap());
        let wstar = reference_minimizer(&view, 1e-12).unwrap();
        let r_star = view.value(&wstar).unwrap();
        let w_in = DVector::from_column_slice(&stage.w_in);
        let subopt = (view.value(&w_in).unwrap() - r_star).max(0.0);

        // Lemma-1 hypothesis, step by step
        let iterates = replay_iterates(stage);
        let hypothesis_held = stage.steps.iter().zip(&iterates).all(|(rec, w)| {
            let h = dense_hessian(&view, w).unwrap();
            let h_sub = dense_subsampled_hessian(&view, w, &rec.subset);
            spectral_norm(&(h_sub - h)) <= rec.mu
        });
        all_hypotheses_held &= hypothesis_held;

        let mu = stage.predicted.mu;
        let k_n = theory::inner_iter_bound(subopt, stage.v_n);
        let c_n = theory::pcg_iter_bound_reduced(stage.lambda_n, stage.m_const, mu, cfg.beta);
        if hypothesis_held {
            assert!(
                stage.k_measured as u64 <= k_n,
                "stage n={}: K = {} > K_n = {k_n}",
                stage.n,
                stage.k_measured
            );
            assert!(
                stage.t_measured <= theory::stage_round_bound(k_n, c_n),
                "stage n={}: T = {} > bound {}",
                stage.n,
                stage.t_measured,
                theory::stage_round_bound(k_n, c_n)
            );
        }
        stage_inputs.push(theory::StageBoundInputs {
            subopt,
            v_n: stage.v_n,
            c_v_n: stage.lambda_n,
            m_const: stage.m_const,
            mu,
            beta: cfg.beta,
        });
    }

    assert_eq!(
        ledger.grand_total,
        ledger.stages.iter().map(|s| s.rounds).sum::<u64>()
    );
    let total_bound = theory::total_round_bound_summed(&stage_inputs);
    assert!(all_hypotheses_held, "subsampling hypothesis failed somewhere");
    assert!(
        ledger.grand_total <= total_bound,
        "grand total {} > summed bound {total_bound}",
        ledger.grand_total
    );
    println!(
        "criterion 6: PASS (per-stage T = Σ(1+pcg) exactly; measured total {} ≤ summed bound {total_bound}; hypothesis held on every step)",
        ledger.grand_total
    );
}

#[test]
fn criterion_7_worker_count_invariance() {
    let mut runs = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let (_, _, _, pool, run) = criterion5_run(k);
        runs.push((k, pool.ledger_snapshot(), run.weights));
    }
    let (_, ref ledger0, ref w0) = runs[0];
    for (k, ledger, w) in &runs[1..] {
        assert_eq!(ledger, ledger0, "ledger differs at K = {k}");
        let diff = (w - w0).amax();
        assert!(diff <= 1e-10, "K = {k}: max-abs iterate diff {diff:.3e}");
    }
    println!(
        "criterion 7: PASS (K ∈ {{1,2,4,8}}: identical ledgers, {} rounds; iterate spread ≤ 1e-10)",
        ledger0.grand_total
    );
}

#[test]
fn criterion_8_staged_run_beats_single_stage_on_data_passes() {
    let ds = Arc::new(synth_logistic(4096, 20, 1, 0.25).unwrap());
    let spec = RiskSpec::new(0.1, 0.5).unwrap();
    let cfg = DanceConfig {
        m0: 64,
        seed: 1,
        ..DanceConfig::default()
    };
    let eval = Evaluator::new(&ds, None, spec);

    let trace = |m0: Option<usize>| {
        let mut pool = WorkerPool::simulated(ds.clone(), 4).unwrap();
        match m0 {
            Some(_) => run_staged_trace(&mut pool, &spec, &cfg, "dance", &eval, false).unwrap(),
            None => run_disco_mode(&mut pool, &spec, &cfg, &eval, false).unwrap(),
        }
    };

    let (_, dance_rows) = trace(Some(64));
    let (_, dance_rows_again) = trace(Some(64));
    let (_, disco_rows) = trace(None);
    let (_, disco_rows_again) = trace(None);
    assert_eq!(dance_rows, dance_rows_again, "staged trace not deterministic");
    assert_eq!(disco_rows, disco_rows_again, "single-stage trace not deterministic");

    let dance_evals = dance_rows.last().unwrap().eff_grad_evals;
    let disco_evals = disco_rows.last().unwrap().eff_grad_evals;
    assert!(
        dance_evals < disco_evals,
        "staged: {dance_evals:.3}, single-stage: {disco_evals:.3}"
    );
    println!(
        "criterion 8: PASS (effective gradient evaluations to the final stop: staged {dance_evals:.3} < single-stage {disco_evals:.3}; both traces deterministic)"
    );
}

#[test]
fn criterion_9_theory_calculator_reference_values() {
    assert_eq!(theory::pcg_iter_bound_reduced(1.0, 1.0, 0.0, 1.0 / 20.0), 7);
    assert_eq!(theory::inner_iter_bound(0.01, 0.01), 4);
    let w6 = theory::omega(1.0 / 6.0).unwrap();
    assert!((w6 - (1.0 / 6.0 - (7.0f64 / 6.0).ln())).abs() < 1e-16);
    for i in 0..=1000 {
        let t = 0.68 * i as f64 / 1000.0;
        assert!(theory::omega_star(t).unwrap() <= t * t);
    }
    println!("criterion 9: PASS (pcg bound 7, inner bound 4, ω*(t) ≤ t² on 1000-point grid over [0, 0.68])");
}

#[test]
fn criterion_10_stop_rules_certify_suboptimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut by_rule = [0usize; 2];
    for trial in 0..20 {
        let d = rng.gen_range(5..=20);
        let n = rng.gen_range(32..=512);
        let ds = Arc::new(synth_logistic(n, d, 3000 + trial, 0.25).unwrap());
        let spec = RiskSpec::new(0.1, 0.5).unwrap();
        let view = RiskView::new(spec, ds.window(n).unwrap());
        let rule = if trial % 2 == 0 {
            StopRule::GradNorm
        } else {
            StopRule::Decrement
        };
        if rule == StopRule::Decrement {
            assert!(view.v_n() <= 0.4624, "instance too small for the decrement rule");
        }
        let cfg = DanceConfig {
            m0: n,
            seed: 77 + trial,
            stop_rule: rule,
            ..DanceConfig::default()
        };
        let mut pool = WorkerPool::simulated(ds.clone(), 2).unwrap();
        pool.configure_window(n).unwrap();
        let (w, _) = dance::solver::run_stage(&mut pool, &view, DVector::zeros(d), &cfg).unwrap();

        let wstar = reference_minimizer(&view, 1e-12).unwrap();
        let subopt = view.value(&w).unwrap() - view.value(&wstar).unwrap();
        assert!(
            subopt <= view.v_n(),
            "trial {trial} (rule {rule:?}): subopt {subopt:.3e} > V_n {:.3e}",
            view.v_n()
        );
        by_rule[(trial % 2) as usize] += 1;
    }
    println!(
        "criterion 10: PASS (20 instances, zero violations; {} gradient-rule and {} decrement-rule stops)",
        by_rule[0], by_rule[1]
    );
}
