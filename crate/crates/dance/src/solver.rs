//! The staged outer loop: geometric sample-size growth with warm starts,
//! inexact damped Newton steps inside each stage, and the two practical
//! stopping rules.
//!
//! Each inner step solves the Newton system through the worker pool (which
//! does all counted communication); tolerances and stop tests use
//! master-side evaluations over the active window and consume no rounds.

use nalgebra::DVector;
use serde::Serialize;

use crate::distrib::WorkerPool;
use crate::error::{Error, Result};
use crate::model::{RiskSpec, RiskView};
use crate::pcg::{build_preconditioner, pcg_solve};
use crate::theory;

/// Which certificate ends a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopRule {
    /// `‖∇R_n(w)‖ < √(2c)·V_n` — unconditional.
    GradNorm,
    /// `δ_n(w) ≤ (1−β)·√V_n` — valid for `V_n ≤ 0.68²`, falls back to the
    /// gradient rule outside that range (and before the first step of a
    /// stage, when no decrement exists yet).
    Decrement,
}

/// Rule for the preconditioner ridge `μ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MuRule {
    /// `μ = M / √|A|`, scaling with the expected Hessian-subsampling error.
    SubsampleScaled,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DanceConfig {
    /// Stage growth factor (> 1).
    pub alpha: f64,
    /// Initial sample size.
    pub m0: usize,
    /// Forcing constant in (0, 1/20].
    pub beta: f64,
    pub stop_rule: StopRule,
    /// Cap Λ on the Hessian subset size.
    pub subset_cap: usize,
    pub mu_rule: MuRule,
    /// Inner-step budget per stage.
    pub max_inner: usize,
    /// PCG iteration budget; defaults to 10× the reduced-form iteration
    /// bound at the current μ, so a broken preconditioner surfaces as a
    /// diagnosable non-convergence instead of a hang.
    pub max_pcg: Option<usize>,
    pub seed: u64,
}

impl Default for DanceConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            m0: 128,
            beta: 1.0 / 20.0,
            stop_rule: StopRule::GradNorm,
            subset_cap: 100,
            mu_rule: MuRule::SubsampleScaled,
            max_inner: 100,
            max_pcg: None,
            seed: 0,
        }
    }
}

impl DanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidArg(format!(
                "alpha must be > 1, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0 / 20.0) {
            return Err(Error::InvalidArg(format!(
                "beta must lie in (0, 1/20], got {}",
                self.beta
            )));
        }
        if self.m0 == 0 {
            return Err(Error::InvalidArg("m0 must be ≥ 1".into()));
        }
        if self.subset_cap == 0 {
            return Err(Error::InvalidArg("subset cap must be ≥ 1".into()));
        }
        if self.max_inner == 0 {
            return Err(Error::InvalidArg("max_inner must be ≥ 1".into()));
        }
        if let MuRule::Fixed(mu) = self.mu_rule {
            if mu < 0.0 {
                return Err(Error::InvalidArg(format!("fixed mu must be ≥ 0, got {mu}")));
            }
        }
        Ok(())
    }

    pub fn mu(&self, m_const: f64, subset_size: usize) -> f64 {
        match self.mu_rule {
            MuRule::SubsampleScaled => m_const / (subset_size as f64).sqrt(),
            MuRule::Fixed(mu) => mu,
        }
    }
}

/// Everything recorded about one accepted damped-Newton step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// `‖∇R_n(w̃_k)‖` as used by the forcing rule.
    pub grad_norm: f64,
    /// PCG tolerance actually used.
    pub eps: f64,
    /// True when the near-stationary floor overrode the forcing rule.
    pub eps_floor_engaged: bool,
    /// Approximate Newton decrement `δ_n(w̃_k)`.
    pub delta: f64,
    pub decrement_clamped: bool,
    pub pcg_iters: usize,
    pub rounds: u64,
    pub mu: f64,
    /// Hessian subset `A` drawn for this step's preconditioner.
    pub subset: Vec<usize>,
    /// The ε-Newton direction `v_k` (also replay data: iterates reconstruct
    /// from `w_in` by `w ← w − v/(1+δ)`).
    pub direction: Vec<f64>,
    pub risk_before: f64,
    pub risk_after: f64,
}

/// Stage-level bound predictions, computable without any oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryPrediction {
    /// Strong-convexity certificate for the warm start's suboptimality:
    /// `‖∇R_n(w_in)‖² / (2·cV_n)`.
    pub subopt_bound_grad: f64,
    /// Warm-start suboptimality bound from the sample-growth lemma, with
    /// `‖w_in‖²` standing in for `‖w*‖²`; absent for the first stage.
    pub subopt_bound_warmstart: Option<f64>,
    pub k_bound: u64,
    pub pcg_bound: u64,
    pub round_bound: u64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub n: usize,
    pub v_n: f64,
    pub lambda_n: f64,
    pub m_const: f64,
    /// Inner iterations taken.
    pub k_measured: usize,
    /// Communication rounds: `Σ_steps (1 + pcg_iters)`.
    pub t_measured: u64,
    pub steps: Vec<StepRecord>,
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub initial_grad_norm: f64,
    pub final_grad_norm: f64,
    /// Decrement from the last step, when any step was taken.
    pub final_delta: Option<f64>,
    pub predicted: TheoryPrediction,
}

/// Result of a full staged run.
#[derive(Debug, Clone, PartialEq)]
pub struct DanceRun {
    pub weights: DVector<f64>,
    pub stages: Vec<StageReport>,
}

/// Deterministic per-(stage, step) seed for subset resampling.
fn derive_seed(base: u64, n: usize, step: usize) -> u64 {
    let mut z = base
        ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (step as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct StepOutcome {
    pub w_next: DVector<f64>,
    pub record: StepRecord,
}

/// One inexact damped Newton step: set the forcing tolerance
/// `ε_k = β·√(cV_n/(M+cV_n))·‖∇R_n(w̃_k)‖` (floored near stationary
/// points), solve for the direction through the pool, and move by
/// `w̃_{k+1} = w̃_k − v_k/(1+δ_n)`.
pub fn damped_step(
    pool: &mut WorkerPool,
    view: &RiskView<'_>,
    w: &DVector<f64>,
    cfg: &DanceConfig,
    step_index: usize,
) -> Result<StepOutcome> {
    let risk_before = view.value(w)?;
    let grad_norm = view.grad_full(w).norm();
    let c_v = view.lambda();
    let m_const = view.m_const();

    let eps_forcing = cfg.beta * (c_v / (m_const + c_v)).sqrt() * grad_norm;
    let eps_floor = 1e-14 * (1.0 + grad_norm);
    let eps_floor_engaged = eps_forcing < eps_floor;
    let eps = if eps_floor_engaged { eps_floor } else { eps_forcing };

    let subset_size = cfg.subset_cap.min(view.n());
    let mu = cfg.mu(m_const, subset_size);
    let seed = derive_seed(cfg.seed, view.n(), step_index);
    let precond = build_preconditioner(view, w, subset_size, mu, seed)?;

    let max_pcg = cfg.max_pcg.unwrap_or_else(|| {
        (10 * theory::pcg_iter_bound_reduced(c_v, m_const, mu, cfg.beta)).max(10) as usize
    });

    let out = pcg_solve(pool, view, w, &precond, eps, max_pcg)?;
    let w_next = w - &out.direction / (1.0 + out.decrement);
    let risk_after = view.value(&w_next)?;

    Ok(StepOutcome {
        w_next,
        record: StepRecord {
            step: step_index,
            grad_norm,
            eps,
            eps_floor_engaged,
            delta: out.decrement,
            decrement_clamped: out.decrement_clamped,
            pcg_iters: out.iterations,
            rounds: out.rounds,
            mu,
            subset: precond.subset().to_vec(),
            direction: out.direction.as_slice().to_vec(),
            risk_before,
            risk_after,
        },
    })
}

/// True when the selected rule certifies `w` as `V_n`-suboptimal.
///
/// `delta` is the decrement of the most recent step at this sample size;
/// without one (stage entry) the decrement rule falls back to the gradient
/// rule, as it does whenever `V_n > 0.68²`.
pub fn stop_check(
    view: &RiskView<'_>,
    w: &DVector<f64>,
    delta: Option<f64>,
    cfg: &DanceConfig,
) -> Result<bool> {
    let grad_rule = |view: &RiskView<'_>, w: &DVector<f64>| -> Result<bool> {
        let g = view.grad_full(w).norm();
        Ok(g < (2.0 * view.spec.c).sqrt() * view.v_n())
    };
    match cfg.stop_rule {
        StopRule::GradNorm => grad_rule(view, w),
        StopRule::Decrement => {
            if view.v_n() > 0.68 * 0.68 {
                return grad_rule(view, w);
            }
            match delta {
                Some(d) => Ok(d <= (1.0 - cfg.beta) * view.v_n().sqrt()),
                None => grad_rule(view, w),
            }
        }
    }
}

/// Run one stage from a warm start until its stop rule holds.
///
/// The pool must already be configured to this view's window.
pub fn run_stage(
    pool: &mut WorkerPool,
    view: &RiskView<'_>,
    w_warm: DVector<f64>,
    cfg: &DanceConfig,
) -> Result<(DVector<f64>, StageReport)> {
    cfg.validate()?;
    let n = view.n();
    pool.begin_stage(n);

    let initial_risk = view.value(&w_warm)?;
    let initial_grad_norm = view.grad_full(&w_warm).norm();
    let subset_size = cfg.subset_cap.min(n);
    let mu = cfg.mu(view.m_const(), subset_size);
    let subopt_bound_grad = initial_grad_norm * initial_grad_norm / (2.0 * view.lambda());
    let k_bound = theory::inner_iter_bound(subopt_bound_grad, view.v_n());
    let pcg_bound = theory::pcg_iter_bound_reduced(view.lambda(), view.m_const(), mu, cfg.beta);
    let predicted = TheoryPrediction {
        subopt_bound_grad,
        subopt_bound_warmstart: None,
        k_bound,
        pcg_bound,
        round_bound: theory::stage_round_bound(k_bound, pcg_bound),
        mu,
    };

    let mut w = w_warm.clone();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut last_delta: Option<f64> = None;

    loop {
        if stop_check(view, &w, last_delta, cfg)? {
            break;
        }
        if steps.len() >= cfg.max_inner {
            let report = finish_report(view, &w_warm, &w, initial_risk, initial_grad_norm, steps, predicted)?;
            return Err(Error::StageFailure {
                n,
                report: Box::new(report),
            });
        }
        let out = damped_step(pool, view, &w, cfg, steps.len())?;
        last_delta = Some(out.record.delta);
        w = out.w_next;
        steps.push(out.record);
    }

    let report = finish_report(view, &w_warm, &w, initial_risk, initial_grad_norm, steps, predicted)?;
    Ok((w, report))
}

fn finish_report(
    view: &RiskView<'_>,
    w_in: &DVector<f64>,
    w_out: &DVector<f64>,
    initial_risk: f64,
    initial_grad_norm: f64,
    steps: Vec<StepRecord>,
    predicted: TheoryPrediction,
) -> Result<StageReport> {
    Ok(StageReport {
        n: view.n(),
        v_n: view.v_n(),
        lambda_n: view.lambda(),
        m_const: view.m_const(),
        k_measured: steps.len(),
        t_measured: steps.iter().map(|s| s.rounds).sum(),
        w_in: w_in.as_slice().to_vec(),
        w_out: w_out.as_slice().to_vec(),
        initial_risk,
        final_risk: view.value(w_out)?,
        initial_grad_norm,
        final_grad_norm: view.grad_full(w_out).norm(),
        final_delta: steps.last().map(|s| s.delta),
        predicted,
        steps,
    })
}

/// Stage sizes `m0, ⌈α·m0⌉, …` capped at `N` via `min{⌈αm⌉, N}`.
pub fn stage_schedule(m0: usize, alpha: f64, big_n: usize) -> Vec<usize> {
    let mut m = m0.min(big_n);
    let mut sizes = vec![m];
    while m < big_n {
        m = ((alpha * m as f64).ceil() as usize).min(big_n);
        sizes.push(m);
    }
    sizes
}

/// The full multistage run over the pool's dataset, starting from `w = 0`
/// at size `m0` and warm-starting every following stage with the previous
/// stage's exact output vector.
pub fn run_dance(
    pool: &mut WorkerPool,
    spec: &RiskSpec,
    cfg: &DanceConfig,
) -> Result<DanceRun> {
    cfg.validate()?;
    let ds = pool.dataset().clone();
    let big_n = ds.len();
    if cfg.m0 > big_n {
        return Err(Error::InvalidArg(format!(
            "m0 = {} exceeds dataset size {big_n}",
            cfg.m0
        )));
    }
    let mut w = DVector::zeros(ds.dim());
    let mut stages: Vec<StageReport> = Vec::new();
    let mut prev_n: Option<usize> = None;

    for n in stage_schedule(cfg.m0, cfg.alpha, big_n) {
        let view = RiskView::new(*spec, ds.window(n)?);
        pool.configure_window(n)?;
        let (w_out, mut report) = run_stage(pool, &view, w, cfg)?;
        if let Some(m) = prev_n {
            let wstar_est = report.w_in.iter().map(|x| x * x).sum::<f64>();
            report.predicted.subopt_bound_warmstart =
                theory::warmstart_bound_general(n, m, spec.gamma, spec.c, wstar_est).ok();
        }
        w = w_out;
        prev_n = Some(n);
        stages.push(report);
    }

    Ok(DanceRun { weights: w, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_logistic, Dataset};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn pure_ridge_view_setup() -> (Arc<Dataset>, RiskSpec) {
        // One sample with x = 0: loss part constant, H = cV·I with cV = 1.
        let ds = Arc::new(Dataset::from_parts(2, vec![0, 0], vec![], vec![], vec![1.0]).unwrap());
        let spec = RiskSpec::new(1.0, 1.0).unwrap();
        (ds, spec)
    }

    fn synth_setup(n: usize, d: usize, seed: u64) -> (Arc<Dataset>, RiskSpec) {
        let ds = Arc::new(synth_logistic(n, d, seed, 0.25).unwrap());
        let spec = RiskSpec::new(0.1, 0.5).unwrap();
        (ds, spec)
    }

    #[test]
    fn damped_step_on_pure_quadratic() {
        let (ds, spec) = pure_ridge_view_setup();
        let view = RiskView::new(spec, ds.window(1).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 1).unwrap();
        pool.configure_window(1).unwrap();
        let cfg = DanceConfig {
            m0: 1,
            subset_cap: 1,
            ..DanceConfig::default()
        };
        let w = DVector::from_column_slice(&[1.0, 0.0]);
        let out = damped_step(&mut pool, &view, &w, &cfg, 0).unwrap();
        assert_relative_eq!(out.record.delta, 1.0, max_relative = 1e-12);
        assert_relative_eq!(out.w_next[0], 0.5, max_relative = 1e-12);
        assert_eq!(out.w_next[1], 0.0);
    }

    #[test]
    fn damped_step_is_a_no_op_at_stationary_points() {
        let (ds, spec) = pure_ridge_view_setup();
        let view = RiskView::new(spec, ds.window(1).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 1).unwrap();
        pool.configure_window(1).unwrap();
        let cfg = DanceConfig {
            m0: 1,
            subset_cap: 1,
            ..DanceConfig::default()
        };
        let w = DVector::zeros(2);
        let out = damped_step(&mut pool, &view, &w, &cfg, 0).unwrap();
        assert!(out.record.eps_floor_engaged);
        assert_eq!(out.w_next, w);
        assert_eq!(out.record.pcg_iters, 0);
    }

    #[test]
    fn risk_decreases_across_steps() {
        let (ds, spec) = synth_setup(256, 20, 2);
        let view = RiskView::new(spec, ds.window(256).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 4).unwrap();
        pool.configure_window(256).unwrap();
        let cfg = DanceConfig {
            m0: 256,
            ..DanceConfig::default()
        };
        let mut w = DVector::zeros(20);
        for k in 0..8 {
            let out = damped_step(&mut pool, &view, &w, &cfg, k).unwrap();
            assert!(
                out.record.risk_after < out.record.risk_before + 1e-12 * (1.0 + out.record.risk_before.abs()),
                "risk did not decrease at step {k}"
            );
            w = out.w_next;
        }
    }

    #[test]
    fn forcing_rule_floats_are_reproducible() {
        let (ds, spec) = synth_setup(128, 10, 4);
        let view = RiskView::new(spec, ds.window(128).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 2).unwrap();
        pool.configure_window(128).unwrap();
        let cfg = DanceConfig {
            m0: 128,
            ..DanceConfig::default()
        };
        let w = DVector::zeros(10);
        let out = damped_step(&mut pool, &view, &w, &cfg, 0).unwrap();
        let c_v = view.lambda();
        let expect = cfg.beta * (c_v / (view.m_const() + c_v)).sqrt() * out.record.grad_norm;
        assert!(!out.record.eps_floor_engaged);
        assert_eq!(out.record.eps, expect, "ε_k must be the exact forcing-rule value");
    }

    #[test]
    fn stop_rule_examples() {
        // gradient rule: ‖∇‖ = 0.01 against threshold √0.2·0.1 ≈ 0.0447
        assert!(0.01 < (2.0f64 * 0.1).sqrt() * 0.1);
        // decrement rule: δ = 0.2, β = 1/20, V_n = 0.04 → threshold 0.19
        let (ds, spec) = synth_setup(625, 4, 5); // V_n = 625^{-0.5} = 0.04
        let view = RiskView::new(spec, ds.window(625).unwrap());
        let cfg = DanceConfig {
            stop_rule: StopRule::Decrement,
            ..DanceConfig::default()
        };
        assert_relative_eq!(view.v_n(), 0.04, max_relative = 1e-12);
        let w = DVector::from_element(4, 10.0); // gradient rule would not fire here
        assert!(!stop_check(&view, &w, Some(0.2), &cfg).unwrap());
        assert!(stop_check(&view, &w, Some(0.18), &cfg).unwrap());
    }

    #[test]
    fn decrement_rule_falls_back_when_vn_large() {
        let (ds, spec) = pure_ridge_view_setup(); // V_1 = 1 > 0.68²
        let view = RiskView::new(spec, ds.window(1).unwrap());
        let cfg = DanceConfig {
            stop_rule: StopRule::Decrement,
            ..DanceConfig::default()
        };
        // gradient rule fires at w = 0 (∇R = 0 < √2·1)
        assert!(stop_check(&view, &DVector::zeros(2), Some(10.0), &cfg).unwrap());
    }

    #[test]
    fn satisfied_warm_start_takes_no_steps_and_no_rounds() {
        let (ds, spec) = synth_setup(128, 8, 6);
        let view = RiskView::new(spec, ds.window(128).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 2).unwrap();
        pool.configure_window(128).unwrap();
        let cfg = DanceConfig {
            m0: 128,
            ..DanceConfig::default()
        };
        let (w1, _) = run_stage(&mut pool, &view, DVector::zeros(8), &cfg).unwrap();
        let rounds_before = pool.rounds();
        let (w2, report) = run_stage(&mut pool, &view, w1.clone(), &cfg).unwrap();
        assert_eq!(report.k_measured, 0);
        assert_eq!(report.t_measured, 0);
        assert_eq!(pool.rounds(), rounds_before);
        assert_eq!(w1, w2);
    }

    #[test]
    fn stage_ledger_matches_report() {
        let (ds, spec) = synth_setup(200, 12, 7);
        let view = RiskView::new(spec, ds.window(200).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 4).unwrap();
        pool.configure_window(200).unwrap();
        let cfg = DanceConfig {
            m0: 200,
            ..DanceConfig::default()
        };
        let (_, report) = run_stage(&mut pool, &view, DVector::zeros(12), &cfg).unwrap();
        let ledger = pool.ledger_snapshot();
        assert_eq!(ledger.stages.len(), 1);
        assert_eq!(ledger.stages[0].rounds, report.t_measured);
        assert_eq!(ledger.calls.len(), report.k_measured);
        for (call, step) in ledger.calls.iter().zip(&report.steps) {
            assert_eq!(call.rounds, step.rounds);
            assert_eq!(call.rounds, 1 + step.pcg_iters as u64);
        }
        assert_eq!(
            report.t_measured,
            report.steps.iter().map(|s| 1 + s.pcg_iters as u64).sum::<u64>()
        );
    }

    #[test]
    fn schedule_follows_min_cap_rule() {
        assert_eq!(stage_schedule(64, 2.0, 1000), vec![64, 128, 256, 512, 1000]);
        assert_eq!(stage_schedule(128, 2.0, 128), vec![128]);
        assert_eq!(stage_schedule(10, 1.5, 40), vec![10, 15, 23, 35, 40]);
    }

    #[test]
    fn full_run_satisfies_final_stop_rule_and_warm_starts_exactly() {
        let (ds, spec) = synth_setup(512, 10, 1);
        let mut pool = WorkerPool::simulated(ds.clone(), 4).unwrap();
        let cfg = DanceConfig {
            m0: 64,
            ..DanceConfig::default()
        };
        let run = run_dance(&mut pool, &spec, &cfg).unwrap();
        assert_eq!(
            run.stages.iter().map(|s| s.n).collect::<Vec<_>>(),
            vec![64, 128, 256, 512]
        );
        for pair in run.stages.windows(2) {
            assert_eq!(pair[0].w_out, pair[1].w_in, "warm start must be bit-equal");
        }
        // re-verify the gradient rule at N
        let view = RiskView::new(spec, ds.window(512).unwrap());
        let g = view.grad_full(&run.weights).norm();
        assert!(g < (2.0 * spec.c).sqrt() * view.v_n());
    }

    #[test]
    fn runs_are_deterministic() {
        let (ds, spec) = synth_setup(256, 8, 3);
        let cfg = DanceConfig {
            m0: 32,
            seed: 11,
            ..DanceConfig::default()
        };
        let mut pool_a = WorkerPool::simulated(ds.clone(), 4).unwrap();
        let mut pool_b = WorkerPool::simulated(ds.clone(), 4).unwrap();
        let a = run_dance(&mut pool_a, &spec, &cfg).unwrap();
        let b = run_dance(&mut pool_b, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(pool_a.ledger_snapshot(), pool_b.ledger_snapshot());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = DanceConfig::default();
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        cfg = DanceConfig::default();
        cfg.beta = 0.06;
        assert!(cfg.validate().is_err());
        cfg = DanceConfig::default();
        cfg.m0 = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn max_inner_turns_into_stage_failure_with_report() {
        let (ds, spec) = synth_setup(256, 10, 9);
        let view = RiskView::new(spec, ds.window(256).unwrap());
        let mut pool = WorkerPool::simulated(ds.clone(), 2).unwrap();
        pool.configure_window(256).unwrap();
        let cfg = DanceConfig {
            m0: 256,
            max_inner: 1,
            ..DanceConfig::default()
        };
        match run_stage(&mut pool, &view, DVector::zeros(10), &cfg) {
            Err(Error::StageFailure { n, report }) => {
                assert_eq!(n, 256);
                assert_eq!(report.k_measured, 1);
            }
            other => panic!("expected stage failure, got {other:?}"),
        }
    }
}
