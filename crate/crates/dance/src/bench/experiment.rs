//! Experiment orchestration: dataset loading, trace construction for the
//! staged solver and its single-stage (DiSCO-style) degenerate mode, and the
//! CSV/JSON emitting runner.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::data::{parse_libsvm, synth_logistic, Dataset};
use crate::distrib::{RoundLedger, WorkerPool};
use crate::error::{Error, Result};
use crate::model::{RiskSpec, RiskView};
use crate::solver::{run_stage, stage_schedule, DanceConfig, DanceRun, StageReport, TheoryPrediction};
use crate::theory;

use super::config::{Algorithm, DataSource, ExperimentConfig};
use super::metrics::{classification_accuracy, write_csv, MetricsRow};
use super::sgd::run_sgd_baseline;

/// Environment variable that overrides the output directory of
/// [`run_experiment`].
pub const OUT_DIR_ENV: &str = "DANCE_OUT_DIR";

/// Computes the metric columns of a trace row at a given iterate.
pub struct Evaluator<'a> {
    train: &'a Dataset,
    test: Option<&'a Dataset>,
    spec: RiskSpec,
}

impl<'a> Evaluator<'a> {
    pub fn new(train: &'a Dataset, test: Option<&'a Dataset>, spec: RiskSpec) -> Self {
        Self { train, test, spec }
    }

    fn risk_at(&self, n: usize, w: &DVector<f64>) -> f64 {
        self.train
            .window(n)
            .and_then(|win| RiskView::new(self.spec, win).value(w))
            .unwrap_or(f64::NAN)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn row(
        &self,
        algorithm: &str,
        stage_n: usize,
        step: usize,
        eff_grad_evals: f64,
        rounds: u64,
        wall_time_s: Option<f64>,
        w: &DVector<f64>,
    ) -> MetricsRow {
        let n_full = self.train.len();
        MetricsRow {
            algorithm: algorithm.to_string(),
            stage_n,
            step,
            eff_grad_evals,
            rounds,
            wall_time_s,
            risk_window: self.risk_at(stage_n, w),
            risk_full: Some(self.risk_at(n_full, w)),
            acc_window: classification_accuracy(self.train, stage_n, w),
            acc_full: classification_accuracy(self.train, n_full, w),
            acc_test: self
                .test
                .map(|t| classification_accuracy(t, t.len(), w)),
        }
    }
}

/// Run the staged solver stage by stage and expand its reports into a
/// metrics trace. Rows are reconstructed by replaying each stage's recorded
/// directions from its warm start, which reproduces the iterates bit for
/// bit. Every stage contributes one boundary row (step 0) and one row per
/// inner step.
///
/// Samples-touched accounting covers the pool passes (one per round) plus
/// the preconditioner subsets; master-side stop checks move no data and are
/// excluded, matching the round ledger's accounting.
pub fn run_staged_trace(
    pool: &mut WorkerPool,
    spec: &RiskSpec,
    cfg: &DanceConfig,
    tag: &str,
    eval: &Evaluator<'_>,
    wall_clock: bool,
) -> Result<(DanceRun, Vec<MetricsRow>)> {
    cfg.validate()?;
    let ds = pool.dataset().clone();
    let big_n = ds.len();
    if cfg.m0 > big_n {
        return Err(Error::InvalidArg(format!(
            "m0 = {} exceeds dataset size {big_n}",
            cfg.m0
        )));
    }
    let started = Instant::now();
    let mut w = DVector::zeros(ds.dim());
    let mut stages: Vec<StageReport> = Vec::new();
    let mut stage_wall: Vec<Option<f64>> = Vec::new();
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
        stage_wall.push(wall_clock.then(|| started.elapsed().as_secs_f64()));
        stages.push(report);
    }
    let run = DanceRun {
        weights: w,
        stages,
    };

    let inv_n = 1.0 / big_n as f64;
    let mut rows = Vec::new();
    let mut eff = 0.0f64;
    let mut rounds = 0u64;
    for (report, wall) in run.stages.iter().zip(&stage_wall) {
        let mut w = DVector::from_column_slice(&report.w_in);
        rows.push(eval.row(tag, report.n, 0, eff, rounds, *wall, &w));
        for rec in &report.steps {
            let dir = DVector::from_column_slice(&rec.direction);
            w = &w - dir / (1.0 + rec.delta);
            eff += (rec.rounds as usize * report.n + rec.subset.len()) as f64 * inv_n;
            rounds += rec.rounds;
            rows.push(eval.row(tag, report.n, rec.step + 1, eff, rounds, *wall, &w));
        }
    }
    Ok((run, rows))
}

/// Single-stage degenerate mode: all `N` samples from the first iteration.
/// Exactly `run_staged_trace` with `m0 = N`; every code path is shared.
pub fn run_disco_mode(
    pool: &mut WorkerPool,
    spec: &RiskSpec,
    cfg: &DanceConfig,
    eval: &Evaluator<'_>,
    wall_clock: bool,
) -> Result<(DanceRun, Vec<MetricsRow>)> {
    let cfg = DanceConfig {
        m0: pool.dataset().len(),
        ..*cfg
    };
    run_staged_trace(pool, spec, &cfg, "disco", eval, wall_clock)
}

pub struct LoadedData {
    pub train: Arc<Dataset>,
    pub test: Option<Arc<Dataset>>,
}

/// Materialize the configured dataset. Synthetic sources auto-split 80/20
/// along the frozen order (the tail becomes the held-out set); libsvm
/// sources are shuffled once at load and use the optional test file.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LoadedData> {
    match &cfg.source {
        DataSource::Synth { n, d, seed, margin } => {
            let full = synth_logistic(*n, *d, *seed, *margin)?;
            let n_train = ((*n * 4) / 5).max(1);
            if n_train < *n {
                let train = full.prefix(n_train)?;
                let test = full.tail(n_train)?;
                Ok(LoadedData {
                    train: Arc::new(train),
                    test: Some(Arc::new(test)),
                })
            } else {
                Ok(LoadedData {
                    train: Arc::new(full),
                    test: None,
                })
            }
        }
        DataSource::Libsvm {
            path,
            test_path,
            d_hint,
            shuffle_seed,
        } => {
            let file = std::fs::File::open(path).map_err(|e| Error::Config {
                field: "data.libsvm".into(),
                msg: format!("cannot open {}: {e}", path.display()),
            })?;
            let train = parse_libsvm(std::io::BufReader::new(file), *d_hint)?
                .shuffled(shuffle_seed.unwrap_or(cfg.seed));
            let test = match test_path {
                None => None,
                Some(tp) => {
                    let file = std::fs::File::open(tp).map_err(|e| Error::Config {
                        field: "data.test_libsvm".into(),
                        msg: format!("cannot open {}: {e}", tp.display()),
                    })?;
                    let t = parse_libsvm(std::io::BufReader::new(file), Some(train.dim()))?;
                    if t.dim() > train.dim() {
                        return Err(Error::Config {
                            field: "data.d_hint".into(),
                            msg: format!(
                                "test set has {} features but training set has {}; set data.d_hint",
                                t.dim(),
                                train.dim()
                            ),
                        });
                    }
                    Some(Arc::new(t))
                }
            };
            Ok(LoadedData {
                train: Arc::new(train),
                test,
            })
        }
    }
}

/// Stage-level digest for the run summary (reports minus the per-step
/// vectors).
#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub n: usize,
    pub v_n: f64,
    pub k_measured: usize,
    pub t_measured: u64,
    pub pcg_iters: Vec<usize>,
    pub initial_grad_norm: f64,
    pub final_grad_norm: f64,
    pub final_risk: f64,
    pub final_delta: Option<f64>,
    pub predicted: TheoryPrediction,
}

impl From<&StageReport> for StageSummary {
    fn from(r: &StageReport) -> Self {
        Self {
            n: r.n,
            v_n: r.v_n,
            k_measured: r.k_measured,
            t_measured: r.t_measured,
            pcg_iters: r.steps.iter().map(|s| s.pcg_iters).collect(),
            initial_grad_norm: r.initial_grad_norm,
            final_grad_norm: r.final_grad_norm,
            final_risk: r.final_risk,
            final_delta: r.final_delta,
            predicted: r.predicted.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    /// Σ of per-stage round bounds built from the gradient-certificate
    /// suboptimality bounds (no oracle needed).
    pub predicted_total_rounds: u64,
    pub closed_form_total_rounds: f64,
    pub complexity_indicator: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub algorithm: String,
    pub dataset: DatasetInfo,
    pub total_rounds: u64,
    pub total_eff_grad_evals: f64,
    pub final_metrics: Option<MetricsRow>,
    pub stages: Option<Vec<StageSummary>>,
    pub theory: Option<TheorySummary>,
    pub ledger: Option<RoundLedger>,
    pub sgd_diverged: Option<bool>,
    pub total_wall_s: Option<f64>,
    pub config: ExperimentConfig,
}

pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub summary: ExperimentSummary,
}

fn theory_from_run(run: &DanceRun, data: &LoadedData, cfg: &ExperimentConfig) -> Option<TheorySummary> {
    let first = run.stages.first()?;
    let last = run.stages.last()?;
    let big_n = data.train.len();
    let mu_max = run
        .stages
        .iter()
        .map(|s| s.predicted.mu)
        .fold(0.0f64, f64::max);
    // the final iterate is the best oracle-free stand-in for ‖w*‖²
    let wstar_est = run.weights.norm_squared();
    Some(TheorySummary {
        predicted_total_rounds: run.stages.iter().map(|s| s.predicted.round_bound).sum(),
        closed_form_total_rounds: theory::total_round_bound_closed_form(
            big_n,
            first.n,
            cfg.gamma,
            cfg.c,
            last.m_const,
            cfg.dance.beta,
            mu_max,
            wstar_est,
        ),
        complexity_indicator: theory::complexity_indicator(big_n, data.train.dim()),
    })
}

fn resolve_out(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let name = cfg.out.file_name().unwrap_or(cfg.out.as_os_str());
            PathBuf::from(dir).join(name)
        }
        _ => cfg.out.clone(),
    }
}

/// Run the configured experiment and write `<out>.csv` (one row per trace
/// point) and `<out>.json` (final metrics, theory bounds, ledger, config
/// echo). Deterministic byte-for-byte for a fixed config unless wall-clock
/// recording is enabled.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = cfg.spec()?;
    let started = Instant::now();
    let data = load_dataset(cfg)?;
    let eval = Evaluator::new(&data.train, data.test.as_deref(), spec);

    let (rows, stages, theory_summary, ledger, sgd_diverged) = match cfg.algorithm {
        Algorithm::Sgd => {
            let out = run_sgd_baseline(&data.train, &spec, &cfg.sgd, cfg.seed, &eval, cfg.wall_time)?;
            (out.rows, None, None, None, Some(out.diverged))
        }
        Algorithm::Dance | Algorithm::Disco => {
            let mut pool = WorkerPool::simulated(data.train.clone(), cfg.workers)?;
            let (run, rows) = if cfg.algorithm == Algorithm::Dance {
                run_staged_trace(&mut pool, &spec, &cfg.dance, "dance", &eval, cfg.wall_time)?
            } else {
                run_disco_mode(&mut pool, &spec, &cfg.dance, &eval, cfg.wall_time)?
            };
            let stages: Vec<StageSummary> = run.stages.iter().map(StageSummary::from).collect();
            let theory_summary = theory_from_run(&run, &data, cfg);
            (rows, Some(stages), theory_summary, Some(pool.ledger_snapshot()), None)
        }
    };

    let total_rounds = rows.last().map(|r| r.rounds).unwrap_or(0);
    let total_eff = rows.last().map(|r| r.eff_grad_evals).unwrap_or(0.0);
    let summary = ExperimentSummary {
        seed: cfg.seed,
        algorithm: cfg.algorithm.tag().to_string(),
        dataset: DatasetInfo {
            n_train: data.train.len(),
            n_test: data.test.as_ref().map(|t| t.len()).unwrap_or(0),
            d: data.train.dim(),
        },
        total_rounds,
        total_eff_grad_evals: total_eff,
        final_metrics: rows.last().cloned(),
        stages,
        theory: theory_summary,
        ledger,
        sgd_diverged,
        total_wall_s: cfg.wall_time.then(|| started.elapsed().as_secs_f64()),
        config: cfg.clone(),
    };

    let out = resolve_out(cfg);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let csv_path = out.with_extension("csv");
    let json_path = out.with_extension("json");
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    std::fs::write(&csv_path, csv)?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Numerical(format!("summary serialization failed: {e}")))?;
    std::fs::write(&json_path, json)?;

    Ok(ExperimentOutput {
        csv_path,
        json_path,
        summary,
    })
}
