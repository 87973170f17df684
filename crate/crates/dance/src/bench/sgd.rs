//! Minibatch SGD baseline on the full-sample risk `R_N`, sampling without
//! replacement within each epoch.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, RiskSpec, RiskView};

use super::config::{SgdParams, StepSchedule};
use super::experiment::Evaluator;
use super::metrics::MetricsRow;

const DIVERGENCE_RISK: f64 = 1e6;

pub struct SgdOutcome {
    pub weights: DVector<f64>,
    pub rows: Vec<MetricsRow>,
    pub diverged: bool,
}

/// Plain minibatch SGD on `R_N` with a constant (default) or `1/√t` step
/// schedule. Metrics are emitted `records_per_epoch` times per epoch; the
/// trace is flagged divergent and aborted once the risk exceeds 1e6.
pub fn run_sgd_baseline(
    train: &Dataset,
    spec: &RiskSpec,
    params: &SgdParams,
    seed: u64,
    eval: &Evaluator<'_>,
    wall_clock: bool,
) -> Result<SgdOutcome> {
    if !(params.step > 0.0) {
        return Err(Error::InvalidArg("sgd step size must be > 0".into()));
    }
    let n = train.len();
    let d = train.dim();
    let view = RiskView::new(*spec, train.window(n)?);
    let lambda = view.lambda();
    let started = std::time::Instant::now();

    let mut w = DVector::zeros(d);
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();

    let batches_per_epoch = n.div_ceil(params.batch);
    let total_batches = (params.epochs * batches_per_epoch as f64).round() as usize;
    let record_every = batches_per_epoch
        .div_ceil(params.records_per_epoch.max(1))
        .max(1);

    let mut samples_touched = 0usize;
    let mut grad_buf = DVector::zeros(d);
    let mut diverged = false;

    let emit = |rows: &mut Vec<MetricsRow>,
                step: usize,
                samples: usize,
                w: &DVector<f64>,
                started: &std::time::Instant| {
        let wall = wall_clock.then(|| started.elapsed().as_secs_f64());
        rows.push(eval.row("sgd", n, step, samples as f64 / n as f64, 0, wall, w));
    };

    emit(&mut rows, 0, 0, &w, &started);

    let mut t = 0usize;
    'epochs: while t < total_batches {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch) {
            if t >= total_batches {
                break 'epochs;
            }
            t += 1;
            let eta = match params.schedule {
                StepSchedule::Constant => params.step,
                StepSchedule::InvSqrt => params.step / (t as f64).sqrt(),
            };
            grad_buf.fill(0.0);
            let inv_b = 1.0 / batch.len() as f64;
            for &i in batch {
                let y = train.label(i);
                let row = train.row(i);
                let coef = (sigmoid(y * row.dot(&w)) - 1.0) * y * inv_b;
                row.axpy_into(coef, &mut grad_buf);
            }
            grad_buf.axpy(lambda, &w, 1.0);
            w.axpy(-eta, &grad_buf, 1.0);
            samples_touched += batch.len();

            if t % record_every == 0 || t == total_batches {
                // a non-finite iterate counts as divergence, not an error
                let risk = view.value(&w).unwrap_or(f64::INFINITY);
                if !risk.is_finite() || risk > DIVERGENCE_RISK {
                    diverged = true;
                    emit(&mut rows, t, samples_touched, &w, &started);
                    break 'epochs;
                }
                emit(&mut rows, t, samples_touched, &w, &started);
            }
        }
    }

    Ok(SgdOutcome {
        weights: w,
        rows,
        diverged,
    })
}
