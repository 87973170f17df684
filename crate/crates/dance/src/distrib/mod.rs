//! Worker pool with exact communication-round accounting.
//!
//! A round is one broadcast immediately followed by its matching reduce.
//! Reduces always sum worker partials in fixed order 0, 1, …, K−1, so any
//! reduced quantity is bit-identical across runs for a fixed K and differs
//! across K only by floating-point reassociation.

pub mod tcp;
pub mod wire;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{partition, Dataset};
use crate::error::{Error, Result};
use crate::model::{self, RiskView};

pub use tcp::{serve_worker, TcpMaster};

/// Rounds consumed by one direction solve: the initial gradient reduce plus
/// one reduce per loop pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CallRounds {
    pub stage_n: usize,
    pub rounds: u64,
}

/// Rounds consumed by one stage (one sample size).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageRounds {
    pub n: usize,
    pub rounds: u64,
}

/// Snapshot of the communication-round bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundLedger {
    pub calls: Vec<CallRounds>,
    pub stages: Vec<StageRounds>,
    pub grand_total: u64,
}

enum Backend {
    Sim,
    Tcp(TcpMaster),
}

/// K workers over contiguous shards of the active window, behind a
/// broadcast/reduce transport with a monotone round counter.
pub struct WorkerPool {
    dataset: Arc<Dataset>,
    k: usize,
    window_n: usize,
    shards: Vec<Range<usize>>,
    backend: Backend,
    counter: u64,
    ledger: RoundLedger,
    call_open: bool,
    stage_open: bool,
}

impl WorkerPool {
    /// In-process deterministic transport (the default and the test target).
    pub fn simulated(dataset: Arc<Dataset>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArg("worker count must be ≥ 1".into()));
        }
        Ok(Self {
            dataset,
            k,
            window_n: 0,
            shards: Vec::new(),
            backend: Backend::Sim,
            counter: 0,
            ledger: RoundLedger::default(),
            call_open: false,
            stage_open: false,
        })
    }

    /// TCP transport over already-connected workers. The master still needs
    /// the dataset handle for window bookkeeping (not for computation).
    pub fn over_tcp(dataset: Arc<Dataset>, master: TcpMaster) -> Result<Self> {
        let k = master.worker_count();
        if k == 0 {
            return Err(Error::InvalidArg("tcp pool needs ≥ 1 worker".into()));
        }
        Ok(Self {
            dataset,
            k,
            window_n: 0,
            shards: Vec::new(),
            backend: Backend::Tcp(master),
            counter: 0,
            ledger: RoundLedger::default(),
            call_open: false,
            stage_open: false,
        })
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn worker_count(&self) -> usize {
        self.k
    }

    pub fn window_len(&self) -> usize {
        self.window_n
    }

    pub fn shards(&self) -> &[Range<usize>] {
        &self.shards
    }

    /// Monotone communication-round counter.
    pub fn rounds(&self) -> u64 {
        self.counter
    }

    pub fn ledger_snapshot(&self) -> RoundLedger {
        self.ledger.clone()
    }

    /// Repartition the first `n` rows across the workers. Under TCP this
    /// sends one reconfigure frame per worker (not a counted round: no reduce
    /// answers it).
    pub fn configure_window(&mut self, n: usize) -> Result<()> {
        let win = self.dataset.window(n)?;
        let shards = partition(&win, self.k)?;
        if let Backend::Tcp(master) = &mut self.backend {
            master.configure(n, &shards)?;
        }
        self.window_n = n;
        self.shards = shards;
        Ok(())
    }

    /// Open a per-stage bucket in the ledger.
    pub fn begin_stage(&mut self, n: usize) {
        self.ledger.stages.push(StageRounds { n, rounds: 0 });
        self.stage_open = true;
        self.call_open = false;
    }

    /// Open a per-call bucket; every following round accrues to it until the
    /// next `begin_call` or `begin_stage`.
    pub fn begin_call(&mut self) {
        self.ledger.calls.push(CallRounds {
            stage_n: self.window_n,
            rounds: 0,
        });
        self.call_open = true;
    }

    fn count_round(&mut self) {
        self.counter += 1;
        self.ledger.grand_total += 1;
        if self.call_open {
            self.ledger.calls.last_mut().unwrap().rounds += 1;
        }
        if self.stage_open {
            self.ledger.stages.last_mut().unwrap().rounds += 1;
        }
    }

    fn check_view(&self, view: &RiskView<'_>) -> Result<()> {
        if !std::ptr::eq(view.dataset(), Arc::as_ptr(&self.dataset)) {
            return Err(Error::InvalidArg(
                "view is over a different dataset than the pool".into(),
            ));
        }
        if view.n() != self.window_n {
            return Err(Error::InvalidArg(format!(
                "view window ({}) does not match pool window ({})",
                view.n(),
                self.window_n
            )));
        }
        Ok(())
    }

    /// Broadcast `w`, reduce shard gradients, add the ridge term once.
    /// One communication round.
    pub fn reduce_grad(&mut self, view: &RiskView<'_>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_view(view)?;
        let mut g = match &mut self.backend {
            Backend::Sim => {
                let ds = &self.dataset;
                let n = self.window_n;
                let partials: Vec<DVector<f64>> = self
                    .shards
                    .par_iter()
                    .map(|s| model::shard_grad(ds, n, w, s.clone()))
                    .collect();
                sum_in_order(partials, view.dim())
            }
            Backend::Tcp(master) => master.reduce_grad(w)?,
        };
        g.axpy(view.lambda(), w, 1.0);
        self.count_round();
        Ok(g)
    }

    /// Broadcast `u` and `v` together, reduce both Hessian-vector products.
    /// The two products share one communication round.
    pub fn reduce_hvp_pair(
        &mut self,
        view: &RiskView<'_>,
        w: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_view(view)?;
        let (mut hu, mut hv) = match &mut self.backend {
            Backend::Sim => {
                let ds = &self.dataset;
                let n = self.window_n;
                let partials: Vec<(DVector<f64>, DVector<f64>)> = self
                    .shards
                    .par_iter()
                    .map(|s| model::shard_hvp_pair(ds, n, w, u, v, s.clone()))
                    .collect();
                let mut hu = DVector::zeros(view.dim());
                let mut hv = DVector::zeros(view.dim());
                for (pu, pv) in partials {
                    hu += pu;
                    hv += pv;
                }
                (hu, hv)
            }
            Backend::Tcp(master) => master.reduce_hvp_pair(w, u, v)?,
        };
        hu.axpy(view.lambda(), u, 1.0);
        hv.axpy(view.lambda(), v, 1.0);
        self.count_round();
        Ok((hu, hv))
    }
}

fn sum_in_order(partials: Vec<DVector<f64>>, d: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(d);
    for p in partials {
        acc += p;
    }
    acc
}
