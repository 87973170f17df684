//! Regularized empirical risk for logistic loss: values, gradients,
//! Hessian-vector products, per-sample Hessian factors, and the statistical
//! accuracy schedule `V_n = n^{-γ}`.
//!
//! Shard-level operations return only the loss part, scaled by `1/n`; the
//! ridge term `cV_n·w` (resp. `cV_n·v`) is added exactly once by the reducer.

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleWindow};
use crate::error::{Error, Result};

/// Loss family tag. Only logistic is implemented; the tag is the extension
/// point for other self-concordant losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LossKind {
    #[default]
    Logistic,
}

/// Problem constants: ridge scale `c`, accuracy exponent `γ`, optional
/// override for the gradient-smoothness constant `M` (estimated from data
/// when absent).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskSpec {
    pub c: f64,
    pub gamma: f64,
    pub m_override: Option<f64>,
    pub loss: LossKind,
}

impl RiskSpec {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidArg(format!("c must be > 0, got {c}")));
        }
        if !(0.5..=1.0).contains(&gamma) {
            return Err(Error::InvalidArg(format!(
                "gamma must lie in [0.5, 1], got {gamma}"
            )));
        }
        Ok(Self {
            c,
            gamma,
            m_override: None,
            loss: LossKind::Logistic,
        })
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m_override = Some(m);
        self
    }
}

/// Statistical accuracy `V_n = n^{-γ}` (constant fixed to 1; it is absorbed
/// into the tunable `c`).
pub fn statistical_accuracy(spec: &RiskSpec, n: usize) -> f64 {
    assert!(n >= 1, "sample size must be ≥ 1");
    (n as f64).powf(-spec.gamma)
}

/// Gradient-smoothness bound for logistic loss over the window:
/// `max_i ‖x_i‖² / 4`, the exact bound on each sample's Hessian norm.
pub fn lipschitz_bound(win: &SampleWindow<'_>) -> f64 {
    (0..win.len())
        .map(|i| win.row(i).norm_sq() / 4.0)
        .fold(0.0, f64::max)
}

/// `log(1 + exp(u))` without overflow.
#[inline]
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `σ(t) = 1 / (1 + exp(−t))` without overflow.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// The risk `R_n` over one window at fixed spec: caches `V_n`, the ridge
/// scale `λ_n = c·V_n`, and the smoothness constant `M` for the window.
#[derive(Debug, Clone, Copy)]
pub struct RiskView<'a> {
    pub spec: RiskSpec,
    window: SampleWindow<'a>,
    v_n: f64,
    lambda_n: f64,
    m_const: f64,
}

impl<'a> RiskView<'a> {
    pub fn new(spec: RiskSpec, window: SampleWindow<'a>) -> Self {
        let v_n = statistical_accuracy(&spec, window.len());
        let m_const = spec.m_override.unwrap_or_else(|| lipschitz_bound(&window));
        Self {
            spec,
            window,
            v_n,
            lambda_n: spec.c * v_n,
            m_const,
        }
    }

    pub fn window(&self) -> &SampleWindow<'a> {
        &self.window
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.window.dataset()
    }

    pub fn n(&self) -> usize {
        self.window.len()
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    /// Statistical accuracy `V_n` of this window.
    pub fn v_n(&self) -> f64 {
        self.v_n
    }

    /// Strong-convexity parameter `λ_n = c·V_n`.
    pub fn lambda(&self) -> f64 {
        self.lambda_n
    }

    /// Gradient-smoothness constant `M` (so `R_n` is `(λ_n + M)`-smooth).
    pub fn m_const(&self) -> f64 {
        self.m_const
    }

    /// `R_n(w) = (1/n) Σ log(1 + exp(−y_i·w·x_i)) + (λ_n/2)‖w‖²`.
    pub fn value(&self, w: &DVector<f64>) -> Result<f64> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("risk evaluated at non-finite weights".into()));
        }
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            let t = self.window.label(i) * self.window.row(i).dot(w);
            acc += log1p_exp(-t);
        }
        Ok(acc / n as f64 + 0.5 * self.lambda_n * w.norm_squared())
    }

    /// Loss part of the gradient over one shard, scaled by `1/n`:
    /// `(1/n) Σ_{i∈shard} (σ(y_i w·x_i) − 1)·y_i·x_i`.
    pub fn shard_grad(&self, w: &DVector<f64>, shard: Range<usize>) -> DVector<f64> {
        shard_grad(self.dataset(), self.n(), w, shard)
    }

    /// Loss parts of two Hessian-vector products over one shard, computed in
    /// a single pass (both share the per-sample factors `s_i`).
    pub fn shard_hvp_pair(
        &self,
        w: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        shard: Range<usize>,
    ) -> (DVector<f64>, DVector<f64>) {
        shard_hvp_pair(self.dataset(), self.n(), w, u, v, shard)
    }

    /// Full gradient `∇R_n(w)` including the ridge term (single-machine path).
    pub fn grad_full(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut g = self.shard_grad(w, 0..self.n());
        g.axpy(self.lambda_n, w, 1.0);
        g
    }

    /// Full Hessian-vector product `∇²R_n(w)·v` including the ridge term.
    pub fn hvp_full(&self, w: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let zero = DVector::zeros(self.dim());
        let (mut hv, _) = self.shard_hvp_pair(w, v, &zero, 0..self.n());
        hv.axpy(self.lambda_n, v, 1.0);
        hv
    }

    /// Per-sample Hessian factor: `∇²f_i(w) = s_i·x_i·x_iᵀ` with
    /// `s_i = σ_i(1−σ_i) ∈ (0, 1/4]`.
    pub fn hessian_factor(&self, w: &DVector<f64>, i: usize) -> (f64, crate::data::SparseRow<'a>) {
        debug_assert!(i < self.n());
        let row = self.window.row(i);
        let sig = sigmoid(self.window.label(i) * row.dot(w));
        (sig * (1.0 - sig), row)
    }
}

/// Shard gradient of the loss part, `(1/n) Σ_{i∈shard} ∇f_i(w)`.
///
/// Free function so a worker process needs only its data, `n`, and `w`.
pub fn shard_grad(ds: &Dataset, n: usize, w: &DVector<f64>, shard: Range<usize>) -> DVector<f64> {
    let inv_n = 1.0 / n as f64;
    let mut g = DVector::zeros(ds.dim());
    for i in shard {
        let y = ds.label(i);
        let row = ds.row(i);
        let coef = (sigmoid(y * row.dot(w)) - 1.0) * y * inv_n;
        row.axpy_into(coef, &mut g);
    }
    g
}

/// Shard loss parts of `∇²R_n(w)·u` and `∇²R_n(w)·v` in one pass.
pub fn shard_hvp_pair(
    ds: &Dataset,
    n: usize,
    w: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    shard: Range<usize>,
) -> (DVector<f64>, DVector<f64>) {
    let inv_n = 1.0 / n as f64;
    let mut hu = DVector::zeros(ds.dim());
    let mut hv = DVector::zeros(ds.dim());
    for i in shard {
        let y = ds.label(i);
        let row = ds.row(i);
        let sig = sigmoid(y * row.dot(w));
        let s = sig * (1.0 - sig) * inv_n;
        row.axpy_into(s * row.dot(u), &mut hu);
        row.axpy_into(s * row.dot(v), &mut hv);
    }
    (hu, hv)
}
