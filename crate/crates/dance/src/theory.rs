//! Closed-form calculators for the solver's iteration and communication-round
//! bounds. All functions are pure and total on their stated domains; they are
//! used for reporting and for bound-vs-measurement checks, never inside the
//! solver's control flow.

use serde::Serialize;

use crate::error::{Error, Result};

/// `ω(t) = t − log(1 + t)` for `t > −1`, the self-concordant lower
/// comparison function (companion of [`omega_star`]).
pub fn omega(t: f64) -> Result<f64> {
    if !(t > -1.0) {
        return Err(Error::Domain(format!("omega requires t > −1, got {t}")));
    }
    Ok(t - t.ln_1p())
}

/// `ω*(t) = −t − log(1 − t)` for `0 ≤ t < 1`.
pub fn omega_star(t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!(
            "omega_star requires 0 ≤ t < 1, got {t}"
        )));
    }
    Ok(-t - (-t).ln_1p())
}

/// Smallest nonnegative integer ≥ t (the ceiling convention used by every
/// bound below: negative arguments clamp to 0).
pub fn ceil_nonneg(t: f64) -> u64 {
    if t <= 0.0 {
        0
    } else {
        t.ceil() as u64
    }
}

fn omega_sixth() -> f64 {
    omega(1.0 / 6.0).expect("1/6 is in the domain of omega")
}

/// PCG iteration bound, general form, with the natural logarithm:
/// `⌈ √(1 + 2μ/(cV_n)) · ln( 2√((cV_n+M)/(cV_n)) · ‖∇R_n‖ / ε ) ⌉`.
pub fn pcg_iter_bound_general(c_v_n: f64, m_const: f64, mu: f64, grad_norm: f64, eps: f64) -> u64 {
    let kappa = (1.0 + 2.0 * mu / c_v_n).sqrt();
    let arg = 2.0 * ((c_v_n + m_const) / c_v_n).sqrt() * grad_norm / eps;
    ceil_nonneg(kappa * arg.ln())
}

/// General form evaluated in base 2 (the base the reduced form is printed
/// in; the two printed forms disagree on the base, so both are exposed).
pub fn pcg_iter_bound_general_log2(
    c_v_n: f64,
    m_const: f64,
    mu: f64,
    grad_norm: f64,
    eps: f64,
) -> u64 {
    let kappa = (1.0 + 2.0 * mu / c_v_n).sqrt();
    let arg = 2.0 * ((c_v_n + m_const) / c_v_n).sqrt() * grad_norm / eps;
    ceil_nonneg(kappa * arg.log2())
}

/// PCG iteration bound after substituting the forcing-rule tolerance
/// `ε_k = β √(cV_n/(M+cV_n)) ‖∇R_n‖`:
/// `⌈ √(1 + 2μ/(cV_n)) · log₂( 2(cV_n+M)/(β·cV_n) ) ⌉`.
pub fn pcg_iter_bound_reduced(c_v_n: f64, m_const: f64, mu: f64, beta: f64) -> u64 {
    let kappa = (1.0 + 2.0 * mu / c_v_n).sqrt();
    let arg = 2.0 * (c_v_n + m_const) / (beta * c_v_n);
    ceil_nonneg(kappa * arg.log2())
}

/// Inner damped-Newton iteration bound for one stage:
/// `K_n = ⌈ subopt / (½ω(1/6)) ⌉ + ⌈ log₂(2ω(1/6)/V_n) ⌉`,
/// where `subopt` bounds the warm start's gap `R_n(w_m) − R_n(w_n*)`.
pub fn inner_iter_bound(subopt: f64, v_n: f64) -> u64 {
    let w6 = omega_sixth();
    ceil_nonneg(subopt / (0.5 * w6)) + ceil_nonneg((2.0 * w6 / v_n).log2())
}

/// Communication rounds for one stage: `T_n = K_n (1 + C_n)`.
pub fn stage_round_bound(k_n: u64, c_n: u64) -> u64 {
    k_n * (1 + c_n)
}

/// Warm-start suboptimality bound for the doubling schedule (`n = 2m`):
/// `R_n(w_m) − R_n(w_n*) ≤ [3 + (1 − 2^{−γ})(2 + (c/2)‖w*‖²)]·V_m` (w.h.p.).
pub fn warmstart_bound_doubling(v_m: f64, gamma: f64, c: f64, wstar_norm_sq: f64) -> f64 {
    let q = 1.0 - 0.5f64.powf(gamma);
    (3.0 + q * (2.0 + 0.5 * c * wstar_norm_sq)) * v_m
}

/// General warm-start suboptimality bound for `S_m ⊂ S_n`:
/// `V_m + (2(n−m)/n)(V_{n−m} + V_m) + 2(V_m − V_n) + (c/2)(V_m − V_n)‖w*‖²`.
pub fn warmstart_bound_general(
    n: usize,
    m: usize,
    gamma: f64,
    c: f64,
    wstar_norm_sq: f64,
) -> Result<f64> {
    if m == 0 || n <= m {
        return Err(Error::InvalidArg(format!(
            "warm-start bound needs 1 ≤ m < n, got m = {m}, n = {n}"
        )));
    }
    let v = |k: usize| (k as f64).powf(-gamma);
    let (v_m, v_n, v_nm) = (v(m), v(n), v(n - m));
    Ok(v_m
        + 2.0 * (n - m) as f64 / n as f64 * (v_nm + v_m)
        + 2.0 * (v_m - v_n)
        + 0.5 * c * (v_m - v_n) * wstar_norm_sq)
}

/// Per-stage inputs for the summed total-round bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageBoundInputs {
    /// Upper bound (or measurement) of the stage's initial suboptimality.
    pub subopt: f64,
    pub v_n: f64,
    pub c_v_n: f64,
    pub m_const: f64,
    pub mu: f64,
    pub beta: f64,
}

/// Total communication rounds summed stage by stage:
/// `Σ K_n(subopt_n, V_n) · (1 + C_n)`, with `C_n` the reduced-form PCG bound.
pub fn total_round_bound_summed(stages: &[StageBoundInputs]) -> u64 {
    stages
        .iter()
        .map(|s| {
            let k_n = inner_iter_bound(s.subopt, s.v_n);
            let c_n = pcg_iter_bound_reduced(s.c_v_n, s.m_const, s.mu, s.beta);
            stage_round_bound(k_n, c_n)
        })
        .sum()
}

/// Closed-form total-round expression for the doubling schedule, reported as
/// an order-of-magnitude indicator (suppressed constants; never asserted):
/// `(2L + L·log₂(2ω(1/6)/V_N) + (W/(½ω(1/6)))·((1−q^L)/(1−q))·V_{m0})
///  · (1 + ⌈√(1+2μ/(cV_N))·log₂(2/β + 2M/(βc)·1/V_N)⌉)`
/// with `L = log₂(N/m0)`, `q = 2^{−γ}`, and `W` the doubling warm-start
/// factor.
#[allow(clippy::too_many_arguments)]
pub fn total_round_bound_closed_form(
    big_n: usize,
    m0: usize,
    gamma: f64,
    c: f64,
    m_const: f64,
    beta: f64,
    mu_max: f64,
    wstar_norm_sq: f64,
) -> f64 {
    let w6 = omega_sixth();
    let v_n = (big_n as f64).powf(-gamma);
    let v_m0 = (m0 as f64).powf(-gamma);
    let l = (big_n as f64 / m0 as f64).log2();
    let q = 0.5f64.powf(gamma);
    let w_factor = 3.0 + (1.0 - q) * (2.0 + 0.5 * c * wstar_norm_sq);
    let geometric = if q < 1.0 {
        (1.0 - q.powf(l)) / (1.0 - q)
    } else {
        l
    };
    let outer = 2.0 * l + l * (2.0 * w6 / v_n).log2() + w_factor / (0.5 * w6) * geometric * v_m0;
    let c_v_n = c * v_n;
    let inner = 1.0
        + ceil_nonneg(
            (1.0 + 2.0 * mu_max / c_v_n).sqrt()
                * (2.0 / beta + 2.0 * m_const / (beta * c) / v_n).log2(),
        ) as f64;
    outer * inner
}

/// Flop-count indicator `(log₂ N)³ · N^{1/4} · d²` for the full run
/// (order-of-magnitude only).
pub fn complexity_indicator(big_n: usize, d: usize) -> f64 {
    let n = big_n as f64;
    n.log2().powi(3) * n.powf(0.25) * (d as f64).powi(2)
}

/// Everything the calculators need, bundled for reporting surfaces (the
/// `bounds` CLI subcommand and the run summary).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundInputs {
    pub c: f64,
    pub gamma: f64,
    pub m_const: f64,
    pub beta: f64,
    pub mu: f64,
    pub n: usize,
    pub m: usize,
    pub big_n: usize,
    pub m0: usize,
    pub grad_norm: f64,
    pub subopt: f64,
    pub wstar_norm_sq: f64,
}

/// Calculator outputs for one set of inputs.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub v_n: f64,
    pub c_v_n: f64,
    pub eps_forcing: f64,
    pub pcg_general_ln: u64,
    pub pcg_general_log2: u64,
    pub pcg_reduced_log2: u64,
    pub inner_iters: u64,
    pub stage_rounds: u64,
    pub warmstart_doubling: f64,
    pub warmstart_general: Option<f64>,
    pub closed_form_total_rounds: f64,
}

impl BoundInputs {
    pub fn report(&self) -> TheoryReport {
        let v_n = (self.n as f64).powf(-self.gamma);
        let c_v_n = self.c * v_n;
        let eps_forcing =
            self.beta * (c_v_n / (self.m_const + c_v_n)).sqrt() * self.grad_norm;
        let v_m = (self.m.max(1) as f64).powf(-self.gamma);
        let k_n = inner_iter_bound(self.subopt, v_n);
        let c_n = pcg_iter_bound_reduced(c_v_n, self.m_const, self.mu, self.beta);
        TheoryReport {
            v_n,
            c_v_n,
            eps_forcing,
            pcg_general_ln: pcg_iter_bound_general(
                c_v_n,
                self.m_const,
                self.mu,
                self.grad_norm,
                eps_forcing,
            ),
            pcg_general_log2: pcg_iter_bound_general_log2(
                c_v_n,
                self.m_const,
                self.mu,
                self.grad_norm,
                eps_forcing,
            ),
            pcg_reduced_log2: c_n,
            inner_iters: k_n,
            stage_rounds: stage_round_bound(k_n, c_n),
            warmstart_doubling: warmstart_bound_doubling(
                v_m,
                self.gamma,
                self.c,
                self.wstar_norm_sq,
            ),
            warmstart_general: warmstart_bound_general(
                self.n,
                self.m,
                self.gamma,
                self.c,
                self.wstar_norm_sq,
            )
            .ok(),
            closed_form_total_rounds: total_round_bound_closed_form(
                self.big_n,
                self.m0,
                self.gamma,
                self.c,
                self.m_const,
                self.beta,
                self.mu,
                self.wstar_norm_sq,
            ),
        }
    }
}
