//! Preconditioned conjugate gradient for the Newton system, and the
//! low-rank preconditioner it relies on.
//!
//! The preconditioner is `P = H̃ + μI` where `H̃` averages the per-sample
//! Hessians over a small uniformly drawn subset of the window. For logistic
//! loss each sample Hessian is rank one, so `P = a·I + Ũ Ũᵀ` with
//! `a = cV_n + μ` and `Ũ` holding the scaled sample rows as columns;
//! `P⁻¹` applies through the Woodbury identity with one cached Cholesky
//! factorization of the small core `a·I + ŨᵀŨ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distrib::WorkerPool;
use crate::error::{Error, Result};
use crate::model::RiskView;

/// Largest dimension the dense reference paths will assemble.
pub const DENSE_ORACLE_DIM_CAP: usize = 512;

/// `P = a·I + (1/|A|) Σ_{i∈A} s_i x_i x_iᵀ`, applied inversely via Woodbury.
pub struct Preconditioner {
    subset: Vec<usize>,
    /// d × |A| matrix whose column j is `sqrt(s_j / |A|) · x_j`.
    scaled: DMatrix<f64>,
    diag: f64,
    mu: f64,
    core: Cholesky<f64, Dyn>,
}

impl Preconditioner {
    /// Sample indices of the Hessian subset `A` (sorted, without replacement).
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// The diagonal shift `a = cV_n + μ`.
    pub fn diag(&self) -> f64 {
        self.diag
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `s = P⁻¹ r` without forming `P`:
    /// `P⁻¹ = (1/a)(I − Ũ (aI + ŨᵀŨ)⁻¹ Ũᵀ)`.
    pub fn apply_inverse(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("preconditioner input not finite".into()));
        }
        let mut core_rhs = self.scaled.tr_mul(r);
        self.core.solve_mut(&mut core_rhs);
        let mut s = r - &self.scaled * core_rhs;
        s /= self.diag;
        Ok(s)
    }

    /// Assemble `P` densely (test/oracle helper; guarded like the other
    /// dense paths).
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let d = self.scaled.nrows();
        if d > DENSE_ORACLE_DIM_CAP {
            return Err(Error::Capability(format!(
                "dense preconditioner assembly capped at d ≤ {DENSE_ORACLE_DIM_CAP}, got {d}"
            )));
        }
        let mut p = &self.scaled * self.scaled.transpose();
        for j in 0..d {
            p[(j, j)] += self.diag;
        }
        Ok(p)
    }
}

/// Build the preconditioner at `w`: draw `A` uniformly without replacement
/// (seeded), collect the per-sample factors, and factorize the Woodbury core.
pub fn build_preconditioner(
    view: &RiskView<'_>,
    w: &DVector<f64>,
    subset_size: usize,
    mu: f64,
    seed: u64,
) -> Result<Preconditioner> {
    let n = view.n();
    if subset_size == 0 || subset_size > n {
        return Err(Error::InvalidArg(format!(
            "subset size {subset_size} out of range 1..={n}"
        )));
    }
    if mu < 0.0 {
        return Err(Error::InvalidArg(format!("mu must be ≥ 0, got {mu}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset = rand::seq::index::sample(&mut rng, n, subset_size).into_vec();
    subset.sort_unstable();

    let d = view.dim();
    let a = view.lambda() + mu;
    let inv_size = 1.0 / subset_size as f64;
    let mut scaled = DMatrix::zeros(d, subset_size);
    for (col, &i) in subset.iter().enumerate() {
        let (s, row) = view.hessian_factor(w, i);
        let scale = (s * inv_size).sqrt();
        for (&j, &x) in row.indices.iter().zip(row.values) {
            scaled[(j as usize, col)] = scale * x;
        }
    }

    let mut core = scaled.tr_mul(&scaled);
    for j in 0..subset_size {
        core[(j, j)] += a;
    }
    let core = Cholesky::new(core).ok_or_else(|| {
        Error::Numerical("woodbury core factorization failed (non-SPD core)".into())
    })?;

    Ok(Preconditioner {
        subset,
        scaled,
        diag: a,
        mu,
        core,
    })
}

/// Result of one PCG direction solve.
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    /// The ε-Newton direction `v_k`.
    pub direction: DVector<f64>,
    /// Approximate Newton decrement `δ = √(v_kᵀ H v_k)`, assembled from the
    /// already-reduced products (no extra round).
    pub decrement: f64,
    /// Loop iterations `t`.
    pub iterations: usize,
    /// Communication rounds: `1 + t`.
    pub rounds: u64,
    /// Set when round-off produced `δ² < 0` and the value was clamped to 0.
    pub decrement_clamped: bool,
}

/// Per-iteration state captured when solving in traced mode.
#[derive(Debug, Clone)]
pub struct PcgIterRecord {
    /// Iterate `v^{(t)}` after the update of iteration `t`.
    pub v: DVector<f64>,
    /// Recurrence residual `r^{(t)}` after the update.
    pub r: DVector<f64>,
    /// `⟨s, r⟩` at the top of the iteration (PD preservation check).
    pub sr_inner: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PcgTrace {
    pub iters: Vec<PcgIterRecord>,
}

/// Solve `∇²R_n(w)·v = ∇R_n(w)` to residual tolerance `eps` with the PCG
/// recurrence, counting one round for the initial gradient reduce and one
/// per loop pass (both Hessian products of a pass share a round).
pub fn pcg_solve(
    pool: &mut WorkerPool,
    view: &RiskView<'_>,
    w: &DVector<f64>,
    precond: &Preconditioner,
    eps: f64,
    max_iter: usize,
) -> Result<PcgOutcome> {
    solve_inner(pool, view, w, precond, eps, max_iter, None)
}

/// As [`pcg_solve`], additionally recording per-iteration state for
/// verification.
pub fn pcg_solve_traced(
    pool: &mut WorkerPool,
    view: &RiskView<'_>,
    w: &DVector<f64>,
    precond: &Preconditioner,
    eps: f64,
    max_iter: usize,
) -> Result<(PcgOutcome, PcgTrace)> {
    let mut trace = PcgTrace::default();
    let outcome = solve_inner(pool, view, w, precond, eps, max_iter, Some(&mut trace))?;
    Ok((outcome, trace))
}

fn solve_inner(
    pool: &mut WorkerPool,
    view: &RiskView<'_>,
    w: &DVector<f64>,
    precond: &Preconditioner,
    eps: f64,
    max_iter: usize,
    mut trace: Option<&mut PcgTrace>,
) -> Result<PcgOutcome> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArg(format!("eps must be > 0, got {eps}")));
    }
    let d = view.dim();
    pool.begin_call();
    let grad = pool.reduce_grad(view, w)?;

    let mut r = grad;
    if r.norm() <= eps {
        // Already within tolerance at v = 0 (near-stationary point).
        return Ok(PcgOutcome {
            direction: DVector::zeros(d),
            decrement: 0.0,
            iterations: 0,
            rounds: 1,
            decrement_clamped: false,
        });
    }

    let mut s = precond.apply_inverse(&r)?;
    let mut u = s.clone();
    let mut v = DVector::zeros(d);
    let mut rs = r.dot(&s);
    let mut t = 0usize;

    loop {
        if t >= max_iter {
            return Err(Error::NonConvergence {
                iterations: t,
                residual: r.norm(),
                best: v.as_slice().to_vec(),
            });
        }
        let (hu, hv) = pool.reduce_hvp_pair(view, w, &u, &v)?;
        let uhu = u.dot(&hu);
        if !(uhu > 0.0) || !uhu.is_finite() {
            return Err(Error::Numerical(format!(
                "curvature ⟨u, Hu⟩ = {uhu} is not positive"
            )));
        }
        let gamma = rs / uhu;
        let v_next = &v + gamma * &u;
        let r_next = &r - gamma * &hu;
        t += 1;

        if let Some(tr) = trace.as_deref_mut() {
            tr.iters.push(PcgIterRecord {
                v: v_next.clone(),
                r: r_next.clone(),
                sr_inner: rs,
            });
        }

        if r_next.norm() <= eps {
            // δ² = v_kᵀ(Hv^{(t)} + γ_t·Hu^{(t)}) = v_kᵀ H v_k, reusing the
            // products already reduced this pass.
            let h_vnext = &hv + gamma * &hu;
            let dsq = v_next.dot(&h_vnext);
            let clamped = dsq < 0.0;
            return Ok(PcgOutcome {
                direction: v_next,
                decrement: if clamped { 0.0 } else { dsq.sqrt() },
                iterations: t,
                rounds: 1 + t as u64,
                decrement_clamped: clamped,
            });
        }

        s = precond.apply_inverse(&r_next)?;
        let rs_next = r_next.dot(&s);
        let zeta = rs_next / rs;
        u = &s + zeta * &u;
        r = r_next;
        v = v_next;
        rs = rs_next;
    }
}

/// Assemble the full dense Hessian `∇²R_n(w)` (oracle path, `d` capped).
pub fn dense_hessian(view: &RiskView<'_>, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = view.dim();
    if d > DENSE_ORACLE_DIM_CAP {
        return Err(Error::Capability(format!(
            "dense Hessian assembly capped at d ≤ {DENSE_ORACLE_DIM_CAP}, got {d}"
        )));
    }
    let n = view.n();
    let inv_n = 1.0 / n as f64;
    let mut h = DMatrix::zeros(d, d);
    for i in 0..n {
        let (s, row) = view.hessian_factor(w, i);
        let coef = s * inv_n;
        for (&ja, &xa) in row.indices.iter().zip(row.values) {
            for (&jb, &xb) in row.indices.iter().zip(row.values) {
                h[(ja as usize, jb as usize)] += coef * xa * xb;
            }
        }
    }
    for j in 0..d {
        h[(j, j)] += view.lambda();
    }
    Ok(h)
}

/// Exact Newton direction and exact Newton decrement
/// `‖ũ‖ = √(∇Rᵀ H⁻¹ ∇R)` via a dense direct solve. Test oracle; `d` capped.
pub fn exact_newton_reference(view: &RiskView<'_>, w: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let h = dense_hessian(view, w)?;
    let g = view.grad_full(w);
    let chol = Cholesky::new(h)
        .ok_or_else(|| Error::Numerical("dense Hessian is not positive definite".into()))?;
    let u = chol.solve(&g);
    let dec_sq = g.dot(&u);
    Ok((u, dec_sq.max(0.0).sqrt()))
}

/// High-accuracy minimizer of `R_n` by damped exact Newton iteration
/// (dense solves). Runs until `‖∇R_n‖ ≤ tol`.
pub fn reference_minimizer(view: &RiskView<'_>, tol: f64) -> Result<DVector<f64>> {
    let mut w = DVector::zeros(view.dim());
    let mut best = w.clone();
    let mut best_norm = view.grad_full(&w).norm();
    for _ in 0..500 {
        if best_norm <= tol {
            return Ok(best);
        }
        let (u, dec) = exact_newton_reference(view, &w)?;
        w -= u / (1.0 + dec);
        let g = view.grad_full(&w).norm();
        if g < best_norm {
            best_norm = g;
            best = w.clone();
        }
    }
    if best_norm <= tol {
        Ok(best)
    } else {
        Err(Error::Numerical(format!(
            "reference minimizer stalled at ‖∇R‖ = {best_norm:.3e} > {tol:.1e}"
        )))
    }
}
