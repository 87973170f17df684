//! Solve one Newton system with the low-rank preconditioner: build
//! `P = H̃ + μI` from a 100-sample Hessian subset, run the preconditioned
//! conjugate gradient loop, and verify the ε-direction contract directly.
//!
//! ```bash
//! cargo run --example pcg_direction
//! ```

use std::sync::Arc;

use dance::data::synth_logistic;
use dance::distrib::WorkerPool;
use dance::model::{RiskSpec, RiskView};
use dance::pcg::{build_preconditioner, exact_newton_reference, pcg_solve};
use nalgebra::DVector;

fn main() -> dance::Result<()> {
    let ds = Arc::new(synth_logistic(1024, 30, 9, 0.25)?);
    let spec = RiskSpec::new(0.1, 0.5)?;
    let view = RiskView::new(spec, ds.window(1024)?);
    let mut pool = WorkerPool::simulated(ds.clone(), 4)?;
    pool.configure_window(1024)?;

    let w = DVector::from_element(30, 0.1);
    let grad = view.grad_full(&w);
    let beta = 1.0 / 20.0;
    let eps = beta * (view.lambda() / (view.m_const() + view.lambda())).sqrt() * grad.norm();

    let mu = view.m_const() / 10.0; // Λ = 100 → M/√Λ
    let precond = build_preconditioner(&view, &w, 100, mu, 1)?;
    println!(
        "preconditioner: |A| = {}, a = cV_n + μ = {:.4e}",
        precond.subset().len(),
        precond.diag()
    );

    let out = pcg_solve(&mut pool, &view, &w, &precond, eps, 1000)?;
    println!(
        "PCG: {} iterations, {} rounds (1 gradient reduce + {} loop passes)",
        out.iterations, out.rounds, out.iterations
    );

    let residual = (view.hvp_full(&w, &out.direction) - &grad).norm();
    println!("‖H v − ∇R‖ = {residual:.3e} ≤ ε = {eps:.3e}: {}", residual <= eps);

    let (exact_dir, exact_dec) = exact_newton_reference(&view, &w)?;
    println!(
        "direction error vs dense solve: {:.3e}; δ = {:.6} vs exact decrement {:.6}",
        (&out.direction - exact_dir).norm(),
        out.decrement,
        exact_dec
    );

    // unpreconditioned comparison: identity-like preconditioner (Λ = 1 on a
    // near-zero factor still carries a = cV_n + μ on the diagonal)
    let plain = build_preconditioner(&view, &w, 1, mu, 1)?;
    let mut pool2 = WorkerPool::simulated(ds.clone(), 4)?;
    pool2.configure_window(1024)?;
    let out2 = pcg_solve(&mut pool2, &view, &w, &plain, eps, 10_000)?;
    println!(
        "with |A| = 1 instead: {} iterations — the subset preconditioner saves {}",
        out2.iterations,
        out2.iterations.saturating_sub(out.iterations)
    );
    Ok(())
}
