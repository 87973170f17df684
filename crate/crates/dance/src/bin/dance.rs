use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use dance::bench::{run_experiment, ExperimentConfig};
use dance::data::{serialize_libsvm, synth_logistic};
use dance::theory::BoundInputs;

#[derive(Parser)]
#[command(
    name = "dance",
    about = "Adaptive sample-size damped Newton solver for regularized ERM",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic logistic dataset in libsvm format.
    GenSynth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Label-noise amplitude added to the planted score.
        #[arg(long, default_value_t = 0.25)]
        margin: f64,
        /// Output path; `-` writes to stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Print the iteration/communication bound calculators for given inputs.
    Bounds {
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Gradient-smoothness constant M.
        #[arg(long = "m-const", default_value_t = 1.0)]
        m_const: f64,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        /// Preconditioner ridge μ.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Active sample size n.
        #[arg(long, default_value_t = 4096)]
        n: usize,
        /// Previous stage size m (defaults to n/2).
        #[arg(long)]
        m: Option<usize>,
        /// Full training size N (defaults to n).
        #[arg(long = "n-total")]
        n_total: Option<usize>,
        #[arg(long, default_value_t = 64)]
        m0: usize,
        #[arg(long = "grad-norm", default_value_t = 1.0)]
        grad_norm: f64,
        /// Feature dimension (for the total-complexity indicator).
        #[arg(long, default_value_t = 20)]
        d: usize,
        /// Warm-start suboptimality bound R_n(w_m) − R_n(w_n*).
        #[arg(long, default_value_t = 0.1)]
        subopt: f64,
        #[arg(long = "wstar-norm-sq", default_value_t = 1.0)]
        wstar_norm_sq: f64,
    },
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn real_main() -> dance::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = run_experiment(&cfg)?;
            println!("algorithm:        {}", out.summary.algorithm);
            println!(
                "dataset:          N = {}, d = {}, test = {}",
                out.summary.dataset.n_train, out.summary.dataset.d, out.summary.dataset.n_test
            );
            println!("total rounds:     {}", out.summary.total_rounds);
            println!("eff grad evals:   {:.4}", out.summary.total_eff_grad_evals);
            if let Some(last) = &out.summary.final_metrics {
                println!("final risk:       {:.6e}", last.risk_window);
                println!("train accuracy:   {:.4}", last.acc_full);
                if let Some(t) = last.acc_test {
                    println!("test accuracy:    {t:.4}");
                }
            }
            if let Some(th) = &out.summary.theory {
                println!("round bound (Σ):  {}", th.predicted_total_rounds);
            }
            println!("wrote {}", out.csv_path.display());
            println!("wrote {}", out.json_path.display());
        }
        Cmd::GenSynth {
            n,
            d,
            seed,
            margin,
            out,
        } => {
            let ds = synth_logistic(n, d, seed, margin)?;
            if out == "-" {
                let stdout = std::io::stdout();
                serialize_libsvm(&ds, stdout.lock())?;
            } else {
                let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
                serialize_libsvm(&ds, &mut file)?;
                file.flush()?;
                eprintln!("wrote {n} samples with d = {d} to {out}");
            }
        }
        Cmd::Bounds {
            c,
            gamma,
            m_const,
            beta,
            mu,
            n,
            m,
            n_total,
            m0,
            grad_norm,
            d,
            subopt,
            wstar_norm_sq,
        } => {
            let inputs = BoundInputs {
                c,
                gamma,
                m_const,
                beta,
                mu,
                n,
                m: m.unwrap_or(n / 2),
                big_n: n_total.unwrap_or(n),
                m0,
                grad_norm,
                subopt,
                wstar_norm_sq,
            };
            let r = inputs.report();
            println!("V_n                      {:.6e}", r.v_n);
            println!("cV_n                     {:.6e}", r.c_v_n);
            println!("forcing tolerance ε      {:.6e}", r.eps_forcing);
            println!("PCG bound (general, ln)  {}", r.pcg_general_ln);
            println!("PCG bound (general, lg2) {}", r.pcg_general_log2);
            println!("PCG bound (reduced, lg2) {}", r.pcg_reduced_log2);
            println!("inner iteration bound    {}", r.inner_iters);
            println!("stage round bound        {}", r.stage_rounds);
            println!("warm-start bound (α=2)   {:.6e}", r.warmstart_doubling);
            if let Some(g) = r.warmstart_general {
                println!("warm-start bound (general) {g:.6e}");
            }
            println!("closed-form total rounds {:.3e}", r.closed_form_total_rounds);
            println!(
                "complexity indicator     {:.3e}",
                dance::theory::complexity_indicator(inputs.big_n, d)
            );
        }
    }
    Ok(())
}
