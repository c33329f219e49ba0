//! Seeded Monte Carlo run of the full-band estimator, with tolerance checks.
//!
//! cargo run --release --example monte_carlo -- [replications] [output-stem]

use needlet_whittle::config::ExperimentConfig;
use needlet_whittle::experiment::{checks, run_experiment};

fn main() -> needlet_whittle::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let config = ExperimentConfig::canonical(reps, 20240101);
    print!("{}", config.serialize());

    let summary = run_experiment(&config)?;
    let a = &summary.aggregate;
    println!(
        "\nmean alpha_hat  {:.6} (SE {:.2e})",
        a.mean_alpha, a.se_alpha
    );
    println!(
        "Var B^JL(a - a0) {:.4} (closed form {:.4})",
        a.var_scaled,
        a.theory_variance.unwrap_or(f64::NAN)
    );
    println!(
        "mean hessian    {:.4} (limit {:.4})",
        a.mean_hessian, a.theory_hessian
    );
    for c in checks(&summary) {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    if let Some(stem) = args.next() {
        for f in summary.write_files(stem.as_ref())? {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}
