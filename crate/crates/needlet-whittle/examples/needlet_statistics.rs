//! Mexican and standard needlet windows, level kernels K_j and the statistics Λ̂_j.
//!
//! cargo run --release --example needlet_statistics

use needlet_whittle::needlet::{compute_statistics, k_j, select_j_range, JRangePolicy};
use needlet_whittle::{empirical_cl, simulate_alm, NeedletWindow, PowerSpectrumModel, Truncation};

fn main() -> needlet_whittle::Result<()> {
    let l_max = 1024;
    let model = PowerSpectrumModel::power_law(3.0, 1.0)?;
    let spec = empirical_cl(&simulate_alm(&model, l_max, 7)?);

    for window in [
        NeedletWindow::mexican(2, 2.0)?,
        NeedletWindow::standard(2.0)?,
    ] {
        let range = select_j_range(l_max, &window, JRangePolicy::PaperDefault)?;
        let stats = compute_statistics(&spec, &window, range, Truncation::BandLimited)?;
        println!("{:?}, levels {}..={}", window.kind, range.j0, range.jl);
        println!(
            "{:>3} {:>12} {:>14} {:>14} {:>8}",
            "j", "support", "lambda_hat", "G0 N_j K_j", "ratio"
        );
        for (j, lam) in range.levels().zip(&stats.lambda_hat) {
            let expected = range.n_j(window.b, j)
                * k_j(
                    &window,
                    j,
                    model.alpha0,
                    l_max,
                    1.0,
                    Truncation::BandLimited,
                )?;
            let (lo, hi) = window.support(j);
            println!(
                "{j:>3} {:>12} {lam:>14.6e} {expected:>14.6e} {:>8.4}",
                format!("{lo}..{hi}"),
                lam / expected
            );
        }
        println!();
    }
    Ok(())
}
