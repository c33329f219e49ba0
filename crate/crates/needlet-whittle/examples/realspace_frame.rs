//! Needlet coefficients on a cubature grid: frame identity and correlation decay.
//!
//! cargo run --release --example realspace_frame -- [j] [seeds]

use needlet_whittle::sphere::{build_grid, empirical_beta_correlation, frame_check};
use needlet_whittle::PowerSpectrumModel;

fn main() -> needlet_whittle::Result<()> {
    let mut args = std::env::args().skip(1);
    let j: i32 = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let seeds: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let model = PowerSpectrumModel::power_law(3.0, 1.0)?;

    let g = build_grid(j, 2.0)?;
    println!(
        "grid N_j ~ B^2j: {} points on {} rings",
        g.count(),
        g.n_theta
    );
    for over in [1.0, 1.25, 1.5] {
        let f = frame_check(&model, j, 2, 2.0, 1, over)?;
        println!(
            "band limit x{over}: {} points, relative gap {:.2e}",
            f.grid_points, f.relative_gap
        );
    }

    let c = empirical_beta_correlation(&model, j, j, 2, 2.0, seeds, 9)?;
    println!(
        "\n{:>6} {:>7} {:>11} {:>11}",
        "u", "pairs", "mean corr", "exact"
    );
    for b in c.bins.iter().step_by(4).take(20) {
        println!(
            "{:>6.2} {:>7} {:>11.4} {:>11.4}",
            b.u_lo, b.pairs, b.mean_corr, b.exact_corr
        );
    }
    println!(
        "decay exponent: theory {} exact-series {:?} monte carlo {:?}",
        c.theory_exponent, c.exact_exponent, c.fitted_exponent
    );
    println!(
        "antipodal |corr|: mean {:.3}, max {:.3}",
        c.antipodal_mean_abs_corr, c.antipodal_max_abs_corr
    );
    Ok(())
}
