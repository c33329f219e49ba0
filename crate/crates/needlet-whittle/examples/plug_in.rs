//! Standard-needlet pilot estimate, then a mexican refit when p > α̂/4.
//!
//! cargo run --release --example plug_in -- [p]

use needlet_whittle::needlet::{select_j_range, JRangePolicy};
use needlet_whittle::whittle::plug_in;
use needlet_whittle::{
    empirical_cl, simulate_alm, NeedletWindow, PowerSpectrumModel, SearchConfig,
};

fn main() -> needlet_whittle::Result<()> {
    let p: u32 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2);
    let l_max = 1024;
    let spec = empirical_cl(&simulate_alm(
        &PowerSpectrumModel::power_law(3.0, 1.0)?,
        l_max,
        11,
    )?);
    let js = select_j_range(
        l_max,
        &NeedletWindow::standard(2.0)?,
        JRangePolicy::PaperDefault,
    )?;
    let jm = select_j_range(
        l_max,
        &NeedletWindow::mexican(p, 2.0)?,
        JRangePolicy::PaperDefault,
    )?;
    let r = plug_in(&spec, p, 2.0, 2.0, js, jm, &SearchConfig::default(), false)?;

    println!(
        "pilot (standard) alpha_hat = {:.6}, rho0^2 = {}",
        r.alpha_standard, r.rho0_sq
    );
    match r.sigma1_sq {
        Some(s) => println!(
            "p = {p} > alpha/4: mexican refit, sigma1^2 = {s:.4}, alpha_hat = {:.6}",
            r.alpha_final
        ),
        None => println!("p = {p} <= alpha/4: keeping the pilot estimate"),
    }
    Ok(())
}
