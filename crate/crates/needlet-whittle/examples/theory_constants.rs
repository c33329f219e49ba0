//! Closed-form asymptotic constants and the variance comparison table.
//!
//! cargo run --release --example theory_constants -- [p] [B] [alpha0] [kappa]

use needlet_whittle::asymptotics::{sigma0_sq, table1_constants, AsymptoticConstants};

fn main() -> needlet_whittle::Result<()> {
    let a: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|s| s.parse().ok())
        .collect();
    let get = |i: usize, d: f64| a.get(i).copied().unwrap_or(d);
    let c =
        AsymptoticConstants::compute(get(0, 2.0) as u32, get(1, 2.0), get(2, 3.0), get(3, 0.5))?;
    for (name, v) in c.entries() {
        println!("{name:>22} = {v:.6}");
    }

    let t = table1_constants();
    println!("\nalpha0  B_std   rho0^2 | p  printed  sigma0^2");
    for (i, alpha0) in t.alpha0.iter().enumerate() {
        for k in 0..3 {
            let s = sigma0_sq(t.p[k], *alpha0)?;
            println!(
                "{alpha0:>6} {:>6.4} {:>8.2} | {}  {:>7.2}  {s:>8.5}",
                t.b[k], t.rho0_sq[i][k], t.p[k], t.sigma[i][k]
            );
        }
    }
    Ok(())
}
