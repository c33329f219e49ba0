use std::sync::OnceLock;

use needlet_whittle::sphere::{empirical_beta_correlation, CorrelationSummary};
use needlet_whittle::PowerSpectrumModel;

fn summary() -> &'static CorrelationSummary {
    static S: OnceLock<CorrelationSummary> = OnceLock::new();
    S.get_or_init(|| {
        let model = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
        empirical_beta_correlation(&model, 5, 5, 2, 2.0, 200, 17).unwrap()
    })
}

#[test]
fn self_correlation_is_one() {
    assert!(
        (summary().self_corr - 1.0).abs() < 1e-9,
        "{}",
        summary().self_corr
    );
}

#[test]
fn antipodal_pairs_are_nearly_uncorrelated() {
    let c = summary();
    assert!(
        c.antipodal_mean_abs_corr < 0.1,
        "{}",
        c.antipodal_mean_abs_corr
    );
}

#[test]
fn harmonic_series_decay_exponent() {
    let c = summary();
    let exact = c.exact_exponent.unwrap();
    assert!(
        (exact / c.theory_exponent - 1.0).abs() <= 0.30,
        "exact-series exponent {exact}"
    );
}

#[test]
fn monte_carlo_decay_exponent() {
    let c = summary();
    let fitted = c
        .fitted_exponent
        .expect("enough bins above the noise floor");
    assert!(
        (fitted / c.theory_exponent - 1.0).abs() <= 0.30,
        "Monte Carlo exponent {fitted} vs {} (noise floor {})",
        c.theory_exponent,
        c.noise_floor
    );
}
