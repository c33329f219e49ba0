//! Bracketing 1-D minimizer: uniform grid scan, then golden-section refinement.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub trace: Vec<(f64, f64)>,
    pub iterations: usize,
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

pub fn grid_golden(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_points: usize,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let mut trace = Vec::with_capacity(grid_points + 64);
    let mut eval = |x: f64, trace: &mut Vec<(f64, f64)>| {
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        trace.push((x, v));
        v
    };
    let n = grid_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + i as f64 * step };
        let v = eval(x, &mut trace);
        if v < best.1 {
            best = (i, v);
        }
    }
    let mut a = lo + best.0.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best.0 + 1) as f64 * step).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut trace);
    let mut fd = eval(d, &mut trace);
    let mut iterations = 0;
    while b - a > tol && iterations < max_iter {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut trace);
        }
    }
    let (x, fx) = trace
        .iter()
        .cloned()
        .fold((f64::NAN, f64::INFINITY), |acc, (x, v)| {
            if v < acc.1 {
                (x, v)
            } else {
                acc
            }
        });
    Minimum {
        x,
        fx,
        trace,
        iterations,
        converged: b - a <= tol,
    }
}
