//! Golden-section minimization of unimodal scalar functions.

use crate::error::{domain, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Minimizes `f` on `[lo, hi]` until the bracket is narrower than `rel_tol`
/// relative to its midpoint. For a function that is unimodal on the interval
/// the bracket always contains the minimizer; if the minimum sits at an
/// endpoint, the search converges to that endpoint.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<Minimum> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(domain(format!("degenerate search interval ({lo}, {hi})")));
    }
    if !(rel_tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while (b - a) > rel_tol * 0.5 * (a.abs() + b.abs()) + f64::MIN_POSITIVE && iterations < MAX_ITER {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Ok(Minimum { x, value, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let m = golden_section(|x| (x - 2.5).powi(2) + 1.0, 0.0, 10.0, 1e-10).unwrap();
        assert!((m.x - 2.5).abs() < 1e-6);
        assert!((m.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exp_over_x() {
        let m = golden_section(|a: f64| a.exp() / a, 1e-3, 10.0, 1e-9).unwrap();
        assert!((m.x - 1.0).abs() < 1e-6);
        assert!((m.value - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn boundary_minimum() {
        let m = golden_section(|x| x, 1.0, 2.0, 1e-9).unwrap();
        assert!((m.x - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_interval() {
        assert!(golden_section(|x| x, 1.0, 1.0, 1e-6).is_err());
        assert!(golden_section(|x| x, 2.0, 1.0, 1e-6).is_err());
    }
}
