//! Power-sum tails `Σ_{u ≥ start} u^{-σ}` with a rigorous truncation estimate.

/// Bernoulli numbers B_2, B_4, ..., B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Number of terms summed explicitly before switching to Euler-Maclaurin.
const DIRECT_TERMS: u64 = 48;

#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerTail {
    pub value: f64,
    /// Bound on the Euler-Maclaurin remainder.
    pub error_bound: f64,
}

/// `Σ_{u ≥ start} u^{-σ}` for `σ > 1` and `start ≥ 1`.
///
/// For `x^{-σ}` the Euler-Maclaurin remainder has the sign of, and is bounded
/// by, the first omitted correction term, which is reported as `error_bound`.
pub(crate) fn power_tail(sigma: f64, start: u64) -> PowerTail {
    debug_assert!(sigma > 1.0 && start >= 1);
    let cut = start + DIRECT_TERMS;
    let n = cut as f64;

    // Euler-Maclaurin tail from `cut`.
    let mut tail = n.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * n.powf(-sigma);
    let mut rising = sigma; // (σ)_{2j-1}
    let mut factorial = 2.0; // (2j)!
    let mut omitted = 0.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / factorial * rising * n.powf(-sigma - (2 * j + 1) as f64);
        if j + 1 == BERNOULLI_EVEN.len() {
            omitted = term.abs();
        } else {
            tail += term;
        }
        let k = (2 * j + 1) as f64;
        rising *= (sigma + k) * (sigma + k + 1.0);
        factorial *= (k + 2.0) * (k + 3.0);
    }

    // Direct part, smallest terms first.
    let direct: f64 = (start..cut).rev().map(|u| (u as f64).powf(-sigma)).sum();
    PowerTail { value: direct + tail, error_bound: omitted }
}
