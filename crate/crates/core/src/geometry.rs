//! Finite truncations of `Z^ν` under the L1 metric, and the decay-function
//! calculus used to weight interactions and commutator bounds.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::zeta::power_tail;
use crate::TOL_GEOMETRY;

/// Integer coordinates of a lattice point. Ordering is lexicographic, which is
/// the canonical (row-major) site order used for tensor factors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    fn l1(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }
}

impl From<i64> for Site {
    fn from(x: i64) -> Self {
        Site(vec![x])
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(":"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[default]
    L1,
}

/// A finite set of lattice sites with the L1 distance.
///
/// Sites are stored sorted; every other module refers to a site by its index
/// in this order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    dimension: usize,
    sites: Vec<Site>,
    metric: MetricKind,
    box_radius: Option<u32>,
}

impl MetricGraph {
    /// Builds a graph from an explicit site list. The list is sorted into
    /// canonical order; duplicates are rejected.
    pub fn from_sites(dimension: usize, mut sites: Vec<Site>) -> Result<Self> {
        if dimension == 0 {
            return Err(domain("lattice dimension must be positive"));
        }
        if let Some(bad) = sites.iter().find(|s| s.0.len() != dimension) {
            return Err(domain(format!(
                "site {bad} has {} coordinates, expected {dimension}",
                bad.0.len()
            )));
        }
        sites.sort();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(domain(format!("duplicate site {}", w[0])));
        }
        Ok(Self { dimension, sites, metric: MetricKind::L1, box_radius: None })
    }

    /// The box `[-radius, radius]^ν`.
    pub fn cube(dimension: usize, radius: u32) -> Result<Self> {
        if dimension == 0 {
            return Err(domain("lattice dimension must be positive"));
        }
        let r = radius as i64;
        let side = 2 * radius as usize + 1;
        let count = side
            .checked_pow(dimension as u32)
            .ok_or_else(|| domain("box too large"))?;
        let sites = (0..count)
            .map(|mut k| {
                let mut c = vec![0i64; dimension];
                for slot in c.iter_mut().rev() {
                    *slot = (k % side) as i64 - r;
                    k /= side;
                }
                Site(c)
            })
            .collect();
        let mut g = Self::from_sites(dimension, sites)?;
        g.box_radius = Some(radius);
        Ok(g)
    }

    /// The one-dimensional chain `0, 1, ..., len - 1`.
    pub fn chain(len: usize) -> Self {
        let sites = (0..len as i64).map(Site::from).collect();
        Self { dimension: 1, sites, metric: MetricKind::L1, box_radius: None }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn box_radius(&self) -> Option<u32> {
        self.box_radius
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> &Site {
        &self.sites[index]
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    /// Indices of all sites, i.e. the full volume.
    pub fn all(&self) -> Vec<usize> {
        (0..self.sites.len()).collect()
    }

    /// L1 distance between two sites given by coordinates.
    pub fn distance(&self, x: &Site, y: &Site) -> Result<f64> {
        for s in [x, y] {
            if self.index_of(s).is_none() {
                return Err(domain(format!("site {s} is not in the graph")));
            }
        }
        Ok(x.l1(y) as f64)
    }

    /// L1 distance between two sites given by index.
    pub fn dist(&self, i: usize, j: usize) -> u64 {
        self.sites[i].l1(&self.sites[j])
    }

    /// `min_{x ∈ xs, y ∈ ys} d(x, y)`; `None` if either set is empty.
    pub fn set_distance(&self, xs: &[usize], ys: &[usize]) -> Option<u64> {
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.dist(x, y))
            .min()
    }

    /// Largest pairwise distance within `set` (0 for sets with fewer than two sites).
    pub fn diameter(&self, set: &[usize]) -> u64 {
        set.iter()
            .flat_map(|&x| set.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.dist(x, y))
            .max()
            .unwrap_or(0)
    }

    /// Largest distance between any two sites of the graph.
    pub fn max_distance(&self) -> u64 {
        self.diameter(&self.all())
    }

    /// Sites at exactly distance `d` from `from`, in canonical order.
    pub fn sites_at_distance(&self, from: usize, d: u64) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.dist(from, j) == d).collect()
    }

    /// Checks identity, symmetry and the triangle inequality. Up to a thousand
    /// triples are enumerated exhaustively; larger graphs are sampled.
    pub fn metric_axioms_hold<R: Rng>(&self, rng: &mut R, samples: usize) -> bool {
        let n = self.len();
        let check = |x: usize, y: usize, z: usize| {
            let (dxy, dyz, dxz) = (self.dist(x, y), self.dist(y, z), self.dist(x, z));
            self.dist(x, x) == 0
                && (dxy == 0) == (x == y)
                && dxy == self.dist(y, x)
                && dxz <= dxy + dyz
        };
        if n == 0 {
            return true;
        }
        if n.saturating_pow(3) <= 1000 {
            (0..n).all(|x| (0..n).all(|y| (0..n).all(|z| check(x, y, z))))
        } else {
            (0..samples).all(|_| check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)))
        }
    }
}

/// Serialized graph description: either a box or an explicit site list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Box { nu: usize, box_radius: u32 },
    Sites { nu: usize, sites: Vec<Vec<i64>> },
    /// Sites `0..length` on a line.
    Chain { length: usize },
}

impl GraphSpec {
    pub fn build(&self) -> Result<MetricGraph> {
        match self {
            GraphSpec::Box { nu, box_radius } => MetricGraph::cube(*nu, *box_radius),
            GraphSpec::Sites { nu, sites } => {
                MetricGraph::from_sites(*nu, sites.iter().cloned().map(Site).collect())
            }
            GraphSpec::Chain { length: 0 } => Err(domain("a chain needs at least one site")),
            GraphSpec::Chain { length } => Ok(MetricGraph::chain(*length)),
        }
    }

    /// Number of sites in the described graph, computed without building it.
    pub fn site_count(&self) -> usize {
        match self {
            GraphSpec::Box { nu, box_radius } => (2 * *box_radius as usize + 1)
                .checked_pow(*nu as u32)
                .unwrap_or(usize::MAX),
            GraphSpec::Sites { sites, .. } => sites.len(),
            GraphSpec::Chain { length } => *length,
        }
    }
}

/// `F_a(r) = e^{-a r} (1 + r)^{-(ν + ε)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFunction {
    epsilon: f64,
    weight_a: f64,
    dimension: usize,
}

impl DecayFunction {
    pub fn new(dimension: usize, epsilon: f64, weight_a: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(domain("lattice dimension must be positive"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("decay surplus epsilon must be positive, got {epsilon}")));
        }
        if !(weight_a >= 0.0 && weight_a.is_finite()) {
            return Err(domain(format!("exponential weight must be non-negative, got {weight_a}")));
        }
        Ok(Self { epsilon, weight_a, dimension })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weight(&self) -> f64 {
        self.weight_a
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `ν + ε`.
    pub fn exponent(&self) -> f64 {
        self.dimension as f64 + self.epsilon
    }

    /// The same polynomial decay with a different exponential weight.
    pub fn with_weight(&self, weight_a: f64) -> Result<Self> {
        Self::new(self.dimension, self.epsilon, weight_a)
    }

    /// The unweighted function `F = F_0`.
    pub fn bare(&self) -> Self {
        Self { weight_a: 0.0, ..*self }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (-self.weight_a * r).exp() * (1.0 + r).powf(-self.exponent())
    }

    /// `F_a(d)` for every integer distance `0..=max_d`.
    pub(crate) fn table(&self, max_d: u64) -> Vec<f64> {
        (0..=max_d).map(|d| self.eval(d as f64)).collect()
    }
}

/// `max_x Σ_y F_a(d(x, y))` over the graph: the truncated uniform-integrability norm.
pub fn f_norm(f: &DecayFunction, g: &MetricGraph) -> Result<f64> {
    if g.is_empty() {
        return Err(domain("f_norm of an empty site set"));
    }
    let table = f.table(g.max_distance());
    let n = g.len();
    let best = (0..n)
        .map(|x| (0..n).map(|y| table[g.dist(x, y) as usize]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// Smallest `C` with `Σ_z F_a(d(x,z)) F_a(d(z,y)) ≤ C F_a(d(x,y))` for all pairs of
/// the truncation. This underestimates the lattice-wide constant.
pub fn convolution_constant_empirical(f: &DecayFunction, g: &MetricGraph) -> Result<f64> {
    if g.is_empty() {
        return Err(domain("convolution constant of an empty site set"));
    }
    let table = f.table(g.max_distance());
    let n = g.len();
    let k = DMatrix::<f64>::from_fn(n, n, |x, z| table[g.dist(x, z) as usize]);
    let conv = &k * &k;
    let ratio = conv
        .iter()
        .zip(k.iter())
        .map(|(c, w)| c / w)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ratio)
}

/// `2^{ν+ε+1} ‖F‖` with `‖F‖` summed over the truncation.
pub fn convolution_constant_analytic(f: &DecayFunction, g: &MetricGraph) -> Result<f64> {
    Ok(2f64.powf(f.exponent() + 1.0) * f_norm(&f.bare(), g)?)
}

/// `2^{ν+ε+1} ‖F‖` with the lattice-wide `‖F‖`. This is the constant used in
/// every certified bound; it dominates `C_a` for all `a ≥ 0`.
pub fn certified_convolution_constant(f: &DecayFunction) -> Result<f64> {
    let norm = lattice_f_norm(f.dimension, f.epsilon)?;
    Ok(2f64.powf(f.exponent() + 1.0) * norm.value)
}

/// Checks `w(r1 + r2) ≥ w(r1) w(r2)` for `w(r) = e^{-a r}` on every sample.
pub fn verify_log_superadditive(weight_a: f64, samples: &[(f64, f64)]) -> Result<bool> {
    if !(weight_a >= 0.0) {
        return Err(domain("exponential weight must be non-negative"));
    }
    if samples.iter().any(|&(r1, r2)| !(r1 >= 0.0 && r2 >= 0.0)) {
        return Err(domain("radii must be non-negative"));
    }
    let w = |r: f64| (-weight_a * r).exp();
    Ok(samples
        .iter()
        .all(|&(r1, r2)| w(r1 + r2) >= w(r1) * w(r2) - TOL_GEOMETRY))
}

/// Number of points of `Z^ν` at L1 distance `r` from the origin.
pub fn shell_count(dimension: usize, r: u64) -> u64 {
    if r == 0 {
        return 1;
    }
    (1..=dimension.min(r as usize) as u64)
        .map(|k| (1u64 << k) * binomial(dimension as u64, k) * binomial(r - 1, k - 1))
        .sum()
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `Σ_{x ∈ Z^ν, |x| ≤ radius} (1 + |x|)^{-(ν+ε)}`.
pub fn lattice_partial_sum(dimension: usize, epsilon: f64, radius: u64) -> f64 {
    let s = dimension as f64 + epsilon;
    (0..=radius)
        .rev()
        .map(|r| shell_count(dimension, r) as f64 * (1.0 + r as f64).powf(-s))
        .sum()
}

/// The lattice-wide norm `‖F‖ = Σ_{x ∈ Z^ν} (1 + |x|)^{-(ν+ε)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeNorm {
    pub value: f64,
    /// Explicit sum over the shells `|x| ≤ partial_radius`.
    pub partial_sum: f64,
    pub partial_radius: u64,
    /// Bound on the error of `value` left after the tail has been resolved.
    pub tail_bound: f64,
}

const PARTIAL_RADIUS: u64 = 64;

/// Evaluates `‖F‖` on all of `Z^ν`.
///
/// The shell count at radius `r ≥ 1` is a polynomial of degree `ν - 1` in
/// `u = 1 + r`, so the sum splits into tails of `Σ_{u≥2} u^{k-ν-ε}` that are
/// resolved by Euler-Maclaurin summation.
pub fn lattice_f_norm(dimension: usize, epsilon: f64) -> Result<LatticeNorm> {
    if dimension == 0 || dimension > 8 {
        return Err(domain(format!("lattice dimension {dimension} outside 1..=8")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain("decay surplus epsilon must be positive"));
    }
    let s = dimension as f64 + epsilon;
    let coeffs = shell_polynomial(dimension);
    let mut value = 1.0;
    let mut tail_bound = 0.0;
    for (k, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let tail = power_tail(s - k as f64, 2);
        value += c * tail.value;
        tail_bound += c.abs() * tail.error_bound;
    }
    // Rounding in the combination is the dominant residual uncertainty.
    tail_bound += 4.0 * f64::EPSILON * value;
    Ok(LatticeNorm {
        value,
        partial_sum: lattice_partial_sum(dimension, epsilon, PARTIAL_RADIUS),
        partial_radius: PARTIAL_RADIUS,
        tail_bound,
    })
}

/// Coefficients `c_k` with `shell_count(ν, r) = Σ_k c_k (1 + r)^k` for `r ≥ 1`.
fn shell_polynomial(dimension: usize) -> Vec<f64> {
    // C(r-1, k-1) = Π_{m=2}^{k} (u - m) / (k-1)!  with u = 1 + r.
    let mut total = vec![0.0; dimension];
    for k in 1..=dimension {
        let mut poly = vec![1.0];
        for m in 2..=k {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, p) in poly.iter().enumerate() {
                next[i + 1] += p;
                next[i] -= m as f64 * p;
            }
            poly = next;
        }
        let fact: f64 = (1..k).map(|i| i as f64).product();
        let scale = (1u64 << k) as f64 * binomial(dimension as u64, k as u64) as f64 / fact;
        for (i, p) in poly.iter().enumerate() {
            total[i] += scale * p;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn distances() {
        let g = MetricGraph::cube(1, 5).unwrap();
        assert_eq!(g.distance(&Site::from(3), &Site::from(3)).unwrap(), 0.0);
        assert_eq!(g.distance(&Site::from(0), &Site::from(5)).unwrap(), 5.0);
        let g2 = MetricGraph::cube(2, 1).unwrap();
        let d = g2.distance(&Site(vec![0, 0]), &Site(vec![1, 1])).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn unknown_site_is_domain_error() {
        let g = MetricGraph::chain(3);
        assert!(matches!(
            g.distance(&Site::from(0), &Site::from(7)),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn duplicate_sites_rejected() {
        let r = MetricGraph::from_sites(1, vec![Site::from(1), Site::from(1)]);
        assert!(r.is_err());
        let r = MetricGraph::from_sites(2, vec![Site::from(1)]);
        assert!(r.is_err());
    }

    #[test]
    fn box_order_is_row_major() {
        let g = MetricGraph::cube(2, 1).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.site(0), &Site(vec![-1, -1]));
        assert_eq!(g.site(1), &Site(vec![-1, 0]));
        assert_eq!(g.site(8), &Site(vec![1, 1]));
    }

    #[test]
    fn nearest_neighbours_in_box() {
        let g = MetricGraph::cube(2, 2).unwrap();
        let center = g.index_of(&Site(vec![0, 0])).unwrap();
        assert_eq!(g.sites_at_distance(center, 1).len(), 4);
    }

    #[test]
    fn metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(MetricGraph::cube(1, 4).unwrap().metric_axioms_hold(&mut rng, 0));
        assert!(MetricGraph::cube(2, 4).unwrap().metric_axioms_hold(&mut rng, 20_000));
        assert!(MetricGraph::cube(3, 2).unwrap().metric_axioms_hold(&mut rng, 20_000));
    }

    #[test]
    fn single_site_norms() {
        let g = MetricGraph::chain(1);
        let f = DecayFunction::new(1, 1.0, 0.7).unwrap();
        assert_eq!(f_norm(&f, &g).unwrap(), 1.0);
        assert_eq!(convolution_constant_empirical(&f, &g).unwrap(), 1.0);
        assert_eq!(convolution_constant_analytic(&f, &g).unwrap(), 8.0);
    }

    #[test]
    fn empty_graph_errors() {
        let g = MetricGraph::from_sites(1, vec![]).unwrap();
        let f = DecayFunction::new(1, 1.0, 0.0).unwrap();
        assert!(f_norm(&f, &g).is_err());
        assert!(convolution_constant_empirical(&f, &g).is_err());
    }

    #[test]
    fn decay_function_shape() {
        let f = DecayFunction::new(2, 0.5, 0.0).unwrap();
        assert_eq!(f.eval(0.0), 1.0);
        assert!((f.eval(1.0) - 2f64.powf(-2.5)).abs() < 1e-15);
        assert!(DecayFunction::new(1, 0.0, 0.0).is_err());
        assert!(DecayFunction::new(1, 1.0, -1.0).is_err());
    }

    #[test]
    fn large_weight_norm_tends_to_one() {
        let g = MetricGraph::cube(1, 10).unwrap();
        let f = DecayFunction::new(1, 1.0, 40.0).unwrap();
        let v = f_norm(&f, &g).unwrap();
        assert!(v >= 1.0 && v - 1.0 < 1e-15);
    }

    #[test]
    fn analytic_constant_formula() {
        let g = MetricGraph::cube(2, 3).unwrap();
        let f = DecayFunction::new(2, 0.5, 1.3).unwrap();
        let bare = f_norm(&f.bare(), &g).unwrap();
        let c = convolution_constant_analytic(&f, &g).unwrap();
        assert!((c - 2f64.powf(3.5) * bare).abs() < 1e-12);
    }

    #[test]
    fn weighted_constant_is_smaller() {
        let g = MetricGraph::cube(1, 20).unwrap();
        let f0 = DecayFunction::new(1, 1.0, 0.0).unwrap();
        let f1 = f0.with_weight(1.0).unwrap();
        let c0 = convolution_constant_empirical(&f0, &g).unwrap();
        let c1 = convolution_constant_empirical(&f1, &g).unwrap();
        assert!(c1 <= c0);
        assert!(c0 <= convolution_constant_analytic(&f0, &g).unwrap());
    }

    #[test]
    fn log_superadditivity() {
        assert!(verify_log_superadditive(1.0, &[(1.0, 1.0), (2.0, 3.0)]).unwrap());
        assert!(verify_log_superadditive(0.0, &[(0.5, 9.0)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<_> = (0..100)
            .map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
            .collect();
        assert!(verify_log_superadditive(2.5, &samples).unwrap());
        assert!(verify_log_superadditive(1.0, &[(-1.0, 0.0)]).is_err());
    }

    #[test]
    fn shell_counts_match_enumeration() {
        for nu in 1..=3usize {
            let g = MetricGraph::cube(nu, 6).unwrap();
            let origin = g.index_of(&Site(vec![0; nu])).unwrap();
            for r in 0..=6u64 {
                assert_eq!(g.sites_at_distance(origin, r).len() as u64, shell_count(nu, r));
            }
            let poly = shell_polynomial(nu);
            for r in 1..=20u64 {
                let u = 1.0 + r as f64;
                let p: f64 = poly.iter().enumerate().map(|(k, c)| c * u.powi(k as i32)).sum();
                assert_eq!(p, shell_count(nu, r) as f64);
            }
        }
    }

    #[test]
    fn lattice_norm_one_dimension() {
        let n = lattice_f_norm(1, 1.0).unwrap();
        assert!((n.value - (PI * PI / 3.0 - 1.0)).abs() < 1e-13);
        assert!(n.tail_bound < 1e-10);
        assert!(n.partial_sum < n.value);
    }

    #[test]
    fn lattice_norm_two_dimensions_against_direct_sum() {
        // Direct summation to radius R plus the integral comparison for the tail,
        // Σ_{r>R} 4r (1+r)^{-2.5} ∈ [∫_{R+1}^∞, ∫_R^∞] of 4x(1+x)^{-2.5} dx.
        let radius = 4000u64;
        let direct = lattice_partial_sum(2, 0.5, radius);
        let antideriv = |x: f64| 4.0 * (-2.0 * (1.0 + x).powf(-0.5) + (2.0 / 3.0) * (1.0 + x).powf(-1.5));
        let lo = direct - antideriv(radius as f64 + 1.0);
        let hi = direct - antideriv(radius as f64);
        let n = lattice_f_norm(2, 0.5).unwrap();
        assert!(n.value >= lo - 1e-9 && n.value <= hi + 1e-9, "{lo} {} {hi}", n.value);
        assert!(n.tail_bound < 1e-10);
    }
}
