//! The Lieb-Robinson commutator bound, its exponential form and the velocity
//! formulas.
//!
//! Every certified bound uses `C = 2^{ν+ε+1} ‖F‖` with the lattice-wide `‖F‖`.
//! It dominates the true convolution constant `C_a` for every `a ≥ 0`, and the
//! disjoint-support bound is non-decreasing in `C`, so replacing `C_a` by `C`
//! never weakens a certificate.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::geometry::{self, DecayFunction, MetricGraph};
use crate::model::{Interaction, InteractionProfile};
use crate::search;

/// Default bracket for the velocity optimization over the weight `a`.
pub const DEFAULT_A_INTERVAL: (f64, f64) = (1e-3, 10.0);
/// Relative tolerance in `a` for the velocity optimization.
pub const OPTIMIZER_REL_TOL: f64 = 1e-6;

/// The constants entering the bound for one weight `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEvaluation {
    pub a: f64,
    /// `‖Φ‖_a`
    pub phi_norm: f64,
    /// `C_a` (the certified analytic constant)
    pub conv_constant: f64,
    /// `‖F‖` on the whole lattice
    pub f_norm_bare: f64,
    pub disjoint: bool,
    #[serde(skip)]
    g_scale: f64,
}

impl BoundEvaluation {
    pub fn new(a: f64, phi_norm: f64, conv_constant: f64, f_norm_bare: f64, disjoint: bool) -> Result<Self> {
        if !(a >= 0.0 && phi_norm >= 0.0 && f_norm_bare >= 0.0) {
            return Err(domain("bound parameters must be non-negative"));
        }
        if !(conv_constant > 0.0) {
            return Err(domain("convolution constant must be positive"));
        }
        Ok(Self { a, phi_norm, conv_constant, f_norm_bare, disjoint, g_scale: 1.0 })
    }

    /// Certified constants for `Φ` on `g` at the weight carried by `f`.
    pub fn certify(phi: &Interaction, f: &DecayFunction, g: &MetricGraph) -> Result<Self> {
        let profile = InteractionProfile::new(phi, g)?;
        Self::from_profile(&profile, f)
    }

    pub fn from_profile(profile: &InteractionProfile, f: &DecayFunction) -> Result<Self> {
        let lattice = geometry::lattice_f_norm(f.dimension(), f.epsilon())?;
        Self::new(
            f.weight(),
            profile.norm(f),
            geometry::certified_convolution_constant(f)?,
            lattice.value,
            true,
        )
    }

    pub fn with_disjoint(self, disjoint: bool) -> Self {
        Self { disjoint, ..self }
    }

    /// Multiplies `g_a` by `scale`. Only meant for negative controls that must
    /// make the dominance checks fail.
    #[doc(hidden)]
    pub fn with_g_scale(self, scale: f64) -> Self {
        Self { g_scale: scale, ..self }
    }

    /// `C_a^{-1}(e^{2‖Φ‖_a C_a |t|} - 1)` for disjoint supports, `C_a^{-1} e^{2‖Φ‖_a C_a |t|}` otherwise.
    pub fn g_a(&self, t: f64) -> f64 {
        let rate = 2.0 * self.phi_norm * self.conv_constant * t.abs();
        let growth = if self.disjoint { rate.exp_m1() } else { rate.exp() };
        self.g_scale * growth / self.conv_constant
    }

    /// `v_Φ(a) = 2‖Φ‖_a C_a / a`.
    pub fn velocity(&self) -> Result<f64> {
        if self.a <= 0.0 {
            return Err(domain("the velocity requires a > 0"));
        }
        Ok(2.0 * self.phi_norm * self.conv_constant / self.a)
    }

    /// `2‖A‖‖B‖ min[1, g_a(t) Σ_{x∈X, y∈Y} F_a(d(x,y))]`.
    ///
    /// The branch of `g_a` is chosen from the supports themselves.
    #[allow(clippy::too_many_arguments)]
    pub fn lr_bound(
        &self,
        x: &[usize],
        y: &[usize],
        f: &DecayFunction,
        g: &MetricGraph,
        norm_a: f64,
        norm_b: f64,
        t: f64,
    ) -> Result<f64> {
        self.check_inputs(x, y, g, norm_a, norm_b)?;
        if f.weight() != self.a {
            return Err(domain(format!("decay weight {} does not match a = {}", f.weight(), self.a)));
        }
        let disjoint = !x.iter().any(|s| y.contains(s));
        let g_t = self.with_disjoint(disjoint).g_a(t);
        let weight: f64 = x
            .iter()
            .flat_map(|&p| y.iter().map(move |&q| (p, q)))
            .map(|(p, q)| f.eval(g.dist(p, q) as f64))
            .sum();
        let product = g_t * weight;
        let factor = if product.is_nan() {
            // inf * 0: the weight underflowed while g overflowed.
            if weight == 0.0 { 0.0 } else { 1.0 }
        } else {
            product.min(1.0)
        };
        Ok(2.0 * norm_a * norm_b * factor)
    }

    /// `(2‖A‖‖B‖‖F‖/C_a) min(|X|,|Y|) e^{-a(d(X,Y) - v_Φ(a)|t|)}` for disjoint supports.
    pub fn lr_bound_corollary(
        &self,
        x: &[usize],
        y: &[usize],
        g: &MetricGraph,
        norm_a: f64,
        norm_b: f64,
        t: f64,
    ) -> Result<f64> {
        self.check_inputs(x, y, g, norm_a, norm_b)?;
        if self.a <= 0.0 {
            return Err(domain("the exponential bound requires a > 0"));
        }
        if x.iter().any(|s| y.contains(s)) {
            return Err(domain("the exponential bound requires disjoint supports"));
        }
        let d = g.set_distance(x, y).ok_or_else(|| domain("empty support"))? as f64;
        let v = self.velocity()?;
        let prefactor = 2.0 * norm_a * norm_b * self.f_norm_bare / self.conv_constant;
        Ok(prefactor * x.len().min(y.len()) as f64 * (-self.a * (d - v * t.abs())).exp())
    }

    fn check_inputs(&self, x: &[usize], y: &[usize], g: &MetricGraph, norm_a: f64, norm_b: f64) -> Result<()> {
        if !(norm_a >= 0.0 && norm_b >= 0.0) {
            return Err(domain("observable norms must be non-negative"));
        }
        if let Some(bad) = x.iter().chain(y).find(|&&s| s >= g.len()) {
            return Err(domain(format!("site index {bad} is not in the graph")));
        }
        if x.is_empty() || y.is_empty() {
            return Err(domain("supports must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalVelocity {
    pub a: f64,
    pub velocity: f64,
}

/// `a ↦ 2‖Φ‖_a C / a` with the certified constant `C`.
pub struct VelocityObjective {
    profile: InteractionProfile,
    decay: DecayFunction,
    conv_constant: f64,
}

impl VelocityObjective {
    pub fn new(phi: &Interaction, f: &DecayFunction, g: &MetricGraph) -> Result<Self> {
        Ok(Self {
            profile: InteractionProfile::new(phi, g)?,
            decay: f.bare(),
            conv_constant: geometry::certified_convolution_constant(f)?,
        })
    }

    pub fn eval(&self, a: f64) -> f64 {
        let f = self.decay.with_weight(a).expect("a > 0 inside the bracket");
        2.0 * self.profile.norm(&f) * self.conv_constant / a
    }
}

/// Minimizes `v_Φ(a)` over `a ∈ (α, β)` by golden-section search.
pub fn optimal_velocity(
    phi: &Interaction,
    f: &DecayFunction,
    g: &MetricGraph,
    interval: (f64, f64),
) -> Result<OptimalVelocity> {
    let (lo, hi) = interval;
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(domain(format!("invalid weight interval ({lo}, {hi})")));
    }
    let objective = VelocityObjective::new(phi, f, g)?;
    // The objective diverges at a = 0; stay strictly inside the open interval.
    let lo = if lo == 0.0 { hi * 1e-9 } else { lo };
    let m = search::golden_section(|a| objective.eval(a), lo, hi, OPTIMIZER_REL_TOL)?;
    Ok(OptimalVelocity { a: m.x, velocity: m.value })
}

/// `3 J e 2^{2(ν+ε+1)} ‖F‖`, the closed-form velocity bound of the Heisenberg model.
pub fn heisenberg_velocity_bound(j: f64, nu: usize, epsilon: f64, f_norm_bare: f64) -> Result<f64> {
    if !(j >= 0.0) {
        return Err(domain("coupling J must be non-negative"));
    }
    Ok(3.0 * j * closed_form_factor(nu, epsilon, f_norm_bare))
}

/// `‖Φ‖_∞ e 2^{2(ν+ε+1)} ‖F‖` for a bounded pair potential of sup-norm `phi_sup`.
pub fn anharmonic_velocity_bound(phi_sup: f64, nu: usize, epsilon: f64, f_norm_bare: f64) -> Result<f64> {
    if !(phi_sup >= 0.0) {
        return Err(domain("pair potential sup-norm must be non-negative"));
    }
    Ok(phi_sup * closed_form_factor(nu, epsilon, f_norm_bare))
}

fn closed_form_factor(nu: usize, epsilon: f64, f_norm_bare: f64) -> f64 {
    std::f64::consts::E * 2f64.powf(2.0 * (nu as f64 + epsilon + 1.0)) * f_norm_bare
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::heisenberg_interaction;
    use std::f64::consts::{E, PI};

    fn chain_setup(len: usize, j: f64, a: f64) -> (MetricGraph, DecayFunction, BoundEvaluation) {
        let g = MetricGraph::chain(len);
        let f = DecayFunction::new(1, 1.0, a).unwrap();
        let ev = BoundEvaluation::certify(&heisenberg_interaction(&g, j), &f, &g).unwrap();
        (g, f, ev)
    }

    #[test]
    fn g_a_branches() {
        let (_, _, ev) = chain_setup(4, 1.0, 1.0);
        assert_eq!(ev.g_a(0.0), 0.0);
        assert_eq!(ev.with_disjoint(false).g_a(0.0), 1.0 / ev.conv_constant);
        for t in [0.001, 0.02, 0.3] {
            assert_eq!(ev.g_a(t), ev.g_a(-t));
        }
    }

    #[test]
    fn g_a_monotone() {
        let (_, _, ev) = chain_setup(4, 1.0, 1.0);
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 1e-3).collect();
        assert!(ts.windows(2).all(|w| ev.g_a(w[1]) >= ev.g_a(w[0])));
        let bigger = BoundEvaluation::new(1.0, 2.0 * ev.phi_norm, ev.conv_constant, ev.f_norm_bare, true).unwrap();
        assert!(ts.iter().all(|&t| bigger.g_a(t) >= ev.g_a(t)));
    }

    #[test]
    fn certified_constants() {
        let (_, _, ev) = chain_setup(6, 1.0, 1.0);
        let lattice = PI * PI / 3.0 - 1.0;
        assert!((ev.f_norm_bare - lattice).abs() < 1e-13);
        assert!((ev.conv_constant - 8.0 * lattice).abs() < 1e-12);
        assert!((ev.phi_norm - 12.0 * E).abs() < 1e-12);
    }

    #[test]
    fn lr_bound_examples() {
        let (g, f, ev) = chain_setup(8, 1.0, 1.0);
        assert_eq!(ev.lr_bound(&[0], &[3], &f, &g, 1.0, 1.0, 0.0).unwrap(), 0.0);
        for t in [0.0, 1e-4, 1e-3, 0.5, 10.0] {
            assert!(ev.lr_bound(&[0], &[1], &f, &g, 1.5, 2.0, t).unwrap() <= 6.0);
        }
        // X = {0}, Y = {5}, t = 0.5.
        let g_half = ev.g_a(0.5);
        let expected = 2.0 * (g_half * (-5.0f64).exp() / 36.0).min(1.0);
        assert_eq!(ev.lr_bound(&[0], &[5], &f, &g, 1.0, 1.0, 0.5).unwrap(), expected);
        // Unsaturated regime: first-order growth 2‖Φ‖_a|t|·2F_a(1).
        let t = 1e-9;
        let small = ev.lr_bound(&[0], &[1], &f, &g, 1.0, 1.0, t).unwrap();
        let first_order = 2.0 * 2.0 * ev.phi_norm * t * f.eval(1.0);
        assert!((small - first_order).abs() < 1e-5 * first_order);
    }

    #[test]
    fn lr_bound_rejects_mismatched_weight() {
        let (g, _, ev) = chain_setup(4, 1.0, 1.0);
        let other = DecayFunction::new(1, 1.0, 0.5).unwrap();
        assert!(ev.lr_bound(&[0], &[2], &other, &g, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn corollary_examples() {
        let (g, _, ev) = chain_setup(12, 1.0, 1.0);
        let v = ev.velocity().unwrap();
        let far = ev.lr_bound_corollary(&[0], &[11], &g, 1.0, 1.0, 0.0).unwrap();
        assert!(far > 0.0 && far < 1e-5);
        let edge = ev.lr_bound_corollary(&[0], &[6], &g, 1.0, 1.0, 6.0 / v).unwrap();
        let expected = 2.0 * ev.f_norm_bare / ev.conv_constant;
        assert!((edge - expected).abs() < 1e-12);
        assert!(ev.lr_bound_corollary(&[0], &[0], &g, 1.0, 1.0, 0.1).is_err());
        let (g0, _, ev0) = chain_setup(4, 1.0, 0.0);
        assert!(ev0.lr_bound_corollary(&[0], &[2], &g0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn velocity_cases() {
        let (_, _, ev) = chain_setup(4, 1.0, 1.0);
        let v = ev.velocity().unwrap();
        assert!((v - 2.0 * 12.0 * E * ev.conv_constant).abs() < 1e-9);
        let doubled = BoundEvaluation::new(1.0, 2.0 * ev.phi_norm, ev.conv_constant, ev.f_norm_bare, true).unwrap();
        assert!((doubled.velocity().unwrap() - 2.0 * v).abs() < 1e-9);
        let (_, _, free) = chain_setup(4, 0.0, 1.0);
        assert_eq!(free.velocity().unwrap(), 0.0);
        let (_, _, zero_a) = chain_setup(4, 1.0, 0.0);
        assert!(zero_a.velocity().is_err());
    }

    #[test]
    fn optimal_velocity_closed_form() {
        let g = MetricGraph::chain(6);
        let f = DecayFunction::new(1, 1.0, 0.0).unwrap();
        let phi = heisenberg_interaction(&g, 1.0);
        let opt = optimal_velocity(&phi, &f, &g, DEFAULT_A_INTERVAL).unwrap();
        let lattice = geometry::lattice_f_norm(1, 1.0).unwrap().value;
        let closed = heisenberg_velocity_bound(1.0, 1, 1.0, lattice).unwrap();
        assert!((opt.a - 1.0).abs() < 1e-5);
        assert!(opt.velocity <= closed + 1e-6);
        assert!((opt.velocity - closed).abs() < 1e-9 * closed);
    }

    #[test]
    fn optimal_velocity_constrained() {
        let g = MetricGraph::chain(4);
        let f = DecayFunction::new(1, 1.0, 0.0).unwrap();
        let phi = heisenberg_interaction(&g, 1.0);
        let inner = optimal_velocity(&phi, &f, &g, DEFAULT_A_INTERVAL).unwrap();
        let right = optimal_velocity(&phi, &f, &g, (2.0, 5.0)).unwrap();
        assert!((right.a - 2.0).abs() < 1e-5);
        assert!(right.velocity >= inner.velocity);
        assert!(optimal_velocity(&phi, &f, &g, (1.0, 1.0)).is_err());
        assert!(optimal_velocity(&phi, &f, &g, (0.0, 10.0)).is_ok());
    }

    #[test]
    fn closed_forms() {
        let lattice = PI * PI / 3.0 - 1.0;
        assert_eq!(heisenberg_velocity_bound(0.0, 1, 1.0, lattice).unwrap(), 0.0);
        // 3·e·2^6·(π²/3 − 1)
        let v = heisenberg_velocity_bound(1.0, 1, 1.0, lattice).unwrap();
        assert!((v - 3.0 * E * 64.0 * lattice).abs() < 1e-10);
        assert!((v - 1195.1).abs() < 0.05);
        let v2 = heisenberg_velocity_bound(2.0, 1, 1.0, lattice).unwrap();
        assert!((v2 - 2.0 * v).abs() < 1e-10);
        assert!(heisenberg_velocity_bound(-1.0, 1, 1.0, lattice).is_err());

        assert_eq!(anharmonic_velocity_bound(0.0, 1, 1.0, lattice).unwrap(), 0.0);
        assert_eq!(anharmonic_velocity_bound(3.0, 1, 1.0, lattice).unwrap(), v);
        let unit = anharmonic_velocity_bound(1.0, 1, 1.0, lattice).unwrap();
        assert!((unit - 398.37).abs() < 0.01);
    }
}
