//! Approximate supports of evolved observables and empirical light cones.

use std::fmt::Write as _;

use serde::Serialize;

use crate::algebra::{self, Observable};
use crate::bounds::BoundEvaluation;
use crate::dynamics::{self, DynamicsEngine};
use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::geometry::{DecayFunction, MetricGraph};

/// How far `τ_t(A)` is from the algebra of a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationError {
    pub t: f64,
    /// `‖E_ball(τ_t(A)) ⊗ 1 − τ_t(A)‖`
    pub measured: f64,
    /// Sum of single-site commutator bounds over the exterior of the ball.
    pub certified: f64,
}

/// Localization error of `τ_t(A)` with respect to `ball`.
pub fn localization_error(
    engine: &DynamicsEngine,
    a: &Observable,
    t: f64,
    ball: &[usize],
    ev: &BoundEvaluation,
    f: &DecayFunction,
    g: &MetricGraph,
) -> Result<LocalizationError> {
    let profile = localization_profile(engine, a, &[t], &[ball.to_vec()], ev, f, g, Execution::Sequential)?;
    Ok(profile[0][0])
}

/// Localization errors for every ball and time, indexed `[ball][time]`.
///
/// `A` is transformed to the eigenbasis once and shared by all cells.
#[allow(clippy::too_many_arguments)]
pub fn localization_profile(
    engine: &DynamicsEngine,
    a: &Observable,
    times: &[f64],
    balls: &[Vec<usize>],
    ev: &BoundEvaluation,
    f: &DecayFunction,
    g: &MetricGraph,
    exec: Execution,
) -> Result<Vec<Vec<LocalizationError>>> {
    let lambda = engine.volume();
    let mut sorted_balls = Vec::with_capacity(balls.len());
    for ball in balls {
        let mut ball = ball.clone();
        ball.sort_unstable();
        ball.dedup();
        if let Some(s) = a.support().iter().find(|s| !ball.contains(s)) {
            return Err(domain(format!("ball does not contain site {s} of the observable's support")));
        }
        if let Some(s) = ball.iter().find(|s| !lambda.contains(s)) {
            return Err(domain(format!("ball site {s} is outside the volume")));
        }
        sorted_balls.push(ball);
    }
    let norm_a = a.norm();
    let op = engine.heisenberg(a)?;
    let rows: Vec<Result<Vec<LocalizationError>>> = exec.map(times, |&t| {
        let evolved = op.at(t);
        sorted_balls
            .iter()
            .map(|ball| {
                let measured = if ball.len() == lambda.len() {
                    0.0
                } else {
                    let reduced = algebra::conditional_expectation(&evolved, ball, lambda)?;
                    algebra::embed(&reduced, lambda)?.sub(&evolved)?.norm()
                };
                let mut certified = 0.0;
                for &y in lambda.iter().filter(|y| !ball.contains(y)) {
                    certified += ev.lr_bound(a.support(), &[y], f, g, norm_a, 1.0, t)?;
                }
                Ok(LocalizationError { t, measured, certified })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..sorted_balls.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect())
}

/// One `(distance, t)` cell of a light-cone scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeCell {
    pub distance: u64,
    pub t: f64,
    pub measured_norm: f64,
    pub bound_22: f64,
    /// Absent when the exponential form is undefined (`a = 0`).
    pub bound_24: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub distance: u64,
    /// Earliest interpolated time with `measured_norm ≥ threshold`.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightConeReport {
    pub grid: Vec<ConeCell>,
    pub threshold: f64,
    pub crossings: Vec<Crossing>,
    pub fitted_velocity: Option<f64>,
    /// `v_Φ(a)` at the weight used for the bounds (zero when `a = 0`).
    pub theoretical_velocity: f64,
    /// `2‖A‖‖B‖`
    pub trivial_bound: f64,
    /// Largest grid spacing, used as the tolerance of the crossing-time check.
    pub time_step: f64,
    #[serde(skip)]
    margin_inputs: MarginInputs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MarginInputs {
    a: f64,
    f_norm_bare: f64,
    conv_constant: f64,
}

/// Scans `‖[τ_t(A), B_d]‖` for `B` placed at each distance from the origin of `A`.
///
/// `A` must be supported on a single site, the origin. For every distance the
/// probe goes on the lowest-indexed site at that distance.
#[allow(clippy::too_many_arguments)]
pub fn light_cone_scan(
    engine: &DynamicsEngine,
    a: &Observable,
    b_template: &Observable,
    distances: &[u64],
    times: &[f64],
    threshold: f64,
    ev: &BoundEvaluation,
    f: &DecayFunction,
    g: &MetricGraph,
    exec: Execution,
) -> Result<LightConeReport> {
    if times.len() < 2 {
        return Err(domain("a light-cone scan needs at least two time points"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("scan times must be strictly increasing"));
    }
    let [origin] = a.support() else {
        return Err(domain("the scanned observable must sit on a single site"));
    };
    if b_template.support().len() != 1 {
        return Err(domain("the probe template must be a single-site observable"));
    }
    let (norm_a, norm_b) = (a.norm(), b_template.norm());
    let trivial = 2.0 * norm_a * norm_b;
    if !(threshold > 0.0 && threshold < trivial) {
        return Err(Error::Precondition(format!(
            "threshold {threshold} must lie strictly between 0 and 2‖A‖‖B‖ = {trivial}"
        )));
    }
    let mut probes = Vec::with_capacity(distances.len());
    let mut probe_sites = Vec::with_capacity(distances.len());
    for &d in distances {
        let site = *g
            .sites_at_distance(*origin, d)
            .iter()
            .find(|s| engine.volume().contains(s))
            .ok_or_else(|| domain(format!("no site at distance {d} inside the volume")))?;
        probes.push(Observable::new(b_template.matrix().clone(), vec![site])?);
        probe_sites.push(site);
    }
    let norms = dynamics::commutator_norm_sweep(engine, a, &probes, times, exec)?;

    let mut grid = Vec::with_capacity(distances.len() * times.len());
    let mut crossings = Vec::with_capacity(distances.len());
    for (k, &d) in distances.iter().enumerate() {
        let y = [probe_sites[k]];
        for (i, &t) in times.iter().enumerate() {
            let bound_24 = if ev.a > 0.0 && d > 0 {
                Some(ev.lr_bound_corollary(a.support(), &y, g, norm_a, norm_b, t)?)
            } else {
                None
            };
            grid.push(ConeCell {
                distance: d,
                t,
                measured_norm: norms[k][i],
                bound_22: ev.lr_bound(a.support(), &y, f, g, norm_a, norm_b, t)?,
                bound_24,
            });
        }
        crossings.push(Crossing { distance: d, t: first_crossing(times, &norms[k], threshold) });
    }

    let time_step = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(LightConeReport {
        grid,
        threshold,
        fitted_velocity: fit_velocity(&crossings),
        crossings,
        theoretical_velocity: if ev.a > 0.0 { ev.velocity()? } else { 0.0 },
        trivial_bound: trivial,
        time_step,
        margin_inputs: MarginInputs { a: ev.a, f_norm_bare: ev.f_norm_bare, conv_constant: ev.conv_constant },
    })
}

/// Linear interpolation between the two grid times straddling the threshold.
fn first_crossing(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let i = values.iter().position(|&v| v >= threshold)?;
    if i == 0 {
        return Some(times[0]);
    }
    let (t0, t1, v0, v1) = (times[i - 1], times[i], values[i - 1], values[i]);
    Some(t0 + (threshold - v0) / (v1 - v0) * (t1 - t0))
}

/// Least-squares slope of distance against crossing time.
fn fit_velocity(crossings: &[Crossing]) -> Option<f64> {
    let points: Vec<(f64, f64)> = crossings
        .iter()
        .filter(|c| c.distance > 0)
        .filter_map(|c| c.t.map(|t| (t, c.distance as f64)))
        .collect();
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_d = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_d)).sum();
    let slope = sxy / sxx;
    (slope.is_finite() && slope > 0.0).then_some(slope)
}

/// A failed light-cone check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeViolation {
    pub distance: u64,
    pub t: f64,
    pub detail: String,
}

impl LightConeReport {
    /// Positive-distance crossings are non-decreasing in distance.
    pub fn crossings_monotone(&self) -> bool {
        let mut last: Option<(u64, f64)> = None;
        let mut sorted: Vec<&Crossing> = self.crossings.iter().filter(|c| c.distance > 0).collect();
        sorted.sort_by_key(|c| c.distance);
        for c in sorted {
            match (last, c.t) {
                (Some((_, prev)), Some(t)) if t < prev => return false,
                // A nearer site that never crossed while a farther one did.
                (None, Some(_)) if self.crossed_before(c.distance) => return false,
                _ => {}
            }
            if let Some(t) = c.t {
                last = Some((c.distance, t));
            }
        }
        true
    }

    fn crossed_before(&self, distance: u64) -> bool {
        self.crossings.iter().any(|c| c.distance > 0 && c.distance < distance && c.t.is_none())
    }

    /// `a⁻¹ log(2‖A‖‖B‖‖F‖ / (C_a · threshold))` for single-site supports.
    pub fn margin(&self) -> Option<f64> {
        let m = self.margin_inputs;
        (m.a > 0.0).then(|| {
            (self.trivial_bound * m.f_norm_bare / (m.conv_constant * self.threshold)).ln() / m.a
        })
    }

    /// Every crossing time obeys `t ≥ (d − margin)/v − Δt`.
    pub fn crossing_time_violations(&self) -> Vec<ConeViolation> {
        let (Some(margin), v) = (self.margin(), self.theoretical_velocity) else {
            return Vec::new();
        };
        self.crossings
            .iter()
            .filter_map(|c| {
                let t = c.t?;
                let d = c.distance as f64;
                let earliest = if v > 0.0 {
                    (d - margin) / v
                } else if d > margin {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
                (t < earliest - self.time_step).then(|| ConeViolation {
                    distance: c.distance,
                    t,
                    detail: format!("crossing at t = {t:e} precedes the earliest allowed {earliest:e}"),
                })
            })
            .collect()
    }

    /// Cells where the measured norm leaves `[0, 2‖A‖‖B‖]` or exceeds either bound.
    pub fn dominance_violations(&self, tol: f64) -> Vec<ConeViolation> {
        let mut out = Vec::new();
        for c in &self.grid {
            let mut fail = |what: &str, bound: f64| {
                out.push(ConeViolation {
                    distance: c.distance,
                    t: c.t,
                    detail: format!("measured {:e} exceeds {what} {:e}", c.measured_norm, bound),
                })
            };
            if c.measured_norm > self.trivial_bound + tol {
                fail("the trivial bound", self.trivial_bound);
            }
            if c.measured_norm > c.bound_22 + tol {
                fail("bound_22", c.bound_22);
            }
            if let Some(b) = c.bound_24.filter(|&b| c.measured_norm > b + tol) {
                fail("bound_24", b);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    /// CSV with columns `distance,t,measured_norm,bound_22,bound_24`; an absent
    /// `bound_24` is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,t,measured_norm,bound_22,bound_24\n");
        for c in &self.grid {
            let b24 = c.bound_24.map(|b| format!("{b:.16e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e},{}", c.distance, c.t, c.measured_norm, c.bound_22, b24);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::{random, TOL_DERIVED};

    struct Setup {
        g: MetricGraph,
        f: DecayFunction,
        ev: BoundEvaluation,
        engine: DynamicsEngine,
    }

    fn setup(len: usize, j: f64, h: f64) -> Setup {
        let g = MetricGraph::chain(len);
        let model = Model::heisenberg(&g, j, h);
        let f = DecayFunction::new(1, 1.0, 1.0).unwrap();
        let ev = BoundEvaluation::certify(&model.interaction, &f, &g).unwrap();
        let ham = model.hamiltonian(&g, &g.all()).unwrap();
        let engine = DynamicsEngine::diagonalize(&ham.operator).unwrap();
        Setup { g, f, ev, engine }
    }

    #[test]
    fn localization_trivial_cases() {
        let s = setup(5, 1.0, 0.5);
        let a = Observable::pauli(1, 0).unwrap();
        let at_zero = localization_error(&s.engine, &a, 0.0, &[0, 1], &s.ev, &s.f, &s.g).unwrap();
        assert_eq!(at_zero.measured, 0.0);
        let whole = localization_error(&s.engine, &a, 0.7, &s.g.all(), &s.ev, &s.f, &s.g).unwrap();
        assert_eq!(whole.measured, 0.0);
        assert_eq!(whole.certified, 0.0);
        assert!(localization_error(&s.engine, &a, 0.1, &[1, 2], &s.ev, &s.f, &s.g).is_err());
    }

    #[test]
    fn localization_without_hopping() {
        let s = setup(4, 0.0, 0.8);
        let a = Observable::pauli(1, 0).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let e = localization_error(&s.engine, &a, t, &[0], &s.ev, &s.f, &s.g).unwrap();
            assert!(e.measured <= 1e-10);
        }
    }

    #[test]
    fn localization_certified() {
        let s = setup(6, 1.0, 0.5);
        let a = Observable::pauli(1, 0).unwrap();
        let balls: Vec<Vec<usize>> = (1..=3).map(|r| (0..=r).collect()).collect();
        let times = dynamics::time_grid(1.0, 11).unwrap();
        let profile =
            localization_profile(&s.engine, &a, &times, &balls, &s.ev, &s.f, &s.g, Execution::default()).unwrap();
        for row in &profile {
            for e in row {
                assert!(e.measured <= e.certified + TOL_DERIVED, "{e:?}");
            }
        }
    }

    /// `4^{-k} Σ_P P A P` over Pauli strings on the exterior sites.
    fn pauli_twirl(a: &Observable, exterior: &[usize], lambda: &[usize]) -> crate::CMatrix {
        let n = exterior.len() as u32;
        let mut acc = crate::CMatrix::zeros(a.dim(), a.dim());
        for code in 0..4usize.pow(n) {
            let mut p = Observable::identity(lambda.to_vec()).unwrap();
            for (i, &site) in exterior.iter().enumerate() {
                let k = (code >> (2 * i)) & 3;
                if k > 0 {
                    let factor = algebra::embed(&Observable::pauli(k, site).unwrap(), lambda).unwrap();
                    p = p.mul(&factor).unwrap();
                }
            }
            acc += p.matrix() * a.matrix() * p.matrix();
        }
        acc.unscale(4f64.powi(n as i32))
    }

    #[test]
    fn localization_matches_twirl() {
        let s = setup(5, 1.0, 0.5);
        let mut rng = random::rng(5);
        let a = random::hermitian_observable(&mut rng, vec![0]);
        let lambda = s.g.all();
        for t in [0.2, 0.9] {
            let evolved = s.engine.evolve(&a, t).unwrap();
            for r in 0..3 {
                let ball: Vec<usize> = (0..=r).collect();
                let exterior: Vec<usize> = (r + 1..5).collect();
                let twirled = Observable::new(pauli_twirl(&evolved, &exterior, &lambda), lambda.clone()).unwrap();
                let expected = twirled.sub(&evolved).unwrap().norm();
                let e = localization_error(&s.engine, &a, t, &ball, &s.ev, &s.f, &s.g).unwrap();
                assert!((e.measured - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn localization_lipschitz() {
        let s = setup(5, 1.0, 0.5);
        let mut rng = random::rng(11);
        let a = random::hermitian_observable(&mut rng, vec![0]);
        let dt = 1e-3;
        let times: Vec<f64> = (0..20).map(|k| k as f64 * dt).collect();
        let profile =
            localization_profile(&s.engine, &a, &times, &[vec![0, 1]], &s.ev, &s.f, &s.g, Execution::Sequential)
                .unwrap();
        let lipschitz = 4.0 * a.norm() * s.engine.hamiltonian().norm();
        for w in profile[0].windows(2) {
            assert!((w[1].measured - w[0].measured).abs() <= lipschitz * dt + TOL_DERIVED);
        }
    }

    #[test]
    fn scan_heisenberg_chain() {
        let s = setup(7, 1.0, 0.5);
        let a = Observable::pauli(3, 0).unwrap();
        let b = Observable::local(crate::algebra::pauli(3).unwrap(), 0).unwrap();
        let times = dynamics::time_grid(2.0, 41).unwrap();
        let distances: Vec<u64> = (1..=5).collect();
        let report =
            light_cone_scan(&s.engine, &a, &b, &distances, &times, 0.2, &s.ev, &s.f, &s.g, Execution::default())
                .unwrap();
        assert_eq!(report.grid.len(), 5 * 41);
        assert!(report.dominance_violations(TOL_DERIVED).is_empty());
        assert!(report.crossing_time_violations().is_empty());
        assert!(report.crossings_monotone());
        assert!(report.crossings[0].t.is_some());
        if let Some(v) = report.fitted_velocity {
            assert!(v <= report.theoretical_velocity);
        }
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 5 * 41);
        assert!(report.to_json().unwrap().contains("\"crossings\""));
    }

    #[test]
    fn scan_without_hopping() {
        let s = setup(5, 0.0, 0.5);
        let a = Observable::pauli(1, 0).unwrap();
        let b = Observable::pauli(1, 0).unwrap();
        let times = dynamics::time_grid(3.0, 7).unwrap();
        let report = light_cone_scan(&s.engine, &a, &b, &[1, 2, 3, 4], &times, 0.1, &s.ev, &s.f, &s.g, Execution::Sequential)
            .unwrap();
        assert!(report.crossings.iter().all(|c| c.t.is_none()));
        assert!(report.fitted_velocity.is_none());
        assert!(report.grid.iter().all(|c| c.measured_norm <= 1e-10));
    }

    #[test]
    fn scan_errors() {
        let s = setup(4, 1.0, 0.0);
        let a = Observable::pauli(3, 0).unwrap();
        let times = [0.0, 0.5];
        let run = |thr: f64, ts: &[f64]| {
            light_cone_scan(&s.engine, &a, &a, &[1], ts, thr, &s.ev, &s.f, &s.g, Execution::Sequential)
        };
        assert!(matches!(run(2.0, &times), Err(Error::Precondition(_))));
        assert!(matches!(run(0.0, &times), Err(Error::Precondition(_))));
        assert!(run(0.1, &[0.0]).is_err());
        assert!(run(0.1, &[0.5, 0.0]).is_err());
        assert!(light_cone_scan(&s.engine, &a, &a, &[9], &times, 0.1, &s.ev, &s.f, &s.g, Execution::Sequential).is_err());
    }

    #[test]
    fn interpolation() {
        assert_eq!(first_crossing(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.5], 1.0), Some(1.5));
        assert_eq!(first_crossing(&[0.0, 1.0], &[0.0, 0.5], 1.0), None);
        let crossings: Vec<Crossing> =
            (1..=4).map(|d| Crossing { distance: d, t: Some(0.5 * d as f64 + 0.1) }).collect();
        assert!((fit_velocity(&crossings).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_velocity(&crossings[..2]).is_none());
    }
}
