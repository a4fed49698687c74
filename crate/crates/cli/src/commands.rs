//! The four subcommands.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use lrkit_core::algebra::{self, Observable};
use lrkit_core::bounds::{self, BoundEvaluation, OptimalVelocity};
use lrkit_core::dynamics::{self, DynamicsEngine};
use lrkit_core::geometry;
use lrkit_core::model::ModelSpec;
use lrkit_core::quasilocality::{self, LightConeReport};
use lrkit_core::{random, Execution, TOL_DERIVED, TOL_GEOMETRY, TOL_ORACLE, TOL_UNITARY};
use rand::Rng;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, Format};
use crate::CliError;

const DEFAULT_OUT_DIR: &str = "lrkit-out";
/// Points in the short-time grid used by `verify`, where the bound is not saturated.
const ONSET_POINTS: usize = 16;
const ONSET_T_MAX: f64 = 2e-3;
const RANDOM_INSTANCES: usize = 5;
const LOCALIZATION_MAX_RADIUS: u64 = 3;
const LOCALIZATION_MAX_TIMES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Bound,
    Lightcone,
    Verify,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub allow_large: bool,
    pub exec: Execution,
}

/// Loads `config` and runs `command`; summaries go to `out`.
pub fn run(command: Command, config: &Path, opts: &RunOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    run_config(command, &cfg, opts, out)
}

pub fn run_config(
    command: Command,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    cfg.check_cap(opts.allow_large)?;
    let exp = cfg.resolve()?;
    let ctx = Context { cfg, exp, opts };
    match command {
        Command::Simulate => ctx.simulate(out),
        Command::Bound => ctx.bound(out),
        Command::Lightcone => ctx.lightcone(out),
        Command::Verify => ctx.verify(out),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    exp: Experiment,
    opts: &'a RunOptions,
}

#[derive(Debug, Clone, Serialize)]
struct SimulateCell {
    site: String,
    distance: u64,
    t: f64,
    measured_norm: f64,
    bound_22: f64,
    bound_24: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct BoundSummary {
    nu: usize,
    epsilon: f64,
    a: f64,
    phi_norm: f64,
    f_norm: f64,
    f_norm_lattice: f64,
    conv_constant_analytic: f64,
    conv_constant_empirical: f64,
    conv_constant_certified: f64,
    velocity: Option<f64>,
    a_interval: (f64, f64),
    optimal: OptimalVelocity,
    heisenberg_closed_form: Option<f64>,
    anharmonic_closed_form: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LightConeOutput<'r> {
    #[serde(flatten)]
    report: &'r LightConeReport,
    optimal_velocity: f64,
    crossings_monotone: bool,
    dominance_violations: usize,
    crossing_time_violations: usize,
}

#[derive(Debug, Clone)]
struct Check {
    name: &'static str,
    passed: bool,
    gating: bool,
    detail: String,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.opts.seed.unwrap_or(self.cfg.seed)
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self
            .opts
            .out_dir
            .clone()
            .or_else(|| self.cfg.outputs.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn wants(&self, format: Format) -> bool {
        self.cfg.outputs.formats.contains(&format)
    }

    fn engine(&self) -> Result<DynamicsEngine, CliError> {
        let g = &self.exp.graph;
        let ham = self.exp.model.hamiltonian(g, &g.all())?;
        Ok(DynamicsEngine::diagonalize(&ham.operator)?)
    }

    fn evaluation(&self) -> Result<BoundEvaluation, CliError> {
        let ev = BoundEvaluation::certify(&self.exp.model.interaction, &self.exp.decay, &self.exp.graph)?;
        Ok(ev.with_g_scale(self.cfg.test_hooks.g_scale))
    }

    /// Measured norms and both bounds for every probe site and time, ordered by site then time.
    fn grid(&self, engine: &DynamicsEngine, ev: &BoundEvaluation, times: &[f64]) -> Result<Vec<SimulateCell>, CliError> {
        let exp = &self.exp;
        let g = &exp.graph;
        let a = &exp.observable;
        let probes: Vec<Observable> = exp.probe_sites.iter().map(|&s| exp.probe_at(s)).collect();
        let norms = dynamics::commutator_norm_sweep(engine, a, &probes, times, self.opts.exec)?;
        let norm_b = probes[0].norm();
        let mut cells = Vec::with_capacity(probes.len() * times.len());
        for (k, &site) in exp.probe_sites.iter().enumerate() {
            let (x, y) = (a.support(), [site]);
            let disjoint = site != exp.origin();
            for (i, &t) in times.iter().enumerate() {
                let bound_24 = if disjoint && ev.a > 0.0 {
                    Some(ev.lr_bound_corollary(x, &y, g, a.norm(), norm_b, t)?)
                } else {
                    None
                };
                cells.push(SimulateCell {
                    site: g.site(site).to_string(),
                    distance: g.dist(exp.origin(), site),
                    t,
                    measured_norm: norms[k][i],
                    bound_22: ev.lr_bound(x, &y, &exp.decay, g, a.norm(), norm_b, t)?,
                    bound_24,
                });
            }
        }
        Ok(cells)
    }

    fn simulate(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let engine = self.engine()?;
        let ev = self.evaluation()?;
        let cells = self.grid(&engine, &ev, &self.exp.times)?;
        let dir = self.out_dir()?;
        if self.wants(Format::Csv) {
            let mut csv = String::from("site,distance,t,measured_norm,bound_22,bound_24\n");
            for c in &cells {
                let b24 = c.bound_24.map(|b| format!("{b:.16e}")).unwrap_or_default();
                let _ = writeln!(
                    csv,
                    "{},{},{:.16e},{:.16e},{:.16e},{}",
                    c.site, c.distance, c.t, c.measured_norm, c.bound_22, b24
                );
            }
            write_file(&dir.join("simulate.csv"), &csv, out)?;
        }
        if self.wants(Format::Json) {
            let json = serde_json::json!({ "bound": ev, "cells": cells });
            write_file(&dir.join("simulate.json"), &pretty(&json)?, out)?;
        }
        writeln!(out, "simulated {} cells", cells.len())?;
        Ok(())
    }

    fn bound_summary(&self) -> Result<BoundSummary, CliError> {
        let exp = &self.exp;
        let (g, f) = (&exp.graph, &exp.decay);
        let bare = f.bare();
        let ev = self.evaluation()?;
        let lattice = geometry::lattice_f_norm(g.dimension(), f.epsilon())?;
        let optimal = bounds::optimal_velocity(&exp.model.interaction, f, g, exp.a_interval)?;
        let heisenberg_closed_form = match self.cfg.model {
            ModelSpec::Heisenberg { j, .. } => {
                Some(bounds::heisenberg_velocity_bound(j.abs(), g.dimension(), f.epsilon(), lattice.value)?)
            }
            ModelSpec::Custom { .. } => None,
        };
        Ok(BoundSummary {
            nu: g.dimension(),
            epsilon: f.epsilon(),
            a: f.weight(),
            phi_norm: ev.phi_norm,
            f_norm: geometry::f_norm(&bare, g)?,
            f_norm_lattice: lattice.value,
            conv_constant_analytic: geometry::convolution_constant_analytic(&bare, g)?,
            conv_constant_empirical: geometry::convolution_constant_empirical(f, g)?,
            conv_constant_certified: ev.conv_constant,
            velocity: (f.weight() > 0.0).then(|| ev.velocity()).transpose()?,
            a_interval: exp.a_interval,
            optimal,
            heisenberg_closed_form,
            anharmonic_closed_form: bounds::anharmonic_velocity_bound(
                exp.model.interaction.max_term_norm(),
                g.dimension(),
                f.epsilon(),
                lattice.value,
            )?,
        })
    }

    fn bound(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let summary = self.bound_summary()?;
        let dir = self.out_dir()?;
        write_file(&dir.join("bound.json"), &pretty(&summary)?, out)?;
        writeln!(out, "phi_norm = {:.16e}", summary.phi_norm)?;
        writeln!(out, "optimal a = {:.6}, v = {:.10e}", summary.optimal.a, summary.optimal.velocity)?;
        Ok(())
    }

    fn light_cone_report(&self, engine: &DynamicsEngine, ev: &BoundEvaluation) -> Result<LightConeReport, CliError> {
        let exp = &self.exp;
        let g = &exp.graph;
        let origin = exp.origin();
        let template = exp.probe_at(origin);
        let distances = match &self.cfg.lightcone.distances {
            Some(d) => d.clone(),
            None => (1..=g.max_distance()).filter(|&d| !g.sites_at_distance(origin, d).is_empty()).collect(),
        };
        let threshold = self
            .cfg
            .lightcone
            .threshold
            .unwrap_or(0.1 * 2.0 * exp.observable.norm() * template.norm());
        Ok(quasilocality::light_cone_scan(
            engine,
            &exp.observable,
            &template,
            &distances,
            &exp.times,
            threshold,
            ev,
            &exp.decay,
            g,
            self.opts.exec,
        )?)
    }

    fn lightcone(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let engine = self.engine()?;
        let ev = self.evaluation()?;
        let report = self.light_cone_report(&engine, &ev)?;
        let optimal = bounds::optimal_velocity(&self.exp.model.interaction, &self.exp.decay, &self.exp.graph, self.exp.a_interval)?;
        let dominance = report.dominance_violations(TOL_DERIVED);
        let crossing = report.crossing_time_violations();
        let output = LightConeOutput {
            report: &report,
            optimal_velocity: optimal.velocity,
            crossings_monotone: report.crossings_monotone(),
            dominance_violations: dominance.len(),
            crossing_time_violations: crossing.len(),
        };
        let dir = self.out_dir()?;
        if self.wants(Format::Json) {
            write_file(&dir.join("lightcone.json"), &pretty(&output)?, out)?;
        }
        if self.wants(Format::Csv) {
            write_file(&dir.join("lightcone.csv"), &report.to_csv(), out)?;
        }
        let crossed = report.crossings.iter().filter(|c| c.t.is_some()).count();
        writeln!(out, "crossings: {crossed} of {}", report.crossings.len())?;
        match report.fitted_velocity {
            Some(v) => writeln!(out, "fitted velocity {v:.6} (optimal bound {:.6})", optimal.velocity)?,
            None => writeln!(out, "fitted velocity: fewer than three crossings")?,
        }
        if let Some(v) = dominance.first().or(crossing.first()) {
            return Err(CliError::Invariant(format!("distance {} t {}: {}", v.distance, v.t, v.detail)));
        }
        if let Some(v) = report.fitted_velocity.filter(|&v| v > optimal.velocity) {
            return Err(CliError::Invariant(format!("fitted velocity {v} exceeds the bound {}", optimal.velocity)));
        }
        Ok(())
    }

    fn verify(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let checks = self.checks()?;
        writeln!(out, "{:<34} {:<6} detail", "check", "result")?;
        for c in &checks {
            let status = match (c.passed, c.gating) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "info",
            };
            writeln!(out, "{:<34} {:<6} {}", c.name, status, c.detail)?;
        }
        let failed: Vec<&str> = checks.iter().filter(|c| c.gating && !c.passed).map(|c| c.name).collect();
        if failed.is_empty() {
            writeln!(out, "all {} checks passed", checks.iter().filter(|c| c.gating).count())?;
            Ok(())
        } else {
            Err(CliError::Invariant(failed.join(", ")))
        }
    }

    fn checks(&self) -> Result<Vec<Check>, CliError> {
        let exp = &self.exp;
        let (g, f) = (&exp.graph, &exp.decay);
        let mut rng = random::rng(self.seed());
        let mut checks = Vec::new();
        let mut push = |name, passed, gating, detail: String| checks.push(Check { name, passed, gating, detail });

        push("geometry.metric_axioms", g.metric_axioms_hold(&mut rng, 256), true, format!("{} sites", g.len()));
        let bare = f.bare();
        let empirical = geometry::convolution_constant_empirical(&bare, g)?;
        let analytic = geometry::convolution_constant_analytic(&bare, g)?;
        let certified = geometry::certified_convolution_constant(&bare)?;
        push(
            "geometry.convolution_constant",
            empirical <= analytic + TOL_GEOMETRY && analytic <= certified + TOL_GEOMETRY,
            true,
            format!("empirical {empirical:.6} analytic {analytic:.6} certified {certified:.6}"),
        );
        let lattice = geometry::lattice_f_norm(g.dimension(), f.epsilon())?;
        push("geometry.lattice_norm_tail", lattice.tail_bound < 1e-10, true, format!("tail bound {:e}", lattice.tail_bound));

        let ev = self.evaluation()?;
        if let ModelSpec::Heisenberg { j, .. } = self.cfg.model {
            let expected = f.weight().exp() * 2f64.powf(g.dimension() as f64 + f.epsilon()) * 3.0 * j.abs();
            let ok = if g.len() < 2 || j == 0.0 {
                ev.phi_norm == 0.0
            } else {
                (ev.phi_norm - expected).abs() <= 1e-10 * expected
            };
            push("model.interaction_norm", ok, true, format!("{:.12} vs {:.12}", ev.phi_norm, expected));
        }

        let engine = self.engine()?;
        let defect = engine.unitarity_defect();
        push("dynamics.unitarity", defect <= TOL_UNITARY, true, format!("{defect:e}"));
        let recon = engine.reconstruction_error();
        push("dynamics.reconstruction", recon <= TOL_UNITARY, true, format!("{recon:e}"));

        let lambda = engine.volume().to_vec();
        let (mut oracle, mut group, mut iso, mut auto) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..RANDOM_INSTANCES {
            let site = lambda[rng.gen_range(0..lambda.len())];
            let other = lambda[rng.gen_range(0..lambda.len())];
            let a = random::observable(&mut rng, vec![site]);
            let b = random::observable(&mut rng, vec![other]);
            let s = rng.gen_range(-1.0..1.0);
            let t = rng.gen_range(-1.0..1.0);
            let mut dt = 0.1;
            let taylor = loop {
                match dynamics::evolve_taylor(engine.hamiltonian(), &a, dt, 20) {
                    Ok(r) => break r,
                    Err(lrkit_core::Error::TaylorRemainder { .. }) => dt /= 2.0,
                    Err(e) => return Err(e.into()),
                }
            };
            oracle = oracle.max(engine.evolve(&a, dt)?.sub(&taylor.observable)?.norm());
            let two = engine.evolve(&engine.evolve(&a, s)?, t)?;
            group = group.max(two.sub(&engine.evolve(&a, s + t)?)?.norm());
            iso = iso.max((engine.evolve(&a, t)?.norm() - a.norm()).abs());
            let ab = algebra::embed(&a, &lambda)?.mul(&algebra::embed(&b, &lambda)?)?;
            let split = engine.evolve(&a, t)?.mul(&engine.evolve(&b, t)?)?;
            auto = auto.max(engine.evolve(&ab, t)?.sub(&split)?.norm());
        }
        push("dynamics.taylor_oracle", oracle <= TOL_ORACLE, true, format!("max deviation {oracle:e}"));
        push("dynamics.group_law", group <= TOL_DERIVED, true, format!("max deviation {group:e}"));
        push("dynamics.isometry", iso <= TOL_UNITARY, true, format!("max deviation {iso:e}"));
        push("dynamics.automorphism", auto <= TOL_DERIVED, true, format!("max deviation {auto:e}"));
        let h = engine.hamiltonian();
        let energy = exp.times.iter().map(|&t| engine.evolve(h, t).and_then(|e| e.sub(h)).map(|d| d.norm()));
        let energy = energy.collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max);
        push("dynamics.energy", energy <= TOL_UNITARY, true, format!("max deviation {energy:e}"));

        let onset = dynamics::time_grid(ONSET_T_MAX, ONSET_POINTS)?;
        for (name, times) in [("bounds.dominance", &exp.times), ("bounds.dominance_onset", &onset)] {
            let cells = self.grid(&engine, &ev, times)?;
            let trivial = 2.0 * exp.observable.norm() * exp.probe_at(exp.origin()).norm();
            let bad = cells.iter().filter(|c| {
                c.measured_norm > trivial + TOL_DERIVED
                    || (c.distance > 0 && c.measured_norm > c.bound_22 + TOL_DERIVED)
                    || c.bound_24.is_some_and(|b| c.measured_norm > b + TOL_DERIVED)
            });
            let bad = bad.count();
            push(name, bad == 0, true, format!("{bad} of {} cells violate", cells.len()));
        }

        let optimal = bounds::optimal_velocity(&exp.model.interaction, f, g, exp.a_interval)?;
        let mut detail = format!("v* = {:.6} at a = {:.6}", optimal.velocity, optimal.a);
        let mut ok = true;
        if let ModelSpec::Heisenberg { j, .. } = self.cfg.model {
            let closed = bounds::heisenberg_velocity_bound(j.abs(), g.dimension(), f.epsilon(), lattice.value)?;
            ok &= optimal.velocity <= closed + 1e-6;
            let _ = write!(detail, ", closed form {closed:.6}");
        }
        push("bounds.optimal_velocity", ok, true, detail);

        let origin = exp.origin();
        let radii: Vec<u64> = (1..=LOCALIZATION_MAX_RADIUS.min(g.max_distance().saturating_sub(1)))
            .filter(|&r| lambda.iter().any(|&s| g.dist(origin, s) > r))
            .collect();
        if !radii.is_empty() {
            let balls: Vec<Vec<usize>> = radii
                .iter()
                .map(|&r| lambda.iter().copied().filter(|&s| g.dist(origin, s) <= r).collect())
                .collect();
            let stride = exp.times.len().div_ceil(LOCALIZATION_MAX_TIMES);
            let times: Vec<f64> = exp.times.iter().copied().step_by(stride).collect();
            let profile = quasilocality::localization_profile(
                &engine,
                &exp.observable,
                &times,
                &balls,
                &ev,
                f,
                g,
                self.opts.exec,
            )?;
            let over = profile.iter().flatten().filter(|e| e.measured > e.certified + TOL_DERIVED).count();
            push(
                "quasilocality.certified",
                over == 0,
                true,
                format!("{over} of {} cells exceed the certificate", profile.len() * times.len()),
            );
            let rises = (1..profile.len())
                .flat_map(|k| (0..times.len()).map(move |i| (k, i)))
                .filter(|&(k, i)| profile[k][i].measured > profile[k - 1][i].measured + TOL_DERIVED)
                .count();
            push(
                "quasilocality.monotone_radius",
                rises == 0,
                false,
                format!("{rises} radius steps where the partial-trace error grows"),
            );
        }

        if exp.times.len() >= 2 && exp.times.windows(2).all(|w| w[1] > w[0]) {
            let report = self.light_cone_report(&engine, &ev)?;
            let n = report.crossing_time_violations().len();
            push("lightcone.crossing_time", n == 0, true, format!("{n} crossings precede the certified cone"));
        }
        Ok(checks)
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &str, out: &mut dyn Write) -> Result<(), CliError> {
    std::fs::write(path, contents)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}
