//! Interactions, local Hamiltonians and the weighted interaction norm.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::algebra::{self, Observable};
use crate::error::{domain, Result};
use crate::geometry::{DecayFunction, MetricGraph, Site};
use crate::linalg;
use crate::{CMatrix, C64};

const HERMITIAN_TOL: f64 = 1e-12;

/// Finite map from site sets to hermitian terms. Zero terms are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Interaction {
    terms: BTreeMap<Vec<usize>, Observable>,
    range: Option<f64>,
}

impl Interaction {
    /// Collects terms, summing contributions on the same site set and dropping
    /// terms that vanish.
    pub fn new(terms: Vec<Observable>, range: Option<f64>, g: &MetricGraph) -> Result<Self> {
        if let Some(r) = range {
            if !(r > 0.0) {
                return Err(domain(format!("interaction range must be positive, got {r}")));
            }
        }
        let mut map: BTreeMap<Vec<usize>, Observable> = BTreeMap::new();
        for t in terms {
            if t.support().is_empty() {
                return Err(domain("interaction term with empty support"));
            }
            if let Some(&bad) = t.support().iter().find(|&&s| s >= g.len()) {
                return Err(domain(format!("interaction term on unknown site index {bad}")));
            }
            if !t.is_hermitian(HERMITIAN_TOL) {
                return Err(domain(format!("interaction term on {:?} is not hermitian", t.support())));
            }
            if let Some(r) = range {
                let diam = g.diameter(t.support()) as f64;
                if diam > r {
                    return Err(domain(format!(
                        "term on {:?} has diameter {diam} beyond the declared range {r}",
                        t.support()
                    )));
                }
            }
            match map.get_mut(t.support()) {
                Some(existing) => *existing = existing.sub(&t.scaled(C64::new(-1.0, 0.0)))?,
                None => {
                    map.insert(t.support().to_vec(), t);
                }
            }
        }
        map.retain(|_, t| t.max_abs() > 0.0);
        Ok(Self { terms: map, range })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Observable> {
        self.terms.values()
    }

    pub fn term(&self, support: &[usize]) -> Option<&Observable> {
        self.terms.get(support)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn range(&self) -> Option<f64> {
        self.range
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|_| factor != 0.0)
            .map(|(k, t)| (k.clone(), t.scaled(C64::new(factor, 0.0))))
            .collect();
        Self { terms, range: self.range }
    }

    /// `max_X ‖Φ(X)‖`.
    pub fn max_term_norm(&self) -> f64 {
        self.terms().map(Observable::norm).fold(0.0, f64::max)
    }
}

/// A single-site Hamiltonian `H_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnSiteTerm {
    site: usize,
    matrix: Observable,
}

impl OnSiteTerm {
    pub fn new(site: usize, matrix: CMatrix) -> Result<Self> {
        let matrix = Observable::local(matrix, site)?;
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(domain(format!("on-site term at site {site} is not hermitian")));
        }
        Ok(Self { site, matrix })
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn observable(&self) -> &Observable {
        &self.matrix
    }
}

/// The exchange term `S^1⊗S^1 + S^2⊗S^2 + S^3⊗S^3`.
pub fn exchange() -> CMatrix {
    (1..=3)
        .map(|k| {
            let p = algebra::pauli(k).expect("valid pauli index");
            p.kronecker(&p)
        })
        .fold(CMatrix::zeros(4, 4), |acc, m| acc + m)
}

/// `J (S^1_x S^1_y + S^2_x S^2_y + S^3_x S^3_y)` on every nearest-neighbour pair.
pub fn heisenberg_interaction(g: &MetricGraph, j: f64) -> Interaction {
    if j == 0.0 {
        return Interaction { terms: BTreeMap::new(), range: Some(1.0) };
    }
    let term = exchange() * C64::new(j, 0.0);
    let mut terms = BTreeMap::new();
    for x in 0..g.len() {
        for y in x + 1..g.len() {
            if g.dist(x, y) == 1 {
                let obs = Observable::new(term.clone(), vec![x, y]).expect("4x4 on two sites");
                terms.insert(vec![x, y], obs);
            }
        }
    }
    Interaction { terms, range: Some(1.0) }
}

/// `h S^3` on every site; empty when `h = 0`.
pub fn heisenberg_onsite(g: &MetricGraph, h: f64) -> Vec<OnSiteTerm> {
    if h == 0.0 {
        return Vec::new();
    }
    let m = algebra::pauli(3).expect("valid pauli index") * C64::new(h, 0.0);
    (0..g.len())
        .map(|x| OnSiteTerm::new(x, m.clone()).expect("hermitian"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalHamiltonian {
    pub operator: Observable,
    /// On-site terms whose site lies outside the volume; they were not added.
    pub skipped_onsite: Vec<usize>,
}

/// `H_Λ = Σ_{x∈Λ} H_x + Σ_{X⊆Λ} Φ(X)` with open boundary conditions.
pub fn build_hamiltonian(
    g: &MetricGraph,
    onsite: &[OnSiteTerm],
    phi: &Interaction,
    lambda: &[usize],
) -> Result<LocalHamiltonian> {
    algebra::check_volume(lambda, "volume")?;
    if let Some(&bad) = lambda.iter().find(|&&s| s >= g.len()) {
        return Err(domain(format!("volume contains unknown site index {bad}")));
    }
    let dim = 1usize << lambda.len();
    let mut h = CMatrix::zeros(dim, dim);
    let one = C64::new(1.0, 0.0);
    let mut skipped_onsite = Vec::new();
    for term in onsite {
        if lambda.binary_search(&term.site).is_err() {
            skipped_onsite.push(term.site);
            continue;
        }
        let layout = algebra::layout_in(&[term.site], lambda)?;
        linalg::add_embedded(&mut h, term.matrix.matrix(), &layout, one);
    }
    for term in phi.terms() {
        if term.support().iter().all(|s| lambda.binary_search(s).is_ok()) {
            let layout = algebra::layout_in(term.support(), lambda)?;
            linalg::add_embedded(&mut h, term.matrix(), &layout, one);
        }
    }
    Ok(LocalHamiltonian { operator: Observable::new(h, lambda.to_vec())?, skipped_onsite })
}

/// Largest pair sum `Σ_{X ∋ x,y} ‖Φ(X)‖` at each distance `d(x, y)`.
///
/// `F_a` depends on the pair only through its distance, so this is all that is
/// needed to evaluate `‖Φ‖_a` for any weight.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionProfile {
    by_distance: Vec<(u64, f64)>,
}

impl InteractionProfile {
    pub fn new(phi: &Interaction, g: &MetricGraph) -> Result<Self> {
        let mut pairs: HashMap<(usize, usize), f64> = HashMap::new();
        for term in phi.terms() {
            if let Some(&bad) = term.support().iter().find(|&&s| s >= g.len()) {
                return Err(domain(format!("interaction term on unknown site index {bad}")));
            }
            let w = term.norm();
            for &x in term.support() {
                for &y in term.support() {
                    *pairs.entry((x, y)).or_insert(0.0) += w;
                }
            }
        }
        let mut best: BTreeMap<u64, f64> = BTreeMap::new();
        for ((x, y), sum) in pairs {
            let slot = best.entry(g.dist(x, y)).or_insert(0.0);
            *slot = slot.max(sum);
        }
        Ok(Self { by_distance: best.into_iter().collect() })
    }

    /// `‖Φ‖_a` for the weight carried by `f`.
    pub fn norm(&self, f: &DecayFunction) -> f64 {
        self.by_distance
            .iter()
            .map(|&(d, sum)| sum / f.eval(d as f64))
            .fold(0.0, f64::max)
    }

    /// Distance of the pair attaining `‖Φ‖_a`, if any term exists.
    pub fn argmax_distance(&self, f: &DecayFunction) -> Option<u64> {
        self.by_distance
            .iter()
            .map(|&(d, sum)| (d, sum / f.eval(d as f64)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(d, _)| d)
    }
}

/// `‖Φ‖_a = max_{x,y} F_a(d(x,y))^{-1} Σ_{X ∋ x,y} ‖Φ(X)‖` over the graph.
pub fn interaction_norm(phi: &Interaction, f: &DecayFunction, g: &MetricGraph) -> Result<f64> {
    Ok(InteractionProfile::new(phi, g)?.norm(f))
}

/// A complete model: on-site terms plus an interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub onsite: Vec<OnSiteTerm>,
    pub interaction: Interaction,
}

impl Model {
    pub fn heisenberg(g: &MetricGraph, j: f64, h: f64) -> Self {
        Self { onsite: heisenberg_onsite(g, h), interaction: heisenberg_interaction(g, j) }
    }

    pub fn hamiltonian(&self, g: &MetricGraph, lambda: &[usize]) -> Result<LocalHamiltonian> {
        build_hamiltonian(g, &self.onsite, &self.interaction, lambda)
    }
}

/// A complex matrix in configuration files: row-major `[re, im]` pairs, either
/// flat or nested by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Flat(Vec<[f64; 2]>),
    Rows(Vec<Vec<[f64; 2]>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let flat: Vec<[f64; 2]> = match self {
            MatrixSpec::Flat(v) => v.clone(),
            MatrixSpec::Rows(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(domain("matrix rows must all have the same length as the row count"));
                }
                rows.concat()
            }
        };
        let n = (flat.len() as f64).sqrt().round() as usize;
        if n * n != flat.len() || n == 0 {
            return Err(domain(format!("matrix with {} entries is not square", flat.len())));
        }
        let entries: Vec<C64> = flat.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        Ok(CMatrix::from_row_slice(n, n, &entries))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Site coordinates in canonical order; the matrix factors follow this order.
    pub sites: Vec<Vec<i64>>,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnSiteSpec {
    pub site: Vec<i64>,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Heisenberg {
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        h: f64,
    },
    Custom {
        terms: Vec<TermSpec>,
        #[serde(default)]
        onsite: Vec<OnSiteSpec>,
        #[serde(default)]
        range: Option<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self, g: &MetricGraph) -> Result<Model> {
        match self {
            ModelSpec::Heisenberg { j, h } => Ok(Model::heisenberg(g, *j, *h)),
            ModelSpec::Custom { terms, onsite, range } => {
                let lookup = |coords: &Vec<i64>| {
                    g.index_of(&Site(coords.clone()))
                        .ok_or_else(|| domain(format!("site {coords:?} is not in the graph")))
                };
                let mut obs = Vec::with_capacity(terms.len());
                for t in terms {
                    let support = t.sites.iter().map(lookup).collect::<Result<Vec<_>>>()?;
                    algebra::check_volume(&support, "term sites (canonical order)")?;
                    obs.push(Observable::new(t.matrix.to_matrix()?, support)?);
                }
                let onsite = onsite
                    .iter()
                    .map(|o| OnSiteTerm::new(lookup(&o.site)?, o.matrix.to_matrix()?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model { onsite, interaction: Interaction::new(obs, *range, g)? })
            }
        }
    }

    /// The model with its on-site part replaced by a field of strength `h`
    /// along `S^3` (Heisenberg) or scaled by `h` (custom).
    pub fn with_field(&self, h: f64) -> ModelSpec {
        match self {
            ModelSpec::Heisenberg { j, .. } => ModelSpec::Heisenberg { j: *j, h },
            ModelSpec::Custom { terms, onsite, range } => ModelSpec::Custom {
                terms: terms.clone(),
                onsite: onsite
                    .iter()
                    .map(|o| {
                        let scaled = match &o.matrix {
                            MatrixSpec::Flat(v) => MatrixSpec::Flat(v.iter().map(|[a, b]| [a * h, b * h]).collect()),
                            MatrixSpec::Rows(r) => MatrixSpec::Rows(
                                r.iter().map(|row| row.iter().map(|[a, b]| [a * h, b * h]).collect()).collect(),
                            ),
                        };
                        OnSiteSpec { site: o.site.clone(), matrix: scaled }
                    })
                    .collect(),
                range: *range,
            },
        }
    }
}
