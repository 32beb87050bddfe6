//! One-dimensional contact process in a frozen random environment of
//! slowed-down sites, its extinction and survival criteria, and a simulator
//! with site-dependent birth rates.
//!
//! A site is slowed down with probability `p = r/(r+1)`. In the vertex form
//! the growth rate out of site `k` is `λ1` or `λ2` according to `ω(k)`; in
//! the edge form the rightward rate into `k` and the leftward rate into `k`
//! are drawn independently with the same law.

use std::f64::consts::SQRT_2;

use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Boundary, BoxGeometry};
use crate::montecarlo::SurvivalEstimate;
use crate::rate::{decimal_rational, Rate};
use crate::rng::{self, domain};
use crate::sumtree::SumTree;

/// `1 + √2`.
pub const LAMBDA_C_UPPER: f64 = 1.0 + SQRT_2;

#[derive(Debug, Error)]
pub enum QuenchedError {
    #[error("environment has {env} sites but the box has {sites}")]
    EnvironmentMismatch { env: usize, sites: usize },
    #[error("quenched simulation is one-dimensional, got dimension {0}")]
    Dimension(usize),
    #[error("invalid rate {name} = {value}")]
    InvalidRate { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchedEnvironment {
    /// `1` marks a slowed-down site.
    pub omega: Vec<u8>,
    pub p: f64,
    /// Index of site 0 in `omega`.
    pub origin_offset: i64,
}

impl QuenchedEnvironment {
    pub fn slowed_fraction(&self) -> f64 {
        self.omega.iter().map(|&w| w as f64).sum::<f64>() / self.omega.len().max(1) as f64
    }
}

/// i.i.d. Bernoulli(`r/(r+1)`) environment on `n_sites` sites, centred.
pub fn sample_environment<G: Rng + ?Sized>(n_sites: usize, r: f64, rng: &mut G) -> QuenchedEnvironment {
    let p = r / (r + 1.0);
    let omega = (0..n_sites).map(|_| (rng.random::<f64>() < p) as u8).collect();
    QuenchedEnvironment { omega, p, origin_offset: (n_sites / 2) as i64 }
}

fn rate_of(w: u8, lambda1: f64, lambda2: f64) -> f64 {
    if w == 0 { lambda1 } else { lambda2 }
}

/// Site-dependent birth rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum EnvironmentRates {
    /// `growth[k]`: rate of births out of site `k`, in both directions.
    Vertex { growth: Vec<f64> },
    /// `rightward[k]`: rate of births from `k−1` into `k`;
    /// `leftward[k]`: rate of births from `k+1` into `k`.
    Edge { rightward: Vec<f64>, leftward: Vec<f64> },
}

impl EnvironmentRates {
    pub fn vertex(env: &QuenchedEnvironment, lambda1: f64, lambda2: f64) -> Self {
        EnvironmentRates::Vertex { growth: env.omega.iter().map(|&w| rate_of(w, lambda1, lambda2)).collect() }
    }

    /// Edge form from two independent environments, one per direction.
    pub fn edge(right: &QuenchedEnvironment, left: &QuenchedEnvironment, lambda1: f64, lambda2: f64) -> Self {
        EnvironmentRates::Edge {
            rightward: right.omega.iter().map(|&w| rate_of(w, lambda1, lambda2)).collect(),
            leftward: left.omega.iter().map(|&w| rate_of(w, lambda1, lambda2)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EnvironmentRates::Vertex { growth } => growth.len(),
            EnvironmentRates::Edge { rightward, .. } => rightward.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            EnvironmentRates::Vertex { growth } => growth.clone(),
            EnvironmentRates::Edge { rightward, leftward } => rightward.iter().chain(leftward).copied().collect(),
        }
    }

    /// Rates of births into `x` from its left and right neighbours.
    fn incoming(&self, x: usize) -> (f64, f64) {
        match self {
            EnvironmentRates::Vertex { growth } => {
                let left = if x > 0 { growth[x - 1] } else { 0.0 };
                let right = growth.get(x + 1).copied().unwrap_or(0.0);
                (left, right)
            }
            EnvironmentRates::Edge { rightward, leftward } => (rightward[x], leftward[x]),
        }
    }
}

/// Outcome of a closed-form criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Criterion {
    pub applicable: bool,
    pub holds: bool,
    pub threshold: Option<f64>,
}

impl Criterion {
    fn not_applicable() -> Self {
        Self { applicable: false, holds: false, threshold: None }
    }
}

/// Vertex form, i.i.d. environment: extinction when `E log λ_v(0) < 0`,
/// i.e. `λ2 < 1` and `r > −log λ1 / log λ2`.
pub fn cpre_extinct_vertex(lambda1: f64, lambda2: f64, r: f64) -> Result<Criterion, QuenchedError> {
    positive("lambda1", lambda1)?;
    positive("lambda2", lambda2)?;
    if lambda2 >= 1.0 {
        return Ok(Criterion::not_applicable());
    }
    let threshold = -lambda1.ln() / lambda2.ln();
    Ok(Criterion { applicable: true, holds: r > threshold, threshold: Some(threshold) })
}

/// `E log λ_v(0) = (log λ1 + r·log λ2)/(r+1)`.
pub fn expected_log_growth(lambda1: f64, lambda2: f64, r: f64) -> f64 {
    (lambda1.ln() + r * lambda2.ln()) / (r + 1.0)
}

fn positive(name: &'static str, value: f64) -> Result<(), QuenchedError> {
    if value > 0.0 && value.is_finite() { Ok(()) } else { Err(QuenchedError::InvalidRate { name, value }) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeCriterion {
    pub criterion: Criterion,
    /// Quadratic in `r` whose sign decides the second moment condition.
    pub polynomial: f64,
    /// The closed form and the polynomial agree.
    pub consistent: bool,
}

/// `2r²(1−λ2)/λ2 + r((2−λ2)/λ1 + (2−λ1)/λ2 − 2) + 2(1−λ1)/λ1`.
pub fn edge_extinction_polynomial(lambda1: f64, lambda2: f64, r: f64) -> f64 {
    2.0 * r * r * (1.0 - lambda2) / lambda2
        + r * ((2.0 - lambda2) / lambda1 + (2.0 - lambda1) / lambda2 - 2.0)
        + 2.0 * (1.0 - lambda1) / lambda1
}

/// Edge form: extinction when `E λ_e < 1` and
/// `1 − E(1/λ_e) < E(1/λ_e)(1 − E λ_e)`, i.e. `λ2 < 1` and
/// `r > (λ1 − 1)/(1 − λ2)`.
pub fn cpre_extinct_edge(lambda1: f64, lambda2: f64, r: f64) -> Result<EdgeCriterion, QuenchedError> {
    positive("lambda1", lambda1)?;
    positive("lambda2", lambda2)?;
    let polynomial = edge_extinction_polynomial(lambda1, lambda2, r);
    if lambda2 >= 1.0 {
        return Ok(EdgeCriterion { criterion: Criterion::not_applicable(), polynomial, consistent: true });
    }
    let threshold = edge_extinction_threshold(lambda1, lambda2);
    let holds = r > threshold;
    // the mean condition implies the second one
    let consistent = !holds || polynomial > 0.0;
    Ok(EdgeCriterion { criterion: Criterion { applicable: true, holds, threshold: Some(threshold) }, polynomial, consistent })
}

/// `(λ1 − 1)/(1 − λ2)` on the decimal values of the rates, rounded once.
fn edge_extinction_threshold(lambda1: f64, lambda2: f64) -> f64 {
    let one = BigRational::one();
    let q = (decimal_rational(lambda1) - one.clone()) / (one - decimal_rational(lambda2));
    Rate::to_f64(&q)
}

/// `r²[λ1²(2λ2+1) − λ1²λ2²] + rλ1λ2[2(λ1+λ2+1) − 2λ1λ2] + [λ2²(2λ1+1) − λ1²λ2²]`.
pub fn edge_survival_polynomial(lambda1: f64, lambda2: f64, r: f64) -> f64 {
    let (a, b) = (lambda1, lambda2);
    r * r * (a * a * (2.0 * b + 1.0) - a * a * b * b) + r * a * b * (2.0 * (a + b + 1.0) - 2.0 * a * b) + (b * b * (2.0 * a + 1.0) - a * a * b * b)
}

/// Edge form: survival when `E(1/λ_e)·(E[(λ_e+ρ_e+1)/(λ_e ρ_e)])^j < 1` for
/// all `j`, i.e. `λ1 > 1+√2`, `λ2 < 1+√2` and
/// `r < λ2(λ1 − √2 − 1)/(λ1(√2 + 1 − λ2))`.
pub fn cpre_survive_edge(lambda1: f64, lambda2: f64, r: f64) -> Result<EdgeCriterion, QuenchedError> {
    positive("lambda1", lambda1)?;
    positive("lambda2", lambda2)?;
    let polynomial = edge_survival_polynomial(lambda1, lambda2, r);
    if lambda1 <= LAMBDA_C_UPPER || lambda2 >= LAMBDA_C_UPPER {
        return Ok(EdgeCriterion { criterion: Criterion::not_applicable(), polynomial, consistent: true });
    }
    let threshold = lambda2 * (lambda1 - LAMBDA_C_UPPER) / (lambda1 * (LAMBDA_C_UPPER - lambda2));
    let holds = r < threshold;
    let consistent = holds == (polynomial < 0.0) || polynomial.abs() < 1e-9 * (1.0 + lambda1 * lambda1 * lambda2 * lambda2);
    Ok(EdgeCriterion { criterion: Criterion { applicable: true, holds, threshold: Some(threshold) }, polynomial, consistent })
}

/// Upper bound on the critical rate of the one-dimensional contact process:
/// at `r = 0` the edge survival criterion needs only `λ1 > 1 + √2`.
pub fn lambda_c_upper_bound() -> f64 {
    LAMBDA_C_UPPER
}

/// Deterministic birth-rate sequence on `Z`: explicit values on a window,
/// optionally continued periodically on each side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSequence {
    /// `values[i]` is the rate at site `start + i`.
    pub values: Vec<f64>,
    pub start: i64,
    /// Repeated to the right of the window, first entry at `start + len`.
    pub right_period: Option<Vec<f64>>,
    /// Repeated to the left of the window, first entry at `start − 1`.
    pub left_period: Option<Vec<f64>>,
}

impl RateSequence {
    pub fn window(values: Vec<f64>, start: i64) -> Self {
        Self { values, start, right_period: None, left_period: None }
    }

    /// Two-sided periodic sequence with `period[0]` at site 0.
    pub fn periodic(period: Vec<f64>, periods_in_window: usize) -> Self {
        let values: Vec<f64> = period.iter().copied().cycle().take(period.len() * periods_in_window).collect();
        let mut left: Vec<f64> = period.clone();
        left.reverse();
        Self { values, start: 0, right_period: Some(period), left_period: Some(left) }
    }

    pub fn is_eventually_periodic(&self) -> bool {
        self.right_period.is_some() && self.left_period.is_some()
    }

    fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    /// Rate at `k`, if defined.
    pub fn at(&self, k: i64) -> Option<f64> {
        if k >= self.start && k < self.end() {
            return Some(self.values[(k - self.start) as usize]);
        }
        if k >= self.end() {
            let per = self.right_period.as_ref()?;
            return Some(per[((k - self.end()) as usize) % per.len()]);
        }
        let per = self.left_period.as_ref()?;
        Some(per[((self.start - 1 - k) as usize) % per.len()])
    }

    /// The same sequence read right to left: `λ'(k) = λ(−k)`.
    fn mirrored(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values, start: -(self.end() - 1), right_period: self.left_period.clone(), left_period: self.right_period.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    /// Closed-form evaluation of the tail.
    Exact,
    /// Ratio test on the terms inside a finite window.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    pub n: i64,
    /// Sum if finite (exact) or partial sum inside the window (heuristic).
    pub value: f64,
    /// Per-step geometric rate of the tail.
    pub rate: f64,
    pub converges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostic {
    pub exactness: Exactness,
    pub right: Vec<SeriesSum>,
    pub left: Vec<SeriesSum>,
    /// Every listed sum converges: extinction by the criterion.
    pub extinct_by_criterion: bool,
}

/// `Σ_{k ≥ n} Π_{j=n}^{k} λ(j+1)`.
fn right_sum(seq: &RateSequence, n: i64) -> SeriesSum {
    let mut prod = 1.0;
    let mut sum = 0.0;
    match &seq.right_period {
        Some(per) => {
            // walk until the factor index enters the periodic tail at phase 0
            let mut i = n + 1;
            while i < seq.end() {
                prod *= seq.at(i).unwrap_or(0.0);
                sum += prod;
                i += 1;
            }
            let period_product: f64 = per.iter().product();
            let rate = period_product.powf(1.0 / per.len() as f64);
            if period_product >= 1.0 && prod > 0.0 {
                return SeriesSum { n, value: f64::INFINITY, rate, converges: false };
            }
            let mut head = 0.0;
            let mut running = 1.0;
            for &x in per {
                running *= x;
                head += running;
            }
            let tail = if prod == 0.0 { 0.0 } else { prod * head / (1.0 - period_product) };
            SeriesSum { n, value: sum + tail, rate, converges: true }
        }
        None => {
            let mut terms = Vec::new();
            let mut i = n + 1;
            while i < seq.end() {
                prod *= seq.values[(i - seq.start) as usize];
                terms.push(prod);
                sum += prod;
                i += 1;
            }
            // geometric rate fitted on the second half of the window
            let m = terms.len();
            let rate = if m >= 2 {
                let a = m / 2;
                let (lo, hi) = (terms[a.min(m - 1)], terms[m - 1]);
                if lo > 0.0 && m - 1 > a { (hi / lo).powf(1.0 / (m - 1 - a) as f64) } else { 0.0 }
            } else {
                f64::NAN
            };
            SeriesSum { n, value: sum, rate, converges: rate < 1.0 }
        }
    }
}

/// Inhomogeneous extinction criterion: for every `n`,
/// `Σ_{k≥n} Π_{j=n}^k λ(j+1) < ∞` and `Σ_{k≤n} Π_{j=k}^n λ(j−1) < ∞`,
/// evaluated for each `n` in `window`.
pub fn cpie_extinct_vertex_series(seq: &RateSequence, window: std::ops::Range<i64>) -> SeriesDiagnostic {
    let mirror = seq.mirrored();
    let right: Vec<SeriesSum> = window.clone().map(|n| right_sum(seq, n)).collect();
    let left: Vec<SeriesSum> = window
        .map(|n| {
            let s = right_sum(&mirror, -n);
            SeriesSum { n, ..s }
        })
        .collect();
    let extinct = right.iter().chain(&left).all(|s| s.converges);
    let exactness = if seq.is_eventually_periodic() { Exactness::Exact } else { Exactness::Heuristic };
    SeriesDiagnostic { exactness, right, left, extinct_by_criterion: extinct }
}

/// `(1/λ_v(j)) Π_{k=1}^{j} (λ_v(k) + λ_v(k−1) + 1)/(λ_v(k) λ_v(k−1))`.
fn survival_term(rates: &[f64], j: usize) -> f64 {
    let mut prod = 1.0 / rates[j];
    for k in 1..=j {
        prod *= (rates[k] + rates[k - 1] + 1.0) / (rates[k] * rates[k - 1]);
    }
    prod
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexSurvivalSeries {
    /// Monte Carlo estimates of the expectation terms, `j = 0..=j_max`.
    pub terms: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Mean ratio of consecutive Monte Carlo terms over the second half.
    pub ratio_trend: f64,
    /// Heuristic verdict from `ratio_trend < 1`.
    pub survives_heuristic: bool,
    /// Terms computed exactly from the two-state transfer matrix.
    pub exact_terms: Vec<f64>,
    /// Spectral radius of the transfer matrix; the series converges iff it
    /// is below 1.
    pub spectral_radius: f64,
    pub survives_exact: bool,
}

/// Expectation terms of the vertex survival series by sampling
/// environments, with the exact two-state transfer-matrix values alongside.
pub fn cpre_survive_vertex_series(lambda1: f64, lambda2: f64, r: f64, j_max: usize, samples: usize, seed: u64) -> Result<VertexSurvivalSeries, QuenchedError> {
    positive("lambda1", lambda1)?;
    positive("lambda2", lambda2)?;
    let p = r / (r + 1.0);
    let per_sample: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, domain::ENVIRONMENT, i);
            let rates: Vec<f64> = (0..=j_max).map(|_| if g.random::<f64>() < p { lambda2 } else { lambda1 }).collect();
            (0..=j_max).map(|j| survival_term(&rates, j)).collect()
        })
        .collect();
    let n = samples.max(1) as f64;
    let mut terms = vec![0.0; j_max + 1];
    let mut sq = vec![0.0; j_max + 1];
    for row in &per_sample {
        for j in 0..=j_max {
            terms[j] += row[j];
            sq[j] += row[j] * row[j];
        }
    }
    let std_errors: Vec<f64> = (0..=j_max)
        .map(|j| {
            let m = terms[j] / n;
            ((sq[j] / n - m * m).max(0.0) / n).sqrt()
        })
        .collect();
    terms.iter_mut().for_each(|t| *t /= n);
    let partial_sums: Vec<f64> = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let half = (j_max + 1) / 2;
    let ratios: Vec<f64> = (half.max(1)..=j_max).map(|j| terms[j] / terms[j - 1]).collect();
    let ratio_trend = if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };

    // transfer matrix over the rate of the current site
    let states = [(lambda1, 1.0 - p), (lambda2, p)];
    let f = |a: f64, b: f64| (a + b + 1.0) / (a * b);
    let mut m = nalgebra::Matrix2::zeros();
    for (i, &(a, _)) in states.iter().enumerate() {
        for (k, &(b, pb)) in states.iter().enumerate() {
            m[(i, k)] = f(b, a) * pb;
        }
    }
    let mut weights = nalgebra::RowVector2::new(states[0].1, states[1].1);
    let g = nalgebra::Vector2::new(1.0 / lambda1, 1.0 / lambda2);
    let mut exact_terms = Vec::with_capacity(j_max + 1);
    for _ in 0..=j_max {
        exact_terms.push((weights * g)[0]);
        weights *= m;
    }
    let spectral_radius = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(VertexSurvivalSeries {
        terms,
        std_errors,
        partial_sums,
        ratio_trend,
        survives_heuristic: ratio_trend < 1.0,
        exact_terms,
        spectral_radius,
        survives_exact: spectral_radius < 1.0,
    })
}

/// Two-decimal truncation.
pub fn truncate2(x: f64) -> f64 {
    if x.is_finite() { (x * 100.0 + 1e-9).floor() / 100.0 } else { x }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Edge-survival threshold, 0 when not applicable.
    pub lower: f64,
    /// Edge-extinction threshold, infinite when not applicable.
    pub upper: f64,
    pub lower_applicable: bool,
    pub upper_applicable: bool,
}

impl BoundsRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.lambda1, self.lambda2, self.lower, self.upper, self.lower_applicable, self.upper_applicable)
    }
}

pub const BOUNDS_CSV_HEADER: &str = "lambda1,lambda2,lower,upper,lower_applicable,upper_applicable";

/// Release-rate interval containing the phase transition for each
/// `(λ1, λ2)`.
pub fn phase_bounds_table(rows: &[(f64, f64)]) -> Result<Vec<BoundsRow>, QuenchedError> {
    rows.iter()
        .map(|&(l1, l2)| {
            let s = cpre_survive_edge(l1, l2, 0.0)?.criterion;
            let e = cpre_extinct_edge(l1, l2, 0.0)?.criterion;
            Ok(BoundsRow {
                lambda1: l1,
                lambda2: l2,
                lower: s.threshold.unwrap_or(0.0),
                upper: e.threshold.unwrap_or(f64::INFINITY),
                lower_applicable: s.applicable,
                upper_applicable: e.applicable,
            })
        })
        .collect()
}

/// Published table: `(λ1, λ2, lower, upper)`.
pub const PUBLISHED_BOUNDS: [(f64, f64, f64, f64); 8] = [
    (1000.0, 0.8, 0.49, 4995.0),
    (100.0, 0.8, 0.48, 495.0),
    (10.0, 0.8, 0.36, 45.0),
    (2.0, 0.8, 0.0, 5.0),
    (1000.0, 1.4, 1.37, f64::INFINITY),
    (100.0, 1.4, 1.34, f64::INFINITY),
    (10.0, 1.4, 1.04, f64::INFINITY),
    (2.0, 1.4, 0.0, f64::INFINITY),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub lambda1: f64,
    pub lambda2: f64,
    /// "lower" or "upper".
    pub bound: &'static str,
    pub computed: f64,
    pub truncated: f64,
    pub published: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableVerification {
    pub rows: Vec<BoundsRow>,
    pub cells: Vec<TableCell>,
    pub discrepancies: Vec<TableCell>,
}

/// Recompute the published table and compare each cell after truncation.
pub fn verify_published_table() -> TableVerification {
    let pairs: Vec<(f64, f64)> = PUBLISHED_BOUNDS.iter().map(|r| (r.0, r.1)).collect();
    let rows = phase_bounds_table(&pairs).expect("published rates are positive");
    let mut cells = Vec::new();
    for (row, published) in rows.iter().zip(PUBLISHED_BOUNDS) {
        for (bound, computed, printed) in [("lower", row.lower, published.2), ("upper", row.upper, published.3)] {
            let truncated = truncate2(computed);
            cells.push(TableCell {
                lambda1: row.lambda1,
                lambda2: row.lambda2,
                bound,
                computed,
                truncated,
                published: printed,
                matches: truncated == printed,
            });
        }
    }
    let discrepancies = cells.iter().filter(|c| !c.matches).cloned().collect();
    TableVerification { rows, cells, discrepancies }
}

/// Two-state contact process on a segment with site-dependent birth rates
/// and deaths at rate 1. Sites outside the segment stay empty.
pub struct InhomogeneousContact<'a> {
    rates: &'a EnvironmentRates,
    occupied: Vec<bool>,
    tree: SumTree,
    count: usize,
    time: f64,
}

impl<'a> InhomogeneousContact<'a> {
    pub fn new(rates: &'a EnvironmentRates, initial: &[usize]) -> Self {
        let n = rates.len();
        let mut occupied = vec![false; n];
        for &x in initial {
            occupied[x] = true;
        }
        let mut s = Self { rates, occupied, tree: SumTree::new(n), count: initial.len(), time: 0.0 };
        for x in 0..n {
            s.refresh(x);
        }
        s
    }

    fn site_rate(&self, x: usize) -> f64 {
        if self.occupied[x] {
            return 1.0;
        }
        let (from_left, from_right) = self.rates.incoming(x);
        let mut q = 0.0;
        if x > 0 && self.occupied[x - 1] {
            q += from_left;
        }
        if x + 1 < self.occupied.len() && self.occupied[x + 1] {
            q += from_right;
        }
        q
    }

    fn refresh(&mut self, x: usize) {
        let q = self.site_rate(x);
        self.tree.set(x, q);
    }

    pub fn occupied_count(&self) -> usize {
        self.count
    }

    /// One flip; `false` once past `t_max` or absorbed.
    pub fn step<G: Rng + ?Sized>(&mut self, rng: &mut G, t_max: f64) -> bool {
        let total = self.tree.total();
        if total <= 0.0 {
            return false;
        }
        let e: f64 = Exp1.sample(rng);
        self.time += e / total;
        if self.time > t_max {
            return false;
        }
        let x = self.tree.find(rng.random::<f64>() * total);
        self.occupied[x] = !self.occupied[x];
        if self.occupied[x] {
            self.count += 1;
        } else {
            self.count -= 1;
        }
        self.refresh(x);
        if x > 0 {
            self.refresh(x - 1);
        }
        if x + 1 < self.occupied.len() {
            self.refresh(x + 1);
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentForm {
    Vertex,
    Edge,
}

/// Survival proxy for the contact process in the given environment: the
/// fraction of trials with occupied sites at `t_max`, started from the
/// centre of the segment.
pub fn simulate_cpre(rates: &EnvironmentRates, geometry: BoxGeometry, t_max: f64, trials: u64, seed: u64) -> Result<SurvivalEstimate, QuenchedError> {
    if geometry.dimension != 1 {
        return Err(QuenchedError::Dimension(geometry.dimension));
    }
    if rates.len() != geometry.sites() {
        return Err(QuenchedError::EnvironmentMismatch { env: rates.len(), sites: geometry.sites() });
    }
    for v in rates.values() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(QuenchedError::InvalidRate { name: "environment", value: v });
        }
    }
    let origin = geometry.center();
    let survived: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, domain::QUENCHED, i);
            let mut sim = InhomogeneousContact::new(rates, &[origin]);
            while sim.occupied_count() > 0 && sim.step(&mut g, t_max) {}
            sim.occupied_count() > 0
        })
        .collect();
    Ok(SurvivalEstimate::from_indicators(&survived, t_max, geometry, seed))
}

/// Sample an environment of the requested form on a segment and simulate.
pub fn simulate_random_environment(
    form: EnvironmentForm,
    lambda1: f64,
    lambda2: f64,
    r: f64,
    side: usize,
    t_max: f64,
    trials: u64,
    seed: u64,
) -> Result<(EnvironmentRates, SurvivalEstimate), QuenchedError> {
    let geometry = BoxGeometry::new(1, side, Boundary::EmptyExterior).map_err(|_| QuenchedError::EnvironmentMismatch { env: 0, sites: side })?;
    let mut g = rng::stream(seed, domain::ENVIRONMENT, u64::MAX);
    let rates = match form {
        EnvironmentForm::Vertex => EnvironmentRates::vertex(&sample_environment(side, r, &mut g), lambda1, lambda2),
        EnvironmentForm::Edge => {
            let right = sample_environment(side, r, &mut g);
            let left = sample_environment(side, r, &mut g);
            EnvironmentRates::edge(&right, &left, lambda1, lambda2)
        }
    };
    let est = simulate_cpre(&rates, geometry, t_max, trials, seed)?;
    Ok((rates, est))
}
