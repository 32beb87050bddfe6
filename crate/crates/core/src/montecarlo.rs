//! Survival-probability estimates, parameter sweeps and critical-value
//! brackets on finite boxes.
//!
//! Survival means "wild individuals still present at `t_max`" starting from a
//! single wild individual at the centre of the box. Trial `i` always uses
//! stream `i` of the relevant domain, so growing the number of trials or the
//! grid never reshuffles earlier trials, and results are reduced in trial
//! order so parallel and serial runs agree bitwise.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{wild_survives, DynamicsError, Params, Variant};
use crate::graphical::stream::{SharedStream, Tracker};
use crate::lattice::{Boundary, BoxGeometry, Configuration};
use crate::rng::{self, domain};
use crate::stats::{wilson_interval, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub trials: u64,
    pub survivals: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub t_max: f64,
    #[serde(rename = "box")]
    pub geometry: BoxGeometry,
    pub seed: u64,
}

impl SurvivalEstimate {
    pub fn from_counts(survivals: u64, trials: u64, t_max: f64, geometry: BoxGeometry, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(survivals, trials, Z95);
        let p_hat = if trials == 0 { 0.0 } else { survivals as f64 / trials as f64 };
        Self { trials, survivals, p_hat, ci_low, ci_high, t_max, geometry, seed }
    }

    pub fn from_indicators(indicators: &[bool], t_max: f64, geometry: BoxGeometry, seed: u64) -> Self {
        let s = indicators.iter().filter(|&&b| b).count() as u64;
        Self::from_counts(s, indicators.len() as u64, t_max, geometry, seed)
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    /// Whether the two 95% intervals intersect.
    pub fn overlaps(&self, other: &SurvivalEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }

    pub fn csv_row(&self, value: f64) -> String {
        format!("{value},{},{},{},{},{}", self.trials, self.survivals, self.p_hat, self.ci_low, self.ci_high)
    }
}

pub const SWEEP_CSV_HEADER: &str = "param_value,trials,survivals,p_hat,ci_low,ci_high";

/// Box, horizon, trial count and master seed of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settings {
    pub geometry: BoxGeometry,
    pub t_max: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Settings {
    /// Default box and horizon: side 200 and `t_max = 100` in d = 1, side
    /// 40 and `t_max = 50` in d = 2, side 12 and `t_max = 30` above.
    pub fn default_for(dimension: usize, trials: u64, seed: u64) -> Self {
        let (side, t_max) = match dimension {
            1 => (200, 100.0),
            2 => (40, 50.0),
            _ => (12, 30.0),
        };
        let geometry = BoxGeometry::new(dimension, side, Boundary::EmptyExterior).expect("positive side");
        Self { geometry, t_max, trials, seed }
    }
}

/// A single wild individual at the centre of the box.
pub fn origin_config(geometry: BoxGeometry) -> Configuration {
    Configuration::wild_on(geometry, [geometry.center()]).expect("centre lies in the box")
}

/// Survival indicators of trials `start..end` with Gillespie dynamics.
fn gillespie_indicators(config: &Configuration, p: &Params, s: &Settings, start: u64, end: u64) -> Result<Vec<bool>, DynamicsError> {
    (start..end)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(s.seed, domain::SURVIVAL, i);
            wild_survives(config, p, s.t_max, &mut g)
        })
        .collect()
}

pub fn estimate_survival(p: &Params, s: &Settings) -> Result<SurvivalEstimate, DynamicsError> {
    estimate_survival_from(&origin_config(s.geometry), p, s)
}

pub fn estimate_survival_from(config: &Configuration, p: &Params, s: &Settings) -> Result<SurvivalEstimate, DynamicsError> {
    p.validate()?;
    if p.dimension != s.geometry.dimension {
        return Err(DynamicsError::DimensionMismatch { params: p.dimension, geometry: s.geometry.dimension });
    }
    let ind = gillespie_indicators(config, p, s, 0, s.trials)?;
    Ok(SurvivalEstimate::from_indicators(&ind, s.t_max, s.geometry, s.seed))
}

/// Survival indicators of several parameter sets driven by one mark stream
/// per trial. `caps` fixes the superposition rates `(λ_cap, r_cap)`; runs
/// with equal caps and seeds are coupled even across calls.
fn coupled_indicators(
    config: &Configuration,
    params: &[Params],
    caps: (f64, f64),
    s: &Settings,
    stream_domain: u64,
    trials: std::ops::Range<u64>,
) -> Vec<Vec<bool>> {
    let stream = SharedStream::with_caps(s.geometry, caps.0, caps.1);
    trials
        .into_par_iter()
        .map(|i| {
            let mut trackers: Vec<Tracker> = params.iter().map(|p| Tracker::new(config, *p)).collect();
            let mut g = rng::stream(s.seed, stream_domain, i);
            stream.run(&mut trackers, s.t_max, &mut g, |_, _| {});
            trackers.iter().map(|k| k.wild_count() > 0).collect()
        })
        .collect()
}

fn caps_of(params: &[Params]) -> (f64, f64) {
    params.iter().fold((0.0f64, 0.0f64), |(l, r), p| (l.max(p.lambda1), r.max(p.r)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledSweep {
    pub grid: Vec<f64>,
    pub estimates: Vec<SurvivalEstimate>,
    /// Trials whose indicator sequence along the grid goes from 0 back to 1
    /// in the direction where the coupling promises monotonicity.
    pub order_violations: u64,
    /// `indicators[trial][point]`
    pub indicators: Vec<Vec<bool>>,
}

/// r-sweep with one mark stream per trial shared by every grid point.
/// Releases are sampled at rate `max(grid)` and thinned per point, so the
/// indicators of each trial are non-increasing along an ascending grid.
pub fn coupled_r_sweep(grid: &[f64], template: &Params, s: &Settings) -> Result<CoupledSweep, DynamicsError> {
    sweep_param(SweepParam::R, grid, template, s, &origin_config(s.geometry))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    R,
    Lambda1,
    Lambda2,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::R => "r",
            SweepParam::Lambda1 => "lambda1",
            SweepParam::Lambda2 => "lambda2",
        }
    }

    pub fn apply(self, p: &Params, value: f64) -> Params {
        let mut q = *p;
        match self {
            SweepParam::R => q.r = value,
            SweepParam::Lambda1 => q.lambda1 = value,
            SweepParam::Lambda2 => q.lambda2 = value,
        }
        q
    }

    /// +1 if survival increases with the parameter, −1 if it decreases.
    fn direction(self) -> i8 {
        if self == SweepParam::R { -1 } else { 1 }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r" => Ok(SweepParam::R),
            "lambda1" => Ok(SweepParam::Lambda1),
            "lambda2" => Ok(SweepParam::Lambda2),
            other => Err(format!("unknown sweep parameter {other:?}; expected r, lambda1 or lambda2")),
        }
    }
}

/// One survival estimate per grid value of `param`, all grid points sharing
/// one mark stream per trial.
pub fn sweep_param(
    param: SweepParam,
    grid: &[f64],
    template: &Params,
    s: &Settings,
    config: &Configuration,
) -> Result<CoupledSweep, DynamicsError> {
    let params: Vec<Params> = grid.iter().map(|&v| param.apply(template, v)).collect();
    for p in &params {
        p.validate()?;
        if p.dimension != s.geometry.dimension {
            return Err(DynamicsError::DimensionMismatch { params: p.dimension, geometry: s.geometry.dimension });
        }
    }
    let indicators = coupled_indicators(config, &params, caps_of(&params), s, domain::SWEEP, 0..s.trials);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut order_violations = 0;
    for row in &indicators {
        let seq: Vec<bool> = order.iter().map(|&i| row[i]).collect();
        let bad = seq.windows(2).any(|w| match param.direction() {
            -1 => !w[0] && w[1],
            _ => w[0] && !w[1],
        });
        order_violations += bad as u64;
    }
    let estimates = (0..grid.len())
        .map(|j| {
            let col: Vec<bool> = indicators.iter().map(|row| row[j]).collect();
            SurvivalEstimate::from_indicators(&col, s.t_max, s.geometry, s.seed)
        })
        .collect();
    Ok(CoupledSweep { grid: grid.to_vec(), estimates, order_violations, indicators })
}

/// Number of mark-stream events at which some site holds wild individuals
/// in the asymmetric process but not in the symmetric one.
pub fn variant_domination_violations(p: &Params, s: &Settings) -> u64 {
    let config = origin_config(s.geometry);
    let asym = p.with_variant(Variant::Asymmetric);
    let sym = p.with_variant(Variant::Symmetric);
    let stream = SharedStream::new(s.geometry, [&asym, &sym]);
    (0..s.trials)
        .into_par_iter()
        .map(|i| {
            let mut ks = vec![Tracker::new(&config, asym), Tracker::new(&config, sym)];
            let mut bad = 0u64;
            let mut g = rng::stream(s.seed, domain::COUPLED, i);
            stream.run(&mut ks, s.t_max, &mut g, |_, ks| {
                let (a, b) = (ks[0].states(), ks[1].states());
                if a.iter().zip(b).any(|(x, y)| x.is_wild() && !y.is_wild()) {
                    bad += 1;
                }
            });
            bad
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSettings {
    /// Stop once `r_high − r_low` is at most this.
    pub resolution: f64,
    /// Fraction of the `r = 0` estimate used as threshold.
    pub threshold_fraction: f64,
    /// Trials per sequential batch.
    pub batch: u64,
    /// Fix the initial bracket `[0, r_max]`; found by doubling from 1 if unset.
    pub r_max: Option<f64>,
    /// Largest `r` tried while doubling.
    pub r_limit: f64,
    /// `p̂(0)` below this flags the run as subcritical at `r = 0`.
    pub subcritical_level: f64,
}

impl Default for CriticalSettings {
    fn default() -> Self {
        Self { resolution: 0.25, threshold_fraction: 0.5, batch: 100, r_max: None, r_limit: 1024.0, subcritical_level: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
    /// All trials used without the interval excluding the threshold; sided
    /// by the point estimate.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub r: f64,
    pub estimate: SurvivalEstimate,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalEstimate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub variant: Variant,
    pub r_low: f64,
    pub r_high: f64,
    pub target_resolution: f64,
    pub threshold: f64,
    pub baseline: SurvivalEstimate,
    pub subcritical_at_zero: bool,
    pub points: Vec<CriticalPoint>,
    pub warnings: Vec<String>,
}

impl CriticalEstimate {
    pub fn is_finite_bracket(&self) -> bool {
        self.r_high.is_finite() && self.r_low < self.r_high
    }
}

/// Sequential test of `p̂(r)` against `theta`, batch by batch, with the
/// release clock capped at `r_cap` so runs at different `r` are coupled.
fn side_at(
    p: &Params,
    r_cap: f64,
    theta: f64,
    s: &Settings,
    cs: &CriticalSettings,
    config: &Configuration,
) -> CriticalPoint {
    let caps = (p.lambda1, r_cap);
    let mut ind: Vec<bool> = Vec::new();
    let batch = cs.batch.max(1);
    let mut start = 0;
    loop {
        let end = (start + batch).min(s.trials);
        let rows = coupled_indicators(config, std::slice::from_ref(p), caps, s, domain::CRITICAL, start..end);
        ind.extend(rows.into_iter().map(|r| r[0]));
        start = end;
        let est = SurvivalEstimate::from_indicators(&ind, s.t_max, s.geometry, s.seed);
        let side = if est.ci_low > theta {
            Some(Side::Above)
        } else if est.ci_high < theta {
            Some(Side::Below)
        } else {
            None
        };
        if let Some(side) = side {
            return CriticalPoint { r: p.r, estimate: est, side };
        }
        if start >= s.trials {
            return CriticalPoint { r: p.r, estimate: est, side: Side::Undecided };
        }
    }
}

fn is_above(pt: &CriticalPoint, theta: f64) -> bool {
    match pt.side {
        Side::Above => true,
        Side::Below => false,
        Side::Undecided => pt.estimate.p_hat >= theta,
    }
}

/// Bracket of the release rate where the survival proxy crosses
/// `threshold_fraction · p̂(0)`.
pub fn estimate_rc(
    lambda1: f64,
    lambda2: f64,
    variant: Variant,
    s: &Settings,
    cs: &CriticalSettings,
) -> Result<CriticalEstimate, DynamicsError> {
    let base = Params::new(lambda1, lambda2, 0.0, s.geometry.dimension, variant)?;
    let config = origin_config(s.geometry);
    let rows = coupled_indicators(&config, &[base], (lambda1, 0.0), s, domain::CRITICAL, 0..s.trials);
    let ind: Vec<bool> = rows.into_iter().map(|r| r[0]).collect();
    let baseline = SurvivalEstimate::from_indicators(&ind, s.t_max, s.geometry, s.seed);
    let threshold = cs.threshold_fraction * baseline.p_hat;
    let mut out = CriticalEstimate {
        lambda1,
        lambda2,
        variant,
        r_low: 0.0,
        r_high: f64::INFINITY,
        target_resolution: cs.resolution,
        threshold,
        baseline,
        subcritical_at_zero: false,
        points: Vec::new(),
        warnings: Vec::new(),
    };
    if baseline.p_hat < cs.subcritical_level {
        out.subcritical_at_zero = true;
        out.r_high = 0.0;
        out.warnings.push(format!("subcritical at r=0: p_hat(0) = {} < {}", baseline.p_hat, cs.subcritical_level));
        return Ok(out);
    }
    let mut r_high = match cs.r_max {
        Some(r) => r,
        None => {
            let mut r = 1.0;
            loop {
                let pt = side_at(&base.with_r(r), r, threshold, s, cs, &config);
                let above = is_above(&pt, threshold);
                out.points.push(pt);
                if !above {
                    break r;
                }
                if r >= cs.r_limit {
                    out.warnings.push(format!("survival proxy above threshold up to r = {r}"));
                    return Ok(out);
                }
                out.r_low = r;
                r *= 2.0;
            }
        }
    };
    let r_cap = r_high;
    let mut r_low = out.r_low;
    if cs.r_max.is_some() {
        let pt = side_at(&base.with_r(r_high), r_cap, threshold, s, cs, &config);
        if is_above(&pt, threshold) {
            out.warnings.push(format!("survival proxy above threshold at r_max = {r_high}"));
            out.points.push(pt);
            return Ok(out);
        }
        out.points.push(pt);
        r_low = 0.0;
    }
    while r_high - r_low > cs.resolution {
        let mid = 0.5 * (r_low + r_high);
        let pt = side_at(&base.with_r(mid), r_cap, threshold, s, cs, &config);
        if is_above(&pt, threshold) {
            r_low = mid;
        } else {
            r_high = mid;
        }
        out.points.push(pt);
    }
    out.r_low = r_low;
    out.r_high = r_high;
    // profile sorted by r: a later point significantly above an earlier one
    let mut profile: Vec<&CriticalPoint> = out.points.iter().collect();
    profile.sort_by(|a, b| a.r.total_cmp(&b.r));
    for w in profile.windows(2) {
        if w[1].estimate.ci_low > w[0].estimate.ci_high {
            let listing: Vec<String> = profile.iter().map(|p| format!("{}:{:.4}", p.r, p.estimate.p_hat)).collect();
            out.warnings.push(format!("non-monotone survival profile: {}", listing.join(" ")));
            break;
        }
    }
    Ok(out)
}
