//! Exact continuous-time simulation of the four-state process.
//!
//! Per-site flip rates:
//!
//! | from | to | rate |
//! |------|----|------|
//! | 1 | 0 | 1 |
//! | 2 | 0 | 1 |
//! | 0 | 1 | `λ1·n1 + λ2·n3` |
//! | 3 | 1 | 1 |
//! | 0 | 2 | `r` |
//! | 3 | 2 | 1 |
//! | 1 | 3 | `r` |
//! | 2 | 3 | `λ1·n1 + λ2·n3` (symmetric variant only) |

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{wild_set, Configuration, LatticeError, SiteState};
use crate::rate::Rate;
use crate::sumtree::SumTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Births onto sterile-only sites allowed (`2 -> 3`).
    Symmetric,
    /// Sterile-only sites block births.
    Asymmetric,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Symmetric => "symmetric",
            Variant::Asymmetric => "asymmetric",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = ParamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" | "sym" => Ok(Variant::Symmetric),
            "asymmetric" | "asym" => Ok(Variant::Asymmetric),
            other => Err(ParamError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must be finite and non-negative, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("lambda2 = {lambda2} exceeds lambda1 = {lambda1}; the model needs lambda2 <= lambda1 (slowed individuals breed no faster)")]
    Lambda2ExceedsLambda1 { lambda1: f64, lambda2: f64 },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Birth rate from a wild-only site.
    pub lambda1: f64,
    /// Birth rate from a site that also holds sterile individuals.
    pub lambda2: f64,
    /// Sterile release rate.
    pub r: f64,
    pub dimension: usize,
    pub variant: Variant,
}

impl Params {
    pub fn new(lambda1: f64, lambda2: f64, r: f64, dimension: usize, variant: Variant) -> Result<Self, ParamError> {
        let p = Self { lambda1, lambda2, r, dimension, variant };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("r", self.r)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ParamError::InvalidRate { name, value });
            }
        }
        if self.lambda2 > self.lambda1 {
            return Err(ParamError::Lambda2ExceedsLambda1 { lambda1: self.lambda1, lambda2: self.lambda2 });
        }
        if self.dimension == 0 {
            return Err(ParamError::ZeroDimension);
        }
        Ok(())
    }

    /// `λ2 = λ1` is accepted for testing, but slowdowns then have no effect.
    pub fn is_degenerate(&self) -> bool {
        self.lambda2 == self.lambda1
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Probability that an arrow out of a mixed site is effective.
    pub fn thinning_ratio(&self) -> f64 {
        if self.lambda1 > 0.0 {
            self.lambda2 / self.lambda1
        } else {
            0.0
        }
    }
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("parameters are for dimension {params} but the box has dimension {geometry}")]
    DimensionMismatch { params: usize, geometry: usize },
    #[error("total rate is zero: configuration is absorbing")]
    Absorbing,
    #[error("malformed trajectory: {0}")]
    Parse(String),
}

/// Birth pressure `λ1·n1 + λ2·n3`.
pub fn birth_rate<R: Rate>(n1: u32, n3: u32, lambda1: &R, lambda2: &R) -> R {
    R::from_count(n1) * lambda1.clone() + R::from_count(n3) * lambda2.clone()
}

/// The (at most two) possible flips of a site, zero rates included.
pub fn local_rates<R: Rate>(
    state: SiteState,
    n1: u32,
    n3: u32,
    lambda1: &R,
    lambda2: &R,
    r: &R,
    variant: Variant,
) -> [(SiteState, R); 2] {
    use SiteState::*;
    match state {
        Empty => [(Wild, birth_rate(n1, n3, lambda1, lambda2)), (Sterile, r.clone())],
        Wild => [(Empty, R::one()), (Mixed, r.clone())],
        Sterile => {
            let birth = match variant {
                Variant::Symmetric => birth_rate(n1, n3, lambda1, lambda2),
                Variant::Asymmetric => R::zero(),
            };
            [(Empty, R::one()), (Mixed, birth)]
        }
        Mixed => [(Wild, R::one()), (Sterile, R::one())],
    }
}

fn check_dimension(config: &Configuration, p: &Params) -> Result<(), DynamicsError> {
    let g = config.geometry().dimension;
    if g != p.dimension {
        return Err(DynamicsError::DimensionMismatch { params: p.dimension, geometry: g });
    }
    Ok(())
}

/// Nonzero transitions available at `x`.
pub fn transition_rates(config: &Configuration, x: usize, p: &Params) -> Result<Vec<(SiteState, f64)>, DynamicsError> {
    let (n1, n3) = crate::lattice::neighbor_counts(config, x)?;
    let state = config.get(x)?;
    Ok(local_rates(state, n1, n3, &p.lambda1, &p.lambda2, &p.r, p.variant)
        .into_iter()
        .filter(|(_, rate)| *rate > 0.0)
        .collect())
}

pub fn total_rate(config: &Configuration, p: &Params) -> Result<f64, DynamicsError> {
    let mut total = 0.0;
    for x in 0..config.len() {
        total += transition_rates(config, x, p)?.iter().map(|(_, q)| q).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub site: usize,
    pub old: SiteState,
    pub new: SiteState,
}

/// Incremental Gillespie simulator. Only the flipped site and its
/// neighbours have their rates recomputed after an event.
#[derive(Debug, Clone)]
pub struct Engine {
    config: Configuration,
    params: Params,
    neighbors: Vec<Option<usize>>,
    degree: usize,
    n1: Vec<u32>,
    n3: Vec<u32>,
    tree: SumTree,
    time: f64,
    wild: usize,
}

impl Engine {
    pub fn new(config: Configuration, params: Params) -> Result<Self, DynamicsError> {
        params.validate()?;
        check_dimension(&config, &params)?;
        let g = *config.geometry();
        let neighbors = g.neighbor_table();
        let degree = g.degree();
        let n = config.len();
        let mut n1 = vec![0; n];
        let mut n3 = vec![0; n];
        for x in 0..n {
            for slot in &neighbors[x * degree..(x + 1) * degree] {
                match slot.map(|y| config.at(y)) {
                    Some(SiteState::Wild) => n1[x] += 1,
                    Some(SiteState::Mixed) => n3[x] += 1,
                    _ => {}
                }
            }
        }
        let wild = config.wild_count();
        let mut engine = Self { config, params, neighbors, degree, n1, n3, tree: SumTree::new(n), time: 0.0, wild };
        let weights: Vec<f64> = (0..n).map(|x| engine.site_total(x)).collect();
        engine.tree = SumTree::from_weights(&weights);
        Ok(engine)
    }

    fn rates_at(&self, x: usize) -> [(SiteState, f64); 2] {
        let p = &self.params;
        local_rates(self.config.at(x), self.n1[x], self.n3[x], &p.lambda1, &p.lambda2, &p.r, p.variant)
    }

    fn site_total(&self, x: usize) -> f64 {
        let [(_, a), (_, b)] = self.rates_at(x);
        a + b
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn wild_count(&self) -> usize {
        self.wild
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    fn flip(&mut self, x: usize, new: SiteState) -> SiteState {
        let old = self.config.at(x);
        self.config.put(x, new);
        self.wild = self.wild + new.is_wild() as usize - old.is_wild() as usize;
        let dn1 = (new == SiteState::Wild) as i32 - (old == SiteState::Wild) as i32;
        let dn3 = (new == SiteState::Mixed) as i32 - (old == SiteState::Mixed) as i32;
        self.tree.set(x, self.site_total(x));
        if dn1 != 0 || dn3 != 0 {
            for k in 0..self.degree {
                if let Some(y) = self.neighbors[x * self.degree + k] {
                    self.n1[y] = (self.n1[y] as i32 + dn1) as u32;
                    self.n3[y] = (self.n3[y] as i32 + dn3) as u32;
                    self.tree.set(y, self.site_total(y));
                }
            }
        }
        old
    }

    /// Advance by one event unless it would fall after `t_max`; in that case
    /// the clock is set to `t_max` and `None` is returned.
    pub fn step<G: Rng + ?Sized>(&mut self, rng: &mut G, t_max: f64) -> Option<Event> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        let e: f64 = Exp1.sample(rng);
        let t = self.time + e / total;
        if t > t_max {
            self.time = t_max;
            return None;
        }
        self.time = t;
        let u = rng.random::<f64>() * total;
        let x = self.tree.find(u);
        let [(s0, q0), (s1, q1)] = self.rates_at(x);
        let v = rng.random::<f64>() * (q0 + q1);
        let new = if (v < q0 && q0 > 0.0) || q1 <= 0.0 { s0 } else { s1 };
        let old = self.flip(x, new);
        Some(Event { time: t, site: x, old, new })
    }
}

/// One Gillespie step on a standalone configuration.
pub fn gillespie_step<G: Rng + ?Sized>(
    config: &Configuration,
    p: &Params,
    rng: &mut G,
) -> Result<(Configuration, f64), DynamicsError> {
    let mut engine = Engine::new(config.clone(), *p)?;
    if engine.total_rate() <= 0.0 {
        return Err(DynamicsError::Absorbing);
    }
    let ev = engine.step(rng, f64::INFINITY).ok_or(DynamicsError::Absorbing)?;
    Ok((engine.into_config(), ev.time))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub terminal: Configuration,
    pub terminal_time: f64,
    /// Stopped because the total rate vanished.
    pub absorbed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub seed: u64,
    pub params: Params,
    pub terminal_time: f64,
    pub events: usize,
    pub wild_count: usize,
    pub wild_extinct: bool,
}

impl Trajectory {
    pub fn wild_extinct(&self) -> bool {
        self.terminal.wild_count() == 0
    }

    pub fn terminal_wild_set(&self) -> BTreeSet<usize> {
        wild_set(&self.terminal)
    }

    /// Configuration right after all events with time `<= t`.
    pub fn state_at(&self, t: f64) -> Configuration {
        let mut c = self.initial.clone();
        for ev in self.events.iter().take_while(|e| e.time <= t) {
            c.put(ev.site, ev.new);
        }
        c
    }

    /// Fold the event list over the initial configuration, checking that
    /// each recorded old state matches. Equal times are accepted because
    /// hand-built schedules may contain simultaneous marks.
    pub fn replay(&self) -> Result<Configuration, DynamicsError> {
        let mut c = self.initial.clone();
        let mut last = f64::NEG_INFINITY;
        for (i, ev) in self.events.iter().enumerate() {
            if ev.time < last {
                return Err(DynamicsError::Parse(format!("event {i} precedes its predecessor")));
            }
            last = ev.time;
            let prev = c.set(ev.site, ev.new)?;
            if prev != ev.old || ev.old == ev.new {
                return Err(DynamicsError::Parse(format!("event {i} inconsistent with replayed state")));
            }
        }
        Ok(c)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,site,old,new\n");
        for e in &self.events {
            let _ = writeln!(out, "{:?},{},{},{}", e.time, e.site, e.old, e.new);
        }
        out
    }

    pub fn parse_events(csv: &str) -> Result<Vec<Event>, DynamicsError> {
        let mut events = Vec::new();
        for line in csv.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(DynamicsError::Parse(format!("bad row `{line}`")));
            }
            let bad = |_| DynamicsError::Parse(format!("bad row `{line}`"));
            let code = |s: &str| -> Result<SiteState, DynamicsError> {
                let c: u8 = s.trim().parse().map_err(|_| DynamicsError::Parse(format!("bad state `{s}`")))?;
                Ok(SiteState::from_code(c)?)
            };
            events.push(Event {
                time: f[0].trim().parse().map_err(bad)?,
                site: f[1].trim().parse().map_err(|_| DynamicsError::Parse(format!("bad site in `{line}`")))?,
                old: code(f[2])?,
                new: code(f[3])?,
            });
        }
        Ok(events)
    }

    pub fn summary(&self, seed: u64, params: Params) -> TrajectorySummary {
        TrajectorySummary {
            seed,
            params,
            terminal_time: self.terminal_time,
            events: self.events.len(),
            wild_count: self.terminal.wild_count(),
            wild_extinct: self.wild_extinct(),
        }
    }
}

/// Run until `t_max`, absorption, or (if requested) extinction of the wild
/// population, recording every event.
pub fn simulate<G: Rng + ?Sized>(
    config0: &Configuration,
    p: &Params,
    t_max: f64,
    rng: &mut G,
    stop_on_wild_extinction: bool,
) -> Result<Trajectory, DynamicsError> {
    let mut engine = Engine::new(config0.clone(), *p)?;
    let mut events = Vec::new();
    loop {
        if stop_on_wild_extinction && engine.wild_count() == 0 {
            break;
        }
        match engine.step(rng, t_max) {
            Some(ev) => events.push(ev),
            None => break,
        }
    }
    let absorbed = engine.total_rate() <= 0.0;
    let terminal_time = engine.time();
    Ok(Trajectory { initial: config0.clone(), events, terminal: engine.into_config(), terminal_time, absorbed })
}

/// Whether the wild population is still present at `t_max`, without
/// recording events.
pub fn wild_survives<G: Rng + ?Sized>(
    config0: &Configuration,
    p: &Params,
    t_max: f64,
    rng: &mut G,
) -> Result<bool, DynamicsError> {
    let mut engine = Engine::new(config0.clone(), *p)?;
    while engine.wild_count() > 0 {
        if engine.step(rng, t_max).is_none() {
            break;
        }
    }
    Ok(engine.wild_count() > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, BoxGeometry};
    use crate::rng;
    use proptest::prelude::*;

    fn params(l1: f64, l2: f64, r: f64, variant: Variant) -> Params {
        Params::new(l1, l2, r, 1, variant).unwrap()
    }

    fn line(codes: &[u8]) -> Configuration {
        let g = BoxGeometry::new(1, codes.len(), Boundary::EmptyExterior).unwrap();
        Configuration::from_codes(g, codes).unwrap()
    }

    #[test]
    fn rates_from_empty_site() {
        // neighbours: two wild, one mixed needs d >= 2
        let g = BoxGeometry::new(2, 3, Boundary::EmptyExterior).unwrap();
        let c = Configuration::from_codes(g, &[0, 1, 0, 1, 0, 3, 0, 0, 0]).unwrap();
        let p = Params::new(2.0, 0.5, 1.0, 2, Variant::Symmetric).unwrap();
        let rates = transition_rates(&c, 4, &p).unwrap();
        assert_eq!(rates, vec![(SiteState::Wild, 4.5), (SiteState::Sterile, 1.0)]);
    }

    #[test]
    fn rates_from_mixed_site() {
        let p = params(2.0, 0.5, 7.0, Variant::Asymmetric);
        let c = line(&[1, 3, 3]);
        assert_eq!(
            transition_rates(&c, 1, &p).unwrap(),
            vec![(SiteState::Wild, 1.0), (SiteState::Sterile, 1.0)]
        );
    }

    #[test]
    fn sterile_site_depends_on_variant() {
        let c = line(&[1, 2, 0]);
        let sym = params(2.0, 0.5, 1.0, Variant::Symmetric);
        let asym = sym.with_variant(Variant::Asymmetric);
        assert_eq!(
            transition_rates(&c, 1, &sym).unwrap(),
            vec![(SiteState::Empty, 1.0), (SiteState::Mixed, 2.0)]
        );
        assert_eq!(transition_rates(&c, 1, &asym).unwrap(), vec![(SiteState::Empty, 1.0)]);
    }

    #[test]
    fn rate_table_exhaustive() {
        let (l1, l2, r) = (3.0, 0.75, 1.25);
        for variant in [Variant::Symmetric, Variant::Asymmetric] {
            for state in SiteState::ALL {
                for n1 in 0..=4u32 {
                    for n3 in 0..=(4 - n1) {
                        let got = local_rates(state, n1, n3, &l1, &l2, &r, variant);
                        let birth = l1 * n1 as f64 + l2 * n3 as f64;
                        let mut expected = [0.0f64; 4];
                        match state {
                            SiteState::Empty => {
                                expected[1] = birth;
                                expected[2] = r;
                            }
                            SiteState::Wild => {
                                expected[0] = 1.0;
                                expected[3] = r;
                            }
                            SiteState::Sterile => {
                                expected[0] = 1.0;
                                if variant == Variant::Symmetric {
                                    expected[3] = birth;
                                }
                            }
                            SiteState::Mixed => {
                                expected[1] = 1.0;
                                expected[2] = 1.0;
                            }
                        }
                        let mut table = [0.0f64; 4];
                        for (s, q) in got {
                            assert!(q >= 0.0);
                            assert_ne!(s, state);
                            table[s.code() as usize] += q;
                        }
                        assert_eq!(table, expected, "{state:?} n1={n1} n3={n3} {variant:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn total_rate_examples() {
        let g = BoxGeometry::periodic(1, 10).unwrap();
        let empty = Configuration::empty(g);
        assert_eq!(total_rate(&empty, &params(2.0, 0.5, 0.0, Variant::Symmetric)).unwrap(), 0.0);
        assert_eq!(total_rate(&empty, &params(2.0, 0.5, 0.5, Variant::Symmetric)).unwrap(), 5.0);
        let lone = line(&[3]);
        assert_eq!(total_rate(&lone, &params(2.0, 0.5, 1.0, Variant::Symmetric)).unwrap(), 2.0);
    }

    #[test]
    fn rejects_lambda2_above_lambda1() {
        assert!(matches!(
            Params::new(2.0, 5.0, 1.0, 1, Variant::Symmetric),
            Err(ParamError::Lambda2ExceedsLambda1 { .. })
        ));
        assert!(Params::new(2.0, 2.0, 1.0, 1, Variant::Symmetric).unwrap().is_degenerate());
        assert!(Params::new(-1.0, 0.0, 1.0, 1, Variant::Symmetric).is_err());
    }

    #[test]
    fn absorbing_state_is_reported() {
        let c = line(&[0, 0, 0]);
        let p = params(1.0, 0.5, 0.0, Variant::Symmetric);
        let mut rng = rng::stream(1, rng::domain::GILLESPIE, 0);
        assert!(matches!(gillespie_step(&c, &p, &mut rng), Err(DynamicsError::Absorbing)));
    }

    #[test]
    fn lone_wild_site_flip_distribution() {
        let c = line(&[1]);
        let r = 0.5;
        let p = params(0.0, 0.0, r, Variant::Symmetric);
        let mut rng = rng::stream(11, rng::domain::GILLESPIE, 0);
        let n = 20_000;
        let mut to_mixed = 0;
        let mut dt_sum = 0.0;
        for _ in 0..n {
            let (next, dt) = gillespie_step(&c, &p, &mut rng).unwrap();
            dt_sum += dt;
            if next.states()[0] == SiteState::Mixed {
                to_mixed += 1;
            }
        }
        let prob = r / (1.0 + r);
        let sigma = (prob * (1.0 - prob) / n as f64).sqrt();
        assert!((to_mixed as f64 / n as f64 - prob).abs() < 4.0 * sigma);
        // mean holding time 1/(1+r), sd of the mean (1/(1+r))/sqrt(n)
        let mean = 1.0 / (1.0 + r);
        assert!((dt_sum / n as f64 - mean).abs() < 4.0 * mean / (n as f64).sqrt());
    }

    #[test]
    fn pure_death_has_one_event() {
        let c = line(&[0, 1, 0]);
        let p = params(0.0, 0.0, 0.0, Variant::Symmetric);
        let mut rng = rng::stream(3, rng::domain::GILLESPIE, 0);
        let tr = simulate(&c, &p, 1e9, &mut rng, true).unwrap();
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].new, SiteState::Empty);
        assert!(tr.wild_extinct());
        assert!(tr.absorbed);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let g = BoxGeometry::periodic(1, 30).unwrap();
        let c = Configuration::wild_on(g, [15]).unwrap();
        let p = params(3.0, 0.5, 0.7, Variant::Symmetric);
        let a = simulate(&c, &p, 20.0, &mut rng::stream(5, 0, 0), false).unwrap();
        let b = simulate(&c, &p, 20.0, &mut rng::stream(5, 0, 0), false).unwrap();
        assert_eq!(a, b);
        assert!(!a.events.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let g = BoxGeometry::periodic(1, 10).unwrap();
        let c = Configuration::wild_on(g, [5]).unwrap();
        let p = params(2.0, 0.5, 1.0, Variant::Asymmetric);
        let tr = simulate(&c, &p, 3.0, &mut rng::stream(9, 0, 0), false).unwrap();
        let parsed = Trajectory::parse_events(&tr.to_csv()).unwrap();
        assert_eq!(parsed, tr.events);
    }

    fn arb_setup() -> impl Strategy<Value = (Vec<u8>, f64, f64, f64, bool, u64)> {
        (
            prop::collection::vec(0u8..4, 2..12),
            0.0f64..4.0,
            0.0f64..1.0,
            0.0f64..3.0,
            any::<bool>(),
            any::<u64>(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn replay_reproduces_terminal((codes, l1, frac, r, sym, seed) in arb_setup()) {
            let g = BoxGeometry::periodic(1, codes.len()).unwrap();
            let c = Configuration::from_codes(g, &codes).unwrap();
            let variant = if sym { Variant::Symmetric } else { Variant::Asymmetric };
            let p = Params::new(l1, l1 * frac, r, 1, variant).unwrap();
            let tr = simulate(&c, &p, 3.0, &mut rng::stream(seed, 0, 0), false).unwrap();
            prop_assert_eq!(tr.replay().unwrap(), tr.terminal.clone());
            for ev in &tr.events {
                prop_assert!(ev.time <= 3.0);
                if !sym {
                    prop_assert!(!(ev.old == SiteState::Sterile && ev.new == SiteState::Mixed));
                }
            }
        }

        #[test]
        fn no_releases_keeps_binary_states(
            codes in prop::collection::vec(0u8..2, 2..12),
            l1 in 0.0f64..4.0,
            seed in any::<u64>(),
        ) {
            let g = BoxGeometry::periodic(1, codes.len()).unwrap();
            let c = Configuration::from_codes(g, &codes).unwrap();
            let p = Params::new(l1, 0.5 * l1, 0.0, 1, Variant::Symmetric).unwrap();
            let tr = simulate(&c, &p, 5.0, &mut rng::stream(seed, 0, 0), false).unwrap();
            prop_assert!(tr.events.iter().all(|e| matches!(e.new, SiteState::Empty | SiteState::Wild)));
        }

        #[test]
        fn engine_rates_match_direct_computation((codes, l1, frac, r, sym, seed) in arb_setup()) {
            let g = BoxGeometry::new(1, codes.len(), Boundary::EmptyExterior).unwrap();
            let c = Configuration::from_codes(g, &codes).unwrap();
            let variant = if sym { Variant::Symmetric } else { Variant::Asymmetric };
            let p = Params::new(l1, l1 * frac, r, 1, variant).unwrap();
            let mut engine = Engine::new(c, p).unwrap();
            let mut rng = rng::stream(seed, 0, 0);
            for _ in 0..20 {
                if engine.step(&mut rng, f64::INFINITY).is_none() {
                    break;
                }
                let direct = total_rate(engine.config(), &p).unwrap();
                prop_assert!((engine.total_rate() - direct).abs() < 1e-9);
            }
        }
    }
}
