//! Graphical construction from marked Poisson streams.
//!
//! Four kinds of marks drive the process:
//!
//! * release at `x` (rate `r`): `0 -> 2`, `1 -> 3`;
//! * wild death at `x` (rate 1): `1 -> 0`, `3 -> 2`;
//! * sterile death at `x` (rate 1): `2 -> 0`, `3 -> 1`;
//! * arrow `x -> y` (rate `λ1` per directed pair, uniform mark `U`): a
//!   wild-only source always gives birth, a mixed source only when
//!   `U < λ2/λ1`. The birth turns `0` into `1`, and `2` into `3` in the
//!   symmetric variant only.
//!
//! Marks at equal times are processed releases first, then wild deaths,
//! sterile deaths and arrows; within a kind by site (or slot) index.
//!
//! [`apply_schedule`] evolves a configuration mark by mark. [`active_paths`]
//! computes the wild set independently by searching for space-time paths,
//! using that the sterile component of a site depends only on the release and
//! sterile-death marks there.

pub mod stream;

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Event, Params, Trajectory, Variant};
use crate::lattice::{BoxGeometry, Configuration, SiteState};

pub const DEFAULT_EVENT_CAP: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum GraphicalError {
    #[error("schedule and configuration live on different boxes")]
    GeometryMismatch,
    #[error("time {t} beyond schedule horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("schedule would hold more than {cap} marks")]
    TooLarge { cap: usize },
    #[error("site {0} outside the box")]
    SiteOutOfBox(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub time: f64,
    pub mark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSchedule {
    pub geometry: BoxGeometry,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r: f64,
    pub horizon: f64,
    pub seed: Option<u64>,
    /// Per site, sorted.
    pub releases: Vec<Vec<f64>>,
    pub wild_deaths: Vec<Vec<f64>>,
    pub sterile_deaths: Vec<Vec<f64>>,
    /// Indexed by `site * 2d + slot`; slots leaving an empty-exterior box
    /// stay empty.
    pub arrows: Vec<Vec<Arrow>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MarkKind {
    Release,
    WildDeath,
    SterileDeath,
    Arrow,
}

#[derive(Debug, Clone, Copy)]
struct Mark {
    time: f64,
    kind: MarkKind,
    /// Site, or directed slot index for arrows.
    index: usize,
    mark: f64,
}

fn poisson_times<G: Rng + ?Sized>(rate: f64, horizon: f64, rng: &mut G) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        t += e / rate;
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

impl EventSchedule {
    /// Schedule with no marks, to be filled by hand.
    pub fn empty(geometry: BoxGeometry, p: &Params, horizon: f64) -> Self {
        let n = geometry.sites();
        Self {
            geometry,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            r: p.r,
            horizon,
            seed: None,
            releases: vec![Vec::new(); n],
            wild_deaths: vec![Vec::new(); n],
            sterile_deaths: vec![Vec::new(); n],
            arrows: vec![Vec::new(); n * geometry.degree()],
        }
    }

    pub fn thinning_ratio(&self) -> f64 {
        if self.lambda1 > 0.0 {
            self.lambda2 / self.lambda1
        } else {
            0.0
        }
    }

    pub fn mark_count(&self) -> usize {
        let flat = |v: &Vec<Vec<f64>>| v.iter().map(Vec::len).sum::<usize>();
        flat(&self.releases)
            + flat(&self.wild_deaths)
            + flat(&self.sterile_deaths)
            + self.arrows.iter().map(Vec::len).sum::<usize>()
    }

    /// Add an arrow from `from` to its neighbour in `slot`.
    pub fn push_arrow(&mut self, from: usize, slot: usize, time: f64, mark: f64) {
        let k = from * self.geometry.degree() + slot;
        self.arrows[k].push(Arrow { time, mark });
        self.arrows[k].sort_by(|a, b| a.time.total_cmp(&b.time));
    }

    /// Sort every stream; call after editing by hand.
    pub fn normalize(&mut self) {
        for v in self.releases.iter_mut().chain(&mut self.wild_deaths).chain(&mut self.sterile_deaths) {
            v.sort_by(f64::total_cmp);
        }
        for v in &mut self.arrows {
            v.sort_by(|a, b| a.time.total_cmp(&b.time));
        }
    }

    /// All marks up to and including time `t`, in processing order.
    fn merged(&self, t: f64) -> Vec<Mark> {
        let mut marks = Vec::with_capacity(self.mark_count());
        let streams = [
            (MarkKind::Release, &self.releases),
            (MarkKind::WildDeath, &self.wild_deaths),
            (MarkKind::SterileDeath, &self.sterile_deaths),
        ];
        for (kind, per_site) in streams {
            for (x, times) in per_site.iter().enumerate() {
                marks.extend(times.iter().take_while(|&&s| s <= t).map(|&time| Mark { time, kind, index: x, mark: 0.0 }));
            }
        }
        for (k, arrows) in self.arrows.iter().enumerate() {
            marks.extend(
                arrows
                    .iter()
                    .take_while(|a| a.time <= t)
                    .map(|a| Mark { time: a.time, kind: MarkKind::Arrow, index: k, mark: a.mark }),
            );
        }
        marks.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.kind.cmp(&b.kind)).then(a.index.cmp(&b.index)));
        marks
    }
}

pub fn sample_schedule<G: Rng + ?Sized>(
    geometry: BoxGeometry,
    p: &Params,
    horizon: f64,
    rng: &mut G,
) -> Result<EventSchedule, GraphicalError> {
    sample_schedule_capped(geometry, p, horizon, rng, DEFAULT_EVENT_CAP)
}

pub fn sample_schedule_capped<G: Rng + ?Sized>(
    geometry: BoxGeometry,
    p: &Params,
    horizon: f64,
    rng: &mut G,
    cap: usize,
) -> Result<EventSchedule, GraphicalError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(GraphicalError::InvalidHorizon(horizon));
    }
    let n = geometry.sites();
    let expected = n as f64 * horizon * (p.r + 2.0 + geometry.degree() as f64 * p.lambda1);
    if expected > cap as f64 {
        return Err(GraphicalError::TooLarge { cap });
    }
    let mut s = EventSchedule::empty(geometry, p, horizon);
    for x in 0..n {
        s.releases[x] = poisson_times(p.r, horizon, rng);
        s.wild_deaths[x] = poisson_times(1.0, horizon, rng);
        s.sterile_deaths[x] = poisson_times(1.0, horizon, rng);
        for slot in 0..geometry.degree() {
            if geometry.neighbor(x, slot).is_some() {
                s.arrows[x * geometry.degree() + slot] = poisson_times(p.lambda1, horizon, rng)
                    .into_iter()
                    .map(|time| Arrow { time, mark: rng.random::<f64>() })
                    .collect();
            }
        }
    }
    Ok(s)
}

fn released(s: SiteState) -> SiteState {
    match s {
        SiteState::Empty => SiteState::Sterile,
        SiteState::Wild => SiteState::Mixed,
        other => other,
    }
}

fn wild_killed(s: SiteState) -> SiteState {
    match s {
        SiteState::Wild => SiteState::Empty,
        SiteState::Mixed => SiteState::Sterile,
        other => other,
    }
}

fn sterile_killed(s: SiteState) -> SiteState {
    match s {
        SiteState::Sterile => SiteState::Empty,
        SiteState::Mixed => SiteState::Wild,
        other => other,
    }
}

/// Whether an arrow carrying `mark` out of a site in state `source` gives
/// birth, given the ratio `λ2/λ1`.
pub fn arrow_effective(source: SiteState, mark: f64, ratio: f64) -> bool {
    match source {
        SiteState::Wild => true,
        SiteState::Mixed => mark < ratio,
        _ => false,
    }
}

fn born(target: SiteState, variant: Variant) -> SiteState {
    match (target, variant) {
        (SiteState::Empty, _) => SiteState::Wild,
        (SiteState::Sterile, Variant::Symmetric) => SiteState::Mixed,
        (other, _) => other,
    }
}

fn check_box(initial: &Configuration, sched: &EventSchedule) -> Result<(), GraphicalError> {
    if *initial.geometry() != sched.geometry {
        return Err(GraphicalError::GeometryMismatch);
    }
    Ok(())
}

/// Evolve `initial` through every mark of the schedule. The returned
/// trajectory records one event per mark that changed a site.
pub fn apply_schedule(
    initial: &Configuration,
    sched: &EventSchedule,
    variant: Variant,
) -> Result<Trajectory, GraphicalError> {
    check_box(initial, sched)?;
    let g = sched.geometry;
    let deg = g.degree();
    let ratio = sched.thinning_ratio();
    let mut c = initial.clone();
    let mut events = Vec::new();
    for m in sched.merged(sched.horizon) {
        let (x, new) = match m.kind {
            MarkKind::Release => (m.index, released(c.at(m.index))),
            MarkKind::WildDeath => (m.index, wild_killed(c.at(m.index))),
            MarkKind::SterileDeath => (m.index, sterile_killed(c.at(m.index))),
            MarkKind::Arrow => {
                let from = m.index / deg;
                let Some(to) = g.neighbor(from, m.index % deg) else { continue };
                if !arrow_effective(c.at(from), m.mark, ratio) {
                    continue;
                }
                (to, born(c.at(to), variant))
            }
        };
        let old = c.at(x);
        if old != new {
            c.put(x, new);
            events.push(Event { time: m.time, site: x, old, new });
        }
    }
    Ok(Trajectory {
        initial: initial.clone(),
        events,
        terminal: c,
        terminal_time: sched.horizon,
        absorbed: false,
    })
}

/// Apply one schedule to several initial configurations.
pub fn couple_by_schedule(
    initials: &[Configuration],
    sched: &EventSchedule,
    variant: Variant,
) -> Result<Vec<Trajectory>, GraphicalError> {
    initials.iter().map(|c| apply_schedule(c, sched, variant)).collect()
}

/// Per-site position lists into the merged mark sequence.
struct MarkIndex {
    wild_deaths: Vec<Vec<usize>>,
    releases: Vec<Vec<usize>>,
    sterile_deaths: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

impl MarkIndex {
    fn build(marks: &[Mark], sites: usize, deg: usize) -> Self {
        let mut idx = MarkIndex {
            wild_deaths: vec![Vec::new(); sites],
            releases: vec![Vec::new(); sites],
            sterile_deaths: vec![Vec::new(); sites],
            outgoing: vec![Vec::new(); sites],
        };
        for (pos, m) in marks.iter().enumerate() {
            match m.kind {
                MarkKind::Release => idx.releases[m.index].push(pos),
                MarkKind::WildDeath => idx.wild_deaths[m.index].push(pos),
                MarkKind::SterileDeath => idx.sterile_deaths[m.index].push(pos),
                MarkKind::Arrow => idx.outgoing[m.index / deg].push(pos),
            }
        }
        idx
    }

    /// Sterile component present at `x` just before mark position `pos`.
    fn sterile_before(&self, x: usize, pos: usize) -> bool {
        let last = |v: &Vec<usize>| {
            let k = v.partition_point(|&q| q < pos);
            if k == 0 {
                None
            } else {
                Some(v[k - 1])
            }
        };
        match (last(&self.releases[x]), last(&self.sterile_deaths[x])) {
            (Some(rel), Some(kill)) => rel > kill,
            (Some(_), None) => true,
            _ => false,
        }
    }

    /// First wild death at `x` strictly after position `pos`.
    fn next_wild_death(&self, x: usize, pos: Option<usize>) -> Option<usize> {
        let v = &self.wild_deaths[x];
        let k = match pos {
            Some(p) => v.partition_point(|&q| q <= p),
            None => 0,
        };
        v.get(k).copied()
    }
}

/// Sites reachable at time `t` by an active path started in `a` at time 0.
///
/// A path climbs the time line of a site until the next wild-death mark and
/// may jump along an arrow whose source is wild at that moment. The jump is
/// taken when the source carries no sterile individuals, or when it does and
/// the arrow mark is below `λ2/λ1`. In the asymmetric variant the target
/// must also be free of sterile individuals.
pub fn active_paths(
    a: &BTreeSet<usize>,
    sched: &EventSchedule,
    variant: Variant,
    t: f64,
) -> Result<BTreeSet<usize>, GraphicalError> {
    if t > sched.horizon {
        return Err(GraphicalError::BeyondHorizon { t, horizon: sched.horizon });
    }
    let g = sched.geometry;
    let n = g.sites();
    if let Some(&x) = a.iter().find(|&&x| x >= n) {
        return Err(GraphicalError::SiteOutOfBox(x));
    }
    let deg = g.degree();
    let ratio = sched.thinning_ratio();
    let marks = sched.merged(t);
    let idx = MarkIndex::build(&marks, n, deg);

    // A node is a site together with the merged position where the path
    // arrived there; `None` stands for time 0.
    let mut arrived = vec![false; marks.len()];
    let mut queue: VecDeque<(usize, Option<usize>)> = a.iter().map(|&x| (x, None)).collect();
    let mut reached = BTreeSet::new();
    while let Some((x, from)) = queue.pop_front() {
        let death = idx.next_wild_death(x, from);
        if death.is_none() {
            reached.insert(x);
        }
        let out = &idx.outgoing[x];
        let start = from.map_or(0, |p| out.partition_point(|&q| q <= p));
        for &pos in &out[start..] {
            if death.is_some_and(|d| pos > d) {
                break;
            }
            if arrived[pos] {
                continue;
            }
            let m = &marks[pos];
            let Some(y) = g.neighbor(x, m.index % deg) else { continue };
            if idx.sterile_before(x, pos) && m.mark >= ratio {
                continue;
            }
            if variant == Variant::Asymmetric && idx.sterile_before(y, pos) {
                continue;
            }
            arrived[pos] = true;
            queue.push_back((y, Some(pos)));
        }
    }
    Ok(reached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{wild_set, Boundary};
    use crate::rng;
    use proptest::prelude::*;

    fn params(variant: Variant) -> Params {
        Params::new(2.0, 0.5, 0.8, 1, variant).unwrap()
    }

    #[test]
    fn no_releases_without_release_rate() {
        let g = BoxGeometry::periodic(1, 6).unwrap();
        let p = params(Variant::Symmetric).with_r(0.0);
        let s = sample_schedule(g, &p, 5.0, &mut rng::stream(1, rng::domain::SCHEDULE, 0)).unwrap();
        assert!(s.releases.iter().all(Vec::is_empty));
        assert!(s.arrows.iter().all(|v| v.windows(2).all(|w| w[0].time < w[1].time)));
    }

    #[test]
    fn empty_exterior_has_no_outgoing_boundary_arrows() {
        let g = BoxGeometry::new(1, 4, Boundary::EmptyExterior).unwrap();
        let s = sample_schedule(g, &params(Variant::Symmetric), 20.0, &mut rng::stream(2, 0, 0)).unwrap();
        assert!(s.arrows[0].is_empty());
        assert!(s.arrows[3 * 2 + 1].is_empty());
        assert!(!s.arrows[1].is_empty());
    }

    #[test]
    fn empty_schedule_keeps_configuration() {
        let g = BoxGeometry::periodic(1, 5).unwrap();
        let c = Configuration::from_codes(g, &[0, 1, 2, 3, 1]).unwrap();
        let s = EventSchedule::empty(g, &params(Variant::Symmetric), 3.0);
        let tr = apply_schedule(&c, &s, Variant::Symmetric).unwrap();
        assert!(tr.events.is_empty());
        assert_eq!(tr.terminal, c);
    }

    #[test]
    fn single_arrow_path() {
        let g = BoxGeometry::new(1, 3, Boundary::EmptyExterior).unwrap();
        let mut s = EventSchedule::empty(g, &params(Variant::Symmetric), 2.0);
        s.push_arrow(0, 1, 0.5, 0.9);
        let reached = active_paths(&BTreeSet::from([0]), &s, Variant::Symmetric, 1.0).unwrap();
        assert_eq!(reached, BTreeSet::from([0, 1]));
        assert!(active_paths(&BTreeSet::new(), &s, Variant::Symmetric, 1.0).unwrap().is_empty());
        let before = active_paths(&BTreeSet::from([0]), &s, Variant::Symmetric, 0.4).unwrap();
        assert_eq!(before, BTreeSet::from([0]));
    }

    #[test]
    fn mixed_source_needs_small_mark() {
        let g = BoxGeometry::new(1, 2, Boundary::EmptyExterior).unwrap();
        let p = params(Variant::Symmetric);
        let c = Configuration::from_codes(g, &[3, 0]).unwrap();
        for (mark, expect) in [(0.1, SiteState::Wild), (0.3, SiteState::Empty)] {
            let mut s = EventSchedule::empty(g, &p, 1.0);
            s.push_arrow(0, 1, 0.5, mark);
            assert_eq!(apply_schedule(&c, &s, Variant::Symmetric).unwrap().terminal.states()[1], expect);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn path_search_matches_application(
            seed in any::<u64>(),
            sites in 2usize..8,
            l1 in 0.1f64..3.0,
            frac in 0.0f64..1.0,
            r in 0.0f64..2.0,
            periodic in any::<bool>(),
            sym in any::<bool>(),
            a_bits in any::<u8>(),
            t_frac in 0.0f64..1.0,
        ) {
            let boundary = if periodic { Boundary::Periodic } else { Boundary::EmptyExterior };
            let g = BoxGeometry::new(1, sites, boundary).unwrap();
            let variant = if sym { Variant::Symmetric } else { Variant::Asymmetric };
            let p = Params::new(l1, l1 * frac, r, 1, variant).unwrap();
            let s = sample_schedule(g, &p, 2.0, &mut rng::stream(seed, 0, 0)).unwrap();
            let a: BTreeSet<usize> = (0..sites).filter(|i| a_bits >> i & 1 == 1).collect();
            let init = Configuration::wild_on(g, a.iter().copied()).unwrap();
            let tr = apply_schedule(&init, &s, variant).unwrap();
            let t = 2.0 * t_frac;
            prop_assert_eq!(active_paths(&a, &s, variant, t).unwrap(), wild_set(&tr.state_at(t)));
            prop_assert_eq!(tr.replay().unwrap(), tr.terminal);
        }

        #[test]
        fn raising_lambda2_never_removes_wild(
            seed in any::<u64>(),
            frac_lo in 0.0f64..1.0,
            frac_hi in 0.0f64..1.0,
            a_bits in 1u8..,
        ) {
            let g = BoxGeometry::periodic(1, 8).unwrap();
            let (lo, hi) = if frac_lo <= frac_hi { (frac_lo, frac_hi) } else { (frac_hi, frac_lo) };
            let mut s = sample_schedule(g, &Params::new(2.0, 2.0 * lo, 1.0, 1, Variant::Symmetric).unwrap(), 2.0, &mut rng::stream(seed, 0, 0)).unwrap();
            let a: BTreeSet<usize> = (0..8).filter(|i| a_bits >> i & 1 == 1).collect();
            let low = active_paths(&a, &s, Variant::Symmetric, 2.0).unwrap();
            s.lambda2 = 2.0 * hi;
            let high = active_paths(&a, &s, Variant::Symmetric, 2.0).unwrap();
            prop_assert!(low.is_subset(&high));
        }
    }
}
