//! One stream of marks driving several configurations at once.
//!
//! Marks are generated on the fly by superposition: every site carries
//! releases at rate `r_cap`, both death types at rate 1 and, per neighbour
//! slot, arrows at rate `λ_cap`, where the caps are the largest rates among
//! the driven configurations. Each mark carries a uniform value `v` in
//! `[0, cap)`; a configuration with release rate `r` keeps a release iff
//! `v < r`, and an arrow out of a wild-only (mixed) site is effective iff
//! `v < λ1` (`v < λ2`). Every driven configuration is therefore an exact
//! realisation of its own dynamics, and configurations differing only in
//! `r`, `λ1` or `λ2` see nested sets of marks.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::dynamics::{Params, Variant};
use crate::lattice::{BoxGeometry, Configuration, SiteState};

#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: Params,
    states: Vec<SiteState>,
    wild: usize,
}

impl Tracker {
    pub fn new(initial: &Configuration, params: Params) -> Self {
        Self { params, states: initial.states().to_vec(), wild: initial.wild_count() }
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub fn wild_count(&self) -> usize {
        self.wild
    }

    pub fn to_configuration(&self, geometry: BoxGeometry) -> Configuration {
        Configuration::from_states(geometry, self.states.clone()).expect("tracker matches its box")
    }

    #[inline]
    fn set(&mut self, x: usize, new: SiteState) {
        let old = self.states[x];
        self.wild = self.wild + new.is_wild() as usize - old.is_wild() as usize;
        self.states[x] = new;
    }
}

#[derive(Debug, Clone)]
pub struct SharedStream {
    geometry: BoxGeometry,
    neighbors: Vec<Option<usize>>,
    degree: usize,
    lambda_cap: f64,
    r_cap: f64,
}

/// What a single generated mark did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMark {
    pub time: f64,
    pub site: usize,
}

impl SharedStream {
    /// Stream able to drive every parameter set in `params`.
    pub fn new<'a, I: IntoIterator<Item = &'a Params>>(geometry: BoxGeometry, params: I) -> Self {
        let mut lambda_cap: f64 = 0.0;
        let mut r_cap: f64 = 0.0;
        for p in params {
            lambda_cap = lambda_cap.max(p.lambda1);
            r_cap = r_cap.max(p.r);
        }
        Self::with_caps(geometry, lambda_cap, r_cap)
    }

    /// Stream with explicit caps. Trackers must have `λ1 <= lambda_cap` and
    /// `r <= r_cap`; two runs with equal caps and equal generators see the
    /// same marks.
    pub fn with_caps(geometry: BoxGeometry, lambda_cap: f64, r_cap: f64) -> Self {
        Self {
            geometry,
            neighbors: geometry.neighbor_table(),
            degree: geometry.degree(),
            lambda_cap,
            r_cap,
        }
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    /// Run until `t_max` or until no tracker holds wild individuals.
    /// `observe` is called after each mark that changed at least one tracker.
    pub fn run<G, F>(&self, trackers: &mut [Tracker], t_max: f64, rng: &mut G, mut observe: F) -> f64
    where
        G: Rng + ?Sized,
        F: FnMut(StreamMark, &[Tracker]),
    {
        let n = self.geometry.sites();
        let per_site = self.r_cap + 2.0 + self.degree as f64 * self.lambda_cap;
        let total = n as f64 * per_site;
        let mut t = 0.0;
        if total <= 0.0 {
            return t_max;
        }
        while trackers.iter().any(|k| k.wild > 0) {
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            if t > t_max {
                return t_max;
            }
            let x = rng.random_range(0..n);
            let v = rng.random::<f64>() * per_site;
            let mut changed = false;
            if v < self.r_cap {
                for k in trackers.iter_mut() {
                    if v < k.params.r {
                        let s = k.states[x];
                        let new = match s {
                            SiteState::Empty => SiteState::Sterile,
                            SiteState::Wild => SiteState::Mixed,
                            other => other,
                        };
                        if new != s {
                            k.set(x, new);
                            changed = true;
                        }
                    }
                }
            } else if v < self.r_cap + 1.0 {
                for k in trackers.iter_mut() {
                    let new = match k.states[x] {
                        SiteState::Wild => SiteState::Empty,
                        SiteState::Mixed => SiteState::Sterile,
                        _ => continue,
                    };
                    k.set(x, new);
                    changed = true;
                }
            } else if v < self.r_cap + 2.0 {
                for k in trackers.iter_mut() {
                    let new = match k.states[x] {
                        SiteState::Sterile => SiteState::Empty,
                        SiteState::Mixed => SiteState::Wild,
                        _ => continue,
                    };
                    k.set(x, new);
                    changed = true;
                }
            } else {
                let w = v - self.r_cap - 2.0;
                let slot = ((w / self.lambda_cap) as usize).min(self.degree - 1);
                let mark = w - slot as f64 * self.lambda_cap;
                let Some(y) = self.neighbors[x * self.degree + slot] else { continue };
                for k in trackers.iter_mut() {
                    let effective = match k.states[x] {
                        SiteState::Wild => mark < k.params.lambda1,
                        SiteState::Mixed => mark < k.params.lambda2,
                        _ => false,
                    };
                    if !effective {
                        continue;
                    }
                    let new = match (k.states[y], k.params.variant) {
                        (SiteState::Empty, _) => SiteState::Wild,
                        (SiteState::Sterile, Variant::Symmetric) => SiteState::Mixed,
                        _ => continue,
                    };
                    k.set(y, new);
                    changed = true;
                }
                if changed {
                    observe(StreamMark { time: t, site: y }, trackers);
                }
                continue;
            }
            if changed {
                observe(StreamMark { time: t, site: x }, trackers);
            }
        }
        t
    }
}
