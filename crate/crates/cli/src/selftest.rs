//! Invariant suite behind `cprs selftest`.

use std::collections::BTreeSet;

use cprs::coupling::{self, table, CouplingKind, PairConfiguration, RateExpr, Region};
use cprs::graphical::{active_paths, apply_schedule, sample_schedule};
use cprs::lattice::{wild_set, Boundary, BoxGeometry, Configuration, SiteState};
use cprs::meanfield::{MeanField, Provenance, System, VForm};
use cprs::quenched::verify_published_table;
use cprs::rng::{self, domain};
use cprs::stats::chi_square_homogeneity;
use cprs::{dynamics, Params, Variant};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub quick: bool,
    pub inject_typo: bool,
    pub seed: u64,
}

pub fn run(opts: SuiteOptions) -> Vec<CheckResult> {
    vec![
        order_tables(),
        projection(opts),
        coupled_order(opts),
        backend_paths(opts),
        backend_distribution(opts),
        equilibrium_residuals(opts),
        table_reproduction(),
    ]
}

fn p(l1: f64, l2: f64, r: f64) -> Params {
    Params::new(l1, l2, r, 1, Variant::Symmetric).expect("valid by construction")
}

/// A lower and an upper parameter set satisfying the basic ordering
/// conditions; with `general`, also the extra conditions of the general
/// coupling.
pub fn ordered_params<G: Rng + ?Sized>(g: &mut G, general: bool) -> (Params, Params) {
    let l1_up = 3.0 * g.random::<f64>();
    let l1_low = if general { l1_up.min(1.0) } else { l1_up } * g.random::<f64>();
    let l2_low = l1_low * g.random::<f64>();
    let l2_up = l2_low + (l1_up - l2_low) * g.random::<f64>();
    let r_up = 2.0 * g.random::<f64>();
    let r_low = if general { r_up.max(1.0) } else { r_up } + g.random::<f64>();
    (p(l1_low, l2_low, r_low), p(l1_up, l2_up, r_up))
}

fn order_tables() -> CheckResult {
    let mut bad = Vec::new();
    for kind in CouplingKind::ALL {
        // the basic (0,3) rows only run where (0,3) cannot occur
        for row in kind.table().rows.into_iter().filter(|r| matches!(r.region, Region::Ordered | Region::GeneralZeroThree)) {
            if row.from.0 <= row.from.1 && row.to.0 > row.to.1 {
                bad.push(format!("{:?}: {:?} -> {:?}", kind, row.from, row.to));
            }
        }
    }
    CheckResult {
        name: "order tables",
        passed: bad.is_empty(),
        detail: if bad.is_empty() { "every row from an ordered pair lands on an ordered pair".into() } else { bad.join("; ") },
    }
}

fn projection(opts: SuiteOptions) -> CheckResult {
    let mut g = rng::stream(opts.seed, domain::COUPLED, 0);
    let sets = if opts.quick { 2 } else { 10 };
    let mut cases = 0;
    let mut failures = Vec::new();
    for _ in 0..sets {
        for kind in CouplingKind::ALL {
            let (p1, p2) = ordered_params(&mut g, kind == CouplingKind::General);
            let tab = if opts.inject_typo && kind == CouplingKind::Restricted {
                table::restricted().with_rate((2, 1), (2, 3), RateExpr::LowerRelease)
            } else {
                kind.table()
            };
            for degree in [2usize, 4] {
                let rep = coupling::check_projection_exhaustive(&tab, kind, &p1, &p2, degree);
                cases += rep.cases;
                if let Some(v) = rep.violations.first() {
                    let rows: Vec<String> = tab.rows_from(v.from).map(|r| format!("{:?} -> {:?} at {:?}", r.from, r.to, r.rate)).collect();
                    failures.push(format!(
                        "{} (degree {degree}): from {:?}, coordinate {}, target {:?}: coupled {} vs marginal {}; rows {}",
                        rep.table,
                        v.from,
                        v.coordinate,
                        v.target,
                        v.coupled,
                        v.marginal,
                        rows.join(", ")
                    ));
                }
            }
        }
    }
    failures.dedup();
    CheckResult {
        name: "projection identity",
        passed: failures.is_empty(),
        detail: if failures.is_empty() { format!("{cases} exact cases") } else { failures.into_iter().take(3).collect::<Vec<_>>().join(" | ") },
    }
}

fn coupled_order(opts: SuiteOptions) -> CheckResult {
    let n = if opts.quick { 200 } else { 2000 };
    let g8 = BoxGeometry::new(1, 8, Boundary::EmptyExterior).expect("valid box");
    let kinds = [CouplingKind::Restricted, CouplingKind::Asymmetric, CouplingKind::SymVsAsym, CouplingKind::CpUpper, CouplingKind::CpLower];
    let bad: u64 = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(opts.seed, domain::COUPLED, 1 + i);
            let kind = kinds[(i as usize) % kinds.len()];
            let (p1, p2) = ordered_params(&mut g, false);
            let pair = coupling::random_ordered_pair(g8, kind, &mut g);
            !stays_ordered(pair, p1, p2, kind, 3.0, &mut g) as u64
        })
        .sum();
    CheckResult { name: "coupled order", passed: bad == 0, detail: format!("{bad} of {n} coupled trajectories left the order") }
}

fn random_binary<G: Rng + ?Sized>(geometry: BoxGeometry, g: &mut G) -> Configuration {
    let states = (0..geometry.sites()).map(|_| if g.random::<bool>() { SiteState::Wild } else { SiteState::Empty }).collect();
    Configuration::from_states(geometry, states).expect("sized to box")
}

fn random_params<G: Rng + ?Sized>(g: &mut G) -> Params {
    let l1 = 3.0 * g.random::<f64>();
    let variant = if g.random::<bool>() { Variant::Symmetric } else { Variant::Asymmetric };
    Params::new(l1, l1 * g.random::<f64>(), 2.0 * g.random::<f64>(), 1, variant).expect("valid by construction")
}

fn backend_paths(opts: SuiteOptions) -> CheckResult {
    let n = if opts.quick { 100 } else { 1000 };
    let geometry = BoxGeometry::new(1, 8, Boundary::EmptyExterior).expect("valid box");
    let mismatches: Vec<u64> = (0..n as u64)
        .into_par_iter()
        .filter(|&i| {
            let mut g = rng::stream(opts.seed, domain::SCHEDULE, i);
            let params = random_params(&mut g);
            let init = random_binary(geometry, &mut g);
            let Ok(sched) = sample_schedule(geometry, &params, 2.0, &mut g) else { return true };
            let applied = apply_schedule(&init, &sched, params.variant).map(|t| wild_set(&t.terminal));
            let paths = active_paths(&wild_set(&init), &sched, params.variant, 2.0);
            !matches!((applied, paths), (Ok(a), Ok(b)) if a == b)
        })
        .collect();
    CheckResult {
        name: "active paths",
        passed: mismatches.is_empty(),
        detail: format!("{} of {n} schedules differ{}", mismatches.len(), if mismatches.is_empty() { String::new() } else { format!(" (first index {})", mismatches[0]) }),
    }
}

/// Wild-count histograms of the terminal configuration from both backends.
pub fn backend_histograms(params: &Params, geometry: BoxGeometry, horizon: f64, trials: u64, seed: u64) -> (Vec<u64>, Vec<u64>) {
    let init = Configuration::filled(geometry, SiteState::Wild);
    let n = geometry.sites();
    let count = |wild: Vec<usize>| {
        let mut h = vec![0u64; n + 1];
        wild.into_iter().for_each(|w| h[w] += 1);
        h
    };
    let gillespie: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, domain::GILLESPIE, i);
            dynamics::simulate(&init, params, horizon, &mut g, false).map(|t| t.terminal.wild_count()).unwrap_or(0)
        })
        .collect();
    let graphical: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, domain::SCHEDULE, i);
            sample_schedule(geometry, params, horizon, &mut g)
                .and_then(|s| apply_schedule(&init, &s, params.variant))
                .map(|t| t.terminal.wild_count())
                .unwrap_or(0)
        })
        .collect();
    (count(gillespie), count(graphical))
}

fn backend_distribution(opts: SuiteOptions) -> CheckResult {
    let trials = if opts.quick { 1000 } else { 10_000 };
    let geometry = BoxGeometry::new(1, 8, Boundary::EmptyExterior).expect("valid box");
    let mut details = Vec::new();
    let mut passed = true;
    for variant in [Variant::Symmetric, Variant::Asymmetric] {
        let params = Params::new(2.0, 0.5, 1.0, 1, variant).expect("valid");
        let (a, b) = backend_histograms(&params, geometry, 2.0, trials, opts.seed);
        let test = chi_square_homogeneity(&a, &b);
        passed &= test.p_value >= 1e-3;
        details.push(format!("{}: chi2 = {:.2}, dof {}, p = {:.4}", variant.name(), test.statistic, test.dof, test.p_value));
    }
    CheckResult { name: "backend distribution", passed, detail: details.join("; ") }
}

/// v-systems use the transcription recovered from their u-systems.
fn canonical(system: System, params: &Params) -> MeanField {
    let form = if system.is_u() { VForm::printed(system) } else { VForm::Derived };
    MeanField::with_form(system, form, params)
}

fn equilibrium_residuals(opts: SuiteOptions) -> CheckResult {
    let k = if opts.quick { 3 } else { 10 };
    let mut worst_trivial: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            for m in 0..k {
                let l1 = 0.25 + 0.5 * i as f64;
                let l2 = l1 * j as f64 / k as f64;
                let r = 0.3 * m as f64;
                for system in [System::VAsym, System::USym, System::VSym] {
                    worst_trivial = worst_trivial.max(canonical(system, &p(l1, l2, r)).trivial_residual_exact());
                }
            }
        }
    }
    let mut worst_newton: f64 = 0.0;
    for params in [p(2.0, 0.25, 1.0), p(1.0, 0.2, 0.5), p(3.0, 1.0, 2.0)] {
        for system in System::ALL {
            for c in canonical(system, &params).equilibria() {
                if c.provenance == Provenance::Newton {
                    worst_newton = worst_newton.max(c.residual);
                }
            }
        }
    }
    CheckResult {
        name: "equilibrium residuals",
        passed: worst_trivial == 0.0 && worst_newton < 1e-10,
        detail: format!("trivial residual max {worst_trivial} over {} grid points, Newton residual max {worst_newton:.2e}", k * k * k),
    }
}

fn table_reproduction() -> CheckResult {
    let v = verify_published_table();
    let flagged: BTreeSet<(u64, u64, &str)> = v.discrepancies.iter().map(|c| (c.lambda1 as u64, (c.lambda2 * 10.0).round() as u64, c.bound)).collect();
    let expected: BTreeSet<(u64, u64, &str)> = [(10, 8, "lower")].into_iter().collect();
    let flagged_value = v.discrepancies.first().map(|c| c.computed).unwrap_or(f64::NAN);
    CheckResult {
        name: "bounds table",
        passed: flagged == expected && (flagged_value - 0.3759).abs() < 1e-4,
        detail: format!(
            "{} of {} cells match; flagged {:?} at {:.4}",
            v.cells.len() - v.discrepancies.len(),
            v.cells.len(),
            v.discrepancies.iter().map(|c| (c.lambda1, c.lambda2, c.bound)).collect::<Vec<_>>(),
            flagged_value
        ),
    }
}

/// Whether the pair stays ordered at every jump of a coupled run.
pub fn stays_ordered<G: Rng + ?Sized>(pair: PairConfiguration, p1: Params, p2: Params, kind: CouplingKind, t_max: f64, g: &mut G) -> bool {
    let mut proc = coupling::CoupledProcess::new(pair, p1, p2, kind);
    loop {
        match proc.step(g, t_max) {
            Ok(Some(_)) if !proc.pair.is_ordered() => return false,
            Ok(Some(_)) => {}
            Ok(None) => return true,
            Err(_) => return false,
        }
    }
}
