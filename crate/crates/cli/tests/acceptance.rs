//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::SQRT_2;
use std::process::Command;
use std::time::{Duration, Instant};

use cprs::coupling::{self, borrello::Inequality, CouplingKind, RateFamily};
use cprs::dynamics;
use cprs::graphical::{active_paths, apply_schedule, sample_schedule};
use cprs::lattice::{wild_set, Boundary, BoxGeometry, Configuration, SiteState};
use cprs::meanfield::{self, Bound, MeanField, Provenance, System, VForm};
use cprs::montecarlo::{self, CriticalSettings, Settings};
use cprs::quenched::{self, EnvironmentRates};
use cprs::rng::{self, domain};
use cprs::stats::chi_square_homogeneity;
use cprs::{Params, Variant};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 20_240_611;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn p(l1: f64, l2: f64, r: f64) -> Params {
    Params::new(l1, l2, r, 1, Variant::Symmetric).unwrap()
}

fn box1(side: usize) -> BoxGeometry {
    BoxGeometry::new(1, side, Boundary::EmptyExterior).unwrap()
}

/// Published rows: `(λ1, λ2, lower, upper)`.
const PUBLISHED: [(f64, f64, f64, f64); 8] = [
    (1000.0, 0.8, 0.49, 4995.0),
    (100.0, 0.8, 0.48, 495.0),
    (10.0, 0.8, 0.36, 45.0),
    (2.0, 0.8, 0.0, 5.0),
    (1000.0, 1.4, 1.37, f64::INFINITY),
    (100.0, 1.4, 1.34, f64::INFINITY),
    (10.0, 1.4, 1.04, f64::INFINITY),
    (2.0, 1.4, 0.0, f64::INFINITY),
];

fn trunc2(x: f64) -> f64 {
    if x.is_finite() { (x * 100.0 + 1e-9).floor() / 100.0 } else { x }
}

fn table_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cprs"))
        .args(["--out-dir", dir.path().to_str().unwrap(), "quenched", "--paper-table"])
        .output()
        .unwrap();
    if !out.status.success() {
        return outcome(false, format!("exit status {}", out.status));
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    if rows.len() != 8 {
        return outcome(false, format!("{} rows", rows.len()));
    }
    let mut matched = 0;
    let mut mismatched = Vec::new();
    let mut flagged_value = f64::NAN;
    for (row, &(l1, l2, lo, up)) in rows.iter().zip(&PUBLISHED) {
        let parse = |s: &str| if s == "inf" { f64::INFINITY } else { s.parse::<f64>().unwrap() };
        let (lower, upper) = (parse(&row[2]), parse(&row[3]));
        // independent evaluation of the two thresholds
        let lower_ref = if l1 > 1.0 + SQRT_2 && l2 < 1.0 + SQRT_2 { l2 * (l1 - SQRT_2 - 1.0) / (l1 * (SQRT_2 + 1.0 - l2)) } else { 0.0 };
        let upper_ref = if l2 < 1.0 { (l1 - 1.0) / (1.0 - l2) } else { f64::INFINITY };
        if (lower - lower_ref).abs() > 1e-12 || !(upper == upper_ref || (upper - upper_ref).abs() < 1e-9) {
            return outcome(false, format!("row ({l1}, {l2}) disagrees with the closed forms"));
        }
        for (name, computed, printed) in [("lower", lower, lo), ("upper", upper, up)] {
            if trunc2(computed) == printed {
                matched += 1;
            } else {
                mismatched.push((l1, l2, name));
                flagged_value = computed;
            }
        }
    }
    let flag_line = stdout.lines().any(|l| l.starts_with("FLAG (10, 0.8) lower") && l.contains("0.36"));
    let passed = matched == 15 && mismatched == [(10.0, 0.8, "lower")] && (flagged_value - 0.3759).abs() < 1e-4 && flag_line;
    outcome(passed, format!("{matched}/16 cells match; (10, 0.8) lower = {flagged_value:.4} flagged against 0.36: {flag_line}"))
}

fn bound_formulas() -> Outcome {
    let params = p(2.0, 0.25, 1.0);
    let r0 = meanfield::bound_r0(&params);
    let r1 = meanfield::bound_r1(&params);
    let edge = quenched::cpre_extinct_edge(2.0, 0.8, 0.0).unwrap().criterion.threshold;
    let lc = quenched::lambda_c_upper_bound();
    let lc_ok = (lc - (1.0 + SQRT_2)).abs() < 1e-12
        && quenched::cpre_survive_edge(lc + 1e-9, 0.5, 0.0).unwrap().criterion.holds
        && !quenched::cpre_survive_edge(lc - 1e-9, 0.5, 0.0).unwrap().criterion.applicable;
    let passed = r0 == Bound::Value(1.5) && r1 == Bound::Value(6.0) && edge == Some(5.0) && lc_ok;
    outcome(passed, format!("cond-r0 = {r0}, cond-r1 = {r1}, edge threshold = {edge:?}, lambda_c bound = {lc}"))
}

fn random_binary<G: Rng + ?Sized>(geometry: BoxGeometry, g: &mut G) -> Configuration {
    let states = (0..geometry.sites()).map(|_| if g.random::<bool>() { SiteState::Wild } else { SiteState::Empty }).collect();
    Configuration::from_states(geometry, states).unwrap()
}

fn backend_equivalence() -> Outcome {
    let geometry = box1(8);
    let mismatches = (0..1000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut g = rng::stream(SEED, domain::SCHEDULE, i);
            let l1 = 3.0 * g.random::<f64>();
            let variant = if i % 2 == 0 { Variant::Symmetric } else { Variant::Asymmetric };
            let params = Params::new(l1, l1 * g.random::<f64>(), 2.0 * g.random::<f64>(), 1, variant).unwrap();
            let init = random_binary(geometry, &mut g);
            let sched = sample_schedule(geometry, &params, 2.0, &mut g).unwrap();
            let applied = wild_set(&apply_schedule(&init, &sched, variant).unwrap().terminal);
            active_paths(&wild_set(&init), &sched, variant, 2.0).unwrap() != applied
        })
        .count();
    let mut tests = Vec::new();
    for variant in [Variant::Symmetric, Variant::Asymmetric] {
        let params = Params::new(2.0, 0.5, 1.0, 1, variant).unwrap();
        let init = Configuration::filled(geometry, SiteState::Wild);
        let n = 10_000u64;
        let gillespie: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| dynamics::simulate(&init, &params, 2.0, &mut rng::stream(SEED, domain::GILLESPIE, i), false).unwrap().terminal.wild_count())
            .collect();
        let graphical: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = rng::stream(SEED, domain::SCHEDULE, 10_000 + i);
                let sched = sample_schedule(geometry, &params, 2.0, &mut g).unwrap();
                apply_schedule(&init, &sched, variant).unwrap().terminal.wild_count()
            })
            .collect();
        let hist = |xs: &[usize]| {
            let mut h = vec![0u64; 9];
            xs.iter().for_each(|&w| h[w] += 1);
            h
        };
        tests.push((variant, chi_square_homogeneity(&hist(&gillespie), &hist(&graphical))));
    }
    let passed = mismatches == 0 && tests.iter().all(|(_, t)| t.p_value >= 1e-3);
    let ps: Vec<String> = tests.iter().map(|(v, t)| format!("{} p = {:.4}", v.name(), t.p_value)).collect();
    outcome(passed, format!("{mismatches}/1000 path mismatches; chi-square {}", ps.join(", ")))
}

/// Lower and upper parameter sets with the ordering conditions; `general`
/// adds the three conditions of the unrestricted coupling.
fn ordered_pair_params<G: Rng + ?Sized>(g: &mut G, general: bool) -> (Params, Params) {
    let l1_up = 3.0 * g.random::<f64>();
    let l1_low = if general { l1_up.min(1.0) } else { l1_up } * g.random::<f64>();
    let l2_low = l1_low * g.random::<f64>();
    let l2_up = l2_low + (l1_up - l2_low) * g.random::<f64>();
    let r_up = 2.0 * g.random::<f64>();
    let r_low = if general { r_up.max(1.0) } else { r_up } + g.random::<f64>();
    (p(l1_low, l2_low, r_low), p(l1_up, l2_up, r_up))
}

fn coupling_soundness() -> Outcome {
    let mut g = rng::stream(SEED, domain::COUPLED, 0);
    let mut cases = 0;
    let mut failed_tables = Vec::new();
    for _ in 0..20 {
        for kind in CouplingKind::ALL {
            let (p1, p2) = ordered_pair_params(&mut g, kind == CouplingKind::General);
            let rep = coupling::check_projection_exhaustive(&kind.table(), kind, &p1, &p2, 2);
            cases += rep.cases;
            if !rep.passed() {
                failed_tables.push(rep.table);
            }
        }
    }
    let mut borrello_clean = 0;
    for _ in 0..500 {
        let (a, b) = ordered_pair_params(&mut g, true);
        let fa = RateFamily::symmetric(a.lambda1, a.lambda2, a.r);
        let fb = RateFamily::symmetric(b.lambda1, b.lambda2, b.r);
        borrello_clean += coupling::verify_borrello_inequalities(&fa, &fb).is_empty() as usize;
    }
    let low_r = coupling::verify_borrello_inequalities(&RateFamily::symmetric(0.5, 0.2, 0.6), &RateFamily::symmetric(0.9, 0.3, 0.4));
    let low_r_ok = !low_r.is_empty()
        && low_r.iter().all(|v| v.inequality == Inequality::Down)
        && low_r.iter().any(|v| v.shift == 0 && (v.alpha, v.gamma) == ('B', 'C') && v.lhs == 0.6 && v.rhs == 1.0);
    let order = coupling::verify_borrello_inequalities(&RateFamily::symmetric(0.5, 0.2, 1.5), &RateFamily::symmetric(0.9, 0.3, 2.0));
    let order_ok = order.iter().all(|v| v.inequality == Inequality::Down)
        && order.iter().any(|v| (v.alpha, v.gamma, v.shift) == ('B', 'B', 0))
        && order.iter().any(|v| (v.alpha, v.gamma, v.shift) == ('D', 'D', 0));
    let geometry = box1(8);
    let violations = (0..10_000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut g = rng::stream(SEED, domain::COUPLED, 1 + i);
            let (p1, p2) = ordered_pair_params(&mut g, false);
            let pair = coupling::random_ordered_pair(geometry, CouplingKind::Restricted, &mut g);
            let mut process = coupling::CoupledProcess::new(pair, p1, p2, CouplingKind::Restricted);
            loop {
                match process.step(&mut g, 3.0) {
                    Ok(Some(_)) if !process.pair.is_ordered() => return true,
                    Ok(Some(_)) => {}
                    Ok(None) => return false,
                    Err(_) => return true,
                }
            }
        })
        .count();
    let passed = failed_tables.is_empty() && borrello_clean == 500 && low_r_ok && order_ok && violations == 0;
    outcome(
        passed,
        format!(
            "{cases} projection cases, failing tables {failed_tables:?}; {borrello_clean}/500 clean inequality checks; r1<1 localised: {low_r_ok}; r1<r2 localised: {order_ok}; {violations}/10000 order violations"
        ),
    )
}

fn r_monotonicity() -> Outcome {
    let grid = [0.0, 0.5, 1.0, 2.0, 5.0, 20.0];
    let s = Settings::default_for(1, 500, SEED);
    let sw = montecarlo::coupled_r_sweep(&grid, &p(4.0, 0.5, 0.0), &s).unwrap();
    let (first, last) = (sw.estimates[0], sw.estimates[5]);
    let passed = sw.order_violations == 0 && first.ci_low > 0.5 && last.ci_high < 0.1 && s.geometry.side == 200 && s.t_max == 100.0;
    let col: Vec<String> = sw.estimates.iter().map(|e| format!("{:.3}", e.p_hat)).collect();
    outcome(
        passed,
        format!(
            "{} violations; p_hat = [{}]; p_hat(0) CI [{:.3}, {:.3}], p_hat(20) CI [{:.3}, {:.3}]",
            sw.order_violations,
            col.join(", "),
            first.ci_low,
            first.ci_high,
            last.ci_low,
            last.ci_high
        ),
    )
}

fn phase_transition() -> Outcome {
    let s = Settings::default_for(1, 400, SEED);
    let cs = CriticalSettings::default();
    let sym = montecarlo::estimate_rc(4.0, 0.5, Variant::Symmetric, &s, &cs).unwrap();
    let asym = montecarlo::estimate_rc(4.0, 0.5, Variant::Asymmetric, &s, &cs).unwrap();
    let sub = montecarlo::estimate_rc(1.0, 0.5, Variant::Symmetric, &s, &cs).unwrap();
    let passed = sym.is_finite_bracket()
        && sym.r_low > 0.0
        && sub.subcritical_at_zero
        && sub.warnings.iter().any(|w| w.contains("subcritical at r=0"))
        && asym.r_low <= sym.r_low
        && asym.r_high <= sym.r_high;
    outcome(
        passed,
        format!(
            "symmetric [{}, {}], asymmetric [{}, {}]; lambda1 = 1: p_hat(0) = {:.3}, subcritical flag {}",
            sym.r_low, sym.r_high, asym.r_low, asym.r_high, sub.baseline.p_hat, sub.subcritical_at_zero
        ),
    )
}

fn mean_field() -> Outcome {
    let systems = [System::VAsym, System::USym, System::VSym];
    let reference = p(2.0, 0.25, 1.0);
    // transcription of each v-system fixed by its u-system's equilibria
    let canonical = |system: System| if system.is_u() { VForm::printed(system) } else { meanfield::adjudicate(system, &reference).canonical.unwrap_or(VForm::printed(system)) };
    let forms: Vec<(System, VForm)> = systems.iter().map(|&s| (s, canonical(s))).collect();
    let mut worst_trivial: f64 = 0.0;
    let mut worst_printed_trivial: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let l1 = 0.3 + 0.7 * i as f64;
                let params = p(l1, l1 * j as f64 / 9.0, 0.4 * k as f64);
                for &(system, form) in &forms {
                    worst_trivial = worst_trivial.max(MeanField::with_form(system, form, &params).trivial_residual_exact());
                    worst_printed_trivial = worst_printed_trivial.max(MeanField::new(system, &params).trivial_residual_exact());
                }
            }
        }
    }
    let mut worst_newton: f64 = 0.0;
    let mut newton_count = 0;
    for params in [reference, p(1.5, 0.3, 0.5), p(4.0, 0.5, 2.0), p(0.8, 0.1, 0.2)] {
        for &(system, form) in &forms {
            for c in MeanField::with_form(system, form, &params).equilibria() {
                if c.provenance == Provenance::Newton {
                    worst_newton = worst_newton.max(c.residual);
                    newton_count += 1;
                }
            }
        }
    }
    let mut classified = Vec::new();
    // r = 1 hides a stray factor of r, so classify at r = 1/2 as well
    for at in [reference, p(2.0, 0.25, 0.5)] {
        for &(system, form) in &forms {
            if let Some(x) = MeanField::new(system, &at).printed_candidate() {
                let res = MeanField::with_form(system, form, &at).residual(&x);
                let verdict = if res < 1e-8 { "confirmed".to_string() } else { format!("discrepancy, residual {res:.3} in form {form:?}") };
                classified.push(format!("{} at r = {} {verdict}", system.name(), at.r));
            }
        }
    }
    let mf = MeanField::new(System::USym, &p(2.0, 0.25, 1.0));
    let start = meanfield::interior_starts(System::USym)[0];
    let steady = mf.integrate_to_steady_state(&start, meanfield::DT, meanfield::T_MAX, meanfield::STEADY_TOL).unwrap();
    let refined = mf.newton(&steady.state);
    let u = System::USym.densities(&refined.state);
    // exact equilibrium worked out by hand for these parameters
    let exact = [2.0 / 9.0, 5.0 / 18.0, 2.0 / 9.0, 5.0 / 18.0];
    let u_ok = u.iter().all(|x| (0.0..=1.0).contains(x)) && u.iter().zip(exact).all(|(a, b)| (a - b).abs() < 1e-9);
    let forms_ok = forms.iter().all(|&(s, f)| s.is_u() || f == VForm::Derived);
    let passed = forms_ok && worst_trivial == 0.0 && newton_count > 0 && worst_newton < 1e-10 && classified.len() == 4 && u_ok && refined.residual < 1e-10;
    outcome(
        passed,
        format!(
            "forms {forms:?}; trivial residual max {worst_trivial} on 1000 points (printed transcriptions: {worst_printed_trivial:.3}); {newton_count} Newton equilibria, residual max {worst_newton:.1e}; printed candidates: {}; u_sym equilibrium {:?}",
            classified.join(", "),
            u.map(|x| (x * 1e6).round() / 1e6)
        ),
    )
}

fn degeneracy() -> Outcome {
    let geometry = box1(20);
    let leaked = (0..10_000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut g = rng::stream(SEED, domain::GILLESPIE, i);
            let l1 = 4.0 * g.random::<f64>();
            let variant = if i % 2 == 0 { Variant::Symmetric } else { Variant::Asymmetric };
            let params = Params::new(l1, l1 * g.random::<f64>(), 0.0, 1, variant).unwrap();
            let init = random_binary(geometry, &mut g);
            let t = dynamics::simulate(&init, &params, 5.0, &mut g, false).unwrap();
            t.events.iter().any(|e| e.new.is_sterile()) || !t.terminal.is_binary()
        })
        .count();
    let (lambda, side, t_max, trials) = (2.5, 100, 30.0, 2000);
    let s = Settings { geometry: box1(side), t_max, trials, seed: SEED };
    let homogeneous = montecarlo::estimate_survival(&Params::new(lambda, lambda, 1.0, 1, Variant::Symmetric).unwrap(), &s).unwrap();
    let mut g = rng::stream(SEED, domain::ENVIRONMENT, 0);
    let vertex = EnvironmentRates::vertex(&quenched::sample_environment(side, 1.0, &mut g), lambda, lambda);
    let edge = EnvironmentRates::edge(&quenched::sample_environment(side, 1.0, &mut g), &quenched::sample_environment(side, 1.0, &mut g), lambda, lambda);
    let qv = quenched::simulate_cpre(&vertex, s.geometry, t_max, trials, SEED + 1).unwrap();
    let qe = quenched::simulate_cpre(&edge, s.geometry, t_max, trials, SEED + 2).unwrap();
    let passed = leaked == 0 && homogeneous.overlaps(&qv) && homogeneous.overlaps(&qe);
    outcome(
        passed,
        format!(
            "{leaked}/10000 r=0 runs produced sterile states; homogeneous {:.3} [{:.3}, {:.3}], vertex {:.3} [{:.3}, {:.3}], edge {:.3} [{:.3}, {:.3}]",
            homogeneous.p_hat, homogeneous.ci_low, homogeneous.ci_high, qv.p_hat, qv.ci_low, qv.ci_high, qe.p_hat, qe.ci_low, qe.ci_high
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("table reproduction", Duration::from_secs(1), table_reproduction),
        ("bound formulas", Duration::from_secs(1), bound_formulas),
        ("backend equivalence", Duration::from_secs(120), backend_equivalence),
        ("coupling soundness", Duration::from_secs(180), coupling_soundness),
        ("pathwise r-monotonicity", Duration::from_secs(600), r_monotonicity),
        ("phase-transition phenomenology", Duration::from_secs(1200), phase_transition),
        ("mean-field verification", Duration::from_secs(60), mean_field),
        ("degeneracy reductions", Duration::from_secs(300), degeneracy),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let o = check();
        let elapsed = clock.elapsed();
        let in_time = elapsed <= *budget;
        let passed = o.passed && in_time;
        failures += !passed as usize;
        println!(
            "criterion {} {} {name}: {} ({:.2} s of {} s){}",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { " over budget" }
        );
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
