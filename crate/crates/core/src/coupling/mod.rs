//! Couplings of two processes on a shared box that keep them ordered.
//!
//! The lower process is always the first coordinate. A coupled rate table
//! (see [`table`]) gives, for the pair state at a site, the joint jumps and
//! their rates; neighbour-dependent rates use the joint neighbourhood so each
//! term of the birth excess is nonnegative on its own.

pub mod borrello;
pub mod conditions;
pub mod table;

use num_rational::BigRational;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{local_rates, Params, Variant};
use crate::lattice::{compare_configs, BoxGeometry, Configuration, LatticeError, SiteState};
use crate::rate::Rate;

pub use borrello::{verify_borrello_inequalities, RateFamily};
pub use conditions::{check_conditions, ConditionReport};
pub use table::{CouplingTable, RateExpr, Region, Row};

/// Which pair of processes is coupled, and under which initial-condition
/// contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    /// Two symmetric processes, any ordered initial pair.
    General,
    /// Two symmetric processes started from ordered `{0,1}` configurations.
    Restricted,
    /// Two asymmetric processes started from ordered `{0,1}` configurations.
    Asymmetric,
    /// Asymmetric below symmetric, ordered `{0,1}` starts.
    SymVsAsym,
    /// Symmetric process below a contact process on `{0,1}`.
    CpUpper,
    /// Contact process on `{2,3}` below a symmetric process.
    CpLower,
}

impl CouplingKind {
    pub const ALL: [CouplingKind; 6] = [
        CouplingKind::General,
        CouplingKind::Restricted,
        CouplingKind::Asymmetric,
        CouplingKind::SymVsAsym,
        CouplingKind::CpUpper,
        CouplingKind::CpLower,
    ];

    pub fn table(self) -> CouplingTable {
        match self {
            CouplingKind::General => table::general(),
            CouplingKind::Restricted => table::restricted(),
            CouplingKind::Asymmetric => table::asymmetric(),
            CouplingKind::SymVsAsym => table::sym_vs_asym(),
            CouplingKind::CpUpper => table::cp_upper(),
            CouplingKind::CpLower => table::cp_lower(),
        }
    }

    /// Marginal dynamics of the two coordinates.
    pub fn marginals(self, p1: &Params, p2: &Params) -> (Marginal, Marginal) {
        let cprs = |p: &Params, v: Variant| Marginal::Cprs { lambda1: p.lambda1, lambda2: p.lambda2, r: p.r, variant: v };
        match self {
            CouplingKind::General | CouplingKind::Restricted => (cprs(p1, Variant::Symmetric), cprs(p2, Variant::Symmetric)),
            CouplingKind::Asymmetric => (cprs(p1, Variant::Asymmetric), cprs(p2, Variant::Asymmetric)),
            CouplingKind::SymVsAsym => (cprs(p1, Variant::Asymmetric), cprs(p2, Variant::Symmetric)),
            CouplingKind::CpUpper => (
                cprs(p1, Variant::Symmetric),
                Marginal::Cprs { lambda1: p2.lambda1, lambda2: 0.0, r: 0.0, variant: Variant::Symmetric },
            ),
            CouplingKind::CpLower => (Marginal::SterileContact { lambda: p1.lambda2 }, cprs(p2, Variant::Symmetric)),
        }
    }

    /// Whether the kind promises that unordered pair states never occur.
    pub fn restricted_contract(self) -> bool {
        self != CouplingKind::General
    }

    /// States each coordinate can ever occupy.
    pub fn state_spaces(self) -> (Vec<SiteState>, Vec<SiteState>) {
        use SiteState::*;
        match self {
            CouplingKind::CpLower => (vec![Sterile, Mixed], SiteState::ALL.to_vec()),
            CouplingKind::CpUpper => (SiteState::ALL.to_vec(), vec![Empty, Wild]),
            _ => (SiteState::ALL.to_vec(), SiteState::ALL.to_vec()),
        }
    }

    /// Admissible single-site states of the initial configurations.
    pub fn initial_states(self) -> (Vec<SiteState>, Vec<SiteState>) {
        use SiteState::*;
        let binary = vec![Empty, Wild];
        match self {
            CouplingKind::General => (SiteState::ALL.to_vec(), SiteState::ALL.to_vec()),
            CouplingKind::CpLower => (vec![Sterile, Mixed], SiteState::ALL.to_vec()),
            _ => (binary.clone(), binary),
        }
    }
}

/// Single-coordinate dynamics, used to check marginal projections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Marginal {
    Cprs { lambda1: f64, lambda2: f64, r: f64, variant: Variant },
    /// Contact process on `{2,3}`: `2 -> 3` at rate `λ·n3`, `3 -> 2` at rate 1.
    SterileContact { lambda: f64 },
}

impl Marginal {
    /// Rate of `state -> target` given the neighbour counts.
    pub fn rate<R: Rate>(&self, state: SiteState, target: SiteState, n1: u32, n3: u32) -> R {
        match *self {
            Marginal::Cprs { lambda1, lambda2, r, variant } => {
                let rates = local_rates(state, n1, n3, &R::from_f64(lambda1), &R::from_f64(lambda2), &R::from_f64(r), variant);
                rates.into_iter().filter(|(s, _)| *s == target).fold(R::zero(), |acc, (_, q)| acc + q)
            }
            Marginal::SterileContact { lambda } => match (state, target) {
                (SiteState::Sterile, SiteState::Mixed) => R::from_count(n3) * R::from_f64(lambda),
                (SiteState::Mixed, SiteState::Sterile) => R::one(),
                _ => R::zero(),
            },
        }
    }

    /// Birth-rate parameters `(λ1, λ2)` seen by the table's birth terms.
    fn birth_params(&self) -> (f64, f64) {
        match *self {
            Marginal::Cprs { lambda1, lambda2, .. } => (lambda1, lambda2),
            Marginal::SterileContact { lambda } => (lambda, lambda),
        }
    }

    fn release(&self) -> f64 {
        match *self {
            Marginal::Cprs { r, .. } => r,
            Marginal::SterileContact { .. } => 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("pair state ({lower},{upper}) at site {site} is unordered, which the {kind:?} coupling excludes")]
    ContractViolation { site: usize, lower: SiteState, upper: SiteState, kind: CouplingKind },
    #[error("no coupled transition listed for pair state ({0},{1})")]
    NoRow(SiteState, SiteState),
    #[error("neighbourhood of site {0} holds an unordered pair; the birth excess is undefined")]
    UnorderedNeighborhood(usize),
    #[error("negative coupled rate {rate} for ({from:?} -> {to:?})")]
    NegativeRate { from: (SiteState, SiteState), to: (SiteState, SiteState), rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairConfiguration {
    pub lower: Configuration,
    pub upper: Configuration,
}

impl PairConfiguration {
    pub fn new(lower: Configuration, upper: Configuration) -> Result<Self, CouplingError> {
        if lower.geometry() != upper.geometry() {
            return Err(LatticeError::GeometryMismatch.into());
        }
        Ok(Self { lower, upper })
    }

    pub fn geometry(&self) -> &BoxGeometry {
        self.lower.geometry()
    }

    pub fn is_ordered(&self) -> bool {
        compare_configs(&self.lower, &self.upper).map(|o| o.is_le()).unwrap_or(false)
    }

    pub fn at(&self, x: usize) -> (SiteState, SiteState) {
        (self.lower.at(x), self.upper.at(x))
    }

    /// Counts of neighbour pair states, `joint[a][b]` for lower code `a` and
    /// upper code `b`.
    pub fn joint_neighborhood(&self, x: usize) -> Result<JointNeighborhood, CouplingError> {
        let g = self.geometry();
        g.check(x)?;
        let mut joint = JointNeighborhood::default();
        for slot in 0..g.degree() {
            if let Some(y) = g.neighbor(x, slot) {
                let (a, b) = self.at(y);
                joint.counts[a.code() as usize][b.code() as usize] += 1;
            }
        }
        Ok(joint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize)]
pub struct JointNeighborhood {
    pub counts: [[u32; 4]; 4],
}

impl JointNeighborhood {
    fn c(&self, a: u8, b: u8) -> u32 {
        self.counts[a as usize][b as usize]
    }

    pub fn lower_counts(&self) -> (u32, u32) {
        (self.counts[1].iter().sum(), self.counts[3].iter().sum())
    }

    pub fn upper_counts(&self) -> (u32, u32) {
        (self.counts.iter().map(|row| row[1]).sum(), self.counts.iter().map(|row| row[3]).sum())
    }

    pub fn is_ordered(&self) -> bool {
        (0..4u8).all(|a| {
            (0..4u8).all(|b| {
                self.c(a, b) == 0 || SiteState::from_code(a).unwrap() <= SiteState::from_code(b).unwrap()
            })
        })
    }
}

/// Parameters entering the rate expressions, in the requested scalar type.
struct Coefficients<R> {
    l1: (R, R),
    l2: (R, R),
    r: (R, R),
}

impl<R: Rate> Coefficients<R> {
    fn new(lower: &Marginal, upper: &Marginal) -> Self {
        let (a1, a2) = lower.birth_params();
        let (b1, b2) = upper.birth_params();
        Self {
            l1: (R::from_f64(a1), R::from_f64(b1)),
            l2: (R::from_f64(a2), R::from_f64(b2)),
            r: (R::from_f64(lower.release()), R::from_f64(upper.release())),
        }
    }
}

fn count<R: Rate>(n: u32) -> R {
    R::from_count(n)
}

/// Value of a rate expression at a site with joint neighbourhood `joint`.
pub fn evaluate<R: Rate>(expr: RateExpr, lower: &Marginal, upper: &Marginal, joint: &JointNeighborhood) -> Option<R> {
    let k = Coefficients::<R>::new(lower, upper);
    let (n1_low, n3_low) = joint.lower_counts();
    let (n1_up, n3_up) = joint.upper_counts();
    let lower_birth = || count::<R>(n1_low) * k.l1.0.clone() + count::<R>(n3_low) * k.l2.0.clone();
    Some(match expr {
        RateExpr::LowerBirth => lower_birth(),
        RateExpr::UpperBirth => count::<R>(n1_up) * k.l1.1.clone() + count::<R>(n3_up) * k.l2.1.clone(),
        RateExpr::BirthExcess => {
            if !joint.is_ordered() {
                return None;
            }
            let c = |a, b| count::<R>(joint.c(a, b));
            (k.l1.1.clone() - k.l1.0.clone()) * c(1, 1)
                + (k.l1.1.clone() - k.l2.0.clone()) * c(3, 1)
                + (k.l2.1.clone() - k.l2.0.clone()) * c(3, 3)
                + k.l1.1.clone() * (c(0, 1) + c(2, 1))
                + k.l2.1.clone() * (c(0, 3) + c(2, 3))
        }
        RateExpr::LowerRelease => k.r.0.clone(),
        RateExpr::UpperRelease => k.r.1.clone(),
        RateExpr::ReleaseExcess => k.r.0.clone() - k.r.1.clone(),
        RateExpr::One => R::one(),
        RateExpr::LowerReleaseMinusOne => k.r.0.clone() - R::one(),
        RateExpr::OneMinusLowerBirth => R::one() - lower_birth(),
        RateExpr::PrintedSlack => {
            (R::one() - k.l1.0.clone()) * count::<R>(n1_low) + (R::one() - k.l2.0.clone()) * count::<R>(n3_low)
        }
    })
}

/// Coupled jumps at a site described by its pair state and joint
/// neighbourhood.
pub fn coupled_rates_local<R: Rate>(
    table: &CouplingTable,
    state: (SiteState, SiteState),
    joint: &JointNeighborhood,
    lower: &Marginal,
    upper: &Marginal,
) -> Result<Vec<((SiteState, SiteState), R)>, CouplingError> {
    if !table.covers(state) {
        return Err(CouplingError::NoRow(state.0, state.1));
    }
    table
        .rows_from(state)
        .map(|row| {
            evaluate::<R>(row.rate, lower, upper, joint)
                .map(|q| (row.to, q))
                .ok_or(CouplingError::UnorderedNeighborhood(usize::MAX))
        })
        .collect()
}

/// Coupled jumps at `x`: the table rows for the pair state there, with
/// rates evaluated from both neighbourhoods.
pub fn coupled_rates(
    pair: &PairConfiguration,
    x: usize,
    p1: &Params,
    p2: &Params,
    kind: CouplingKind,
) -> Result<Vec<((SiteState, SiteState), f64)>, CouplingError> {
    coupled_rates_with(&kind.table(), pair, x, p1, p2, kind)
}

fn coupled_rates_with(
    table: &CouplingTable,
    pair: &PairConfiguration,
    x: usize,
    p1: &Params,
    p2: &Params,
    kind: CouplingKind,
) -> Result<Vec<((SiteState, SiteState), f64)>, CouplingError> {
    let joint = pair.joint_neighborhood(x)?;
    let state = pair.at(x);
    if kind.restricted_contract() && state.0 > state.1 {
        return Err(CouplingError::ContractViolation { site: x, lower: state.0, upper: state.1, kind });
    }
    let (lower, upper) = kind.marginals(p1, p2);
    coupled_rates_local::<f64>(table, state, &joint, &lower, &upper).map_err(|e| match e {
        CouplingError::UnorderedNeighborhood(_) => CouplingError::UnorderedNeighborhood(x),
        other => other,
    })
}

/// Gillespie simulation of a coupled pair.
#[derive(Debug, Clone)]
pub struct CoupledProcess {
    pub pair: PairConfiguration,
    pub time: f64,
    p1: Params,
    p2: Params,
    kind: CouplingKind,
    table: CouplingTable,
}

impl CoupledProcess {
    pub fn new(pair: PairConfiguration, p1: Params, p2: Params, kind: CouplingKind) -> Self {
        Self::with_table(pair, p1, p2, kind, kind.table())
    }

    pub fn with_table(pair: PairConfiguration, p1: Params, p2: Params, kind: CouplingKind, table: CouplingTable) -> Self {
        Self { pair, time: 0.0, p1, p2, kind, table }
    }

    /// One coupled jump; `Ok(None)` when the clock passes `t_max` or no
    /// jump is possible.
    pub fn step<G: Rng + ?Sized>(&mut self, rng: &mut G, t_max: f64) -> Result<Option<usize>, CouplingError> {
        let n = self.pair.geometry().sites();
        let mut jumps: Vec<(usize, (SiteState, SiteState), f64)> = Vec::new();
        let mut total = 0.0;
        for x in 0..n {
            for (to, q) in coupled_rates_with(&self.table, &self.pair, x, &self.p1, &self.p2, self.kind)? {
                if q < 0.0 {
                    return Err(CouplingError::NegativeRate { from: self.pair.at(x), to, rate: q });
                }
                if q > 0.0 {
                    total += q;
                    jumps.push((x, to, q));
                }
            }
        }
        if total <= 0.0 {
            self.time = t_max;
            return Ok(None);
        }
        let e: f64 = Exp1.sample(rng);
        let t = self.time + e / total;
        if t > t_max {
            self.time = t_max;
            return Ok(None);
        }
        self.time = t;
        let mut u = rng.random::<f64>() * total;
        let mut chosen = jumps[jumps.len() - 1];
        for j in &jumps {
            if u < j.2 {
                chosen = *j;
                break;
            }
            u -= j.2;
        }
        let (x, (a, b), _) = chosen;
        self.pair.lower.put(x, a);
        self.pair.upper.put(x, b);
        Ok(Some(x))
    }
}

/// One coupled jump on a standalone pair.
pub fn coupled_step<G: Rng + ?Sized>(
    pair: &PairConfiguration,
    p1: &Params,
    p2: &Params,
    kind: CouplingKind,
    rng: &mut G,
) -> Result<PairConfiguration, CouplingError> {
    let mut process = CoupledProcess::new(pair.clone(), *p1, *p2, kind);
    process.step(rng, f64::INFINITY)?;
    Ok(process.pair)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionViolation {
    pub from: (SiteState, SiteState),
    pub joint: JointNeighborhood,
    /// 0 for the lower coordinate, 1 for the upper one.
    pub coordinate: usize,
    pub target: SiteState,
    pub coupled: f64,
    pub marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeRate {
    pub from: (SiteState, SiteState),
    pub to: (SiteState, SiteState),
    pub rate: RateExpr,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub table: &'static str,
    pub cases: usize,
    pub violations: Vec<ProjectionViolation>,
    pub negative_rates: Vec<NegativeRate>,
}

impl ProjectionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check one (pair state, neighbourhood) case exactly, appending findings.
fn project_case(
    table: &CouplingTable,
    state: (SiteState, SiteState),
    joint: &JointNeighborhood,
    lower: &Marginal,
    upper: &Marginal,
    report: &mut ProjectionReport,
) {
    let Ok(rates) = coupled_rates_local::<BigRational>(table, state, joint, lower, upper) else { return };
    report.cases += 1;
    for (row, (_, q)) in table.rows_from(state).zip(&rates) {
        if q.is_negative_rate() {
            let neg = NegativeRate { from: state, to: row.to, rate: row.rate, value: Rate::to_f64(q) };
            if !report.negative_rates.iter().any(|n| n.from == neg.from && n.to == neg.to && n.rate == neg.rate) {
                report.negative_rates.push(neg);
            }
        }
    }
    let (n1_low, n3_low) = joint.lower_counts();
    let (n1_up, n3_up) = joint.upper_counts();
    for target in SiteState::ALL {
        let zero = <BigRational as num_traits::Zero>::zero();
        if target != state.0 {
            let coupled = rates.iter().filter(|(to, _)| to.0 == target).fold(zero.clone(), |a, (_, q)| a + q.clone());
            let marginal: BigRational = lower.rate(state.0, target, n1_low, n3_low);
            if coupled != marginal {
                report.violations.push(ProjectionViolation {
                    from: state,
                    joint: *joint,
                    coordinate: 0,
                    target,
                    coupled: Rate::to_f64(&coupled),
                    marginal: Rate::to_f64(&marginal),
                });
            }
        }
        if target != state.1 {
            let coupled = rates.iter().filter(|(to, _)| to.1 == target).fold(zero, |a, (_, q)| a + q.clone());
            let marginal: BigRational = upper.rate(state.1, target, n1_up, n3_up);
            if coupled != marginal {
                report.violations.push(ProjectionViolation {
                    from: state,
                    joint: *joint,
                    coordinate: 1,
                    target,
                    coupled: Rate::to_f64(&coupled),
                    marginal: Rate::to_f64(&marginal),
                });
            }
        }
    }
}

/// Ordered single-site pair states within the given state spaces.
pub fn ordered_pairs(lower: &[SiteState], upper: &[SiteState]) -> Vec<(SiteState, SiteState)> {
    let mut out = Vec::new();
    for &a in lower {
        for &b in upper {
            if a <= b {
                out.push((a, b));
            }
        }
    }
    out
}

/// Every joint neighbourhood with `degree` slots filled by ordered pairs
/// from the state spaces of `kind` or left outside the box.
pub fn ordered_neighborhoods(kind: CouplingKind, degree: usize) -> Vec<JointNeighborhood> {
    let (low, up) = kind.state_spaces();
    let pairs = ordered_pairs(&low, &up);
    let mut out = vec![JointNeighborhood::default()];
    for _ in 0..degree {
        let mut next = Vec::with_capacity(out.len() * (pairs.len() + 1));
        for j in &out {
            next.push(*j);
            for (a, b) in &pairs {
                let mut k = *j;
                k.counts[a.code() as usize][b.code() as usize] += 1;
                next.push(k);
            }
        }
        next.sort_by_key(|j| j.counts);
        next.dedup();
        out = next;
    }
    out
}

/// Exact projection check of `table` over every pair state it lists and
/// every ordered joint neighbourhood with `degree` slots.
pub fn check_projection_exhaustive(
    table: &CouplingTable,
    kind: CouplingKind,
    p1: &Params,
    p2: &Params,
    degree: usize,
) -> ProjectionReport {
    let (lower, upper) = kind.marginals(p1, p2);
    let mut report = ProjectionReport { table: table.name, cases: 0, violations: Vec::new(), negative_rates: Vec::new() };
    let neighborhoods = ordered_neighborhoods(kind, degree);
    for state in table.states() {
        for joint in &neighborhoods {
            project_case(table, state, joint, &lower, &upper, &mut report);
        }
    }
    report
}

/// Exact projection check at every site of the given pair configurations.
pub fn check_marginal_projection(
    kind: CouplingKind,
    p1: &Params,
    p2: &Params,
    sample: &[PairConfiguration],
) -> Result<ProjectionReport, CouplingError> {
    let table = kind.table();
    let (lower, upper) = kind.marginals(p1, p2);
    let mut report = ProjectionReport { table: table.name, cases: 0, violations: Vec::new(), negative_rates: Vec::new() };
    for pair in sample {
        for x in 0..pair.geometry().sites() {
            let joint = pair.joint_neighborhood(x)?;
            project_case(&table, pair.at(x), &joint, &lower, &upper, &mut report);
        }
    }
    Ok(report)
}

/// Random ordered pair with both coordinates drawn from the admissible
/// initial states of `kind`.
pub fn random_ordered_pair<G: Rng + ?Sized>(geometry: BoxGeometry, kind: CouplingKind, rng: &mut G) -> PairConfiguration {
    let (low_states, up_states) = kind.initial_states();
    let n = geometry.sites();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let a = low_states[rng.random_range(0..low_states.len())];
        let above: Vec<_> = up_states.iter().copied().filter(|&b| b >= a).collect();
        let b = if above.is_empty() { a } else { above[rng.random_range(0..above.len())] };
        lower.push(a);
        upper.push(b);
    }
    PairConfiguration::new(
        Configuration::from_states(geometry, lower).expect("sized to box"),
        Configuration::from_states(geometry, upper).expect("sized to box"),
    )
    .expect("same box")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::rng;

    fn p(l1: f64, l2: f64, r: f64) -> Params {
        Params::new(l1, l2, r, 1, Variant::Symmetric).unwrap()
    }

    fn line(lower: &[u8], upper: &[u8]) -> PairConfiguration {
        let g = BoxGeometry::new(1, lower.len(), Boundary::EmptyExterior).unwrap();
        PairConfiguration::new(Configuration::from_codes(g, lower).unwrap(), Configuration::from_codes(g, upper).unwrap()).unwrap()
    }

    fn as_codes(v: Vec<((SiteState, SiteState), f64)>) -> Vec<((u8, u8), f64)> {
        v.into_iter().map(|((a, b), q)| ((a.code(), b.code()), q)).collect()
    }

    #[test]
    fn empty_pair_rows() {
        // site 1 has one wild neighbour in both coordinates
        let pair = line(&[1, 0, 0], &[1, 0, 0]);
        let got = as_codes(coupled_rates(&pair, 1, &p(2.0, 0.5, 2.0), &p(2.0, 0.5, 1.0), CouplingKind::Restricted).unwrap());
        assert_eq!(got, vec![((1, 1), 2.0), ((0, 1), 0.0), ((2, 2), 1.0), ((2, 0), 1.0)]);
    }

    #[test]
    fn mixed_pair_rows() {
        let pair = line(&[3], &[3]);
        let got = as_codes(coupled_rates(&pair, 0, &p(2.0, 0.5, 2.0), &p(2.0, 0.5, 1.0), CouplingKind::General).unwrap());
        assert_eq!(got, vec![((1, 1), 1.0), ((2, 2), 1.0)]);
    }

    #[test]
    fn zero_three_restricted_rows() {
        let pair = line(&[1, 0, 3], &[1, 3, 3]);
        let (a, b) = (p(2.0, 0.5, 1.5), p(2.0, 0.5, 1.0));
        let got = as_codes(coupled_rates_with(&table::restricted(), &pair, 1, &a, &b, CouplingKind::General).unwrap());
        assert_eq!(got, vec![((1, 3), 2.5), ((0, 1), 1.0), ((0, 2), 1.0), ((2, 3), 1.5)]);
    }

    #[test]
    fn restricted_contract_rejects_unordered() {
        let pair = line(&[1], &[0]);
        let err = coupled_rates(&pair, 0, &p(2.0, 0.5, 1.0), &p(2.0, 0.5, 1.0), CouplingKind::Restricted).unwrap_err();
        assert!(matches!(err, CouplingError::ContractViolation { .. }));
        // the general coupling lists unordered rows
        assert!(coupled_rates(&pair, 0, &p(0.5, 0.2, 1.0), &p(0.5, 0.2, 1.0), CouplingKind::General).is_ok());
    }

    #[test]
    fn every_table_projects_exactly() {
        let cases: Vec<(CouplingKind, Params, Params)> = vec![
            (CouplingKind::General, p(0.5, 0.2, 2.0), p(0.9, 0.3, 1.5)),
            (CouplingKind::Restricted, p(2.0, 0.5, 2.0), p(3.0, 0.75, 1.0)),
            (CouplingKind::Asymmetric, p(2.0, 0.5, 2.0), p(3.0, 0.75, 1.0)),
            (CouplingKind::SymVsAsym, p(2.0, 0.5, 1.0), p(2.0, 0.5, 1.0)),
            (CouplingKind::CpUpper, p(2.0, 0.5, 1.0), p(2.5, 0.0, 0.0)),
            (CouplingKind::CpLower, p(0.5, 0.5, 0.0), p(2.0, 0.5, 1.0)),
        ];
        for (kind, a, b) in cases {
            for degree in [1, 2, 4] {
                let rep = check_projection_exhaustive(&kind.table(), kind, &a, &b, degree);
                assert!(rep.passed(), "{kind:?}: {:?}", rep.violations.first());
                assert!(rep.cases > 0);
            }
        }
    }

    #[test]
    fn release_order_violation_makes_rates_negative() {
        let rep = check_projection_exhaustive(&table::restricted(), CouplingKind::Restricted, &p(2.0, 0.5, 1.0), &p(2.0, 0.5, 2.0), 2);
        assert!(rep.passed());
        assert!(rep.negative_rates.iter().any(|n| n.rate == RateExpr::ReleaseExcess));
    }

    #[test]
    fn printed_zero_three_row_breaks_projection_off_single_neighbour() {
        let kind = CouplingKind::General;
        let rep = check_projection_exhaustive(&table::general_as_printed(), kind, &p(0.5, 0.2, 2.0), &p(0.9, 0.3, 1.5), 2);
        assert!(!rep.passed());
        for v in &rep.violations {
            assert_eq!(v.from, (SiteState::Empty, SiteState::Mixed));
            let (n1, n3) = v.joint.lower_counts();
            assert_ne!(n1 + n3, 1);
        }
    }

    #[test]
    fn typo_in_table_is_caught() {
        let bad = table::restricted().with_rate((2, 1), (2, 3), RateExpr::LowerRelease);
        let rep = check_projection_exhaustive(&bad, CouplingKind::Restricted, &p(2.0, 0.5, 2.0), &p(2.0, 0.5, 1.0), 2);
        assert!(rep.violations.iter().any(|v| v.from == (SiteState::Sterile, SiteState::Wild) && v.coordinate == 1));
    }

    #[test]
    fn diagonal_stays_diagonal() {
        let g = BoxGeometry::periodic(1, 8).unwrap();
        let params = p(2.0, 0.5, 1.0);
        let c = Configuration::from_codes(g, &[0, 1, 1, 0, 1, 0, 0, 1]).unwrap();
        let mut proc = CoupledProcess::new(PairConfiguration::new(c.clone(), c).unwrap(), params, params, CouplingKind::Restricted);
        let mut rng = rng::stream(2, rng::domain::COUPLED, 0);
        while proc.step(&mut rng, 5.0).unwrap().is_some() {
            assert_eq!(proc.pair.lower, proc.pair.upper);
        }
    }

    #[test]
    fn ordered_pairs_stay_ordered() {
        let g = BoxGeometry::periodic(1, 6).unwrap();
        for kind in [CouplingKind::Restricted, CouplingKind::Asymmetric, CouplingKind::SymVsAsym, CouplingKind::CpUpper, CouplingKind::CpLower] {
            let (a, b) = match kind {
                CouplingKind::CpUpper => (p(2.0, 0.5, 1.0), p(2.5, 0.0, 0.0)),
                CouplingKind::CpLower => (p(0.5, 0.5, 0.0), p(2.0, 0.5, 1.0)),
                _ => (p(2.0, 0.5, 1.5), p(2.5, 0.5, 1.0)),
            };
            for trial in 0..50 {
                let mut rng = rng::stream(8, rng::domain::COUPLED, trial);
                let pair = random_ordered_pair(g, kind, &mut rng);
                let mut proc = CoupledProcess::new(pair, a, b, kind);
                while proc.step(&mut rng, 3.0).unwrap().is_some() {
                    assert!(proc.pair.is_ordered(), "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn general_coupling_keeps_order_from_any_ordered_start() {
        let g = BoxGeometry::periodic(1, 6).unwrap();
        let (a, b) = (p(0.5, 0.2, 2.0), p(0.9, 0.3, 1.5));
        for trial in 0..50 {
            let mut rng = rng::stream(9, rng::domain::COUPLED, trial);
            let pair = random_ordered_pair(g, CouplingKind::General, &mut rng);
            let mut proc = CoupledProcess::new(pair, a, b, CouplingKind::General);
            while proc.step(&mut rng, 3.0).unwrap().is_some() {
                assert!(proc.pair.is_ordered());
            }
        }
    }
}
