//! Coupled transition tables as plain data.
//!
//! Each row says: when the pair at a site is `from`, jump to `to` at the
//! rate described by a [`RateExpr`]. Rates are evaluated from the two
//! parameter sets and the joint neighbourhood of the site.

use serde::Serialize;

use crate::lattice::SiteState;

/// Symbolic rate of a table row. "Lower" refers to the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RateExpr {
    /// `λ1⁽¹⁾·n1(η⁽¹⁾) + λ2⁽¹⁾·n3(η⁽¹⁾)`
    LowerBirth,
    /// `λ1⁽²⁾·n1(η⁽²⁾) + λ2⁽²⁾·n3(η⁽²⁾)`
    UpperBirth,
    /// Upper birth pressure minus lower birth pressure, computed term by
    /// term over joint neighbour classes.
    BirthExcess,
    LowerRelease,
    UpperRelease,
    /// `r⁽¹⁾ − r⁽²⁾`
    ReleaseExcess,
    One,
    /// `r⁽¹⁾ − 1`
    LowerReleaseMinusOne,
    /// `1 − (λ1⁽¹⁾·n1(η⁽¹⁾) + λ2⁽¹⁾·n3(η⁽¹⁾))`
    OneMinusLowerBirth,
    /// `(1 − λ1⁽¹⁾)·n1(η⁽¹⁾) + (1 − λ2⁽¹⁾)·n3(η⁽¹⁾)`, the form printed for the
    /// general `(0,3)` row; kept only to document that it breaks the
    /// marginals unless the site has exactly one wild neighbour.
    PrintedSlack,
}

/// Which part of the coupling a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    /// Basic coupling on ordered pair states.
    Ordered,
    /// Non-basic coupling for `(0,3)` keeping the order.
    GeneralZeroThree,
    /// Basic coupling for `(0,3)`, used when `(0,3)` is unreachable.
    RestrictedZeroThree,
    /// Basic coupling on unordered pair states.
    Unordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub from: (SiteState, SiteState),
    pub to: (SiteState, SiteState),
    pub rate: RateExpr,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTable {
    pub name: &'static str,
    pub rows: Vec<Row>,
}

impl CouplingTable {
    pub fn rows_from(&self, from: (SiteState, SiteState)) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.from == from)
    }

    pub fn covers(&self, from: (SiteState, SiteState)) -> bool {
        self.rows.iter().any(|r| r.from == from)
    }

    /// Pair states that have at least one row.
    pub fn states(&self) -> Vec<(SiteState, SiteState)> {
        let mut out: Vec<_> = self.rows.iter().map(|r| r.from).collect();
        out.dedup();
        out.sort_by_key(|(a, b)| (a.code(), b.code()));
        out.dedup();
        out
    }

    /// Replace the rate of one row, e.g. to build negative controls.
    pub fn with_rate(mut self, from: (u8, u8), to: (u8, u8), rate: RateExpr) -> Self {
        let from = pair(from);
        let to = pair(to);
        for row in &mut self.rows {
            if row.from == from && row.to == to {
                row.rate = rate;
            }
        }
        self
    }
}

fn pair((a, b): (u8, u8)) -> (SiteState, SiteState) {
    (SiteState::from_code(a).expect("valid code"), SiteState::from_code(b).expect("valid code"))
}

fn rows(region: Region, spec: &[((u8, u8), &[((u8, u8), RateExpr)])]) -> Vec<Row> {
    spec.iter()
        .flat_map(|(from, targets)| {
            targets.iter().map(move |(to, rate)| Row { from: pair(*from), to: pair(*to), rate: *rate, region })
        })
        .collect()
}

use RateExpr::*;

/// Basic coupling of two symmetric processes on ordered pair states.
pub fn symmetric_ordered() -> Vec<Row> {
    rows(
        Region::Ordered,
        &[
            ((0, 0), &[((1, 1), LowerBirth), ((0, 1), BirthExcess), ((2, 2), UpperRelease), ((2, 0), ReleaseExcess)]),
            ((1, 1), &[((0, 0), One), ((3, 3), UpperRelease), ((3, 1), ReleaseExcess)]),
            ((2, 2), &[((3, 3), LowerBirth), ((2, 3), BirthExcess), ((0, 0), One)]),
            ((3, 3), &[((1, 1), One), ((2, 2), One)]),
            ((2, 0), &[((3, 1), LowerBirth), ((2, 1), BirthExcess), ((0, 0), One), ((2, 2), UpperRelease)]),
            ((2, 3), &[((3, 3), LowerBirth), ((0, 1), One), ((2, 2), One)]),
            ((2, 1), &[((3, 1), LowerBirth), ((2, 0), One), ((0, 1), One), ((2, 3), UpperRelease)]),
            ((3, 1), &[((2, 0), One), ((1, 1), One), ((3, 3), UpperRelease)]),
            ((0, 1), &[((2, 3), UpperRelease), ((1, 1), LowerBirth), ((2, 1), ReleaseExcess), ((0, 0), One)]),
        ],
    )
}

/// Order-preserving `(0,3)` row for general initial conditions. The
/// `(0,1)` rate is `1 − λ1⁽¹⁾n1 − λ2⁽¹⁾n3`, the value that makes the upper
/// marginal leave state 3 for state 1 at rate 1.
pub fn symmetric_general_zero_three() -> Vec<Row> {
    rows(
        Region::GeneralZeroThree,
        &[((0, 3), &[((1, 1), LowerBirth), ((0, 1), OneMinusLowerBirth), ((2, 2), One), ((2, 3), LowerReleaseMinusOne)])],
    )
}

/// The general `(0,3)` row with its `(0,1)` rate as printed.
pub fn symmetric_general_zero_three_printed() -> Vec<Row> {
    rows(
        Region::GeneralZeroThree,
        &[((0, 3), &[((1, 1), LowerBirth), ((0, 1), PrintedSlack), ((2, 2), One), ((2, 3), LowerReleaseMinusOne)])],
    )
}

/// Basic-coupling `(0,3)` row; does not keep the order, only valid when the
/// state is unreachable.
pub fn restricted_zero_three() -> Vec<Row> {
    rows(
        Region::RestrictedZeroThree,
        &[((0, 3), &[((1, 3), LowerBirth), ((0, 1), One), ((0, 2), One), ((2, 3), LowerRelease)])],
    )
}

/// Basic coupling of two symmetric processes on unordered pair states.
pub fn symmetric_unordered() -> Vec<Row> {
    rows(
        Region::Unordered,
        &[
            ((1, 0), &[((1, 1), UpperBirth), ((3, 2), UpperRelease), ((3, 0), ReleaseExcess), ((0, 0), One)]),
            ((0, 2), &[((1, 3), LowerBirth), ((0, 3), BirthExcess), ((0, 0), One), ((2, 2), LowerRelease)]),
            ((1, 2), &[((1, 3), UpperBirth), ((3, 2), LowerRelease), ((1, 0), One), ((0, 2), One)]),
            ((1, 3), &[((0, 2), One), ((3, 3), LowerRelease), ((1, 1), One)]),
            ((3, 0), &[((1, 0), One), ((2, 0), One), ((3, 1), UpperBirth), ((3, 2), UpperRelease)]),
            ((3, 2), &[((3, 3), UpperBirth), ((1, 0), One), ((2, 2), One)]),
        ],
    )
}

/// Rows where a sterile-only lower site cannot receive births.
fn lower_blocked_rows(upper_symmetric: bool) -> Vec<Row> {
    let upper_birth: &[((u8, u8), RateExpr)] = if upper_symmetric { &[((2, 3), UpperBirth), ((0, 0), One)] } else { &[((0, 0), One)] };
    let mut spec: Vec<((u8, u8), &[((u8, u8), RateExpr)])> = vec![((2, 2), upper_birth)];
    spec.extend_from_slice(&[
        ((2, 0), &[((2, 1), UpperBirth), ((0, 0), One), ((2, 2), UpperRelease)][..]),
        ((2, 3), &[((0, 1), One), ((2, 2), One)][..]),
        ((2, 1), &[((2, 0), One), ((0, 1), One), ((2, 3), UpperRelease)][..]),
    ]);
    rows(Region::Ordered, &spec)
}

fn replace_lower_sterile(blocked: Vec<Row>) -> Vec<Row> {
    let mut out: Vec<Row> = symmetric_ordered()
        .into_iter()
        .filter(|r| r.from.0 != SiteState::Sterile)
        .collect();
    out.extend(blocked);
    out.extend(restricted_zero_three());
    out
}

pub fn general() -> CouplingTable {
    let mut rows = symmetric_ordered();
    rows.extend(symmetric_general_zero_three());
    rows.extend(symmetric_unordered());
    CouplingTable { name: "symmetric/general", rows }
}

/// The general table with the `(0,3) -> (0,1)` rate exactly as printed.
pub fn general_as_printed() -> CouplingTable {
    let mut rows = symmetric_ordered();
    rows.extend(symmetric_general_zero_three_printed());
    rows.extend(symmetric_unordered());
    CouplingTable { name: "symmetric/general (printed (0,3) row)", rows }
}

pub fn restricted() -> CouplingTable {
    let mut rows = symmetric_ordered();
    rows.extend(restricted_zero_three());
    CouplingTable { name: "symmetric/restricted", rows }
}

pub fn asymmetric() -> CouplingTable {
    CouplingTable { name: "asymmetric/asymmetric", rows: replace_lower_sterile(lower_blocked_rows(false)) }
}

/// Lower coordinate asymmetric, upper symmetric.
pub fn sym_vs_asym() -> CouplingTable {
    CouplingTable { name: "asymmetric/symmetric", rows: replace_lower_sterile(lower_blocked_rows(true)) }
}

/// Upper coordinate a contact process on `{0,1}`, seen as a symmetric
/// process with `λ2 = r = 0`.
pub fn cp_upper() -> CouplingTable {
    CouplingTable { name: "symmetric/contact", rows: restricted().rows }
}

/// Lower coordinate a contact process on `{2,3}` with rate `λ`.
pub fn cp_lower() -> CouplingTable {
    CouplingTable {
        name: "sterile contact/symmetric",
        rows: rows(
            Region::Ordered,
            &[
                ((2, 2), &[((3, 3), LowerBirth), ((2, 3), BirthExcess), ((2, 0), One)]),
                ((2, 0), &[((3, 1), LowerBirth), ((2, 1), BirthExcess), ((2, 2), UpperRelease)]),
                ((2, 3), &[((3, 3), LowerBirth), ((2, 1), One), ((2, 2), One)]),
                ((2, 1), &[((3, 1), LowerBirth), ((2, 0), One), ((2, 3), UpperRelease)]),
                ((3, 3), &[((2, 2), One), ((3, 1), One)]),
                ((3, 1), &[((2, 0), One), ((3, 3), UpperRelease)]),
            ],
        ),
    }
}
