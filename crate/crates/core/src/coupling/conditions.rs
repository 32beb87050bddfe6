//! Parameter conditions under which a coupling keeps two processes ordered.

use serde::Serialize;

use crate::dynamics::Params;

use super::CouplingKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    /// Position in the condition list (1-based).
    pub index: usize,
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs <= rhs` when true.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub kind: CouplingKind,
    pub satisfied: bool,
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    pub fn violated(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.holds).collect()
    }
}

fn le(index: usize, statement: &'static str, lhs: f64, rhs: f64) -> Condition {
    Condition { index, statement, lhs, rhs, holds: lhs <= rhs }
}

/// `p1` is the lower process, `p2` the upper one. For
/// [`CouplingKind::CpUpper`] the upper contact rate is `p2.lambda1`; for
/// [`CouplingKind::CpLower`] the lower contact rate is `p1.lambda2`.
pub fn check_conditions(p1: &Params, p2: &Params, kind: CouplingKind) -> ConditionReport {
    let basic = || {
        vec![
            le(1, "lambda2(1) <= lambda1(1)", p1.lambda2, p1.lambda1),
            le(2, "lambda2(2) <= lambda1(2)", p2.lambda2, p2.lambda1),
            le(3, "lambda1(1) <= lambda1(2)", p1.lambda1, p2.lambda1),
            le(4, "lambda2(1) <= lambda2(2)", p1.lambda2, p2.lambda2),
            le(5, "r(1) >= r(2)", p2.r, p1.r),
        ]
    };
    let conditions = match kind {
        CouplingKind::General => {
            let mut c = basic();
            c.push(le(6, "lambda1(1) <= 1", p1.lambda1, 1.0));
            c.push(le(7, "lambda2(1) <= 1", p1.lambda2, 1.0));
            c.push(le(8, "r(1) >= 1", 1.0, p1.r));
            c
        }
        CouplingKind::Restricted | CouplingKind::Asymmetric | CouplingKind::SymVsAsym => basic(),
        CouplingKind::CpUpper => vec![
            le(1, "lambda2(1) <= lambda1(1)", p1.lambda2, p1.lambda1),
            le(2, "lambda1(1) <= contact rate", p1.lambda1, p2.lambda1),
        ],
        CouplingKind::CpLower => vec![
            le(1, "contact rate <= lambda2(2)", p1.lambda2, p2.lambda2),
            le(2, "lambda2(2) <= lambda1(2)", p2.lambda2, p2.lambda1),
        ],
    };
    ConditionReport { kind, satisfied: conditions.iter().all(|c| c.holds), conditions }
}
