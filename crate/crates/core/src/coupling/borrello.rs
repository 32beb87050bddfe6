//! Finite check of the monotonicity inequalities for nearest-neighbour
//! systems whose sites move along the chain `A < B < C < D`.
//!
//! A family lists three kinds of rates, indexed by the letters' ranks:
//!
//! * `R[k][α][β]`: a site in state `β` jumps to `β + k` because a
//!   neighbour is in state `α`;
//! * `P⁺[k][β]`: spontaneous jump `β -> β + k`;
//! * `P⁻[k][α]`: spontaneous jump `α -> α − k`.
//!
//! A system with family `f2` dominates one with family `f1` iff for all
//! `(α,β) <= (γ,δ)` and `j, h >= 0`
//!
//! ```text
//! (i)  Σ_{k > δ−β+j} Π₁[k](α,β)  <=  Σ_{l > j} Π₂[l](γ,δ)
//! (ii) Σ_{k > h} P₁⁻[k](α)       >=  Σ_{l > γ−α+h} P₂⁻[l](γ)
//! ```
//!
//! with `Π[k](α,β) = R[k][α][β] + P⁺[k][β]`. States outside a family's
//! support are skipped, and `j, h ∈ {0,1}` exhausts the non-trivial cases.

use num_rational::BigRational;
use serde::Serialize;

use crate::lattice::SiteState;
use crate::rate::Rate;

const MAX_JUMP: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFamily {
    pub name: String,
    /// `neighbor[k-1][α][β]`
    pub neighbor: [[[f64; 4]; 4]; MAX_JUMP],
    /// `up[k-1][β]`
    pub up: [[f64; 4]; MAX_JUMP],
    /// `down[k-1][α]`
    pub down: [[f64; 4]; MAX_JUMP],
    /// Ranks the process can occupy.
    pub support: Vec<u8>,
}

const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const D: usize = 3;

impl RateFamily {
    fn zero(name: impl Into<String>, support: Vec<u8>) -> Self {
        Self { name: name.into(), neighbor: [[[0.0; 4]; 4]; MAX_JUMP], up: [[0.0; 4]; MAX_JUMP], down: [[0.0; 4]; MAX_JUMP], support }
    }

    pub fn asymmetric(lambda1: f64, lambda2: f64, r: f64) -> Self {
        let mut f = Self::zero("asymmetric", vec![0, 1, 2, 3]);
        f.neighbor[1][D][B] = lambda1;
        f.neighbor[1][C][B] = lambda2;
        f.up[0][A] = 1.0;
        f.up[0][C] = 1.0;
        f.down[0][B] = r;
        f.down[0][D] = r;
        f.down[1][C] = 1.0;
        f.down[1][D] = 1.0;
        f
    }

    pub fn symmetric(lambda1: f64, lambda2: f64, r: f64) -> Self {
        let mut f = Self::asymmetric(lambda1, lambda2, r);
        f.name = "symmetric".into();
        f.neighbor[1][D][A] = lambda1;
        f.neighbor[1][C][A] = lambda2;
        f
    }

    /// Contact process on `{0,1}` (letters `B`, `D`).
    pub fn contact_wild(lambda: f64) -> Self {
        let mut f = Self::zero("contact on {0,1}", vec![B as u8, D as u8]);
        f.neighbor[1][D][B] = lambda;
        f.down[1][D] = 1.0;
        f
    }

    /// Contact process on `{2,3}` (letters `A`, `C`).
    pub fn contact_sterile(lambda: f64) -> Self {
        let mut f = Self::zero("contact on {2,3}", vec![A as u8, C as u8]);
        f.neighbor[1][C][A] = lambda;
        f.down[1][C] = 1.0;
        f
    }

    fn pi(&self, k: usize, alpha: usize, beta: usize) -> BigRational {
        <BigRational as Rate>::from_f64(self.neighbor[k - 1][alpha][beta] + self.up[k - 1][beta])
    }

    fn p_down(&self, k: usize, alpha: usize) -> BigRational {
        <BigRational as Rate>::from_f64(self.down[k - 1][alpha])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Inequality {
    /// Upward jumps of the lower system dominated by the upper one.
    Up,
    /// Downward jumps of the upper system dominated by the lower one.
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub inequality: Inequality,
    pub alpha: char,
    pub beta: char,
    pub gamma: char,
    pub delta: char,
    /// `j` for [`Inequality::Up`], `h` for [`Inequality::Down`].
    pub shift: usize,
    pub lhs: f64,
    pub rhs: f64,
}

fn letter(rank: usize) -> char {
    SiteState::from_rank(rank as u8).expect("rank < 4").letter()
}

fn sum_from<F: Fn(usize) -> BigRational>(from_exclusive: isize, f: F) -> BigRational {
    let mut acc = <BigRational as num_traits::Zero>::zero();
    for k in 1..=MAX_JUMP {
        if k as isize > from_exclusive {
            acc = acc + f(k);
        }
    }
    acc
}

/// Violated instances of (i) and (ii) for `f1` (lower) against `f2`
/// (upper), compared in exact rational arithmetic.
pub fn verify_borrello_inequalities(f1: &RateFamily, f2: &RateFamily) -> Vec<Violation> {
    let mut out = Vec::new();
    for &alpha in &f1.support {
        for &beta in &f1.support {
            for &gamma in f2.support.iter().filter(|&&g| g >= alpha) {
                for &delta in f2.support.iter().filter(|&&d| d >= beta) {
                    let (a, b, g, d) = (alpha as usize, beta as usize, gamma as usize, delta as usize);
                    for shift in 0..=1usize {
                        let lhs = sum_from(d as isize - b as isize + shift as isize, |k| f1.pi(k, a, b));
                        let rhs = sum_from(shift as isize, |l| f2.pi(l, g, d));
                        if lhs > rhs {
                            out.push(Violation {
                                inequality: Inequality::Up,
                                alpha: letter(a),
                                beta: letter(b),
                                gamma: letter(g),
                                delta: letter(d),
                                shift,
                                lhs: Rate::to_f64(&lhs),
                                rhs: Rate::to_f64(&rhs),
                            });
                        }
                        let lhs = sum_from(shift as isize, |k| f1.p_down(k, a));
                        let rhs = sum_from(g as isize - a as isize + shift as isize, |l| f2.p_down(l, g));
                        if lhs < rhs {
                            out.push(Violation {
                                inequality: Inequality::Down,
                                alpha: letter(a),
                                beta: letter(b),
                                gamma: letter(g),
                                delta: letter(d),
                                shift,
                                lhs: Rate::to_f64(&lhs),
                                rhs: Rate::to_f64(&rhs),
                            });
                        }
                    }
                }
            }
        }
    }
    // (ii) does not involve β, δ: keep one representative per binding
    out.dedup_by(|x, y| {
        x.inequality == Inequality::Down
            && y.inequality == Inequality::Down
            && (x.alpha, x.gamma, x.shift) == (y.alpha, y.gamma, y.shift)
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_eight_conditions_give_no_violation() {
        let f1 = RateFamily::symmetric(0.5, 0.2, 2.0);
        let f2 = RateFamily::symmetric(0.9, 0.3, 1.5);
        assert!(verify_borrello_inequalities(&f1, &f2).is_empty());
        let same = RateFamily::symmetric(1.0, 0.5, 1.0);
        assert!(verify_borrello_inequalities(&same, &same).is_empty());
    }

    #[test]
    fn small_release_rate_localised() {
        let f1 = RateFamily::symmetric(0.5, 0.2, 0.5);
        let f2 = RateFamily::symmetric(0.9, 0.3, 0.4);
        let v = verify_borrello_inequalities(&f1, &f2);
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.inequality == Inequality::Down));
        assert!(v.iter().any(|x| x.shift == 0 && x.alpha == 'B' && x.gamma == 'C' && x.lhs == 0.5 && x.rhs == 1.0));
    }

    #[test]
    fn release_order_localised() {
        let f1 = RateFamily::symmetric(0.5, 0.2, 1.5);
        let f2 = RateFamily::symmetric(0.9, 0.3, 2.0);
        let v = verify_borrello_inequalities(&f1, &f2);
        assert!(v.iter().any(|x| x.shift == 0 && x.alpha == 'B' && x.gamma == 'B'));
        assert!(v.iter().any(|x| x.shift == 0 && x.alpha == 'D' && x.gamma == 'D'));
    }

    #[test]
    fn large_birth_rate_localised() {
        let f1 = RateFamily::symmetric(1.5, 0.2, 2.0);
        let f2 = RateFamily::symmetric(1.6, 0.3, 1.5);
        let v = verify_borrello_inequalities(&f1, &f2);
        assert!(v.iter().any(|x| x.inequality == Inequality::Up
            && x.shift == 0
            && (x.alpha, x.beta, x.delta) == ('D', 'B', 'C')));
    }

    #[test]
    fn contact_dominates_symmetric() {
        let f1 = RateFamily::symmetric(2.0, 0.5, 1.0);
        assert!(verify_borrello_inequalities(&f1, &RateFamily::contact_wild(2.0)).is_empty());
        let v = verify_borrello_inequalities(&RateFamily::symmetric(2.0, 2.5, 1.0), &RateFamily::contact_wild(2.0));
        assert!(v.iter().any(|x| (x.alpha, x.beta, x.gamma, x.delta) == ('C', 'B', 'D', 'B')));
    }

    #[test]
    fn sterile_contact_below_symmetric() {
        let upper = RateFamily::symmetric(2.0, 0.5, 1.0);
        assert!(verify_borrello_inequalities(&RateFamily::contact_sterile(0.5), &upper).is_empty());
        let v = verify_borrello_inequalities(&RateFamily::contact_sterile(2.5), &upper);
        assert!(v.iter().any(|x| (x.alpha, x.beta, x.gamma, x.delta) == ('C', 'A', 'D', 'A')));
    }
}
