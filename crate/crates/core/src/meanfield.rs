//! Mean-field densities: right-hand sides, RK4 integration to rest, Newton
//! refinement, equilibrium classification and the two bounds on `r`.
//!
//! Two coordinate systems are used. `u = (u0,u1,u2,u3)` are the densities of
//! the four states; `v = (v0,v1,v2)` are the densities of empty sites, of
//! sites with wild individuals and of sites with sterile individuals:
//!
//! ```text
//! u1 = 1 − v0 − v2,   u2 = 1 − v0 − v1,   u3 = v0 + v1 + v2 − 1
//! ```
//!
//! The u-systems are integrated in `(u1,u2,u3)` with `u0 = 1 − u1 − u2 − u3`.
//! The v-systems have three transcriptions of their first line, see
//! [`VForm`]; [`adjudicate`] picks the one whose equilibria agree with the
//! u-system.

use std::ops::Div;

use nalgebra::{Matrix3, Vector3};
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Params;
use crate::rate::Rate;

pub type State = [f64; 3];

pub const STEADY_TOL: f64 = 1e-9;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 200;
pub const DT: f64 = 1e-3;
pub const T_MAX: f64 = 1e4;
const PROJECT_TOL: f64 = 1e-9;
const DIVERGE_TOL: f64 = 1e-6;
const ADMISSIBLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("inadmissible state: {component} = {value}")]
    Inadmissible { component: &'static str, value: f64 },
    #[error("integration left the density domain at t = {time}: last states {trace:?}")]
    Instability { time: f64, trace: Vec<State> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// Asymmetric, v-coordinates.
    VAsym,
    /// Symmetric, u-coordinates.
    USym,
    /// Symmetric, v-coordinates.
    VSym,
    /// Asymmetric, u-coordinates; reference for [`System::VAsym`].
    UAsym,
}

impl System {
    pub const ALL: [System; 4] = [System::VAsym, System::USym, System::VSym, System::UAsym];

    pub fn name(self) -> &'static str {
        match self {
            System::VAsym => "v_asym",
            System::USym => "u_sym",
            System::VSym => "v_sym",
            System::UAsym => "u_asym",
        }
    }

    pub fn is_u(self) -> bool {
        matches!(self, System::USym | System::UAsym)
    }

    /// The u-system a v-system is checked against.
    pub fn reference(self) -> System {
        match self {
            System::VAsym | System::UAsym => System::UAsym,
            System::VSym | System::USym => System::USym,
        }
    }

    fn symmetric(self) -> bool {
        matches!(self, System::USym | System::VSym)
    }

    /// Four densities of a state in this system's coordinates, unchecked.
    pub fn densities(self, x: &State) -> [f64; 4] {
        if self.is_u() {
            [1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]]
        } else {
            u_from_v_unchecked(x)
        }
    }

    /// State in this system's coordinates from four densities.
    pub fn from_densities(self, u: &[f64; 4]) -> State {
        if self.is_u() {
            [u[1], u[2], u[3]]
        } else {
            v_from_u_unchecked(u)
        }
    }
}

impl std::str::FromStr for System {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| format!("unknown system {s:?}; expected v_asym, u_sym, v_sym or u_asym"))
    }
}

/// Transcription of the first line of a v-system.
///
/// `SumTail` and `ProductTail` keep the bracket as printed for that line,
/// with `v1` in place of `v2` in its third term, and end in `− v1 − v2 + 2`
/// or `− v1·v2 + 2`. `Derived` is obtained from the u-system: correct
/// bracket and the sum tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VForm {
    SumTail,
    ProductTail,
    Derived,
}

impl VForm {
    pub const ALL: [VForm; 3] = [VForm::SumTail, VForm::ProductTail, VForm::Derived];

    /// Form printed for the given system.
    pub fn printed(system: System) -> VForm {
        match system {
            System::VSym => VForm::ProductTail,
            _ => VForm::SumTail,
        }
    }
}

/// A system together with the transcription used for v-systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanField {
    pub system: System,
    pub form: VForm,
    pub dimension: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r: f64,
}

fn in_unit(component: &'static str, value: f64) -> Result<(), MeanFieldError> {
    if (-ADMISSIBLE_TOL..=1.0 + ADMISSIBLE_TOL).contains(&value) && value.is_finite() {
        Ok(())
    } else {
        Err(MeanFieldError::Inadmissible { component, value })
    }
}

fn u_from_v_unchecked(v: &State) -> [f64; 4] {
    [v[0], 1.0 - v[0] - v[2], 1.0 - v[0] - v[1], v[0] + v[1] + v[2] - 1.0]
}

fn v_from_u_unchecked(u: &[f64; 4]) -> State {
    [u[0], u[1] + u[3], u[2] + u[3]]
}

pub fn u_from_v(v: &State) -> Result<[f64; 4], MeanFieldError> {
    for (name, x) in ["v0", "v1", "v2"].into_iter().zip(v) {
        in_unit(name, *x)?;
    }
    let u = u_from_v_unchecked(v);
    for (name, x) in ["u0", "u1", "u2", "u3"].into_iter().zip(&u) {
        in_unit(name, *x)?;
    }
    Ok(u)
}

pub fn v_from_u(u: &[f64; 4]) -> Result<State, MeanFieldError> {
    for (name, x) in ["u0", "u1", "u2", "u3"].into_iter().zip(u) {
        in_unit(name, *x)?;
    }
    let total: f64 = u.iter().sum();
    if (total - 1.0).abs() > ADMISSIBLE_TOL {
        return Err(MeanFieldError::Inadmissible { component: "u0+u1+u2+u3", value: total });
    }
    Ok(v_from_u_unchecked(u))
}

pub fn is_admissible(u: &[f64; 4]) -> bool {
    u.iter().all(|x| x.is_finite() && (-ADMISSIBLE_TOL..=1.0 + ADMISSIBLE_TOL).contains(x))
}

impl MeanField {
    /// Printed transcription of `system`.
    pub fn new(system: System, p: &Params) -> Self {
        Self::with_form(system, VForm::printed(system), p)
    }

    pub fn with_form(system: System, form: VForm, p: &Params) -> Self {
        Self { system, form, dimension: p.dimension, lambda1: p.lambda1, lambda2: p.lambda2, r: p.r }
    }

    fn two_d(&self) -> f64 {
        2.0 * self.dimension as f64
    }

    /// Birth pressure `2d(λ1·u1 + λ2·u3)` in v-coordinates, and its gradient.
    fn pressure_v(&self, v: &State) -> (f64, [f64; 3]) {
        let (l1, l2, k) = (self.lambda1, self.lambda2, self.two_d());
        let b = k * ((l2 - l1) * v[0] + l2 * v[1] + (l2 - l1) * v[2] + l1 - l2);
        (b, [k * (l2 - l1), k * l2, k * (l2 - l1)])
    }

    /// The first-line bracket as printed: third term in `v1`.
    fn pressure_printed(&self, v: &State) -> (f64, [f64; 3]) {
        let (l1, l2, k) = (self.lambda1, self.lambda2, self.two_d());
        let b = k * ((l2 - l1) * v[0] + l2 * v[1] + (l2 - l1) * v[1] + l1 - l2);
        (b, [k * (l2 - l1), k * (2.0 * l2 - l1), 0.0])
    }

    pub fn rhs(&self, x: &State) -> State {
        self.rhs_in::<f64>(x)
    }

    /// Right-hand side in any field, e.g. exact rationals.
    pub fn rhs_in<T: Rate + Div<Output = T>>(&self, x: &[T; 3]) -> [T; 3] {
        let c = T::from_f64;
        let (one, two) = (T::one(), c(2.0));
        let k = c(self.two_d());
        let (l1, l2, r) = (c(self.lambda1), c(self.lambda2), c(self.r));
        if self.system.is_u() {
            let [u1, u2, u3] = x.clone();
            let u0 = one.clone() - u1.clone() - u2.clone() - u3.clone();
            let b = k * (l1 * u1.clone() + l2 * u3.clone());
            let f1 = b.clone() * u0.clone() + u3.clone() - (r.clone() + one.clone()) * u1.clone();
            if self.system.symmetric() {
                let f2 = r.clone() * u0 + u3.clone() - u2.clone() - b.clone() * u2.clone();
                let f3 = r * u1 + b * u2 - two * u3;
                [f1, f2, f3]
            } else {
                let f2 = r.clone() * u0 + u3.clone() - u2;
                let f3 = r * u1 - two * u3;
                [f1, f2, f3]
            }
        } else {
            let [v0, v1, v2] = x.clone();
            let d = l2.clone() - l1.clone();
            let base = d.clone() * v0.clone() + l2.clone() * v1.clone() + l1.clone() - l2.clone();
            let b = k.clone() * (base.clone() + d.clone() * v2.clone());
            let b1 = if self.form == VForm::Derived { b.clone() } else { k * (base + d * v1.clone()) };
            let tail = match self.form {
                VForm::ProductTail => two.clone() - v1.clone() * v2.clone(),
                _ => two.clone() - v1.clone() - v2.clone(),
            };
            let f0 = tail - b1 * v0.clone() - (r.clone() + two) * v0.clone();
            let host = if self.system.symmetric() { one.clone() - v1.clone() } else { v0 };
            let f1 = b * host - v1;
            let f2 = r.clone() * (one - v2.clone()) - v2;
            [f0, f1, f2]
        }
    }

    /// `‖rhs‖∞` at the extinction equilibrium, computed in exact rational
    /// arithmetic from the float parameters.
    pub fn trivial_residual_exact(&self) -> f64 {
        let one = BigRational::from_integer(1.into());
        let r = <BigRational as Rate>::from_f64(self.r);
        let s = r.clone() / (r + one.clone());
        let x = if self.system.is_u() {
            [BigRational::from_integer(0.into()), s.clone(), BigRational::from_integer(0.into())]
        } else {
            [one - s.clone(), BigRational::from_integer(0.into()), s]
        };
        self.rhs_in(&x).iter().map(|c| Rate::to_f64(c).abs()).fold(0.0, f64::max)
    }

    pub fn jacobian(&self, x: &State) -> Matrix3<f64> {
        self.jacobian_only(x)
    }

    /// Right-hand side and its analytic Jacobian.
    pub fn rhs_and_jacobian(&self, x: &State) -> (State, Matrix3<f64>) {
        (self.rhs(x), self.jacobian_only(x))
    }

    fn jacobian_only(&self, x: &State) -> Matrix3<f64> {
        let r = self.r;
        if self.system.is_u() {
            let [u1, u2, u3] = *x;
            let u0 = 1.0 - u1 - u2 - u3;
            let (k1, k3) = (self.two_d() * self.lambda1, self.two_d() * self.lambda2);
            let b = k1 * u1 + k3 * u3;
            let row1 = [k1 * u0 - b - (r + 1.0), -b, k3 * u0 - b + 1.0];
            if self.system.symmetric() {
                Matrix3::new(
                    row1[0], row1[1], row1[2],
                    -r - k1 * u2, -r - 1.0 - b, -r + 1.0 - k3 * u2,
                    r + k1 * u2, b, k3 * u2 - 2.0,
                )
            } else {
                Matrix3::new(row1[0], row1[1], row1[2], -r, -r - 1.0, -r + 1.0, r, 0.0, -2.0)
            }
        } else {
            let [v0, v1, v2] = *x;
            let (b, gb) = self.pressure_v(x);
            let (b1, gb1) = if self.form == VForm::Derived { (b, gb) } else { self.pressure_printed(x) };
            let gtail = match self.form {
                VForm::ProductTail => [0.0, -v2, -v1],
                _ => [0.0, -1.0, -1.0],
            };
            let row0 = [
                -gb1[0] * v0 - b1 - (r + 2.0) + gtail[0],
                -gb1[1] * v0 + gtail[1],
                -gb1[2] * v0 + gtail[2],
            ];
            // wild sites receive births on empty sites only (asymmetric) or
            // on every site without wild individuals (symmetric)
            let (host, ghost) = if self.system.symmetric() { (1.0 - v1, [0.0, -1.0, 0.0]) } else { (v0, [1.0, 0.0, 0.0]) };
            let row1 = [
                gb[0] * host + b * ghost[0],
                gb[1] * host + b * ghost[1] - 1.0,
                gb[2] * host + b * ghost[2],
            ];
            Matrix3::new(row0[0], row0[1], row0[2], row1[0], row1[1], row1[2], 0.0, 0.0, -r - 1.0)
        }
    }

    /// `d u0/dt` computed from its own balance, for mass-conservation checks.
    pub fn empty_derivative(&self, x: &State) -> f64 {
        let u = self.system.densities(x);
        let b = self.two_d() * (self.lambda1 * u[1] + self.lambda2 * u[3]);
        -b * u[0] - self.r * u[0] + u[1] + u[2]
    }

    pub fn residual(&self, x: &State) -> f64 {
        norm_inf(&self.rhs(x))
    }

    /// Extinction equilibrium: no wild individuals, sterile density
    /// `r/(r+1)` on otherwise empty sites.
    pub fn trivial(&self) -> State {
        let s = self.r / (self.r + 1.0);
        self.system.from_densities(&[1.0 - s, 0.0, s, 0.0])
    }

    /// Non-trivial equilibrium as printed, if this system has one.
    pub fn printed_candidate(&self) -> Option<State> {
        let (d, l1, l2, r) = (self.dimension as f64, self.lambda1, self.lambda2, self.r);
        match self.system {
            System::VAsym => Some([
                (2.0 + r) / (4.0 * d * l1 * r + 2.0 * d * l2 * r),
                (r + 2.0) / (2.0 * (r + 1.0)) - (r + 2.0).powi(2) / (2.0 * (4.0 * d * l1 + 2.0 * d * l2 * r)),
                r / (r + 1.0),
            ]),
            System::VSym => {
                let s = 2.0 * d * (l1 + l2 * r);
                Some([1.0 / s, (r + 1.0) / s, r / (r + 1.0)])
            }
            _ => None,
        }
    }

    /// Non-trivial equilibrium obtained by solving the derived system by
    /// hand; used as an independent check of Newton's output.
    pub fn derived_candidate(&self) -> Option<State> {
        let (d, l1, l2, r) = (self.dimension as f64, self.lambda1, self.lambda2, self.r);
        let v = if self.system.symmetric() {
            let v0 = 1.0 / (2.0 * d * (l1 + l2 * r));
            [v0, 1.0 - (r + 1.0) * v0, r / (r + 1.0)]
        } else {
            let v0 = (r + 2.0) / (4.0 * d * l1 + 2.0 * d * l2 * r);
            [v0, (r + 2.0) / (2.0 * (r + 1.0)) - (r + 2.0) * v0 / 2.0, r / (r + 1.0)]
        };
        if v.iter().all(|x| x.is_finite()) {
            Some(self.system.from_densities(&u_from_v_unchecked(&v)))
        } else {
            None
        }
    }

    fn rk4_step(&self, x: &State, dt: f64) -> State {
        let k1 = self.rhs(x);
        let k2 = self.rhs(&axpy(x, dt / 2.0, &k1));
        let k3 = self.rhs(&axpy(x, dt / 2.0, &k2));
        let k4 = self.rhs(&axpy(x, dt, &k3));
        let mut out = *x;
        for i in 0..3 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// Fixed-step RK4 until `‖rhs‖∞ < tol` or `t_max`.
    pub fn integrate_to_steady_state(&self, x0: &State, dt: f64, t_max: f64, tol: f64) -> Result<SteadyState, MeanFieldError> {
        let u0 = self.system.densities(x0);
        if !is_admissible(&u0) {
            let (i, value) = u0.iter().copied().enumerate().find(|(_, x)| !(-ADMISSIBLE_TOL..=1.0 + ADMISSIBLE_TOL).contains(x)).unwrap_or((0, f64::NAN));
            return Err(MeanFieldError::Inadmissible { component: ["u0", "u1", "u2", "u3"][i], value });
        }
        let mut x = *x0;
        let mut t = 0.0;
        let mut projections = 0;
        let mut trace: Vec<State> = Vec::new();
        loop {
            let res = self.residual(&x);
            if res < tol {
                return Ok(SteadyState { state: x, time: t, residual: res, converged: true, projections });
            }
            if t >= t_max {
                return Ok(SteadyState { state: x, time: t, residual: res, converged: false, projections });
            }
            x = self.rk4_step(&x, dt);
            t += dt;
            if trace.len() == 8 {
                trace.remove(0);
            }
            trace.push(x);
            let u = self.system.densities(&x);
            let drift = u.iter().map(|&c| (-c).max(c - 1.0)).fold(0.0f64, f64::max);
            if !drift.is_finite() || drift > DIVERGE_TOL {
                return Err(MeanFieldError::Instability { time: t, trace });
            }
            if drift > PROJECT_TOL {
                let mut p = u.map(|c| c.clamp(0.0, 1.0));
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|c| *c /= s);
                x = self.system.from_densities(&p);
                projections += 1;
            }
        }
    }

    /// Damped Newton from `x0`.
    pub fn newton(&self, x0: &State) -> NewtonResult {
        let mut x = *x0;
        let (mut f, mut j) = self.rhs_and_jacobian(&x);
        let mut res = norm_inf(&f);
        for iter in 0..NEWTON_MAX_ITER {
            if res < NEWTON_TOL {
                return NewtonResult { state: x, residual: res, iterations: iter, converged: true };
            }
            let Some(step) = j.lu().solve(&Vector3::new(-f[0], -f[1], -f[2])) else { break };
            let mut alpha = 1.0;
            loop {
                let trial = [x[0] + alpha * step[0], x[1] + alpha * step[1], x[2] + alpha * step[2]];
                let ft = self.rhs(&trial);
                let rt = norm_inf(&ft);
                if rt < res || alpha < 1e-6 {
                    x = trial;
                    break;
                }
                alpha /= 2.0;
            }
            (f, j) = self.rhs_and_jacobian(&x);
            res = norm_inf(&f);
            if !res.is_finite() {
                break;
            }
        }
        NewtonResult { state: x, residual: res, iterations: NEWTON_MAX_ITER, converged: res < NEWTON_TOL }
    }

    pub fn stability(&self, x: &State) -> Stability {
        let eig = self.jacobian(x).complex_eigenvalues();
        let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.total_cmp(b));
        Stability { stable: re.iter().all(|&a| a < 0.0), eigenvalue_real_parts: re }
    }

    fn candidate(&self, state: State, provenance: Provenance) -> Candidate {
        let u = self.system.densities(&state);
        Candidate {
            state,
            densities: u,
            residual: self.residual(&state),
            admissible: is_admissible(&u),
            stability: self.stability(&state),
            provenance,
        }
    }

    /// Trivial equilibrium, printed candidates and Newton-refined equilibria.
    pub fn equilibria(&self) -> Vec<Candidate> {
        let mut out = vec![self.candidate(self.trivial(), Provenance::Trivial)];
        if !self.system.is_u() {
            // printed as (v0,v1,v2) = (0, 0, r/(r+1))
            out.push(self.candidate([0.0, 0.0, self.r / (self.r + 1.0)], Provenance::PrintedTrivial));
        }
        if let Some(c) = self.printed_candidate() {
            out.push(self.candidate(c, Provenance::Printed));
        }
        let mut found: Vec<State> = Vec::new();
        let mut starts: Vec<State> = Vec::new();
        let interior = interior_starts(self.system);
        if let Ok(s) = self.integrate_to_steady_state(&interior[0], DT, T_MAX, STEADY_TOL) {
            starts.push(s.state);
        }
        starts.extend(interior);
        for s in starts {
            let n = self.newton(&s);
            if n.converged && n.state.iter().all(|c| c.abs() < 1e3) && !found.iter().any(|f| dist_inf(f, &n.state) < 1e-8) {
                found.push(n.state);
            }
        }
        found.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.extend(found.into_iter().map(|s| self.candidate(s, Provenance::Newton)));
        out
    }
}

fn axpy(x: &State, a: f64, y: &State) -> State {
    [x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]]
}

fn norm_inf(x: &State) -> f64 {
    x.iter().fold(0.0f64, |m, c| if c.is_nan() { f64::NAN } else { m.max(c.abs()) })
}

fn dist_inf(a: &State, b: &State) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

/// Eight interior starting points, in the system's coordinates.
pub fn interior_starts(system: System) -> Vec<State> {
    const U: [[f64; 3]; 8] = [
        [0.25, 0.25, 0.25],
        [0.6, 0.1, 0.1],
        [0.1, 0.6, 0.1],
        [0.1, 0.1, 0.6],
        [0.4, 0.4, 0.1],
        [0.05, 0.05, 0.05],
        [0.3, 0.1, 0.5],
        [0.15, 0.45, 0.35],
    ];
    U.iter()
        .map(|&[a, b, c]| system.from_densities(&[1.0 - a - b - c, a, b, c]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub state: State,
    pub time: f64,
    pub residual: f64,
    pub converged: bool,
    /// Steps after which the state was projected back onto the simplex.
    pub projections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonResult {
    pub state: State,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    pub eigenvalue_real_parts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Trivial,
    /// Extinction equilibrium in the coordinates printed for the v-systems.
    PrintedTrivial,
    /// Closed-form non-trivial equilibrium as printed.
    Printed,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub state: State,
    /// `(u0,u1,u2,u3)`, not clipped.
    pub densities: [f64; 4],
    pub residual: f64,
    pub admissible: bool,
    pub stability: Stability,
    pub provenance: Provenance,
}

impl Candidate {
    /// Residual at most `1e-8`.
    pub fn confirmed(&self) -> bool {
        self.residual < 1e-8
    }
}

/// Residuals of each v-transcription at the equilibria of the matching
/// u-system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adjudication {
    pub system: System,
    pub reference: System,
    /// Equilibria of the reference system, as v-states.
    pub evidence: Vec<State>,
    /// Largest residual of each form over the evidence.
    pub residuals: Vec<(VForm, f64)>,
    pub canonical: Option<VForm>,
}

pub fn adjudicate(system: System, p: &Params) -> Adjudication {
    let reference = system.reference();
    let mf = MeanField::new(reference, p);
    let evidence: Vec<State> = mf
        .equilibria()
        .into_iter()
        .filter(|c| c.admissible && c.confirmed() && c.provenance != Provenance::Printed)
        .map(|c| v_from_u_unchecked(&c.densities))
        .collect();
    let residuals: Vec<(VForm, f64)> = VForm::ALL
        .iter()
        .map(|&form| {
            let m = MeanField::with_form(system, form, p);
            (form, evidence.iter().map(|s| m.residual(s)).fold(0.0, f64::max))
        })
        .collect();
    let canonical = if system.is_u() || evidence.is_empty() {
        None
    } else {
        residuals.iter().filter(|(_, r)| *r < 1e-8).min_by(|a, b| a.1.total_cmp(&b.1)).map(|(f, _)| *f)
    };
    Adjudication { system, reference, evidence, residuals, canonical }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Bound {
    Value(f64),
    /// The bound is below zero and says nothing about `r >= 0`.
    Vacuous(f64),
    NoRealRoot,
    NotApplicable,
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Bound::Value(x) => Some(x),
            _ => None,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Value(x) => write!(f, "{x}"),
            Bound::Vacuous(x) => write!(f, "vacuous ({x})"),
            Bound::NoRealRoot => write!(f, "no real root"),
            Bound::NotApplicable => write!(f, "not applicable"),
        }
    }
}

/// Positive root of `r² + (3 − 2dλ2)·r + 2 − 4dλ1 = 0`; the asymmetric
/// non-trivial equilibrium has `v1 >= 0` exactly for `r` up to this root.
pub fn bound_r0(p: &Params) -> Bound {
    let k2 = 2.0 * p.dimension as f64 * p.lambda2;
    let k1 = 2.0 * p.dimension as f64 * p.lambda1;
    let disc = (k2 - 3.0).powi(2) - 8.0 * (1.0 - k1);
    if disc < 0.0 {
        return Bound::NoRealRoot;
    }
    let root = (k2 - 3.0 + disc.sqrt()) / 2.0;
    if root < 0.0 { Bound::Vacuous(root) } else { Bound::Value(root) }
}

/// `(2dλ1 − 1)/(1 − 2dλ2)`, the largest `r` with the symmetric non-trivial
/// equilibrium admissible; requires `λ2 <= 1/(2d)`.
pub fn bound_r1(p: &Params) -> Bound {
    let k2 = 2.0 * p.dimension as f64 * p.lambda2;
    let k1 = 2.0 * p.dimension as f64 * p.lambda1;
    if k2 > 1.0 {
        return Bound::NotApplicable;
    }
    if k2 == 1.0 {
        return if k1 >= 1.0 { Bound::Value(f64::INFINITY) } else { Bound::Vacuous(f64::NEG_INFINITY) };
    }
    let b = (k1 - 1.0) / (1.0 - k2);
    if b < 0.0 { Bound::Vacuous(b) } else { Bound::Value(b) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub system: System,
    pub form: VForm,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldReport {
    pub dimension: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r: f64,
    pub systems: Vec<SystemReport>,
    pub adjudications: Vec<Adjudication>,
    pub bound_r0: Bound,
    pub bound_r1: Bound,
}

/// Equilibria of every system (printed and canonical transcriptions), the
/// transcription verdicts and both bounds.
pub fn report(p: &Params, systems: &[System]) -> MeanFieldReport {
    let adjudications: Vec<Adjudication> = [System::VAsym, System::VSym]
        .into_iter()
        .filter(|s| systems.contains(s))
        .map(|s| adjudicate(s, p))
        .collect();
    let mut out = Vec::new();
    for &system in systems {
        let printed = VForm::printed(system);
        out.push(SystemReport { system, form: printed, candidates: MeanField::new(system, p).equilibria() });
        if let Some(canonical) = adjudications.iter().find(|a| a.system == system).and_then(|a| a.canonical) {
            if canonical != printed {
                out.push(SystemReport {
                    system,
                    form: canonical,
                    candidates: MeanField::with_form(system, canonical, p).equilibria(),
                });
            }
        }
    }
    MeanFieldReport {
        dimension: p.dimension,
        lambda1: p.lambda1,
        lambda2: p.lambda2,
        r: p.r,
        systems: out,
        adjudications,
        bound_r0: bound_r0(p),
        bound_r1: bound_r1(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Variant;
    use proptest::prelude::*;

    fn p(d: usize, l1: f64, l2: f64, r: f64) -> Params {
        Params::new(l1, l2, r, d, Variant::Symmetric).unwrap()
    }

    #[test]
    fn conversions() {
        let u = u_from_v(&[0.2, 0.5, 0.6]).unwrap();
        for (a, b) in u.iter().zip([0.2, 0.2, 0.3, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(u_from_v(&[1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        match u_from_v(&[0.0, 0.0, 0.0]) {
            Err(MeanFieldError::Inadmissible { component, value }) => {
                assert_eq!(component, "u3");
                assert_eq!(value, -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounds() {
        assert_eq!(bound_r0(&p(1, 2.0, 0.25, 0.0)), Bound::Value(1.5));
        assert_eq!(bound_r1(&p(1, 2.0, 0.25, 0.0)), Bound::Value(6.0));
        match bound_r0(&p(1, 0.1, 0.05, 0.0)) {
            Bound::Vacuous(x) => assert!((x - (-2.9 + 2.01f64.sqrt()) / 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(bound_r1(&p(1, 2.0, 0.75, 0.0)), Bound::NotApplicable);
        // only reachable with λ2 > λ1
        let inverted = Params { lambda1: 0.1, lambda2: 0.9, ..p(1, 0.0, 0.0, 0.0) };
        assert_eq!(bound_r0(&inverted), Bound::NoRealRoot);
    }

    #[test]
    fn bound_r0_is_where_asymmetric_v1_changes_sign() {
        for (l1, l2) in [(2.0, 0.25), (5.0, 1.0), (1.2, 0.3)] {
            let root = bound_r0(&p(1, l1, l2, 0.0)).value().unwrap();
            let v1 = |r: f64| MeanField::new(System::VAsym, &p(1, l1, l2, r)).derived_candidate().unwrap();
            let u = |r: f64| System::UAsym.densities(&MeanField::new(System::UAsym, &p(1, l1, l2, r)).derived_candidate().unwrap());
            assert!(v1(root * 0.99)[1] > 0.0 && v1(root * 1.01)[1] < 0.0);
            assert!(u(root)[1].abs() < 1e-12);
        }
    }

    #[test]
    fn bound_r1_is_where_symmetric_v1_reaches_one() {
        let root = bound_r1(&p(1, 2.0, 0.25, 0.0)).value().unwrap();
        let printed = MeanField::new(System::VSym, &p(1, 2.0, 0.25, root)).printed_candidate().unwrap();
        assert!((printed[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_residual_zero_on_grid() {
        for system in System::ALL {
            for d in 1..=3 {
                for l1 in [0.0, 0.5, 1.0, 3.0] {
                    for r in [0.0, 0.3, 1.0, 7.0] {
                        let m = MeanField::with_form(system, VForm::Derived, &p(d, l1, l1 / 2.0, r));
                        assert_eq!(m.trivial_residual_exact(), 0.0, "{system:?}");
                        assert!(m.residual(&m.trivial()) < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn no_release_keeps_sterile_density() {
        for system in [System::VAsym, System::VSym] {
            let m = MeanField::new(system, &p(1, 2.0, 0.5, 0.0));
            assert_eq!(m.rhs(&[0.3, 0.4, 0.0])[2], 0.0);
        }
        let m = MeanField::new(System::VAsym, &p(1, 2.0, 0.5, 0.7));
        assert_eq!(m.rhs(&[0.0, 0.0, 0.7 / 1.7])[2], 0.0);
    }

    #[test]
    fn symmetric_equilibrium_values() {
        let params = p(1, 2.0, 0.25, 1.0);
        let m = MeanField::new(System::USym, &params);
        let s = m.integrate_to_steady_state(&interior_starts(System::USym)[0], DT, T_MAX, STEADY_TOL).unwrap();
        assert!(s.converged);
        let n = m.newton(&s.state);
        assert!(n.converged);
        let u = System::USym.densities(&n.state);
        let want = [2.0 / 9.0, 5.0 / 18.0, 2.0 / 9.0, 5.0 / 18.0];
        for (a, b) in u.iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{u:?}");
        }
        assert!(m.stability(&n.state).stable);
        assert!(!m.stability(&m.trivial()).stable);
    }

    #[test]
    fn printed_symmetric_candidate_is_off() {
        let m = MeanField::with_form(System::VSym, VForm::Derived, &p(1, 2.0, 0.25, 1.0));
        let printed = m.printed_candidate().unwrap();
        assert!((printed[0] - 1.0 / 4.5).abs() < 1e-15 && (printed[1] - 2.0 / 4.5).abs() < 1e-15);
        assert!(m.residual(&printed) > 1e-3);
        let derived = m.derived_candidate().unwrap();
        assert!(m.residual(&derived) < 1e-14);
    }

    #[test]
    fn adjudication_prefers_derived_form() {
        for (sys, params) in [(System::VSym, p(1, 2.0, 0.25, 1.0)), (System::VAsym, p(1, 3.0, 0.5, 0.7))] {
            let a = adjudicate(sys, &params);
            assert!(a.evidence.len() >= 2, "{a:?}");
            assert_eq!(a.canonical, Some(VForm::Derived), "{a:?}");
        }
    }

    #[test]
    fn large_release_goes_extinct() {
        let m = MeanField::new(System::USym, &p(1, 2.0, 0.25, 100.0));
        let s = m.integrate_to_steady_state(&interior_starts(System::USym)[0], DT, T_MAX, STEADY_TOL).unwrap();
        assert!(s.converged);
        let u = System::USym.densities(&s.state);
        assert!(u[1] + u[3] < 1e-8);
        let m = MeanField::new(System::USym, &p(1, 2.0, 0.25, 0.5));
        let s = m.integrate_to_steady_state(&interior_starts(System::USym)[0], DT, T_MAX, STEADY_TOL).unwrap();
        let u = System::USym.densities(&s.state);
        assert!(s.converged && u[1] + u[3] > 0.1);
    }

    #[test]
    fn trivial_start_stays() {
        let m = MeanField::new(System::USym, &p(2, 1.0, 0.3, 0.4));
        let s = m.integrate_to_steady_state(&m.trivial(), DT, T_MAX, STEADY_TOL).unwrap();
        assert!(s.converged && s.time == 0.0);
    }

    #[test]
    fn inadmissible_start_rejected() {
        let m = MeanField::new(System::VSym, &p(1, 2.0, 0.25, 1.0));
        assert!(matches!(m.integrate_to_steady_state(&[0.0, 0.0, 0.0], DT, 1.0, STEADY_TOL), Err(MeanFieldError::Inadmissible { .. })));
    }

    fn dyadic() -> impl Strategy<Value = f64> {
        (0u32..=1024).prop_map(|k| k as f64 / 1024.0)
    }

    proptest! {
        #[test]
        fn round_trip_exact(a in dyadic(), b in dyadic(), c in dyadic()) {
            let v = [a, b, c];
            if let Ok(u) = u_from_v(&v) {
                prop_assert_eq!(v_from_u(&u).unwrap(), v);
                prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn mass_conserved(u1 in 0.0..0.5f64, u2 in 0.0..0.25f64, u3 in 0.0..0.25f64,
                          l1 in 0.0..5.0f64, f in 0.0..1.0f64, r in 0.0..5.0f64, asym in any::<bool>()) {
            let sys = if asym { System::UAsym } else { System::USym };
            let m = MeanField::new(sys, &p(1, l1, l1 * f, r));
            let x = [u1, u2, u3];
            let d = m.rhs(&x);
            prop_assert!((m.empty_derivative(&x) + d[0] + d[1] + d[2]).abs() < 1e-12);
        }

        #[test]
        fn jacobian_matches_differences(x0 in 0.05..0.4f64, x1 in 0.05..0.4f64, x2 in 0.05..0.4f64,
                                        l1 in 0.1..5.0f64, f in 0.0..1.0f64, r in 0.0..5.0f64, s in 0usize..4, k in 0usize..3) {
            let m = MeanField::with_form(System::ALL[s], VForm::ALL[k], &p(2, l1, l1 * f, r));
            let x = [x0, x1, x2];
            let j = m.jacobian(&x);
            let h = 1e-6;
            for col in 0..3 {
                let mut xp = x; xp[col] += h;
                let mut xm = x; xm[col] -= h;
                let (fp, fm) = (m.rhs(&xp), m.rhs(&xm));
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let scale = j[(row, col)].abs().max(1.0);
                    prop_assert!((fd - j[(row, col)]).abs() / scale < 1e-6, "({},{}) {} vs {}", row, col, fd, j[(row, col)]);
                }
            }
        }

        #[test]
        fn converged_states_meet_tolerance(l1 in 0.2..4.0f64, f in 0.0..1.0f64, r in 0.0..4.0f64) {
            let m = MeanField::new(System::USym, &p(1, l1, l1 * f, r));
            let s = m.integrate_to_steady_state(&interior_starts(System::USym)[0], 1e-2, 200.0, STEADY_TOL).unwrap();
            if s.converged {
                prop_assert!(m.residual(&s.state) < STEADY_TOL);
            }
        }
    }
}
