//! Piecewise-linear relaxations of the two nonconvex terms of the problem.
//!
//! * The sigmoid `ψ(u)` in the objective is convex below `u_min` and concave
//!   above it. Its concave overestimator on `[u_L, u_U]` is built from a
//!   tangent through `(u_L, ψ(u_L))`, tangents at the bounds, or a secant.
//! * The head loss `φ(q) = r |q|^(n-1) q` is concave for `q < 0` and convex
//!   for `q > 0`. It is sandwiched between an upper and a lower piecewise
//!   linear function built from the same kinds of lines.
//!
//! Tangent points come from bisection on the intersection equation
//! `f(x) = g'(x)(x - y) + g(y) - g(x)`, which is monotone on the bracket.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::{phi, phi_prime};
use crate::objective::{psi_plus, psi_plus_prime};

const MAX_BISECTION: usize = 200;
/// Lines whose slopes differ by less than this are treated as parallel.
const PARALLEL_SLOPE: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("no tangent point inside the bracket")]
pub struct NoTangent;

/// `value(x) = intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn through(x: f64, y: f64, slope: f64) -> Self {
        Line {
            slope,
            intercept: y - slope * x,
        }
    }

    pub fn secant(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Line::through(x0, y0, (y1 - y0) / (x1 - x0))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    fn intersection(&self, other: &Line) -> f64 {
        (other.intercept - self.intercept) / (self.slope - other.slope)
    }
}

/// One linear inequality `coeff_q · x + coeff_aux · aux ≤ rhs`, where `x` is
/// the link flow (or velocity) and `aux` is `σ` or `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCut {
    pub coeff_q: f64,
    pub coeff_aux: f64,
    pub rhs: f64,
}

impl LinearCut {
    /// `aux ≤ line(x)`.
    pub fn upper(line: &Line) -> Self {
        LinearCut {
            coeff_q: -line.slope,
            coeff_aux: 1.0,
            rhs: line.intercept,
        }
    }

    /// `aux ≥ line(x)`.
    pub fn lower(line: &Line) -> Self {
        LinearCut {
            coeff_q: line.slope,
            coeff_aux: -1.0,
            rhs: -line.intercept,
        }
    }

    /// Rewrite a cut on velocity `u = q / A` as a cut on flow `q`.
    pub fn velocity_to_flow(self, area: f64) -> Self {
        LinearCut {
            coeff_q: self.coeff_q / area,
            ..self
        }
    }

    pub fn violation(&self, x: f64, aux: f64) -> f64 {
        self.coeff_q * x + self.coeff_aux * aux - self.rhs
    }
}

/// Bisection for a root of a function that changes sign on `[a, b]`.
/// Iterates until the midpoint no longer moves in floating point.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm * fa <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}

// ---------------------------------------------------------------------------
// Sigmoid

/// Which shape the concave overestimator of `ψ⁺` takes on a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmoidCase {
    /// Tangent from `(u_L, ψ(u_L))` touching at `w ≤ u_U`, then the tangent at `u_U`.
    TangentAndUpper,
    /// The tangent point lies beyond `u_U`: a single secant.
    Secant,
    /// Domain inside the concave region: tangents at both bounds.
    ConcaveTangents,
    /// Degenerate domain `u_L = u_U`.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidEnvelope {
    pub case: SigmoidCase,
    pub lower: f64,
    pub upper: f64,
    /// Tangent point `w` when one was used.
    pub tangent: Option<f64>,
    /// Intersection of the two lines when there are two.
    pub kink: Option<f64>,
    /// Overestimating lines; the envelope is their pointwise minimum.
    pub lines: Vec<Line>,
}

impl SigmoidEnvelope {
    pub fn value(&self, u: f64) -> f64 {
        self.lines.iter().map(|l| l.value(u)).fold(f64::INFINITY, f64::min)
    }

    /// Cuts `σ ≤ line(u)` in velocity space.
    pub fn cuts(&self) -> Vec<LinearCut> {
        self.lines.iter().map(LinearCut::upper).collect()
    }
}

/// Residual of the tangency condition for a line from `(y, ψ(y))` touching at `w`.
pub fn sigmoid_tangency_residual(rho: f64, u_min: f64, y: f64, w: f64) -> f64 {
    psi_plus_prime(w, rho, u_min) * (w - y) + psi_plus(y, rho, u_min) - psi_plus(w, rho, u_min)
}

/// Point `w` where the line from `(u_L, ψ⁺(u_L))` is tangent to `ψ⁺`.
///
/// Returns `u_L` itself when `u_L ≥ u_min`, and [`NoTangent`] when the
/// tangent point lies beyond `u_U`.
pub fn bisect_sigmoid_tangent(rho: f64, u_min: f64, u_lower: f64, u_upper: f64) -> Result<f64, NoTangent> {
    if u_lower >= u_min {
        return Ok(u_lower);
    }
    if u_upper <= u_min {
        return Err(NoTangent);
    }
    let f = |x: f64| sigmoid_tangency_residual(rho, u_min, u_lower, x);
    if f(u_upper) > 0.0 {
        return Err(NoTangent);
    }
    Ok(bisect(f, u_min, u_upper))
}

/// Keep the tighter of two overestimating lines when they are parallel.
fn min_pair(a: Line, b: Line, domain: (f64, f64)) -> (Vec<Line>, Option<f64>) {
    if (a.slope - b.slope).abs() < PARALLEL_SLOPE {
        let mid = 0.5 * (domain.0 + domain.1);
        let keep = if a.value(mid) <= b.value(mid) { a } else { b };
        return (vec![keep], None);
    }
    let k = a.intersection(&b);
    (vec![a, b], Some(k))
}

fn max_pair(a: Line, b: Line, domain: (f64, f64)) -> (Vec<Line>, Option<f64>) {
    if (a.slope - b.slope).abs() < PARALLEL_SLOPE {
        let mid = 0.5 * (domain.0 + domain.1);
        let keep = if a.value(mid) >= b.value(mid) { a } else { b };
        return (vec![keep], None);
    }
    let k = a.intersection(&b);
    (vec![a, b], Some(k))
}

/// Concave overestimator of `ψ⁺` on `[u_lower, u_upper]`.
pub fn sigmoid_plus_envelope(rho: f64, u_min: f64, u_lower: f64, u_upper: f64) -> SigmoidEnvelope {
    let psi = |u: f64| psi_plus(u, rho, u_min);
    let dpsi = |u: f64| psi_plus_prime(u, rho, u_min);
    let mut env = SigmoidEnvelope {
        case: SigmoidCase::Point,
        lower: u_lower,
        upper: u_upper,
        tangent: None,
        kink: None,
        lines: Vec::new(),
    };
    if u_upper <= u_lower {
        env.lines.push(Line {
            slope: 0.0,
            intercept: psi(u_lower),
        });
        return env;
    }
    let upper_tangent = Line::through(u_upper, psi(u_upper), dpsi(u_upper));
    match bisect_sigmoid_tangent(rho, u_min, u_lower, u_upper) {
        Ok(w) => {
            env.case = if w == u_lower {
                SigmoidCase::ConcaveTangents
            } else {
                SigmoidCase::TangentAndUpper
            };
            env.tangent = Some(w);
            let first = Line::through(w, psi(w), dpsi(w));
            let (lines, kink) = min_pair(first, upper_tangent, (u_lower, u_upper));
            env.lines = lines;
            env.kink = kink;
        }
        Err(NoTangent) => {
            env.case = SigmoidCase::Secant;
            env.lines
                .push(Line::secant(u_lower, psi(u_lower), u_upper, psi(u_upper)));
        }
    }
    env
}

/// Concave overestimator of `ψ⁻(u) = ψ⁺(-u)` on `[u_lower, u_upper]`,
/// obtained by mirroring the domain.
pub fn sigmoid_minus_envelope(rho: f64, u_min: f64, u_lower: f64, u_upper: f64) -> SigmoidEnvelope {
    let mirrored = sigmoid_plus_envelope(rho, u_min, -u_upper, -u_lower);
    SigmoidEnvelope {
        case: mirrored.case,
        lower: u_lower,
        upper: u_upper,
        tangent: mirrored.tangent.map(|w| -w),
        kink: mirrored.kink.map(|k| -k),
        lines: mirrored
            .lines
            .iter()
            .map(|l| Line {
                slope: -l.slope,
                intercept: l.intercept,
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Head loss

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HwCase {
    /// Domain straddles zero and both tangent points exist.
    Straddle,
    /// Domain straddles zero; the upper tangent point falls left of `q_L`.
    UpperSecant,
    /// Domain straddles zero; the lower tangent point falls right of `q_U`.
    LowerSecant,
    /// Domain straddles zero and neither tangent point exists.
    BothSecants,
    /// `0 ≤ q_L < q_U`: convex region.
    Positive,
    /// `q_L < q_U ≤ 0`: concave region.
    Negative,
    /// `q_L = q_U`, or zero resistance.
    Point,
}

/// Which of the two tangent searches to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Line from `(q_L, φ(q_L))` tangent at `z̲ ∈ [0, q_U]`.
    Lower,
    /// Line from `(q_U, φ(q_U))` tangent at `z̄ ∈ [q_L, 0]`.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwEnvelope {
    pub case: HwCase,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub z_upper: Option<f64>,
    pub z_lower: Option<f64>,
    pub kink_upper: Option<f64>,
    pub kink_lower: Option<f64>,
    /// `θ ≤ min(upper)`.
    pub upper: Vec<Line>,
    /// `θ ≥ max(lower)`.
    pub lower: Vec<Line>,
}

impl HwEnvelope {
    pub fn upper_value(&self, q: f64) -> f64 {
        self.upper.iter().map(|l| l.value(q)).fold(f64::INFINITY, f64::min)
    }

    pub fn lower_value(&self, q: f64) -> f64 {
        self.lower.iter().map(|l| l.value(q)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn cuts(&self) -> Vec<LinearCut> {
        self.upper
            .iter()
            .map(LinearCut::upper)
            .chain(self.lower.iter().map(LinearCut::lower))
            .collect()
    }
}

pub fn hw_tangency_residual(r: f64, n: f64, y: f64, z: f64) -> f64 {
    phi_prime(r, n, z) * (z - y) + phi(r, n, y) - phi(r, n, z)
}

/// Tangent point of the line through one domain bound, or [`NoTangent`]
/// when the point would fall outside the domain.
pub fn bisect_hw_tangent(r: f64, n: f64, q_lower: f64, q_upper: f64, side: Side) -> Result<f64, NoTangent> {
    let (y1, y2) = match side {
        Side::Lower => (q_lower, q_upper),
        Side::Upper => (q_upper, q_lower),
    };
    let f = |x: f64| hw_tangency_residual(r, n, y1, x);
    if f(y2) * f(0.0) > 0.0 {
        return Err(NoTangent);
    }
    Ok(bisect(f, 0.0, y2))
}

/// Polyhedral sandwich of `φ` on `[q_lower, q_upper]`.
pub fn hw_envelope(r: f64, n: f64, q_lower: f64, q_upper: f64) -> HwEnvelope {
    let f = |q: f64| phi(r, n, q);
    let df = |q: f64| phi_prime(r, n, q);
    let mut env = HwEnvelope {
        case: HwCase::Point,
        lower_bound: q_lower,
        upper_bound: q_upper,
        z_upper: None,
        z_lower: None,
        kink_upper: None,
        kink_lower: None,
        upper: Vec::new(),
        lower: Vec::new(),
    };
    if q_upper <= q_lower || r == 0.0 {
        let v = if r == 0.0 { 0.0 } else { f(q_lower) };
        let flat = Line {
            slope: 0.0,
            intercept: v,
        };
        env.upper.push(flat);
        env.lower.push(flat);
        return env;
    }
    let domain = (q_lower, q_upper);
    let secant = Line::secant(q_lower, f(q_lower), q_upper, f(q_upper));
    let tan_l = Line::through(q_lower, f(q_lower), df(q_lower));
    let tan_u = Line::through(q_upper, f(q_upper), df(q_upper));

    if q_lower >= 0.0 {
        env.case = HwCase::Positive;
        env.upper.push(secant);
        (env.lower, env.kink_lower) = max_pair(tan_l, tan_u, domain);
        return env;
    }
    if q_upper <= 0.0 {
        env.case = HwCase::Negative;
        (env.upper, env.kink_upper) = min_pair(tan_l, tan_u, domain);
        env.lower.push(secant);
        return env;
    }

    env.z_upper = bisect_hw_tangent(r, n, q_lower, q_upper, Side::Upper).ok();
    env.z_lower = bisect_hw_tangent(r, n, q_lower, q_upper, Side::Lower).ok();
    match env.z_upper {
        Some(z) => {
            let through_upper = Line::through(q_upper, f(q_upper), df(z));
            (env.upper, env.kink_upper) = min_pair(tan_l, through_upper, domain);
        }
        None => env.upper.push(secant),
    }
    match env.z_lower {
        Some(z) => {
            let through_lower = Line::through(q_lower, f(q_lower), df(z));
            (env.lower, env.kink_lower) = max_pair(through_lower, tan_u, domain);
        }
        None => env.lower.push(secant),
    }
    env.case = match (env.z_upper, env.z_lower) {
        (Some(_), Some(_)) => HwCase::Straddle,
        (None, Some(_)) => HwCase::UpperSecant,
        (Some(_), None) => HwCase::LowerSecant,
        (None, None) => HwCase::BothSecants,
    };
    env
}

/// CSV dump of cuts: `link_id,timestep,kind,coeff_q,coeff_aux,rhs`.
pub fn cuts_csv<'a>(rows: impl IntoIterator<Item = (&'a str, usize, &'a str, LinearCut)>) -> String {
    let mut out = String::from("link_id,timestep,kind,coeff_q,coeff_aux,rhs\n");
    for (id, t, kind, c) in rows {
        let _ = writeln!(out, "{id},{t},{kind},{:e},{:e},{:e}", c.coeff_q, c.coeff_aux, c.rhs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydraulics::HW_EXPONENT;
    use crate::objective::psi_minus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RHO: f64 = 50.0;
    const UMIN: f64 = 0.2;

    fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..=n).map(move |k| a + (b - a) * k as f64 / n as f64)
    }

    #[test]
    fn tangent_is_lower_bound_when_concave() {
        assert_eq!(bisect_sigmoid_tangent(RHO, UMIN, 0.25, 1.0), Ok(0.25));
    }

    #[test]
    fn sigmoid_tangent_matches_grid_scan() {
        let w = bisect_sigmoid_tangent(RHO, UMIN, 0.0, 1.0).unwrap();
        // Scan for the sign change of the intersection equation on a 1e-6 grid.
        let mut prev = sigmoid_tangency_residual(RHO, UMIN, 0.0, UMIN);
        let mut root = f64::NAN;
        for k in 1..=800_000 {
            let x = UMIN + k as f64 * 1e-6;
            let v = sigmoid_tangency_residual(RHO, UMIN, 0.0, x);
            if prev > 0.0 && v <= 0.0 {
                root = x;
                break;
            }
            prev = v;
        }
        assert!((w - root).abs() <= 1e-6, "{w} vs {root}");
        assert!(sigmoid_tangency_residual(RHO, UMIN, 0.0, w).abs() <= 1e-10);
    }

    #[test]
    fn sigmoid_tangency_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = rng.gen_range(-3.0..0.19);
            let b = rng.gen_range(0.21..3.0);
            if let Ok(w) = bisect_sigmoid_tangent(RHO, UMIN, a, b) {
                assert!(sigmoid_tangency_residual(RHO, UMIN, a, w).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn sigmoid_cases() {
        let point = sigmoid_plus_envelope(RHO, UMIN, 0.3, 0.3);
        assert_eq!(point.case, SigmoidCase::Point);
        assert_eq!(point.value(0.3), psi_plus(0.3, RHO, UMIN));

        let sec = sigmoid_plus_envelope(RHO, UMIN, -0.5, 0.2);
        assert_eq!(sec.case, SigmoidCase::Secant);
        assert_eq!(sec.lines.len(), 1);
        let l = sec.lines[0];
        assert!((l.value(-0.5) - psi_plus(-0.5, RHO, UMIN)).abs() < 1e-15);
        assert!((l.value(0.2) - 0.5).abs() < 1e-15);

        let tan = sigmoid_plus_envelope(RHO, UMIN, 0.0, 1.0);
        assert_eq!(tan.case, SigmoidCase::TangentAndUpper);
        let k = tan.kink.unwrap();
        assert!(k > tan.tangent.unwrap() && k <= 1.0);

        let conc = sigmoid_plus_envelope(RHO, UMIN, 0.25, 1.0);
        assert_eq!(conc.case, SigmoidCase::ConcaveTangents);
    }

    fn check_sigmoid(env: &SigmoidEnvelope, f: impl Fn(f64) -> f64) {
        for u in grid(env.lower, env.upper, 1000) {
            assert!(f(u) <= env.value(u) + 1e-9, "{:?} at {u}", env.case);
        }
        assert!((env.value(env.lower) - f(env.lower)).abs() <= 1e-9);
        assert!((env.value(env.upper) - f(env.upper)).abs() <= 1e-9);
    }

    #[test]
    fn sigmoid_envelopes_contain_both_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-3.0..3.0);
            let (lo, hi) = (a.min(b), a.max(b));
            check_sigmoid(&sigmoid_plus_envelope(RHO, UMIN, lo, hi), |u| psi_plus(u, RHO, UMIN));
            check_sigmoid(&sigmoid_minus_envelope(RHO, UMIN, lo, hi), |u| psi_minus(u, RHO, UMIN));
        }
    }

    #[test]
    fn hw_tangent_symmetry_and_grid_scan() {
        let up = bisect_hw_tangent(1.0, HW_EXPONENT, -1.0, 1.0, Side::Upper).unwrap();
        let lo = bisect_hw_tangent(1.0, HW_EXPONENT, -1.0, 1.0, Side::Lower).unwrap();
        assert!((up + lo).abs() < 1e-12);
        let mut root = f64::NAN;
        let mut prev = hw_tangency_residual(1.0, HW_EXPONENT, -1.0, 0.0);
        for k in 1..=1_000_000 {
            let x = k as f64 * 1e-6;
            let v = hw_tangency_residual(1.0, HW_EXPONENT, -1.0, x);
            if prev < 0.0 && v >= 0.0 {
                root = x;
                break;
            }
            prev = v;
        }
        assert!((lo - root).abs() <= 1e-6, "{lo} vs {root}");
        assert!(hw_tangency_residual(1.0, HW_EXPONENT, -1.0, lo).abs() <= 1e-10);
    }

    #[test]
    fn hw_missing_upper_tangent() {
        assert_eq!(
            bisect_hw_tangent(1.0, HW_EXPONENT, -0.001, 1.0, Side::Upper),
            Err(NoTangent)
        );
        // The scan oracle agrees: the intersection equation keeps one sign on [q_L, 0].
        let positive = grid(-0.001, 0.0, 1000).all(|x| hw_tangency_residual(1.0, HW_EXPONENT, 1.0, x) > 0.0);
        assert!(positive);
        assert_eq!(hw_envelope(1.0, HW_EXPONENT, -0.001, 1.0).case, HwCase::UpperSecant);
        assert_eq!(hw_envelope(1.0, HW_EXPONENT, -1.0, 0.001).case, HwCase::LowerSecant);
    }

    fn check_hw(env: &HwEnvelope, r: f64, n: f64) {
        let scale = phi(r, n, env.lower_bound)
            .abs()
            .max(phi(r, n, env.upper_bound).abs())
            .max(1.0);
        for q in grid(env.lower_bound, env.upper_bound, 1000) {
            let v = phi(r, n, q);
            assert!(env.lower_value(q) <= v + 1e-9 * scale, "{:?} lower at {q}", env.case);
            assert!(v <= env.upper_value(q) + 1e-9 * scale, "{:?} upper at {q}", env.case);
        }
        for q in [env.lower_bound, env.upper_bound] {
            let v = phi(r, n, q);
            assert!((env.upper_value(q) - v).abs() <= 1e-9 * scale);
            assert!((env.lower_value(q) - v).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn hw_cases_are_sound() {
        let r = 457.0;
        let n = HW_EXPONENT;
        let cases = [
            ((-0.05, 0.04), HwCase::Straddle),
            ((-0.0001, 0.05), HwCase::UpperSecant),
            ((-0.05, 0.0001), HwCase::LowerSecant),
            ((0.01, 0.05), HwCase::Positive),
            ((-0.05, -0.01), HwCase::Negative),
            ((0.02, 0.02), HwCase::Point),
        ];
        for ((lo, hi), case) in cases {
            let env = hw_envelope(r, n, lo, hi);
            assert_eq!(env.case, case, "[{lo}, {hi}]");
            check_hw(&env, r, n);
        }
        let straddle = hw_envelope(r, n, -0.05, 0.04);
        let (ku, kl) = (straddle.kink_upper.unwrap(), straddle.kink_lower.unwrap());
        assert!((-0.05..=0.04).contains(&ku) && (-0.05..=0.04).contains(&kl));
        assert!(hw_tangency_residual(r, n, 0.04, straddle.z_upper.unwrap()).abs() <= 1e-9);
        assert!(hw_tangency_residual(r, n, -0.05, straddle.z_lower.unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn hw_random_domains_are_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let r = 10f64.powf(rng.gen_range(0.0..5.0));
            let n = if rng.gen_bool(0.8) { HW_EXPONENT } else { 2.0 };
            let a: f64 = rng.gen_range(-0.2..0.2);
            let b: f64 = rng.gen_range(-0.2..0.2);
            check_hw(&hw_envelope(r, n, a.min(b), a.max(b)), r, n);
        }
    }

    #[test]
    fn zero_resistance_pins_head_loss() {
        let env = hw_envelope(0.0, 2.0, -1.0, 1.0);
        assert_eq!(env.case, HwCase::Point);
        assert_eq!(env.upper_value(0.3), 0.0);
        assert_eq!(env.lower_value(0.3), 0.0);
    }

    #[test]
    fn velocity_cut_rescales_to_flow() {
        let env = sigmoid_plus_envelope(RHO, UMIN, 0.0, 1.0);
        let area = 0.05;
        for cut in env.cuts() {
            let f = cut.velocity_to_flow(area);
            let (u, s) = (0.4, 0.7);
            assert!((cut.violation(u, s) - f.violation(u * area, s)).abs() < 1e-12);
        }
    }

    fn max_gap(env: &HwEnvelope) -> f64 {
        grid(env.lower_bound, env.upper_bound, 2000)
            .map(|q| env.upper_value(q) - env.lower_value(q))
            .fold(0.0, f64::max)
    }

    // Two lines per side are not the exact convex and concave envelopes, so a
    // nested domain can select tangent points that leave a wider gap.
    #[test]
    fn nested_domain_can_widen_two_line_gap() {
        let outer = hw_envelope(457.0, HW_EXPONENT, -0.0450355863278771, 0.06064141482127821);
        let inner = hw_envelope(457.0, HW_EXPONENT, -0.015956172025380827, 0.05701339350121441);
        assert_eq!(outer.case, HwCase::Straddle);
        assert_eq!(inner.case, HwCase::UpperSecant);
        assert!(max_gap(&inner) > max_gap(&outer));
    }

    #[test]
    fn outer_cuts_stay_valid_on_nested_domains() {
        let r = 457.0;
        let n = HW_EXPONENT;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let (mut lo, mut hi) = (rng.gen_range(-0.1..0.0), rng.gen_range(0.0..0.1));
            let outer = hw_envelope(r, n, lo, hi);
            for _ in 0..5 {
                lo += rng.gen_range(0.0..0.3) * (hi - lo);
                hi -= rng.gen_range(0.0..0.3) * (hi - lo);
                let inner = hw_envelope(r, n, lo, hi);
                check_hw(&inner, r, n);
                for q in grid(lo, hi, 500) {
                    let v = phi(r, n, q);
                    assert!(outer.lower_value(q) <= v + 1e-9 && v <= outer.upper_value(q) + 1e-9);
                }
            }
        }
    }
}
