//! Scalar formulas for the hardcore model on Δ-regular trees.
//!
//! Notation: Δ is the maximum degree, d = Δ − 1 the branching factor,
//! λ = (1 − δ)·λ_c(Δ) the fugacity with slack δ, and x̂ the fixed point of the
//! tree recursion F_{d,λ}(x) = λ(1−x)^d / (1 + λ(1−x)^d).

use serde::Serialize;

use crate::error::{check_fugacity, Error, Result};

/// Bisection stops once the bracket is this narrow.
pub const BISECTION_TOL: f64 = 1e-14;
/// θ in the integrated spectral-independence mixing bound.
pub const THETA: f64 = 23.0 / 24.0;

fn check_degree(max_degree: u32) -> Result<()> {
    if max_degree < 3 {
        return Err(Error::Domain(format!(
            "maximum degree must be >= 3, got {max_degree}"
        )));
    }
    Ok(())
}

fn check_branching(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "branching factor must be >= 2, got {d}"
        )));
    }
    Ok(())
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

/// λ_c(Δ) = (Δ−1)^{Δ−1} / (Δ−2)^Δ.
///
/// Numerator and denominator are formed exactly in 128-bit integers while
/// they fit, so the result carries a single division rounding.
pub fn critical_fugacity(max_degree: u32) -> Result<f64> {
    check_degree(max_degree)?;
    let a = u128::from(max_degree - 1);
    let b = u128::from(max_degree - 2);
    match (a.checked_pow(max_degree - 1), b.checked_pow(max_degree)) {
        (Some(num), Some(den)) if num < 1 << 100 && den < 1 << 100 => Ok(num as f64 / den as f64),
        _ => {
            let (a, b, m) = (a as f64, b as f64, f64::from(max_degree));
            Ok(((m - 1.0) * a.ln() - m * b.ln()).exp())
        }
    }
}

/// Δ, d, δ, λ and λ_c for one fugacity regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardcoreParams {
    pub max_degree: u32,
    pub d: u32,
    pub delta: f64,
    pub lambda: f64,
    pub lambda_c: f64,
}

impl HardcoreParams {
    /// λ = (1 − δ)·λ_c(Δ), δ ∈ [0, 1].
    pub fn from_slack(max_degree: u32, delta: f64) -> Result<Self> {
        let lambda_c = critical_fugacity(max_degree)?;
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!(
                "slack must lie in [0, 1], got {delta}"
            )));
        }
        Ok(HardcoreParams {
            max_degree,
            d: max_degree - 1,
            delta,
            lambda: (1.0 - delta) * lambda_c,
            lambda_c,
        })
    }

    /// δ = 1 − λ/λ_c(Δ), λ ∈ (0, λ_c].
    pub fn from_fugacity(max_degree: u32, lambda: f64) -> Result<Self> {
        let lambda_c = critical_fugacity(max_degree)?;
        check_fugacity(lambda)?;
        if lambda > lambda_c {
            return Err(Error::Domain(format!(
                "fugacity {lambda} exceeds the critical value {lambda_c}"
            )));
        }
        Ok(HardcoreParams {
            max_degree,
            d: max_degree - 1,
            delta: 1.0 - lambda / lambda_c,
            lambda,
            lambda_c,
        })
    }
}

/// F_{d,λ}(x).
pub fn tree_recurrence(d: u32, lambda: f64, x: f64) -> Result<f64> {
    check_branching(d)?;
    check_fugacity(lambda)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(recurrence(d, lambda, x))
}

#[inline]
pub(crate) fn recurrence(d: u32, lambda: f64, x: f64) -> f64 {
    let w = lambda * (1.0 - x).powi(d as i32);
    w / (1.0 + w)
}

/// F^{(t)}_{d,λ}(x0), with F^{(0)} the identity.
pub fn iterate_recurrence(d: u32, lambda: f64, x0: f64, t: u64) -> f64 {
    (0..t).fold(x0, |x, _| recurrence(d, lambda, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub x_hat: f64,
    /// |F(x̂) − x̂|.
    pub residual: f64,
    pub bisection_steps: u32,
}

/// The unique zero of h(x) = x/(1−x)^{d+1} − λ on (0, 1), which is the
/// unique fixed point of F_{d,λ}. Requires 0 < λ ≤ λ_c(d+1).
pub fn fixed_point(d: u32, lambda: f64) -> Result<FixedPointResult> {
    check_branching(d)?;
    check_fugacity(lambda)?;
    let lambda_c = critical_fugacity(d + 1)?;
    if lambda > lambda_c {
        return Err(Error::Domain(format!(
            "fugacity {lambda} exceeds the critical value {lambda_c}"
        )));
    }
    let h = |x: f64| x / (1.0 - x).powi(d as i32 + 1) - lambda;
    // h(0) < 0 and x̂ ≤ 1/d, so [0, min(1, 2/d)] brackets the root.
    let (mut lo, mut hi) = (0.0f64, (2.0 / f64::from(d)).min(1.0 - 1e-12));
    let mut steps = 0;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let x_hat = if h(lo).abs() <= h(hi).abs() { lo } else { hi };
    Ok(FixedPointResult {
        x_hat,
        residual: (recurrence(d, lambda, x_hat) - x_hat).abs(),
        bisection_steps: steps,
    })
}

/// The ℓ∞-spectral-independence constant (1+x̂)/(1−dx̂) and its closed-form
/// upper bound (2/δ)(1 + 2/(d−1)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiUpperConstant {
    pub x_hat: f64,
    pub exact: f64,
    pub closed_form: f64,
}

pub fn si_upper_constant(params: &HardcoreParams) -> Result<SiUpperConstant> {
    if params.delta.is_nan() || params.delta <= 0.0 {
        return Err(Error::Domain(
            "the spectral-independence constant diverges at zero slack".into(),
        ));
    }
    let d = f64::from(params.d);
    let x_hat = fixed_point(params.d, params.lambda)?.x_hat;
    Ok(SiUpperConstant {
        x_hat,
        exact: (1.0 + x_hat) / (1.0 - d * x_hat),
        closed_form: 2.0 / params.delta * (1.0 + 2.0 / (d - 1.0)),
    })
}

/// Influence-sum bound for trees whose every vertex has at most d children:
/// 1/(1 − dx̂).
pub fn d_ary_influence_bound(d: u32, x_hat: f64) -> f64 {
    1.0 / (1.0 - f64::from(d) * x_hat)
}

/// Influence-sum bound for trees of maximum degree d + 1: (1+x̂)/(1−dx̂).
pub fn regular_influence_bound(d: u32, x_hat: f64) -> f64 {
    (1.0 + x_hat) / (1.0 - f64::from(d) * x_hat)
}

/// Linear upper bound x̂(δ) ≤ (1/d)(1 − (d−1)δ/(2d)).
pub fn fixed_point_upper_bound(d: u32, delta: f64) -> Result<f64> {
    check_branching(d)?;
    check_open_unit("slack", delta)?;
    let d = f64::from(d);
    Ok((1.0 - (d - 1.0) * delta / (2.0 * d)) / d)
}

/// Inverse of δ ↦ x̂: δ(x̂) = 1 − x̂ / (λ_c(d+1)·(1−x̂)^{d+1}).
pub fn slack_of_fixed_point(d: u32, x_hat: f64) -> Result<f64> {
    check_branching(d)?;
    // Bisection at criticality may land an ulp or so above 1/d.
    if !(x_hat > 0.0 && x_hat <= (1.0 + 1e-12) / f64::from(d)) {
        return Err(Error::Domain(format!(
            "x must lie in (0, 1/d], got {x_hat}"
        )));
    }
    let lambda_c = critical_fugacity(d + 1)?;
    Ok(1.0 - x_hat / (lambda_c * (1.0 - x_hat).powi(d as i32 + 1)))
}

/// The auxiliary functions of the d-ary influence-sum argument at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProofFunctions {
    /// f(x) = (1 + (d+1)λ(1−x)^d) / (1 − (d²x−1)λ(1−x)^d).
    pub f: f64,
    /// g(x) = ((1−x)^{−d} + (d+1)λ) / (1 + dx); +∞ at x = 1.
    pub g: f64,
    /// h(x) = x/(1−x)^{d+1} − λ; +∞ at x = 1.
    pub h: f64,
    /// a(x) = F(x) + dx·F(x)·Φ* with Φ* = 1/(1 − dx̂).
    pub a: f64,
    /// (d²x − 1)·λ(1−x)^d, which must stay below 1.
    pub validity_lhs: f64,
}

/// Evaluates [`ProofFunctions`]; requires 0 < λ < λ_c(d+1) so that f is
/// finite on all of [0, 1].
pub fn proof_functions(d: u32, lambda: f64, x: f64) -> Result<ProofFunctions> {
    check_branching(d)?;
    check_fugacity(lambda)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    let lambda_c = critical_fugacity(d + 1)?;
    if lambda >= lambda_c {
        return Err(Error::Domain(format!(
            "f diverges for fugacity {lambda} >= critical value {lambda_c}"
        )));
    }
    let x_hat = fixed_point(d, lambda)?.x_hat;
    proof_functions_at(d, lambda, x_hat, x)
}

/// Like [`proof_functions`] with x̂ already known.
pub fn proof_functions_at(d: u32, lambda: f64, x_hat: f64, x: f64) -> Result<ProofFunctions> {
    let df = f64::from(d);
    let w = lambda * (1.0 - x).powi(d as i32);
    let validity_lhs = (df * df * x - 1.0) * w;
    if validity_lhs >= 1.0 {
        return Err(Error::Domain(format!(
            "validity inequality fails at x = {x}: lhs = {validity_lhs}"
        )));
    }
    let f = (1.0 + (df + 1.0) * w) / (1.0 - validity_lhs);
    let (g, h) = if x < 1.0 {
        (
            ((1.0 - x).powi(-(d as i32)) + (df + 1.0) * lambda) / (1.0 + df * x),
            x / (1.0 - x).powi(d as i32 + 1) - lambda,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let fx = w / (1.0 + w);
    let phi_star = d_ary_influence_bound(d, x_hat);
    Ok(ProofFunctions {
        f,
        g,
        h,
        a: fx + df * x * fx * phi_star,
        validity_lhs,
    })
}

/// Mixing-time bound quantities for Glauber dynamics at criticality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingBound {
    pub max_degree: u32,
    pub n: u64,
    /// ρ = 2(1 + 2/(Δ−2)): the SI constant at slack δ is at most ρ/δ.
    pub rho: f64,
    /// Exponent of n in the mixing bound, 2 + ρ = 4 + 4/(Δ−2).
    pub exponent: f64,
    /// The exponent as an exact fraction (numerator, denominator).
    pub exponent_fraction: (u64, u64),
    pub theta: f64,
    /// ∫₀^θ K(δ)/(1−δ) dδ with K(δ) = min{ρ/δ, n}, closed form.
    pub log_integral: f64,
    /// The same integral by adaptive quadrature.
    pub log_integral_quadrature: f64,
    /// 24ρ + ρ·ln 23 + ρ·ln(n/ρ), an upper bound on `log_integral`.
    pub log_integral_upper: f64,
}

impl MixingBound {
    /// exp of the integral: the n-dependent factor multiplying C·n²·log Δ.
    pub fn exp_integral(&self) -> f64 {
        self.log_integral.exp()
    }
}

/// Requires n ≥ ρ/θ = (24/23)ρ.
pub fn mixing_bound(max_degree: u32, n: u64) -> Result<MixingBound> {
    check_degree(max_degree)?;
    let m = f64::from(max_degree);
    let rho = 2.0 * (1.0 + 2.0 / (m - 2.0));
    let nf = n as f64;
    if nf < rho / THETA {
        return Err(Error::Domain(format!(
            "n = {n} is below the threshold (24/23)·ρ = {}",
            rho / THETA
        )));
    }
    let log_integral = nf * (nf / (nf - rho)).ln()
        + rho * (THETA / (1.0 - THETA)).ln()
        + rho * ((nf - rho) / rho).ln();
    let kink = rho / nf;
    // Above the kink, δ = e^u turns ρ/(δ(1−δ)) dδ into ρ/(1−e^u) du.
    let tol = 1e-12 * log_integral.abs();
    let log_integral_quadrature = adaptive_simpson(&|d: f64| nf / (1.0 - d), 0.0, kink, tol)
        + adaptive_simpson(&|u: f64| rho / (1.0 - u.exp()), kink.ln(), THETA.ln(), tol);
    Ok(MixingBound {
        max_degree,
        n,
        rho,
        exponent: 4.0 + 4.0 / (m - 2.0),
        exponent_fraction: mixing_exponent(max_degree)?,
        theta: THETA,
        log_integral,
        log_integral_quadrature,
        log_integral_upper: 24.0 * rho + rho * 23f64.ln() + rho * (nf / rho).ln(),
    })
}

/// The exponent 4 + 4/(Δ−2) = 4(Δ−1)/(Δ−2) as a reduced fraction.
pub fn mixing_exponent(max_degree: u32) -> Result<(u64, u64)> {
    check_degree(max_degree)?;
    let num = 4 * (u64::from(max_degree) - 1);
    let den = u64::from(max_degree) - 2;
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Bisection on F(x) − x, independent of the h-based solver.
    fn fixed_point_by_recurrence(d: u32, lambda: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if recurrence(d, lambda, mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn critical_fugacity_values() {
        assert_eq!(critical_fugacity(3).unwrap(), 4.0);
        assert_eq!(critical_fugacity(4).unwrap(), 1.6875);
        assert!(close(critical_fugacity(5).unwrap(), 256.0 / 243.0, 1e-16));
        assert!(critical_fugacity(2).is_err());
        // Large degrees fall back to the log form; λ_c(Δ) ~ e/Δ.
        let big = critical_fugacity(200).unwrap();
        assert!(close(big * 200.0, std::f64::consts::E, 0.05));
    }

    #[test]
    fn recurrence_examples() {
        assert!(close(tree_recurrence(2, 1.0, 0.0).unwrap(), 0.5, 0.0));
        assert!(close(tree_recurrence(2, 1.0, 0.5).unwrap(), 0.2, 1e-16));
        assert_eq!(tree_recurrence(3, 2.0, 1.0).unwrap(), 0.0);
        assert!(tree_recurrence(2, 1.0, 1.5).is_err());
    }

    #[test]
    fn iteration_examples() {
        assert_eq!(iterate_recurrence(2, 1.0, 0.3, 0), 0.3);
        assert!(close(iterate_recurrence(2, 1.0, 0.0, 2), 0.2, 1e-16));
        let x = iterate_recurrence(2, 1.0, 0.0, 500);
        assert!(close(x, fixed_point(2, 1.0).unwrap().x_hat, 1e-12));
    }

    #[test]
    fn fixed_point_examples() {
        let fp = fixed_point(2, 4.0).unwrap();
        assert!(close(fp.x_hat, 0.5, 1e-12));
        let fp = fixed_point(2, 1.0).unwrap();
        assert!(close(fp.x_hat, 0.317672, 1e-6));
        assert!(close(fp.x_hat, fixed_point_by_recurrence(2, 1.0), 1e-13));
        assert!(fp.residual <= 1e-12);
        assert!(close(
            fixed_point(3, 1.6875).unwrap().x_hat,
            1.0 / 3.0,
            1e-12
        ));
        assert!(fixed_point(2, 4.0001).is_err());
    }

    #[test]
    fn si_constant_examples() {
        let c = si_upper_constant(&HardcoreParams::from_slack(3, 0.75).unwrap()).unwrap();
        assert!(close(c.exact, 3.6134, 1e-3));
        assert!(close(c.closed_form, 8.0, 1e-12));
        let c = si_upper_constant(&HardcoreParams::from_slack(3, 1.0 - 1e-9).unwrap()).unwrap();
        assert!(close(c.exact, 1.0, 1e-7));
        let c = si_upper_constant(&HardcoreParams::from_slack(4, 0.5).unwrap()).unwrap();
        assert!(c.exact <= 8.0 && close(c.closed_form, 8.0, 1e-12));
        assert!(si_upper_constant(&HardcoreParams::from_slack(3, 0.0).unwrap()).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(HardcoreParams::from_slack(3, 1.5).is_err());
        assert!(HardcoreParams::from_slack(3, -0.1).is_err());
        let p = HardcoreParams::from_fugacity(3, 1.0).unwrap();
        assert!(close(p.delta, 0.75, 1e-15));
        assert!(HardcoreParams::from_fugacity(3, 4.5).is_err());
    }

    #[test]
    fn fixed_point_bound_examples() {
        assert!(close(
            fixed_point_upper_bound(2, 0.75).unwrap(),
            0.40625,
            1e-15
        ));
        assert!(close(
            fixed_point_upper_bound(2, 1e-12).unwrap(),
            0.5,
            1e-12
        ));
        let x_hat = fixed_point(2, 1.0).unwrap().x_hat;
        assert!(x_hat < fixed_point_upper_bound(2, 0.75).unwrap());
        assert!(fixed_point_upper_bound(2, 0.0).is_err());
    }

    #[test]
    fn slack_inverse_examples() {
        assert!(close(slack_of_fixed_point(2, 0.5).unwrap(), 0.0, 1e-15));
        assert!(close(slack_of_fixed_point(2, 1e-12).unwrap(), 1.0, 1e-11));
        let x_hat = fixed_point(2, 1.0).unwrap().x_hat;
        assert!(close(slack_of_fixed_point(2, x_hat).unwrap(), 0.75, 1e-9));
        assert!(slack_of_fixed_point(2, 0.6).is_err());
    }

    #[test]
    fn proof_function_examples() {
        let pf = proof_functions(2, 1.0, 0.0).unwrap();
        assert!(close(pf.f, 2.0, 1e-15));
        let x_hat = fixed_point(2, 1.0).unwrap().x_hat;
        let pf = proof_functions(2, 1.0, x_hat).unwrap();
        assert!(close(pf.f, 1.0 / (1.0 - 2.0 * x_hat), 1e-9));
        assert!(close(pf.f, 2.7423, 1e-4));
        assert!(pf.h.abs() < 1e-12);
        let pf = proof_functions(3, 0.5, 1.0).unwrap();
        assert_eq!(pf.validity_lhs, 0.0);
        assert!(pf.g.is_infinite());
        assert!(proof_functions(2, 4.0, 0.3).is_err());
    }

    #[test]
    fn mixing_bound_examples() {
        let b = mixing_bound(3, 100).unwrap();
        assert_eq!(b.rho, 6.0);
        assert_eq!(b.exponent, 8.0);
        assert_eq!(mixing_bound(4, 100).unwrap().exponent, 6.0);
        assert_eq!(mixing_bound(6, 100).unwrap().exponent, 5.0);
        assert!(close(
            b.log_integral,
            b.log_integral_quadrature,
            1e-6 * b.log_integral
        ));
        assert!(b.log_integral <= b.log_integral_upper);
        assert!(mixing_bound(3, 6).is_err());
        assert!(mixing_bound(3, 7).is_ok());
    }
}
