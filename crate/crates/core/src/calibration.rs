//! The calibrating field of the axial hyperplane `{x₁ = 0}` inside `Ω_λ`.
//!
//! On the base `M' = {x ∈ R^n : x' ≠ 0}` with the cone metric we take
//! `ψ₀ = √(1+λ²)/(n-1) Σ_{i≥2} (-1)^i x_i dx_{2…n without i}`, the profile
//! `h(u) = cos^γ(arctan u)` with `u = x₁/r`, and `ω_h = d(h ψ₀)`. The field is
//! `X = (-1)^{n-1} (⋆ω_h)♯`, pushed to the lateral surface by the frame
//! `∂_i = e_i + λ (x_i/|x|) e_t` and extended vertically into the cone.
//!
//! `|Z| ≤ 1` holds whenever `(1 + γ/(n-1))² - (1+γ)/(1+λ²) ≤ 0`; the best
//! exponent is `γ̄ = (n-1)((n-1)/(2(1+λ²)) - 1)` and the condition then holds
//! exactly for `0 < λ ≤ λ̄(n) = (n-3)/(2√(n-2))`, `n ≥ 4`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::cone::{
    classify_sampled, metric_at, push_forward, AmbientPoint, BasePoint, ConeParams, Region,
};
use crate::exterior::{hodge_star, sharp, wedge, KForm, MultiIndex, Orientation};
use crate::{Error, Result};

/// `λ̄(n) = (n-3) / (2√(n-2))`. Zero for `n = 3` (no feasible slope).
pub fn lambda_bar(n: usize) -> Result<f64> {
    if n <= 2 {
        return Err(Error::DimensionTooSmall(n, 3));
    }
    let n = n as f64;
    Ok(0.5 * (n - 3.0) / (n - 2.0).sqrt())
}

/// `λ̄(n)² = (n-3)² / (4(n-2))` as an exact rational.
pub fn lambda_bar_sq_exact(n: usize) -> Result<BigRational> {
    if n <= 2 {
        return Err(Error::DimensionTooSmall(n, 3));
    }
    let n = n as i64;
    Ok(BigRational::new(
        BigInt::from((n - 3) * (n - 3)),
        BigInt::from(4 * (n - 2)),
    ))
}

fn to_big(q: Ratio<i64>) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

/// `γ̄ = (n-1)((n-1)/(2(1+λ²)) - 1)` in exact arithmetic.
pub fn gamma_bar_exact(n: usize, lambda_sq: &BigRational) -> BigRational {
    let m = BigRational::from_integer(BigInt::from(n as i64 - 1));
    let one = BigRational::from_integer(BigInt::from(1));
    let two = BigRational::from_integer(BigInt::from(2));
    &m * (&m / (two * (&one + lambda_sq)) - &one)
}

/// Minimiser over `γ > 0` of the feasibility expression. Errors when the
/// unconstrained minimiser is not positive.
///
/// Cones carrying an exact `λ²` get the exact value rounded once.
pub fn gamma_bar(c: &ConeParams) -> Result<f64> {
    let m = (c.n() - 1) as f64;
    let ratio = m / (2.0 * (1.0 + c.lambda_sq()));
    if ratio <= 1.0 {
        return Err(Error::NoPositiveGamma(ratio));
    }
    if let Some(q) = c.exact_lambda_sq() {
        let g = gamma_bar_exact(c.n(), &to_big(q));
        return Ok(g.to_f64().expect("finite rational"));
    }
    Ok(m * (ratio - 1.0))
}

/// `(1 + γ/(n-1))² - (1+γ)/(1+λ²)`.
pub fn feasibility_lhs(n: usize, lambda_sq: f64, gamma: f64) -> f64 {
    let m = (n - 1) as f64;
    let a = 1.0 + gamma / m;
    a * a - (1.0 + gamma) / (1.0 + lambda_sq)
}

/// Exact counterpart of [`feasibility_lhs`].
pub fn feasibility_lhs_exact(n: usize, lambda_sq: &BigRational, gamma: &BigRational) -> BigRational {
    let one = BigRational::from_integer(BigInt::from(1));
    let m = BigRational::from_integer(BigInt::from(n as i64 - 1));
    let a = &one + gamma / &m;
    &a * &a - (&one + gamma) / (&one + lambda_sq)
}

/// Outcome of testing the feasibility condition for one `(n, λ, γ)`.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub lhs: f64,
    /// Exact value, present when the cone carries an exact `λ²`.
    pub lhs_exact: Option<String>,
    pub feasible: bool,
    pub gamma_used: f64,
}

/// Evaluates the feasibility expression. The verdict comes from exact
/// arithmetic when the cone carries an exact `λ²` (the `f64` exponent is
/// converted without rounding); otherwise from the floating value.
pub fn feasibility(c: &ConeParams, gamma: f64) -> FeasibilityReport {
    let lhs = feasibility_lhs(c.n(), c.lambda_sq(), gamma);
    let exact = c.exact_lambda_sq().and_then(|q| {
        BigRational::from_f64(gamma).map(|g| feasibility_lhs_exact(c.n(), &to_big(q), &g))
    });
    let feasible = match &exact {
        Some(e) => !e.is_positive(),
        None => lhs <= 0.0,
    };
    FeasibilityReport {
        lhs,
        lhs_exact: exact.map(|e| e.to_string()),
        feasible,
        gamma_used: gamma,
    }
}

/// Exact check that `(λ̄(n)², γ̄)` makes the feasibility expression vanish
/// and that `γ̄ = n - 3` there.
#[derive(Clone, Debug)]
pub struct ThresholdCertificate {
    pub n: usize,
    pub lambda_sq: BigRational,
    pub gamma: BigRational,
    pub lhs: BigRational,
}

impl ThresholdCertificate {
    pub fn gamma_is_n_minus_3(&self) -> bool {
        self.gamma == BigRational::from_integer(BigInt::from(self.n as i64 - 3))
    }

    pub fn lhs_is_zero(&self) -> bool {
        self.lhs.is_zero()
    }

    pub fn holds(&self) -> bool {
        self.gamma_is_n_minus_3() && self.lhs_is_zero()
    }
}

impl fmt::Display for ThresholdCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} lambda^2={} gamma_bar={} lhs={}",
            self.n, self.lambda_sq, self.gamma, self.lhs
        )
    }
}

pub fn certify_threshold(n: usize) -> Result<ThresholdCertificate> {
    if n < 4 {
        return Err(Error::EmptyFeasibleRange(n));
    }
    let lambda_sq = lambda_bar_sq_exact(n)?;
    let gamma = gamma_bar_exact(n, &lambda_sq);
    let lhs = feasibility_lhs_exact(n, &lambda_sq, &gamma);
    Ok(ThresholdCertificate {
        n,
        lambda_sq,
        gamma,
        lhs,
    })
}

/// Recovers the critical slope by bisecting the feasibility verdict at the
/// optimal exponent. Feasible at `λ → 0⁺`, infeasible where `γ̄` hits zero.
pub fn threshold_bisect(n: usize, tol: f64) -> Result<f64> {
    if n < 4 {
        return Err(Error::EmptyFeasibleRange(n));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance {tol} must be positive")));
    }
    let feasible = |lambda: f64| -> bool {
        let Ok(c) = ConeParams::new(n, lambda) else {
            return false;
        };
        match gamma_bar(&c) {
            Ok(g) => feasibility(&c, g).feasible,
            Err(_) => false,
        }
    };
    let mut lo = 1e-12;
    let mut hi = ((n as f64 - 1.0) / 2.0 - 1.0).sqrt();
    if !feasible(lo) || feasible(hi) {
        return Err(Error::EmptyFeasibleRange(n));
    }
    while hi - lo > 0.25 * tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `h(u) = cos^γ(arctan u)` and `h'(u) = -γ cos^{γ+1}(θ) sin θ`.
pub fn h_eval(u: f64, gamma: f64) -> (f64, f64) {
    let theta = u.atan();
    let c = theta.cos();
    let h = c.powf(gamma);
    let hp = -gamma * c.powf(gamma + 1.0) * theta.sin();
    (h, hp)
}

fn check_angle(theta: f64) -> Result<()> {
    if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::AngleOutOfRange(theta));
    }
    Ok(())
}

/// `1 - cos^{2(1+γ)} θ` without cancellation near `θ = 0`.
fn one_minus_cos_pow(theta: f64, gamma: f64) -> f64 {
    let ln_cos = 0.5 * (-theta.sin().powi(2)).ln_1p();
    -(2.0 * (1.0 + gamma) * ln_cos).exp_m1()
}

/// `β_γ(θ) = sgn(θ) arccos(cos^{1+γ} θ)`.
pub fn beta_eval(theta: f64, gamma: f64) -> Result<f64> {
    check_angle(theta)?;
    let c = theta.cos().powf(1.0 + gamma);
    let s = one_minus_cos_pow(theta, gamma).sqrt();
    Ok(theta.signum() * s.atan2(c) * if theta == 0.0 { 0.0 } else { 1.0 })
}

/// `β_γ'(θ)`, extended by continuity with `√(1+γ)` at `θ = 0`.
pub fn beta_prime(theta: f64, gamma: f64) -> Result<f64> {
    check_angle(theta)?;
    if theta == 0.0 {
        return Ok((1.0 + gamma).sqrt());
    }
    let num = (1.0 + gamma) * theta.cos().powf(gamma) * theta.sin().abs();
    Ok(num / one_minus_cos_pow(theta, gamma).sqrt())
}

/// `tan θ / tan β_γ(θ)`, extended with `1/√(1+γ)` at `θ = 0`.
pub fn tan_ratio(theta: f64, gamma: f64) -> Result<f64> {
    check_angle(theta)?;
    if theta == 0.0 {
        return Ok(1.0 / (1.0 + gamma).sqrt());
    }
    let c = theta.cos().powf(1.0 + gamma);
    Ok(theta.tan().abs() * c / one_minus_cos_pow(theta, gamma).sqrt())
}

/// Margin `(n-1)/√(1+λ²) - |β' + (n-2) tan θ / tan β|` of the first-order
/// differential inequality for `β_γ`; non-negative means satisfied.
pub fn inequality_margin(theta: f64, c: &ConeParams, gamma: f64) -> Result<f64> {
    let n = c.n() as f64;
    let lhs = (beta_prime(theta, gamma)? + (n - 2.0) * tan_ratio(theta, gamma)?).abs();
    Ok((n - 1.0) / (1.0 + c.lambda_sq()).sqrt() - lhs)
}

/// Margin of the squared form `tan²β/(1+λ²) - (1 + γ/(n-1))² tan²θ`, which
/// has no `0/0` at the origin.
pub fn inequality_margin_squared(theta: f64, c: &ConeParams, gamma: f64) -> Result<f64> {
    let b = beta_eval(theta, gamma)?;
    let a = 1.0 + gamma / (c.n() - 1) as f64;
    Ok(b.tan().powi(2) / (1.0 + c.lambda_sq()) - a * a * theta.tan().powi(2))
}

/// `w(z) = (z^{1+γ} - 1)/(z - 1)`, with `w(1) = 1 + γ`.
pub fn w_ratio(z: f64, gamma: f64) -> Result<f64> {
    if !(z >= 1.0) {
        return Err(Error::BelowOne(z));
    }
    if z == 1.0 {
        return Ok(1.0 + gamma);
    }
    let d = z - 1.0;
    Ok(((1.0 + gamma) * d.ln_1p()).exp_m1() / d)
}

/// Cone together with the profile exponent `γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationParams {
    pub cone: ConeParams,
    pub gamma: f64,
}

impl CalibrationParams {
    pub fn new(cone: ConeParams, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::NonPositiveGamma(gamma));
        }
        Ok(Self { cone, gamma })
    }

    /// Uses the optimal exponent `γ̄`.
    pub fn optimal(cone: ConeParams) -> Result<Self> {
        Self::new(cone, gamma_bar(&cone)?)
    }

    pub fn n(&self) -> usize {
        self.cone.n()
    }
}

fn check_dim(x: &BasePoint, c: &ConeParams) -> Result<()> {
    if x.dim() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            got: x.dim(),
        });
    }
    Ok(())
}

fn require_primed(x: &BasePoint) -> Result<f64> {
    let r = x.r();
    if r == 0.0 {
        return Err(Error::OnAxisPlane);
    }
    Ok(r)
}

/// `α = (2, …, n)`, zero-based `{1, …, n-1}`.
fn alpha(n: usize) -> MultiIndex {
    MultiIndex::full(n).without(0)
}

/// `ψ₀(x) = √(1+λ²)/(n-1) Σ_{i=2}^n (-1)^i x_i dx_{α without i}`.
pub fn psi0_at(x: &BasePoint, c: &ConeParams) -> Result<KForm> {
    check_dim(x, c)?;
    let n = c.n();
    let k = (1.0 + c.lambda_sq()).sqrt() / (n - 1) as f64;
    let a = alpha(n);
    let mut out = KForm::zero(n, n - 2);
    for i in 1..n {
        // Paper index i+1, so the sign is (-1)^{i+1}.
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        out.add_term(a.without(i), sign * k * x.coords()[i]);
    }
    Ok(out)
}

/// `ω₀ = √(1+λ²) dx₂ ∧ … ∧ dx_n`.
pub fn omega0(c: &ConeParams) -> KForm {
    KForm::basis(c.n(), alpha(c.n()), (1.0 + c.lambda_sq()).sqrt())
}

/// `dr = Σ_{i≥2} (x_i/r) dx_i` on `M'`.
pub fn dr_form(x: &BasePoint) -> Result<KForm> {
    let r = require_primed(x)?;
    let mut v: Vec<f64> = x.coords().iter().map(|xi| xi / r).collect();
    v[0] = 0.0;
    Ok(KForm::one_form(&v))
}

/// `dρ = Σ (x_i/ρ) dx_i`.
pub fn drho_form(x: &BasePoint) -> KForm {
    let rho = x.rho();
    KForm::one_form(&x.coords().iter().map(|xi| xi / rho).collect::<Vec<_>>())
}

/// `dθ = (r dx₁ - (x₁/r) Σ_{i≥2} x_i dx_i) / ρ²` on `M'`.
pub fn dtheta_form(x: &BasePoint) -> Result<KForm> {
    let r = require_primed(x)?;
    let rho2 = x.rho().powi(2);
    let x1 = x.coords()[0];
    let mut v: Vec<f64> = x.coords().iter().map(|xi| -x1 / r * xi / rho2).collect();
    v[0] = r / rho2;
    Ok(KForm::one_form(&v))
}

/// `ψ_h = h(u) ψ₀`.
pub fn psi_h_at(x: &BasePoint, params: &CalibrationParams) -> Result<KForm> {
    let u = x.u()?;
    let (h, _) = h_eval(u, params.gamma);
    Ok(psi0_at(x, &params.cone)?.scale(h))
}

/// `ω_h = [(h - x₁ h'/((n-1) r)) dr + h'/(n-1) dx₁] ∧ ((n-1)/r) ψ₀`.
pub fn omega_h_at(x: &BasePoint, params: &CalibrationParams) -> Result<KForm> {
    let c = &params.cone;
    check_dim(x, c)?;
    let r = require_primed(x)?;
    let n = c.n();
    let m = (n - 1) as f64;
    let x1 = x.coords()[0];
    let (h, hp) = h_eval(x1 / r, params.gamma);
    let bracket = dr_form(x)?
        .scale(h - x1 * hp / (m * r))
        .add(&KForm::basis(n, MultiIndex::single(0), hp / m))?;
    wedge(&bracket, &psi0_at(x, c)?.scale(m / r))
}

/// `ω_h = dh ∧ ψ₀ + h ω₀` with `dh = (h'/r) dx₁ - (x₁/r²) h' dr`.
pub fn omega_h_assembled(x: &BasePoint, params: &CalibrationParams) -> Result<KForm> {
    let c = &params.cone;
    check_dim(x, c)?;
    let r = require_primed(x)?;
    let n = c.n();
    let x1 = x.coords()[0];
    let (h, hp) = h_eval(x1 / r, params.gamma);
    let dh = KForm::basis(n, MultiIndex::single(0), hp / r).sub(&dr_form(x)?.scale(x1 * hp / (r * r)))?;
    wedge(&dh, &psi0_at(x, c)?)?.add(&omega0(c).scale(h))
}

/// `X = (-1)^{n-1} (⋆ω_h)♯` as coefficients in the coordinate frame.
pub fn field_x_at(x: &BasePoint, params: &CalibrationParams) -> Result<Vec<f64>> {
    let c = &params.cone;
    let m = metric_at(x, c)?;
    let o = Orientation::from_metric(&m);
    let w = omega_h_at(x, params)?;
    let sign = if (c.n() - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let star = hodge_star(&w, &m, &o).scale(sign);
    sharp(&star, &m)
}

/// `Y = I_* X` at `I(x)`, as a vector of `R^{n+1}`.
pub fn field_y_at(x: &BasePoint, params: &CalibrationParams) -> Result<Vec<f64>> {
    let coeffs = field_x_at(x, params)?;
    Ok(push_forward(x, &params.cone, &coeffs))
}

/// `Z(x, t) = Y(x, λ|x|)` on `Ω'_λ ∪ S'_λ`.
pub fn z_at(p: &AmbientPoint, params: &CalibrationParams) -> Result<Vec<f64>> {
    let c = &params.cone;
    if p.x.len() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            got: p.x.len(),
        });
    }
    match classify_sampled(p, c) {
        Region::InteriorPrimed | Region::SurfacePrimed => {}
        Region::Origin => return Err(Error::Origin),
        Region::Interior | Region::Surface => return Err(Error::OnAxisPlane),
        Region::AxisPlane | Region::Exterior => return Err(Error::OutsideCone),
    }
    field_y_at(&BasePoint::new(p.x.clone())?, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::form_norm;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn lambda_bar_values() {
        assert_abs_diff_eq!(lambda_bar(4).unwrap(), 0.353_553_390_593_273_8, epsilon = 1e-15);
        assert_abs_diff_eq!(lambda_bar(5).unwrap(), 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_eq!(lambda_bar(3).unwrap(), 0.0);
        assert!(lambda_bar(2).is_err());
        assert_abs_diff_eq!(lambda_bar(10).unwrap(), 7.0 / (4.0 * 2f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn lambda_bar_increasing() {
        let v: Vec<f64> = (4..40).map(|n| lambda_bar(n).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gamma_bar_examples() {
        assert_eq!(gamma_bar(&ConeParams::at_threshold(4).unwrap()).unwrap(), 1.0);
        assert_eq!(gamma_bar(&ConeParams::at_threshold(5).unwrap()).unwrap(), 2.0);
        let g = gamma_bar(&ConeParams::new(4, 0.3).unwrap()).unwrap();
        assert_abs_diff_eq!(g, 3.0 * (3.0 / 2.18 - 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(g, 1.128_440_366_972_477, epsilon = 1e-12);
        assert!(matches!(
            gamma_bar(&ConeParams::new(3, 0.1).unwrap()),
            Err(Error::NoPositiveGamma(_))
        ));
    }

    #[test]
    fn feasibility_examples() {
        let c = ConeParams::at_threshold(4).unwrap();
        let rep = feasibility(&c, 1.0);
        assert!(rep.feasible);
        assert_eq!(rep.lhs_exact.as_deref(), Some("0"));

        let c = ConeParams::new(4, 0.5).unwrap();
        let rep = feasibility(&c, gamma_bar(&c).unwrap());
        assert!(!rep.feasible && rep.lhs > 0.0);

        let c = ConeParams::new(6, 0.5).unwrap();
        let rep = feasibility(&c, gamma_bar(&c).unwrap());
        assert!(rep.feasible && rep.lhs < 0.0);
        assert!(rep.lhs_exact.is_none());
    }

    #[test]
    fn certificate_holds_for_small_n() {
        for n in 4..=10 {
            let cert = certify_threshold(n).unwrap();
            assert!(cert.holds(), "{cert}");
        }
        assert_eq!(certify_threshold(3).unwrap_err(), Error::EmptyFeasibleRange(3));
    }

    #[test]
    fn bisection_examples() {
        let l = threshold_bisect(4, 1e-10).unwrap();
        assert!((l - 0.353_553_390_6).abs() < 1e-10);
        let l = threshold_bisect(7, 1e-10).unwrap();
        assert!((l - 4.0 / (2.0 * 5f64.sqrt())).abs() < 1e-10);
        assert_eq!(threshold_bisect(3, 1e-10).unwrap_err(), Error::EmptyFeasibleRange(3));
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_eval(0.0, 2.5), (1.0, 0.0));
        assert_abs_diff_eq!(h_eval(1.0, 1.0).0, FRAC_PI_4.cos(), epsilon = 1e-15);
        let (h, _) = h_eval(3f64.sqrt(), 1.0);
        assert_abs_diff_eq!(h, 0.5, epsilon = 1e-15);
        let b = beta_eval(FRAC_PI_3, 1.0).unwrap();
        assert_abs_diff_eq!(h, b.cos() / FRAC_PI_3.cos(), epsilon = 1e-14);
    }

    #[test]
    fn h_prime_matches_central_difference() {
        for &(u, g) in &[(0.3, 1.0), (-2.0, 3.5), (5.0, 0.7)] {
            let s = 1e-5;
            let fd = (h_eval(u + s, g).0 - h_eval(u - s, g).0) / (2.0 * s);
            assert_abs_diff_eq!(h_eval(u, g).1, fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_eval(0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(beta_eval(FRAC_PI_3, 1.0).unwrap(), 0.25f64.acos(), epsilon = 1e-15);
        assert_abs_diff_eq!(beta_eval(FRAC_PI_3, 1.0).unwrap(), 1.318_116_071_652_818, epsilon = 1e-14);
        assert_abs_diff_eq!(
            beta_eval(-0.7, 2.0).unwrap(),
            -beta_eval(0.7, 2.0).unwrap(),
            epsilon = 0.0
        );
        assert!(beta_eval(std::f64::consts::FRAC_PI_2, 1.0).is_err());
    }

    #[test]
    fn beta_prime_matches_central_difference() {
        for &(t, g) in &[(0.3, 1.0), (-1.2, 3.0), (1e-3, 0.5)] {
            let s = 1e-6;
            let fd = (beta_eval(t + s, g).unwrap() - beta_eval(t - s, g).unwrap()) / (2.0 * s);
            assert_abs_diff_eq!(beta_prime(t, g).unwrap(), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn w_examples() {
        assert_eq!(w_ratio(1.0, 1.5).unwrap(), 2.5);
        assert_abs_diff_eq!(w_ratio(2.0, 1.0).unwrap(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w_ratio(1.0 + 1e-12, 1.5).unwrap(), 2.5, epsilon = 1e-9);
        assert!(w_ratio(0.5, 1.0).is_err());
    }

    #[test]
    fn psi0_norm_example() {
        let c = ConeParams::new(4, 1.0).unwrap();
        let x = BasePoint::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let m = metric_at(&x, &c).unwrap();
        let nrm = form_norm(&psi0_at(&x, &c).unwrap(), &m).unwrap();
        assert_abs_diff_eq!(nrm, 2f64.sqrt() / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn psi0_vanishes_on_axis() {
        let c = ConeParams::new(4, 1.0).unwrap();
        let x = BasePoint::new(vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(psi0_at(&x, &c).unwrap().is_zero());
    }

    #[test]
    fn dr_wedge_psi0_is_scaled_omega0() {
        let c = ConeParams::new(4, 1.0).unwrap();
        let x = BasePoint::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let lhs = wedge(&dr_form(&x).unwrap(), &psi0_at(&x, &c).unwrap()).unwrap();
        let rhs = omega0(&c).scale(x.r() / 3.0);
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-15);
    }

    #[test]
    fn omega_h_on_plane_is_omega0() {
        let cone = ConeParams::at_threshold(5).unwrap();
        let p = CalibrationParams::optimal(cone).unwrap();
        let x = BasePoint::new(vec![0.0, 0.4, -1.0, 0.3, 2.0]).unwrap();
        let w = omega_h_at(&x, &p).unwrap();
        assert!(w.max_abs_diff(&omega0(&cone)).unwrap() < 1e-14);
        let m = metric_at(&x, &cone).unwrap();
        assert_abs_diff_eq!(form_norm(&w, &m).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn z_is_e1_on_plane() {
        let cone = ConeParams::new(4, 0.3).unwrap();
        let p = CalibrationParams::optimal(cone).unwrap();
        let z = z_at(&AmbientPoint::new(vec![0.0, 0.5, -0.2, 1.0], 2.0), &p).unwrap();
        let want = [1.0, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in z.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn z_domain_errors() {
        let cone = ConeParams::new(4, 0.3).unwrap();
        let p = CalibrationParams::optimal(cone).unwrap();
        let on_plane = AmbientPoint::new(vec![1.0, 0.0, 0.0, 0.0], 2.0);
        assert_eq!(z_at(&on_plane, &p).unwrap_err(), Error::OnAxisPlane);
        let outside = AmbientPoint::new(vec![1.0, 1.0, 0.0, 0.0], 0.0);
        assert_eq!(z_at(&outside, &p).unwrap_err(), Error::OutsideCone);
        let origin = AmbientPoint::new(vec![0.0; 4], 0.0);
        assert_eq!(z_at(&origin, &p).unwrap_err(), Error::Origin);
    }

    #[test]
    fn non_positive_gamma_rejected() {
        let cone = ConeParams::new(4, 0.3).unwrap();
        assert!(CalibrationParams::new(cone, 0.0).is_err());
        assert!(CalibrationParams::new(cone, -1.0).is_err());
    }
}
