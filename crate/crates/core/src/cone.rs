//! The circular cone `Ω_λ = {(x, t) ∈ R^{n+1} : t > λ|x|}` and the geometry of
//! its lateral surface.
//!
//! Coordinates follow the usual split `x = (x₁, x')` with `r = |x'|`,
//! `ρ = |x|`, `θ = arctan(x₁ / r)` and `u = x₁ / r`. Indices are zero-based
//! throughout the crate: `x[0]` is `x₁`.
//!
//! The lateral surface is parameterised by `I(x) = (x, λ|x|)`, which is an
//! isometry from `M = R^n \ {0}` with the metric `g_ij = δ_ij + λ² x_i x_j / ρ²`
//! onto `S_λ`.

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative half-width of the band used to decide membership of sampled
/// points on `S_λ`.
pub const SURFACE_BAND: f64 = 1e-12;

/// Dimension `n` and slope `λ` of the cone `Ω_λ ⊂ R^{n+1}`.
///
/// The slope may carry an exact rational value of `λ²`; the feasibility code
/// uses it to certify boundary equalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    n: usize,
    lambda: f64,
    #[serde(skip)]
    lambda_sq_exact: Option<Ratio<i64>>,
}

impl ConeParams {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("n = {n} must be at least 2")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda = {lambda} must be positive and finite"
            )));
        }
        Ok(Self {
            n,
            lambda,
            lambda_sq_exact: None,
        })
    }

    /// Cone whose slope is given by the exact square `λ² = num / den`.
    pub fn with_exact_lambda_sq(n: usize, num: i64, den: i64) -> Result<Self> {
        if den <= 0 || num <= 0 {
            return Err(Error::InvalidParams(format!(
                "lambda^2 = {num}/{den} must be a positive rational"
            )));
        }
        let sq = Ratio::new(num, den);
        let lambda = (*sq.numer() as f64 / *sq.denom() as f64).sqrt();
        let mut c = Self::new(n, lambda)?;
        c.lambda_sq_exact = Some(sq);
        Ok(c)
    }

    /// Cone at the critical slope `λ̄(n) = (n-3) / (2√(n-2))`, carrying the
    /// exact value `λ̄² = (n-3)² / (4(n-2))`.
    pub fn at_threshold(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::EmptyFeasibleRange(n));
        }
        let n = n as i64;
        Self::with_exact_lambda_sq(n as usize, (n - 3) * (n - 3), 4 * (n - 2))
    }

    /// Same dimension, slope scaled by `factor`. Exactness survives only when
    /// `factor²` is representable, which we do not attempt: the result is
    /// floating point unless `factor == 1`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor == 1.0 {
            return Ok(*self);
        }
        Self::new(self.n, self.lambda * factor)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_sq(&self) -> f64 {
        match self.lambda_sq_exact {
            Some(q) => *q.numer() as f64 / *q.denom() as f64,
            None => self.lambda * self.lambda,
        }
    }

    pub fn exact_lambda_sq(&self) -> Option<Ratio<i64>> {
        self.lambda_sq_exact
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// A point of `M = R^n \ {0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePoint {
    x: Vec<f64>,
}

impl BasePoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: x.len(),
            });
        }
        let p = Self { x };
        if p.rho() == 0.0 {
            return Err(Error::Origin);
        }
        Ok(p)
    }

    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `r = |x'|`.
    pub fn r(&self) -> f64 {
        norm(&self.x[1..])
    }

    /// `ρ = |x|`.
    pub fn rho(&self) -> f64 {
        norm(&self.x)
    }

    /// `θ = arctan(x₁ / r)`, defined on `M'` only.
    pub fn theta(&self) -> Result<f64> {
        let r = self.r();
        if r == 0.0 {
            return Err(Error::OnAxisPlane);
        }
        Ok((self.x[0] / r).atan())
    }

    /// `u = x₁ / r = tan θ`, defined on `M'` only.
    pub fn u(&self) -> Result<f64> {
        let r = self.r();
        if r == 0.0 {
            return Err(Error::OnAxisPlane);
        }
        Ok(self.x[0] / r)
    }

    /// Copy with coordinate `i` shifted by `delta`. May land on the origin.
    pub(crate) fn shifted(&self, i: usize, delta: f64) -> Result<Self> {
        let mut x = self.x.clone();
        x[i] += delta;
        Self::new(x)
    }
}

/// A point `(x, t)` of `R^{n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl AmbientPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    /// Coordinates as a single vector `(x₁, …, x_n, t)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.push(self.t);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let (t, x) = v.split_last().expect("ambient point needs n + 1 coordinates");
        Self { x: x.to_vec(), t: *t }
    }
}

/// Mutually exclusive location tags for points of `R^{n+1}`.
///
/// `Interior` and `Surface` are the points of `Ω_λ` and `S_λ` lying on the
/// 2-plane `x' = 0`; the primed variants are those off it. `AxisPlane` marks
/// the remaining points of that 2-plane, which lie outside the closed cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    InteriorPrimed,
    Surface,
    SurfacePrimed,
    AxisPlane,
    Exterior,
    Origin,
}

impl Region {
    /// Membership in `Ω_λ` (primed or not).
    pub fn is_interior(self) -> bool {
        matches!(self, Region::Interior | Region::InteriorPrimed)
    }

    /// Membership in `S_λ` (primed or not).
    pub fn is_surface(self) -> bool {
        matches!(self, Region::Surface | Region::SurfacePrimed)
    }

    /// Membership in `Ω'_λ ∪ S'_λ`, the domain of the calibration.
    pub fn in_field_domain(self) -> bool {
        matches!(self, Region::InteriorPrimed | Region::SurfacePrimed)
    }
}

/// Exact classification: the surface is `t == λ|x|` bit for bit.
pub fn classify(p: &AmbientPoint, c: &ConeParams) -> Region {
    classify_with_band(p, c, 0.0)
}

/// Classification for sampled points: `|t - λ|x|| <= SURFACE_BAND · max(1, |x|)`
/// counts as the surface.
pub fn classify_sampled(p: &AmbientPoint, c: &ConeParams) -> Region {
    classify_with_band(p, c, SURFACE_BAND)
}

pub fn classify_with_band(p: &AmbientPoint, c: &ConeParams, band: f64) -> Region {
    let rho = norm(&p.x);
    let r = norm(&p.x[1..]);
    if rho == 0.0 && p.t == 0.0 {
        return Region::Origin;
    }
    let gap = p.t - c.lambda() * rho;
    let on_surface = rho > 0.0 && gap.abs() <= band * rho.max(1.0);
    let primed = r > 0.0;
    match (on_surface, gap > 0.0, primed) {
        (true, _, true) => Region::SurfacePrimed,
        (true, _, false) => Region::Surface,
        (false, true, true) => Region::InteriorPrimed,
        (false, true, false) => Region::Interior,
        (false, false, false) => Region::AxisPlane,
        (false, false, true) => Region::Exterior,
    }
}

/// The metric tensor, its inverse and its determinant at one point of a
/// coordinate patch.
///
/// `det_g` is the value the caller vouches for (the closed form for the cone
/// metric); `det_g_lu` is always recomputed by LU factorisation of `g`.
#[derive(Clone, Debug)]
pub struct MetricAtPoint {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det_g: f64,
    pub det_g_lu: f64,
}

impl MetricAtPoint {
    /// Generic metric from a symmetric positive definite matrix; inverse and
    /// determinant both from LU.
    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                got: g.ncols(),
            });
        }
        let lu = g.clone().lu();
        let det = lu.determinant();
        let g_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::InvalidParams("singular metric".into()))?;
        Ok(Self {
            g,
            g_inv,
            det_g: det,
            det_g_lu: det,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Adds `eps` to every entry of the inverse metric. Used as a fault
    /// injection for negative controls.
    pub fn perturb_inverse(&mut self, eps: f64) {
        self.g_inv.add_scalar_mut(eps);
    }

    /// `|v|_g` for a vector in the coordinate frame.
    pub fn vector_norm(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.g[(i, j)] * v[i] * v[j];
            }
        }
        s.sqrt()
    }
}

/// The cone metric `g_ij = δ_ij + λ² x_i x_j / ρ²` and its closed-form inverse
/// `g̃_ij = δ_ij - λ²/(1+λ²) x_i x_j / ρ²`.
pub fn metric_at(x: &BasePoint, c: &ConeParams) -> Result<MetricAtPoint> {
    let n = c.n();
    if x.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.dim(),
        });
    }
    let rho2 = x.rho().powi(2);
    if rho2 == 0.0 {
        return Err(Error::Origin);
    }
    let l2 = c.lambda_sq();
    let xs = x.coords();
    let g = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d + l2 * xs[i] * xs[j] / rho2
    });
    let k = l2 / (1.0 + l2);
    let g_inv = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - k * xs[i] * xs[j] / rho2
    });
    let det_g_lu = g.clone().lu().determinant();
    Ok(MetricAtPoint {
        g,
        g_inv,
        det_g: 1.0 + l2,
        det_g_lu,
    })
}

/// `I(x) = (x, λ|x|)` and the frame `∂_i = e_i + λ (x_i/|x|) e_t` spanning
/// `T_{I(x)} S_λ`.
pub fn isometry_frame(x: &BasePoint, c: &ConeParams) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = c.n();
    if x.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.dim(),
        });
    }
    let rho = x.rho();
    let lam = c.lambda();
    let mut point = x.coords().to_vec();
    point.push(lam * rho);
    let frame = (0..n)
        .map(|i| {
            let mut v = vec![0.0; n + 1];
            v[i] = 1.0;
            v[n] = lam * x.coords()[i] / rho;
            v
        })
        .collect();
    Ok((point, frame))
}

/// Pushes frame coefficients forward: `Σ X_i ∂_i` as a vector of `R^{n+1}`.
pub fn push_forward(x: &BasePoint, c: &ConeParams, coeffs: &[f64]) -> Vec<f64> {
    let n = c.n();
    let rho = x.rho();
    let lam = c.lambda();
    let mut v = coeffs.to_vec();
    let vertical: f64 = coeffs
        .iter()
        .zip(x.coords())
        .map(|(a, xi)| a * xi)
        .sum::<f64>();
    v.push(lam * vertical / rho);
    debug_assert_eq!(v.len(), n + 1);
    v
}

/// Inward unit normal of `S_λ` at a surface point: `(-λ x/|x|, 1) / √(1+λ²)`.
pub fn surface_normal(p: &AmbientPoint, c: &ConeParams) -> Result<Vec<f64>> {
    if p.x.len() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            got: p.x.len(),
        });
    }
    if !classify_sampled(p, c).is_surface() {
        return Err(Error::NotOnSurface);
    }
    let rho = norm(&p.x);
    let lam = c.lambda();
    let s = (1.0 + c.lambda_sq()).sqrt();
    let mut nu: Vec<f64> = p.x.iter().map(|xi| -lam * xi / rho / s).collect();
    nu.push(1.0 / s);
    Ok(nu)
}

/// `|v₁ ∧ … ∧ v_{n+1}|` for `n+1` vectors in `R^{n+1}`.
pub fn top_wedge_norm(vectors: &[Vec<f64>]) -> f64 {
    let m = vectors.len();
    DMatrix::from_fn(m, m, |i, j| vectors[i][j]).determinant().abs()
}

/// Area of the unit `m`-sphere `S^m ⊂ R^{m+1}`: `2π^{(m+1)/2} / Γ((m+1)/2)`.
pub fn sphere_area(m: usize) -> f64 {
    use std::f64::consts::PI;
    // Γ(k/2) by the half-integer recursion.
    let k = m + 1;
    let mut gamma = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut a = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while a + 1e-9 < k as f64 / 2.0 {
        gamma *= a;
        a += 1.0;
    }
    2.0 * PI.powf(k as f64 / 2.0) / gamma
}
