//! Pointwise exterior algebra over a single coordinate patch with a
//! position-dependent metric.
//!
//! Forms are stored sparsely as maps from canonical multi-indices to real
//! coefficients. The metric on `Λ^k` is the Gram determinant
//! `⟨dx_α, dx_β⟩_g = det(g̃_{α_i β_j})`, and the Hodge star is obtained by
//! solving `ω ∧ ⋆ψ = ⟨ω, ψ⟩_g ν` against the basis, so its signs come out of
//! the wedge product rather than a table.
//!
//! Derivatives are central finite differences; there is no symbolic engine.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::cone::{metric_at, BasePoint, ConeParams, MetricAtPoint};
use crate::{Error, Result};

/// Largest supported patch dimension (multi-indices are bit masks).
pub const MAX_DIM: usize = 31;

/// Strictly increasing tuple of zero-based coordinate indices, stored as a
/// bit mask so every value is canonical.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(u32);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    /// From a strictly increasing slice; `None` if it is not.
    pub fn from_sorted(indices: &[usize]) -> Option<Self> {
        let mut mask = 0u32;
        let mut prev: Option<usize> = None;
        for &i in indices {
            if i >= MAX_DIM || prev.is_some_and(|p| p >= i) {
                return None;
            }
            mask |= 1 << i;
            prev = Some(i);
        }
        Some(Self(mask))
    }

    /// Sorts an arbitrary tuple by insertion sort, tracking the permutation
    /// parity. Returns `None` when an index repeats (the wedge vanishes).
    pub fn from_tuple(indices: &[usize]) -> Option<(f64, Self)> {
        let mut v = indices.to_vec();
        let mut sign = 1.0;
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Self::from_sorted(&v).map(|m| (sign, m))
    }

    pub fn single(i: usize) -> Self {
        assert!(i < MAX_DIM);
        Self(1 << i)
    }

    /// `(0, 1, …, n-1)`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        Self(((1u64 << n) - 1) as u32)
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_DIM && self.0 & (1 << i) != 0
    }

    pub fn indices(self) -> Vec<usize> {
        (0..MAX_DIM).filter(|&i| self.contains(i)).collect()
    }

    /// Deletes index `i` (no-op when absent).
    pub fn without(self, i: usize) -> Self {
        Self(self.0 & !(1 << i))
    }

    pub fn complement(self, n: usize) -> Self {
        Self(Self::full(n).0 & !self.0)
    }

    /// Sign of the permutation `(α, αᶜ)` of `0..n`: each index of `α` jumps
    /// over the smaller indices of the complement.
    pub fn shuffle_sign(self, n: usize) -> f64 {
        let jumps: usize = self
            .indices()
            .iter()
            .enumerate()
            .filter(|(_, &i)| i < n)
            .map(|(pos, &i)| i - pos)
            .sum();
        if jumps.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    /// All multi-indices of degree `k` in dimension `n`, in increasing mask
    /// order.
    pub fn all_of_degree(n: usize, k: usize) -> impl Iterator<Item = MultiIndex> {
        (0u64..(1u64 << n))
            .filter(move |m| m.count_ones() as usize == k)
            .map(|m| MultiIndex(m as u32))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_based: Vec<usize> = self.indices().iter().map(|i| i + 1).collect();
        write!(f, "dx{one_based:?}")
    }
}

/// A pointwise alternating `k`-form on an `n`-dimensional patch.
#[derive(Clone, PartialEq, Default)]
pub struct KForm {
    n: usize,
    degree: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl fmt::Debug for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KForm(n={}, k={}) ", self.n, self.degree)?;
        f.debug_map().entries(self.coeffs.iter()).finish()
    }
}

impl KForm {
    pub fn zero(n: usize, degree: usize) -> Self {
        assert!(n <= MAX_DIM && degree <= n);
        Self {
            n,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// The 0-form with value `v`.
    pub fn scalar(n: usize, v: f64) -> Self {
        let mut f = Self::zero(n, 0);
        f.add_term(MultiIndex::EMPTY, v);
        f
    }

    /// `c · dx_α`.
    pub fn basis(n: usize, alpha: MultiIndex, c: f64) -> Self {
        let mut f = Self::zero(n, alpha.degree());
        f.add_term(alpha, c);
        f
    }

    /// `Σ a_i dx_i`.
    pub fn one_form(coeffs: &[f64]) -> Self {
        let mut f = Self::zero(coeffs.len(), 1);
        for (i, &a) in coeffs.iter().enumerate() {
            f.add_term(MultiIndex::single(i), a);
        }
        f
    }

    /// `dx₁ ∧ … ∧ dx_n`.
    pub fn coordinate_volume(n: usize) -> Self {
        Self::basis(n, MultiIndex::full(n), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, alpha: MultiIndex) -> f64 {
        self.coeffs.get(&alpha).copied().unwrap_or(0.0)
    }

    /// Coefficients of a 1-form as a dense vector.
    pub fn one_form_coeffs(&self) -> Result<Vec<f64>> {
        if self.degree != 1 {
            return Err(Error::DegreeMismatch(self.degree, 1));
        }
        Ok((0..self.n)
            .map(|i| self.coeff(MultiIndex::single(i)))
            .collect())
    }

    /// Value of a 0-form.
    pub fn scalar_value(&self) -> Result<f64> {
        if self.degree != 0 {
            return Err(Error::DegreeMismatch(self.degree, 0));
        }
        Ok(self.coeff(MultiIndex::EMPTY))
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|v| *v == 0.0)
    }

    /// Adds `c · dx_α`. Panics if `α` has the wrong degree or dimension.
    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        assert_eq!(alpha.degree(), self.degree, "term degree");
        assert!(
            alpha.mask() < (1u64 << self.n) as u32 || self.n == MAX_DIM,
            "index beyond dimension"
        );
        if c != 0.0 {
            *self.coeffs.entry(alpha).or_insert(0.0) += c;
        }
    }

    fn check_same_space(&self, other: &KForm) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (k, v) in other.terms() {
            out.add_term(k, v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &KForm) -> Result<KForm> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> KForm {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v *= s;
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_α - b_α|` over all multi-indices.
    pub fn max_abs_diff(&self, other: &KForm) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// `self ∧ other`.
    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        wedge(self, other)
    }
}

/// Exterior product. Each pair of terms is resolved to a canonical key by
/// sorting the concatenated index tuple and tracking parity.
pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            got: b.n,
        });
    }
    if a.degree + b.degree > a.n {
        return Err(Error::DegreeOverflow {
            left: a.degree,
            right: b.degree,
            n: a.n,
        });
    }
    let mut out = KForm::zero(a.n, a.degree + b.degree);
    for (ka, va) in a.terms() {
        let ia = ka.indices();
        for (kb, vb) in b.terms() {
            if ka.mask() & kb.mask() != 0 {
                continue;
            }
            let mut tuple = ia.clone();
            tuple.extend(kb.indices());
            if let Some((sign, key)) = MultiIndex::from_tuple(&tuple) {
                out.add_term(key, sign * va * vb);
            }
        }
    }
    Ok(out)
}

fn det(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.determinant()
    }
}

/// Determinant of a `k × k` row-major block by partial pivoting, in place.
fn small_det(a: &mut [f64], k: usize) -> f64 {
    let mut d = 1.0;
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| a[i * k + c].abs().total_cmp(&a[j * k + c].abs()))
            .unwrap_or(c);
        if a[p * k + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..k {
                a.swap(p * k + j, c * k + j);
            }
            d = -d;
        }
        let piv = a[c * k + c];
        d *= piv;
        for i in c + 1..k {
            let f = a[i * k + c] / piv;
            if f != 0.0 {
                for j in c + 1..k {
                    a[i * k + j] -= f * a[c * k + j];
                }
            }
        }
    }
    d
}

/// `⟨dx_α, dx_β⟩_g = det(g̃_{α_i, β_j})`.
pub fn basis_inner(alpha: MultiIndex, beta: MultiIndex, m: &MetricAtPoint) -> f64 {
    const STACK: usize = 12;
    let a = alpha.indices();
    let b = beta.indices();
    debug_assert_eq!(a.len(), b.len());
    let k = a.len();
    if k > STACK {
        return det(DMatrix::from_fn(k, k, |i, j| m.g_inv[(a[i], b[j])]));
    }
    let mut buf = [0.0; STACK * STACK];
    for i in 0..k {
        for j in 0..k {
            buf[i * k + j] = m.g_inv[(a[i], b[j])];
        }
    }
    small_det(&mut buf[..k * k], k)
}

/// Metric inner product of two forms of equal degree.
pub fn form_inner(a: &KForm, b: &KForm, m: &MetricAtPoint) -> Result<f64> {
    a.check_same_space(b)?;
    if a.n != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: a.n,
        });
    }
    let mut s = 0.0;
    for (ka, va) in a.terms() {
        for (kb, vb) in b.terms() {
            s += va * vb * basis_inner(ka, kb, m);
        }
    }
    Ok(s)
}

/// `|a|_g`.
pub fn form_norm(a: &KForm, m: &MetricAtPoint) -> Result<f64> {
    Ok(form_inner(a, a, m)?.max(0.0).sqrt())
}

/// The Riemannian volume form `ν = √det g · dx₁ ∧ … ∧ dx_n` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation {
    sqrt_det: f64,
    n: usize,
}

impl Orientation {
    /// Built from the LU determinant of the metric, independent of any
    /// closed form the metric may also carry.
    pub fn from_metric(m: &MetricAtPoint) -> Self {
        Self {
            sqrt_det: m.det_g_lu.sqrt(),
            n: m.dim(),
        }
    }

    pub fn sqrt_det(&self) -> f64 {
        self.sqrt_det
    }

    pub fn volume_form(&self) -> KForm {
        KForm::basis(self.n, MultiIndex::full(self.n), self.sqrt_det)
    }
}

/// Hodge star from the defining relation `dx_α ∧ ⋆ψ = ⟨dx_α, ψ⟩_g ν`.
///
/// Writing `⋆ψ = Σ_β c_β dx_β`, only `β = α^c` survives the wedge with
/// `dx_α`, so `c_{α^c} · ε(α) = √det g · ⟨dx_α, ψ⟩_g` where `ε(α)` is the
/// coefficient of `dx_α ∧ dx_{α^c}` against `dx₁ ∧ … ∧ dx_n`.
pub fn hodge_star(a: &KForm, m: &MetricAtPoint, o: &Orientation) -> KForm {
    let n = a.n;
    let k = a.degree;
    let mut out = KForm::zero(n, n - k);
    for alpha in MultiIndex::all_of_degree(n, k) {
        let mut ip = 0.0;
        for (beta, vb) in a.terms() {
            ip += vb * basis_inner(alpha, beta, m);
        }
        if ip == 0.0 {
            continue;
        }
        let comp = alpha.complement(n);
        out.add_term(comp, o.sqrt_det() * ip * alpha.shuffle_sign(n));
    }
    out
}

/// `X♭ = Σ g_ij X_i dx_j`.
pub fn flat(v: &[f64], m: &MetricAtPoint) -> KForm {
    let n = m.dim();
    let coeffs: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| m.g[(i, j)] * v[i]).sum())
        .collect();
    KForm::one_form(&coeffs)
}

/// `ω♯ = Σ g̃_ij ω_i ∂_j`.
pub fn sharp(a: &KForm, m: &MetricAtPoint) -> Result<Vec<f64>> {
    let w = a.one_form_coeffs()?;
    let n = m.dim();
    Ok((0..n)
        .map(|j| (0..n).map(|i| m.g_inv[(i, j)] * w[i]).sum())
        .collect())
}

/// Contraction `i_v a`, extended from `i_v(dx_{α₁} ∧ … ∧ dx_{α_k}) =
/// Σ_j (-1)^j v_{α_j} dx_{α without α_j}` (zero-based `j`).
pub fn interior_product(v: &[f64], a: &KForm) -> Result<KForm> {
    if a.degree == 0 {
        return Err(Error::DegreeMismatch(0, 1));
    }
    if v.len() != a.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            got: v.len(),
        });
    }
    let mut out = KForm::zero(a.n, a.degree - 1);
    for (alpha, c) in a.terms() {
        for (pos, i) in alpha.indices().into_iter().enumerate() {
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            out.add_term(alpha.without(i), sign * v[i] * c);
        }
    }
    Ok(out)
}

/// Default difference step `1e-4 · max(1, ρ)`, shrunk so the stencil stays a
/// safe distance away from `r = 0`.
pub fn default_step(x: &BasePoint) -> f64 {
    (1e-4 * x.rho().max(1.0)).min(x.r() / 4.0)
}

fn check_stencil(x: &BasePoint, step: f64) -> Result<()> {
    let clearance = x.r().min(x.rho());
    if !(step > 0.0) || 2.0 * step >= clearance {
        return Err(Error::StepTooLarge { step, clearance });
    }
    Ok(())
}

/// Central-difference exterior derivative of a form field:
/// `dF ≈ Σ_i dx_i ∧ (F(x + s e_i) - F(x - s e_i)) / 2s`.
pub fn exterior_derivative_numeric<F>(field: F, x: &BasePoint, step: f64) -> Result<KForm>
where
    F: Fn(&BasePoint) -> Result<KForm>,
{
    check_stencil(x, step)?;
    let n = x.dim();
    let mut out: Option<KForm> = None;
    for i in 0..n {
        let fp = field(&x.shifted(i, step)?)?;
        let fm = field(&x.shifted(i, -step)?)?;
        let partial = fp.sub(&fm)?.scale(0.5 / step);
        let term = wedge(&KForm::basis(n, MultiIndex::single(i), 1.0), &partial)?;
        out = Some(match out {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    Ok(out.expect("n >= 2"))
}

/// Coordinate divergence `(1/√det g) Σ_i ∂_i(√det g X_i)` of a field given by
/// its coefficients in the coordinate frame, with `det g` from the LU
/// factorisation of the cone metric at each stencil point.
pub fn divergence_coords<F>(field: F, x: &BasePoint, step: f64, c: &ConeParams) -> Result<f64>
where
    F: Fn(&BasePoint) -> Result<Vec<f64>>,
{
    check_stencil(x, step)?;
    let n = x.dim();
    let sqrt_det = |p: &BasePoint| -> Result<f64> { Ok(metric_at(p, c)?.det_g_lu.sqrt()) };
    let mut s = 0.0;
    for i in 0..n {
        let xp = x.shifted(i, step)?;
        let xm = x.shifted(i, -step)?;
        let fp = field(&xp)?[i] * sqrt_det(&xp)?;
        let fm = field(&xm)?[i] * sqrt_det(&xm)?;
        s += (fp - fm) / (2.0 * step);
    }
    Ok(s / sqrt_det(x)?)
}
