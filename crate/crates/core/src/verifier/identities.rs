//! Metric and Hodge identities evaluated through the generic engine: the
//! metric is rebuilt from its matrix (LU inverse and determinant) and all
//! inner products go through Gram determinants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{drho_form, dtheta_form, psi0_at};
use crate::cone::{metric_at, BasePoint, ConeParams, MetricAtPoint};
use crate::exterior::{
    exterior_derivative_numeric, flat, form_inner, form_norm, hodge_star, interior_product,
    KForm, MultiIndex, Orientation,
};
use crate::parallel::{map_indexed, Execution};
use crate::Result;

use super::report::{fmt_point, CheckRecord};
use super::sampling::{SamplePlan, SampleRegion};

/// Deliberate corruption used by negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "size")]
pub enum Fault {
    /// Adds the given amount to every entry of the inverse metric.
    MetricInverse(f64),
}

fn generic_metric(x: &BasePoint, c: &ConeParams, fault: Option<Fault>) -> Result<MetricAtPoint> {
    let mut m = MetricAtPoint::from_matrix(metric_at(x, c)?.g)?;
    if let Some(Fault::MetricInverse(eps)) = fault {
        m.perturb_inverse(eps);
    }
    Ok(m)
}

struct Worst {
    value: f64,
    at: Vec<f64>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: Vec::new(),
        }
    }

    fn update(&mut self, v: f64, x: &[f64]) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.at = x.to_vec();
        }
    }
}

/// `|det g - (1+λ²)|`, `||dρ| - 1/√(1+λ²)|`, `||dθ| - 1/ρ|`, `|⟨dρ,dθ⟩|`,
/// `||ψ₀| - r√(1+λ²)/(n-1)|` — worst case over `count` points, one record each.
pub fn metric_identities(
    c: &ConeParams,
    count: usize,
    seed: u64,
    tol: f64,
    fault: Option<Fault>,
    exec: Execution,
) -> Result<Vec<CheckRecord>> {
    let pts = SamplePlan::new(*c, SampleRegion::Interior, count, seed).points()?;
    let l2 = c.lambda_sq();
    let s = (1.0 + l2).sqrt();
    let n = c.n();
    let per_point = map_indexed(pts.len(), exec, |i| -> Result<[f64; 5]> {
        let x = BasePoint::new(pts[i].x.clone())?;
        let m = generic_metric(&x, c, fault)?;
        let drho = drho_form(&x);
        let dth = dtheta_form(&x)?;
        Ok([
            (m.det_g_lu - (1.0 + l2)).abs(),
            (form_norm(&drho, &m)? - 1.0 / s).abs(),
            (form_norm(&dth, &m)? - 1.0 / x.rho()).abs(),
            form_inner(&drho, &dth, &m)?.abs(),
            (form_norm(&psi0_at(&x, c)?, &m)? - x.r() * s / (n - 1) as f64).abs(),
        ])
    });
    let names = ["metric_det", "drho_norm", "dtheta_norm", "drho_dtheta_inner", "psi0_norm"];
    let mut worst: Vec<Worst> = names.iter().map(|_| Worst::new()).collect();
    for (i, v) in per_point.into_iter().enumerate() {
        let v = v?;
        for k in 0..5 {
            worst[k].update(v[k], &pts[i].x);
        }
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, w)| {
            CheckRecord::new(*name, n, c.lambda(), w.value)
                .seed(seed)
                .detail(format!("worst at {}", fmt_point(&w.at)))
                .at_most(tol)
        })
        .collect())
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, k: usize) -> KForm {
    let mut f = KForm::zero(n, k);
    for a in MultiIndex::all_of_degree(n, k) {
        f.add_term(a, rng.random_range(-1.0..1.0));
    }
    f
}

/// Smooth test field `X_i = a_i + Σ_j B_ij x_j + c_i sin(x_i)` with
/// `div X = tr B + Σ c_i cos(x_i)` (the cone metric has constant determinant).
#[derive(Clone, Debug)]
struct TestField {
    a: Vec<f64>,
    b: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl TestField {
    fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let mut v = |k| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let a = v(n);
        let c = v(n);
        let b = (0..n).map(|_| v(n)).collect();
        Self { a, b, c }
    }

    fn at(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                self.a[i]
                    + self.b[i].iter().zip(x).map(|(b, xj)| b * xj).sum::<f64>()
                    + self.c[i] * x[i].sin()
            })
            .collect()
    }

    fn divergence(&self, x: &[f64]) -> f64 {
        (0..x.len()).map(|i| self.b[i][i] + self.c[i] * x[i].cos()).sum()
    }
}

/// `⋆⋆ = (-1)^{k(n-k)}`, `⋆ν = 1`, `⋆X♭ = i_X ν` and `⋆d(i_X ν) = div X`
/// on `count` random (field, point) pairs.
pub fn hodge_identities(
    c: &ConeParams,
    count: usize,
    seed: u64,
    tol_algebraic: f64,
    step: f64,
    tol_derivative: f64,
    fault: Option<Fault>,
) -> Result<Vec<CheckRecord>> {
    let n = c.n();
    // Points well away from the axis so that the absolute step fits.
    let pts = SamplePlan::new(*c, SampleRegion::Interior, count, seed)
        .radii(0.5, 5.0)
        .axis_clearance(0.1)
        .points()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut w_ss = Worst::new();
    let mut w_vol = Worst::new();
    let mut w_flat = Worst::new();
    let mut w_div = Worst::new();
    for p in &pts {
        let x = BasePoint::new(p.x.clone())?;
        let m = generic_metric(&x, c, fault)?;
        let o = Orientation::from_metric(&m);
        for k in 0..=n {
            let f = random_form(&mut rng, n, k);
            let ss = hodge_star(&hodge_star(&f, &m, &o), &m, &o);
            let sign = if (k * (n - k)).is_multiple_of(2) { 1.0 } else { -1.0 };
            w_ss.update(ss.max_abs_diff(&f.scale(sign))?, &p.x);
        }
        let vol = hodge_star(&o.volume_form(), &m, &o).scalar_value()?;
        w_vol.update((vol - 1.0).abs(), &p.x);

        let field = TestField::random(&mut rng, n);
        let v = field.at(x.coords());
        let lhs = hodge_star(&flat(&v, &m), &m, &o);
        let rhs = interior_product(&v, &o.volume_form())?;
        w_flat.update(lhs.max_abs_diff(&rhs)?, &p.x);

        let i_x_nu = |y: &BasePoint| -> Result<KForm> {
            let my = generic_metric(y, c, fault)?;
            interior_product(&field.at(y.coords()), &Orientation::from_metric(&my).volume_form())
        };
        let d = exterior_derivative_numeric(i_x_nu, &x, step)?;
        let div_num = hodge_star(&d, &m, &o).scalar_value()?;
        w_div.update((div_num - field.divergence(x.coords())).abs(), &p.x);
    }
    let rec = |name: &str, w: Worst, tol: f64| {
        CheckRecord::new(name, n, c.lambda(), w.value)
            .seed(seed)
            .detail(format!("worst at {}", fmt_point(&w.at)))
            .at_most(tol)
    };
    let div_detail = format!("absolute step {step}; worst at {}", fmt_point(&w_div.at));
    Ok(vec![
        rec("hodge_star_star", w_ss, tol_algebraic),
        rec("hodge_volume", w_vol, tol_algebraic),
        rec("hodge_flat_interior", w_flat, tol_algebraic),
        rec("hodge_divergence", w_div, tol_derivative).detail(div_detail),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_identities_hold() {
        let c = ConeParams::new(5, 2.0).unwrap();
        let recs = metric_identities(&c, 200, 1, 1e-12, None, Execution::Sequential).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.pass == Some(true)), "{recs:#?}");
    }

    #[test]
    fn metric_fault_is_pinpointed() {
        let c = ConeParams::new(4, 0.5).unwrap();
        let f = Some(Fault::MetricInverse(1e-6));
        let recs = metric_identities(&c, 50, 1, 1e-12, f, Execution::Sequential).unwrap();
        let failed: Vec<&str> = recs.iter().filter(|r| r.failed()).map(|r| r.check.as_str()).collect();
        assert!(failed.contains(&"drho_norm"));
        assert!(!failed.contains(&"metric_det"));
    }

    #[test]
    fn hodge_identities_hold() {
        for n in [2, 3, 5] {
            let c = ConeParams::new(n, 0.7).unwrap();
            let recs = hodge_identities(&c, 10, 4, 1e-12, 1e-4, 1e-6, None).unwrap();
            assert!(recs.iter().all(|r| r.pass == Some(true)), "{recs:#?}");
        }
    }
}
