//! Midpoint-rule flux of vertically invariant fields through closed regions
//! of the cone and through the thin tube around `{x' = 0}`.
//!
//! Every field handled here is invariant under `t ↦ t + c` (the calibration is
//! a vertical extension, the controls are constant), so extents in `t` are
//! integrated exactly and only the horizontal factors are discretised.
//! Normals are outward.

use serde::{Deserialize, Serialize};

use crate::calibration::{z_at, CalibrationParams};
use crate::cone::{sphere_area, AmbientPoint, ConeParams};
use crate::parallel::{sum2_indexed, Execution};
use crate::{Error, Result};

use super::report::loglog_slope;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum FluxRegion {
    /// `[lo, hi] × [t0, t1]`, strictly inside `Ω'_λ`. `res` nodes per axis on
    /// the lateral faces, `cap_res` on the two horizontal faces.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        t0: f64,
        t1: f64,
        res: usize,
        cap_res: usize,
    },
    /// `{(x, t) : x ∈ [lo, hi], λ|x| < t < top}`; its bottom face lies on `S_λ`.
    ConeSlab {
        lo: Vec<f64>,
        hi: Vec<f64>,
        top: f64,
        res: usize,
        cap_res: usize,
    },
    /// The cylinder `{|x'| = ε}` inside `B₁ ∩ Ω_λ`, `res` nodes in `x₁`.
    Tube { eps: f64, res: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceFlux {
    pub face: String,
    pub flux: f64,
    /// Integral of `|⟨F, ν⟩|`.
    pub abs_flux: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxResult {
    pub total: f64,
    pub faces: Vec<FaceFlux>,
}

impl FluxResult {
    fn from_faces(faces: Vec<FaceFlux>) -> Self {
        Self {
            total: faces.iter().map(|f| f.flux).sum(),
            faces,
        }
    }

    pub fn face(&self, name: &str) -> Option<&FaceFlux> {
        self.faces.iter().find(|f| f.face == name)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidRegion(msg.into())
}

fn check_box(lo: &[f64], hi: &[f64], n: usize) -> Result<f64> {
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lo.len().max(hi.len()),
        });
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(bad("box needs lo < hi on every axis"));
    }
    // The box misses {x' = 0} iff some x' coordinate range excludes zero.
    if !(1..n).any(|i| lo[i] > 0.0 || hi[i] < 0.0) {
        return Err(bad("box touches the plane x' = 0"));
    }
    // Largest |x| over the box is attained at a corner.
    let far: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| a.abs().max(b.abs())).collect();
    Ok(norm(&far))
}

fn check_res(res: usize) -> Result<()> {
    if res == 0 {
        return Err(bad("resolution must be positive"));
    }
    Ok(())
}

/// Midpoint nodes of `[lo, hi]` restricted to all axes except `skip`.
fn grid_point(idx: usize, lo: &[f64], hi: &[f64], res: usize, skip: Option<usize>, out: &mut [f64]) {
    let mut k = idx;
    for j in 0..lo.len() {
        if Some(j) == skip {
            continue;
        }
        let i = k % res;
        k /= res;
        out[j] = lo[j] + (i as f64 + 0.5) * (hi[j] - lo[j]) / res as f64;
    }
}

fn cell_measure(lo: &[f64], hi: &[f64], res: usize, skip: Option<usize>) -> f64 {
    (0..lo.len())
        .filter(|j| Some(*j) != skip)
        .map(|j| (hi[j] - lo[j]) / res as f64)
        .product()
}

/// Integrates `(signed, abs)` values of `f` over `count` nodes.
fn integrate<F>(count: usize, exec: Execution, f: F) -> Result<(f64, f64)>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let err = std::sync::Mutex::new(None);
    let eval = |i: usize| match f(i) {
        Ok(v) => v,
        Err(e) => {
            err.lock().expect("poisoned").get_or_insert(e);
            0.0
        }
    };
    let (signed, abs) = sum2_indexed(count, exec, |i| {
        let v = eval(i);
        (v, v.abs())
    });
    match err.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok((signed, abs)),
    }
}

fn face(name: String, (flux, abs_flux): (f64, f64)) -> FaceFlux {
    FaceFlux {
        face: name,
        flux,
        abs_flux,
    }
}

/// Flux of an arbitrary vertically invariant field through `region`.
pub fn flux_of<F>(region: &FluxRegion, cone: &ConeParams, field: F, exec: Execution) -> Result<FluxResult>
where
    F: Fn(&AmbientPoint) -> Result<Vec<f64>> + Sync + Send,
{
    let n = cone.n();
    let lam = cone.lambda();
    match region {
        FluxRegion::Box {
            lo,
            hi,
            t0,
            t1,
            res,
            cap_res,
        } => {
            let far = check_box(lo, hi, n)?;
            check_res(*res)?;
            check_res(*cap_res)?;
            if !(*t0 > lam * far && t1 > t0) {
                return Err(bad(format!("need {} < t0 < t1, got [{t0}, {t1}]", lam * far)));
            }
            let height = t1 - t0;
            let tm = 0.5 * (t0 + t1);
            let mut faces = Vec::with_capacity(2 * n + 2);
            for i in 0..n {
                let dm = cell_measure(lo, hi, *res, Some(i)) * height;
                let count = res.pow(n as u32 - 1);
                for (side, v, sign) in [("lo", lo[i], -1.0), ("hi", hi[i], 1.0)] {
                    let val = integrate(count, exec, |k| {
                        let mut x = vec![0.0; n];
                        grid_point(k, lo, hi, *res, Some(i), &mut x);
                        x[i] = v;
                        Ok(sign * field(&AmbientPoint::new(x, tm))?[i] * dm)
                    })?;
                    faces.push(face(format!("x{}_{side}", i + 1), val));
                }
            }
            let dm = cell_measure(lo, hi, *cap_res, None);
            let count = cap_res.pow(n as u32);
            for (side, t, sign) in [("bottom", *t0, -1.0), ("top", *t1, 1.0)] {
                let val = integrate(count, exec, |k| {
                    let mut x = vec![0.0; n];
                    grid_point(k, lo, hi, *cap_res, None, &mut x);
                    Ok(sign * field(&AmbientPoint::new(x, t))?[n] * dm)
                })?;
                faces.push(face(format!("t_{side}"), val));
            }
            Ok(FluxResult::from_faces(faces))
        }
        FluxRegion::ConeSlab {
            lo,
            hi,
            top,
            res,
            cap_res,
        } => {
            let far = check_box(lo, hi, n)?;
            check_res(*res)?;
            check_res(*cap_res)?;
            if !(*top > lam * far) {
                return Err(bad(format!("top {top} must exceed {}", lam * far)));
            }
            let mut faces = Vec::with_capacity(2 * n + 2);
            for i in 0..n {
                let dm = cell_measure(lo, hi, *res, Some(i));
                let count = res.pow(n as u32 - 1);
                for (side, v, sign) in [("lo", lo[i], -1.0), ("hi", hi[i], 1.0)] {
                    let val = integrate(count, exec, |k| {
                        let mut x = vec![0.0; n];
                        grid_point(k, lo, hi, *res, Some(i), &mut x);
                        x[i] = v;
                        let floor = lam * norm(&x);
                        let tm = 0.5 * (floor + top);
                        Ok(sign * field(&AmbientPoint::new(x, tm))?[i] * (top - floor) * dm)
                    })?;
                    faces.push(face(format!("x{}_{side}", i + 1), val));
                }
            }
            let dm = cell_measure(lo, hi, *cap_res, None);
            let count = cap_res.pow(n as u32);
            let val = integrate(count, exec, |k| {
                let mut x = vec![0.0; n];
                grid_point(k, lo, hi, *cap_res, None, &mut x);
                Ok(field(&AmbientPoint::new(x, *top))?[n] * dm)
            })?;
            faces.push(face("t_top".into(), val));
            // Graph t = λ|x|: outward normal (λx/ρ, -1)/√(1+λ²), area element
            // √(1+λ²) dx, so the integrand is λ⟨F_x, x/ρ⟩ - F_t.
            let val = integrate(count, exec, |k| {
                let mut x = vec![0.0; n];
                grid_point(k, lo, hi, *cap_res, None, &mut x);
                let rho = norm(&x);
                let t = lam * rho;
                let f = field(&AmbientPoint::new(x.clone(), t))?;
                let radial: f64 = f[..n].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / rho;
                Ok((lam * radial - f[n]) * dm)
            })?;
            faces.push(face("cone".into(), val));
            Ok(FluxResult::from_faces(faces))
        }
        FluxRegion::Tube { eps, res } => {
            check_res(*res)?;
            if !(*eps > 0.0 && *eps <= 0.3) {
                return Err(bad(format!("tube radius {eps} outside (0, 0.3]")));
            }
            let a2 = 1.0 / (1.0 + cone.lambda_sq()) - eps * eps;
            if a2 <= 0.0 {
                return Err(bad("tube misses B₁ ∩ Ω_λ"));
            }
            let a = a2.sqrt();
            let dx = 2.0 * a / *res as f64;
            // ±e_j, j = 2..n: a symmetric quadrature of S^{n-2} that is exact
            // for the O(n-1)-invariant integrands arising here.
            let dirs = 2 * (n - 1);
            let w_dir = sphere_area(n - 2) * eps.powi(n as i32 - 2) / dirs as f64;
            let val = integrate(res * dirs, exec, |k| {
                let (ix, d) = (k / dirs, k % dirs);
                let x1 = -a + (ix as f64 + 0.5) * dx;
                let s = (x1 * x1 + eps * eps).sqrt();
                let lower = lam * s;
                let upper = (1.0 - s * s).sqrt();
                let len = upper - lower;
                let j = 1 + d / 2;
                let sgn = if d % 2 == 0 { 1.0 } else { -1.0 };
                let mut x = vec![0.0; n];
                x[0] = x1;
                x[j] = sgn * eps;
                let f = field(&AmbientPoint::new(x, 0.5 * (lower + upper)))?;
                // Outward from Ω_λ \ A^ε points toward the axis.
                Ok(-sgn * f[j] * len * dx * w_dir)
            })?;
            Ok(FluxResult::from_faces(vec![face("tube".into(), val)]))
        }
    }
}

/// Flux of the calibration field `Z`.
pub fn flux_integral(region: &FluxRegion, params: &CalibrationParams, exec: Execution) -> Result<FluxResult> {
    flux_of(region, &params.cone, |p| z_at(p, params), exec)
}

/// `e₁` in `R^{n+1}`.
pub fn constant_e1(n: usize) -> impl Fn(&AmbientPoint) -> Result<Vec<f64>> + Sync + Send {
    move |_| {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        Ok(v)
    }
}

/// The unit field `-(0, x'/|x'|, 0)`, equal to the outward normal on every tube.
pub fn tube_normal_field(n: usize) -> impl Fn(&AmbientPoint) -> Result<Vec<f64>> + Sync + Send {
    move |p| {
        let r = norm(&p.x[1..]);
        let mut v = vec![0.0; n + 1];
        for (vj, xj) in v[1..n].iter_mut().zip(&p.x[1..n]) {
            *vj = -xj / r;
        }
        Ok(v)
    }
}

/// Area of `{|x'| = ε} ∩ B₁ ∩ Ω_λ` from the closed-form integrand, by
/// adaptive-free high-resolution midpoint quadrature in `x₁`.
pub fn tube_area(cone: &ConeParams, eps: f64, res: usize) -> f64 {
    let a = (1.0 / (1.0 + cone.lambda_sq()) - eps * eps).max(0.0).sqrt();
    let dx = 2.0 * a / res as f64;
    let n = cone.n();
    let lam = cone.lambda();
    let len: f64 = (0..res)
        .map(|i| {
            let x1 = -a + (i as f64 + 0.5) * dx;
            let s = (x1 * x1 + eps * eps).sqrt();
            (1.0 - s * s).sqrt() - lam * s
        })
        .sum();
    sphere_area(n - 2) * eps.powi(n as i32 - 2) * len * dx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeScaling {
    pub eps: Vec<f64>,
    /// `∫ |⟨Z, ν⟩|` over each tube.
    pub fluxes: Vec<f64>,
    pub slope: f64,
    /// Same quadrature applied to the unit normal field: the tube areas.
    pub areas: Vec<f64>,
    pub area_slope: f64,
}

/// Tube fluxes for decreasing radii and fitted log-log slopes. The flux
/// reported is the integral of `|⟨Z, ν⟩|`, which bounds the flux through any
/// portion of the tube.
pub fn tube_flux_scaling(
    eps_list: &[f64],
    params: &CalibrationParams,
    res: usize,
    exec: Execution,
) -> Result<TubeScaling> {
    if eps_list.len() < 2 {
        return Err(bad("need at least two radii"));
    }
    if eps_list.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(bad("radii must be strictly decreasing"));
    }
    let n = params.n();
    let mut fluxes = Vec::with_capacity(eps_list.len());
    let mut areas = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let region = FluxRegion::Tube { eps, res };
        fluxes.push(flux_integral(&region, params, exec)?.faces[0].abs_flux);
        areas.push(flux_of(&region, &params.cone, tube_normal_field(n), exec)?.total);
    }
    Ok(TubeScaling {
        eps: eps_list.to_vec(),
        slope: loglog_slope(eps_list, &fluxes),
        area_slope: loglog_slope(eps_list, &areas),
        fluxes,
        areas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_box(n: usize, res: usize) -> FluxRegion {
        FluxRegion::Box {
            lo: vec![0.2; n],
            hi: vec![0.6; n],
            t0: 0.5,
            t1: 1.5,
            res,
            cap_res: 4,
        }
    }

    #[test]
    fn constant_field_has_zero_flux() {
        let c = ConeParams::new(3, 0.3).unwrap();
        let r = flux_of(&unit_box(3, 8), &c, constant_e1(3), Execution::Sequential).unwrap();
        assert_abs_diff_eq!(r.total, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.face("x1_hi").unwrap().flux, 0.16 * 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reflected_box_constant_field() {
        let c = ConeParams::new(3, 0.3).unwrap();
        let region = FluxRegion::Box {
            lo: vec![-0.6, 0.2, 0.2],
            hi: vec![-0.2, 0.6, 0.6],
            t0: 0.5,
            t1: 1.5,
            res: 6,
            cap_res: 3,
        };
        let r = flux_of(&region, &c, constant_e1(3), Execution::Sequential).unwrap();
        assert_abs_diff_eq!(r.total, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_regions() {
        let c = ConeParams::new(3, 0.3).unwrap();
        let f = constant_e1(3);
        let touching = FluxRegion::Box {
            lo: vec![0.2, -0.1, -0.1],
            hi: vec![0.6, 0.1, 0.1],
            t0: 0.5,
            t1: 1.0,
            res: 2,
            cap_res: 2,
        };
        assert!(matches!(
            flux_of(&touching, &c, &f, Execution::Sequential),
            Err(Error::InvalidRegion(_))
        ));
        let low = FluxRegion::Box {
            lo: vec![0.2; 3],
            hi: vec![0.6; 3],
            t0: 0.1,
            t1: 1.0,
            res: 2,
            cap_res: 2,
        };
        assert!(flux_of(&low, &c, &f, Execution::Sequential).is_err());
        assert!(flux_of(&FluxRegion::Tube { eps: 0.5, res: 4 }, &c, &f, Execution::Sequential).is_err());
    }

    #[test]
    fn tube_normal_flux_is_area() {
        let c = ConeParams::new(4, 0.3).unwrap();
        let r = flux_of(&FluxRegion::Tube { eps: 0.1, res: 400 }, &c, tube_normal_field(4), Execution::Sequential)
            .unwrap();
        assert_abs_diff_eq!(r.total, tube_area(&c, 0.1, 400), epsilon = 1e-14);
        // n = 2: the "tube" is two strips, total length ∫ L dx₁ with no ε factor.
        let c2 = ConeParams::new(2, 1.0).unwrap();
        let a0 = tube_area(&c2, 1e-9, 20000);
        // ε → 0: two strips of length ∫ (√(1-x₁²) - |x₁|) dx₁ = π/4 each.
        assert_abs_diff_eq!(a0, std::f64::consts::FRAC_PI_2, epsilon = 1e-6);
    }

    #[test]
    fn box_flux_of_calibration_is_small() {
        let cone = ConeParams::new(4, 0.3).unwrap();
        let p = CalibrationParams::optimal(cone).unwrap();
        let r = flux_integral(&unit_box(4, 16), &p, Execution::Parallel).unwrap();
        let scale: f64 = r.faces.iter().map(|f| f.abs_flux).sum();
        assert!(r.total.abs() < 1e-2 * scale, "{r:?}");
    }
}
