use serde::{Deserialize, Serialize};

use crate::calibration::{feasibility, omega_h_assembled, omega_h_at, psi_h_at, z_at, CalibrationParams};
use crate::cone::{surface_normal, AmbientPoint, BasePoint};
use crate::exterior::exterior_derivative_numeric;
use crate::parallel::{map_indexed, Execution};
use crate::{Error, Result};

use super::report::{fmt_point, loglog_slope, CheckRecord};
use super::sampling::{SamplePlan, SampleRegion};

fn require_region(plan: &SamplePlan, want: SampleRegion) -> Result<()> {
    if plan.region != want {
        return Err(Error::InvalidParams(format!(
            "plan samples {:?}, check needs {:?}",
            plan.region, want
        )));
    }
    Ok(())
}

fn base_record(name: &str, plan: &SamplePlan, params: &CalibrationParams, stat: f64) -> CheckRecord {
    CheckRecord::new(name, params.n(), params.cone.lambda(), stat)
        .gamma(params.gamma)
        .seed(plan.seed)
}

/// Maximum of `f` over the plan's points together with the maximiser.
fn max_over<F>(pts: &[AmbientPoint], exec: Execution, f: F) -> Result<(f64, usize)>
where
    F: Fn(&AmbientPoint) -> Result<f64> + Sync + Send,
{
    let vals = map_indexed(pts.len(), exec, |i| f(&pts[i]));
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        // NaN must not hide.
        if v > best.0 || v.is_nan() {
            best = (v, i);
            if v.is_nan() {
                break;
            }
        }
    }
    Ok(best)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Sampled `sup |Z|`. Has pass semantics only where the feasibility condition
/// holds; elsewhere the record is informational.
pub fn check_norm_bound(
    plan: &SamplePlan,
    params: &CalibrationParams,
    tol: f64,
    exec: Execution,
) -> Result<CheckRecord> {
    let pts = plan.points()?;
    let (m, at) = max_over(&pts, exec, |p| Ok(norm(&z_at(p, params)?)))?;
    let feas = feasibility(&params.cone, params.gamma);
    let rec = base_record("norm_bound", plan, params, m)
        .detail(format!("max at {} t={:.6e}", fmt_point(&pts[at].x), pts[at].t));
    let rec = rec.at_most(1.0 + tol);
    Ok(if feas.feasible {
        rec
    } else {
        rec.informational()
    })
}

/// `max |Z - e₁|` over samples on `{x₁ = 0}`.
pub fn check_plane(
    plan: &SamplePlan,
    params: &CalibrationParams,
    tol: f64,
    exec: Execution,
) -> Result<CheckRecord> {
    require_region(plan, SampleRegion::AxisHyperplane)?;
    let pts = plan.points()?;
    let (m, at) = max_over(&pts, exec, |p| {
        let mut z = z_at(p, params)?;
        z[0] -= 1.0;
        Ok(norm(&z))
    })?;
    Ok(base_record("plane_normal", plan, params, m)
        .detail(format!("max at {}", fmt_point(&pts[at].x)))
        .at_most(tol))
}

/// `max |⟨Z, ν⟩|` over samples on `S'_λ`.
pub fn check_tangency(
    plan: &SamplePlan,
    params: &CalibrationParams,
    tol: f64,
    exec: Execution,
) -> Result<CheckRecord> {
    require_region(plan, SampleRegion::Surface)?;
    let pts = plan.points()?;
    let (m, at) = max_over(&pts, exec, |p| {
        let z = z_at(p, params)?;
        let nu = surface_normal(p, &params.cone)?;
        Ok(z.iter().zip(&nu).map(|(a, b)| a * b).sum::<f64>().abs())
    })?;
    Ok(base_record("surface_tangency", plan, params, m)
        .detail(format!("max at {}", fmt_point(&pts[at].x)))
        .at_most(tol))
}

/// Central-difference Euclidean divergence in `R^{n+1}` with absolute step
/// `step`. Every stencil point must be in the field's domain.
pub fn fd_divergence<F>(field: F, p: &AmbientPoint, step: f64) -> Result<f64>
where
    F: Fn(&AmbientPoint) -> Result<Vec<f64>>,
{
    let n = p.x.len();
    let mut s = 0.0;
    for i in 0..=n {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[i] += step;
        b[i] -= step;
        let fa = field(&AmbientPoint::from_slice(&a))?[i];
        let fb = field(&AmbientPoint::from_slice(&b))?[i];
        s += (fa - fb) / (2.0 * step);
    }
    Ok(s)
}

/// Steps are relative to `|x|`: `Z` is invariant under dilations, so the
/// truncation error of a step `s|x|` does not depend on scale.
fn relative_stencil_ok(p: &AmbientPoint, lambda: f64, rel: f64) -> Result<f64> {
    let rho = norm(&p.x);
    let r = norm(&p.x[1..]);
    let step = rel * rho;
    let vertical = p.t - lambda * rho;
    let clearance = r.min(vertical / (1.0 + lambda));
    if !(2.0 * step < clearance) {
        return Err(Error::StepTooLarge { step, clearance });
    }
    Ok(step)
}

/// Per-step `max |FD div Z|` over interior samples and the fitted order.
/// The statistic is the maximum at the smallest step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceStudy {
    pub steps: Vec<f64>,
    pub max_abs: Vec<f64>,
    pub order: f64,
}

pub fn divergence_study(
    plan: &SamplePlan,
    params: &CalibrationParams,
    rel_steps: &[f64],
    exec: Execution,
) -> Result<DivergenceStudy> {
    require_region(plan, SampleRegion::Interior)?;
    if rel_steps.is_empty() {
        return Err(Error::InvalidParams("no steps".into()));
    }
    let pts = plan.points()?;
    let lam = params.cone.lambda();
    let mut max_abs = Vec::with_capacity(rel_steps.len());
    for &s in rel_steps {
        let (m, _) = max_over(&pts, exec, |p| {
            let h = relative_stencil_ok(p, lam, s)?;
            Ok(fd_divergence(|q| z_at(q, params), p, h)?.abs())
        })?;
        max_abs.push(m);
    }
    let order = loglog_slope(rel_steps, &max_abs);
    Ok(DivergenceStudy {
        steps: rel_steps.to_vec(),
        max_abs,
        order,
    })
}

pub fn check_divergence(
    plan: &SamplePlan,
    params: &CalibrationParams,
    rel_steps: &[f64],
    tol: f64,
    min_order: f64,
    exec: Execution,
) -> Result<CheckRecord> {
    let st = divergence_study(plan, params, rel_steps, exec)?;
    let (i, _) = st
        .steps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let stat = st.max_abs[i];
    let pass = stat <= tol && (st.steps.len() < 2 || st.order >= min_order);
    Ok(base_record("divergence_fd", plan, params, stat)
        .order(st.order)
        .detail(format!(
            "relative steps {:?} -> max |div| {:?}; order >= {min_order} required",
            st.steps, st.max_abs
        ))
        .at_most(tol)
        .verdict(pass))
}

/// FD divergence of the constant field `e₁` over the same stencils: must be
/// zero to rounding.
pub fn check_divergence_control(
    plan: &SamplePlan,
    params: &CalibrationParams,
    rel_step: f64,
    tol: f64,
    exec: Execution,
) -> Result<CheckRecord> {
    let pts = plan.points()?;
    let n = params.n();
    let lam = params.cone.lambda();
    let e1 = |_: &AmbientPoint| -> Result<Vec<f64>> {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        Ok(v)
    };
    let (m, _) = max_over(&pts, exec, |p| {
        let h = relative_stencil_ok(p, lam, rel_step)?;
        Ok(fd_divergence(e1, p, h)?.abs())
    })?;
    Ok(base_record("divergence_control", plan, params, m).at_most(tol))
}

/// Closed form of `ω_h` against the assembled `dh ∧ ψ₀ + h ω₀` and against a
/// central-difference `d(h ψ₀)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaPathStudy {
    pub max_closed_vs_assembled: f64,
    pub steps: Vec<f64>,
    pub max_closed_vs_numeric: Vec<f64>,
    pub order: f64,
}

pub fn omega_path_study(
    plan: &SamplePlan,
    params: &CalibrationParams,
    rel_steps: &[f64],
    exec: Execution,
) -> Result<OmegaPathStudy> {
    let pts = plan.points()?;
    let bases: Vec<BasePoint> = pts
        .iter()
        .map(|p| BasePoint::new(p.x.clone()))
        .collect::<Result<_>>()?;
    let diffs = map_indexed(bases.len(), exec, |i| -> Result<f64> {
        let x = &bases[i];
        omega_h_at(x, params)?.max_abs_diff(&omega_h_assembled(x, params)?)
    });
    let mut m0: f64 = 0.0;
    for d in diffs {
        m0 = m0.max(d?);
    }
    let mut per_step = Vec::with_capacity(rel_steps.len());
    for &s in rel_steps {
        let errs = map_indexed(bases.len(), exec, |i| -> Result<f64> {
            let x = &bases[i];
            let num = exterior_derivative_numeric(|y| psi_h_at(y, params), x, s * x.rho())?;
            omega_h_at(x, params)?.max_abs_diff(&num)
        });
        let mut m: f64 = 0.0;
        for e in errs {
            m = m.max(e?);
        }
        per_step.push(m);
    }
    Ok(OmegaPathStudy {
        max_closed_vs_assembled: m0,
        steps: rel_steps.to_vec(),
        order: loglog_slope(rel_steps, &per_step),
        max_closed_vs_numeric: per_step,
    })
}

pub fn check_omega_paths(
    plan: &SamplePlan,
    params: &CalibrationParams,
    rel_steps: &[f64],
    tol_algebraic: f64,
    tol_numeric: f64,
    min_order: f64,
    exec: Execution,
) -> Result<Vec<CheckRecord>> {
    let st = omega_path_study(plan, params, rel_steps, exec)?;
    let a = base_record("omega_closed_vs_assembled", plan, params, st.max_closed_vs_assembled)
        .at_most(tol_algebraic);
    let last = st
        .max_closed_vs_numeric
        .iter()
        .zip(&st.steps)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(e, _)| *e)
        .unwrap_or(f64::NAN);
    let pass = last <= tol_numeric && (st.steps.len() < 2 || st.order >= min_order);
    let b = base_record("omega_closed_vs_numeric", plan, params, last)
        .order(st.order)
        .detail(format!(
            "relative steps {:?} -> max diff {:?}",
            st.steps, st.max_closed_vs_numeric
        ))
        .at_most(tol_numeric)
        .verdict(pass);
    Ok(vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeParams;

    fn params(n: usize) -> CalibrationParams {
        CalibrationParams::optimal(ConeParams::at_threshold(n).unwrap()).unwrap()
    }

    #[test]
    fn norm_bound_small_run() {
        let p = params(4);
        let plan = SamplePlan::new(p.cone, SampleRegion::Interior, 300, 1);
        let r = check_norm_bound(&plan, &p, 1e-9, Execution::Sequential).unwrap();
        assert_eq!(r.pass, Some(true), "{r:?}");
    }

    #[test]
    fn norm_bound_informational_when_infeasible() {
        let c = ConeParams::at_threshold(4).unwrap().scaled(1.1).unwrap();
        let p = CalibrationParams::optimal(c).unwrap();
        let plan = SamplePlan::new(c, SampleRegion::Interior, 100, 1);
        let r = check_norm_bound(&plan, &p, 1e-9, Execution::Sequential).unwrap();
        assert_eq!(r.pass, None);
    }

    #[test]
    fn plane_check_needs_plane_plan() {
        let p = params(5);
        let plan = SamplePlan::new(p.cone, SampleRegion::Interior, 10, 1);
        assert!(check_plane(&plan, &p, 1e-10, Execution::Sequential).is_err());
    }

    #[test]
    fn divergence_control_is_exact() {
        let p = params(4);
        let plan = SamplePlan::new(p.cone, SampleRegion::Interior, 50, 2).axis_clearance(5e-3);
        let r = check_divergence_control(&plan, &p, 1e-4, 1e-14, Execution::Sequential).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn stencil_leaving_domain_is_an_error() {
        let near_axis = AmbientPoint::new(vec![1.0, 1e-3, 0.0, 0.0], 2.0);
        let e = relative_stencil_ok(&near_axis, 0.3, 1e-3).unwrap_err();
        assert!(matches!(e, Error::StepTooLarge { .. }));
        let near_surface = AmbientPoint::new(vec![0.0, 1.0, 0.0, 0.0], 0.3 + 1e-4);
        assert!(relative_stencil_ok(&near_surface, 0.3, 1e-4).is_err());
        assert!(relative_stencil_ok(&near_axis, 0.3, 1e-4).is_ok());
    }
}
