use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::calibration::{
    certify_threshold, feasibility, gamma_bar, lambda_bar, threshold_bisect, CalibrationParams,
};
use crate::cone::ConeParams;
use crate::lab::{mincut_records, MincutStudy};
use crate::parallel::Execution;
use crate::{Error, Result};

use super::checks::{
    divergence_study, check_divergence, check_divergence_control, check_norm_bound, check_omega_paths, check_plane,
    check_tangency,
};
use super::flux::{constant_e1, flux_integral, flux_of, tube_flux_scaling, FluxRegion};
use super::identities::{hodge_identities, metric_identities, Fault};
use super::report::{loglog_slope, CheckRecord, VerificationReport};
use super::sampling::{SamplePlan, SampleRegion};

/// A slope given either literally or relative to the critical slope of the
/// dimension it is paired with: `"0.3"`, `"bar"`, `"bar*1.05"`, `"bar/2"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    Bar(f64),
}

impl FromStr for LambdaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::Config(format!("bad slope {s:?}")))
        };
        if let Some(rest) = s.strip_prefix("bar") {
            let rest = rest.trim();
            if rest.is_empty() {
                return Ok(LambdaSpec::Bar(1.0));
            }
            if let Some(f) = rest.strip_prefix('*') {
                return Ok(LambdaSpec::Bar(num(f)?));
            }
            if let Some(d) = rest.strip_prefix('/') {
                return Ok(LambdaSpec::Bar(1.0 / num(d)?));
            }
            return Err(Error::Config(format!("bad slope {s:?}")));
        }
        Ok(LambdaSpec::Value(num(s)?))
    }
}

impl fmt::Display for LambdaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaSpec::Value(v) => write!(f, "{v}"),
            LambdaSpec::Bar(k) if *k == 1.0 => write!(f, "bar"),
            LambdaSpec::Bar(k) => write!(f, "bar*{k}"),
        }
    }
}

impl Serialize for LambdaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LambdaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) if v > 0.0 && v.is_finite() => Ok(LambdaSpec::Value(v)),
            Repr::Num(v) => Err(serde::de::Error::custom(format!("bad slope {v}"))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Smallest `p/q` with `q ≤ 1000` equal to `v` in floating point.
fn small_rational(v: f64) -> Option<(i64, i64)> {
    (1..=1000i64).find_map(|q| {
        let p = (v * q as f64).round();
        (p > 0.0 && p / q as f64 == v).then_some((p as i64, q))
    })
}

impl LambdaSpec {
    /// The cone for dimension `n`. Multiples of `λ̄` with a small rational
    /// factor keep `λ²` exact.
    pub fn resolve(&self, n: usize) -> Result<ConeParams> {
        match *self {
            LambdaSpec::Value(v) => ConeParams::new(n, v),
            LambdaSpec::Bar(k) => {
                if n < 4 {
                    return Err(Error::EmptyFeasibleRange(n));
                }
                if k == 1.0 {
                    return ConeParams::at_threshold(n);
                }
                let m = n as i64;
                if let Some((p, q)) = small_rational(k) {
                    let num = (p * (m - 3)).checked_mul(p * (m - 3));
                    let den = (q * q).checked_mul(4 * (m - 2));
                    if let (Some(num), Some(den)) = (num, den) {
                        return ConeParams::with_exact_lambda_sq(n, num, den);
                    }
                }
                ConeParams::new(n, k * lambda_bar(n)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    pub identities: usize,
    pub hodge: usize,
    pub norm: usize,
    pub plane: usize,
    pub surface: usize,
    pub divergence: usize,
    pub omega: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            identities: 10_000,
            hodge: 100,
            norm: 100_000,
            plane: 10_000,
            surface: 10_000,
            divergence: 10_000,
            omega: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub rho_min: f64,
    pub rho_max: f64,
    /// Axis clearance `r ≥ r_min_frac · ρ` for pointwise checks.
    pub r_min_frac: f64,
    /// Clearance for difference stencils with pass/fail magnitude: the
    /// truncation error of a relative step grows like `1/r` toward the axis.
    pub stencil_r_min_frac: f64,
    /// Clearance for the near-axis difference study, judged on order only.
    pub near_axis_r_min_frac: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            rho_min: 0.1,
            rho_max: 10.0,
            r_min_frac: 1e-3,
            stencil_r_min_frac: 0.05,
            near_axis_r_min_frac: 5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Steps {
    /// Relative to `|x|`.
    pub divergence: Vec<f64>,
    /// Relative to `|x|`.
    pub omega: Vec<f64>,
    /// Absolute.
    pub hodge: f64,
    pub bisection: f64,
}

impl Default for Steps {
    fn default() -> Self {
        Self {
            divergence: vec![1e-3, 1e-4],
            omega: vec![1e-3, 1e-4],
            hodge: 1e-4,
            bisection: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity: f64,
    pub hodge_algebraic: f64,
    pub hodge_derivative: f64,
    pub threshold: f64,
    pub norm: f64,
    pub plane: f64,
    pub tangency: f64,
    pub divergence: f64,
    pub divergence_control: f64,
    pub min_order: f64,
    pub omega_algebraic: f64,
    pub omega_numeric: f64,
    /// One per entry of `flux.box_res`.
    pub box_flux: Vec<f64>,
    pub flux_min_order: f64,
    pub cone_face: f64,
    pub constant_field_flux: f64,
    pub tube_slope_slack: f64,
    pub area_slope_slack: f64,
    pub tube_ratio_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-12,
            hodge_algebraic: 1e-12,
            hodge_derivative: 1e-6,
            threshold: 1e-10,
            norm: 1e-9,
            plane: 1e-10,
            tangency: 1e-10,
            divergence: 1e-6,
            divergence_control: 1e-14,
            min_order: 1.9,
            omega_algebraic: 1e-12,
            omega_numeric: 1e-6,
            box_flux: vec![1e-4, 2.5e-5],
            flux_min_order: 1.8,
            cone_face: 1e-10,
            constant_field_flux: 1e-12,
            tube_slope_slack: 0.1,
            area_slope_slack: 0.05,
            tube_ratio_slack: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxStudy {
    pub enabled: bool,
    pub box_n: Vec<usize>,
    pub lambda: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub box_res: Vec<usize>,
    pub cap_res: usize,
    pub slab_res: usize,
    pub tube_n: Vec<usize>,
    pub tube_eps: Vec<f64>,
    pub ratio_eps: Vec<f64>,
    pub tube_res: usize,
}

impl Default for FluxStudy {
    fn default() -> Self {
        Self {
            enabled: false,
            box_n: vec![4],
            lambda: 0.3,
            box_lo: 0.2,
            box_hi: 0.6,
            box_res: vec![48, 96],
            cap_res: 8,
            slab_res: 16,
            tube_n: vec![4, 5],
            tube_eps: vec![0.2, 0.1, 0.05],
            ratio_eps: vec![0.3, 0.15],
            tube_res: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n: Vec<usize>,
    pub lambda: Vec<LambdaSpec>,
    /// Profile exponent; `γ̄` of each cone when absent.
    pub gamma: Option<f64>,
    pub identities: bool,
    pub threshold: bool,
    pub calibration: bool,
    pub execution: Execution,
    pub fault: Option<Fault>,
    pub samples: SampleCounts,
    pub sampling: Sampling,
    pub steps: Steps,
    pub tolerances: Tolerances,
    pub flux: FluxStudy,
    pub mincut: MincutStudy,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            n: vec![4, 5, 6, 7],
            lambda: vec![LambdaSpec::Bar(0.5), LambdaSpec::Bar(1.0)],
            gamma: None,
            identities: true,
            threshold: true,
            calibration: true,
            execution: Execution::default(),
            fault: None,
            samples: SampleCounts::default(),
            sampling: Sampling::default(),
            steps: Steps::default(),
            tolerances: Tolerances::default(),
            flux: FluxStudy::default(),
            mincut: MincutStudy::default(),
        }
    }
}

impl SuiteConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Closed form, bisection and exact certificate for the critical slope.
pub fn threshold_records(n: usize, cfg: &SuiteConfig) -> Vec<CheckRecord> {
    let tol = cfg.tolerances.threshold;
    if n < 3 {
        return vec![CheckRecord::new("threshold", n, f64::NAN, f64::NAN)
            .detail(format!("critical slope undefined for n = {n}"))];
    }
    let bar = lambda_bar(n).expect("n >= 3");
    match threshold_bisect(n, cfg.steps.bisection) {
        Err(Error::EmptyFeasibleRange(_)) => {
            vec![CheckRecord::new("threshold_empty_range", n, bar, bar)
                .detail("empty feasible range")
                .verdict(certify_threshold(n).is_err())]
        }
        Err(e) => vec![CheckRecord::new("threshold_bisection", n, bar, f64::NAN)
            .detail(e.to_string())
            .verdict(false)],
        Ok(l) => {
            let cert = certify_threshold(n).expect("n >= 4");
            vec![
                CheckRecord::new("threshold_bisection", n, bar, (l - bar).abs())
                    .detail(format!("closed form {bar:.12}, bisection {l:.12}"))
                    .at_most(tol),
                CheckRecord::new("threshold_certificate", n, bar, if cert.holds() { 0.0 } else { 1.0 })
                    .detail(cert.to_string())
                    .verdict(cert.holds()),
            ]
        }
    }
}

fn plan(cone: ConeParams, region: SampleRegion, count: usize, seed: u64, cfg: &SuiteConfig) -> SamplePlan {
    SamplePlan::new(cone, region, count, seed)
        .radii(cfg.sampling.rho_min, cfg.sampling.rho_max)
        .axis_clearance(cfg.sampling.r_min_frac)
}

/// Feasibility, norm, plane, tangency, divergence and dual-path records for
/// one cone.
pub fn calibration_records(cone: ConeParams, cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let (n, lam) = (cone.n(), cone.lambda());
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => match gamma_bar(&cone) {
            Ok(g) => g,
            Err(e) => {
                return Ok(vec![CheckRecord::new("calibration", n, lam, f64::NAN)
                    .detail(format!("skipped: {e}"))])
            }
        },
    };
    let params = CalibrationParams::new(cone, gamma)?;
    let t = &cfg.tolerances;
    let s = &cfg.samples;
    let exec = cfg.execution;
    let seed = cfg.seed;
    let feas = feasibility(&cone, gamma);
    let mut out = vec![CheckRecord::new("feasibility", n, lam, feas.lhs)
        .gamma(gamma)
        .detail(format!(
            "{}{}",
            if feas.feasible { "feasible" } else { "infeasible" },
            feas.lhs_exact
                .as_ref()
                .map(|e| format!(", exact lhs {e}"))
                .unwrap_or_default()
        ))];
    out.push(check_norm_bound(
        &plan(cone, SampleRegion::Interior, s.norm, seed, cfg),
        &params,
        t.norm,
        exec,
    )?);
    out.push(check_plane(
        &plan(cone, SampleRegion::AxisHyperplane, s.plane, seed + 1, cfg),
        &params,
        t.plane,
        exec,
    )?);
    out.push(check_tangency(
        &plan(cone, SampleRegion::Surface, s.surface, seed + 2, cfg),
        &params,
        t.tangency,
        exec,
    )?);
    let stencil_plan = plan(cone, SampleRegion::Interior, s.divergence, seed + 3, cfg)
        .axis_clearance(cfg.sampling.stencil_r_min_frac);
    out.push(check_divergence(
        &stencil_plan,
        &params,
        &cfg.steps.divergence,
        t.divergence,
        t.min_order,
        exec,
    )?);
    let near_plan = plan(cone, SampleRegion::Interior, s.divergence, seed + 5, cfg)
        .axis_clearance(cfg.sampling.near_axis_r_min_frac);
    let near = divergence_study(&near_plan, &params, &cfg.steps.divergence, exec)?;
    let smallest_max = near
        .steps
        .iter()
        .zip(&near.max_abs)
        .min_by(|a, b| a.0.total_cmp(b.0))
        .map_or(f64::NAN, |(_, m)| *m);
    out.push(
        CheckRecord::new("divergence_fd_near_axis", n, lam, smallest_max)
            .gamma(gamma)
            .seed(seed + 5)
            .order(near.order)
            .detail(format!(
                "r >= {} rho; relative steps {:?} -> max |div| {:?}; judged on order",
                cfg.sampling.near_axis_r_min_frac, near.steps, near.max_abs
            ))
            .verdict(near.steps.len() >= 2 && near.order >= t.min_order),
    );
    if let Some(&smallest) = cfg.steps.divergence.iter().min_by(|a, b| a.total_cmp(b)) {
        out.push(check_divergence_control(
            &stencil_plan,
            &params,
            smallest,
            t.divergence_control,
            exec,
        )?);
    }
    let omega_plan = plan(cone, SampleRegion::Interior, s.omega, seed + 4, cfg)
        .axis_clearance(cfg.sampling.stencil_r_min_frac);
    out.extend(check_omega_paths(
        &omega_plan,
        &params,
        &cfg.steps.omega,
        t.omega_algebraic,
        t.omega_numeric,
        t.min_order,
        exec,
    )?);
    Ok(out)
}

pub fn identity_records(cone: ConeParams, cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let t = &cfg.tolerances;
    let mut out = metric_identities(
        &cone,
        cfg.samples.identities,
        cfg.seed,
        t.identity,
        cfg.fault,
        cfg.execution,
    )?;
    out.extend(hodge_identities(
        &cone,
        cfg.samples.hodge,
        cfg.seed,
        t.hodge_algebraic,
        cfg.steps.hodge,
        t.hodge_derivative,
        cfg.fault,
    )?);
    Ok(out)
}

/// Box flux convergence, cone-face tangency, constant-field control and tube
/// scaling.
pub fn flux_records(cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let f = &cfg.flux;
    let t = &cfg.tolerances;
    let exec = cfg.execution;
    let mut out = Vec::new();
    for &n in &f.box_n {
        let cone = ConeParams::new(n, f.lambda)?;
        let params = CalibrationParams::new(cone, cfg.gamma.map_or_else(|| gamma_bar(&cone), Ok)?)?;
        let lo = vec![f.box_lo; n];
        let hi = vec![f.box_hi; n];
        let far = f.box_hi * (n as f64).sqrt();
        let (t0, t1) = (f.lambda * far + 0.1, f.lambda * far + 1.1);
        let mut totals = Vec::new();
        for (k, &res) in f.box_res.iter().enumerate() {
            let region = FluxRegion::Box {
                lo: lo.clone(),
                hi: hi.clone(),
                t0,
                t1,
                res,
                cap_res: f.cap_res,
            };
            let r = flux_integral(&region, &params, exec)?;
            totals.push(r.total.abs());
            let rec = CheckRecord::new(format!("box_flux_res{res}"), n, f.lambda, r.total.abs())
                .gamma(params.gamma)
                .detail(format!("box [{}, {}]^{n} x [{t0:.3}, {t1:.3}]", f.box_lo, f.box_hi));
            out.push(match t.box_flux.get(k) {
                Some(&tol) => rec.at_most(tol),
                None => rec,
            });
        }
        if f.box_res.len() >= 2 {
            let h: Vec<f64> = f.box_res.iter().map(|r| 1.0 / *r as f64).collect();
            let order = loglog_slope(&h, &totals);
            out.push(
                CheckRecord::new("box_flux_order", n, f.lambda, order)
                    .gamma(params.gamma)
                    .order(order)
                    .at_least(t.flux_min_order),
            );
        }
        let slab = FluxRegion::ConeSlab {
            lo: lo.clone(),
            hi: hi.clone(),
            top: t1,
            res: f.slab_res,
            cap_res: f.slab_res,
        };
        let r = flux_integral(&slab, &params, exec)?;
        let cone_face = r.face("cone").expect("slab has a cone face");
        out.push(
            CheckRecord::new("cone_face_flux", n, f.lambda, cone_face.abs_flux)
                .gamma(params.gamma)
                .detail(format!("slab total flux {:.3e}", r.total))
                .at_most(t.cone_face),
        );
        let mut rlo = lo.clone();
        let mut rhi = hi.clone();
        rlo[0] = -f.box_hi;
        rhi[0] = -f.box_lo;
        let reflected = FluxRegion::Box {
            lo: rlo,
            hi: rhi,
            t0,
            t1,
            res: f.slab_res,
            cap_res: f.cap_res,
        };
        let r = flux_of(&reflected, &cone, constant_e1(n), exec)?;
        out.push(
            CheckRecord::new("constant_field_flux", n, f.lambda, r.total.abs())
                .detail("e1 through the box reflected across x1 = 0")
                .at_most(t.constant_field_flux),
        );
    }
    for &n in &f.tube_n {
        let cone = ConeParams::new(n, f.lambda)?;
        let params = CalibrationParams::new(cone, cfg.gamma.map_or_else(|| gamma_bar(&cone), Ok)?)?;
        let k = (n - 2) as f64;
        let sc = tube_flux_scaling(&f.tube_eps, &params, f.tube_res, exec)?;
        out.push(
            CheckRecord::new("tube_flux_slope", n, f.lambda, sc.slope)
                .gamma(params.gamma)
                .order(sc.slope)
                .detail(format!("eps {:?} -> |flux| {:?}", sc.eps, sc.fluxes))
                .at_least(k - t.tube_slope_slack),
        );
        let dev = (sc.area_slope - k).abs();
        out.push(
            CheckRecord::new("tube_area_slope", n, f.lambda, dev)
                .order(sc.area_slope)
                .detail(format!("eps {:?} -> area {:?}", sc.eps, sc.areas))
                .at_most(t.area_slope_slack),
        );
        if f.ratio_eps.len() == 2 {
            let rs = tube_flux_scaling(&f.ratio_eps, &params, f.tube_res, exec)?;
            let ratio = rs.fluxes[1] / rs.fluxes[0];
            out.push(
                CheckRecord::new("tube_flux_ratio", n, f.lambda, ratio)
                    .gamma(params.gamma)
                    .detail(format!("eps {:?} -> |flux| {:?}", rs.eps, rs.fluxes))
                    .at_most((rs.eps[1] / rs.eps[0]).powf(k) * (1.0 + t.tube_ratio_slack)),
            );
        }
    }
    Ok(out)
}

/// Runs every enabled part of the suite over the `(n, λ)` grid.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let echo = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut rep = VerificationReport::new(echo);
    for &n in &cfg.n {
        if cfg.threshold {
            rep.extend(threshold_records(n, cfg));
        }
        for spec in &cfg.lambda {
            let cone = match spec.resolve(n) {
                Ok(c) => c,
                Err(e) => {
                    rep.push(
                        CheckRecord::new("cone", n, f64::NAN, f64::NAN)
                            .detail(format!("lambda {spec}: {e}")),
                    );
                    continue;
                }
            };
            if cfg.identities {
                rep.extend(identity_records(cone, cfg)?);
            }
            if cfg.calibration {
                rep.extend(calibration_records(cone, cfg)?);
            }
        }
    }
    if cfg.flux.enabled {
        rep.extend(flux_records(cfg)?);
    }
    if cfg.mincut.enabled {
        rep.extend(mincut_records(&cfg.mincut, cfg.execution)?);
    }
    Ok(rep)
}
