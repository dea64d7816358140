//! Configured min-cut experiments producing report records.

use serde::{Deserialize, Serialize};

use crate::parallel::Execution;
use crate::verifier::{CheckRecord, LambdaSpec};
use crate::Result;

use super::{
    build_lattice_with, compare_to_plane, plane_area, solve_mincut, solver_agreement,
    vertex_skip_probe, BoundaryData, LatticeMode, LatticeSpec, Stencil,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MincutCase {
    pub n: usize,
    pub lambda: LambdaSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MincutStudy {
    pub enabled: bool,
    pub cases: Vec<MincutCase>,
    pub radius: f64,
    pub spacing: f64,
    /// Width of the boundary shell; `max(0.1R, 2h)` when absent.
    pub shell: Option<f64>,
    pub mode: LatticeMode,
    pub stencil: Stencil,
    pub boundary: BoundaryData,
    /// Declared metrication tolerance for the minimality verdict.
    pub tolerance: f64,
    /// Required relative saving below the plane for the instability verdict.
    pub instability_margin: f64,
    /// Cut facets must stay within this many cells of `{x₁ = 0}`.
    pub offset_cells: f64,
    pub probe_spacings: Vec<f64>,
    /// Lower bound on the clearance, in units of `R`, across the probe.
    pub clearance_floor: f64,
    /// Re-solve with the second solver and compare values.
    pub validate: bool,
    pub agreement_tol: f64,
}

impl Default for MincutStudy {
    fn default() -> Self {
        Self {
            enabled: false,
            cases: vec![
                MincutCase {
                    n: 4,
                    lambda: LambdaSpec::Value(0.3),
                },
                MincutCase {
                    n: 2,
                    lambda: LambdaSpec::Value(1.0),
                },
            ],
            radius: 1.0,
            spacing: 0.02,
            shell: None,
            mode: LatticeMode::Axisymmetric,
            stencil: Stencil::Crofton26,
            boundary: BoundaryData::HalfSpace,
            tolerance: 0.05,
            instability_margin: 0.01,
            offset_cells: 2.0,
            probe_spacings: vec![0.08, 0.04, 0.02],
            clearance_floor: 0.1,
            validate: true,
            agreement_tol: 1e-9,
        }
    }
}

impl MincutStudy {
    pub fn spec(&self, case: &MincutCase) -> Result<LatticeSpec> {
        let cone = case.lambda.resolve(case.n)?;
        let mut s = LatticeSpec::new(cone, self.radius, self.spacing)
            .mode(self.mode)
            .stencil(self.stencil)
            .boundary(self.boundary);
        if let Some(d) = self.shell {
            s = s.shell(d);
        }
        Ok(s)
    }
}

/// Verdicts per case: solver agreement, the plane comparison (minimality for
/// `n ≥ 4`, instability for `n = 2`, data only for `n = 3`) and the
/// vertex-clearance probe.
pub fn mincut_records(cfg: &MincutStudy, exec: Execution) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for case in &cfg.cases {
        let spec = cfg.spec(case)?;
        let (n, lam, h) = (case.n, spec.cone.lambda(), spec.spacing);
        let p = build_lattice_with(&spec, exec)?;
        let result = if cfg.validate {
            let (r, gap) = solver_agreement(&p);
            out.push(
                CheckRecord::new("mincut_solver_agreement", n, lam, gap)
                    .detail(format!("{} nodes, {} arcs", p.len(), p.network.arcs.len()))
                    .at_most(cfg.agreement_tol),
            );
            r
        } else {
            solve_mincut(&p)
        };
        let area = plane_area(&spec.cone, spec.radius);
        out.push(
            CheckRecord::new("plane_capacity_vs_area", n, lam, p.plane_capacity() / area - 1.0)
                .detail(format!("capacity {:.6e}, area {area:.6e}", p.plane_capacity()))
                .informational(),
        );
        if result.disconnected > 0 {
            out.push(
                CheckRecord::new("mincut_disconnected", n, lam, result.disconnected as f64)
                    .detail("cells without a path to any terminal")
                    .informational(),
            );
        }
        let cmp = compare_to_plane(&p, &result, cfg.tolerance);
        match n {
            2 => out.push(cmp.instability_record(cfg.instability_margin)),
            3 => out.push(cmp.exploratory_record()),
            _ => {
                out.push(cmp.minimality_record());
                out.push(
                    CheckRecord::new("mincut_offset", n, lam, cmp.max_offset)
                        .detail(format!("largest |x1| over cut facets, h={h}"))
                        .at_most(cfg.offset_cells * h),
                );
            }
        }
        if !cfg.probe_spacings.is_empty() {
            let probe = vertex_skip_probe(&spec, &cfg.probe_spacings, exec)?;
            for pt in &probe {
                out.push(
                    CheckRecord::new("vertex_clearance", n, lam, pt.vertex_clearance)
                        .detail(format!("h={} nodes={} ratio={:.6}", pt.spacing, pt.nodes, pt.ratio))
                        .informational(),
                );
            }
            if n == 2 {
                let min = probe.iter().map(|p| p.vertex_clearance).fold(f64::INFINITY, f64::min);
                let curve: Vec<String> = probe
                    .iter()
                    .map(|p| format!("{}:{:.4}", p.spacing, p.vertex_clearance))
                    .collect();
                out.push(
                    CheckRecord::new("vertex_clearance_min", n, lam, min)
                        .detail(format!("h:clearance {}", curve.join(" ")))
                        .at_least(cfg.clearance_floor * spec.radius),
                );
            }
        }
    }
    Ok(out)
}
