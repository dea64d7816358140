//! Discrete free-boundary perimeter problems: the cheapest lattice competitor
//! agreeing with `{x₁ > 0}` near the outer sphere, compared with the plane.

mod flow;
mod lattice;
mod study;

pub use flow::{brute_force_min_cut, dinic, push_relabel, FlowSolution, Network};
pub use lattice::{
    build_lattice, build_lattice_with, plane_area, BoundaryData, CutProblem, LatticeMode,
    LatticeSpec, Stencil, Terminal,
};
pub use study::{mincut_records, MincutCase, MincutStudy};

use serde::{Deserialize, Serialize};

use crate::parallel::{map_indexed, Execution};
use crate::verifier::CheckRecord;
use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    PushRelabel,
    Dinic,
}

#[derive(Clone, Debug)]
pub struct CutResult {
    /// Capacity of the returned cut.
    pub value: f64,
    /// Max-flow value reported by the solver.
    pub flow: f64,
    /// Source-side indicator per node.
    pub labeling: Vec<bool>,
    /// Indices of the cut arcs in the problem's network.
    pub cut_arcs: Vec<usize>,
    /// Minimum distance from a cut facet (arc midpoint) to the origin.
    pub vertex_clearance: f64,
    /// Largest `|x₁|` over cut facets.
    pub max_offset: f64,
    /// Nodes with no path to any terminal.
    pub disconnected: usize,
}

/// Minimum cut by push-relabel.
pub fn solve_mincut(p: &CutProblem) -> CutResult {
    solve_mincut_with(p, Solver::PushRelabel)
}

pub fn solve_mincut_with(p: &CutProblem, solver: Solver) -> CutResult {
    let n = p.len();
    let has_source = p.terminals.contains(&Terminal::Source);
    let has_sink = p.terminals.contains(&Terminal::Sink);
    let (flow, labeling) = if !has_sink || !has_source {
        // One side is empty: labelling everything alike cuts nothing.
        (0.0, vec![has_source; n])
    } else {
        let big = 1.0 + 2.0 * p.network.total_capacity();
        let mut net = p.network.clone();
        net.nodes = n + 2;
        let (s, t) = (n, n + 1);
        for (v, term) in p.terminals.iter().enumerate() {
            match term {
                Terminal::Source => net.add(s, v, big),
                Terminal::Sink => net.add(v, t, big),
                Terminal::Free => {}
            }
        }
        let sol = match solver {
            Solver::PushRelabel => push_relabel(&net, s, t),
            Solver::Dinic => dinic(&net, s, t),
        };
        let mut side = sol.source_side;
        side.truncate(n);
        (sol.flow, side)
    };
    finish(p, flow, labeling)
}

fn finish(p: &CutProblem, flow: f64, labeling: Vec<bool>) -> CutResult {
    let mut cut_arcs = Vec::new();
    let mut value = 0.0;
    let mut clearance = f64::INFINITY;
    let mut max_offset: f64 = 0.0;
    for (a, &(u, v, c)) in p.network.arcs.iter().enumerate() {
        if labeling[u as usize] != labeling[v as usize] {
            value += c;
            cut_arcs.push(a);
            let m = p.arc_midpoint(a);
            clearance = clearance.min(m.iter().map(|x| x * x).sum::<f64>().sqrt());
            max_offset = max_offset.max(m[0].abs());
        }
    }
    CutResult {
        value,
        flow,
        labeling,
        cut_arcs,
        vertex_clearance: clearance,
        max_offset,
        disconnected: disconnected_nodes(p),
    }
}

fn disconnected_nodes(p: &CutProblem) -> usize {
    let n = p.len();
    let mut adj = vec![Vec::new(); n];
    for &(u, v, c) in &p.network.arcs {
        if c > 0.0 {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
    }
    let mut seen: Vec<bool> = p.terminals.iter().map(|t| *t != Terminal::Free).collect();
    let mut stack: Vec<u32> = (0..n as u32).filter(|&v| seen[v as usize]).collect();
    while let Some(v) = stack.pop() {
        for &w in &adj[v as usize] {
            if !seen[w as usize] {
                seen[w as usize] = true;
                stack.push(w);
            }
        }
    }
    seen.iter().filter(|s| !**s).count()
}

/// Cut value against the flat plane's discrete capacity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneComparison {
    pub n: usize,
    pub lambda: f64,
    pub spacing: f64,
    pub cut_value: f64,
    pub plane_capacity: f64,
    pub ratio: f64,
    /// Declared metrication tolerance.
    pub tolerance: f64,
    /// `cut ≥ plane · (1 − tolerance)`.
    pub consistent: bool,
    pub vertex_clearance: f64,
    pub max_offset: f64,
}

pub fn compare_to_plane(p: &CutProblem, r: &CutResult, tolerance: f64) -> PlaneComparison {
    let plane = p.plane_capacity();
    let ratio = if plane > 0.0 { r.value / plane } else { f64::NAN };
    PlaneComparison {
        n: p.spec.cone.n(),
        lambda: p.spec.cone.lambda(),
        spacing: p.spec.spacing,
        cut_value: r.value,
        plane_capacity: plane,
        ratio,
        tolerance,
        consistent: r.value >= plane * (1.0 - tolerance),
        vertex_clearance: r.vertex_clearance,
        max_offset: r.max_offset,
    }
}

impl PlaneComparison {
    fn describe(&self) -> String {
        format!(
            "h={} cut={:.6e} plane={:.6e} clearance={:.4} max|x1|={:.4}",
            self.spacing, self.cut_value, self.plane_capacity, self.vertex_clearance, self.max_offset
        )
    }

    /// Minimality verdict: ratio at least `1 − tolerance`.
    pub fn minimality_record(&self) -> CheckRecord {
        CheckRecord::new("mincut_vs_plane", self.n, self.lambda, self.ratio)
            .detail(self.describe())
            .at_least(1.0 - self.tolerance)
    }

    /// Instability verdict: ratio strictly below `1 − margin`.
    pub fn instability_record(&self, margin: f64) -> CheckRecord {
        CheckRecord::new("mincut_below_plane", self.n, self.lambda, self.ratio)
            .detail(self.describe())
            .verdict(self.ratio < 1.0 - margin)
    }

    /// Exploratory data without a verdict.
    pub fn exploratory_record(&self) -> CheckRecord {
        CheckRecord::new("mincut_ratio", self.n, self.lambda, self.ratio)
            .detail(self.describe())
            .informational()
    }
}

/// Relative gap between the two solvers' values on the same problem.
pub fn solver_agreement(p: &CutProblem) -> (CutResult, f64) {
    let a = solve_mincut_with(p, Solver::PushRelabel);
    let b = solve_mincut_with(p, Solver::Dinic);
    let scale = a.value.abs().max(b.value.abs()).max(f64::MIN_POSITIVE);
    let gap = [
        (a.value - b.value).abs(),
        (a.flow - a.value).abs(),
        (b.flow - b.value).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
        / scale;
    (a, gap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub spacing: f64,
    pub nodes: usize,
    pub ratio: f64,
    pub vertex_clearance: f64,
}

/// Clearance of the minimum cut from the vertex for each spacing, solving the
/// instances concurrently. The shell width is shared across spacings so the
/// domain stays fixed, except that it is widened to `2h` where it would
/// otherwise be thinner than one cell.
pub fn vertex_skip_probe(
    spec: &LatticeSpec,
    spacings: &[f64],
    exec: Execution,
) -> Result<Vec<ProbePoint>> {
    map_indexed(spacings.len(), exec, |i| {
        let h = spacings[i];
        let s = LatticeSpec {
            spacing: h,
            shell: if spec.shell > h { spec.shell } else { 2.0 * h },
            ..*spec
        };
        let p = build_lattice_with(&s, Execution::Sequential)?;
        let r = solve_mincut(&p);
        Ok(ProbePoint {
            spacing: spacings[i],
            nodes: p.len(),
            ratio: r.value / p.plane_capacity(),
            vertex_clearance: r.vertex_clearance,
        })
    })
    .into_iter()
    .collect()
}
