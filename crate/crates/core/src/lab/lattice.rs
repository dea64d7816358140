//! Cell lattices over `Ω_λ ∩ B_R` and their cut networks.

use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cone::{sphere_area, ConeParams};
use crate::parallel::{map_indexed, Execution};
use crate::{Error, Result};

use super::flow::Network;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeMode {
    /// Cells in `(x₁, r, t)` with `r = |(x₂, …, x_n)|`; facets weighted by the
    /// area of their `O(n−1)` orbit.
    #[default]
    Axisymmetric,
    /// Unit-weight cells in all `n + 1` ambient coordinates.
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Nearest neighbours only; measures the axis-aligned (ℓ¹) perimeter.
    #[default]
    Nearest,
    /// 26-neighbourhood with Cauchy–Crofton weights (three-dimensional lattices).
    Crofton26,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryData {
    /// Shell cells take the side of the sign of `x₁`.
    #[default]
    HalfSpace,
    /// Every shell cell is on the source side.
    AllSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub cone: ConeParams,
    pub radius: f64,
    pub spacing: f64,
    pub shell: f64,
    pub mode: LatticeMode,
    pub stencil: Stencil,
    pub boundary: BoundaryData,
}

impl LatticeSpec {
    /// Axisymmetric, nearest-neighbour, half-space data, shell `max(0.1R, 2h)`.
    pub fn new(cone: ConeParams, radius: f64, spacing: f64) -> Self {
        Self {
            cone,
            radius,
            spacing,
            shell: (0.1 * radius).max(2.0 * spacing),
            mode: LatticeMode::Axisymmetric,
            stencil: Stencil::Nearest,
            boundary: BoundaryData::HalfSpace,
        }
    }

    pub fn mode(mut self, mode: LatticeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn boundary(mut self, boundary: BoundaryData) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn shell(mut self, shell: f64) -> Self {
        self.shell = shell;
        self
    }

    /// Same problem with every length multiplied by `s`.
    pub fn scaled(self, s: f64) -> Self {
        Self {
            radius: self.radius * s,
            spacing: self.spacing * s,
            shell: self.shell * s,
            ..self
        }
    }

    /// Lattice dimension.
    pub fn dim(&self) -> usize {
        match self.mode {
            LatticeMode::Axisymmetric => 3,
            LatticeMode::Full => self.cone.n() + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d, r) = (self.spacing, self.shell, self.radius);
        if !(h > 0.0 && h < d && d < r && r.is_finite()) {
            return Err(Error::Lattice(format!(
                "need 0 < h < δ < R, got h={h}, δ={d}, R={r}"
            )));
        }
        if self.stencil == Stencil::Crofton26 && self.dim() != 3 {
            return Err(Error::Lattice(format!(
                "the 26-neighbourhood needs a 3-dimensional lattice, got {}",
                self.dim()
            )));
        }
        let cells = (2.0 * r / h).powi(self.dim() as i32 - 1) * (r / h);
        if cells > 5e8 {
            return Err(Error::Lattice(format!("bounding grid of {cells:.3e} cells is too large")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Free,
    Source,
    Sink,
}

/// Lattice cut problem: cells are nodes, adjacent pairs are arcs.
#[derive(Clone, Debug)]
pub struct CutProblem {
    pub spec: LatticeSpec,
    /// Cell centres, `dim` coordinates per node. Axisymmetric: `(x₁, r, t)`.
    pub centers: Vec<f64>,
    pub network: Network,
    pub terminals: Vec<Terminal>,
}

impl CutProblem {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn center(&self, v: usize) -> &[f64] {
        let d = self.dim();
        &self.centers[v * d..(v + 1) * d]
    }

    /// Midpoint of the segment joining the centres of an arc's cells.
    pub fn arc_midpoint(&self, arc: usize) -> Vec<f64> {
        let (u, v, _) = self.network.arcs[arc];
        self.center(u as usize)
            .iter()
            .zip(self.center(v as usize))
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// The half-space labeling `{x₁ > 0}`.
    pub fn plane_labeling(&self) -> Vec<bool> {
        (0..self.len()).map(|v| self.center(v)[0] > 0.0).collect()
    }

    pub fn plane_capacity(&self) -> f64 {
        self.network.cut_value(&self.plane_labeling())
    }

    pub fn count(&self, kind: Terminal) -> usize {
        self.terminals.iter().filter(|&&t| t == kind).count()
    }

    /// Text dump: a header, one `u v capacity` line per arc, then one
    /// `source u` / `sink u` line per terminal cell.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# nodes {} arcs {}", self.len(), self.network.arcs.len());
        for &(u, v, c) in &self.network.arcs {
            let _ = writeln!(s, "{u} {v} {c:e}");
        }
        for (v, t) in self.terminals.iter().enumerate() {
            match t {
                Terminal::Source => {
                    let _ = writeln!(s, "source {v}");
                }
                Terminal::Sink => {
                    let _ = writeln!(s, "sink {v}");
                }
                Terminal::Free => {}
            }
        }
        s
    }

    /// Network and terminals back from [`CutProblem::dump`].
    pub fn parse_dump(text: &str) -> Result<(Network, Vec<Terminal>)> {
        let bad = |l: &str| Error::Lattice(format!("bad dump line: {l:?}"));
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| bad(""))?;
        let nodes: usize = head
            .split_whitespace()
            .nth(2)
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| bad(head))?;
        let mut net = Network::new(nodes);
        let mut term = vec![Terminal::Free; nodes];
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            match f.as_slice() {
                ["source", v] | ["sink", v] => {
                    let v: usize = v.parse().map_err(|_| bad(l))?;
                    *term.get_mut(v).ok_or_else(|| bad(l))? =
                        if f[0] == "source" { Terminal::Source } else { Terminal::Sink };
                }
                [u, v, c] => {
                    let u: usize = u.parse().map_err(|_| bad(l))?;
                    let v: usize = v.parse().map_err(|_| bad(l))?;
                    let c: f64 = c.parse().map_err(|_| bad(l))?;
                    if u >= nodes || v >= nodes {
                        return Err(bad(l));
                    }
                    net.add(u, v, c);
                }
                _ => return Err(bad(l)),
            }
        }
        Ok((net, term))
    }
}

/// Solid angle of the Voronoi cell of each of the 13 direction pairs of the
/// 26-neighbourhood (axis, face diagonal, body diagonal), by counting a dense
/// Fibonacci point set on the sphere.
fn crofton_solid_angles() -> [f64; 3] {
    static CELLS: OnceLock<[f64; 3]> = OnceLock::new();
    *CELLS.get_or_init(|| {
        let dirs = neighbour_offsets(Stencil::Crofton26, 3);
        let unit: Vec<[f64; 3]> = dirs
            .iter()
            .map(|g| {
                let l = ((g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) as f64).sqrt();
                [g[0] as f64 / l, g[1] as f64 / l, g[2] as f64 / l]
            })
            .collect();
        let m = 400_000usize;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut hits = [0usize; 3];
        for i in 0..m {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let s = (1.0 - z * z).sqrt();
            let p = [s * (golden * i as f64).cos(), s * (golden * i as f64).sin(), z];
            let (best, _) = unit
                .iter()
                .enumerate()
                .map(|(k, u)| (k, (u[0] * p[0] + u[1] * p[1] + u[2] * p[2]).abs()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let nz = dirs[best].iter().filter(|&&c| c != 0).count();
            hits[nz - 1] += 1;
        }
        // 3 axis, 6 face-diagonal and 4 body-diagonal pairs; two cells each.
        let per = 4.0 * std::f64::consts::PI / m as f64;
        [
            per * hits[0] as f64 / 6.0,
            per * hits[1] as f64 / 12.0,
            per * hits[2] as f64 / 8.0,
        ]
    })
}

/// One offset per undirected neighbour pair.
fn neighbour_offsets(stencil: Stencil, dim: usize) -> Vec<Vec<i64>> {
    match stencil {
        Stencil::Nearest => (0..dim)
            .map(|a| (0..dim).map(|b| i64::from(a == b)).collect())
            .collect(),
        Stencil::Crofton26 => {
            let mut out = Vec::new();
            for a in -1..=1i64 {
                for b in -1..=1i64 {
                    for c in -1..=1i64 {
                        let g = [a, b, c];
                        // Keep the representative whose first nonzero entry is positive.
                        if let Some(&f) = g.iter().find(|&&x| x != 0) {
                            if f > 0 {
                                out.push(g.to_vec());
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

/// Base weight of an arc along grid offset `g`: facet measure for the
/// nearest stencil, `h² ΔΦ / (π |g|)` for the Crofton stencil.
fn base_weight(spec: &LatticeSpec, g: &[i64]) -> f64 {
    let h = spec.spacing;
    match spec.stencil {
        Stencil::Nearest => h.powi(spec.dim() as i32 - 1),
        Stencil::Crofton26 => {
            let nz = g.iter().filter(|&&c| c != 0).count();
            let phi = crofton_solid_angles()[nz - 1];
            h * h * phi / (std::f64::consts::PI * (nz as f64).sqrt())
        }
    }
}

/// `(ρ, |X|)` of a cell centre; the last coordinate is `t`.
fn geometry(c: &[f64]) -> (f64, f64) {
    let d = c.len();
    let t = c[d - 1];
    let rho2: f64 = c[..d - 1].iter().map(|x| x * x).sum();
    (rho2.sqrt(), (rho2 + t * t).sqrt())
}

pub fn build_lattice(spec: &LatticeSpec) -> Result<CutProblem> {
    build_lattice_with(spec, Execution::default())
}

pub fn build_lattice_with(spec: &LatticeSpec, exec: Execution) -> Result<CutProblem> {
    spec.validate()?;
    let d = spec.dim();
    let h = spec.spacing;
    let big_r = spec.radius;
    let lam = spec.cone.lambda();
    let m = (big_r / h).ceil() as i64;
    // Index ranges per axis: x₁ (and x₂… in full mode) symmetric, r and t nonnegative.
    let lo: Vec<i64> = (0..d)
        .map(|a| {
            let nonneg = a == d - 1 || (spec.mode == LatticeMode::Axisymmetric && a == 1);
            if nonneg {
                0
            } else {
                -m
            }
        })
        .collect();
    let size: Vec<i64> = lo.iter().map(|&l| if l == 0 { m } else { 2 * m }).collect();
    let total: usize = size.iter().product::<i64>() as usize;
    let coords = |lin: usize| -> Vec<f64> {
        let mut rem = lin as i64;
        let mut c = vec![0.0; d];
        for a in (0..d).rev() {
            let i = rem % size[a] + lo[a];
            rem /= size[a];
            c[a] = (i as f64 + 0.5) * h;
        }
        c
    };
    let inner = big_r - spec.shell;
    let classify = |lin: usize| -> Option<Terminal> {
        let c = coords(lin);
        let (rho, norm) = geometry(&c);
        let x1 = c[0];
        if !(c[d - 1] > lam * rho && norm < big_r) {
            return None;
        }
        Some(if norm > inner && x1.abs() >= 0.5 * h {
            match spec.boundary {
                BoundaryData::AllSource => Terminal::Source,
                BoundaryData::HalfSpace if x1 > 0.0 => Terminal::Source,
                BoundaryData::HalfSpace => Terminal::Sink,
            }
        } else {
            Terminal::Free
        })
    };
    let cls = map_indexed(total, exec, classify);
    let mut node_of = vec![u32::MAX; total];
    let mut centers = Vec::new();
    let mut terminals = Vec::new();
    for (lin, c) in cls.iter().enumerate() {
        if let Some(t) = c {
            node_of[lin] = terminals.len() as u32;
            terminals.push(*t);
            centers.extend(coords(lin));
        }
    }
    if terminals.is_empty() {
        return Err(Error::Lattice(format!("no cells inside the cone for h={h}")));
    }
    let offsets = neighbour_offsets(spec.stencil, d);
    let weights: Vec<f64> = offsets.iter().map(|g| base_weight(spec, g)).collect();
    let sigma = match spec.mode {
        LatticeMode::Axisymmetric => sphere_area(spec.cone.n() - 2),
        LatticeMode::Full => 1.0,
    };
    let npow = spec.cone.n() as i32 - 2;
    let mut net = Network::new(terminals.len());
    let mut idx = vec![0i64; d];
    for (lin, &u) in node_of.iter().enumerate() {
        if u == u32::MAX {
            continue;
        }
        let mut rem = lin as i64;
        for a in (0..d).rev() {
            idx[a] = rem % size[a];
            rem /= size[a];
        }
        for (g, &w) in offsets.iter().zip(&weights) {
            let mut lin2 = 0i64;
            let mut ok = true;
            for a in 0..d {
                let j = idx[a] + g[a];
                if j < 0 || j >= size[a] {
                    ok = false;
                    break;
                }
                lin2 = lin2 * size[a] + j;
            }
            if !ok {
                continue;
            }
            let v = node_of[lin2 as usize];
            if v == u32::MAX {
                continue;
            }
            let cap = match spec.mode {
                LatticeMode::Axisymmetric => {
                    let r_mid = (idx[1] as f64 + 0.5 + 0.5 * g[1] as f64) * h;
                    w * sigma * r_mid.powi(npow)
                }
                LatticeMode::Full => w,
            };
            net.add(u as usize, v as usize, cap);
        }
    }
    Ok(CutProblem {
        spec: *spec,
        centers,
        network: net,
        terminals,
    })
}

/// Area of `{x₁ = 0} ∩ Ω_λ ∩ B_R` in `R^{n+1}`:
/// `σ_{n−2} Rⁿ/n · ∫₀^{arctan(1/λ)} sin^{n−2}φ dφ`.
pub fn plane_area(cone: &ConeParams, radius: f64) -> f64 {
    let n = cone.n();
    let phi0 = (1.0 / cone.lambda()).atan();
    let k = 2000;
    let dphi = phi0 / k as f64;
    // Composite Simpson.
    let f = |p: f64| p.sin().powi(n as i32 - 2);
    let mut s = f(0.0) + f(phi0);
    for i in 1..k {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dphi);
    }
    sphere_area(n - 2) * radius.powi(n as i32) / n as f64 * s * dphi / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, lam: f64, h: f64) -> LatticeSpec {
        LatticeSpec::new(ConeParams::new(n, lam).unwrap(), 1.0, h)
    }

    #[test]
    fn crofton_angles_partition_the_sphere() {
        let [a, f, b] = crofton_solid_angles();
        let total = 6.0 * a + 12.0 * f + 8.0 * b;
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!(a > f && f > 0.0 && b > 0.0);
    }

    #[test]
    fn crofton_weights_measure_planes_nearly_isotropically() {
        // Cut cost per unit area of a plane with normal m is Σ w_k |g_k·m| / h.
        let s = spec(2, 1.0, 0.1).stencil(Stencil::Crofton26);
        let offs = neighbour_offsets(Stencil::Crofton26, 3);
        for m in [[1.0f64, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [1.0, 0.3, 0.7]] {
            let l = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
            let cost: f64 = offs
                .iter()
                .map(|g| {
                    let dot = (g[0] as f64 * m[0] + g[1] as f64 * m[1] + g[2] as f64 * m[2]) / l;
                    base_weight(&s, g) * dot.abs() / (0.1 * 0.1)
                })
                .sum();
            assert!((cost - 1.0).abs() < 0.08, "normal {m:?}: {cost}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_lattice(&spec(4, 0.3, 0.2).shell(0.1)).is_err());
        assert!(build_lattice(&spec(4, 0.3, 0.05).stencil(Stencil::Crofton26).mode(LatticeMode::Full)).is_err());
    }

    #[test]
    fn node_count_scales_like_volume() {
        let p = build_lattice(&spec(2, 1.0, 0.05)).unwrap();
        // Reduced domain {r>0, t>ρ} ∩ B₁ has volume (2π/3)(1 − 1/√2)/2 ≈ 0.307.
        let expected = 0.5 * (2.0 * std::f64::consts::PI / 3.0) * (1.0 - 0.5f64.sqrt()) / 0.05f64.powi(3);
        let got = p.len() as f64;
        assert!((got / expected - 1.0).abs() < 0.15, "{got} vs {expected}");
        assert!(p.count(Terminal::Source) > 0 && p.count(Terminal::Sink) > 0);
        assert_eq!(p.count(Terminal::Source), p.count(Terminal::Sink));
    }

    #[test]
    fn capacities_are_mirror_symmetric() {
        for st in [Stencil::Nearest, Stencil::Crofton26] {
            let p = build_lattice(&spec(4, 0.3, 0.1).stencil(st)).unwrap();
            let key = |c: &[f64]| -> Vec<i64> { c.iter().map(|x| (x * 1e6).round() as i64).collect() };
            let mut caps = std::collections::HashMap::new();
            for (a, &(_, _, c)) in p.network.arcs.iter().enumerate() {
                caps.insert(key(&p.arc_midpoint(a)), c);
            }
            for (a, &(_, _, c)) in p.network.arcs.iter().enumerate() {
                let mut m = p.arc_midpoint(a);
                m[0] = -m[0];
                let other = caps.get(&key(&m)).copied();
                assert!(other.is_some_and(|o| (o - c).abs() <= 1e-15 * c.max(1.0)), "{m:?}");
            }
        }
    }

    #[test]
    fn plane_capacity_tracks_the_analytic_area() {
        for (n, lam) in [(2, 1.0), (4, 0.3), (5, 0.5)] {
            let s = spec(n, lam, 0.02);
            let p = build_lattice(&s).unwrap();
            let a = plane_area(&s.cone, 1.0);
            let slack = 2.0 * s.spacing * n as f64 * a;
            assert!((p.plane_capacity() - a).abs() < slack, "n={n}: {} vs {a}", p.plane_capacity());
        }
    }

    #[test]
    fn plane_area_closed_forms() {
        // n = 2, λ = 1: the sector {t > |x₂|} of the unit disc.
        let c = ConeParams::new(2, 1.0).unwrap();
        assert!((plane_area(&c, 1.0) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        // n = 3: σ₁ R³/3 (1 − cos φ₀).
        let c = ConeParams::new(3, 0.5).unwrap();
        let phi0 = 2f64.atan();
        let want = 2.0 * std::f64::consts::PI / 3.0 * (1.0 - phi0.cos());
        assert!((plane_area(&c, 1.0) - want).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trips() {
        let p = build_lattice(&spec(3, 1.0, 0.2)).unwrap();
        let (net, term) = CutProblem::parse_dump(&p.dump()).unwrap();
        assert_eq!(term, p.terminals);
        assert_eq!(net.nodes, p.network.nodes);
        assert_eq!(net.arcs.len(), p.network.arcs.len());
        for (a, b) in net.arcs.iter().zip(&p.network.arcs) {
            assert_eq!((a.0, a.1), (b.0, b.1));
            assert!((a.2 - b.2).abs() <= 1e-15 * b.2);
        }
    }
}
