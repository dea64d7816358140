//! Property tests for the structural invariants.

use conecal::calibration::*;
use conecal::cone::*;
use conecal::exterior::*;
use conecal::lab::{
    brute_force_min_cut, build_lattice, dinic, push_relabel, solve_mincut, vertex_skip_probe,
    LatticeSpec, Network, Stencil,
};
use conecal::parallel::Execution;
use conecal::verifier::{run_suite, LambdaSpec, SuiteConfig};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_filter("off the axis plane", |v| {
        v[1..].iter().map(|x| x * x).sum::<f64>().sqrt() > 0.05
    })
}

fn dim_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..=7).prop_flat_map(|n| (Just(n), point(n)))
}

fn form(n: usize, k: usize, coeffs: &[f64]) -> KForm {
    let mut f = KForm::zero(n, k);
    for (a, c) in MultiIndex::all_of_degree(n, k).zip(coeffs.iter().cycle()) {
        f.add_term(a, *c);
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_inverse_and_determinant((n, x) in dim_point(), lam in 0.05..3.0f64) {
        let c = ConeParams::new(n, lam).unwrap();
        let m = metric_at(&BasePoint::new(x).unwrap(), &c).unwrap();
        let prod = &m.g * &m.g_inv;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
        prop_assert!((m.det_g_lu - (1.0 + lam * lam)).abs() < 1e-12 * (1.0 + lam * lam));
    }

    #[test]
    fn polar_coordinates((_n, x) in dim_point()) {
        let p = BasePoint::new(x.clone()).unwrap();
        let th = p.theta().unwrap();
        prop_assert!((x[0] - p.rho() * th.sin()).abs() < 1e-14 * p.rho().max(1.0));
        prop_assert!((p.r() - p.rho() * th.cos()).abs() < 1e-14 * p.rho().max(1.0));
        prop_assert!((p.u().unwrap() - th.tan()).abs() < 1e-13 * (1.0 + th.tan().abs()));
    }

    #[test]
    fn frame_gram_is_the_metric((n, x) in dim_point(), lam in 0.05..3.0f64) {
        let c = ConeParams::new(n, lam).unwrap();
        let p = BasePoint::new(x).unwrap();
        let (_, frame) = isometry_frame(&p, &c).unwrap();
        let m = metric_at(&p, &c).unwrap();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = frame[i].iter().zip(&frame[j]).map(|(a, b)| a * b).sum();
                prop_assert!((dot - m.g[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn star_is_an_involution_and_isometry(
        (n, x) in dim_point(),
        lam in 0.05..3.0f64,
        k_frac in 0.0..1.0f64,
        coeffs in prop::collection::vec(-1.0..1.0f64, 1..40),
    ) {
        let c = ConeParams::new(n, lam).unwrap();
        let m = metric_at(&BasePoint::new(x).unwrap(), &c).unwrap();
        let o = Orientation::from_metric(&m);
        let k = ((n + 1) as f64 * k_frac) as usize;
        let a = form(n, k, &coeffs);
        let ss = hodge_star(&hodge_star(&a, &m, &o), &m, &o);
        let sign = if (k * (n - k)).is_multiple_of(2) { 1.0 } else { -1.0 };
        prop_assert!(ss.max_abs_diff(&a.scale(sign)).unwrap() < 1e-12);
        let na = form_norm(&a, &m).unwrap();
        let ns = form_norm(&hodge_star(&a, &m, &o), &m).unwrap();
        prop_assert!((na - ns).abs() < 1e-12 * na.max(1.0));
    }

    #[test]
    fn flat_and_sharp_are_inverse(
        (n, x) in dim_point(),
        lam in 0.05..3.0f64,
        v in prop::collection::vec(-2.0..2.0f64, 7),
    ) {
        let c = ConeParams::new(n, lam).unwrap();
        let m = metric_at(&BasePoint::new(x).unwrap(), &c).unwrap();
        let v = &v[..n];
        let back = sharp(&flat(v, &m), &m).unwrap();
        for (a, b) in back.iter().zip(v) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let f = flat(v, &m);
        prop_assert!((form_norm(&f, &m).unwrap() - m.vector_norm(v)).abs() < 1e-12);
        let lhs = hodge_star(&f, &m, &Orientation::from_metric(&m));
        let rhs = interior_product(v, &Orientation::from_metric(&m).volume_form()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn gram_inner_matches_adjugate_form((n, x) in dim_point(), lam in 0.05..3.0f64) {
        // With α = (2,…,n), the minors ⟨dx_{α∖i}, dx_{α∖j}⟩ are signed cofactors
        // of the α-block of g̃, i.e. its determinant (1 + λ²x₁²/ρ²)/(1 + λ²)
        // times its inverse δ + λ²x_ix_j/(ρ² + λ²x₁²).
        let c = ConeParams::new(n, lam).unwrap();
        let p = BasePoint::new(x.clone()).unwrap();
        let m = metric_at(&p, &c).unwrap();
        let rho2 = p.rho().powi(2);
        let alpha = MultiIndex::full(n).without(0);
        let det1 = 1.0 + lam * lam * x[0] * x[0] / rho2;
        for i in 1..n {
            for j in 1..n {
                let d = if i == j { 1.0 } else { 0.0 };
                let adj = d + lam * lam * x[i] * x[j] / (rho2 + lam * lam * x[0] * x[0]);
                let want = adj * det1 / (1.0 + lam * lam);
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let got = sign * basis_inner(alpha.without(i), alpha.without(j), &m);
                prop_assert!((got - want).abs() < 1e-12, "i={} j={} {} vs {}", i, j, got, want);
            }
        }
    }

    #[test]
    fn field_is_vertically_invariant(
        n in 4usize..=6,
        x in prop::collection::vec(-2.0..2.0f64, 6),
        lift in prop::collection::vec(0.0..5.0f64, 2),
    ) {
        let x = x[..n].to_vec();
        prop_assume!(x[1..].iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let p = CalibrationParams::optimal(ConeParams::at_threshold(n).unwrap()).unwrap();
        let base = p.cone.lambda() * x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = z_at(&AmbientPoint::new(x.clone(), base + lift[0]), &p).unwrap();
        let b = z_at(&AmbientPoint::new(x, base + lift[1]), &p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn frame_divergence_vanishes(n in 4usize..=6, x in prop::collection::vec(0.3..2.0f64, 6)) {
        let p = CalibrationParams::optimal(ConeParams::at_threshold(n).unwrap()).unwrap();
        let b = BasePoint::new(x[..n].to_vec()).unwrap();
        let d = divergence_coords(|y| field_x_at(y, &p), &b, 1e-4 * b.rho(), &p.cone).unwrap();
        prop_assert!(d.abs() < 1e-6, "{}", d);
    }

    #[test]
    fn norm_chain_cauchy_schwarz(n in 4usize..=7, frac in 0.1..1.0f64, x in prop::collection::vec(-2.0..2.0f64, 7)) {
        let cone = ConeParams::new(n, frac * lambda_bar(n).unwrap()).unwrap();
        let p = CalibrationParams::optimal(cone).unwrap();
        let x = x[..n].to_vec();
        prop_assume!(x[1..].iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let b = BasePoint::new(x.clone()).unwrap();
        let m = metric_at(&b, &cone).unwrap();
        let r = b.r();
        let mm = (n - 1) as f64;
        let (h, hp) = h_eval(x[0] / r, p.gamma);
        let bracket = dr_form(&b).unwrap().scale(h - x[0] * hp / (mm * r))
            .add(&KForm::basis(n, MultiIndex::single(0), hp / mm)).unwrap();
        let w = form_norm(&omega_h_at(&b, &p).unwrap(), &m).unwrap();
        let chain = form_norm(&bracket, &m).unwrap()
            * form_norm(&psi0_at(&b, &cone).unwrap().scale(mm / r), &m).unwrap();
        prop_assert!(w <= chain * (1.0 + 1e-12));
        prop_assert!(w <= 1.0 + 1e-12);
    }

    #[test]
    fn optimal_exponent_minimises_the_feasibility_lhs(n in 4usize..=10, frac in 0.05..1.0f64) {
        let c = ConeParams::new(n, frac * lambda_bar(n).unwrap()).unwrap();
        let g = gamma_bar(&c).unwrap();
        let best = feasibility(&c, g).lhs;
        for s in [0.5, 0.9, 1.1, 2.0] {
            prop_assert!(best <= feasibility(&c, s * g).lhs + 1e-12);
        }
    }

    #[test]
    fn w_is_increasing(gamma in 0.1..8.0f64, a in 0.0..13.8f64, b in 0.0..13.8f64) {
        let (z1, z2) = (a.min(b).exp(), a.max(b).exp());
        prop_assert!(w_ratio(z1, gamma).unwrap() <= w_ratio(z2, gamma).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn lambda_spec_round_trips(k in 0.01..4.0f64, bar in any::<bool>()) {
        let spec = if bar { LambdaSpec::Bar(k) } else { LambdaSpec::Value(k) };
        let parsed: LambdaSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(parsed, spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solvers_agree_with_each_other_and_brute_force(
        n in 3usize..11,
        edges in prop::collection::vec((0usize..11, 0usize..11, 0.0..10.0f64), 1..40),
    ) {
        let mut net = Network::new(n);
        for (u, v, c) in edges {
            if u % n != v % n {
                net.add(u % n, v % n, c);
            }
        }
        let mut fixed = vec![None; n];
        fixed[0] = Some(true);
        fixed[n - 1] = Some(false);
        let (bf, _) = brute_force_min_cut(&net, &fixed);
        let a = push_relabel(&net, 0, n - 1);
        let b = dinic(&net, 0, n - 1);
        let tol = 1e-9 * bf.max(1.0);
        prop_assert!((a.flow - bf).abs() <= tol && (b.flow - bf).abs() <= tol);
        prop_assert!((net.cut_value(&a.source_side) - bf).abs() <= tol);
        prop_assert!((net.cut_value(&b.source_side) - bf).abs() <= tol);
        prop_assert!(a.source_side[0] && !a.source_side[n - 1]);
    }

    #[test]
    fn cut_never_exceeds_the_plane(n in 2usize..=5, lam in 0.3..2.0f64, crofton in any::<bool>()) {
        let st = if crofton { Stencil::Crofton26 } else { Stencil::Nearest };
        let s = LatticeSpec::new(ConeParams::new(n, lam).unwrap(), 1.0, 0.1).stencil(st);
        let p = build_lattice(&s).unwrap();
        let r = solve_mincut(&p);
        prop_assert!(r.value <= p.plane_capacity() * (1.0 + 1e-12));
        prop_assert!((r.value - r.flow).abs() <= 1e-9 * r.value.max(1e-300));
    }
}

#[test]
fn refinement_does_not_raise_the_ratio() {
    let s = LatticeSpec::new(ConeParams::new(2, 1.0).unwrap(), 1.0, 0.08).stencil(Stencil::Crofton26);
    let probe = vertex_skip_probe(&s, &[0.08, 0.04, 0.02], Execution::Parallel).unwrap();
    for w in probe.windows(2) {
        assert!(w[1].ratio <= w[0].ratio + 1e-12, "{probe:?}");
    }
    // In dimension four the minimum cut is the plane, through the vertex.
    let s = LatticeSpec::new(ConeParams::new(4, 0.3).unwrap(), 1.0, 0.08);
    let probe = vertex_skip_probe(&s, &[0.08, 0.04, 0.02], Execution::Parallel).unwrap();
    for w in probe.windows(2) {
        assert!(w[1].vertex_clearance < w[0].vertex_clearance, "{probe:?}");
    }
}

#[test]
fn instability_is_scale_invariant() {
    let s = LatticeSpec::new(ConeParams::new(2, 1.0).unwrap(), 1.0, 0.04).stencil(Stencil::Crofton26);
    let a = build_lattice(&s).unwrap();
    let b = build_lattice(&s.scaled(2.5)).unwrap();
    let (ra, rb) = (solve_mincut(&a), solve_mincut(&b));
    let (qa, qb) = (ra.value / a.plane_capacity(), rb.value / b.plane_capacity());
    assert!((qa - qb).abs() < 1e-9, "{qa} vs {qb}");
    assert!((rb.vertex_clearance / ra.vertex_clearance - 2.5).abs() < 1e-9);
}

#[test]
fn reports_are_deterministic_across_modes() {
    let mut cfg = SuiteConfig {
        n: vec![4, 5],
        ..Default::default()
    };
    cfg.samples.identities = 500;
    cfg.samples.hodge = 5;
    cfg.samples.norm = 500;
    cfg.samples.plane = 200;
    cfg.samples.surface = 200;
    cfg.samples.divergence = 200;
    cfg.samples.omega = 50;
    cfg.execution = Execution::Sequential;
    let a = run_suite(&cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let b = run_suite(&cfg).unwrap();
    let c = run_suite(&cfg).unwrap();
    assert!(a.all_pass(), "{:#?}", a.failures().collect::<Vec<_>>());
    assert_eq!(a.records, b.records);
    assert_eq!(b.to_csv().unwrap(), c.to_csv().unwrap());
}
