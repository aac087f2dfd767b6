use igahc::assembly::QuadratureRule;
use igahc::models::verification::{build_conforming_ring, build_quarter_ring, DEFAULT_SPLIT};
use igahc::multipatch::trace_on_airgap;
use igahc::studies::verification_problem;
use igahc::substructuring::DnConfig;

const RULE: QuadratureRule = QuadratureRule::Extra(1);

/// Conforming ring with a harmonic band as wide as the trace, where the mortar solve is the
/// monolithic one.
fn conforming(degree: usize, level: u32) -> igahc::studies::CoupledProblem {
    let model = build_conforming_ring(DEFAULT_SPLIT).unwrap();
    let s = model.discretize(degree, level).unwrap();
    let n = trace_on_airgap(&s.rt, &model.rt).unwrap().len();
    assert_eq!(n % 2, 1);
    verification_problem(&model, degree, level, (n / 2) as i32, RULE).unwrap()
}

#[test]
fn exact_trace_reproduces_the_monolithic_rotor_field() {
    for (p, level) in [(1, 3), (3, 2)] {
        let pr = conforming(p, level);
        let mono = pr.solve_mortar(0.0).unwrap();
        let dn = pr.dn(0.0).unwrap();
        let gamma: Vec<f64> = pr.rt.trace.dofs().iter().map(|&d| mono.u_rt[d]).collect();
        let (u, _) = dn.dtn_rotor_solve(&gamma).unwrap();
        let scale = mono.u_rt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = u.iter().zip(&mono.u_rt).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap < 1e-10 * scale, "p={p}: {gap:e}");
    }
}

#[test]
fn exact_flux_reproduces_the_monolithic_stator_field() {
    let pr = conforming(1, 3);
    let mono = pr.solve_mortar(0.0).unwrap();
    let dn = pr.dn(0.0).unwrap();
    let gamma: Vec<f64> = pr.rt.trace.dofs().iter().map(|&d| mono.u_rt[d]).collect();
    let (_, flux) = dn.dtn_rotor_solve(&gamma).unwrap();
    let u = dn.ntd_stator_solve(&flux).unwrap();
    let d = pr.relative_difference((&mono.u_rt, &u), (&mono.u_rt, &mono.u_st)).unwrap();
    assert!(d < 1e-8, "{d:e}");
}

#[test]
fn converged_iteration_matches_monolithic() {
    let pr = conforming(1, 3);
    let mono = pr.solve_mortar(0.0).unwrap();
    for (cfg, gate) in [
        (DnConfig { relax: 0.5, tol: 1e-3, max_iter: 100 }, 1e-2),
        (DnConfig { relax: 0.5, tol: 1e-11, max_iter: 300 }, 1e-8),
    ] {
        let s = pr.solve_dn(0.0, cfg).unwrap();
        let d = pr.relative_difference((&s.u_rt, &s.u_st), (&mono.u_rt, &mono.u_st)).unwrap();
        assert!(d < gate, "tol {}: {d:e}", cfg.tol);
    }
}

#[test]
fn history_is_monotone_on_the_verification_problem() {
    let model = build_quarter_ring(DEFAULT_SPLIT).unwrap();
    let pr = verification_problem(&model, 2, 3, 3, RULE).unwrap();
    for relax in [0.2, 0.3, 0.5] {
        let s = pr.solve_dn(0.0, DnConfig { relax, tol: 1e-9, max_iter: 400 }).unwrap();
        for w in s.history.windows(2).skip(1) {
            assert!(w[1].eps_rt <= 1.1 * w[0].eps_rt, "relax {relax} at k={}", w[1].k);
            assert!(w[1].eps_st <= 1.1 * w[0].eps_st, "relax {relax} at k={}", w[1].k);
        }
    }
}

#[test]
fn histories_are_deterministic() {
    let model = build_quarter_ring(DEFAULT_SPLIT).unwrap();
    let pr = verification_problem(&model, 1, 3, 3, RULE).unwrap();
    let a = pr.solve_dn(0.0, DnConfig::default()).unwrap();
    let b = pr.solve_dn(0.0, DnConfig::default()).unwrap();
    let strip = |s: &igahc::substructuring::DnSolution| -> Vec<(usize, f64, f64)> {
        s.history.iter().map(|r| (r.k, r.eps_rt, r.eps_st)).collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.u_st, b.u_st);
}

#[test]
fn rotation_without_wrap_is_rejected() {
    let model = build_quarter_ring(DEFAULT_SPLIT).unwrap();
    let pr = verification_problem(&model, 1, 2, 3, RULE).unwrap();
    assert!(pr.dn(0.1).is_err());
}
