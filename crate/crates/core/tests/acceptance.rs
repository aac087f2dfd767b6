//! Acceptance gates. Runs every criterion, prints one line each and exits non-zero if any fails.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use igahc::assembly::QuadratureRule;
use igahc::models::machine::MachineModel;
use igahc::models::verification::{build_quarter_ring, DEFAULT_SPLIT};
use igahc::multipatch::trace_on_airgap;
use igahc::splines::{make_circular_arc, KnotVector, NurbsPatch};
use igahc::studies::{
    airgap_radius_deviation, antiperiodic_rotation, convergence_study, emf_sweep, emf_sweep_dn, infsup_study,
    machine_problem, mortar_vs_monolithic, time_methods, ConvergenceTable, MachineProblem,
};
use igahc::substructuring::DnConfig;

const VERIFICATION_LEVELS: [u32; 5] = [2, 3, 4, 5, 6];
const MACHINE_LEVELS: [u32; 5] = [1, 2, 3, 4, 5];
const MID_LEVEL: u32 = 3;
const MAX_ORDER_MACHINE: i32 = 15;
const N_ALPHA: usize = 60;
/// 1500 rpm; spectral shape and THD do not depend on it.
const OMEGA: f64 = 50.0 * PI;
const THD_REFERENCE: f64 = 5.87e-4;

type Check = Result<(bool, String), String>;

fn machine(degree: usize, level: u32) -> Result<MachineProblem, String> {
    machine_problem(&MachineModel::default(), degree, level, MAX_ORDER_MACHINE, [0.0; 3], QuadratureRule::Default)
        .map_err(|e| e.to_string())
}

fn slopes(tables: &[ConvergenceTable], pick: fn(&ConvergenceTable) -> Option<f64>, gate: fn(usize) -> Option<f64>) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for t in tables {
        let Some(min) = gate(t.degree) else { continue };
        let s = pick(t);
        let pass = s.is_some_and(|v| v >= min);
        ok &= pass;
        parts.push(format!("p={} slope {} (>= {min})", t.degree, s.map_or("n/a".into(), |v| format!("{v:.3}"))));
    }
    (ok, parts.join(", "))
}

fn criterion_1(tables: &[ConvergenceTable], seconds: f64) -> Check {
    let (ok, text) = slopes(tables, |t| t.slope_l2, |p| Some(p as f64 + 0.7));
    Ok((ok && seconds < 300.0, format!("{text}; {seconds:.1} s (< 300 s)")))
}

fn criterion_2(tables: &[ConvergenceTable]) -> Check {
    Ok(slopes(tables, |t| t.slope_jump, |p| Some(p as f64 + 0.5)))
}

fn criterion_3(tables: &[ConvergenceTable]) -> Check {
    Ok(slopes(tables, |t| t.slope_lambda, |p| match p {
        1 => Some(1.5),
        2 => Some(3.5),
        _ => None,
    }))
}

fn criterion_4() -> Check {
    let model = build_quarter_ring(DEFAULT_SPLIT).map_err(|e| e.to_string())?;
    let levels = [2, 3, 4, 5];
    let orders = [0, 1, 2, 3, 4, 5];
    let rows = infsup_study(&model, 2, &levels, &orders).map_err(|e| e.to_string())?;
    let coarse: Vec<f64> = rows.iter().filter(|r| r.level == levels[0]).map(|r| r.beta).collect();
    let decreasing = coarse.len() >= 4 && coarse.windows(2).all(|w| w[1] < w[0]);
    let fixed: Vec<f64> = rows.iter().filter(|r| r.n_gamma == 7).map(|r| r.beta).collect();
    let lo = fixed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fixed.iter().cloned().fold(0.0, f64::max);
    let ok = decreasing && fixed.len() == levels.len() && lo > 0.0 && hi / lo < 3.0;
    let fmt = |v: &[f64]| v.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>().join(" ");
    Ok((
        ok,
        format!("coarsest mesh beta over N_gamma 1..11: {}; N_gamma = 7 over levels: {} (ratio {:.2} < 3)", fmt(&coarse), fmt(&fixed), hi / lo),
    ))
}

fn criterion_5() -> Check {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, level) in [(3, 2), (1, 3)] {
        let r = mortar_vs_monolithic(p, level).map_err(|e| e.to_string())?;
        ok &= r.relative_l2 < 1e-8;
        parts.push(format!("p={p} N_gamma={} rel L2 {:.2e}", r.n_gamma, r.relative_l2));
    }
    let s = t.elapsed().as_secs_f64();
    Ok((ok && s < 10.0, format!("{} (< 1e-8); {s:.2} s", parts.join(", "))))
}

fn criterion_6() -> Check {
    let pr = machine(2, MID_LEVEL)?;
    let cfg = DnConfig::default();
    let (_, m, d) = time_methods(&pr.coupled, 0.0, cfg).map_err(|e| e.to_string())?;
    let diff = pr
        .coupled
        .relative_difference((&d.u_rt, &d.u_st), (&m.u_rt, &m.u_st))
        .map_err(|e| e.to_string())?;
    let hc = emf_sweep(&pr, N_ALPHA, OMEGA).map_err(|e| e.to_string())?;
    let dn = emf_sweep_dn(&pr, N_ALPHA, OMEGA, cfg).map_err(|e| e.to_string())?;
    let rel_thd = (dn.thd_line - hc.thd_line).abs() / hc.thd_line;
    let rel_thd_phase = (dn.thd_phase - hc.thd_phase).abs() / hc.thd_phase;
    Ok((
        diff < 0.02 && rel_thd < 0.1,
        format!(
            "rel L2 {diff:.2e} (< 2e-2); line THD {:.4e} % vs {:.4e} %, rel {rel_thd:.2e} (< 0.1); phase THD rel {rel_thd_phase:.2e}; relax {}",
            hc.thd_line * 100.0,
            dn.thd_line * 100.0,
            cfg.relax
        ),
    ))
}

fn criterion_7() -> Check {
    let cfg = DnConfig {
        relax: 0.5,
        tol: 1e-3,
        max_iter: 100,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1, 2] {
        for level in MACHINE_LEVELS {
            let pr = machine(p, level)?;
            match pr.coupled.solve_dn(0.0, cfg) {
                Ok(s) => {
                    ok &= s.iterations <= 14;
                    parts.push(format!("p{p}L{level}:{}", s.iterations));
                }
                Err(_) => {
                    ok = false;
                    parts.push(format!("p{p}L{level}:diverged"));
                }
            }
        }
    }
    Ok((ok, format!("iterations at relax 0.5 (<= 14): {}", parts.join(" "))))
}

fn criterion_8() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1, 2] {
        for level in [1, 2, 3, 4] {
            let pr = machine(p, level)?;
            let (t, _, _) = time_methods(&pr.coupled, 0.0, DnConfig::default()).map_err(|e| e.to_string())?;
            ok &= t.mortar_total() < t.dn_total();
            parts.push(format!("p{p}L{level} {:.3}/{:.3} s", t.mortar_total(), t.dn_total()));
        }
    }
    Ok((ok, format!("harmonic/DN total: {}", parts.join(", "))))
}

fn criterion_9() -> Check {
    let mut worst: f64 = 0.0;
    for p in [1, 2, 3] {
        for level in MACHINE_LEVELS {
            let pr = machine(p, level)?;
            worst = worst.max(airgap_radius_deviation(&pr.coupled.rt.trace, p + 3));
            worst = worst.max(airgap_radius_deviation(&pr.coupled.st.trace, p + 3));
        }
    }
    let model = build_quarter_ring(DEFAULT_SPLIT).map_err(|e| e.to_string())?;
    for level in VERIFICATION_LEVELS {
        let s = model.discretize(2, level).map_err(|e| e.to_string())?;
        for (space, dom) in [(&s.rt, &model.rt), (&s.st, &model.st)] {
            let t = trace_on_airgap(space, dom).map_err(|e| e.to_string())?;
            worst = worst.max(airgap_radius_deviation(&t, 5));
        }
    }
    Ok((worst < 1e-12, format!("max relative radius deviation {worst:.2e} (< 1e-12)")))
}

fn criterion_10() -> Check {
    let pr = machine(2, 4)?;
    let e = emf_sweep(&pr, N_ALPHA, OMEGA).map_err(|e| e.to_string())?;
    let factor = e.thd_line / THD_REFERENCE;
    let ok = e.even_ratio < 1e-10 && e.thd_line < 1.5e-3 && (0.5..=2.0).contains(&factor);
    Ok((
        ok,
        format!(
            "even/E1 {:.1e} (< 1e-10); line THD {:.4e} % (< 0.15 %, x{factor:.2} of reference); triplen/E1 {:.1e}; phase THD {:.4e} %",
            e.even_ratio,
            e.thd_line * 100.0,
            e.triplen_ratio_line,
            e.thd_phase * 100.0
        ),
    ))
}

fn criterion_11() -> Check {
    let pr = machine(2, MID_LEVEL)?;
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.1, 0.37] {
        let r = antiperiodic_rotation(&pr, alpha).map_err(|e| e.to_string())?;
        worst = worst.max(r.rotor).max(r.stator).max(r.flux_linkage);
    }
    Ok((worst < 1e-8, format!("max relative deviation {worst:.2e} (< 1e-8)")))
}

fn criterion_12() -> Check {
    let t = Instant::now();
    let mut worst_pou: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for p in 1..=4 {
        let breaks = [0.0, 0.13, 0.4, 0.41, 0.77, 1.0];
        let kv = KnotVector::from_breakpoints(p, &breaks, 1).map_err(|e| e.to_string())?;
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let b = kv.eval(x, 1).map_err(|e| e.to_string())?;
            worst_pou = worst_pou.max((b.values().iter().sum::<f64>() - 1.0).abs());
            let h = 1e-6;
            if x > h && x < 1.0 - h {
                let lo = kv.eval(x - h, 0).map_err(|e| e.to_string())?;
                let hi = kv.eval(x + h, 0).map_err(|e| e.to_string())?;
                let at = |v: &igahc::splines::BasisValues, j: usize| {
                    j.checked_sub(v.first).and_then(|k| v.values().get(k)).copied().unwrap_or(0.0)
                };
                for (k, d) in b.ders[1].iter().enumerate() {
                    let j = b.first + k;
                    let fd = (at(&hi, j) - at(&lo, j)) / (2.0 * h);
                    if breaks.iter().all(|&c| (c - x).abs() > 2.0 * h) {
                        worst_fd = worst_fd.max((fd - d).abs() / (1.0 + d.abs()));
                    }
                }
            }
        }
    }
    let mut worst_arc: f64 = 0.0;
    for (r, a, b) in [(1.0, 0.0, FRAC_PI_2), (44.7e-3, 0.1, 1.2), (2.5, -1.0, 3.0), (0.3, 0.0, TAU)] {
        let c = make_circular_arc(r, a, b, [0.0, 0.0]).map_err(|e| e.to_string())?;
        for i in 0..=500 {
            let x = c.eval(i as f64 / 500.0).map_err(|e| e.to_string())?;
            worst_arc = worst_arc.max((x[0].hypot(x[1]) - r).abs() / r);
        }
    }
    let patch = NurbsPatch::annular_sector(1.0, 2.0, 0.2, 1.4).map_err(|e| e.to_string())?;
    let refined = patch
        .insert_knots(&[0.25, 0.5, 0.8], &[0.3, 0.6, 0.6])
        .map_err(|e| e.to_string())?;
    let mut worst_refine: f64 = 0.0;
    for i in 0..=40 {
        for j in 0..=40 {
            let (u, v) = (i as f64 / 40.0, j as f64 / 40.0);
            let a = patch.sample(u, v).point;
            let b = refined.sample(u, v).point;
            worst_refine = worst_refine.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    let s = t.elapsed().as_secs_f64();
    let ok = worst_pou < 1e-13 && worst_fd < 1e-6 && worst_arc < 1e-12 && worst_refine < 1e-13 && s < 120.0;
    Ok((
        ok,
        format!(
            "partition of unity {worst_pou:.1e}, derivative vs differences {worst_fd:.1e}, arc radius {worst_arc:.1e}, refinement drift {worst_refine:.1e}; {s:.2} s"
        ),
    ))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let (pass, detail) = match outcome {
        Ok((pass, detail)) => (pass, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id:>2} {} {name}: {detail} [{:.1} s]",
        if pass { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    pass
}

fn main() -> ExitCode {
    let model = build_quarter_ring(DEFAULT_SPLIT).expect("verification geometry");
    let t = Instant::now();
    let tables = convergence_study(&model, &[1, 2, 3], &VERIFICATION_LEVELS, 3, QuadratureRule::Extra(1));
    let seconds = t.elapsed().as_secs_f64();
    let tables = tables.map_err(|e| e.to_string());
    let with_tables = |f: &dyn Fn(&[ConvergenceTable]) -> Check| match &tables {
        Ok(t) => f(t),
        Err(e) => Err(e.clone()),
    };

    let results = [
        report(1, "L2 convergence", || with_tables(&|t| criterion_1(t, seconds))),
        report(2, "interface jump convergence", || with_tables(&criterion_2)),
        report(3, "multiplier convergence", || with_tables(&criterion_3)),
        report(4, "inf-sup behaviour", criterion_4),
        report(5, "mortar vs monolithic", criterion_5),
        report(6, "DN vs mortar agreement", criterion_6),
        report(7, "DN iteration count", criterion_7),
        report(8, "harmonic coupling faster than DN", criterion_8),
        report(9, "air-gap geometry exactness", criterion_9),
        report(10, "EMF structure and THD", criterion_10),
        report(11, "anti-periodic rotation", criterion_11),
        report(12, "basis-level oracles", criterion_12),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
