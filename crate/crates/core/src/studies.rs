//! End-to-end drivers shared by the command line and the acceptance suite.

use std::f64::consts::TAU;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_load, assemble_mass, assemble_stiffness, integrate, LinearSystem, MaterialMap, QuadratureRule};
use crate::error::{Error, Result};
use crate::linsolve::{solve_spd, CsrMatrix};
use crate::models::machine::{build_pmsm_pole, MachineModel, PmsmPole};
use crate::models::verification::{
    build_conforming_ring, manufactured_gradient, manufactured_rhs, manufactured_solution, VerificationModel,
    DEFAULT_SPLIT,
};
use crate::mortar::{
    assemble_coupling, harmonic_mass, infsup_constant, select_harmonics, solve_coupled, CoupledSolution,
    HarmonicSet, InterfaceSide, SaddleSystem, SchurSolver, Symmetry,
};
use crate::multipatch::{glue_c0, trace_on_airgap, uniform_spaces, DiscreteSpace, MultiPatchDomain, TraceSpace};
use crate::postproc::{
    emf_spectrum, energy, error_jump, error_l2, error_multiplier, fitted_slope, flux_linkage, norm_l2, thd,
    SolutionField, Spectrum,
};
use crate::substructuring::{DirichletNeumann, DnConfig, DnSide, DnSolution};

/// One side of a coupled problem after assembly.
#[derive(Clone, Debug)]
pub struct Side {
    pub domain: MultiPatchDomain,
    pub space: DiscreteSpace,
    pub system: LinearSystem,
    pub trace: TraceSpace,
}

impl Side {
    fn assemble(domain: MultiPatchDomain, space: DiscreteSpace, materials: &MaterialMap, rule: QuadratureRule) -> Result<Self> {
        let system = LinearSystem::assemble(&domain, &space, materials, rule)?;
        let trace = trace_on_airgap(&space, &domain)?;
        Ok(Side {
            domain,
            space,
            system,
            trace,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.space.n_dof()
    }

    pub fn field<'a>(&'a self, u: &[f64]) -> Result<SolutionField<'a>> {
        SolutionField::new(&self.domain, &self.space, u)
    }

    fn dn_side(&self, rule: QuadratureRule) -> Result<DnSide> {
        Ok(DnSide {
            k: self.system.k.clone(),
            j: self.system.j.clone(),
            mass: assemble_mass(&self.domain, &self.space, rule)?,
            trace: self.trace.clone(),
        })
    }
}

/// Rotor and stator sides with a harmonic set on the interface.
#[derive(Clone, Debug)]
pub struct CoupledProblem {
    pub rt: Side,
    pub st: Side,
    pub harmonics: HarmonicSet,
    /// Pole pitch for anti-periodic interfaces.
    pub wrap: Option<f64>,
    pub rule: QuadratureRule,
    /// Wall time spent on both stiffness matrices and loads.
    pub assembly_seconds: f64,
}

impl CoupledProblem {
    pub fn saddle(&self, alpha: f64) -> Result<SaddleSystem> {
        let g_rt = assemble_coupling(&self.rt.trace, self.rt.n_dof(), &self.harmonics, InterfaceSide::Rotor);
        let g_st = assemble_coupling(&self.st.trace, self.st.n_dof(), &self.harmonics, InterfaceSide::Stator);
        SaddleSystem::assemble(
            self.rt.system.k.clone(),
            self.st.system.k.clone(),
            g_rt,
            g_st,
            alpha,
            self.rt.system.j.clone(),
            self.st.system.j.clone(),
        )
    }

    /// Direct solve of the coupled system at rotor angle `alpha`.
    pub fn solve_mortar(&self, alpha: f64) -> Result<CoupledSolution> {
        solve_coupled(&self.saddle(alpha)?)
    }

    /// Factor once for many rotor angles.
    pub fn schur(&self) -> Result<SchurSolver> {
        let s = self.saddle(0.0)?;
        SchurSolver::new(&s.k_rt, &s.k_st, &s.g_rt, &s.g_st, &s.j_rt, &s.j_st)
    }

    pub fn dn(&self, alpha: f64) -> Result<DirichletNeumann> {
        DirichletNeumann::new(self.rt.dn_side(self.rule)?, self.st.dn_side(self.rule)?, alpha, self.wrap)
    }

    pub fn solve_dn(&self, alpha: f64, cfg: DnConfig) -> Result<DnSolution> {
        self.dn(alpha)?.iterate(None, cfg)
    }

    /// Relative L2 distance of two coupled solutions over both sides.
    pub fn relative_difference(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (side, ua, ub) in [(&self.rt, a.0, b.0), (&self.st, a.1, b.1)] {
            let d: Vec<f64> = ua.iter().zip(ub).map(|(x, y)| x - y).collect();
            let m = assemble_mass(&side.domain, &side.space, self.rule)?;
            num += energy(&m, &d);
            den += energy(&m, ub);
        }
        Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
    }
}

/// Errors of one verification solve.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationRun {
    pub degree: usize,
    pub level: u32,
    pub h: f64,
    pub n_dof: usize,
    pub n_gamma: usize,
    pub e_l2: f64,
    pub e_jump: f64,
    pub e_lambda: f64,
    pub energy: f64,
    pub energy_exact: f64,
    pub continuity: f64,
}

/// Assemble the quarter-ring problem at one level.
pub fn verification_problem(
    model: &VerificationModel,
    degree: usize,
    level: u32,
    max_order: i32,
    rule: QuadratureRule,
) -> Result<CoupledProblem> {
    let t = Instant::now();
    let s = model.discretize(degree, level)?;
    let side = |d: &MultiPatchDomain, sp: DiscreteSpace| -> Result<Side> {
        let materials = MaterialMap::uniform(d.n_patches(), 1.0)?;
        let k = assemble_stiffness(d, &sp, &materials, rule)?;
        let j = assemble_load(d, &sp, rule, |_, x| manufactured_rhs(x[0], x[1]))?;
        Ok(Side {
            domain: d.clone(),
            trace: trace_on_airgap(&sp, d)?,
            space: sp,
            system: LinearSystem { k, j },
        })
    };
    let rt = side(&model.rt, s.rt)?;
    let st = side(&model.st, s.st)?;
    Ok(CoupledProblem {
        rt,
        st,
        harmonics: select_harmonics(Symmetry::Periodic, TAU, max_order)?,
        wrap: None,
        rule,
        assembly_seconds: t.elapsed().as_secs_f64(),
    })
}

/// `-R d u*/dr` at the interface, the flux per unit angle carried by the multipliers.
pub fn verification_flux(r: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let g = manufactured_gradient(r * c, r * s);
    -r * (g[0] * c + g[1] * s)
}

/// Solve and measure all verification errors.
pub fn verification_run(
    model: &VerificationModel,
    degree: usize,
    level: u32,
    max_order: i32,
    rule: QuadratureRule,
) -> Result<VerificationRun> {
    let p = verification_problem(model, degree, level, max_order, rule)?;
    let sol = p.solve_mortar(0.0)?;
    let exact = |x: [f64; 2]| manufactured_solution(x[0], x[1]);
    let f_rt = p.rt.field(&sol.u_rt)?;
    let f_st = p.st.field(&sol.u_st)?;
    let e_l2 = (error_l2(&f_rt, exact)?.powi(2) + error_l2(&f_st, exact)?.powi(2)).sqrt();
    let e_jump = error_jump(&p.rt.trace, &sol.u_rt, &p.st.trace, &sol.u_st)?;
    let (t0, t1) = p.rt.trace.theta_range();
    let r = model.r_split;
    let e_lambda = error_multiplier(&p.harmonics, &sol.lambda, t0, t1, |t| verification_flux(r, t));
    let all = |d: &MultiPatchDomain| (0..d.n_patches()).collect::<Vec<_>>();
    let grad2 = |q: &crate::assembly::QuadPoint| {
        let g = manufactured_gradient(q.point[0], q.point[1]);
        (g[0] * g[0] + g[1] * g[1]) * q.jxw
    };
    let energy_exact = integrate(&p.rt.domain, &p.rt.space, &all(&p.rt.domain), QuadratureRule::Extra(2), grad2)?
        + integrate(&p.st.domain, &p.st.space, &all(&p.st.domain), QuadratureRule::Extra(2), grad2)?;
    Ok(VerificationRun {
        degree,
        level,
        h: 0.5f64.powi(level as i32),
        n_dof: p.rt.n_dof() + p.st.n_dof(),
        n_gamma: p.harmonics.len(),
        e_l2,
        e_jump,
        e_lambda,
        energy: energy(&p.rt.system.k, &sol.u_rt) + energy(&p.st.system.k, &sol.u_st),
        energy_exact,
        continuity: sol.continuity,
    })
}

/// Convergence of one degree over several levels.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub degree: usize,
    pub runs: Vec<VerificationRun>,
    pub slope_l2: Option<f64>,
    pub slope_jump: Option<f64>,
    pub slope_lambda: Option<f64>,
    pub slope_energy: Option<f64>,
}

pub fn convergence_study(
    model: &VerificationModel,
    degrees: &[usize],
    levels: &[u32],
    max_order: i32,
    rule: QuadratureRule,
) -> Result<Vec<ConvergenceTable>> {
    let jobs: Vec<(usize, u32)> = degrees
        .iter()
        .flat_map(|&p| levels.iter().map(move |&l| (p, l)))
        .collect();
    let runs: Vec<Result<VerificationRun>> = jobs
        .par_iter()
        .map(|&(p, l)| verification_run(model, p, l, max_order, rule))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(degrees
        .iter()
        .map(|&p| {
            let rs: Vec<VerificationRun> = runs.iter().filter(|r| r.degree == p).cloned().collect();
            let h: Vec<f64> = rs.iter().map(|r| r.h).collect();
            let col = |f: fn(&VerificationRun) -> f64| rs.iter().map(f).collect::<Vec<_>>();
            let e_energy: Vec<f64> = rs.iter().map(|r| (r.energy - r.energy_exact).abs()).collect();
            ConvergenceTable {
                degree: p,
                slope_l2: fitted_slope(&h, &col(|r| r.e_l2)),
                slope_jump: fitted_slope(&h, &col(|r| r.e_jump)),
                slope_lambda: fitted_slope(&h, &col(|r| r.e_lambda)),
                slope_energy: fitted_slope(&h, &e_energy),
                runs: rs,
            }
        })
        .collect())
}

/// One point of the inf-sup sweep.
#[derive(Clone, Debug, Serialize)]
pub struct InfSupRow {
    pub level: u32,
    pub max_order: i32,
    pub n_gamma: usize,
    pub beta: f64,
}

/// Inf-sup constant of the verification interface over levels and harmonic bands.
pub fn infsup_study(model: &VerificationModel, degree: usize, levels: &[u32], max_orders: &[i32]) -> Result<Vec<InfSupRow>> {
    let jobs: Vec<(u32, i32)> = levels
        .iter()
        .flat_map(|&l| max_orders.iter().map(move |&m| (l, m)))
        .collect();
    let rows: Vec<Result<InfSupRow>> = jobs
        .par_iter()
        .map(|&(level, max_order)| {
            let s = model.discretize(degree, level)?;
            let h = select_harmonics(Symmetry::Periodic, TAU, max_order)?;
            let rule = QuadratureRule::Default;
            let k = |d: &MultiPatchDomain, sp: &DiscreteSpace| -> Result<CsrMatrix<f64>> {
                assemble_stiffness(d, sp, &MaterialMap::uniform(d.n_patches(), 1.0)?, rule)
            };
            let (k_rt, k_st) = (k(&model.rt, &s.rt)?, k(&model.st, &s.st)?);
            let t_rt = trace_on_airgap(&s.rt, &model.rt)?;
            let t_st = trace_on_airgap(&s.st, &model.st)?;
            let g_rt = assemble_coupling(&t_rt, s.rt.n_dof(), &h, InterfaceSide::Rotor);
            let g_st = assemble_coupling(&t_st, s.st.n_dof(), &h, InterfaceSide::Stator);
            let (a, b) = t_rt.theta_range();
            let m = harmonic_mass(&h, a, b);
            let r = infsup_constant(&[(&k_rt, &g_rt), (&k_st, &g_st)], &m)?;
            Ok(InfSupRow {
                level,
                max_order,
                n_gamma: h.len(),
                beta: r.beta,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Machine pole assembled at one refinement level.
#[derive(Clone, Debug)]
pub struct MachineProblem {
    pub pole: PmsmPole,
    pub degree: usize,
    pub level: u32,
    pub coupled: CoupledProblem,
}

/// `2^(level - 1)` elements per patch direction.
pub fn machine_problem(
    model: &MachineModel,
    degree: usize,
    level: u32,
    max_order: i32,
    currents: [f64; 3],
    rule: QuadratureRule,
) -> Result<MachineProblem> {
    if level == 0 {
        return Err(Error::config("levels", "machine refinement levels start at 1"));
    }
    let pole = build_pmsm_pole(model)?;
    let t = Instant::now();
    let n = 1usize << (level - 1);
    let pitch = model.pole_pitch();
    let (mat_rt, mat_st) = pole.materials(currents)?;
    let space = |d: &MultiPatchDomain| -> Result<DiscreteSpace> {
        glue_c0(d, uniform_spaces(d, degree, n)?)?
            .apply_dirichlet(d)
            .apply_antiperiodic(d, pitch)
    };
    let (s_rt, s_st) = (space(&pole.rt)?, space(&pole.st)?);
    let rt = Side::assemble(pole.rt.clone(), s_rt, &mat_rt, rule)?;
    let st = Side::assemble(pole.st.clone(), s_st, &mat_st, rule)?;
    let harmonics = select_harmonics(Symmetry::Antiperiodic, pitch, max_order)?;
    Ok(MachineProblem {
        pole,
        degree,
        level,
        coupled: CoupledProblem {
            rt,
            st,
            harmonics,
            wrap: Some(pitch),
            rule,
            assembly_seconds: t.elapsed().as_secs_f64(),
        },
    })
}

impl MachineProblem {
    /// Flux linkage of the three phases for a stator field.
    pub fn flux_linkage(&self, u_st: &[f64]) -> Result<[f64; 3]> {
        flux_linkage(&self.pole, &self.coupled.st.field(u_st)?)
    }
}

/// Flux linkage sweep with the phase and line-to-line EMF spectra.
#[derive(Clone, Debug, Serialize)]
pub struct EmfResult {
    pub alphas: Vec<f64>,
    pub psi: Vec<[f64; 3]>,
    /// Spectrum of the phase a EMF.
    pub phase: Spectrum,
    /// Spectrum of the line-to-line EMF `e_a - e_b`.
    pub line: Spectrum,
    pub thd_phase: f64,
    pub thd_line: f64,
    /// Largest even-order magnitude over the fundamental, phase EMF.
    pub even_ratio: f64,
    /// Largest multiple-of-three magnitude over the fundamental, line EMF.
    pub triplen_ratio_line: f64,
}

impl EmfResult {
    pub fn from_psi(alphas: Vec<f64>, psi: Vec<[f64; 3]>, pitch: f64, omega: f64) -> Result<Self> {
        let a: Vec<f64> = psi.iter().map(|p| p[0]).collect();
        let ab: Vec<f64> = psi.iter().map(|p| p[0] - p[1]).collect();
        let phase = emf_spectrum(&alphas, &a, pitch, omega)?;
        let line = emf_spectrum(&alphas, &ab, pitch, omega)?;
        let e1 = line.magnitude(1);
        let triplen = (3..line.coefficients.len())
            .step_by(3)
            .map(|p| line.magnitude(p))
            .fold(0.0, f64::max);
        Ok(EmfResult {
            thd_phase: thd(&phase)?,
            thd_line: thd(&line)?,
            even_ratio: phase.even_ratio(),
            triplen_ratio_line: triplen / e1,
            alphas,
            psi,
            phase,
            line,
        })
    }
}

fn sweep_angles(pitch: f64, n_alpha: usize) -> Vec<f64> {
    (0..n_alpha).map(|i| i as f64 * pitch / n_alpha as f64).collect()
}

/// Rotate the rotor over one pole pitch in `n_alpha` steps with harmonic coupling.
pub fn emf_sweep(problem: &MachineProblem, n_alpha: usize, omega: f64) -> Result<EmfResult> {
    let pitch = problem.pole.model.pole_pitch();
    let schur = problem.coupled.schur()?;
    let alphas = sweep_angles(pitch, n_alpha);
    let psi: Vec<Result<[f64; 3]>> = alphas
        .par_iter()
        .map(|&a| {
            let s = schur.solve(a)?;
            problem.flux_linkage(&s.u_st)
        })
        .collect();
    let psi = psi.into_iter().collect::<Result<Vec<_>>>()?;
    EmfResult::from_psi(alphas, psi, pitch, omega)
}

/// The same sweep with Dirichlet-Neumann substructuring at every angle.
pub fn emf_sweep_dn(problem: &MachineProblem, n_alpha: usize, omega: f64, cfg: DnConfig) -> Result<EmfResult> {
    let pitch = problem.pole.model.pole_pitch();
    let alphas = sweep_angles(pitch, n_alpha);
    let psi: Vec<Result<[f64; 3]>> = alphas
        .par_iter()
        .map(|&a| {
            let s = problem.coupled.solve_dn(a, cfg)?;
            problem.flux_linkage(&s.u_st)
        })
        .collect();
    let psi = psi.into_iter().collect::<Result<Vec<_>>>()?;
    EmfResult::from_psi(alphas, psi, pitch, omega)
}

/// Wall time of the two coupling methods on one problem.
#[derive(Clone, Debug, Serialize)]
pub struct MethodTiming {
    pub assembly_seconds: f64,
    pub mortar_seconds: f64,
    pub dn_seconds: f64,
    pub dn_iterations: usize,
}

impl MethodTiming {
    /// Assembly plus coupling setup and solve.
    pub fn mortar_total(&self) -> f64 {
        self.assembly_seconds + self.mortar_seconds
    }

    pub fn dn_total(&self) -> f64 {
        self.assembly_seconds + self.dn_seconds
    }
}

/// Time a mortar solve and a DN solve at `alpha`, both from the assembled stiffness matrices.
pub fn time_methods(problem: &CoupledProblem, alpha: f64, cfg: DnConfig) -> Result<(MethodTiming, CoupledSolution, DnSolution)> {
    let t = Instant::now();
    let m = problem.solve_mortar(alpha)?;
    let mortar_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let d = problem.solve_dn(alpha, cfg)?;
    let dn_seconds = t.elapsed().as_secs_f64();
    Ok((
        MethodTiming {
            assembly_seconds: problem.assembly_seconds,
            mortar_seconds,
            dn_seconds,
            dn_iterations: d.iterations,
        },
        m,
        d,
    ))
}

/// Mortar against a strongly glued solve on the conforming ring.
#[derive(Clone, Debug, Serialize)]
pub struct MonolithicComparison {
    pub degree: usize,
    pub level: u32,
    pub trace_dofs: usize,
    pub n_gamma: usize,
    pub relative_l2: f64,
}

/// The harmonic band is chosen with as many members as the interface has trace functions.
pub fn mortar_vs_monolithic(degree: usize, level: u32) -> Result<MonolithicComparison> {
    let model = build_conforming_ring(DEFAULT_SPLIT)?;
    let rule = QuadratureRule::Extra(1);
    let s = model.discretize(degree, level)?;
    let n_trace = trace_on_airgap(&s.rt, &model.rt)?.len();
    if n_trace % 2 == 0 {
        return Err(Error::config(
            "level",
            format!("{n_trace} trace functions cannot be matched by a double-sided harmonic band"),
        ));
    }
    let coupled = verification_problem(&model, degree, level, (n_trace / 2) as i32, rule)?;
    let sol = coupled.solve_mortar(0.0)?;

    let glued = model.glued()?;
    let space = glue_c0(&glued, uniform_spaces(&glued, degree, 1usize << level)?)?.apply_dirichlet(&glued);
    let k = assemble_stiffness(&glued, &space, &MaterialMap::uniform(glued.n_patches(), 1.0)?, rule)?;
    let j = assemble_load(&glued, &space, rule, |_, x| manufactured_rhs(x[0], x[1]))?;
    let u = solve_spd(&k, &j)?;
    let mono = SolutionField::new(&glued, &space, &u)?;

    let mut num = 0.0;
    let mut den = 0.0;
    let n_rt = coupled.rt.domain.n_patches();
    for (side, uc, offset) in [(&coupled.rt, &sol.u_rt, 0), (&coupled.st, &sol.u_st, n_rt)] {
        let field = side.field(uc)?;
        let all: Vec<usize> = (0..side.domain.n_patches()).collect();
        num += integrate(&side.domain, &side.space, &all, QuadratureRule::Extra(2), |q| {
            let (a, b) = q.reference;
            let d = field.eval_param(q.patch, a, b).0 - mono.eval_param(q.patch + offset, a, b).0;
            d * d * q.jxw
        })?;
        den += integrate(&side.domain, &side.space, &all, QuadratureRule::Extra(2), |q| {
            let (a, b) = q.reference;
            mono.eval_param(q.patch + offset, a, b).0.powi(2) * q.jxw
        })?;
    }
    Ok(MonolithicComparison {
        degree,
        level,
        trace_dofs: n_trace,
        n_gamma: coupled.harmonics.len(),
        relative_l2: (num / den).sqrt(),
    })
}

/// Deviation of the no-load solution at `alpha + pitch` from the anti-periodic image of the one at `alpha`.
#[derive(Clone, Debug, Serialize)]
pub struct RotationCheck {
    pub alpha: f64,
    /// Relative L2 distance of the rotor fields (equal in the rotor frame).
    pub rotor: f64,
    /// Relative L2 distance of the stator field from the negated one.
    pub stator: f64,
    /// `max |psi(alpha + pitch) + psi(alpha)| / max |psi(alpha)|`.
    pub flux_linkage: f64,
}

pub fn antiperiodic_rotation(problem: &MachineProblem, alpha: f64) -> Result<RotationCheck> {
    let pitch = problem.pole.model.pole_pitch();
    let c = &problem.coupled;
    let a = c.solve_mortar(alpha)?;
    let b = c.solve_mortar(alpha + pitch)?;
    let rel = |side: &Side, x: &[f64], y: &[f64]| -> Result<f64> {
        let m = assemble_mass(&side.domain, &side.space, c.rule)?;
        let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        Ok((energy(&m, &d) / energy(&m, y)).sqrt())
    };
    let neg: Vec<f64> = a.u_st.iter().map(|v| -v).collect();
    let pa = problem.flux_linkage(&a.u_st)?;
    let pb = problem.flux_linkage(&b.u_st)?;
    let scale = pa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = pa.iter().zip(&pb).fold(0.0f64, |m, (x, y)| m.max((x + y).abs()));
    Ok(RotationCheck {
        alpha,
        rotor: rel(&c.rt, &b.u_rt, &a.u_rt)?,
        stator: rel(&c.st, &b.u_st, &neg)?,
        flux_linkage: gap / scale,
    })
}

/// Largest relative deviation of air-gap quadrature points from the interface radius.
pub fn airgap_radius_deviation(trace: &TraceSpace, nq: usize) -> f64 {
    let r = trace.radius();
    trace
        .quadrature(nq)
        .iter()
        .map(|q| (q.point[0].hypot(q.point[1]) - r).abs() / r)
        .fold(0.0, f64::max)
}

/// Relative L2 norm of the manufactured solution over the ring, for scaling reports.
pub fn verification_norm(problem: &CoupledProblem) -> Result<f64> {
    let zero_rt = vec![0.0; problem.rt.n_dof()];
    let zero_st = vec![0.0; problem.st.n_dof()];
    let exact = |x: [f64; 2]| manufactured_solution(x[0], x[1]);
    let a = norm_l2(&problem.rt.field(&zero_rt)?, exact)?;
    let b = norm_l2(&problem.st.field(&zero_st)?, exact)?;
    Ok(a.hypot(b))
}
