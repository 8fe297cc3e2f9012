//! Incremental staggered scheme: for each load step, alternate an
//! elasticity solve at frozen damage with a damage solve at frozen
//! displacement until both iterate differences fall below tolerance.

pub mod damage;
pub mod linear;

use std::fmt;
use std::str::FromStr;

use crate::assembly::{AssemblyError, Constraints, Discretization};
use crate::material::{MaterialParams, VolumetricBranch};
use crate::sparse::{norm2, norm_inf, LinearSolveError};

pub use damage::{enforce_irreversibility, solve_box_qp, BoxQpMethod, BoxQpOutcome};
pub use linear::{solve_linear, LinearConfig, LinearSolver, LinearSolverKind};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("{stage} solve failed: {source}")]
    Linear {
        stage: &'static str,
        #[source]
        source: LinearSolveError,
    },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("non-finite {field} at load step {step}, staggered iteration {iteration}")]
    NumericalFailure {
        field: &'static str,
        step: usize,
        iteration: usize,
    },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("snapshot output failed: {0}")]
    Snapshot(String),
}

/// How the damage subproblem enforces `α_prev ≤ α ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DamageSolve {
    /// Exact minimisation over the box by an active-set method.
    #[default]
    BoundConstrained,
    /// Unconstrained solve followed by the nodal max/clamp projection.
    Projected,
}

/// When the lower bound `α ≥ α_prev` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Irreversibility {
    #[default]
    EveryIteration,
    StepEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvergenceNorm {
    /// `‖Δu‖₂ ≤ t_u`, `‖Δα‖∞ ≤ t_d`.
    #[default]
    Absolute,
    /// Differences divided by `‖u‖₂` and `max(‖α‖∞, 1)`.
    Relative,
}

macro_rules! keyword_enum {
    ($t:ty, $what:literal, $($name:literal => $v:expr),+) => {
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($v),)+
                    other => Err(format!("unknown {} '{}'", $what, other)),
                }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $v { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(DamageSolve, "damage solve", "bound_constrained" => DamageSolve::BoundConstrained, "projected" => DamageSolve::Projected);
keyword_enum!(Irreversibility, "irreversibility mode", "every_iteration" => Irreversibility::EveryIteration, "step_end" => Irreversibility::StepEnd);
keyword_enum!(ConvergenceNorm, "convergence norm", "absolute" => ConvergenceNorm::Absolute, "relative" => ConvergenceNorm::Relative);

#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredConfig {
    /// Displacement tolerance; `None` means `1e-6 ×` mesh diameter.
    pub tol_u: Option<f64>,
    pub tol_alpha: f64,
    pub max_iterations: usize,
    pub linear: LinearConfig,
    pub damage_solve: DamageSolve,
    pub irreversibility: Irreversibility,
    pub norm: ConvergenceNorm,
    /// Elasticity re-solves allowed while the tension/compression pattern
    /// at quadrature points keeps changing. 1 gives the plain lagged sign.
    pub sign_passes: usize,
}

impl Default for StaggeredConfig {
    fn default() -> Self {
        StaggeredConfig {
            tol_u: None,
            tol_alpha: 1e-4,
            max_iterations: 500,
            linear: LinearConfig::default(),
            damage_solve: DamageSolve::default(),
            irreversibility: Irreversibility::default(),
            norm: ConvergenceNorm::default(),
            sign_passes: 10,
        }
    }
}

impl StaggeredConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.to_string()));
        if let Some(t) = self.tol_u {
            if !(t > 0.0 && t.is_finite()) {
                return bad("tol_u must be positive");
            }
        }
        if !(self.tol_alpha > 0.0 && self.tol_alpha.is_finite()) {
            return bad("tol_alpha must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.sign_passes == 0 {
            return bad("sign_passes must be at least 1");
        }
        if !(self.linear.tolerance > 0.0 && self.linear.tolerance < 1.0) {
            return bad("linear tolerance must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One Dirichlet prescription: `component` of every node of `set` equals
/// `factor × applied`, where `applied` is the step's load parameter (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct Prescription {
    pub set: String,
    pub component: usize,
    pub factor: f64,
}

impl Prescription {
    pub fn fixed(set: &str, component: usize) -> Self {
        Prescription {
            set: set.to_string(),
            component,
            factor: 0.0,
        }
    }

    pub fn driven(set: &str, component: usize, factor: f64) -> Self {
        Prescription {
            set: set.to_string(),
            component,
            factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub prescriptions: Vec<Prescription>,
    /// Load parameter of each step, in order.
    pub steps: Vec<f64>,
    /// Boundary set and component whose reaction is recorded.
    pub reaction: Option<(String, usize)>,
    /// Snapshot every n-th step (0 disables snapshots).
    pub snapshot_every: usize,
}

impl LoadProgram {
    pub fn new(prescriptions: Vec<Prescription>, steps: Vec<f64>) -> Result<Self, SolverError> {
        if steps.iter().any(|s| !s.is_finite()) {
            return Err(SolverError::Config("load steps must be finite".into()));
        }
        if prescriptions.iter().any(|p| !p.factor.is_finite()) {
            return Err(SolverError::Config(
                "prescription factors must be finite".into(),
            ));
        }
        let reaction = prescriptions
            .iter()
            .find(|p| p.factor != 0.0)
            .map(|p| (p.set.clone(), p.component));
        Ok(LoadProgram {
            prescriptions,
            steps,
            reaction,
            snapshot_every: 0,
        })
    }

    /// Steps `increment, 2·increment, …, final`.
    pub fn monotonic(
        prescriptions: Vec<Prescription>,
        increment: f64,
        final_value: f64,
    ) -> Result<Self, SolverError> {
        if !(increment > 0.0) || !final_value.is_finite() || final_value < 0.0 {
            return Err(SolverError::Config(
                "increment must be positive and final value non-negative".into(),
            ));
        }
        let n = (final_value / increment).round() as usize;
        if (n as f64 * increment - final_value).abs() > 1e-9 * final_value.max(increment) {
            return Err(SolverError::Config(format!(
                "final value {final_value} is not a whole number of increments {increment}"
            )));
        }
        let steps = (1..=n).map(|k| final_value * k as f64 / n as f64).collect();
        Self::new(prescriptions, steps)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Energies in N·mm (per mm of thickness in 2D) and the reaction in N.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub elastic: f64,
    pub dissipated: f64,
    pub total: f64,
    pub reaction: f64,
}

/// `E = ∫ f(α_h)Ψ₀⁺ + Ψ₀⁻`, `D = ∫ w(α_h) + ½η²|∇α_h|²`; reaction left at 0.
pub fn compute_energies(
    disc: &Discretization,
    params: &MaterialParams,
    u: &[f64],
    alpha: &[f64],
) -> Result<EnergyReport, AssemblyError> {
    let per = disc.element_energies(params, u, alpha)?;
    let (mut e, mut d) = (0.0, 0.0);
    for (pe, pd) in per {
        e += pe;
        d += pd;
    }
    Ok(EnergyReport {
        elastic: e,
        dissipated: d,
        total: e + d,
        reaction: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: usize,
    pub applied: f64,
    pub energies: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    /// Total energy after each half-step (elasticity, damage, elasticity, …).
    pub half_step_energies: Vec<f64>,
    /// Nodes whose unprojected damage exceeded 1 (projected mode), or nodes
    /// held at the upper bound (bound-constrained mode), summed over
    /// iterations.
    pub upper_bound_hits: usize,
    /// Damage solves that needed the Gauss-Seidel fallback.
    pub fallback_solves: usize,
    /// Elasticity solves whose sign pattern had not settled after the
    /// allowed passes.
    pub unsettled_signs: usize,
}

/// Owned state of a load-program run.
#[derive(Debug, Clone)]
pub struct Simulation {
    disc: Discretization,
    params: MaterialParams,
    program: LoadProgram,
    config: StaggeredConfig,
    linear: LinearSolver,
    u: Vec<f64>,
    alpha: Vec<f64>,
    tol_u: f64,
    next_step: usize,
    history: Vec<StepRecord>,
}

impl Simulation {
    pub fn new(
        disc: Discretization,
        params: MaterialParams,
        program: LoadProgram,
        config: StaggeredConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        for p in &program.prescriptions {
            disc.mesh()
                .boundary_set(&p.set)
                .map_err(AssemblyError::from)?;
            if p.component >= disc.dim() {
                return Err(AssemblyError::Component {
                    component: p.component,
                    components: disc.dim(),
                }
                .into());
            }
        }
        if let Some((set, _)) = &program.reaction {
            disc.mesh().boundary_set(set).map_err(AssemblyError::from)?;
        }
        let tol_u = config.tol_u.unwrap_or(1e-6 * disc.mesh().diameter());
        let u = vec![0.0; disc.num_displacement_dofs()];
        let alpha = vec![0.0; disc.mesh().num_nodes()];
        Ok(Simulation {
            linear: LinearSolver::new(config.linear),
            disc,
            params,
            program,
            config,
            u,
            alpha,
            tol_u,
            next_step: 0,
            history: Vec::new(),
        })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn program(&self) -> &LoadProgram {
        &self.program
    }

    pub fn config(&self) -> &StaggeredConfig {
        &self.config
    }

    pub fn displacement(&self) -> &[f64] {
        &self.u
    }

    pub fn damage(&self) -> &[f64] {
        &self.alpha
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.next_step >= self.program.steps.len()
    }

    pub fn linear_solver(&self) -> &LinearSolver {
        &self.linear
    }

    /// Replaces the state; lengths must match the mesh.
    pub fn set_state(&mut self, u: Vec<f64>, alpha: Vec<f64>) -> Result<(), SolverError> {
        if u.len() != self.u.len() {
            return Err(AssemblyError::Size {
                field: "displacement",
                expected: self.u.len(),
                got: u.len(),
            }
            .into());
        }
        if alpha.len() != self.alpha.len() {
            return Err(AssemblyError::Size {
                field: "damage",
                expected: self.alpha.len(),
                got: alpha.len(),
            }
            .into());
        }
        self.u = u;
        self.alpha = alpha;
        Ok(())
    }

    pub fn constraints(&self, applied: f64) -> Result<Constraints, SolverError> {
        let mut c = Constraints::new();
        let dofs = self.disc.displacement_dofs();
        for p in &self.program.prescriptions {
            c.add_set(
                self.disc.mesh(),
                dofs,
                &p.set,
                p.component,
                p.factor * applied,
            )?;
        }
        Ok(c)
    }

    pub fn energies(&self) -> Result<EnergyReport, SolverError> {
        let mut r = compute_energies(&self.disc, &self.params, &self.u, &self.alpha)?;
        r.reaction = self.reaction()?;
        Ok(r)
    }

    /// Reaction on the program's recorded set and component (0 if none).
    pub fn reaction(&self) -> Result<f64, SolverError> {
        match &self.program.reaction {
            Some((set, comp)) => {
                Ok(self
                    .disc
                    .reaction_force(&self.params, &self.alpha, &self.u, set, *comp)?)
            }
            None => Ok(0.0),
        }
    }

    /// Runs the next step of the program; `None` when the program is done.
    pub fn advance(&mut self) -> Result<Option<&StepRecord>, SolverError> {
        if self.is_finished() {
            return Ok(None);
        }
        let applied = self.program.steps[self.next_step];
        let record = self.staggered_step(applied)?;
        self.next_step += 1;
        self.history.push(record);
        Ok(self.history.last())
    }

    /// One load step of the staggered scheme from the current state.
    pub fn staggered_step(&mut self, applied: f64) -> Result<StepRecord, SolverError> {
        let step = self.next_step + 1;
        let constraints = self.constraints(applied)?;
        let previous = self.alpha.clone();
        let n_nodes = previous.len();
        let upper = vec![1.0; n_nodes];
        let zero = vec![0.0; n_nodes];
        let lower: &[f64] = match self.config.irreversibility {
            Irreversibility::EveryIteration => &previous,
            Irreversibility::StepEnd => &zero,
        };

        let mut u = self.u.clone();
        let mut alpha = self.alpha.clone();
        let mut record = StepRecord {
            step,
            applied,
            energies: EnergyReport::default(),
            iterations: 0,
            converged: false,
            half_step_energies: Vec::new(),
            upper_bound_hits: 0,
            fallback_solves: 0,
            unsettled_signs: 0,
        };

        for k in 1..=self.config.max_iterations {
            record.iterations = k;
            let (u_new, settled) = self.solve_elasticity(&alpha, &u, &constraints)?;
            if !settled {
                record.unsettled_signs += 1;
            }
            check_finite(&u_new, "displacement", step, k)?;
            record
                .half_step_energies
                .push(self.total_energy(&u_new, &alpha)?);

            let damage_sys = self.disc.assemble_damage(&self.params, &u_new, &alpha)?;
            let alpha_new = match self.config.damage_solve {
                DamageSolve::BoundConstrained => {
                    let out = solve_box_qp(&damage_sys, lower, &upper, &alpha, &mut self.linear)
                        .map_err(|source| SolverError::Linear {
                            stage: "damage",
                            source,
                        })?;
                    if out.method == BoxQpMethod::GaussSeidel {
                        record.fallback_solves += 1;
                    }
                    record.upper_bound_hits += out.at_upper;
                    out.x
                }
                DamageSolve::Projected => {
                    match self
                        .linear
                        .solve(&damage_sys.matrix, &damage_sys.rhs, Some(&alpha))
                    {
                        Ok(candidate) => {
                            check_finite(&candidate, "damage", step, k)?;
                            let (a, clamped) = enforce_irreversibility(&candidate, lower);
                            record.upper_bound_hits += clamped;
                            a
                        }
                        // No tensile energy anywhere leaves only the gradient term,
                        // which is singular: no unconstrained minimizer to project.
                        Err(
                            LinearSolveError::Singular { .. }
                            | LinearSolveError::Breakdown { .. }
                            | LinearSolveError::NotConverged { .. },
                        ) => {
                            let out =
                                solve_box_qp(&damage_sys, lower, &upper, &alpha, &mut self.linear)
                                    .map_err(|source| SolverError::Linear {
                                        stage: "damage",
                                        source,
                                    })?;
                            record.fallback_solves += 1;
                            record.upper_bound_hits += out.at_upper;
                            out.x
                        }
                        Err(source) => {
                            return Err(SolverError::Linear {
                                stage: "damage",
                                source,
                            })
                        }
                    }
                }
            };
            check_finite(&alpha_new, "damage", step, k)?;
            record
                .half_step_energies
                .push(self.total_energy(&u_new, &alpha_new)?);

            let du: Vec<f64> = u_new.iter().zip(&u).map(|(a, b)| a - b).collect();
            let da: Vec<f64> = alpha_new.iter().zip(&alpha).map(|(a, b)| a - b).collect();
            let (mut eu, mut ea) = (norm2(&du), norm_inf(&da));
            if self.config.norm == ConvergenceNorm::Relative {
                eu /= norm2(&u_new).max(f64::MIN_POSITIVE);
                ea /= norm_inf(&alpha_new).max(1.0);
            }
            u = u_new;
            alpha = alpha_new;
            if eu <= self.tol_u && ea <= self.config.tol_alpha {
                record.converged = true;
                break;
            }
        }

        if self.config.irreversibility == Irreversibility::StepEnd {
            let (a, clamped) = enforce_irreversibility(&alpha, &previous);
            record.upper_bound_hits += clamped;
            alpha = a;
        }
        self.u = u;
        self.alpha = alpha;
        record.energies = self.energies()?;
        Ok(record)
    }

    fn total_energy(&self, u: &[f64], alpha: &[f64]) -> Result<f64, SolverError> {
        Ok(compute_energies(&self.disc, &self.params, u, alpha)?.total)
    }

    /// Minimises the energy in `u` at frozen damage. The tension/compression
    /// branch of each quadrature point starts from `u_guess` and is updated
    /// from the solution until it stops changing or the passes run out.
    fn solve_elasticity(
        &mut self,
        alpha: &[f64],
        u_guess: &[f64],
        constraints: &Constraints,
    ) -> Result<(Vec<f64>, bool), SolverError> {
        let mut branches: Vec<VolumetricBranch> =
            self.disc
                .volumetric_branches(&self.params, u_guess, alpha)?;
        let mut guess = u_guess.to_vec();
        constraints.impose_on(&mut guess);
        for _ in 0..self.config.sign_passes {
            let mut sys =
                self.disc
                    .assemble_elasticity_with_branches(&self.params, alpha, &branches)?;
            sys.apply_dirichlet(constraints);
            let x = self
                .linear
                .solve(&sys.matrix, &sys.rhs, Some(&guess))
                .map_err(|source| SolverError::Linear {
                    stage: "elasticity",
                    source,
                })?;
            let next = self.disc.volumetric_branches(&self.params, &x, alpha)?;
            if next == branches {
                return Ok((x, true));
            }
            branches = next;
            guess = x;
        }
        Ok((guess, false))
    }
}

fn check_finite(
    v: &[f64],
    field: &'static str,
    step: usize,
    iteration: usize,
) -> Result<(), SolverError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::NumericalFailure {
            field,
            step,
            iteration,
        })
    }
}

/// Failure of a load program after `history.len()` completed steps.
#[derive(Debug, thiserror::Error)]
#[error("load step {} failed: {source}", .history.len() + 1)]
pub struct RunError {
    pub history: Vec<StepRecord>,
    #[source]
    pub source: SolverError,
}

/// Runs every step of `program` from the pristine state. `snapshot` is called
/// after each step whose number is a multiple of `program.snapshot_every`.
pub fn run_load_program<F>(
    disc: Discretization,
    params: MaterialParams,
    program: LoadProgram,
    config: StaggeredConfig,
    mut snapshot: F,
) -> Result<Simulation, RunError>
where
    F: FnMut(&Simulation, &StepRecord) -> Result<(), String>,
{
    let mut sim = Simulation::new(disc, params, program, config).map_err(|source| RunError {
        history: Vec::new(),
        source,
    })?;
    loop {
        let every = sim.program.snapshot_every;
        let rec = match sim.advance() {
            Ok(Some(r)) => r.clone(),
            Ok(None) => break,
            Err(source) => {
                return Err(RunError {
                    history: sim.history.clone(),
                    source,
                })
            }
        };
        if every > 0 && rec.step % every == 0 {
            snapshot(&sim, &rec).map_err(|m| RunError {
                history: sim.history.clone(),
                source: SolverError::Snapshot(m),
            })?;
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::ElementKind;
    use crate::material::{DissipationModel, PlaneModel};
    use crate::mesh::Mesh;
    use std::collections::BTreeMap;

    fn params() -> MaterialParams {
        MaterialParams::new(121030.0, 0.227, 75.94, 0.052, DissipationModel::Threshold).unwrap()
    }

    fn unit_quad() -> Discretization {
        let mut sets = BTreeMap::new();
        sets.insert("bottom".to_string(), vec![0, 1]);
        sets.insert("top".to_string(), vec![2, 3]);
        sets.insert("left".to_string(), vec![0, 3]);
        sets.insert("right".to_string(), vec![1, 2]);
        let mesh = Mesh::new(
            ElementKind::Quad4,
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            vec![0, 1, 2, 3],
            sets,
        )
        .unwrap();
        Discretization::new(mesh, PlaneModel::Strain).unwrap()
    }

    /// Bottom rollers, left rollers, top pulled in y: homogeneous uniaxial
    /// stress in-plane.
    fn uniaxial(steps: Vec<f64>) -> LoadProgram {
        LoadProgram::new(
            vec![
                Prescription::driven("top", 1, 1.0),
                Prescription::fixed("bottom", 1),
                Prescription::fixed("left", 0),
            ],
            steps,
        )
        .unwrap()
    }

    #[test]
    fn monotonic_program_steps() {
        let p =
            LoadProgram::monotonic(vec![Prescription::driven("top", 1, 1.0)], 1e-4, 6e-3).unwrap();
        assert_eq!(p.len(), 60);
        assert!((p.steps[59] - 6e-3).abs() < 1e-18);
        let p = LoadProgram::monotonic(vec![], 1e-5, 12.7e-3).unwrap();
        assert_eq!(p.len(), 1270);
        assert!(LoadProgram::monotonic(vec![], 3e-4, 1e-3).is_err());
        assert_eq!(p.reaction, None);
    }

    #[test]
    fn zero_load_is_a_fixed_point() {
        let mut sim = Simulation::new(
            unit_quad(),
            params(),
            uniaxial(vec![0.0]),
            StaggeredConfig::default(),
        )
        .unwrap();
        let rec = sim.advance().unwrap().unwrap().clone();
        assert_eq!(rec.iterations, 1);
        assert!(rec.converged);
        assert!(sim.displacement().iter().all(|v| *v == 0.0));
        assert!(sim.damage().iter().all(|v| *v == 0.0));
        assert_eq!(rec.energies.total, 0.0);
    }

    #[test]
    fn projected_mode_survives_zero_tensile_energy() {
        let program = LoadProgram::new(
            vec![
                Prescription::driven("top", 1, -1.0),
                Prescription::driven("right", 0, -1.0),
                Prescription::fixed("bottom", 1),
                Prescription::fixed("left", 0),
            ],
            vec![0.0, 1e-3, 2e-3],
        )
        .unwrap();
        for linear_solver in [LinearSolverKind::Pcg, LinearSolverKind::Direct] {
            let mut config = StaggeredConfig {
                damage_solve: DamageSolve::Projected,
                ..StaggeredConfig::default()
            };
            config.linear.kind = linear_solver;
            let mut sim = Simulation::new(unit_quad(), params(), program.clone(), config).unwrap();
            while sim.advance().unwrap().is_some() {}
            assert!(sim.damage().iter().all(|v| *v == 0.0));
            assert!(sim.history().iter().all(|r| r.converged));
        }
    }

    #[test]
    fn empty_program_has_empty_history() {
        let sim = run_load_program(
            unit_quad(),
            params(),
            uniaxial(vec![]),
            StaggeredConfig::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!(sim.history().is_empty());
    }

    #[test]
    fn below_threshold_matches_elastic_solve() {
        let d = 1e-5;
        let mut sim = Simulation::new(
            unit_quad(),
            params(),
            uniaxial(vec![d]),
            StaggeredConfig::default(),
        )
        .unwrap();
        sim.advance().unwrap();
        assert!(sim.damage().iter().all(|v| *v == 0.0));
        let p = params();
        let disc = unit_quad();
        let mut sys = disc.assemble_elasticity(&p, &[0.0; 4], &[0.0; 8]).unwrap();
        sys.apply_dirichlet(&sim.constraints(d).unwrap());
        let x = solve_linear(
            &sys,
            &LinearConfig {
                kind: LinearSolverKind::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in x.iter().zip(sim.displacement()) {
            assert!((a - b).abs() < 1e-12);
        }
        // plane-strain uniaxial stress: ε_x = -λ/(λ+2μ) ε_y
        let (l, m) = (p.lame_lambda(), p.shear_modulus());
        assert!((sim.displacement()[2] + l / (l + 2.0 * m) * d).abs() < 1e-12);
    }

    /// Homogeneous state: fixed point of `(1-α) s(α) = w₀` where the strain
    /// is held fixed by prescribing all nodes.
    #[test]
    fn homogeneous_damage_reaches_half() {
        let p = params();
        // ε = diag(e, e) with 2Ψ⁺ = 2w₀ at α = 0 (tension: 2Ψ⁺ = K tr² + 2μ|dev|²)
        let dev2 = 2.0 * (1.0f64 / 3.0).powi(2) + (2.0f64 / 3.0).powi(2);
        let e = (2.0 * p.w0() / (p.bulk_modulus() * 4.0 + 2.0 * p.shear_modulus() * dev2)).sqrt();
        let program = LoadProgram::new(
            vec![
                Prescription::fixed("left", 0),
                Prescription::fixed("bottom", 1),
                Prescription::driven("right", 0, 1.0),
                Prescription::driven("top", 1, 1.0),
            ],
            vec![e],
        )
        .unwrap();
        let mut sim = Simulation::new(unit_quad(), p, program, StaggeredConfig::default()).unwrap();
        let rec = sim.advance().unwrap().unwrap().clone();
        assert!(rec.converged);
        for a in sim.damage() {
            assert!((a - 0.5).abs() < 1e-4, "{a}");
        }
    }

    #[test]
    fn unknown_set_is_rejected() {
        let program = LoadProgram::new(vec![Prescription::fixed("nowhere", 0)], vec![0.0]).unwrap();
        assert!(
            Simulation::new(unit_quad(), params(), program, StaggeredConfig::default()).is_err()
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = StaggeredConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = StaggeredConfig {
            tol_alpha: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn keywords_round_trip() {
        for d in [DamageSolve::BoundConstrained, DamageSolve::Projected] {
            assert_eq!(d.to_string().parse::<DamageSolve>().unwrap(), d);
        }
        for i in [Irreversibility::EveryIteration, Irreversibility::StepEnd] {
            assert_eq!(i.to_string().parse::<Irreversibility>().unwrap(), i);
        }
        assert!("l1".parse::<ConvergenceNorm>().is_err());
    }

    #[test]
    fn energies_of_affine_field() {
        let p = params();
        let disc = unit_quad();
        assert_eq!(
            compute_energies(&disc, &p, &[0.0; 8], &[0.0; 4])
                .unwrap()
                .total,
            0.0
        );
        let (ex, ey, g) = (1e-4, -3e-5, 2e-5);
        let u: Vec<f64> = disc
            .mesh()
            .nodes()
            .iter()
            .flat_map(|x| [ex * x[0] + g * x[1], ey * x[1]])
            .collect();
        let r = compute_energies(&disc, &p, &u, &[0.0; 4]).unwrap();
        let (l, m) = (p.lame_lambda(), p.shear_modulus());
        let oracle = 0.5 * (l * (ex + ey).powi(2) + 2.0 * m * (ex * ex + ey * ey) + m * g * g);
        assert!((r.elastic - oracle).abs() < 1e-12 * oracle);
        let c = 0.3;
        let r = compute_energies(&disc, &p, &[0.0; 8], &[c; 4]).unwrap();
        assert!((r.dissipated - p.w0() * c).abs() < 1e-12);
    }
}
