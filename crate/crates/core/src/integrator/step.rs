//! One-step schemes and the position/velocity projections that follow them.

use std::time::{Duration, Instant};

use crate::contact::{
    ContactExprs, ContactProfiles, ContactSymbols, HertzTable, KalkerTable, Material, PatchError,
};
use crate::dynamics::{AssembledDynamics, Dims, Evaluator, Function, SymbolIndex};
use crate::symcore::SymbolId;

use super::linalg::{FullPivLu, LuError, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Creep damping implicit, everything else explicit.
    Imex,
    /// Forward Euler on the full (explicit creep) equations.
    ExplicitEuler,
    /// Explicit midpoint (second order).
    ExplicitMidpoint,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Imex => "imex",
            Scheme::ExplicitEuler => "explicit-euler",
            Scheme::ExplicitMidpoint => "explicit-midpoint",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Scheme::Imex,
            Scheme::ExplicitEuler,
            Scheme::ExplicitMidpoint,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Newton-Raphson tolerance on the position constraints, m.
    pub tol: f64,
    pub max_iters: u32,
    pub scheme: Scheme,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tol: 1e-6,
            max_iters: 10,
            scheme: Scheme::Imex,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("singular {stage} matrix: {source}")]
    Singular {
        stage: &'static str,
        #[source]
        source: LuError,
    },
    #[error("{stage} projection did not converge: residual {residual:e} after {iters} iterations")]
    NoConvergence {
        stage: &'static str,
        residual: f64,
        iters: u32,
    },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Contact(#[from] PatchError),
}

/// Work items of a step, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Contact,
    Lookup,
    Evaluate,
    DynamicsSolution,
    TimeIntegration,
    ConstraintEvaluation,
    ProjectionSolution,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Contact,
        Phase::Lookup,
        Phase::Evaluate,
        Phase::DynamicsSolution,
        Phase::TimeIntegration,
        Phase::ConstraintEvaluation,
        Phase::ProjectionSolution,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Contact => "Contact area, look up Kalker coeffs. and evaluate Kalker blocks",
            Phase::Lookup => "Look up wheel profile, rail profile and railway spline coeffs.",
            Phase::Evaluate => "Evaluate M, delta and gamma_n",
            Phase::DynamicsSolution => "Dynamics solution => qdot, lambda",
            Phase::TimeIntegration => "Time integration => q",
            Phase::ConstraintEvaluation => {
                "Evaluate phi_n, phi_d, phidot_n_qdot, phidot_d_qdot, phidot_d_sdot and beta_n"
            }
            Phase::ProjectionSolution => "Projection solution => q, qdot, s, sdot",
        }
    }
}

/// Accumulated wall time per phase.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseTimes {
    pub total: [Duration; 7],
    pub steps: u64,
}

impl PhaseTimes {
    /// Mean per step, microseconds.
    pub fn mean_us(&self, p: Phase) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        self.total[p as usize].as_secs_f64() * 1e6 / self.steps as f64
    }

    pub fn mean_total_us(&self) -> f64 {
        Phase::ALL.iter().map(|&p| self.mean_us(p)).sum()
    }
}

struct Lap(Instant);

impl Lap {
    fn start() -> Self {
        Lap(Instant::now())
    }

    fn lap(&mut self, times: &mut PhaseTimes, p: Phase) {
        let now = Instant::now();
        times.total[p as usize] += now - self.0;
        self.0 = now;
    }
}

/// What happened in one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Linear solves in the s- and q-projections.
    pub s_iters: u32,
    pub q_iters: u32,
    /// Position constraint residuals after projection.
    pub phi_n: f64,
    pub phi_d: f64,
    /// Velocity constraint residuals after projection.
    pub vel_n: f64,
    pub vel_d: f64,
    /// A surface parameter left its spline domain.
    pub profile_clamped: bool,
    /// A Kalker table lookup was clamped.
    pub table_clamped: bool,
    /// A creep force was capped at the friction limit.
    pub saturated: bool,
    /// Contacts with a tensile normal force.
    pub separated: usize,
}

/// Compiled functions plus the numeric data they need at run time.
#[derive(Clone, Debug)]
pub struct Plant {
    pub eval: Evaluator,
    pub profiles: Vec<ContactProfiles>,
    pub contact_symbols: Vec<ContactSymbols>,
    pub hertz: HertzTable,
    pub kalker: KalkerTable,
    pub material: Material,
    pub v_min: f64,
}

impl Plant {
    pub fn new(
        dynamics: &AssembledDynamics,
        contacts: &[ContactExprs],
        profiles: Vec<ContactProfiles>,
        material: Material,
        v_min: f64,
    ) -> Self {
        assert_eq!(contacts.len(), profiles.len());
        Self {
            eval: dynamics.evaluator(),
            profiles,
            contact_symbols: contacts.iter().map(|c| c.sym.clone()).collect(),
            hertz: HertzTable::bundled(),
            kalker: KalkerTable::bundled(),
            material,
            v_min,
        }
    }

    pub fn dims(&self) -> Dims {
        self.eval.dims
    }

    /// Loads spline segments for the current surface parameters.
    pub fn load_profiles(&self, x: &mut [f64]) -> bool {
        let mut clamped = false;
        for (p, s) in self.profiles.iter().zip(&self.contact_symbols) {
            clamped |= p.load(s, x);
        }
        clamped
    }

    /// Contact patches and creep forces for the normal loads `normal`.
    pub fn update_contacts(&mut self, x: &mut [f64], normal: &[f64]) -> Result<(), PatchError> {
        let st = self.eval.update_contacts(
            x,
            normal,
            &self.hertz,
            &self.kalker,
            &self.material,
            self.v_min,
        )?;
        if st.non_finite {
            // surfaced by the caller's finiteness checks on the forces
            for s in self.eval.symbols.forces.iter().flatten() {
                x[s.index()] = f64::NAN;
            }
        }
        Ok(())
    }
}

/// Symbol values plus the normal loads carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub x: Vec<f64>,
    /// Normal force per contact, N (compression positive).
    pub normal: Vec<f64>,
}

impl SolverState {
    pub fn get(&self, id: SymbolId) -> f64 {
        self.x[id.index()]
    }

    pub fn set(&mut self, id: SymbolId, v: f64) {
        self.x[id.index()] = v;
    }
}

fn gather(ids: &[SymbolId], x: &[f64], out: &mut [f64]) {
    for (o, s) in out.iter_mut().zip(ids) {
        *o = x[s.index()];
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// IMEX velocity system
/// `[M + Δt·C^K, Jᵀ; J, 0]·[q̇⁺; Δt·λ] = [Δt·δ^NK + M·q̇; Δt·γ + J·q̇]`
/// (impulse unknowns keep the pivots on the scale of the mass matrix).
/// `mass`, `ck` are `nq×nq` and `jac` is `nc×nq`, all row-major.
#[allow(clippy::too_many_arguments)]
pub fn imex_system(
    mass: &[f64],
    ck: &[f64],
    delta_nk: &[f64],
    jac: &[f64],
    gamma: &[f64],
    qdot: &[f64],
    dt: f64,
    a: &mut Matrix,
    rhs: &mut [f64],
) {
    let nq = qdot.len();
    let nc = gamma.len();
    a.fill(0.0);
    for i in 0..nq {
        let mut mv = 0.0;
        for j in 0..nq {
            let mij = mass[i * nq + j];
            a[(i, j)] = mij + dt * ck[i * nq + j];
            mv += mij * qdot[j];
        }
        rhs[i] = dt * delta_nk[i] + mv;
    }
    for c in 0..nc {
        let mut jv = 0.0;
        for j in 0..nq {
            let v = jac[c * nq + j];
            a[(nq + c, j)] = v;
            a[(j, nq + c)] = v;
            jv += v * qdot[j];
        }
        rhs[nq + c] = dt * gamma[c] + jv;
    }
}

/// Stepper with every buffer preallocated.
#[derive(Clone, Debug)]
pub struct Integrator {
    pub plant: Plant,
    pub config: StepConfig,
    pub times: PhaseTimes,
    dims: Dims,
    sym: SymbolIndex,
    a: Matrix,
    lu_a: FullPivLu,
    rhs: Vec<f64>,
    sol: Vec<f64>,
    ck: Matrix,
    jnq: Matrix,
    lu_nq: FullPivLu,
    jds: Matrix,
    lu_ds: FullPivLu,
    nq_cached: bool,
    ds_cached: bool,
    vq: Vec<f64>,
    vq2: Vec<f64>,
    vs: Vec<f64>,
    rc: Vec<f64>,
    rs: Vec<f64>,
    ts: Vec<f64>,
    x0: Vec<f64>,
}

impl Integrator {
    pub fn new(plant: Plant, config: StepConfig) -> Self {
        let dims = plant.dims();
        let Dims { nq, ns, nc } = dims;
        let n = nq + nc;
        Self {
            sym: plant.eval.symbols.clone(),
            x0: vec![0.0; plant.eval.symbols.n_symbols],
            plant,
            config,
            times: PhaseTimes::default(),
            dims,
            a: Matrix::zeros(n, n),
            lu_a: FullPivLu::new(n, n),
            rhs: vec![0.0; n],
            sol: vec![0.0; n],
            ck: Matrix::zeros(nq, nq),
            jnq: Matrix::zeros(nc, nq),
            lu_nq: FullPivLu::new(nc, nq),
            jds: Matrix::zeros(ns, ns),
            lu_ds: FullPivLu::new(ns, ns),
            nq_cached: false,
            ds_cached: false,
            vq: vec![0.0; nq],
            vq2: vec![0.0; nq],
            vs: vec![0.0; ns],
            rc: vec![0.0; nc],
            rs: vec![0.0; ns],
            ts: vec![0.0; nq.max(ns)],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn symbols(&self) -> &SymbolIndex {
        &self.sym
    }

    /// Coordinates of the last q-partition: `(dependent, independent)`.
    pub fn partition(&self) -> Option<(&[usize], &[usize])> {
        self.nq_cached
            .then(|| (self.lu_nq.dependent(), self.lu_nq.independent()))
    }

    /// Makes `x` consistent (positions, then velocities) and computes the
    /// static normal loads with zero creep forces.
    pub fn initialize(&mut self, x: Vec<f64>, t: f64) -> Result<SolverState, StepError> {
        assert_eq!(x.len(), self.sym.n_symbols);
        let mut st = SolverState {
            t,
            x,
            normal: vec![0.0; self.dims.nc],
        };
        self.nq_cached = false;
        self.ds_cached = false;
        let mut rep = StepReport::default();
        self.project(&mut st.x, &mut rep)?;
        self.plant.eval.clear_forces(&mut st.x);
        self.plant.load_profiles(&mut st.x);
        self.accelerations(&st.x, "initial dynamics")?;
        let nq = self.dims.nq;
        for (n, l) in st.normal.iter_mut().zip(&self.sol[nq..]) {
            *n = -l;
        }
        Ok(st)
    }

    /// Advances `st` by one step of the configured scheme.
    pub fn step(&mut self, st: &mut SolverState) -> Result<StepReport, StepError> {
        let mut rep = StepReport::default();
        match self.config.scheme {
            Scheme::Imex => self.imex(st, &mut rep)?,
            Scheme::ExplicitEuler => self.explicit_euler(st, &mut rep)?,
            Scheme::ExplicitMidpoint => self.explicit_midpoint(st, &mut rep)?,
        }
        self.project_inner(&mut st.x, &mut rep, true)?;
        st.t += self.config.dt;
        self.times.steps += 1;
        rep.separated = st.normal.iter().filter(|&&n| n < 0.0).count();
        Ok(rep)
    }

    fn contacts(
        &mut self,
        x: &mut [f64],
        normal: &[f64],
        rep: &mut StepReport,
        lap: &mut Lap,
    ) -> Result<(), StepError> {
        rep.profile_clamped |= self.plant.load_profiles(x);
        lap.lap(&mut self.times, Phase::Lookup);
        self.plant.update_contacts(x, normal)?;
        rep.table_clamped |= self.plant.eval.contacts.iter().any(|c| c.table_clamped);
        rep.saturated |= self.plant.eval.contacts.iter().any(|c| c.saturated);
        Ok(())
    }

    fn imex(&mut self, st: &mut SolverState, rep: &mut StepReport) -> Result<(), StepError> {
        let nq = self.dims.nq;
        let dt = self.config.dt;
        let x = &mut st.x;
        let mut lap = Lap::start();
        self.contacts(x, &st.normal, rep, &mut lap)?;
        let mut bad = self.plant.eval.kalker_damping(x, &mut self.ck).non_finite;
        lap.lap(&mut self.times, Phase::Contact);

        let ev = &mut self.plant.eval;
        for f in [
            Function::MassMatrix,
            Function::DeltaNk,
            Function::JacNq,
            Function::GammaN,
        ] {
            bad |= ev.run(f, x).non_finite;
        }
        if bad {
            return Err(StepError::NonFinite("model functions"));
        }
        lap.lap(&mut self.times, Phase::Evaluate);

        gather(&self.sym.dq, x, &mut self.vq);
        let (mm, dnk, jn, gam) = (
            ev.out(Function::MassMatrix),
            ev.out(Function::DeltaNk),
            ev.out(Function::JacNq),
            ev.out(Function::GammaN),
        );
        imex_system(
            mm,
            self.ck.as_slice(),
            dnk,
            jn,
            gam,
            &self.vq,
            dt,
            &mut self.a,
            &mut self.rhs,
        );
        self.lu_a
            .factor(&self.a)
            .map_err(|source| StepError::Singular {
                stage: "IMEX",
                source,
            })?;
        self.lu_a.solve(&self.rhs, &mut self.sol);
        if !all_finite(&self.sol) {
            return Err(StepError::NonFinite("IMEX solution"));
        }
        lap.lap(&mut self.times, Phase::DynamicsSolution);

        for (k, &s) in self.sym.q.iter().enumerate() {
            let v1 = self.sol[k];
            x[s.index()] += 0.5 * (v1 + self.vq[k]) * dt;
            x[self.sym.dq[k].index()] = v1;
        }
        self.advance_s(x, dt);
        for (n, l) in st.normal.iter_mut().zip(&self.sol[nq..]) {
            *n = -l / dt;
        }
        lap.lap(&mut self.times, Phase::TimeIntegration);
        Ok(())
    }

    fn advance_s(&self, x: &mut [f64], dt: f64) {
        for (s, ds) in self.sym.s.iter().zip(&self.sym.ds) {
            x[s.index()] += x[ds.index()] * dt;
        }
    }

    /// ECCF solve at `x` with the creep forces stored in `x`; leaves
    /// `[q̈; λ]` in `self.sol`.
    fn accelerations(&mut self, x: &[f64], stage: &'static str) -> Result<(), StepError> {
        let st = self
            .plant
            .eval
            .reduced_system(x, &mut self.a, &mut self.rhs);
        if st.non_finite {
            return Err(StepError::NonFinite(stage));
        }
        self.lu_a
            .factor(&self.a)
            .map_err(|source| StepError::Singular { stage, source })?;
        self.lu_a.solve(&self.rhs, &mut self.sol);
        if !all_finite(&self.sol) {
            return Err(StepError::NonFinite(stage));
        }
        Ok(())
    }

    fn explicit_euler(
        &mut self,
        st: &mut SolverState,
        rep: &mut StepReport,
    ) -> Result<(), StepError> {
        let nq = self.dims.nq;
        let dt = self.config.dt;
        let x = &mut st.x;
        let mut lap = Lap::start();
        self.contacts(x, &st.normal, rep, &mut lap)?;
        lap.lap(&mut self.times, Phase::Contact);
        self.accelerations(x, "explicit dynamics")?;
        lap.lap(&mut self.times, Phase::DynamicsSolution);
        for k in 0..nq {
            let (q, dq) = (self.sym.q[k].index(), self.sym.dq[k].index());
            x[q] += x[dq] * dt;
            x[dq] += self.sol[k] * dt;
        }
        self.advance_s(x, dt);
        for (n, l) in st.normal.iter_mut().zip(&self.sol[nq..]) {
            *n = -l;
        }
        lap.lap(&mut self.times, Phase::TimeIntegration);
        Ok(())
    }

    fn explicit_midpoint(
        &mut self,
        st: &mut SolverState,
        rep: &mut StepReport,
    ) -> Result<(), StepError> {
        let nq = self.dims.nq;
        let dt = self.config.dt;
        let mut lap = Lap::start();
        self.x0.copy_from_slice(&st.x);
        let x = &mut st.x;
        self.contacts(x, &st.normal, rep, &mut lap)?;
        lap.lap(&mut self.times, Phase::Contact);
        self.accelerations(x, "explicit dynamics")?;
        lap.lap(&mut self.times, Phase::DynamicsSolution);

        for k in 0..nq {
            let (q, dq) = (self.sym.q[k].index(), self.sym.dq[k].index());
            x[q] += 0.5 * dt * x[dq];
            x[dq] += 0.5 * dt * self.sol[k];
        }
        self.advance_s(x, 0.5 * dt);
        for (n, l) in st.normal.iter_mut().zip(&self.sol[nq..]) {
            *n = -l;
        }
        lap.lap(&mut self.times, Phase::TimeIntegration);

        // contact-coordinate rates consistent with the midpoint velocities
        rep.profile_clamped |= self.plant.load_profiles(x);
        self.contact_rates(x)?;
        lap.lap(&mut self.times, Phase::ProjectionSolution);

        self.contacts(x, &st.normal, rep, &mut lap)?;
        lap.lap(&mut self.times, Phase::Contact);
        self.accelerations(x, "explicit dynamics")?;
        lap.lap(&mut self.times, Phase::DynamicsSolution);

        gather(&self.sym.dq, x, &mut self.vq2);
        for k in 0..nq {
            let (q, dq) = (self.sym.q[k].index(), self.sym.dq[k].index());
            x[q] = self.x0[q] + dt * self.vq2[k];
            x[dq] = self.x0[dq] + dt * self.sol[k];
        }
        for (s, ds) in self.sym.s.iter().zip(&self.sym.ds) {
            x[s.index()] = self.x0[s.index()] + dt * x[ds.index()];
        }
        for (n, l) in st.normal.iter_mut().zip(&self.sol[nq..]) {
            *n = -l;
        }
        lap.lap(&mut self.times, Phase::TimeIntegration);
        Ok(())
    }

    /// `ṡ = −J_ds⁻¹·J_dq·q̇` at `x`; caches the `J_ds` factorization.
    fn contact_rates(&mut self, x: &mut [f64]) -> Result<(), StepError> {
        let (nq, ns) = (self.dims.nq, self.dims.ns);
        let ev = &mut self.plant.eval;
        let bad = ev.run(Function::JacDq, x).non_finite | ev.run(Function::JacDs, x).non_finite;
        if bad {
            return Err(StepError::NonFinite("tangency Jacobians"));
        }
        ev.copy_into(Function::JacDs, &mut self.jds);
        self.lu_ds
            .factor(&self.jds)
            .map_err(|source| StepError::Singular {
                stage: "tangency",
                source,
            })?;
        self.ds_cached = true;
        gather(&self.sym.dq, x, &mut self.vq);
        let jdq = ev.out(Function::JacDq);
        for i in 0..ns {
            self.rs[i] = -(0..nq).map(|j| jdq[i * nq + j] * self.vq[j]).sum::<f64>();
        }
        self.lu_ds.solve(&self.rs, &mut self.ts[..ns]);
        for (k, s) in self.sym.ds.iter().enumerate() {
            x[s.index()] = self.ts[k];
        }
        Ok(())
    }

    /// Position projection (s first, then q, repeated until both hold)
    /// followed by the velocity projection. A consistent state is left
    /// without Newton corrections.
    pub fn project(&mut self, x: &mut [f64], rep: &mut StepReport) -> Result<(), StepError> {
        self.project_inner(x, rep, false)
    }

    /// With `force`, each position projection applies at least one Newton
    /// correction with the cached factorization, as after a time step.
    fn project_inner(
        &mut self,
        x: &mut [f64],
        rep: &mut StepReport,
        force: bool,
    ) -> Result<(), StepError> {
        if self.dims.nc == 0 {
            return Ok(());
        }
        let mut lap = Lap::start();
        for round in 0..self.config.max_iters {
            let first = force && round == 0;
            rep.s_iters += self.project_s(x, rep, &mut lap, first)?;
            rep.q_iters += self.project_q(x, rep, &mut lap, first)?;
            rep.profile_clamped |= self.plant.load_profiles(x);
            self.plant.eval.run(Function::PhiD, x);
            let r = max_abs(self.plant.eval.out(Function::PhiD));
            lap.lap(&mut self.times, Phase::ConstraintEvaluation);
            rep.phi_d = r;
            if r <= self.config.tol {
                break;
            }
            if round + 1 == self.config.max_iters {
                return Err(StepError::NoConvergence {
                    stage: "position",
                    residual: r,
                    iters: round + 1,
                });
            }
        }
        self.project_velocities(x, rep, &mut lap)
    }

    fn project_s(
        &mut self,
        x: &mut [f64],
        rep: &mut StepReport,
        lap: &mut Lap,
        force: bool,
    ) -> Result<u32, StepError> {
        let ns = self.dims.ns;
        let mut iters = 0;
        let mut prev = f64::INFINITY;
        loop {
            rep.profile_clamped |= self.plant.load_profiles(x);
            let ev = &mut self.plant.eval;
            if ev.run(Function::PhiD, x).non_finite {
                return Err(StepError::NonFinite("tangency constraints"));
            }
            let r = max_abs(ev.out(Function::PhiD));
            rep.phi_d = r;
            if r <= self.config.tol && (iters > 0 || !force) {
                lap.lap(&mut self.times, Phase::ConstraintEvaluation);
                return Ok(iters);
            }
            if iters >= self.config.max_iters {
                return Err(StepError::NoConvergence {
                    stage: "s",
                    residual: r,
                    iters,
                });
            }
            for (d, v) in self.rs.iter_mut().zip(ev.out(Function::PhiD)) {
                *d = -v;
            }
            // the cached factorization is kept while it converges fast
            let refresh = !self.ds_cached || r > 0.25 * prev;
            if refresh {
                ev.run(Function::JacDs, x);
                ev.copy_into(Function::JacDs, &mut self.jds);
            }
            lap.lap(&mut self.times, Phase::ConstraintEvaluation);
            if refresh {
                self.lu_ds
                    .factor(&self.jds)
                    .map_err(|source| StepError::Singular {
                        stage: "s-projection",
                        source,
                    })?;
                self.ds_cached = true;
            }
            self.lu_ds.solve(&self.rs, &mut self.ts[..ns]);
            for (k, s) in self.sym.s.iter().enumerate() {
                x[s.index()] += self.ts[k];
            }
            lap.lap(&mut self.times, Phase::ProjectionSolution);
            prev = r;
            iters += 1;
        }
    }

    fn project_q(
        &mut self,
        x: &mut [f64],
        rep: &mut StepReport,
        lap: &mut Lap,
        force: bool,
    ) -> Result<u32, StepError> {
        let nq = self.dims.nq;
        let mut iters = 0;
        let mut prev = f64::INFINITY;
        loop {
            let ev = &mut self.plant.eval;
            if ev.run(Function::PhiN, x).non_finite {
                return Err(StepError::NonFinite("normal constraints"));
            }
            let r = max_abs(ev.out(Function::PhiN));
            rep.phi_n = r;
            if r <= self.config.tol && (iters > 0 || !force) {
                lap.lap(&mut self.times, Phase::ConstraintEvaluation);
                return Ok(iters);
            }
            if iters >= self.config.max_iters {
                return Err(StepError::NoConvergence {
                    stage: "q",
                    residual: r,
                    iters,
                });
            }
            for (d, v) in self.rc.iter_mut().zip(ev.out(Function::PhiN)) {
                *d = -v;
            }
            let refresh = !self.nq_cached || r > 0.25 * prev;
            if refresh {
                ev.run(Function::JacNq, x);
                ev.copy_into(Function::JacNq, &mut self.jnq);
            }
            lap.lap(&mut self.times, Phase::ConstraintEvaluation);
            if refresh {
                self.lu_nq
                    .factor(&self.jnq)
                    .map_err(|source| StepError::Singular {
                        stage: "q-projection",
                        source,
                    })?;
                self.nq_cached = true;
            }
            let dq = &mut self.ts[..nq];
            dq.fill(0.0);
            self.lu_nq.solve_dependent(&self.rc, dq);
            for (k, s) in self.sym.q.iter().enumerate() {
                x[s.index()] += dq[k];
            }
            lap.lap(&mut self.times, Phase::ProjectionSolution);
            prev = r;
            iters += 1;
        }
    }

    /// Corrects the dependent velocities so that `φ̇ⁿ = 0`, then solves the
    /// tangency rates for `ṡ`. Refreshes both cached factorizations.
    fn project_velocities(
        &mut self,
        x: &mut [f64],
        rep: &mut StepReport,
        lap: &mut Lap,
    ) -> Result<(), StepError> {
        let Dims { nq, ns, nc } = self.dims;
        rep.profile_clamped |= self.plant.load_profiles(x);
        let ev = &mut self.plant.eval;
        let mut bad = false;
        for f in [Function::JacNq, Function::JacNs, Function::BetaN] {
            bad |= ev.run(f, x).non_finite;
        }
        if bad {
            return Err(StepError::NonFinite("normal constraint Jacobians"));
        }
        ev.copy_into(Function::JacNq, &mut self.jnq);
        lap.lap(&mut self.times, Phase::ConstraintEvaluation);

        self.lu_nq
            .factor(&self.jnq)
            .map_err(|source| StepError::Singular {
                stage: "velocity projection",
                source,
            })?;
        self.nq_cached = true;
        gather(&self.sym.dq, x, &mut self.vq);
        gather(&self.sym.ds, x, &mut self.vs);
        let (jns, beta) = (ev.out(Function::JacNs), ev.out(Function::BetaN));
        let jnq = self.jnq.as_slice();
        for c in 0..nc {
            let a: f64 = (0..nq).map(|j| jnq[c * nq + j] * self.vq[j]).sum();
            let b: f64 = (0..ns).map(|j| jns[c * ns + j] * self.vs[j]).sum();
            self.rc[c] = -(a + b + beta[c]);
        }
        let dq = &mut self.ts[..nq];
        dq.fill(0.0);
        self.lu_nq.solve_dependent(&self.rc, dq);
        for (k, s) in self.sym.dq.iter().enumerate() {
            x[s.index()] += dq[k];
        }
        lap.lap(&mut self.times, Phase::ProjectionSolution);

        self.contact_rates(x)?;
        lap.lap(&mut self.times, Phase::ProjectionSolution);

        // residuals for the report
        let ev = &mut self.plant.eval;
        gather(&self.sym.dq, x, &mut self.vq);
        gather(&self.sym.ds, x, &mut self.vs);
        let (jns, beta) = (ev.out(Function::JacNs), ev.out(Function::BetaN));
        let jnq = self.jnq.as_slice();
        let mut vn: f64 = 0.0;
        for c in 0..nc {
            let a: f64 = (0..nq).map(|j| jnq[c * nq + j] * self.vq[j]).sum();
            let b: f64 = (0..ns).map(|j| jns[c * ns + j] * self.vs[j]).sum();
            vn = vn.max((a + b + beta[c]).abs());
        }
        let (jdq, jds) = (ev.out(Function::JacDq), self.jds.as_slice());
        let mut vd: f64 = 0.0;
        for i in 0..ns {
            let a: f64 = (0..nq).map(|j| jdq[i * nq + j] * self.vq[j]).sum();
            let b: f64 = (0..ns).map(|j| jds[i * ns + j] * self.vs[j]).sum();
            vd = vd.max((a + b).abs());
        }
        rep.vel_n = vn;
        rep.vel_d = vd;
        Ok(())
    }
}
