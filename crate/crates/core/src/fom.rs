//! Full-order model: BDF1 segregated time stepping of the finite-volume
//! quasi-geostrophic equations
//!
//! ```text
//! q_t + ∇·(u q) − (1/Re) Δq = F,    −Ro Δψ + y = q,    u = ∇×ψ
//! ```
//!
//! with `ψ = 0` and `q = y` on the walls.

use std::sync::Arc;
#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;
#[cfg(target_arch = "wasm32")]
use web_time::Instant;

use crate::diagnostics::{kinetic_energy_values, EnergyTrace};
use crate::error::{Error, Result};
use crate::field::{coordinate_field_y, forcing_field, same_mesh, Field};
use crate::fv::{boundary_values, limited_correction, negative_laplacian_matrix, TransportAssembler};
use crate::linsolve::{solve_general_from, solve_spd_from, CsrMatrix, SolverOptions};
use crate::mesh::{Bounds, Mesh};
use crate::pod::{SnapshotSet, Variable};

pub use crate::fv::{curl_flux, CellExchange, ConvectionScheme, FaceFlux};

#[derive(Debug, Clone, PartialEq)]
pub struct FomConfig {
    pub ro: f64,
    pub re: f64,
    pub dt: f64,
    /// Start of the recording window.
    pub t0: f64,
    pub t_end: f64,
    /// Time at which integration starts from `q = y`, `ψ = 0`. Equal to
    /// `t0` unless a spin-up is wanted.
    pub t_start: f64,
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    pub snapshot_stride: usize,
    pub tol_spd: f64,
    pub tol_gen: f64,
    pub max_iter: usize,
    pub scheme: ConvectionScheme,
    /// Amplitude `a` of the wind forcing `F = a sin(π y)`.
    pub forcing: f64,
}

impl FomConfig {
    /// Basin `[0, 1] × [−1, 1]` with unit forcing and default tolerances.
    pub fn new(ro: f64, re: f64, nx: usize, ny: usize) -> Self {
        let defaults = SolverOptions::default();
        Self {
            ro,
            re,
            dt: 1e-4,
            t0: 10.0,
            t_end: 80.0,
            t_start: 10.0,
            nx,
            ny,
            bounds: Bounds::basin(),
            snapshot_stride: 1000,
            tol_spd: defaults.tol,
            tol_gen: defaults.tol,
            max_iter: defaults.max_iter,
            scheme: ConvectionScheme::default(),
            forcing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("Ro", self.ro),
            ("Re", self.re),
            ("dt", self.dt),
            ("tol_spd", self.tol_spd),
            ("tol_gen", self.tol_gen),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_end > self.t0) {
            return Err(Error::invalid("t_end must exceed t0"));
        }
        if !(self.t_start <= self.t0) || !self.t_start.is_finite() {
            return Err(Error::invalid("t_start must not exceed t0"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !self.forcing.is_finite() {
            return Err(Error::invalid("forcing amplitude must be finite"));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(Mesh::new(self.nx, self.ny, self.bounds)?))
    }

    /// Steps from `t_start` to `t0`.
    pub fn spin_up_steps(&self) -> usize {
        ((self.t0 - self.t_start) / self.dt).round() as usize
    }

    /// Steps from `t0` to `t_end`.
    pub fn window_steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round() as usize
    }

    pub fn forcing_field(&self, mesh: Arc<Mesh>) -> Field {
        let mut f = forcing_field(mesh);
        f.scale(self.forcing);
        f
    }

    fn spd_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol_spd,
            max_iter: self.max_iter,
        }
    }

    fn general_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol_gen,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub q: Field,
    pub psi: Field,
    pub time: f64,
}

impl FomState {
    /// `q = y`, `ψ = 0`.
    pub fn initial(mesh: Arc<Mesh>, time: f64) -> Self {
        Self {
            q: coordinate_field_y(Arc::clone(&mesh)),
            psi: Field::zeros(mesh),
            time,
        }
    }
}

/// Matrix and right-hand side of
/// `(1/Δt) q + ∇·(u q) − (1/Re) Δq = F + q_prev/Δt` with `q = y` on walls.
pub fn assemble_transport(
    q_prev: &Field,
    exchange: &CellExchange,
    cfg: &FomConfig,
    forcing: &Field,
) -> Result<(CsrMatrix, Vec<f64>)> {
    q_prev.check_same_mesh(forcing)?;
    let mesh = q_prev.mesh();
    let zeros = CellExchange::zeros(mesh);
    if exchange.face.len() != zeros.face.len() || exchange.corner.len() != zeros.corner.len() {
        return Err(Error::invalid("exchange does not match the mesh"));
    }
    let inv_dt = 1.0 / cfg.dt;
    let mut rhs: Vec<f64> = forcing
        .values()
        .iter()
        .zip(q_prev.values())
        .map(|(f, q)| f + q * inv_dt)
        .collect();
    if cfg.scheme == ConvectionScheme::VanLeer {
        for (r, c) in rhs.iter_mut().zip(limited_correction(mesh, exchange, q_prev.values())) {
            *r -= c;
        }
    }
    let walls = boundary_values(mesh, |_, y| y);
    let mut asm = TransportAssembler::new(mesh);
    let a = asm
        .assemble(exchange, inv_dt, 1.0 / cfg.re, cfg.scheme, &walls, &mut rhs)
        .clone();
    Ok((a, rhs))
}

/// Advance one step from `state` with a freshly built solver.
pub fn step(state: &FomState, cfg: &FomConfig, forcing: &Field) -> Result<FomState> {
    let mut solver = FomSolver::new(cfg, Arc::clone(state.q.mesh()))?.with_forcing(forcing)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Reusable buffers and matrices for repeated time steps on one mesh.
#[derive(Debug, Clone)]
pub struct FomSolver {
    cfg: FomConfig,
    mesh: Arc<Mesh>,
    assembler: TransportAssembler,
    poisson: CsrMatrix,
    y: Vec<f64>,
    walls: Vec<f64>,
    forcing: Vec<f64>,
    exchange: CellExchange,
    rhs: Vec<f64>,
    psi_prev: Option<Vec<f64>>,
    steps: usize,
}

impl FomSolver {
    pub fn new(cfg: &FomConfig, mesh: Arc<Mesh>) -> Result<Self> {
        cfg.validate()?;
        let forcing = cfg.forcing_field(Arc::clone(&mesh)).into_values();
        Ok(Self {
            assembler: TransportAssembler::new(&mesh),
            poisson: negative_laplacian_matrix(&mesh, cfg.ro),
            y: coordinate_field_y(Arc::clone(&mesh)).into_values(),
            walls: boundary_values(&mesh, |_, y| y),
            forcing,
            exchange: CellExchange::zeros(&mesh),
            rhs: vec![0.0; mesh.n_cells()],
            psi_prev: None,
            steps: 0,
            cfg: cfg.clone(),
            mesh,
        })
    }

    /// Replace the configured forcing by an arbitrary field.
    pub fn with_forcing(mut self, forcing: &Field) -> Result<Self> {
        if !same_mesh(&self.mesh, forcing.mesh()) {
            return Err(Error::MeshMismatch);
        }
        self.forcing = forcing.values().to_vec();
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advance `state` by one time step in place.
    pub fn step(&mut self, state: &mut FomState) -> Result<()> {
        let step = self.steps + 1;
        let inv_dt = 1.0 / self.cfg.dt;
        let q = state.q.values_mut();
        let psi = state.psi.values_mut();

        self.exchange.update(&self.mesh, psi, self.cfg.scheme);
        for ((r, f), qn) in self.rhs.iter_mut().zip(&self.forcing).zip(q.iter()) {
            *r = f + qn * inv_dt;
        }
        if self.cfg.scheme == ConvectionScheme::VanLeer {
            for (r, c) in self.rhs.iter_mut().zip(limited_correction(&self.mesh, &self.exchange, q)) {
                *r -= c;
            }
        }
        let a = self.assembler.assemble(
            &self.exchange,
            inv_dt,
            1.0 / self.cfg.re,
            self.cfg.scheme,
            &self.walls,
            &mut self.rhs,
        );
        let report = solve_general_from(a, &self.rhs, q, self.cfg.general_options())?;
        if !report.converged {
            return Err(Error::NotConverged {
                solver: "BiCGStab",
                step,
                residual: report.final_residual,
            });
        }

        for ((r, qv), yv) in self.rhs.iter_mut().zip(q.iter()).zip(&self.y) {
            *r = qv - yv;
        }
        let current = psi.to_vec();
        if let Some(prev) = &self.psi_prev {
            for (p, old) in psi.iter_mut().zip(prev) {
                *p = 2.0 * *p - old;
            }
        }
        let report = solve_spd_from(&self.poisson, &self.rhs, psi, self.cfg.spd_options())?;
        if !report.converged {
            return Err(Error::NotConverged {
                solver: "CG",
                step,
                residual: report.final_residual,
            });
        }
        self.psi_prev = Some(current);
        if !q.iter().chain(psi.iter()).all(|v| v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        self.steps = step;
        state.time = self.time_at(step);
        Ok(())
    }

    fn time_at(&self, step: usize) -> f64 {
        self.cfg.t_start + step as f64 * self.cfg.dt
    }
}

/// Everything collected by one full-order run.
#[derive(Debug, Clone)]
pub struct FomRun {
    pub q: SnapshotSet,
    pub psi: SnapshotSet,
    pub energy: EnergyTrace,
    /// State at the start of the recording window.
    pub initial: FomState,
    pub wall_seconds: f64,
}

/// Integrate from `q = y`, `ψ = 0` at `t_start` to `t_end`, storing
/// snapshots every `snapshot_stride` steps strictly after `t0`.
pub fn run_fom(cfg: &FomConfig) -> Result<FomRun> {
    run_fom_with(cfg, |_, _| {})
}

/// As [`run_fom`], calling `progress(step, total)` after every stored
/// snapshot.
pub fn run_fom_with(cfg: &FomConfig, mut progress: impl FnMut(usize, usize)) -> Result<FomRun> {
    cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let mut solver = FomSolver::new(cfg, Arc::clone(&mesh))?;
    let mut state = FomState::initial(Arc::clone(&mesh), cfg.t_start);
    let spin = cfg.spin_up_steps();
    let total = spin + cfg.window_steps();

    let start = Instant::now();
    for _ in 0..spin {
        solver.step(&mut state)?;
    }
    let initial = state.clone();
    let mut q = SnapshotSet::new(Arc::clone(&mesh), Variable::Q);
    let mut psi = SnapshotSet::new(Arc::clone(&mesh), Variable::Psi);
    let mut energy = EnergyTrace::new();
    for n in 1..=cfg.window_steps() {
        solver.step(&mut state)?;
        if n % cfg.snapshot_stride == 0 {
            let t = cfg.t0 + n as f64 * cfg.dt;
            q.push_field(t, &state.q)?;
            psi.push_field(t, &state.psi)?;
            energy.push(t, kinetic_energy_values(&mesh, state.psi.values()))?;
            progress(spin + n, total);
        }
    }
    Ok(FomRun {
        q,
        psi,
        energy,
        initial,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
