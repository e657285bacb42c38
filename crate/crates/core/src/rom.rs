//! Galerkin reduced-order models on lifted POD bases.
//!
//! With `q ≈ q̃ + Σ β_i φ_i` and `ψ ≈ Σ γ_j ξ_j`, each step solves
//!
//! ```text
//! [M/Δt + Σ_j γ_j^n G_j − A/Re] β^{n+1} = h + M β^n/Δt − Gl γ^n + (al + aw)/Re
//! [−α² A + M] β̄^{n+1} = M β^{n+1} + α² (al + aw)     (BV-α only)
//! −Ro B γ^{n+1} = −Y + ml + Mt β̄^{n+1}
//! ```
//!
//! where `β̄ = β` for the plain QGE model.

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;
#[cfg(target_arch = "wasm32")]
use web_time::Instant;

use crate::dense::{DenseMatrix, LuFactors};
use crate::diagnostics::{relative_error, EnergyTrace};
use crate::error::{Error, Result};
use crate::field::{same_mesh, Field};
use crate::fv::{apply_convection, apply_laplacian, boundary_values, green_gauss_gradient};
use crate::fv::{CellExchange, ConvectionScheme};
use crate::pod::PodBasis;

/// Reduced closure model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RomModel {
    QgeQge,
    /// Linear differential filter of radius `α` on the vorticity that
    /// drives the stream function.
    BvAlpha(f64),
}

impl RomModel {
    pub fn name(&self) -> &'static str {
        match self {
            RomModel::QgeQge => "qge-qge",
            RomModel::BvAlpha(_) => "bv-alpha",
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            RomModel::QgeQge => 0.0,
            RomModel::BvAlpha(a) => a,
        }
    }
}

/// Galerkin matrices of one pair of bases.
///
/// `g[j]` is the `N_q × N_q` slice `(φ_i, ∇·((∇×ξ_j) φ_k))`, `aw` the
/// projection of the Laplacian of the wall data `q = y` alone, and `k` the
/// Gram matrix of kinetic energy, `E = ½ γᵀ K γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOperators {
    pub m: DenseMatrix,
    pub mt: DenseMatrix,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub g: Vec<DenseMatrix>,
    pub y: Vec<f64>,
    pub h: Vec<f64>,
    pub gl: DenseMatrix,
    pub al: Vec<f64>,
    pub aw: Vec<f64>,
    pub ml: Vec<f64>,
    pub k: DenseMatrix,
}

fn gram(rows: &[Field], cols: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        rows[i]
            .values()
            .iter()
            .zip(&cols[j])
            .zip(rows[i].mesh().cell_volumes())
            .map(|((a, b), v)| a * b * v)
            .sum()
    })
}

fn project_values(modes: &[Field], values: &[f64]) -> Vec<f64> {
    gram(modes, &[values.to_vec()]).as_slice().to_vec()
}

impl ReducedOperators {
    /// Project the discrete operators of the full-order solver onto the
    /// bases. `basis_q` must carry its lifting. The van Leer correction is
    /// not bilinear, so that scheme projects its upwind part.
    pub fn assemble(
        basis_q: &PodBasis,
        basis_psi: &PodBasis,
        forcing: &Field,
        scheme: ConvectionScheme,
    ) -> Result<Self> {
        let mesh = basis_q.mesh();
        if !same_mesh(mesh, basis_psi.mesh()) || !same_mesh(mesh, forcing.mesh()) {
            return Err(Error::MeshMismatch);
        }
        let scheme = match scheme {
            ConvectionScheme::VanLeer => ConvectionScheme::Upwind,
            s => s,
        };
        let lifting = basis_q
            .lifting()
            .ok_or_else(|| Error::invalid("the vorticity basis has no lifting"))?;
        let phi = basis_q.modes();
        let xi = basis_psi.modes();
        let phi_vals: Vec<Vec<f64>> = phi.iter().map(|f| f.values().to_vec()).collect();
        let walls = boundary_values(mesh, |_, y| y);

        let lap = |f: &Field| apply_laplacian(mesh, f.values(), None);
        let a = gram(phi, &phi.iter().map(lap).collect::<Vec<_>>());
        let b = gram(xi, &xi.iter().map(lap).collect::<Vec<_>>());

        let mut g = Vec::with_capacity(xi.len());
        let mut gl_cols = Vec::with_capacity(xi.len());
        for x in xi {
            let ex = CellExchange::from_psi(mesh, x.values(), scheme);
            let images: Vec<Vec<f64>> = phi
                .iter()
                .map(|p| apply_convection(mesh, &ex, p.values(), None, scheme))
                .collect();
            g.push(gram(phi, &images));
            gl_cols.push(apply_convection(mesh, &ex, lifting.values(), None, scheme));
        }

        let y: Vec<f64> = mesh.cell_centroids().iter().map(|c| c[1]).collect();
        let grads: Vec<Vec<[f64; 2]>> = xi
            .iter()
            .map(|x| green_gauss_gradient(mesh, x.values()))
            .collect();
        let k = DenseMatrix::from_fn(xi.len(), xi.len(), |i, j| {
            grads[i]
                .iter()
                .zip(&grads[j])
                .zip(mesh.cell_volumes())
                .map(|((p, q), v)| (p[0] * q[0] + p[1] * q[1]) * v)
                .sum()
        });

        Ok(Self {
            m: gram(phi, &phi_vals),
            mt: gram(xi, &phi_vals),
            a,
            b,
            g,
            y: project_values(xi, &y),
            h: project_values(phi, forcing.values()),
            gl: gram(phi, &gl_cols),
            al: project_values(phi, &apply_laplacian(mesh, lifting.values(), None)),
            aw: project_values(phi, &apply_laplacian(mesh, &vec![0.0; mesh.n_cells()], Some(&walls))),
            ml: project_values(xi, lifting.values()),
            k,
        })
    }

    pub fn n_q(&self) -> usize {
        self.m.rows()
    }

    pub fn n_psi(&self) -> usize {
        self.b.rows()
    }

    /// Check that every block has the dimensions implied by `m` and `b`.
    pub fn validate(&self) -> Result<()> {
        let (nq, np) = (self.n_q(), self.n_psi());
        let shapes = [
            ("M", &self.m, nq, nq),
            ("Mt", &self.mt, np, nq),
            ("A", &self.a, nq, nq),
            ("B", &self.b, np, np),
            ("Gl", &self.gl, nq, np),
            ("K", &self.k, np, np),
        ];
        for (name, mat, r, c) in shapes {
            if mat.rows() != r || mat.cols() != c {
                return Err(Error::invalid(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    mat.rows(),
                    mat.cols()
                )));
            }
        }
        if self.g.len() != np || self.g.iter().any(|s| s.rows() != nq || s.cols() != nq) {
            return Err(Error::invalid("convection tensor has the wrong shape"));
        }
        let vecs = [("Y", &self.y, np), ("h", &self.h, nq), ("al", &self.al, nq), ("aw", &self.aw, nq), ("ml", &self.ml, np)];
        for (name, v, n) in vecs {
            if v.len() != n {
                return Err(Error::invalid(format!("{name} has length {}, expected {n}", v.len())));
            }
        }
        Ok(())
    }

    /// The operators of the leading `n_q` and `n_psi` modes.
    pub fn truncated(&self, n_q: usize, n_psi: usize) -> Result<Self> {
        if n_q == 0 || n_psi == 0 || n_q > self.n_q() || n_psi > self.n_psi() {
            return Err(Error::invalid(format!(
                "cannot truncate {}x{} operators to {n_q}x{n_psi}",
                self.n_q(),
                self.n_psi()
            )));
        }
        let sub = |m: &DenseMatrix, r: usize, c: usize| DenseMatrix::from_fn(r, c, |i, j| m[(i, j)]);
        Ok(Self {
            m: sub(&self.m, n_q, n_q),
            mt: sub(&self.mt, n_psi, n_q),
            a: sub(&self.a, n_q, n_q),
            b: sub(&self.b, n_psi, n_psi),
            g: self.g[..n_psi].iter().map(|s| sub(s, n_q, n_q)).collect(),
            y: self.y[..n_psi].to_vec(),
            h: self.h[..n_q].to_vec(),
            gl: sub(&self.gl, n_q, n_psi),
            al: self.al[..n_q].to_vec(),
            aw: self.aw[..n_q].to_vec(),
            ml: self.ml[..n_psi].to_vec(),
            k: sub(&self.k, n_psi, n_psi),
        })
    }

    /// `½ γᵀ K γ`
    pub fn energy(&self, gamma: &[f64]) -> f64 {
        0.5 * gamma
            .iter()
            .zip(self.k.mul_vec(gamma))
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomState {
    pub beta: Vec<f64>,
    pub beta_bar: Vec<f64>,
    pub gamma: Vec<f64>,
    pub time: f64,
}

impl RomState {
    pub fn is_finite(&self) -> bool {
        self.beta
            .iter()
            .chain(&self.beta_bar)
            .chain(&self.gamma)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomConfig {
    pub model: RomModel,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub ro: f64,
    pub re: f64,
    pub n_q: usize,
    pub n_psi: usize,
    /// Record coefficients every this many steps, as the full-order run does.
    pub snapshot_stride: usize,
}

impl RomConfig {
    pub fn new(model: RomModel, ro: f64, re: f64, n_q: usize, n_psi: usize) -> Self {
        Self {
            model,
            dt: 1e-4,
            t0: 10.0,
            t_end: 80.0,
            ro,
            re,
            n_q,
            n_psi,
            snapshot_stride: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("Ro", self.ro), ("Re", self.re), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let alpha = self.model.alpha();
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("filter radius must be nonnegative, got {alpha}")));
        }
        if !(self.t_end > self.t0) {
            return Err(Error::invalid("t_end must exceed t0"));
        }
        if self.n_q == 0 || self.n_psi == 0 {
            return Err(Error::invalid("reduced dimensions must be positive"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round() as usize
    }

    fn check_dims(&self, ops: &ReducedOperators) -> Result<()> {
        if ops.n_q() != self.n_q || ops.n_psi() != self.n_psi {
            return Err(Error::invalid(format!(
                "configuration asks for {}x{} modes, operators are {}x{}",
                self.n_q,
                self.n_psi,
                ops.n_q(),
                ops.n_psi()
            )));
        }
        Ok(())
    }
}

/// `β_i = (q − q̃, φ_i)`, `γ_i = (ψ, ξ_i)`, `β̄ = β`.
pub fn project_initial(
    q: &Field,
    psi: &Field,
    basis_q: &PodBasis,
    basis_psi: &PodBasis,
    time: f64,
) -> Result<RomState> {
    let fluct = match basis_q.lifting() {
        Some(l) => q.sub(l)?,
        None => q.clone(),
    };
    let beta = basis_q.project(&fluct)?;
    let gamma = basis_psi.project(psi)?;
    Ok(RomState {
        beta_bar: beta.clone(),
        beta,
        gamma,
        time,
    })
}

/// `(q_r, ψ_r, q̄_r)` with the lifting added back to both vorticities.
pub fn reconstruct(
    state: &RomState,
    basis_q: &PodBasis,
    basis_psi: &PodBasis,
) -> Result<(Field, Field, Field)> {
    let mut q = basis_q.combine(&state.beta)?;
    let mut q_bar = basis_q.combine(&state.beta_bar)?;
    if let Some(l) = basis_q.lifting() {
        q.axpy(1.0, l)?;
        q_bar.axpy(1.0, l)?;
    }
    let psi = basis_psi.combine(&state.gamma)?;
    Ok((q, psi, q_bar))
}

/// Time stepper with the constant dense systems factorized once.
#[derive(Debug, Clone)]
pub struct RomStepper<'a> {
    ops: &'a ReducedOperators,
    cfg: RomConfig,
    base: DenseMatrix,
    constant_rhs: Vec<f64>,
    lifted: Vec<f64>,
    psi_lu: LuFactors,
    filter_lu: Option<LuFactors>,
    steps: usize,
}

impl<'a> RomStepper<'a> {
    pub fn new(ops: &'a ReducedOperators, cfg: &RomConfig) -> Result<Self> {
        cfg.validate()?;
        ops.validate()?;
        cfg.check_dims(ops)?;
        let inv_dt = 1.0 / cfg.dt;
        let inv_re = 1.0 / cfg.re;
        let mut base = ops.m.clone();
        base.scale(inv_dt);
        base.add_scaled(-inv_re, &ops.a);
        let lifted: Vec<f64> = ops.al.iter().zip(&ops.aw).map(|(a, w)| a + w).collect();
        let constant_rhs = ops.h.iter().zip(&lifted).map(|(h, a)| h + inv_re * a).collect();

        let mut psi_mat = ops.b.clone();
        psi_mat.scale(-cfg.ro);
        let psi_lu = LuFactors::new(psi_mat).ok_or(Error::Singular { step: 0 })?;

        let alpha = cfg.model.alpha();
        let filter_lu = if alpha > 0.0 {
            let mut f = ops.m.clone();
            f.add_scaled(-alpha * alpha, &ops.a);
            Some(LuFactors::new(f).ok_or(Error::Singular { step: 0 })?)
        } else {
            None
        };
        Ok(Self {
            ops,
            cfg: cfg.clone(),
            base,
            constant_rhs,
            lifted,
            psi_lu,
            filter_lu,
            steps: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advance `state` by one step in place.
    pub fn step(&mut self, state: &mut RomState) -> Result<()> {
        let step = self.steps + 1;
        let ops = self.ops;
        let inv_dt = 1.0 / self.cfg.dt;
        if state.beta.len() != ops.n_q() || state.gamma.len() != ops.n_psi() {
            return Err(Error::invalid("state dimensions do not match the operators"));
        }

        let mut mat = self.base.clone();
        for (gj, &c) in ops.g.iter().zip(&state.gamma) {
            mat.add_scaled(c, gj);
        }
        let m_beta = ops.m.mul_vec(&state.beta);
        let gl_gamma = ops.gl.mul_vec(&state.gamma);
        let rhs: Vec<f64> = self
            .constant_rhs
            .iter()
            .zip(&m_beta)
            .zip(&gl_gamma)
            .map(|((c, mb), g)| c + inv_dt * mb - g)
            .collect();
        let lu = LuFactors::new(mat).ok_or(Error::Singular { step })?;
        state.beta = lu.solve(&rhs);

        state.beta_bar = match &self.filter_lu {
            Some(f) => {
                let a2 = self.cfg.model.alpha().powi(2);
                let rhs: Vec<f64> = ops
                    .m
                    .mul_vec(&state.beta)
                    .iter()
                    .zip(&self.lifted)
                    .map(|(mb, l)| mb + a2 * l)
                    .collect();
                f.solve(&rhs)
            }
            None => state.beta.clone(),
        };

        let drive = ops.mt.mul_vec(&state.beta_bar);
        let rhs: Vec<f64> = ops
            .y
            .iter()
            .zip(&ops.ml)
            .zip(&drive)
            .map(|((y, ml), d)| -y + ml + d)
            .collect();
        state.gamma = self.psi_lu.solve(&rhs);

        if !state.is_finite() {
            return Err(Error::Diverged { step });
        }
        self.steps = step;
        state.time = self.cfg.t0 + step as f64 * self.cfg.dt;
        Ok(())
    }
}

fn single_step(state: &RomState, ops: &ReducedOperators, cfg: &RomConfig) -> Result<RomState> {
    let mut next = state.clone();
    let mut stepper = RomStepper::new(ops, cfg)?;
    stepper.step(&mut next)?;
    next.time = state.time + cfg.dt;
    Ok(next)
}

/// One step of the plain reduced QGE model.
pub fn step_qge_qge(state: &RomState, ops: &ReducedOperators, cfg: &RomConfig) -> Result<RomState> {
    let cfg = RomConfig {
        model: RomModel::QgeQge,
        ..cfg.clone()
    };
    single_step(state, ops, &cfg)
}

/// One step of the reduced model with the BV-α filter of radius `alpha`.
pub fn step_bv_alpha(
    state: &RomState,
    ops: &ReducedOperators,
    cfg: &RomConfig,
    alpha: f64,
) -> Result<RomState> {
    let cfg = RomConfig {
        model: RomModel::BvAlpha(alpha),
        ..cfg.clone()
    };
    single_step(state, ops, &cfg)
}

/// Coefficients recorded at the snapshot instants of an online run.
#[derive(Debug, Clone)]
pub struct RomRun {
    pub times: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub energy: EnergyTrace,
    pub last: RomState,
    /// Time spent in the time loop only.
    pub wall_seconds: f64,
}

impl RomRun {
    /// Time average of the recorded stream-function coefficients.
    pub fn mean_gamma(&self) -> Vec<f64> {
        let n = self.gamma.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; n];
        for g in &self.gamma {
            for (m, v) in mean.iter_mut().zip(g) {
                *m += v;
            }
        }
        let count = self.gamma.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        mean
    }

    /// `ψ̃_r = Σ mean(γ_i) ξ_i`
    pub fn mean_stream_function(&self, basis_psi: &PodBasis) -> Result<Field> {
        basis_psi.combine(&self.mean_gamma())
    }
}

/// Integrate from `init` over `[t0, t_end]`.
pub fn run_rom(init: &RomState, ops: &ReducedOperators, cfg: &RomConfig) -> Result<RomRun> {
    let mut stepper = RomStepper::new(ops, cfg)?;
    if init.beta.len() != cfg.n_q || init.gamma.len() != cfg.n_psi || init.beta_bar.len() != cfg.n_q {
        return Err(Error::invalid("initial state does not match the reduced dimensions"));
    }
    let mut state = RomState {
        time: cfg.t0,
        ..init.clone()
    };
    let mut run = RomRun {
        times: Vec::new(),
        beta: Vec::new(),
        gamma: Vec::new(),
        energy: EnergyTrace::new(),
        last: state.clone(),
        wall_seconds: 0.0,
    };
    let start = Instant::now();
    for n in 1..=cfg.steps() {
        stepper.step(&mut state)?;
        if n % cfg.snapshot_stride == 0 {
            run.times.push(state.time);
            run.beta.push(state.beta.clone());
            run.gamma.push(state.gamma.clone());
        }
    }
    run.wall_seconds = start.elapsed().as_secs_f64();
    for (t, g) in run.times.iter().zip(&run.gamma) {
        run.energy.push(*t, ops.energy(g).max(0.0))?;
    }
    run.last = state;
    Ok(run)
}

/// Outcome of one candidate filter radius.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTrial {
    pub alpha: f64,
    /// Relative error of the mean stream function, or why the run failed.
    pub error: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub alpha: f64,
    pub epsilon: f64,
    pub trials: Vec<AlphaTrial>,
}

/// Run the BV-α model for every candidate radius and keep the one whose
/// mean stream function is closest to `psi_mean_fom`. Ties go to the
/// smaller radius. Candidates run on separate threads.
pub fn calibrate_alpha(
    candidates: &[f64],
    init: &RomState,
    ops: &ReducedOperators,
    cfg: &RomConfig,
    basis_psi: &PodBasis,
    psi_mean_fom: &Field,
) -> Result<Calibration> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate filter radii"));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let trials: Vec<AlphaTrial> = std::thread::scope(|s| {
        let handles: Vec<_> = sorted
            .iter()
            .map(|&alpha| {
                s.spawn(move || {
                    let cfg = RomConfig {
                        model: RomModel::BvAlpha(alpha),
                        ..cfg.clone()
                    };
                    let error = run_rom(init, ops, &cfg)
                        .and_then(|run| run.mean_stream_function(basis_psi))
                        .and_then(|psi| relative_error(psi_mean_fom, &psi))
                        .map_err(|e| e.to_string());
                    AlphaTrial { alpha, error }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("calibration worker panicked"))
            .collect()
    });

    let mut best: Option<(f64, f64)> = None;
    for t in &trials {
        if let Ok(e) = t.error {
            if e.is_finite() && best.map_or(true, |(_, b)| e < b) {
                best = Some((t.alpha, e));
            }
        }
    }
    match best {
        Some((alpha, epsilon)) => Ok(Calibration {
            alpha,
            epsilon,
            trials,
        }),
        None => {
            let status: Vec<String> = trials
                .iter()
                .map(|t| format!("alpha {}: {}", t.alpha, t.error.as_ref().err().map_or("ok", |e| e)))
                .collect();
            Err(Error::CalibrationFailed(status.join("; ")))
        }
    }
}
