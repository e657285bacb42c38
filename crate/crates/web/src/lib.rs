//! Browser front end: a coarse double-gyre run, its POD spectrum, and
//! reduced-order runs compared against it.

use std::sync::Arc;

use qgrom::bench::{offline, online, BenchCase, Offline};
use qgrom::diagnostics::{gyre_count, relative_error};
use qgrom::fom::{run_fom, FomRun};
use qgrom::pod::{compute_lifting, correlation_matrix, eigendecompose, energy_fraction, numerical_rank};
use qgrom::rom::RomModel;
use qgrom::{Error, Field, Result};
use wasm_bindgen::prelude::*;

/// Largest vorticity basis the page can ask for.
pub const MAX_NQ: usize = 20;

/// One full-order run plus its POD products.
pub struct Session {
    case: BenchCase,
    fom: FomRun,
    off: Offline,
}

impl Session {
    /// Case-1 physics on an `nx × ny` mesh over `[0, t_end]`, sampling
    /// every `stride` steps of length `dt`.
    pub fn new(nx: usize, ny: usize, dt: f64, t_end: f64, stride: usize) -> Result<Self> {
        let mut case = BenchCase::case1();
        let f = &mut case.fom;
        (f.nx, f.ny, f.dt, f.t0, f.t_start, f.t_end, f.snapshot_stride) = (nx, ny, dt, 0.0, 0.0, t_end, stride);
        let fom = run_fom(&case.fom)?;
        let (_, lifted) = compute_lifting(&fom.q)?;
        let rank = numerical_rank(&eigendecompose(&correlation_matrix(&lifted))?.values);
        let n_q = MAX_NQ.min(rank);
        let forcing = case.fom.forcing_field(Arc::clone(fom.q.mesh()));
        let off = offline(&fom.q, &fom.psi, case.eps_psi, n_q, &forcing, case.fom.scheme)?;
        Ok(Self { case, fom, off })
    }

    pub fn nx(&self) -> usize {
        self.case.fom.nx
    }

    pub fn ny(&self) -> usize {
        self.case.fom.ny
    }

    pub fn n_psi(&self) -> usize {
        self.off.n_psi
    }

    pub fn max_nq(&self) -> usize {
        self.off.basis_q.retained()
    }

    pub fn fom_seconds(&self) -> f64 {
        self.fom.wall_seconds
    }

    pub fn mean_psi(&self) -> &Field {
        &self.off.psi_mean
    }

    /// Cumulative vorticity eigenvalue fractions for `1..=len`.
    pub fn cumulative_spectrum(&self) -> Vec<f64> {
        let s = self.off.q_spectrum();
        (1..=s.len()).map(|n| energy_fraction(s, n)).collect()
    }

    /// Reduced run with `n_q` modes; `alpha = 0` selects the unfiltered model.
    pub fn reduce(&self, n_q: usize, alpha: f64) -> Result<Reduction> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
        }
        let model = if alpha == 0.0 { RomModel::QgeQge } else { RomModel::BvAlpha(alpha) };
        let initial = (&self.fom.initial.q, &self.fom.initial.psi);
        let (outcome, run) = online(&self.case, &self.off, initial, model, n_q)?;
        let mean = run.mean_stream_function(&self.off.basis_psi)?;
        debug_assert_eq!(relative_error(&self.off.psi_mean, &mean)?, outcome.epsilon);
        Ok(Reduction {
            epsilon: outcome.epsilon,
            gyres: gyre_count(&mean),
            seconds: outcome.online_seconds,
            psi: mean.into_values(),
        })
    }
}

/// Result of [`Session::reduce`].
#[wasm_bindgen]
pub struct Reduction {
    epsilon: f64,
    gyres: usize,
    seconds: f64,
    psi: Vec<f64>,
}

#[wasm_bindgen]
impl Reduction {
    #[wasm_bindgen(getter)]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[wasm_bindgen(getter)]
    pub fn gyres(&self) -> usize {
        self.gyres
    }

    #[wasm_bindgen(getter)]
    pub fn seconds(&self) -> f64 {
        self.seconds
    }

    /// Mean stream function, row-major from the south-west cell.
    pub fn psi(&self) -> Vec<f64> {
        self.psi.clone()
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Handle owned by the page.
#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    /// Run the full-order model. Blocks the calling thread.
    #[wasm_bindgen(constructor)]
    pub fn new(nx: usize, ny: usize, dt: f64, t_end: f64, stride: usize) -> std::result::Result<Demo, JsError> {
        Session::new(nx, ny, dt, t_end, stride).map(Demo).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.0.nx()
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.0.ny()
    }

    #[wasm_bindgen(getter, js_name = nPsi)]
    pub fn n_psi(&self) -> usize {
        self.0.n_psi()
    }

    #[wasm_bindgen(getter, js_name = maxNq)]
    pub fn max_nq(&self) -> usize {
        self.0.max_nq()
    }

    #[wasm_bindgen(getter, js_name = fomSeconds)]
    pub fn fom_seconds(&self) -> f64 {
        self.0.fom_seconds()
    }

    #[wasm_bindgen(getter, js_name = fomGyres)]
    pub fn fom_gyres(&self) -> usize {
        gyre_count(self.0.mean_psi())
    }

    /// Time-averaged full-order stream function.
    #[wasm_bindgen(js_name = meanPsi)]
    pub fn mean_psi(&self) -> Vec<f64> {
        self.0.mean_psi().values().to_vec()
    }

    /// Cumulative vorticity eigenvalue fractions.
    pub fn spectrum(&self) -> Vec<f64> {
        self.0.cumulative_spectrum()
    }

    pub fn reduce(&self, n_q: usize, alpha: f64) -> std::result::Result<Reduction, JsError> {
        self.0.reduce(n_q, alpha).map_err(js)
    }
}
