//! Benchmark presets, the flat `key = value` configuration format, and the
//! end-to-end offline/online pipeline behind the report tables.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::diagnostics::{gyre_count, munk_scale, relative_error};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fom::{run_fom_with, ConvectionScheme, FomConfig, FomRun};
use crate::io::ReportRow;
use crate::pod::{
    build_basis, compute_lifting, correlation_matrix, eigendecompose, energy_fraction, select_modes,
    PodBasis, SnapshotSet,
};
use crate::rom::{calibrate_alpha, project_initial, run_rom, Calibration, ReducedOperators, RomConfig, RomModel};

/// Default filter radii tried by the calibration.
pub const DEFAULT_ALPHAS: [f64; 8] = [0.05, 0.1, 0.125, 0.13, 0.15, 0.175, 0.2, 0.3];

/// A complete benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub label: String,
    pub fom: FomConfig,
    /// Cumulative eigenvalue share that fixes `N_ψ`.
    pub eps_psi: f64,
    /// Vorticity dimensions run with both models.
    pub nq: Vec<usize>,
    /// Extra vorticity dimensions run with the plain model only.
    pub nq_qge_only: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl BenchCase {
    fn preset(label: &str, ro: f64, re: f64, nx: usize, ny: usize, scheme: ConvectionScheme) -> Self {
        let mut fom = FomConfig::new(ro, re, nx, ny);
        fom.scheme = scheme;
        Self {
            label: label.to_string(),
            fom,
            eps_psi: 0.98,
            nq: vec![10, 20, 30],
            nq_qge_only: vec![40],
            alphas: DEFAULT_ALPHAS.to_vec(),
        }
    }

    /// `Ro = 0.0036`, `Re = 450` on a 16 × 32 mesh.
    pub fn case1() -> Self {
        Self::preset("case1", 0.0036, 450.0, 16, 32, ConvectionScheme::Arakawa)
    }

    /// `Ro = 0.008`, `Re = 1000` on a 32 × 64 mesh.
    pub fn case2() -> Self {
        Self::preset("case2", 0.008, 1000.0, 32, 64, ConvectionScheme::Upwind)
    }

    /// `1`, `2`, `case1` or `case2`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "1" | "case1" => Ok(Self::case1()),
            "2" | "case2" => Ok(Self::case2()),
            other => Err(Error::invalid(format!("unknown benchmark case '{other}'"))),
        }
    }

    pub fn munk_scale(&self) -> Result<f64> {
        munk_scale(self.fom.ro, self.fom.re, self.fom.bounds.width())
    }

    /// Largest vorticity dimension any run needs.
    pub fn max_nq(&self) -> usize {
        self.nq.iter().chain(&self.nq_qge_only).copied().max().unwrap_or(0)
    }

    pub fn rom_config(&self, model: RomModel, n_q: usize, n_psi: usize) -> RomConfig {
        RomConfig {
            model,
            dt: self.fom.dt,
            t0: self.fom.t0,
            t_end: self.fom.t_end,
            ro: self.fom.ro,
            re: self.fom.re,
            n_q,
            n_psi,
            snapshot_stride: self.fom.snapshot_stride,
        }
    }
}

/// Parsed `key = value` lines. Blank lines and `#` comments are ignored;
/// keys may appear once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

/// Keys understood by [`ConfigMap::apply`] and the command-line driver.
pub const CONFIG_KEYS: [&str; 21] = [
    "case", "ro", "re", "nx", "ny", "dt", "t0", "t_end", "t_start", "stride", "eps_psi", "nq",
    "npsi", "alpha", "model", "tol_spd", "tol_gen", "max_iter", "scheme", "forcing", "out_dir",
];

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected 'key = value'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::invalid(format!("line {}: unknown key '{k}'", n + 1)));
            }
            if v.is_empty() {
                return Err(Error::invalid(format!("line {}: '{k}' has no value", n + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::invalid(format!("line {}: '{k}' given twice", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::invalid(format!("'{key}' has a bad value '{v}'")))
            })
            .transpose()
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::invalid(format!("'{key}' has a bad entry '{s}'")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Start from the named case (default case 1) and override it with the
    /// numeric keys present.
    pub fn apply(&self) -> Result<BenchCase> {
        let mut c = BenchCase::by_name(self.get("case").unwrap_or("1"))?;
        let f = &mut c.fom;
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = self.number($key)? {
                    $field = v;
                }
            };
        }
        set!("ro", f.ro);
        set!("re", f.re);
        set!("nx", f.nx);
        set!("ny", f.ny);
        set!("dt", f.dt);
        set!("t0", f.t0);
        set!("t_end", f.t_end);
        set!("stride", f.snapshot_stride);
        set!("tol_spd", f.tol_spd);
        set!("tol_gen", f.tol_gen);
        set!("max_iter", f.max_iter);
        set!("forcing", f.forcing);
        f.t_start = f.t0;
        set!("t_start", f.t_start);
        if let Some(s) = self.get("scheme") {
            f.scheme = s.parse()?;
        }
        set!("eps_psi", c.eps_psi);
        if let Some(v) = self.list("nq")? {
            c.nq = v;
            c.nq_qge_only.clear();
        }
        if let Some(v) = self.list("alpha")? {
            c.alphas = v;
        }
        c.fom.validate()?;
        Ok(c)
    }
}

/// POD products of one full-order run.
#[derive(Debug, Clone)]
pub struct Offline {
    pub basis_q: PodBasis,
    pub basis_psi: PodBasis,
    pub n_psi: usize,
    pub psi_mean: Field,
    pub ops: ReducedOperators,
}

impl Offline {
    pub fn q_spectrum(&self) -> &[f64] {
        self.basis_q.eigenvalues()
    }

    pub fn psi_spectrum(&self) -> &[f64] {
        self.basis_psi.eigenvalues()
    }
}

/// Lifted vorticity basis with `n_q` modes and stream-function basis chosen
/// by `eps_psi`, plus operators for the largest dimensions.
pub fn offline(
    q: &SnapshotSet,
    psi: &SnapshotSet,
    eps_psi: f64,
    n_q: usize,
    forcing: &Field,
    scheme: ConvectionScheme,
) -> Result<Offline> {
    let (_, lifted) = compute_lifting(q)?;
    let eq = eigendecompose(&correlation_matrix(&lifted))?;
    let ep = eigendecompose(&correlation_matrix(psi))?;
    let n_psi = select_modes(&ep.values, eps_psi)?;
    let basis_q = build_basis(&lifted, &eq, n_q)?;
    let basis_psi = build_basis(psi, &ep, n_psi)?;
    let ops = ReducedOperators::assemble(&basis_q, &basis_psi, forcing, scheme)?;
    Ok(Offline {
        basis_q,
        basis_psi,
        n_psi,
        psi_mean: psi.mean()?,
        ops,
    })
}

/// One online run compared with the full-order mean stream function.
#[derive(Debug, Clone, PartialEq)]
pub struct RomOutcome {
    pub model: RomModel,
    pub n_q: usize,
    pub epsilon: f64,
    pub gyres: usize,
    pub online_seconds: f64,
    pub mean_energy: f64,
}

/// Run one model at `n_q` vorticity modes from the projected initial state.
pub fn online(case: &BenchCase, off: &Offline, initial: (&Field, &Field), model: RomModel, n_q: usize) -> Result<(RomOutcome, crate::rom::RomRun)> {
    let ops = off.ops.truncated(n_q, off.n_psi)?;
    let bq = off.basis_q.truncated(n_q)?;
    let init = project_initial(initial.0, initial.1, &bq, &off.basis_psi, case.fom.t0)?;
    let run = run_rom(&init, &ops, &case.rom_config(model, n_q, off.n_psi))?;
    let mean = run.mean_stream_function(&off.basis_psi)?;
    let outcome = RomOutcome {
        model,
        n_q,
        epsilon: relative_error(&off.psi_mean, &mean)?,
        gyres: gyre_count(&mean),
        online_seconds: run.wall_seconds,
        mean_energy: run.energy.mean(),
    };
    Ok((outcome, run))
}

/// Everything the report needs.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub case: BenchCase,
    pub fom_seconds: f64,
    pub fom_mean_energy: f64,
    pub fom_gyres: usize,
    pub n_psi: usize,
    pub q_fractions: Vec<(usize, f64)>,
    pub outcomes: Vec<RomOutcome>,
    pub calibrations: Vec<(usize, Calibration)>,
}

impl BenchReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.outcomes
            .iter()
            .map(|o| ReportRow {
                model: o.model.name().to_string(),
                n_q: o.n_q,
                n_psi: self.n_psi,
                alpha: o.model.alpha(),
                energy_fraction_q: self
                    .q_fractions
                    .iter()
                    .find(|(n, _)| *n == o.n_q)
                    .map_or(f64::NAN, |f| f.1),
                epsilon: o.epsilon,
                gyre_count: o.gyres,
                online_seconds: o.online_seconds,
                fom_seconds: self.fom_seconds,
                speedup: self.fom_seconds / o.online_seconds,
            })
            .collect()
    }

    pub fn outcome(&self, model: &str, n_q: usize) -> Option<&RomOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.model.name() == model && o.n_q == n_q)
    }
}

/// Full protocol from a finished full-order run: POD, the plain model for
/// every dimension, the filter radius calibrated per dimension, and a
/// final timed run of the filtered model at the calibrated radius.
pub fn run_bench_from(case: &BenchCase, fom: &FomRun) -> Result<BenchReport> {
    let mesh = Arc::clone(fom.q.mesh());
    let forcing = case.fom.forcing_field(Arc::clone(&mesh));
    let off = offline(&fom.q, &fom.psi, case.eps_psi, case.max_nq(), &forcing, case.fom.scheme)?;
    let initial = (&fom.initial.q, &fom.initial.psi);

    let mut all_nq: Vec<usize> = case.nq.iter().chain(&case.nq_qge_only).copied().collect();
    all_nq.sort_unstable();
    all_nq.dedup();
    let q_fractions = all_nq
        .iter()
        .map(|&n| (n, energy_fraction(off.q_spectrum(), n)))
        .collect();

    let mut outcomes = Vec::new();
    for &n in &all_nq {
        outcomes.push(online(case, &off, initial, RomModel::QgeQge, n)?.0);
    }
    let mut calibrations = Vec::new();
    for &n in &case.nq {
        let ops = off.ops.truncated(n, off.n_psi)?;
        let bq = off.basis_q.truncated(n)?;
        let init = project_initial(initial.0, initial.1, &bq, &off.basis_psi, case.fom.t0)?;
        let cfg = case.rom_config(RomModel::QgeQge, n, off.n_psi);
        let cal = calibrate_alpha(&case.alphas, &init, &ops, &cfg, &off.basis_psi, &off.psi_mean)?;
        outcomes.push(online(case, &off, initial, RomModel::BvAlpha(cal.alpha), n)?.0);
        calibrations.push((n, cal));
    }
    Ok(BenchReport {
        case: case.clone(),
        fom_seconds: fom.wall_seconds,
        fom_mean_energy: fom.energy.mean(),
        fom_gyres: gyre_count(&off.psi_mean),
        n_psi: off.n_psi,
        q_fractions,
        outcomes,
        calibrations,
    })
}

/// Run the full-order model and then [`run_bench_from`].
pub fn run_bench(case: &BenchCase, progress: impl FnMut(usize, usize)) -> Result<(FomRun, BenchReport)> {
    let fom = run_fom_with(&case.fom, progress)?;
    let report = run_bench_from(case, &fom)?;
    Ok((fom, report))
}
