//! Scalar and field diagnostics: kinetic energy, time averages, relative
//! errors, gyre counting, the Munk scale and standard vorticity.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{coordinate_field_y, Field};
use crate::fv::green_gauss_gradient;
use crate::mesh::Mesh;

/// `(time, E)` samples of kinetic energy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    samples: Vec<(f64, f64)>,
}

impl EnergyTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a sample; times must increase and energies be nonnegative.
    pub fn push(&mut self, time: f64, energy: f64) -> Result<()> {
        if let Some(&(last, _)) = self.samples.last() {
            if time <= last {
                return Err(Error::invalid(format!(
                    "energy sample at t = {time} does not follow t = {last}"
                )));
            }
        }
        if !(energy >= 0.0) {
            return Err(Error::invalid(format!("negative or NaN energy {energy}")));
        }
        self.samples.push((time, energy));
        Ok(())
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.1).sum::<f64>() / self.samples.len() as f64
    }
}

/// `E = ½ Σ |∇ψ|² |Ω_i|` with the Green–Gauss gradient and `ψ = 0` on walls.
pub fn kinetic_energy(psi: &Field) -> f64 {
    kinetic_energy_values(psi.mesh(), psi.values())
}

pub(crate) fn kinetic_energy_values(mesh: &Mesh, psi: &[f64]) -> f64 {
    let g = green_gauss_gradient(mesh, psi);
    0.5 * g
        .iter()
        .zip(mesh.cell_volumes())
        .map(|(g, v)| (g[0] * g[0] + g[1] * g[1]) * v)
        .sum::<f64>()
}

/// Arithmetic mean of uniformly sampled fields.
pub fn time_average<'a>(fields: impl IntoIterator<Item = &'a Field>) -> Result<Field> {
    let mut iter = fields.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::invalid("time average of an empty sequence"))?;
    let mut sum = first.clone();
    let mut count = 1usize;
    for f in iter {
        sum.axpy(1.0, f)?;
        count += 1;
    }
    sum.scale(1.0 / count as f64);
    Ok(sum)
}

/// `‖reference − approx‖ / ‖reference‖` in the discrete L² norm.
pub fn relative_error(reference: &Field, approx: &Field) -> Result<f64> {
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::invalid("relative error against a zero field"));
    }
    Ok(reference.sub(approx)?.norm() / denom)
}

/// Peaks below this fraction of `max |ψ|` are treated as noise.
pub const GYRE_NOISE_FLOOR: f64 = 0.05;

/// Number of sign-alternating bands of `psi` along the column of cells
/// closest to the middle of the basin (ties go to the western column).
///
/// Runs of constant sign whose peak does not exceed the noise floor are
/// dropped, and adjacent surviving runs of the same sign are merged.
pub fn gyre_count(psi: &Field) -> usize {
    let mesh = psi.mesh();
    let b = mesh.bounds();
    let x_mid = 0.5 * (b.x_min + b.x_max);
    let column = (0..mesh.nx())
        .min_by(|&a, &c| {
            let xa = (mesh.cell_centroids()[a][0] - x_mid).abs();
            let xc = (mesh.cell_centroids()[c][0] - x_mid).abs();
            xa.total_cmp(&xc).then(a.cmp(&c))
        })
        .unwrap_or(0);
    let floor = GYRE_NOISE_FLOOR * psi.max_abs();
    if floor == 0.0 {
        return 0;
    }

    let line = (0..mesh.ny()).map(|j| psi.values()[mesh.cell_index(column, j)]);
    // (sign, peak) of maximal constant-sign runs
    let mut runs: Vec<(i8, f64)> = Vec::new();
    for v in line {
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        };
        match runs.last_mut() {
            Some((rs, peak)) if *rs == s => *peak = peak.max(v.abs()),
            _ => runs.push((s, v.abs())),
        }
    }
    let mut count = 0;
    let mut last_sign = 0;
    for (s, peak) in runs {
        if s == 0 || peak <= floor {
            continue;
        }
        if s != last_sign {
            count += 1;
            last_sign = s;
        }
    }
    count
}

/// Munk boundary-layer scale `δ_M = L (Ro/Re)^{1/3}`.
pub fn munk_scale(ro: f64, re: f64, length: f64) -> Result<f64> {
    if !(ro > 0.0 && re > 0.0 && length > 0.0) {
        return Err(Error::invalid("Munk scale needs positive Ro, Re and L"));
    }
    Ok(length * (ro / re).cbrt())
}

/// Relative vorticity `ω = (q − y) / Ro`.
pub fn standard_vorticity(q: &Field, ro: f64) -> Result<Field> {
    if ro == 0.0 || !ro.is_finite() {
        return Err(Error::invalid("Rossby number must be nonzero"));
    }
    let y = coordinate_field_y(Arc::clone(q.mesh()));
    let mut w = q.sub(&y)?;
    w.scale(1.0 / ro);
    Ok(w)
}
