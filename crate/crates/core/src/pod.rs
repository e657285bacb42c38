//! Snapshot collections, lifting, and proper orthogonal decomposition by
//! the method of snapshots.

use std::sync::Arc;

use crate::dense::{symmetric_eigen, DenseMatrix, SymmetricEigen};
use crate::error::{Error, Result};
use crate::field::{same_mesh, weighted_dot, Field};
use crate::mesh::Mesh;

/// Which quantity a snapshot set or basis describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Q,
    Psi,
    Mode,
}

impl Variable {
    pub fn tag(self) -> u8 {
        match self {
            Variable::Q => 0,
            Variable::Psi => 1,
            Variable::Mode => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Variable::Q),
            1 => Some(Variable::Psi),
            2 => Some(Variable::Mode),
            _ => None,
        }
    }
}

/// Time-ordered fields on one mesh, optionally with the lifting already
/// subtracted from every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    mesh: Arc<Mesh>,
    variable: Variable,
    times: Vec<f64>,
    data: Vec<Vec<f64>>,
    lifting: Option<Field>,
}

impl SnapshotSet {
    pub fn new(mesh: Arc<Mesh>, variable: Variable) -> Self {
        Self {
            mesh,
            variable,
            times: Vec::new(),
            data: Vec::new(),
            lifting: None,
        }
    }

    pub fn push(&mut self, time: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.mesh.n_cells() {
            return Err(Error::invalid(format!(
                "snapshot has {} values for a mesh of {} cells",
                values.len(),
                self.mesh.n_cells()
            )));
        }
        if !time.is_finite() || self.times.last().is_some_and(|&t| time <= t) {
            return Err(Error::invalid(format!(
                "snapshot time {time} does not increase"
            )));
        }
        self.times.push(time);
        self.data.push(values);
        Ok(())
    }

    pub fn push_field(&mut self, time: f64, field: &Field) -> Result<()> {
        if !same_mesh(&self.mesh, field.mesh()) {
            return Err(Error::MeshMismatch);
        }
        self.push(time, field.values().to_vec())
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn field(&self, i: usize) -> Field {
        Field::new(Arc::clone(&self.mesh), self.data[i].clone()).expect("length checked on push")
    }

    pub fn fields(&self) -> impl Iterator<Item = Field> + '_ {
        (0..self.len()).map(|i| self.field(i))
    }

    pub fn lifting(&self) -> Option<&Field> {
        self.lifting.as_ref()
    }

    /// Attach a lifting field that has already been subtracted.
    pub fn set_lifting(&mut self, lifting: Option<Field>) -> Result<()> {
        if let Some(l) = &lifting {
            if !same_mesh(&self.mesh, l.mesh()) {
                return Err(Error::MeshMismatch);
            }
        }
        self.lifting = lifting;
        Ok(())
    }

    /// Arithmetic mean over all stored instants.
    pub fn mean(&self) -> Result<Field> {
        if self.is_empty() {
            return Err(Error::invalid("mean of an empty snapshot set"));
        }
        let mut acc = vec![0.0; self.mesh.n_cells()];
        for s in &self.data {
            for (a, v) in acc.iter_mut().zip(s) {
                *a += v;
            }
        }
        let inv = 1.0 / self.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Field::new(Arc::clone(&self.mesh), acc)
    }
}

/// Subtract the time average `q̃` from every snapshot.
pub fn compute_lifting(snaps: &SnapshotSet) -> Result<(Field, SnapshotSet)> {
    if snaps.lifting.is_some() {
        return Err(Error::invalid("snapshot set is already lifted"));
    }
    let mean = snaps.mean()?;
    let mut out = snaps.clone();
    for s in &mut out.data {
        for (v, m) in s.iter_mut().zip(mean.values()) {
            *v -= m;
        }
    }
    out.lifting = Some(mean.clone());
    Ok((mean, out))
}

/// `C_ij = (Φ_i, Φ_j)` without any `1/N_t` scaling.
pub fn correlation_matrix(snaps: &SnapshotSet) -> DenseMatrix {
    let n = snaps.len();
    let w = snaps.mesh.cell_volumes();
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = weighted_dot(w, &snaps.data[i], &snaps.data[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

pub fn eigendecompose(c: &DenseMatrix) -> Result<SymmetricEigen> {
    symmetric_eigen(c)
}

/// Modes below this fraction of the leading eigenvalue are rank-deficient.
pub const RANK_THRESHOLD: f64 = 1e-14;

/// Orthonormal modes of one variable with the full eigenvalue spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    modes: Vec<Field>,
    eigenvalues: Vec<f64>,
    variable: Variable,
    lifting: Option<Field>,
}

impl PodBasis {
    /// Assemble a basis from precomputed parts, checking consistency.
    pub fn from_parts(
        modes: Vec<Field>,
        eigenvalues: Vec<f64>,
        variable: Variable,
        lifting: Option<Field>,
    ) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::invalid("a basis needs at least one mode"))?;
        for m in modes.iter().chain(lifting.iter()) {
            first.check_same_mesh(m)?;
        }
        if eigenvalues.len() < modes.len() {
            return Err(Error::invalid("fewer eigenvalues than modes"));
        }
        Ok(Self {
            modes,
            eigenvalues,
            variable,
            lifting,
        })
    }

    pub fn modes(&self) -> &[Field] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Field {
        &self.modes[i]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn retained(&self) -> usize {
        self.modes.len()
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn lifting(&self) -> Option<&Field> {
        self.lifting.as_ref()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.modes[0].mesh()
    }

    /// Fraction of the total spectrum captured by the retained modes.
    pub fn energy_fraction(&self) -> f64 {
        energy_fraction(&self.eigenvalues, self.retained())
    }

    /// The same basis restricted to its first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.retained() {
            return Err(Error::invalid(format!(
                "cannot keep {n} of {} modes",
                self.retained()
            )));
        }
        Ok(Self {
            modes: self.modes[..n].to_vec(),
            ..self.clone()
        })
    }

    /// `(f, ζ_i)` for every retained mode.
    pub fn project(&self, f: &Field) -> Result<Vec<f64>> {
        self.modes.iter().map(|m| m.inner_product(f)).collect()
    }

    /// `Σ c_i ζ_i`
    pub fn combine(&self, coeffs: &[f64]) -> Result<Field> {
        if coeffs.len() != self.retained() {
            return Err(Error::invalid(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                self.retained()
            )));
        }
        let mut out = vec![0.0; self.mesh().n_cells()];
        for (c, m) in coeffs.iter().zip(&self.modes) {
            for (o, v) in out.iter_mut().zip(m.values()) {
                *o += c * v;
            }
        }
        Field::new(Arc::clone(self.mesh()), out)
    }
}

/// Build the first `n_r` modes `ζ_i ∝ Σ_j Φ_j Q_ji`, normalized to unit
/// L² norm.
pub fn build_basis(snaps: &SnapshotSet, eig: &SymmetricEigen, n_r: usize) -> Result<PodBasis> {
    let n_t = snaps.len();
    if eig.values.len() != n_t || eig.vectors.rows() != n_t {
        return Err(Error::invalid(format!(
            "eigensystem of size {} for {} snapshots",
            eig.values.len(),
            n_t
        )));
    }
    if n_r == 0 || n_r > n_t {
        return Err(Error::invalid(format!(
            "cannot build {n_r} modes from {n_t} snapshots"
        )));
    }
    let lead = eig.values[0];
    let threshold = RANK_THRESHOLD * lead;
    let n_cells = snaps.mesh.n_cells();
    let mut modes = Vec::with_capacity(n_r);
    for k in 0..n_r {
        let lambda = eig.values[k];
        if !(lambda > threshold) || !(lead > 0.0) {
            return Err(Error::RankDeficient {
                index: k + 1,
                eigenvalue: lambda,
                threshold,
            });
        }
        let mut z = vec![0.0; n_cells];
        for j in 0..n_t {
            let qjk = eig.vectors[(j, k)];
            for (zi, s) in z.iter_mut().zip(&snaps.data[j]) {
                *zi += qjk * s;
            }
        }
        let mut f = Field::new(Arc::clone(&snaps.mesh), z)?;
        let norm = f.norm();
        f.scale(1.0 / norm);
        modes.push(f);
    }
    Ok(PodBasis {
        modes,
        eigenvalues: eig.values.iter().map(|&l| l.max(0.0)).collect(),
        variable: snaps.variable,
        lifting: snaps.lifting.clone(),
    })
}

/// Number of leading eigenvalues [`build_basis`] accepts.
pub fn numerical_rank(spectrum: &[f64]) -> usize {
    match spectrum.first() {
        Some(&lead) if lead > 0.0 => spectrum
            .iter()
            .take_while(|&&l| l > RANK_THRESHOLD * lead)
            .count(),
        _ => 0,
    }
}

/// Cumulative share of the first `n` eigenvalues.
pub fn energy_fraction(spectrum: &[f64], n: usize) -> f64 {
    let total: f64 = spectrum.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    spectrum.iter().take(n).sum::<f64>() / total
}

/// Smallest `N` whose cumulative eigenvalue share reaches `eps`.
pub fn select_modes(spectrum: &[f64], eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("energy threshold {eps} outside (0, 1]")));
    }
    let total: f64 = spectrum.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("spectrum has no energy"));
    }
    let mut acc = 0.0;
    for (i, l) in spectrum.iter().enumerate() {
        acc += l;
        if acc / total >= eps {
            return Ok(i + 1);
        }
    }
    Ok(spectrum.len())
}

/// Correlation, eigendecomposition, and basis in one call.
pub fn pod(snaps: &SnapshotSet, n_r: usize) -> Result<PodBasis> {
    let eig = eigendecompose(&correlation_matrix(snaps))?;
    build_basis(snaps, &eig, n_r)
}

/// Rows `(index, eigenvalue, cumulative fraction)` of a spectrum.
pub fn spectrum_table(spectrum: &[f64]) -> Vec<(usize, f64, f64)> {
    let total: f64 = spectrum.iter().sum();
    let mut acc = 0.0;
    spectrum
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            acc += l;
            let frac = if total > 0.0 { acc / total } else { 0.0 };
            (i + 1, l, frac)
        })
        .collect()
}
