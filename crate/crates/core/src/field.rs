//! Cell-averaged scalar fields and the discrete L² inner product.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// One value per cell of a shared mesh.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        same_mesh(&self.mesh, &other.mesh) && self.values == other.values
    }
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::invalid(format!(
                "field has {} values for a mesh of {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.n_cells();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.n_cells();
        Self {
            mesh,
            values: vec![c; n],
        }
    }

    /// Evaluate `f(x, y)` at every cell centroid.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.cell_centroids().iter().map(|c| f(c[0], c[1])).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_mesh(&self, other: &Field) -> Result<()> {
        if same_mesh(&self.mesh, &other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// Volume-weighted midpoint quadrature of `a · b` over the domain.
    pub fn inner_product(&self, other: &Field) -> Result<f64> {
        self.check_same_mesh(other)?;
        Ok(weighted_dot(
            self.mesh.cell_volumes(),
            &self.values,
            &other.values,
        ))
    }

    pub fn norm(&self) -> f64 {
        weighted_dot(self.mesh.cell_volumes(), &self.values, &self.values).sqrt()
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Field) -> Result<()> {
        self.check_same_mesh(x)?;
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * (a * b)).sum()
}

/// The planetary term: the `y` coordinate of every cell centroid.
pub fn coordinate_field_y(mesh: Arc<Mesh>) -> Field {
    Field::from_fn(mesh, |_, y| y)
}

/// Double-gyre wind forcing `F = sin(π y)`.
pub fn forcing_field(mesh: Arc<Mesh>) -> Field {
    Field::from_fn(mesh, |_, y| (PI * y).sin())
}
