//! Discrete finite-volume operators shared by the full-order solver and the
//! Galerkin projection.
//!
//! All cell operators are divided by the control volume, so `apply_*`
//! returns per-unit-area quantities comparable to the cell averages they act
//! on.

use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::mesh::{FaceNeighbor, Mesh};

/// Discretisation of the convective term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionScheme {
    /// Arakawa's Jacobian in pair-flux form: central exchange through faces
    /// and across cell corners. Conserves mass and enstrophy exactly.
    #[default]
    Arakawa,
    /// Arithmetic mean of the two adjacent cells on the curl flux.
    Linear,
    /// First-order upwinding on the sign of the face flux.
    Upwind,
    /// Upwind in the implicit operator plus a van Leer limited correction
    /// evaluated on the previous iterate. Second order in smooth regions.
    VanLeer,
}

impl ConvectionScheme {
    pub fn name(self) -> &'static str {
        match self {
            ConvectionScheme::Arakawa => "arakawa",
            ConvectionScheme::Linear => "linear",
            ConvectionScheme::Upwind => "upwind",
            ConvectionScheme::VanLeer => "vanleer",
        }
    }
}

impl std::str::FromStr for ConvectionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arakawa" => Ok(Self::Arakawa),
            "linear" | "central" => Ok(Self::Linear),
            "upwind" => Ok(Self::Upwind),
            "vanleer" | "van-leer" => Ok(Self::VanLeer),
            other => Err(Error::invalid(format!("unknown convection scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for ConvectionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Volumetric flux `(∇ × ψ) · A` through every face, oriented out of the
/// face owner.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux(pub Vec<f64>);

impl FaceFlux {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Net outflow of each cell, divided by its volume.
    pub fn divergence(&self, mesh: &Mesh) -> Vec<f64> {
        let mut div = vec![0.0; mesh.n_cells()];
        for (f, face) in mesh.faces().iter().enumerate() {
            div[face.owner] += self.0[f];
            if let FaceNeighbor::Cell(nb) = face.neighbor {
                div[nb] -= self.0[f];
            }
        }
        for (d, v) in div.iter_mut().zip(mesh.cell_volumes()) {
            *d /= v;
        }
        div
    }
}

/// Stream function at the mesh vertices: interior vertices average the four
/// surrounding cells, boundary vertices carry the wall value `ψ = 0`.
pub fn vertex_values(mesh: &Mesh, psi: &[f64]) -> Vec<f64> {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mut v = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 1..ny {
        for i in 1..nx {
            let c = |ii: usize, jj: usize| psi[jj * nx + ii];
            v[j * (nx + 1) + i] = 0.25 * (c(i - 1, j - 1) + c(i, j - 1) + c(i - 1, j) + c(i, j));
        }
    }
    v
}

/// Face fluxes of `u = (∂ψ/∂y, −∂ψ/∂x)`.
///
/// ψ is averaged onto faces and differenced tangentially; on a uniform grid
/// that is the difference of the two vertex values bounding the face, which
/// makes the resulting flux discretely divergence-free and zero on walls.
pub fn curl_flux(mesh: &Mesh, psi: &[f64]) -> FaceFlux {
    let mut flux = vec![0.0; mesh.faces().len()];
    curl_flux_into(mesh, psi, &mut flux);
    FaceFlux(flux)
}

pub(crate) fn curl_flux_into(mesh: &Mesh, psi: &[f64], flux: &mut [f64]) {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let vert = vertex_values(mesh, psi);
    let v = |i: usize, j: usize| vert[j * (nx + 1) + i];
    let faces = mesh.faces();
    // u_x · A_x = (ψ_top − ψ_bottom) / Δy · A_x, with |A_x| = Δy
    for j in 0..ny {
        for i in 0..=nx {
            let f = mesh.x_face(i, j);
            flux[f] = (v(i, j + 1) - v(i, j)) * faces[f].area[0].signum();
        }
    }
    // u_y · A_y = −(ψ_right − ψ_left) / Δx · A_y, with |A_y| = Δx
    for j in 0..=ny {
        for i in 0..nx {
            let f = mesh.y_face(i, j);
            flux[f] = -(v(i + 1, j) - v(i, j)) * faces[f].area[1].signum();
        }
    }
}

/// Pairs of cells sharing only a vertex, two per interior vertex `(i, j)`:
/// first south-west to north-east, then south-east to north-west. Vertices
/// are ordered row-major.
pub fn corner_pairs(mesh: &Mesh) -> Vec<[usize; 2]> {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mut pairs = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 1..ny {
        for i in 1..nx {
            pairs.push([mesh.cell_index(i - 1, j - 1), mesh.cell_index(i, j)]);
            pairs.push([mesh.cell_index(i, j - 1), mesh.cell_index(i - 1, j)]);
        }
    }
    pairs
}

/// Volumetric exchange between cells driven by a stream function.
///
/// `face[f]` flows out of the owner of face `f`; `corner[k]` flows from the
/// first to the second cell of `corner_pairs(mesh)[k]`. Corner exchange is
/// zero except for the Arakawa scheme. For every cell the outflows sum to
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CellExchange {
    pub face: Vec<f64>,
    pub corner: Vec<f64>,
}

impl CellExchange {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            face: vec![0.0; mesh.faces().len()],
            corner: vec![0.0; 2 * (mesh.nx() - 1) * (mesh.ny() - 1)],
        }
    }

    pub fn from_psi(mesh: &Mesh, psi: &[f64], scheme: ConvectionScheme) -> Self {
        let mut ex = Self::zeros(mesh);
        ex.update(mesh, psi, scheme);
        ex
    }

    /// Recompute in place for a new stream function.
    pub fn update(&mut self, mesh: &Mesh, psi: &[f64], scheme: ConvectionScheme) {
        curl_flux_into(mesh, psi, &mut self.face);
        self.corner.iter_mut().for_each(|c| *c = 0.0);
        if scheme == ConvectionScheme::Arakawa {
            arakawa_exchange(mesh, psi, self);
        }
    }

    /// Net outflow of each cell, divided by its volume.
    pub fn divergence(&self, mesh: &Mesh) -> Vec<f64> {
        let mut div = FaceFlux(self.face.clone()).divergence(mesh);
        for ([a, b], c) in corner_pairs(mesh).into_iter().zip(&self.corner) {
            div[a] += c / mesh.cell_volumes()[a];
            div[b] -= c / mesh.cell_volumes()[b];
        }
        div
    }
}

/// Rescale the curl flux (already in `ex.face`) to the Arakawa face
/// exchange and fill the corner exchange.
///
/// Exchanges come from the nine-point Jacobian with odd reflection of ψ
/// across the walls. Pairs reaching through a wall are dropped, and the
/// cells lining the walls are closed by an exchange `(ψ_a + ψ_b) / 6`
/// running anticlockwise between consecutive wall cells, which restores a
/// zero net outflow.
fn arakawa_exchange(mesh: &Mesh, psi: &[f64], ex: &mut CellExchange) {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let p = |i: usize, j: usize| psi[mesh.cell_index(i, j)];
    ex.face.iter_mut().for_each(|f| *f *= 2.0 / 3.0);
    let mut k = 0;
    for j in 1..ny {
        for i in 1..nx {
            ex.corner[k] = (p(i - 1, j) - p(i, j - 1)) / 6.0;
            ex.corner[k + 1] = (p(i - 1, j - 1) - p(i, j)) / 6.0;
            k += 2;
        }
    }
    let faces = mesh.faces();
    let mut ring = |f: usize, from: usize, to: usize| {
        let sign = if faces[f].owner == from { 1.0 } else { -1.0 };
        ex.face[f] += sign * (psi[from] + psi[to]) / 6.0;
    };
    for i in 0..nx - 1 {
        ring(mesh.x_face(i + 1, 0), mesh.cell_index(i, 0), mesh.cell_index(i + 1, 0));
        ring(
            mesh.x_face(i + 1, ny - 1),
            mesh.cell_index(i + 1, ny - 1),
            mesh.cell_index(i, ny - 1),
        );
    }
    for j in 0..ny - 1 {
        ring(
            mesh.y_face(nx - 1, j + 1),
            mesh.cell_index(nx - 1, j),
            mesh.cell_index(nx - 1, j + 1),
        );
        ring(mesh.y_face(0, j + 1), mesh.cell_index(0, j + 1), mesh.cell_index(0, j));
    }
}

fn face_value(scheme: ConvectionScheme, flux: f64, q_owner: f64, q_neighbor: f64) -> f64 {
    match scheme {
        ConvectionScheme::Upwind | ConvectionScheme::VanLeer => {
            if flux >= 0.0 {
                q_owner
            } else {
                q_neighbor
            }
        }
        _ => 0.5 * (q_owner + q_neighbor),
    }
}

/// `∇·(u q)` per unit volume. `boundary` gives the face value of `q` on
/// boundary faces (indexed by face id); `None` means homogeneous.
pub fn apply_convection(
    mesh: &Mesh,
    ex: &CellExchange,
    q: &[f64],
    boundary: Option<&[f64]>,
    scheme: ConvectionScheme,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let phi = ex.face[f];
        match face.neighbor {
            FaceNeighbor::Cell(nb) => {
                let qf = face_value(scheme, phi, q[face.owner], q[nb]);
                out[face.owner] += phi * qf;
                out[nb] -= phi * qf;
            }
            FaceNeighbor::Boundary(_) => {
                let qb = boundary.map_or(0.0, |b| b[f]);
                out[face.owner] += phi * qb;
            }
        }
    }
    for ([a, b], &c) in corner_pairs(mesh).into_iter().zip(&ex.corner) {
        let g = 0.5 * c * (q[a] + q[b]);
        out[a] += g;
        out[b] -= g;
    }
    for (o, v) in out.iter_mut().zip(mesh.cell_volumes()) {
        *o /= v;
    }
    if scheme == ConvectionScheme::VanLeer {
        for (o, c) in out.iter_mut().zip(limited_correction(mesh, ex, q)) {
            *o += c;
        }
    }
    out
}

fn van_leer(r: f64) -> f64 {
    (r + r.abs()) / (1.0 + r.abs())
}

/// Cell one step further upwind of `up`, away from `down`, if it exists.
fn far_upwind(mesh: &Mesh, up: usize, down: usize) -> Option<usize> {
    let nx = mesh.nx() as isize;
    let (ui, uj) = ((up as isize) % nx, (up as isize) / nx);
    let (di, dj) = ((down as isize) % nx, (down as isize) / nx);
    let (i, j) = (2 * ui - di, 2 * uj - dj);
    (i >= 0 && j >= 0 && i < nx && j < mesh.ny() as isize).then(|| mesh.cell_index(i as usize, j as usize))
}

/// Per-volume difference between van Leer limited and upwind face fluxes
/// of `q` on interior faces. Zero where the far-upwind cell is missing.
pub fn limited_correction(mesh: &Mesh, ex: &CellExchange, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let FaceNeighbor::Cell(nb) = face.neighbor else { continue };
        let phi = ex.face[f];
        let (up, down) = if phi >= 0.0 { (face.owner, nb) } else { (nb, face.owner) };
        let Some(uu) = far_upwind(mesh, up, down) else { continue };
        let jump = q[down] - q[up];
        if jump == 0.0 {
            continue;
        }
        let r = (q[up] - q[uu]) / jump;
        let g = phi * 0.5 * van_leer(r) * jump;
        out[face.owner] += g;
        out[nb] -= g;
    }
    for (o, v) in out.iter_mut().zip(mesh.cell_volumes()) {
        *o /= v;
    }
    out
}

/// `Δq` per unit volume with two-point face gradients. Boundary faces use
/// the Dirichlet value from `boundary` (indexed by face id) or zero.
pub fn apply_laplacian(mesh: &Mesh, q: &[f64], boundary: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let coeff = face.magnitude() / face.distance;
        match face.neighbor {
            FaceNeighbor::Cell(nb) => {
                let g = coeff * (q[nb] - q[face.owner]);
                out[face.owner] += g;
                out[nb] -= g;
            }
            FaceNeighbor::Boundary(_) => {
                let qb = boundary.map_or(0.0, |b| b[f]);
                out[face.owner] += coeff * (qb - q[face.owner]);
            }
        }
    }
    for (o, v) in out.iter_mut().zip(mesh.cell_volumes()) {
        *o /= v;
    }
    out
}

/// Cell-centred Green–Gauss gradient with arithmetic face interpolation
/// and zero boundary values.
pub fn green_gauss_gradient(mesh: &Mesh, psi: &[f64]) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; mesh.n_cells()];
    for face in mesh.faces() {
        match face.neighbor {
            FaceNeighbor::Cell(nb) => {
                let pf = 0.5 * (psi[face.owner] + psi[nb]);
                g[face.owner][0] += pf * face.area[0];
                g[face.owner][1] += pf * face.area[1];
                g[nb][0] -= pf * face.area[0];
                g[nb][1] -= pf * face.area[1];
            }
            FaceNeighbor::Boundary(_) => {}
        }
    }
    for (gi, v) in g.iter_mut().zip(mesh.cell_volumes()) {
        gi[0] /= v;
        gi[1] /= v;
    }
    g
}

/// Face values `f(x, y)` at boundary face centroids, zero elsewhere.
pub fn boundary_values(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    mesh.faces()
        .iter()
        .map(|face| {
            if face.is_boundary() {
                f(face.centroid[0], face.centroid[1])
            } else {
                0.0
            }
        })
        .collect()
}

/// Matrix of `−coefficient · Δ` with homogeneous Dirichlet walls. Symmetric
/// positive-definite for `coefficient > 0` on a uniform mesh.
pub fn negative_laplacian_matrix(mesh: &Mesh, coefficient: f64) -> CsrMatrix {
    let mut t = Vec::with_capacity(5 * mesh.n_cells());
    for face in mesh.faces() {
        let c = coefficient * face.magnitude() / face.distance;
        let vo = mesh.cell_volumes()[face.owner];
        match face.neighbor {
            FaceNeighbor::Cell(nb) => {
                let vn = mesh.cell_volumes()[nb];
                t.push((face.owner, face.owner, c / vo));
                t.push((face.owner, nb, -c / vo));
                t.push((nb, nb, c / vn));
                t.push((nb, face.owner, -c / vn));
            }
            FaceNeighbor::Boundary(_) => t.push((face.owner, face.owner, c / vo)),
        }
    }
    CsrMatrix::from_triplets(mesh.n_cells(), &t).expect("indices come from the mesh")
}

/// Storage slots of the transport matrix for each face.
#[derive(Debug, Clone, Copy)]
enum FaceSlots {
    Interior {
        owner: usize,
        neighbor: usize,
        oo: usize,
        on: usize,
        nn: usize,
        no: usize,
    },
    Boundary {
        owner: usize,
        oo: usize,
    },
}

/// Slots of a corner pair `[a, b]`: `(a,a)`, `(a,b)`, `(b,b)`, `(b,a)`.
#[derive(Debug, Clone, Copy)]
struct CornerSlots {
    a: usize,
    b: usize,
    aa: usize,
    ab: usize,
    bb: usize,
    ba: usize,
}

/// Reusable nine-point sparsity pattern for the advection–diffusion matrix
/// `(1/Δt) I + C − (1/Re) Δ`.
#[derive(Debug, Clone)]
pub struct TransportAssembler {
    matrix: CsrMatrix,
    slots: Vec<FaceSlots>,
    corners: Vec<CornerSlots>,
    diag: Vec<usize>,
    inv_volume: Vec<f64>,
    diffusion: Vec<f64>,
}

impl TransportAssembler {
    pub fn new(mesh: &Mesh) -> Self {
        let mut t = Vec::new();
        for c in 0..mesh.n_cells() {
            t.push((c, c, 0.0));
        }
        for face in mesh.faces() {
            if let FaceNeighbor::Cell(nb) = face.neighbor {
                t.push((face.owner, nb, 0.0));
                t.push((nb, face.owner, 0.0));
            }
        }
        let pairs = corner_pairs(mesh);
        for &[a, b] in &pairs {
            t.push((a, b, 0.0));
            t.push((b, a, 0.0));
        }
        let matrix = CsrMatrix::from_triplets(mesh.n_cells(), &t).expect("mesh indices");
        let pos = |r, c| matrix.position(r, c).expect("in pattern");
        let slots = mesh
            .faces()
            .iter()
            .map(|face| match face.neighbor {
                FaceNeighbor::Cell(nb) => FaceSlots::Interior {
                    owner: face.owner,
                    neighbor: nb,
                    oo: pos(face.owner, face.owner),
                    on: pos(face.owner, nb),
                    nn: pos(nb, nb),
                    no: pos(nb, face.owner),
                },
                FaceNeighbor::Boundary(_) => FaceSlots::Boundary {
                    owner: face.owner,
                    oo: pos(face.owner, face.owner),
                },
            })
            .collect();
        let corners = pairs
            .iter()
            .map(|&[a, b]| CornerSlots {
                a,
                b,
                aa: pos(a, a),
                ab: pos(a, b),
                bb: pos(b, b),
                ba: pos(b, a),
            })
            .collect();
        let diag = (0..mesh.n_cells()).map(|c| pos(c, c)).collect();
        Self {
            slots,
            corners,
            diag,
            inv_volume: mesh.cell_volumes().iter().map(|v| 1.0 / v).collect(),
            diffusion: mesh
                .faces()
                .iter()
                .map(|f| f.magnitude() / f.distance)
                .collect(),
            matrix,
        }
    }

    /// Fill the matrix for the given exchange and add the boundary
    /// contributions (Dirichlet face values `boundary`) to `rhs`.
    pub fn assemble(
        &mut self,
        ex: &CellExchange,
        inv_dt: f64,
        inv_re: f64,
        scheme: ConvectionScheme,
        boundary: &[f64],
        rhs: &mut [f64],
    ) -> &CsrMatrix {
        let vals = self.matrix.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        for &d in &self.diag {
            vals[d] = inv_dt;
        }
        for (f, slot) in self.slots.iter().enumerate() {
            let phi = ex.face[f];
            let k = inv_re * self.diffusion[f];
            match *slot {
                FaceSlots::Interior {
                    owner,
                    neighbor,
                    oo,
                    on,
                    nn,
                    no,
                } => {
                    let (wo, wn) = match scheme {
                        ConvectionScheme::Upwind | ConvectionScheme::VanLeer => (phi.max(0.0), phi.min(0.0)),
                        _ => (0.5 * phi, 0.5 * phi),
                    };
                    let io = self.inv_volume[owner];
                    let inb = self.inv_volume[neighbor];
                    vals[oo] += (wo + k) * io;
                    vals[on] += (wn - k) * io;
                    vals[nn] += (-wn + k) * inb;
                    vals[no] += (-wo - k) * inb;
                }
                FaceSlots::Boundary { owner, oo } => {
                    let io = self.inv_volume[owner];
                    vals[oo] += k * io;
                    rhs[owner] += (k - phi) * boundary[f] * io;
                }
            }
        }
        for (s, &c) in self.corners.iter().zip(&ex.corner) {
            let w = 0.5 * c;
            let ia = self.inv_volume[s.a];
            let ib = self.inv_volume[s.b];
            vals[s.aa] += w * ia;
            vals[s.ab] += w * ia;
            vals[s.bb] -= w * ib;
            vals[s.ba] -= w * ib;
        }
        &self.matrix
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}
