//! Structured orthogonal finite-volume mesh of a rectangle.
//!
//! Cells are ordered row-major with `x` varying fastest. Every face stores
//! its owner (the lower-index adjacent cell), its neighbour or boundary side,
//! and the area vector pointing out of the owner.

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// The double-gyre basin `[0, 1] × [-1, 1]`.
    pub const fn basin() -> Self {
        Self::new(0.0, 1.0, -1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceNeighbor {
    Cell(usize),
    Boundary(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normal {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub owner: usize,
    pub neighbor: FaceNeighbor,
    pub normal: Normal,
    /// Area vector, outward from `owner`.
    pub area: [f64; 2],
    pub centroid: [f64; 2],
    /// Distance between the owner centroid and the neighbour centroid, or
    /// the face centroid on the boundary.
    pub distance: f64,
}

impl Face {
    pub fn magnitude(&self) -> f64 {
        self.area[0].hypot(self.area[1])
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self.neighbor, FaceNeighbor::Boundary(_))
    }
}

/// Face ids of one cell, in the order west, east, south, north.
pub type CellFaces = [usize; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    bounds: Bounds,
    dx: f64,
    dy: f64,
    cell_volumes: Vec<f64>,
    cell_centroids: Vec<[f64; 2]>,
    faces: Vec<Face>,
    cell_faces: Vec<CellFaces>,
}

impl Mesh {
    /// Partition `bounds` into `nx × ny` equal cells.
    pub fn new(nx: usize, ny: usize, bounds: Bounds) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!(
                "mesh needs at least 2 cells per direction, got {nx}x{ny}"
            )));
        }
        let finite = [bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            return Err(Error::invalid(format!("degenerate bounds {bounds:?}")));
        }

        let dx = bounds.width() / nx as f64;
        let dy = bounds.height() / ny as f64;
        let n_cells = nx * ny;
        let cell_volumes = vec![dx * dy; n_cells];
        let mut cell_centroids = Vec::with_capacity(n_cells);
        for j in 0..ny {
            for i in 0..nx {
                cell_centroids.push([
                    bounds.x_min + (i as f64 + 0.5) * dx,
                    bounds.y_min + (j as f64 + 0.5) * dy,
                ]);
            }
        }

        let n_faces = (nx + 1) * ny + nx * (ny + 1);
        let mut faces = Vec::with_capacity(n_faces);
        let mut cell_faces = vec![[usize::MAX; 4]; n_cells];
        let cell = |i: usize, j: usize| j * nx + i;

        // x-normal faces, one row of nx + 1 per cell row
        for j in 0..ny {
            let yc = bounds.y_min + (j as f64 + 0.5) * dy;
            for i in 0..=nx {
                let xf = bounds.x_min + i as f64 * dx;
                let id = faces.len();
                let face = if i == 0 {
                    cell_faces[cell(0, j)][0] = id;
                    Face {
                        owner: cell(0, j),
                        neighbor: FaceNeighbor::Boundary(Side::Left),
                        normal: Normal::X,
                        area: [-dy, 0.0],
                        centroid: [xf, yc],
                        distance: 0.5 * dx,
                    }
                } else if i == nx {
                    cell_faces[cell(nx - 1, j)][1] = id;
                    Face {
                        owner: cell(nx - 1, j),
                        neighbor: FaceNeighbor::Boundary(Side::Right),
                        normal: Normal::X,
                        area: [dy, 0.0],
                        centroid: [xf, yc],
                        distance: 0.5 * dx,
                    }
                } else {
                    cell_faces[cell(i - 1, j)][1] = id;
                    cell_faces[cell(i, j)][0] = id;
                    Face {
                        owner: cell(i - 1, j),
                        neighbor: FaceNeighbor::Cell(cell(i, j)),
                        normal: Normal::X,
                        area: [dy, 0.0],
                        centroid: [xf, yc],
                        distance: dx,
                    }
                };
                faces.push(face);
            }
        }

        // y-normal faces, ny + 1 rows of nx
        for j in 0..=ny {
            let yf = bounds.y_min + j as f64 * dy;
            for i in 0..nx {
                let xc = bounds.x_min + (i as f64 + 0.5) * dx;
                let id = faces.len();
                let face = if j == 0 {
                    cell_faces[cell(i, 0)][2] = id;
                    Face {
                        owner: cell(i, 0),
                        neighbor: FaceNeighbor::Boundary(Side::Bottom),
                        normal: Normal::Y,
                        area: [0.0, -dx],
                        centroid: [xc, yf],
                        distance: 0.5 * dy,
                    }
                } else if j == ny {
                    cell_faces[cell(i, ny - 1)][3] = id;
                    Face {
                        owner: cell(i, ny - 1),
                        neighbor: FaceNeighbor::Boundary(Side::Top),
                        normal: Normal::Y,
                        area: [0.0, dx],
                        centroid: [xc, yf],
                        distance: 0.5 * dy,
                    }
                } else {
                    cell_faces[cell(i, j - 1)][3] = id;
                    cell_faces[cell(i, j)][2] = id;
                    Face {
                        owner: cell(i, j - 1),
                        neighbor: FaceNeighbor::Cell(cell(i, j)),
                        normal: Normal::Y,
                        area: [0.0, dx],
                        centroid: [xc, yf],
                        distance: dy,
                    }
                };
                faces.push(face);
            }
        }
        debug_assert_eq!(faces.len(), n_faces);

        Ok(Self {
            nx,
            ny,
            bounds,
            dx,
            dy,
            cell_volumes,
            cell_centroids,
            faces,
            cell_faces,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Id of the x-normal face at vertex column `i` (`0..=nx`) in cell row `j`.
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Id of the y-normal face in cell column `i` at vertex row `j` (`0..=ny`).
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        (self.nx + 1) * self.ny + j * self.nx + i
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    pub fn cell_centroids(&self) -> &[[f64; 2]] {
        &self.cell_centroids
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn cell_faces(&self) -> &[CellFaces] {
        &self.cell_faces
    }

    /// Area vector of `face` as seen from `cell` (outward from that cell).
    pub fn outward_area(&self, face: usize, cell: usize) -> [f64; 2] {
        let f = &self.faces[face];
        if f.owner == cell {
            f.area
        } else {
            [-f.area[0], -f.area[1]]
        }
    }

    /// Every boundary face with the side of the rectangle it lies on.
    pub fn boundary_faces(&self) -> Vec<(usize, Side)> {
        self.faces
            .iter()
            .enumerate()
            .filter_map(|(id, f)| match f.neighbor {
                FaceNeighbor::Boundary(side) => Some((id, side)),
                FaceNeighbor::Cell(_) => None,
            })
            .collect()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }
}
