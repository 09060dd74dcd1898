//! Conforming triangle meshes of the unit disk and of polygons.
//!
//! Cells are stored counterclockwise. The first vertex of every cell is its
//! newest vertex and the opposite edge `(cells[k][1], cells[k][2])` is the
//! refinement edge used by newest-vertex bisection. Local edge `i` of a cell
//! is the edge opposite local vertex `i`.

mod io;
mod quadrature;
mod refine;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::Point;

pub use quadrature::{gauss_legendre, quadrature, QuadratureRule};
pub use refine::{refine_marked, refine_uniform};

/// Marker for a missing neighbour in [`TriangleMesh::edge_cells`].
pub const NO_CELL: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Disk with curved boundary; new boundary vertices are projected onto the circle.
    Disk { center: Point, radius: f64 },
    /// Straight-sided domain covered exactly by the mesh.
    Polygon,
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    /// Projects a point onto the curved boundary. Polygons leave points unchanged.
    pub fn snap(&self, p: Point) -> Point {
        match *self {
            Domain::Disk { center, radius } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                let n = d[0].hypot(d[1]);
                if n == 0.0 {
                    return p;
                }
                [center[0] + radius * d[0] / n, center[1] + radius * d[1] / n]
            }
            Domain::Polygon => p,
        }
    }

    pub fn is_curved(&self) -> bool {
        matches!(self, Domain::Disk { .. })
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Domain::Disk { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) <= radius
            }
            Domain::Polygon => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RefinementKind {
    Uniform,
    Bisection {
        marked: usize,
        bisected_edges: usize,
        propagated: usize,
    },
}

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_cells: Vec<[usize; 2]>,
    boundary_edges: Vec<usize>,
    boundary_vertex: Vec<bool>,
    edge_nodes: Vec<Point>,
    curved_edge: Vec<bool>,
    domain: Domain,
    geometry_order: u8,
    history: Vec<RefinementKind>,
}

impl TriangleMesh {
    /// Builds a mesh from counterclockwise cells and derives the edge topology.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        domain: Domain,
        geometry_order: u8,
    ) -> Result<Self> {
        if !(1..=2).contains(&geometry_order) {
            return Err(Error::InvalidInput(format!(
                "geometry order must be 1 or 2, got {geometry_order}"
            )));
        }
        let nv = vertices.len();
        for (k, c) in cells.iter().enumerate() {
            if c.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidInput(format!("cell {k} references a missing vertex")));
            }
            let area = signed_area(&[vertices[c[0]], vertices[c[1]], vertices[c[2]]]);
            if area <= 0.0 {
                return Err(Error::DegenerateCell { cell: k, det: 2.0 * area });
            }
        }

        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut edges = Vec::with_capacity(cells.len() * 3 / 2 + 8);
        let mut edge_cells: Vec<[usize; 2]> = Vec::with_capacity(edges.capacity());
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            for i in 0..3 {
                let key = edge_key(c[(i + 1) % 3], c[(i + 2) % 3]);
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push([NO_CELL, NO_CELL]);
                    edges.len() - 1
                });
                let slot = &mut edge_cells[e];
                if slot[0] == NO_CELL {
                    slot[0] = k;
                } else if slot[1] == NO_CELL {
                    slot[1] = k;
                } else {
                    return Err(Error::InvalidInput(format!(
                        "edge ({}, {}) shared by more than two cells",
                        key.0, key.1
                    )));
                }
                ce[i] = e;
            }
            cell_edges.push(ce);
        }

        let mut boundary_vertex = vec![false; nv];
        let mut boundary_edges = Vec::new();
        for (e, ec) in edge_cells.iter().enumerate() {
            if ec[1] == NO_CELL {
                boundary_edges.push(e);
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
        }

        let curved_domain = domain.is_curved() && geometry_order == 2;
        let mut curved_edge = vec![false; edges.len()];
        let edge_nodes = edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                let mid = midpoint(vertices[a], vertices[b]);
                if curved_domain && edge_cells[e][1] == NO_CELL {
                    curved_edge[e] = true;
                    domain.snap(mid)
                } else {
                    mid
                }
            })
            .collect();

        Ok(Self {
            vertices,
            cells,
            edges,
            cell_edges,
            edge_cells,
            boundary_edges,
            boundary_vertex,
            edge_nodes,
            curved_edge,
            domain,
            geometry_order,
            history: Vec::new(),
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_edges(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    /// The one or two cells adjacent to an edge; the second is [`NO_CELL`] on the boundary.
    pub fn edge_cells(&self, edge: usize) -> [usize; 2] {
        self.edge_cells[edge]
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_cells[edge][1] == NO_CELL
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn n_boundary_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|&&b| b).count()
    }

    /// Geometry node on an edge: the chord midpoint, or its projection onto the
    /// circle for curved boundary edges of order-2 meshes.
    pub fn edge_node(&self, edge: usize) -> Point {
        self.edge_nodes[edge]
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn geometry_order(&self) -> u8 {
        self.geometry_order
    }

    pub fn history(&self) -> &[RefinementKind] {
        &self.history
    }

    pub(crate) fn with_history(mut self, history: Vec<RefinementKind>) -> Self {
        self.history = history;
        self
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    /// Whether the cell uses a quadratic (isoparametric) geometry map.
    pub fn is_curved(&self, cell: usize) -> bool {
        self.cell_edges[cell].iter().any(|&e| self.curved_edge[e])
    }

    /// Six geometry nodes of a cell: vertices followed by the edge nodes
    /// opposite vertex 0, 1, 2.
    pub fn geometry_nodes(&self, cell: usize) -> [Point; 6] {
        let [a, b, c] = self.cell_points(cell);
        let e = self.cell_edges[cell];
        [a, b, c, self.edge_nodes[e[0]], self.edge_nodes[e[1]], self.edge_nodes[e[2]]]
    }

    /// Area of the straight triangle spanned by the cell's vertices.
    pub fn cell_area(&self, cell: usize) -> f64 {
        signed_area(&self.cell_points(cell))
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let p = self.cell_points(cell);
        (0..3)
            .map(|i| dist(p[(i + 1) % 3], p[(i + 2) % 3]))
            .fold(0.0, f64::max)
    }

    /// Global mesh size `h = max_K h_K`.
    pub fn h(&self) -> f64 {
        (0..self.n_cells()).map(|k| self.cell_diameter(k)).fold(0.0, f64::max)
    }

    /// Inradius over diameter for one cell.
    pub fn shape_ratio(&self, cell: usize) -> f64 {
        let p = self.cell_points(cell);
        let perimeter: f64 = (0..3).map(|i| dist(p[(i + 1) % 3], p[(i + 2) % 3])).sum();
        let inradius = 2.0 * signed_area(&p) / perimeter;
        inradius / self.cell_diameter(cell)
    }

    pub fn min_shape_ratio(&self) -> f64 {
        (0..self.n_cells())
            .map(|k| self.shape_ratio(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Total area of the discrete domain, using the isoparametric map on curved cells.
    pub fn area(&self) -> f64 {
        let rule = quadrature(4).expect("degree 4 rule");
        let mut total = 0.0;
        for k in 0..self.n_cells() {
            if self.is_curved(k) {
                let nodes = self.geometry_nodes(k);
                for (q, w) in rule.weights.iter().enumerate() {
                    let (xi, eta) = rule.ref_point(q);
                    let jac = quadratic_map_jacobian(&nodes, xi, eta);
                    total += w * (jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]);
                }
            } else {
                total += self.cell_area(k);
            }
        }
        total
    }

    /// Structural conformity audit: every edge has one or two cells, the
    /// boundary edges form closed loops, Euler's formula holds for a simply
    /// connected domain, cells are positively oriented and curved boundary
    /// vertices lie on the circle.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for k in 0..self.n_cells() {
            if self.cell_area(k) <= 0.0 {
                return Err(format!("cell {k} has non-positive area"));
            }
        }
        let mut degree = vec![0usize; self.n_vertices()];
        for &e in &self.boundary_edges {
            degree[self.edges[e][0]] += 1;
            degree[self.edges[e][1]] += 1;
        }
        for (v, &d) in degree.iter().enumerate() {
            if d != 0 && d != 2 {
                return Err(format!("vertex {v} touches {d} boundary edges (hanging node?)"));
            }
        }
        let euler = self.n_vertices() as i64 - self.n_edges() as i64 + self.n_cells() as i64;
        if euler != 1 {
            return Err(format!("Euler characteristic {euler} != 1"));
        }
        let mut used = vec![false; self.n_vertices()];
        for c in &self.cells {
            for &v in c {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|&u| !u) {
            return Err(format!("vertex {v} belongs to no cell"));
        }
        if let Domain::Disk { center, radius } = self.domain {
            for (v, p) in self.vertices.iter().enumerate() {
                if self.boundary_vertex[v] {
                    let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                    if (r - radius).abs() > 1e-12 * radius.max(1.0) {
                        return Err(format!("boundary vertex {v} at radius {r} off the circle"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Conforming mesh of a disk. `resolution` is the number of segments along
/// each spoke of the underlying hexagon, giving `6 * resolution^2` cells; the
/// hexagon is mapped radially onto the disk so boundary vertices lie exactly
/// on the circle.
pub fn generate_disk_mesh(
    center: Point,
    radius: f64,
    resolution: usize,
    geometry_order: u8,
) -> Result<TriangleMesh> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be at least 1".into()));
    }
    let n = resolution as i64;
    let inside = |i: i64, j: i64| i.abs() <= n && j.abs() <= n && (i + j).abs() <= n;
    let half_sqrt3 = 3f64.sqrt() / 2.0;

    let mut index = HashMap::new();
    let mut vertices = Vec::new();
    for j in -n..=n {
        for i in -n..=n {
            if !inside(i, j) {
                continue;
            }
            let p = [(i as f64 + 0.5 * j as f64) / n as f64, half_sqrt3 * j as f64 / n as f64];
            let on_boundary = i.abs().max(j.abs()).max((i + j).abs()) == n;
            let q = hexagon_to_disk(p, on_boundary);
            index.insert((i, j), vertices.len());
            vertices.push([center[0] + radius * q[0], center[1] + radius * q[1]]);
        }
    }

    let mut cells = Vec::with_capacity(6 * resolution * resolution);
    for j in -n..n {
        for i in -n..n {
            let up = [(i, j), (i + 1, j), (i, j + 1)];
            let down = [(i + 1, j), (i + 1, j + 1), (i, j + 1)];
            for tri in [up, down] {
                if tri.iter().all(|&(a, b)| inside(a, b)) {
                    cells.push([index[&tri[0]], index[&tri[1]], index[&tri[2]]]);
                }
            }
        }
    }
    orient_longest_edge(&mut cells, &vertices);
    TriangleMesh::new(vertices, cells, Domain::Disk { center, radius }, geometry_order)
}

/// Radial map from the regular hexagon with unit circumradius onto the unit disk.
fn hexagon_to_disk(p: Point, on_boundary: bool) -> Point {
    let r = p[0].hypot(p[1]);
    if r == 0.0 {
        return p;
    }
    if on_boundary {
        return [p[0] / r, p[1] / r];
    }
    let apothem = 3f64.sqrt() / 2.0;
    let rho = (0..6)
        .map(|k| {
            let t = std::f64::consts::PI / 6.0 + k as f64 * std::f64::consts::PI / 3.0;
            (p[0] * t.cos() + p[1] * t.sin()) / apothem
        })
        .fold(f64::NEG_INFINITY, f64::max);
    [p[0] * rho / r, p[1] * rho / r]
}

/// Structured mesh of an axis-aligned rectangle with `nx * ny` squares, each
/// split along its lower-left to upper-right diagonal.
pub fn generate_rectangle_mesh(min: Point, max: Point, nx: usize, ny: usize) -> Result<TriangleMesh> {
    if nx == 0 || ny == 0 || !(max[0] > min[0]) || !(max[1] > min[1]) {
        return Err(Error::InvalidInput("rectangle mesh needs positive extent and counts".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                min[0] + (max[0] - min[0]) * i as f64 / nx as f64,
                min[1] + (max[1] - min[1]) * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    orient_longest_edge(&mut cells, &vertices);
    TriangleMesh::new(vertices, cells, Domain::Polygon, 1)
}

/// Rotates every cell so that its longest edge becomes the refinement edge.
pub(crate) fn orient_longest_edge(cells: &mut [[usize; 3]], vertices: &[Point]) {
    for c in cells.iter_mut() {
        let len = |i: usize| dist(vertices[c[(i + 1) % 3]], vertices[c[(i + 2) % 3]]);
        let mut best = 0;
        for i in 1..3 {
            if len(i) > len(best) * (1.0 + 1e-12) {
                best = i;
            }
        }
        c.rotate_left(best);
    }
}

pub(crate) fn signed_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Jacobian `dx/dxi` (row = physical component) of the quadratic map defined
/// by six geometry nodes, evaluated at reference point `(xi, eta)`.
pub(crate) fn quadratic_map_jacobian(nodes: &[Point; 6], xi: f64, eta: f64) -> [[f64; 2]; 2] {
    let grads = crate::space::reference::p2_gradients(xi, eta);
    let mut jac = [[0.0; 2]; 2];
    for (node, g) in nodes.iter().zip(grads.iter()) {
        for d in 0..2 {
            jac[d][0] += node[d] * g[0];
            jac[d][1] += node[d] * g[1];
        }
    }
    jac
}
