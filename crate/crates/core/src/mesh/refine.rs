use std::collections::{HashMap, VecDeque};

use super::{edge_key, midpoint, orient_longest_edge, RefinementKind, TriangleMesh, NO_CELL};
use crate::error::{Error, Result};

/// Red refinement: every cell is split into four similar cells. Midpoints of
/// boundary edges are projected onto the circle for disk domains.
pub fn refine_uniform(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices().to_vec();
    vertices.reserve(mesh.n_edges());
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let mid = midpoint(mesh.vertices()[a], mesh.vertices()[b]);
        vertices.push(if mesh.is_boundary_edge(e) { mesh.domain().snap(mid) } else { mid });
    }

    let mut cells = Vec::with_capacity(4 * mesh.n_cells());
    for (k, &[a, b, c]) in mesh.cells().iter().enumerate() {
        let [e_bc, e_ca, e_ab] = mesh.cell_edges(k);
        let (m_bc, m_ca, m_ab) = (nv + e_bc, nv + e_ca, nv + e_ab);
        cells.push([a, m_ab, m_ca]);
        cells.push([m_ab, b, m_bc]);
        cells.push([m_ca, m_bc, c]);
        cells.push([m_bc, m_ca, m_ab]);
    }
    orient_longest_edge(&mut cells, &vertices);

    let mut history = mesh.history().to_vec();
    history.push(RefinementKind::Uniform);
    Ok(TriangleMesh::new(vertices, cells, mesh.domain().clone(), mesh.geometry_order())?
        .with_history(history))
}

/// Newest-vertex bisection of the marked cells with conforming closure.
///
/// Edges are marked first: the refinement edge of every marked cell, then,
/// until a fixed point, the refinement edge of every cell that has any marked
/// edge. Each cell is then bisected at its refinement edge and its children
/// are bisected again if their refinement edge (an edge of the parent) is
/// marked. Every marked edge is therefore split in both neighbouring cells.
pub fn refine_marked(mesh: &TriangleMesh, marked: &[usize]) -> Result<TriangleMesh> {
    if let Some(&k) = marked.iter().find(|&&k| k >= mesh.n_cells()) {
        return Err(Error::InvalidInput(format!("marked cell {k} out of range")));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    let mut edge_marked = vec![false; mesh.n_edges()];
    let mut queue = VecDeque::new();
    let mut n_marked_edges = 0usize;
    for &k in marked {
        n_marked_edges += mark_edge(mesh, mesh.cell_edges(k)[0], &mut queue, &mut edge_marked) as usize;
    }
    let initial = n_marked_edges;
    let mut pops = 0usize;
    while let Some(k) = queue.pop_front() {
        pops += 1;
        n_marked_edges += mark_edge(mesh, mesh.cell_edges(k)[0], &mut queue, &mut edge_marked) as usize;
    }
    let propagated = n_marked_edges - initial;
    log::debug!(
        "bisection closure: {} marked cells, {} edges ({} by propagation, {} queue visits)",
        marked.len(),
        n_marked_edges,
        propagated,
        pops
    );

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::with_capacity(n_marked_edges);
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        if edge_marked[e] {
            let mid = midpoint(mesh.vertices()[a], mesh.vertices()[b]);
            midpoints.insert((a, b), vertices.len());
            vertices.push(if mesh.is_boundary_edge(e) { mesh.domain().snap(mid) } else { mid });
        }
    }

    let mut cells = Vec::with_capacity(mesh.n_cells() + 2 * n_marked_edges);
    for &cell in mesh.cells() {
        bisect(cell, &midpoints, &mut cells);
    }

    let mut history = mesh.history().to_vec();
    history.push(RefinementKind::Bisection {
        marked: marked.len(),
        bisected_edges: n_marked_edges,
        propagated,
    });
    Ok(TriangleMesh::new(vertices, cells, mesh.domain().clone(), mesh.geometry_order())?
        .with_history(history))
}

fn mark_edge(mesh: &TriangleMesh, e: usize, queue: &mut VecDeque<usize>, edge_marked: &mut [bool]) -> bool {
    if edge_marked[e] {
        return false;
    }
    edge_marked[e] = true;
    for c in mesh.edge_cells(e) {
        if c != NO_CELL {
            queue.push_back(c);
        }
    }
    true
}

fn bisect(cell: [usize; 3], midpoints: &HashMap<(usize, usize), usize>, out: &mut Vec<[usize; 3]>) {
    let [a, b, c] = cell;
    match midpoints.get(&edge_key(b, c)) {
        Some(&m) => {
            bisect([m, a, b], midpoints, out);
            bisect([m, c, a], midpoints, out);
        }
        None => out.push(cell),
    }
}
