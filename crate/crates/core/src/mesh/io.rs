use std::io::{self, Write};

use super::TriangleMesh;

impl TriangleMesh {
    /// Writes the plain-text mesh format:
    ///
    /// ```text
    /// vertices <N>
    /// <x> <y>            (N lines)
    /// cells <M>
    /// <a> <b> <c>        (M lines, counterclockwise, zero-based)
    /// boundary_edges <K>
    /// <a> <b>            (K lines)
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "vertices {}", self.n_vertices())?;
        for p in self.vertices() {
            writeln!(w, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(w, "cells {}", self.n_cells())?;
        for c in self.cells() {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(w, "boundary_edges {}", self.boundary_edges().len())?;
        for &e in self.boundary_edges() {
            let [a, b] = self.edges()[e];
            writeln!(w, "{a} {b}")?;
        }
        Ok(())
    }

    /// Cell outlines as gnuplot data blocks (closed polygons separated by blank lines).
    pub fn write_gnuplot<W: Write>(&self, mut w: W) -> io::Result<()> {
        for c in self.cells() {
            for &v in c.iter().chain(std::iter::once(&c[0])) {
                let p = self.vertices()[v];
                writeln!(w, "{} {}", p[0], p[1])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
