//! Conforming triangulations with edge orientation, boundary tags and
//! newest-vertex bisection (NVB).
//!
//! Every cell stores its vertices as `[a, b, c]` where `(a, b)` is the
//! refinement edge and `c` is the newest vertex. Local edge `i` of a cell is
//! the edge opposite local vertex `i`, so the refinement edge is local edge 2.
//!
//! Each edge carries a fixed unit normal `n_F`. On boundary edges it points
//! out of the domain. On interior edges it points out of the cell with the
//! lower id at the time the edge was created; the incident cell it points out
//! of is stored first (`cells.0`) and has orientation sign `+1`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, lower vertex id first. The edge is parametrized by
    /// arclength from `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    pub normal: Vec2,
    /// `cells.0` is the cell `normal` points out of.
    pub cells: (usize, Option<usize>),
    /// Zero on interior edges.
    pub boundary_tag: u32,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh2D {
    vertices: Vec<Vec2>,
    cells: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    cell_edges: Vec<[usize; 3]>,
    generation: Vec<u32>,
}

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Properties an edge keeps across a rebuild.
#[derive(Clone, Copy, Debug)]
struct EdgeInfo {
    normal: Option<Vec2>,
    tag: u32,
    order: Option<usize>,
}

impl Mesh2D {
    /// Structured triangulation with `n` subdivisions per unit side.
    ///
    /// Each square is cut along its `(x0,y0)-(x1,y1)` diagonal, which is also
    /// the refinement edge of both halves. For the L-shape the re-entrant
    /// corner is the vertex at the origin.
    pub fn build_structured(domain: Domain, n: usize) -> Mesh2D {
        assert!(n >= 1, "need at least one subdivision");
        let blocks: &[(f64, f64)] = match domain {
            Domain::UnitSquare => &[(0.0, 0.0)],
            Domain::LShape => &[(-1.0, -1.0), (-1.0, 0.0), (0.0, 0.0)],
        };
        let h = 1.0 / n as f64;
        let mut vertices: Vec<Vec2> = Vec::new();
        let mut index: HashMap<(i64, i64), usize> = HashMap::new();
        let mut vid = |x: f64, y: f64, vertices: &mut Vec<Vec2>| -> usize {
            let k = ((x * n as f64).round() as i64, (y * n as f64).round() as i64);
            *index.entry(k).or_insert_with(|| {
                vertices.push(Vec2::new(x, y));
                vertices.len() - 1
            })
        };
        let mut cells = Vec::new();
        for &(ox, oy) in blocks {
            for j in 0..n {
                for i in 0..n {
                    let x0 = ox + i as f64 * h;
                    let y0 = oy + j as f64 * h;
                    let p00 = vid(x0, y0, &mut vertices);
                    let p10 = vid(x0 + h, y0, &mut vertices);
                    let p11 = vid(x0 + h, y0 + h, &mut vertices);
                    let p01 = vid(x0, y0 + h, &mut vertices);
                    cells.push([p00, p11, p10]);
                    cells.push([p11, p00, p01]);
                }
            }
        }
        let generation = vec![0; cells.len()];
        Self::from_parts(vertices, cells, generation, &HashMap::new(), true)
            .expect("structured mesh is conforming")
    }

    /// Mesh from raw triangles; each cell's first two vertices span its
    /// refinement edge. Open edges become boundary edges with tag 1.
    pub fn from_triangles(vertices: Vec<Vec2>, cells: Vec<[usize; 3]>) -> Result<Mesh2D> {
        let generation = vec![0; cells.len()];
        let mesh = Self::from_parts(vertices, cells, generation, &HashMap::new(), true)?;
        mesh.check_conformity()?;
        Ok(mesh)
    }

    /// Builds the edge structure for a cell list. Edges present in `prior`
    /// keep their normal, tag and relative order; new edges follow in order
    /// of first appearance.
    fn from_parts(
        vertices: Vec<Vec2>,
        cells: Vec<[usize; 3]>,
        generation: Vec<u32>,
        prior: &HashMap<EdgeKey, EdgeInfo>,
        tag_open_edges: bool,
    ) -> Result<Mesh2D> {
        let mut first_seen: Vec<EdgeKey> = Vec::new();
        let mut incidence: HashMap<EdgeKey, Vec<(usize, usize)>> = HashMap::new();
        for (c, cell) in cells.iter().enumerate() {
            for i in 0..3 {
                let k = key(cell[(i + 1) % 3], cell[(i + 2) % 3]);
                let list = incidence.entry(k).or_default();
                if list.is_empty() {
                    first_seen.push(k);
                }
                list.push((c, i));
            }
        }

        // surviving edges first, by their previous index
        let mut keys: Vec<(usize, usize, EdgeKey)> = first_seen
            .iter()
            .enumerate()
            .map(|(pos, k)| match prior.get(k).and_then(|info| info.order) {
                Some(old) => (0, old, *k),
                None => (1, pos, *k),
            })
            .collect();
        keys.sort_unstable();

        let mut edges = Vec::with_capacity(keys.len());
        let mut cell_edges = vec![[usize::MAX; 3]; cells.len()];
        for (_, _, k) in keys {
            let inc = &incidence[&k];
            if inc.len() > 2 {
                return Err(Error::NonConforming(format!(
                    "edge ({}, {}) shared by {} cells",
                    k.0,
                    k.1,
                    inc.len()
                )));
            }
            let info = prior.get(&k);
            let (a, b) = (vertices[k.0], vertices[k.1]);
            let t = b - a;
            let mut normal = Vec2::new(t.y, -t.x).normalize();
            let outward_from = |c: usize, normal: &Vec2| -> bool {
                let cell = cells[c];
                let centroid = (vertices[cell[0]] + vertices[cell[1]] + vertices[cell[2]]) / 3.0;
                normal.dot(&(a - centroid)) > 0.0
            };
            let mut sorted: Vec<usize> = inc.iter().map(|&(c, _)| c).collect();
            sorted.sort_unstable();
            match info.and_then(|i| i.normal) {
                Some(n) => normal = n,
                None => {
                    if !outward_from(sorted[0], &normal) {
                        normal = -normal;
                    }
                }
            }
            let plus = if outward_from(sorted[0], &normal) { 0 } else { 1 };
            let cells_pair = if sorted.len() == 2 {
                (sorted[plus], Some(sorted[1 - plus]))
            } else {
                (sorted[0], None)
            };
            let tag = match info {
                Some(i) => i.tag,
                None if sorted.len() == 1 && tag_open_edges => 1,
                None => 0,
            };
            let id = edges.len();
            for &(c, i) in inc {
                cell_edges[c][i] = id;
            }
            edges.push(Edge {
                vertices: [k.0, k.1],
                normal,
                cells: cells_pair,
                boundary_tag: tag,
            });
        }
        Ok(Mesh2D {
            vertices,
            cells,
            edges,
            cell_edges,
            generation,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge ids of a cell; entry `i` is opposite local vertex `i`.
    pub fn cell_edges(&self, c: usize) -> [usize; 3] {
        self.cell_edges[c]
    }

    pub fn generation(&self, c: usize) -> u32 {
        self.generation[c]
    }

    pub fn cell_points(&self, c: usize) -> [Vec2; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Orientation sign `n_F . n_T` of local edge `i` of cell `c`.
    pub fn sign(&self, c: usize, i: usize) -> f64 {
        if self.edges[self.cell_edges[c][i]].cells.0 == c {
            1.0
        } else {
            -1.0
        }
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_points(c);
        0.5 * ((b - a).perp(&(d - a))).abs()
    }

    pub fn cell_centroid(&self, c: usize) -> Vec2 {
        let [a, b, d] = self.cell_points(c);
        (a + b + d) / 3.0
    }

    /// Longest edge length.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_points(c);
        (b - a).norm().max((d - b).norm()).max((a - d).norm())
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[b] - self.vertices[a]).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell_diameter(c))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all cells, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for c in 0..self.num_cells() {
            let p = self.cell_points(c);
            for i in 0..3 {
                let u = p[(i + 1) % 3] - p[i];
                let v = p[(i + 2) % 3] - p[i];
                let cos = u.dot(&v) / (u.norm() * v.norm());
                min = min.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    fn edge_infos(&self) -> HashMap<EdgeKey, EdgeInfo> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                (
                    key(e.vertices[0], e.vertices[1]),
                    EdgeInfo {
                        normal: Some(e.normal),
                        tag: e.boundary_tag,
                        order: Some(i),
                    },
                )
            })
            .collect()
    }

    /// Newest-vertex bisection of the marked cells with recursive closure.
    ///
    /// Each marked cell has its refinement edge bisected; cells with a
    /// bisected edge that is not their refinement edge get their refinement
    /// edge bisected too, until no hanging vertex remains. A cell ends up
    /// split into 2, 3 or 4 children.
    pub fn refine_nvb(&self, marked: &[usize]) -> Mesh2D {
        if marked.is_empty() {
            return self.clone();
        }
        let mut edge_marked = vec![false; self.num_edges()];
        let mut queue: Vec<usize> = Vec::new();
        for &c in marked {
            let e = self.cell_edges[c][2];
            if !edge_marked[e] {
                edge_marked[e] = true;
                queue.push(e);
            }
        }
        while let Some(e) = queue.pop() {
            let (c0, c1) = self.edges[e].cells;
            for c in std::iter::once(c0).chain(c1) {
                let r = self.cell_edges[c][2];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    queue.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<EdgeKey, usize> = HashMap::new();
        let mut info = self.edge_infos();
        for (e, edge) in self.edges.iter().enumerate() {
            if !edge_marked[e] {
                continue;
            }
            let [a, b] = edge.vertices;
            vertices.push(0.5 * (self.vertices[a] + self.vertices[b]));
            let m = vertices.len() - 1;
            midpoint.insert((a, b), m);
            let half = EdgeInfo {
                normal: Some(edge.normal),
                tag: edge.boundary_tag,
                order: None,
            };
            info.remove(&(a, b));
            info.insert(key(a, m), half);
            info.insert(key(m, b), half);
        }

        let mut cells = Vec::with_capacity(self.num_cells() * 2);
        let mut generation = Vec::with_capacity(self.num_cells() * 2);
        fn split(
            cell: [usize; 3],
            generation: u32,
            midpoint: &HashMap<EdgeKey, usize>,
            out: &mut Vec<[usize; 3]>,
            out_gen: &mut Vec<u32>,
        ) {
            let [a, b, c] = cell;
            match midpoint.get(&key(a, b)) {
                None => {
                    out.push(cell);
                    out_gen.push(generation);
                }
                Some(&m) => {
                    split([c, a, m], generation + 1, midpoint, out, out_gen);
                    split([b, c, m], generation + 1, midpoint, out, out_gen);
                }
            }
        }
        for (c, &cell) in self.cells.iter().enumerate() {
            split(cell, self.generation[c], &midpoint, &mut cells, &mut generation);
        }
        Self::from_parts(vertices, cells, generation, &info, false)
            .expect("NVB closure yields a conforming mesh")
    }

    /// Bisects every cell once (with closure). Two calls halve `h_max` on the
    /// structured meshes.
    pub fn uniform_refine(&self) -> Mesh2D {
        let all: Vec<usize> = (0..self.num_cells()).collect();
        self.refine_nvb(&all)
    }

    /// Checks the invariants of a conforming triangulation: one or two cells
    /// per edge, open edges tagged as boundary, no vertex strictly inside an
    /// edge, positive cell areas.
    pub fn check_conformity(&self) -> Result<()> {
        for (e, edge) in self.edges.iter().enumerate() {
            if edge.is_boundary() != (edge.boundary_tag != 0) {
                return Err(Error::NonConforming(format!(
                    "edge {e} has {} incident cells but boundary tag {}",
                    if edge.is_boundary() { 1 } else { 2 },
                    edge.boundary_tag
                )));
            }
            if (edge.normal.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::NonConforming(format!("edge {e} normal not unit")));
            }
        }
        for c in 0..self.num_cells() {
            if self.cell_area(c) <= 0.0 {
                return Err(Error::NonConforming(format!("cell {c} is degenerate")));
            }
            for i in 0..3 {
                let e = self.cell_edges[c][i];
                let edge = &self.edges[e];
                if edge.cells.0 != c && edge.cells.1 != Some(c) {
                    return Err(Error::NonConforming(format!("cell {c} not on edge {e}")));
                }
            }
        }
        // hanging vertices: sweep over x-sorted vertices
        let mut order: Vec<usize> = (0..self.num_vertices()).collect();
        order.sort_by(|&i, &j| self.vertices[i].x.total_cmp(&self.vertices[j].x));
        let xs: Vec<f64> = order.iter().map(|&i| self.vertices[i].x).collect();
        for (e, edge) in self.edges.iter().enumerate() {
            let [a, b] = edge.vertices;
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len = (pb - pa).norm();
            let tol = 1e-10 * len;
            let lo = xs.partition_point(|&x| x < pa.x.min(pb.x) - tol);
            let hi = xs.partition_point(|&x| x <= pa.x.max(pb.x) + tol);
            for &v in &order[lo..hi] {
                if v == a || v == b {
                    continue;
                }
                let p = self.vertices[v];
                let t = (p - pa).dot(&(pb - pa)) / (len * len);
                let dist = ((p - pa).perp(&(pb - pa)) / len).abs();
                if t > 0.0 && t < 1.0 && dist < tol {
                    return Err(Error::NonConforming(format!(
                        "vertex {v} hangs on edge {e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Plain-text format: `nv nc ne`, then `x y` per vertex, `v0 v1 v2` per
    /// cell (refinement edge first), `v0 v1 btag` per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.num_vertices(), self.num_cells(), self.num_edges());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v.x, v.y);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.boundary_tag);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh2D> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        fn fields<const N: usize, T: std::str::FromStr>(
            line: Option<(usize, &str)>,
        ) -> Result<(usize, [T; N])> {
            let (no, l) = line.ok_or(Error::MeshFormat {
                line: 0,
                msg: "unexpected end of file".into(),
            })?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != N {
                return Err(Error::MeshFormat {
                    line: no,
                    msg: format!("expected {N} fields, found {}", parts.len()),
                });
            }
            let mut out = Vec::with_capacity(N);
            for p in parts {
                out.push(p.parse::<T>().map_err(|_| Error::MeshFormat {
                    line: no,
                    msg: format!("cannot parse `{p}`"),
                })?);
            }
            Ok((no, out.try_into().ok().expect("length checked")))
        }
        let (_, [nv, nc, ne]) = fields::<3, usize>(lines.next())?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (_, [x, y]) = fields::<2, f64>(lines.next())?;
            vertices.push(Vec2::new(x, y));
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (no, c) = fields::<3, usize>(lines.next())?;
            if c.iter().any(|&v| v >= nv) {
                return Err(Error::MeshFormat {
                    line: no,
                    msg: "vertex index out of range".into(),
                });
            }
            cells.push(c);
        }
        let mut info = HashMap::new();
        for i in 0..ne {
            let (_, [a, b, tag]) = fields::<3, usize>(lines.next())?;
            info.insert(
                key(a, b),
                EdgeInfo {
                    normal: None,
                    tag: tag as u32,
                    order: Some(i),
                },
            );
        }
        let mesh = Self::from_parts(vertices, cells, vec![0; nc], &info, false)?;
        if mesh.num_edges() != ne {
            return Err(Error::MeshFormat {
                line: 0,
                msg: format!("edge list has {ne} entries, cells define {}", mesh.num_edges()),
            });
        }
        mesh.check_conformity()?;
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_invariants(mesh: &Mesh2D, area: f64) {
        mesh.check_conformity().unwrap();
        assert!((mesh.total_area() - area).abs() <= 1e-12 * area);
        for e in 0..mesh.num_edges() {
            let edge = mesh.edge(e);
            if let (c0, Some(c1)) = edge.cells {
                let i0 = mesh.cell_edges(c0).iter().position(|&x| x == e).unwrap();
                let i1 = mesh.cell_edges(c1).iter().position(|&x| x == e).unwrap();
                assert_eq!(mesh.sign(c0, i0), 1.0);
                assert_eq!(mesh.sign(c1, i1), -1.0);
            }
        }
        // Euler characteristic of a simply connected polygon
        let chi = mesh.num_vertices() as i64 - mesh.num_edges() as i64 + mesh.num_cells() as i64;
        assert_eq!(chi, 1);
    }

    #[test]
    fn unit_square_minimal() {
        let m = Mesh2D::build_structured(Domain::UnitSquare, 1);
        assert_eq!((m.num_cells(), m.num_vertices(), m.num_edges()), (2, 4, 5));
        assert_invariants(&m, 1.0);
    }

    #[test]
    fn l_shape_counts() {
        let m = Mesh2D::build_structured(Domain::LShape, 1);
        assert_eq!((m.num_cells(), m.num_vertices()), (6, 8));
        assert_invariants(&m, 3.0);
        assert!(m.vertices().iter().any(|v| v.norm() == 0.0));
        let m4 = Mesh2D::build_structured(Domain::LShape, 4);
        assert_eq!(m4.num_cells(), 96);
        assert_invariants(&m4, 3.0);
    }

    #[test]
    fn refinement_edge_is_longest_initially() {
        let m = Mesh2D::build_structured(Domain::LShape, 3);
        for c in 0..m.num_cells() {
            let [a, b, _] = m.cell_points(c);
            assert!(((b - a).norm() - m.cell_diameter(c)).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = Mesh2D::build_structured(Domain::LShape, 2);
        assert_eq!(m.refine_nvb(&[]), m);
    }

    #[test]
    fn both_cells_of_square() {
        let m = Mesh2D::build_structured(Domain::UnitSquare, 1).refine_nvb(&[0, 1]);
        assert_eq!(m.num_cells(), 4);
        for c in 0..4 {
            assert!((m.cell_area(c) - 0.25).abs() < 1e-15);
        }
        assert_invariants(&m, 1.0);
    }

    #[test]
    fn one_cell_of_square_closure() {
        for marked in [0usize, 1] {
            let m = Mesh2D::build_structured(Domain::UnitSquare, 1).refine_nvb(&[marked]);
            // the shared diagonal is the refinement edge of both cells
            assert!(m.num_cells() == 3 || m.num_cells() == 4);
            assert_invariants(&m, 1.0);
        }
        // one-sided markings on finer meshes, closure included
        let m = Mesh2D::build_structured(Domain::UnitSquare, 1)
            .uniform_refine()
            .uniform_refine();
        for c in 0..m.num_cells() {
            let fine = m.refine_nvb(&[c]);
            assert!(fine.num_cells() >= m.num_cells() + 1);
            assert_invariants(&fine, 1.0);
        }
    }

    #[test]
    fn uniform_refinement_halves_h_in_two_steps() {
        let m = Mesh2D::build_structured(Domain::LShape, 1);
        let m1 = m.uniform_refine();
        assert!(m1.num_cells() >= 2 * m.num_cells() && m1.num_cells() <= 4 * m.num_cells());
        assert_invariants(&m1, 3.0);
        let m2 = m1.uniform_refine();
        assert_invariants(&m2, 3.0);
        assert!((m2.h_max() - 0.5 * m.h_max()).abs() < 1e-14);
    }

    #[test]
    fn refinement_keeps_vertices_and_normals() {
        let m = Mesh2D::build_structured(Domain::LShape, 2);
        let fine = m.refine_nvb(&[3, 7, 11]);
        assert_eq!(&fine.vertices()[..m.num_vertices()], m.vertices());
        for e in m.edges() {
            if let Some(f) = fine.edges().iter().find(|f| f.vertices == e.vertices) {
                assert_eq!(f.normal, e.normal);
                assert_eq!(f.boundary_tag, e.boundary_tag);
            }
        }
        assert_invariants(&fine, 3.0);
    }

    #[test]
    fn children_areas_sum_to_parent() {
        let m = Mesh2D::build_structured(Domain::UnitSquare, 2);
        let fine = m.refine_nvb(&[2]);
        let parent = m.cell_area(2);
        // children of cell 2 are the cells whose centroid lies in the parent
        let [a, b, c] = m.cell_points(2);
        let inside = |p: Vec2| {
            let s = |u: Vec2, v: Vec2| (v - u).perp(&(p - u));
            let (s0, s1, s2) = (s(a, b), s(b, c), s(c, a));
            (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
        };
        let sum: f64 = (0..fine.num_cells())
            .filter(|&k| inside(fine.cell_centroid(k)))
            .map(|k| fine.cell_area(k))
            .sum();
        assert!((sum - parent).abs() <= 1e-14 * parent);
    }

    #[test]
    fn shape_regularity_under_uniform_nvb() {
        let mut m = Mesh2D::build_structured(Domain::LShape, 1);
        let initial = m.min_angle();
        for _ in 0..10 {
            m = m.uniform_refine();
        }
        assert!(m.min_angle() >= initial / 2.0 - 1e-12);
        assert_invariants(&m, 3.0);
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh2D::build_structured(Domain::LShape, 2).refine_nvb(&[0, 5]);
        let back = Mesh2D::from_text(&m.to_text()).unwrap();
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.vertices(), m.vertices());
        for (a, b) in back.edges().iter().zip(m.edges()) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.boundary_tag, b.boundary_tag);
        }
    }

    #[test]
    fn text_errors_report_lines() {
        let err = Mesh2D::from_text("3 1 3\n0 0\n1 0\n0 x\n").unwrap_err();
        assert!(matches!(err, Error::MeshFormat { line: 4, .. }));
        let err = Mesh2D::from_text("3 1 3\n0 0\n1 0\n0 1\n0 1 7\n").unwrap_err();
        assert!(matches!(err, Error::MeshFormat { .. }));
    }
}
