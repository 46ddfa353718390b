//! Global edge numbering, strong boundary conditions, assembly of the
//! condensed system, sparse solve and recovery of cell unknowns.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::basis::{CellBasis, EdgeBasis, Order};
use crate::error::{Error, Result};
use crate::hho_local::{cell_load, condense, local_operators, recover_cell, CellContext, Condensed, HhoConfig, LocalOperators, Variant};
use crate::mesh::Mesh2D;
use crate::problems::ProblemSpec;
use crate::quadrature::{CompositeGradedRule, EdgeRule, QuadratureRule};
use crate::Vec2;

/// Relative residual every solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Numbering of the globally coupled unknowns: one trace block and one
/// normal block per interior edge, in edge order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    offsets: Vec<Option<usize>>,
    trace: usize,
    normal: usize,
    ndofs: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D, cfg: HhoConfig) -> Self {
        let width = cfg.edge_dofs();
        let mut next = 0;
        let offsets = mesh
            .edges()
            .iter()
            .map(|e| {
                if e.is_boundary() {
                    None
                } else {
                    next += width;
                    Some(next - width)
                }
            })
            .collect();
        DofMap {
            offsets,
            trace: cfg.trace_dofs(),
            normal: cfg.normal_dofs(),
            ndofs: next,
        }
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    /// First unknown of edge `e`; `None` on boundary edges.
    pub fn offset(&self, e: usize) -> Option<usize> {
        self.offsets[e]
    }

    pub fn trace_width(&self) -> usize {
        self.trace
    }

    pub fn normal_width(&self) -> usize {
        self.normal
    }
}

/// Quadrature on an edge, graded when a singular point lies on it.
pub(crate) fn edge_rule(a: Vec2, b: Vec2, degree: usize, singular: &[Vec2]) -> EdgeRule {
    singular
        .iter()
        .map(|&p| CompositeGradedRule::new(p))
        .find(|g| g.touches_segment(a, b))
        .map(|g| g.segment(a, b, degree))
        .unwrap_or_else(|| EdgeRule::segment(a, b, degree))
}

/// Quadrature on a cell, graded when a singular point lies on it.
pub(crate) fn cell_rule(verts: [Vec2; 3], degree: usize, singular: &[Vec2]) -> QuadratureRule {
    graded_for_cell(verts, singular)
        .map(|g| g.triangle(verts, degree))
        .unwrap_or_else(|| QuadratureRule::triangle(verts, degree))
}

pub(crate) fn graded_for_cell(verts: [Vec2; 3], singular: &[Vec2]) -> Option<CompositeGradedRule> {
    singular
        .iter()
        .map(|&p| CompositeGradedRule::new(p))
        .find(|g| g.touches_triangle(verts))
}

/// Prescribed edge blocks on boundary edges: the trace is the projection of
/// the Dirichlet data (reduced by the canonical edge interpolant for HHO(A)), the normal block the projection of the Neumann data
/// along the outward normal.
pub fn boundary_values(mesh: &Mesh2D, cfg: HhoConfig, problem: &ProblemSpec) -> Vec<Option<DVector<f64>>> {
    mesh.edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            if !edge.is_boundary() {
                return None;
            }
            let a = mesh.vertices()[edge.vertices[0]];
            let b = mesh.vertices()[edge.vertices[1]];
            let len = mesh.edge_length(e);
            let rule = edge_rule(a, b, cfg.data_quad_degree(), &problem.singular_points);
            let full = EdgeBasis::new(cfg.cell_degree(), len);
            let normal = EdgeBasis::new(cfg.normal_degree(), len);
            let mut g = full.project(&rule, |x, _| (problem.dirichlet)(x), cfg.cell_degree() as isize);
            if cfg.variant == Variant::HhoA {
                g = full.lower_canonical(&g);
            }
            let n = normal.project(&rule, |x, _| (problem.neumann)(x, edge.normal), cfg.normal_degree() as isize);
            Some(DVector::from_iterator(cfg.edge_dofs(), g.into_iter().chain(n)))
        })
        .collect()
}

/// Local operators, load and condensation of one cell.
#[derive(Clone, Debug)]
pub struct CellSystem {
    pub operators: LocalOperators,
    pub load: DVector<f64>,
    pub condensed: Condensed,
}

/// Where a local edge unknown lives globally.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Free(usize),
    Fixed(f64),
}

/// Condensed global system with everything needed for recovery.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub cfg: HhoConfig,
    pub dofs: DofMap,
    /// Merged `(row, col, value)` entries sorted by column then row.
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub cells: Vec<CellSystem>,
    pub bases: Vec<CellBasis>,
    pub prescribed: Vec<Option<DVector<f64>>>,
}

/// Global placement and orientation sign of each local edge unknown.
fn local_slots(mesh: &Mesh2D, cfg: HhoConfig, dofs: &DofMap, prescribed: &[Option<DVector<f64>>], cell: usize) -> Vec<(Slot, f64)> {
    let nt = cfg.trace_dofs();
    let mut out = Vec::with_capacity(3 * cfg.edge_dofs());
    for i in 0..3 {
        let e = mesh.cell_edges(cell)[i];
        let sigma = mesh.sign(cell, i);
        for r in 0..cfg.edge_dofs() {
            let s = if r < nt { 1.0 } else { sigma };
            let slot = match dofs.offset(e) {
                Some(o) => Slot::Free(o + r),
                None => Slot::Fixed(prescribed[e].as_ref().expect("boundary edge has data")[r]),
            };
            out.push((slot, s));
        }
    }
    out
}

pub fn assemble(mesh: &Mesh2D, cfg: HhoConfig, problem: &ProblemSpec) -> Result<AssembledSystem> {
    let dofs = DofMap::new(mesh, cfg);
    let prescribed = boundary_values(mesh, cfg, problem);
    let locals: Vec<Result<(CellSystem, CellBasis)>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let ctx = CellContext::new(mesh, c, cfg);
            let operators = local_operators(&ctx)?;
            let load = if problem.zero_load {
                DVector::zeros(cfg.cell_dofs())
            } else {
                let graded = graded_for_cell(ctx.verts, &problem.singular_points);
                cell_load(&ctx, &*problem.load, graded.as_ref())
            };
            let condensed = condense(&operators.stiffness, &load, cfg, c)?;
            Ok((
                CellSystem {
                    operators,
                    load,
                    condensed,
                },
                ctx.basis,
            ))
        })
        .collect();
    let mut cells = Vec::with_capacity(locals.len());
    let mut bases = Vec::with_capacity(locals.len());
    for l in locals {
        let (cs, b) = l?;
        cells.push(cs);
        bases.push(b);
    }
    let n = dofs.ndofs();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; n];
    for (c, cs) in cells.iter().enumerate() {
        let slots = local_slots(mesh, cfg, &dofs, &prescribed, c);
        let schur = &cs.condensed.schur;
        if schur.nrows() != slots.len() {
            return Err(Error::Dofs(format!(
                "cell {c}: condensed block has {} rows, layout expects {}",
                schur.nrows(),
                slots.len()
            )));
        }
        for (p, &(sp, gp)) in slots.iter().enumerate() {
            let Slot::Free(i) = sp else { continue };
            rhs[i] += gp * cs.condensed.rhs[p];
            for (q, &(sq, gq)) in slots.iter().enumerate() {
                match sq {
                    Slot::Free(j) => entries.push((j, i, gp * gq * schur[(p, q)])),
                    Slot::Fixed(v) => rhs[i] -= gp * schur[(p, q)] * gq * v,
                }
            }
        }
    }
    entries.sort_by_key(|e| (e.1, e.0));
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len() / 2);
    for (r, c, v) in entries {
        match triplets.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => triplets.push((r, c, v)),
        }
    }
    Ok(AssembledSystem {
        cfg,
        dofs,
        triplets,
        rhs,
        cells,
        bases,
        prescribed,
    })
}

fn sparse_matvec(triplets: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for &(r, c, v) in triplets {
        y[r] += v * x[c];
    }
    y
}

/// `b - A x` accumulated in double-double arithmetic, rounded once.
fn accurate_residual(triplets: &[(usize, usize, f64)], x: &[f64], b: &[f64]) -> Vec<f64> {
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }
    let mut hi = b.to_vec();
    let mut lo = vec![0.0; b.len()];
    for &(r, c, v) in triplets {
        let p = -v * x[c];
        let p_err = (-v).mul_add(x[c], -p);
        let (s, e) = two_sum(hi[r], p);
        hi[r] = s;
        lo[r] += e + p_err;
    }
    hi.iter().zip(&lo).map(|(h, l)| h + l).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `eps |A| |x| / |b|`: the residual any rounding of the exact solution
/// can reach.
fn rounding_floor(triplets: &[(usize, usize, f64)], x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    for &(r, c, v) in triplets {
        ax[r] += (v * x[c]).abs();
    }
    let nb = norm(b);
    if nb == 0.0 {
        0.0
    } else {
        f64::EPSILON * norm(&ax) / nb
    }
}

fn relative_residual(triplets: &[(usize, usize, f64)], x: &[f64], b: &[f64]) -> f64 {
    let r = accurate_residual(triplets, x, b);
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Sparse Cholesky on the diagonally scaled matrix, followed by iterative
/// refinement with compensated residuals.
fn cholesky_solve(n: usize, triplets: &[(usize, usize, f64)], b: &[f64], scale: &[f64]) -> Result<Vec<f64>> {
    let scaled: Vec<Triplet<usize, usize, f64>> = triplets
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v * scale[r] * scale[c]))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &scaled)
        .map_err(|e| Error::Solver(format!("sparse matrix construction: {e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Solver(format!("sparse Cholesky failed (matrix not SPD?): {e:?}")))?;
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let m = faer::Mat::from_fn(n, 1, |i, _| rhs[i] * scale[i]);
        let y = llt.solve(&m);
        (0..n).map(|i| y[(i, 0)] * scale[i]).collect()
    };
    let mut x = solve(b);
    let nb = norm(b).max(f64::MIN_POSITIVE);
    let mut best = (norm(&accurate_residual(triplets, &x, b)) / nb, x.clone());
    for _ in 0..REFINEMENT_STEPS {
        if best.0 <= 0.01 * RESIDUAL_TOL {
            break;
        }
        let r = accurate_residual(triplets, &x, b);
        let dx = solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let res = norm(&accurate_residual(triplets, &x, b)) / nb;
        if res < best.0 {
            best = (res, x.clone());
        } else {
            break;
        }
    }
    Ok(best.1)
}

const REFINEMENT_STEPS: usize = 4;

/// Jacobi-preconditioned conjugate gradients.
fn cg_solve(n: usize, triplets: &[(usize, usize, f64)], b: &[f64], diag: &[f64]) -> (Vec<f64>, usize) {
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let nb = norm(b);
    let max_iter = 20 * n.max(10);
    for it in 0..max_iter {
        if norm(&r) <= 1e-13 * nb {
            return (x, it);
        }
        let ap = sparse_matvec(triplets, &p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return (x, it);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, max_iter)
}

/// Solves `A x = b` for the assembled SPD matrix; returns the solution and
/// its relative residual. The residual must reach `RESIDUAL_TOL`, or the
/// rounding floor `eps |A| |x| / |b|` when that is larger.
pub fn solve_linear(n: usize, triplets: &[(usize, usize, f64)], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut diag = vec![0.0; n];
    for &(r, c, v) in triplets {
        if r == c {
            diag[r] += v;
        }
    }
    if let Some(i) = diag.iter().position(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::Solver(format!("non-positive diagonal entry {} at row {i}", diag[i])));
    }
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let accept = |x: &[f64]| {
        let res = relative_residual(triplets, x, b);
        (res <= RESIDUAL_TOL.max(rounding_floor(triplets, x, b)), res)
    };
    let direct = cholesky_solve(n, triplets, b, &scale);
    if let Ok(x) = &direct {
        if let (true, res) = accept(x) {
            return Ok((direct.unwrap(), res));
        }
    }
    let (x, iters) = cg_solve(n, triplets, b, &diag);
    let (ok, res) = accept(&x);
    if ok {
        return Ok((x, res));
    }
    let reason = match direct {
        Err(e) => format!("{e}; "),
        Ok(_) => String::new(),
    };
    Err(Error::Solver(format!(
        "{reason}conjugate gradients stopped after {iters} iterations at relative residual {res:e}"
    )))
}

/// Solved discrete problem.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub cfg: HhoConfig,
    pub ndofs: usize,
    /// Global unknowns.
    pub unknowns: Vec<f64>,
    /// Edge blocks `(trace, gamma_F)` of every edge, oriented along `n_F`.
    pub edge_values: Vec<DVector<f64>>,
    /// Cell unknowns `u_T`.
    pub cell_values: Vec<DVector<f64>>,
    /// Local vectors in the layout of `hho_local`.
    pub local_vectors: Vec<DVector<f64>>,
    /// Coefficients of the reconstruction `R(u_T)`.
    pub reconstructions: Vec<DVector<f64>>,
    /// `S(u_T, u_T)` per cell.
    pub stabilization: Vec<f64>,
    pub bases: Vec<CellBasis>,
    pub residual: f64,
}

impl AssembledSystem {
    pub fn solve(&self, mesh: &Mesh2D) -> Result<DiscreteSolution> {
        let (x, residual) = solve_linear(self.dofs.ndofs(), &self.triplets, &self.rhs)?;
        Ok(self.recover(mesh, x, residual))
    }

    /// Builds the full solution from given global unknowns.
    pub fn recover(&self, mesh: &Mesh2D, unknowns: Vec<f64>, residual: f64) -> DiscreteSolution {
        let cfg = self.cfg;
        let edge_values: Vec<DVector<f64>> = (0..mesh.num_edges())
            .map(|e| match self.dofs.offset(e) {
                Some(o) => DVector::from_column_slice(&unknowns[o..o + cfg.edge_dofs()]),
                None => self.prescribed[e].clone().expect("boundary edge has data"),
            })
            .collect();
        let per_cell: Vec<(DVector<f64>, DVector<f64>, DVector<f64>, f64)> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let cs = &self.cells[c];
                let nt = cfg.trace_dofs();
                let mut faces = DVector::zeros(3 * cfg.edge_dofs());
                for i in 0..3 {
                    let e = mesh.cell_edges(c)[i];
                    let sigma = mesh.sign(c, i);
                    for r in 0..cfg.edge_dofs() {
                        let s = if r < nt { 1.0 } else { sigma };
                        faces[i * cfg.edge_dofs() + r] = s * edge_values[e][r];
                    }
                }
                let cell = recover_cell(&cs.condensed, &faces);
                let local = DVector::from_iterator(cfg.local_dofs(), cell.iter().chain(faces.iter()).copied());
                let rec = &cs.operators.reconstruction * &local;
                let stab = cs.operators.stabilization_energy(&local);
                (cell, local, rec, stab)
            })
            .collect();
        let mut sol = DiscreteSolution {
            cfg,
            ndofs: self.dofs.ndofs(),
            unknowns,
            edge_values,
            cell_values: Vec::with_capacity(per_cell.len()),
            local_vectors: Vec::with_capacity(per_cell.len()),
            reconstructions: Vec::with_capacity(per_cell.len()),
            stabilization: Vec::with_capacity(per_cell.len()),
            bases: self.bases.clone(),
            residual,
        };
        for (cell, local, rec, stab) in per_cell {
            sol.cell_values.push(cell);
            sol.local_vectors.push(local);
            sol.reconstructions.push(rec);
            sol.stabilization.push(stab);
        }
        sol
    }

    /// Dense copy of the matrix (for tests and small dumps).
    pub fn dense_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dofs.ndofs();
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for &(r, c, v) in &self.triplets {
            a[(r, c)] += v;
        }
        a
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, out: &mut impl Write) -> std::io::Result<()> {
        let n = self.dofs.ndofs();
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{n} {n} {}", self.triplets.len())?;
        for &(r, c, v) in &self.triplets {
            writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }

    /// Writes the right-hand side in Matrix Market array format.
    pub fn write_rhs_matrix_market(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix array real general")?;
        writeln!(out, "{} 1", self.rhs.len())?;
        for v in &self.rhs {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }
}

/// Assembles and solves.
pub fn solve_problem(mesh: &Mesh2D, cfg: HhoConfig, problem: &ProblemSpec) -> Result<DiscreteSolution> {
    assemble(mesh, cfg, problem)?.solve(mesh)
}

/// Energy error per cell (squared) and its global root-sum-square:
/// `||hess(u - u_T)||^2 + S(u_T, u_T)`.
pub fn energy_error(mesh: &Mesh2D, solution: &DiscreteSolution, problem: &ProblemSpec) -> Result<(Vec<f64>, f64)> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::MissingExactSolution(problem.name.clone()))?;
    let degree = 2 * (solution.cfg.k + 2) + 6;
    let per_cell: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let verts = mesh.cell_points(c);
            let rule = cell_rule(verts, degree, &problem.singular_points);
            let basis = &solution.bases[c];
            let coeffs = solution.cell_values[c].as_slice();
            let mut acc = 0.0;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let t = basis.tabulate(p, Order::Hessian);
                let mut h = exact.hessian(p);
                for (j, &cj) in coeffs.iter().enumerate() {
                    h -= t.hessian(j) * cj;
                }
                acc += w * h.norm_squared();
            }
            acc + solution.stabilization[c]
        })
        .collect();
    let total = per_cell.iter().sum::<f64>().sqrt();
    Ok((per_cell, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use crate::problems::{case_square_smooth, Polynomial};
    use std::sync::Arc;

    #[test]
    fn dofmap_tiles_interior_edges() {
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 2);
        let cfg = HhoConfig::standard(1);
        let d = DofMap::new(&mesh, cfg);
        let interior = mesh.edges().iter().filter(|e| !e.is_boundary()).count();
        assert_eq!(d.ndofs(), interior * cfg.edge_dofs());
        let mut offs: Vec<usize> = (0..mesh.num_edges()).filter_map(|e| d.offset(e)).collect();
        offs.sort();
        for (i, o) in offs.iter().enumerate() {
            assert_eq!(*o, i * cfg.edge_dofs());
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 2);
        let p = ProblemSpec::homogeneous("zero", Domain::UnitSquare, Arc::new(|_| 0.0));
        let sys = assemble(&mesh, HhoConfig::standard(1), &p).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        let sol = sys.solve(&mesh).unwrap();
        assert!(sol.unknowns.iter().all(|&v| v == 0.0));
        assert!(sol.cell_values.iter().all(|c| c.amax() == 0.0));
    }

    #[test]
    fn matrix_is_symmetric_with_positive_diagonal() {
        let mesh = Mesh2D::build_structured(Domain::LShape, 1).uniform_refine();
        let p = case_square_smooth().problem;
        let sys = assemble(&mesh, HhoConfig::standard(2), &p).unwrap();
        let a = sys.dense_matrix();
        assert!((&a - a.transpose()).amax() <= 1e-12 * a.amax());
        assert!((0..a.nrows()).all(|i| a[(i, i)] > 0.0));
    }

    #[test]
    fn polynomial_solution_is_reproduced() {
        let u = Polynomial::new(vec![(1.0, 2, 2), (0.3, 3, 0), (-0.2, 1, 1), (0.5, 0, 0)]);
        let p = ProblemSpec::polynomial(Domain::UnitSquare, u);
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 2);
        let sol = solve_problem(&mesh, HhoConfig::standard(2), &p).unwrap();
        assert!(sol.residual <= RESIDUAL_TOL);
        let (_, err) = energy_error(&mesh, &sol, &p).unwrap();
        assert!(err < 1e-8, "{err:e}");
    }

    #[test]
    fn boundary_blocks_are_prescribed_projections() {
        let u = Polynomial::new(vec![(1.0, 2, 1), (0.7, 0, 2)]);
        let p = ProblemSpec::polynomial(Domain::UnitSquare, u);
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 1);
        let cfg = HhoConfig::standard(0);
        let sys = assemble(&mesh, cfg, &p).unwrap();
        let sol = sys.solve(&mesh).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.is_boundary() {
                assert_eq!(Some(&sol.edge_values[e]), sys.prescribed[e].as_ref());
            }
        }
        let again = sys.solve(&mesh).unwrap();
        assert_eq!(sol.unknowns, again.unknowns);
    }

    #[test]
    fn energy_error_needs_exact_solution() {
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 1);
        let p = ProblemSpec::homogeneous("no-exact", Domain::UnitSquare, Arc::new(|_| 1.0));
        let sol = solve_problem(&mesh, HhoConfig::standard(0), &p).unwrap();
        assert!(matches!(energy_error(&mesh, &sol, &p), Err(Error::MissingExactSolution(_))));
    }

    #[test]
    fn matrix_market_header() {
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 2);
        let p = case_square_smooth().problem;
        let sys = assemble(&mesh, HhoConfig::standard(0), &p).unwrap();
        let mut buf = Vec::new();
        sys.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        let n = sys.dofs.ndofs();
        assert_eq!(lines.next().unwrap(), format!("{n} {n} {}", sys.triplets.len()));
    }

    #[test]
    fn cg_fallback_solves_spd() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let diag = vec![4.0; n];
        let (x, _) = cg_solve(n, &t, &b, &diag);
        assert!(relative_residual(&t, &x, &b) < 1e-12);
        let (y, res) = solve_linear(n, &t, &b).unwrap();
        assert!(res < 1e-12);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let t = vec![(0, 0, 1.0), (1, 1, -1.0)];
        assert!(matches!(solve_linear(2, &t, &[1.0, 1.0]), Err(Error::Solver(_))));
    }
}
