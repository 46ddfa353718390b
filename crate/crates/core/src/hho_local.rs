//! Per-cell HHO operators: reconstruction, stabilization, local stiffness,
//! static condensation and the canonical hybrid interpolation.
//!
//! Local unknowns are laid out as
//! `[cell | edge 0: trace, normal | edge 1: trace, normal | edge 2: ...]`
//! with local edge `i` opposite local vertex `i`. Normal blocks hold the
//! derivative along the outward normal of the cell, i.e. `sign * gamma_F`.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::basis::{cell_dim, CellBasis, EdgeBasis, EdgeTabulation, Order, Tabulation};
use crate::error::{Error, Result};
use crate::mesh::Mesh2D;
use crate::problems::ExactSolution;
use crate::quadrature::{CompositeGradedRule, EdgeRule, QuadratureRule};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Standard,
    HhoA,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "hho-a" => Ok(Variant::HhoA),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HhoConfig {
    pub k: usize,
    pub variant: Variant,
}

impl HhoConfig {
    pub fn new(k: usize, variant: Variant) -> Self {
        HhoConfig { k, variant }
    }

    pub fn standard(k: usize) -> Self {
        HhoConfig::new(k, Variant::Standard)
    }

    pub fn cell_degree(&self) -> usize {
        self.k + 2
    }

    pub fn trace_degree(&self) -> usize {
        match self.variant {
            Variant::Standard => self.k + 2,
            Variant::HhoA => self.k + 1,
        }
    }

    pub fn normal_degree(&self) -> usize {
        self.k
    }

    pub fn cell_dofs(&self) -> usize {
        cell_dim(self.cell_degree() as isize)
    }

    pub fn trace_dofs(&self) -> usize {
        self.trace_degree() + 1
    }

    pub fn normal_dofs(&self) -> usize {
        self.k + 1
    }

    pub fn edge_dofs(&self) -> usize {
        self.trace_dofs() + self.normal_dofs()
    }

    pub fn local_dofs(&self) -> usize {
        self.cell_dofs() + 3 * self.edge_dofs()
    }

    /// Offset of the block of local edge `i`.
    pub fn edge_offset(&self, i: usize) -> usize {
        self.cell_dofs() + i * self.edge_dofs()
    }

    /// Exactness degree of quadrature for bilinear forms.
    pub fn quad_degree(&self) -> usize {
        2 * (self.k + 2) + 2
    }

    /// Exactness degree for terms involving problem data.
    pub fn data_quad_degree(&self) -> usize {
        2 * (self.k + 2) + 4
    }

    /// hp mesh size `h / (k + 2)`.
    pub fn hbar(&self, diameter: f64) -> f64 {
        diameter / (self.k + 2) as f64
    }

    /// Weights of the trace and normal terms of the stabilization.
    pub fn stabilization_weights(&self, diameter: f64) -> (f64, f64) {
        let p = (self.k + 2) as f64;
        let hb = self.hbar(diameter);
        (p.powi(3) / hb.powi(3), p / hb)
    }
}

/// One edge seen from a cell.
#[derive(Clone, Debug)]
pub struct LocalEdge {
    pub global: usize,
    /// Start of the arclength parametrization (lower global vertex id).
    pub start: Vec2,
    pub end: Vec2,
    pub length: f64,
    /// Unit tangent from `start` to `end`.
    pub tangent: Vec2,
    /// Outward unit normal of the cell.
    pub normal: Vec2,
    /// `n_F . n_T`.
    pub sign: f64,
    pub rule: EdgeRule,
    pub cell_tab: Vec<Tabulation>,
    pub trace_tab: Vec<EdgeTabulation>,
    pub normal_tab: Vec<EdgeTabulation>,
}

/// Bases, quadrature and tabulations of one cell.
#[derive(Clone, Debug)]
pub struct CellContext {
    pub cell: usize,
    pub cfg: HhoConfig,
    pub verts: [Vec2; 3],
    pub diameter: f64,
    pub basis: CellBasis,
    pub rule: QuadratureRule,
    pub tab: Vec<Tabulation>,
    pub edges: Vec<LocalEdge>,
}

impl CellContext {
    pub fn new(mesh: &Mesh2D, cell: usize, cfg: HhoConfig) -> Self {
        let verts = mesh.cell_points(cell);
        let basis = CellBasis::new(verts, cfg.cell_degree());
        let rule = QuadratureRule::triangle(verts, cfg.quad_degree());
        let tab = rule.points.iter().map(|&p| basis.tabulate(p, Order::Fourth)).collect();
        let edges = (0..3)
            .map(|i| {
                let global = mesh.cell_edges(cell)[i];
                let edge = mesh.edge(global);
                let start = mesh.vertices()[edge.vertices[0]];
                let end = mesh.vertices()[edge.vertices[1]];
                let length = (end - start).norm();
                let sign = mesh.sign(cell, i);
                let rule = EdgeRule::segment(start, end, cfg.quad_degree());
                let trace = EdgeBasis::new(cfg.trace_degree(), length);
                let normal = EdgeBasis::new(cfg.normal_degree(), length);
                LocalEdge {
                    global,
                    start,
                    end,
                    length,
                    tangent: (end - start) / length,
                    normal: edge.normal * sign,
                    sign,
                    cell_tab: rule.points.iter().map(|&p| basis.tabulate(p, Order::Third)).collect(),
                    trace_tab: rule.arclength.iter().map(|&s| trace.tabulate(s)).collect(),
                    normal_tab: rule.arclength.iter().map(|&s| normal.tabulate(s)).collect(),
                    rule,
                }
            })
            .collect();
        CellContext {
            cell,
            cfg,
            verts,
            diameter: mesh.cell_diameter(cell),
            basis,
            rule,
            tab,
            edges,
        }
    }

    /// Trace-space coefficients of the restriction of each cell basis
    /// function to edge `e` (`trace_dofs x cell_dofs`). For HHO(A) the
    /// restriction is reduced by the canonical edge interpolant, which keeps
    /// the endpoint values and the moments seen by the reconstruction.
    pub fn cell_trace(&self, e: usize) -> DMatrix<f64> {
        let cfg = self.cfg;
        let edge = &self.edges[e];
        let full = EdgeBasis::new(cfg.cell_degree(), edge.length);
        let nc = cfg.cell_dofs();
        let mut m = DMatrix::<f64>::zeros(full.dim(), nc);
        for q in 0..edge.rule.len() {
            let w = edge.rule.weights[q];
            let t = full.tabulate(edge.rule.arclength[q]);
            for j in 0..nc {
                let v = w * edge.cell_tab[q].value[j];
                for (i, ti) in t.value.iter().enumerate() {
                    m[(i, j)] += ti * v;
                }
            }
        }
        match cfg.variant {
            Variant::Standard => m,
            Variant::HhoA => {
                let mut out = DMatrix::<f64>::zeros(cfg.trace_dofs(), nc);
                for j in 0..nc {
                    let col: Vec<f64> = m.column(j).iter().copied().collect();
                    for (i, v) in full.lower_canonical(&col).into_iter().enumerate() {
                        out[(i, j)] = v;
                    }
                }
                out
            }
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.verts[1] - self.verts[0]).perp(&(self.verts[2] - self.verts[0])).abs()
    }
}

fn frobenius(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Hessian Gram matrix `(hess phi_i, hess phi_j)_T` of the cell basis.
pub fn hessian_gram(ctx: &CellContext) -> DMatrix<f64> {
    let n = ctx.cfg.cell_dofs();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (t, &w) in ctx.tab.iter().zip(&ctx.rule.weights) {
        let hs: Vec<Matrix2<f64>> = (0..n).map(|i| t.hessian(i)).collect();
        for i in 0..n {
            for j in 0..=i {
                k[(i, j)] += w * frobenius(&hs[i], &hs[j]);
            }
        }
    }
    k.fill_upper_triangle_with_lower_triangle();
    k
}

/// Right-hand side of the reconstruction equation: row `i` is the
/// functional applied to the test function `phi_i`, column per local dof.
fn reconstruction_rhs(ctx: &CellContext) -> DMatrix<f64> {
    let cfg = ctx.cfg;
    let nc = cfg.cell_dofs();
    let mut b = DMatrix::<f64>::zeros(nc, cfg.local_dofs());
    // (v_T, bilap w)_T
    for (t, &w) in ctx.tab.iter().zip(&ctx.rule.weights) {
        for i in 0..nc {
            let bl = w * t.bilap[i];
            if bl == 0.0 {
                continue;
            }
            for j in 0..nc {
                b[(i, j)] += bl * t.value[j];
            }
        }
    }
    for (e, edge) in ctx.edges.iter().enumerate() {
        let off = cfg.edge_offset(e);
        let (nt, nn) = (cfg.trace_dofs(), cfg.normal_dofs());
        for q in 0..edge.rule.len() {
            let w = edge.rule.weights[q];
            let ct = &edge.cell_tab[q];
            let tt = &edge.trace_tab[q];
            let gt = &edge.normal_tab[q];
            for i in 0..nc {
                let h = ct.hessian(i);
                let dn_lap = edge.normal.dot(&ct.grad_laplacian(i));
                let dnn = edge.normal.dot(&(h * edge.normal));
                let dnt = edge.tangent.dot(&(h * edge.normal));
                for m in 0..nt {
                    b[(i, off + m)] += w * (-tt.value[m] * dn_lap + tt.d1[m] * dnt);
                }
                for m in 0..nn {
                    b[(i, off + nt + m)] += w * gt.value[m] * dnn;
                }
            }
        }
    }
    b
}

/// Matrix mapping local dofs to the cell-basis coefficients of the
/// reconstruction. Solves the Hessian Gram system augmented by the three
/// affine mean-value constraints.
pub fn build_reconstruction(ctx: &CellContext) -> Result<DMatrix<f64>> {
    let cfg = ctx.cfg;
    let nc = cfg.cell_dofs();
    let nl = cfg.local_dofs();
    let k = hessian_gram(ctx);
    let b = reconstruction_rhs(ctx);
    // constraint rows: (R, xi)_T = (v_T, xi)_T for the first three basis
    // functions, which span the affine functions
    let mut c = DMatrix::<f64>::zeros(3, nc);
    for (t, &w) in ctx.tab.iter().zip(&ctx.rule.weights) {
        for i in 0..3 {
            for j in 0..nc {
                c[(i, j)] += w * t.value[i] * t.value[j];
            }
        }
    }
    let mut aug = DMatrix::<f64>::zeros(nc + 3, nc + 3);
    aug.view_mut((0, 0), (nc, nc)).copy_from(&k);
    aug.view_mut((nc, 0), (3, nc)).copy_from(&c);
    aug.view_mut((0, nc), (nc, 3)).copy_from(&c.transpose());
    let mut rhs = DMatrix::<f64>::zeros(nc + 3, nl);
    rhs.view_mut((0, 0), (nc, nl)).copy_from(&b);
    rhs.view_mut((nc, 0), (3, nc)).copy_from(&c);
    let lu = aug.lu();
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem {
        what: "reconstruction",
        cell: ctx.cell,
    })?;
    Ok(sol.rows(0, nc).into_owned())
}

/// Factor `B` of the stabilization, `S = B^T B`: per edge, one row per
/// trace coefficient and one per normal coefficient of the mismatches.
/// `S(v, v) = |B v|^2` avoids cancellation.
pub fn stabilization_factor(ctx: &CellContext) -> DMatrix<f64> {
    let cfg = ctx.cfg;
    let nc = cfg.cell_dofs();
    let nl = cfg.local_dofs();
    let (nt, nn) = (cfg.trace_dofs(), cfg.normal_dofs());
    let (w1, w2) = cfg.stabilization_weights(ctx.diameter);
    let rows = ctx.edges.len() * (nt + nn);
    let mut b = DMatrix::<f64>::zeros(rows, nl);
    let (s1, s2) = (w1.sqrt(), w2.sqrt());
    for (e, edge) in ctx.edges.iter().enumerate() {
        let off = cfg.edge_offset(e);
        let row = e * (nt + nn);
        // trace mismatch v_F - v_T in trace coefficients
        let trace = ctx.cell_trace(e);
        for m in 0..nt {
            b[(row + m, off + m)] = s1;
            for j in 0..nc {
                b[(row + m, j)] = -s1 * trace[(m, j)];
            }
        }
        // normal mismatch gamma - proj(dn v_T) in edge coefficients
        let normal_rows = row + nt;
        for m in 0..nn {
            b[(normal_rows + m, off + nt + m)] = s2;
        }
        for q in 0..edge.rule.len() {
            let w = edge.rule.weights[q];
            let ct = &edge.cell_tab[q];
            for j in 0..nc {
                let dn = edge.normal.dot(&ct.gradient(j));
                for m in 0..nn {
                    b[(normal_rows + m, j)] -= s2 * w * edge.normal_tab[q].value[m] * dn;
                }
            }
        }
    }
    b
}

/// Stabilization matrix.
pub fn build_stabilization(ctx: &CellContext) -> DMatrix<f64> {
    let b = stabilization_factor(ctx);
    b.transpose() * b
}

/// Local operators of one cell.
#[derive(Clone, Debug)]
pub struct LocalOperators {
    pub reconstruction: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
    pub stabilization_factor: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

impl LocalOperators {
    /// `S(v, v)` as a sum of squares.
    pub fn stabilization_energy(&self, v: &DVector<f64>) -> f64 {
        (&self.stabilization_factor * v).norm_squared()
    }
}

pub fn local_operators(ctx: &CellContext) -> Result<LocalOperators> {
    let r = build_reconstruction(ctx)?;
    let factor = stabilization_factor(ctx);
    let s = factor.transpose() * &factor;
    let k = hessian_gram(ctx);
    let mut a = r.transpose() * k * &r + &s;
    // symmetrize rounding
    let at = a.transpose();
    a = (a + at) * 0.5;
    Ok(LocalOperators {
        reconstruction: r,
        stabilization: s,
        stabilization_factor: factor,
        stiffness: a,
    })
}

/// Cell load `(f, phi_i)_T`.
pub fn cell_load(ctx: &CellContext, load: &(dyn Fn(Vec2) -> f64 + Sync), graded: Option<&CompositeGradedRule>) -> DVector<f64> {
    let nc = ctx.cfg.cell_dofs();
    let rule = match graded {
        Some(g) => g.triangle(ctx.verts, ctx.cfg.data_quad_degree()),
        None => QuadratureRule::triangle(ctx.verts, ctx.cfg.data_quad_degree()),
    };
    let mut b = DVector::<f64>::zeros(nc);
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        let fv = w * load(p);
        if fv == 0.0 {
            continue;
        }
        let t = ctx.basis.tabulate(p, Order::Value);
        for i in 0..nc {
            b[i] += fv * t.value[i];
        }
    }
    b
}

/// Static condensation of the cell block.
#[derive(Clone, Debug)]
pub struct Condensed {
    /// Schur complement on the edge blocks.
    pub schur: DMatrix<f64>,
    /// Condensed load on the edge blocks.
    pub rhs: DVector<f64>,
    /// `A_cc^{-1} A_cf`.
    pub recovery: DMatrix<f64>,
    /// `A_cc^{-1} b_c`.
    pub recovery_load: DVector<f64>,
}

pub fn condense(stiffness: &DMatrix<f64>, cell_load: &DVector<f64>, cfg: HhoConfig, cell: usize) -> Result<Condensed> {
    let nc = cfg.cell_dofs();
    let nf = cfg.local_dofs() - nc;
    let acc = stiffness.view((0, 0), (nc, nc)).into_owned();
    let acf = stiffness.view((0, nc), (nc, nf)).into_owned();
    let afc = stiffness.view((nc, 0), (nf, nc)).into_owned();
    let aff = stiffness.view((nc, nc), (nf, nf)).into_owned();
    let chol = acc.cholesky().ok_or(Error::SingularSystem {
        what: "cell block",
        cell,
    })?;
    let recovery = chol.solve(&acf);
    let recovery_load = chol.solve(cell_load);
    let mut schur = aff - &afc * &recovery;
    let st = schur.transpose();
    schur = (schur + st) * 0.5;
    let rhs = -(&afc * &recovery_load);
    Ok(Condensed {
        schur,
        rhs,
        recovery,
        recovery_load,
    })
}

/// Cell unknowns from edge unknowns: `u_c = A_cc^{-1}(b_c - A_cf u_f)`.
pub fn recover_cell(cond: &Condensed, faces: &DVector<f64>) -> DVector<f64> {
    &cond.recovery_load - &cond.recovery * faces
}

/// Canonical interpolant `C^degree(v)` on the cell: matches vertex values,
/// edge moments against `P^{degree-2}` and cell moments against
/// `P^{degree-3}`, integrated with rules of degree `qdeg` (graded near the
/// listed singular points). Returns coefficients on the first
/// `dim(degree)` cell basis functions.
pub fn canonical_interpolant(
    ctx: &CellContext,
    v: &dyn ExactSolution,
    degree: usize,
    qdeg: usize,
    graded: &[CompositeGradedRule],
) -> Result<Vec<f64>> {
    let n = cell_dim(degree as isize);
    assert!(degree <= ctx.cfg.cell_degree());
    let graded = graded.iter();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut row = 0;
    for &x in &ctx.verts {
        let t = ctx.basis.tabulate(x, Order::Value);
        for j in 0..n {
            m[(row, j)] = t.value[j];
        }
        rhs[row] = v.value(x);
        row += 1;
    }
    if degree >= 2 {
        for edge in &ctx.edges {
            let rule = graded
                .clone()
                .find(|g| g.touches_segment(edge.start, edge.end))
                .map(|g| g.segment(edge.start, edge.end, qdeg))
                .unwrap_or_else(|| EdgeRule::segment(edge.start, edge.end, qdeg));
            let eb = EdgeBasis::new(degree - 2, edge.length);
            for q in 0..rule.len() {
                let (p, w) = (rule.points[q], rule.weights[q]);
                let et = eb.tabulate(rule.arclength[q]);
                let ct = ctx.basis.tabulate(p, Order::Value);
                let vv = v.value(p);
                for a in 0..eb.dim() {
                    for j in 0..n {
                        m[(row + a, j)] += w * et.value[a] * ct.value[j];
                    }
                    rhs[row + a] += w * et.value[a] * vv;
                }
            }
            row += eb.dim();
        }
    }
    if degree >= 3 {
        let rule = graded
            .clone()
            .find(|g| g.touches_triangle(ctx.verts))
            .map(|g| g.triangle(ctx.verts, qdeg))
            .unwrap_or_else(|| QuadratureRule::triangle(ctx.verts, qdeg));
        let nm = cell_dim(degree as isize - 3);
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let ct = ctx.basis.tabulate(p, Order::Value);
            let vv = v.value(p);
            for a in 0..nm {
                for j in 0..n {
                    m[(row + a, j)] += w * ct.value[a] * ct.value[j];
                }
                rhs[row + a] += w * ct.value[a] * vv;
            }
        }
        row += nm;
    }
    debug_assert_eq!(row, n);
    let sol = m.lu().solve(&rhs).ok_or(Error::SingularSystem {
        what: "canonical interpolation",
        cell: ctx.cell,
    })?;
    Ok(sol.iter().copied().collect())
}

/// HHO reduction: canonical interpolant, its edge traces (reduced for
/// HHO(A)), and the edge
/// projections of the outward normal derivative of `v`.
pub fn interpolate_canonical(ctx: &CellContext, v: &dyn ExactSolution, singular: &[Vec2]) -> Result<DVector<f64>> {
    let cfg = ctx.cfg;
    let graded: Vec<CompositeGradedRule> = singular.iter().map(|&p| CompositeGradedRule::new(p)).collect();
    let c = canonical_interpolant(ctx, v, cfg.cell_degree(), 2 * cfg.cell_degree() + 4, &graded)?;
    let mut out = DVector::<f64>::zeros(cfg.local_dofs());
    for (j, &cj) in c.iter().enumerate() {
        out[j] = cj;
    }
    let (nt, nn) = (cfg.trace_dofs(), cfg.normal_dofs());
    let cv = DVector::from_column_slice(&c);
    for (e, edge) in ctx.edges.iter().enumerate() {
        let off = cfg.edge_offset(e);
        let trace = ctx.cell_trace(e) * &cv;
        out.rows_mut(off, nt).copy_from(&trace);
        let rule = graded
            .iter()
            .find(|g| g.touches_segment(edge.start, edge.end))
            .map(|g| g.segment(edge.start, edge.end, cfg.data_quad_degree()))
            .unwrap_or_else(|| EdgeRule::segment(edge.start, edge.end, cfg.data_quad_degree()));
        let nb = EdgeBasis::new(cfg.normal_degree(), edge.length);
        for q in 0..rule.len() {
            let w = rule.weights[q];
            let dn = edge.normal.dot(&v.gradient(rule.points[q]));
            let t = nb.tabulate(rule.arclength[q]);
            for m in 0..nn {
                out[off + nt + m] += w * t.value[m] * dn;
            }
        }
    }
    Ok(out)
}
