//! Polynomial bases on cells and edges, L2 projections, exact derivatives
//! and face calculus.
//!
//! Cell bases are L2(T)-orthonormal and stored as coefficients on Dubiner
//! polynomials of the cell. They are hierarchical: the first `dim(l)`
//! functions span P^l(T), so projecting onto a lower degree is a truncation.

use nalgebra::{DMatrix, Matrix2};

use crate::mesh::Mesh2D;
use crate::quadrature::{EdgeRule, QuadratureRule};
use crate::Vec2;

/// Dimension of P^l in two variables; zero for negative degrees.
pub fn cell_dim(degree: isize) -> usize {
    if degree < 0 {
        0
    } else {
        let l = degree as usize;
        (l + 1) * (l + 2) / 2
    }
}

/// Dimension of P^l on an edge; zero for negative degrees.
pub fn edge_dim(degree: isize) -> usize {
    if degree < 0 {
        0
    } else {
        degree as usize + 1
    }
}

/// Degree pairs `(a, b)` of `x^a y^b` (or `P_a(x) P_b(y)`), ordered by total
/// degree.
pub fn monomial_exponents(degree: usize) -> Vec<(u32, u32)> {
    let mut exps = Vec::with_capacity(cell_dim(degree as isize));
    for d in 0..=degree as u32 {
        for b in 0..=d {
            exps.push((d - b, b));
        }
    }
    exps
}

/// Value and derivatives of a scalar polynomial at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec2,
    pub hessian: Matrix2<f64>,
    pub laplacian: f64,
    pub grad_laplacian: Vec2,
    pub bilaplacian: f64,
}

/// How many derivatives `tabulate` fills in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
    Third,
    Fourth,
}

/// Basis functions and their derivatives at one point. Third derivatives are
/// stored only through `grad Delta`, fourth through `Delta^2`.
#[derive(Clone, Debug, Default)]
pub struct Tabulation {
    pub value: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dxy: Vec<f64>,
    pub dyy: Vec<f64>,
    pub lap_x: Vec<f64>,
    pub lap_y: Vec<f64>,
    pub bilap: Vec<f64>,
}

impl Tabulation {
    pub fn hessian(&self, i: usize) -> Matrix2<f64> {
        Matrix2::new(self.dxx[i], self.dxy[i], self.dxy[i], self.dyy[i])
    }

    pub fn gradient(&self, i: usize) -> Vec2 {
        Vec2::new(self.dx[i], self.dy[i])
    }

    pub fn grad_laplacian(&self, i: usize) -> Vec2 {
        Vec2::new(self.lap_x[i], self.lap_y[i])
    }
}

const DERIVS: [(u32, u32); 13] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (2, 2),
    (0, 4),
];

const TAYLOR_LEN: usize = 15;

/// Index of the Taylor coefficient of `dx^i dy^j` among total order <= 4.
const fn taylor_index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Truncated bivariate Taylor expansion (total order 4) of a function at a
/// point; coefficient `(i, j)` is `d^(i,j) f / (i! j!)`.
#[derive(Clone, Copy, Debug)]
struct Taylor {
    c: [f64; TAYLOR_LEN],
}

impl Taylor {
    fn constant(v: f64) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        c[0] = v;
        Taylor { c }
    }

    fn affine(v: f64, dx: f64, dy: f64) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        c[0] = v;
        c[1] = dx;
        c[2] = dy;
        Taylor { c }
    }

    fn scale_add(&self, a: f64, other: &Taylor, b: f64) -> Taylor {
        let mut c = [0.0; TAYLOR_LEN];
        for k in 0..TAYLOR_LEN {
            c[k] = a * self.c[k] + b * other.c[k];
        }
        Taylor { c }
    }

    fn mul(&self, other: &Taylor, order: usize) -> Taylor {
        let mut c = [0.0; TAYLOR_LEN];
        for d in 0..=order {
            for j in 0..=d {
                let i = d - j;
                let mut acc = 0.0;
                for d1 in 0..=d {
                    for j1 in j.saturating_sub(d - d1)..=j.min(d1) {
                        let i1 = d1 - j1;
                        if i1 > i {
                            continue;
                        }
                        acc += self.c[taylor_index(i1, j1)] * other.c[taylor_index(i - i1, j - j1)];
                    }
                }
                c[taylor_index(i, j)] = acc;
            }
        }
        Taylor { c }
    }

    /// Partial derivative `d^(i,j)` at the expansion point.
    fn derivative(&self, i: usize, j: usize) -> f64 {
        const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
        self.c[taylor_index(i, j)] * FACT[i] * FACT[j]
    }
}

/// Dubiner polynomials on the triangle whose collapsed coordinates are the
/// affine functions `xi`, `eta` (reference triangle `xi, eta >= -1`,
/// `xi + eta <= 0`), in `monomial_exponents` order.
fn dubiner(degree: usize, xi: Taylor, eta: Taylor, order: usize) -> Vec<Taylor> {
    let one = Taylor::constant(1.0);
    // A = xi + (1 + eta)/2 and S = (1 - eta)/2 keep P_p(a) S^p polynomial
    let a = xi.scale_add(1.0, &eta.scale_add(0.5, &one, 0.5), 1.0);
    let s = eta.scale_add(-0.5, &one, 0.5);
    let s2 = s.mul(&s, order);
    let mut lp = Vec::with_capacity(degree + 1);
    lp.push(one);
    if degree >= 1 {
        lp.push(a);
    }
    for p in 1..degree {
        let pf = p as f64;
        let t = a.mul(&lp[p], order);
        let u = s2.mul(&lp[p - 1], order);
        lp.push(t.scale_add((2.0 * pf + 1.0) / (pf + 1.0), &u, -pf / (pf + 1.0)));
    }
    let mut table = vec![Vec::new(); degree + 1];
    for p in 0..=degree {
        let alpha = (2 * p + 1) as f64;
        let qmax = degree - p;
        let mut jac = Vec::with_capacity(qmax + 1);
        jac.push(one);
        if qmax >= 1 {
            jac.push(eta.scale_add(0.5 * (alpha + 2.0), &one, 0.5 * alpha));
        }
        for n in 1..qmax {
            let nf = n as f64;
            let c0 = 2.0 * (nf + 1.0) * (nf + alpha + 1.0) * (2.0 * nf + alpha);
            let c1 = (2.0 * nf + alpha + 1.0) * (2.0 * nf + alpha + 2.0) * (2.0 * nf + alpha);
            let c2 = (2.0 * nf + alpha + 1.0) * alpha * alpha;
            let c3 = 2.0 * (nf + alpha) * nf * (2.0 * nf + alpha + 2.0);
            let lin = eta.scale_add(c1 / c0, &one, c2 / c0);
            let t = lin.mul(&jac[n], order);
            jac.push(t.scale_add(1.0, &jac[n - 1], -c3 / c0));
        }
        table[p] = jac.iter().map(|j| lp[p].mul(j, order)).collect::<Vec<_>>();
    }
    monomial_exponents(degree)
        .into_iter()
        .map(|(p, q)| table[p as usize][q as usize])
        .collect()
}

/// Lower-triangular `C` such that the columns of `samples * C^T` are
/// orthonormal.
fn gram_schmidt(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let (nq, n) = samples.shape();
    let mut coeffs = DMatrix::<f64>::zeros(n, n);
    let mut q_cols = DMatrix::<f64>::zeros(nq, n);
    for j in 0..n {
        let mut v = samples.column(j).clone_owned();
        let mut c = nalgebra::DVector::<f64>::zeros(n);
        c[j] = 1.0;
        for _pass in 0..2 {
            for i in 0..j {
                let r = q_cols.column(i).dot(&v);
                v.axpy(-r, &q_cols.column(i), 1.0);
                let ci = coeffs.row(i).transpose();
                c.axpy(-r, &ci, 1.0);
            }
        }
        let norm = v.norm();
        q_cols.set_column(j, &(v / norm));
        coeffs.set_row(j, &(c / norm).transpose());
    }
    coeffs
}

#[derive(Clone, Debug)]
pub struct CellBasis {
    degree: usize,
    center: Vec2,
    origin: Vec2,
    /// Rows map `x - origin` to `((xi + 1)/2, (eta + 1)/2)`.
    inverse: Matrix2<f64>,
    scale: f64,
    exps: Vec<(u32, u32)>,
    /// Row `i` holds the generator coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

impl CellBasis {
    /// Orthonormal basis of P^degree(T): Dubiner polynomials of the affine
    /// map, renormalized by Gram-Schmidt against quadrature.
    pub fn new(verts: [Vec2; 3], degree: usize) -> CellBasis {
        let center = (verts[0] + verts[1] + verts[2]) / 3.0;
        let jac = Matrix2::from_columns(&[verts[1] - verts[0], verts[2] - verts[0]]);
        let inverse = jac.try_inverse().expect("degenerate cell");
        let scale = (verts[1] - verts[0])
            .norm()
            .max((verts[2] - verts[1]).norm())
            .max((verts[0] - verts[2]).norm());
        let exps = monomial_exponents(degree);
        let n = exps.len();
        let rule = QuadratureRule::triangle(verts, 2 * degree + 2);
        let nq = rule.len();
        let sqrt_w: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
        // columns: weighted generator samples
        let mut basis = CellBasis {
            degree,
            center,
            origin: verts[0],
            inverse,
            scale,
            exps,
            coeffs: DMatrix::identity(n, n),
        };
        let mut samples = DMatrix::<f64>::zeros(nq, n);
        for (q, &p) in rule.points.iter().enumerate() {
            let g = basis.generator_derivs(p, Order::Value);
            for j in 0..n {
                samples[(q, j)] = sqrt_w[q] * g[j][0];
            }
        }
        // a second sweep on the computed functions removes the drift between
        // tracked coefficients and orthogonalized samples
        let first = gram_schmidt(&samples);
        let evaluated = &samples * first.transpose();
        basis.coeffs = gram_schmidt(&evaluated) * first;
        basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Derivatives `d^(p,q)` of every generator at `x`.
    fn generator_derivs(&self, x: Vec2, order: Order) -> Vec<[f64; 13]> {
        let (taylor_order, nderiv) = match order {
            Order::Value => (0, 1),
            Order::Gradient => (1, 3),
            Order::Hessian => (2, 6),
            Order::Third => (3, 10),
            Order::Fourth => (4, 13),
        };
        let r = self.inverse * (x - self.origin);
        let (m0, m1) = (self.inverse.row(0), self.inverse.row(1));
        let xi = Taylor::affine(2.0 * r.x - 1.0, 2.0 * m0[0], 2.0 * m0[1]);
        let eta = Taylor::affine(2.0 * r.y - 1.0, 2.0 * m1[0], 2.0 * m1[1]);
        dubiner(self.degree, xi, eta, taylor_order)
            .iter()
            .map(|t| {
                let mut out = [0.0; 13];
                for (k, &(p, q)) in DERIVS.iter().enumerate().take(nderiv) {
                    out[k] = t.derivative(p as usize, q as usize);
                }
                out
            })
            .collect()
    }

    /// Basis functions and derivatives up to `order` at `x`.
    pub fn tabulate(&self, x: Vec2, order: Order) -> Tabulation {
        let mono = self.generator_derivs(x, order);
        let n = self.dim();
        let mut t = Tabulation::default();
        let combine = |f: &dyn Fn(&[f64; 13]) -> f64| -> Vec<f64> {
            let m: Vec<f64> = mono.iter().map(f).collect();
            (0..n)
                .map(|i| (0..=i).map(|j| self.coeffs[(i, j)] * m[j]).sum())
                .collect()
        };
        t.value = combine(&|m| m[0]);
        if order >= Order::Gradient {
            t.dx = combine(&|m| m[1]);
            t.dy = combine(&|m| m[2]);
        }
        if order >= Order::Hessian {
            t.dxx = combine(&|m| m[3]);
            t.dxy = combine(&|m| m[4]);
            t.dyy = combine(&|m| m[5]);
        }
        if order >= Order::Third {
            t.lap_x = combine(&|m| m[6] + m[8]);
            t.lap_y = combine(&|m| m[7] + m[9]);
        }
        if order >= Order::Fourth {
            t.bilap = combine(&|m| m[10] + 2.0 * m[11] + m[12]);
        }
        t
    }

    /// Evaluates the polynomial with coefficients `c` (on the first `c.len()`
    /// basis functions) and all its derivatives.
    pub fn eval(&self, c: &[f64], x: Vec2) -> Jet {
        assert!(c.len() <= self.dim());
        if c.is_empty() {
            return Jet::default();
        }
        let mono = self.generator_derivs(x, Order::Fourth);
        let mut m = [0.0; 13];
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for j in 0..=i {
                let w = ci * self.coeffs[(i, j)];
                for k in 0..13 {
                    m[k] += w * mono[j][k];
                }
            }
        }
        Jet {
            value: m[0],
            gradient: Vec2::new(m[1], m[2]),
            hessian: Matrix2::new(m[3], m[4], m[4], m[5]),
            laplacian: m[3] + m[5],
            grad_laplacian: Vec2::new(m[6] + m[8], m[7] + m[9]),
            bilaplacian: m[10] + 2.0 * m[11] + m[12],
        }
    }

    pub fn value(&self, c: &[f64], x: Vec2) -> f64 {
        if c.is_empty() {
            return 0.0;
        }
        let t = self.tabulate(x, Order::Value);
        c.iter().zip(&t.value).map(|(a, b)| a * b).sum()
    }

    /// L2 projection onto P^degree(T); empty for negative degrees.
    pub fn project(&self, rule: &QuadratureRule, f: impl Fn(Vec2) -> f64, degree: isize) -> Vec<f64> {
        let n = cell_dim(degree);
        assert!(n <= self.dim(), "projection degree exceeds basis degree");
        let mut c = vec![0.0; n];
        if n == 0 {
            return c;
        }
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let fv = w * f(p);
            let t = self.tabulate(p, Order::Value);
            for i in 0..n {
                c[i] += fv * t.value[i];
            }
        }
        c
    }
}

/// Orthonormal Legendre basis in the arclength parameter `s in [0, L]`.
#[derive(Clone, Copy, Debug)]
pub struct EdgeBasis {
    pub degree: usize,
    pub length: f64,
}

/// Values, first and second arclength derivatives of an edge basis.
#[derive(Clone, Debug, Default)]
pub struct EdgeTabulation {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl EdgeBasis {
    pub fn new(degree: usize, length: f64) -> Self {
        EdgeBasis { degree, length }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn tabulate(&self, s: f64) -> EdgeTabulation {
        let n = self.dim();
        let xi = 2.0 * s / self.length - 1.0;
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut ddp = vec![0.0; n];
        p[0] = 1.0;
        if n > 1 {
            p[1] = xi;
            dp[1] = 1.0;
        }
        for k in 1..n.saturating_sub(1) {
            let kf = k as f64;
            p[k + 1] = ((2.0 * kf + 1.0) * xi * p[k] - kf * p[k - 1]) / (kf + 1.0);
            dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
            ddp[k + 1] = ddp[k - 1] + (2.0 * kf + 1.0) * dp[k];
        }
        let dxi = 2.0 / self.length;
        let mut t = EdgeTabulation::default();
        for j in 0..n {
            let norm = ((2 * j + 1) as f64 / self.length).sqrt();
            t.value.push(norm * p[j]);
            t.d1.push(norm * dxi * dp[j]);
            t.d2.push(norm * dxi * dxi * ddp[j]);
        }
        t
    }

    /// `(value, d/ds, d2/ds2)` of the polynomial with coefficients `c`.
    pub fn eval(&self, c: &[f64], s: f64) -> (f64, f64, f64) {
        if c.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let t = self.tabulate(s);
        let dot = |v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        (dot(&t.value), dot(&t.d1), dot(&t.d2))
    }

    /// Canonical interpolant onto `P^{degree-1}(F)` of the polynomial with
    /// coefficients `c` (degree `self.degree`): keeps both endpoint values
    /// and the moments against `P^{degree-3}(F)`.
    pub fn lower_canonical(&self, c: &[f64]) -> Vec<f64> {
        let d = self.degree;
        assert!(d >= 2 && c.len() == self.dim());
        let mut out = c[..d].to_vec();
        // P_d and P_{d-2} agree at both endpoints
        out[d - 2] += ((2 * d + 1) as f64 / (2 * d - 3) as f64).sqrt() * c[d];
        out
    }

    /// L2 projection onto P^degree(F); empty for negative degrees.
    pub fn project(&self, rule: &EdgeRule, g: impl Fn(Vec2, f64) -> f64, degree: isize) -> Vec<f64> {
        let n = edge_dim(degree);
        assert!(n <= self.dim(), "projection degree exceeds basis degree");
        let mut c = vec![0.0; n];
        for ((&p, &s), &w) in rule.points.iter().zip(&rule.arclength).zip(&rule.weights) {
            if n == 0 {
                break;
            }
            let gv = w * g(p, s);
            let t = self.tabulate(s);
            for i in 0..n {
                c[i] += gv * t.value[i];
            }
        }
        c
    }
}

/// Normal and tangential parts of a gradient and a Hessian on an edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceComponents {
    pub dn: f64,
    pub dt: Vec2,
    pub dnn: f64,
    pub dnt: Vec2,
    pub dtt: Matrix2<f64>,
}

pub fn face_components(hessian: &Matrix2<f64>, gradient: &Vec2, normal: &Vec2) -> FaceComponents {
    let proj = Matrix2::identity() - normal * normal.transpose();
    let hn = hessian * normal;
    FaceComponents {
        dn: normal.dot(gradient),
        dt: proj * gradient,
        dnn: normal.dot(&hn),
        dnt: proj * hn,
        dtt: proj * hessian * proj,
    }
}

/// Jump of a cellwise field across edge `e` at `x`: value from the cell
/// `n_F` points out of minus the value from the other one; on boundary edges
/// the trace itself.
pub fn jump_on_edge(mesh: &Mesh2D, e: usize, x: Vec2, field: impl Fn(usize, Vec2) -> f64) -> f64 {
    let (plus, minus) = mesh.edge(e).cells;
    match minus {
        Some(m) => field(plus, x) - field(m, x),
        None => field(plus, x),
    }
}
