//! Exact solutions, problem data and the manufactured test cases.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use std::io::Write;

use nalgebra::Matrix2;

use crate::adapt::loglog_slope;
use crate::error::{Error, Result};
use crate::hho_local::{canonical_interpolant, CellContext, HhoConfig};
use crate::mesh::{Domain, Mesh2D};
use crate::quadrature::CompositeGradedRule;
use crate::Vec2;

/// A smooth (away from listed singular points) scalar field with closed-form
/// first and second derivatives.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
    fn hessian(&self, x: Vec2) -> Matrix2<f64>;
}

/// Sum of `coef * x^a * y^b` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(f64, u32, u32)>,
}

fn mono_deriv(coef: f64, a: u32, b: u32, p: u32, q: u32, x: Vec2) -> f64 {
    if p > a || q > b {
        return 0.0;
    }
    let fa: f64 = (0..p).map(|i| f64::from(a - i)).product();
    let fb: f64 = (0..q).map(|i| f64::from(b - i)).product();
    coef * fa * fb * x.x.powi((a - p) as i32) * x.y.powi((b - q) as i32)
}

impl Polynomial {
    pub fn new(terms: Vec<(f64, u32, u32)>) -> Self {
        Polynomial { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(_, a, b)| a + b).max().unwrap_or(0)
    }

    fn deriv(&self, p: u32, q: u32, x: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|&(c, a, b)| mono_deriv(c, a, b, p, q, x))
            .sum()
    }

    pub fn bilaplacian(&self, x: Vec2) -> f64 {
        self.deriv(4, 0, x) + 2.0 * self.deriv(2, 2, x) + self.deriv(0, 4, x)
    }
}

impl ExactSolution for Polynomial {
    fn value(&self, x: Vec2) -> f64 {
        self.deriv(0, 0, x)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        Vec2::new(self.deriv(1, 0, x), self.deriv(0, 1, x))
    }

    fn hessian(&self, x: Vec2) -> Matrix2<f64> {
        let xy = self.deriv(1, 1, x);
        Matrix2::new(self.deriv(2, 0, x), xy, xy, self.deriv(0, 2, x))
    }
}

/// `u(x, y) = a(x) a(y)` with `a(t) = sin(pi t) t (1 - t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SinProduct;

impl SinProduct {
    /// `n`-th derivative of `a` by the Leibniz rule.
    pub fn factor(n: u32, t: f64) -> f64 {
        let quad = [t - t * t, 1.0 - 2.0 * t, -2.0];
        let binom = [1.0, n as f64, (n * n.saturating_sub(1)) as f64 / 2.0];
        (0..=n.min(2))
            .map(|j| {
                let m = n - j;
                let sin_deriv = PI.powi(m as i32) * (PI * t + m as f64 * PI / 2.0).sin();
                binom[j as usize] * quad[j as usize] * sin_deriv
            })
            .sum()
    }

    pub fn bilaplacian(&self, x: Vec2) -> f64 {
        let a = |n, t| Self::factor(n, t);
        a(4, x.x) * a(0, x.y) + 2.0 * a(2, x.x) * a(2, x.y) + a(0, x.x) * a(4, x.y)
    }
}

impl ExactSolution for SinProduct {
    fn value(&self, x: Vec2) -> f64 {
        Self::factor(0, x.x) * Self::factor(0, x.y)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        Vec2::new(
            Self::factor(1, x.x) * Self::factor(0, x.y),
            Self::factor(0, x.x) * Self::factor(1, x.y),
        )
    }

    fn hessian(&self, x: Vec2) -> Matrix2<f64> {
        let xy = Self::factor(1, x.x) * Self::factor(1, x.y);
        Matrix2::new(
            Self::factor(2, x.x) * Self::factor(0, x.y),
            xy,
            xy,
            Self::factor(0, x.x) * Self::factor(2, x.y),
        )
    }
}

/// `u = r^a sin(a theta)` with `theta` in `[0, 2 pi)`; harmonic, hence
/// biharmonic, away from the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornerSingular {
    pub exponent: f64,
}

impl CornerSingular {
    pub fn angle(x: Vec2) -> f64 {
        let t = x.y.atan2(x.x);
        if t < 0.0 {
            t + 2.0 * PI
        } else {
            t
        }
    }
}

impl ExactSolution for CornerSingular {
    fn value(&self, x: Vec2) -> f64 {
        let a = self.exponent;
        x.norm().powf(a) * (a * Self::angle(x)).sin()
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        let a = self.exponent;
        let r = x.norm();
        if r == 0.0 {
            return Vec2::zeros();
        }
        let t = Self::angle(x);
        let s = a * r.powf(a - 1.0);
        Vec2::new(s * ((a - 1.0) * t).sin(), s * ((a - 1.0) * t).cos())
    }

    fn hessian(&self, x: Vec2) -> Matrix2<f64> {
        let a = self.exponent;
        let r = x.norm();
        let t = Self::angle(x);
        let s = a * (a - 1.0) * r.powf(a - 2.0);
        let (xx, xy) = (s * ((a - 2.0) * t).sin(), s * ((a - 2.0) * t).cos());
        Matrix2::new(xx, xy, xy, -xx)
    }
}

/// `v = |x - center|^alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialPower {
    pub alpha: f64,
    pub center: Vec2,
}

impl ExactSolution for RadialPower {
    fn value(&self, x: Vec2) -> f64 {
        (x - self.center).norm().powf(self.alpha)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        let d = x - self.center;
        let r = d.norm();
        if r == 0.0 {
            return Vec2::zeros();
        }
        d * (self.alpha * r.powf(self.alpha - 2.0))
    }

    fn hessian(&self, x: Vec2) -> Matrix2<f64> {
        let d = x - self.center;
        let r = d.norm();
        let a = self.alpha;
        Matrix2::identity() * (a * r.powf(a - 2.0)) + d * d.transpose() * (a * (a - 2.0) * r.powf(a - 4.0))
    }
}

struct Scaled {
    inner: Arc<dyn ExactSolution>,
    factor: f64,
}

impl ExactSolution for Scaled {
    fn value(&self, x: Vec2) -> f64 {
        self.factor * self.inner.value(x)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        self.inner.gradient(x) * self.factor
    }

    fn hessian(&self, x: Vec2) -> Matrix2<f64> {
        self.inner.hessian(x) * self.factor
    }
}

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
/// Boundary normal-derivative data as a function of the point and the
/// outward unit normal.
pub type NormalField = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;

/// Source, clamped boundary data and optional exact solution.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub load: ScalarField,
    /// Set when the load vanishes identically; skips load quadrature.
    pub zero_load: bool,
    pub exact: Option<Arc<dyn ExactSolution>>,
    pub dirichlet: ScalarField,
    pub neumann: NormalField,
    /// Points where the data are singular; cells and edges touching them use
    /// graded quadrature.
    pub singular_points: Vec<Vec2>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("zero_load", &self.zero_load)
            .field("has_exact", &self.exact.is_some())
            .field("singular_points", &self.singular_points)
            .finish()
    }
}

impl ProblemSpec {
    /// Boundary data taken from the traces of `exact`.
    pub fn from_exact(
        name: &str,
        domain: Domain,
        exact: Arc<dyn ExactSolution>,
        load: Option<ScalarField>,
        singular_points: Vec<Vec2>,
    ) -> Self {
        let (zero_load, load) = match load {
            Some(f) => (false, f),
            None => (true, Arc::new(|_| 0.0) as ScalarField),
        };
        let d = exact.clone();
        let n = exact.clone();
        ProblemSpec {
            name: name.to_string(),
            domain,
            load,
            zero_load,
            exact: Some(exact),
            dirichlet: Arc::new(move |x| d.value(x)),
            neumann: Arc::new(move |x, normal| normal.dot(&n.gradient(x))),
            singular_points,
        }
    }

    /// Homogeneous clamped conditions and no exact solution.
    pub fn homogeneous(name: &str, domain: Domain, load: ScalarField) -> Self {
        ProblemSpec {
            name: name.to_string(),
            domain,
            load,
            zero_load: false,
            exact: None,
            dirichlet: Arc::new(|_| 0.0),
            neumann: Arc::new(|_, _| 0.0),
            singular_points: Vec::new(),
        }
    }

    /// Polynomial exact solution with its bilaplacian as load.
    pub fn polynomial(domain: Domain, p: Polynomial) -> Self {
        let q = p.clone();
        let zero = p.degree() < 4;
        let load: Option<ScalarField> = if zero {
            None
        } else {
            Some(Arc::new(move |x| q.bilaplacian(x)))
        };
        ProblemSpec::from_exact("polynomial", domain, Arc::new(p), load, Vec::new())
    }

    /// All data (and the exact solution) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let (l, d, n) = (self.load.clone(), self.dirichlet.clone(), self.neumann.clone());
        ProblemSpec {
            name: self.name.clone(),
            domain: self.domain,
            load: Arc::new(move |x| factor * l(x)),
            zero_load: self.zero_load,
            exact: self.exact.clone().map(|inner| Arc::new(Scaled { inner, factor }) as Arc<dyn ExactSolution>),
            dirichlet: Arc::new(move |x| factor * d(x)),
            neumann: Arc::new(move |x, m| factor * n(x, m)),
            singular_points: self.singular_points.clone(),
        }
    }

    /// Checks the boundary data against the exact solution at sample points
    /// on every boundary edge of `mesh`.
    pub fn check_boundary_consistency(&self, mesh: &Mesh2D, tol: f64) -> Result<()> {
        let Some(exact) = &self.exact else {
            return Ok(());
        };
        for edge in mesh.edges().iter().filter(|e| e.is_boundary()) {
            let a = mesh.vertices()[edge.vertices[0]];
            let b = mesh.vertices()[edge.vertices[1]];
            for t in [0.13, 0.5, 0.87] {
                let x = a + (b - a) * t;
                let dv = (self.dirichlet)(x) - exact.value(x);
                let nv = (self.neumann)(x, edge.normal) - edge.normal.dot(&exact.gradient(x));
                if dv.abs() > tol || nv.abs() > tol {
                    return Err(Error::Config(format!(
                        "boundary data of '{}' disagree with the exact solution at ({}, {})",
                        self.name, x.x, x.y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A named problem with its initial mesh and expected rates.
#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub name: String,
    pub problem: ProblemSpec,
    /// Subdivisions of the structured initial mesh.
    pub initial_subdivisions: usize,
    /// Expected energy-error slope against DoFs (optimal rate).
    pub expected_dof_slope: fn(usize) -> f64,
}

fn optimal_slope(k: usize) -> f64 {
    -((k + 1) as f64) / 2.0
}

impl ManufacturedCase {
    pub fn initial_mesh(&self) -> Mesh2D {
        Mesh2D::build_structured(self.problem.domain, self.initial_subdivisions)
    }
}

/// L-shaped domain with `u = r^{4/3} sin(4 theta / 3)` and `f = 0`.
pub fn case_lshape_singular() -> ManufacturedCase {
    let exact = Arc::new(CornerSingular { exponent: 4.0 / 3.0 });
    ManufacturedCase {
        name: "lshape".to_string(),
        problem: ProblemSpec::from_exact("lshape", Domain::LShape, exact, None, vec![Vec2::zeros()]),
        initial_subdivisions: 1,
        expected_dof_slope: optimal_slope,
    }
}

/// Unit square with `u = sin(pi x) sin(pi y) x (1 - x) y (1 - y)`.
pub fn case_square_smooth() -> ManufacturedCase {
    let load: ScalarField = Arc::new(|x| SinProduct.bilaplacian(x));
    ManufacturedCase {
        name: "square-smooth".to_string(),
        problem: ProblemSpec::from_exact("square-smooth", Domain::UnitSquare, Arc::new(SinProduct), Some(load), Vec::new()),
        initial_subdivisions: 4,
        expected_dof_slope: optimal_slope,
    }
}

/// Case lookup by command-line name.
pub fn case_by_name(name: &str) -> Result<ManufacturedCase> {
    match name {
        "lshape" | "l-shape" => Ok(case_lshape_singular()),
        "square-smooth" => Ok(case_square_smooth()),
        other => Err(Error::Config(format!(
            "unknown problem '{other}' (expected lshape or square-smooth)"
        ))),
    }
}

/// Triangle of the interpolation study; the origin lies inside its
/// bottom edge.
pub const STUDY_TRIANGLE: [Vec2; 3] = [
    Vec2::new(-0.5, 0.0),
    Vec2::new(0.5, 0.0),
    Vec2::new(-0.5, 1.0),
];

/// Default number of graded levels toward the origin in the study.
pub const STUDY_LEVELS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub k: usize,
    pub error: f64,
}

/// Boundary normal-derivative error of the canonical interpolant
/// `C^{k+2}` of `|x|^alpha` on `STUDY_TRIANGLE`, per `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationStudy {
    pub alpha: f64,
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log(error)` against `log(k + 2)`.
    pub slope: Option<f64>,
}

impl InterpolationStudy {
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "alpha,k,error,fitted_slope")?;
        let slope = self.slope.map_or("nan".to_string(), |s| format!("{s:.16e}"));
        for r in &self.rows {
            writeln!(out, "{:.16e},{},{:.16e},{}", self.alpha, r.k, r.error, slope)?;
        }
        Ok(())
    }
}

/// `||dn (v - C^{k+2} v)||` over the boundary of `STUDY_TRIANGLE`, with
/// moments and edge integrals graded toward the origin. Rules away from the
/// origin have degree growing with `levels` so that one knob refines both.
pub fn interpolation_boundary_error(v: &dyn ExactSolution, k: usize, levels: usize) -> Result<f64> {
    let mesh = Mesh2D::from_triangles(STUDY_TRIANGLE.to_vec(), vec![[0, 1, 2]])?;
    let cfg = HhoConfig::standard(k);
    let ctx = CellContext::new(&mesh, 0, cfg);
    let graded = [CompositeGradedRule::new(Vec2::zeros()).with_levels(levels)];
    let qdeg = cfg.data_quad_degree() + 2 * levels;
    let c = canonical_interpolant(&ctx, v, cfg.cell_degree(), qdeg, &graded)?;
    let mut sq = 0.0;
    for edge in &ctx.edges {
        let rule = graded[0].segment(edge.start, edge.end, qdeg);
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let d = edge.normal.dot(&(v.gradient(x) - ctx.basis.eval(&c, x).gradient));
            sq += w * d * d;
        }
    }
    Ok(sq.sqrt())
}

/// Runs the study for `v = |x|^alpha`. Each error is also computed with
/// twice the graded levels; a relative change above `1e-6` is reported as
/// non-converged quadrature.
pub fn assumption1_study(alpha: f64, ks: &[usize], levels: usize) -> Result<InterpolationStudy> {
    if alpha <= 1.0 {
        return Err(Error::Config(format!("exponent {alpha} must exceed 1")));
    }
    let v = RadialPower { alpha, center: Vec2::zeros() };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let coarse = interpolation_boundary_error(&v, k, levels)?;
        let fine = interpolation_boundary_error(&v, k, 2 * levels)?;
        let tail = (fine - coarse).abs() / fine.max(f64::MIN_POSITIVE);
        if tail > 1e-6 {
            return Err(Error::QuadratureNotConverged { tail, tol: 1e-6 });
        }
        rows.push(StudyRow { k, error: fine });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.k + 2) as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
    Ok(InterpolationStudy {
        alpha,
        slope: loglog_slope(&xs, &ys),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(u: &dyn ExactSolution, x: Vec2) {
        let h = 1e-5;
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        let g = u.gradient(x);
        let fd = Vec2::new(
            (u.value(x + ex) - u.value(x - ex)) / (2.0 * h),
            (u.value(x + ey) - u.value(x - ey)) / (2.0 * h),
        );
        assert!((fd - g).norm() <= 1e-6 * g.norm().max(1.0), "gradient at {x:?}");
        let hs = u.hessian(x);
        let col0 = (u.gradient(x + ex) - u.gradient(x - ex)) / (2.0 * h);
        let col1 = (u.gradient(x + ey) - u.gradient(x - ey)) / (2.0 * h);
        let fdh = Matrix2::from_columns(&[col0, col1]);
        assert!((fdh - hs).norm() <= 1e-6 * hs.norm().max(1.0), "hessian at {x:?}");
    }

    fn sample_points(n: usize, lo: Vec2, hi: Vec2) -> Vec<Vec2> {
        (0..n)
            .map(|i| {
                let s = ((i as f64 + 1.0) * 0.618_033_988_749_895).fract();
                let t = ((i as f64 + 1.0) * 0.754_877_666_246_693).fract();
                Vec2::new(lo.x + s * (hi.x - lo.x), lo.y + t * (hi.y - lo.y))
            })
            .collect()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let lshape = CornerSingular { exponent: 4.0 / 3.0 };
        for x in sample_points(20, Vec2::new(-0.9, 0.1), Vec2::new(0.9, 0.9)) {
            fd_check(&lshape, x);
            fd_check(&SinProduct, x);
        }
        for x in sample_points(20, Vec2::new(-0.9, -0.9), Vec2::new(-0.1, -0.1)) {
            fd_check(&lshape, x);
        }
        let radial = RadialPower { alpha: 1.51, center: Vec2::new(0.1, -0.2) };
        for x in sample_points(20, Vec2::new(0.3, 0.1), Vec2::new(0.9, 0.9)) {
            fd_check(&radial, x);
        }
        let p = Polynomial::new(vec![(1.0, 2, 2), (-0.5, 3, 1), (2.0, 0, 1)]);
        fd_check(&p, Vec2::new(0.3, 0.7));
    }

    #[test]
    fn lshape_solution_is_harmonic_and_bounded() {
        let u = CornerSingular { exponent: 4.0 / 3.0 };
        for x in sample_points(10, Vec2::new(-0.95, 0.05), Vec2::new(0.95, 0.95)) {
            assert!(u.hessian(x).trace().abs() < 1e-9);
            assert!(u.value(x).abs() <= x.norm().powf(4.0 / 3.0) + 1e-15);
        }
        assert_eq!(u.value(Vec2::zeros()), 0.0);
        let dir = Vec2::new(-0.6, 0.8);
        let r = 1e-3;
        let ratio = u.hessian(dir * (r / 2.0)).norm() / u.hessian(dir * r).norm();
        assert!((ratio - 2f64.powf(2.0 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn lshape_data_on_reentrant_edges() {
        let case = case_lshape_singular();
        let u = case.problem.exact.clone().unwrap();
        // theta = 0 and theta = 3 pi / 2 rays
        assert!(u.value(Vec2::new(0.5, 0.0)).abs() < 1e-15);
        assert!(u.value(Vec2::new(0.0, -0.5)).abs() < 1e-14);
        let mesh = case.initial_mesh();
        case.problem.check_boundary_consistency(&mesh, 1e-10).unwrap();
    }

    #[test]
    fn square_smooth_is_clamped() {
        let u = SinProduct;
        for i in 0..40 {
            let t = (i as f64 + 0.5) / 40.0;
            for x in [Vec2::new(t, 0.0), Vec2::new(t, 1.0), Vec2::new(0.0, t), Vec2::new(1.0, t)] {
                assert!(u.value(x).abs() < 1e-12);
                assert!(u.gradient(x).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn square_smooth_load_matches_stencil() {
        // 13-point biharmonic stencil with Richardson extrapolation
        let u = SinProduct;
        let x0 = Vec2::new(0.5, 0.5);
        let stencil = |h: f64| {
            let v = |i: f64, j: f64| u.value(x0 + Vec2::new(i * h, j * h));
            (20.0 * v(0.0, 0.0) - 8.0 * (v(1.0, 0.0) + v(-1.0, 0.0) + v(0.0, 1.0) + v(0.0, -1.0))
                + 2.0 * (v(1.0, 1.0) + v(1.0, -1.0) + v(-1.0, 1.0) + v(-1.0, -1.0))
                + v(2.0, 0.0)
                + v(-2.0, 0.0)
                + v(0.0, 2.0)
                + v(0.0, -2.0))
                / h.powi(4)
        };
        let (c, f) = (stencil(2e-2), stencil(1e-2));
        let extrapolated = (4.0 * f - c) / 3.0;
        let exact = u.bilaplacian(x0);
        assert!((extrapolated - exact).abs() <= 1e-5 * exact.abs());
    }

    #[test]
    fn energy_of_smooth_case_is_positive() {
        let u = SinProduct;
        let mesh = Mesh2D::build_structured(Domain::UnitSquare, 2);
        let mut energy = 0.0;
        for c in 0..mesh.num_cells() {
            let rule = crate::quadrature::QuadratureRule::triangle(mesh.cell_points(c), 12);
            energy += rule.integrate(|x| u.hessian(x).norm_squared());
        }
        assert!(energy > 0.0);
    }

    #[test]
    fn scaling_scales_everything() {
        let case = case_square_smooth();
        let s = case.problem.scaled(-3.0);
        let x = Vec2::new(0.3, 0.6);
        assert!(((s.load)(x) + 3.0 * (case.problem.load)(x)).abs() < 1e-12);
        let (ue, se) = (case.problem.exact.unwrap(), s.exact.unwrap());
        assert!((se.value(x) + 3.0 * ue.value(x)).abs() < 1e-15);
        assert!((se.hessian(x) + ue.hessian(x) * 3.0).norm() < 1e-12);
    }

    #[test]
    fn unknown_problem_is_config_error() {
        assert!(matches!(case_by_name("disk"), Err(Error::Config(_))));
        assert_eq!(case_by_name("lshape").unwrap().name, "lshape");
    }
}
