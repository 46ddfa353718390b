//! Quadrature on triangles and segments, including geometrically graded
//! composite rules for integrands with a point singularity.

use crate::error::{Error, Result};
use crate::Vec2;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_and_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Legendre rule mapped to `[a, b]`.
fn gauss_on(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    x.into_iter()
        .zip(w)
        .map(move |(x, w)| (a + half * (x + 1.0), half * w))
}

fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Rule on a physical triangle.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly; `None` for composite rules
    /// tuned to a singular integrand.
    pub degree: Option<usize>,
}

impl QuadratureRule {
    /// Collapsed (Duffy) tensor Gauss rule, exact for total degree `degree`.
    pub fn triangle(verts: [Vec2; 3], degree: usize) -> QuadratureRule {
        let n = points_for_degree(degree + 1);
        let mut rule = QuadratureRule {
            points: Vec::with_capacity(n * n),
            weights: Vec::with_capacity(n * n),
            degree: Some(degree),
        };
        push_collapsed(&mut rule, verts[0], verts[1], verts[2], n, n, 0.0, 1.0);
        rule
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Appends the collapsed rule of the triangle `(apex, b, c)` restricted to
/// the radial band `u in [u0, u1]` (`u = 0` at the apex).
#[allow(clippy::too_many_arguments)]
fn push_collapsed(
    rule: &mut QuadratureRule,
    apex: Vec2,
    b: Vec2,
    c: Vec2,
    nu: usize,
    nv: usize,
    u0: f64,
    u1: f64,
) {
    let twice_area = (b - apex).perp(&(c - apex)).abs();
    let vs: Vec<(f64, f64)> = gauss_on(nv, 0.0, 1.0).collect();
    for (u, wu) in gauss_on(nu, u0, u1) {
        for &(v, wv) in &vs {
            rule.points.push(apex + u * ((b - apex) + v * (c - b)));
            rule.weights.push(twice_area * u * wu * wv);
        }
    }
}

/// Rule on a straight segment, with arclength coordinates.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<Vec2>,
    /// Arclength from the first endpoint.
    pub arclength: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: Option<usize>,
}

impl EdgeRule {
    pub fn segment(a: Vec2, b: Vec2, degree: usize) -> EdgeRule {
        let len = (b - a).norm();
        let mut rule = EdgeRule {
            points: Vec::new(),
            arclength: Vec::new(),
            weights: Vec::new(),
            degree: Some(degree),
        };
        for (s, w) in gauss_on(points_for_degree(degree), 0.0, len) {
            rule.points.push(a + (b - a) * (s / len));
            rule.arclength.push(s);
            rule.weights.push(w);
        }
        rule
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Composite rule graded geometrically toward a singular point: the element
/// is split into pieces with the singular point as apex, and each piece into
/// bands at relative distances `ratio^l`, `l = 0..levels`, plus a last band
/// touching the point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeGradedRule {
    pub singular: Vec2,
    pub ratio: f64,
    pub levels: usize,
    /// Extra Gauss points per band on top of the polynomial requirement.
    pub extra_points: usize,
    /// Relative change allowed when doubling `levels`.
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum Element {
    Triangle([Vec2; 3]),
    Segment(Vec2, Vec2),
}

impl CompositeGradedRule {
    pub fn new(singular: Vec2) -> Self {
        CompositeGradedRule {
            singular,
            ratio: 0.5,
            levels: 24,
            extra_points: 4,
            tolerance: 1e-10,
        }
    }

    pub fn with_levels(self, levels: usize) -> Self {
        CompositeGradedRule { levels, ..self }
    }

    fn bands(&self) -> Vec<(f64, f64)> {
        let mut bands = Vec::with_capacity(self.levels + 1);
        let mut hi = 1.0;
        for _ in 0..self.levels {
            let lo = hi * self.ratio;
            bands.push((lo, hi));
            hi = lo;
        }
        bands.push((0.0, hi));
        bands
    }

    /// True when the singular point lies on the closed triangle.
    pub fn touches_triangle(&self, verts: [Vec2; 3]) -> bool {
        let p = self.singular;
        let area = (verts[1] - verts[0]).perp(&(verts[2] - verts[0]));
        let scale = area.abs().sqrt();
        (0..3).all(|i| {
            let (a, b) = (verts[(i + 1) % 3], verts[(i + 2) % 3]);
            (b - a).perp(&(p - a)) * area.signum() >= -1e-12 * scale * (b - a).norm()
        })
    }

    pub fn touches_segment(&self, a: Vec2, b: Vec2) -> bool {
        let p = self.singular;
        let len = (b - a).norm();
        let t = (p - a).dot(&(b - a)) / (len * len);
        let dist = ((b - a).perp(&(p - a)) / len).abs();
        dist <= 1e-12 * len && (-1e-12..=1.0 + 1e-12).contains(&t)
    }

    /// Graded rule on a triangle; falls back to the plain rule when the
    /// singular point is not on the triangle.
    pub fn triangle(&self, verts: [Vec2; 3], degree: usize) -> QuadratureRule {
        if !self.touches_triangle(verts) {
            return QuadratureRule::triangle(verts, degree);
        }
        let n = points_for_degree(degree + 1) + self.extra_points;
        let mut rule = QuadratureRule {
            points: Vec::new(),
            weights: Vec::new(),
            degree: None,
        };
        let total = (verts[1] - verts[0]).perp(&(verts[2] - verts[0])).abs();
        let p = self.singular;
        for i in 0..3 {
            let (b, c) = (verts[(i + 1) % 3], verts[(i + 2) % 3]);
            if (b - p).perp(&(c - p)).abs() <= 1e-14 * total {
                continue;
            }
            for (lo, hi) in self.bands() {
                push_collapsed(&mut rule, p, b, c, n, n, lo, hi);
            }
        }
        rule
    }

    /// Graded rule on the segment `[a, b]`; arclength measured from `a`.
    pub fn segment(&self, a: Vec2, b: Vec2, degree: usize) -> EdgeRule {
        if !self.touches_segment(a, b) {
            return EdgeRule::segment(a, b, degree);
        }
        let len = (b - a).norm();
        let p = self.singular;
        let n = points_for_degree(degree) + self.extra_points;
        let mut rule = EdgeRule {
            points: Vec::new(),
            arclength: Vec::new(),
            weights: Vec::new(),
            degree: None,
        };
        for end in [a, b] {
            let piece = (end - p).norm();
            if piece <= 1e-14 * len {
                continue;
            }
            for (lo, hi) in self.bands() {
                for (u, w) in gauss_on(n, lo, hi) {
                    let x = p + u * (end - p);
                    rule.points.push(x);
                    rule.arclength.push((x - a).norm());
                    rule.weights.push(piece * w);
                }
            }
        }
        rule
    }

    fn rule_integral(&self, f: &dyn Fn(Vec2) -> f64, element: Element, degree: usize) -> f64 {
        match element {
            Element::Triangle(v) => self.triangle(v, degree).integrate(f),
            Element::Segment(a, b) => self.segment(a, b, degree).integrate(f),
        }
    }

    /// Integrates `f` over the element and checks convergence by doubling
    /// the level count.
    pub fn integrate(&self, f: impl Fn(Vec2) -> f64, element: Element, degree: usize) -> Result<f64> {
        let coarse = self.rule_integral(&f, element, degree);
        let fine = self
            .with_levels(2 * self.levels)
            .rule_integral(&f, element, degree);
        let tail = (fine - coarse).abs();
        if tail > self.tolerance * fine.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::QuadratureNotConverged {
                tail: tail / fine.abs().max(f64::MIN_POSITIVE),
                tol: self.tolerance,
            });
        }
        Ok(fine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> [Vec2; 3] {
        [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_is_exact() {
        for n in 1..30 {
            let (x, w) = gauss_legendre(n);
            assert!(w.iter().all(|&w| w > 0.0));
            for p in 0..(2 * n) {
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((approx - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_monomials_exact() {
        for degree in [0, 1, 2, 5, 10, 20, 34] {
            let rule = QuadratureRule::triangle(reference(), degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx = rule.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    assert!(
                        (approx - exact).abs() <= 1e-13 * exact,
                        "degree {degree}, x^{a} y^{b}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn physical_triangle_area() {
        let v = [Vec2::new(0.3, -1.0), Vec2::new(2.0, 0.5), Vec2::new(-0.5, 1.5)];
        let area = 0.5 * (v[1] - v[0]).perp(&(v[2] - v[0])).abs();
        let rule = QuadratureRule::triangle(v, 4);
        assert!((rule.integrate(|_| 1.0) - area).abs() < 1e-14);
    }

    #[test]
    fn edge_rule_exact() {
        let rule = EdgeRule::segment(Vec2::new(1.0, 1.0), Vec2::new(4.0, 5.0), 9);
        for p in 0..=9 {
            let exact = 5f64.powi(p + 1) / (p as f64 + 1.0);
            let approx: f64 = rule
                .arclength
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| w * s.powi(p))
                .sum();
            assert!((approx - exact).abs() <= 1e-13 * exact);
        }
    }

    #[test]
    fn graded_weights_tile_element() {
        let g = CompositeGradedRule::new(Vec2::new(0.5, 0.0));
        let rule = g.triangle(reference(), 6);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!((rule.integrate(|_| 1.0) - 0.5).abs() < 1e-12);
        let vertex = CompositeGradedRule::new(Vec2::new(0.0, 1.0)).triangle(reference(), 6);
        assert!((vertex.integrate(|_| 1.0) - 0.5).abs() < 1e-12);
        let edge = g.segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 4);
        assert!((edge.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn graded_unit_edge_constant() {
        let g = CompositeGradedRule::new(Vec2::new(0.0, 0.0));
        let i = g
            .integrate(|_| 1.0, Element::Segment(Vec2::zeros(), Vec2::new(1.0, 0.0)), 0)
            .unwrap();
        assert!((i - 1.0).abs() < 1e-12);
    }

    #[test]
    fn graded_radial_power_on_segment() {
        let g = CompositeGradedRule::new(Vec2::new(0.0, 0.0));
        let i = g
            .integrate(
                |p| p.norm().powf(0.02),
                Element::Segment(Vec2::zeros(), Vec2::new(1.0, 0.0)),
                4,
            )
            .unwrap();
        assert!((i - 1.0 / 1.02).abs() < 1e-12);
    }

    #[test]
    fn non_convergence_is_reported() {
        // r^{-1} is not integrable on a segment through the singularity
        let g = CompositeGradedRule::new(Vec2::new(0.0, 0.0));
        let err = g
            .integrate(
                |p| 1.0 / p.norm(),
                Element::Segment(Vec2::zeros(), Vec2::new(1.0, 0.0)),
                2,
            )
            .unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { .. }));
    }

    #[test]
    fn detects_touching() {
        let g = CompositeGradedRule::new(Vec2::new(0.5, 0.0));
        assert!(g.touches_triangle(reference()));
        assert!(g.touches_segment(Vec2::zeros(), Vec2::new(1.0, 0.0)));
        assert!(!g.touches_segment(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)));
        let far = CompositeGradedRule::new(Vec2::new(2.0, 2.0));
        assert!(!far.touches_triangle(reference()));
    }
}
