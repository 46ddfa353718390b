//! Boundary interpolation error of the canonical interpolant, recomputed
//! with a monomial basis, Golub-Welsch Gauss rules and Duffy maps split at
//! the singular point.

use hho_core::problems::{interpolation_boundary_error, Polynomial, RadialPower, STUDY_TRIANGLE};
use hho_core::Vec2;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss01(n: usize) -> Vec<(f64, f64)> {
    let mut jac = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Points and weights on the segment `a -> b`, graded toward `a` by
/// `s = u^m`.
fn segment_graded(a: Vec2, b: Vec2, g: &[(f64, f64)], m: i32) -> Vec<(Vec2, f64)> {
    let len = (b - a).norm();
    g.iter()
        .map(|&(u, w)| {
            let s = u.powi(m);
            let ds = m as f64 * u.powi(m - 1);
            (a + (b - a) * s, w * ds * len)
        })
        .collect()
}

/// Duffy rule on the triangle `(o, p, q)`, graded toward `o`.
fn triangle_graded(o: Vec2, p: Vec2, q: Vec2, g: &[(f64, f64)], m: i32) -> Vec<(Vec2, f64)> {
    let (dp, dq) = (p - o, q - p);
    let det = (dp.x * dq.y - dp.y * dq.x).abs();
    let mut out = Vec::new();
    for &(u, wu) in g {
        let s = u.powi(m);
        let ds = m as f64 * u.powi(m - 1);
        for &(t, wt) in g {
            let x = o + (dp + dq * t) * s;
            out.push((x, wu * wt * ds * s * det));
        }
    }
    out
}

struct Monomials {
    center: Vec2,
    exps: Vec<(i32, i32)>,
}

impl Monomials {
    fn new(degree: i32, center: Vec2) -> Self {
        let mut exps = Vec::new();
        for d in 0..=degree {
            for a in (0..=d).rev() {
                exps.push((a, d - a));
            }
        }
        Monomials { center, exps }
    }

    fn values(&self, x: Vec2) -> Vec<f64> {
        let d = x - self.center;
        self.exps.iter().map(|&(a, b)| d.x.powi(a) * d.y.powi(b)).collect()
    }

    fn gradients(&self, x: Vec2) -> Vec<Vec2> {
        let d = x - self.center;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let gx = if a > 0 { a as f64 * d.x.powi(a - 1) * d.y.powi(b) } else { 0.0 };
                let gy = if b > 0 { b as f64 * d.x.powi(a) * d.y.powi(b - 1) } else { 0.0 };
                Vec2::new(gx, gy)
            })
            .collect()
    }
}

/// `C^{k+2} v` on the study triangle in monomial coefficients, with
/// `sing` the point where `v` is not smooth.
fn oracle_interpolant(k: usize, v: &dyn Fn(Vec2) -> f64, sing: Vec2, g: &[(f64, f64)]) -> (Monomials, DVector<f64>) {
    let t = STUDY_TRIANGLE;
    let centroid = (t[0] + t[1] + t[2]) / 3.0;
    let p = (k + 2) as i32;
    let basis = Monomials::new(p, centroid);
    let n = basis.exps.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for &a in &t {
        rows.push(basis.values(a));
        rhs.push(v(a));
    }
    for i in 0..3 {
        let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
        let pts = split_segment(a, b, sing, g);
        let len = (b - a).norm();
        for j in 0..=k as i32 {
            let mut row = vec![0.0; n];
            let mut r = 0.0;
            for &(x, w) in &pts {
                let s = (x - a).norm() / len;
                let xi = s.powi(j);
                for (c, phi) in row.iter_mut().zip(basis.values(x)) {
                    *c += w * xi * phi;
                }
                r += w * xi * v(x);
            }
            rows.push(row);
            rhs.push(r);
        }
    }
    if k >= 1 {
        let tests = Monomials::new(k as i32 - 1, centroid);
        let mut pts = Vec::new();
        for i in 0..3 {
            pts.extend(triangle_graded(sing, t[i], t[(i + 1) % 3], g, 8));
        }
        for e in 0..tests.exps.len() {
            let mut row = vec![0.0; n];
            let mut r = 0.0;
            for &(x, w) in &pts {
                let xi = tests.values(x)[e];
                for (c, phi) in row.iter_mut().zip(basis.values(x)) {
                    *c += w * xi * phi;
                }
                r += w * xi * v(x);
            }
            rows.push(row);
            rhs.push(r);
        }
    }
    assert_eq!(rows.len(), n);
    let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let coef = mat.full_piv_lu().solve(&DVector::from_vec(rhs)).expect("unisolvent");
    (basis, coef)
}

/// Segment rule split at `sing` when it lies on the segment.
fn split_segment(a: Vec2, b: Vec2, sing: Vec2, g: &[(f64, f64)]) -> Vec<(Vec2, f64)> {
    let d = b - a;
    let s = (sing - a).dot(&d) / d.norm_squared();
    let off = (a + d * s - sing).norm();
    if off < 1e-14 && s > 0.0 && s < 1.0 {
        let mut pts = segment_graded(sing, a, g, 8);
        pts.extend(segment_graded(sing, b, g, 8));
        pts
    } else {
        segment_graded(a, b, g, 1)
    }
}

fn oracle_error(k: usize, alpha: f64, g: &[(f64, f64)]) -> f64 {
    let v = |x: Vec2| x.norm().powf(alpha);
    let grad = |x: Vec2| {
        let r = x.norm();
        if r == 0.0 {
            Vec2::zeros()
        } else {
            x * (alpha * r.powf(alpha - 2.0))
        }
    };
    let (basis, coef) = oracle_interpolant(k, &v, Vec2::zeros(), g);
    let t = STUDY_TRIANGLE;
    let mut sq = 0.0;
    for i in 0..3 {
        let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
        let d = b - a;
        let mut normal = Vec2::new(d.y, -d.x).normalize();
        if normal.dot(&(t[i] - a)) > 0.0 {
            normal = -normal;
        }
        for (x, w) in split_segment(a, b, Vec2::zeros(), g) {
            let gc: Vec2 = basis.gradients(x).iter().zip(coef.iter()).map(|(gp, c)| gp * *c).sum();
            let e = normal.dot(&(grad(x) - gc));
            sq += w * e * e;
        }
    }
    sq.sqrt()
}

#[test]
fn gauss_rule_integrates_degree_2n_minus_1() {
    let g = gauss01(7);
    for p in 0..14 {
        let q: f64 = g.iter().map(|&(x, w)| w * x.powi(p)).sum();
        assert!((q - 1.0 / (p + 1) as f64).abs() < 1e-14, "p = {p}");
    }
}

#[test]
fn interpolant_error_matches_independent_construction() {
    let g = gauss01(60);
    for alpha in [1.01, 1.51] {
        let v = RadialPower {
            alpha,
            center: Vec2::zeros(),
        };
        for k in 0..=6 {
            let ours = interpolation_boundary_error(&v, k, 40).unwrap();
            let oracle = oracle_error(k, alpha, &g);
            let rel = (ours - oracle).abs() / oracle;
            assert!(rel < 1e-7, "alpha {alpha} k {k}: {ours:e} vs {oracle:e}");
        }
    }
}

#[test]
fn polynomials_are_reproduced() {
    for k in 0..=8usize {
        let p = (k + 2) as u32;
        let terms = (0..=p).map(|a| (1.0 + 0.25 * a as f64, a, p - a)).chain([(-0.7, 1, 0), (2.0, 0, 0)]).collect();
        let v = Polynomial::new(terms);
        let err = interpolation_boundary_error(&v, k, 4).unwrap();
        assert!(err < 1e-9, "k {k}: {err:e}");
    }
}
