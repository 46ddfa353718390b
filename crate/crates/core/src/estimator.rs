//! Residual-type a posteriori error estimator: per-cell stabilization,
//! residual and tangential-jump indicators, data oscillations, and the two
//! global upper bounds.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{cell_dim, EdgeBasis, Jet, Order};
use crate::error::{Error, Result};
use crate::global_system::{cell_rule, edge_rule, DiscreteSolution};
use crate::hho_local::{HhoConfig, Variant};
use crate::mesh::Mesh2D;
use crate::problems::ProblemSpec;
use crate::Vec2;

/// Which global bound is reported and used as the estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundChoice {
    /// Assumption-free bound.
    A,
    /// Bound with the oscillation minimum.
    #[default]
    B,
}

impl FromStr for BoundChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(BoundChoice::A),
            "B" | "b" => Ok(BoundChoice::B),
            other => Err(Error::Config(format!("unknown bound '{other}' (expected A or B)"))),
        }
    }
}

/// Indicators of one cell. Weighted sub-terms are stored as they enter the
/// sums, so `res = res_bulk + res_nt + res_nlap`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellIndicators {
    pub sta: f64,
    pub res_bulk: f64,
    pub res_nt: f64,
    pub res_nlap: f64,
    pub tan_tt: f64,
    pub tan_nt: f64,
    pub osc: f64,
    pub osc_prime: f64,
    pub hbar: f64,
    pub hbar_prime: f64,
}

impl CellIndicators {
    pub fn res(&self) -> f64 {
        self.res_bulk + self.res_nt + self.res_nlap
    }

    pub fn tan(&self) -> f64 {
        self.tan_tt + self.tan_nt
    }

    /// Squared cellwise content of the assumption-free bound; drives marking.
    pub fn marking_weight(&self, k: usize) -> f64 {
        let p = (k + 2) as f64;
        self.tan().powi(2) + p * self.sta.powi(2) + self.res().powi(2) + self.osc.powi(2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBreakdown {
    pub k: usize,
    pub cells: Vec<CellIndicators>,
    pub bound_a: f64,
    pub bound_b: f64,
    pub choice: BoundChoice,
}

/// Both global bounds from per-cell indicators.
pub fn total_bounds(cells: &[CellIndicators], k: usize) -> (f64, f64) {
    let p = (k + 2) as f64;
    let (mut common, mut res_osc, mut osc_prime) = (0.0, 0.0, 0.0);
    for c in cells {
        common += c.tan().powi(2) + p * c.sta.powi(2);
        res_osc += c.res().powi(2) + c.osc.powi(2);
        osc_prime += p * c.osc_prime.powi(2);
    }
    ((common + res_osc).sqrt(), (common + res_osc.min(osc_prime)).sqrt())
}

/// Ratio of estimator to error; `None` when the error is below 1e-14.
pub fn effectivity(estimate: f64, error: f64) -> Option<f64> {
    if error < 1e-14 {
        None
    } else {
        Some(estimate / error)
    }
}

impl EstimatorBreakdown {
    pub fn from_cells(cells: Vec<CellIndicators>, k: usize, choice: BoundChoice) -> Self {
        let (bound_a, bound_b) = total_bounds(&cells, k);
        EstimatorBreakdown {
            k,
            cells,
            bound_a,
            bound_b,
            choice,
        }
    }

    pub fn total(&self) -> f64 {
        match self.choice {
            BoundChoice::A => self.bound_a,
            BoundChoice::B => self.bound_b,
        }
    }

    pub fn effectivity(&self, energy_error: f64) -> Option<f64> {
        effectivity(self.total(), energy_error)
    }

    pub fn marking_weights(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.marking_weight(self.k)).collect()
    }

    /// `cell,eta_sta,eta_res,eta_tan,osc,osc_prime` with 17 significant
    /// digits.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "cell,eta_sta,eta_res,eta_tan,osc,osc_prime")?;
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c.sta,
                c.res(),
                c.tan(),
                c.osc,
                c.osc_prime
            )?;
        }
        Ok(())
    }
}

/// Squared edge integrals of the jumps entering the indicators.
#[derive(Clone, Copy, Debug, Default)]
struct EdgeJumps {
    rec_nt: f64,
    rec_nlap: f64,
    tt: f64,
    nt: f64,
}

fn edge_jumps(mesh: &Mesh2D, sol: &DiscreteSolution, problem: &ProblemSpec, e: usize) -> EdgeJumps {
    let cfg = sol.cfg;
    let edge = mesh.edge(e);
    let a = mesh.vertices()[edge.vertices[0]];
    let b = mesh.vertices()[edge.vertices[1]];
    let len = (b - a).norm();
    let t = (b - a) / len;
    let n = edge.normal;
    let eval = |c: usize, coeffs: &[f64], x: Vec2| -> Jet { sol.bases[c].eval(coeffs, x) };
    let mut out = EdgeJumps::default();
    match edge.cells {
        (plus, Some(minus)) => {
            let rule = crate::quadrature::EdgeRule::segment(a, b, 2 * (cfg.k + 2));
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let rp = eval(plus, sol.reconstructions[plus].as_slice(), x);
                let rm = eval(minus, sol.reconstructions[minus].as_slice(), x);
                let up = eval(plus, sol.cell_values[plus].as_slice(), x);
                let um = eval(minus, sol.cell_values[minus].as_slice(), x);
                let dh = rp.hessian - rm.hessian;
                out.rec_nt += w * t.dot(&(dh * n)).powi(2);
                out.rec_nlap += w * n.dot(&(rp.grad_laplacian - rm.grad_laplacian)).powi(2);
                let du = up.hessian - um.hessian;
                out.tt += w * t.dot(&(du * t)).powi(2);
                out.nt += w * t.dot(&(du * n)).powi(2);
            }
        }
        (cell, None) => {
            // data terms: tangential derivatives of the edge projections of
            // the boundary data
            let rule = edge_rule(a, b, cfg.data_quad_degree(), &problem.singular_points);
            let dir_basis = EdgeBasis::new(cfg.k + 2, len);
            let neu_basis = EdgeBasis::new(cfg.k + 1, len);
            let g = dir_basis.project(&rule, |x, _| (problem.dirichlet)(x), (cfg.k + 2) as isize);
            let gn = neu_basis.project(&rule, |x, _| (problem.neumann)(x, n), (cfg.k + 1) as isize);
            let rule = crate::quadrature::EdgeRule::segment(a, b, 2 * (cfg.k + 2));
            for ((&x, &s), &w) in rule.points.iter().zip(&rule.arclength).zip(&rule.weights) {
                let u = eval(cell, sol.cell_values[cell].as_slice(), x);
                let (_, _, g_ss) = dir_basis.eval(&g, s);
                let (_, gn_s, _) = neu_basis.eval(&gn, s);
                out.tt += w * (t.dot(&(u.hessian * t)) - g_ss).powi(2);
                out.nt += w * (t.dot(&(u.hessian * n)) - gn_s).powi(2);
            }
        }
    }
    out
}

/// Bulk residual and both oscillations of one cell:
/// `(||P f - bilap R||, ||f - P^{k-2} f||, ||f - P' f||)`.
fn cell_terms(mesh: &Mesh2D, sol: &DiscreteSolution, problem: &ProblemSpec, c: usize) -> (f64, f64, f64) {
    let cfg = sol.cfg;
    let k = cfg.k as isize;
    let basis = &sol.bases[c];
    let verts = mesh.cell_points(c);
    let rec = sol.reconstructions[c].as_slice();
    let prime_degree = match cfg.variant {
        Variant::Standard => k - 1,
        Variant::HhoA => k - 2,
    };
    if problem.zero_load {
        let rule = crate::quadrature::QuadratureRule::triangle(verts, 2 * (cfg.k + 2));
        let bulk: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * basis.eval(rec, x).bilaplacian.powi(2))
            .sum();
        return (bulk.sqrt(), 0.0, 0.0);
    }
    let rule = cell_rule(verts, cfg.data_quad_degree(), &problem.singular_points);
    let proj = basis.project(&rule, |x| (problem.load)(x), k - 2);
    let proj_prime = basis.project(&rule, |x| (problem.load)(x), prime_degree);
    let (mut bulk, mut osc, mut osc_prime) = (0.0, 0.0, 0.0);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let f = (problem.load)(x);
        let t = basis.tabulate(x, Order::Value);
        let pf: f64 = proj.iter().zip(&t.value).map(|(a, b)| a * b).sum();
        let pf_prime: f64 = proj_prime.iter().zip(&t.value).map(|(a, b)| a * b).sum();
        let bl = basis.eval(rec, x).bilaplacian;
        bulk += w * (pf - bl).powi(2);
        osc += w * (f - pf).powi(2);
        osc_prime += w * (f - pf_prime).powi(2);
    }
    debug_assert!(proj.len() == cell_dim(k - 2));
    (bulk.sqrt(), osc.sqrt(), osc_prime.sqrt())
}

/// Computes all indicators and both bounds.
pub fn estimate(mesh: &Mesh2D, sol: &DiscreteSolution, problem: &ProblemSpec, choice: BoundChoice) -> EstimatorBreakdown {
    let cfg: HhoConfig = sol.cfg;
    let k = cfg.k;
    let jumps: Vec<EdgeJumps> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| edge_jumps(mesh, sol, problem, e))
        .collect();
    let cells: Vec<CellIndicators> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let h = mesh.cell_diameter(c);
            let hbar = cfg.hbar(h);
            let hbar_prime = h / (k.max(2) - 1) as f64;
            let (bulk, osc, osc_prime) = cell_terms(mesh, sol, problem, c);
            let (mut rec_nt, mut rec_nlap, mut tt, mut nt) = (0.0, 0.0, 0.0, 0.0);
            for e in mesh.cell_edges(c) {
                let j = &jumps[e];
                if !mesh.edge(e).is_boundary() {
                    rec_nt += j.rec_nt;
                    rec_nlap += j.rec_nlap;
                }
                tt += j.tt;
                nt += j.nt;
            }
            CellIndicators {
                sta: sol.stabilization[c].sqrt(),
                res_bulk: hbar * hbar * bulk,
                res_nt: hbar.sqrt() * rec_nt.sqrt(),
                res_nlap: hbar.powf(1.5) * rec_nlap.sqrt(),
                tan_tt: hbar.sqrt() * tt.sqrt(),
                tan_nt: hbar.sqrt() * nt.sqrt(),
                osc: hbar * hbar * osc,
                osc_prime: hbar_prime * hbar_prime * osc_prime,
                hbar,
                hbar_prime,
            }
        })
        .collect();
    EstimatorBreakdown::from_cells(cells, k, choice)
}
