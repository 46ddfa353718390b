//! Dörfler marking, the solve-estimate-mark-refine loop, uniform studies
//! and run records.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, BoundChoice, EstimatorBreakdown};
use crate::global_system::{assemble, energy_error, DiscreteSolution};
use crate::hho_local::HhoConfig;
use crate::mesh::Mesh2D;
use crate::problems::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefinementMode {
    Adaptive,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub theta: f64,
    /// Number of solves (at least one is always performed).
    pub max_iter: usize,
    pub dof_budget: usize,
    pub mode: RefinementMode,
    pub bound: BoundChoice,
    /// Record wall time; off by default so outputs are reproducible.
    pub timing: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            theta: 0.3,
            max_iter: 25,
            dof_budget: 200_000,
            mode: RefinementMode::Adaptive,
            bound: BoundChoice::B,
            timing: false,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        Ok(())
    }
}

/// Result of Dörfler marking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Marking {
    pub cells: Vec<usize>,
    /// Set when every indicator vanishes.
    pub converged: bool,
}

/// Smallest set of cells, taken greedily by descending indicator (ties by
/// cell id), whose indicators sum to at least `theta` times the total.
/// Indicators are squared cell contributions.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Marking {
    let total: f64 = indicators.iter().sum();
    if total <= 0.0 {
        return Marking {
            cells: Vec::new(),
            converged: true,
        };
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let target = theta * total;
    let mut acc = 0.0;
    let mut cells = Vec::new();
    for c in order {
        if acc >= target || indicators[c] <= 0.0 {
            break;
        }
        acc += indicators[c];
        cells.push(c);
    }
    Marking {
        cells,
        converged: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iter: usize,
    pub ncells: usize,
    pub dofs: usize,
    pub energy_error: Option<f64>,
    pub bound_a: f64,
    pub bound_b: f64,
    pub effectivity: Option<f64>,
    pub seconds: f64,
}

/// Column contract of `history.csv`.
pub const HISTORY_HEADER: &str = "iter,ncells,dofs,energy_error,bound_A,bound_B,effectivity,seconds";

fn sci(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => "nan".to_string(),
    }
}

pub fn write_history_csv(records: &[RunRecord], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.ncells,
            r.dofs,
            sci(r.energy_error),
            sci(Some(r.bound_a)),
            sci(Some(r.bound_b)),
            sci(r.effectivity),
            sci(Some(r.seconds))
        )?;
    }
    Ok(())
}

/// Everything produced by one iteration, handed to observers.
pub struct Iteration<'a> {
    pub record: &'a RunRecord,
    pub mesh: &'a Mesh2D,
    pub solution: &'a DiscreteSolution,
    pub estimate: &'a EstimatorBreakdown,
}

/// Solves, estimates and records on one mesh.
pub fn solve_and_estimate(
    mesh: &Mesh2D,
    cfg: HhoConfig,
    problem: &ProblemSpec,
    bound: BoundChoice,
) -> Result<(DiscreteSolution, EstimatorBreakdown, Option<f64>)> {
    let solution = assemble(mesh, cfg, problem)?.solve(mesh)?;
    let est = estimate(mesh, &solution, problem, bound);
    let err = match problem.exact {
        Some(_) => Some(energy_error(mesh, &solution, problem)?.1),
        None => None,
    };
    Ok((solution, est, err))
}

/// Runs the adaptive (or uniform-marking) loop and returns one record per
/// solve. `observer` sees every iteration before refinement.
pub fn run_loop(
    mesh0: &Mesh2D,
    cfg: HhoConfig,
    problem: &ProblemSpec,
    acfg: &AdaptConfig,
    mut observer: impl FnMut(&Iteration<'_>) -> Result<()>,
) -> Result<Vec<RunRecord>> {
    acfg.validate()?;
    let mut mesh = mesh0.clone();
    let mut records = Vec::new();
    let iterations = acfg.max_iter.max(1);
    for iter in 0..iterations {
        let start = Instant::now();
        let (solution, est, err) = solve_and_estimate(&mesh, cfg, problem, acfg.bound).map_err(|e| Error::Iteration {
            iter,
            source: Box::new(e),
        })?;
        let seconds = if acfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let record = RunRecord {
            iter,
            ncells: mesh.num_cells(),
            dofs: solution.ndofs,
            energy_error: err,
            bound_a: est.bound_a,
            bound_b: est.bound_b,
            effectivity: err.and_then(|e| est.effectivity(e)),
            seconds,
        };
        observer(&Iteration {
            record: &record,
            mesh: &mesh,
            solution: &solution,
            estimate: &est,
        })?;
        records.push(record);
        if iter + 1 == iterations || solution.ndofs >= acfg.dof_budget {
            break;
        }
        let marked = match acfg.mode {
            RefinementMode::Uniform => (0..mesh.num_cells()).collect(),
            RefinementMode::Adaptive => {
                let m = dorfler_mark(&est.marking_weights(), acfg.theta);
                if m.converged {
                    break;
                }
                m.cells
            }
        };
        mesh = mesh.refine_nvb(&marked);
    }
    Ok(records)
}

/// Solves on `levels + 1` meshes, each halving the mesh size of the
/// previous one (two bisection rounds per level).
pub fn uniform_study(
    mesh0: &Mesh2D,
    cfg: HhoConfig,
    problem: &ProblemSpec,
    levels: usize,
    bound: BoundChoice,
    timing: bool,
    mut observer: impl FnMut(&Iteration<'_>) -> Result<()>,
) -> Result<Vec<RunRecord>> {
    let mut mesh = mesh0.clone();
    let mut records = Vec::new();
    for iter in 0..=levels {
        if iter > 0 {
            mesh = mesh.uniform_refine().uniform_refine();
        }
        let start = Instant::now();
        let (solution, est, err) = solve_and_estimate(&mesh, cfg, problem, bound).map_err(|e| Error::Iteration {
            iter,
            source: Box::new(e),
        })?;
        let record = RunRecord {
            iter,
            ncells: mesh.num_cells(),
            dofs: solution.ndofs,
            energy_error: err,
            bound_a: est.bound_a,
            bound_b: est.bound_b,
            effectivity: err.and_then(|e| est.effectivity(e)),
            seconds: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
        };
        observer(&Iteration {
            record: &record,
            mesh: &mesh,
            solution: &solution,
            estimate: &est,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Slope over the last `max(3, n/2)` points.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    let m = (n / 2).max(3).min(n);
    loglog_slope(&xs[n - m..n], &ys[n - m..n])
}

/// Which history quantity to fit against DoFs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    EnergyError,
    BoundA,
    BoundB,
}

pub fn fit_dof_slope(records: &[RunRecord], series: Series) -> Option<f64> {
    let xs: Vec<f64> = records.iter().map(|r| r.dofs as f64).collect();
    let ys: Vec<f64> = records
        .iter()
        .map(|r| match series {
            Series::EnergyError => r.energy_error.unwrap_or(f64::NAN),
            Series::BoundA => r.bound_a,
            Series::BoundB => r.bound_b,
        })
        .collect();
    fit_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::case_lshape_singular;

    #[test]
    fn dorfler_examples() {
        assert_eq!(dorfler_mark(&[100.0, 1.0, 1.0], 0.3).cells, vec![0]);
        let all = dorfler_mark(&[1.0, 0.0, 2.0, 3.0], 1.0);
        let mut c = all.cells.clone();
        c.sort();
        assert_eq!(c, vec![0, 2, 3]);
        let z = dorfler_mark(&[0.0, 0.0], 0.5);
        assert!(z.converged && z.cells.is_empty());
        // ties resolved by id
        assert_eq!(dorfler_mark(&[1.0, 1.0, 1.0, 1.0], 0.5).cells, vec![0, 1]);
    }

    #[test]
    fn theta_is_validated() {
        for theta in [0.0, -0.1, 1.5, f64::NAN] {
            let a = AdaptConfig { theta, ..AdaptConfig::default() };
            assert!(a.validate().is_err());
        }
        assert!(AdaptConfig::default().validate().is_ok());
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = (1..10).map(|i| 10f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.75)).collect();
        assert!((fit_slope(&xs, &ys).unwrap() + 0.75).abs() < 1e-12);
        assert!(fit_slope(&xs[..1], &ys[..1]).is_none());
    }

    #[test]
    fn history_csv_contract() {
        let r = RunRecord {
            iter: 0,
            ncells: 6,
            dofs: 10,
            energy_error: Some(0.5),
            bound_a: 1.0,
            bound_b: 0.75,
            effectivity: Some(1.5),
            seconds: 0.0,
        };
        let mut buf = Vec::new();
        write_history_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HISTORY_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "0,6,10,5.0000000000000000e-1,1.0000000000000000e0,7.5000000000000000e-1,1.5000000000000000e0,0.0000000000000000e0"
        );
    }

    #[test]
    fn zero_iterations_give_one_record() {
        let case = case_lshape_singular();
        let acfg = AdaptConfig { max_iter: 0, ..AdaptConfig::default() };
        let recs = run_loop(&case.initial_mesh(), HhoConfig::standard(0), &case.problem, &acfg, |_| Ok(())).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].ncells, 6);
    }

    #[test]
    fn adaptive_loop_refines_toward_corner() {
        let case = case_lshape_singular();
        let acfg = AdaptConfig { max_iter: 8, ..AdaptConfig::default() };
        let mut nearest = Vec::new();
        let recs = run_loop(&case.initial_mesh(), HhoConfig::standard(0), &case.problem, &acfg, |it| {
            let d = (0..it.mesh.num_cells())
                .map(|c| it.mesh.cell_centroid(c).norm())
                .fold(f64::INFINITY, f64::min);
            nearest.push(d);
            Ok(())
        })
        .unwrap();
        assert_eq!(recs.len(), 8);
        for w in recs.windows(2) {
            assert!(w[1].dofs > w[0].dofs);
        }
        for w in nearest[3..].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
