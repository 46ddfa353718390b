//! Shared brute-force oracles for integration tests.

use hho_core::global_system::assemble;
use hho_core::hho_local::HhoConfig;
use hho_core::mesh::Mesh2D;
use hho_core::problems::ProblemSpec;
use nalgebra::{DMatrix, DVector};

enum Local {
    Free(usize),
    Fixed(f64),
}

/// Solves the full system with cell and edge unknowns and returns
/// `(edge unknowns, cell unknowns per cell)`.
pub fn uncondensed_solve(mesh: &Mesh2D, cfg: HhoConfig, problem: &ProblemSpec) -> (Vec<f64>, Vec<DVector<f64>>) {
    let sys = assemble(mesh, cfg, problem).unwrap();
    let nc = cfg.cell_dofs();
    let nt = cfg.trace_dofs();
    let ncell_unknowns = mesh.num_cells() * nc;
    let n = ncell_unknowns + sys.dofs.ndofs();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut f = DVector::<f64>::zeros(n);
    for c in 0..mesh.num_cells() {
        let mut slots: Vec<(Local, f64)> = (0..nc).map(|i| (Local::Free(c * nc + i), 1.0)).collect();
        for i in 0..3 {
            let e = mesh.cell_edges(c)[i];
            let sigma = mesh.sign(c, i);
            for r in 0..cfg.edge_dofs() {
                let s = if r < nt { 1.0 } else { sigma };
                let slot = match sys.dofs.offset(e) {
                    Some(o) => Local::Free(ncell_unknowns + o + r),
                    None => Local::Fixed(sys.prescribed[e].as_ref().unwrap()[r]),
                };
                slots.push((slot, s));
            }
        }
        let a = &sys.cells[c].operators.stiffness;
        let load = &sys.cells[c].load;
        for (i, (si, wi)) in slots.iter().enumerate() {
            let Local::Free(gi) = *si else { continue };
            if i < nc {
                f[gi] += load[i];
            }
            for (j, (sj, wj)) in slots.iter().enumerate() {
                match *sj {
                    Local::Free(gj) => k[(gi, gj)] += wi * wj * a[(i, j)],
                    Local::Fixed(v) => f[gi] -= wi * a[(i, j)] * wj * v,
                }
            }
        }
    }
    let x = k.lu().solve(&f).expect("nonsingular");
    let cells = (0..mesh.num_cells()).map(|c| x.rows(c * nc, nc).into_owned()).collect();
    (x.rows(ncell_unknowns, sys.dofs.ndofs()).iter().copied().collect(), cells)
}
