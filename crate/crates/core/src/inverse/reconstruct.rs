//! Reconstruction of `(tau1, sigma0)` from the solved main equation.

use rayon::prelude::*;

use super::assembly::MainAssembly;
use super::solve::PhiSolution;
use crate::error::Result;
use crate::grid::{cumulative, CoefficientPair, GridFunction, C64};
use crate::model::ModelCache;

/// The three series over `V^N`, summed in index order on every node:
/// `sum (-1)^eps (phi' eta + phi eta')`, `sum (-1)^eps phi' eta` and
/// `sum (-1)^eps phi eta`.
pub fn series(asm: &MainAssembly, sol: &PhiSolution) -> [Vec<C64>; 3] {
    let nv = asm.nv();
    let per_node: Vec<[C64; 3]> = (0..asm.grid.len())
        .into_par_iter()
        .map(|node| {
            let mut out = [C64::default(); 3];
            for v in 0..nv {
                let sg = asm.index[v].sign();
                let (p, dp) = (sol.phi_at(node, v), sol.dphi_at(node, v));
                let (e, de) = (asm.eta[node * nv + v], asm.deta[node * nv + v]);
                out[0] += sg * (dp * e + p * de);
                out[1] += sg * dp * e;
                out[2] += sg * p * e;
            }
            out
        })
        .collect();
    let pick = |j: usize| per_node.iter().map(|r| r[j]).collect::<Vec<_>>();
    [pick(0), pick(1), pick(2)]
}

/// `tau1^N` and `sigma0^N`.
pub fn reconstruct_coefficients(cache: &ModelCache, asm: &MainAssembly, sol: &PhiSolution) -> Result<CoefficientPair> {
    let grid = asm.grid;
    let [s1, s0, s] = series(asm, sol);
    let hat = GridFunction::new(grid, s1.iter().map(|v| -1.5 * v).collect())?;
    let tau1 = cache.coeffs.tau1.add(&hat)?;
    let coupling = cumulative(&hat.mul(&GridFunction::new(grid, s)?)?);
    let sigma0 = GridFunction::new(
        grid,
        (0..grid.len())
            .map(|i| cache.coeffs.sigma0.get(i) - hat.get(i) - 3.0 * s0[i] - 2.0 * coupling.get(i))
            .collect(),
    )?;
    CoefficientPair::new(tau1, sigma0)
}
