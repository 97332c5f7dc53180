//! The inverse map: spectral data and a model problem to `(tau1^N, sigma0^N)`.
//!
//! The pipeline is [`crate::model::build_model`], [`assembly::assemble`],
//! [`solve::solve_phi`] and [`reconstruct::reconstruct_coefficients`];
//! [`inverse`] runs all four after checking the data.

pub mod assembly;
pub mod kernel;
pub mod reconstruct;
pub mod solve;
pub mod stability;
pub mod verify;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{validate_condition1, ConditionReport};
use crate::error::{Error, Result};
use crate::forward::SpectralData;
use crate::grid::{CoefficientPair, Grid};
use crate::model::{build_model, distance_d, weighted_xi_sum, xi_sequence, IndexV, ModelCache, ModelOptions};

pub use assembly::{assemble, MainAssembly};
pub use kernel::{kernel_d, KernelForm};
pub use solve::{solve_phi, PhiSolution, SolveOptions};

/// Clauses of the data check that block the solver. The asymptotics clause
/// is only reported: truncated data carry too few terms to judge a tail.
pub const BLOCKING_CLAUSES: [&str; 4] = ["distinct", "pairing", "weights", "gamma"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseOptions {
    pub big_n: usize,
    pub model: ModelOptions,
    pub solve: SolveOptions,
    /// Solve even when the data check fails.
    pub force: bool,
}

impl InverseOptions {
    pub fn new(big_n: usize) -> Self {
        InverseOptions {
            big_n,
            model: ModelOptions::default(),
            solve: SolveOptions::default(),
            force: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub big_n: usize,
    pub xi: Vec<f64>,
    pub xi_weighted_sum: f64,
    pub d: f64,
    pub cond: Vec<f64>,
    pub cond_max: f64,
    pub residual_max: f64,
    pub min_singular: Option<f64>,
    /// Largest scaled unknown `psi` over `n` with `xi_n > 0`; the weights are
    /// taken as `n^-k`.
    pub psi_max: Option<f64>,
    pub regularized_used: bool,
    pub data_check: Vec<ClauseSummary>,
    pub verify: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClauseSummary {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl From<&ConditionReport> for Vec<ClauseSummary> {
    fn from(r: &ConditionReport) -> Self {
        r.clauses
            .iter()
            .map(|c| ClauseSummary {
                name: c.name.clone(),
                passed: c.passed,
                detail: c.detail.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub coeffs: CoefficientPair,
    pub index: Vec<IndexV>,
    pub phi: PhiSolution,
    pub diagnostics: Diagnostics,
}

impl ReconstructionResult {
    pub fn tau1(&self) -> &crate::grid::GridFunction {
        &self.coeffs.tau1
    }

    pub fn sigma0(&self) -> &crate::grid::GridFunction {
        &self.coeffs.sigma0
    }
}

/// Check the data and turn a failed blocking clause into an error.
pub fn check_data(data: &SpectralData, force: bool) -> Result<ConditionReport> {
    let report = validate_condition1(data);
    if !force {
        if let Some(c) = report.failures().into_iter().find(|c| BLOCKING_CLAUSES.contains(&c.name.as_str())) {
            return Err(Error::DataViolation {
                clause: c.name.clone(),
                detail: c.detail.clone(),
            });
        }
    }
    Ok(report)
}

fn psi_max(cache: &ModelCache, sol: &PhiSolution, xi: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for n in 1..=cache.big_n {
        if xi[n - 1] == 0.0 {
            continue;
        }
        for k in 1..=2 {
            let w = (n as f64).powi(-(k as i32));
            let p0 = IndexV { n, k, eps: 0 }.position();
            let p1 = IndexV { n, k, eps: 1 }.position();
            for node in 0..sol.cond.len() {
                let (a, b) = (sol.phi_at(node, p0), sol.phi_at(node, p1));
                let m = (b.norm() / w).max(((a - b) / (w * xi[n - 1])).norm());
                best = Some(best.map_or(m, |x: f64| x.max(m)));
            }
        }
    }
    best
}

/// Solve the main equation with a prepared model and reconstruct.
pub fn inverse_with_model(data: &SpectralData, cache: &ModelCache, opts: &InverseOptions) -> Result<ReconstructionResult> {
    let report = check_data(data, opts.force)?;
    let asm = assemble(data, cache)?;
    let sol = solve_phi(&asm, &opts.solve)?;
    let coeffs = reconstruct::reconstruct_coefficients(cache, &asm, &sol)?;
    let xi = xi_sequence(data, &cache.model_data, cache.big_n)?;
    let diagnostics = Diagnostics {
        big_n: cache.big_n,
        xi_weighted_sum: weighted_xi_sum(&xi),
        d: distance_d(&data.truncated(cache.big_n)?, &cache.model_data),
        cond_max: sol.cond_max(),
        residual_max: sol.residual_max(),
        min_singular: sol.min_singular.as_ref().map(|v| v.iter().cloned().fold(f64::INFINITY, f64::min)),
        psi_max: psi_max(cache, &sol, &xi),
        regularized_used: asm.regularized_used,
        data_check: (&report).into(),
        verify: None,
        cond: sol.cond.clone(),
        xi,
    };
    Ok(ReconstructionResult {
        coeffs,
        index: asm.index,
        phi: sol,
        diagnostics,
    })
}

/// Full inverse map on the given grid.
pub fn inverse(data: &SpectralData, grid: Grid, opts: &InverseOptions) -> Result<(ReconstructionResult, ModelCache)> {
    check_data(data, opts.force)?;
    let cache = build_model(data, grid, opts.big_n, &opts.model)?;
    let result = inverse_with_model(data, &cache, opts)?;
    Ok((result, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::compute_spectral_data;
    use crate::grid::{differentiate, l2_norm, w2m1_distance, GridFunction, C64};
    use crate::model::model_coefficients;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn smooth(m: usize) -> CoefficientPair {
        CoefficientPair::from_fns(
            Grid::new(m).unwrap(),
            |x| c((2.0 * PI * x).cos(), 0.0),
            |x| c(0.0, 0.3 * (PI * x).sin()),
        )
    }

    #[test]
    fn model_data_is_a_fixed_point() {
        let grid = Grid::new(256).unwrap();
        let mc = model_coefficients(c(0.4, 0.0), grid, 0.0);
        let data = compute_spectral_data(&mc, 6).unwrap();
        let (rec, _) = inverse(&data, grid, &InverseOptions::new(4)).unwrap();
        assert!(l2_norm(&rec.coeffs.tau1.sub(&mc.tau1).unwrap()).unwrap() < 1e-10);
        assert!(w2m1_distance(&rec.coeffs.sigma0, &mc.sigma0).unwrap() < 1e-10);
        assert!(rec.diagnostics.xi.iter().all(|&x| x < 1e-9));
    }

    #[test]
    fn model_data_columns_coincide() {
        let grid = Grid::new(128).unwrap();
        let mc = model_coefficients(c(-0.2, 0.0), grid, 0.0);
        let data = compute_spectral_data(&mc, 3).unwrap();
        let cache = build_model(&data, grid, 3, &ModelOptions::default()).unwrap();
        let asm = assemble(&data, &cache).unwrap();
        let nv = asm.nv();
        for node in [0, 40, 128] {
            for v0 in 0..nv {
                for v in (0..nv).step_by(2) {
                    let (a, b) = (asm.g_at(node, v, v0), asm.g_at(node, v + 1, v0));
                    assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
                }
            }
        }
    }

    #[test]
    fn kernel_derivative_identity_and_phi_derivative() {
        let m = 512;
        let grid = Grid::new(m).unwrap();
        let data = compute_spectral_data(&smooth(m), 5).unwrap();
        let cache = build_model(&data, grid, 3, &ModelOptions::default()).unwrap();
        let asm = assemble(&data, &cache).unwrap();
        assert!(!asm.regularized_used);
        assert!(asm.g.iter().all(|z| z.is_finite()));
        let nv = asm.nv();
        let h = grid.h();
        for v0 in 0..nv {
            for v in 0..nv {
                for node in [100, 256, 400] {
                    let fd = (asm.g_at(node + 1, v, v0) - asm.g_at(node - 1, v, v0)) / (2.0 * h);
                    let ex = asm.dg_at(node, v, v0);
                    let scale = 1.0 + ex.norm() + asm.g_at(node, v, v0).norm();
                    assert!((fd - ex).norm() < 2e-3 * scale, "{v} {v0} {node}: {fd} vs {ex}");
                }
            }
        }
        let sol = solve_phi(&asm, &SolveOptions::default()).unwrap();
        for v in 0..nv {
            let phi = GridFunction::new(grid, sol.column(v)).unwrap();
            let d = differentiate(&phi).unwrap();
            let dphi = sol.dcolumn(v);
            let scale = dphi.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for i in 0..grid.len() {
                assert!((d.get(i) - dphi[i]).norm() < 1e-5 * scale, "v={v} node={i}");
            }
        }
    }

    #[test]
    fn round_trip_recovers_coefficients() {
        let m = 256;
        let grid = Grid::new(m).unwrap();
        let truth = smooth(m);
        let data = compute_spectral_data(&truth, 8).unwrap();
        let mut errs = Vec::new();
        for big_n in [2, 6] {
            let (rec, _) = inverse(&data, grid, &InverseOptions::new(big_n)).unwrap();
            let e = l2_norm(&rec.coeffs.tau1.sub(&truth.tau1).unwrap()).unwrap();
            let s = w2m1_distance(&rec.coeffs.sigma0, &truth.sigma0).unwrap();
            eprintln!("N={big_n} tau1 {e:.3e} sigma0 {s:.3e} cond {:.3e} res {:.3e}", rec.diagnostics.cond_max, rec.diagnostics.residual_max);
            errs.push((e, s));
        }
        assert!(errs[1].0 < errs[0].0);
        assert!(errs[1].1 < errs[0].1);
    }

    #[test]
    fn duplicate_eigenvalues_are_rejected() {
        let grid = Grid::new(128).unwrap();
        let mut data = compute_spectral_data(&smooth(128), 4).unwrap();
        let l = data.lambda(2, 1);
        data.set_lambda(3, 1, l);
        match inverse(&data, grid, &InverseOptions::new(3)) {
            Err(Error::DataViolation { clause, .. }) => assert_eq!(clause, "distinct"),
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
    }
}
