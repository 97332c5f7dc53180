//! Per-node LU solves of the main equation and its x-derivative.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assembly::MainAssembly;
use crate::error::{Error, Result};
use crate::grid::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Condition estimates above this count as singular.
    pub cond_limit: f64,
    /// Also compute the smallest singular value of each node matrix.
    pub singular_values: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            cond_limit: 1e14,
            singular_values: false,
        }
    }
}

/// Solved tables, node-major like the assembly.
#[derive(Debug, Clone)]
pub struct PhiSolution {
    pub nv: usize,
    pub phi: Vec<C64>,
    pub dphi: Vec<C64>,
    /// 1-norm condition estimate of the equilibrated matrix per node.
    pub cond: Vec<f64>,
    /// Relative residual of `A phi = phi~` per node.
    pub residual: Vec<f64>,
    pub min_singular: Option<Vec<f64>>,
}

impl PhiSolution {
    pub fn phi_at(&self, node: usize, v: usize) -> C64 {
        self.phi[node * self.nv + v]
    }

    pub fn dphi_at(&self, node: usize, v: usize) -> C64 {
        self.dphi[node * self.nv + v]
    }

    pub fn cond_max(&self) -> f64 {
        self.cond.iter().cloned().fold(0.0, f64::max)
    }

    pub fn residual_max(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }

    /// Values of `phi_v` on the grid.
    pub fn column(&self, v: usize) -> Vec<C64> {
        self.phi.chunks(self.nv).map(|r| r[v]).collect()
    }

    pub fn dcolumn(&self, v: usize) -> Vec<C64> {
        self.dphi.chunks(self.nv).map(|r| r[v]).collect()
    }
}

/// `A[v0][v] = delta - (-1)^eps(v) G~_{v,v0}` at one node, unscaled.
pub fn node_matrix(asm: &MainAssembly, node: usize) -> DMatrix<C64> {
    let nv = asm.nv();
    DMatrix::from_fn(nv, nv, |v0, v| {
        let d = if v0 == v { C64::new(1.0, 0.0) } else { C64::default() };
        d - asm.index[v].sign() * asm.g_at(node, v, v0)
    })
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

struct NodeOut {
    phi: Vec<C64>,
    dphi: Vec<C64>,
    cond: f64,
    residual: f64,
    smin: Option<f64>,
}

fn solve_node(asm: &MainAssembly, node: usize, opts: &SolveOptions) -> Result<NodeOut> {
    let nv = asm.nv();
    let x = asm.grid.x(node);
    let a = node_matrix(asm, node);
    let s = &asm.scale[node * nv..(node + 1) * nv];
    // unknowns phi_v / s_v, equations divided by s_v0
    let scaled = DMatrix::from_fn(nv, nv, |r, c| a[(r, c)] * (s[c] / s[r]));
    let singular = |cond: f64| Error::SingularSystem { node, x, cond };
    let lu = scaled.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let cond = norm1(&scaled) * norm1(&inv);
    if !cond.is_finite() || cond > opts.cond_limit {
        return Err(singular(cond));
    }
    let lu = scaled.lu();

    let rhs = asm.phi_tilde_at(node);
    let b = DVector::from_fn(nv, |r, _| rhs[r] / s[r]);
    let u = lu.solve(&b).ok_or_else(|| singular(cond))?;
    let phi: Vec<C64> = (0..nv).map(|v| u[v] * s[v]).collect();

    let drhs = asm.dphi_tilde_at(node);
    let b1 = DVector::from_fn(nv, |v0, _| {
        let mut acc = drhs[v0];
        for v in 0..nv {
            acc += asm.index[v].sign() * asm.dg_at(node, v, v0) * phi[v];
        }
        acc / s[v0]
    });
    let du = lu.solve(&b1).ok_or_else(|| singular(cond))?;
    let dphi: Vec<C64> = (0..nv).map(|v| du[v] * s[v]).collect();

    let phi_vec = DVector::from_column_slice(&phi);
    let res = &a * &phi_vec;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for r in 0..nv {
        num = num.max((res[r] - rhs[r]).norm() / s[r]);
        den = den.max(rhs[r].norm() / s[r]);
    }
    let residual = num / den.max(1.0);
    let smin = opts
        .singular_values
        .then(|| a.singular_values().iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(NodeOut {
        phi,
        dphi,
        cond,
        residual,
        smin,
    })
}

/// Solve the main equation on every node. The first failing node, in grid
/// order, is reported.
pub fn solve_phi(asm: &MainAssembly, opts: &SolveOptions) -> Result<PhiSolution> {
    let nv = asm.nv();
    let outs: Vec<Result<NodeOut>> = (0..asm.grid.len()).into_par_iter().map(|i| solve_node(asm, i, opts)).collect();
    let mut sol = PhiSolution {
        nv,
        phi: Vec::with_capacity(outs.len() * nv),
        dphi: Vec::with_capacity(outs.len() * nv),
        cond: Vec::with_capacity(outs.len()),
        residual: Vec::with_capacity(outs.len()),
        min_singular: opts.singular_values.then(Vec::new),
    };
    for o in outs {
        let o = o?;
        sol.phi.extend(o.phi);
        sol.dphi.extend(o.dphi);
        sol.cond.push(o.cond);
        sol.residual.push(o.residual);
        if let (Some(all), Some(v)) = (sol.min_singular.as_mut(), o.smin) {
            all.push(v);
        }
    }
    Ok(sol)
}
