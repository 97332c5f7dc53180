//! Per-node matrices of the truncated main equation.

use rayon::prelude::*;

use super::kernel::combined_kernel;
use crate::error::Result;
use crate::forward::SpectralData;
use crate::grid::{Grid, C64};
use crate::model::{IndexV, ModelCache};

/// Everything the per-node solves need, stored node-major.
#[derive(Debug, Clone)]
pub struct MainAssembly {
    pub grid: Grid,
    pub index: Vec<IndexV>,
    /// `g[(node * nv + v0) * nv + v] = G~_{v,v0}(x_node)`.
    pub g: Vec<C64>,
    /// `phi_tilde[node * nv + v]` and its x-derivative.
    pub phi_tilde: Vec<C64>,
    pub dphi_tilde: Vec<C64>,
    /// `eta~_v` and `eta~_v'`, same layout.
    pub eta: Vec<C64>,
    pub deta: Vec<C64>,
    /// Magnitude of the model state `phi~_v`, used to equilibrate.
    pub scale: Vec<f64>,
    /// Whether any kernel took the regularized branch.
    pub regularized_used: bool,
}

impl MainAssembly {
    pub fn nv(&self) -> usize {
        self.index.len()
    }

    pub fn g_at(&self, node: usize, v: usize, v0: usize) -> C64 {
        let nv = self.nv();
        self.g[(node * nv + v0) * nv + v]
    }

    /// `G~'_{v,v0} = eta~_v phi~_{v0}`.
    pub fn dg_at(&self, node: usize, v: usize, v0: usize) -> C64 {
        let nv = self.nv();
        self.eta[node * nv + v] * self.phi_tilde[node * nv + v0]
    }

    fn row(data: &[C64], nv: usize, node: usize) -> &[C64] {
        &data[node * nv..(node + 1) * nv]
    }

    pub fn phi_tilde_at(&self, node: usize) -> &[C64] {
        Self::row(&self.phi_tilde, self.nv(), node)
    }

    pub fn dphi_tilde_at(&self, node: usize) -> &[C64] {
        Self::row(&self.dphi_tilde, self.nv(), node)
    }
}

/// Build `G~_{v,v0}` for all pairs of `V^N` on every node.
pub fn assemble(data: &SpectralData, cache: &ModelCache) -> Result<MainAssembly> {
    let grid = cache.grid();
    let index = IndexV::enumerate(cache.big_n);
    let nv = index.len();
    let nodes = grid.len();

    let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|v0| (0..nv).map(move |v| (v0, v))).collect();
    let columns: Vec<Vec<C64>> = pairs
        .par_iter()
        .map(|&(v0, v)| {
            let ev = &cache.entries[v];
            let e0 = &cache.entries[v0];
            let k_branch = ev.v.eps == 0 && ev.v.k == 2 && data.in_k(ev.v.n);
            combined_kernel(&ev.eta, ev.a, &e0.phi, e0.v.k + 1, ev.lambda, e0.lambda, k_branch, None, grid)
                .map(|f| f.into_values())
        })
        .collect::<Result<_>>()?;

    let mut g = vec![C64::default(); nodes * nv * nv];
    for (p, col) in columns.iter().enumerate() {
        let (v0, v) = pairs[p];
        for (node, val) in col.iter().enumerate() {
            g[(node * nv + v0) * nv + v] = *val;
        }
    }

    let mut phi_tilde = vec![C64::default(); nodes * nv];
    let mut dphi_tilde = phi_tilde.clone();
    let mut eta = phi_tilde.clone();
    let mut deta = phi_tilde.clone();
    let mut scale = vec![0.0; nodes * nv];
    for (v, e) in cache.entries.iter().enumerate() {
        let r = 1.0 + e.lambda.norm().cbrt();
        for node in 0..nodes {
            let s = e.phi[node];
            phi_tilde[node * nv + v] = s.y;
            dphi_tilde[node * nv + v] = s.y1;
            eta[node * nv + v] = e.eta[node].y;
            deta[node * nv + v] = e.eta[node].y1;
            let mag = (s.y.norm_sqr() + s.y1.norm_sqr() / (r * r) + s.y2.norm_sqr() / r.powi(4)).sqrt();
            scale[node * nv + v] = if mag > f64::MIN_POSITIVE { mag } else { 1.0 };
        }
    }
    let regularized_used = index.iter().any(|v| v.eps == 0 && v.k == 2 && data.in_k(v.n));
    Ok(MainAssembly {
        grid,
        index,
        g,
        phi_tilde,
        dphi_tilde,
        eta,
        deta,
        scale,
        regularized_used,
    })
}
