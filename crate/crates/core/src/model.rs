//! The model problem: a constant `tau1` with the same mean as the unknown
//! one, its spectral data, and every model Weyl solution the main equation
//! consumes.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{detect_k, ForwardOptions, ForwardProblem, SpectralData};
use crate::grid::{integrate, CoefficientPair, Grid, GridFunction, C64};
use crate::quasi_ode::{StateVector, SystemVariant};

/// Index `(n, k, eps)` of the main equation; `eps = 0` refers to the given
/// data, `eps = 1` to the model data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexV {
    pub n: usize,
    pub k: usize,
    pub eps: usize,
}

impl IndexV {
    /// All indices with `n <= big_n`, ascending in `n`, then `k`, then `eps`.
    pub fn enumerate(big_n: usize) -> Vec<IndexV> {
        (1..=big_n)
            .flat_map(|n| (1..=2).flat_map(move |k| (0..=1).map(move |eps| IndexV { n, k, eps })))
            .collect()
    }

    pub fn position(&self) -> usize {
        4 * (self.n - 1) + 2 * (self.k - 1) + self.eps
    }

    /// `(-1)^eps`.
    pub fn sign(&self) -> f64 {
        if self.eps == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Model quantities attached to one index of the main equation.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub v: IndexV,
    pub lambda: C64,
    pub beta: C64,
    /// `Phi~_{k+1}(x, lambda_v)`, the right-hand side of the main equation.
    pub phi: Vec<StateVector>,
    /// `Phi~*_2(x, lambda_v)` when it enters `eta_v`.
    pub star2: Option<Vec<StateVector>>,
    /// `Phi~*_3(x, lambda_v)` when it enters `eta_v`.
    pub star3: Option<Vec<StateVector>>,
    /// `eta_v = a Phi~*_2 + b Phi~*_3`.
    pub a: C64,
    pub b: C64,
    /// The combined state; `eta` is its `y`, `eta'` its `y'` component.
    pub eta: Vec<StateVector>,
}

impl ModelEntry {
    pub fn eta_values(&self) -> Vec<C64> {
        self.eta.iter().map(|s| s.y).collect()
    }

    pub fn deta_values(&self) -> Vec<C64> {
        self.eta.iter().map(|s| s.y1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Amplitude of a zero-mean `cos(2 pi x)` added to the model `tau1`.
    pub jitter: f64,
    /// Relative distance below which two eigenvalues are treated as equal.
    pub coincidence_tol: f64,
    /// Extra model indices beyond `N`, used by spectral verification.
    pub extra: usize,
    pub forward: ForwardOptions,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            jitter: 0.0,
            coincidence_tol: 1e-9,
            extra: 4,
            forward: ForwardOptions::default(),
        }
    }
}

/// Model problem with all tabulated quantities for one truncation `N`.
#[derive(Debug, Clone)]
pub struct ModelCache {
    pub coeffs: CoefficientPair,
    pub model_data: SpectralData,
    pub big_n: usize,
    pub entries: Vec<ModelEntry>,
    pub forward: ForwardProblem,
}

impl ModelCache {
    pub fn grid(&self) -> Grid {
        self.coeffs.grid()
    }

    pub fn entry(&self, v: IndexV) -> &ModelEntry {
        &self.entries[v.position()]
    }

    /// Kernel `D~_{k,j}(x, lambda, mu)` computed from fresh model Weyl solutions.
    pub fn kernel_d(&self, k: usize, j: usize, lambda: C64, mu: C64, regularized: bool) -> Result<GridFunction> {
        let z = self.forward.weyl_solution(lambda, SystemVariant::Star, k)?;
        let y = self.forward.weyl_solution(mu, SystemVariant::Direct, j)?;
        crate::inverse::kernel::kernel_d(&z.states, &y.states, self.grid(), (k, j), lambda, mu, regularized)
    }
}

/// Model coefficients for data with mean `theta`.
pub fn model_coefficients(theta: C64, grid: Grid, jitter: f64) -> CoefficientPair {
    CoefficientPair::from_fns(
        grid,
        |x| theta + jitter * (2.0 * PI * x).cos(),
        |_| C64::default(),
    )
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

fn violation(condition: u8, detail: String) -> Error {
    Error::AdmissibilityViolation { condition, detail }
}

/// Check the four model admissibility conditions against the data.
pub fn check_admissibility(data: &SpectralData, model_coeffs: &CoefficientPair, model: &SpectralData, big_n: usize, tol: f64) -> Result<()> {
    let mean = integrate(&model_coeffs.tau1)?;
    if !close(mean, data.theta, 1e-10) {
        return Err(violation(1, format!("model mean of tau1 is {mean}, data theta is {}", data.theta)));
    }
    if model_coeffs.tau1.values().iter().chain(model_coeffs.sigma0.values()).any(|v| !v.is_finite()) {
        return Err(violation(2, "model coefficients are not finite".into()));
    }
    let model_k = detect_k(model, tol);
    if let Some(n) = model_k.iter().next() {
        return Err(violation(
            3,
            format!("model eigenvalues lambda~_({n},1) and lambda~_({n},2) coincide at {}", model.lambda(*n, 1)),
        ));
    }
    for n in 1..=big_n {
        for p in 1..=big_n {
            let (a, b) = (model.lambda(n, 1), model.lambda(p, 2));
            if close(a, b, tol) {
                return Err(violation(
                    3,
                    format!("model eigenvalues lambda~_({n},1) = {a} and lambda~_({p},2) = {b} coincide"),
                ));
            }
        }
    }
    for n in 1..=big_n {
        for k in 1..=2 {
            let l = data.lambda(n, k);
            for p in 1..=big_n {
                for j in 1..=2 {
                    let lt = model.lambda(p, j);
                    if !close(l, lt, tol) {
                        continue;
                    }
                    // an index whose data coincide with the model data drops out
                    if (n, k) == (p, j) && close(data.beta(n, k), model.beta(p, j), tol) {
                        continue;
                    }
                    return Err(violation(
                        4,
                        format!(
                            "lambda_({n},{k}) = {l} collides with model lambda~_({p},{j}) = {lt} (gap {:.3e})",
                            (l - lt).norm()
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Build the model problem and tabulate everything the main equation needs.
pub fn build_model(data: &SpectralData, grid: Grid, big_n: usize, opts: &ModelOptions) -> Result<ModelCache> {
    if big_n == 0 || big_n > data.n_max {
        return Err(Error::IndexOutOfRange(format!(
            "truncation N = {big_n} must lie in 1..={}",
            data.n_max
        )));
    }
    let coeffs = model_coefficients(data.theta, grid, opts.jitter);
    let forward = ForwardProblem::with_options(&coeffs, opts.forward)?;
    let model_data = forward.spectral_data(big_n + opts.extra)?;
    check_admissibility(data, &coeffs, &model_data, big_n, opts.coincidence_tol)?;

    let index = IndexV::enumerate(big_n);
    let entries: Vec<Result<ModelEntry>> = index
        .par_iter()
        .map(|&v| {
            let (lambda, beta) = if v.eps == 0 {
                (data.lambda(v.n, v.k), data.beta(v.n, v.k))
            } else {
                (model_data.lambda(v.n, v.k), model_data.beta(v.n, v.k))
            };
            let phi = forward.weyl_solution(lambda, SystemVariant::Direct, v.k + 1)?.states;
            let k_branch = v.eps == 0 && v.k == 2 && data.in_k(v.n);
            let (a, b) = if k_branch {
                (data.beta(v.n, 2), -data.gamma(v.n).expect("n in K"))
            } else if v.k == 1 {
                (C64::default(), -beta)
            } else {
                (beta, C64::default())
            };
            let star2 = if a != C64::default() || v.k == 2 {
                Some(forward.weyl_solution(lambda, SystemVariant::Star, 2)?.states)
            } else {
                None
            };
            let star3 = if b != C64::default() || v.k == 1 {
                Some(forward.weyl_solution(lambda, SystemVariant::Star, 3)?.states)
            } else {
                None
            };
            let n_nodes = grid.len();
            let eta = (0..n_nodes)
                .map(|i| {
                    let mut s = StateVector::default();
                    if let Some(z) = &star2 {
                        s = s.add(z[i].scale(a));
                    }
                    if let Some(z) = &star3 {
                        s = s.add(z[i].scale(b));
                    }
                    s
                })
                .collect();
            Ok(ModelEntry {
                v,
                lambda,
                beta,
                phi,
                star2,
                star3,
                a,
                b,
                eta,
            })
        })
        .collect();
    Ok(ModelCache {
        coeffs,
        model_data,
        big_n,
        entries: entries.into_iter().collect::<Result<_>>()?,
        forward,
    })
}

/// `xi_n` for `n = 1..=big_n`.
pub fn xi_sequence(data: &SpectralData, model: &SpectralData, big_n: usize) -> Result<Vec<f64>> {
    (1..=big_n)
        .map(|n| {
            let nf = n as f64;
            let mut s = 0.0;
            for k in 1..=2 {
                let (a, b) = (data.datum(n, k)?, model.datum(n, k)?);
                s += (a.lambda - b.lambda).norm() / nf.powi(2) + (a.beta - b.beta).norm() / nf.powi(3);
            }
            Ok(s)
        })
        .collect()
}

/// `sum_n (n xi_n)^2`.
pub fn weighted_xi_sum(xi: &[f64]) -> f64 {
    xi.iter().enumerate().map(|(i, x)| ((i + 1) as f64 * x).powi(2)).sum()
}

/// Distance between two data sets over their common indices.
pub fn distance_d(a: &SpectralData, b: &SpectralData) -> f64 {
    let n_max = a.n_max.min(b.n_max);
    let mut s = 0.0;
    for n in 1..=n_max {
        let nf = n as f64;
        for k in 1..=2 {
            let t = (a.lambda(n, k) - b.lambda(n, k)).norm() / nf + (a.beta(n, k) - b.beta(n, k)).norm() / nf.powi(2);
            s += t * t;
        }
    }
    s.sqrt()
}
