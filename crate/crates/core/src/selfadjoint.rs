//! The self-adjoint case: `tau1` real and `sigma0` purely imaginary.
//!
//! The two spectra are then mirror images, `lambda_{n,2} = -conj(lambda_{n,1})`,
//! so half of the data determines the rest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{rho_branch, Clause, ConditionReport};
use crate::error::{Error, Result};
use crate::forward::{SpectralData, SpectralDatum};
use crate::grid::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfEntry {
    pub n: usize,
    pub lambda: C64,
    /// Absent for `n` in `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfGamma {
    pub n: usize,
    pub gamma: f64,
}

/// `lambda_n = lambda_{n,1}` with its weight, plus `gamma_n` on `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfData {
    pub theta: f64,
    pub entries: Vec<HalfEntry>,
    #[serde(rename = "K", default)]
    pub k: Vec<HalfGamma>,
}

impl HalfData {
    pub fn gamma(&self, n: usize) -> Option<f64> {
        self.k.iter().find(|g| g.n == n).map(|g| g.gamma)
    }

    /// `Re lambda_n >= 0` for every entry.
    pub fn right_half_plane(&self) -> bool {
        self.entries.iter().all(|e| e.lambda.re >= 0.0)
    }
}

/// Full data: `lambda_{n,2} = -conj(lambda_n)`, `beta_{n,2} = -conj(beta_n)`,
/// both weights zero on `K`.
pub fn complete(half: &HalfData) -> Result<SpectralData> {
    let mut entries = Vec::with_capacity(2 * half.entries.len());
    let mut gamma = BTreeMap::new();
    for e in &half.entries {
        let beta = match (half.gamma(e.n), e.beta) {
            (Some(g), _) => {
                gamma.insert(e.n, C64::new(g, 0.0));
                C64::default()
            }
            (None, Some(b)) => b,
            (None, None) => {
                return Err(Error::Parse(format!("beta missing for n = {} outside K", e.n)));
            }
        };
        entries.push(SpectralDatum {
            n: e.n,
            k: 1,
            lambda: e.lambda,
            beta,
        });
        entries.push(SpectralDatum {
            n: e.n,
            k: 2,
            lambda: -e.lambda.conj(),
            beta: -beta.conj(),
        });
    }
    SpectralData::new(C64::new(half.theta, 0.0), entries, gamma)
}

/// Keep the `k = 1` half. Imaginary parts of `theta` and `gamma` are dropped.
pub fn restrict(data: &SpectralData) -> HalfData {
    HalfData {
        theta: data.theta.re,
        entries: (1..=data.n_max)
            .map(|n| HalfEntry {
                n,
                lambda: data.lambda(n, 1),
                beta: (!data.in_k(n)).then(|| data.beta(n, 1)),
            })
            .collect(),
        k: data.gamma.iter().map(|(&n, g)| HalfGamma { n, gamma: g.re }).collect(),
    }
}

const TOL: f64 = 1e-8;

fn close(a: C64, b: C64) -> bool {
    (a - b).norm() <= TOL * (1.0 + a.norm().max(b.norm()))
}

/// Preconditions for half data to come from a self-adjoint pair.
pub fn check_suff_conditions(half: &HalfData) -> ConditionReport {
    let theta = C64::new(half.theta, 0.0);
    let mut clauses = Vec::new();

    let mut asym = Vec::new();
    let mut tail: f64 = 0.0;
    for e in &half.entries {
        match rho_branch(e.lambda, e.n, 1, theta) {
            Ok(_) => {
                if let Some(b) = e.beta {
                    let r = ((b / (e.lambda * 3.0) - 1.0) * e.n as f64).norm();
                    if 2 * e.n > half.entries.len() {
                        tail = tail.max(r);
                    }
                }
            }
            Err(_) => asym.push(vec![e.n]),
        }
    }
    clauses.push(Clause::new(
        "asymptotics",
        asym,
        format!("condition 1: lambda_n follows the eigenvalue asymptotics (weight remainder tail {tail:.3e})"),
    ));

    let mut distinct = Vec::new();
    for (i, a) in half.entries.iter().enumerate() {
        for b in &half.entries[i + 1..] {
            if close(a.lambda, b.lambda) || close(a.lambda, -b.lambda.conj()) {
                distinct.push(vec![a.n, b.n]);
            }
        }
    }
    clauses.push(Clause::new(
        "distinct",
        distinct,
        "condition 1: lambda_n != lambda_p and lambda_n != -conj(lambda_p) for n != p",
    ));

    let weights: Vec<Vec<usize>> = half
        .entries
        .iter()
        .filter(|e| half.gamma(e.n).is_none() && e.beta.is_none_or(|b| b == C64::default()))
        .map(|e| vec![e.n])
        .collect();
    clauses.push(Clause::new("weights", weights, "condition 2: beta_n != 0 for n outside K"));

    // n is in K exactly when lambda_n sits on its own mirror image
    let k_set: Vec<Vec<usize>> = half
        .entries
        .iter()
        .filter(|e| close(e.lambda, -e.lambda.conj()) != half.gamma(e.n).is_some())
        .map(|e| vec![e.n])
        .collect();
    clauses.push(Clause::new(
        "k_set",
        k_set,
        "condition 2: n is in K exactly when lambda_n = -conj(lambda_n); cross-paired K is not supported",
    ));

    let re: Vec<Vec<usize>> = half.entries.iter().filter(|e| e.lambda.re < 0.0).map(|e| vec![e.n]).collect();
    clauses.push(Clause::new("re_lambda", re, "condition 3: Re lambda_n >= 0"));

    let gamma: Vec<Vec<usize>> = half.k.iter().filter(|g| !(g.gamma > 0.0)).map(|g| vec![g.n]).collect();
    clauses.push(Clause::new("gamma", gamma, "condition 3: gamma_n > 0 for n in K"));

    ConditionReport { clauses }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub passed: bool,
    pub tol: f64,
    /// Largest `|lambda_{n,1} + conj(lambda_{n,2})| / (1 + |lambda_{n,1}|)`.
    pub max_lambda: f64,
    /// Largest `|beta_{n,1} + conj(beta_{n,2})| / (1 + |beta_{n,1}|)`.
    pub max_beta: f64,
    pub max_gamma_im: f64,
    /// Index attaining the largest violation.
    pub worst_n: Option<usize>,
}

pub fn check_symmetry(data: &SpectralData, tol: f64) -> SymmetryReport {
    let mut rep = SymmetryReport {
        passed: true,
        tol,
        max_lambda: 0.0,
        max_beta: 0.0,
        max_gamma_im: 0.0,
        worst_n: None,
    };
    let mut worst = 0.0;
    for n in 1..=data.n_max {
        let (l1, l2) = (data.lambda(n, 1), data.lambda(n, 2));
        let (b1, b2) = (data.beta(n, 1), data.beta(n, 2));
        let el = (l1 + l2.conj()).norm() / (1.0 + l1.norm());
        let eb = (b1 + b2.conj()).norm() / (1.0 + b1.norm());
        rep.max_lambda = rep.max_lambda.max(el);
        rep.max_beta = rep.max_beta.max(eb);
        if el.max(eb) > worst {
            worst = el.max(eb);
            rep.worst_n = Some(n);
        }
    }
    for (&n, g) in &data.gamma {
        let e = g.im.abs() / (1.0 + g.norm());
        rep.max_gamma_im = rep.max_gamma_im.max(e);
        if e > worst {
            worst = e;
            rep.worst_n = Some(n);
        }
    }
    rep.passed = worst <= tol;
    rep
}
