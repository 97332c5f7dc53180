//! Eigenvalue and weight asymptotics: seeding, numbering and the decay
//! diagnostic for finite data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::SpectralData;
use crate::grid::C64;

fn sqrt3() -> f64 {
    3f64.sqrt()
}

/// Leading-order eigenvalue `lambda_{n,k}` for a given `theta`.
pub fn eigen_guess(n: usize, k: usize, theta: C64) -> C64 {
    let n = n as f64;
    let rho = (n + 1.0 / 6.0 - theta / (2.0 * PI * PI * n)) * (2.0 * PI / sqrt3());
    let l = rho * rho * rho;
    if k == 1 {
        l
    } else {
        -l
    }
}

/// Leading-order weight number, `3 * eigen_guess`.
pub fn beta_guess(n: usize, k: usize, theta: C64) -> C64 {
    eigen_guess(n, k, theta) * 3.0
}

/// Cube root of `(-1)^(k+1) lambda` on the branch nearest to the guess for `(n, k)`.
pub fn rho_branch(lambda: C64, n: usize, k: usize, theta: C64) -> Result<C64> {
    let target = if k == 1 { lambda } else { -lambda };
    let guess = (eigen_guess(n, k, theta) * if k == 1 { 1.0 } else { -1.0 }).cbrt();
    let base = target.cbrt();
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let (best, dist) = (0..3)
        .map(|j| base * w.powu(j))
        .map(|r| (r, (r.arg() - guess.arg()).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three roots");
    if dist > 0.4 * (2.0 * PI / 3.0) {
        return Err(Error::IndexOutOfRange(format!(
            "cube root of lambda = {lambda} is {dist:.3} rad away from the sector of (n={n}, k={k})"
        )));
    }
    Ok(best)
}

/// Continuous index estimate obtained by inverting the eigenvalue asymptotics.
pub fn index_estimate(lambda: C64, n: usize, k: usize, theta: C64) -> Result<f64> {
    let rho = rho_branch(lambda, n, k, theta)?;
    let est = rho * (sqrt3() / (2.0 * PI)) - 1.0 / 6.0 + theta / (2.0 * PI * PI * n as f64);
    Ok(est.re)
}

/// Remainders of the asymptotic formulas for one data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFrame {
    pub theta: C64,
    /// `kappa[n-1][k-1]`: remainder of the eigenvalue formula.
    pub kappa: Vec<[C64; 2]>,
    /// `kappa1[n-1][k-1]`: remainder of the weight formula.
    pub kappa1: Vec<[C64; 2]>,
    /// Maximum of `|kappa_n|` over the upper half `n in [N/2, N]`.
    pub tail_max_kappa: f64,
    pub tail_max_kappa1: f64,
    /// Least-squares slope of `log max_k |kappa_n|` against `log n`.
    pub decay_slope_kappa: f64,
    pub decay_slope_kappa1: f64,
}

pub fn extract_remainders(data: &SpectralData) -> Result<AsymptoticFrame> {
    let theta = data.theta;
    let mut kappa = Vec::with_capacity(data.n_max);
    let mut kappa1 = Vec::with_capacity(data.n_max);
    for n in 1..=data.n_max {
        let nf = n as f64;
        let mut kr = [C64::default(); 2];
        let mut kb = [C64::default(); 2];
        for k in 1..=2 {
            let d = data.datum(n, k)?;
            let rho = rho_branch(d.lambda, n, k, theta)?;
            kr[k - 1] = (rho * (sqrt3() / (2.0 * PI)) - nf - 1.0 / 6.0 + theta / (2.0 * PI * PI * nf)) * nf;
            kb[k - 1] = if d.beta == C64::default() {
                // weight removed for an index in K; no asymptotic content
                C64::default()
            } else {
                (d.beta / (d.lambda * 3.0) - 1.0) * nf
            };
        }
        kappa.push(kr);
        kappa1.push(kb);
    }
    let tail = |seq: &[[C64; 2]]| {
        let lo = (data.n_max / 2).max(1);
        (lo..=data.n_max)
            .flat_map(|n| seq[n - 1].iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    };
    Ok(AsymptoticFrame {
        theta,
        tail_max_kappa: tail(&kappa),
        tail_max_kappa1: tail(&kappa1),
        decay_slope_kappa: decay_slope(&kappa),
        decay_slope_kappa1: decay_slope(&kappa1),
        kappa,
        kappa1,
    })
}

fn decay_slope(seq: &[[C64; 2]]) -> f64 {
    let pts: Vec<(f64, f64)> = seq
        .iter()
        .enumerate()
        .skip(1)
        .filter_map(|(i, v)| {
            let m = v[0].norm().max(v[1].norm());
            (m > 0.0).then(|| (((i + 1) as f64).ln(), m.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Outcome of one checked clause.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Offending index tuples, if any.
    pub indices: Vec<Vec<usize>>,
}

impl Clause {
    pub fn new(name: &str, offending: Vec<Vec<usize>>, detail: impl Into<String>) -> Self {
        Clause {
            name: name.to_string(),
            passed: offending.is_empty(),
            detail: detail.into(),
            indices: offending,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionReport {
    pub clauses: Vec<Clause>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| !c.passed).collect()
    }
}

/// Relative tolerance used to decide that two eigenvalues coincide.
pub const COINCIDENCE_TOL: f64 = 1e-8;

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

/// Report-only check of the admissibility conditions for given data.
pub fn validate_condition1(data: &SpectralData) -> ConditionReport {
    let mut clauses = Vec::new();

    let mut distinct = Vec::new();
    for k in 1..=2 {
        for n in 1..=data.n_max {
            for p in n + 1..=data.n_max {
                if close(data.lambda(n, k), data.lambda(p, k), COINCIDENCE_TOL) {
                    distinct.push(vec![n, p, k]);
                }
            }
        }
    }
    clauses.push(Clause::new(
        "distinct",
        distinct,
        "lambda_{n,k} != lambda_{p,k} for n != p",
    ));

    let mut pairing = Vec::new();
    for n in 1..=data.n_max {
        for p in 1..=data.n_max {
            if n != p && close(data.lambda(n, 1), data.lambda(p, 2), COINCIDENCE_TOL) {
                pairing.push(vec![n, p]);
            }
        }
    }
    clauses.push(Clause::new(
        "pairing",
        pairing,
        "coinciding eigenvalues of the two problems carry the same index",
    ));

    let mut weights = Vec::new();
    for n in 1..=data.n_max {
        let zero = data.beta(n, 1) * data.beta(n, 2) == C64::default();
        if zero != data.in_k(n) {
            weights.push(vec![n]);
        }
    }
    clauses.push(Clause::new(
        "weights",
        weights,
        "beta_{n,1} beta_{n,2} = 0 exactly when n is in K",
    ));

    let gamma: Vec<Vec<usize>> = data
        .gamma
        .iter()
        .filter(|(_, g)| g.norm() == 0.0 || !g.is_finite())
        .map(|(&n, _)| vec![n])
        .collect();
    clauses.push(Clause::new("gamma", gamma, "gamma_n != 0 for n in K"));

    let asym = match extract_remainders(data) {
        Ok(frame) => {
            // heuristic: the upper half of the remainders must not exceed the lower half
            let half = |seq: &[[C64; 2]], lower: bool| {
                let n = seq.len();
                let mid = n / 2;
                let range = if lower { 0..mid } else { mid..n };
                range
                    .flat_map(|i| seq[i].iter().map(|c| c.norm()))
                    .fold(0.0, f64::max)
            };
            let mut bad = Vec::new();
            if data.n_max >= 4 {
                if half(&frame.kappa, false) > half(&frame.kappa, true) + 1e-6 {
                    bad.push(vec![0]);
                }
                if half(&frame.kappa1, false) > half(&frame.kappa1, true) + 1e-6 {
                    bad.push(vec![1]);
                }
            }
            Clause::new(
                "asymptotics",
                bad,
                format!(
                    "remainder tails: max|kappa| = {:.3e}, max|kappa1| = {:.3e}",
                    frame.tail_max_kappa, frame.tail_max_kappa1
                ),
            )
        }
        Err(e) => Clause::new("asymptotics", vec![vec![]], e.to_string()),
    };
    clauses.push(asym);

    ConditionReport { clauses }
}
