//! Checks that a reconstruction reproduces its data.
//!
//! `Spectral` mode reruns the forward solver on the reconstructed
//! coefficients. `Weyl` mode rebuilds the Weyl solutions of the
//! reconstructed problem from the solved main equation and checks their
//! boundary conditions; it needs the solved tables and `K` empty.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kernel::combined_kernel;
use super::ReconstructionResult;
use crate::error::{Error, Result};
use crate::forward::{ForwardOptions, ForwardProblem, SpectralData};
use crate::grid::{CoefficientPair, C64};
use crate::model::{IndexV, ModelCache};
use crate::quasi_ode::SystemVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Spectral,
    Weyl,
}

impl FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(VerifyMode::Spectral),
            "weyl" => Ok(VerifyMode::Weyl),
            _ => Err(Error::Parse(format!("unknown verify mode `{s}` (spectral or weyl)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerances {
    pub lambda: f64,
    pub beta: f64,
    pub weyl: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        VerifyTolerances {
            lambda: 1e-3,
            beta: 5e-3,
            weyl: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyRow {
    pub n: usize,
    pub k: usize,
    /// `data` for `n <= N`, `model` beyond.
    pub reference: String,
    pub lambda_expected: C64,
    pub lambda_found: C64,
    pub beta_expected: C64,
    pub beta_found: C64,
    pub rel_lambda_err: f64,
    pub rel_beta_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylCheck {
    pub name: String,
    pub lambda: C64,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub passed: bool,
    pub tolerances: VerifyTolerances,
    pub max_rel_lambda_err: f64,
    pub max_rel_beta_err: f64,
    pub max_weyl_residual: f64,
    pub rows: Vec<VerifyRow>,
    pub weyl: Vec<WeylCheck>,
    pub breaches: Vec<String>,
    pub error: Option<String>,
}

impl VerifyReport {
    fn empty(mode: VerifyMode, tolerances: VerifyTolerances) -> Self {
        VerifyReport {
            mode,
            passed: true,
            tolerances,
            max_rel_lambda_err: 0.0,
            max_rel_beta_err: 0.0,
            max_weyl_residual: 0.0,
            rows: Vec::new(),
            weyl: Vec::new(),
            breaches: Vec::new(),
            error: None,
        }
    }

    fn fail(&mut self, msg: String) {
        self.passed = false;
        self.breaches.push(msg);
    }
}

pub fn rel_lambda_err(found: C64, expected: C64) -> f64 {
    (found - expected).norm() / (1.0 + expected.norm())
}

pub fn rel_beta_err(found: C64, expected: C64) -> f64 {
    (found - expected).norm() / expected.norm().max(1.0)
}

/// Forward data of `coeffs` against `data` for `n <= big_n` and `model`
/// for `big_n < n <= model.n_max`.
pub fn verify_spectral(
    coeffs: &CoefficientPair,
    data: &SpectralData,
    model: Option<&SpectralData>,
    big_n: usize,
    forward: ForwardOptions,
    tol: VerifyTolerances,
) -> VerifyReport {
    let mut report = VerifyReport::empty(VerifyMode::Spectral, tol);
    let n_max = model.map_or(big_n, |m| m.n_max.max(big_n));
    let found = ForwardProblem::with_options(coeffs, forward).and_then(|fp| fp.spectral_data(n_max));
    let found = match found {
        Ok(f) => f,
        Err(e) => {
            report.error = Some(e.to_string());
            report.fail(format!("forward solve failed: {e}"));
            return report;
        }
    };
    for n in 1..=n_max {
        let (reference, src) = if n <= big_n {
            (data, "data")
        } else {
            match model {
                Some(m) => (m, "model"),
                None => break,
            }
        };
        for k in 1..=2 {
            let (le, be) = (reference.lambda(n, k), reference.beta(n, k));
            let (lf, bf) = (found.lambda(n, k), found.beta(n, k));
            let rl = rel_lambda_err(lf, le);
            let rb = rel_beta_err(bf, be);
            let passed = rl <= tol.lambda && rb <= tol.beta;
            if !passed {
                report.fail(format!("(n={n}, k={k}) against {src}: lambda err {rl:.3e}, beta err {rb:.3e}"));
            }
            report.max_rel_lambda_err = report.max_rel_lambda_err.max(rl);
            report.max_rel_beta_err = report.max_rel_beta_err.max(rb);
            report.rows.push(VerifyRow {
                n,
                k,
                reference: src.into(),
                lambda_expected: le,
                lambda_found: lf,
                beta_expected: be,
                beta_found: bf,
                rel_lambda_err: rl,
                rel_beta_err: rb,
                passed,
            });
        }
    }
    report
}

/// `Phi^N_{k0}(., lambda)` as values and x-derivatives on the grid.
pub fn weyl_solution_n(
    data: &SpectralData,
    cache: &ModelCache,
    result: &ReconstructionResult,
    k0: usize,
    lambda: C64,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let grid = cache.grid();
    let model = cache.forward.weyl_solution(lambda, SystemVariant::Direct, k0)?;
    let mut val: Vec<C64> = model.states.iter().map(|s| s.y).collect();
    let mut der: Vec<C64> = model.states.iter().map(|s| s.y1).collect();
    for (pos, v) in result.index.iter().enumerate() {
        let e = cache.entry(*v);
        let k_branch = v.eps == 0 && v.k == 2 && data.in_k(v.n);
        let p = combined_kernel(&e.eta, e.a, &model.states, k0, e.lambda, lambda, k_branch, None, grid)?;
        let sg = v.sign();
        for i in 0..grid.len() {
            let (ph, dph) = (result.phi.phi_at(i, pos), result.phi.dphi_at(i, pos));
            val[i] += sg * ph * p.get(i);
            der[i] += sg * (dph * p.get(i) + ph * e.eta[i].y * model.states[i].y);
        }
    }
    Ok((val, der))
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Test points well away from the real axis, where the spectra sit.
pub fn weyl_test_points() -> Vec<C64> {
    vec![C64::new(0.0, 60.0), C64::new(-150.0, 200.0), C64::new(40.0, -400.0), C64::new(0.0, 1500.0)]
}

/// Boundary conditions of `Phi^N_k` and the interpolation property.
pub fn verify_weyl(
    data: &SpectralData,
    cache: &ModelCache,
    result: &ReconstructionResult,
    points: &[C64],
    tol: VerifyTolerances,
) -> Result<VerifyReport> {
    if !data.k_set().is_empty() {
        return Err(Error::DataViolation {
            clause: "empty K".into(),
            detail: "Weyl-mode verification needs K empty".into(),
        });
    }
    let mut report = VerifyReport::empty(VerifyMode::Weyl, tol);
    let last = cache.grid().m();
    let push = |report: &mut VerifyReport, name: String, lambda: C64, value: f64| {
        let passed = value <= tol.weyl;
        if !passed {
            report.fail(format!("{name} at lambda = {lambda}: {value:.3e}"));
        }
        report.max_weyl_residual = report.max_weyl_residual.max(value);
        report.weyl.push(WeylCheck { name, lambda, value, passed });
    };
    for &lambda in points {
        let mut sols = Vec::with_capacity(3);
        for k0 in 1..=3 {
            sols.push(weyl_solution_n(data, cache, result, k0, lambda)?);
        }
        let (p1, d1) = &sols[0];
        let (p2, d2) = &sols[1];
        let (p3, d3) = &sols[2];
        let (s1, s2, s3) = (max_abs(p1).max(1.0), max_abs(p2).max(1.0), max_abs(p3).max(1.0));
        push(&mut report, "Phi1(1)".into(), lambda, p1[last].norm() / s1);
        push(&mut report, "Phi1'(1)".into(), lambda, d1[last].norm() / (s1 * (1.0 + lambda.norm().cbrt())));
        push(&mut report, "Phi2(1)".into(), lambda, p2[last].norm() / s2);
        push(&mut report, "Phi1(0)-1".into(), lambda, (p1[0] - 1.0).norm());
        push(&mut report, "Phi2(0)".into(), lambda, p2[0].norm());
        push(&mut report, "Phi2'(0)-1".into(), lambda, (d2[0] - 1.0).norm());
        push(&mut report, "Phi3(0)".into(), lambda, p3[0].norm() / s3);
        push(&mut report, "Phi3'(0)".into(), lambda, d3[0].norm() / s3);
    }
    for n in 1..=cache.big_n {
        for k in 1..=2 {
            let v = IndexV { n, k, eps: 0 };
            let lambda = data.lambda(n, k);
            let (vals, _) = weyl_solution_n(data, cache, result, k + 1, lambda)?;
            let phi = result.phi.column(v.position());
            let scale = max_abs(&phi).max(max_abs(&vals)).max(f64::MIN_POSITIVE);
            let gap = vals.iter().zip(&phi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
            push(&mut report, format!("interpolation ({n},{k})"), lambda, gap);
            push(&mut report, format!("Phi{}(1) at lambda_({n},{k})", k + 1), lambda, vals[last].norm() / scale);
        }
    }
    Ok(report)
}
