//! Empirical local stability: perturb one datum and watch the reconstruction.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{inverse, InverseOptions, ReconstructionResult};
use crate::error::{Error, Result};
use crate::forward::SpectralData;
use crate::grid::{l2_norm, w2m1_distance, Grid};
use crate::model::distance_d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lambda,
    Beta,
}

/// Which datum to move, written `beta:n,k` or `lambda:n,k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub target: Target,
    pub n: usize,
    pub k: usize,
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("perturbation `{s}` is not of the form beta:n,k or lambda:n,k"));
        let (t, idx) = s.split_once(':').ok_or_else(bad)?;
        let target = match t.trim() {
            "beta" => Target::Beta,
            "lambda" => Target::Lambda,
            _ => return Err(bad()),
        };
        let (n, k) = idx.split_once(',').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let k: usize = k.trim().parse().map_err(|_| bad())?;
        if n == 0 || !(1..=2).contains(&k) {
            return Err(bad());
        }
        Ok(Perturbation { target, n, k })
    }
}

impl Perturbation {
    /// Copy of `data` with the chosen entry moved by `delta` along the real axis.
    pub fn apply(&self, data: &SpectralData, delta: f64) -> Result<SpectralData> {
        let mut out = data.clone();
        let d = data.datum(self.n, self.k)?;
        match self.target {
            Target::Lambda => out.set_lambda(self.n, self.k, d.lambda + delta),
            Target::Beta => out.set_beta(self.n, self.k, d.beta + delta),
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRow {
    pub delta: f64,
    pub d: f64,
    pub tau1_err: Option<f64>,
    pub sigma0_err: Option<f64>,
    pub ratio_tau1: Option<f64>,
    pub ratio_sigma0: Option<f64>,
    pub singular: bool,
    pub error: Option<String>,
}

/// Reconstruct from `base` and from each perturbed copy, on the same `N`.
pub fn stability_experiment(
    base: &SpectralData,
    grid: Grid,
    opts: &InverseOptions,
    pert: Perturbation,
    deltas: &[f64],
) -> Result<(ReconstructionResult, Vec<StabilityRow>)> {
    if !base.k_set().is_empty() {
        return Err(Error::DataViolation {
            clause: "empty K".into(),
            detail: format!("stability runs need K empty, found {:?}", base.k_set()),
        });
    }
    if pert.n > opts.big_n {
        return Err(Error::IndexOutOfRange(format!(
            "perturbed index n = {} lies beyond N = {}",
            pert.n, opts.big_n
        )));
    }
    let (reference, _) = inverse(base, grid, opts)?;
    let truncated = base.truncated(opts.big_n)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let data = pert.apply(base, delta)?;
        let d = distance_d(&data.truncated(opts.big_n)?, &truncated);
        let mut row = StabilityRow {
            delta,
            d,
            tau1_err: None,
            sigma0_err: None,
            ratio_tau1: None,
            ratio_sigma0: None,
            singular: false,
            error: None,
        };
        match inverse(&data, grid, opts) {
            Ok((rec, _)) => {
                let t = l2_norm(&rec.coeffs.tau1.sub(&reference.coeffs.tau1)?)?;
                let s = w2m1_distance(&rec.coeffs.sigma0, &reference.coeffs.sigma0)?;
                row.tau1_err = Some(t);
                row.sigma0_err = Some(s);
                if d > 0.0 {
                    row.ratio_tau1 = Some(t / d);
                    row.ratio_sigma0 = Some(s / d);
                }
            }
            Err(e) => {
                row.singular = matches!(e, Error::SingularSystem { .. });
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    Ok((reference, rows))
}

/// Largest relative spread `(max - min) / min` of the available ratios.
pub fn ratio_spread(rows: &[StabilityRow]) -> Option<f64> {
    let r: Vec<f64> = rows.iter().filter_map(|r| r.ratio_tau1).collect();
    if r.len() < 2 {
        return None;
    }
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = r.iter().cloned().fold(0.0, f64::max);
    Some((hi - lo) / lo)
}

/// Halving ladder `d0, d0/2, ...` with `count` steps.
pub fn halving_ladder(d0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| d0 / 2f64.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_targets() {
        let p: Perturbation = "beta:1,1".parse().unwrap();
        assert_eq!(p, Perturbation { target: Target::Beta, n: 1, k: 1 });
        let p: Perturbation = "lambda: 3, 2".parse().unwrap();
        assert_eq!((p.target, p.n, p.k), (Target::Lambda, 3, 2));
        for bad in ["beta", "gamma:1,1", "beta:0,1", "beta:1,3", "beta:a,1"] {
            assert!(bad.parse::<Perturbation>().is_err(), "{bad}");
        }
    }

    #[test]
    fn ladder_halves() {
        assert_eq!(halving_ladder(1e-2, 3), vec![1e-2, 5e-3, 2.5e-3]);
    }
}
