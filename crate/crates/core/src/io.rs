//! JSON files for spectral data, half data and diagnostics.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so write-then-read is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymptotics::{extract_remainders, validate_condition1};
use crate::error::{Error, Result};
use crate::forward::{SpectralData, SpectralDatum};
use crate::grid::C64;
use crate::selfadjoint::{check_symmetry, HalfData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub n: usize,
    pub gamma: C64,
}

/// On-disk layout of [`SpectralData`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralFile {
    pub theta: C64,
    pub n_max: usize,
    pub entries: Vec<SpectralDatum>,
    #[serde(rename = "K", default)]
    pub k: Vec<GammaEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Value>,
}

impl SpectralFile {
    pub fn from_data(data: &SpectralData, diagnostics: Option<Value>) -> Self {
        SpectralFile {
            theta: data.theta,
            n_max: data.n_max,
            entries: data.entries.clone(),
            k: data.gamma.iter().map(|(&n, &gamma)| GammaEntry { n, gamma }).collect(),
            diagnostics,
        }
    }

    pub fn into_data(self) -> Result<SpectralData> {
        let data = SpectralData::new(self.theta, self.entries, self.k.iter().map(|g| (g.n, g.gamma)).collect())?;
        if data.n_max != self.n_max {
            return Err(Error::Parse(format!(
                "n_max is {} but entries cover n = 1..{}",
                self.n_max, data.n_max
            )));
        }
        Ok(data)
    }
}

/// Asymptotic remainders, the admissibility report and the symmetry report.
pub fn spectral_diagnostics(data: &SpectralData) -> Value {
    let remainders = match extract_remainders(data) {
        Ok(f) => serde_json::json!({
            "tail_max_kappa": f.tail_max_kappa,
            "tail_max_kappa1": f.tail_max_kappa1,
            "decay_slope_kappa": f.decay_slope_kappa,
            "decay_slope_kappa1": f.decay_slope_kappa1,
            "kappa": f.kappa,
            "kappa1": f.kappa1,
        }),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    };
    serde_json::json!({
        "asymptotics": remainders,
        "admissibility": validate_condition1(data),
        "symmetry": check_symmetry(data, 1e-8),
    })
}

pub fn write_json<T: Serialize>(writer: impl Write, value: &T) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_json(File::create(path)?, value)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(reader: impl Read) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(reader))?)
}

pub fn read_json_file<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let f = File::open(path)?;
    read_json(f).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_spectral(path: impl AsRef<Path>, data: &SpectralData, diagnostics: Option<Value>) -> Result<()> {
    write_json_file(path, &SpectralFile::from_data(data, diagnostics))
}

pub fn read_spectral(path: impl AsRef<Path>) -> Result<SpectralData> {
    read_json_file::<SpectralFile>(path)?.into_data()
}

pub fn write_half(path: impl AsRef<Path>, half: &HalfData) -> Result<()> {
    write_json_file(path, half)
}

pub fn read_half(path: impl AsRef<Path>) -> Result<HalfData> {
    read_json_file(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::compute_spectral_data;
    use crate::grid::{CoefficientPair, Grid};
    use crate::selfadjoint::restrict;

    #[test]
    fn spectral_file_round_trip_is_exact() {
        let grid = Grid::new(128).unwrap();
        let coeffs = CoefficientPair::from_fns(grid, |x| C64::new(x.sin(), 0.1), |x| C64::new(0.0, x));
        let data = compute_spectral_data(&coeffs, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sd.json");
        write_spectral(&p, &data, Some(spectral_diagnostics(&data))).unwrap();
        assert_eq!(read_spectral(&p).unwrap(), data);
        let raw: Value = read_json_file(&p).unwrap();
        assert!(raw["diagnostics"]["admissibility"]["clauses"].is_array());
    }

    #[test]
    fn half_data_layout() {
        let text = r#"{"theta": 0.5, "entries": [{"n": 1, "lambda": [75.0, 0.0], "beta": [220.0, 0.5]},
            {"n": 2, "lambda": [0.0, 480.0]}], "K": [{"n": 2, "gamma": 2.0}]}"#;
        let half: HalfData = read_json(text.as_bytes()).unwrap();
        assert_eq!(half.k[0].gamma, 2.0);
        assert_eq!(half.entries[1].beta, None);
        let data = crate::selfadjoint::complete(&half).unwrap();
        assert_eq!(restrict(&data), half);
    }

    #[test]
    fn gamma_outside_range_is_rejected() {
        let text = r#"{"theta": [0.0, 0.0], "n_max": 1, "entries": [
            {"n": 1, "k": 1, "lambda": [1.0, 0.0], "beta": [3.0, 0.0]},
            {"n": 1, "k": 2, "lambda": [-1.0, 0.0], "beta": [-3.0, 0.0]}], "K": [{"n": 4, "gamma": [1.0, 0.0]}]}"#;
        let f: SpectralFile = read_json(text.as_bytes()).unwrap();
        assert!(f.into_data().is_err());
        assert!(read_json::<SpectralFile>("{".as_bytes()).is_err());
    }
}
