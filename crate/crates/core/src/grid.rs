//! Uniform grids on [0,1] and complex-valued grid functions.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Uniform partition of [0,1] into `m` subintervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("grid needs at least one subinterval".into()));
        }
        Ok(Grid { m })
    }

    /// Number of subintervals.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of nodes, `m + 1`.
    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(move |i| self.x(i))
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.m != other.m {
            return Err(Error::GridMismatch {
                left: self.m,
                right: other.m,
            });
        }
        Ok(())
    }

    fn require_even(&self) -> Result<()> {
        if self.m % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "composite Simpson needs an even number of subintervals, got {}",
                self.m
            )));
        }
        Ok(())
    }
}

/// Complex samples of a function at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node,
                lambda: C64::new(0.0, 0.0),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.nodes().map(f).collect();
        GridFunction { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn constant(grid: Grid, c: C64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, C64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn get(&self, i: usize) -> C64 {
        self.values[i]
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn shift(&self, c: C64) -> Self {
        self.map(|v| v + c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_re(&self) -> f64 {
        self.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max)
    }

    /// Cubic (4-point Lagrange) interpolation at an arbitrary `x` in [0,1].
    pub fn eval(&self, x: f64) -> C64 {
        interp_cubic(&self.values, self.grid, x)
    }
}

/// 4-point Lagrange interpolation of nodal samples at `x`.
pub(crate) fn interp_cubic(values: &[C64], grid: Grid, x: f64) -> C64 {
    let m = grid.m();
    if m < 3 {
        // linear fallback for tiny grids
        let t = (x * m as f64).clamp(0.0, m as f64);
        let i = (t.floor() as usize).min(m - 1);
        let s = t - i as f64;
        return values[i] * (1.0 - s) + values[i + 1] * s;
    }
    let t = (x * m as f64).clamp(0.0, m as f64);
    let cell = (t.floor() as usize).min(m - 1);
    let start = cell.saturating_sub(1).min(m - 3);
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (t - (start + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += values[start + a] * w;
    }
    acc
}

/// Composite Simpson approximation of the integral over [0,1].
pub fn integrate(f: &GridFunction) -> Result<C64> {
    f.grid.require_even()?;
    Ok(simpson_panels(&f.values, f.grid.h()).last().copied().unwrap_or_default())
}

// running Simpson sums at even nodes: out[j] = integral up to x_{2j}
fn simpson_panels(v: &[C64], h: f64) -> Vec<C64> {
    let panels = (v.len() - 1) / 2;
    let mut out = Vec::with_capacity(panels + 1);
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for j in 0..panels {
        acc += (v[2 * j] + v[2 * j + 1] * 4.0 + v[2 * j + 2]) * (h / 3.0);
        out.push(acc);
    }
    out
}

/// Running integral from 0 to every node.
///
/// Even nodes carry the composite Simpson sum; odd nodes add a cubic
/// single-interval correction on top of the preceding even node.
pub fn cumulative(f: &GridFunction) -> GridFunction {
    let v = &f.values;
    let m = f.grid.m();
    let h = f.grid.h();
    let mut out = vec![C64::new(0.0, 0.0); m + 1];
    if m < 3 {
        for i in 1..=m {
            out[i] = out[i - 1] + (v[i - 1] + v[i]) * (0.5 * h);
        }
        if m == 2 {
            out[2] = (v[0] + v[1] * 4.0 + v[2]) * (h / 3.0);
        }
        return GridFunction {
            grid: f.grid,
            values: out,
        };
    }
    let even = simpson_panels(v, h);
    for (j, s) in even.iter().enumerate() {
        out[2 * j] = *s;
    }
    let c = h / 24.0;
    let mut i = 1;
    while i <= m {
        let last = if i == 1 {
            (v[0] * 9.0 + v[1] * 19.0 - v[2] * 5.0 + v[3]) * c
        } else if i == m {
            (v[m - 3] - v[m - 2] * 5.0 + v[m - 1] * 19.0 + v[m] * 9.0) * c
        } else {
            (-v[i - 2] + v[i - 1] * 13.0 + v[i] * 13.0 - v[i + 1]) * c
        };
        out[i] = out[i - 1] + last;
        i += 2;
    }
    GridFunction {
        grid: f.grid,
        values: out,
    }
}

/// Fourth-order finite-difference derivative.
pub fn differentiate(f: &GridFunction) -> Result<GridFunction> {
    let m = f.grid.m();
    if m < 5 {
        return Err(Error::InvalidGrid(format!(
            "differentiation needs at least 5 subintervals, got {m}"
        )));
    }
    Ok(GridFunction {
        grid: f.grid,
        values: diff4(&f.values, f.grid.h()),
    })
}

pub(crate) fn diff4(v: &[C64], h: f64) -> Vec<C64> {
    let m = v.len() - 1;
    let s = 1.0 / (12.0 * h);
    let mut d = vec![C64::new(0.0, 0.0); m + 1];
    d[0] = (-v[0] * 25.0 + v[1] * 48.0 - v[2] * 36.0 + v[3] * 16.0 - v[4] * 3.0) * s;
    d[1] = (-v[0] * 3.0 - v[1] * 10.0 + v[2] * 18.0 - v[3] * 6.0 + v[4]) * s;
    for i in 2..m - 1 {
        d[i] = (v[i - 2] - v[i - 1] * 8.0 + v[i + 1] * 8.0 - v[i + 2]) * s;
    }
    d[m - 1] = (v[m] * 3.0 + v[m - 1] * 10.0 - v[m - 2] * 18.0 + v[m - 3] * 6.0 - v[m - 4]) * s;
    d[m] = (v[m] * 25.0 - v[m - 1] * 48.0 + v[m - 2] * 36.0 - v[m - 3] * 16.0 + v[m - 4] * 3.0) * s;
    d
}

pub fn l2_norm(f: &GridFunction) -> Result<f64> {
    let sq = f.map(|v| C64::new(v.norm_sqr(), 0.0));
    Ok(integrate(&sq)?.re.max(0.0).sqrt())
}

/// Distance between two antiderivatives modulo additive constants.
pub fn w2m1_distance(s1: &GridFunction, s2: &GridFunction) -> Result<f64> {
    let diff = s1.sub(s2)?;
    let mean = integrate(&diff)?;
    l2_norm(&diff.shift(-mean))
}

/// The coefficient pair: `tau1` and the antiderivative `sigma0` of `tau0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub tau1: GridFunction,
    pub sigma0: GridFunction,
}

impl CoefficientPair {
    pub fn new(tau1: GridFunction, sigma0: GridFunction) -> Result<Self> {
        tau1.grid.check_same(&sigma0.grid)?;
        Ok(CoefficientPair { tau1, sigma0 })
    }

    pub fn from_fns(grid: Grid, tau1: impl Fn(f64) -> C64, sigma0: impl Fn(f64) -> C64) -> Self {
        CoefficientPair {
            tau1: GridFunction::from_fn(grid, tau1),
            sigma0: GridFunction::from_fn(grid, sigma0),
        }
    }

    pub fn zero(grid: Grid) -> Self {
        CoefficientPair {
            tau1: GridFunction::zeros(grid),
            sigma0: GridFunction::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.tau1.grid
    }

    /// `theta`, the mean of `tau1`.
    pub fn theta(&self) -> Result<C64> {
        integrate(&self.tau1)
    }

    /// Same operator with `sigma0` replaced by `sigma0 + c`.
    pub fn gauge_shift(&self, c: C64) -> Self {
        CoefficientPair {
            tau1: self.tau1.clone(),
            sigma0: self.sigma0.shift(c),
        }
    }

    /// Coefficients of the formally adjoint-conjugate operator:
    /// `sigma0 -> -conj(sigma0)`, `tau1 -> conj(tau1)`.
    pub fn dagger(&self) -> Self {
        CoefficientPair {
            tau1: self.tau1.conj(),
            sigma0: self.sigma0.map(|v| -v.conj()),
        }
    }

    /// Cubic interpolation onto another grid; a no-op on the same grid.
    pub fn resample(&self, grid: Grid) -> Self {
        if grid == self.grid() {
            return self.clone();
        }
        CoefficientPair {
            tau1: GridFunction::from_fn(grid, |x| self.tau1.eval(x)),
            sigma0: GridFunction::from_fn(grid, |x| self.sigma0.eval(x)),
        }
    }

    pub fn read_csv_from(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["x", "tau1_re", "tau1_im", "sigma0_re", "sigma0_im"];
        if headers.len() != 5 || headers.iter().zip(expected).any(|(a, b)| a != b) {
            return Err(Error::Parse(format!(
                "coefficient header must be `{}`",
                expected.join(",")
            )));
        }
        let mut xs = Vec::new();
        let mut tau = Vec::new();
        let mut sig = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            if rec.len() != 5 {
                return Err(Error::Parse(format!(
                    "row {}: expected 5 fields, got {}",
                    row + 1,
                    rec.len()
                )));
            }
            let mut f = [0.0; 5];
            for (j, field) in rec.iter().enumerate() {
                f[j] = field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: cannot parse `{field}` as a number", row + 1))
                })?;
            }
            xs.push(f[0]);
            tau.push(C64::new(f[1], f[2]));
            sig.push(C64::new(f[3], f[4]));
        }
        if xs.len() < 2 {
            return Err(Error::Parse("coefficient file needs at least two rows".into()));
        }
        let grid = Grid::new(xs.len() - 1)?;
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.x(i)).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "row {}: x = {x} is not the uniform node {}",
                    i + 1,
                    grid.x(i)
                )));
            }
        }
        CoefficientPair::new(GridFunction::new(grid, tau)?, GridFunction::new(grid, sig)?)
    }

    pub fn write_csv_to(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "tau1_re", "tau1_im", "sigma0_re", "sigma0_im"])?;
        let g = self.grid();
        for i in 0..g.len() {
            let t = self.tau1.values[i];
            let s = self.sigma0.values[i];
            w.write_record([
                fmt17(g.x(i)),
                fmt17(t.re),
                fmt17(t.im),
                fmt17(s.re),
                fmt17(s.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv_from(std::fs::File::open(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

/// 17 significant digits, enough to reproduce any f64 exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: usize) -> Grid {
        Grid::new(m).unwrap()
    }

    #[test]
    fn simpson_examples() {
        let f = GridFunction::from_real_fn(g(64), |x| x);
        assert!((integrate(&f).unwrap() - 0.5).norm() < 1e-15);
        let f = GridFunction::from_real_fn(g(64), |x| (2.0 * std::f64::consts::PI * x).cos());
        assert!(integrate(&f).unwrap().norm() < 1e-12);
        let f = GridFunction::from_real_fn(g(64), f64::exp);
        assert!((integrate(&f).unwrap().re - (1f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn simpson_rejects_odd() {
        let f = GridFunction::zeros(g(7));
        assert!(matches!(integrate(&f), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn cumulative_examples() {
        let grid = g(33);
        let one = cumulative(&GridFunction::constant(grid, C64::new(1.0, 0.0)));
        for (i, v) in one.values().iter().enumerate() {
            assert!((v.re - grid.x(i)).abs() < 1e-14);
        }
        let two_x = cumulative(&GridFunction::from_real_fn(grid, |x| 2.0 * x));
        for (i, v) in two_x.values().iter().enumerate() {
            assert!((v.re - grid.x(i).powi(2)).abs() < 1e-12);
        }
        let grid = g(256);
        let pi = std::f64::consts::PI;
        let c = cumulative(&GridFunction::from_real_fn(grid, |x| (pi * x).cos()));
        for (i, v) in c.values().iter().enumerate() {
            assert!((v.re - (pi * grid.x(i)).sin() / pi).abs() < 1e-8);
        }
    }

    #[test]
    fn cumulative_end_matches_integral() {
        let f = GridFunction::from_fn(g(128), |x| C64::new(x.sin(), x * x));
        let total = integrate(&f).unwrap();
        let c = cumulative(&f);
        assert!((c.get(128) - total).norm() <= 1e-12 * total.norm());
        assert_eq!(c.get(0), C64::new(0.0, 0.0));
    }

    #[test]
    fn derivative_examples() {
        let grid = g(40);
        let d = differentiate(&GridFunction::from_real_fn(grid, |x| x * x)).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            assert!((v.re - 2.0 * grid.x(i)).abs() < 1e-12);
        }
        let d = differentiate(&GridFunction::constant(grid, C64::new(3.0, 1.0))).unwrap();
        assert!(d.max_abs() < 1e-12);
        let grid = g(256);
        let w = 2.0 * std::f64::consts::PI;
        let d = differentiate(&GridFunction::from_real_fn(grid, |x| (w * x).sin())).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            assert!((v.re - w * (w * grid.x(i)).cos()).abs() < 1e-6);
        }
        assert!(differentiate(&GridFunction::zeros(g(4))).is_err());
    }

    #[test]
    fn derivative_of_cumulative_is_fourth_order() {
        let err = |m: usize| {
            let f = GridFunction::from_real_fn(g(m), f64::exp);
            let d = differentiate(&cumulative(&f)).unwrap();
            d.sub(&f).unwrap().max_abs()
        };
        let order = (err(64) / err(128)).log2();
        assert!(order >= 3.5, "observed order {order}");
    }

    #[test]
    fn norms_and_distances() {
        let grid = g(64);
        let one = GridFunction::constant(grid, C64::new(1.0, 0.0));
        assert!((l2_norm(&one).unwrap() - 1.0).abs() < 1e-14);
        let s = GridFunction::from_real_fn(grid, |x| x.sin());
        assert!(w2m1_distance(&s, &s.shift(C64::new(7.0, 0.0))).unwrap() < 1e-13);
        let x = GridFunction::from_real_fn(grid, |x| x);
        let z = GridFunction::zeros(grid);
        let expected = 1.0 / (2.0 * 3f64.sqrt());
        assert!((w2m1_distance(&x, &z).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(
            w2m1_distance(&x, &GridFunction::zeros(g(32))),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn interpolation_exact_for_cubics() {
        let grid = g(10);
        let f = GridFunction::from_real_fn(grid, |x| x * x * x - x);
        for &x in &[0.0, 0.03, 0.47, 0.951, 1.0] {
            assert!((f.eval(x).re - (x * x * x - x)).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = g(16);
        let c = CoefficientPair::from_fns(
            grid,
            |x| C64::new((6.0 * x).cos() / 3.0, 0.1 * x),
            |x| C64::new(0.0, 0.3 * x.sin()),
        );
        let mut buf = Vec::new();
        c.write_csv_to(&mut buf).unwrap();
        let back = CoefficientPair::read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let text = "x,tau1_re,tau1_im,sigma0_re,sigma0_im\n0,0,0,0,0\n0.5,abc,0,0,0\n1,0,0,0,0\n";
        let err = CoefficientPair::read_csv_from(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_fn() -> impl Strategy<Value = (f64, f64, f64)> {
            (-3.0..3.0f64, -3.0..3.0f64, 0.5..4.0f64)
        }

        proptest! {
            #[test]
            fn w2m1_is_a_pseudometric(a in arb_fn(), b in arb_fn(), c in arb_fn(), k in -10.0..10.0f64) {
                let grid = Grid::new(32).unwrap();
                let mk = |(p, q, w): (f64, f64, f64)| {
                    GridFunction::from_fn(grid, move |x| C64::new(p * (w * x).sin(), q * x * x))
                };
                let (fa, fb, fc) = (mk(a), mk(b), mk(c));
                let ab = w2m1_distance(&fa, &fb).unwrap();
                let ba = w2m1_distance(&fb, &fa).unwrap();
                let bc = w2m1_distance(&fb, &fc).unwrap();
                let ac = w2m1_distance(&fa, &fc).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(ac <= ab + bc + 1e-12);
                let shifted = w2m1_distance(&fa.shift(C64::new(k, -k)), &fb).unwrap();
                prop_assert!((shifted - ab).abs() < 1e-10);
            }

            #[test]
            fn cumulative_total_matches_integral(p in -5.0..5.0f64, w in 0.1..6.0f64, half in 3usize..60) {
                let grid = Grid::new(2 * half).unwrap();
                let f = GridFunction::from_fn(grid, |x| C64::new(p * (w * x).cos(), x));
                let total = integrate(&f).unwrap();
                let c = cumulative(&f);
                prop_assert!((c.get(2 * half) - total).norm() <= 1e-12 * (1.0 + total.norm()));
            }
        }
    }
}
