//! The forward map: characteristic functions, eigenvalues, weight numbers,
//! Weyl-Yurko matrices and Weyl solutions.
//!
//! Minors of the fundamental matrix are never formed by subtracting products
//! of large numbers. The 2x2 minors `C_i C_j' - C_j C_i'` are components of
//! cross products of solutions, and cross products of solutions of `v' = Av`
//! solve the adjoint flow `u' = -A^T u`, so they are integrated directly.
//! Weyl solutions are built from a forward and a backward sweep in the same
//! spirit, which keeps every quantity accurate to integrator precision even
//! when the solutions themselves grow like `exp(|lambda|^(1/3))`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{eigen_guess, index_estimate};
use crate::error::{Error, Result};
use crate::grid::{CoefficientPair, Grid, C64};
use crate::quasi_ode::{cross, Direction, Flow, QuasiSystem, StateVector, SystemVariant, Trajectory, V3};

/// Values of the characteristic functions at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicValues {
    pub lambda: C64,
    pub d11: C64,
    pub d21: C64,
    pub d31: C64,
    pub d22: C64,
    pub d32: C64,
    pub ddot11: Option<C64>,
    pub ddot22: Option<C64>,
    /// `C_k(1)` for `k = 1, 2, 3`.
    pub c_end: [StateVector; 3],
}

impl CharacteristicValues {
    /// `-C1^[2] D11 + C2^[2] D21 + C3^[2] D31`, identically 1.
    pub fn wronskian_expansion(&self) -> C64 {
        -self.c_end[0].y2 * self.d11 + self.c_end[1].y2 * self.d21 + self.c_end[2].y2 * self.d31
    }

    pub fn diag(&self, k: usize) -> C64 {
        if k == 1 {
            self.d11
        } else {
            self.d22
        }
    }

    pub fn diag_dot(&self, k: usize) -> Option<C64> {
        if k == 1 {
            self.ddot11
        } else {
            self.ddot22
        }
    }

    /// `Delta_{k+1,k}`, the numerator of the weight number.
    pub fn sub(&self, k: usize) -> C64 {
        if k == 1 {
            self.d21
        } else {
            self.d32
        }
    }
}

/// One eigenvalue with its weight number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDatum {
    pub n: usize,
    pub k: usize,
    pub lambda: C64,
    pub beta: C64,
}

/// Eigenvalues and weights of both boundary value problems for `n <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub theta: C64,
    pub n_max: usize,
    /// Ordered by `n`, then `k`.
    pub entries: Vec<SpectralDatum>,
    /// The index set `K` together with `gamma_n`.
    pub gamma: BTreeMap<usize, C64>,
}

impl SpectralData {
    pub fn new(theta: C64, mut entries: Vec<SpectralDatum>, gamma: BTreeMap<usize, C64>) -> Result<Self> {
        entries.sort_by_key(|d| (d.n, d.k));
        let n_max = entries.len() / 2;
        for (i, d) in entries.iter().enumerate() {
            if d.n != i / 2 + 1 || d.k != i % 2 + 1 {
                return Err(Error::IndexOutOfRange(format!(
                    "spectral data must hold (n, k) for n = 1..N and k = 1, 2 exactly once; found (n={}, k={}) at position {i}",
                    d.n, d.k
                )));
            }
        }
        if entries.len() % 2 != 0 {
            return Err(Error::IndexOutOfRange("odd number of spectral entries".into()));
        }
        if let Some(&n) = gamma.keys().find(|&&n| n == 0 || n > n_max) {
            return Err(Error::IndexOutOfRange(format!("gamma given for n = {n} outside 1..{n_max}")));
        }
        Ok(SpectralData {
            theta,
            n_max,
            entries,
            gamma,
        })
    }

    fn idx(&self, n: usize, k: usize) -> Result<usize> {
        if n == 0 || n > self.n_max || !(1..=2).contains(&k) {
            return Err(Error::IndexOutOfRange(format!(
                "(n={n}, k={k}) outside n = 1..{}, k = 1, 2",
                self.n_max
            )));
        }
        Ok(2 * (n - 1) + k - 1)
    }

    pub fn datum(&self, n: usize, k: usize) -> Result<&SpectralDatum> {
        Ok(&self.entries[self.idx(n, k)?])
    }

    /// Panics on an index out of range; use [`SpectralData::datum`] for a checked lookup.
    pub fn lambda(&self, n: usize, k: usize) -> C64 {
        self.datum(n, k).expect("index in range").lambda
    }

    pub fn beta(&self, n: usize, k: usize) -> C64 {
        self.datum(n, k).expect("index in range").beta
    }

    pub fn set_lambda(&mut self, n: usize, k: usize, v: C64) {
        let i = self.idx(n, k).expect("index in range");
        self.entries[i].lambda = v;
    }

    pub fn set_beta(&mut self, n: usize, k: usize, v: C64) {
        let i = self.idx(n, k).expect("index in range");
        self.entries[i].beta = v;
    }

    pub fn in_k(&self, n: usize) -> bool {
        self.gamma.contains_key(&n)
    }

    pub fn k_set(&self) -> BTreeSet<usize> {
        self.gamma.keys().copied().collect()
    }

    pub fn gamma(&self, n: usize) -> Option<C64> {
        self.gamma.get(&n).copied()
    }

    /// The first `n` indices.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n_max {
            return Err(Error::IndexOutOfRange(format!("cannot truncate {} entries to {n}", self.n_max)));
        }
        SpectralData::new(
            self.theta,
            self.entries[..2 * n].to_vec(),
            self.gamma.range(..=n).map(|(&a, &b)| (a, b)).collect(),
        )
    }
}

/// Knobs of the forward solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardOptions {
    pub newton_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub derivative_floor: f64,
    pub pair_tol: f64,
    pub pole_tol: f64,
    pub residue_points: usize,
    pub residue_radius: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions {
            newton_tol: 1e-12,
            step_tol: 1e-13,
            max_iter: 50,
            derivative_floor: 1e-14,
            pair_tol: 1e-8,
            pole_tol: 1e-10,
            residue_points: 64,
            residue_radius: 1e-3,
        }
    }
}

/// Lower-triangular Weyl-Yurko matrix (unit diagonal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylMatrix {
    pub m21: C64,
    pub m31: C64,
    pub m32: C64,
}

impl WeylMatrix {
    pub fn to_array(&self) -> [[C64; 3]; 3] {
        let o = C64::new(1.0, 0.0);
        let z = C64::default();
        [[o, z, z], [self.m21, o, z], [self.m31, self.m32, o]]
    }
}

/// Weyl solutions `Phi_1, Phi_2, Phi_3` (or their star analogues) at one `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylTable {
    pub variant: SystemVariant,
    pub lambda: C64,
    pub phi: [Vec<StateVector>; 3],
}

/// 3x3 weight matrix.
pub type WeightMatrix = [[C64; 3]; 3];

/// Forward solver bound to one coefficient pair.
#[derive(Debug, Clone)]
pub struct ForwardProblem {
    coeffs: CoefficientPair,
    direct: QuasiSystem,
    star: QuasiSystem,
    theta: C64,
    pub options: ForwardOptions,
}

fn e(k: usize) -> V3 {
    StateVector::unit(k).to_array()
}

impl ForwardProblem {
    pub fn new(coeffs: &CoefficientPair) -> Result<Self> {
        Self::with_options(coeffs, ForwardOptions::default())
    }

    pub fn with_options(coeffs: &CoefficientPair, options: ForwardOptions) -> Result<Self> {
        Ok(ForwardProblem {
            coeffs: coeffs.clone(),
            direct: QuasiSystem::new(coeffs, SystemVariant::Direct)?,
            star: QuasiSystem::new(coeffs, SystemVariant::Star)?,
            theta: coeffs.theta()?,
            options,
        })
    }

    pub fn coeffs(&self) -> &CoefficientPair {
        &self.coeffs
    }

    pub fn grid(&self) -> Grid {
        self.coeffs.grid()
    }

    pub fn theta(&self) -> C64 {
        self.theta
    }

    pub fn system(&self, variant: SystemVariant) -> Result<std::borrow::Cow<'_, QuasiSystem>> {
        use std::borrow::Cow;
        Ok(match variant {
            SystemVariant::Direct => Cow::Borrowed(&self.direct),
            SystemVariant::Star => Cow::Borrowed(&self.star),
            SystemVariant::Dagger => Cow::Owned(QuasiSystem::new(&self.coeffs, SystemVariant::Dagger)?),
        })
    }

    /// Characteristic values of the direct problem.
    pub fn characteristic(&self, lambda: C64, with_dlambda: bool) -> Result<CharacteristicValues> {
        characteristic_of(&self.direct, lambda, with_dlambda)
    }

    pub fn characteristic_variant(&self, variant: SystemVariant, lambda: C64, with_dlambda: bool) -> Result<CharacteristicValues> {
        characteristic_of(&*self.system(variant)?, lambda, with_dlambda)
    }

    /// Newton iteration on `Delta_{k,k}` from `guess`.
    pub fn find_eigenvalue(&self, n: usize, k: usize, guess: C64) -> Result<(C64, CharacteristicValues)> {
        let o = &self.options;
        let mut lambda = guess;
        for _ in 0..o.max_iter {
            let ch = self.characteristic(lambda, true)?;
            let f = ch.diag(k);
            let df = ch.diag_dot(k).expect("requested");
            let small_f = f.norm() <= o.newton_tol * (1.0 + df.norm() * lambda.norm().powf(2.0 / 3.0));
            if df.norm() < o.derivative_floor {
                return Err(Error::DerivativeVanishes {
                    lambda,
                    magnitude: df.norm(),
                });
            }
            let step = f / df;
            if small_f || step.norm() <= o.step_tol * (1.0 + lambda.norm()) {
                let fin = if small_f { ch } else { self.characteristic(lambda - step, true)? };
                let root = if small_f { lambda } else { lambda - step };
                let found = index_estimate(root, n, k, self.theta).unwrap_or(f64::NAN);
                if !((found - n as f64).abs() <= 0.5) {
                    return Err(Error::BasinEscape {
                        n,
                        k,
                        found,
                        lambda: root,
                    });
                }
                return Ok((root, fin));
            }
            lambda -= step;
        }
        Err(Error::NoConvergence {
            n,
            k,
            iterations: o.max_iter,
            lambda,
        })
    }

    /// `beta_{n,k} = Delta_{k+1,k} / dDelta_{k,k}` at a converged eigenvalue.
    pub fn weight_beta(&self, k: usize, lambda: C64) -> Result<C64> {
        let ch = self.characteristic(lambda, true)?;
        beta_from(&ch, k, self.options.derivative_floor)
    }

    /// `gamma_n` for an index in `K`, choosing the formula according to which
    /// weight vanishes.
    pub fn weight_gamma(&self, n: usize, lambda: C64, beta1_zero: bool, beta2_zero: bool) -> Result<C64> {
        let ch = self.characteristic(lambda, true)?;
        let d11 = ch.ddot11.expect("requested");
        let d22 = ch.ddot22.expect("requested");
        let g1 = ch.d31 / d11;
        let g2 = ch.c_end[0].y / d22;
        let g = if beta1_zero { g1 } else { g2 };
        if beta1_zero && beta2_zero && (g1 - g2).norm() > 1e-6 * (1.0 + g1.norm()) {
            return Err(Error::GammaZero {
                n,
                magnitude: (g1 - g2).norm(),
            });
        }
        if !(g.norm() > 1e-12 * (1.0 + lambda.norm())) {
            return Err(Error::GammaZero { n, magnitude: g.norm() });
        }
        Ok(g)
    }

    /// Eigenvalues and weights for `n = 1..=n_max`, with the pairing
    /// convention applied and `K`, `gamma` detected.
    pub fn spectral_data(&self, n_max: usize) -> Result<SpectralData> {
        let jobs: Vec<(usize, usize)> = (1..=n_max).flat_map(|n| [(n, 1), (n, 2)]).collect();
        let solved: Vec<Result<(C64, CharacteristicValues)>> = jobs
            .par_iter()
            .map(|&(n, k)| self.find_eigenvalue(n, k, eigen_guess(n, k, self.theta)))
            .collect();
        let mut entries = Vec::with_capacity(jobs.len());
        for (&(n, k), r) in jobs.iter().zip(solved) {
            let (lambda, ch) = r?;
            let beta = beta_from(&ch, k, self.options.derivative_floor)?;
            entries.push(SpectralDatum { n, k, lambda, beta });
        }
        let mut data = SpectralData::new(self.theta, entries, BTreeMap::new())?;
        pair_spectra(&mut data, self.options.pair_tol);
        for n in detect_k(&data, self.options.pair_tol) {
            let scale = 3.0 * data.lambda(n, 1).norm() * 1e-6;
            let b1z = data.beta(n, 1).norm() <= scale;
            let b2z = data.beta(n, 2).norm() <= scale;
            let (b1z, b2z) = if !b1z && !b2z {
                // one weight must vanish on K; drop the smaller one
                (data.beta(n, 1).norm() <= data.beta(n, 2).norm(), data.beta(n, 2).norm() < data.beta(n, 1).norm())
            } else {
                (b1z, b2z)
            };
            if b1z {
                data.set_beta(n, 1, C64::default());
            }
            if b2z {
                data.set_beta(n, 2, C64::default());
            }
            let g = self.weight_gamma(n, data.lambda(n, 1), b1z, b2z)?;
            data.gamma.insert(n, g);
        }
        Ok(data)
    }

    /// Weyl-Yurko matrix `M_{j,k} = -Delta_{j,k} / Delta_{k,k}`.
    pub fn weyl_matrix(&self, lambda: C64, variant: SystemVariant) -> Result<WeylMatrix> {
        let ch = self.characteristic_variant(variant, lambda, true)?;
        for k in 1..=2 {
            let d = ch.diag(k);
            let dd = ch.diag_dot(k).expect("requested");
            if d.norm() <= self.options.pole_tol * dd.norm() * (1.0 + lambda.norm()) {
                return Err(Error::NearPole {
                    lambda,
                    value: d,
                    distance: (d / dd).norm(),
                });
            }
        }
        Ok(WeylMatrix {
            m21: -ch.d21 / ch.d11,
            m31: -ch.d31 / ch.d11,
            m32: -ch.d32 / ch.d22,
        })
    }

    /// Weyl solution `Phi_k` of the direct or star system.
    pub fn weyl_solution(&self, lambda: C64, variant: SystemVariant, k: usize) -> Result<Trajectory> {
        weyl_solution_of(&*self.system(variant)?, lambda, k, self.options.pole_tol)
    }

    pub fn weyl_solutions(&self, lambda: C64, variant: SystemVariant) -> Result<WeylTable> {
        let sys = self.system(variant)?;
        let mut phi: [Vec<StateVector>; 3] = Default::default();
        for k in 1..=3 {
            phi[k - 1] = weyl_solution_of(&sys, lambda, k, self.options.pole_tol)?.states;
        }
        Ok(WeylTable { variant, lambda, phi })
    }

    /// Circle quadrature of the Weyl matrix: returns `(M<0>, M<-1>)`.
    pub fn weyl_laurent(&self, center: C64, variant: SystemVariant) -> Result<([[C64; 3]; 3], [[C64; 3]; 3])> {
        let r = self.options.residue_radius * (1.0 + center.norm());
        let (m0, m1) = contour_moments(
            |l| {
                let w = self.weyl_matrix(l, variant)?.to_array();
                Ok([w[0][0], w[0][1], w[0][2], w[1][0], w[1][1], w[1][2], w[2][0], w[2][1], w[2][2]])
            },
            center,
            r,
            self.options.residue_points,
        )?;
        let to = |v: [C64; 9]| [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
        Ok((to(m0), to(m1)))
    }

    /// `beta_{n,k}` as minus the residue of `M_{k+1,k}` at `lambda`.
    pub fn residue_beta(&self, k: usize, lambda: C64) -> Result<C64> {
        let (_, m1) = self.weyl_laurent(lambda, SystemVariant::Direct)?;
        Ok(-m1[k][k - 1])
    }

    /// Weight matrix `(M<0>)^{-1} M<-1>` from the Laurent coefficients.
    pub fn weight_matrix_laurent(&self, lambda: C64) -> Result<WeightMatrix> {
        let (m0, m1) = self.weyl_laurent(lambda, SystemVariant::Direct)?;
        let a = nalgebra::Matrix3::from_fn(|i, j| m0[i][j]);
        let b = nalgebra::Matrix3::from_fn(|i, j| m1[i][j]);
        let inv = a
            .try_inverse()
            .ok_or_else(|| Error::NearPole { lambda, value: C64::default(), distance: 0.0 })?;
        let n = inv * b;
        Ok([[n[(0, 0)], n[(0, 1)], n[(0, 2)]], [n[(1, 0)], n[(1, 1)], n[(1, 2)]], [n[(2, 0)], n[(2, 1)], n[(2, 2)]]])
    }
}

fn beta_from(ch: &CharacteristicValues, k: usize, floor: f64) -> Result<C64> {
    let dd = ch.diag_dot(k).expect("derivative requested");
    if dd.norm() < floor {
        return Err(Error::DerivativeVanishes {
            lambda: ch.lambda,
            magnitude: dd.norm(),
        });
    }
    Ok(ch.sub(k) / dd)
}

/// Characteristic values of any variant, computed without cancellation.
pub(crate) fn characteristic_of(sys: &QuasiSystem, lambda: C64, with_d: bool) -> Result<CharacteristicValues> {
    let (c1, _) = sys.end(lambda, e(1), Flow::Primal, Direction::Forward, false)?;
    let (c2, _) = sys.end(lambda, e(2), Flow::Primal, Direction::Forward, false)?;
    let (c3, dc3) = sys.end(lambda, e(3), Flow::Primal, Direction::Forward, with_d)?;
    // cross products: C2 x C3 starts at e1, C1 x C3 at -e2, C1 x C2 at e3
    let (w23, dw23) = sys.end(lambda, e(1), Flow::Adjoint, Direction::Forward, with_d)?;
    let (u2, _) = sys.end(lambda, e(2), Flow::Adjoint, Direction::Forward, false)?;
    let (w12, _) = sys.end(lambda, e(3), Flow::Adjoint, Direction::Forward, false)?;
    Ok(CharacteristicValues {
        lambda,
        d11: -w23[2],
        d21: u2[2],
        d31: w12[2],
        d22: c3[0],
        d32: c2[0],
        ddot11: with_d.then(|| -dw23[2]),
        ddot22: with_d.then(|| dc3[0]),
        c_end: [c1.into(), c2.into(), c3.into()],
    })
}

/// `Phi_k` with `Phi_k^[j-1](0) = delta_kj` for `j <= k` and the boundary
/// conditions at `x = 1`.
pub(crate) fn weyl_solution_of(sys: &QuasiSystem, lambda: C64, k: usize, pole_tol: f64) -> Result<Trajectory> {
    let near_pole = |value: C64, scale: f64| {
        if value.norm() <= pole_tol * scale {
            Err(Error::NearPole {
                lambda,
                value,
                distance: value.norm() / scale.max(f64::MIN_POSITIVE),
            })
        } else {
            Ok(())
        }
    };
    let states: Vec<V3> = match k {
        3 => sys.run(lambda, e(3), Flow::Primal, Direction::Forward, false, true)?.0,
        2 => {
            let (left, _) = sys.run(lambda, e(1), Flow::Adjoint, Direction::Forward, false, true)?;
            let (right, _) = sys.run(lambda, e(1), Flow::Adjoint, Direction::Backward, false, true)?;
            let norm = right[0][2];
            near_pole(norm, StateVector::from(right[0]).norm())?;
            let c = -1.0 / norm;
            left.iter()
                .zip(&right)
                .map(|(l, r)| {
                    let v = cross(l, r);
                    [v[0] * c, v[1] * c, v[2] * c]
                })
                .collect()
        }
        1 => {
            let (b, _) = sys.run(lambda, e(3), Flow::Primal, Direction::Backward, false, true)?;
            let norm = b[0][0];
            near_pole(norm, StateVector::from(b[0]).norm())?;
            let c = 1.0 / norm;
            b.iter().map(|v| [v[0] * c, v[1] * c, v[2] * c]).collect()
        }
        _ => return Err(Error::IndexOutOfRange(format!("Weyl solution index {k} not in 1..=3"))),
    };
    Ok(Trajectory {
        grid: sys.grid(),
        lambda,
        variant: sys.variant(),
        states: states.into_iter().map(StateVector::from).collect(),
        dstates: None,
    })
}

/// Reorder the second spectrum so that coinciding eigenvalues share an index
/// (greedy nearest match, ties by ascending `n`).
pub fn pair_spectra(data: &mut SpectralData, tol: f64) {
    let n_max = data.n_max;
    let mut taken = vec![false; n_max + 1];
    let mut assignment: Vec<Option<usize>> = vec![None; n_max + 1];
    for n in 1..=n_max {
        let l1 = data.lambda(n, 1);
        let best = (1..=n_max)
            .filter(|&p| !taken[p])
            .map(|p| (p, (data.lambda(p, 2) - l1).norm()))
            .filter(|&(p, d)| d <= tol * (1.0 + l1.norm().max(data.lambda(p, 2).norm())))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((p, _)) = best {
            taken[p] = true;
            assignment[n] = Some(p);
        }
    }
    let second: Vec<SpectralDatum> = (1..=n_max).map(|p| *data.datum(p, 2).expect("in range")).collect();
    let mut free: Vec<usize> = (1..=n_max).filter(|&p| !taken[p]).collect();
    free.reverse();
    let mut used = vec![false; n_max + 1];
    for n in 1..=n_max {
        if let Some(p) = assignment[n] {
            used[n] = true;
            let d = second[p - 1];
            data.set_lambda(n, 2, d.lambda);
            data.set_beta(n, 2, d.beta);
        }
    }
    // unmatched entries keep their relative order on the remaining slots
    let mut rest: Vec<usize> = (1..=n_max).filter(|&n| !used[n]).collect();
    rest.reverse();
    while let (Some(n), Some(p)) = (rest.pop(), free.pop()) {
        let d = second[p - 1];
        data.set_lambda(n, 2, d.lambda);
        data.set_beta(n, 2, d.beta);
    }
}

/// Indices with `lambda_{n,1} = lambda_{n,2}` within `tol * (1 + |lambda|)`.
pub fn detect_k(data: &SpectralData, tol: f64) -> BTreeSet<usize> {
    (1..=data.n_max)
        .filter(|&n| {
            let a = data.lambda(n, 1);
            let b = data.lambda(n, 2);
            (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
        })
        .collect()
}

/// Closed-form weight matrix for index `(n, k)`.
pub fn weight_matrix_n(data: &SpectralData, n: usize, k: usize) -> Result<WeightMatrix> {
    data.datum(n, k)?;
    let z = C64::default();
    let mut m = [[z; 3]; 3];
    if let Some(g) = data.gamma(n) {
        m[1][0] = -data.beta(n, 1);
        m[2][1] = -data.beta(n, 2);
        m[2][0] = -g;
    } else if k == 1 {
        m[1][0] = -data.beta(n, 1);
    } else {
        m[2][1] = -data.beta(n, 2);
    }
    Ok(m)
}

/// Trapezoid quadrature on the circle `|l - center| = radius`:
/// returns the mean of `f` and the mean of `f * (l - center)`, i.e. the
/// coefficients of order 0 and -1 of the Laurent series.
pub fn contour_moments<const L: usize>(
    f: impl Fn(C64) -> Result<[C64; L]> + Sync,
    center: C64,
    radius: f64,
    points: usize,
) -> Result<([C64; L], [C64; L])> {
    let samples: Vec<Result<(C64, [C64; L])>> = (0..points)
        .into_par_iter()
        .map(|j| {
            let off = C64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / points as f64);
            f(center + off).map(|v| (off, v))
        })
        .collect();
    let mut m0 = [C64::default(); L];
    let mut m1 = [C64::default(); L];
    for s in samples {
        let (off, v) = s?;
        for i in 0..L {
            m0[i] += v[i];
            m1[i] += v[i] * off;
        }
    }
    let inv = 1.0 / points as f64;
    Ok((m0.map(|v| v * inv), m1.map(|v| v * inv)))
}

/// Characteristic values of `coeffs` at `lambda`.
pub fn characteristic(coeffs: &CoefficientPair, lambda: C64, with_dlambda: bool) -> Result<CharacteristicValues> {
    characteristic_of(&QuasiSystem::new(coeffs, SystemVariant::Direct)?, lambda, with_dlambda)
}

/// Spectral data of `coeffs` for `n = 1..=n_max` with default options.
pub fn compute_spectral_data(coeffs: &CoefficientPair, n_max: usize) -> Result<SpectralData> {
    ForwardProblem::new(coeffs)?.spectral_data(n_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    const ZERO_EIGS: [f64; 4] = [75.859255484160057, 485.54926729515951, 1515.8798387083602, 3453.2180145924066];
    const TAU_ONE_EIGS: [f64; 8] = [
        69.519069436037518,
        471.85866552844553,
        1494.9191263339492,
        3424.9962886147352,
        6548.5085870485201,
        11151.877988965138,
        17521.527576000406,
        25943.88078746699,
    ];

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn zero(m: usize) -> CoefficientPair {
        CoefficientPair::zero(Grid::new(m).unwrap())
    }

    fn smooth(m: usize) -> CoefficientPair {
        CoefficientPair::from_fns(
            Grid::new(m).unwrap(),
            |x| c((2.0 * PI * x).cos(), 0.0),
            |x| c(0.0, 0.3 * (PI * x).sin()),
        )
    }

    fn generic(m: usize) -> CoefficientPair {
        CoefficientPair::from_fns(
            Grid::new(m).unwrap(),
            |x| c(0.5 + x * x, 0.3 * (3.0 * x).sin()),
            |x| c(1.0 - x, 0.4 * x),
        )
    }

    #[test]
    fn zero_coefficient_characteristic() {
        let ch = characteristic(&zero(512), c(0.0, 0.0), true).unwrap();
        assert!((ch.d22 - 0.5).norm() < 1e-12);
        assert!((ch.d32 - 1.0).norm() < 1e-12);
        assert!((ch.d11 + 0.5).norm() < 1e-12);
        let ch = characteristic(&zero(512), c(1.0, 0.0), false).unwrap();
        assert!((ch.d22 - 0.508_358_159_984_216_86).norm() < 1e-9);
    }

    #[test]
    fn wronskian_expansion_identity() {
        let ch = characteristic(&generic(512), c(3.0, 2.0), false).unwrap();
        assert!((ch.wronskian_expansion() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn minors_match_direct_formulas_for_moderate_lambda() {
        let p = generic(512);
        let lam = c(-8.0, 5.0);
        let ch = characteristic(&p, lam, false).unwrap();
        let sol = crate::quasi_ode::fundamental_solutions(&p, SystemVariant::Direct, lam, p.grid(), false).unwrap();
        let [a, b, cc] = [sol[0].last(), sol[1].last(), sol[2].last()];
        assert!((ch.d11 + (b.y * cc.y1 - cc.y * b.y1)).norm() < 1e-10);
        assert!((ch.d21 + (a.y * cc.y1 - cc.y * a.y1)).norm() < 1e-10);
        assert!((ch.d31 - (a.y * b.y1 - b.y * a.y1)).norm() < 1e-10);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = generic(256);
        let lam = c(150.0, 20.0);
        let ch = characteristic(&p, lam, true).unwrap();
        let h = 1e-4 * (1.0 + lam.norm());
        let a = characteristic(&p, lam + h, false).unwrap();
        let b = characteristic(&p, lam - h, false).unwrap();
        let fd11 = (a.d11 - b.d11) / (2.0 * h);
        let fd22 = (a.d22 - b.d22) / (2.0 * h);
        assert!((ch.ddot11.unwrap() - fd11).norm() < 1e-6 * fd11.norm());
        assert!((ch.ddot22.unwrap() - fd22).norm() < 1e-6 * fd22.norm());
    }

    #[test]
    fn zero_coefficient_eigenvalues() {
        let fp = ForwardProblem::new(&zero(512)).unwrap();
        let (l, ch) = fp.find_eigenvalue(1, 1, c(75.80, 0.0)).unwrap();
        assert!(ch.d11.norm() < 1e-9);
        assert!((l.re - 75.80).abs() / 75.80 <= 0.1);
        let data = fp.spectral_data(4).unwrap();
        for n in 1..=4 {
            assert!((data.lambda(n, 1).re - ZERO_EIGS[n - 1]).abs() < 1e-7 * ZERO_EIGS[n - 1]);
            assert!((data.lambda(n, 2) + data.lambda(n, 1)).norm() < 1e-8 * ZERO_EIGS[n - 1]);
        }
        assert!(data.gamma.is_empty());
    }

    #[test]
    fn constant_tau_oracle() {
        let grid = Grid::new(1024).unwrap();
        let p = CoefficientPair::from_fns(grid, |_| c(1.0, 0.0), |_| c(0.0, 0.0));
        let data = compute_spectral_data(&p, 8).unwrap();
        for n in 1..=8 {
            let exact = TAU_ONE_EIGS[n - 1];
            assert!((data.lambda(n, 1) - exact).norm() < 1e-7 * exact, "n={n}: {}", data.lambda(n, 1));
            assert!((data.lambda(n, 2) + exact).norm() < 1e-7 * exact);
        }
    }

    #[test]
    fn weights_follow_asymptotics() {
        let data = compute_spectral_data(&zero(512), 8).unwrap();
        for n in 1..=8 {
            let r = (data.beta(n, 1) / (data.lambda(n, 1) * 3.0) - 1.0).norm();
            // zero coefficients: beta = 3 lambda up to exponentially small terms
            assert!(r * n as f64 <= 2.0 && r < 1e-5);
            assert!(data.beta(n, 1).norm() > 0.0 && data.beta(n, 2).norm() > 0.0);
        }
    }

    #[test]
    fn gauge_shift_leaves_data_unchanged() {
        let p = smooth(256);
        let a = compute_spectral_data(&p, 5).unwrap();
        let b = compute_spectral_data(&p.gauge_shift(c(5.0, 0.0)), 5).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.lambda - y.lambda).norm() <= 1e-8 * x.lambda.norm());
            assert!((x.beta - y.beta).norm() <= 1e-8 * x.beta.norm());
        }
    }

    #[test]
    fn weyl_matrix_at_zero() {
        let fp = ForwardProblem::new(&zero(128)).unwrap();
        let m = fp.weyl_matrix(c(0.0, 0.0), SystemVariant::Direct).unwrap();
        assert!((m.m32 + 2.0).norm() < 1e-12);
    }

    #[test]
    fn star_identities() {
        let fp = ForwardProblem::new(&generic(512)).unwrap();
        for lam in [c(3.0, 1.0), c(-20.0, 7.0), c(50.0, -30.0), c(0.5, 0.0)] {
            let m = fp.weyl_matrix(lam, SystemVariant::Direct).unwrap();
            let s = fp.weyl_matrix(lam, SystemVariant::Star).unwrap();
            assert!((m.m21 - s.m32).norm() < 1e-8 * (1.0 + m.m21.norm()));
            assert!((m.m32 - s.m21).norm() < 1e-8 * (1.0 + m.m32.norm()));
            assert!((s.m31 - s.m21 * m.m21 + m.m31).norm() < 1e-8 * (1.0 + m.m31.norm()));
        }
    }

    #[test]
    fn weyl_solutions_satisfy_boundary_conditions() {
        let fp = ForwardProblem::new(&generic(512)).unwrap();
        for variant in [SystemVariant::Direct, SystemVariant::Star] {
            let lam = c(37.0, 11.0);
            let t = fp.weyl_solutions(lam, variant).unwrap();
            let [p1, p2, p3] = &t.phi;
            assert!((p1[0].y - 1.0).norm() < 1e-12);
            assert!(p1[512].y.norm() < 1e-9 && p1[512].y1.norm() < 1e-9);
            assert!(p2[0].y.norm() < 1e-12 && (p2[0].y1 - 1.0).norm() < 1e-12);
            assert!(p2[512].y.norm() < 1e-9);
            assert_eq!(p3[0], StateVector::unit(3));
            // Phi_k = C_k + sum M_jk C_j on the y component
            let m = fp.weyl_matrix(lam, variant).unwrap();
            let sol = fp.system(variant).unwrap().fundamental(lam, false).unwrap();
            for i in [100, 300] {
                let expect1 = sol[0].states[i].y + m.m21 * sol[1].states[i].y + m.m31 * sol[2].states[i].y;
                let expect2 = sol[1].states[i].y + m.m32 * sol[2].states[i].y;
                assert!((p1[i].y - expect1).norm() < 1e-8 * (1.0 + expect1.norm()));
                assert!((p2[i].y - expect2).norm() < 1e-8 * (1.0 + expect2.norm()));
            }
        }
        let z = ForwardProblem::new(&zero(64)).unwrap();
        let p3 = z.weyl_solution(c(0.0, 0.0), SystemVariant::Direct, 3).unwrap();
        assert!((p3.states[32].y - 0.125).norm() < 1e-14);
    }

    #[test]
    fn residue_of_weyl_derivative_gives_beta() {
        let p = smooth(512);
        let fp = ForwardProblem::new(&p).unwrap();
        let data = fp.spectral_data(2).unwrap();
        let lam = data.lambda(1, 1);
        let r = 1e-3 * (1.0 + lam.norm());
        let (_, res) = contour_moments(
            |l| Ok([fp.weyl_solution(l, SystemVariant::Direct, 1)?.states[0].y1]),
            lam,
            r,
            64,
        )
        .unwrap();
        let beta = data.beta(1, 1);
        assert!((-res[0] - beta).norm() < 1e-6 * beta.norm());
    }

    #[test]
    fn residues_and_weight_matrices() {
        let fp = ForwardProblem::new(&smooth(512)).unwrap();
        let data = fp.spectral_data(3).unwrap();
        for n in 1..=3 {
            for k in 1..=2 {
                let lam = data.lambda(n, k);
                let beta = data.beta(n, k);
                let r = fp.residue_beta(k, lam).unwrap();
                assert!((r - beta).norm() < 1e-6 * beta.norm());
                let w = fp.weight_matrix_laurent(lam).unwrap();
                let expect = weight_matrix_n(&data, n, k).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        assert!((w[i][j] - expect[i][j]).norm() < 1e-5 * (1.0 + beta.norm()));
                    }
                }
            }
        }
    }

    #[test]
    fn weight_matrix_closed_forms() {
        let mut entries = Vec::new();
        for n in 1..=2 {
            for k in 1..=2 {
                entries.push(SpectralDatum { n, k, lambda: c(n as f64 * 10.0, k as f64), beta: c(2.0, 1.0) });
            }
        }
        let mut gamma = BTreeMap::new();
        gamma.insert(2, c(0.7, 0.0));
        let mut data = SpectralData::new(C64::default(), entries, gamma).unwrap();
        data.set_beta(2, 1, C64::default());
        let m = weight_matrix_n(&data, 1, 1).unwrap();
        assert_eq!(m[1][0], c(-2.0, -1.0));
        assert_eq!(m.iter().flatten().filter(|v| v.norm() > 0.0).count(), 1);
        let m = weight_matrix_n(&data, 2, 1).unwrap();
        assert_eq!(m[2][0], c(-0.7, 0.0));
        assert!(weight_matrix_n(&data, 3, 1).is_err());
    }

    #[test]
    fn pairing_reorders_second_spectrum() {
        let mk = |n, k, l: f64| SpectralDatum { n, k, lambda: c(l, 0.0), beta: c(1.0, 0.0) };
        let entries = vec![mk(1, 1, 10.0), mk(1, 2, 30.0), mk(2, 1, 30.0), mk(2, 2, -5.0), mk(3, 1, 90.0), mk(3, 2, -70.0)];
        let mut data = SpectralData::new(C64::default(), entries, BTreeMap::new()).unwrap();
        pair_spectra(&mut data, 1e-8);
        assert_eq!(data.lambda(2, 2), c(30.0, 0.0));
        assert_eq!(data.lambda(1, 2), c(-5.0, 0.0));
        assert_eq!(data.lambda(3, 2), c(-70.0, 0.0));
        assert_eq!(detect_k(&data, 1e-8), BTreeSet::from([2]));
    }

    #[test]
    fn far_spectra_have_empty_k() {
        let data = compute_spectral_data(&smooth(256), 4).unwrap();
        assert!(data.gamma.is_empty());
        for n in 1..=4 {
            assert!((data.beta(n, 1) * data.beta(n, 2)).norm() > 0.0);
        }
    }

    #[test]
    fn wrong_guess_reports_basin_escape() {
        let fp = ForwardProblem::new(&zero(256)).unwrap();
        match fp.find_eigenvalue(1, 1, c(480.0, 0.0)) {
            Err(Error::BasinEscape { n: 1, found, .. }) => assert!((found - 2.0).abs() < 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn near_pole_is_rejected() {
        let fp = ForwardProblem::new(&zero(512)).unwrap();
        let data = fp.spectral_data(1).unwrap();
        let err = fp.weyl_matrix(data.lambda(1, 1), SystemVariant::Direct).unwrap_err();
        assert!(matches!(err, Error::NearPole { .. }));
    }

    #[test]
    fn dagger_data_relations() {
        let p = generic(512);
        let a = compute_spectral_data(&p, 3).unwrap();
        let b = compute_spectral_data(&p.dagger(), 3).unwrap();
        for n in 1..=3 {
            let l = a.lambda(n, 2).norm();
            assert!((b.lambda(n, 1) + a.lambda(n, 2).conj()).norm() < 1e-8 * l);
            assert!((b.lambda(n, 2) + a.lambda(n, 1).conj()).norm() < 1e-8 * l);
            assert!((b.beta(n, 1) + a.beta(n, 2).conj()).norm() < 1e-8 * a.beta(n, 2).norm());
            assert!((b.beta(n, 2) + a.beta(n, 1).conj()).norm() < 1e-8 * a.beta(n, 1).norm());
        }
    }
}
