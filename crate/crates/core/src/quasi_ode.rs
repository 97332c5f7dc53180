//! First-order systems for the quasi-derivative state `(y, y', y^[2])` and
//! their fixed-step Runge-Kutta integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CoefficientPair, Grid, C64};

/// Which of the three associated systems to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemVariant {
    /// `y''' + (tau1 y)' + tau1 y' + tau0 y = lambda y`.
    Direct,
    /// The adjoint expression with the convention `-z^[3] = lambda z`.
    Star,
    /// Conjugate of the star system, with `+lambda`.
    Dagger,
}

impl SystemVariant {
    /// Sign of the `lambda` entry at position (3,1).
    pub fn lambda_sign(self) -> f64 {
        match self {
            SystemVariant::Star => -1.0,
            _ => 1.0,
        }
    }
}

/// Quasi-derivative state of one solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub y: C64,
    pub y1: C64,
    pub y2: C64,
}

impl StateVector {
    pub const fn new(y: C64, y1: C64, y2: C64) -> Self {
        StateVector { y, y1, y2 }
    }

    /// Unit vector `e_k`, `k = 1, 2, 3`.
    pub fn unit(k: usize) -> Self {
        let mut a = [C64::new(0.0, 0.0); 3];
        a[k - 1] = C64::new(1.0, 0.0);
        Self::from(a)
    }

    pub fn to_array(self) -> [C64; 3] {
        [self.y, self.y1, self.y2]
    }

    pub fn norm(&self) -> f64 {
        (self.y.norm_sqr() + self.y1.norm_sqr() + self.y2.norm_sqr()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.y1.is_finite() && self.y2.is_finite()
    }

    pub fn scale(self, c: C64) -> Self {
        StateVector::new(self.y * c, self.y1 * c, self.y2 * c)
    }

    pub fn add(self, o: StateVector) -> Self {
        StateVector::new(self.y + o.y, self.y1 + o.y1, self.y2 + o.y2)
    }
}

impl From<[C64; 3]> for StateVector {
    fn from(a: [C64; 3]) -> Self {
        StateVector::new(a[0], a[1], a[2])
    }
}

pub(crate) type V3 = [C64; 3];
pub(crate) const ZERO3: V3 = [C64::new(0.0, 0.0); 3];

pub(crate) fn cross(a: &V3, b: &V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn det3(a: &V3, b: &V3, c: &V3) -> C64 {
    let x = cross(b, c);
    a[0] * x[0] + a[1] * x[1] + a[2] * x[2]
}

/// One solution sampled at every grid node, optionally with its
/// derivative in `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub lambda: C64,
    pub variant: SystemVariant,
    pub states: Vec<StateVector>,
    pub dstates: Option<Vec<StateVector>>,
}

impl Trajectory {
    pub fn at(&self, i: usize) -> StateVector {
        self.states[i]
    }

    pub fn last(&self) -> StateVector {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn y(&self) -> Vec<C64> {
        self.states.iter().map(|s| s.y).collect()
    }

    pub fn y1(&self) -> Vec<C64> {
        self.states.iter().map(|s| s.y1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    /// `v' = A v`
    Primal,
    /// `u' = -A^T u`; cross products of primal solutions obey this.
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Backward,
}

/// Coefficients of one associated system, pre-sampled at nodes and cell
/// midpoints so that repeated integrations for many `lambda` are cheap.
///
/// The matrix has the shape `[0,1,0; a21,0,1; s*lambda, a32, 0]`.
#[derive(Debug, Clone)]
pub struct QuasiSystem {
    grid: Grid,
    variant: SystemVariant,
    // index j samples x = j / (2M)
    a21: Vec<C64>,
    a32: Vec<C64>,
}

/// Smallest grid accepted by the integrator.
pub const MIN_IVP_GRID: usize = 8;

/// Ratio between `|lambda|^(1/3)` and `M` beyond which integration is refused.
pub const RESOLUTION_FACTOR: f64 = 0.6;

impl QuasiSystem {
    pub fn new(coeffs: &CoefficientPair, variant: SystemVariant) -> Result<Self> {
        let grid = coeffs.grid();
        if grid.m() < MIN_IVP_GRID {
            return Err(Error::InvalidGrid(format!(
                "integration needs at least {MIN_IVP_GRID} subintervals, got {}",
                grid.m()
            )));
        }
        let sig = half_samples(coeffs.sigma0.values());
        let tau = half_samples(coeffs.tau1.values());
        let (a21, a32) = sig
            .iter()
            .zip(&tau)
            .map(|(&s, &t)| match variant {
                SystemVariant::Direct => (-(s + t), s - t),
                SystemVariant::Star => (s - t, -(s + t)),
                SystemVariant::Dagger => ((s - t).conj(), (-(s + t)).conj()),
            })
            .unzip();
        Ok(QuasiSystem {
            grid,
            variant,
            a21,
            a32,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn variant(&self) -> SystemVariant {
        self.variant
    }

    /// The 3x3 system matrix at an arbitrary `x` (cubic interpolation).
    pub fn matrix(&self, lambda: C64, x: f64) -> [[C64; 3]; 3] {
        let m2 = Grid::new(2 * self.grid.m()).expect("nonzero");
        let a21 = crate::grid::interp_cubic(&self.a21, m2, x);
        let a32 = crate::grid::interp_cubic(&self.a32, m2, x);
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        [
            [z, o, z],
            [a21, z, o],
            [lambda * self.variant.lambda_sign(), a32, z],
        ]
    }

    pub fn check_resolution(&self, lambda: C64) -> Result<()> {
        let cbrt = lambda.norm().cbrt();
        let limit = RESOLUTION_FACTOR * self.grid.m() as f64;
        if cbrt > limit {
            return Err(Error::ResolutionGuard { cbrt, limit });
        }
        Ok(())
    }

    /// Integrate `v' = A v` from `x = 0`.
    pub fn integrate(&self, lambda: C64, init: StateVector, with_dlambda: bool) -> Result<Trajectory> {
        let (s, d) = self.run(lambda, init.to_array(), Flow::Primal, Direction::Forward, with_dlambda, true)?;
        Ok(self.trajectory(lambda, s, d))
    }

    /// Integrate `v' = A v` backwards from the state `end` prescribed at `x = 1`.
    pub fn integrate_backward(&self, lambda: C64, end: StateVector, with_dlambda: bool) -> Result<Trajectory> {
        let (s, d) = self.run(lambda, end.to_array(), Flow::Primal, Direction::Backward, with_dlambda, true)?;
        Ok(self.trajectory(lambda, s, d))
    }

    fn trajectory(&self, lambda: C64, s: Vec<V3>, d: Option<Vec<V3>>) -> Trajectory {
        Trajectory {
            grid: self.grid,
            lambda,
            variant: self.variant,
            states: s.into_iter().map(StateVector::from).collect(),
            dstates: d.map(|d| d.into_iter().map(StateVector::from).collect()),
        }
    }

    /// Classical RK4 over the whole grid. Returns the states (all nodes if
    /// `store`, else only the final one) in ascending node order.
    pub(crate) fn run(
        &self,
        lambda: C64,
        init: V3,
        flow: Flow,
        dir: Direction,
        with_d: bool,
        store: bool,
    ) -> Result<(Vec<V3>, Option<Vec<V3>>)> {
        self.check_resolution(lambda)?;
        let m = self.grid.m();
        let sl = lambda * self.variant.lambda_sign();
        let (h, sign) = match dir {
            Direction::Forward => (self.grid.h(), 1isize),
            Direction::Backward => (-self.grid.h(), -1isize),
        };
        let f = |j: usize, v: &V3, d: &V3| -> (V3, V3) {
            let a21 = self.a21[j];
            let a32 = self.a32[j];
            match flow {
                Flow::Primal => {
                    let fv = [v[1], a21 * v[0] + v[2], sl * v[0] + a32 * v[1]];
                    let fd = if with_d {
                        [d[1], a21 * d[0] + d[2], sl * d[0] + a32 * d[1] + v[0] * self.variant.lambda_sign()]
                    } else {
                        ZERO3
                    };
                    (fv, fd)
                }
                Flow::Adjoint => {
                    let fv = [-(a21 * v[1] + sl * v[2]), -(v[0] + a32 * v[2]), -v[1]];
                    let fd = if with_d {
                        [
                            -(a21 * d[1] + sl * d[2]) - v[2] * self.variant.lambda_sign(),
                            -(d[0] + a32 * d[2]),
                            -d[1],
                        ]
                    } else {
                        ZERO3
                    };
                    (fv, fd)
                }
            }
        };
        let axpy = |a: &V3, s: f64, b: &V3| -> V3 { [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s] };

        let cap = if store { m + 1 } else { 1 };
        let mut states = Vec::with_capacity(cap);
        let mut dstates = Vec::with_capacity(if with_d { cap } else { 0 });
        let mut v = init;
        let mut d = ZERO3;
        if store {
            states.push(v);
            if with_d {
                dstates.push(d);
            }
        }
        let mut node = match dir {
            Direction::Forward => 0usize,
            Direction::Backward => m,
        };
        for _ in 0..m {
            let j0 = 2 * node;
            let jm = (j0 as isize + sign) as usize;
            let j1 = (j0 as isize + 2 * sign) as usize;
            let (k1, l1) = f(j0, &v, &d);
            let (k2, l2) = f(jm, &axpy(&v, 0.5 * h, &k1), &axpy(&d, 0.5 * h, &l1));
            let (k3, l3) = f(jm, &axpy(&v, 0.5 * h, &k2), &axpy(&d, 0.5 * h, &l2));
            let (k4, l4) = f(j1, &axpy(&v, h, &k3), &axpy(&d, h, &l3));
            for i in 0..3 {
                v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                if with_d {
                    d[i] += (l1[i] + (l2[i] + l3[i]) * 2.0 + l4[i]) * (h / 6.0);
                }
            }
            node = (node as isize + sign) as usize;
            if !(v.iter().all(|c| c.is_finite()) && d.iter().all(|c| c.is_finite())) {
                return Err(Error::NonFinite { node, lambda });
            }
            if store {
                states.push(v);
                if with_d {
                    dstates.push(d);
                }
            }
        }
        if !store {
            states.push(v);
            if with_d {
                dstates.push(d);
            }
        }
        if store && dir == Direction::Backward {
            states.reverse();
            dstates.reverse();
        }
        Ok((states, with_d.then_some(dstates)))
    }

    /// Final value (at the far end) of an integration, with optional derivative.
    pub(crate) fn end(&self, lambda: C64, init: V3, flow: Flow, dir: Direction, with_d: bool) -> Result<(V3, V3)> {
        let (s, d) = self.run(lambda, init, flow, dir, with_d, false)?;
        Ok((s[0], d.map(|d| d[0]).unwrap_or(ZERO3)))
    }

    /// The three fundamental solutions `C_k` with `C_k^[j-1](0) = delta_kj`.
    pub fn fundamental(&self, lambda: C64, with_dlambda: bool) -> Result<[Trajectory; 3]> {
        Ok([
            self.integrate(lambda, StateVector::unit(1), with_dlambda)?,
            self.integrate(lambda, StateVector::unit(2), with_dlambda)?,
            self.integrate(lambda, StateVector::unit(3), with_dlambda)?,
        ])
    }
}

// nodal samples interleaved with cubic midpoint values
fn half_samples(v: &[C64]) -> Vec<C64> {
    let m = v.len() - 1;
    let mut out = Vec::with_capacity(2 * m + 1);
    for i in 0..m {
        out.push(v[i]);
        let mid = if i == 0 {
            v[0] * 0.3125 + v[1] * 0.9375 - v[2] * 0.3125 + v[3] * 0.0625
        } else if i == m - 1 {
            v[m - 3] * 0.0625 - v[m - 2] * 0.3125 + v[m - 1] * 0.9375 + v[m] * 0.3125
        } else {
            (-v[i - 1] + (v[i] + v[i + 1]) * 9.0 - v[i + 2]) / 16.0
        };
        out.push(mid);
    }
    out.push(v[m]);
    out
}

/// The 3x3 system matrix at position `x`.
pub fn system_matrix(coeffs: &CoefficientPair, variant: SystemVariant, lambda: C64, x: f64) -> Result<[[C64; 3]; 3]> {
    Ok(QuasiSystem::new(coeffs, variant)?.matrix(lambda, x))
}

pub fn integrate_ivp(
    coeffs: &CoefficientPair,
    variant: SystemVariant,
    lambda: C64,
    init: StateVector,
    grid: Grid,
    with_dlambda: bool,
) -> Result<Trajectory> {
    grid.check_same(&coeffs.grid())?;
    QuasiSystem::new(coeffs, variant)?.integrate(lambda, init, with_dlambda)
}

pub fn fundamental_solutions(
    coeffs: &CoefficientPair,
    variant: SystemVariant,
    lambda: C64,
    grid: Grid,
    with_dlambda: bool,
) -> Result<[Trajectory; 3]> {
    grid.check_same(&coeffs.grid())?;
    QuasiSystem::new(coeffs, variant)?.fundamental(lambda, with_dlambda)
}

/// Determinant of the state matrix `[C1, C2, C3]` at every node.
pub fn wronskian(sol: &[Trajectory; 3]) -> Vec<C64> {
    (0..sol[0].states.len())
        .map(|i| det3(&sol[0].states[i].to_array(), &sol[1].states[i].to_array(), &sol[2].states[i].to_array()))
        .collect()
}
