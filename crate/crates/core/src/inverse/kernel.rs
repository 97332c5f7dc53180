//! Kernels `D~_{k,j}(x, lambda, mu)` built from model Weyl solutions.
//!
//! Two equivalent forms exist: the Lagrange bracket divided by `mu - lambda`,
//! and a running integral of the product of the two solutions (plus a pole
//! term for `(k, j) = (2, 2)`). The bracket loses digits when `lambda` and
//! `mu` are close, roughly by a factor `|lambda|^(2/3) / |lambda - mu|`; the
//! integral loses digits when the kernel is tiny compared to the integrand.
//! [`select_form`] picks the integral only for nearby spectral parameters.

use crate::error::{Error, Result};
use crate::grid::{cumulative, Grid, GridFunction, C64};
use crate::quasi_ode::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    Bracket,
    Integral,
}

/// Below this relative gap the bracket is never used.
pub const COINCIDENT_GAP: f64 = 1e-6;
/// The integral form is used while `|lambda - mu| <= NEAR_BAND * (1 + max|.|)^(2/3)`.
pub const NEAR_BAND: f64 = 4.0;

/// Lagrange bracket `<z, y> = z^[2] y - z' y' + z y^[2]` of a star state `z`
/// and a direct state `y`.
pub fn bracket(z: &StateVector, y: &StateVector) -> C64 {
    z.y2 * y.y - z.y1 * y.y1 + z.y * y.y2
}

pub fn select_form(lambda: C64, mu: C64) -> KernelForm {
    let scale = 1.0 + lambda.norm().max(mu.norm());
    let gap = (lambda - mu).norm();
    if gap <= COINCIDENT_GAP * scale || gap <= NEAR_BAND * scale.powf(2.0 / 3.0) {
        KernelForm::Integral
    } else {
        KernelForm::Bracket
    }
}

fn same_point(lambda: C64, mu: C64) -> bool {
    (lambda - mu).norm() <= 1e-14 * (1.0 + lambda.norm().max(mu.norm()))
}

/// Kernel of a combination `z = a Phi~*_2 + b Phi~*_3` (at `lambda`) against
/// `Phi~_j` (at `mu`). `pole_coef` is `a`, the weight of `Phi~*_2`, which
/// carries the `1/(lambda - mu)` term when `j = 2`.
#[allow(clippy::too_many_arguments)]
pub fn combined_kernel(
    z: &[StateVector],
    pole_coef: C64,
    y: &[StateVector],
    j: usize,
    lambda: C64,
    mu: C64,
    regularized: bool,
    form: Option<KernelForm>,
    grid: Grid,
) -> Result<GridFunction> {
    let form = form.unwrap_or_else(|| {
        if j == 1 {
            KernelForm::Bracket
        } else {
            select_form(lambda, mu)
        }
    });
    match form {
        KernelForm::Bracket => {
            if same_point(lambda, mu) {
                return Err(Error::PoleHit { lambda });
            }
            let inv = 1.0 / (mu - lambda);
            let values = z.iter().zip(y).map(|(a, b)| bracket(a, b) * inv).collect();
            GridFunction::new(grid, values)
        }
        KernelForm::Integral => {
            if !(j == 2 || j == 3) {
                return Err(Error::IndexOutOfRange(format!(
                    "integral form of D~ is defined for j = 2, 3, not {j}"
                )));
            }
            let prod = GridFunction::new(grid, z.iter().zip(y).map(|(a, b)| a.y * b.y).collect())?;
            let mut out = cumulative(&prod);
            if j == 2 && pole_coef != C64::default() {
                if same_point(lambda, mu) {
                    if !regularized {
                        return Err(Error::PoleHit { lambda });
                    }
                } else {
                    out = out.shift(pole_coef / (lambda - mu));
                }
            }
            Ok(out)
        }
    }
}

/// `D~_{k,j}(x, lambda, mu)` from `Phi~*_k(., lambda)` and `Phi~_j(., mu)`.
pub fn kernel_d(
    star_k: &[StateVector],
    direct_j: &[StateVector],
    grid: Grid,
    (k, j): (usize, usize),
    lambda: C64,
    mu: C64,
    regularized: bool,
) -> Result<GridFunction> {
    kernel_d_form(star_k, direct_j, grid, (k, j), lambda, mu, regularized, None)
}

/// As [`kernel_d`], with the evaluation form forced.
#[allow(clippy::too_many_arguments)]
pub fn kernel_d_form(
    star_k: &[StateVector],
    direct_j: &[StateVector],
    grid: Grid,
    (k, j): (usize, usize),
    lambda: C64,
    mu: C64,
    regularized: bool,
    form: Option<KernelForm>,
) -> Result<GridFunction> {
    if !(1..=3).contains(&k) || !(1..=3).contains(&j) {
        return Err(Error::IndexOutOfRange(format!("kernel index ({k},{j})")));
    }
    if form == Some(KernelForm::Integral) && !matches!((k, j), (2, 2) | (2, 3) | (3, 2) | (3, 3)) {
        return Err(Error::IndexOutOfRange(format!("no integral form for D~_({k},{j})")));
    }
    let pole = if k == 2 { C64::new(1.0, 0.0) } else { C64::default() };
    let form = form.or((k == 1 || j == 1).then_some(KernelForm::Bracket));
    combined_kernel(star_k, pole, direct_j, j, lambda, mu, regularized, form, grid)
}
