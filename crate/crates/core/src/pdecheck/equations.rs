use num_complex::Complex64;

use super::field::{fd_partial, ScalarField, Var};
use super::{EquationId, Residual, Stencils};
use crate::error::{Error, Result};
use crate::matcore::{c64, ComplexMatrix};

/// Scalar inputs to [`residual_pde`]; only the ones the equation needs are read.
#[derive(Debug, Clone, Default)]
pub struct Fields {
    pub q: Option<ScalarField>,
    pub y: Option<ScalarField>,
    pub beta: Option<ScalarField>,
    pub h12: Option<ScalarField>,
    pub h21: Option<ScalarField>,
}

/// Constant coefficients: `γ` for KdVGen and NLSgen, `a` for NLSgen.
#[derive(Debug, Clone, Default)]
pub struct Constants {
    pub gamma: Option<ComplexMatrix>,
    pub a: Option<Complex64>,
}

/// Observables derived from a tau field.
#[derive(Debug, Clone)]
pub struct Observables {
    /// Row-wise continuous branch of `ln τ`.
    pub log_tau: ScalarField,
    /// `−2∂ₓₓ ln τ`.
    pub q: ScalarField,
    /// `∂ₓτ`.
    pub beta: ScalarField,
    /// `∂ₓ ln τ`.
    pub beta_log: ScalarField,
}

/// `ln τ` unwrapped along each row, starting from the column nearest
/// `anchor_x` and walking outwards. A row restarts on the principal branch
/// after a masked gap, which is harmless because no stencil spans a gap.
fn unwrap_log(tau: &ScalarField, anchor_x: f64) -> Result<ScalarField> {
    let g = tau.grid;
    let mut values = vec![c64(f64::NAN, f64::NAN); g.len()];
    let mut mask = tau.mask.clone();
    for (k, v) in tau.values.iter().enumerate() {
        if mask[k] && v.norm() == 0.0 {
            mask[k] = false;
        }
    }
    let start = g.nearest_column(anchor_x);
    for j in 0..g.nt {
        let mut walk = |cols: &mut dyn Iterator<Item = usize>| -> Result<()> {
            let mut prev: Option<(Complex64, f64)> = None;
            for i in cols {
                let k = g.index(i, j);
                if !mask[k] {
                    prev = None;
                    continue;
                }
                let z = tau.values[k];
                let arg = match prev {
                    None => z.arg(),
                    Some((zp, argp)) => {
                        let jump = (z / zp).arg();
                        if jump.abs() > std::f64::consts::FRAC_PI_2 {
                            return Err(Error::BranchCut { jump });
                        }
                        argp + jump
                    }
                };
                values[k] = c64(z.norm().ln(), arg);
                prev = Some((z, arg));
            }
            Ok(())
        };
        walk(&mut (start..g.nx))?;
        // Re-walk leftwards from the start column so both halves share its branch.
        walk(&mut (0..=start).rev())?;
    }
    ScalarField::new(g, values, mask)
}

pub fn observables_from_tau(tau: &ScalarField, anchor_x: f64, stencils: Stencils) -> Result<Observables> {
    let log_tau = unwrap_log(tau, anchor_x)?;
    let q = fd_partial(&log_tau, Var::X, 2, stencils.x)?.map(|v| v * -2.0);
    let beta = fd_partial(tau, Var::X, 1, stencils.x)?;
    let beta_log = fd_partial(&log_tau, Var::X, 1, stencils.x)?;
    Ok(Observables { log_tau, q, beta, beta_log })
}

fn need<'a>(f: &'a Option<ScalarField>, name: &'static str) -> Result<&'a ScalarField> {
    f.as_ref().ok_or(Error::MissingField(name))
}

/// Pointwise residual of one of the scalar PDEs.
pub fn residual_pde(id: EquationId, fields: &Fields, constants: &Constants, stencils: Stencils) -> Result<Residual> {
    let i = c64(0.0, 1.0);
    let dx = |f: &ScalarField, order| fd_partial(f, Var::X, order, stencils.x);
    let dt = |f: &ScalarField, order| fd_partial(f, Var::T, order, stencils.t);
    let field = match id {
        EquationId::Kdv => {
            let q = need(&fields.q, "q")?;
            let (qt, qx, qxxx) = (dt(q, 1)?, dx(q, 1)?, dx(q, 3)?);
            ScalarField::combine(&[q, &qt, &qx, &qxxx], |v| v[1] + 1.5 * v[0] * v[2] - 0.25 * v[3])?
        }
        EquationId::Enls => {
            let y = need(&fields.y, "y")?;
            let (yt, yxx) = (dt(y, 1)?, dx(y, 2)?);
            ScalarField::combine(&[y, &yt, &yxx], |v| i * v[1] + v[2] + 2.0 * v[0].norm_sqr() * v[0])?
        }
        EquationId::CanSys => {
            let b = need(&fields.beta, "beta")?;
            let (b1, b2, b3, bt, btt) = (dx(b, 1)?, dx(b, 2)?, dx(b, 3)?, dt(b, 1)?, dt(b, 2)?);
            let max_valid = |f: &ScalarField| {
                f.values.iter().zip(&f.mask).filter(|(_, m)| **m).map(|(v, _)| v.norm()).fold(0.0, f64::max)
            };
            // Below the roundoff level of the stencil a derivative is noise.
            let noise = 64.0 * f64::EPSILON * max_valid(b) / b.grid.dx;
            let floor = (1e-8 * max_valid(&b1)).max(noise);
            let mut guarded = b1.clone();
            for (v, m) in guarded.values.iter().zip(guarded.mask.iter_mut()) {
                if v.norm() < floor {
                    *m = false;
                }
            }
            let inner = ScalarField::combine(&[&guarded, &b2, &b3, &bt], |v| {
                -0.5 * v[0] * v[0] - 0.25 * v[2] + (v[3] * v[3] + 0.25 * v[1] * v[1]) / v[0]
            })?;
            if inner.valid_count() == 0 {
                return Err(Error::DivisionMasked("beta_x"));
            }
            let inner_x = dx(&inner, 1)?;
            ScalarField::combine(&[&btt, &inner_x], |v| v[0] - v[1])?
        }
        EquationId::KdvGen => {
            let h = need(&fields.h12, "h12")?;
            let g = constants.gamma.as_ref().ok_or(Error::MissingField("gamma"))?;
            let (g11, g12, g21) = (g[(0, 0)], g[(0, 1)], g[(1, 0)]);
            let (ht, hx, hxxx) = (dt(h, 1)?, dx(h, 1)?, dx(h, 3)?);
            let lin = 4.0 * (g11 * g11 + g12 * g21);
            ScalarField::combine(&[&ht, &hx, &hxxx], |v| {
                4.0 * i * g12 * v[0] - lin * v[1] + 6.0 * v[1] * v[1] + v[2]
            })?
        }
        EquationId::NlsGen => {
            let p = need(&fields.h12, "h12")?;
            let q = need(&fields.h21, "h21")?;
            let g = constants.gamma.as_ref().ok_or(Error::MissingField("gamma"))?;
            let a = constants.a.ok_or(Error::MissingField("a"))?;
            let (g11, g12, g21) = (g[(0, 0)], g[(0, 1)], g[(1, 0)]);
            let (pt, px, pxx) = (dt(p, 1)?, dx(p, 1)?, dx(p, 2)?);
            ScalarField::combine(&[p, q, &pt, &px, &pxx], |v| {
                let (p, q) = (v[0], v[1]);
                let coupling = 2.0 * a * p * q - g21 * p + g12 * q;
                2.0 * a * v[2] - (i * v[4] - 2.0 * i * g11 * v[3] + 2.0 * i * coupling * (g12 + 2.0 * a * p))
            })?
        }
        other => {
            return Err(Error::InvalidParameters(format!("{other} is not a scalar PDE")));
        }
    };
    Ok(Residual::from_scalar(id, &field))
}
