use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{dilate_mask, fd_partial, fd_partial_matrix, Grid, MatrixField, ScalarField, Var};
use super::{EquationId, Residual, Stencils};
use crate::error::{Error, Result};
use crate::matcore::{c64, identity, norm_max, trace, ComplexMatrix, ComplexVector};
use crate::vessel::{input_wave, Realization, VesselEvaluation};

/// A realization evaluated at every node of a grid.
///
/// Nodes where `𝕏` is singular are `None` and masked; the mask may be
/// widened further with [`VesselGrid::with_exclusion`].
#[derive(Debug, Clone)]
pub struct VesselGrid {
    pub realization: Realization,
    pub grid: Grid,
    pub evals: Vec<Option<VesselEvaluation>>,
    pub mask: Vec<bool>,
}

impl VesselGrid {
    pub fn evaluate(r: &Realization, grid: Grid) -> Result<Self> {
        let evals: Vec<Result<Option<VesselEvaluation>>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (x, t) = grid.coords(k);
                match r.evaluate(x, t) {
                    Ok(ev) => Ok(Some(ev)),
                    Err(Error::SingularX { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
        let mask = evals.iter().map(Option::is_some).collect();
        Ok(Self { realization: r.clone(), grid, evals, mask })
    }

    /// Masks every node within `radius` of a singular node.
    pub fn with_exclusion(mut self, radius: f64) -> Self {
        self.mask = dilate_mask(&self.grid, &self.mask, radius);
        self
    }

    pub fn singular_count(&self) -> usize {
        self.evals.iter().filter(|e| e.is_none()).count()
    }

    pub fn singular_fraction(&self) -> f64 {
        self.singular_count() as f64 / self.grid.len() as f64
    }

    /// Errors when more than half of the grid is singular.
    pub fn ensure_mostly_regular(&self) -> Result<()> {
        if self.singular_fraction() > 0.5 {
            let k = self.evals.iter().position(Option::is_none).unwrap_or(0);
            let (x, t) = self.grid.coords(k);
            return Err(Error::SingularX { x, t });
        }
        Ok(())
    }

    pub fn matrix_field(&self, rows: usize, cols: usize, f: impl Fn(&VesselEvaluation) -> ComplexMatrix + Sync) -> MatrixField {
        let nan = ComplexMatrix::from_element(rows, cols, c64(f64::NAN, f64::NAN));
        let values: Vec<ComplexMatrix> = self
            .evals
            .par_iter()
            .zip(&self.mask)
            .map(|(ev, ok)| match ev {
                Some(ev) if *ok => f(ev),
                _ => nan.clone(),
            })
            .collect();
        MatrixField::new(self.grid, rows, cols, values, self.mask.clone())
            .expect("vessel fields have consistent shapes")
    }

    pub fn scalar_field(&self, f: impl Fn(&VesselEvaluation) -> Complex64 + Sync) -> ScalarField {
        let values: Vec<Complex64> = self
            .evals
            .par_iter()
            .zip(&self.mask)
            .map(|(ev, ok)| match ev {
                Some(ev) if *ok => f(ev),
                _ => c64(f64::NAN, f64::NAN),
            })
            .collect();
        ScalarField::new(self.grid, values, self.mask.clone()).expect("vessel fields match their grid")
    }

    fn outer(&self) -> usize {
        self.realization.outer_dim()
    }

    pub fn h0(&self) -> MatrixField {
        let e = self.outer();
        self.matrix_field(e, e, |ev| ev.h0.clone())
    }

    pub fn gamma_star(&self) -> MatrixField {
        let e = self.outer();
        self.matrix_field(e, e, |ev| ev.gamma_star.clone())
    }

    /// `Hₙ = C𝕏⁻¹AⁿB`.
    pub fn moment(&self, n: usize) -> MatrixField {
        let e = self.outer();
        let a_pow = self.realization.a().pow(n as u32);
        self.matrix_field(e, e, |ev| &ev.c * &ev.x_inv * &a_pow * &ev.b)
    }

    pub fn h0_entry(&self, r: usize, c: usize) -> ScalarField {
        self.scalar_field(|ev| ev.h0[(r, c)])
    }

    /// `τ`, or `None` when `𝕏` is singular at the anchor.
    pub fn tau(&self) -> Option<ScalarField> {
        if self.evals.iter().flatten().any(|ev| ev.tau.is_none()) {
            return None;
        }
        Some(self.scalar_field(|ev| ev.tau.unwrap_or(c64(f64::NAN, f64::NAN))))
    }

    /// `det 𝕏`, a constant multiple of `τ` that exists even when `𝕏₀` is singular.
    pub fn det_x(&self) -> ScalarField {
        self.scalar_field(|ev| ev.det_x)
    }
}

/// Residuals of both moment relations for one index `n`.
#[derive(Debug, Clone)]
pub struct MomentResiduals {
    pub n: usize,
    pub x: Residual,
    pub t: Residual,
}

/// Moment recurrences for `n = 0..count`.
pub fn check_moment_recurrence(vg: &VesselGrid, count: usize, stencils: Stencils) -> Result<Vec<MomentResiduals>> {
    vg.ensure_mostly_regular()?;
    let p = vg.realization.params();
    let e = p.dim();
    let s1 = p.sigma1.clone();
    let s1i = p.sigma1_inv();
    let left = &s1i * &p.sigma2;
    let right = &p.sigma2 * &s1i;
    let g_right = &p.gamma * &s1i;
    let i = c64(0.0, 1.0);
    let gstar = vg.gamma_star();
    let h0x = fd_partial_matrix(&vg.h0(), Var::X, 1, stencils.x)?;
    let moments: Vec<MatrixField> = (0..=count).map(|n| vg.moment(n)).collect();
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let (hn, hn1) = (&moments[n], &moments[n + 1]);
        let hnx = fd_partial_matrix(hn, Var::X, 1, stencils.x)?;
        let hnt = fd_partial_matrix(hn, Var::T, 1, stencils.t)?;
        let hn1x = fd_partial_matrix(hn1, Var::X, 1, stencils.x)?;
        let rx = MatrixField::combine(&[hn, hn1, &hnx, &gstar], e, e, |v| {
            &left * v[1] - v[1] * &right - v[2] + &s1i * v[3] * v[0] - v[0] * &g_right
        })?;
        let rt = MatrixField::combine(&[hn, &hnt, &hn1x, &h0x], e, e, |v| {
            v[1] - v[2] * i - v[3] * &s1 * v[0] * i
        })?;
        out.push(MomentResiduals {
            n,
            x: Residual::from_matrix(EquationId::MomentX(n), &rx),
            t: Residual::from_matrix(EquationId::MomentT(n), &rt),
        });
    }
    Ok(out)
}

/// Trace relation for a fixed `K`; the branch depends on whether `K`
/// commutes with `σ₁⁻¹σ₂`.
pub fn check_trace_relations(vg: &VesselGrid, k: &ComplexMatrix, n: usize, stencils: Stencils) -> Result<Residual> {
    vg.ensure_mostly_regular()?;
    let p = vg.realization.params();
    if k.nrows() != p.dim() || k.ncols() != p.dim() {
        return Err(Error::Dimension(format!("K must be {0}x{0}", p.dim())));
    }
    let s1 = &p.sigma1;
    let s1i = p.sigma1_inv();
    let m = &s1i * &p.sigma2;
    let comm = k * &m - &m * k;
    let commutes = norm_max(&comm) <= 1e-12 * (1.0 + norm_max(k) * norm_max(&m));
    let hn = vg.moment(n);
    let hnx = fd_partial_matrix(&hn, Var::X, 1, stencils.x)?;
    let gstar = vg.gamma_star();
    let field = if commutes {
        let conj = s1 * k * &s1i;
        let gk = &p.gamma * k;
        MatrixField::combine(&[&hn, &hnx, &gstar], 1, 1, |v| {
            let lhs = trace(&(k * v[1] * s1));
            let rhs = trace(&((&conj * v[2] - &gk) * v[0]));
            ComplexMatrix::from_element(1, 1, lhs - rhs)
        })?
    } else {
        let hn1 = vg.moment(n + 1);
        let k_s1i = k * &s1i;
        MatrixField::combine(&[&hn, &hn1, &hnx, &gstar], 1, 1, |v| {
            let lhs = trace(&(&comm * v[1] * s1));
            let rhs = trace(&(k * v[2] * s1 - &k_s1i * v[3] * v[0] * s1 + k * v[0] * &p.gamma));
            ComplexMatrix::from_element(1, 1, lhs - rhs)
        })?
    };
    let id = if commutes { EquationId::TraceComm(n) } else { EquationId::TraceNotComm(n) };
    Ok(Residual::from_matrix(id, &field))
}

/// Evolution law of `γ*`.
pub fn check_gamma_star_evolution(vg: &VesselGrid, stencils: Stencils) -> Result<Residual> {
    vg.ensure_mostly_regular()?;
    let p = vg.realization.params();
    let e = p.dim();
    let s1 = &p.sigma1;
    let i = c64(0.0, 1.0);
    let h0 = vg.h0();
    let gstar = vg.gamma_star();
    let gt = fd_partial_matrix(&gstar, Var::T, 1, stencils.t)?;
    let hx = fd_partial_matrix(&h0, Var::X, 1, stencils.x)?;
    let hxx = fd_partial_matrix(&h0, Var::X, 2, stencils.x)?;
    let field = MatrixField::combine(&[&gstar, &gt, &hx, &hxx], e, e, |v| {
        v[1] + (v[0] * v[2] * s1 - s1 * v[3] * s1 - s1 * v[2] * v[0]) * i
    })?;
    Ok(Residual::from_matrix(EquationId::GammaStar, &field))
}

fn vector_field(grid: Grid, values: Vec<Option<ComplexVector>>, e: usize) -> Result<MatrixField> {
    let mask = values.iter().map(Option::is_some).collect();
    let values = values
        .into_iter()
        .map(|v| match v {
            Some(v) => ComplexMatrix::from_column_slice(e, 1, v.as_slice()),
            None => ComplexMatrix::from_element(e, 1, c64(f64::NAN, f64::NAN)),
        })
        .collect();
    MatrixField::new(grid, e, 1, values, mask)
}

/// Residuals of the input equations `σ₁u_x = (λσ₂ + γ)u`, `u_t = iλu_x`.
pub fn check_input_wave(
    r: &Realization,
    lambda: Complex64,
    u0: &ComplexVector,
    grid: Grid,
    stencils: Stencils,
) -> Result<(Residual, Residual)> {
    let p = r.params();
    let e = p.dim();
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, t) = grid.coords(k);
            input_wave(p, lambda, u0, x, t).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let u = vector_field(grid, samples, e)?;
    let ux = fd_partial_matrix(&u, Var::X, 1, stencils.x)?;
    let ut = fd_partial_matrix(&u, Var::T, 1, stencils.t)?;
    let gen = &p.sigma2 * lambda + &p.gamma;
    let i = c64(0.0, 1.0);
    let rx = MatrixField::combine(&[&u, &ux], e, 1, |v| &p.sigma1 * v[1] - &gen * v[0])?;
    let rt = MatrixField::combine(&[&ut, &ux], e, 1, |v| v[0] - v[1] * (i * lambda))?;
    Ok((Residual::from_matrix(EquationId::InputX, &rx), Residual::from_matrix(EquationId::InputT, &rt)))
}

/// Residuals of both output equations for `y = S(λ)u_λ`.
pub fn check_backlund(
    vg: &VesselGrid,
    lambda: Complex64,
    u0: &ComplexVector,
    stencils: Stencils,
) -> Result<(Residual, Residual)> {
    vg.ensure_mostly_regular()?;
    let r = &vg.realization;
    let p = r.params();
    let e = p.dim();
    let samples = vg
        .evals
        .par_iter()
        .zip(&vg.mask)
        .map(|(ev, ok)| match ev {
            Some(ev) if *ok => {
                let (s, _) = r.transfer_from(ev, lambda)?;
                Ok(Some(s * input_wave(p, lambda, u0, ev.x, ev.t)?))
            }
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let y = vector_field(vg.grid, samples, e)?;
    let yx = fd_partial_matrix(&y, Var::X, 1, stencils.x)?;
    let yt = fd_partial_matrix(&y, Var::T, 1, stencils.t)?;
    let gstar = vg.gamma_star();
    let h0x = fd_partial_matrix(&vg.h0(), Var::X, 1, stencils.x)?;
    let s1 = &p.sigma1;
    let i = c64(0.0, 1.0);
    let rx = MatrixField::combine(&[&y, &yx, &gstar], e, 1, |v| {
        s1 * v[1] - &p.sigma2 * v[0] * lambda - v[2] * v[0]
    })?;
    let rt = MatrixField::combine(&[&y, &yx, &yt, &h0x], e, 1, |v| {
        s1 * v[2] - s1 * v[1] * (i * lambda) - s1 * v[3] * s1 * v[0] * i
    })?;
    Ok((Residual::from_matrix(EquationId::BacklundX, &rx), Residual::from_matrix(EquationId::BacklundT, &rt)))
}

/// Entry identities of generalized-KdV vessels (`σ₁ = I`,
/// `σ₂ = [[0,0],[1,0]]`): the pre-KdV relation, the `(h₂₁)ₓ` elimination,
/// the `h₁₁` formula and the `H₁` entry formulas, each as a residual.
///
/// The identities are the exact consequences of the moment relations;
/// `tr H₀` is kept wherever it enters since it need not vanish.
pub fn check_kdv_identities(vg: &VesselGrid, stencils: Stencils) -> Result<Vec<Residual>> {
    vg.ensure_mostly_regular()?;
    let p = vg.realization.params();
    let kdv_sigma2 = crate::matcore::from_real(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    if p.dim() != 2 || norm_max(&(&p.sigma1 - identity(2))) > 1e-12 || norm_max(&(&p.sigma2 - kdv_sigma2)) > 1e-12 {
        return Err(Error::InvalidParameters("KdV identities need generalized-KdV parameters".into()));
    }
    let g = &p.gamma;
    let (g11, g12, g21) = (g[(0, 0)], g[(0, 1)], g[(1, 0)]);
    if g12.norm() < 1e-12 {
        return Err(Error::GammaTwelveZero);
    }
    let i = c64(0.0, 1.0);
    let h0 = vg.h0();
    let h1 = vg.moment(1);
    let (h11, h12, h21, h22) = (h0.entry(0, 0), h0.entry(0, 1), h0.entry(1, 0), h0.entry(1, 1));
    let (k11, k12, k22) = (h1.entry(0, 0), h1.entry(0, 1), h1.entry(1, 1));
    let dx = |f: &ScalarField, o| fd_partial(f, Var::X, o, stencils.x);
    let (f1, f2, f3) = (dx(&h12, 1)?, dx(&h12, 2)?, dx(&h12, 3)?);
    let ht = fd_partial(&h12, Var::T, 1, stencils.t)?;
    let h21x = dx(&h21, 1)?;

    let pre = ScalarField::combine(&[&h12, &f1, &f2, &f3, &ht, &h21x], |v| {
        let (h, f1, f2, f3) = (v[0], v[1], v[2], v[3]);
        let q = 2.0 * f1 * (-2.0 * g11 * h + h * h - g12 * g21) + 2.0 * f2 * (h - g11) + 4.0 * f1 * f1 + f3;
        -v[4] + i / (2.0 * g12) * (q + 2.0 * g12 * g12 * v[5])
    })?;
    let elim = ScalarField::combine(&[&h12, &f1, &f2, &f3, &h21x], |v| {
        let (h, f1, f2, f3) = (v[0] - g11, v[1], v[2], v[3]);
        v[4] + (2.0 * f1 * h * h + 2.0 * f2 * h + f1 * f1 + 0.5 * f3) / (2.0 * g12 * g12)
    })?;
    let h11_formula = ScalarField::combine(&[&h11, &h22, &h12, &f1], |v| {
        let c = v[0] + v[1];
        v[0] - (0.5 * c - (v[3] - 2.0 * g11 * v[2] + v[2] * v[2]) / (2.0 * g12))
    })?;
    let k12_formula = ScalarField::combine(&[&k12, &h11, &h22, &h12, &h21, &f1, &f2], |v| {
        let c = v[1] + v[2];
        let (h, f1, f2) = (v[3], v[5], v[6]);
        let printed = (f2 + h * (3.0 * f1 - 2.0 * g12 * g21) - 2.0 * g11 * f1 + 2.0 * g12 * g12 * v[4] + h * h * h
            - 2.0 * g11 * h * h)
            / (2.0 * g12);
        v[0] - (printed - 0.5 * c * h)
    })?;
    let k22_formula = ScalarField::combine(&[&k22, &k11, &h11, &h22, &h12, &h21, &h21x], |v| {
        let (h11, h22, h, h21) = (v[2], v[3], v[4], v[5]);
        v[0] - (v[1] - v[6] + (h11 - h22) * (g21 + h11) - 2.0 * g11 * h21 + h * h21)
    })?;
    Ok(vec![
        Residual::from_scalar(EquationId::KdvPre, &pre),
        Residual::from_scalar(EquationId::H21Elimination, &elim),
        Residual::from_scalar(EquationId::H11Formula, &h11_formula),
        Residual::from_scalar(EquationId::K12Formula, &k12_formula),
        Residual::from_scalar(EquationId::K22Formula, &k22_formula),
    ])
}
