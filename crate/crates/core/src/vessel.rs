//! Finite-dimensional regular vessels.
//!
//! `B` and `C` are propagated in closed form from the anchor: both the
//! x-equation and the wave equation are linear with constant coefficients
//! after vectorization, and their generators commute, so a single matrix
//! exponential solves the overdetermined pair. `𝕏` is recovered pointwise
//! from the Lyapunov equation `A𝕏 + 𝕏A_ζ + Bσ₁C = 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{
    c64, det, ensure_finite, ensure_square, identity, inverse, kron, mat_exp, norm_max, rcond,
    unvec, vec_cols, ComplexMatrix, ComplexVector, SylvesterSolver, SINGULAR_RCOND,
};
use crate::params::{external_first, external_second, VesselParameters};

/// Default threshold on `|τ|` below which a point is treated as outside Ω.
pub const DEFAULT_TAU_MIN: f64 = 1e-10;

/// Smallest singular value of `λI − A` (or `λI + A_ζ`) treated as a pole.
pub const POLE_TOL: f64 = 1e-10;

/// The finite-dimensional seed of a vessel: `(A, A_ζ, B₀, C₀)` at an anchor
/// point together with its parameters.
#[derive(Debug, Clone)]
pub struct Realization {
    a: ComplexMatrix,
    a_zeta: ComplexMatrix,
    b0: ComplexMatrix,
    c0: ComplexMatrix,
    params: VesselParameters,
    anchor: (f64, f64),
    tau_min: f64,
    x0: ComplexMatrix,
    x0_inv: Option<ComplexMatrix>,
    sylvester: SylvesterSolver,
    gen_b: (ComplexMatrix, ComplexMatrix),
    gen_c: (ComplexMatrix, ComplexMatrix),
}

impl Realization {
    pub fn new(
        a: ComplexMatrix,
        a_zeta: ComplexMatrix,
        b0: ComplexMatrix,
        c0: ComplexMatrix,
        params: VesselParameters,
        anchor: (f64, f64),
    ) -> Result<Self> {
        ensure_square(&a, "A")?;
        ensure_square(&a_zeta, "A_zeta")?;
        for m in [&a, &a_zeta, &b0, &c0] {
            ensure_finite(m)?;
        }
        let n = a.nrows();
        let e = params.dim();
        if a_zeta.nrows() != n {
            return Err(Error::Dimension(format!("A_zeta must be {n}x{n}")));
        }
        if b0.nrows() != n || b0.ncols() != e {
            return Err(Error::Dimension(format!(
                "B0 must be {n}x{e}, got {}x{}",
                b0.nrows(),
                b0.ncols()
            )));
        }
        if c0.nrows() != e || c0.ncols() != n {
            return Err(Error::Dimension(format!(
                "C0 must be {e}x{n}, got {}x{}",
                c0.nrows(),
                c0.ncols()
            )));
        }
        if !(anchor.0.is_finite() && anchor.1.is_finite()) {
            return Err(Error::NonFinite);
        }

        let sylvester = SylvesterSolver::new(&a, &a_zeta)?;
        let coupling = &b0 * &params.sigma1 * &c0;
        let x0 = sylvester.solve(&(-&coupling))?;
        let residual = norm_max(&(&a * &x0 + &x0 * &a_zeta + &coupling));
        let scale = norm_max(&a) * norm_max(&x0) + norm_max(&x0) * norm_max(&a_zeta)
            + norm_max(&coupling);
        if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvariantViolation(format!(
                "Lyapunov residual {residual:e} at the anchor"
            )));
        }
        let x0_inv = inverse(&x0).ok();

        let s1_inv = params.sigma1_inv();
        let (id_n, id_e) = (identity(n), identity(e));
        let i = c64(0.0, 1.0);
        let m_b = -(kron(&(&params.sigma2 * &s1_inv).transpose(), &a)
            + kron(&(&params.gamma * &s1_inv).transpose(), &id_n));
        let t_b = kron(&id_e, &a) * &m_b * i;
        let m_c = kron(&id_n, &(&s1_inv * &params.gamma))
            - kron(&a_zeta.transpose(), &(&s1_inv * &params.sigma2));
        let t_c = kron(&a_zeta.transpose(), &id_e) * &m_c * (-i);

        Ok(Self {
            a,
            a_zeta,
            b0,
            c0,
            params,
            anchor,
            tau_min: DEFAULT_TAU_MIN,
            x0,
            x0_inv,
            sylvester,
            gen_b: (m_b, t_b),
            gen_c: (m_c, t_c),
        })
    }

    pub fn with_tau_min(mut self, tau_min: f64) -> Self {
        self.tau_min = tau_min;
        self
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }
    pub fn a_zeta(&self) -> &ComplexMatrix {
        &self.a_zeta
    }
    pub fn b0(&self) -> &ComplexMatrix {
        &self.b0
    }
    pub fn c0(&self) -> &ComplexMatrix {
        &self.c0
    }
    pub fn params(&self) -> &VesselParameters {
        &self.params
    }
    pub fn anchor(&self) -> (f64, f64) {
        self.anchor
    }
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }
    /// Inner dimension `n`.
    pub fn inner_dim(&self) -> usize {
        self.a.nrows()
    }
    /// Outer dimension `E`.
    pub fn outer_dim(&self) -> usize {
        self.params.dim()
    }
    /// `𝕏` at the anchor.
    pub fn x0(&self) -> &ComplexMatrix {
        &self.x0
    }

    /// Generators `(M_B, i(I⊗A)M_B)` of the vectorized `B` flow.
    pub fn b_generators(&self) -> &(ComplexMatrix, ComplexMatrix) {
        &self.gen_b
    }

    /// Generators `(M_C, −i(A_ζᵀ⊗I)M_C)` of the vectorized `C` flow.
    pub fn c_generators(&self) -> &(ComplexMatrix, ComplexMatrix) {
        &self.gen_c
    }

    pub fn propagate_b(&self, x: f64, t: f64) -> Result<ComplexMatrix> {
        let (m, tg) = &self.gen_b;
        let (dx, dt) = (x - self.anchor.0, t - self.anchor.1);
        let flow = mat_exp(&(m * c64(dx, 0.0) + tg * c64(dt, 0.0)))?;
        Ok(unvec(&(flow * vec_cols(&self.b0)), self.inner_dim(), self.outer_dim()))
    }

    pub fn propagate_c(&self, x: f64, t: f64) -> Result<ComplexMatrix> {
        let (m, tg) = &self.gen_c;
        let (dx, dt) = (x - self.anchor.0, t - self.anchor.1);
        let flow = mat_exp(&(m * c64(dx, 0.0) + tg * c64(dt, 0.0)))?;
        Ok(unvec(&(flow * vec_cols(&self.c0)), self.outer_dim(), self.inner_dim()))
    }

    /// `𝕏` solving `A𝕏 + 𝕏A_ζ = −Bσ₁C`.
    pub fn recover_x(&self, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.sylvester.solve(&-(b * &self.params.sigma1 * c))
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<VesselEvaluation> {
        let b = self.propagate_b(x, t)?;
        let c = self.propagate_c(x, t)?;
        let xm = self.recover_x(&b, &c)?;
        if rcond(&xm) < SINGULAR_RCOND || self.negligible_x(&xm, &b, &c) {
            return Err(Error::SingularX { x, t });
        }
        let x_inv = inverse(&xm).map_err(|_| Error::SingularX { x, t })?;
        let tau = match &self.x0_inv {
            Some(x0i) => {
                let tau = det(&(x0i * &xm))?;
                if !(tau.norm() >= self.tau_min) {
                    return Err(Error::SingularX { x, t });
                }
                Some(tau)
            }
            None => None,
        };
        let det_x = det(&xm)?;
        let h0 = &c * &x_inv * &b;
        let p = &self.params;
        let gamma_star = &p.gamma + &p.sigma2 * &h0 * &p.sigma1 - &p.sigma1 * &h0 * &p.sigma2;
        Ok(VesselEvaluation { x, t, b, c, x_mat: xm, x_inv, det_x, tau, h0, gamma_star })
    }

    // 𝕏 vanishing relative to its source: rcond cannot see this for n = 1.
    fn negligible_x(&self, xm: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> bool {
        let size = (self.inner_dim() * self.outer_dim()) as f64;
        let lhs = norm_max(xm) * (norm_max(&self.a) + norm_max(&self.a_zeta));
        let rhs = norm_max(b) * norm_max(&self.params.sigma1) * norm_max(c) * size;
        lhs < SINGULAR_RCOND * rhs
    }

    /// Moments `H₀, …, H_N` with `Hₙ = C𝕏⁻¹AⁿB`.
    pub fn moments(&self, x: f64, t: f64, count: usize) -> Result<Vec<ComplexMatrix>> {
        let ev = self.evaluate(x, t)?;
        Ok(ev.moments(&self.a, count))
    }

    /// `(S, S⁻¹)` at `λ`.
    pub fn transfer_function(
        &self,
        lambda: Complex64,
        x: f64,
        t: f64,
    ) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let ev = self.evaluate(x, t)?;
        self.transfer_from(&ev, lambda)
    }

    /// Transfer function from an existing evaluation.
    pub fn transfer_from(
        &self,
        ev: &VesselEvaluation,
        lambda: Complex64,
    ) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let n = self.inner_dim();
        let e = self.outer_dim();
        let left = identity(n) * lambda - &self.a;
        let right = identity(n) * lambda + &self.a_zeta;
        if smallest_singular_value(&left) < POLE_TOL || smallest_singular_value(&right) < POLE_TOL {
            return Err(Error::PoleAtLambda(lambda));
        }
        let left_inv = inverse(&left).map_err(|_| Error::PoleAtLambda(lambda))?;
        let right_inv = inverse(&right).map_err(|_| Error::PoleAtLambda(lambda))?;
        let s1 = &self.params.sigma1;
        let s = identity(e) - &ev.c * &ev.x_inv * left_inv * &ev.b * s1;
        let s_inv = identity(e) + &ev.c * right_inv * &ev.x_inv * &ev.b * s1;
        Ok((s, s_inv))
    }

    /// `y = S(λ,x,t) u_λ(x,t)`.
    pub fn backlund_output(
        &self,
        lambda: Complex64,
        u0: &ComplexVector,
        x: f64,
        t: f64,
    ) -> Result<ComplexVector> {
        let (s, _) = self.transfer_function(lambda, x, t)?;
        let u = input_wave(&self.params, lambda, u0, x, t)?;
        Ok(s * u)
    }
}

fn smallest_singular_value(m: &ComplexMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Pointwise outputs of a vessel at `(x, t)`.
#[derive(Debug, Clone)]
pub struct VesselEvaluation {
    pub x: f64,
    pub t: f64,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
    pub x_mat: ComplexMatrix,
    pub x_inv: ComplexMatrix,
    /// `det 𝕏`, equal to `τ` up to a constant factor.
    pub det_x: Complex64,
    /// `det(𝕏₀⁻¹𝕏)`; `None` when `𝕏` is singular at the anchor.
    pub tau: Option<Complex64>,
    pub h0: ComplexMatrix,
    pub gamma_star: ComplexMatrix,
}

impl VesselEvaluation {
    pub fn moments(&self, a: &ComplexMatrix, count: usize) -> Vec<ComplexMatrix> {
        let left = &self.c * &self.x_inv;
        let mut power_b = self.b.clone();
        let mut out = Vec::with_capacity(count + 1);
        for k in 0..=count {
            if k > 0 {
                power_b = a * power_b;
            }
            out.push(&left * &power_b);
        }
        out
    }
}

/// Input wave `u_λ(x,t) = exp(σ₁⁻¹(λσ₂ + γ)(x + iλt)) u₀`.
///
/// Solves `σ₁u_x = (λσ₂ + γ)u` together with `u_t = iλu_x`, the sign of the
/// wave equation matching `B_t = iAB_x`.
pub fn input_wave(
    p: &VesselParameters,
    lambda: Complex64,
    u0: &ComplexVector,
    x: f64,
    t: f64,
) -> Result<ComplexVector> {
    if u0.len() != p.dim() {
        return Err(Error::Dimension(format!("u0 must have length {}", p.dim())));
    }
    let generator = p.sigma1_inv() * (&p.sigma2 * lambda + &p.gamma);
    let phase = c64(x, 0.0) + c64(0.0, 1.0) * lambda * t;
    Ok(mat_exp(&(generator * phase))? * u0)
}

/// Equivalence transformations acting on a realization.
#[derive(Debug, Clone)]
pub enum Transform {
    FirstKind { u: ComplexMatrix, v: ComplexMatrix },
    SecondKind { k2: Complex64, k: Complex64 },
    Internal { u: ComplexMatrix, v: ComplexMatrix },
}

pub fn transform_realization(r: &Realization, spec: &Transform) -> Result<Realization> {
    match spec {
        Transform::FirstKind { u, v } => {
            let params = external_first(&r.params, u, v)?;
            let u_inv = inverse(u).map_err(|_| Error::InvalidTransform("U is singular".into()))?;
            let v_inv = inverse(v).map_err(|_| Error::InvalidTransform("V is singular".into()))?;
            Realization::new(
                r.a.clone(),
                r.a_zeta.clone(),
                &r.b0 * u_inv,
                v_inv * &r.c0,
                params,
                r.anchor,
            )
            .map(|n| n.with_tau_min(r.tau_min))
        }
        Transform::SecondKind { k2, k } => Realization::new(
            r.a.clone(),
            r.a_zeta.clone(),
            r.b0.clone(),
            r.c0.clone(),
            external_second(&r.params, *k2, *k),
            r.anchor,
        )
        .map(|n| n.with_tau_min(r.tau_min)),
        Transform::Internal { u, v } => {
            let n = r.inner_dim();
            if u.nrows() != n || u.ncols() != n || v.nrows() != n || v.ncols() != n {
                return Err(Error::InvalidTransform(format!("U and V must be {n}x{n}")));
            }
            let u_inv = inverse(u).map_err(|_| Error::InvalidTransform("U is singular".into()))?;
            let v_inv = inverse(v).map_err(|_| Error::InvalidTransform("V is singular".into()))?;
            Realization::new(
                v * &r.a * &v_inv,
                u * &r.a_zeta * &u_inv,
                v * &r.b0,
                &r.c0 * u_inv,
                r.params.clone(),
                r.anchor,
            )
            .map(|n| n.with_tau_min(r.tau_min))
        }
    }
}
