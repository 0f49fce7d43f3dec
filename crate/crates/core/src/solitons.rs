//! One-dimensional solitons for the two canonical parameter classes.
//!
//! Each constructor returns a [`Realization`] anchored at `(0, 0)` together
//! with the explicit closed forms of the coupling `B`, `C` and of the entries
//! of `H₀`, so the vessel machinery can be cross-checked against formulas.
//! `𝕏` always comes from the Lyapunov solve; the closed forms are taken as
//! written and the global sign relating the two is measured and recorded.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{c64, from_complex, ComplexMatrix};
use crate::params::VesselParameters;
use crate::vessel::Realization;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolitonKind {
    GeneralizedNls,
    GeneralizedKdv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSpec {
    pub kind: SolitonKind,
    /// Scalar `A`.
    pub a_op: Complex64,
    /// Scalar `A_ζ`.
    pub a_zeta: Complex64,
    /// `σ₂ = diag(a, −a)` (NLS only).
    pub a: Complex64,
    pub gamma: ComplexMatrix,
    pub b1: Complex64,
    pub b2: Complex64,
    pub c1: Complex64,
    pub c2: Complex64,
    /// Request the conjugate-symmetric NLS reduction `h₂₁ = h₁₂*`.
    pub symmetric: bool,
}

impl SolitonSpec {
    /// Symmetric NLS preset: `A = 1+i`, `A_ζ = A*`, `a = −1/2`, `γ = 0`,
    /// all coupling constants 1.
    pub fn nls_symmetric() -> Self {
        let a_op = c64(1.0, 1.0);
        let one = c64(1.0, 0.0);
        Self {
            kind: SolitonKind::GeneralizedNls,
            a_op,
            a_zeta: a_op.conj(),
            a: c64(-0.5, 0.0),
            gamma: ComplexMatrix::zeros(2, 2),
            b1: one,
            b2: one,
            c1: one,
            c2: one,
            symmetric: true,
        }
    }

    /// KdV preset: `A = 1`, `A_ζ = 2`, `γ = [[0, i], [0, 0]]`, `B1 = C1 = 1`,
    /// `B2 = C2 = 0`.
    pub fn kdv_default() -> Self {
        let zero = c64(0.0, 0.0);
        Self {
            kind: SolitonKind::GeneralizedKdv,
            a_op: c64(1.0, 0.0),
            a_zeta: c64(2.0, 0.0),
            a: zero,
            gamma: from_complex(2, 2, &[zero, c64(0.0, 1.0), zero, zero]),
            b1: c64(1.0, 0.0),
            b2: zero,
            c1: c64(1.0, 0.0),
            c2: zero,
            symmetric: false,
        }
    }
}

/// Relation between the vessel-computed `H₀` and the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignRecord {
    /// `±1` such that vessel = sign × closed form.
    pub sign: f64,
    /// Largest relative deviation beyond the sign at the probe points.
    pub mismatch: f64,
}

impl SignRecord {
    pub fn agrees(&self) -> bool {
        self.mismatch < 1e-8
    }
}

const PROBES: [(f64, f64); 4] = [(0.31, 0.17), (-0.43, 0.29), (0.57, -0.23), (-0.19, -0.37)];

fn measure_sign(pairs: &[(Complex64, Complex64)]) -> SignRecord {
    let usable: Vec<&(Complex64, Complex64)> =
        pairs.iter().filter(|(v, c)| v.norm() > 1e-12 && c.norm() > 1e-12).collect();
    let Some(&&(v0, c0)) = usable.first() else {
        return SignRecord { sign: 1.0, mismatch: 0.0 };
    };
    let sign = if (v0 / c0).re < 0.0 { -1.0 } else { 1.0 };
    let mismatch = usable
        .iter()
        .map(|(v, c)| (v - c * sign).norm() / v.norm())
        .fold(0.0, f64::max);
    SignRecord { sign, mismatch }
}

fn check_traceless(g: &ComplexMatrix) -> Result<()> {
    if g.nrows() != 2 || g.ncols() != 2 {
        return Err(Error::InvariantViolation("gamma must be 2x2".into()));
    }
    if (g[(0, 0)] + g[(1, 1)]).norm() > 1e-12 * (1.0 + g.norm()) {
        return Err(Error::InvariantViolation("gamma must be traceless".into()));
    }
    Ok(())
}

fn check_solvable(spec: &SolitonSpec) -> Result<()> {
    let s = spec.a_op + spec.a_zeta;
    if s.norm() < 1e-12 * (1.0 + spec.a_op.norm() + spec.a_zeta.norm()) {
        return Err(Error::InvariantViolation("A + A_zeta must be nonzero".into()));
    }
    Ok(())
}

/// Generalized NLS soliton with `γ₁₂ = γ₂₁ = 0`.
#[derive(Debug, Clone)]
pub struct NlsSoliton {
    pub spec: SolitonSpec,
    pub realization: Realization,
    pub k: Complex64,
    pub k_zeta: Complex64,
    pub sign: SignRecord,
}

impl NlsSoliton {
    pub fn b(&self, x: f64, t: f64) -> ComplexMatrix {
        let s = &self.spec;
        let i = c64(0.0, 1.0);
        let e = (-self.k * x - i * s.a_op * self.k * t).exp();
        from_complex(1, 2, &[e * s.b1, s.b2 / e])
    }

    pub fn c(&self, x: f64, t: f64) -> ComplexMatrix {
        let s = &self.spec;
        let i = c64(0.0, 1.0);
        let e = (self.k_zeta * x - i * s.a_zeta * self.k_zeta * t).exp();
        from_complex(2, 1, &[e * s.c1, s.c2 / e])
    }

    /// Closed-form `(h₁₂, h₂₁)`. The denominator carries `B2` alongside `C2`,
    /// which the `B2 = 1` presets cannot distinguish from its omission.
    pub fn closed_form(&self, x: f64, t: f64) -> (Complex64, Complex64) {
        let s = &self.spec;
        let i = c64(0.0, 1.0);
        let (a_op, az, a) = (s.a_op, s.a_zeta, s.a);
        let g11 = s.gamma[(0, 0)];
        let sum = a_op + az;
        let den = s.b1 * s.c1
            + s.b2 * s.c2 * (2.0 * i * sum * (g11 * t + a * (a_op * t - az * t - i * x))).exp();
        let h12 = -s.b2 * s.c1 * sum * (2.0 * (a * a_op + g11) * (x + i * a_op * t)).exp() / den;
        let h21 = -s.b1 * s.c2 * sum * (2.0 * (a * az - g11) * (x - i * az * t)).exp() / den;
        (h12, h21)
    }
}

pub fn build_nls_soliton(spec: &SolitonSpec) -> Result<NlsSoliton> {
    if spec.kind != SolitonKind::GeneralizedNls {
        return Err(Error::InvariantViolation("soliton kind must be generalized NLS".into()));
    }
    check_traceless(&spec.gamma)?;
    check_solvable(spec)?;
    if spec.gamma[(0, 1)].norm() > 0.0 || spec.gamma[(1, 0)].norm() > 0.0 {
        return Err(Error::InvariantViolation("NLS solitons need gamma12 = gamma21 = 0".into()));
    }
    if spec.a.norm() == 0.0 {
        return Err(Error::InvariantViolation("NLS parameter a must be nonzero".into()));
    }
    let g11 = spec.gamma[(0, 0)];
    if spec.symmetric {
        let tol = 1e-12;
        let ok = (spec.a_zeta - spec.a_op.conj()).norm() < tol
            && (spec.b1 - 1.0).norm() < tol
            && (spec.c1 - spec.c2).norm() < tol
            && spec.a.im.abs() < tol
            && (c64(0.0, 1.0) * g11).im.abs() < tol;
        if !ok {
            return Err(Error::InvariantViolation(
                "symmetric soliton needs A_zeta = conj(A), B1 = 1, C1 = C2, real a and real i*gamma11".into(),
            ));
        }
    }
    let params = VesselParameters::generalized_nls(spec.a, spec.gamma.clone())?;
    let k = spec.a_op * spec.a + g11;
    let k_zeta = -spec.a_zeta * spec.a + g11;
    let mut sol = NlsSoliton {
        spec: spec.clone(),
        realization: Realization::new(
            from_complex(1, 1, &[spec.a_op]),
            from_complex(1, 1, &[spec.a_zeta]),
            from_complex(1, 2, &[spec.b1, spec.b2]),
            from_complex(2, 1, &[spec.c1, spec.c2]),
            params,
            (0.0, 0.0),
        )?,
        k,
        k_zeta,
        sign: SignRecord { sign: 1.0, mismatch: 0.0 },
    };
    let mut pairs = Vec::new();
    for &(x, t) in &PROBES {
        if let Ok(ev) = sol.realization.evaluate(x, t) {
            let (h12, h21) = sol.closed_form(x, t);
            pairs.push((ev.h0[(0, 1)], h12));
            pairs.push((ev.h0[(1, 0)], h21));
        }
    }
    sol.sign = measure_sign(&pairs);
    Ok(sol)
}

/// Generalized KdV soliton.
#[derive(Debug, Clone)]
pub struct KdvSoliton {
    pub spec: SolitonSpec,
    pub realization: Realization,
    pub k: Complex64,
    pub k_zeta: Complex64,
    pub sign: SignRecord,
}

/// Principal square root with ties on the imaginary axis sent to `Im ≥ 0`.
fn principal_sqrt(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.re == 0.0 && r.im < 0.0 {
        -r
    } else {
        r
    }
}

impl KdvSoliton {
    pub fn b(&self, x: f64, t: f64) -> ComplexMatrix {
        let s = &self.spec;
        let (g11, g12) = (s.gamma[(0, 0)], s.gamma[(0, 1)]);
        let xi = self.k * (x + c64(0.0, 1.0) * s.a_op * t);
        let b2 = xi.cosh() * s.b1 + xi.sinh() * s.b2;
        let b2x = self.k * (xi.sinh() * s.b1 + xi.cosh() * s.b2);
        from_complex(1, 2, &[(-b2x + g11 * b2) / g12, b2])
    }

    pub fn c(&self, x: f64, t: f64) -> ComplexMatrix {
        let s = &self.spec;
        let (g11, g12) = (s.gamma[(0, 0)], s.gamma[(0, 1)]);
        let eta = self.k_zeta * (x - c64(0.0, 1.0) * s.a_zeta * t);
        let c1 = eta.cosh() * s.c1 + eta.sinh() * s.c2;
        let c1x = self.k_zeta * (eta.sinh() * s.c1 + eta.cosh() * s.c2);
        from_complex(2, 1, &[c1, (c1x - g11 * c1) / g12])
    }

    /// Closed-form `h₁₂ = [CB]₁₂ / 𝕏` with `𝕏 = BC/(A + A_ζ)`.
    pub fn closed_form(&self, x: f64, t: f64) -> Complex64 {
        let b = self.b(x, t);
        let c = self.c(x, t);
        let x_closed = (&b * &c)[(0, 0)] / (self.spec.a_op + self.spec.a_zeta);
        (&c * &b)[(0, 1)] / x_closed
    }
}

pub fn build_kdv_soliton(spec: &SolitonSpec) -> Result<KdvSoliton> {
    if spec.kind != SolitonKind::GeneralizedKdv {
        return Err(Error::InvariantViolation("soliton kind must be generalized KdV".into()));
    }
    check_traceless(&spec.gamma)?;
    if spec.gamma[(0, 1)].norm() == 0.0 {
        return Err(Error::GammaTwelveZero);
    }
    check_solvable(spec)?;
    let g = &spec.gamma;
    let det_g = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let k = principal_sqrt(spec.a_op * g[(0, 1)] - det_g);
    let k_zeta = principal_sqrt(-spec.a_zeta * g[(0, 1)] - det_g);
    let params = VesselParameters::generalized_kdv(spec.gamma.clone())?;
    let mut sol = KdvSoliton {
        spec: spec.clone(),
        realization: Realization::new(
            from_complex(1, 1, &[spec.a_op]),
            from_complex(1, 1, &[spec.a_zeta]),
            ComplexMatrix::zeros(1, 2),
            ComplexMatrix::zeros(2, 1),
            params.clone(),
            (0.0, 0.0),
        )?,
        k,
        k_zeta,
        sign: SignRecord { sign: 1.0, mismatch: 0.0 },
    };
    sol.realization = Realization::new(
        from_complex(1, 1, &[spec.a_op]),
        from_complex(1, 1, &[spec.a_zeta]),
        sol.b(0.0, 0.0),
        sol.c(0.0, 0.0),
        params,
        (0.0, 0.0),
    )?;
    let pairs: Vec<(Complex64, Complex64)> = PROBES
        .iter()
        .filter_map(|&(x, t)| sol.realization.evaluate(x, t).ok().map(|ev| (ev.h0[(0, 1)], sol.closed_form(x, t))))
        .collect();
    sol.sign = measure_sign(&pairs);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::norm_max;

    fn grid_points() -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push((-0.8 + 0.4 * i as f64 + 0.013, -0.4 + 0.2 * j as f64 + 0.007));
            }
        }
        pts
    }

    #[test]
    fn nls_symmetric_preset() {
        let sol = build_nls_soliton(&SolitonSpec::nls_symmetric()).unwrap();
        assert_eq!(sol.sign.sign, 1.0);
        assert!(sol.sign.agrees());
        for (x, t) in grid_points() {
            let ev = sol.realization.evaluate(x, t).unwrap();
            assert!((ev.h0[(1, 0)] - ev.h0[(0, 1)].conj()).norm() < 1e-10);
            let (h12, h21) = sol.closed_form(x, t);
            assert!((ev.h0[(0, 1)] - h12).norm() <= 1e-9 * h12.norm().max(1e-300));
            assert!((ev.h0[(1, 0)] - h21).norm() <= 1e-9 * h21.norm().max(1e-300));
            assert!(norm_max(&(sol.realization.propagate_b(x, t).unwrap() - sol.b(x, t))) < 1e-12);
            assert!(norm_max(&(sol.realization.propagate_c(x, t).unwrap() - sol.c(x, t))) < 1e-12);
        }
    }

    #[test]
    fn nls_general_b2_enters_the_denominator() {
        let mut spec = SolitonSpec::nls_symmetric();
        spec.symmetric = false;
        spec.a_zeta = c64(0.7, -0.2);
        spec.b2 = c64(1.3, 0.0);
        spec.gamma[(0, 0)] = c64(0.1, 0.2);
        spec.gamma[(1, 1)] = -spec.gamma[(0, 0)];
        let sol = build_nls_soliton(&spec).unwrap();
        assert_eq!(sol.sign.sign, 1.0);
        assert!(sol.sign.mismatch < 1e-10, "{}", sol.sign.mismatch);
    }

    #[test]
    fn nls_b_is_static_when_k_vanishes() {
        let mut spec = SolitonSpec::nls_symmetric();
        spec.symmetric = false;
        spec.a_op = c64(0.0, 0.0);
        spec.a_zeta = c64(1.0, 0.0);
        spec.a = c64(1.0, 0.0);
        let sol = build_nls_soliton(&spec).unwrap();
        assert_eq!(sol.k, c64(0.0, 0.0));
        assert!(norm_max(&(sol.realization.propagate_b(0.7, 0.3).unwrap() - sol.realization.b0())) < 1e-15);
    }

    #[test]
    fn symmetric_invariants_enforced() {
        let mut spec = SolitonSpec::nls_symmetric();
        spec.c2 = c64(2.0, 0.0);
        assert!(matches!(build_nls_soliton(&spec), Err(Error::InvariantViolation(_))));
        let mut spec = SolitonSpec::nls_symmetric();
        spec.gamma[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(build_nls_soliton(&spec), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn kdv_default_preset() {
        let sol = build_kdv_soliton(&SolitonSpec::kdv_default()).unwrap();
        assert_eq!(sol.sign.sign, -1.0);
        assert!(sol.sign.agrees());
        // γ = [[0, i], [0, 0]], A = 1: k = sqrt(i), b₁ = i(b₂)ₓ.
        assert!((sol.k - c64(0.0, 1.0).sqrt()).norm() < 1e-15);
        for (x, t) in grid_points() {
            let ev = sol.realization.evaluate(x, t).unwrap();
            let closed = sol.closed_form(x, t);
            assert!((ev.h0[(0, 1)] + closed).norm() <= 1e-9 * closed.norm());
            assert!(norm_max(&(sol.realization.propagate_b(x, t).unwrap() - sol.b(x, t))) < 1e-12);
            assert!(norm_max(&(sol.realization.propagate_c(x, t).unwrap() - sol.c(x, t))) < 1e-12);
        }
        assert!(sol.realization.evaluate(0.0, 0.0).is_err());
    }

    #[test]
    fn kdv_preconditions() {
        let mut spec = SolitonSpec::kdv_default();
        spec.a_zeta = c64(-1.0, 0.0);
        assert!(matches!(build_kdv_soliton(&spec), Err(Error::InvariantViolation(_))));
        let mut spec = SolitonSpec::kdv_default();
        spec.gamma[(0, 1)] = c64(0.0, 0.0);
        assert_eq!(build_kdv_soliton(&spec).unwrap_err(), Error::GammaTwelveZero);
    }

    #[test]
    fn kdv_general_gamma_matches_up_to_sign() {
        let mut spec = SolitonSpec::kdv_default();
        spec.gamma = from_complex(2, 2, &[c64(0.3, 0.1), c64(0.2, 1.0), c64(0.5, -0.2), c64(-0.3, -0.1)]);
        spec.b2 = c64(0.4, 0.2);
        spec.c2 = c64(-0.3, 0.5);
        spec.a_op = c64(1.2, 0.3);
        let sol = build_kdv_soliton(&spec).unwrap();
        assert_eq!(sol.sign.sign, -1.0);
        assert!(sol.sign.agrees(), "{}", sol.sign.mismatch);
    }

    #[test]
    fn sqrt_branch() {
        assert_eq!(principal_sqrt(c64(-4.0, -0.0)), c64(0.0, 2.0));
        assert_eq!(principal_sqrt(c64(4.0, 0.0)), c64(2.0, 0.0));
    }
}
