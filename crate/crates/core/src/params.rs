//! Vessel parameters, the two external equivalence transformations and the
//! reduction of 2×2 parameters to canonical form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{
    c64, det, ensure_finite, ensure_square, from_real, identity, inverse, jordan_2x2, norm_fro,
    norm_max, trace, zeros, ComplexMatrix,
};

/// The constant triple `(σ₁, σ₂, γ)`; `σ₁` must be invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselParameters {
    pub sigma1: ComplexMatrix,
    pub sigma2: ComplexMatrix,
    pub gamma: ComplexMatrix,
}

impl VesselParameters {
    pub fn new(sigma1: ComplexMatrix, sigma2: ComplexMatrix, gamma: ComplexMatrix) -> Result<Self> {
        for (m, name) in [(&sigma1, "sigma1"), (&sigma2, "sigma2"), (&gamma, "gamma")] {
            ensure_square(m, name)?;
            ensure_finite(m)?;
        }
        let e = sigma1.nrows();
        if sigma2.nrows() != e || gamma.nrows() != e {
            return Err(Error::Dimension(
                "sigma1, sigma2 and gamma must share the outer dimension".into(),
            ));
        }
        let d = det(&sigma1)?.norm();
        let scale = norm_fro(&sigma1).powi(e as i32);
        if !(d > 1e-12 * scale) {
            return Err(Error::InvalidParameters(
                "sigma1 must be invertible (|det sigma1| <= 1e-12 * |sigma1|^E)".into(),
            ));
        }
        Ok(Self { sigma1, sigma2, gamma })
    }

    /// Outer-space dimension `E`.
    pub fn dim(&self) -> usize {
        self.sigma1.nrows()
    }

    pub fn sigma1_inv(&self) -> ComplexMatrix {
        inverse(&self.sigma1).expect("sigma1 invertibility is a construction invariant")
    }

    /// Classical KdV triple `σ₁ = [[0,1],[1,0]]`, `σ₂ = diag(1,0)`, `γ = diag(0,i)`.
    pub fn classical_kdv() -> Self {
        let mut gamma = zeros(2, 2);
        gamma[(1, 1)] = c64(0.0, 1.0);
        Self::new(
            from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            gamma,
        )
        .expect("valid preset")
    }

    /// ENLS triple `(I, ½ diag(1,−1), 0)`.
    pub fn enls() -> Self {
        Self::new(identity(2), from_real(2, 2, &[0.5, 0.0, 0.0, -0.5]), zeros(2, 2))
            .expect("valid preset")
    }

    /// Canonical-systems triple `σ₁ = [[0,i],[−i,0]]`, `σ₂ = I`, `γ = 0`.
    pub fn canonical_systems() -> Self {
        let i = c64(0.0, 1.0);
        let z = c64(0.0, 0.0);
        let sigma1 = ComplexMatrix::from_row_slice(2, 2, &[z, i, -i, z]);
        Self::new(sigma1, identity(2), zeros(2, 2)).expect("valid preset")
    }

    /// Generalized NLS parameters `(I, diag(a,−a), γ)`.
    pub fn generalized_nls(a: Complex64, gamma: ComplexMatrix) -> Result<Self> {
        let mut s2 = zeros(2, 2);
        s2[(0, 0)] = a;
        s2[(1, 1)] = -a;
        Self::new(identity(2), s2, gamma)
    }

    /// Generalized KdV parameters `(I, [[0,0],[1,0]], γ)`.
    pub fn generalized_kdv(gamma: ComplexMatrix) -> Result<Self> {
        Self::new(identity(2), kdv_sigma2(), gamma)
    }
}

fn kdv_sigma2() -> ComplexMatrix {
    from_real(2, 2, &[0.0, 0.0, 1.0, 0.0])
}

fn check_transform(m: &ComplexMatrix, e: usize, name: &str) -> Result<()> {
    if m.nrows() != e || m.ncols() != e {
        return Err(Error::InvalidTransform(format!("{name} must be {e}x{e}")));
    }
    inverse(m).map_err(|_| Error::InvalidTransform(format!("{name} is singular")))?;
    Ok(())
}

/// External transformation of the first kind: `(Uσ₁V, Uσ₂V, UγV)`.
pub fn external_first(
    p: &VesselParameters,
    u: &ComplexMatrix,
    v: &ComplexMatrix,
) -> Result<VesselParameters> {
    let e = p.dim();
    check_transform(u, e, "U")?;
    check_transform(v, e, "V")?;
    let map = |m: &ComplexMatrix| u * m * v;
    VesselParameters::new(map(&p.sigma1), map(&p.sigma2), map(&p.gamma))
}

/// External transformation of the second kind: `(σ₁, σ₂ + k₂σ₁, γ + kσ₁)`.
pub fn external_second(p: &VesselParameters, k2: Complex64, k: Complex64) -> VesselParameters {
    VesselParameters {
        sigma1: p.sigma1.clone(),
        sigma2: &p.sigma2 + &p.sigma1 * k2,
        gamma: &p.gamma + &p.sigma1 * k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalKind {
    GeneralizedNls,
    GeneralizedKdv,
    Degenerate,
}

impl CanonicalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CanonicalKind::GeneralizedNls => "generalized_nls",
            CanonicalKind::GeneralizedKdv => "generalized_kdv",
            CanonicalKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalClass {
    pub kind: CanonicalKind,
    /// Present iff the kind is generalized NLS.
    pub a: Option<Complex64>,
    /// Traceless canonical `γ`; absent iff degenerate.
    pub gamma: Option<ComplexMatrix>,
}

impl CanonicalClass {
    /// The canonical triple, when the class is not degenerate.
    pub fn parameters(&self) -> Option<VesselParameters> {
        match self.kind {
            CanonicalKind::GeneralizedNls => {
                VesselParameters::generalized_nls(self.a?, self.gamma.clone()?).ok()
            }
            CanonicalKind::GeneralizedKdv => {
                VesselParameters::generalized_kdv(self.gamma.clone()?).ok()
            }
            CanonicalKind::Degenerate => None,
        }
    }
}

/// `external_second(external_first(p, U, V), k2, k)` reproduces the canonical triple.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformRecord {
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
    pub k2: Complex64,
    pub k: Complex64,
}

impl TransformRecord {
    pub fn replay(&self, p: &VesselParameters) -> Result<VesselParameters> {
        let first = external_first(p, &self.u, &self.v)?;
        Ok(external_second(&first, self.k2, self.k))
    }
}

/// Relative tolerance for recognising a scalar `σ₁⁻¹σ₂`.
const SCALAR_TOL: f64 = 1e-10;

/// Reduces a 2×2 parameter triple to canonical form.
///
/// Steps: normalize `σ₁ = I` with `U = σ₁⁻¹`; bring `σ₂` to Jordan form with
/// `U = V_J⁻¹, V = V_J`; remove traces with the second-kind transformation;
/// in the defective case swap the basis so the nilpotent entry sits at
/// `(2,1)` and scale it to exactly one.
pub fn canonicalize(p: &VesselParameters) -> Result<(CanonicalClass, TransformRecord)> {
    if p.dim() != 2 {
        return Err(Error::Dimension("canonicalize expects 2x2 parameters".into()));
    }
    let s1_inv = p.sigma1_inv();
    let mut u_total = s1_inv.clone();
    let mut v_total = identity(2);
    let mut current = external_first(p, &u_total, &v_total)?;

    let s2 = &current.sigma2;
    let shift = trace(s2) * 0.5;
    let off = s2 - identity(2) * shift;
    if norm_max(&off) <= SCALAR_TOL * (1.0 + norm_max(s2)) {
        let k2 = -shift;
        let k = -trace(&current.gamma) * 0.5;
        let class = CanonicalClass { kind: CanonicalKind::Degenerate, a: None, gamma: None };
        return Ok((class, TransformRecord { u: u_total, v: v_total, k2, k }));
    }

    let jd = jordan_2x2(s2)?;
    let vj_inv = inverse(&jd.v)?;
    current = external_first(&current, &vj_inv, &jd.v)?;
    u_total = &vj_inv * &u_total;
    v_total = &v_total * &jd.v;

    let k2 = -trace(&current.sigma2) * 0.5;
    let k = -trace(&current.gamma) * 0.5;
    current = external_second(&current, k2, k);

    let kind = if jd.defective {
        // [[0,1],[0,0]] -> [[0,0],[1,0]] via the swap, then scale the (2,1) entry to 1.
        let swap = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        current = external_first(&current, &swap, &swap)?;
        u_total = &swap * &u_total;
        v_total = &v_total * &swap;
        let m21 = current.sigma2[(1, 0)];
        let mut d = identity(2);
        d[(1, 1)] = m21.inv();
        let d_inv = inverse(&d)?;
        current = external_first(&current, &d, &d_inv)?;
        u_total = &d * &u_total;
        v_total = &v_total * &d_inv;
        CanonicalKind::GeneralizedKdv
    } else {
        CanonicalKind::GeneralizedNls
    };

    let mut gamma = current.gamma.clone();
    // Exactly traceless: fold the rounding residue into the (2,2) entry.
    gamma[(1, 1)] = -gamma[(0, 0)];
    let a = match kind {
        CanonicalKind::GeneralizedNls => Some(current.sigma2[(0, 0)]),
        _ => None,
    };
    let class = CanonicalClass { kind, a, gamma: Some(gamma) };
    Ok((class, TransformRecord { u: u_total, v: v_total, k2, k }))
}

pub fn classify(p: &VesselParameters) -> Result<CanonicalKind> {
    canonicalize(p).map(|(class, _)| class.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{from_complex, norm_max};
    use proptest::prelude::*;

    fn i() -> Complex64 {
        c64(0.0, 1.0)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        norm_max(&(a - b)) <= tol
    }

    fn assert_replay(p: &VesselParameters) {
        let (class, rec) = canonicalize(p).unwrap();
        let replayed = rec.replay(p).unwrap();
        let target = class.parameters().unwrap();
        assert!(close(&replayed.sigma1, &target.sigma1, 1e-12));
        assert!(close(&replayed.sigma2, &target.sigma2, 1e-12));
        assert!(close(&replayed.gamma, &target.gamma, 1e-12));
    }

    #[test]
    fn first_kind_identity() {
        let p = VesselParameters::classical_kdv();
        assert_eq!(external_first(&p, &identity(2), &identity(2)).unwrap(), p);
        let q = VesselParameters::enls();
        assert_eq!(external_first(&q, &identity(2), &identity(2)).unwrap(), q);
    }

    #[test]
    fn first_kind_normalizes_classical_kdv() {
        let p = VesselParameters::classical_kdv();
        let u = inverse(&p.sigma1).unwrap();
        let out = external_first(&p, &u, &identity(2)).unwrap();
        assert_eq!(out.sigma1, identity(2));
        assert_eq!(out.sigma2, from_real(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        let z = c64(0.0, 0.0);
        assert_eq!(out.gamma, from_complex(2, 2, &[z, i(), z, z]));
    }

    #[test]
    fn first_kind_singular_rejected() {
        let p = VesselParameters::enls();
        let u = from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            external_first(&p, &u, &identity(2)),
            Err(Error::InvalidTransform(_))
        ));
    }

    #[test]
    fn second_kind_examples() {
        let p = VesselParameters::enls();
        assert_eq!(external_second(&p, c64(0.0, 0.0), c64(0.0, 0.0)), p);

        let mut g = zeros(2, 2);
        g[(1, 1)] = i();
        let p = VesselParameters::new(identity(2), from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]), g)
            .unwrap();
        let out = external_second(&p, c64(-0.5, 0.0), c64(0.0, -0.5));
        assert_eq!(out.sigma2, from_real(2, 2, &[0.5, 0.0, 0.0, -0.5]));
        let z = c64(0.0, 0.0);
        assert_eq!(out.gamma, from_complex(2, 2, &[c64(0.0, -0.5), z, z, c64(0.0, 0.5)]));
    }

    #[test]
    fn singular_sigma1_rejected() {
        let r = VesselParameters::new(from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]), identity(2), zeros(2, 2));
        assert!(matches!(r, Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn canonical_classical_kdv() {
        let p = VesselParameters::classical_kdv();
        let (class, _) = canonicalize(&p).unwrap();
        assert_eq!(class.kind, CanonicalKind::GeneralizedKdv);
        let z = c64(0.0, 0.0);
        assert_eq!(class.gamma.unwrap(), from_complex(2, 2, &[z, i(), z, z]));
        assert_replay(&p);
        assert_eq!(classify(&p).unwrap(), CanonicalKind::GeneralizedKdv);
    }

    #[test]
    fn canonical_enls() {
        let p = VesselParameters::enls();
        let (class, _) = canonicalize(&p).unwrap();
        assert_eq!(class.kind, CanonicalKind::GeneralizedNls);
        assert_eq!(class.a, Some(c64(0.5, 0.0)));
        assert_eq!(class.gamma.unwrap(), zeros(2, 2));
        assert_replay(&p);
    }

    #[test]
    fn canonical_systems_are_nls() {
        let p = VesselParameters::canonical_systems();
        let (class, _) = canonicalize(&p).unwrap();
        assert_eq!(class.kind, CanonicalKind::GeneralizedNls);
        assert!((class.a.unwrap() - c64(1.0, 0.0)).norm() < 1e-14);
        assert!(norm_max(&class.gamma.unwrap()) < 1e-15);
        assert_replay(&p);
    }

    #[test]
    fn scalar_sigma2_is_degenerate() {
        let g = from_complex(2, 2, &[c64(1.0, 2.0), c64(0.3, 0.0), c64(-1.0, 0.5), c64(0.0, 4.0)]);
        let p = VesselParameters::new(identity(2), identity(2) * c64(3.0, 0.0), g).unwrap();
        assert_eq!(classify(&p).unwrap(), CanonicalKind::Degenerate);
        let (class, _) = canonicalize(&p).unwrap();
        assert!(class.gamma.is_none() && class.a.is_none());
    }

    #[test]
    fn canonical_output_is_fixed_point() {
        for p in [
            VesselParameters::classical_kdv(),
            VesselParameters::enls(),
            VesselParameters::canonical_systems(),
        ] {
            let (class, _) = canonicalize(&p).unwrap();
            let canon = class.parameters().unwrap();
            let (again, _) = canonicalize(&canon).unwrap();
            assert_eq!(again.kind, class.kind);
            assert!(close(&again.gamma.clone().unwrap(), &class.gamma.clone().unwrap(), 1e-12));
            if let (Some(a1), Some(a2)) = (again.a, class.a) {
                assert!((a1 - a2).norm() < 1e-12);
            }
        }
    }

    fn cplx() -> impl Strategy<Value = Complex64> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c64(re, im))
    }

    fn mat2() -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec(cplx(), 4).prop_map(|v| from_complex(2, 2, &v))
    }

    fn invertible2() -> impl Strategy<Value = ComplexMatrix> {
        mat2().prop_map(|m| m + identity(2) * c64(2.5, 0.0))
    }

    proptest! {
        #[test]
        fn kind_is_equivalence_invariant(
            s1 in invertible2(), s2 in mat2(), g in mat2(),
            u in invertible2(), v in invertible2(), k2 in cplx(), k in cplx(),
        ) {
            let p = VesselParameters::new(s1, s2, g).unwrap();
            let q = external_second(&external_first(&p, &u, &v).unwrap(), k2, k);
            let (kp, kq) = (classify(&p).unwrap(), classify(&q).unwrap());
            if kp != CanonicalKind::Degenerate && kq != CanonicalKind::Degenerate {
                prop_assert_eq!(kp, kq);
            }
        }

        #[test]
        fn replay_and_templates(s1 in invertible2(), s2 in mat2(), g in mat2()) {
            let p = VesselParameters::new(s1, s2, g).unwrap();
            let (class, rec) = canonicalize(&p).unwrap();
            prop_assume!(class.kind != CanonicalKind::Degenerate);
            let target = class.parameters().unwrap();
            let replayed = rec.replay(&p).unwrap();
            let scale = 1.0 + norm_max(&rec.u) * norm_max(&rec.v) * (norm_max(&p.sigma2) + norm_max(&p.gamma) + norm_max(&p.sigma1));
            prop_assert!(close(&replayed.sigma1, &target.sigma1, 1e-12 * scale));
            prop_assert!(close(&replayed.sigma2, &target.sigma2, 1e-12 * scale));
            prop_assert!(close(&replayed.gamma, &target.gamma, 1e-12 * scale));
            let gamma = class.gamma.unwrap();
            prop_assert!(trace(&gamma).norm() <= 1e-12);
            if class.kind == CanonicalKind::GeneralizedNls {
                prop_assert!(class.a.unwrap().norm() > 0.0);
            }
        }

        #[test]
        fn second_kind_is_additive(s2 in mat2(), g in mat2(), a in cplx(), b in cplx(), c in cplx(), d in cplx()) {
            let p = VesselParameters::new(identity(2) * c64(1.5, 0.5), s2, g).unwrap();
            let lhs = external_second(&external_second(&p, a, b), c, d);
            let rhs = external_second(&p, a + c, b + d);
            prop_assert!(close(&lhs.sigma2, &rhs.sigma2, 1e-14));
            prop_assert!(close(&lhs.gamma, &rhs.gamma, 1e-14));
        }

        #[test]
        fn first_kind_is_involutive(s2 in mat2(), g in mat2(), u in invertible2(), v in invertible2()) {
            let p = VesselParameters::new(identity(2), s2, g).unwrap();
            let q = external_first(&p, &u, &v).unwrap();
            let back = external_first(&q, &inverse(&u).unwrap(), &inverse(&v).unwrap()).unwrap();
            prop_assert!(close(&back.sigma2, &p.sigma2, 1e-12));
            prop_assert!(close(&back.gamma, &p.gamma, 1e-12));
        }
    }
}
