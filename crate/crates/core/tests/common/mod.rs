#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vesselkit_core::matcore::{c64, identity, ComplexMatrix};
use vesselkit_core::params::VesselParameters;
use vesselkit_core::vessel::Realization;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn crand(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn cscalar(rng: &mut ChaCha8Rng) -> Complex64 {
    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Moderate random parameters with `σ₁` near the identity.
pub fn random_params(rng: &mut ChaCha8Rng, e: usize) -> VesselParameters {
    let sigma1 = identity(e) + crand(rng, e, e) * c64(0.3, 0.0);
    let sigma2 = crand(rng, e, e) * c64(0.5, 0.0);
    let gamma = crand(rng, e, e) * c64(0.5, 0.0);
    VesselParameters::new(sigma1, sigma2, gamma).unwrap()
}

/// Random realization with spectra of `A` and `A_ζ` clustered around 1.5,
/// so `spec(A)` and `−spec(A_ζ)` stay well apart.
pub fn random_vessel(rng: &mut ChaCha8Rng, n: usize, params: VesselParameters) -> Realization {
    let e = params.dim();
    let shift = identity(n) * c64(1.5, 0.0);
    let a = &shift + crand(rng, n, n) * c64(0.5, 0.0);
    let a_zeta = &shift + crand(rng, n, n) * c64(0.5, 0.0);
    let b0 = crand(rng, n, e);
    let c0 = crand(rng, e, n);
    Realization::new(a, a_zeta, b0, c0, params, (0.0, 0.0)).unwrap()
}

/// Largest `|z|` over a matrix, relative to `scale` when it is positive.
pub fn rel_dev(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
