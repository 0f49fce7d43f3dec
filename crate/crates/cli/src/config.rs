//! Experiment configuration.
//!
//! Complex scalars are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. A parsed config is resolved once: every default is
//! written into the struct, and the resolved form serializes back to an
//! equivalent config, so `resolved_config.json` reruns to identical outputs.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use vesselkit_core::matcore::{c64, ComplexMatrix};
use vesselkit_core::params::VesselParameters;
use vesselkit_core::solitons::{SolitonKind, SolitonSpec};
use vesselkit_core::vessel::DEFAULT_TAU_MIN;

pub type Pair = [f64; 2];
pub type Rows = Vec<Vec<Pair>>;

pub fn to_complex(p: Pair) -> Complex64 {
    c64(p[0], p[1])
}

pub fn to_pair(z: Complex64) -> Pair {
    // Adding zero folds -0.0 into 0.0 so outputs do not depend on rounding signs.
    [z.re + 0.0, z.im + 0.0]
}

pub fn to_matrix(rows: &Rows, what: &str) -> Result<ComplexMatrix, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(format!("{what} must be a non-empty matrix"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(format!("{what} has rows of unequal length"));
    }
    let entries: Vec<Complex64> = rows.iter().flatten().map(|&p| to_complex(p)).collect();
    Ok(ComplexMatrix::from_row_slice(r, c, &entries))
}

pub fn to_rows(m: &ComplexMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParametersConfig {
    /// `classical_kdv`, `enls` or `canonical_systems`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Rows>,
}

impl ParametersConfig {
    pub fn build(&self) -> Result<VesselParameters, String> {
        if let Some(name) = &self.preset {
            if self.sigma1.is_some() || self.sigma2.is_some() || self.gamma.is_some() {
                return Err("parameters: give either a preset or explicit matrices, not both".into());
            }
            return match name.as_str() {
                "classical_kdv" => Ok(VesselParameters::classical_kdv()),
                "enls" => Ok(VesselParameters::enls()),
                "canonical_systems" => Ok(VesselParameters::canonical_systems()),
                other => Err(format!("parameters: unknown preset {other:?}")),
            };
        }
        let get = |m: &Option<Rows>, name: &str| {
            m.as_ref().ok_or_else(|| format!("parameters: missing {name}")).and_then(|r| to_matrix(r, name))
        };
        VesselParameters::new(get(&self.sigma1, "sigma1")?, get(&self.sigma2, "sigma2")?, get(&self.gamma, "gamma")?)
            .map_err(|e| format!("parameters: {e}"))
    }

    pub fn explicit(p: &VesselParameters) -> Self {
        Self {
            preset: None,
            sigma1: Some(to_rows(&p.sigma1)),
            sigma2: Some(to_rows(&p.sigma2)),
            gamma: Some(to_rows(&p.gamma)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRealization {
    pub a: Rows,
    pub a_zeta: Rows,
    pub b0: Rows,
    pub c0: Rows,
}

/// A soliton preset with optional overrides of individual fields.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolitonConfig {
    /// `generalized_kdv` or `generalized_nls`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_op: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_zeta: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
}

impl SolitonConfig {
    pub fn build(&self) -> Result<SolitonSpec, String> {
        let mut spec = match self.kind.as_str() {
            "generalized_kdv" => SolitonSpec::kdv_default(),
            "generalized_nls" => SolitonSpec::nls_symmetric(),
            other => return Err(format!("soliton: unknown kind {other:?}")),
        };
        let set = |slot: &mut Complex64, v: Option<Pair>| {
            if let Some(p) = v {
                *slot = to_complex(p);
            }
        };
        set(&mut spec.a_op, self.a_op);
        set(&mut spec.a_zeta, self.a_zeta);
        set(&mut spec.a, self.a);
        set(&mut spec.b1, self.b1);
        set(&mut spec.b2, self.b2);
        set(&mut spec.c1, self.c1);
        set(&mut spec.c2, self.c2);
        if let Some(g) = &self.gamma {
            let g = to_matrix(g, "soliton gamma")?;
            if g.shape() != (2, 2) {
                return Err("soliton gamma must be 2x2".into());
            }
            spec.gamma = g;
        }
        if let Some(s) = self.symmetric {
            spec.symmetric = s;
        }
        Ok(spec)
    }

    pub fn explicit(spec: &SolitonSpec) -> Self {
        let kind = match spec.kind {
            SolitonKind::GeneralizedKdv => "generalized_kdv",
            SolitonKind::GeneralizedNls => "generalized_nls",
        };
        Self {
            kind: kind.into(),
            a_op: Some(to_pair(spec.a_op)),
            a_zeta: Some(to_pair(spec.a_zeta)),
            a: Some(to_pair(spec.a)),
            gamma: Some(to_rows(&spec.gamma)),
            b1: Some(to_pair(spec.b1)),
            b2: Some(to_pair(spec.b2)),
            c1: Some(to_pair(spec.c1)),
            c2: Some(to_pair(spec.c2)),
            symmetric: Some(spec.symmetric),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitRealization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soliton: Option<SolitonConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x: [f64; 2],
    pub t: [f64; 2],
    pub dx: f64,
    pub dt: f64,
}

/// Either a bare name or `{"moments": N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observable {
    Name(String),
    Moments { moments: usize },
}

pub const OBSERVABLES: [&str; 10] =
    ["tau", "q", "beta", "beta_tau", "h11", "h12", "h21", "h22", "gamma_star", "det_x"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Number of moment recurrences (`moments`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Spectral parameter (`backlund`, `input_wave`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Pair>,
    /// Input vector (`backlund`, `input_wave`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<Pair>>,
    /// Fixed matrix and moment index (`trace`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Spectral parameters (`s_inverse`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<Pair>>,
}

/// Either a bare check name or a full check object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckEntry {
    Name(String),
    Full(CheckConfig),
}

pub const CHECKS: [&str; 14] = [
    "kdv",
    "enls",
    "cansys",
    "kdv_gen",
    "nls_gen",
    "moments",
    "gamma_star",
    "trace",
    "backlund",
    "input_wave",
    "kdv_identities",
    "s_inverse",
    "h0_invariance",
    "soliton_closed_form",
];

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    First { u: Rows, v: Rows },
    Second { k2: Pair, k: Pair },
    Internal { u: Rows, v: Rows },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AccuracyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParametersConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<RealizationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformConfig>,
    /// Radius around singular nodes excluded from derivatives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halving: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Fills every default and checks names and shapes. Idempotent.
    pub fn resolve(&mut self) -> Result<(), String> {
        if let Some(real) = &mut self.realization {
            match (&real.explicit, &real.soliton) {
                (Some(_), Some(_)) => return Err("realization: give explicit or soliton, not both".into()),
                (None, None) => return Err("realization: needs explicit or soliton".into()),
                (None, Some(s)) => {
                    let spec = s.build()?;
                    let derived = match spec.kind {
                        SolitonKind::GeneralizedKdv => VesselParameters::generalized_kdv(spec.gamma.clone()),
                        SolitonKind::GeneralizedNls => VesselParameters::generalized_nls(spec.a, spec.gamma.clone()),
                    }
                    .map_err(|e| format!("soliton: {e}"))?;
                    if let Some(p) = &self.parameters {
                        if p.build()? != derived {
                            return Err("parameters disagree with the soliton preset".into());
                        }
                    }
                    self.parameters = Some(ParametersConfig::explicit(&derived));
                    real.soliton = Some(SolitonConfig::explicit(&spec));
                    if real.anchor.is_some_and(|a| a != [0.0, 0.0]) {
                        return Err("soliton realizations are anchored at (0, 0)".into());
                    }
                }
                (Some(_), None) => {}
            }
            real.anchor.get_or_insert([0.0, 0.0]);
            let tau_min = *real.tau_min.get_or_insert(DEFAULT_TAU_MIN);
            if !(tau_min >= 0.0 && tau_min.is_finite()) {
                return Err("realization: tau_min must be a non-negative number".into());
            }
        }
        if let Some(p) = &self.parameters {
            let built = p.build()?;
            self.parameters = Some(ParametersConfig::explicit(&built));
        }
        if let Some(g) = &self.grid {
            if !(g.dx > 0.0 && g.dt > 0.0 && g.x[1] > g.x[0] && g.t[1] > g.t[0]) {
                return Err("grid: need x0 < x1, t0 < t1 and positive steps".into());
            }
        }
        for o in &self.observables {
            if let Observable::Name(n) = o {
                if !OBSERVABLES.contains(&n.as_str()) {
                    return Err(format!("unknown observable {n:?}"));
                }
            }
        }
        let mut checks = Vec::with_capacity(self.checks.len());
        for entry in self.checks.drain(..) {
            let mut c = match entry {
                CheckEntry::Name(name) => CheckConfig {
                    name,
                    tolerance: None,
                    count: None,
                    lambda: None,
                    u0: None,
                    k: None,
                    n: None,
                    lambdas: None,
                },
                CheckEntry::Full(c) => c,
            };
            if !CHECKS.contains(&c.name.as_str()) {
                return Err(format!("unknown check {:?}", c.name));
            }
            c.tolerance.get_or_insert(DEFAULT_TOLERANCE);
            let e = self.parameters.as_ref().map(|p| p.build().map(|p| p.dim())).transpose()?.unwrap_or(2);
            match c.name.as_str() {
                "moments" => {
                    c.count.get_or_insert(3);
                }
                "trace" => {
                    c.n.get_or_insert(0);
                    c.k.get_or_insert_with(|| to_rows(&vesselkit_core::matcore::identity(e)));
                }
                "backlund" | "input_wave" => {
                    c.lambda.get_or_insert([1.0, 2.0]);
                    c.u0.get_or_insert_with(|| (0..e).map(|i| if i == 0 { [1.0, 0.0] } else { [0.0, 0.0] }).collect());
                }
                "s_inverse" => {
                    c.lambdas.get_or_insert_with(|| vec![[1.0, 2.0], [-3.0, 0.5], [0.0, -4.0]]);
                }
                _ => {}
            }
            checks.push(CheckEntry::Full(c));
        }
        self.checks = checks;
        if let Some(r) = self.exclusion_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err("exclusion_radius must be a non-negative number".into());
            }
        }
        self.exclusion_radius.get_or_insert(0.0);
        let acc = self.accuracy.get_or_insert_with(AccuracyConfig::default);
        for (v, default, axis) in [(&mut acc.x, 4, "x"), (&mut acc.t, 2, "t")] {
            let v = *v.get_or_insert(default);
            if v != 2 && v != 4 {
                return Err(format!("accuracy.{axis} must be 2 or 4"));
            }
        }
        self.halving.get_or_insert(false);
        let out = self.output.get_or_insert_with(OutputConfig::default);
        out.dir.get_or_insert_with(|| PathBuf::from("out"));
        out.stem.get_or_insert_with(String::new);
        Ok(())
    }

    /// Resolved check objects.
    pub fn check_configs(&self) -> Vec<&CheckConfig> {
        self.checks
            .iter()
            .map(|c| match c {
                CheckEntry::Full(c) => c,
                CheckEntry::Name(_) => unreachable!("checks are resolved before use"),
            })
            .collect()
    }
}
