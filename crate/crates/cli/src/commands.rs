//! The three subcommands.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use vesselkit_core::matcore::{identity, inverse, norm_max, ComplexMatrix, ComplexVector};
use vesselkit_core::params::{canonicalize, VesselParameters};
use vesselkit_core::pdecheck::{
    check_backlund, check_gamma_star_evolution, check_input_wave, check_kdv_identities, check_moment_recurrence,
    check_trace_relations, combined_ratio, observables_from_tau, residual_pde, Accuracy, Constants, EquationId,
    Fields, Grid, Residual, ScalarField, Stencils, VesselGrid,
};
use vesselkit_core::solitons::{build_kdv_soliton, build_nls_soliton, SolitonKind};
use vesselkit_core::vessel::{transform_realization, Realization, Transform};
use vesselkit_core::Error;

use crate::config::{to_complex, to_matrix, to_pair, to_rows, CheckConfig, ExperimentConfig, Observable, TransformConfig};
use crate::output::{json_text, matrix_csv, scalar_csv, write_text};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    SpectraOverlap,
    SingularDominance(String),
    Runtime(String),
    ChecksFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) | CliError::ChecksFailed => 1,
            CliError::Config(_) => 2,
            CliError::SpectraOverlap => 3,
            CliError::SingularDominance(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::SpectraOverlap => write!(f, "{}", Error::SpectraOverlap),
            CliError::SingularDominance(m) => write!(f, "more than half of the grid is singular: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
            CliError::ChecksFailed => write!(f, "one or more checks exceeded their tolerance"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SpectraOverlap => CliError::SpectraOverlap,
            Error::SingularX { .. } => CliError::SingularDominance(e.to_string()),
            Error::Dimension(_)
            | Error::NonFinite
            | Error::InvalidParameters(_)
            | Error::InvalidTransform(_)
            | Error::InvalidGrid(_)
            | Error::StencilTooWide { .. }
            | Error::PoleAtLambda(_)
            | Error::GammaTwelveZero
            | Error::InvariantViolation(_)
            | Error::MissingField(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(CliError::Config)?;
    cfg.resolve().map_err(CliError::Config)?;
    Ok(cfg)
}

fn parameters(cfg: &ExperimentConfig) -> CliResult<VesselParameters> {
    cfg.parameters.as_ref().ok_or_else(|| config("parameters section missing"))?.build().map_err(CliError::Config)
}

pub fn classify(cfg: &ExperimentConfig) -> CliResult<Value> {
    let p = parameters(cfg)?;
    let (class, record) = canonicalize(&p)?;
    Ok(json!({
        "kind": class.kind.as_str(),
        "a": class.a.map(to_pair),
        "gamma": class.gamma.as_ref().map(to_rows),
        "transform": {
            "U": to_rows(&record.u),
            "V": to_rows(&record.v),
            "k2": to_pair(record.k2),
            "k": to_pair(record.k),
        },
    }))
}

#[derive(Debug, Clone, Serialize)]
struct SolitonInfo {
    kind: &'static str,
    sign: f64,
    mismatch: f64,
    agrees: bool,
}

/// The realization plus the closed-form evaluator of a soliton preset.
struct Built {
    realization: Realization,
    soliton: Option<SolitonInfo>,
    closed_form: Option<Box<dyn Fn(f64, f64) -> Complex64>>,
}

fn build(cfg: &ExperimentConfig) -> CliResult<Built> {
    let real = cfg.realization.as_ref().ok_or_else(|| config("realization section missing"))?;
    let tau_min = real.tau_min.expect("resolved");
    if let Some(s) = &real.soliton {
        let spec = s.build().map_err(CliError::Config)?;
        return Ok(match spec.kind {
            SolitonKind::GeneralizedKdv => {
                let sol = build_kdv_soliton(&spec)?;
                let info = SolitonInfo {
                    kind: "generalized_kdv",
                    sign: sol.sign.sign,
                    mismatch: sol.sign.mismatch,
                    agrees: sol.sign.agrees(),
                };
                let realization = sol.realization.clone().with_tau_min(tau_min);
                let sign = sol.sign.sign;
                Built {
                    realization,
                    soliton: Some(info),
                    closed_form: Some(Box::new(move |x, t| sol.closed_form(x, t) * sign)),
                }
            }
            SolitonKind::GeneralizedNls => {
                let sol = build_nls_soliton(&spec)?;
                let info = SolitonInfo {
                    kind: "generalized_nls",
                    sign: sol.sign.sign,
                    mismatch: sol.sign.mismatch,
                    agrees: sol.sign.agrees(),
                };
                let realization = sol.realization.clone().with_tau_min(tau_min);
                let sign = sol.sign.sign;
                Built {
                    realization,
                    soliton: Some(info),
                    closed_form: Some(Box::new(move |x, t| sol.closed_form(x, t).0 * sign)),
                }
            }
        });
    }
    let e = real.explicit.as_ref().ok_or_else(|| config("realization needs explicit matrices or a soliton"))?;
    let m = |rows, name| to_matrix(rows, name).map_err(CliError::Config);
    let anchor = real.anchor.expect("resolved");
    let r = Realization::new(
        m(&e.a, "A")?,
        m(&e.a_zeta, "A_zeta")?,
        m(&e.b0, "B0")?,
        m(&e.c0, "C0")?,
        parameters(cfg)?,
        (anchor[0], anchor[1]),
    )?;
    Ok(Built { realization: r.with_tau_min(tau_min), soliton: None, closed_form: None })
}

fn grid(cfg: &ExperimentConfig) -> CliResult<Grid> {
    let g = cfg.grid.as_ref().ok_or_else(|| config("grid section missing"))?;
    Ok(Grid::spanning(g.x[0], g.x[1], g.t[0], g.t[1], g.dx, g.dt)?)
}

fn stencils(cfg: &ExperimentConfig) -> Stencils {
    let acc = cfg.accuracy.as_ref().expect("resolved");
    let pick = |o: Option<usize>| Accuracy::from_order(o.expect("resolved") as u32).expect("validated");
    Stencils { x: pick(acc.x), t: pick(acc.t) }
}

fn evaluate(cfg: &ExperimentConfig, r: &Realization, g: Grid) -> CliResult<VesselGrid> {
    let vg = VesselGrid::evaluate(r, g)?;
    vg.ensure_mostly_regular()?;
    let radius = cfg.exclusion_radius.expect("resolved");
    Ok(if radius > 0.0 { vg.with_exclusion(radius) } else { vg })
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.as_ref().and_then(|o| o.dir.clone()).expect("resolved")
}

fn file_name(cfg: &ExperimentConfig, name: &str) -> String {
    match cfg.output.as_ref().and_then(|o| o.stem.as_deref()) {
        Some(stem) if !stem.is_empty() => format!("{stem}_{name}"),
        _ => name.to_string(),
    }
}

fn tau_or_det(vg: &VesselGrid) -> ScalarField {
    vg.tau().unwrap_or_else(|| vg.det_x())
}

fn anchor_x(r: &Realization) -> f64 {
    r.anchor().0
}

fn need_two(r: &Realization, what: &str) -> CliResult<()> {
    if r.outer_dim() != 2 {
        return Err(config(format!("{what} needs a 2x2 outer space")));
    }
    Ok(())
}

fn write_resolved(cfg: &ExperimentConfig, dir: &Path) -> CliResult<()> {
    write_text(&dir.join("resolved_config.json"), &json_text(cfg))?;
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig) -> CliResult<Value> {
    let built = build(cfg)?;
    let r = &built.realization;
    let g = grid(cfg)?;
    let raw = VesselGrid::evaluate(r, g)?;
    raw.ensure_mostly_regular()?;
    let singular = raw.singular_count();
    let radius = cfg.exclusion_radius.expect("resolved");
    let vg = if radius > 0.0 { raw.with_exclusion(radius) } else { raw };
    let st = stencils(cfg);
    let dir = out_dir(cfg);
    let mut files: Vec<(String, String)> = Vec::new();
    let tau = vg.tau();
    let mut observables = None;
    let mut obs = |vg: &VesselGrid| -> CliResult<_> {
        if observables.is_none() {
            observables = Some(observables_from_tau(&tau_or_det(vg), anchor_x(r), st)?);
        }
        Ok(observables.clone().expect("just set"))
    };
    for o in &cfg.observables {
        match o {
            Observable::Moments { moments } => {
                for n in 0..=*moments {
                    files.push((format!("H{n}.csv"), matrix_csv(&vg.moment(n))));
                }
            }
            Observable::Name(name) => {
                let csv = match name.as_str() {
                    "tau" => match &tau {
                        Some(t) => scalar_csv(t),
                        None => {
                            let mut nan = vg.det_x();
                            nan.mask.iter_mut().for_each(|m| *m = false);
                            scalar_csv(&nan)
                        }
                    },
                    "det_x" => scalar_csv(&vg.det_x()),
                    "q" => scalar_csv(&obs(&vg)?.q),
                    "beta" => scalar_csv(&obs(&vg)?.beta_log),
                    "beta_tau" => scalar_csv(&obs(&vg)?.beta),
                    "h11" | "h12" | "h21" | "h22" => {
                        need_two(r, name)?;
                        let b = name.as_bytes();
                        scalar_csv(&vg.h0_entry((b[1] - b'1') as usize, (b[2] - b'1') as usize))
                    }
                    "gamma_star" => matrix_csv(&vg.gamma_star()),
                    other => return Err(config(format!("unknown observable {other:?}"))),
                };
                files.push((format!("{name}.csv"), csv));
            }
        }
    }
    let excluded = vg.mask.iter().filter(|m| !**m).count() - singular;
    let tau_valid = tau.as_ref().map_or(0, |t| t.valid_count());
    let mut written = Vec::new();
    for (name, text) in &files {
        let name = file_name(cfg, name);
        write_text(&dir.join(&name), text)?;
        written.push(name);
    }
    let sidecar = json!({
        "command": "simulate",
        "grid": {"x_start": g.x_start, "t_start": g.t_start, "dx": g.dx, "dt": g.dt, "nx": g.nx, "nt": g.nt},
        "nodes": g.len(),
        "singular_nodes": singular,
        "singular_fraction": singular as f64 / g.len() as f64,
        "excluded_nodes": excluded,
        "tau_defined": tau.is_some(),
        "tau_mask": {"valid": tau_valid, "masked": g.len() - tau_valid},
        "soliton": built.soliton,
        "files": written,
    });
    write_text(&dir.join(file_name(cfg, "simulation.json")), &json_text(&sidecar))?;
    write_resolved(cfg, &dir)?;
    Ok(sidecar)
}

#[derive(Debug, Clone, Serialize)]
struct CheckReport {
    equation_id: String,
    max_abs: f64,
    l2: f64,
    interior_node_count: usize,
    h_used: [f64; 2],
    tolerance: f64,
    pass: bool,
}

fn report_of(r: &Residual, tolerance: f64) -> CheckReport {
    let rep = r.report();
    CheckReport {
        equation_id: rep.equation_id.to_string(),
        max_abs: rep.max_abs,
        l2: rep.l2,
        interior_node_count: rep.interior_node_count,
        h_used: [rep.h_used.0, rep.h_used.1],
        tolerance,
        pass: rep.interior_node_count > 0 && rep.max_abs <= tolerance,
    }
}

fn vector(entries: &[[f64; 2]], e: usize) -> CliResult<ComplexVector> {
    if entries.len() != e {
        return Err(config(format!("u0 must have {e} entries")));
    }
    Ok(ComplexVector::from_iterator(e, entries.iter().map(|&p| to_complex(p))))
}

fn nls_a(p: &VesselParameters) -> CliResult<Complex64> {
    let a = p.sigma2[(0, 0)];
    let expected = VesselParameters::generalized_nls(a, p.gamma.clone())?;
    if norm_max(&(&expected.sigma1 - &p.sigma1)) > 1e-12 || norm_max(&(&expected.sigma2 - &p.sigma2)) > 1e-12 {
        return Err(config("nls_gen needs generalized NLS parameters (sigma1 = I, sigma2 = diag(a, -a))"));
    }
    Ok(a)
}

/// Finite-difference residuals of every FD-based check, with tolerances.
fn fd_residuals(cfg: &ExperimentConfig, r: &Realization, g: Grid) -> CliResult<Vec<(Residual, f64)>> {
    let vg = evaluate(cfg, r, g)?;
    let st = stencils(cfg);
    let p = r.params();
    let mut out = Vec::new();
    for c in cfg.check_configs() {
        let tol = c.tolerance.expect("resolved");
        let mut push = |res: Residual| out.push((res, tol));
        let scalar = |id, fields: Fields, consts: Constants| residual_pde(id, &fields, &consts, st);
        match c.name.as_str() {
            "kdv" => {
                let o = observables_from_tau(&tau_or_det(&vg), anchor_x(r), st)?;
                push(scalar(EquationId::Kdv, Fields { q: Some(o.q), ..Default::default() }, Constants::default())?);
            }
            "cansys" => {
                let o = observables_from_tau(&tau_or_det(&vg), anchor_x(r), st)?;
                let f = Fields { beta: Some(o.beta_log), ..Default::default() };
                push(scalar(EquationId::CanSys, f, Constants::default())?);
            }
            "enls" => {
                need_two(r, "enls")?;
                let f = Fields { y: Some(vg.gamma_star().entry(0, 1)), ..Default::default() };
                push(scalar(EquationId::Enls, f, Constants::default())?);
            }
            "kdv_gen" => {
                need_two(r, "kdv_gen")?;
                let f = Fields { h12: Some(vg.h0_entry(0, 1)), ..Default::default() };
                push(scalar(EquationId::KdvGen, f, Constants { gamma: Some(p.gamma.clone()), a: None })?);
            }
            "nls_gen" => {
                need_two(r, "nls_gen")?;
                let a = nls_a(p)?;
                let f = Fields { h12: Some(vg.h0_entry(0, 1)), h21: Some(vg.h0_entry(1, 0)), ..Default::default() };
                push(scalar(EquationId::NlsGen, f, Constants { gamma: Some(p.gamma.clone()), a: Some(a) })?);
            }
            "moments" => {
                for m in check_moment_recurrence(&vg, c.count.expect("resolved"), st)? {
                    push(m.x);
                    push(m.t);
                }
            }
            "gamma_star" => push(check_gamma_star_evolution(&vg, st)?),
            "trace" => {
                let k = to_matrix(c.k.as_ref().expect("resolved"), "K").map_err(CliError::Config)?;
                push(check_trace_relations(&vg, &k, c.n.expect("resolved"), st)?);
            }
            "backlund" | "input_wave" => {
                let lambda = to_complex(c.lambda.expect("resolved"));
                let u0 = vector(c.u0.as_ref().expect("resolved"), p.dim())?;
                let (x, t) = if c.name == "backlund" {
                    check_backlund(&vg, lambda, &u0, st)?
                } else {
                    check_input_wave(r, lambda, &u0, g, st)?
                };
                push(x);
                push(t);
            }
            "kdv_identities" => {
                for res in check_kdv_identities(&vg, st)? {
                    push(res);
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

fn pointwise_report(id: &str, values: &[f64], g: &Grid, tolerance: f64) -> CheckReport {
    let max_abs = values.iter().cloned().fold(0.0, f64::max);
    let l2 = (values.iter().map(|v| v * v).sum::<f64>() * g.dx * g.dt).sqrt();
    CheckReport {
        equation_id: id.into(),
        max_abs,
        l2,
        interior_node_count: values.len(),
        h_used: [g.dx, g.dt],
        tolerance,
        pass: !values.is_empty() && max_abs <= tolerance,
    }
}

fn transform(cfg: &ExperimentConfig) -> CliResult<(Transform, Option<(ComplexMatrix, ComplexMatrix)>)> {
    let t = cfg.transform.as_ref().ok_or_else(|| config("h0_invariance needs a transform block"))?;
    let m = |rows, name| to_matrix(rows, name).map_err(CliError::Config);
    Ok(match t {
        TransformConfig::First { u, v } => {
            let (u, v) = (m(u, "U")?, m(v, "V")?);
            let inv = |x: &ComplexMatrix, n: &str| inverse(x).map_err(|_| config(format!("{n} is singular")));
            let expect = (inv(&v, "V")?, inv(&u, "U")?);
            (Transform::FirstKind { u, v }, Some(expect))
        }
        TransformConfig::Second { k2, k } => (Transform::SecondKind { k2: to_complex(*k2), k: to_complex(*k) }, None),
        TransformConfig::Internal { u, v } => (Transform::Internal { u: m(u, "U")?, v: m(v, "V")? }, None),
    })
}

fn pointwise(cfg: &ExperimentConfig, built: &Built, c: &CheckConfig, vg: &VesselGrid) -> CliResult<Option<CheckReport>> {
    let r = &built.realization;
    let g = &vg.grid;
    let tol = c.tolerance.expect("resolved");
    let valid = || vg.evals.iter().zip(&vg.mask).filter(|(_, m)| **m).filter_map(|(e, _)| e.as_ref());
    Ok(Some(match c.name.as_str() {
        "s_inverse" => {
            let e = r.outer_dim();
            let mut values = Vec::new();
            for ev in valid() {
                let mut worst = 0.0f64;
                for &l in c.lambdas.as_ref().expect("resolved") {
                    let (s, s_inv) = r.transfer_from(ev, to_complex(l))?;
                    worst = worst.max(norm_max(&(&s * &s_inv - identity(e))));
                }
                values.push(worst);
            }
            pointwise_report("s_inverse", &values, g, tol)
        }
        "h0_invariance" => {
            // First-kind transforms map H0 to V^-1 H0 U^-1; the others leave it unchanged.
            let (spec, expect) = transform(cfg)?;
            let moved = transform_realization(r, &spec)?;
            let scale = valid().map(|ev| norm_max(&ev.h0)).fold(0.0, f64::max);
            let mut values = Vec::new();
            for ev in valid() {
                let h = moved.evaluate(ev.x, ev.t)?.h0;
                let target = match &expect {
                    Some((v_inv, u_inv)) => v_inv * &ev.h0 * u_inv,
                    None => ev.h0.clone(),
                };
                values.push(norm_max(&(h - target)) / scale.max(f64::MIN_POSITIVE));
            }
            pointwise_report("h0_invariance", &values, g, tol)
        }
        "soliton_closed_form" => {
            let f = built.closed_form.as_ref().ok_or_else(|| config("soliton_closed_form needs a soliton realization"))?;
            let values: Vec<f64> = valid()
                .map(|ev| {
                    let z = f(ev.x, ev.t);
                    (ev.h0[(0, 1)] - z).norm() / z.norm().max(f64::MIN_POSITIVE)
                })
                .collect();
            pointwise_report("soliton_closed_form", &values, g, tol)
        }
        _ => return Ok(None),
    }))
}

pub fn verify(cfg: &ExperimentConfig) -> CliResult<Value> {
    if cfg.checks.is_empty() {
        return Err(config("verify needs a non-empty checks list"));
    }
    let built = build(cfg)?;
    let r = &built.realization;
    let g = grid(cfg)?;
    let mut reports: Vec<CheckReport> =
        fd_residuals(cfg, r, g)?.iter().map(|(res, tol)| report_of(res, *tol)).collect();
    let vg = evaluate(cfg, r, g)?;
    for c in cfg.check_configs() {
        if let Some(rep) = pointwise(cfg, &built, c, &vg)? {
            reports.push(rep);
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    let mut report = json!({ "command": "verify", "pass": pass, "reports": reports });
    if cfg.halving.expect("resolved") {
        let refinements = combined_ratio(&g, |grid: &Grid| {
            fd_residuals(cfg, r, *grid)
                .map(|v| v.into_iter().map(|(res, _)| res).collect())
                .map_err(|e| Error::InvalidGrid(e.to_string()))
        })?;
        let block: Vec<Value> = refinements
            .iter()
            .map(|f| {
                json!({
                    "equation_id": f.coarse.equation_id.to_string(),
                    "coarse_max": f.shared_max.0,
                    "fine_max": f.shared_max.1,
                    "ratio": f.ratio,
                    "h_coarse": [f.coarse.h_used.0, f.coarse.h_used.1],
                    "h_fine": [f.fine.h_used.0, f.fine.h_used.1],
                })
            })
            .collect();
        report["convergence"] = Value::Array(block);
    }
    let dir = out_dir(cfg);
    write_text(&dir.join(file_name(cfg, "report.json")), &json_text(&report))?;
    write_resolved(cfg, &dir)?;
    Ok(report)
}
