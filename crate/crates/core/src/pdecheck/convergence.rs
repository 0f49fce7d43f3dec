//! Convergence-order measurement.
//!
//! Halving `dx` and `dt` together mixes the two stencil orders, so each
//! direction is refined on its own: the step along that direction is halved
//! while the other direction keeps a fixed fine step on a thin strip. Ratios
//! are taken over nodes shared by the coarse and fine grids.

use super::field::{Accuracy, Grid};
use super::{Residual, ResidualReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    X,
    T,
}

/// Outcome of one halving.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub coarse: ResidualReport,
    pub fine: ResidualReport,
    /// Max residual over shared nodes, coarse then fine.
    pub shared_max: (f64, f64),
    pub ratio: f64,
}

/// Acceptable error-ratio window for one halving.
pub fn ratio_window(accuracy: Accuracy) -> (f64, f64) {
    match accuracy {
        Accuracy::Second => (3.0, 5.0),
        Accuracy::Fourth => (12.0, 20.0),
    }
}

/// Thin strip along `direction`: `span` is covered with step `h`, and
/// the other coordinate has `2·across + 1` nodes at spacing `fine_step`
/// centered on `line`.
pub fn strip_grid(
    direction: Direction,
    line: f64,
    span: (f64, f64),
    h: f64,
    fine_step: f64,
    across: usize,
) -> Result<Grid> {
    let n_along = ((span.1 - span.0) / h).round() as usize + 1;
    let n_across = 2 * across + 1;
    let start_across = line - across as f64 * fine_step;
    match direction {
        Direction::X => Grid::new(span.0, start_across, h, fine_step, n_along, n_across),
        Direction::T => Grid::new(start_across, span.0, fine_step, h, n_across, n_along),
    }
}

fn halve(g: &Grid, direction: Option<Direction>) -> Result<Grid> {
    let (mut dx, mut nx, mut dt, mut nt) = (g.dx, g.nx, g.dt, g.nt);
    if direction != Some(Direction::T) {
        dx /= 2.0;
        nx = 2 * nx - 1;
    }
    if direction != Some(Direction::X) {
        dt /= 2.0;
        nt = 2 * nt - 1;
    }
    Grid::new(g.x_start, g.t_start, dx, dt, nx, nt)
}

fn merge_reports(parts: &[ResidualReport]) -> ResidualReport {
    let first = parts[0].clone();
    ResidualReport {
        max_abs: parts.iter().map(|r| r.max_abs).fold(0.0, f64::max),
        l2: parts.iter().map(|r| r.l2 * r.l2).sum::<f64>().sqrt(),
        interior_node_count: parts.iter().map(|r| r.interior_node_count).sum(),
        ..first
    }
}

/// Refines every coarse grid in `grids` once and compares residuals on the
/// shared nodes. `eval` returns the residuals of interest for a grid; the
/// output is index-aligned with them and aggregated over all grids.
fn refine<F>(grids: &[Grid], direction: Option<Direction>, eval: F) -> Result<Vec<Refinement>>
where
    F: Fn(&Grid) -> Result<Vec<Residual>>,
{
    let mut coarse_reports: Vec<Vec<ResidualReport>> = Vec::new();
    let mut fine_reports: Vec<Vec<ResidualReport>> = Vec::new();
    let mut shared: Vec<(f64, f64)> = Vec::new();
    for g in grids {
        let fine_grid = halve(g, direction)?;
        let coarse = eval(g)?;
        let fine = eval(&fine_grid)?;
        if coarse.len() != fine.len() {
            return Err(Error::InvalidGrid("residual count changed under refinement".into()));
        }
        if shared.is_empty() {
            shared = vec![(0.0, 0.0); coarse.len()];
            coarse_reports = vec![Vec::new(); coarse.len()];
            fine_reports = vec![Vec::new(); coarse.len()];
        }
        for (idx, (c, f)) in coarse.iter().zip(&fine).enumerate() {
            let nodes: Vec<(f64, f64)> = c
                .valid_nodes()
                .into_iter()
                .filter(|&(x, t)| f.grid.locate(x, t).is_some_and(|k| f.mask[k]))
                .collect();
            shared[idx].0 = shared[idx].0.max(c.max_at(&nodes));
            shared[idx].1 = shared[idx].1.max(f.max_at(&nodes));
            coarse_reports[idx].push(c.report());
            fine_reports[idx].push(f.report());
        }
    }
    Ok(shared
        .into_iter()
        .zip(coarse_reports.iter().zip(&fine_reports))
        .map(|((c, f), (cr, fr))| Refinement {
            coarse: merge_reports(cr),
            fine: merge_reports(fr),
            shared_max: (c, f),
            ratio: c / f,
        })
        .collect())
}

/// Halves the step along `direction` on each strip.
pub fn directional_ratio<F>(strips: &[Grid], direction: Direction, eval: F) -> Result<Vec<Refinement>>
where
    F: Fn(&Grid) -> Result<Vec<Residual>>,
{
    if strips.is_empty() {
        return Err(Error::InvalidGrid("no strips to refine".into()));
    }
    refine(strips, Some(direction), eval)
}

/// Halves `dx` and `dt` together.
pub fn combined_ratio<F>(grid: &Grid, eval: F) -> Result<Vec<Refinement>>
where
    F: Fn(&Grid) -> Result<Vec<Residual>>,
{
    refine(std::slice::from_ref(grid), None, eval)
}
