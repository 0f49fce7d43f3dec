//! Finite-difference verification of vessel-produced solutions.
//!
//! Fields live on a rectangular `(x, t)` grid stored row-major with `t` as
//! the outer index. Every field carries a validity mask; derivatives mask any
//! node whose stencil leaves the grid or touches an invalid node, so residual
//! statistics only ever see smooth interior data.

mod checks;
mod convergence;
mod equations;
mod field;

pub use checks::{
    check_backlund, check_gamma_star_evolution, check_input_wave, check_kdv_identities,
    check_moment_recurrence, check_trace_relations, MomentResiduals, VesselGrid,
};
pub use convergence::{
    combined_ratio, directional_ratio, ratio_window, strip_grid, Direction, Refinement,
};
pub use equations::{observables_from_tau, residual_pde, Constants, Fields, Observables};
pub use field::{fd_partial, fd_partial_matrix, Accuracy, Grid, MatrixField, ScalarField, Var};

use std::fmt;

/// Stencil accuracy per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stencils {
    pub x: Accuracy,
    pub t: Accuracy,
}

impl Default for Stencils {
    /// Fourth order in `x` (third derivatives appear), second order in `t`.
    fn default() -> Self {
        Self { x: Accuracy::Fourth, t: Accuracy::Second }
    }
}

/// Identifies which equation or identity a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationId {
    Kdv,
    Enls,
    CanSys,
    KdvGen,
    NlsGen,
    MomentX(usize),
    MomentT(usize),
    GammaStar,
    TraceComm(usize),
    TraceNotComm(usize),
    BacklundX,
    BacklundT,
    InputX,
    InputT,
    KdvPre,
    H21Elimination,
    H11Formula,
    K12Formula,
    K22Formula,
}

impl fmt::Display for EquationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationId::Kdv => write!(f, "kdv"),
            EquationId::Enls => write!(f, "enls"),
            EquationId::CanSys => write!(f, "cansys"),
            EquationId::KdvGen => write!(f, "kdv_gen"),
            EquationId::NlsGen => write!(f, "nls_gen"),
            EquationId::MomentX(n) => write!(f, "moment_x_{n}"),
            EquationId::MomentT(n) => write!(f, "moment_t_{n}"),
            EquationId::GammaStar => write!(f, "gamma_star"),
            EquationId::TraceComm(n) => write!(f, "trace_comm_{n}"),
            EquationId::TraceNotComm(n) => write!(f, "trace_notcomm_{n}"),
            EquationId::BacklundX => write!(f, "backlund_x"),
            EquationId::BacklundT => write!(f, "backlund_t"),
            EquationId::InputX => write!(f, "input_x"),
            EquationId::InputT => write!(f, "input_t"),
            EquationId::KdvPre => write!(f, "kdv_pre"),
            EquationId::H21Elimination => write!(f, "h21_elimination"),
            EquationId::H11Formula => write!(f, "h11_formula"),
            EquationId::K12Formula => write!(f, "k12_formula"),
            EquationId::K22Formula => write!(f, "k22_formula"),
        }
    }
}

/// Summary statistics of a residual over unmasked interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub equation_id: EquationId,
    pub max_abs: f64,
    /// Discrete `L²` norm, `sqrt(Σ|r|² dx dt)` over valid nodes and entries.
    pub l2: f64,
    pub interior_node_count: usize,
    pub h_used: (f64, f64),
}

/// Pointwise residual magnitudes on a grid.
///
/// `values` holds the max over matrix entries at each node and `sq` the sum
/// of squared entry moduli.
#[derive(Debug, Clone)]
pub struct Residual {
    pub id: EquationId,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub sq: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Residual {
    pub fn from_scalar(id: EquationId, field: &ScalarField) -> Self {
        let values: Vec<f64> = field.values.iter().map(|z| z.norm()).collect();
        let sq = values.iter().map(|v| v * v).collect();
        Self { id, grid: field.grid, values, sq, mask: field.mask.clone() }
    }

    pub fn from_matrix(id: EquationId, field: &MatrixField) -> Self {
        let values = field
            .values
            .iter()
            .map(|m| m.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .collect();
        let sq = field.values.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum()).collect();
        Self { id, grid: field.grid, values, sq, mask: field.mask.clone() }
    }

    pub fn report(&self) -> ResidualReport {
        let mut max_abs = 0.0f64;
        let mut sum = 0.0;
        let mut count = 0;
        for ((v, s), ok) in self.values.iter().zip(&self.sq).zip(&self.mask) {
            if *ok {
                max_abs = max_abs.max(*v);
                sum += s;
                count += 1;
            }
        }
        ResidualReport {
            equation_id: self.id,
            max_abs,
            l2: (sum * self.grid.dx * self.grid.dt).sqrt(),
            interior_node_count: count,
            h_used: (self.grid.dx, self.grid.dt),
        }
    }

    /// Largest valid value at the nodes `(x, t)` listed, skipping nodes
    /// that are absent or masked on this grid.
    pub fn max_at(&self, nodes: &[(f64, f64)]) -> f64 {
        nodes
            .iter()
            .filter_map(|&(x, t)| self.grid.locate(x, t))
            .filter(|&k| self.mask[k])
            .map(|k| self.values[k])
            .fold(0.0, f64::max)
    }

    /// Coordinates of valid nodes.
    pub fn valid_nodes(&self) -> Vec<(f64, f64)> {
        (0..self.values.len())
            .filter(|&k| self.mask[k])
            .map(|k| self.grid.coords(k))
            .collect()
    }
}
