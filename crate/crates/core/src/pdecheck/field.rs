use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{c64, ComplexMatrix};

/// Uniform rectangular grid. Node `(i, j)` sits at
/// `(x_start + i·dx, t_start + j·dt)` and has flat index `j·nx + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_start: f64,
    pub t_start: f64,
    pub dx: f64,
    pub dt: f64,
    pub nx: usize,
    pub nt: usize,
}

impl Grid {
    pub const MIN_NODES: usize = 7;

    pub fn new(x_start: f64, t_start: f64, dx: f64, dt: f64, nx: usize, nt: usize) -> Result<Self> {
        if !(x_start.is_finite() && t_start.is_finite()) {
            return Err(Error::InvalidGrid("grid origin must be finite".into()));
        }
        if !(dx > 0.0 && dt > 0.0 && dx.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidGrid("dx and dt must be positive".into()));
        }
        if nx < Self::MIN_NODES || nt < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} nodes per direction, got {nx}x{nt}",
                Self::MIN_NODES
            )));
        }
        Ok(Self { x_start, t_start, dx, dt, nx, nt })
    }

    /// Grid spanning `[x0, x1] × [t0, t1]` with the given steps.
    pub fn spanning(x0: f64, x1: f64, t0: f64, t1: f64, dx: f64, dt: f64) -> Result<Self> {
        let nx = ((x1 - x0) / dx).round() as usize + 1;
        let nt = ((t1 - t0) / dt).round() as usize + 1;
        Self::new(x0, t0, dx, dt, nx, nt)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_start + i as f64 * self.dx
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.dt
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        (self.x(k % self.nx), self.t(k / self.nx))
    }

    /// Flat index of the node at `(x, t)`, if there is one.
    pub fn locate(&self, x: f64, t: f64) -> Option<usize> {
        let fi = (x - self.x_start) / self.dx;
        let fj = (t - self.t_start) / self.dt;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-6 || (fj - j).abs() > 1e-6 || i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (i < self.nx && j < self.nt).then(|| self.index(i, j))
    }

    /// Column whose x-coordinate is closest to `x`.
    pub fn nearest_column(&self, x: f64) -> usize {
        let i = ((x - self.x_start) / self.dx).round();
        i.clamp(0.0, (self.nx - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accuracy {
    Second,
    Fourth,
}

impl Accuracy {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Accuracy::Second),
            4 => Ok(Accuracy::Fourth),
            _ => Err(Error::InvalidGrid(format!("unsupported accuracy {order}"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Accuracy::Second => 2,
            Accuracy::Fourth => 4,
        }
    }
}

/// Centered stencil coefficients, offsets `-w..=w`.
fn stencil(order: usize, accuracy: Accuracy) -> Result<&'static [f64]> {
    Ok(match (order, accuracy) {
        (1, Accuracy::Second) => &[-0.5, 0.0, 0.5],
        (1, Accuracy::Fourth) => &[1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
        (2, Accuracy::Second) => &[1.0, -2.0, 1.0],
        (2, Accuracy::Fourth) => &[-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0],
        (3, Accuracy::Second) => &[-0.5, 1.0, 0.0, -1.0, 0.5],
        (3, Accuracy::Fourth) => &[0.125, -1.0, 1.625, 0.0, -1.625, 1.0, -0.125],
        _ => return Err(Error::InvalidGrid(format!("unsupported derivative order {order}"))),
    })
}

/// Complex scalar samples with a validity mask.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<Complex64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::Dimension("field size does not match grid".into()));
        }
        let mut mask = mask;
        for (ok, v) in mask.iter_mut().zip(&values) {
            *ok &= v.re.is_finite() && v.im.is_finite();
        }
        Ok(Self { grid, values, mask })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values: Vec<Complex64> = (0..grid.len())
            .map(|k| {
                let (x, t) = grid.coords(k);
                f(x, t)
            })
            .collect();
        let mask = values.iter().map(|v| v.re.is_finite() && v.im.is_finite()).collect();
        Self { grid, values, mask }
    }

    pub fn constant(grid: Grid, value: Complex64) -> Self {
        Self::from_fn(grid, |_, _| value)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Pointwise combination; the result is valid where every input is.
    pub fn combine(fields: &[&ScalarField], f: impl Fn(&[Complex64]) -> Complex64) -> Result<Self> {
        let grid = check_same_grid(fields.iter().map(|s| &s.grid))?;
        let mut buf = vec![c64(0.0, 0.0); fields.len()];
        let mut values = Vec::with_capacity(grid.len());
        let mut mask = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let ok = fields.iter().all(|s| s.mask[k]);
            if ok {
                for (slot, s) in buf.iter_mut().zip(fields) {
                    *slot = s.values[k];
                }
                let v = f(&buf);
                values.push(v);
                mask.push(v.re.is_finite() && v.im.is_finite());
            } else {
                values.push(c64(f64::NAN, f64::NAN));
                mask.push(false);
            }
        }
        Ok(Self { grid, values, mask })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::combine(&[self], |v| f(v[0])).expect("single field shares its own grid")
    }

    /// Masks every node within Euclidean distance `radius` of an invalid node.
    pub fn dilate(&mut self, radius: f64) {
        self.mask = dilate_mask(&self.grid, &self.mask, radius);
    }
}

/// Matrix samples (all of the same shape) with a validity mask.
#[derive(Debug, Clone)]
pub struct MatrixField {
    pub grid: Grid,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<ComplexMatrix>,
    pub mask: Vec<bool>,
}

impl MatrixField {
    pub fn new(grid: Grid, rows: usize, cols: usize, values: Vec<ComplexMatrix>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::Dimension("field size does not match grid".into()));
        }
        if values.iter().any(|m| m.nrows() != rows || m.ncols() != cols) {
            return Err(Error::Dimension(format!("field entries must be {rows}x{cols}")));
        }
        let mut mask = mask;
        for (ok, m) in mask.iter_mut().zip(&values) {
            *ok &= m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        }
        Ok(Self { grid, rows, cols, values, mask })
    }

    pub fn entry(&self, r: usize, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|m| m[(r, c)]).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Pointwise combination of matrix fields; valid where every input is.
    pub fn combine(
        fields: &[&MatrixField],
        rows: usize,
        cols: usize,
        f: impl Fn(&[&ComplexMatrix]) -> ComplexMatrix,
    ) -> Result<Self> {
        let grid = check_same_grid(fields.iter().map(|s| &s.grid))?;
        let nan = ComplexMatrix::from_element(rows, cols, c64(f64::NAN, f64::NAN));
        let mut values = Vec::with_capacity(grid.len());
        let mut mask = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            if fields.iter().all(|s| s.mask[k]) {
                let args: Vec<&ComplexMatrix> = fields.iter().map(|s| &s.values[k]).collect();
                let v = f(&args);
                mask.push(v.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
                values.push(v);
            } else {
                values.push(nan.clone());
                mask.push(false);
            }
        }
        Self::new(grid, rows, cols, values, mask)
    }

    pub fn map_scalar(&self, f: impl Fn(&ComplexMatrix) -> Complex64) -> ScalarField {
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(m, ok)| if *ok { f(m) } else { c64(f64::NAN, f64::NAN) })
            .collect();
        ScalarField { grid: self.grid, values, mask: self.mask.clone() }
    }

    pub fn dilate(&mut self, radius: f64) {
        self.mask = dilate_mask(&self.grid, &self.mask, radius);
    }
}

fn check_same_grid<'a>(mut grids: impl Iterator<Item = &'a Grid>) -> Result<Grid> {
    let first = *grids
        .next()
        .ok_or_else(|| Error::Dimension("no fields to combine".into()))?;
    if grids.any(|g| *g != first) {
        return Err(Error::Dimension("fields live on different grids".into()));
    }
    Ok(first)
}

pub(crate) fn dilate_mask(grid: &Grid, mask: &[bool], radius: f64) -> Vec<bool> {
    if radius <= 0.0 {
        return mask.to_vec();
    }
    let ri = (radius / grid.dx).floor() as isize;
    let rj = (radius / grid.dt).floor() as isize;
    let mut out = mask.to_vec();
    for j in 0..grid.nt {
        for i in 0..grid.nx {
            if mask[grid.index(i, j)] {
                continue;
            }
            for dj in -rj..=rj {
                for di in -ri..=ri {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii < 0 || jj < 0 || ii >= grid.nx as isize || jj >= grid.nt as isize {
                        continue;
                    }
                    let (ddx, ddt) = (di as f64 * grid.dx, dj as f64 * grid.dt);
                    if ddx * ddx + ddt * ddt <= radius * radius * (1.0 + 1e-12) {
                        out[grid.index(ii as usize, jj as usize)] = false;
                    }
                }
            }
        }
    }
    out
}

/// Applies a centered stencil to a flat sample array. A node is valid when
/// every stencil point exists and is valid.
type StencilPlan = Vec<Option<Vec<(usize, f64)>>>;

fn plan_stencil(grid: &Grid, mask: &[bool], var: Var, order: usize, accuracy: Accuracy) -> Result<StencilPlan> {
    let coeffs = stencil(order, accuracy)?;
    let w = coeffs.len() / 2;
    let (n_along, h) = match var {
        Var::X => (grid.nx, grid.dx),
        Var::T => (grid.nt, grid.dt),
    };
    if n_along < 2 * w + 1 {
        return Err(Error::StencilTooWide { needed: 2 * w + 1, available: n_along });
    }
    let scale = h.powi(order as i32);
    let mut plan = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (i, j) = (k % grid.nx, k / grid.nx);
        let pos = if var == Var::X { i } else { j };
        if pos < w || pos + w >= n_along {
            plan.push(None);
            continue;
        }
        let mut terms = Vec::with_capacity(coeffs.len());
        let mut ok = true;
        for (s, &c) in coeffs.iter().enumerate() {
            let p = pos + s - w;
            let kk = if var == Var::X { grid.index(p, j) } else { grid.index(i, p) };
            if !mask[kk] {
                ok = false;
                break;
            }
            if c != 0.0 {
                terms.push((kk, c / scale));
            }
        }
        plan.push(ok.then_some(terms));
    }
    Ok(plan)
}

/// Centered finite-difference partial derivative of a scalar field.
pub fn fd_partial(field: &ScalarField, var: Var, order: usize, accuracy: Accuracy) -> Result<ScalarField> {
    let plan = plan_stencil(&field.grid, &field.mask, var, order, accuracy)?;
    let mut values = Vec::with_capacity(plan.len());
    let mut mask = Vec::with_capacity(plan.len());
    for p in plan {
        match p {
            Some(terms) => {
                values.push(terms.iter().map(|&(k, c)| field.values[k] * c).sum());
                mask.push(true);
            }
            None => {
                values.push(c64(f64::NAN, f64::NAN));
                mask.push(false);
            }
        }
    }
    Ok(ScalarField { grid: field.grid, values, mask })
}

/// Entrywise finite-difference partial derivative of a matrix field.
pub fn fd_partial_matrix(field: &MatrixField, var: Var, order: usize, accuracy: Accuracy) -> Result<MatrixField> {
    let plan = plan_stencil(&field.grid, &field.mask, var, order, accuracy)?;
    let nan = ComplexMatrix::from_element(field.rows, field.cols, c64(f64::NAN, f64::NAN));
    let mut values = Vec::with_capacity(plan.len());
    let mut mask = Vec::with_capacity(plan.len());
    for p in plan {
        match p {
            Some(terms) => {
                let mut acc = ComplexMatrix::zeros(field.rows, field.cols);
                for &(k, c) in &terms {
                    acc += &field.values[k] * c64(c, 0.0);
                }
                values.push(acc);
                mask.push(true);
            }
            None => {
                values.push(nan.clone());
                mask.push(false);
            }
        }
    }
    Ok(MatrixField { grid: field.grid, rows: field.rows, cols: field.cols, values, mask })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(f: &ScalarField, exact: impl Fn(f64, f64) -> Complex64) -> f64 {
        (0..f.grid.len())
            .filter(|&k| f.mask[k])
            .map(|k| {
                let (x, t) = f.grid.coords(k);
                (f.values[k] - exact(x, t)).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0.0, 0.0, 0.1, 0.1, 6, 7).is_err());
        assert!(Grid::new(0.0, 0.0, -0.1, 0.1, 7, 7).is_err());
        let g = Grid::spanning(-1.0, 1.0, -0.5, 0.5, 0.02, 0.02).unwrap();
        assert_eq!((g.nx, g.nt), (101, 51));
        assert_eq!(g.locate(0.0, 0.0), Some(g.index(50, 25)));
        assert_eq!(g.locate(0.005, 0.0), None);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = Grid::new(0.0, 0.0, 0.1, 0.1, 9, 9).unwrap();
        let f = ScalarField::constant(g, c64(3.0, -1.0));
        for order in 1..=3 {
            for acc in [Accuracy::Second, Accuracy::Fourth] {
                for var in [Var::X, Var::T] {
                    let d = fd_partial(&f, var, order, acc).unwrap();
                    assert!(d.valid_count() > 0);
                    assert!(max_err(&d, |_, _| c64(0.0, 0.0)) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn quadratic_first_derivative_is_exact() {
        let g = Grid::new(0.0, 0.0, 0.1, 0.1, 11, 7).unwrap();
        let f = ScalarField::from_fn(g, |x, _| c64(x * x, 0.0));
        let d = fd_partial(&f, Var::X, 1, Accuracy::Second).unwrap();
        assert_eq!(d.valid_count(), 9 * 7);
        assert!(max_err(&d, |x, _| c64(2.0 * x, 0.0)) < 1e-13);
    }

    #[test]
    fn boundary_nodes_are_masked() {
        let g = Grid::new(0.0, 0.0, 0.1, 0.1, 9, 7).unwrap();
        let f = ScalarField::from_fn(g, |x, t| c64(x.sin(), t));
        let d = fd_partial(&f, Var::X, 3, Accuracy::Fourth).unwrap();
        assert_eq!(d.valid_count(), 3 * 7);
        assert_eq!(fd_partial(&f, Var::T, 3, Accuracy::Fourth).unwrap().valid_count(), 9);
        let g = Grid::new(0.0, 0.0, 0.1, 0.1, 7, 7).unwrap();
        let f = ScalarField::constant(g, c64(1.0, 0.0));
        assert!(fd_partial(&f, Var::X, 3, Accuracy::Fourth).is_ok());
    }

    #[test]
    fn third_derivative_converges_at_fourth_order() {
        let err = |h: f64| {
            let g = Grid::spanning(0.0, 2.0, 0.0, 6.0 * 0.1, h, 0.1).unwrap();
            let f = ScalarField::from_fn(g, |x, _| c64(x.sin(), 0.0));
            let d = fd_partial(&f, Var::X, 3, Accuracy::Fourth).unwrap();
            // Compare on nodes shared by both grids.
            (0..g.len())
                .filter(|&k| d.mask[k])
                .filter(|&k| {
                    let (x, _) = g.coords(k);
                    (0.2..=1.8).contains(&x) && ((x / 0.1).round() - x / 0.1).abs() < 1e-9
                })
                .map(|k| (d.values[k].re + g.coords(k).0.cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
        let err2 = |h: f64| {
            let g = Grid::spanning(0.0, 2.0, 0.0, 0.6, h, 0.1).unwrap();
            let f = ScalarField::from_fn(g, |x, _| c64(x.exp(), 0.0));
            let d = fd_partial(&f, Var::X, 2, Accuracy::Second).unwrap();
            let k = g.locate(1.0, 0.3).unwrap();
            (d.values[k].re - 1f64.exp()).abs()
        };
        let ratio = err2(0.1) / err2(0.05);
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn masked_nodes_propagate_through_stencils() {
        let g = Grid::new(0.0, 0.0, 0.1, 0.1, 15, 7).unwrap();
        let mut f = ScalarField::from_fn(g, |x, _| c64(x, 0.0));
        f.mask[g.index(7, 3)] = false;
        let d = fd_partial(&f, Var::X, 1, Accuracy::Fourth).unwrap();
        for i in 5..=9 {
            assert!(!d.mask[g.index(i, 3)]);
        }
        assert!(d.mask[g.index(4, 3)] && d.mask[g.index(10, 3)]);
        assert!(d.mask[g.index(7, 2)]);
    }

    #[test]
    fn dilation_is_euclidean() {
        let g = Grid::new(-1.0, -1.0, 0.1, 0.1, 21, 21).unwrap();
        let mut f = ScalarField::constant(g, c64(1.0, 0.0));
        f.mask[g.locate(0.0, 0.0).unwrap()] = false;
        f.dilate(0.25);
        assert!(!f.mask[g.locate(0.2, 0.1).unwrap()]);
        assert!(f.mask[g.locate(0.2, 0.2).unwrap()]);
        assert!(f.mask[g.locate(0.3, 0.0).unwrap()]);
        assert_eq!(f.valid_count(), 441 - 21);
    }

    #[test]
    fn combine_requires_matching_grids() {
        let g1 = Grid::new(0.0, 0.0, 0.1, 0.1, 7, 7).unwrap();
        let g2 = Grid::new(0.0, 0.0, 0.2, 0.1, 7, 7).unwrap();
        let a = ScalarField::constant(g1, c64(1.0, 0.0));
        let b = ScalarField::constant(g2, c64(1.0, 0.0));
        assert!(ScalarField::combine(&[&a, &b], |v| v[0] + v[1]).is_err());
        let s = ScalarField::combine(&[&a, &a], |v| v[0] + v[1]).unwrap();
        assert_eq!(s.values[0], c64(2.0, 0.0));
    }
}
