//! Piecewise-linear discretization of the SO(N)-invariant subspace.
//!
//! A radial function is represented by its nodal values on a grid of the
//! geodesic radius `0 = rho_0 < ... < rho_M = R_max`, with the last value
//! pinned to zero. All integrals use the polar form of the volume element,
//! `dmu = omega_{N-1} sinh^{N-1}(rho) d rho d theta`.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hypgeom::sphere_area;
use crate::numerics::gauss_legendre_unit;
use crate::par;

pub const DEFAULT_CELLS: usize = 2048;
pub const DEFAULT_R_MAX: f64 = 10.0;
pub const DEFAULT_QUAD_ORDER: usize = 6;

/// Grid of geodesic radii with per-cell Gauss–Legendre points.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    nodes: Vec<f64>,
    quad_order: usize,
    omega: f64,
    // flattened per-cell quadrature data, index = cell * quad_order + point
    qp_rho: Vec<f64>,
    qp_xi: Vec<f64>,
    qp_jw: Vec<f64>,
    cell_weight: Vec<f64>,
}

impl RadialGrid {
    pub fn from_nodes(dim: usize, nodes: Vec<f64>, quad_order: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid(format!("dimension must be at least 3, got {dim}")));
        }
        if quad_order < 2 {
            return Err(Error::invalid(format!("quad_order must be at least 2, got {quad_order}")));
        }
        if nodes.len() < 2 {
            return Err(Error::DegenerateGrid("need at least one cell".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::DegenerateGrid("first node must be 0".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateGrid("nodes must be finite and strictly increasing".into()));
        }
        let (gx, gw) = gauss_legendre_unit(quad_order);
        let cells = nodes.len() - 1;
        let mut qp_rho = Vec::with_capacity(cells * quad_order);
        let mut qp_xi = Vec::with_capacity(cells * quad_order);
        let mut qp_jw = Vec::with_capacity(cells * quad_order);
        let mut cell_weight = Vec::with_capacity(cells);
        let pow = (dim - 1) as i32;
        for k in 0..cells {
            let (a, b) = (nodes[k], nodes[k + 1]);
            let h = b - a;
            let mut cw = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let rho = a + h * x;
                let jw = w * h * rho.sinh().powi(pow);
                qp_rho.push(rho);
                qp_xi.push(*x);
                qp_jw.push(jw);
                cw += jw;
            }
            cell_weight.push(cw);
        }
        if qp_jw.iter().any(|w| !w.is_finite()) {
            return Err(Error::DegenerateGrid(format!("sinh^{pow} overflows on [0, {}]", nodes[cells])));
        }
        Ok(Self { dim, nodes, quad_order, omega: sphere_area(dim), qp_rho, qp_xi, qp_jw, cell_weight })
    }

    pub fn uniform(dim: usize, cells: usize, r_max: f64, quad_order: usize) -> Result<Self> {
        Self::aligned(dim, cells, r_max, quad_order, &[])
    }

    /// Uniform grid with the given radii inserted as nodes. Uniform nodes
    /// closer than a quarter cell to a kink are dropped in its favour.
    pub fn aligned(dim: usize, cells: usize, r_max: f64, quad_order: usize, kinks: &[f64]) -> Result<Self> {
        if cells == 0 {
            return Err(Error::DegenerateGrid("need at least one cell".into()));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::invalid(format!("R_max must be positive, got {r_max}")));
        }
        let h = r_max / cells as f64;
        for &k in kinks {
            if !(k > 0.0 && k <= r_max) {
                return Err(Error::invalid(format!("kink radius {k} outside (0, {r_max}]")));
            }
        }
        let mut nodes: Vec<f64> = (0..=cells)
            .map(|i| if i == cells { r_max } else { i as f64 * h })
            .filter(|&x| x == 0.0 || x == r_max || kinks.iter().all(|k| (x - k).abs() > 0.25 * h))
            .collect();
        nodes.extend(kinks.iter().copied().filter(|&k| k < r_max));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Self::from_nodes(dim, nodes, quad_order)
    }

    /// Same nodes, different number of Gauss points per cell.
    pub fn with_quad_order(&self, quad_order: usize) -> Result<Self> {
        Self::from_nodes(self.dim, self.nodes.clone(), quad_order)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// `omega_{N-1}`, the area of the unit sphere.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn qp_rho(&self) -> &[f64] {
        &self.qp_rho
    }

    /// Quadrature weights including the cell length and `sinh^{N-1}`,
    /// excluding `omega_{N-1}`.
    pub fn qp_weights(&self) -> &[f64] {
        &self.qp_jw
    }

    pub fn has_node(&self, rho: f64, tol: f64) -> bool {
        let i = self.nodes.partition_point(|&x| x < rho - tol);
        i < self.nodes.len() && (self.nodes[i] - rho).abs() <= tol
    }

    /// Index of the cell containing `rho` (clamped to the grid).
    pub fn locate(&self, rho: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x <= rho);
        i.saturating_sub(1).min(self.n_cells() - 1)
    }

    /// `omega_{N-1} int_0^{R_max} g(rho) sinh^{N-1}(rho) d rho` by the grid rule.
    pub fn integrate<G: Fn(f64) -> f64 + Sync + Send>(&self, g: G) -> f64 {
        self.omega * par::sum(self.qp_rho.len(), |i| self.qp_jw[i] * g(self.qp_rho[i]))
    }

    /// Metadata for reports.
    pub fn meta(&self) -> GridMeta {
        GridMeta { dim: self.dim, cells: self.n_cells(), r_max: self.r_max(), quad_order: self.quad_order }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridMeta {
    pub dim: usize,
    pub cells: usize,
    pub r_max: f64,
    pub quad_order: usize,
}

/// A radial function: nodal values on a grid, zero at `R_max`.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl PartialEq for RadialFunction {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.values == other.values
    }
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial function value".into()));
        }
        if values[values.len() - 1] != 0.0 {
            return Err(Error::invalid("radial function must vanish at R_max"));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.n_nodes();
        Self { grid, values: vec![0.0; n] }
    }

    /// Samples `f` at the nodes; the value at `R_max` is set to zero.
    pub fn sample<F: FnMut(f64) -> f64>(grid: Arc<RadialGrid>, mut f: F) -> Result<Self> {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        let last = values.len() - 1;
        values[last] = 0.0;
        Self::new(grid, values)
    }

    /// Builds a function from values on the free nodes (all but the last).
    pub fn from_free(grid: Arc<RadialGrid>, free: &[f64]) -> Result<Self> {
        let mut values = free.to_vec();
        values.push(0.0);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values on the free nodes (all but the pinned last one).
    pub fn free_values(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.nodes == other.grid.nodes
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| t * v).collect() }
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + t * b).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolant at `rho`; zero beyond `R_max`.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho >= self.grid.r_max() {
            return 0.0;
        }
        let k = self.grid.locate(rho);
        let (a, b) = (self.grid.nodes[k], self.grid.nodes[k + 1]);
        let xi = (rho - a) / (b - a);
        self.values[k] * (1.0 - xi) + self.values[k + 1] * xi
    }

    /// Slope of the interpolant at `rho` (right derivative at nodes); zero beyond `R_max`.
    pub fn derivative(&self, rho: f64) -> f64 {
        if rho >= self.grid.r_max() {
            return 0.0;
        }
        let k = self.grid.locate(rho);
        self.slope(k)
    }

    fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.grid.nodes[k + 1] - self.grid.nodes[k])
    }

    /// Values of the interpolant at every quadrature point.
    pub fn qp_values(&self) -> Vec<f64> {
        let q = self.grid.quad_order;
        let mut out = Vec::with_capacity(self.grid.qp_rho.len());
        for k in 0..self.grid.n_cells() {
            let (ua, ub) = (self.values[k], self.values[k + 1]);
            for g in 0..q {
                let xi = self.grid.qp_xi[k * q + g];
                out.push(ua * (1.0 - xi) + ub * xi);
            }
        }
        out
    }

    /// Writes `rho,value` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rho", "value"])?;
        for (r, v) in self.grid.nodes.iter().zip(&self.values) {
            w.write_record([fmt17(*r), fmt17(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `rho,value` CSV into a function on a grid built from the `rho` column.
    pub fn read_csv<R: Read>(reader: R, dim: usize, quad_order: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["rho", "value"] {
            return Err(Error::invalid("expected CSV header 'rho,value'"));
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number '{s}': {e}")));
            nodes.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        let grid = Arc::new(RadialGrid::from_nodes(dim, nodes, quad_order)?);
        Self::new(grid, values)
    }
}

/// Fixed 17-significant-digit scientific formatting.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `||u||^2 = omega_{N-1} int u'(rho)^2 sinh^{N-1}(rho) d rho`.
pub fn dirichlet_energy(u: &RadialFunction) -> f64 {
    let g = &u.grid;
    g.omega
        * par::sum(g.n_cells(), |k| {
            let s = u.slope(k);
            s * s * g.cell_weight[k]
        })
}

/// Energy inner product `<u, v> = omega_{N-1} int u' v' sinh^{N-1}`.
pub fn inner_product(u: &RadialFunction, v: &RadialFunction) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::GridMismatch);
    }
    let g = &u.grid;
    Ok(g.omega * par::sum(g.n_cells(), |k| u.slope(k) * v.slope(k) * g.cell_weight[k]))
}

/// `int |u|^nu dmu` for any `nu > 0` (no range check).
pub(crate) fn power_integral(u: &RadialFunction, nu: f64, weight: Option<&[f64]>) -> f64 {
    let g = &u.grid;
    let vals = u.qp_values();
    let jw = &g.qp_jw;
    g.omega
        * par::sum(vals.len(), |i| {
            let a = weight.map_or(1.0, |w| w[i]);
            a * vals[i].abs().powf(nu) * jw[i]
        })
}

/// Nodal load vector `omega int g(x, u(x)) phi_i sinh^{N-1}` on the free
/// nodes, where `g` receives the flat quadrature-point index and the value
/// of `u` there. Cell contributions are accumulated in cell order.
pub fn load_vector<G>(u: &RadialFunction, g: G) -> Vec<f64>
where
    G: Fn(usize, f64) -> f64 + Sync + Send,
{
    let grid = &u.grid;
    let q = grid.quad_order;
    let cells = grid.n_cells();
    let contrib = par::map(cells, |k| {
        let (ua, ub) = (u.values[k], u.values[k + 1]);
        let (mut left, mut right) = (0.0, 0.0);
        for p in 0..q {
            let i = k * q + p;
            let xi = grid.qp_xi[i];
            let v = g(i, ua * (1.0 - xi) + ub * xi) * grid.qp_jw[i];
            left += v * (1.0 - xi);
            right += v * xi;
        }
        (left, right)
    });
    let mut b = vec![0.0; cells + 1];
    for (k, (l, r)) in contrib.into_iter().enumerate() {
        b[k] += l;
        b[k + 1] += r;
    }
    b.pop();
    for x in b.iter_mut() {
        *x *= grid.omega;
    }
    b
}

/// `L^nu(dmu)` norm for `nu` in `[2, 2N/(N-2)]`.
pub fn lebesgue_norm(u: &RadialFunction, nu: f64) -> Result<f64> {
    let n = u.grid.dim as f64;
    let crit = 2.0 * n / (n - 2.0);
    if !(nu >= 2.0 && nu <= crit) {
        return Err(Error::invalid(format!("nu = {nu} outside [2, {crit}]")));
    }
    Ok(power_integral(u, nu, None).powf(1.0 / nu))
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { diag: self.diag.iter().map(|d| d * s).collect(), off: self.off.iter().map(|d| d * s).collect() }
    }

    /// Leading principal block of size `n`.
    pub fn leading(&self, n: usize) -> Self {
        Self { diag: self.diag[..n].to_vec(), off: self.off[..n.saturating_sub(1)].to_vec() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// Solves `A x = b` by an `LDL^T` sweep; fails on a non-positive pivot.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut y = b.to_vec();
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                di -= l[i - 1] * self.off[i - 1];
                y[i] -= l[i - 1] * y[i - 1];
            }
            if !(di > 0.0) {
                return Err(Error::DegenerateGrid(format!("non-positive pivot {di:e} at row {i}")));
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        Ok(y)
    }
}

/// Stiffness and mass matrices of the piecewise-linear basis, both without
/// the `omega_{N-1}` factor: `omega * u^T S u = dirichlet_energy(u)`.
/// The mass matrix carries the optional radial weight.
pub fn assemble_operators(
    grid: &RadialGrid,
    weight: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<(SymTridiagonal, SymTridiagonal)> {
    let q = grid.quad_order;
    let cells = grid.n_cells();
    // per-cell 2x2 blocks [s_aa, s_ab, m_aa, m_ab, m_bb], accumulated in cell order
    let blocks = par::map(cells, |k| -> Result<[f64; 5]> {
        let h = grid.nodes[k + 1] - grid.nodes[k];
        let s = grid.cell_weight[k] / (h * h);
        let (mut maa, mut mab, mut mbb) = (0.0, 0.0, 0.0);
        for g in 0..q {
            let i = k * q + g;
            let a = match weight {
                Some(w) => {
                    let a = w(grid.qp_rho[i]);
                    if !a.is_finite() {
                        return Err(Error::NonFinite(format!("weight at rho = {}", grid.qp_rho[i])));
                    }
                    if a < 0.0 {
                        return Err(Error::invalid(format!("negative weight {a} at rho = {}", grid.qp_rho[i])));
                    }
                    a
                }
                None => 1.0,
            };
            let xi = grid.qp_xi[i];
            let jw = a * grid.qp_jw[i];
            maa += jw * (1.0 - xi) * (1.0 - xi);
            mab += jw * (1.0 - xi) * xi;
            mbb += jw * xi * xi;
        }
        Ok([s, -s, maa, mab, mbb])
    });
    let n = grid.n_nodes();
    let mut stiff = SymTridiagonal::zeros(n);
    let mut mass = SymTridiagonal::zeros(n);
    for (k, b) in blocks.into_iter().enumerate() {
        let [s, sab, maa, mab, mbb] = b?;
        stiff.diag[k] += s;
        stiff.diag[k + 1] += s;
        stiff.off[k] += sab;
        mass.diag[k] += maa;
        mass.diag[k + 1] += mbb;
        mass.off[k] += mab;
    }
    Ok((stiff, mass))
}

/// Energy-inner-product matrix on the free nodes, `omega * S` without the
/// last row and column. Positive definite for any valid grid.
pub fn constrained_stiffness(grid: &RadialGrid) -> Result<SymTridiagonal> {
    let (s, _) = assemble_operators(grid, None)?;
    Ok(s.leading(grid.n_nodes() - 1).scaled(grid.omega))
}
