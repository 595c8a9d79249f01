//! Problem data and the energy `J_lambda = Phi - lambda Psi`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, finite, golden_section_max};
use crate::par;
use crate::radial::{
    constrained_stiffness, dirichlet_energy, load_vector, power_integral, RadialFunction, RadialGrid, SymTridiagonal,
};

const SIMPSON_TOL: f64 = 1e-12;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of the reaction term `f`.
#[derive(Clone)]
pub enum NonlinearityKind {
    Zero,
    Constant(f64),
    /// `f(t) = |t|^{r-2} t`, `F(t) = |t|^r / r`.
    Power {
        r: f64,
    },
    /// Linear interpolation of `(t, f(t))` samples, constant beyond the ends.
    Table(Vec<(f64, f64)>),
    Custom(ScalarFn),
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Power { r } => write!(f, "Power {{ r: {r} }}"),
            Self::Table(s) => write!(f, "Table({} samples)", s.len()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Result of the growth-constant search.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AlphaF {
    pub value: f64,
    pub argmax: f64,
    /// The maximizer sits on the edge of the search interval, so the
    /// supremum may be approached only at infinity.
    pub at_boundary: bool,
}

/// `sup_t |f(t)| / (1 + |t|^{q-1})` over a symmetric log-spaced grid on
/// `[-search_bound, search_bound]` plus zero, refined by golden-section
/// search around the best grid point.
pub fn compute_alpha_f<F: Fn(f64) -> f64>(f: F, q: f64, search_bound: f64, grid_size: usize) -> Result<AlphaF> {
    if !(search_bound > 0.0) {
        return Err(Error::invalid("search_bound must be positive"));
    }
    if grid_size < 1000 {
        return Err(Error::invalid("grid_size must be at least 1000"));
    }
    let ratio = |t: f64| f(t).abs() / (1.0 + t.abs().powf(q - 1.0));
    let lo = search_bound * 1e-12;
    let step = (search_bound / lo).ln() / (grid_size - 1) as f64;
    let mut pts: Vec<f64> = (0..grid_size).map(|i| lo * (step * i as f64).exp()).collect();
    let last = pts.len() - 1;
    pts[last] = search_bound;
    let mut best = (0.0, ratio(0.0), None::<(usize, f64)>);
    for (i, &t) in pts.iter().enumerate() {
        for s in [t, -t] {
            let v = ratio(s);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("f({s})")));
            }
            if v > best.1 {
                best = (s, v, Some((i, s.signum())));
            }
        }
    }
    let Some((i, sign)) = best.2 else {
        return Ok(AlphaF { value: best.1, argmax: 0.0, at_boundary: false });
    };
    let at_boundary = i == last;
    let a = if i == 0 { 0.0 } else { pts[i - 1] };
    let b = pts[(i + 1).min(last)];
    let (x, v) = golden_section_max(|t| ratio(sign * t), a, b, 1e-14);
    let (argmax, value) = if v > best.1 { (sign * x, v) } else { (best.0, best.1) };
    Ok(AlphaF { value, argmax, at_boundary })
}

/// The reaction term with its primitive and growth data.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    q: f64,
    alpha_f: f64,
    // for tables: sorted knots and F at each knot
    knots: Vec<(f64, f64)>,
    knot_primitive: Vec<f64>,
}

impl Nonlinearity {
    /// Builds the nonlinearity; `alpha_f` is computed when not supplied and a
    /// supplied value is checked against the sampled growth ratio.
    pub fn new(kind: NonlinearityKind, q: f64, alpha_f: Option<f64>) -> Result<Self> {
        if !(q > 2.0) || !q.is_finite() {
            return Err(Error::invalid(format!("growth exponent q must exceed 2, got {q}")));
        }
        let mut knots = Vec::new();
        match &kind {
            NonlinearityKind::Power { r } if !(*r > 1.0) => {
                return Err(Error::invalid(format!("power exponent r must exceed 1, got {r}")));
            }
            NonlinearityKind::Constant(c) if !c.is_finite() => {
                return Err(Error::NonFinite("constant nonlinearity".into()));
            }
            NonlinearityKind::Table(s) => {
                if s.len() < 2 {
                    return Err(Error::invalid("table nonlinearity needs at least two samples"));
                }
                knots = s.clone();
                knots.sort_by(|a, b| a.0.total_cmp(&b.0));
                if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite())
                    || knots.windows(2).any(|w| w[1].0 <= w[0].0)
                {
                    return Err(Error::invalid("table samples must be finite with distinct abscissae"));
                }
            }
            _ => {}
        }
        let mut nl = Self { kind, q, alpha_f: 0.0, knots, knot_primitive: Vec::new() };
        if !nl.knots.is_empty() {
            nl.knot_primitive =
                nl.knots.iter().map(|&(t, _)| adaptive_simpson(&|s| nl.f(s), 0.0, t, SIMPSON_TOL)).collect();
        }
        let est = compute_alpha_f(|t| nl.f(t), q, 1e3, 10_000)?;
        if est.at_boundary {
            return Err(Error::GrowthViolated(format!(
                "|f(t)|/(1+|t|^(q-1)) peaks at the search boundary t = {}",
                est.argmax
            )));
        }
        nl.alpha_f = match alpha_f {
            Some(a) if a + 1e-12 * a.abs().max(1.0) < est.value => {
                return Err(Error::GrowthViolated(format!("supplied alpha_f = {a} below sampled ratio {}", est.value)));
            }
            Some(a) => a,
            None => est.value,
        };
        Ok(nl)
    }

    pub fn power(r: f64, q: f64) -> Result<Self> {
        Self::new(NonlinearityKind::Power { r }, q, None)
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha_f(&self) -> f64 {
        self.alpha_f
    }

    /// Exponent `r` when `f` is a pure power.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            NonlinearityKind::Power { r } => Some(r),
            _ => None,
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Constant(c) => *c,
            NonlinearityKind::Power { r } => t.signum() * t.abs().powf(r - 1.0) * (t != 0.0) as u8 as f64,
            NonlinearityKind::Table(_) => self.table_value(t),
            NonlinearityKind::Custom(f) => f(t),
        }
    }

    /// Primitive `F(t) = int_0^t f`.
    pub fn primitive(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Constant(c) => c * t,
            NonlinearityKind::Power { r } => t.abs().powf(*r) / r,
            NonlinearityKind::Table(_) => {
                let j = self.knots.partition_point(|k| k.0 <= t).saturating_sub(1);
                let (tk, fk) = (self.knots[j].0, self.knot_primitive[j]);
                fk + adaptive_simpson(&|s| self.table_value(s), tk, t, SIMPSON_TOL)
            }
            NonlinearityKind::Custom(f) => adaptive_simpson(&|s| f(s), 0.0, t, SIMPSON_TOL),
        }
    }

    fn table_value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        if t >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let j = k.partition_point(|p| p.0 <= t) - 1;
        let (t0, f0) = k[j];
        let (t1, f1) = k[j + 1];
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    }
}

/// Radial profile of the potential, as a function of the geodesic radius.
#[derive(Clone)]
pub enum WeightProfile {
    /// `alpha = ((1 - |x|^2) / 2)^exponent`.
    ConformalPower {
        exponent: f64,
    },
    /// Linear interpolation of `(rho, alpha)` samples, zero beyond the last.
    Table(Vec<(f64, f64)>),
    Custom(ScalarFn),
}

impl fmt::Debug for WeightProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConformalPower { exponent } => write!(f, "ConformalPower {{ exponent: {exponent} }}"),
            Self::Table(s) => write!(f, "Table({} samples)", s.len()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl WeightProfile {
    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            Self::ConformalPower { exponent } => {
                // (1 - tanh^2(rho/2)) / 2 = 2 e^-rho / (1 + e^-rho)^2
                let e = (-rho).exp();
                (2.0 * e / ((1.0 + e) * (1.0 + e))).powf(*exponent)
            }
            Self::Table(s) => {
                if rho <= s[0].0 {
                    return s[0].1;
                }
                let last = s[s.len() - 1];
                if rho > last.0 {
                    return 0.0;
                }
                if rho == last.0 {
                    return last.1;
                }
                let j = s.partition_point(|p| p.0 <= rho) - 1;
                let (r0, a0) = s[j];
                let (r1, a1) = s[j + 1];
                a0 + (a1 - a0) * (rho - r0) / (r1 - r0)
            }
            Self::Custom(f) => f(rho),
        }
    }
}

/// Annulus `(rho - r, rho + r)` on which `alpha >= alpha0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EssInfWitness {
    pub rho: f64,
    pub r: f64,
    pub alpha0: f64,
}

/// The potential with cached norms (all with respect to `dmu`).
#[derive(Clone, Debug)]
pub struct RadialWeight {
    profile: WeightProfile,
    dim: usize,
    p: f64,
    norm_p: f64,
    norm_inf: f64,
    norm_1: f64,
    witness: EssInfWitness,
}

const WITNESS_SAMPLES: usize = 10_000;
const NORM_CELLS: usize = 8000;

impl RadialWeight {
    /// Builds the weight for dimension `dim` and growth exponent `q`
    /// (`p = q / (q - 1)`). The ess-inf witness defaults to the annulus
    /// `(rho, r) = (2, 1)` when `alpha` is positive there, and to a scan otherwise.
    pub fn new(profile: WeightProfile, dim: usize, q: f64, witness: Option<(f64, f64)>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid("dimension must be at least 3"));
        }
        if !(q > 2.0) {
            return Err(Error::invalid(format!("q must exceed 2, got {q}")));
        }
        let mut horizon = (600.0 / (dim - 1) as f64).min(40.0);
        match &profile {
            WeightProfile::ConformalPower { exponent } => {
                if !(*exponent > (dim - 1) as f64) {
                    return Err(Error::invalid(format!(
                        "conformal exponent {exponent} must exceed N - 1 = {} for alpha in L^1",
                        dim - 1
                    )));
                }
            }
            WeightProfile::Table(s) => {
                if s.len() < 2 || s.windows(2).any(|w| !(w[1].0 > w[0].0)) || s[0].0 != 0.0 {
                    return Err(Error::invalid("weight table must start at rho = 0 with increasing radii"));
                }
                if s.iter().any(|(_, a)| !(*a >= 0.0) || !a.is_finite()) {
                    return Err(Error::invalid("weight table values must be finite and nonnegative"));
                }
                horizon = horizon.min(s[s.len() - 1].0);
            }
            WeightProfile::Custom(_) => {}
        }
        let p = q / (q - 1.0);
        let grid = RadialGrid::uniform(dim, NORM_CELLS, horizon, 6)?;
        let mut norm_inf = 0.0_f64;
        for &r in grid.nodes().iter().chain(grid.qp_rho()) {
            let a = profile.eval(r);
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("alpha({r})")));
            }
            if a < 0.0 {
                return Err(Error::invalid(format!("alpha({r}) = {a} is negative")));
            }
            norm_inf = norm_inf.max(a);
        }
        if norm_inf == 0.0 {
            return Err(Error::invalid("alpha vanishes identically"));
        }
        let norm_1 = grid.integrate(|r| profile.eval(r));
        let norm_p = grid.integrate(|r| profile.eval(r).powf(p)).powf(1.0 / p);
        let witness = match witness {
            Some((rho, r)) => {
                let w = witness_on(&profile, rho, r)?;
                if !(w.alpha0 > 0.0) {
                    return Err(Error::invalid(format!("alpha is not bounded below on the annulus ({rho}, {r})")));
                }
                w
            }
            None => match witness_on(&profile, 2.0, 1.0) {
                Ok(w) if w.alpha0 > 0.0 => w,
                _ => scan_witness(&profile, horizon)?,
            },
        };
        Ok(Self { profile, dim, p, norm_p, norm_inf, norm_1, witness })
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.profile.eval(rho)
    }

    pub fn profile(&self) -> &WeightProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn norm_p(&self) -> f64 {
        self.norm_p
    }

    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    pub fn norm_1(&self) -> f64 {
        self.norm_1
    }

    pub fn witness(&self) -> EssInfWitness {
        self.witness
    }
}

/// `alpha0 = min alpha` over a dense sample of `[rho - r, rho + r]`.
pub fn witness_on(profile: &WeightProfile, rho: f64, r: f64) -> Result<EssInfWitness> {
    if !(r > 0.0 && rho > r) {
        return Err(Error::invalid(format!("annulus needs rho > r > 0, got rho = {rho}, r = {r}")));
    }
    let n = WITNESS_SAMPLES;
    let alpha0 = (0..=n).map(|i| profile.eval(rho - r + 2.0 * r * i as f64 / n as f64)).fold(f64::INFINITY, f64::min);
    Ok(EssInfWitness { rho, r, alpha0 })
}

// Maximizes alpha0 * 2r over annuli whose sampled minimum is positive,
// using a sliding-window minimum for a geometric ladder of half-widths.
fn scan_witness(profile: &WeightProfile, horizon: f64) -> Result<EssInfWitness> {
    let n = WITNESS_SAMPLES;
    let h = horizon / n as f64;
    let samples: Vec<f64> = (0..=n).map(|i| profile.eval(i as f64 * h)).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for level in 0..40 {
        let half = ((n as f64 / 2.0) * 0.8_f64.powi(level)).round() as usize;
        if half == 0 || 2 * half > n {
            continue;
        }
        let mut window: VecDeque<usize> = VecDeque::new();
        for i in 0..=n {
            while window.back().is_some_and(|&j| samples[j] >= samples[i]) {
                window.pop_back();
            }
            window.push_back(i);
            if i < 2 * half {
                continue;
            }
            let start = i - 2 * half;
            while window.front().is_some_and(|&j| j < start) {
                window.pop_front();
            }
            let center = start + half;
            // need rho > r, i.e. the window cannot touch the origin
            if start == 0 {
                continue;
            }
            let m = samples[*window.front().expect("window is non-empty")];
            let score = m * 2.0 * half as f64 * h;
            if m > 0.0 && best.is_none_or(|b| score > b.0) {
                best = Some((score, center, half));
            }
        }
    }
    let (_, center, half) = best.ok_or_else(|| Error::invalid("alpha has no annulus with positive infimum"))?;
    witness_on(profile, center as f64 * h, half as f64 * h)
}

/// A complete discrete problem: grid, reaction term and potential.
#[derive(Clone, Debug)]
pub struct Problem {
    grid: Arc<RadialGrid>,
    nl: Nonlinearity,
    weight: RadialWeight,
    alpha_qp: Vec<f64>,
    energy: SymTridiagonal,
}

/// Gradient of `J_lambda` on the free nodes and its dual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub vector: Vec<f64>,
    /// `sqrt(r^T K^{-1} r)` with `K` the constrained energy matrix.
    pub norm: f64,
    /// Riesz representative `K^{-1} r`.
    pub riesz: Vec<f64>,
}

impl Problem {
    pub fn new(grid: Arc<RadialGrid>, nl: Nonlinearity, weight: RadialWeight) -> Result<Self> {
        let n = grid.dim();
        if weight.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weight.dim() });
        }
        let crit = 2.0 * n as f64 / (n as f64 - 2.0);
        if !(nl.q() < crit) {
            return Err(Error::invalid(format!("q = {} must lie below 2* = {crit}", nl.q())));
        }
        let alpha_qp: Vec<f64> = grid.qp_rho().iter().map(|&r| weight.eval(r)).collect();
        let energy = constrained_stiffness(&grid)?;
        Ok(Self { grid, nl, weight, alpha_qp, energy })
    }

    /// Same data on a different grid.
    pub fn regrid(&self, grid: Arc<RadialGrid>) -> Result<Self> {
        Self::new(grid, self.nl.clone(), self.weight.clone())
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn weight(&self) -> &RadialWeight {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Constrained energy matrix `K` (free nodes, includes `omega_{N-1}`).
    pub fn energy_matrix(&self) -> &SymTridiagonal {
        &self.energy
    }

    pub fn alpha_at_quadrature(&self) -> &[f64] {
        &self.alpha_qp
    }

    fn check(&self, u: &RadialFunction) -> Result<()> {
        if u.grid().nodes() != self.grid.nodes() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn phi(&self, u: &RadialFunction) -> Result<f64> {
        self.check(u)?;
        Ok(phi(u))
    }

    pub fn psi(&self, u: &RadialFunction) -> Result<f64> {
        self.check(u)?;
        let vals = u.qp_values();
        let jw = self.grid.qp_weights();
        let s = par::sum(vals.len(), |i| self.alpha_qp[i] * self.nl.primitive(vals[i]) * jw[i]);
        finite(self.grid.omega() * s, "Psi")
    }

    pub fn j_lambda(&self, u: &RadialFunction, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
        }
        let phi = self.phi(u)?;
        if lambda == 0.0 {
            return Ok(phi);
        }
        Ok(phi - lambda * self.psi(u)?)
    }

    /// `b_i = int alpha f(u) phi_i dmu` on the free nodes.
    pub fn psi_gradient(&self, u: &RadialFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        let mut b = load_vector(u, |i, v| self.alpha_qp[i] * self.nl.f(v));
        for (i, x) in b.iter_mut().enumerate() {
            *x = finite(*x, &format!("Psi gradient at node {i}"))?;
        }
        Ok(b)
    }

    /// Weak-form residual `<u, phi_i> - lambda int alpha f(u) phi_i dmu` on
    /// the free nodes, i.e. the gradient of `J_lambda` in nodal coordinates.
    pub fn weak_residual(&self, u: &RadialFunction, lambda: f64) -> Result<Residual> {
        let b = self.psi_gradient(u)?;
        let ku = self.energy.matvec(u.free_values());
        let vector: Vec<f64> = ku.iter().zip(&b).map(|(k, b)| k - lambda * b).collect();
        let riesz = self.energy.solve(&vector)?;
        let norm = vector.iter().zip(&riesz).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        Ok(Residual { vector, norm, riesz })
    }

    /// Riesz representative `K^{-1} r` of a nodal covector.
    pub fn riesz(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.energy.solve(r)
    }

    /// `int alpha |u|^nu dmu` (any `nu > 0`).
    pub fn weighted_power_integral(&self, u: &RadialFunction, nu: f64) -> Result<f64> {
        self.check(u)?;
        Ok(power_integral(u, nu, Some(&self.alpha_qp)))
    }
}

/// `Phi(u) = ||u||^2 / 2`.
pub fn phi(u: &RadialFunction) -> f64 {
    0.5 * dirichlet_energy(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_problem(cells: usize) -> Problem {
        let grid = Arc::new(RadialGrid::aligned(4, cells, 10.0, 6, &[1.0, 1.5, 2.5, 3.0]).unwrap());
        let nl = Nonlinearity::power(1.5, 3.0).unwrap();
        let w = RadialWeight::new(WeightProfile::ConformalPower { exponent: 4.0 }, 4, 3.0, None).unwrap();
        Problem::new(grid, nl, w).unwrap()
    }

    fn random_positive(grid: &Arc<RadialGrid>, seed: u64) -> RadialFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: f64 = rng.random_range(0.5..2.0);
        let b: f64 = rng.random_range(0.1..0.5);
        let c: f64 = rng.random_range(0.5..3.0);
        RadialFunction::sample(grid.clone(), |r| a * (-2.0 * r).exp() * (1.0 + b * (c * r).cos())).unwrap()
    }

    #[test]
    fn alpha_f_examples() {
        assert_eq!(compute_alpha_f(|_| 0.0, 3.0, 1e3, 1000).unwrap().value, 0.0);
        let c = compute_alpha_f(|_| 1.0, 2.5, 1e3, 1000).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.argmax, 0.0);
        let p = compute_alpha_f(|t: f64| t.signum() * t.abs().sqrt(), 3.0, 1e3, 10_000).unwrap();
        // first-order condition t^2 = 1/3 gives 3^{3/4} / 4
        let exact = 3f64.powf(0.75) / 4.0;
        assert!((p.value - exact).abs() < 1e-12, "{p:?}");
        assert!((p.argmax.abs() - 3f64.powf(-0.5)).abs() < 1e-6);
        assert!(!p.at_boundary);
        // dense grid cross-check of the same supremum
        let brute = (1..2_000_000).map(|i| i as f64 * 1e-6).map(|t| t.sqrt() / (1.0 + t * t)).fold(0.0, f64::max);
        assert!((brute - exact).abs() < 1e-10);
        let super_growth = compute_alpha_f(|t: f64| t.powi(3), 3.0, 1e3, 1000).unwrap();
        assert!(super_growth.at_boundary);
        assert!(compute_alpha_f(|t| t, 3.0, 1e3, 10).is_err());
    }

    #[test]
    fn nonlinearity_primitive_and_growth_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let table = NonlinearityKind::Table(vec![(-2.0, -1.0), (0.0, 0.0), (0.5, 0.8), (3.0, 1.2)]);
        for kind in [
            NonlinearityKind::Power { r: 1.5 },
            NonlinearityKind::Power { r: 2.0 },
            NonlinearityKind::Constant(1.0),
            table,
            NonlinearityKind::Custom(Arc::new(|t: f64| t.sin())),
        ] {
            let nl = Nonlinearity::new(kind, 3.0, None).unwrap();
            assert_eq!(nl.primitive(0.0), 0.0);
            for _ in 0..100 {
                let t: f64 = rng.random_range(-5.0..5.0);
                if t.abs() < 0.05 {
                    continue;
                }
                let h = 1e-5;
                let fd = (nl.primitive(t + h) - nl.primitive(t - h)) / (2.0 * h);
                let f = nl.f(t);
                assert!((fd - f).abs() <= 1e-6 * f.abs().max(1e-3), "{:?} t={t} {fd} {f}", nl.kind());
            }
            for _ in 0..10_000 {
                let t: f64 = rng.random_range(-1e3..1e3);
                assert!(nl.alpha_f() * (1.0 + t.abs().powf(2.0)) >= nl.f(t).abs() * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn nonlinearity_validation() {
        assert!(Nonlinearity::power(1.5, 2.0).is_err());
        assert!(Nonlinearity::power(1.0, 3.0).is_err());
        assert!(matches!(Nonlinearity::power(3.5, 3.0), Err(Error::GrowthViolated(_))));
        assert!(matches!(
            Nonlinearity::new(NonlinearityKind::Power { r: 1.5 }, 3.0, Some(0.1)),
            Err(Error::GrowthViolated(_))
        ));
        let nl = Nonlinearity::new(NonlinearityKind::Power { r: 1.5 }, 3.0, Some(1.0)).unwrap();
        assert_eq!(nl.alpha_f(), 1.0);
        assert_eq!(nl.f(0.0), 0.0);
    }

    #[test]
    fn weight_norms_and_witness() {
        let w = RadialWeight::new(WeightProfile::ConformalPower { exponent: 4.0 }, 4, 3.0, None).unwrap();
        assert!((w.norm_1() - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-8);
        assert_eq!(w.norm_inf(), 1.0 / 16.0);
        assert_eq!(w.p(), 1.5);
        let wit = w.witness();
        assert_eq!((wit.rho, wit.r), (2.0, 1.0));
        // alpha decreases in rho, so the infimum is attained at rho + r = 3
        assert!((wit.alpha0 - w.eval(3.0)).abs() < 1e-15);
        assert!(RadialWeight::new(WeightProfile::ConformalPower { exponent: 3.0 }, 4, 3.0, None).is_err());
        // table weight supported away from (1, 3): the scan must find another annulus
        let t = WeightProfile::Table(vec![(0.0, 0.0), (4.0, 0.0), (5.0, 1.0), (6.0, 1.0), (7.0, 0.0)]);
        let w = RadialWeight::new(t, 3, 3.0, None).unwrap();
        let wit = w.witness();
        assert!(wit.alpha0 > 0.0 && wit.rho - wit.r >= 4.0 && wit.rho + wit.r <= 7.0, "{wit:?}");
        assert!(wit.alpha0 <= w.eval(wit.rho - wit.r).min(w.eval(wit.rho + wit.r)));
    }

    #[test]
    fn energy_identities() {
        let p = example_problem(512);
        let g = p.grid().clone();
        let zero = RadialFunction::zero(g.clone());
        assert_eq!(p.phi(&zero).unwrap(), 0.0);
        assert_eq!(p.psi(&zero).unwrap(), 0.0);
        assert_eq!(p.j_lambda(&zero, 1.0).unwrap(), 0.0);
        let u = random_positive(&g, 1);
        assert_eq!(p.phi(&u).unwrap(), 0.5 * dirichlet_energy(&u));
        let psi = p.psi(&u).unwrap();
        assert!((p.psi(&u.scaled(4.0)).unwrap() - 8.0 * psi).abs() < 1e-10 * psi);
        assert_eq!(p.j_lambda(&u, 0.0).unwrap(), p.phi(&u).unwrap());
        let j1 = p.j_lambda(&u, 0.3).unwrap();
        let j2 = p.j_lambda(&u, 0.6).unwrap();
        assert!((j2 - (2.0 * j1 - p.phi(&u).unwrap())).abs() < 1e-12 * j2.abs().max(1.0));
    }

    #[test]
    fn residual_trivial_cases() {
        let p = example_problem(256);
        let zero = RadialFunction::zero(p.grid().clone());
        let r = p.weak_residual(&zero, 1.0).unwrap();
        assert!(r.vector.iter().all(|&x| x == 0.0));
        let nl = Nonlinearity::new(NonlinearityKind::Constant(1.0), 3.0, None).unwrap();
        let p1 = Problem::new(p.grid().clone(), nl, p.weight().clone()).unwrap();
        assert!(p1.weak_residual(&zero, 1.0).unwrap().norm > 0.0);
    }

    #[test]
    fn residual_matches_finite_differences() {
        let p = example_problem(512);
        let g = p.grid().clone();
        let lambda = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..10 {
            let u = random_positive(&g, 100 + trial);
            let r = p.weak_residual(&u, lambda).unwrap();
            let i = rng.random_range(50..400);
            let h = 1e-6;
            let mut e = vec![0.0; g.n_nodes()];
            e[i] = 1.0;
            let ei = RadialFunction::new(g.clone(), e).unwrap();
            let jp = p.j_lambda(&u.axpy(h, &ei).unwrap(), lambda).unwrap();
            let jm = p.j_lambda(&u.axpy(-h, &ei).unwrap(), lambda).unwrap();
            let fd = (jp - jm) / (2.0 * h);
            assert!((fd - r.vector[i]).abs() < 1e-6 * r.vector[i].abs(), "node {i}: {fd} vs {}", r.vector[i]);
        }
    }
}
