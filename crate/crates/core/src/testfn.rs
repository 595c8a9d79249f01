//! Geodesic annuli, plateau test functions, and the scaling diagnostics
//! `t -> t w` used to show that `J_lambda` dips below zero near the origin.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{Problem, RadialWeight};
use crate::hypgeom::{apply_rotation, montecarlo_integral_dmu, BallPoint, McEstimate, Rotation};
use crate::par;
use crate::radial::{dirichlet_energy, fmt17, GridMeta, RadialFunction, RadialGrid};

/// Geodesic shell `{ sigma : b - a < d_H(0, sigma) < b + a }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annulus {
    a: f64,
    b: f64,
}

impl Annulus {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(Error::invalid(format!("annulus needs 0 < a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    pub fn half_width(&self) -> f64 {
        self.a
    }

    pub fn center(&self) -> f64 {
        self.b
    }

    pub fn contains_radius(&self, rho: f64) -> bool {
        self.b - self.a < rho && rho < self.b + self.a
    }
}

pub fn annulus_membership(p: &BallPoint, ann: &Annulus) -> bool {
    ann.contains_radius(p.geodesic_radius())
}

/// The four radii where a plateau `w_{rho,r}` changes slope.
pub fn plateau_kinks(rho: f64, r: f64) -> [f64; 4] {
    [rho - r, rho - 0.5 * r, rho + 0.5 * r, rho + r]
}

/// `w(s) = 1` on `|s - rho| <= r/2`, `0` for `|s - rho| >= r`, linear between.
pub fn plateau_profile(rho: f64, r: f64, s: f64) -> f64 {
    let d = (s - rho).abs();
    if d <= 0.5 * r {
        1.0
    } else if d >= r {
        0.0
    } else {
        (2.0 / r) * (r - d)
    }
}

/// Plateau test function on a grid that has nodes at all four kinks, so the
/// piecewise-linear representation is exact.
#[derive(Debug, Clone)]
pub struct PlateauFunction {
    rho: f64,
    r: f64,
    function: RadialFunction,
}

impl PlateauFunction {
    /// Plateau on an existing grid; the kinks must be grid nodes.
    pub fn on_grid(grid: Arc<RadialGrid>, rho: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < rho) {
            return Err(Error::invalid(format!("plateau needs 0 < r < rho, got rho = {rho}, r = {r}")));
        }
        if rho + r > grid.r_max() {
            return Err(Error::invalid(format!("plateau support reaches {} beyond R_max = {}", rho + r, grid.r_max())));
        }
        for k in plateau_kinks(rho, r) {
            if !grid.has_node(k, 1e-14 * (1.0 + k)) {
                return Err(Error::invalid(format!("grid has no node at plateau kink {k}")));
            }
        }
        let function = RadialFunction::sample(grid, |s| plateau_profile(rho, r, s))?;
        Ok(Self { rho, r, function })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn function(&self) -> &RadialFunction {
        &self.function
    }

    pub fn support(&self) -> Annulus {
        Annulus { a: self.r, b: self.rho }
    }

    pub fn plateau(&self) -> Annulus {
        Annulus { a: 0.5 * self.r, b: self.rho }
    }
}

/// Builds `w_{rho,r}` on a uniform grid of the hinted size refined at its kinks.
pub fn build_plateau(rho: f64, r: f64, hint: &GridMeta) -> Result<PlateauFunction> {
    if !(r > 0.0 && r < rho) {
        return Err(Error::invalid(format!("plateau needs 0 < r < rho, got rho = {rho}, r = {r}")));
    }
    if rho + r > hint.r_max {
        return Err(Error::invalid(format!("plateau support reaches {} beyond R_max = {}", rho + r, hint.r_max)));
    }
    let grid = RadialGrid::aligned(hint.dim, hint.cells, hint.r_max, hint.quad_order, &plateau_kinks(rho, r))?;
    PlateauFunction::on_grid(Arc::new(grid), rho, r)
}

/// Plateau parameters for a weight: `(2, 1)` when `alpha` is positive there,
/// otherwise the weight's ess-inf witness annulus.
pub fn default_plateau_params(weight: &RadialWeight) -> (f64, f64) {
    let w = weight.witness();
    (w.rho, w.r)
}

/// `t_j = 10^{-j}`, `j = 1..=8`.
pub fn default_t_sequence() -> Vec<f64> {
    (1..=8).map(|j| 10f64.powi(-j)).collect()
}

fn check_t_sequence(ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::invalid("empty t sequence"));
    }
    for (i, &t) in ts.iter().enumerate() {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(format!("t_{i} = {t} outside (0, 1]")));
        }
        if i > 0 && !(t < ts[i - 1]) {
            return Err(Error::invalid("t sequence must be strictly decreasing"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub phi: f64,
    pub psi: f64,
    pub ratio: f64,
    pub j_lambda: Option<f64>,
    pub in_sublevel: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioTable {
    pub rows: Vec<DiagnosticRow>,
    /// Ratio strictly increasing along the sequence with a nontrivial total gain.
    pub blow_up: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativityTable {
    pub rows: Vec<DiagnosticRow>,
    /// Largest tabulated `t` with `J_lambda(t w) < 0`.
    pub first_negative_t: Option<f64>,
    pub lambda: f64,
    pub omega_bar: Option<f64>,
}

fn rows_for(
    w: &PlateauFunction,
    problem: &Problem,
    ts: &[f64],
    lambda: Option<f64>,
    omega_bar: Option<f64>,
) -> Result<Vec<DiagnosticRow>> {
    check_t_sequence(ts)?;
    if w.function().is_zero() {
        return Err(Error::invalid("test function is identically zero"));
    }
    let rows = par::map(ts.len(), |i| -> Result<DiagnosticRow> {
        let u = w.function().scaled(ts[i]);
        let phi = problem.phi(&u)?;
        let psi = problem.psi(&u)?;
        Ok(DiagnosticRow {
            t: ts[i],
            phi,
            psi,
            ratio: psi / phi,
            j_lambda: lambda.map(|l| phi - l * psi),
            in_sublevel: omega_bar.map(|o| phi < o * o),
        })
    });
    rows.into_iter().collect()
}

/// Table of `Phi(t w)`, `Psi(t w)` and their ratio along a decreasing `t` sequence.
pub fn ratio_blowup_diagnostic(w: &PlateauFunction, problem: &Problem, ts: &[f64]) -> Result<RatioTable> {
    let rows = rows_for(w, problem, ts, None, None)?;
    let increasing = rows.windows(2).all(|p| p[1].ratio > p[0].ratio * (1.0 + 1e-9));
    let blow_up = rows.len() > 1 && rows[0].ratio > 0.0 && increasing;
    Ok(RatioTable { rows, blow_up })
}

/// Table of `J_lambda(t w)` with sublevel membership `Phi(t w) < omega_bar^2`.
pub fn negativity_diagnostic(
    w: &PlateauFunction,
    problem: &Problem,
    lambda: f64,
    omega_bar: Option<f64>,
    ts: &[f64],
) -> Result<NegativityTable> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    let rows = rows_for(w, problem, ts, Some(lambda), omega_bar)?;
    let first_negative_t = rows.iter().find(|r| r.j_lambda.is_some_and(|j| j < 0.0)).map(|r| r.t);
    Ok(NegativityTable { rows, first_negative_t, lambda, omega_bar })
}

/// For `f(t) = |t|^{r-2} t` with `r < 2`, `J_lambda(t w) = t^2 Phi(w) - lambda t^r Psi(w)`
/// is negative exactly for `t < (lambda Psi(w) / Phi(w))^{1/(2-r)}`.
pub fn power_crossing(w: &PlateauFunction, problem: &Problem, lambda: f64) -> Result<Option<f64>> {
    let Some(r) = problem.nonlinearity().power_exponent() else {
        return Ok(None);
    };
    if !(r < 2.0) || !(lambda > 0.0) {
        return Ok(None);
    }
    let phi = problem.phi(w.function())?;
    let psi = problem.psi(w.function())?;
    if !(psi > 0.0) {
        return Ok(None);
    }
    Ok(Some((lambda * psi / phi).powf(1.0 / (2.0 - r))))
}

/// CSV with columns `t,Phi,Psi,ratio,J_lambda,in_sublevel`; absent fields are empty.
pub fn write_diagnostic_csv<W: Write>(rows: &[DiagnosticRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["t", "Phi", "Psi", "ratio", "J_lambda", "in_sublevel"])?;
    for r in rows {
        wtr.write_record([
            fmt17(r.t),
            fmt17(r.phi),
            fmt17(r.psi),
            fmt17(r.ratio),
            r.j_lambda.map(fmt17).unwrap_or_default(),
            r.in_sublevel.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyEcho {
    pub radial_energy: f64,
    pub estimates: Vec<McEstimate>,
    pub agree: bool,
}

/// Monte Carlo evaluation of `int |grad_H (w o g^{-1})|^2 dmu` for random
/// rotations `g`, with the Euclidean gradient taken by central differences
/// of the composed function. Each estimate is compared with the radial
/// Dirichlet energy at 3 standard errors.
pub fn rotated_energy_echo(w: &PlateauFunction, rotations: usize, samples: usize, seed: u64) -> Result<EnergyEcho> {
    let u = w.function();
    let dim = u.grid().dim();
    let radial_energy = dirichlet_energy(u);
    let cutoff = (0.5 * (w.rho() + w.r())).tanh() + 1e-3;
    let h = 1e-7;
    let mut estimates = Vec::with_capacity(rotations);
    for k in 0..rotations {
        let g = Rotation::seeded(dim, seed.wrapping_add(k as u64));
        let ginv = g.inverse();
        let value = |x: &[f64]| -> f64 {
            match BallPoint::new(x.to_vec()).and_then(|p| apply_rotation(&ginv, &p)) {
                Ok(p) => u.eval(p.geodesic_radius()),
                Err(_) => 0.0,
            }
        };
        let est = montecarlo_integral_dmu(
            |p| {
                let mut x = p.coords().to_vec();
                let mut grad_sq = 0.0;
                for i in 0..dim {
                    let x0 = x[i];
                    x[i] = x0 + h;
                    let up = value(&x);
                    x[i] = x0 - h;
                    let dn = value(&x);
                    x[i] = x0;
                    let d = (up - dn) / (2.0 * h);
                    grad_sq += d * d;
                }
                let c = 0.5 * (1.0 - p.norm_sq());
                c * c * grad_sq
            },
            dim,
            samples,
            cutoff,
            seed.wrapping_add(1000 + k as u64),
        )?;
        estimates.push(est);
    }
    let agree = estimates.iter().all(|e| e.agrees_with(radial_energy, 3.0, 0.0));
    Ok(EnergyEcho { radial_energy, estimates, agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Nonlinearity, NonlinearityKind, WeightProfile};
    use crate::radial::DEFAULT_QUAD_ORDER;

    fn meta(dim: usize) -> GridMeta {
        GridMeta { dim, cells: 512, r_max: 10.0, quad_order: DEFAULT_QUAD_ORDER }
    }

    fn problem_for(w: &PlateauFunction, kind: NonlinearityKind) -> Problem {
        let nl = Nonlinearity::new(kind, 3.0, None).unwrap();
        let alpha = RadialWeight::new(WeightProfile::ConformalPower { exponent: 4.0 }, 4, 3.0, None).unwrap();
        Problem::new(w.function().grid().clone(), nl, alpha).unwrap()
    }

    #[test]
    fn annulus_examples() {
        let ann = Annulus::new(1.0, 2.0).unwrap();
        let at_b = BallPoint::on_axis(3, 1.0f64.tanh()).unwrap();
        assert!((at_b.geodesic_radius() - 2.0).abs() < 1e-14);
        assert!(annulus_membership(&at_b, &ann));
        assert!(!annulus_membership(&BallPoint::origin(3).unwrap(), &ann));
        // |p| = tanh(1.25): d_H = log((1+s)/(1-s)) = 2.5
        let s = 1.25f64.tanh();
        assert!((((1.0 + s) / (1.0 - s)).ln() - 2.5).abs() < 1e-14);
        assert!(annulus_membership(&BallPoint::on_axis(4, s).unwrap(), &ann));
        assert!(Annulus::new(2.0, 1.0).is_err());
        assert!(Annulus::new(0.0, 1.0).is_err());
    }

    #[test]
    fn plateau_examples() {
        let w = build_plateau(2.0, 1.0, &meta(3)).unwrap();
        let f = w.function();
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(3.0), 0.0);
        assert!((f.eval(2.75) - 0.5).abs() < 1e-14);
        assert!(f.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        for (rho, v) in f.grid().nodes().iter().zip(f.values()) {
            assert_eq!(*v, plateau_profile(2.0, 1.0, *rho));
        }
        assert!(build_plateau(2.0, 2.5, &meta(3)).is_err());
        assert!(build_plateau(9.5, 1.0, &meta(3)).is_err());
    }

    #[test]
    fn plateau_energy_matches_closed_form() {
        // each ramp has slope 2 and sinh^2 s integrates to (sinh s cosh s - s) / 2
        let w = build_plateau(2.0, 1.0, &meta(3)).unwrap();
        let g = |s: f64| 0.5 * (s.sinh() * s.cosh() - s);
        let exact = 4.0 * std::f64::consts::PI * 4.0 * (g(1.5) - g(1.0) + g(3.0) - g(2.5));
        let e = dirichlet_energy(w.function());
        assert!((e - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn ratio_scaling_power() {
        let w = build_plateau(2.0, 1.0, &meta(4)).unwrap();
        let p = problem_for(&w, NonlinearityKind::Power { r: 1.5 });
        let tab = ratio_blowup_diagnostic(&w, &p, &[0.4, 0.1, 0.025]).unwrap();
        for pair in tab.rows.windows(2) {
            assert!((pair[1].ratio / pair[0].ratio - 2.0).abs() < 1e-12);
        }
        assert!(tab.blow_up);
        let lin =
            ratio_blowup_diagnostic(&w, &problem_for(&w, NonlinearityKind::Power { r: 2.0 }), &default_t_sequence())
                .unwrap();
        assert!(!lin.blow_up);
        let zero =
            ratio_blowup_diagnostic(&w, &problem_for(&w, NonlinearityKind::Zero), &default_t_sequence()).unwrap();
        assert!(zero.rows.iter().all(|r| r.ratio == 0.0) && !zero.blow_up);
        assert!(ratio_blowup_diagnostic(&w, &p, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn negativity_examples() {
        let w = build_plateau(2.0, 1.0, &meta(4)).unwrap();
        let zero = problem_for(&w, NonlinearityKind::Zero);
        let tab = negativity_diagnostic(&w, &zero, 1.0, Some(1.0), &default_t_sequence()).unwrap();
        assert!(tab.first_negative_t.is_none());
        assert!(tab.rows.iter().all(|r| r.j_lambda.unwrap() > 0.0));
        let p = problem_for(&w, NonlinearityKind::Power { r: 1.5 });
        assert!(negativity_diagnostic(&w, &p, 0.0, None, &default_t_sequence()).unwrap().first_negative_t.is_none());
        let lambda = 0.05;
        let tc = power_crossing(&w, &p, lambda).unwrap().unwrap();
        let tab = negativity_diagnostic(&w, &p, lambda, None, &default_t_sequence()).unwrap();
        let expected = default_t_sequence().into_iter().find(|&t| t < tc);
        assert_eq!(tab.first_negative_t, expected);
        let just = negativity_diagnostic(&w, &p, lambda, None, &[tc * 1.001, tc * 0.999]).unwrap();
        assert_eq!(just.first_negative_t, Some(tc * 0.999));
    }

    #[test]
    fn diagnostic_csv_header() {
        let w = build_plateau(2.0, 1.0, &meta(4)).unwrap();
        let p = problem_for(&w, NonlinearityKind::Power { r: 1.5 });
        let tab = negativity_diagnostic(&w, &p, 0.1, Some(1.0), &[0.1]).unwrap();
        let mut buf = Vec::new();
        write_diagnostic_csv(&tab.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,Phi,Psi,ratio,J_lambda,in_sublevel\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
