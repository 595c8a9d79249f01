//! Explicit constants of the existence argument: the Sobolev constant
//! estimate, `h(omega)`, the admissible threshold `lambda*`, and the
//! sublevel bound `Theta(r)` with its analytic majorant.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::numerics::golden_section_max;
use crate::par;
use crate::radial::{
    constrained_stiffness, dirichlet_energy, load_vector, power_integral, GridMeta, RadialFunction, RadialGrid,
};

pub const C_Q_CAVEAT: &str = "c_q: discrete radial estimate";

/// `||u||_{L^nu(dmu)} / ||u||`.
pub fn sobolev_quotient(u: &RadialFunction, nu: f64) -> f64 {
    let e = dirichlet_energy(u);
    if e == 0.0 {
        return 0.0;
    }
    power_integral(u, nu, None).powf(1.0 / nu) / e.sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct SobolevOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Relative change of the quotient below which a start is converged.
    pub tol: f64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        Self { starts: 10, seed: 0, max_iters: 20_000, tol: 1e-14 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevEstimate {
    pub value: f64,
    pub nu: f64,
    pub converged: bool,
    pub iterations: usize,
    pub starts: usize,
    pub seed: u64,
    pub grid: GridMeta,
    #[serde(skip)]
    pub maximizer: Option<RadialFunction>,
}

fn random_bumps(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng, reach: f64) -> Result<RadialFunction> {
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(1..=3))
        .map(|_| (rng.random_range(0.1..1.0), rng.random_range(0.0..reach), rng.random_range(0.2..2.0_f64.min(reach))))
        .collect();
    let r_max = grid.r_max();
    RadialFunction::sample(grid.clone(), |r| {
        bumps.iter().map(|&(a, c, w)| a * (1.0 - (r - c).abs() / w).max(0.0)).sum::<f64>() * (r_max - r) / r_max
    })
}

/// Maximizes `||u||_{L^nu} / ||u||` over the discrete radial space.
///
/// Each start runs the normalized Riesz-gradient ascent
/// `u <- K^{-1} g(u) / ||K^{-1} g(u)||` with `g` the gradient of
/// `int |u|^nu dmu`; for a convex functional on the unit sphere this
/// iteration never decreases the quotient. The best start wins.
pub fn estimate_sobolev_constant(grid: &Arc<RadialGrid>, nu: f64, opts: &SobolevOptions) -> Result<SobolevEstimate> {
    let n = grid.dim() as f64;
    let crit = 2.0 * n / (n - 2.0);
    if !(nu > 2.0 && nu < crit) {
        return Err(Error::invalid(format!("nu = {nu} must lie strictly inside (2, {crit})")));
    }
    if opts.starts == 0 {
        return Err(Error::invalid("need at least one start"));
    }
    let k = constrained_stiffness(grid)?;
    let reach = grid.r_max().min(4.0);
    let runs = par::map(opts.starts, |s| -> Result<(f64, bool, usize, RadialFunction)> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(s as u64);
        let mut u = random_bumps(grid, &mut rng, reach)?;
        u = u.scaled(1.0 / dirichlet_energy(&u).sqrt());
        let mut quotient = sobolev_quotient(&u, nu);
        for it in 1..=opts.max_iters {
            let g = load_vector(&u, |_, v| nu * v.abs().powf(nu - 2.0) * v);
            let d = k.solve(&g)?;
            let norm = g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::NotConverged("Sobolev ascent hit a zero gradient".into()));
            }
            let free: Vec<f64> = d.iter().map(|x| x / norm).collect();
            u = RadialFunction::from_free(grid.clone(), &free)?;
            let next = sobolev_quotient(&u, nu);
            let change = (next - quotient).abs();
            quotient = quotient.max(next);
            if change <= opts.tol * quotient {
                return Ok((quotient, true, it, u));
            }
        }
        Ok((quotient, false, opts.max_iters, u))
    });
    let mut best: Option<(f64, bool, usize, RadialFunction)> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.0 > b.0) {
            best = Some(run);
        }
    }
    let (value, converged, iterations, u) = best.expect("at least one start");
    Ok(SobolevEstimate {
        value,
        nu,
        converged,
        iterations,
        starts: opts.starts,
        seed: opts.seed,
        grid: grid.meta(),
        maximizer: Some(u),
    })
}

/// Coefficients of `h(omega) = omega / (a + b omega^{q-1})` with
/// `a = q sqrt(2) ||alpha||_p` and `b = 2^{q/2} c_q^{q-1} ||alpha||_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HCoefficients {
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl HCoefficients {
    pub fn from_norms(q: f64, norm_p: f64, norm_inf: f64, c_q: f64) -> Self {
        Self { a: q * 2f64.sqrt() * norm_p, b: 2f64.powf(q / 2.0) * c_q.powf(q - 1.0) * norm_inf, q }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        omega / (self.a + self.b * omega.powf(self.q - 1.0))
    }

    /// Maximizer from `a = b (q - 2) omega^{q-1}`.
    pub fn closed_form_argmax(&self) -> Result<f64> {
        if !(self.q > 2.0) {
            return Err(Error::invalid(format!("q = {} <= 2: h has no interior maximum", self.q)));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::invalid("h coefficients must be positive"));
        }
        Ok((self.a / (self.b * (self.q - 2.0))).powf(1.0 / (self.q - 1.0)))
    }

    /// Derivative-free maximization in `log omega`. A coarse golden-section
    /// pass is refined by a second pass on `log h(omega) - log h(omega_0)`
    /// written with `ln_1p`/`exp_m1`, which keeps the objective accurate
    /// next to the flat top.
    pub fn golden_argmax(&self) -> Result<f64> {
        let scale = (self.a / self.b).powf(1.0 / (self.q - 1.0)).ln();
        let e = self.q - 1.0;
        let log_h = |s: f64| s - (self.a + self.b * (e * s).exp()).ln();
        let (s0, _) = golden_section_max(log_h, scale - 20.0, scale + 20.0, 1e-12);
        let base = self.a + self.b * (e * s0).exp();
        let rel = |s: f64| (s - s0) - (self.b * (e * s0).exp() * (e * (s - s0)).exp_m1() / base).ln_1p();
        let (s1, _) = golden_section_max(rel, s0 - 1e-4, s0 + 1e-4, 1e-16);
        Ok(s1.exp())
    }
}

pub fn h_of_omega(omega: f64, q: f64, norm_p: f64, norm_inf: f64, c_q: f64) -> f64 {
    HCoefficients::from_norms(q, norm_p, norm_inf, c_q).eval(omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HMaximum {
    pub omega_star: f64,
    pub h_max: f64,
    pub golden_omega_star: f64,
}

/// Closed-form maximizer of `h`, cross-checked against golden-section search.
pub fn maximize_h(q: f64, norm_p: f64, norm_inf: f64, c_q: f64) -> Result<HMaximum> {
    maximize_h_coefficients(HCoefficients::from_norms(q, norm_p, norm_inf, c_q))
}

pub fn maximize_h_coefficients(h: HCoefficients) -> Result<HMaximum> {
    let omega_star = h.closed_form_argmax()?;
    let golden = h.golden_argmax()?;
    if (golden - omega_star).abs() > 1e-8 * omega_star {
        return Err(Error::NotConverged(format!(
            "closed-form maximizer {omega_star} disagrees with golden section {golden}"
        )));
    }
    Ok(HMaximum { omega_star, h_max: h.eval(omega_star), golden_omega_star: golden })
}

/// `lambda* = q max h / (alpha_f c_q)`.
pub fn lambda_star(q: f64, alpha_f: f64, c_q: f64, h_max: f64) -> Result<f64> {
    if !(alpha_f > 0.0) {
        return Err(Error::invalid(
            "alpha_f = 0: f vanishes under the growth envelope and only the trivial solution exists",
        ));
    }
    if !(c_q > 0.0) {
        return Err(Error::invalid("c_q must be positive"));
    }
    Ok(q * h_max / (alpha_f * c_q))
}

/// `lambda*(omega) = q h(omega) / (alpha_f c_q)`.
pub fn lambda_star_at(omega: f64, q: f64, alpha_f: f64, c_q: f64, norm_p: f64, norm_inf: f64) -> Result<f64> {
    lambda_star(q, alpha_f, c_q, h_of_omega(omega, q, norm_p, norm_inf, c_q))
}

/// Upper bound for `Theta(r)`:
/// `alpha_f c_q (||alpha||_p sqrt(2/r) + 2^{q/2} c_q^{q-1} ||alpha||_inf r^{q/2-1} / q)`.
pub fn theta_majorant(r: f64, alpha_f: f64, c_q: f64, norm_p: f64, norm_inf: f64, q: f64) -> f64 {
    alpha_f
        * c_q
        * (norm_p * (2.0 / r).sqrt() + 2f64.powf(q / 2.0) * c_q.powf(q - 1.0) / q * norm_inf * r.powf(q / 2.0 - 1.0))
}

/// `M_omega = c_q alpha_f (sqrt(2) ||alpha||_p omega + 2^{q/2} c_q^{q-1} ||alpha||_inf omega^q)`,
/// the bound with `||u_lambda||^2 < lambda M_omega`.
pub fn m_omega(omega: f64, alpha_f: f64, c_q: f64, norm_p: f64, norm_inf: f64, q: f64) -> f64 {
    c_q * alpha_f * (2f64.sqrt() * norm_p * omega + 2f64.powf(q / 2.0) * c_q.powf(q - 1.0) * norm_inf * omega.powf(q))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaSample {
    /// `max Psi / r` over the sampled sublevel (never below 0, since `u = 0` is admissible).
    pub value: f64,
    pub r: f64,
    pub best_psi: f64,
    pub candidates: usize,
    pub seed: u64,
    #[serde(skip)]
    pub maximizer: Option<RadialFunction>,
}

/// Radius beyond which `alpha < 1e-3 ||alpha||_inf` (clamped to the grid).
fn weight_reach(problem: &Problem) -> f64 {
    let w = problem.weight();
    let cutoff = 1e-3 * w.norm_inf();
    let r_max = problem.grid().r_max();
    let mut reach = 0.5;
    for i in 1..=1000 {
        let r = r_max * i as f64 / 1000.0;
        if w.eval(r) >= cutoff {
            reach = r;
        }
    }
    reach
}

fn rescale_to(u: &RadialFunction, norm: f64) -> RadialFunction {
    let e = dirichlet_energy(u).sqrt();
    if e == 0.0 {
        u.clone()
    } else {
        u.scaled(norm / e)
    }
}

/// Projected ascent of `Psi` on the sphere `||u|| = radius`.
fn ascend_on_sphere(
    problem: &Problem,
    mut u: RadialFunction,
    radius: f64,
    iters: usize,
) -> Result<(RadialFunction, f64)> {
    let grid = problem.grid().clone();
    let mut psi = problem.psi(&u)?;
    for _ in 0..iters {
        let b = problem.psi_gradient(&u)?;
        let d = problem.riesz(&b)?;
        let dn = b.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>().sqrt();
        if !(dn > 0.0) {
            break;
        }
        let dir = RadialFunction::from_free(grid.clone(), &d)?;
        let mut improved = None;
        let full = rescale_to(&dir, radius);
        let pf = problem.psi(&full)?;
        if pf > psi {
            improved = Some((full, pf));
        } else {
            let mut s = radius / dn;
            for _ in 0..40 {
                let v = rescale_to(&u.axpy(s, &dir)?, radius);
                let pv = problem.psi(&v)?;
                if pv > psi {
                    improved = Some((v, pv));
                    break;
                }
                s *= 0.5;
            }
        }
        match improved {
            Some((v, pv)) => {
                let gain = pv - psi;
                u = v;
                psi = pv;
                if gain <= 1e-13 * psi.abs() {
                    break;
                }
            }
            None => break,
        }
    }
    Ok((u, psi))
}

/// Lower estimate of `Theta(r) = sup { Psi(u) : Phi(u) < r } / r` from random
/// nonnegative bump combinations placed where `alpha` is largest, scaled to
/// `Phi = r (1 - 1e-6)`, with the best few refined by projected ascent.
pub fn theta_sample(problem: &Problem, r: f64, n_candidates: usize, seed: u64) -> Result<ThetaSample> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("sublevel radius must be positive, got {r}")));
    }
    let grid = problem.grid().clone();
    let radius = (2.0 * r * (1.0 - 1e-6)).sqrt();
    let reach = weight_reach(problem).min(grid.r_max());
    let scored = par::map(n_candidates.max(1), |k| -> Result<(f64, RadialFunction)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let u = rescale_to(&random_bumps(&grid, &mut rng, reach)?, radius);
        Ok((problem.psi(&u)?, u))
    });
    let mut scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let refined = par::map(scored.len().min(4), |i| ascend_on_sphere(problem, scored[i].1.clone(), radius, 500));
    let mut best_psi = 0.0;
    let mut maximizer = RadialFunction::zero(grid.clone());
    for res in refined {
        let (u, psi) = res?;
        if psi > best_psi {
            best_psi = psi;
            maximizer = u;
        }
    }
    Ok(ThetaSample { value: best_psi / r, r, best_psi, candidates: n_candidates, seed, maximizer: Some(maximizer) })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub r: f64,
    pub theta_sample: f64,
    pub theta_majorant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSeeds {
    pub sobolev: u64,
    pub theta: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub c_q_estimate: f64,
    pub c_q_caveat: String,
    pub c_q_converged: bool,
    pub c_q_iterations: usize,
    pub q: f64,
    pub p: f64,
    pub alpha_f: f64,
    pub norm_p: f64,
    pub norm_inf: f64,
    pub norm_1: f64,
    pub h_a: f64,
    pub h_b: f64,
    pub omega_star: f64,
    pub golden_omega_star: f64,
    pub h_max: f64,
    pub lambda_star: f64,
    pub m_omega_star: f64,
    pub bound_curve: Vec<BoundPoint>,
    pub grid: GridMeta,
    pub seeds: ThresholdSeeds,
}

impl ThresholdReport {
    pub fn lambda_star_at(&self, omega: f64) -> Result<f64> {
        lambda_star_at(omega, self.q, self.alpha_f, self.c_q_estimate, self.norm_p, self.norm_inf)
    }

    pub fn theta_majorant(&self, r: f64) -> f64 {
        theta_majorant(r, self.alpha_f, self.c_q_estimate, self.norm_p, self.norm_inf, self.q)
    }

    pub fn m_omega(&self, omega: f64) -> f64 {
        m_omega(omega, self.alpha_f, self.c_q_estimate, self.norm_p, self.norm_inf, self.q)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdOptions {
    pub sobolev: SobolevOptions,
    pub theta_candidates: usize,
    pub theta_seed: u64,
    /// Multiples of `omega*^2` at which the bound curve is tabulated.
    pub curve_factors: [f64; 5],
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            sobolev: SobolevOptions::default(),
            theta_candidates: 32,
            theta_seed: 1,
            curve_factors: [0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

/// All threshold constants for a problem, with `c_q` estimated on its grid.
pub fn threshold_report(problem: &Problem, opts: &ThresholdOptions) -> Result<ThresholdReport> {
    let nl = problem.nonlinearity();
    let w = problem.weight();
    let q = nl.q();
    let c = estimate_sobolev_constant(problem.grid(), q, &opts.sobolev)?;
    let coeffs = HCoefficients::from_norms(q, w.norm_p(), w.norm_inf(), c.value);
    let hm = maximize_h_coefficients(coeffs)?;
    let lstar = lambda_star(q, nl.alpha_f(), c.value, hm.h_max)?;
    let mut report = ThresholdReport {
        c_q_estimate: c.value,
        c_q_caveat: C_Q_CAVEAT.to_string(),
        c_q_converged: c.converged,
        c_q_iterations: c.iterations,
        q,
        p: w.p(),
        alpha_f: nl.alpha_f(),
        norm_p: w.norm_p(),
        norm_inf: w.norm_inf(),
        norm_1: w.norm_1(),
        h_a: coeffs.a,
        h_b: coeffs.b,
        omega_star: hm.omega_star,
        golden_omega_star: hm.golden_omega_star,
        h_max: hm.h_max,
        lambda_star: lstar,
        m_omega_star: 0.0,
        bound_curve: Vec::new(),
        grid: problem.grid().meta(),
        seeds: ThresholdSeeds { sobolev: opts.sobolev.seed, theta: opts.theta_seed },
    };
    report.m_omega_star = report.m_omega(hm.omega_star);
    for f in opts.curve_factors {
        let r = f * hm.omega_star * hm.omega_star;
        let sample = theta_sample(problem, r, opts.theta_candidates, opts.theta_seed)?;
        report.bound_curve.push(BoundPoint { r, theta_sample: sample.value, theta_majorant: report.theta_majorant(r) });
    }
    Ok(report)
}
