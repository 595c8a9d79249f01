//! Closed-form geometry of the Poincaré ball model.
//!
//! Points live in the open Euclidean unit ball of `R^N` with the conformal
//! metric `4 (1 - |x|^2)^-2 delta_ij`. Everything here is a pure function of
//! its inputs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::par;

/// Points with `|x| > 1 - BOUNDARY_GUARD` are rejected.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// A point of the ball in Euclidean coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
}

impl BallPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::invalid(format!("ball dimension must be at least 3, got {}", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("ball point coordinate".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1.0 - BOUNDARY_GUARD {
            return Err(Error::InvalidPoint(norm));
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    /// Point at Euclidean radius `radius` along the first axis.
    pub fn on_axis(dim: usize, radius: f64) -> Result<Self> {
        let mut c = vec![0.0; dim];
        c[0] = radius;
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Geodesic distance to the origin, `log((1 + |x|) / (1 - |x|))`.
    pub fn geodesic_radius(&self) -> f64 {
        geodesic_radius_of_euclidean(self.norm())
    }
}

/// Geodesic polar coordinates `(rho, theta)` of a point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPolar {
    pub rho: f64,
    pub theta: Vec<f64>,
}

impl GeodesicPolar {
    pub fn new(rho: f64, theta: Vec<f64>) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("geodesic radius must be >= 0, got {rho}")));
        }
        let n = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("direction must be a unit vector, |theta| = {n}")));
        }
        Ok(Self { rho, theta })
    }

    /// Polar coordinates of `p`; the origin gets the first basis vector as direction.
    pub fn from_point(p: &BallPoint) -> Self {
        let s = p.norm();
        let theta = if s == 0.0 {
            let mut e = vec![0.0; p.dim()];
            e[0] = 1.0;
            e
        } else {
            p.coords().iter().map(|c| c / s).collect()
        };
        Self { rho: p.geodesic_radius(), theta }
    }

    pub fn to_point(&self) -> Result<BallPoint> {
        let s = euclidean_radius_of_geodesic_radius(self.rho);
        BallPoint::new(self.theta.iter().map(|t| s * t).collect())
    }
}

fn geodesic_radius_of_euclidean(s: f64) -> f64 {
    2.0 * s.atanh()
}

fn euclidean_radius_of_geodesic_radius(rho: f64) -> f64 {
    (0.5 * rho).tanh()
}

/// `d_H(x, 0) = log((1 + |x|) / (1 - |x|))`.
pub fn geodesic_distance_origin(p: &BallPoint) -> f64 {
    p.geodesic_radius()
}

/// Two-point distance `arccosh(1 + 2|x - y|^2 / ((1 - |x|^2)(1 - |y|^2)))`.
pub fn geodesic_distance(p1: &BallPoint, p2: &BallPoint) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch { expected: p1.dim(), got: p2.dim() });
    }
    let diff_sq: f64 = p1.coords().iter().zip(p2.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
    let x = 2.0 * diff_sq / ((1.0 - p1.norm_sq()) * (1.0 - p2.norm_sq()));
    // arccosh(1 + x) written to stay accurate for small x
    Ok((x + (x * (x + 2.0)).sqrt()).ln_1p())
}

/// Density of the Riemannian volume element, `2^N (1 - |x|^2)^-N`.
pub fn volume_density(p: &BallPoint) -> f64 {
    volume_density_at(p.dim(), p.norm_sq())
}

pub(crate) fn volume_density_at(dim: usize, norm_sq: f64) -> f64 {
    (2.0 / (1.0 - norm_sq)).powi(dim as i32)
}

/// Euclidean radius of the geodesic ball `B_H(R)`, i.e. `tanh(R / 2)`.
pub fn euclidean_radius_of_geodesic_ball(radius: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("geodesic radius must be positive, got {radius}")));
    }
    Ok(euclidean_radius_of_geodesic_radius(radius))
}

/// Area of the unit sphere `S^{N-1}`, `2 pi^{N/2} / Gamma(N/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    (std::f64::consts::LN_2 + 0.5 * n * std::f64::consts::PI.ln() - ln_gamma(0.5 * n)).exp()
}

/// Lebesgue volume of the Euclidean ball of radius `radius` in `R^N`.
pub fn euclidean_ball_volume(dim: usize, radius: f64) -> f64 {
    sphere_area(dim) / dim as f64 * radius.powi(dim as i32)
}

/// Conformal factor `(1 - |x|^2) / 2`: the hyperbolic length of a Euclidean
/// unit vector is its reciprocal, so `|grad_H u|_g = factor * |grad u|`.
pub fn conformal_factor(p: &BallPoint) -> f64 {
    0.5 * (1.0 - p.norm_sq())
}

/// An element of `SO(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    matrix: DMatrix<f64>,
}

impl Rotation {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("rotation matrix must be square"));
        }
        let n = matrix.nrows();
        let gram = matrix.transpose() * &matrix;
        let off = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if off > 1e-10 {
            return Err(Error::invalid(format!("matrix is not orthogonal (deviation {off:e})")));
        }
        let det = matrix.determinant();
        if (det - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("rotation must have determinant +1, got {det}")));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    /// Rotation by `angle` in the `(i, j)` coordinate plane, taking `e_i` towards `e_j`.
    pub fn plane(dim: usize, i: usize, j: usize, angle: f64) -> Result<Self> {
        if i >= dim || j >= dim || i == j {
            return Err(Error::invalid(format!("invalid rotation plane ({i}, {j}) in dimension {dim}")));
        }
        let mut m = DMatrix::identity(dim, dim);
        let (s, c) = angle.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(j, i)] = s;
        m[(i, j)] = -s;
        Ok(Self { matrix: m })
    }

    /// Random rotation: QR of a Gaussian matrix with the sign of `R`'s diagonal
    /// folded into `Q`, then a column flip if the determinant is negative.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for k in 0..dim {
            if r[(k, k)] < 0.0 {
                let mut col = q.column_mut(k);
                col *= -1.0;
            }
        }
        if q.determinant() < 0.0 {
            let mut col = q.column_mut(0);
            col *= -1.0;
        }
        Self { matrix: q }
    }

    pub fn seeded(dim: usize, seed: u64) -> Self {
        Self::random(dim, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> Self {
        Self { matrix: self.matrix.transpose() }
    }

    pub fn compose(&self, other: &Rotation) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(Self { matrix: &self.matrix * &other.matrix })
    }
}

/// The linear action `g . x`.
pub fn apply_rotation(g: &Rotation, p: &BallPoint) -> Result<BallPoint> {
    if g.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: p.dim() });
    }
    let v = &g.matrix * DVector::from_column_slice(p.coords());
    // |g x| = |x| up to rounding, so the guard cannot trip for a valid input
    Ok(BallPoint { coords: v.as_slice().to_vec() })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `|estimate - reference| <= k * stderr + floor`.
    pub fn agrees_with(&self, reference: f64, k: f64, floor: f64) -> bool {
        (self.estimate - reference).abs() <= k * self.stderr + floor
    }
}

const MC_CHUNK: usize = 4096;

/// Uniform sample from the Euclidean ball of radius `radius` in `R^dim`.
pub(crate) fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let s = radius * u.powf(1.0 / dim as f64);
        return g.into_iter().map(|x| x * s / n).collect();
    }
}

/// Estimates `int_{B(cutoff)} h dmu` by uniform Euclidean sampling of
/// `B(cutoff)` reweighted by the volume density.
///
/// Samples are drawn in fixed chunks with one ChaCha stream per chunk, so
/// the estimate is reproducible for a given seed regardless of scheduling.
pub fn montecarlo_integral_dmu<H>(
    h: H,
    dim: usize,
    n_samples: usize,
    cutoff_radius: f64,
    seed: u64,
) -> Result<McEstimate>
where
    H: Fn(&BallPoint) -> f64 + Sync + Send,
{
    if n_samples == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample"));
    }
    if !(cutoff_radius > 0.0 && cutoff_radius < 1.0) {
        return Err(Error::invalid(format!("cutoff radius must lie in (0, 1), got {cutoff_radius}")));
    }
    if dim < 3 {
        return Err(Error::invalid("ball dimension must be at least 3"));
    }
    let cutoff = cutoff_radius.min(1.0 - BOUNDARY_GUARD);
    let partials = par::map_chunks(n_samples, MC_CHUNK, |range| -> Result<(f64, f64, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((range.start / MC_CHUNK) as u64);
        // chunk-local Welford accumulation
        let (mut mean, mut m2, mut n) = (0.0_f64, 0.0_f64, 0usize);
        for _ in range {
            let x = sample_ball(&mut rng, dim, cutoff);
            let p = BallPoint { coords: x };
            let hv = h(&p);
            if !hv.is_finite() {
                return Err(Error::NonFinite(format!("integrand at |x| = {}", p.norm())));
            }
            let v = hv * volume_density(&p);
            n += 1;
            let d = v - mean;
            mean += d / n as f64;
            m2 += d * (v - mean);
        }
        Ok((mean, m2, n))
    });
    let (mut mean, mut m2, mut n) = (0.0_f64, 0.0_f64, 0usize);
    for part in partials {
        let (mb, m2b, nb) = part?;
        if nb == 0 {
            continue;
        }
        let tot = n + nb;
        let d = mb - mean;
        mean += d * nb as f64 / tot as f64;
        m2 += m2b + d * d * (n as f64) * (nb as f64) / tot as f64;
        n = tot;
    }
    let vol = euclidean_ball_volume(dim, cutoff);
    let var = if n > 1 { m2 / (n as f64 - 1.0) } else { 0.0 };
    Ok(McEstimate { estimate: vol * mean, stderr: vol * (var / n as f64).sqrt(), samples: n })
}
