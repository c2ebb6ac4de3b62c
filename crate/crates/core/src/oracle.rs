//! Brute-force estimates of the integrated L1 loss and risk, computed
//! straight from the defining integrals.
//!
//! Everything here works from the model densities alone: points come from
//! `RadialModel::sample_point`, densities from `generator`, and the
//! low-dimensional deterministic route from adaptive Simpson. None of the
//! spherical-cap reduction or the closed risk formulas are used, so
//! agreement with `risk` and `uniform` is evidence, not circularity. The
//! only import from `risk` is the `LossTransform` data type that `mc_risk`
//! accepts as an argument.

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson_split;
use crate::radial::{CenterEstimator, RadialModel};
use crate::risk::LossTransform;

/// How a `LossEstimate` was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    /// Importance sampling from the equal mixture of the two densities;
    /// the integrand-over-proposal ratio is bounded by 2 everywhere.
    MixtureImportance,
    /// Draws from the target density averaging min(1, ratio), then the
    /// overlap identity loss = 2 - 2 OVL.
    OverlapSampling,
    /// Outer draws of the observation with a nested mixture-importance
    /// loss estimate per draw.
    NestedMonteCarlo,
}

/// A stochastic estimate of an L1 loss (or transformed risk).
///
/// For plain losses `value` lies in [0, 2]. `mc_risk` reuses the type;
/// with a non-identity transform its value lies in [gamma(0), gamma(2)].
#[derive(Clone, Debug)]
pub struct LossEstimate {
    pub value: f64,
    pub std_err: f64,
    /// Number of (outer) draws requested. The identical-density shortcut
    /// echoes the request without sampling.
    pub n: usize,
    pub method: EstimateMethod,
}

/// Tolerance knob for the deterministic low-dimensional route.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    /// Absolute error target for the integral.
    pub tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { tol: 1e-8 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || !(self.tol >= 1e-12) || self.tol > 1e-3 {
            return Err(Error::InvalidInput(format!(
                "grid tolerance must lie in [1e-12, 1e-3], got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Estimates the integrated L1 distance between q centered at `theta` and
/// the scale-expanded copy at `center` by importance sampling from their
/// equal mixture. Identical densities (c = 1 and center = theta) return an
/// exact zero without sampling.
pub fn mc_l1_loss(
    q: &RadialModel,
    theta: &[f64],
    center: &[f64],
    c: f64,
    n: usize,
    seed: u64,
) -> Result<LossEstimate> {
    check_config(q, theta, center, c)?;
    check_n(n, "mc_l1_loss")?;
    if c == 1.0 && theta.iter().zip(center).all(|(a, b)| a == b) {
        return Ok(LossEstimate {
            value: 0.0,
            std_err: 0.0,
            n,
            method: EstimateMethod::MixtureImportance,
        });
    }
    let cc = c * c;
    let cd = c.powi(q.dim() as i32);
    // |q_t - q_h| / ((q_t + q_h)/2), bounded by 2; both densities vanishing
    // can only happen by underflow in a region of negligible mass.
    let ratio = |y: &[f64]| {
        let a = q.generator(dist2(y, theta));
        let b = q.generator(dist2(y, center) / cc) / cd;
        let g = 0.5 * (a + b);
        if g == 0.0 {
            0.0
        } else {
            (a - b).abs() / g
        }
    };
    // Stratified halves of the mixture: n/2 draws from each component.
    let n_first = n / 2;
    let n_second = n - n_first;
    let from_target = q.sample_point(theta, n_first, derive_seed(seed, 1))?;
    let mut from_expanded = q.sample_point(center, n_second, derive_seed(seed, 2))?;
    for y in &mut from_expanded {
        for (v, ctr) in y.iter_mut().zip(center) {
            *v = ctr + c * (*v - ctr);
        }
    }
    let first: Vec<f64> = from_target.iter().map(|y| ratio(y)).collect();
    let second: Vec<f64> = from_expanded.iter().map(|y| ratio(y)).collect();
    let (m1, se1) = mean_and_se(&first);
    let (m2, se2) = mean_and_se(&second);
    Ok(LossEstimate {
        value: 0.5 * (m1 + m2),
        std_err: 0.5 * (se1 * se1 + se2 * se2).sqrt(),
        n,
        method: EstimateMethod::MixtureImportance,
    })
}

/// Second, independent sampling route to the same loss: draw from q_theta,
/// average min(1, ratio) to get the overlap coefficient, and convert via
/// loss = 2 - 2 OVL.
pub fn overlap_route_loss(
    q: &RadialModel,
    theta: &[f64],
    center: &[f64],
    c: f64,
    n: usize,
    seed: u64,
) -> Result<LossEstimate> {
    check_config(q, theta, center, c)?;
    check_n(n, "overlap_route_loss")?;
    let cc = c * c;
    let cd = c.powi(q.dim() as i32);
    let ys = q.sample_point(theta, n, derive_seed(seed, 3))?;
    let vals: Vec<f64> = ys
        .iter()
        .map(|y| {
            let a = q.generator(dist2(y, theta));
            let b = q.generator(dist2(y, center) / cc) / cd;
            if a == 0.0 {
                0.0
            } else {
                (b / a).min(1.0)
            }
        })
        .collect();
    let (ovl, se) = mean_and_se(&vals);
    Ok(LossEstimate {
        value: 2.0 - 2.0 * ovl,
        std_err: 2.0 * se,
        n,
        method: EstimateMethod::OverlapSampling,
    })
}

/// Risk of the scale-expanded plug-in rule by nested Monte Carlo: outer
/// draws X ~ p centered at theta, a mixture-importance loss estimate per
/// draw, and the transform applied to each. The standard error combines the
/// outer sample variance with the delta-method inner contribution as a
/// conservative sum.
#[allow(clippy::too_many_arguments)]
pub fn mc_risk(
    p: &RadialModel,
    q: &RadialModel,
    estimator: &CenterEstimator,
    c: f64,
    theta: &[f64],
    gamma: &LossTransform,
    n_x: usize,
    n_y: usize,
    seed: u64,
) -> Result<LossEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput(format!(
            "observation dimension {} does not match target dimension {}",
            p.dim(),
            q.dim()
        )));
    }
    check_config(q, theta, theta, c)?;
    check_n(n_x, "mc_risk outer stage")?;
    check_n(n_y, "mc_risk inner stage")?;
    let xs = p.sample_point(theta, n_x, derive_seed(seed, 0))?;
    let mut transformed = Vec::with_capacity(n_x);
    let mut inner_var = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let centerhat = estimator.resolve(x);
        let inner = mc_l1_loss(q, theta, &centerhat, c, n_y, derive_seed(seed, 1 + i as u64))?;
        transformed.push(gamma.apply(inner.value));
        let slope = gamma.derivative(inner.value);
        inner_var += (slope * inner.std_err).powi(2);
    }
    let (mean, se_outer) = mean_and_se(&transformed);
    let std_err = (se_outer * se_outer + inner_var / (n_x as f64).powi(2)).sqrt();
    Ok(LossEstimate {
        value: mean,
        std_err,
        n: n_x,
        method: EstimateMethod::NestedMonteCarlo,
    })
}

/// Deterministic loss for d <= 2 by nested adaptive Simpson with exact
/// splits at the support boundaries of both densities, so flat models
/// integrate exactly piece by piece. Dimensions above 2 are rejected on
/// cost grounds.
pub fn grid_l1_loss(
    q: &RadialModel,
    theta: &[f64],
    center: &[f64],
    c: f64,
    spec: &GridSpec,
) -> Result<f64> {
    check_config(q, theta, center, c)?;
    spec.validate()?;
    let d = q.dim();
    if d > 2 {
        return Err(Error::Unsupported(format!(
            "deterministic loss integration is limited to d <= 2, got d = {d} \
             (use the Monte Carlo routes instead)"
        )));
    }
    let cc = c * c;
    let cd = c.powi(d as i32);
    // Truncation keeps under 2e-13 of combined mass outside the box, far
    // below the smallest admissible tolerance.
    let reach = q.truncation_radius(1e-13)?;
    let edge = q.support_radius();
    if d == 1 {
        let lo = (theta[0] - reach).min(center[0] - c * reach);
        let hi = (theta[0] + reach).max(center[0] + c * reach);
        let mut breaks = vec![theta[0], center[0]];
        if let Some(e) = edge {
            breaks.extend([theta[0] - e, theta[0] + e, center[0] - c * e, center[0] + c * e]);
        }
        let mut f = |y: f64| {
            let a = q.generator((y - theta[0]).powi(2));
            let b = q.generator((y - center[0]).powi(2) / cc) / cd;
            (a - b).abs()
        };
        return Ok(adaptive_simpson_split(&mut f, lo, hi, &breaks, spec.tol * 0.9));
    }
    let xlo = (theta[0] - reach).min(center[0] - c * reach);
    let xhi = (theta[0] + reach).max(center[0] + c * reach);
    let ylo = (theta[1] - reach).min(center[1] - c * reach);
    let yhi = (theta[1] + reach).max(center[1] + c * reach);
    let mut xbreaks = vec![theta[0], center[0]];
    if let Some(e) = edge {
        xbreaks.extend([theta[0] - e, theta[0] + e, center[0] - c * e, center[0] + c * e]);
    }
    // The inner integrals are evaluated to an absolute accuracy small enough
    // that their accumulated contribution to the outer integral stays under
    // a quarter of the budget.
    let tol_inner = (spec.tol * 0.25 / (xhi - xlo)).max(5e-15);
    let mut slice = |x: f64| {
        let mut ybreaks: Vec<f64> = Vec::new();
        if let Some(e) = edge {
            for (cx, cy, r) in [
                (theta[0], theta[1], e),
                (center[0], center[1], c * e),
            ] {
                let rem = r * r - (x - cx) * (x - cx);
                if rem > 0.0 {
                    let half = rem.sqrt();
                    ybreaks.push(cy - half);
                    ybreaks.push(cy + half);
                }
            }
        }
        let mut f = |y: f64| {
            let a = q.generator((x - theta[0]).powi(2) + (y - theta[1]).powi(2));
            let b = q.generator(
                ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / cc,
            ) / cd;
            (a - b).abs()
        };
        adaptive_simpson_split(&mut f, ylo, yhi, &ybreaks, tol_inner)
    };
    Ok(adaptive_simpson_split(
        &mut slice,
        xlo,
        xhi,
        &xbreaks,
        spec.tol * 0.5,
    ))
}

fn check_config(q: &RadialModel, theta: &[f64], center: &[f64], c: f64) -> Result<()> {
    let d = q.dim() as usize;
    if theta.len() != d || center.len() != d {
        return Err(Error::InvalidInput(format!(
            "point dimensions ({}, {}) do not match model dimension {d}",
            theta.len(),
            center.len()
        )));
    }
    if !theta.iter().chain(center).all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("points must be finite".into()));
    }
    if !c.is_finite() || !(c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scale expansion must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

fn check_n(n: usize, stage: &str) -> Result<()> {
    if n < 1000 {
        return Err(Error::InvalidInput(format!(
            "{stage} needs at least 1000 samples, got {n}"
        )));
    }
    Ok(())
}

/// Splitmix64 finalizer of seed ^ stage * golden-ratio: distinct stages get
/// distinct derived seeds, so nested loops never share draw streams.
fn derive_seed(seed: u64, stage: u64) -> u64 {
    let mut z = seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
