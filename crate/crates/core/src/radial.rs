//! Spherically symmetric location models on R^d.
//!
//! A model is stored through its radial generator t -> p(t), the density of
//! the model evaluated at squared distance t = ||x - theta||^2 from the
//! center. Keeping everything in squared-norm space matches the risk
//! formulas, which are written in terms of q(||y - theta||^2); all norm-space
//! quantities (norm density, norm c.d.f., samplers) convert explicitly.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, GaussHalfHermite};
use crate::special::{ball_volume, lgamma, reg_inc_gamma};

/// Shape class of a radial generator, declared at construction and consulted
/// by operations whose derivations require a monotone or strictly decreasing
/// generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    /// Strictly decreasing wherever positive (normal, scale mixtures).
    StrictlyDecreasing,
    /// Nonincreasing with flat stretches (uniform ball).
    Nonincreasing,
    /// No monotonicity promised; rejected by inverse-based operations.
    Other,
}

/// Mixing law over the variance of a normal scale mixture.
#[derive(Debug, Clone)]
pub enum MixingSpec {
    /// Finite list of (sigma^2, weight); weights must be nonnegative and sum
    /// to 1 within 1e-9.
    Discrete(Vec<(f64, f64)>),
    /// sigma^2 ~ inverse-gamma(shape, scale). shape = scale = 1/2 with d = 1
    /// gives the Cauchy model.
    InverseGamma { shape: f64, scale: f64 },
}

/// Number of quadrature nodes used to discretize a continuous mixing law.
const MIXING_NODES: usize = 64;

#[derive(Clone)]
enum Kind {
    Normal {
        sigma2: f64,
    },
    UniformBall {
        radius: f64,
    },
    /// Finite normal scale mixture: components (sigma^2, weight), weights
    /// summing to 1. Continuous mixing specs are discretized at construction
    /// so the generator, c.d.f., and sampler describe exactly the same law.
    Mixture {
        comps: Vec<(f64, f64)>,
    },
    /// d = 1 law of the midrange of n i.i.d. U(theta-A, theta+A) draws.
    Midrange {
        n: u32,
        half_width: f64,
    },
    Custom {
        generator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        monotonicity: Monotonicity,
        support_radius: Option<f64>,
        label: String,
    },
}

/// A spherically symmetric density on R^d.
#[derive(Clone)]
pub struct RadialModel {
    dim: u32,
    kind: Kind,
}

impl std::fmt::Debug for RadialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RadialModel({})", self.describe())
    }
}

fn check_dim(d: u32) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    Ok(())
}

impl RadialModel {
    /// N(theta, sigma2 I) on R^d.
    pub fn normal(dim: u32, sigma2: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "normal model needs sigma2 > 0, got {sigma2}"
            )));
        }
        Ok(RadialModel {
            dim,
            kind: Kind::Normal { sigma2 },
        })
    }

    /// Uniform on the closed ball of the given radius.
    pub fn uniform_ball(dim: u32, radius: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "uniform ball needs radius > 0, got {radius}"
            )));
        }
        Ok(RadialModel {
            dim,
            kind: Kind::UniformBall { radius },
        })
    }

    /// Normal scale mixture. Continuous mixing laws are reduced to a
    /// 64-component discrete mixture by generalized Gauss-Laguerre quadrature
    /// on the mixing density, so every downstream quantity (generator,
    /// c.d.f., sampler, inverse) refers to one and the same finite mixture.
    pub fn normal_scale_mixture(dim: u32, mixing: &MixingSpec) -> Result<Self> {
        check_dim(dim)?;
        let mut comps = match mixing {
            MixingSpec::Discrete(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidInput("empty mixing spec".into()));
                }
                let mut total = 0.0;
                for &(s2, w) in list {
                    if !(s2 > 0.0) || !(w >= 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "mixing component needs sigma2 > 0 and weight >= 0, got ({s2}, {w})"
                        )));
                    }
                    total += w;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "mixing weights sum to {total}, expected 1"
                    )));
                }
                list.clone()
            }
            MixingSpec::InverseGamma { shape, scale } => {
                if !(*shape >= 0.01) || !(*shape <= 80.0) || !(*scale > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "inverse-gamma mixing needs shape in [0.01, 80] and scale > 0, \
                         got ({shape}, {scale})"
                    )));
                }
                // sigma^2 = scale/u with u ~ Gamma(shape, 1). Substituting
                // u = s^2 turns the mixing expectation into
                //   (2/Gamma(shape)) integral s^(2 shape - 1) e^(-s^2)
                //                             f(scale/s^2) ds,
                // and for f a normal density, f(scale/s^2) is s^d times an
                // entire function of s. The Gauss rule for this weight
                // therefore integrates the mixture weights (h = 1) and the
                // density at the center (h = s^d) exactly and everything
                // else geometrically; a rule in the u variable would see
                // the u^(d/2) branch point and converge like 1/n.
                let rule = GaussHalfHermite::new(MIXING_NODES, 2.0 * shape - 1.0)?;
                let norm = 0.5 * lgamma(*shape).exp();
                rule.iter()
                    .map(|(s, w)| (scale / (s * s), w / norm))
                    .collect()
            }
        };
        // Remove exact-zero weights and absorb floating-point drift so the
        // mixture is normalized to machine precision.
        comps.retain(|&(_, w)| w > 0.0);
        let total: f64 = comps.iter().map(|&(_, w)| w).sum();
        for comp in &mut comps {
            comp.1 /= total;
        }
        Ok(RadialModel {
            dim,
            kind: Kind::Mixture { comps },
        })
    }

    /// d = 1 law of the midrange of n i.i.d. U(theta-A, theta+A)
    /// observations, centered at theta.
    ///
    /// The deviation S = |midrange - theta| has density n(A-s)^(n-1)/A^n on
    /// (0, A), equivalently P(S > s) = ((A-s)/A)^n; this was re-derived from
    /// the joint law of the sample extremes and is confirmed against direct
    /// simulation in the tests. n = 1 reduces to U(theta-A, theta+A).
    pub fn uniform_midrange(n: u32, half_width: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("midrange needs n >= 1".into()));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "midrange needs half-width > 0, got {half_width}"
            )));
        }
        Ok(RadialModel {
            dim: 1,
            kind: Kind::Midrange { n, half_width },
        })
    }

    /// Model with a caller-supplied radial generator. The caller must state
    /// the generator's monotonicity class honestly: operations that rely on
    /// the generalized inverse refuse `Other`, and the strictly-decreasing
    /// reduction routes refuse anything weaker than `StrictlyDecreasing`.
    pub fn custom(
        dim: u32,
        generator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        monotonicity: Monotonicity,
        support_radius: Option<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if let Some(r) = support_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "support radius must be > 0, got {r}"
                )));
            }
        }
        Ok(RadialModel {
            dim,
            kind: Kind::Custom {
                generator,
                monotonicity,
                support_radius,
                label: label.into(),
            },
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Monotonicity class of the generator.
    pub fn monotonicity(&self) -> Monotonicity {
        match &self.kind {
            Kind::Normal { .. } | Kind::Mixture { .. } => Monotonicity::StrictlyDecreasing,
            Kind::UniformBall { .. } => Monotonicity::Nonincreasing,
            // Strictly decreasing on its support for n >= 2; flat for n = 1.
            Kind::Midrange { n, .. } => {
                if *n >= 2 {
                    Monotonicity::StrictlyDecreasing
                } else {
                    Monotonicity::Nonincreasing
                }
            }
            Kind::Custom { monotonicity, .. } => *monotonicity,
        }
    }

    /// Smallest R with P(||X - theta|| <= R) = 1; None for infinite support.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            Kind::Normal { .. } | Kind::Mixture { .. } => None,
            Kind::UniformBall { radius } => Some(*radius),
            Kind::Midrange { half_width, .. } => Some(*half_width),
            Kind::Custom { support_radius, .. } => *support_radius,
        }
    }

    /// Law of factor * X around the same center: every length scale is
    /// multiplied by factor. This is how the closed-form risk routes reduce a
    /// general target half-width to the unit-width problem.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        let kind = match &self.kind {
            Kind::Normal { sigma2 } => Kind::Normal {
                sigma2: sigma2 * factor * factor,
            },
            Kind::UniformBall { radius } => Kind::UniformBall {
                radius: radius * factor,
            },
            Kind::Mixture { comps } => Kind::Mixture {
                comps: comps
                    .iter()
                    .map(|&(s2, w)| (s2 * factor * factor, w))
                    .collect(),
            },
            Kind::Midrange { n, half_width } => Kind::Midrange {
                n: *n,
                half_width: half_width * factor,
            },
            Kind::Custom {
                generator,
                monotonicity,
                support_radius,
                label,
            } => {
                let g = Arc::clone(generator);
                let dens_scale = factor.powi(-(self.dim as i32));
                let arg_scale = 1.0 / (factor * factor);
                Kind::Custom {
                    generator: Arc::new(move |t| dens_scale * g(t * arg_scale)),
                    monotonicity: *monotonicity,
                    support_radius: support_radius.map(|r| r * factor),
                    label: format!("{label}*{factor}"),
                }
            }
        };
        Ok(RadialModel {
            dim: self.dim,
            kind,
        })
    }

    /// True when the generator is exactly flat on its support (uniform ball
    /// and its d = 1 midrange special case), which selects the
    /// overlap-geometry risk route instead of the inverse-based reduction.
    pub fn is_flat(&self) -> bool {
        match &self.kind {
            Kind::UniformBall { .. } => true,
            Kind::Midrange { n, .. } => *n == 1,
            _ => false,
        }
    }

    /// Variance parameter when the model is a single Gaussian, which admits
    /// closed forms for the generator inverse compositions.
    pub(crate) fn normal_sigma2(&self) -> Option<f64> {
        match &self.kind {
            Kind::Normal { sigma2 } => Some(*sigma2),
            _ => None,
        }
    }

    /// Ball radius for uniform-ball models.
    pub(crate) fn flat_radius(&self) -> Option<f64> {
        match &self.kind {
            Kind::UniformBall { radius } => Some(*radius),
            Kind::Midrange { n: 1, half_width } => Some(*half_width),
            _ => None,
        }
    }

    /// Spread of component scales, used by quadrature to decide whether a
    /// radial integral is multi-scale (heavy-tail mixtures).
    pub(crate) fn scale_spread(&self) -> f64 {
        match &self.kind {
            Kind::Mixture { comps } => {
                let lo = comps.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let hi = comps.iter().map(|c| c.0).fold(0.0, f64::max);
                (hi / lo).sqrt()
            }
            _ => 1.0,
        }
    }

    /// Radial generator: density of the model at squared distance t from the
    /// center.
    pub fn generator(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0 || t.is_nan());
        match &self.kind {
            Kind::Normal { sigma2 } => {
                let d = f64::from(self.dim);
                (-t / (2.0 * sigma2)).exp()
                    * (-(d / 2.0) * (2.0 * std::f64::consts::PI * sigma2).ln()).exp()
            }
            Kind::UniformBall { radius } => {
                if t <= radius * radius {
                    1.0 / ball_volume(self.dim, *radius).expect("valid ball")
                } else {
                    0.0
                }
            }
            Kind::Mixture { comps } => {
                let d = f64::from(self.dim);
                comps
                    .iter()
                    .map(|&(s2, w)| {
                        w * (-t / (2.0 * s2) - (d / 2.0) * (2.0 * std::f64::consts::PI * s2).ln())
                            .exp()
                    })
                    .sum()
            }
            Kind::Midrange { n, half_width } => {
                let a = *half_width;
                if t >= a * a {
                    return 0.0;
                }
                let nf = f64::from(*n);
                nf * (a - t.sqrt()).powi(*n as i32 - 1) / (2.0 * a.powi(*n as i32))
            }
            Kind::Custom { generator, .. } => generator(t),
        }
    }

    /// Density at point x of the model centered at `center`.
    pub fn density(&self, x: &[f64], center: &[f64]) -> Result<f64> {
        if x.len() != self.dim as usize || center.len() != self.dim as usize {
            return Err(Error::InvalidInput(format!(
                "point dimension {} does not match model dimension {}",
                x.len().max(center.len()),
                self.dim
            )));
        }
        let t: f64 = x
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(self.generator(t))
    }

    /// Density of the norm ||X - theta||: S_d r^(d-1) generator(r^2) with
    /// S_d = 2 pi^(d/2) / Gamma(d/2).
    pub fn norm_pdf(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("norm_pdf needs r >= 0, got {r}")));
        }
        let d = f64::from(self.dim);
        let ln_surface = std::f64::consts::LN_2 + (d / 2.0) * std::f64::consts::PI.ln()
            - lgamma(d / 2.0);
        Ok(ln_surface.exp() * r.powi(self.dim as i32 - 1) * self.generator(r * r))
    }

    /// C.d.f. of the norm ||X - theta||. Closed form for every built-in
    /// kind; adaptive quadrature of `norm_pdf` for custom generators.
    pub fn norm_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let d = f64::from(self.dim);
        match &self.kind {
            // ||X||^2 / sigma2 ~ chi^2_d
            Kind::Normal { sigma2 } => reg_inc_gamma(d / 2.0, r * r / (2.0 * sigma2))
                .expect("chi-square cdf arguments are valid"),
            Kind::UniformBall { radius } => (r / radius).powi(self.dim as i32).min(1.0),
            Kind::Mixture { comps } => comps
                .iter()
                .map(|&(s2, w)| {
                    w * reg_inc_gamma(d / 2.0, r * r / (2.0 * s2))
                        .expect("chi-square cdf arguments are valid")
                })
                .sum(),
            Kind::Midrange { n, half_width } => {
                if r >= *half_width {
                    1.0
                } else {
                    1.0 - (1.0 - r / half_width).powi(*n as i32)
                }
            }
            Kind::Custom { .. } => {
                let mut f = |s: f64| self.norm_pdf(s).unwrap_or(0.0);
                let hi = match self.support_radius() {
                    Some(edge) => r.min(edge),
                    None => r,
                };
                adaptive_simpson(&mut f, 0.0, hi, 1e-11).clamp(0.0, 1.0)
            }
        }
    }

    /// Radius containing all but `tail_mass` of the norm distribution; the
    /// support radius when that is finite.
    pub fn truncation_radius(&self, tail_mass: f64) -> Result<f64> {
        if let Some(edge) = self.support_radius() {
            return Ok(edge);
        }
        let target = 1.0 - tail_mass;
        if !(0.0..1.0).contains(&target) {
            return Err(Error::InvalidInput(format!(
                "tail mass must be in (0, 1], got {tail_mass}"
            )));
        }
        let mut hi = 1.0;
        let mut grow = 0;
        while self.norm_cdf(hi) < target {
            hi *= 2.0;
            grow += 1;
            if grow > 200 {
                return Err(Error::NoConvergence(
                    "norm c.d.f. never reached the requested mass".into(),
                ));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.norm_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Generalized inverse of the generator: inf{z >= 0 : generator(z) <=
    /// level}. Requires a nonincreasing generator; closed forms where the
    /// kind admits one, bracketed bisection (relative tolerance 1e-12)
    /// otherwise.
    pub fn generalized_inverse(&self, level: f64) -> Result<f64> {
        if !(level >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "generalized inverse needs level >= 0, got {level}"
            )));
        }
        if self.monotonicity() == Monotonicity::Other {
            return Err(Error::Unsupported(
                "generalized inverse needs a nonincreasing generator; this model declares none"
                    .into(),
            ));
        }
        if level >= self.generator(0.0) {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Normal { sigma2 } => {
                if level == 0.0 {
                    return Ok(f64::INFINITY);
                }
                let d = f64::from(self.dim);
                Ok((-2.0 * sigma2
                    * (level.ln() + (d / 2.0) * (2.0 * std::f64::consts::PI * sigma2).ln()))
                .max(0.0))
            }
            Kind::UniformBall { radius } => Ok(radius * radius),
            Kind::Midrange { n, half_width } => {
                let a = *half_width;
                if *n == 1 {
                    return Ok(a * a);
                }
                if level == 0.0 {
                    return Ok(a * a);
                }
                let nf = f64::from(*n);
                let root = (2.0 * a.powi(*n as i32) * level / nf).powf(1.0 / (nf - 1.0));
                Ok(((a - root).max(0.0)).powi(2))
            }
            Kind::Mixture { .. } | Kind::Custom { .. } => {
                if level == 0.0 {
                    return Ok(match self.support_radius() {
                        Some(edge) => edge * edge,
                        None => f64::INFINITY,
                    });
                }
                // Bracket: generator(lo) > level >= generator(hi), growing hi
                // geometrically; the generator is nonincreasing so bisection
                // converges to the infimum even across flat stretches.
                let mut hi = 1.0;
                let mut grow = 0;
                while self.generator(hi) > level {
                    hi *= 2.0;
                    grow += 1;
                    if grow > 200 {
                        return Err(Error::NoConvergence(
                            "generator stays above the requested level".into(),
                        ));
                    }
                }
                let mut lo = 0.0;
                while hi - lo > 1e-12 * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if self.generator(mid) > level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(hi)
            }
        }
    }

    /// n i.i.d. draws of ||X - theta||. Draw i is generated on ChaCha8
    /// stream i of the seed, so results do not depend on batching or worker
    /// count.
    pub fn sample_norm(&self, n: usize, seed: u64) -> Vec<f64> {
        let table = match &self.kind {
            Kind::Custom { .. } => Some(self.custom_inverse_table()),
            _ => None,
        };
        (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                self.draw_norm(&mut rng, table.as_deref())
            })
            .collect()
    }

    fn draw_norm(&self, rng: &mut ChaCha8Rng, table: Option<&[(f64, f64)]>) -> f64 {
        match &self.kind {
            Kind::Normal { sigma2 } => {
                let mut s = 0.0;
                for _ in 0..self.dim {
                    let z: f64 = StandardNormal.sample(rng);
                    s += z * z;
                }
                (s * sigma2).sqrt()
            }
            Kind::UniformBall { radius } => {
                let u: f64 = rng.random();
                radius * u.powf(1.0 / f64::from(self.dim))
            }
            Kind::Mixture { comps } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut sigma2 = comps[comps.len() - 1].0;
                for &(s2, w) in comps {
                    acc += w;
                    if u <= acc {
                        sigma2 = s2;
                        break;
                    }
                }
                let mut s = 0.0;
                for _ in 0..self.dim {
                    let z: f64 = StandardNormal.sample(rng);
                    s += z * z;
                }
                (s * sigma2).sqrt()
            }
            Kind::Midrange { n, half_width } => {
                // Inverse c.d.f. of P(S <= s) = 1 - (1 - s/A)^n.
                let u: f64 = rng.random();
                half_width * (1.0 - (1.0 - u).powf(1.0 / f64::from(*n)))
            }
            Kind::Custom { .. } => {
                let table = table.expect("inverse table prepared for custom models");
                let u: f64 = rng.random();
                inverse_from_table(table, u)
            }
        }
    }

    /// Inverse-c.d.f. lookup table for custom generators, built per sampling
    /// call and shared across draws.
    fn custom_inverse_table(&self) -> Vec<(f64, f64)> {
        let hi = self
            .truncation_radius(1e-12)
            .expect("custom model has a locatable tail");
        const N: usize = 2048;
        (0..=N)
            .map(|i| {
                let r = hi * i as f64 / N as f64;
                (self.norm_cdf(r), r)
            })
            .collect()
    }

    /// n i.i.d. points X ~ model centered at `center`, via isotropic
    /// direction times sampled norm. Same per-draw stream scheme as
    /// `sample_norm`.
    pub fn sample_point(&self, center: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if center.len() != self.dim as usize {
            return Err(Error::InvalidInput(format!(
                "center dimension {} does not match model dimension {}",
                center.len(),
                self.dim
            )));
        }
        let table = match &self.kind {
            Kind::Custom { .. } => Some(self.custom_inverse_table()),
            _ => None,
        };
        Ok((0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let r = self.draw_norm(&mut rng, table.as_deref());
                let dir = sample_direction(self.dim, &mut rng);
                dir.iter()
                    .zip(center)
                    .map(|(u, c)| c + r * u)
                    .collect()
            })
            .collect())
    }

    /// Canonical spec string (the CLI grammar), regenerating the model on
    /// parse.
    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::Normal { sigma2 } => format!("normal:d={},var={}", self.dim, sigma2),
            Kind::UniformBall { radius } => format!("uniball:d={},m={}", self.dim, radius),
            Kind::Mixture { comps } => {
                let parts: Vec<String> = comps
                    .iter()
                    .map(|(s2, w)| format!("{s2}:{w}"))
                    .collect();
                format!("mixnormal:d={},mix=points({})", self.dim, parts.join(";"))
            }
            Kind::Midrange { n, half_width } => format!("midrange:n={n},a={half_width}"),
            Kind::Custom { label, .. } => format!("custom:d={},label={}", self.dim, label),
        }
    }
}

fn inverse_from_table(table: &[(f64, f64)], u: f64) -> f64 {
    let pos = table.partition_point(|&(cdf, _)| cdf < u);
    if pos == 0 {
        return table[0].1;
    }
    if pos >= table.len() {
        return table[table.len() - 1].1;
    }
    let (c0, r0) = table[pos - 1];
    let (c1, r1) = table[pos];
    if c1 > c0 {
        r0 + (r1 - r0) * (u - c0) / (c1 - c0)
    } else {
        r0
    }
}

fn sample_direction(dim: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Center estimator theta_hat(X). Every variant has the radially equivariant
/// form g(||X||) X, which is what makes the restricted-risk reduction to
/// lambda = ||theta|| valid; non-equivariant estimators are unrepresentable.
#[derive(Clone)]
pub enum CenterEstimator {
    /// theta_hat = X.
    RawX,
    /// Projection of X onto the ball of radius m: min(m, ||X||) X / ||X||.
    MleBall { m: f64 },
    /// theta_hat = g(||X||) X for a caller-supplied scalar g.
    Radial {
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        label: String,
    },
}

impl std::fmt::Debug for CenterEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CenterEstimator({})", self.describe())
    }
}

impl CenterEstimator {
    pub fn mle_ball(m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ball-projection estimator needs m > 0, got {m}"
            )));
        }
        Ok(CenterEstimator::MleBall { m })
    }

    pub fn resolve(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CenterEstimator::RawX => x.to_vec(),
            CenterEstimator::MleBall { m } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= *m {
                    x.to_vec()
                } else {
                    x.iter().map(|v| v * m / norm).collect()
                }
            }
            CenterEstimator::Radial { g, .. } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s = g(norm);
                x.iter().map(|v| v * s).collect()
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CenterEstimator::RawX => "raw".into(),
            CenterEstimator::MleBall { m } => format!("mle-ball(m={m})"),
            CenterEstimator::Radial { label, .. } => format!("radial({label})"),
        }
    }
}

/// A scale-expanded plug-in predictive density: y ->
/// c^(-d) q(||y - theta_hat||^2 / c^2).
#[derive(Debug, Clone)]
pub struct PredictiveSpec {
    pub center: CenterEstimator,
    pub scale_c: f64,
    pub base: RadialModel,
}

impl PredictiveSpec {
    pub fn new(center: CenterEstimator, scale_c: f64, base: RadialModel) -> Result<Self> {
        if !(scale_c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scale factor must be > 0, got {scale_c}"
            )));
        }
        Ok(PredictiveSpec {
            center,
            scale_c,
            base,
        })
    }
}

/// Value of the predictive density with resolved center point at y.
pub fn predictive_eval(spec: &PredictiveSpec, center: &[f64], y: &[f64]) -> Result<f64> {
    let d = spec.base.dim();
    if center.len() != d as usize || y.len() != d as usize {
        return Err(Error::InvalidInput(format!(
            "point dimension {} does not match model dimension {}",
            center.len().max(y.len()),
            d
        )));
    }
    let c = spec.scale_c;
    let t: f64 = y
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(c.powi(-(d as i32)) * spec.base.generator(t / (c * c)))
}

/// Parses the model spec grammar: `normal:d=3,var=1`, `uniball:d=3,m=1`,
/// `mixnormal:d=2,mix=invgamma(0.5,0.5)` or `mix=points(s2:w;s2:w)`,
/// `midrange:n=5,a=1`.
pub fn parse_model(spec: &str) -> Result<RadialModel> {
    let spec = spec.trim();
    let (head, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("model spec '{spec}' is missing ':'")))?;
    let fields = split_fields(rest)?;
    let get = |key: &str| -> Option<&str> {
        fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
    };
    let known = |allowed: &[&str]| -> Result<()> {
        for (k, _) in &fields {
            if !allowed.contains(k) {
                return Err(Error::Parse(format!(
                    "unknown key '{k}' in model spec '{spec}'"
                )));
            }
        }
        Ok(())
    };
    match head {
        "normal" => {
            known(&["d", "var"])?;
            let d = parse_u32(get("d").unwrap_or("1"), "d")?;
            let var = parse_f64(get("var").unwrap_or("1"), "var")?;
            RadialModel::normal(d, var)
        }
        "uniball" => {
            known(&["d", "m"])?;
            let d = parse_u32(get("d").unwrap_or("1"), "d")?;
            let m = parse_f64(get("m").unwrap_or("1"), "m")?;
            RadialModel::uniform_ball(d, m)
        }
        "mixnormal" => {
            known(&["d", "mix"])?;
            let d = parse_u32(get("d").unwrap_or("1"), "d")?;
            let mix = get("mix")
                .ok_or_else(|| Error::Parse(format!("mixnormal spec '{spec}' needs mix=")))?;
            RadialModel::normal_scale_mixture(d, &parse_mixing(mix)?)
        }
        "midrange" => {
            known(&["n", "a"])?;
            let n = parse_u32(get("n").unwrap_or("1"), "n")?;
            let a = parse_f64(get("a").unwrap_or("1"), "a")?;
            RadialModel::uniform_midrange(n, a)
        }
        other => Err(Error::Parse(format!(
            "unknown model kind '{other}' (expected normal, uniball, mixnormal, or midrange)"
        ))),
    }
}

fn parse_mixing(text: &str) -> Result<MixingSpec> {
    let text = text.trim();
    if let Some(args) = text
        .strip_prefix("invgamma(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!(
                "invgamma mixing needs two arguments, got '{text}'"
            )));
        }
        return Ok(MixingSpec::InverseGamma {
            shape: parse_f64(parts[0], "invgamma shape")?,
            scale: parse_f64(parts[1], "invgamma scale")?,
        });
    }
    if let Some(args) = text
        .strip_prefix("points(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let mut comps = Vec::new();
        for part in args.split(';') {
            let (s2, w) = part.split_once(':').ok_or_else(|| {
                Error::Parse(format!("mixing point '{part}' needs the form sigma2:weight"))
            })?;
            comps.push((parse_f64(s2, "mixing sigma2")?, parse_f64(w, "mixing weight")?));
        }
        return Ok(MixingSpec::Discrete(comps));
    }
    Err(Error::Parse(format!(
        "unknown mixing spec '{text}' (expected invgamma(a,b) or points(s2:w;...))"
    )))
}

/// Splits `k1=v1,k2=v2` respecting parentheses inside values.
fn split_fields(rest: &str) -> Result<Vec<(&str, &str)>> {
    let mut fields = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let bytes = rest.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::Parse(format!("unbalanced ')' in '{rest}'")))?;
            }
            b',' if depth == 0 => {
                push_field(&rest[start..i], &mut fields)?;
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced '(' in '{rest}'")));
    }
    push_field(&rest[start..], &mut fields)?;
    Ok(fields)
}

fn push_field<'a>(piece: &'a str, fields: &mut Vec<(&'a str, &'a str)>) -> Result<()> {
    let piece = piece.trim();
    if piece.is_empty() {
        return Ok(());
    }
    let (k, v) = piece
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("field '{piece}' is missing '='")))?;
    fields.push((k.trim(), v.trim()));
    Ok(())
}

fn parse_u32(text: &str, what: &str) -> Result<u32> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from '{text}'")))
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from '{text}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn norm_mass(model: &RadialModel) -> f64 {
        let hi = model.truncation_radius(1e-12).unwrap();
        let rule = GaussLegendre::new(256);
        if model.scale_spread() > 30.0 {
            // Multi-scale mixtures need panels; geometric splits resolve
            // every component scale.
            let mut total = 0.0;
            let mut a = hi * 1e-10;
            total += rule.integrate(0.0, a, |r| model.norm_pdf(r).unwrap());
            while a < hi {
                let b = (a * 30.0).min(hi);
                total += rule.integrate(a, b, |r| model.norm_pdf(r).unwrap());
                a = b;
            }
            total
        } else {
            rule.integrate(0.0, hi, |r| model.norm_pdf(r).unwrap())
        }
    }

    #[test]
    fn normal_generator_values() {
        let m = RadialModel::normal(1, 1.0).unwrap();
        assert_relative_eq!(
            m.generator(0.0),
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-15
        );
        let m3 = RadialModel::normal(3, 1.0).unwrap();
        let want = (2.0 * std::f64::consts::PI).powf(-1.5) * (-0.5f64).exp();
        assert_relative_eq!(m3.generator(1.0), want, max_relative = 1e-14);
        assert!(RadialModel::normal(0, 1.0).is_err());
        assert!(RadialModel::normal(2, 0.0).is_err());
        assert!(RadialModel::normal(2, -1.0).is_err());
    }

    #[test]
    fn normal_norm_density_integrates_to_one() {
        for d in [1, 2, 3, 6] {
            let m = RadialModel::normal(d, 1.3).unwrap();
            assert_abs_diff_eq!(norm_mass(&m), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn uniform_ball_generator_and_volume() {
        let m = RadialModel::uniform_ball(3, 1.0).unwrap();
        // density 3/(4 pi) inside the unit ball
        assert_relative_eq!(
            m.generator(0.5),
            3.0 / (4.0 * std::f64::consts::PI),
            max_relative = 1e-14
        );
        let m1 = RadialModel::uniform_ball(1, 1.0).unwrap();
        assert_eq!(m1.generator(4.0), 0.0);
        let m2 = RadialModel::uniform_ball(2, 2.0).unwrap();
        assert_relative_eq!(
            1.0 / m2.generator(0.0),
            4.0 * std::f64::consts::PI,
            max_relative = 1e-14
        );
        assert_abs_diff_eq!(norm_mass(&m2), 1.0, epsilon = 1e-10);
        assert!(RadialModel::uniform_ball(2, 0.0).is_err());
    }

    #[test]
    fn norm_pdf_examples() {
        let m = RadialModel::uniform_ball(3, 1.0).unwrap();
        // h(r) = 3 r^2 on (0, 1)
        assert_relative_eq!(m.norm_pdf(0.5).unwrap(), 0.75, max_relative = 1e-13);
        for d in [2, 3, 5] {
            let n = RadialModel::normal(d, 1.0).unwrap();
            assert_eq!(n.norm_pdf(0.0).unwrap(), 0.0);
        }
        assert!(m.norm_pdf(-0.1).is_err());
    }

    #[test]
    fn mixture_point_mass_matches_normal() {
        let mix = RadialModel::normal_scale_mixture(
            2,
            &MixingSpec::Discrete(vec![(1.0, 1.0)]),
        )
        .unwrap();
        let normal = RadialModel::normal(2, 1.0).unwrap();
        for t in [0.0, 0.3, 1.0, 4.0, 10.0] {
            assert_abs_diff_eq!(mix.generator(t), normal.generator(t), epsilon = 1e-10);
        }
    }

    #[test]
    fn cauchy_mixture_density_at_origin() {
        // Inverse-gamma(1/2, 1/2) mixing in d = 1 is the standard Cauchy.
        // At t = 0 the density is a polynomial moment of the discretizing
        // rule, so the finite mixture reproduces 1/pi to machine precision.
        let cauchy = RadialModel::normal_scale_mixture(
            1,
            &MixingSpec::InverseGamma {
                shape: 0.5,
                scale: 0.5,
            },
        )
        .unwrap();
        assert_relative_eq!(
            cauchy.generator(0.0),
            1.0 / std::f64::consts::PI,
            max_relative = 1e-12
        );
        // Whole-line check against the Cauchy density; geometric convergence
        // of the discretization holds at every t.
        for x in [0.5, 1.0, 3.0] {
            let want = 1.0 / (std::f64::consts::PI * (1.0 + x * x));
            assert_relative_eq!(cauchy.generator(x * x), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn inverse_gamma_mixtures_match_multivariate_student_densities() {
        // Inverse-gamma(nu/2, nu/2) mixing gives the d-dimensional Student-t
        // with nu degrees of freedom:
        //   f(x) = Gamma((nu+d)/2) / (Gamma(nu/2) (nu pi)^(d/2))
        //          (1 + t/nu)^(-(nu+d)/2),  t = ||x||^2.
        for (d, nu) in [(2u32, 1.0f64), (3, 1.0), (2, 3.0), (5, 7.0)] {
            let model = RadialModel::normal_scale_mixture(
                d,
                &MixingSpec::InverseGamma {
                    shape: nu / 2.0,
                    scale: nu / 2.0,
                },
            )
            .unwrap();
            let df = f64::from(d);
            let ln_c = lgamma((nu + df) / 2.0)
                - lgamma(nu / 2.0)
                - (df / 2.0) * (nu * std::f64::consts::PI).ln();
            for t in [0.0, 0.4, 1.0, 6.25] {
                let want = (ln_c - (nu + df) / 2.0 * (1.0 + t / nu).ln()).exp();
                assert_relative_eq!(model.generator(t), want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn mixture_normalization_and_rejections() {
        let two = RadialModel::normal_scale_mixture(
            3,
            &MixingSpec::Discrete(vec![(1.0, 0.5), (4.0, 0.5)]),
        )
        .unwrap();
        assert_abs_diff_eq!(norm_mass(&two), 1.0, epsilon = 1e-8);
        let cauchy2 = RadialModel::normal_scale_mixture(
            2,
            &MixingSpec::InverseGamma {
                shape: 0.5,
                scale: 0.5,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(norm_mass(&cauchy2), 1.0, epsilon = 1e-8);
        assert!(RadialModel::normal_scale_mixture(
            2,
            &MixingSpec::Discrete(vec![(1.0, 0.7), (4.0, 0.5)])
        )
        .is_err());
        assert!(RadialModel::normal_scale_mixture(
            2,
            &MixingSpec::Discrete(vec![(-1.0, 1.0)])
        )
        .is_err());
    }

    #[test]
    fn norm_cdf_matches_quadrature_of_norm_pdf() {
        let models = [
            RadialModel::normal(3, 2.0).unwrap(),
            RadialModel::uniform_ball(2, 1.5).unwrap(),
            RadialModel::normal_scale_mixture(
                2,
                &MixingSpec::Discrete(vec![(0.5, 0.3), (2.0, 0.7)]),
            )
            .unwrap(),
            RadialModel::uniform_midrange(3, 2.0).unwrap(),
        ];
        let rule = GaussLegendre::new(200);
        for m in &models {
            for r in [0.3f64, 0.9, 1.4, 2.5] {
                let hi = r.min(m.support_radius().unwrap_or(f64::INFINITY));
                let quad = rule.integrate(0.0, hi, |s| m.norm_pdf(s).unwrap());
                assert_abs_diff_eq!(m.norm_cdf(r), quad, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn generalized_inverse_closed_forms_and_bisection_agree() {
        let m = RadialModel::normal(1, 1.0).unwrap();
        assert_relative_eq!(
            m.generalized_inverse(m.generator(4.0)).unwrap(),
            4.0,
            max_relative = 1e-12
        );
        // Any level at or above the mode value maps to 0.
        for model in [
            RadialModel::normal(2, 1.0).unwrap(),
            RadialModel::uniform_ball(3, 1.0).unwrap(),
            RadialModel::uniform_midrange(4, 1.0).unwrap(),
        ] {
            assert_eq!(model.generalized_inverse(model.generator(0.0)).unwrap(), 0.0);
            assert_eq!(
                model
                    .generalized_inverse(model.generator(0.0) * 2.0)
                    .unwrap(),
                0.0
            );
        }
        // Closed form vs the generic bisection route (same generator wrapped
        // as a custom model).
        let d2 = RadialModel::normal(2, 1.0).unwrap();
        let gen2 = {
            let inner = RadialModel::normal(2, 1.0).unwrap();
            RadialModel::custom(
                2,
                Arc::new(move |t| inner.generator(t)),
                Monotonicity::StrictlyDecreasing,
                None,
                "normal-copy",
            )
            .unwrap()
        };
        for level in [0.01, 0.05, 0.1] {
            assert_abs_diff_eq!(
                d2.generalized_inverse(level).unwrap(),
                gen2.generalized_inverse(level).unwrap(),
                epsilon = 1e-10
            );
        }
        // Uniform ball: any positive level below the plateau maps to the
        // squared support edge.
        let ball = RadialModel::uniform_ball(3, 2.0).unwrap();
        assert_eq!(ball.generalized_inverse(0.01).unwrap(), 4.0);
        assert!(d2.generalized_inverse(-1.0).is_err());
    }

    #[test]
    fn generalized_inverse_rejects_unordered_generators() {
        let bump = RadialModel::custom(
            2,
            Arc::new(|t: f64| (-(t - 1.0) * (t - 1.0)).exp()),
            Monotonicity::Other,
            None,
            "bump",
        )
        .unwrap();
        assert!(matches!(
            bump.generalized_inverse(0.5),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn midrange_inverse_roundtrip() {
        let m = RadialModel::uniform_midrange(5, 1.5).unwrap();
        for z in [0.01, 0.5, 1.0, 2.0] {
            let level = m.generator(z);
            assert_relative_eq!(m.generalized_inverse(level).unwrap(), z, max_relative = 1e-10);
        }
    }

    #[test]
    fn sampling_moments_and_determinism() {
        // E|U(-1,1)| = 1/2
        let u = RadialModel::uniform_ball(1, 1.0).unwrap();
        let draws = u.sample_norm(1_000_000, 7);
        let mean: f64 = draws.iter().sum::<f64>() / draws.len() as f64;
        let se = (1.0 / 12.0f64).sqrt() / (draws.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
        // E||X||^2 = 3 for standard normal in d = 3
        let n3 = RadialModel::normal(3, 1.0).unwrap();
        let draws = n3.sample_norm(1_000_000, 11);
        let mean2: f64 = draws.iter().map(|r| r * r).sum::<f64>() / draws.len() as f64;
        // Var(chi^2_3) = 6
        let se2 = (6.0f64).sqrt() / (draws.len() as f64).sqrt();
        assert!((mean2 - 3.0).abs() < 3.0 * se2, "mean {mean2} se {se2}");
        // determinism
        assert_eq!(n3.sample_norm(100, 42), n3.sample_norm(100, 42));
        assert_ne!(n3.sample_norm(100, 42), n3.sample_norm(100, 43));
    }

    fn ks_statistic(draws: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(|a, b| a.total_cmp(b));
        let n = draws.len() as f64;
        draws
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let f = cdf(r);
                let lo = (f - i as f64 / n).abs();
                let hi = ((i + 1) as f64 / n - f).abs();
                lo.max(hi)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sample_norm_matches_cdf_by_kolmogorov_smirnov() {
        let n = 100_000usize;
        let bound = 1.63 / (n as f64).sqrt();
        let models = [
            RadialModel::normal(3, 1.0).unwrap(),
            RadialModel::uniform_ball(2, 2.0).unwrap(),
            RadialModel::normal_scale_mixture(
                2,
                &MixingSpec::InverseGamma {
                    shape: 0.5,
                    scale: 0.5,
                },
            )
            .unwrap(),
            RadialModel::uniform_midrange(3, 1.0).unwrap(),
        ];
        for (k, m) in models.iter().enumerate() {
            let mut draws = m.sample_norm(n, 1000 + k as u64);
            let stat = ks_statistic(&mut draws, |r| m.norm_cdf(r));
            assert!(
                stat < bound,
                "KS statistic {stat} exceeds {bound} for {}",
                m.describe()
            );
        }
    }

    #[test]
    fn midrange_law_matches_direct_simulation() {
        // Oracle for the midrange-deviation density: simulate the actual
        // midrange of n uniforms and compare its |midrange - theta| c.d.f.
        // to the model's closed form 1 - (1 - s/A)^n.
        let n_datasets = 200_000usize;
        let bound = 1.63 / (n_datasets as f64).sqrt();
        for (n, a) in [(2u32, 1.0f64), (3, 2.0), (5, 1.0)] {
            let model = RadialModel::uniform_midrange(n, a).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(900 + n as u64);
            let mut devs: Vec<f64> = (0..n_datasets)
                .map(|_| {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for _ in 0..n {
                        let x: f64 = rng.random::<f64>() * 2.0 * a - a;
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                    (0.5 * (lo + hi)).abs()
                })
                .collect();
            let stat = ks_statistic(&mut devs, |s| model.norm_cdf(s));
            assert!(
                stat < bound,
                "midrange n={n} A={a}: KS {stat} exceeds {bound}"
            );
        }
    }

    #[test]
    fn midrange_single_observation_is_uniform() {
        let m = RadialModel::uniform_midrange(1, 1.0).unwrap();
        let u = RadialModel::uniform_ball(1, 1.0).unwrap();
        for t in [0.0, 0.2, 0.8, 1.2] {
            assert_abs_diff_eq!(m.generator(t), u.generator(t), epsilon = 1e-14);
        }
        assert!(m.is_flat());
    }

    #[test]
    fn truncation_radius_captures_requested_mass() {
        let m = RadialModel::normal(3, 1.0).unwrap();
        let t = m.truncation_radius(1e-10).unwrap();
        assert_abs_diff_eq!(m.norm_cdf(t), 1.0 - 1e-10, epsilon = 1e-12);
        let ball = RadialModel::uniform_ball(2, 1.5).unwrap();
        assert_eq!(ball.truncation_radius(1e-10).unwrap(), 1.5);
    }

    #[test]
    fn predictive_eval_examples() {
        let n1 = RadialModel::normal(1, 1.0).unwrap();
        let spec = PredictiveSpec::new(CenterEstimator::RawX, 1.0, n1).unwrap();
        assert_relative_eq!(
            predictive_eval(&spec, &[0.3], &[0.3]).unwrap(),
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        );
        let u1 = RadialModel::uniform_ball(1, 1.0).unwrap();
        let spec = PredictiveSpec::new(CenterEstimator::RawX, 2.0, u1).unwrap();
        assert_relative_eq!(
            predictive_eval(&spec, &[0.0], &[0.0]).unwrap(),
            0.25,
            max_relative = 1e-14
        );
        assert!(PredictiveSpec::new(
            CenterEstimator::RawX,
            0.0,
            RadialModel::normal(1, 1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn predictive_integrates_to_one_and_rescales() {
        let n3 = RadialModel::normal(3, 1.0).unwrap();
        let c = 1.175;
        let spec = PredictiveSpec::new(CenterEstimator::RawX, c, n3.clone()).unwrap();
        // Radial quadrature of the scaled density around its center.
        let rule = GaussLegendre::new(256);
        let hi = c * n3.truncation_radius(1e-12).unwrap();
        let d = 3.0;
        let surface =
            (std::f64::consts::LN_2 + (d / 2.0) * std::f64::consts::PI.ln() - lgamma(d / 2.0))
                .exp();
        let mass = rule.integrate(0.0, hi, |r| {
            surface * r * r * predictive_eval(&spec, &[0.0; 3], &[r, 0.0, 0.0]).unwrap()
        });
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        // Change of variables: q_c(y) = c^-d q_1((y - center)/c + center).
        let y = [0.7, -0.2, 0.4];
        let center = [0.1, 0.0, -0.3];
        let spec1 = PredictiveSpec::new(CenterEstimator::RawX, 1.0, n3).unwrap();
        let rescaled: Vec<f64> = y
            .iter()
            .zip(&center)
            .map(|(yi, ci)| ci + (yi - ci) / c)
            .collect();
        assert_relative_eq!(
            predictive_eval(&spec, &center, &y).unwrap(),
            c.powi(-3) * predictive_eval(&spec1, &center, &rescaled).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn center_estimators() {
        let mle = CenterEstimator::mle_ball(1.0).unwrap();
        assert_eq!(mle.resolve(&[0.5, 0.0, 0.0]), vec![0.5, 0.0, 0.0]);
        let proj = mle.resolve(&[3.0, 4.0, 0.0]);
        assert_abs_diff_eq!(proj[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(proj[1], 0.8, epsilon = 1e-15);
        assert_eq!(mle.resolve(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        // Projection never moves the estimate farther from any theta inside
        // the ball.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let theta: Vec<f64> = {
                let v: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let r = rng.random::<f64>();
                v.iter().map(|a| a * r / norm.max(1e-9)).collect()
            };
            let proj = mle.resolve(&x);
            let d_raw: f64 = x
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d_proj: f64 = proj
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(d_proj <= d_raw + 1e-12);
        }
        assert!(CenterEstimator::mle_ball(0.0).is_err());
    }

    #[test]
    fn sample_point_center_and_determinism() {
        let m = RadialModel::normal(3, 1.0).unwrap();
        let pts = m.sample_point(&[1.0, -2.0, 0.5], 50_000, 3).unwrap();
        for k in 0..3 {
            let mean: f64 = pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64;
            let want = [1.0, -2.0, 0.5][k];
            assert!((mean - want).abs() < 3.0 / (pts.len() as f64).sqrt() + 0.02);
        }
        assert_eq!(
            m.sample_point(&[0.0; 3], 10, 9).unwrap(),
            m.sample_point(&[0.0; 3], 10, 9).unwrap()
        );
        assert!(m.sample_point(&[0.0; 2], 10, 9).is_err());
    }

    #[test]
    fn parse_and_describe_roundtrip() {
        for spec in [
            "normal:d=3,var=1",
            "uniball:d=3,m=1",
            "normal:d=2,var=0.5",
            "uniball:d=1,m=3",
            "midrange:n=5,a=1",
        ] {
            let model = parse_model(spec).unwrap();
            assert_eq!(model.describe(), spec);
            let again = parse_model(&model.describe()).unwrap();
            assert_eq!(again.describe(), spec);
        }
        let mix = parse_model("mixnormal:d=2,mix=invgamma(0.5,0.5)").unwrap();
        assert_eq!(mix.dim(), 2);
        assert_eq!(mix.monotonicity(), Monotonicity::StrictlyDecreasing);
        let pts = parse_model("mixnormal:d=3,mix=points(1:0.5;4:0.5)").unwrap();
        assert_relative_eq!(
            pts.generator(0.0),
            0.5 * RadialModel::normal(3, 1.0).unwrap().generator(0.0)
                + 0.5 * RadialModel::normal(3, 4.0).unwrap().generator(0.0),
            max_relative = 1e-12
        );
        // Round-trip through the points() form.
        let again = parse_model(&pts.describe()).unwrap();
        assert_abs_diff_eq!(again.generator(1.3), pts.generator(1.3), epsilon = 1e-15);
    }

    #[test]
    fn parse_errors_name_the_offending_token() {
        for bad in [
            "gaussian:d=3",
            "normal",
            "normal:d=0",
            "normal:d=2,var=-1",
            "normal:d=2,sigma=1",
            "mixnormal:d=2,mix=lognormal(1)",
            "mixnormal:d=2",
            "uniball:d=2,m=abc",
        ] {
            assert!(parse_model(bad).is_err(), "expected parse failure for {bad}");
        }
        match parse_model("normal:d=2,sigma=1") {
            Err(Error::Parse(msg)) => assert!(msg.contains("sigma"), "message: {msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
