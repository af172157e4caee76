//! Distribution families used by the prior and the variational posterior:
//! Gaussian, log-normal, inverse-Gamma, and the half-Cauchy expressed through
//! its auxiliary inverse-Gamma decomposition.
//!
//! Conventions. `InvGammaParams { shape, rate }` parameterizes the density
//! ∝ x^{−(shape+1)} e^{−rate/x}. A log-normal scale is carried as the
//! `GaussianParams` of its logarithm. All samplers take an explicit RNG and
//! are pure given it.

pub mod special;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use special::{digamma, ln_gamma};

/// Location/scale of a Gaussian; also the parameters of log X for a
/// log-normal X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::domain(format!(
                "Gaussian requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// Shape/rate of an inverse-Gamma (density ∝ x^{−(shape+1)} e^{−rate/x}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl InvGammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::domain(format!(
                "inverse-Gamma requires shape > 0 and rate > 0, got shape={shape}, rate={rate}"
            )));
        }
        Ok(Self { shape, rate })
    }
}

/// Scale of a half-Cauchy C⁺(0, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfCauchyParams {
    pub scale_b: f64,
}

impl HalfCauchyParams {
    pub fn new(scale_b: f64) -> Result<Self> {
        if !(scale_b > 0.0) || !scale_b.is_finite() {
            return Err(Error::domain(format!(
                "half-Cauchy requires scale > 0, got {scale_b}"
            )));
        }
        Ok(Self { scale_b })
    }

    /// CDF (2/π)·arctan(x/b) for x ≥ 0.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            2.0 / std::f64::consts::PI * (x / self.scale_b).atan()
        }
    }

    pub fn median(&self) -> f64 {
        self.scale_b
    }
}

/// KL(N(q) ‖ N(p)) = ln(σp/σq) + (σq² + (μq−μp)²)/(2σp²) − 1/2.
pub fn gaussian_kl(q: GaussianParams, p: GaussianParams) -> Result<f64> {
    if !(q.sigma > 0.0 && p.sigma > 0.0) {
        return Err(Error::domain(format!(
            "gaussian_kl requires positive sigmas, got {} and {}",
            q.sigma, p.sigma
        )));
    }
    let var_ratio = (q.sigma / p.sigma).powi(2);
    let mean_term = ((q.mu - p.mu) / p.sigma).powi(2);
    Ok(0.5 * (var_ratio + mean_term - 1.0) - (q.sigma / p.sigma).ln())
}

/// Mode and differential entropy of a log-normal X with log X ~ N(μ, σ²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalStats {
    pub mode: f64,
    pub entropy: f64,
}

/// Summary statistics of the log-normal defined by `p` on the log scale.
pub fn lognormal_stats(p: GaussianParams) -> Result<LogNormalStats> {
    if !(p.sigma > 0.0) {
        return Err(Error::domain(format!(
            "log-normal requires sigma > 0, got {}",
            p.sigma
        )));
    }
    let var = p.sigma * p.sigma;
    Ok(LogNormalStats {
        mode: (p.mu - var).exp(),
        entropy: p.mu + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln(),
    })
}

/// E[X^a] = exp(aμ + a²σ²/2) for log-normal X.
pub fn lognormal_moment(p: GaussianParams, a: f64) -> f64 {
    (a * p.mu + 0.5 * a * a * p.sigma * p.sigma).exp()
}

/// Log density of the inverse-Gamma at x > 0.
pub fn invgamma_logpdf(x: f64, p: InvGammaParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!(
            "inverse-Gamma density requires x > 0, got {x}"
        )));
    }
    Ok(p.shape * p.rate.ln() - ln_gamma(p.shape) - (p.shape + 1.0) * x.ln() - p.rate / x)
}

/// The inverse-Gamma expectations that appear in the analytic KL terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaMoments {
    /// E[1/X] = shape/rate.
    pub e_inv: f64,
    /// E[ln X] = ln(rate) − ψ(shape).
    pub e_log: f64,
}

pub fn invgamma_moments(p: InvGammaParams) -> InvGammaMoments {
    InvGammaMoments {
        e_inv: p.shape / p.rate,
        e_log: p.rate.ln() - digamma(p.shape),
    }
}

/// Differential entropy of the inverse-Gamma.
pub fn invgamma_entropy(p: InvGammaParams) -> f64 {
    p.shape + p.rate.ln() + ln_gamma(p.shape) - (1.0 + p.shape) * digamma(p.shape)
}

/// Draw from the inverse-Gamma by inverting a Gamma(shape, 1) draw.
pub fn sample_invgamma<R: Rng + ?Sized>(p: InvGammaParams, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(p.shape, 1.0)
        .expect("validated shape")
        .sample(rng);
    p.rate / g
}

/// Draw `n` variates whose marginal is C⁺(0, b) via the auxiliary
/// decomposition: κ ~ InvΓ(1/2, 1/b²), a² ~ InvΓ(1/2, 1/κ), a = √(a²).
///
/// The squared-variable convention is what makes the half-Cauchy marginal
/// exact; the KS check in [`crate::diagnostics`] validates it empirically.
pub fn halfcauchy_hierarchy_sample<R: Rng + ?Sized>(
    p: HalfCauchyParams,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    assert!(n >= 1);
    let kappa_params = InvGammaParams {
        shape: 0.5,
        rate: 1.0 / (p.scale_b * p.scale_b),
    };
    (0..n)
        .map(|_| {
            let kappa = sample_invgamma(kappa_params, rng);
            let a_sq = sample_invgamma(
                InvGammaParams {
                    shape: 0.5,
                    rate: 1.0 / kappa,
                },
                rng,
            );
            a_sq.sqrt()
        })
        .collect()
}

/// The reparameterization map μ + σ·ε; differentiable in (μ, σ) for fixed ε.
pub fn reparam_sample(p: GaussianParams, eps: f64) -> f64 {
    p.mu + p.sigma * eps
}

/// Draw a standard normal.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(mu: f64, sigma: f64) -> GaussianParams {
        GaussianParams { mu, sigma }
    }

    #[test]
    fn gaussian_kl_analytic_cases() {
        assert_abs_diff_eq!(
            gaussian_kl(g(0.0, 1.0), g(0.0, 1.0)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gaussian_kl(g(1.0, 1.0), g(0.0, 1.0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gaussian_kl(g(0.0, 0.5), g(0.0, 1.0)).unwrap(),
            2.0_f64.ln() + 0.125 - 0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_kl_rejects_bad_sigma() {
        assert!(gaussian_kl(g(0.0, 1.0), GaussianParams { mu: 0.0, sigma: 0.0 }).is_err());
        assert!(GaussianParams::new(0.0, -1.0).is_err());
    }

    #[test]
    fn lognormal_analytic_cases() {
        let s = lognormal_stats(g(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(s.mode, (-1.0_f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            lognormal_moment(g(0.0, 1.0), -2.0),
            2.0_f64.exp(),
            epsilon = 1e-12
        );
        // Degenerate-scale limit: mode → exp(μ).
        let tight = lognormal_stats(g(2.0, 1e-9)).unwrap();
        assert_abs_diff_eq!(tight.mode, 2.0_f64.exp(), epsilon = 1e-6);
        assert!(lognormal_stats(g(0.0, 0.0)).is_err());
    }

    #[test]
    fn invgamma_logpdf_analytic_cases() {
        let ig = |s, r| InvGammaParams { shape: s, rate: r };
        assert_abs_diff_eq!(
            invgamma_logpdf(1.0, ig(0.5, 1.0)).unwrap(),
            -(std::f64::consts::PI.sqrt().ln()) - 1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(invgamma_logpdf(1.0, ig(1.0, 1.0)).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            invgamma_logpdf(2.0, ig(0.5, 1.0)).unwrap(),
            -(std::f64::consts::PI.sqrt().ln()) - 1.5 * 2.0_f64.ln() - 0.5,
            epsilon = 1e-12
        );
        assert!(invgamma_logpdf(0.0, ig(1.0, 1.0)).is_err());
    }

    #[test]
    fn invgamma_moment_analytic_cases() {
        let m = invgamma_moments(InvGammaParams { shape: 1.0, rate: 1.0 });
        assert_abs_diff_eq!(m.e_inv, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.e_log, 0.577_215_664_901_532_9, epsilon = 1e-12);
        let m = invgamma_moments(InvGammaParams { shape: 0.5, rate: 2.0 });
        assert_abs_diff_eq!(m.e_inv, 0.25, epsilon = 1e-12);
        let m = invgamma_moments(InvGammaParams { shape: 2.0, rate: 2.0 });
        assert_abs_diff_eq!(m.e_log, 2.0_f64.ln() - digamma(2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(m.e_log, 0.270_363_2, epsilon = 1e-6);
    }

    #[test]
    fn reparam_sample_is_affine() {
        assert_eq!(reparam_sample(g(0.0, 1.0), 0.0), 0.0);
        assert_eq!(reparam_sample(g(2.0, 3.0), 1.0), 5.0);
        assert_eq!(reparam_sample(g(-1.0, 0.5), -2.0), -2.0);
    }

    #[test]
    fn halfcauchy_sample_median_tracks_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &b in &[1.0, 3.0] {
            let mut xs =
                halfcauchy_hierarchy_sample(HalfCauchyParams { scale_b: b }, 40_000, &mut rng);
            xs.sort_by(|a, c| a.partial_cmp(c).unwrap());
            let median = xs[xs.len() / 2];
            assert!(
                (median - b).abs() < 0.02 * b,
                "median {median} departs from scale {b}"
            );
        }
    }

    #[test]
    fn invgamma_sampler_matches_moments() {
        // E[1/X] has finite variance for these parameters, so a plain MC
        // average is a sound independent check on the sampler.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = InvGammaParams { shape: 2.5, rate: 3.0 };
        let n = 200_000;
        let mean_inv: f64 = (0..n)
            .map(|_| 1.0 / sample_invgamma(p, &mut rng))
            .sum::<f64>()
            / n as f64;
        let truth = invgamma_moments(p).e_inv;
        assert!((mean_inv - truth).abs() < 0.01 * truth);
    }
}
