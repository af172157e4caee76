//! Self-check suite: finite-difference gradient verification, analytic-KL
//! versus Monte-Carlo agreement, half-Cauchy sampler KS tests, the
//! coordinate-ascent property of the auxiliary updates, and an AUROC oracle.
//!
//! Each check pairs a production code path with an independent route to the
//! same quantity, so a regression in either shows up as disagreement.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::special::softplus_inv;
use crate::distributions::{
    halfcauchy_hierarchy_sample, invgamma_logpdf, sample_invgamma, HalfCauchyParams,
    InvGammaParams,
};
use crate::gradients::{finite_diff_check, Objective, ParamVector};
use crate::metrics::auroc;
use crate::models::{
    init_model, HorseshoeLayerQ, ModelKind, ModelNoise, ModelSpec, Task,
};
use crate::training::{update_auxiliaries, FrozenElbo};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against `threshold` (worst case over repeats).
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Deliberate defects for negative-control tests of the check suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectedFault {
    /// Doubles every analytic ELBO gradient component.
    DoubledGradient,
}

struct DoubledGradient<T>(T);

impl<T: Objective> Objective for DoubledGradient<T> {
    fn value(&self, at: &ParamVector) -> f64 {
        self.0.value(at)
    }
    fn gradient(&self, at: &ParamVector) -> ParamVector {
        let mut g = self.0.gradient(at);
        for v in &mut g.values {
            *v *= 2.0;
        }
        g
    }
}

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-3;

/// Finite-difference verification of the frozen-noise ELBO gradient for one
/// model kind over `instances` random small instances.
pub fn gradient_check_kind(
    kind: ModelKind,
    instances: usize,
    seed: u64,
    fault: Option<InjectedFault>,
) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut worst_detail = String::new();
    let mut all_passed = true;
    for i in 0..instances {
        let inst_seed = seed.wrapping_add(i as u64);
        let task = if i % 2 == 0 { Task::Regression } else { Task::Classification };
        let spec = ModelSpec {
            kind,
            task,
            n_features: 3,
            n_hidden: if kind.is_bnn() { 5 } else { 0 },
            b0: 1.0,
            bg: 1.0,
            sigma_prior: 1.0,
        };
        let model = init_model(spec, inst_seed).expect("valid spec");
        let mut rng = ChaCha8Rng::seed_from_u64(inst_seed ^ 0x9e37_79b9);
        let n = 8;
        let x = Array2::from_shape_fn((n, 3), |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let y: Array1<f64> = match task {
            Task::Regression => {
                Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            }
            Task::Classification => Array1::from_shape_fn(n, |j| f64::from(u8::from(j % 2 == 0))),
        };
        let noises = vec![ModelNoise::draw(&model, &mut rng)];
        let obj = FrozenElbo { model: model.clone(), x, y, n_total: n, noises };

        // Jitter the evaluation point away from the init structure.
        let mut at = model.to_params();
        for v in &mut at.values {
            *v += 0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }

        let report = match fault {
            None => finite_diff_check(&obj, &at, FD_STEP, FD_TOL),
            Some(InjectedFault::DoubledGradient) => {
                finite_diff_check(&DoubledGradient(obj), &at, FD_STEP, FD_TOL)
            }
        };
        if report.max_rel_diff > worst {
            worst = report.max_rel_diff;
            worst_detail = format!(
                "instance {i} ({task:?}), worst segment {:?}",
                report.worst_segment
            );
        }
        all_passed &= report.passed;
    }
    CheckOutcome {
        name: format!("gradient_fd_{}", kind.name()),
        passed: all_passed,
        statistic: worst,
        threshold: FD_TOL,
        detail: worst_detail,
    }
}

fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * z * z
}

/// Monte-Carlo estimate (mean, standard error) of E_q[ln q − ln p] over the
/// horseshoe block {β, τ, v, λ, ϑ}. The independent oracle for
/// [`crate::training::kl_horseshoe_layer`]: it samples every factor and sums
/// log densities, including the 2τ/2v Jacobians of the squared-variable
/// prior convention.
pub fn mc_kl_horseshoe_layer<R: Rng + ?Sized>(
    layer: &HorseshoeLayerQ,
    b0: f64,
    bg: f64,
    n_samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let p_lambda = InvGammaParams { shape: 0.5, rate: 1.0 / (b0 * b0) };
    let p_theta = InvGammaParams { shape: 0.5, rate: 1.0 / (bg * bg) };
    let d = layer.n_features();
    let rows = layer.beta_mu.nrows();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let mut log_q = 0.0;
        let mut log_p = 0.0;

        for i in 0..rows {
            for j in 0..d {
                let mu = layer.beta_mu[[i, j]];
                let sigma = crate::distributions::special::softplus(layer.beta_rho[[i, j]]);
                let beta = mu + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                log_q += normal_logpdf(beta, mu, sigma);
                log_p += normal_logpdf(beta, 0.0, 1.0);
            }
        }

        for j in 0..d {
            let (mu, sigma) = (layer.tau_mu[j], layer.tau_sigma(j));
            let log_tau = mu + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let tau = log_tau.exp();
            let lambda = sample_invgamma(layer.lambda_q[j], rng);
            // q densities over τ and λ.
            log_q += normal_logpdf(log_tau, mu, sigma) - log_tau;
            log_q += invgamma_logpdf(lambda, layer.lambda_q[j]).expect("positive draw");
            // p(τ | λ) through τ², with Jacobian 2τ, and p(λ).
            log_p += invgamma_logpdf(tau * tau, InvGammaParams { shape: 0.5, rate: 1.0 / lambda })
                .expect("positive draw")
                + (2.0 * tau).ln();
            log_p += invgamma_logpdf(lambda, p_lambda).expect("positive draw");
        }

        let (v_mu, v_sigma) = (layer.v_mu, layer.v_sigma());
        let log_v = v_mu + v_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let v = log_v.exp();
        let theta = sample_invgamma(layer.theta_q, rng);
        log_q += normal_logpdf(log_v, v_mu, v_sigma) - log_v;
        log_q += invgamma_logpdf(theta, layer.theta_q).expect("positive draw");
        log_p += invgamma_logpdf(v * v, InvGammaParams { shape: 0.5, rate: 1.0 / theta })
            .expect("positive draw")
            + (2.0 * v).ln();
        log_p += invgamma_logpdf(theta, p_theta).expect("positive draw");

        let term = log_q - log_p;
        sum += term;
        sum_sq += term * term;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Random horseshoe layer for oracle checks: arbitrary (non-optimal)
/// posterior parameters, including the auxiliaries.
pub fn random_horseshoe_layer<R: Rng + ?Sized>(
    rows: usize,
    d: usize,
    rng: &mut R,
) -> HorseshoeLayerQ {
    fn unit<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * rng.random::<f64>()
    }
    let mut beta_mu = Array2::zeros((rows, d));
    let mut beta_rho = Array2::zeros((rows, d));
    for i in 0..rows {
        for j in 0..d {
            beta_mu[[i, j]] = rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.7;
            beta_rho[[i, j]] = softplus_inv(unit(rng, 0.05, 0.85));
        }
    }
    let mut tau_mu = Array1::zeros(d);
    let mut tau_rho = Array1::zeros(d);
    let mut lambda_q = Vec::with_capacity(d);
    for j in 0..d {
        tau_mu[j] = unit(rng, -2.5, 1.0);
        tau_rho[j] = softplus_inv(unit(rng, 0.05, 0.75));
        lambda_q.push(InvGammaParams {
            shape: unit(rng, 0.4, 2.0),
            rate: unit(rng, 0.4, 3.0),
        });
    }
    HorseshoeLayerQ {
        beta_mu,
        beta_rho,
        tau_mu,
        tau_rho,
        v_mu: unit(rng, -2.0, 0.5),
        v_rho: softplus_inv(unit(rng, 0.05, 0.75)),
        lambda_q,
        theta_q: InvGammaParams { shape: unit(rng, 0.4, 2.0), rate: unit(rng, 0.4, 3.0) },
        bias_mu: Array1::zeros(rows),
        bias_rho: Array1::from_elem(rows, softplus_inv(0.05)),
    }
}

/// Analytic horseshoe KL against the MC oracle on a 1×1 layer with
/// `n_samples` draws, plus smaller randomized layers.
pub fn kl_mc_check(n_samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_z: f64 = 0.0;
    let mut detail = String::new();

    // Primary comparison: single-feature, single-output layer.
    let layer = random_horseshoe_layer(1, 1, &mut rng);
    let analytic = crate::training::kl_horseshoe_layer(&layer, 1.0, 1.0);
    let (mc, se) = mc_kl_horseshoe_layer(&layer, 1.0, 1.0, n_samples, &mut rng);
    let z = (analytic - mc).abs() / se;
    if z > worst_z {
        worst_z = z;
        detail = format!("1x1 layer: analytic {analytic:.5} vs MC {mc:.5} ± {se:.5}");
    }

    // A few randomized small layers with fewer samples each.
    for i in 0..5 {
        let rows = 1 + (i % 3);
        let d = 1 + (i % 2);
        let (b0, bg) = (0.5 + 0.5 * i as f64 / 4.0, 1.0);
        let layer = random_horseshoe_layer(rows, d, &mut rng);
        let analytic = crate::training::kl_horseshoe_layer(&layer, b0, bg);
        let (mc, se) = mc_kl_horseshoe_layer(&layer, b0, bg, n_samples / 5, &mut rng);
        let z = (analytic - mc).abs() / se;
        if z > worst_z {
            worst_z = z;
            detail = format!(
                "{rows}x{d} layer (b0={b0}): analytic {analytic:.5} vs MC {mc:.5} ± {se:.5}"
            );
        }
    }

    CheckOutcome {
        name: "kl_horseshoe_vs_mc".into(),
        passed: worst_z < 3.0,
        statistic: worst_z,
        threshold: 3.0,
        detail,
    }
}

/// Kolmogorov–Smirnov statistic of `samples` against the half-Cauchy CDF.
pub fn ks_statistic_halfcauchy(samples: &mut [f64], b: f64) -> f64 {
    samples.sort_by(|a, c| a.partial_cmp(c).unwrap());
    let hc = HalfCauchyParams { scale_b: b };
    let n = samples.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = hc.cdf(x);
        ks = ks.max((f - i as f64 / n).abs());
        ks = ks.max(((i + 1) as f64 / n - f).abs());
    }
    ks
}

/// KS test of the auxiliary half-Cauchy sampler at n draws per scale.
pub fn ks_checks(n: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [0.5, 1.0, 3.0]
        .iter()
        .map(|&b| {
            let mut samples =
                halfcauchy_hierarchy_sample(HalfCauchyParams { scale_b: b }, n, &mut rng);
            let ks = ks_statistic_halfcauchy(&mut samples, b);
            CheckOutcome {
                name: format!("halfcauchy_ks_b{b}"),
                passed: ks < 0.01,
                statistic: ks,
                threshold: 0.01,
                detail: format!("n = {n}"),
            }
        })
        .collect()
}

/// Coordinate-ascent property: refreshing q(λ), q(ϑ) must not decrease the
/// ELBO. Only the KL block depends on the auxiliaries, so the check compares
/// MC KL estimates before and after the update.
pub fn aux_ascent_check(n_configs: usize, mc_samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_margin: f64 = f64::NEG_INFINITY;
    let mut detail = String::new();
    let mut passed = true;
    for i in 0..n_configs {
        let rows = 1 + (i % 2);
        let d = 1 + (i % 3);
        let mut layer = random_horseshoe_layer(rows, d, &mut rng);
        let (b0, bg) = (1.0, 1.0);
        let (before, se_b) = mc_kl_horseshoe_layer(&layer, b0, bg, mc_samples, &mut rng);
        update_auxiliaries(&mut layer, b0, bg);
        let (after, se_a) = mc_kl_horseshoe_layer(&layer, b0, bg, mc_samples, &mut rng);
        let noise = 3.0 * (se_a * se_a + se_b * se_b).sqrt();
        // ELBO change = KL decrease; it may not be negative beyond MC noise.
        let margin = after - before - noise;
        if margin > worst_margin {
            worst_margin = margin;
            detail = format!(
                "config {i}: KL before {before:.4} ± {se_b:.4}, after {after:.4} ± {se_a:.4}"
            );
        }
        passed &= margin <= 0.0;
    }
    CheckOutcome {
        name: "aux_update_coordinate_ascent".into(),
        passed,
        statistic: worst_margin,
        threshold: 0.0,
        detail,
    }
}

/// O(n²) pairwise AUROC: P(score⁺ > score⁻) + ½ P(tie).
pub fn auroc_bruteforce(scores: &[f64], labels: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, (&sp, &lp)) in scores.iter().zip(labels).enumerate() {
        if lp < 0.5 {
            continue;
        }
        for (j, (&sn, &ln)) in scores.iter().zip(labels).enumerate() {
            if i == j || ln >= 0.5 {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Rank-based AUROC against the pairwise oracle over random instances,
/// including tied scores.
pub fn auroc_check(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for i in 0..instances {
        let n = 5 + (rng.random::<u32>() as usize) % 196;
        // Quantized scores in about half the instances force tie handling.
        let quantize = i % 2 == 0;
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = rng.random::<f64>();
            scores.push(if quantize { (s * 8.0).round() / 8.0 } else { s });
            labels.push(f64::from(u8::from(rng.random::<f64>() < 0.4)));
        }
        // Both classes must be present.
        labels[0] = 1.0;
        labels[1] = 0.0;
        let fast = auroc(&scores, &labels).expect("two classes present");
        let brute = auroc_bruteforce(&scores, &labels);
        let diff = (fast - brute).abs();
        worst = worst.max(diff);
        passed &= diff < 1e-12;
    }
    CheckOutcome {
        name: "auroc_vs_bruteforce".into(),
        passed,
        statistic: worst,
        threshold: 1e-12,
        detail: format!("{instances} random instances"),
    }
}

/// Runs the full property suite. `fault` injects a deliberate defect so
/// tests can confirm the suite catches it.
pub fn run_all(seed: u64, fault: Option<InjectedFault>) -> DiagnosticsReport {
    let mut checks = Vec::new();
    for kind in [
        ModelKind::LinearGaussian,
        ModelKind::LinearHorseshoe,
        ModelKind::GaussianBnn,
        ModelKind::HorseshoeBnn,
    ] {
        checks.push(gradient_check_kind(kind, 20, seed, fault));
    }
    checks.push(kl_mc_check(1_000_000, seed.wrapping_add(1)));
    checks.extend(ks_checks(100_000, seed.wrapping_add(2)));
    checks.push(aux_ascent_check(20, 200_000, seed.wrapping_add(3)));
    checks.push(auroc_check(100, seed.wrapping_add(4)));
    DiagnosticsReport { seed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bruteforce_auroc_reference_case() {
        let auc = auroc_bruteforce(&[0.9, 0.8, 0.3, 0.2], &[1.0, 0.0, 1.0, 0.0]);
        assert!((auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn auroc_agrees_with_oracle_quick() {
        let out = auroc_check(25, 11);
        assert!(out.passed, "{out:?}");
    }

    #[test]
    fn injected_gradient_fault_is_caught() {
        let out = gradient_check_kind(
            ModelKind::LinearGaussian,
            2,
            0,
            Some(InjectedFault::DoubledGradient),
        );
        assert!(!out.passed);
    }
}
