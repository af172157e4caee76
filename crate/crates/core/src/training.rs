//! ELBO estimation and maximization.
//!
//! The training loss is the doubly stochastic ELBO: minibatch log-likelihood
//! scaled by N/M and averaged over reparameterized weight draws, minus the KL
//! divergence between the variational posterior and the prior. Every KL term
//! is analytic. The scale variables use the squared-variable convention:
//! priors are inverse-Gamma conditionals on τ_j² and v² while the posteriors
//! are log-normal on τ_j and v, so the cross-entropy terms carry the 2τ
//! (resp. 2v) change-of-variables Jacobian. The auxiliary posteriors q(λ_j)
//! and q(ϑ) have closed-form coordinate-ascent updates and are refreshed once
//! per epoch instead of by gradient.
//!
//! Gradients of the frozen-noise ELBO are derived by hand (reverse-mode over
//! the two-layer architecture plus the reparameterization chain rule) and are
//! verified against central finite differences in the diagnostics suite.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::special::{sigmoid, softplus};
use crate::distributions::{
    gaussian_kl, invgamma_entropy, invgamma_moments, GaussianParams, InvGammaParams,
};
use crate::error::{Error, Result};
use crate::gradients::{Objective, ParamVector};
use crate::models::{
    realize_layer, GaussianLayerQ, HorseshoeLayerQ, LayerQ, ModelNoise, Task, VariationalModel,
};

/// Probabilities are clamped to [PROB_CLAMP, 1 − PROB_CLAMP] before logs.
pub const PROB_CLAMP: f64 = 1e-7;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Weight draws per gradient step.
    #[serde(default = "default_train_mc")]
    pub train_mc_samples: usize,
    /// Weight draws for test-time prediction.
    #[serde(default = "default_test_mc")]
    pub test_mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
}

fn default_epochs() -> usize {
    5000
}
fn default_batch_size() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-3
}
fn default_train_mc() -> usize {
    10
}
fn default_test_mc() -> usize {
    100
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            lr: default_lr(),
            train_mc_samples: default_train_mc(),
            test_mc_samples: default_test_mc(),
            seed: 0,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_adam_eps(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 && false {
            // Zero epochs is legal: training returns the model unchanged.
        }
        if self.batch_size == 0 || self.train_mc_samples == 0 || self.test_mc_samples == 0 {
            return Err(Error::domain(
                "batch_size and MC sample counts must be at least 1",
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::domain("learning rate must be positive"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First/second moment accumulators and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

/// One Adam descent step with bias correction; pass the gradient of the loss
/// to minimize.
pub fn adam_step(
    params: &mut ParamVector,
    grads: &ParamVector,
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "state sized for different model");
    state.t += 1;
    let b1t = 1.0 - cfg.beta1.powi(state.t as i32);
    let b2t = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads.values[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params.values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

/// Sum of per-point log-likelihoods of a batch under one weight realization.
pub fn log_likelihood(
    model: &VariationalModel,
    weights: &crate::models::WeightRealization,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> f64 {
    let raw = model.raw_output(weights, x);
    log_likelihood_from_raw(model, raw.view(), y)
}

fn log_likelihood_from_raw(
    model: &VariationalModel,
    raw: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> f64 {
    match model.spec.task {
        Task::Classification => raw
            .iter()
            .zip(y.iter())
            .map(|(&f, &yi)| {
                let p = sigmoid(f).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                yi * p.ln() + (1.0 - yi) * (1.0 - p).ln()
            })
            .sum(),
        Task::Regression => {
            let s = model.obs_log_sigma;
            let inv_var = (-2.0 * s).exp();
            raw.iter()
                .zip(y.iter())
                .map(|(&f, &yi)| -0.5 * LN_2PI - s - 0.5 * (yi - f).powi(2) * inv_var)
                .sum()
        }
    }
}

// ---------------------------------------------------------------------------
// Analytic KL terms
// ---------------------------------------------------------------------------

fn kl_gaussian_block(
    mu: impl Iterator<Item = f64>,
    rho: impl Iterator<Item = f64>,
    sigma_prior: f64,
) -> f64 {
    let prior = GaussianParams { mu: 0.0, sigma: sigma_prior };
    mu.zip(rho)
        .map(|(m, r)| {
            gaussian_kl(GaussianParams { mu: m, sigma: softplus(r) }, prior)
                .expect("softplus keeps sigma positive")
        })
        .sum()
}

/// KL of a factorized Gaussian layer (weights and biases) against N(0, σ²).
pub fn kl_gaussian_layer(layer: &GaussianLayerQ, sigma_prior: f64) -> f64 {
    kl_gaussian_block(
        layer.weight_mu.iter().cloned(),
        layer.weight_rho.iter().cloned(),
        sigma_prior,
    ) + kl_gaussian_block(
        layer.bias_mu.iter().cloned(),
        layer.bias_rho.iter().cloned(),
        sigma_prior,
    )
}

/// E_q[−ln p(x | y)] where x² | y ~ InvΓ(1/2, 1/y), q(x) is log-normal
/// (μ, σ on the log scale) and y has inverse-Gamma moments `y_m`. Includes
/// the 2x Jacobian of the square.
fn cross_entropy_scale_given_aux(
    mu: f64,
    sigma: f64,
    y_m: crate::distributions::InvGammaMoments,
) -> f64 {
    let e_inv_x2 = (-2.0 * mu + 2.0 * sigma * sigma).exp();
    0.5 * y_m.e_log + 0.5 * std::f64::consts::PI.ln() - 2.0_f64.ln() + 2.0 * mu
        + y_m.e_inv * e_inv_x2
}

/// E_q[−ln p(y)] with p = InvΓ(1/2, 1/b²) and q the given inverse-Gamma.
fn cross_entropy_aux_prior(q: InvGammaParams, b: f64) -> f64 {
    let m = invgamma_moments(q);
    b.ln() + 0.5 * std::f64::consts::PI.ln() + 1.5 * m.e_log + m.e_inv / (b * b)
}

fn lognormal_entropy_scalar(mu: f64, sigma: f64) -> f64 {
    mu + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln()
}

/// Analytic E_q[ln q − ln p] over the horseshoe block {β, τ, v, λ, ϑ}.
///
/// The bias of a horseshoe layer has a plain Gaussian prior and is accounted
/// for separately in [`total_kl`].
pub fn kl_horseshoe_layer(layer: &HorseshoeLayerQ, b0: f64, bg: f64) -> f64 {
    // β against the non-centered prior N(0, 1).
    let mut kl = kl_gaussian_block(
        layer.beta_mu.iter().cloned(),
        layer.beta_rho.iter().cloned(),
        1.0,
    );

    for j in 0..layer.n_features() {
        let (mu, sigma) = (layer.tau_mu[j], layer.tau_sigma(j));
        let lam = layer.lambda_q[j];
        kl += cross_entropy_scale_given_aux(mu, sigma, invgamma_moments(lam))
            - lognormal_entropy_scalar(mu, sigma);
        kl += cross_entropy_aux_prior(lam, b0) - invgamma_entropy(lam);
    }

    let (v_mu, v_sigma) = (layer.v_mu, layer.v_sigma());
    kl += cross_entropy_scale_given_aux(v_mu, v_sigma, invgamma_moments(layer.theta_q))
        - lognormal_entropy_scalar(v_mu, v_sigma);
    kl += cross_entropy_aux_prior(layer.theta_q, bg) - invgamma_entropy(layer.theta_q);

    kl
}

/// KL of the full variational posterior against the prior, summed over
/// layers. Horseshoe-layer biases contribute their Gaussian KL here.
pub fn total_kl(model: &VariationalModel) -> Vec<f64> {
    model
        .layers
        .iter()
        .map(|layer| match layer {
            LayerQ::Gaussian(l) => kl_gaussian_layer(l, model.spec.sigma_prior),
            LayerQ::Horseshoe(l) => {
                kl_horseshoe_layer(l, model.spec.b0, model.spec.bg)
                    + kl_gaussian_block(
                        l.bias_mu.iter().cloned(),
                        l.bias_rho.iter().cloned(),
                        model.spec.sigma_prior,
                    )
            }
        })
        .collect()
}

/// Closed-form coordinate-ascent refresh of q(λ_j) and q(ϑ):
/// q(λ_j) = InvΓ(1, 1/b0² + E[1/τ_j²]) and q(ϑ) = InvΓ(1, 1/bg² + E[1/v²]).
/// Idempotent while the scale posteriors are fixed.
pub fn update_auxiliaries(layer: &mut HorseshoeLayerQ, b0: f64, bg: f64) {
    for j in 0..layer.n_features() {
        let sigma = layer.tau_sigma(j);
        let e_inv_tau2 = (-2.0 * layer.tau_mu[j] + 2.0 * sigma * sigma).exp();
        layer.lambda_q[j] = InvGammaParams { shape: 1.0, rate: 1.0 / (b0 * b0) + e_inv_tau2 };
    }
    let vs = layer.v_sigma();
    let e_inv_v2 = (-2.0 * layer.v_mu + 2.0 * vs * vs).exp();
    layer.theta_q = InvGammaParams { shape: 1.0, rate: 1.0 / (bg * bg) + e_inv_v2 };
}

// ---------------------------------------------------------------------------
// ELBO estimate and its gradient
// ---------------------------------------------------------------------------

/// Doubly stochastic ELBO estimate: (N/M)·mean_s[log-lik] − Σ KL.
pub fn elbo_estimate<R: Rng + ?Sized>(
    model: &VariationalModel,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    n_total: usize,
    s: usize,
    rng: &mut R,
) -> Result<f64> {
    assert!(s >= 1);
    let noises: Vec<ModelNoise> = (0..s).map(|_| ModelNoise::draw(model, rng)).collect();
    elbo_with_frozen_noise(model, x, y, n_total, &noises)
}

/// ELBO estimate with the weight noise fixed by the caller.
pub fn elbo_with_frozen_noise(
    model: &VariationalModel,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    n_total: usize,
    noises: &[ModelNoise],
) -> Result<f64> {
    let m = x.nrows();
    if m == 0 || m != y.len() {
        return Err(Error::shape("batch is empty or X/y lengths differ"));
    }
    let scale = n_total as f64 / m as f64 / noises.len() as f64;
    let mut lik = 0.0;
    for noise in noises {
        let w = model.realize(noise);
        let ll = log_likelihood(model, &w, x, y);
        if !ll.is_finite() {
            return Err(Error::non_finite("log-likelihood", "ELBO estimate"));
        }
        lik += scale * ll;
    }
    let mut elbo = lik;
    for (i, kl) in total_kl(model).iter().enumerate() {
        if !kl.is_finite() {
            return Err(Error::non_finite(format!("KL of layer {i}"), "ELBO estimate"));
        }
        elbo -= kl;
    }
    Ok(elbo)
}

struct GaussianCache {
    sigma_w: Array2<f64>,
    sprime_w: Array2<f64>,
    sigma_b: Array1<f64>,
    sprime_b: Array1<f64>,
}

struct HorseshoeCache {
    sigma_beta: Array2<f64>,
    sprime_beta: Array2<f64>,
    sigma_tau: Array1<f64>,
    sprime_tau: Array1<f64>,
    sigma_v: f64,
    sprime_v: f64,
    sigma_b: Array1<f64>,
    sprime_b: Array1<f64>,
}

enum LayerCache {
    Gaussian(GaussianCache),
    Horseshoe(HorseshoeCache),
}

fn build_cache(layer: &LayerQ) -> LayerCache {
    match layer {
        LayerQ::Gaussian(l) => LayerCache::Gaussian(GaussianCache {
            sigma_w: l.weight_rho.mapv(softplus),
            sprime_w: l.weight_rho.mapv(sigmoid),
            sigma_b: l.bias_rho.mapv(softplus),
            sprime_b: l.bias_rho.mapv(sigmoid),
        }),
        LayerQ::Horseshoe(l) => LayerCache::Horseshoe(HorseshoeCache {
            sigma_beta: l.beta_rho.mapv(softplus),
            sprime_beta: l.beta_rho.mapv(sigmoid),
            sigma_tau: l.tau_rho.mapv(softplus),
            sprime_tau: l.tau_rho.mapv(sigmoid),
            sigma_v: softplus(l.v_rho),
            sprime_v: sigmoid(l.v_rho),
            sigma_b: l.bias_rho.mapv(softplus),
            sprime_b: l.bias_rho.mapv(sigmoid),
        }),
    }
}

fn view2<'a>(grad: &'a mut ParamVector, name: &str, shape: (usize, usize)) -> ArrayViewMut2<'a, f64> {
    let slice = grad
        .segment_mut(name)
        .unwrap_or_else(|| panic!("missing gradient segment {name}"));
    ArrayViewMut2::from_shape(shape, slice).expect("segment length matches shape")
}

/// Frozen-noise ELBO value and its analytic gradient in the model's flat
/// parameter layout.
pub fn elbo_value_and_grad(
    model: &VariationalModel,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    n_total: usize,
    noises: &[ModelNoise],
) -> Result<(f64, ParamVector)> {
    let m = x.nrows();
    if m == 0 || m != y.len() {
        return Err(Error::shape("batch is empty or X/y lengths differ"));
    }
    let layout = model.layout();
    let mut grad = ParamVector::zeros(layout);
    let scale = n_total as f64 / m as f64 / noises.len() as f64;
    let caches: Vec<LayerCache> = model.layers.iter().map(build_cache).collect();
    let is_bnn = model.spec.kind.is_bnn();

    let mut lik_value = 0.0;
    for noise in noises {
        // Forward with cached intermediates.
        let mut realized = Vec::with_capacity(model.layers.len());
        for (layer, n) in model.layers.iter().zip(&noise.layers) {
            realized.push(realize_layer(layer, n));
        }
        let first = &realized[0].0;
        let a1 = x.dot(&first.weights.t()) + &first.bias;
        let (raw, z) = if is_bnn {
            let z = a1.mapv(|t| t.max(0.0));
            let second = &realized[1].0;
            let out = z.dot(&second.weights.t()) + &second.bias;
            (out.column(0).to_owned(), Some(z))
        } else {
            (a1.column(0).to_owned(), None)
        };

        let ll = log_likelihood_from_raw(model, raw.view(), y);
        if !ll.is_finite() {
            return Err(Error::non_finite("log-likelihood", "ELBO gradient"));
        }
        lik_value += scale * ll;

        // d(log-lik)/d(raw output), one entry per datapoint.
        let dout: Array1<f64> = match model.spec.task {
            Task::Classification => raw
                .iter()
                .zip(y.iter())
                .map(|(&f, &yi)| {
                    let p = sigmoid(f);
                    if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                        0.0
                    } else {
                        yi - p
                    }
                })
                .collect(),
            Task::Regression => {
                let inv_var = (-2.0 * model.obs_log_sigma).exp();
                let d: Array1<f64> = raw
                    .iter()
                    .zip(y.iter())
                    .map(|(&f, &yi)| (yi - f) * inv_var)
                    .collect();
                let ds: f64 = raw
                    .iter()
                    .zip(y.iter())
                    .map(|(&f, &yi)| -1.0 + (yi - f).powi(2) * inv_var)
                    .sum();
                grad.segment_mut("obs_log_sigma").expect("regression layout")[0] +=
                    scale * ds;
                d
            }
        };

        // Backprop through the (optional) hidden layer.
        let dout2 = dout.view().insert_axis(Axis(1));
        let (d_w_first, d_b_first) = if is_bnn {
            let z = z.as_ref().expect("bnn caches activations");
            let second = &realized[1].0;
            let d_w2 = dout2.t().dot(z);
            let d_b2 = Array1::from_elem(1, dout.sum());
            accumulate_gaussian_layer(
                &mut grad,
                1,
                &caches[1],
                &noise.layers[1],
                &d_w2,
                &d_b2,
                scale,
            );
            let dz = dout2.dot(&second.weights);
            let da1 = &dz * &a1.mapv(|t| if t > 0.0 { 1.0 } else { 0.0 });
            let d_w1 = da1.t().dot(&x);
            let d_b1 = da1.sum_axis(Axis(0));
            (d_w1, d_b1)
        } else {
            let d_w1 = dout2.t().dot(&x);
            let d_b1 = Array1::from_elem(1, dout.sum());
            (d_w1, d_b1)
        };

        match (&model.layers[0], &caches[0], &realized[0].1) {
            (LayerQ::Gaussian(_), LayerCache::Gaussian(_), None) => {
                accumulate_gaussian_layer(
                    &mut grad,
                    0,
                    &caches[0],
                    &noise.layers[0],
                    &d_w_first,
                    &d_b_first,
                    scale,
                );
            }
            (LayerQ::Horseshoe(_), LayerCache::Horseshoe(cache), Some(hs)) => {
                let n = &noise.layers[0];
                let w = &realized[0].0;
                // dβ = dW ∘ (v τ_j), broadcast over columns.
                let mut d_beta = d_w_first.clone();
                for (j, mut col) in d_beta.columns_mut().into_iter().enumerate() {
                    col.mapv_inplace(|g| g * hs.v * hs.tau[j]);
                }
                {
                    let shape = d_beta.dim();
                    let mut g = view2(&mut grad, "layer0.beta_mu", shape);
                    g.scaled_add(scale, &d_beta);
                }
                {
                    let shape = d_beta.dim();
                    let chain = &d_beta * &n.eps_weight * &cache.sprime_beta;
                    let mut g = view2(&mut grad, "layer0.beta_rho", shape);
                    g.scaled_add(scale, &chain);
                }
                // d(log τ_j) = Σ_i dW_ij · W_ij, and d(log v) sums over all.
                let dw_times_w = &d_w_first * &w.weights;
                let d_log_tau = dw_times_w.sum_axis(Axis(0));
                let d_log_v = d_log_tau.sum();
                let eps_tau = n.eps_tau.as_ref().expect("horseshoe noise");
                {
                    let g = grad.segment_mut("layer0.tau_mu").expect("layout");
                    for j in 0..g.len() {
                        g[j] += scale * d_log_tau[j];
                    }
                }
                {
                    let g = grad.segment_mut("layer0.tau_rho").expect("layout");
                    for j in 0..g.len() {
                        g[j] += scale * d_log_tau[j] * eps_tau[j] * cache.sprime_tau[j];
                    }
                }
                grad.segment_mut("layer0.v_mu").expect("layout")[0] += scale * d_log_v;
                grad.segment_mut("layer0.v_rho").expect("layout")[0] +=
                    scale * d_log_v * n.eps_v.expect("horseshoe noise") * cache.sprime_v;
                // Bias is a plain reparameterized Gaussian.
                let g_mu = grad.segment_mut("layer0.bias_mu").expect("layout");
                for i in 0..g_mu.len() {
                    g_mu[i] += scale * d_b_first[i];
                }
                let g_rho = grad.segment_mut("layer0.bias_rho").expect("layout");
                for i in 0..g_rho.len() {
                    g_rho[i] += scale * d_b_first[i] * n.eps_bias[i] * cache.sprime_b[i];
                }
            }
            _ => unreachable!("cache variant follows layer variant"),
        }
    }

    // KL gradients enter once (the ELBO subtracts the KL).
    let mut elbo = lik_value;
    for (i, kl) in total_kl(model).iter().enumerate() {
        if !kl.is_finite() {
            return Err(Error::non_finite(format!("KL of layer {i}"), "ELBO gradient"));
        }
        elbo -= kl;
    }
    subtract_kl_gradients(model, &caches, &mut grad);

    if !grad.is_finite() {
        return Err(Error::non_finite("gradient", "ELBO gradient"));
    }
    Ok((elbo, grad))
}

/// Adds the likelihood gradient of one Gaussian layer into the flat vector.
fn accumulate_gaussian_layer(
    grad: &mut ParamVector,
    layer_idx: usize,
    cache: &LayerCache,
    noise: &crate::models::LayerNoise,
    d_w: &Array2<f64>,
    d_b: &Array1<f64>,
    scale: f64,
) {
    let LayerCache::Gaussian(c) = cache else {
        unreachable!("gaussian cache for gaussian layer")
    };
    let shape = d_w.dim();
    {
        let mut g = view2(grad, &format!("layer{layer_idx}.weight_mu"), shape);
        g.scaled_add(scale, d_w);
    }
    {
        let chain = d_w * &noise.eps_weight * &c.sprime_w;
        let mut g = view2(grad, &format!("layer{layer_idx}.weight_rho"), shape);
        g.scaled_add(scale, &chain);
    }
    let g_mu = grad
        .segment_mut(&format!("layer{layer_idx}.bias_mu"))
        .expect("layout");
    for i in 0..g_mu.len() {
        g_mu[i] += scale * d_b[i];
    }
    let g_rho = grad
        .segment_mut(&format!("layer{layer_idx}.bias_rho"))
        .expect("layout");
    for i in 0..g_rho.len() {
        g_rho[i] += scale * d_b[i] * noise.eps_bias[i] * c.sprime_b[i];
    }
}

fn subtract_kl_gradients(model: &VariationalModel, caches: &[LayerCache], grad: &mut ParamVector) {
    let sp = model.spec.sigma_prior;
    for (i, (layer, cache)) in model.layers.iter().zip(caches).enumerate() {
        match (layer, cache) {
            (LayerQ::Gaussian(l), LayerCache::Gaussian(c)) => {
                subtract_gaussian_kl_block(
                    grad,
                    &format!("layer{i}.weight_mu"),
                    &format!("layer{i}.weight_rho"),
                    l.weight_mu.iter(),
                    c.sigma_w.iter(),
                    c.sprime_w.iter(),
                    sp,
                );
                subtract_gaussian_kl_block(
                    grad,
                    &format!("layer{i}.bias_mu"),
                    &format!("layer{i}.bias_rho"),
                    l.bias_mu.iter(),
                    c.sigma_b.iter(),
                    c.sprime_b.iter(),
                    sp,
                );
            }
            (LayerQ::Horseshoe(l), LayerCache::Horseshoe(c)) => {
                // β against N(0, 1).
                subtract_gaussian_kl_block(
                    grad,
                    &format!("layer{i}.beta_mu"),
                    &format!("layer{i}.beta_rho"),
                    l.beta_mu.iter(),
                    c.sigma_beta.iter(),
                    c.sprime_beta.iter(),
                    1.0,
                );
                // τ_j cross-entropy and entropy terms.
                {
                    let e_inv_lambda: Vec<f64> =
                        l.lambda_q.iter().map(|q| q.shape / q.rate).collect();
                    let g_mu = grad.segment_mut(&format!("layer{i}.tau_mu")).expect("layout");
                    for j in 0..g_mu.len() {
                        let e = (-2.0 * l.tau_mu[j] + 2.0 * c.sigma_tau[j].powi(2)).exp();
                        g_mu[j] -= 1.0 - 2.0 * e_inv_lambda[j] * e;
                    }
                    let g_rho = grad.segment_mut(&format!("layer{i}.tau_rho")).expect("layout");
                    for j in 0..g_rho.len() {
                        let sig = c.sigma_tau[j];
                        let e = (-2.0 * l.tau_mu[j] + 2.0 * sig * sig).exp();
                        let d_sigma = 4.0 * sig * e_inv_lambda[j] * e - 1.0 / sig;
                        g_rho[j] -= d_sigma * c.sprime_tau[j];
                    }
                }
                // v terms.
                {
                    let e_inv_theta = l.theta_q.shape / l.theta_q.rate;
                    let e = (-2.0 * l.v_mu + 2.0 * c.sigma_v * c.sigma_v).exp();
                    grad.segment_mut(&format!("layer{i}.v_mu")).expect("layout")[0] -=
                        1.0 - 2.0 * e_inv_theta * e;
                    let d_sigma = 4.0 * c.sigma_v * e_inv_theta * e - 1.0 / c.sigma_v;
                    grad.segment_mut(&format!("layer{i}.v_rho")).expect("layout")[0] -=
                        d_sigma * c.sprime_v;
                }
                subtract_gaussian_kl_block(
                    grad,
                    &format!("layer{i}.bias_mu"),
                    &format!("layer{i}.bias_rho"),
                    l.bias_mu.iter(),
                    c.sigma_b.iter(),
                    c.sprime_b.iter(),
                    sp,
                );
            }
            _ => unreachable!(),
        }
    }
}

fn subtract_gaussian_kl_block<'a>(
    grad: &mut ParamVector,
    mu_name: &str,
    rho_name: &str,
    mu: impl Iterator<Item = &'a f64>,
    sigma: impl Iterator<Item = &'a f64> + Clone,
    sprime: impl Iterator<Item = &'a f64>,
    sigma_prior: f64,
) {
    let inv_var = 1.0 / (sigma_prior * sigma_prior);
    {
        let g = grad.segment_mut(mu_name).expect("layout");
        for (gi, &m) in g.iter_mut().zip(mu) {
            *gi -= m * inv_var;
        }
    }
    {
        let g = grad.segment_mut(rho_name).expect("layout");
        for ((gi, &s), &sp) in g.iter_mut().zip(sigma).zip(sprime) {
            *gi -= (s * inv_var - 1.0 / s) * sp;
        }
    }
}

/// The ELBO with frozen noise as an [`Objective`] over the flat parameters ­—
/// the loss the finite-difference oracle differentiates.
pub struct FrozenElbo {
    pub model: VariationalModel,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub n_total: usize,
    pub noises: Vec<ModelNoise>,
}

impl FrozenElbo {
    fn with_params(&self, at: &ParamVector) -> VariationalModel {
        let mut m = self.model.clone();
        m.set_params(at).expect("layout produced by this model");
        m
    }
}

impl Objective for FrozenElbo {
    fn value(&self, at: &ParamVector) -> f64 {
        let m = self.with_params(at);
        elbo_with_frozen_noise(&m, self.x.view(), self.y.view(), self.n_total, &self.noises)
            .expect("finite ELBO")
    }

    fn gradient(&self, at: &ParamVector) -> ParamVector {
        let m = self.with_params(at);
        elbo_value_and_grad(&m, self.x.view(), self.y.view(), self.n_total, &self.noises)
            .expect("finite ELBO gradient")
            .1
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxUpdateRecord {
    pub epoch: usize,
    pub mean_lambda_rate: f64,
    pub theta_rate: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean minibatch ELBO estimate per epoch.
    pub elbo: Vec<f64>,
    pub aux_updates: Vec<AuxUpdateRecord>,
}

/// Minibatch Adam ascent on the ELBO. Deterministic given the seed; the
/// auxiliary posteriors of horseshoe layers are refreshed once per epoch.
pub fn train(
    model: &VariationalModel,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    cfg: &TrainConfig,
) -> Result<(VariationalModel, TrainHistory)> {
    cfg.validate()?;
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::shape("training set is empty or X/y lengths differ"));
    }
    if x.ncols() != model.spec.n_features {
        return Err(Error::shape(format!(
            "training data has {} features, model expects {}",
            x.ncols(),
            model.spec.n_features
        )));
    }

    let n_total = x.nrows();
    let mut model = model.clone();
    let mut params = model.to_params();
    let mut adam = AdamState::new(params.len());
    let adam_cfg = cfg.adam();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let mut indices: Vec<usize> = (0..n_total).collect();
    let mut neg_grad = ParamVector::zeros(params.layout.clone());

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_elbo = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(cfg.batch_size) {
            model.set_params(&params)?;
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let noises: Vec<ModelNoise> = (0..cfg.train_mc_samples)
                .map(|_| ModelNoise::draw(&model, &mut rng))
                .collect();
            let (value, grad) =
                elbo_value_and_grad(&model, xb.view(), yb.view(), n_total, &noises).map_err(
                    |e| match e {
                        Error::NonFinite { quantity, .. } => Error::NonFinite {
                            quantity,
                            context: format!("epoch {epoch}, batch {batches}"),
                        },
                        other => other,
                    },
                )?;
            for (ng, g) in neg_grad.values.iter_mut().zip(&grad.values) {
                *ng = -g;
            }
            adam_step(&mut params, &neg_grad, &mut adam, &adam_cfg);
            epoch_elbo += value;
            batches += 1;
        }
        history.elbo.push(epoch_elbo / batches as f64);

        if model.spec.kind.is_horseshoe() {
            model.set_params(&params)?;
            let (b0, bg) = (model.spec.b0, model.spec.bg);
            if let LayerQ::Horseshoe(l) = &mut model.layers[0] {
                update_auxiliaries(l, b0, bg);
                history.aux_updates.push(AuxUpdateRecord {
                    epoch,
                    mean_lambda_rate: l.lambda_q.iter().map(|q| q.rate).sum::<f64>()
                        / l.lambda_q.len() as f64,
                    theta_rate: l.theta_q.rate,
                });
            }
        }
    }

    model.set_params(&params)?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_model, ModelKind, ModelSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spec(kind: ModelKind, task: Task, d: usize, h: usize) -> ModelSpec {
        ModelSpec { kind, task, n_features: d, n_hidden: h, b0: 1.0, bg: 1.0, sigma_prior: 1.0 }
    }

    #[test]
    fn log_likelihood_hand_cases() {
        // Classification: p = 0.5 → ln 0.5 per point; p ≈ 1 with y = 1 → ≈ 0.
        let mut m =
            init_model(spec(ModelKind::LinearGaussian, Task::Classification, 1, 0), 0).unwrap();
        if let LayerQ::Gaussian(l) = &mut m.layers[0] {
            l.weight_mu.fill(0.0);
            l.bias_mu.fill(0.0);
        }
        let w = m.realize(&ModelNoise::zeros(&m));
        let x = array![[0.0]];
        let ll = log_likelihood(&m, &w, x.view(), array![1.0].view());
        assert_abs_diff_eq!(ll, 0.5_f64.ln(), epsilon = 1e-12);

        if let LayerQ::Gaussian(l) = &mut m.layers[0] {
            l.bias_mu.fill(50.0);
        }
        let w = m.realize(&ModelNoise::zeros(&m));
        let ll = log_likelihood(&m, &w, x.view(), array![1.0].view());
        assert!(ll.abs() < 1e-6, "clamped near-certain prediction, got {ll}");

        // Regression: y = f = 0, σ_obs = 1 → −0.5 ln(2π).
        let mut r =
            init_model(spec(ModelKind::LinearGaussian, Task::Regression, 1, 0), 0).unwrap();
        if let LayerQ::Gaussian(l) = &mut r.layers[0] {
            l.weight_mu.fill(0.0);
            l.bias_mu.fill(0.0);
        }
        r.obs_log_sigma = 0.0;
        let w = r.realize(&ModelNoise::zeros(&r));
        let ll = log_likelihood(&r, &w, x.view(), array![0.0].view());
        assert_abs_diff_eq!(ll, -0.5 * LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn kl_gaussian_layer_additivity() {
        use crate::distributions::special::softplus_inv;
        let rho_unit = softplus_inv(1.0);
        // q exactly the prior → 0.
        let l = GaussianLayerQ {
            weight_mu: Array2::zeros((2, 2)),
            weight_rho: Array2::from_elem((2, 2), rho_unit),
            bias_mu: Array1::zeros(2),
            bias_rho: Array1::from_elem(2, rho_unit),
        };
        assert_abs_diff_eq!(kl_gaussian_layer(&l, 1.0), 0.0, epsilon = 1e-12);

        // Single weight N(1,1) vs N(0,1) → 0.5.
        let l1 = GaussianLayerQ {
            weight_mu: array![[1.0]],
            weight_rho: array![[rho_unit]],
            bias_mu: Array1::zeros(1),
            bias_rho: Array1::from_elem(1, rho_unit),
        };
        assert_abs_diff_eq!(kl_gaussian_layer(&l1, 1.0), 0.5, epsilon = 1e-12);

        // 2×2 layer of N(1,1) entries, prior-matched bias → 4 × 0.5 = 2.
        let l2 = GaussianLayerQ {
            weight_mu: Array2::from_elem((2, 2), 1.0),
            weight_rho: Array2::from_elem((2, 2), rho_unit),
            bias_mu: Array1::zeros(2),
            bias_rho: Array1::from_elem(2, rho_unit),
        };
        assert_abs_diff_eq!(kl_gaussian_layer(&l2, 1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn horseshoe_beta_part_vanishes_at_prior() {
        use crate::distributions::special::softplus_inv;
        let m = init_model(spec(ModelKind::LinearHorseshoe, Task::Regression, 2, 0), 3).unwrap();
        let LayerQ::Horseshoe(mut l) = m.layers[0].clone() else { unreachable!() };
        l.beta_mu.fill(0.0);
        l.beta_rho.fill(softplus_inv(1.0));
        let with_prior_beta = kl_horseshoe_layer(&l, 1.0, 1.0);
        // Zeroing the β KL changes nothing once β already sits at its prior.
        let mut no_beta = l.clone();
        no_beta.beta_mu.fill(0.0);
        assert_abs_diff_eq!(kl_horseshoe_layer(&no_beta, 1.0, 1.0), with_prior_beta, epsilon = 1e-12);
        // Moving β off the prior strictly increases the KL.
        let mut off = l.clone();
        off.beta_mu.fill(1.0);
        assert!(kl_horseshoe_layer(&off, 1.0, 1.0) > with_prior_beta + 0.9);
    }

    #[test]
    fn tau_penalty_monotone_beyond_b0() {
        let m = init_model(spec(ModelKind::LinearHorseshoe, Task::Regression, 1, 0), 5).unwrap();
        let LayerQ::Horseshoe(mut l) = m.layers[0].clone() else { unreachable!() };
        update_auxiliaries(&mut l, 1.0, 1.0);
        // Once exp(tau_mu) ≫ b0 the τ cross-entropy penalty grows with tau_mu.
        let mut prev = f64::NEG_INFINITY;
        for k in 0..6 {
            l.tau_mu[0] = 1.0 + k as f64;
            let kl = kl_horseshoe_layer(&l, 1.0, 1.0);
            assert!(kl > prev, "KL must increase, got {kl} after {prev}");
            prev = kl;
        }
    }

    #[test]
    fn aux_update_matches_formula_and_is_idempotent() {
        let m = init_model(spec(ModelKind::LinearHorseshoe, Task::Regression, 2, 0), 7).unwrap();
        let LayerQ::Horseshoe(mut l) = m.layers[0].clone() else { unreachable!() };
        use crate::distributions::special::softplus_inv;
        l.tau_mu.fill(0.0);
        l.tau_rho.fill(softplus_inv(1e-8));
        update_auxiliaries(&mut l, 1.0, 1.0);
        // tau_mu = 0, tau_sigma → 0, b0 = 1 → q(λ) = InvΓ(1, 2).
        assert_abs_diff_eq!(l.lambda_q[0].shape, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.lambda_q[0].rate, 2.0, epsilon = 1e-6);

        let once = l.clone();
        update_auxiliaries(&mut l, 1.0, 1.0);
        assert_eq!(once, l);
    }

    #[test]
    fn adam_basics() {
        let mut b = crate::gradients::ParamLayout::builder();
        b.push("x", 2);
        let layout = b.build();
        let mut params = ParamVector::from_values(layout.clone(), vec![1.0, -2.0]).unwrap();
        let zero = ParamVector::zeros(layout.clone());
        let mut state = AdamState::new(2);
        let cfg = AdamConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        adam_step(&mut params, &zero, &mut state, &cfg);
        assert_eq!(params.values, vec![1.0, -2.0]);
        assert_eq!(state.timestep(), 1);

        // First step from a fresh state moves by ≈ lr in the sign direction.
        let mut fresh = AdamState::new(2);
        let g = ParamVector::from_values(layout, vec![0.3, -7.0]).unwrap();
        adam_step(&mut params, &g, &mut fresh, &cfg);
        assert_abs_diff_eq!(params.values[0], 1.0 - 0.1, epsilon = 1e-3);
        assert_abs_diff_eq!(params.values[1], -2.0 + 0.1, epsilon = 1e-3);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut b = crate::gradients::ParamLayout::builder();
        b.push("x", 1);
        let layout = b.build();
        let mut params = ParamVector::from_values(layout.clone(), vec![0.0]).unwrap();
        let mut state = AdamState::new(1);
        let cfg = AdamConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut g = ParamVector::zeros(layout);
        for _ in 0..1000 {
            g.values[0] = 2.0 * (params.values[0] - 3.0);
            adam_step(&mut params, &g, &mut state, &cfg);
        }
        assert!(
            (params.values[0] - 3.0).abs() < 1e-6,
            "Adam ended at {}",
            params.values[0]
        );
    }

    #[test]
    fn elbo_minibatch_scaling() {
        let m = init_model(spec(ModelKind::LinearGaussian, Task::Regression, 2, 0), 1).unwrap();
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -0.5]];
        let y = array![0.3, -0.2, 0.1, 0.0];
        let noises = vec![ModelNoise::zeros(&m)];

        // Full batch → scale factor 1: ELBO = loglik − KL exactly.
        let full = elbo_with_frozen_noise(&m, x.view(), y.view(), 4, &noises).unwrap();
        let w = m.realize(&noises[0]);
        let expected =
            log_likelihood(&m, &w, x.view(), y.view()) - total_kl(&m).iter().sum::<f64>();
        assert_abs_diff_eq!(full, expected, epsilon = 1e-12);

        // Two batches differ only through the scaled likelihood: KL cancels.
        let xa = array![[1.0, 0.0], [0.0, 1.0]];
        let ya = array![0.3, -0.2];
        let xb = array![[1.0, 1.0], [0.5, -0.5]];
        let yb = array![0.1, 0.0];
        let ea = elbo_with_frozen_noise(&m, xa.view(), ya.view(), 4, &noises).unwrap();
        let eb = elbo_with_frozen_noise(&m, xb.view(), yb.view(), 4, &noises).unwrap();
        let wa = log_likelihood(&m, &w, xa.view(), ya.view());
        let wb = log_likelihood(&m, &w, xb.view(), yb.view());
        assert_abs_diff_eq!(ea - eb, 2.0 * (wa - wb), epsilon = 1e-10);
    }

    #[test]
    fn zero_epoch_train_is_identity() {
        let m = init_model(spec(ModelKind::HorseshoeBnn, Task::Regression, 3, 4), 2).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]];
        let y = array![1.0, -1.0];
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (out, hist) = train(&m, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(m, out);
        assert!(hist.elbo.is_empty());
    }

    #[test]
    fn train_is_deterministic() {
        let m = init_model(spec(ModelKind::HorseshoeBnn, Task::Regression, 2, 3), 4).unwrap();
        let x = array![[0.1, 0.2], [0.4, 0.5], [-0.3, 0.8], [1.0, -1.0], [0.0, 0.2]];
        let y = array![1.0, -1.0, 0.5, 0.2, -0.7];
        let cfg = TrainConfig { epochs: 5, batch_size: 2, ..TrainConfig::default() };
        let (a, ha) = train(&m, x.view(), y.view(), &cfg).unwrap();
        let (b, hb) = train(&m, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.elbo, hb.elbo);
        assert_eq!(ha.elbo.len(), 5);
    }
}
