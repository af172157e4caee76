//! The four model architectures and their variational posteriors.
//!
//! `LinearGaussian` and `GaussianBNN` place factorized Gaussians on all
//! weights. `LinearHorseshoe` and `HorseshoeBNN` replace the first layer with
//! a tied horseshoe posterior: per-weight Gaussians on the non-centered
//! coefficients β, log-normal posteriors on the per-feature scales τ_j and the
//! layer scale v, and inverse-Gamma posteriors on the auxiliaries λ_j and ϑ.
//! A realized first-layer weight is W_ij = v·τ_j·β_ij, so sending τ_j to zero
//! switches feature j off across all hidden units.
//!
//! All σ parameters of Gaussian/log-normal factors are stored as unconstrained
//! ρ with σ = softplus(ρ).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::special::{sigmoid, softplus, softplus_inv};
use crate::distributions::{lognormal_moment, GaussianParams, InvGammaParams};
use crate::error::{Error, Result};
use crate::gradients::{ParamLayout, ParamVector};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    LinearGaussian,
    #[serde(rename = "GaussianBNN")]
    GaussianBnn,
    LinearHorseshoe,
    #[serde(rename = "HorseshoeBNN")]
    HorseshoeBnn,
}

impl ModelKind {
    pub fn is_horseshoe(self) -> bool {
        matches!(self, ModelKind::LinearHorseshoe | ModelKind::HorseshoeBnn)
    }

    pub fn is_bnn(self) -> bool {
        matches!(self, ModelKind::GaussianBnn | ModelKind::HorseshoeBnn)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearGaussian => "LinearGaussian",
            ModelKind::GaussianBnn => "GaussianBNN",
            ModelKind::LinearHorseshoe => "LinearHorseshoe",
            ModelKind::HorseshoeBnn => "HorseshoeBNN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Architecture and prior hyperparameters of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub task: Task,
    pub n_features: usize,
    /// Hidden units; 0 for the linear kinds.
    #[serde(default)]
    pub n_hidden: usize,
    /// Local shrinkage scale b0 of the per-feature half-Cauchy.
    #[serde(default = "default_unit")]
    pub b0: f64,
    /// Global shrinkage scale b_g of the layer-wide half-Cauchy.
    #[serde(default = "default_unit")]
    pub bg: f64,
    /// Std of the Gaussian prior on upper-layer weights and all biases.
    #[serde(default = "default_unit")]
    pub sigma_prior: f64,
}

fn default_unit() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::domain("model needs at least one feature"));
        }
        if self.kind.is_bnn() != (self.n_hidden > 0) {
            return Err(Error::domain(format!(
                "{} requires n_hidden {} 0",
                self.kind.name(),
                if self.kind.is_bnn() { ">" } else { "=" }
            )));
        }
        if !(self.b0 > 0.0 && self.bg > 0.0 && self.sigma_prior > 0.0) {
            return Err(Error::domain(
                "b0, bg, and sigma_prior must all be positive",
            ));
        }
        Ok(())
    }
}

/// Factorized Gaussian posterior over one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLayerQ {
    pub weight_mu: Array2<f64>,
    pub weight_rho: Array2<f64>,
    pub bias_mu: Array1<f64>,
    pub bias_rho: Array1<f64>,
}

/// Tied horseshoe posterior over the first layer.
///
/// `lambda_q` and `theta_q` are the inverse-Gamma posteriors of the
/// auxiliaries; they are updated in closed form rather than by gradient and
/// therefore do not appear in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeLayerQ {
    pub beta_mu: Array2<f64>,
    pub beta_rho: Array2<f64>,
    /// Mean of log τ_j, one per input feature.
    pub tau_mu: Array1<f64>,
    pub tau_rho: Array1<f64>,
    /// Mean of log v.
    pub v_mu: f64,
    pub v_rho: f64,
    pub lambda_q: Vec<InvGammaParams>,
    pub theta_q: InvGammaParams,
    pub bias_mu: Array1<f64>,
    pub bias_rho: Array1<f64>,
}

impl HorseshoeLayerQ {
    pub fn n_features(&self) -> usize {
        self.beta_mu.ncols()
    }

    pub fn tau_sigma(&self, j: usize) -> f64 {
        softplus(self.tau_rho[j])
    }

    pub fn v_sigma(&self) -> f64 {
        softplus(self.v_rho)
    }

    /// Posterior of log(v·τ_j); log-normal because both factors are.
    pub fn scale_product_params(&self, j: usize) -> GaussianParams {
        let var = self.v_sigma().powi(2) + self.tau_sigma(j).powi(2);
        GaussianParams { mu: self.v_mu + self.tau_mu[j], sigma: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerQ {
    Gaussian(GaussianLayerQ),
    Horseshoe(HorseshoeLayerQ),
}

impl LayerQ {
    pub fn out_dim(&self) -> usize {
        match self {
            LayerQ::Gaussian(l) => l.weight_mu.nrows(),
            LayerQ::Horseshoe(l) => l.beta_mu.nrows(),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LayerQ::Gaussian(l) => l.weight_mu.ncols(),
            LayerQ::Horseshoe(l) => l.beta_mu.ncols(),
        }
    }
}

/// Full variational state of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalModel {
    pub spec: ModelSpec,
    pub layers: Vec<LayerQ>,
    /// log σ of the homoscedastic regression noise; unused for classification.
    pub obs_log_sigma: f64,
}

/// One concrete draw of all network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRealization {
    pub layers: Vec<RealizedLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizedLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Standard-normal draws for every reparameterized factor of one layer.
#[derive(Debug, Clone)]
pub struct LayerNoise {
    pub eps_weight: Array2<f64>,
    pub eps_bias: Array1<f64>,
    pub eps_tau: Option<Array1<f64>>,
    pub eps_v: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelNoise {
    pub layers: Vec<LayerNoise>,
}

impl ModelNoise {
    pub fn draw<R: Rng + ?Sized>(model: &VariationalModel, rng: &mut R) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|layer| {
                let (rows, cols) = (layer.out_dim(), layer.in_dim());
                let eps_weight =
                    Array2::from_shape_fn((rows, cols), |_| rng.sample(rand_distr::StandardNormal));
                let eps_bias =
                    Array1::from_shape_fn(rows, |_| rng.sample(rand_distr::StandardNormal));
                let (eps_tau, eps_v) = match layer {
                    LayerQ::Gaussian(_) => (None, None),
                    LayerQ::Horseshoe(_) => (
                        Some(Array1::from_shape_fn(cols, |_| {
                            rng.sample(rand_distr::StandardNormal)
                        })),
                        Some(rng.sample(rand_distr::StandardNormal)),
                    ),
                };
                LayerNoise { eps_weight, eps_bias, eps_tau, eps_v }
            })
            .collect();
        Self { layers }
    }

    /// All-zero noise; realizes every factor at its (log-)mean.
    pub fn zeros(model: &VariationalModel) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|layer| {
                let (rows, cols) = (layer.out_dim(), layer.in_dim());
                let (eps_tau, eps_v) = match layer {
                    LayerQ::Gaussian(_) => (None, None),
                    LayerQ::Horseshoe(_) => (Some(Array1::zeros(cols)), Some(0.0)),
                };
                LayerNoise {
                    eps_weight: Array2::zeros((rows, cols)),
                    eps_bias: Array1::zeros(rows),
                    eps_tau,
                    eps_v,
                }
            })
            .collect();
        Self { layers }
    }
}

/// Intermediate quantities of one realized horseshoe layer, kept for the
/// chain rule in the ELBO gradient.
#[derive(Debug, Clone)]
pub(crate) struct HorseshoeRealization {
    pub tau: Array1<f64>,
    pub v: f64,
}

pub(crate) fn realize_layer(
    layer: &LayerQ,
    noise: &LayerNoise,
) -> (RealizedLayer, Option<HorseshoeRealization>) {
    match layer {
        LayerQ::Gaussian(l) => {
            let weights =
                &l.weight_mu + &(l.weight_rho.mapv(softplus) * &noise.eps_weight);
            let bias = &l.bias_mu + &(l.bias_rho.mapv(softplus) * &noise.eps_bias);
            (RealizedLayer { weights, bias }, None)
        }
        LayerQ::Horseshoe(l) => {
            let beta = &l.beta_mu + &(l.beta_rho.mapv(softplus) * &noise.eps_weight);
            let eps_tau = noise.eps_tau.as_ref().expect("horseshoe noise carries eps_tau");
            let eps_v = noise.eps_v.expect("horseshoe noise carries eps_v");
            let tau = Array1::from_shape_fn(l.tau_mu.len(), |j| {
                (l.tau_mu[j] + softplus(l.tau_rho[j]) * eps_tau[j]).exp()
            });
            let v = (l.v_mu + softplus(l.v_rho) * eps_v).exp();
            let mut weights = beta.clone();
            for (j, mut col) in weights.columns_mut().into_iter().enumerate() {
                col.mapv_inplace(|b| v * tau[j] * b);
            }
            let bias = &l.bias_mu + &(l.bias_rho.mapv(softplus) * &noise.eps_bias);
            (RealizedLayer { weights, bias }, Some(HorseshoeRealization { tau, v }))
        }
    }
}

impl VariationalModel {
    /// Realizes every layer from explicit noise; deterministic given `noise`.
    pub fn realize(&self, noise: &ModelNoise) -> WeightRealization {
        let layers = self
            .layers
            .iter()
            .zip(&noise.layers)
            .map(|(layer, n)| realize_layer(layer, n).0)
            .collect();
        WeightRealization { layers }
    }

    /// Raw network output (pre-sigmoid for classification) for a batch.
    pub fn raw_output(&self, weights: &WeightRealization, x: ArrayView2<f64>) -> Array1<f64> {
        let first = &weights.layers[0];
        let mut a = x.dot(&first.weights.t()) + &first.bias;
        if self.spec.kind.is_bnn() {
            a.mapv_inplace(|z| z.max(0.0));
            let second = &weights.layers[1];
            a = a.dot(&second.weights.t()) + &second.bias;
        }
        a.column(0).to_owned()
    }
}

/// Draws a fresh weight realization from the variational posterior.
pub fn sample_weights<R: Rng + ?Sized>(
    model: &VariationalModel,
    rng: &mut R,
) -> WeightRealization {
    let noise = ModelNoise::draw(model, rng);
    model.realize(&noise)
}

/// Initializes the variational state: weight means at N(0, 1/√fan_in), all σ
/// near 0.05, mild initial shrinkage on τ and v, auxiliaries at their prior
/// parameters.
pub fn init_model(spec: ModelSpec, seed: u64) -> Result<VariationalModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho_w = softplus_inv(0.05);
    let rho_scale = softplus_inv(0.1);

    let shapes: Vec<(usize, usize)> = if spec.kind.is_bnn() {
        vec![(spec.n_hidden, spec.n_features), (1, spec.n_hidden)]
    } else {
        vec![(1, spec.n_features)]
    };

    let mut layers = Vec::with_capacity(shapes.len());
    for (idx, &(out, inp)) in shapes.iter().enumerate() {
        let std = 1.0 / (inp as f64).sqrt();
        let mu = Array2::from_shape_fn((out, inp), |_| {
            std * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let horseshoe_first = idx == 0 && spec.kind.is_horseshoe();
        if horseshoe_first {
            layers.push(LayerQ::Horseshoe(HorseshoeLayerQ {
                beta_mu: mu,
                beta_rho: Array2::from_elem((out, inp), rho_w),
                tau_mu: Array1::from_elem(inp, -2.0),
                tau_rho: Array1::from_elem(inp, rho_scale),
                v_mu: -2.0,
                v_rho: rho_scale,
                lambda_q: vec![
                    InvGammaParams { shape: 0.5, rate: 1.0 / (spec.b0 * spec.b0) };
                    inp
                ],
                theta_q: InvGammaParams { shape: 0.5, rate: 1.0 / (spec.bg * spec.bg) },
                bias_mu: Array1::zeros(out),
                bias_rho: Array1::from_elem(out, rho_w),
            }));
        } else {
            layers.push(LayerQ::Gaussian(GaussianLayerQ {
                weight_mu: mu,
                weight_rho: Array2::from_elem((out, inp), rho_w),
                bias_mu: Array1::zeros(out),
                bias_rho: Array1::from_elem(out, rho_w),
            }));
        }
    }

    Ok(VariationalModel { spec, layers, obs_log_sigma: 0.0 })
}

/// Task-level output for a single input: probability for classification, mean
/// for regression.
pub fn forward(model: &VariationalModel, weights: &WeightRealization, x: ArrayView1<f64>) -> Result<f64> {
    if x.len() != model.spec.n_features {
        return Err(Error::shape(format!(
            "input has {} features, model expects {}",
            x.len(),
            model.spec.n_features
        )));
    }
    let x2 = x.insert_axis(ndarray::Axis(0));
    let raw = model.raw_output(weights, x2);
    Ok(match model.spec.task {
        Task::Regression => raw[0],
        Task::Classification => sigmoid(raw[0]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

/// Monte-Carlo posterior predictive over `s` weight draws. Regression std
/// includes the learned observation noise: √(var + σ_obs²).
pub fn predict<R: Rng + ?Sized>(
    model: &VariationalModel,
    x: ArrayView1<f64>,
    s: usize,
    rng: &mut R,
) -> Result<Prediction> {
    assert!(s >= 1, "predict requires at least one sample");
    let mut outs = Vec::with_capacity(s);
    for _ in 0..s {
        let w = sample_weights(model, rng);
        outs.push(forward(model, &w, x)?);
    }
    let mean = outs.iter().sum::<f64>() / s as f64;
    let var = outs.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / s as f64;
    let std = match model.spec.task {
        Task::Regression => (var + (2.0 * model.obs_log_sigma).exp()).sqrt(),
        Task::Classification => var.sqrt(),
    };
    Ok(Prediction { mean, std })
}

/// Posterior predictive mean/std for every row of `x`, sharing `s` weight
/// draws across rows. Equivalent in distribution to calling [`predict`] per
/// row but with one forward pass per draw.
pub fn predict_batch<R: Rng + ?Sized>(
    model: &VariationalModel,
    x: ArrayView2<f64>,
    s: usize,
    rng: &mut R,
) -> Result<Vec<Prediction>> {
    assert!(s >= 1, "predict requires at least one sample");
    if x.ncols() != model.spec.n_features {
        return Err(Error::shape(format!(
            "input has {} features, model expects {}",
            x.ncols(),
            model.spec.n_features
        )));
    }
    let n = x.nrows();
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for draw in 0..s {
        let w = sample_weights(model, rng);
        let mut out = model.raw_output(&w, x);
        if model.spec.task == Task::Classification {
            out.mapv_inplace(sigmoid);
        }
        // Welford accumulation keeps a single pass over draws.
        for i in 0..n {
            let delta = out[i] - mean[i];
            mean[i] += delta / (draw + 1) as f64;
            m2[i] += delta * (out[i] - mean[i]);
        }
    }
    let obs_var = match model.spec.task {
        Task::Regression => (2.0 * model.obs_log_sigma).exp(),
        Task::Classification => 0.0,
    };
    Ok((0..n)
        .map(|i| Prediction { mean: mean[i], std: (m2[i] / s as f64 + obs_var).sqrt() })
        .collect())
}

// ---------------------------------------------------------------------------
// Flat parameter vector round trip
// ---------------------------------------------------------------------------

impl VariationalModel {
    /// Layout of the gradient-trained parameters. Auxiliary inverse-Gamma
    /// parameters are excluded: they are updated in closed form.
    pub fn layout(&self) -> std::sync::Arc<ParamLayout> {
        let mut b = ParamLayout::builder();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerQ::Gaussian(l) => {
                    b.push(format!("layer{i}.weight_mu"), l.weight_mu.len());
                    b.push(format!("layer{i}.weight_rho"), l.weight_rho.len());
                    b.push(format!("layer{i}.bias_mu"), l.bias_mu.len());
                    b.push(format!("layer{i}.bias_rho"), l.bias_rho.len());
                }
                LayerQ::Horseshoe(l) => {
                    b.push(format!("layer{i}.beta_mu"), l.beta_mu.len());
                    b.push(format!("layer{i}.beta_rho"), l.beta_rho.len());
                    b.push(format!("layer{i}.tau_mu"), l.tau_mu.len());
                    b.push(format!("layer{i}.tau_rho"), l.tau_rho.len());
                    b.push(format!("layer{i}.v_mu"), 1);
                    b.push(format!("layer{i}.v_rho"), 1);
                    b.push(format!("layer{i}.bias_mu"), l.bias_mu.len());
                    b.push(format!("layer{i}.bias_rho"), l.bias_rho.len());
                }
            }
        }
        if self.spec.task == Task::Regression {
            b.push("obs_log_sigma", 1);
        }
        b.build()
    }

    pub fn to_params(&self) -> ParamVector {
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.len());
        for layer in &self.layers {
            match layer {
                LayerQ::Gaussian(l) => {
                    values.extend(l.weight_mu.iter());
                    values.extend(l.weight_rho.iter());
                    values.extend(l.bias_mu.iter());
                    values.extend(l.bias_rho.iter());
                }
                LayerQ::Horseshoe(l) => {
                    values.extend(l.beta_mu.iter());
                    values.extend(l.beta_rho.iter());
                    values.extend(l.tau_mu.iter());
                    values.extend(l.tau_rho.iter());
                    values.push(l.v_mu);
                    values.push(l.v_rho);
                    values.extend(l.bias_mu.iter());
                    values.extend(l.bias_rho.iter());
                }
            }
        }
        if self.spec.task == Task::Regression {
            values.push(self.obs_log_sigma);
        }
        ParamVector::from_values(layout, values).expect("layout matches construction")
    }

    /// Writes a flat vector produced by [`Self::to_params`] back into the
    /// structured state. Auxiliary parameters are left untouched.
    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.layout().len() {
            return Err(Error::shape(format!(
                "parameter vector of length {} does not fit model with {} parameters",
                params.len(),
                self.layout().len()
            )));
        }
        let mut cursor = 0usize;
        fn take<'a>(values: &'a [f64], cursor: &mut usize, n: usize) -> &'a [f64] {
            let s = &values[*cursor..*cursor + n];
            *cursor += n;
            s
        }
        for layer in &mut self.layers {
            match layer {
                LayerQ::Gaussian(l) => {
                    let n = l.weight_mu.len();
                    fill2(&mut l.weight_mu, take(&params.values, &mut cursor, n));
                    fill2(&mut l.weight_rho, take(&params.values, &mut cursor, n));
                    let nb = l.bias_mu.len();
                    fill1(&mut l.bias_mu, take(&params.values, &mut cursor, nb));
                    fill1(&mut l.bias_rho, take(&params.values, &mut cursor, nb));
                }
                LayerQ::Horseshoe(l) => {
                    let n = l.beta_mu.len();
                    fill2(&mut l.beta_mu, take(&params.values, &mut cursor, n));
                    fill2(&mut l.beta_rho, take(&params.values, &mut cursor, n));
                    let nt = l.tau_mu.len();
                    fill1(&mut l.tau_mu, take(&params.values, &mut cursor, nt));
                    fill1(&mut l.tau_rho, take(&params.values, &mut cursor, nt));
                    l.v_mu = take(&params.values, &mut cursor, 1)[0];
                    l.v_rho = take(&params.values, &mut cursor, 1)[0];
                    let nb = l.bias_mu.len();
                    fill1(&mut l.bias_mu, take(&params.values, &mut cursor, nb));
                    fill1(&mut l.bias_rho, take(&params.values, &mut cursor, nb));
                }
            }
        }
        if self.spec.task == Task::Regression {
            self.obs_log_sigma = take(&params.values, &mut cursor, 1)[0];
        }
        debug_assert_eq!(cursor, params.len());
        Ok(())
    }
}

fn fill2(dst: &mut Array2<f64>, src: &[f64]) {
    dst.as_slice_mut()
        .expect("standard layout")
        .copy_from_slice(src);
}

fn fill1(dst: &mut Array1<f64>, src: &[f64]) {
    dst.as_slice_mut()
        .expect("standard layout")
        .copy_from_slice(src);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    spec: ModelSpec,
    layers: Vec<LayerQ>,
    obs_log_sigma: f64,
}

pub fn save_checkpoint(model: &VariationalModel, path: &std::path::Path) -> Result<()> {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        spec: model.spec,
        layers: model.layers.clone(),
        obs_log_sigma: model.obs_log_sigma,
    };
    let json = serde_json::to_string(&ckpt)
        .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<VariationalModel> {
    let raw = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint =
        serde_json::from_str(&raw).map_err(|e| Error::Checkpoint(format!("parse: {e}")))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {})",
            ckpt.version, CHECKPOINT_VERSION
        )));
    }
    Ok(VariationalModel {
        spec: ckpt.spec,
        layers: ckpt.layers,
        obs_log_sigma: ckpt.obs_log_sigma,
    })
}

/// Posterior mean of every first-layer weight. For a horseshoe layer this is
/// E[v]·E[τ_j]·μ_β with the log-normal means; for a Gaussian layer it is μ.
pub fn first_layer_posterior_mean(model: &VariationalModel) -> Array2<f64> {
    match &model.layers[0] {
        LayerQ::Gaussian(l) => l.weight_mu.clone(),
        LayerQ::Horseshoe(l) => {
            let e_v = lognormal_moment(
                GaussianParams { mu: l.v_mu, sigma: l.v_sigma() },
                1.0,
            );
            let mut means = l.beta_mu.clone();
            for (j, mut col) in means.columns_mut().into_iter().enumerate() {
                let e_tau = lognormal_moment(
                    GaussianParams { mu: l.tau_mu[j], sigma: l.tau_sigma(j) },
                    1.0,
                );
                col.mapv_inplace(|m| e_v * e_tau * m);
            }
            means
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spec(kind: ModelKind, task: Task, d: usize, h: usize) -> ModelSpec {
        ModelSpec {
            kind,
            task,
            n_features: d,
            n_hidden: h,
            b0: 1.0,
            bg: 1.0,
            sigma_prior: 1.0,
        }
    }

    #[test]
    fn init_shapes_match_architecture() {
        let m = init_model(spec(ModelKind::HorseshoeBnn, Task::Classification, 17, 50), 0)
            .unwrap();
        match &m.layers[0] {
            LayerQ::Horseshoe(l) => {
                assert_eq!(l.beta_mu.dim(), (50, 17));
                assert_eq!(l.tau_mu.len(), 17);
                assert_eq!(l.lambda_q.len(), 17);
            }
            _ => panic!("first layer must be horseshoe"),
        }
        assert_eq!(m.layers.len(), 2);

        let lin = init_model(spec(ModelKind::LinearGaussian, Task::Regression, 6, 0), 0).unwrap();
        assert_eq!(lin.layers.len(), 1);
        match &lin.layers[0] {
            LayerQ::Gaussian(l) => assert_eq!(l.weight_mu.dim(), (1, 6)),
            _ => panic!("linear Gaussian layer expected"),
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let s = spec(ModelKind::HorseshoeBnn, Task::Regression, 5, 4);
        assert_eq!(init_model(s, 42).unwrap(), init_model(s, 42).unwrap());
        assert_ne!(init_model(s, 42).unwrap(), init_model(s, 43).unwrap());
    }

    #[test]
    fn init_rejects_inconsistent_spec() {
        assert!(init_model(spec(ModelKind::HorseshoeBnn, Task::Regression, 5, 0), 0).is_err());
        assert!(init_model(spec(ModelKind::LinearGaussian, Task::Regression, 5, 3), 0).is_err());
    }

    #[test]
    fn zero_noise_realization_uses_means() {
        let m = init_model(spec(ModelKind::LinearHorseshoe, Task::Regression, 3, 0), 1).unwrap();
        let w = m.realize(&ModelNoise::zeros(&m));
        match &m.layers[0] {
            LayerQ::Horseshoe(l) => {
                for j in 0..3 {
                    let expected = l.v_mu.exp() * l.tau_mu[j].exp() * l.beta_mu[[0, j]];
                    assert_abs_diff_eq!(w.layers[0].weights[[0, j]], expected, epsilon = 1e-12);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn extreme_shrinkage_switches_feature_off() {
        let mut m =
            init_model(spec(ModelKind::LinearHorseshoe, Task::Regression, 3, 0), 1).unwrap();
        if let LayerQ::Horseshoe(l) = &mut m.layers[0] {
            // exp underflows to exactly zero below roughly −745.
            l.tau_mu[1] = -800.0;
        }
        let w = sample_weights(&m, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(w.layers[0].weights[[0, 1]], 0.0);
        assert!(w.layers[0].weights[[0, 0]].abs() > 0.0);
    }

    #[test]
    fn sampled_weight_mean_matches_lognormal_moments() {
        let m = init_model(spec(ModelKind::LinearHorseshoe, Task::Regression, 2, 0), 3).unwrap();
        let (e_v, e_tau0, beta00) = match &m.layers[0] {
            LayerQ::Horseshoe(l) => (
                lognormal_moment(GaussianParams { mu: l.v_mu, sigma: l.v_sigma() }, 1.0),
                lognormal_moment(
                    GaussianParams { mu: l.tau_mu[0], sigma: l.tau_sigma(0) },
                    1.0,
                ),
                l.beta_mu[[0, 0]],
            ),
            _ => unreachable!(),
        };
        let expected = e_v * e_tau0 * beta00;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_weights(&m, &mut rng).layers[0].weights[[0, 0]])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "MC mean {mean} vs analytic {expected} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn forward_hand_computed_cases() {
        // Linear regression: w = [1, 2], b = 0, x = [3, 4] → 11.
        let mut m = init_model(spec(ModelKind::LinearGaussian, Task::Regression, 2, 0), 0).unwrap();
        if let LayerQ::Gaussian(l) = &mut m.layers[0] {
            l.weight_mu = array![[1.0, 2.0]];
            l.bias_mu = array![0.0];
        }
        let w = m.realize(&ModelNoise::zeros(&m));
        assert_abs_diff_eq!(
            forward(&m, &w, array![3.0, 4.0].view()).unwrap(),
            11.0,
            epsilon = 1e-12
        );

        // All-zero weights, classification → sigmoid(0) = 0.5.
        let mut c =
            init_model(spec(ModelKind::LinearGaussian, Task::Classification, 2, 0), 0).unwrap();
        if let LayerQ::Gaussian(l) = &mut c.layers[0] {
            l.weight_mu.fill(0.0);
            l.bias_mu.fill(0.0);
        }
        let w = c.realize(&ModelNoise::zeros(&c));
        assert_abs_diff_eq!(
            forward(&c, &w, array![1.0, -1.0].view()).unwrap(),
            0.5,
            epsilon = 1e-12
        );

        // One hidden unit: w1 = [1], b1 = −1, w2 = [1], b2 = 0, x = [2] → ReLU(1) = 1.
        let mut bnn = init_model(spec(ModelKind::GaussianBnn, Task::Regression, 1, 1), 0).unwrap();
        if let LayerQ::Gaussian(l) = &mut bnn.layers[0] {
            l.weight_mu = array![[1.0]];
            l.bias_mu = array![-1.0];
        }
        if let LayerQ::Gaussian(l) = &mut bnn.layers[1] {
            l.weight_mu = array![[1.0]];
            l.bias_mu = array![0.0];
        }
        let w = bnn.realize(&ModelNoise::zeros(&bnn));
        assert_abs_diff_eq!(
            forward(&bnn, &w, array![2.0].view()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(forward(&bnn, &w, array![2.0, 1.0].view()).is_err());
    }

    fn squash_sigmas(m: &mut VariationalModel) {
        let tiny = softplus_inv(1e-9);
        for layer in &mut m.layers {
            match layer {
                LayerQ::Gaussian(l) => {
                    l.weight_rho.fill(tiny);
                    l.bias_rho.fill(tiny);
                }
                LayerQ::Horseshoe(l) => {
                    l.beta_rho.fill(tiny);
                    l.tau_rho.fill(tiny);
                    l.v_rho = tiny;
                    l.bias_rho.fill(tiny);
                }
            }
        }
    }

    #[test]
    fn predict_degenerate_posterior() {
        let mut m = init_model(spec(ModelKind::GaussianBnn, Task::Regression, 2, 3), 5).unwrap();
        squash_sigmas(&mut m);
        m.obs_log_sigma = 0.3_f64.ln();
        let x = array![0.7, -1.2];
        let w = m.realize(&ModelNoise::zeros(&m));
        let deterministic = forward(&m, &w, x.view()).unwrap();
        let p = predict(&m, x.view(), 50, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_abs_diff_eq!(p.mean, deterministic, epsilon = 1e-6);
        assert_abs_diff_eq!(p.std, 0.3, epsilon = 1e-6);

        // Classification with zero output weights: probability pinned at 0.5.
        let mut c =
            init_model(spec(ModelKind::GaussianBnn, Task::Classification, 2, 3), 5).unwrap();
        squash_sigmas(&mut c);
        if let LayerQ::Gaussian(l) = &mut c.layers[1] {
            l.weight_mu.fill(0.0);
            l.bias_mu.fill(0.0);
        }
        let p = predict(&c, x.view(), 100, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_abs_diff_eq!(p.mean, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p.std, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn predict_batch_matches_predict_on_degenerate_posterior() {
        let mut m = init_model(spec(ModelKind::GaussianBnn, Task::Regression, 2, 3), 5).unwrap();
        squash_sigmas(&mut m);
        m.obs_log_sigma = 0.25_f64.ln();
        let x = array![[0.7, -1.2], [0.1, 0.4]];
        let preds = predict_batch(&m, x.view(), 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (i, p) in preds.iter().enumerate() {
            let single =
                predict(&m, x.row(i), 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_abs_diff_eq!(p.mean, single.mean, epsilon = 1e-6);
            assert_abs_diff_eq!(p.std, 0.25, epsilon = 1e-6);
        }
    }

    #[test]
    fn classification_outputs_stay_in_unit_interval() {
        let m =
            init_model(spec(ModelKind::HorseshoeBnn, Task::Classification, 4, 6), 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = array![10.0, -3.0, 0.2, 5.5];
        for _ in 0..200 {
            let w = sample_weights(&m, &mut rng);
            let p = forward(&m, &w, x.view()).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn predict_invariant_under_hidden_permutation() {
        let m = init_model(spec(ModelKind::GaussianBnn, Task::Regression, 3, 4), 21).unwrap();
        let mut permuted = m.clone();
        let perm = [2usize, 0, 3, 1];
        {
            let (first, second) = permuted.layers.split_at_mut(1);
            let (LayerQ::Gaussian(l1), LayerQ::Gaussian(l2)) = (&mut first[0], &mut second[0])
            else {
                unreachable!()
            };
            let orig = match &m.layers[0] {
                LayerQ::Gaussian(l) => l.clone(),
                _ => unreachable!(),
            };
            let orig2 = match &m.layers[1] {
                LayerQ::Gaussian(l) => l.clone(),
                _ => unreachable!(),
            };
            for (new_row, &old_row) in perm.iter().enumerate() {
                for c in 0..3 {
                    l1.weight_mu[[new_row, c]] = orig.weight_mu[[old_row, c]];
                    l1.weight_rho[[new_row, c]] = orig.weight_rho[[old_row, c]];
                }
                l1.bias_mu[new_row] = orig.bias_mu[old_row];
                l1.bias_rho[new_row] = orig.bias_rho[old_row];
                l2.weight_mu[[0, new_row]] = orig2.weight_mu[[0, old_row]];
                l2.weight_rho[[0, new_row]] = orig2.weight_rho[[0, old_row]];
            }
        }
        let x = array![0.4, -0.8, 1.5];
        let s = 20_000;
        let a = predict(&m, x.view(), s, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = predict(&permuted, x.view(), s, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        // Distribution-wise equality: means agree within Monte-Carlo error.
        let se = (a.std.powi(2) + b.std.powi(2)).sqrt() / (s as f64).sqrt();
        assert!(
            (a.mean - b.mean).abs() < 4.0 * se,
            "means {} vs {} (4se = {})",
            a.mean,
            b.mean,
            4.0 * se
        );
    }

    #[test]
    fn param_vector_round_trip() {
        let m = init_model(spec(ModelKind::HorseshoeBnn, Task::Regression, 4, 3), 13).unwrap();
        let params = m.to_params();
        let mut other =
            init_model(spec(ModelKind::HorseshoeBnn, Task::Regression, 4, 3), 99).unwrap();
        other.set_params(&params).unwrap();
        // Gradient-trained parameters now agree; auxiliaries were untouched
        // and identical by construction.
        assert_eq!(m, other);
        let expected_len = (3 * 4) * 2 + 4 * 2 + 2 + 3 * 2 + (3 * 2 + 1 * 2) + 1;
        assert_eq!(params.len(), expected_len);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = init_model(spec(ModelKind::HorseshoeBnn, Task::Classification, 5, 4), 77).unwrap();
        save_checkpoint(&m, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(m, loaded);

        // Version mismatch is rejected.
        let mut raw: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        raw["version"] = serde_json::json!(999);
        std::fs::write(&path, serde_json::to_string(&raw).unwrap()).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
