//! Conditional distribution generator: a network mapping auxiliary noise plus
//! covariates to a synthetic survival time, and the survival curves its sample
//! clouds induce. Exact empirical curves serve evaluation; a sigmoid-relaxed
//! curve supplies the gradient path, since the exact indicator has zero
//! derivative almost everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{sigmoid, Mlp, OutputActivation, ParamGrads};
use crate::oracle::CurveSource;
use crate::survival::SurvivalCurve;

/// A generator network together with its auxiliary-noise dimension. Auxiliary
/// coordinates are drawn iid Uniform[-1, 1] and occupy the first `p_u` input
/// slots; covariates fill the rest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorModel {
    p_u: usize,
    net: Mlp,
}

impl GeneratorModel {
    pub fn new(net: Mlp, p_u: usize) -> Result<Self> {
        if net.output_activation() != OutputActivation::Exp {
            return Err(Error::InvalidArchitecture(
                "generator output activation must be exp".into(),
            ));
        }
        if p_u == 0 || net.input_dim() <= p_u {
            return Err(Error::InvalidArchitecture(format!(
                "input dim {} must exceed auxiliary dim {}",
                net.input_dim(),
                p_u
            )));
        }
        Ok(GeneratorModel { p_u, net })
    }

    pub fn p_u(&self) -> usize {
        self.p_u
    }

    pub fn covariate_dim(&self) -> usize {
        self.net.input_dim() - self.p_u
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Mutable access to the underlying network. Every `Mlp` mutator
    /// preserves shape validity, and the output activation cannot change, so
    /// the generator invariants survive any edit made through this.
    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.p_u == 0 || self.net.input_dim() <= self.p_u {
            return Err(Error::InvalidArchitecture(format!(
                "input dim {} must exceed auxiliary dim {}",
                self.net.input_dim(),
                self.p_u
            )));
        }
        if self.net.output_activation() != OutputActivation::Exp {
            return Err(Error::InvalidArchitecture(
                "generator output activation must be exp".into(),
            ));
        }
        Ok(())
    }
}

/// K generated times for one covariate vector, with the auxiliary draws that
/// produced them.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub times: Vec<f64>,
    pub aux_draws: Vec<Vec<f64>>,
}

/// Draws K auxiliary vectors and returns the generated times, deterministic in
/// `seed`.
pub fn sample_times(model: &GeneratorModel, x: &[f64], k: usize, seed: u64) -> Result<SampleBatch> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aux = draw_aux(&mut rng, k, model.p_u);
    let times = generate_times(model, x, &aux)?;
    Ok(SampleBatch {
        times,
        aux_draws: aux,
    })
}

pub(crate) fn draw_aux(rng: &mut ChaCha8Rng, k: usize, p_u: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..p_u).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn build_inputs(model: &GeneratorModel, x: &[f64], aux: &[Vec<f64>]) -> Result<Vec<f64>> {
    if x.len() != model.covariate_dim() {
        return Err(Error::ShapeMismatch(format!(
            "covariate vector has length {}, generator expects {}",
            x.len(),
            model.covariate_dim()
        )));
    }
    let d = model.p_u + x.len();
    let mut inputs = Vec::with_capacity(aux.len() * d);
    for u in aux {
        if u.len() != model.p_u {
            return Err(Error::ShapeMismatch(format!(
                "auxiliary draw has length {}, expected {}",
                u.len(),
                model.p_u
            )));
        }
        inputs.extend_from_slice(u);
        inputs.extend_from_slice(x);
    }
    Ok(inputs)
}

/// Generated times for explicit auxiliary draws.
pub(crate) fn generate_times(
    model: &GeneratorModel,
    x: &[f64],
    aux: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let inputs = build_inputs(model, x, aux)?;
    let (times, _) = model.net.forward_batch(&inputs, aux.len())?;
    for &t in &times {
        if !t.is_finite() {
            return Err(Error::TrainingDiverged(
                "generator produced a non-finite time".into(),
            ));
        }
    }
    Ok(times)
}

/// Exact fraction of generated times strictly greater than `t`.
pub fn empirical_survival(batch: &SampleBatch, t: f64) -> f64 {
    let above = batch.times.iter().filter(|&&v| v > t).count();
    above as f64 / batch.times.len() as f64
}

/// Differentiable relaxation of the empirical curve at `t`:
/// `(1/K) sum_k sigmoid((T_k - t)/temperature)`, together with its exact
/// reverse-mode gradient with respect to the generator parameters.
pub fn smoothed_survival(
    model: &GeneratorModel,
    x: &[f64],
    aux_batch: &[Vec<f64>],
    t: f64,
    temperature: f64,
) -> Result<(f64, ParamGrads)> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {}",
            temperature
        )));
    }
    let k = aux_batch.len();
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one auxiliary draw".into()));
    }
    let inputs = build_inputs(model, x, aux_batch)?;
    let (times, cache) = model.net.forward_batch(&inputs, k)?;
    let kf = k as f64;
    let mut value = 0.0;
    let mut upstream = vec![0.0; k];
    for (i, &time) in times.iter().enumerate() {
        let z = (time - t) / temperature;
        let s = sigmoid(z);
        value += s / kf;
        upstream[i] = s * (1.0 - s) / (temperature * kf);
    }
    let mut grads = ParamGrads::zeros_like(&model.net);
    model.net.backward_batch(&cache, &upstream, &mut grads)?;
    Ok((value, grads))
}

/// Risk score for concordance ranking: the negative mean generated time.
/// Monotone in the conditional hazard, so higher scores mean earlier failure.
pub fn risk_score(model: &GeneratorModel, x: &[f64], k: usize, seed: u64) -> Result<f64> {
    let batch = sample_times(model, x, k, seed)?;
    Ok(-batch.times.iter().sum::<f64>() / batch.times.len() as f64)
}

/// Empirical survival curve of a fresh sample cloud, evaluated on a strictly
/// increasing grid.
pub fn survival_curve_on_grid(
    model: &GeneratorModel,
    x: &[f64],
    grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<SurvivalCurve> {
    let batch = sample_times(model, x, k, seed)?;
    let probs: Vec<f64> = grid.iter().map(|&t| empirical_survival(&batch, t)).collect();
    SurvivalCurve::new(grid.to_vec(), probs)
}

/// A generator bound to a sampling budget and seed so it can act as a
/// conditional survival surface.
pub struct SampledGenerator<'a> {
    pub model: &'a GeneratorModel,
    pub k: usize,
    pub seed: u64,
}

impl CurveSource for SampledGenerator<'_> {
    fn survival(&self, t: f64, x: &[f64]) -> f64 {
        match sample_times(self.model, x, self.k, self.seed) {
            Ok(batch) => empirical_survival(&batch, t),
            Err(_) => f64::NAN,
        }
    }
}
