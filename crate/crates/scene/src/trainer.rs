//! The alternating min-max training loop, weight-path variable importance,
//! and in-training variable selection.
//!
//! Each iteration draws a mini-batch and a fresh set of evaluation times,
//! takes one descent step on the generator under the frozen-right-term
//! gradient, then one ascent step on the weight network against the updated
//! generator. When selection is active, covariate columns whose importance
//! falls at or below the auxiliary baseline are zeroed in the generator's
//! first layer and stay zero: their gradients are masked and their optimizer
//! moments cleared, so no later step can resurrect them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorModel;
use crate::loss::{omega_eval, sample_without_replacement, zeta_eval};
use crate::nn::{Activation, Mlp, OptimizerState, OutputActivation, StepMode};
use crate::survival::Dataset;

/// Which first-order method drives a network's updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    Adam,
    SgdMomentum,
}

/// Optimizer settings for one network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub momentum: f64,
}

impl OptimizerSpec {
    pub fn adam(learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        OptimizerSpec {
            kind: OptKind::Adam,
            learning_rate,
            beta1,
            beta2,
            momentum: 0.0,
        }
    }

    pub fn sgd_momentum(learning_rate: f64, momentum: f64) -> Self {
        OptimizerSpec {
            kind: OptKind::SgdMomentum,
            learning_rate,
            beta1: 0.0,
            beta2: 0.0,
            momentum,
        }
    }

    fn build(&self, mlp: &Mlp) -> OptimizerState {
        match self.kind {
            OptKind::Adam => OptimizerState::adam(self.learning_rate, self.beta1, self.beta2, mlp),
            OptKind::SgdMomentum => {
                OptimizerState::sgd_momentum(self.learning_rate, self.momentum, mlp)
            }
        }
    }
}

/// Every knob of a training run. `gen_hidden` and `phi_hidden` list hidden
/// layer widths only; input dims come from the data and `p_u`, the output is
/// always a single unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gen_hidden: Vec<usize>,
    pub phi_hidden: Vec<usize>,
    pub epochs: usize,
    /// Epochs of burn-in before variable selection activates.
    pub vs_epochs: usize,
    pub batch_size: usize,
    /// Evaluation times drawn per iteration; `None` means one per batch record.
    pub time_points: Option<usize>,
    pub k: usize,
    pub p_u: usize,
    pub temperature: f64,
    pub gen_opt: OptimizerSpec,
    pub phi_opt: OptimizerSpec,
    pub variable_selection: bool,
    /// Start selection early once mean covariate importance exceeds the
    /// auxiliary baseline, checked at epoch boundaries.
    pub vs_auto_trigger: bool,
    pub seed: u64,
    /// Worker threads for the per-record work inside one iteration. Results
    /// are identical for every value.
    #[serde(skip, default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

impl TrainConfig {
    /// Low-dimensional defaults: wide networks, Adam(0, 0.9) at 2e-4 on the
    /// generator, SGD momentum 0.9 at 1e-3 on the weight network.
    pub fn low_dim() -> Self {
        TrainConfig {
            gen_hidden: vec![1000, 1000, 1000],
            phi_hidden: vec![1000, 1000],
            epochs: 50,
            vs_epochs: 0,
            batch_size: 5,
            time_points: None,
            k: 400,
            p_u: 5,
            temperature: 0.1,
            gen_opt: OptimizerSpec::adam(2e-4, 0.0, 0.9),
            phi_opt: OptimizerSpec::sgd_momentum(1e-3, 0.9),
            variable_selection: false,
            vs_auto_trigger: false,
            seed: 0,
            jobs: 1,
        }
    }

    /// High-dimensional defaults: narrow generator, Adam on both networks,
    /// selection on with a 120-epoch burn-in cap plus the importance trigger,
    /// then 20 selection epochs.
    pub fn high_dim() -> Self {
        TrainConfig {
            gen_hidden: vec![100, 100, 100],
            phi_hidden: vec![1000, 1000],
            epochs: 140,
            vs_epochs: 120,
            batch_size: 5,
            time_points: None,
            k: 400,
            p_u: 5,
            temperature: 0.1,
            gen_opt: OptimizerSpec::adam(2e-4, 0.0, 0.9),
            phi_opt: OptimizerSpec::adam(1e-4, 0.5, 0.999),
            variable_selection: true,
            vs_auto_trigger: true,
            seed: 0,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.k == 0 || self.p_u == 0 {
            return Err(Error::InvalidParameter(
                "batch size, K, and p_u must be positive".into(),
            ));
        }
        if let Some(m) = self.time_points {
            if m == 0 {
                return Err(Error::InvalidParameter(
                    "time_points must be positive when set".into(),
                ));
            }
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.variable_selection && self.epochs > 0 && self.vs_epochs >= self.epochs {
            return Err(Error::InvalidParameter(format!(
                "selection must start before training ends (vs_epochs {} >= epochs {})",
                self.vs_epochs, self.epochs
            )));
        }
        Ok(())
    }
}

/// Iterations for a full pass schedule: `epochs * ceil(N / batch_size)`.
pub fn epochs_to_iterations(cfg: &TrainConfig, n: usize) -> usize {
    cfg.epochs * n.div_ceil(cfg.batch_size)
}

/// Weight-path importance of every network input: the product of
/// elementwise-absolute layer matrices from the output back to the input,
/// with the auxiliary baseline threshold (mean importance over the first
/// `p_u` entries).
#[derive(Debug, Clone)]
pub struct ImportanceVector {
    pub gamma: Vec<f64>,
    pub threshold: f64,
}

pub fn variable_importance(gen: &GeneratorModel) -> ImportanceVector {
    let net = gen.net();
    let dims = net.layer_dims();
    let layers = net.num_layers();
    // row vector, starting from |W_last|
    let mut v: Vec<f64> = net.weights()[layers - 1].iter().map(|w| w.abs()).collect();
    for l in (0..layers - 1).rev() {
        let rows = dims[l + 1];
        let cols = dims[l];
        let w = &net.weights()[l];
        let mut next = vec![0.0; cols];
        for r in 0..rows {
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            for c in 0..cols {
                next[c] += vr * w[r * cols + c].abs();
            }
        }
        v = next;
    }
    let p_u = gen.p_u();
    let threshold = v[..p_u].iter().sum::<f64>() / p_u as f64;
    ImportanceVector { gamma: v, threshold }
}

/// Zeroes the first-layer columns of covariates whose importance is at or
/// below the auxiliary threshold. Returns the selected covariate indices
/// (0-based within the covariate block).
pub fn apply_selection(gen: &mut GeneratorModel, iv: &ImportanceVector) -> Vec<usize> {
    let p_u = gen.p_u();
    let p = gen.covariate_dim();
    let selected: Vec<usize> = (0..p)
        .filter(|j| iv.gamma[p_u + j] <= iv.threshold)
        .collect();
    let cols: Vec<usize> = selected.iter().map(|j| p_u + j).collect();
    gen.net_mut().zero_input_columns(&cols);
    selected
}

/// One history row per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub c_tilde: f64,
    pub grad_norm_omega: f64,
    pub grad_norm_zeta: f64,
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub generator: GeneratorModel,
    pub phi: Mlp,
    /// Covariate indices pruned by selection (0-based within covariates).
    pub pruned_covariates: Vec<usize>,
    pub history: Vec<HistoryRow>,
}

/// Runs the alternating game for `epochs_to_iterations` steps.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let n_total = data.len();
    if n_total < cfg.batch_size {
        return Err(Error::InvalidParameter(format!(
            "dataset has {} records, batch size {} needs at least that many",
            n_total, cfg.batch_size
        )));
    }
    let p = data.covariate_dim();
    let m = cfg.time_points.unwrap_or(cfg.batch_size);
    if m > n_total {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {} distinct time points from {} records",
            m, n_total
        )));
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gen_dims: Vec<usize> = std::iter::once(cfg.p_u + p)
        .chain(cfg.gen_hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let phi_dims: Vec<usize> = std::iter::once(p)
        .chain(cfg.phi_hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let gen_net = Mlp::init(&gen_dims, Activation::Relu, OutputActivation::Exp, master.next_u64())?;
    let mut gen = GeneratorModel::new(gen_net, cfg.p_u)?;
    let mut phi = Mlp::init(&phi_dims, Activation::Relu, OutputActivation::Sigmoid, master.next_u64())?;

    let mut gen_opt = cfg.gen_opt.build(gen.net());
    let mut phi_opt = cfg.phi_opt.build(&phi);

    let iters_per_epoch = n_total.div_ceil(cfg.batch_size);
    let total_iters = cfg.epochs * iters_per_epoch;
    let mut vs_start_iter = if cfg.variable_selection {
        cfg.vs_epochs * iters_per_epoch
    } else {
        usize::MAX
    };

    let all_times: Vec<f64> = data.records().iter().map(|r| r.time).collect();
    let mut masked_cols: Vec<usize> = Vec::new();
    let mut pruned: Vec<usize> = Vec::new();
    let mut history = Vec::with_capacity(total_iters);

    for h in 1..=total_iters {
        let batch_idx = sample_without_replacement(&mut master, n_total, cfg.batch_size);
        let time_idx = sample_without_replacement(&mut master, n_total, m);
        let seed_omega = master.next_u64();
        let seed_zeta = master.next_u64();

        let batch = data.subset(&batch_idx)?;
        let time_points: Vec<f64> = time_idx.iter().map(|&i| all_times[i]).collect();

        let omega = omega_eval(
            &gen,
            &phi,
            &batch,
            &time_points,
            cfg.k,
            cfg.temperature,
            seed_omega,
            true,
            cfg.jobs,
        )?;
        let c_tilde = omega.report.c_tilde;
        if !c_tilde.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "non-finite loss at iteration {}",
                h
            )));
        }
        let mut gen_grads = omega.grads.expect("gradients requested");
        zero_grad_columns(&mut gen_grads.weights[0], &masked_cols, cfg.p_u + p);
        let grad_norm_omega = gen_grads.norm();
        gen_opt.step(gen.net_mut(), &gen_grads, StepMode::Descent).map_err(|e| at_iter(e, h))?;

        let (_, phi_grads) = zeta_eval(&gen, &phi, &batch, &time_points, cfg.k, seed_zeta, cfg.jobs)?;
        let grad_norm_zeta = phi_grads.norm();
        phi_opt.step(&mut phi, &phi_grads, StepMode::Ascent).map_err(|e| at_iter(e, h))?;

        history.push(HistoryRow {
            iter: h,
            c_tilde,
            grad_norm_omega,
            grad_norm_zeta,
        });

        // Importance trigger is checked at epoch boundaries only.
        if cfg.variable_selection && cfg.vs_auto_trigger && h < vs_start_iter && h % iters_per_epoch == 0
        {
            let iv = variable_importance(&gen);
            let cov_mean = iv.gamma[cfg.p_u..].iter().sum::<f64>() / p as f64;
            if cov_mean > iv.threshold {
                vs_start_iter = h;
            }
        }

        if cfg.variable_selection && h > vs_start_iter {
            let iv = variable_importance(&gen);
            let newly = apply_selection(&mut gen, &iv);
            let mut added = false;
            for j in newly {
                if !pruned.contains(&j) {
                    pruned.push(j);
                    masked_cols.push(cfg.p_u + j);
                    added = true;
                }
            }
            if added {
                gen_opt.zero_first_layer_columns(&masked_cols, cfg.p_u + p);
            }
        }
    }
    pruned.sort_unstable();
    Ok(TrainedModel {
        generator: gen,
        phi,
        pruned_covariates: pruned,
        history,
    })
}

fn at_iter(e: Error, h: usize) -> Error {
    match e {
        Error::TrainingDiverged(msg) => {
            Error::TrainingDiverged(format!("{} at iteration {}", msg, h))
        }
        other => other,
    }
}

fn zero_grad_columns(w0: &mut [f64], cols: &[usize], in_dim: usize) {
    let rows = w0.len() / in_dim;
    for &c in cols {
        for r in 0..rows {
            w0[r * in_dim + c] = 0.0;
        }
    }
}
