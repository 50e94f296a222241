//! First-order optimizers over [`Mlp`] parameters.

use crate::error::{Error, Result};

use super::{Mlp, ParamGrads};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps_stab: f64 },
}

/// Whether a step moves against the gradient (minimize) or along it (maximize).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Descent,
    Ascent,
}

/// Optimizer state holding per-parameter moment buffers and a step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    m_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn sgd_momentum(learning_rate: f64, momentum: f64, mlp: &Mlp) -> Self {
        Self::new(OptimizerKind::SgdMomentum { momentum }, learning_rate, mlp)
    }

    pub fn adam(learning_rate: f64, beta1: f64, beta2: f64, mlp: &Mlp) -> Self {
        Self::new(
            OptimizerKind::Adam {
                beta1,
                beta2,
                eps_stab: 1e-8,
            },
            learning_rate,
            mlp,
        )
    }

    pub fn new(kind: OptimizerKind, learning_rate: f64, mlp: &Mlp) -> Self {
        let zeros_w: Vec<Vec<f64>> = mlp.weights().iter().map(|w| vec![0.0; w.len()]).collect();
        let zeros_b: Vec<Vec<f64>> = mlp.biases().iter().map(|b| vec![0.0; b.len()]).collect();
        let second = matches!(kind, OptimizerKind::Adam { .. });
        OptimizerState {
            kind,
            learning_rate,
            m_w: zeros_w.clone(),
            m_b: zeros_b.clone(),
            v_w: if second { zeros_w } else { Vec::new() },
            v_b: if second { zeros_b } else { Vec::new() },
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update in place. Non-finite gradients abort with the
    /// offending layer index.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &ParamGrads, mode: StepMode) -> Result<()> {
        if !grads.congruent_with(mlp) {
            return Err(Error::ShapeMismatch(
                "gradients not congruent with network".into(),
            ));
        }
        for (l, (gw, gb)) in grads.weights.iter().zip(&grads.biases).enumerate() {
            if !gw.iter().chain(gb).all(|v| v.is_finite()) {
                return Err(Error::TrainingDiverged(format!(
                    "non-finite gradient in layer {}",
                    l
                )));
            }
        }
        self.step += 1;
        let sign = match mode {
            StepMode::Descent => 1.0,
            StepMode::Ascent => -1.0,
        };
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                let layers = mlp.num_layers();
                for l in 0..layers {
                    sgd_update(&mut mlp.weights_mut()[l], &mut self.m_w[l], &grads.weights[l], momentum, lr, sign);
                    sgd_update(&mut mlp.biases_mut()[l], &mut self.m_b[l], &grads.biases[l], momentum, lr, sign);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps_stab } => {
                let t = self.step as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let layers = mlp.num_layers();
                for l in 0..layers {
                    adam_update(
                        &mut mlp.weights_mut()[l],
                        &mut self.m_w[l],
                        &mut self.v_w[l],
                        &grads.weights[l],
                        beta1,
                        beta2,
                        eps_stab,
                        bc1,
                        bc2,
                        lr,
                        sign,
                    );
                    adam_update(
                        &mut mlp.biases_mut()[l],
                        &mut self.m_b[l],
                        &mut self.v_b[l],
                        &grads.biases[l],
                        beta1,
                        beta2,
                        eps_stab,
                        bc1,
                        bc2,
                        lr,
                        sign,
                    );
                }
            }
        }
        Ok(())
    }

    /// Clears the moment buffers for the given input columns of the first
    /// layer, so a pruned column cannot be moved by residual momentum.
    pub(crate) fn zero_first_layer_columns(&mut self, cols: &[usize], in_dim: usize) {
        let zero = |buf: &mut Vec<f64>| {
            let rows = buf.len() / in_dim;
            for &c in cols {
                for r in 0..rows {
                    buf[r * in_dim + c] = 0.0;
                }
            }
        };
        if let Some(m0) = self.m_w.first_mut() {
            zero(m0);
        }
        if let Some(v0) = self.v_w.first_mut() {
            zero(v0);
        }
    }
}

fn sgd_update(theta: &mut [f64], vel: &mut [f64], g: &[f64], momentum: f64, lr: f64, sign: f64) {
    for i in 0..theta.len() {
        vel[i] = momentum * vel[i] + g[i];
        theta[i] -= sign * lr * vel[i];
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    g: &[f64],
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
    lr: f64,
    sign: f64,
) {
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= sign * lr * m_hat / (v_hat.sqrt() + eps);
    }
}
