//! Flat `key = value` training configuration files.
//!
//! Unknown keys are rejected. Missing keys fall back to the low-dimensional
//! defaults. Architectures are comma-separated hidden-layer widths, for
//! example `model.gen_arch = 256,256,256`.

use crate::error::{Error, Result};
use crate::trainer::{OptKind, TrainConfig};

pub const CONFIG_KEYS: &[&str] = &[
    "model.gen_arch",
    "model.phi_arch",
    "train.epochs",
    "train.vs_epochs",
    "train.batch_size",
    "train.time_points",
    "train.K",
    "train.p_u",
    "train.temperature",
    "opt.gen.kind",
    "opt.gen.lr",
    "opt.gen.beta1",
    "opt.gen.beta2",
    "opt.gen.momentum",
    "opt.phi.kind",
    "opt.phi.lr",
    "opt.phi.beta1",
    "opt.phi.beta2",
    "opt.phi.momentum",
    "train.variable_selection",
    "seed",
];

pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::low_dim();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{}`",
                lineno + 1,
                line
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{}`", key)));
        }
        apply_key(&mut cfg, key, value)?;
    }
    Ok(cfg)
}

fn apply_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("key `{}`: invalid {} `{}`", key, what, value));
    match key {
        "model.gen_arch" => cfg.gen_hidden = parse_arch(value).ok_or_else(|| bad("architecture"))?,
        "model.phi_arch" => cfg.phi_hidden = parse_arch(value).ok_or_else(|| bad("architecture"))?,
        "train.epochs" => cfg.epochs = value.parse().map_err(|_| bad("integer"))?,
        "train.vs_epochs" => cfg.vs_epochs = value.parse().map_err(|_| bad("integer"))?,
        "train.batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("integer"))?,
        "train.time_points" => {
            cfg.time_points = Some(value.parse().map_err(|_| bad("integer"))?)
        }
        "train.K" => cfg.k = value.parse().map_err(|_| bad("integer"))?,
        "train.p_u" => cfg.p_u = value.parse().map_err(|_| bad("integer"))?,
        "train.temperature" => cfg.temperature = value.parse().map_err(|_| bad("number"))?,
        "opt.gen.kind" => cfg.gen_opt.kind = parse_kind(value).ok_or_else(|| bad("optimizer kind"))?,
        "opt.gen.lr" => cfg.gen_opt.learning_rate = value.parse().map_err(|_| bad("number"))?,
        "opt.gen.beta1" => cfg.gen_opt.beta1 = value.parse().map_err(|_| bad("number"))?,
        "opt.gen.beta2" => cfg.gen_opt.beta2 = value.parse().map_err(|_| bad("number"))?,
        "opt.gen.momentum" => cfg.gen_opt.momentum = value.parse().map_err(|_| bad("number"))?,
        "opt.phi.kind" => cfg.phi_opt.kind = parse_kind(value).ok_or_else(|| bad("optimizer kind"))?,
        "opt.phi.lr" => cfg.phi_opt.learning_rate = value.parse().map_err(|_| bad("number"))?,
        "opt.phi.beta1" => cfg.phi_opt.beta1 = value.parse().map_err(|_| bad("number"))?,
        "opt.phi.beta2" => cfg.phi_opt.beta2 = value.parse().map_err(|_| bad("number"))?,
        "opt.phi.momentum" => cfg.phi_opt.momentum = value.parse().map_err(|_| bad("number"))?,
        "train.variable_selection" => {
            cfg.variable_selection = match value {
                "true" => true,
                "false" => false,
                _ => return Err(bad("boolean")),
            };
            cfg.vs_auto_trigger = cfg.variable_selection;
        }
        "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
        _ => unreachable!("key list checked by caller"),
    }
    Ok(())
}

fn parse_arch(value: &str) -> Option<Vec<usize>> {
    let dims: Option<Vec<usize>> = value
        .split(',')
        .map(|part| part.trim().parse::<usize>().ok().filter(|&d| d > 0))
        .collect();
    dims.filter(|d| !d.is_empty())
}

fn parse_kind(value: &str) -> Option<OptKind> {
    match value {
        "adam" => Some(OptKind::Adam),
        "sgd_momentum" => Some(OptKind::SgdMomentum),
        _ => None,
    }
}

/// Renders a config back to the flat key=value form.
pub fn write_config(cfg: &TrainConfig) -> String {
    let arch = |dims: &[usize]| {
        dims.iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let kind = |k: OptKind| match k {
        OptKind::Adam => "adam",
        OptKind::SgdMomentum => "sgd_momentum",
    };
    let mut out = String::new();
    out.push_str(&format!("model.gen_arch = {}\n", arch(&cfg.gen_hidden)));
    out.push_str(&format!("model.phi_arch = {}\n", arch(&cfg.phi_hidden)));
    out.push_str(&format!("train.epochs = {}\n", cfg.epochs));
    out.push_str(&format!("train.vs_epochs = {}\n", cfg.vs_epochs));
    out.push_str(&format!("train.batch_size = {}\n", cfg.batch_size));
    if let Some(m) = cfg.time_points {
        out.push_str(&format!("train.time_points = {}\n", m));
    }
    out.push_str(&format!("train.K = {}\n", cfg.k));
    out.push_str(&format!("train.p_u = {}\n", cfg.p_u));
    out.push_str(&format!("train.temperature = {}\n", cfg.temperature));
    out.push_str(&format!("opt.gen.kind = {}\n", kind(cfg.gen_opt.kind)));
    out.push_str(&format!("opt.gen.lr = {}\n", cfg.gen_opt.learning_rate));
    out.push_str(&format!("opt.gen.beta1 = {}\n", cfg.gen_opt.beta1));
    out.push_str(&format!("opt.gen.beta2 = {}\n", cfg.gen_opt.beta2));
    out.push_str(&format!("opt.gen.momentum = {}\n", cfg.gen_opt.momentum));
    out.push_str(&format!("opt.phi.kind = {}\n", kind(cfg.phi_opt.kind)));
    out.push_str(&format!("opt.phi.lr = {}\n", cfg.phi_opt.learning_rate));
    out.push_str(&format!("opt.phi.beta1 = {}\n", cfg.phi_opt.beta1));
    out.push_str(&format!("opt.phi.beta2 = {}\n", cfg.phi_opt.beta2));
    out.push_str(&format!("opt.phi.momentum = {}\n", cfg.phi_opt.momentum));
    out.push_str(&format!(
        "train.variable_selection = {}\n",
        cfg.variable_selection
    ));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out
}
