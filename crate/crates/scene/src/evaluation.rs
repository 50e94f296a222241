//! Evaluation protocols: pointwise empirical bands over replicate curves,
//! quantile-quantile series against a closed-form truth, and k-fold
//! cross-validated concordance.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{risk_score, SampleBatch};
use crate::loss::run_per_record;
use crate::simulation::TruthOracle;
use crate::survival::{concordance_index, Dataset, Record, RiskScores, SurvivalCurve};
use crate::trainer::{train, TrainConfig};

/// Pointwise band over replicate curves sharing one grid.
#[derive(Debug, Clone)]
pub struct BandSummary {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub mean: Vec<f64>,
    pub upper: Vec<f64>,
    pub replicates: usize,
}

// Linear-interpolation quantile of sorted values.
fn interp_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-time empirical quantile band at the given coverage level, plus the
/// pointwise mean.
pub fn empirical_band(curves: &[SurvivalCurve], level: f64) -> Result<BandSummary> {
    if curves.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two replicate curves".into(),
        ));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "band level must lie in (0, 1), got {}",
            level
        )));
    }
    let grid = curves[0].times().to_vec();
    for (i, c) in curves.iter().enumerate() {
        if c.times() != grid.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "curve {} is on a different grid",
                i
            )));
        }
    }
    let alpha = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(grid.len());
    let mut mean = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let mut vals: Vec<f64> = curves.iter().map(|c| c.probs()[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = interp_quantile(&vals, alpha);
        let hi = interp_quantile(&vals, 1.0 - alpha);
        // summation rounding must not push the mean outside the band
        let avg = (vals.iter().sum::<f64>() / vals.len() as f64).clamp(lo, hi);
        lower.push(lo);
        upper.push(hi);
        mean.push(avg);
    }
    Ok(BandSummary {
        grid,
        lower,
        mean,
        upper,
        replicates: curves.len(),
    })
}

/// Paired true and generated quantiles on an even level grid. Levels run
/// from 1/Q to (Q-1)/Q; the distribution's upper endpoint is unbounded, so
/// the q = 1 point is reported separately as the sample maximum.
#[derive(Debug, Clone)]
pub struct QqSeries {
    pub levels: Vec<f64>,
    pub true_quantiles: Vec<f64>,
    pub generated_quantiles: Vec<f64>,
    /// Largest generated time, the extreme q = 1 sample quantile.
    pub max_generated: f64,
}

// Nearest-rank sample quantile.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn qq_series(truth: &TruthOracle, x: &[f64], batch: &SampleBatch, q_count: usize) -> Result<QqSeries> {
    if q_count < 2 {
        return Err(Error::InvalidParameter("need at least two levels".into()));
    }
    if batch.times.len() < q_count {
        return Err(Error::InvalidParameter(format!(
            "batch of {} cannot resolve {} quantile levels",
            batch.times.len(),
            q_count
        )));
    }
    let mut sorted = batch.times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut levels = Vec::with_capacity(q_count - 1);
    let mut true_quantiles = Vec::with_capacity(q_count - 1);
    let mut generated_quantiles = Vec::with_capacity(q_count - 1);
    for i in 1..q_count {
        let q = i as f64 / q_count as f64;
        levels.push(q);
        true_quantiles.push(truth.quantile(q, x)?);
        generated_quantiles.push(nearest_rank(&sorted, q));
    }
    Ok(QqSeries {
        levels,
        true_quantiles,
        generated_quantiles,
        max_generated: *sorted.last().expect("non-empty batch"),
    })
}

/// Cross-validated concordance summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CvReport {
    fn from_folds(folds: Vec<f64>) -> Self {
        let n = folds.len() as f64;
        let mean = folds.iter().sum::<f64>() / n;
        let sd = if folds.len() > 1 {
            (folds.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        CvReport { folds, mean, sd }
    }
}

/// Disjoint near-equal folds of a seed-shuffled index set.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "fold count {} must lie in [2, {}]",
            k, n
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = (rng.next_u64() as usize) % (i + 1);
        idx.swap(i, j);
    }
    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < rem);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// K-fold cross-validation with a caller-supplied fit-and-score routine:
/// given (train set, test set, fold index) it returns one risk score per test
/// record.
pub fn kfold_with<F>(data: &Dataset, k: usize, seed: u64, jobs: usize, fit_score: F) -> Result<CvReport>
where
    F: Fn(&Dataset, &Dataset, usize) -> Result<Vec<f64>> + Sync,
{
    let folds = kfold_split(data.len(), k, seed)?;
    let cs = run_per_record(k, jobs, |f| {
        let test_idx = &folds[f];
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let train_set = data.subset(&train_idx)?;
        let test_set = data.subset(test_idx)?;
        let scores = fit_score(&train_set, &test_set, f)?;
        let scores = RiskScores::new(scores)?;
        concordance_index(&test_set, &scores)
            .map_err(|e| Error::UndefinedCindex(format!("fold {}: {}", f, e)))
    })?;
    Ok(CvReport::from_folds(cs))
}

/// Trains on each fold complement and scores the held-out records with the
/// negative mean generated time.
pub fn kfold_cindex(data: &Dataset, cfg: &TrainConfig, k: usize, jobs: usize) -> Result<CvReport> {
    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shuffle_seed = seed_rng.next_u64();
    let fold_seeds: Vec<(u64, u64)> = (0..k)
        .map(|_| (seed_rng.next_u64(), seed_rng.next_u64()))
        .collect();
    kfold_with(data, k, shuffle_seed, jobs, |train_set, test_set, f| {
        let (train_seed, eval_seed) = fold_seeds[f];
        let mut fold_cfg = cfg.clone();
        fold_cfg.seed = train_seed;
        fold_cfg.jobs = 1;
        let model = train(train_set, &fold_cfg)?;
        test_set
            .records()
            .iter()
            .map(|r| risk_score(&model.generator, &r.covariates, cfg.k, eval_seed))
            .collect()
    })
}

/// Appends `p_n` iid Uniform[-1, 1] noise covariates to every record.
pub fn augment_with_noise(data: &Dataset, p_n: usize, seed: u64) -> Result<Dataset> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<Record> = data
        .records()
        .iter()
        .map(|r| {
            let mut covariates = r.covariates.clone();
            covariates.extend((0..p_n).map(|_| rng.gen_range(-1.0..1.0)));
            Record {
                time: r.time,
                event: r.event,
                covariates,
            }
        })
        .collect();
    Dataset::new(records)
}
