//! Censored-data containers, the Kaplan-Meier estimator, its self-consistency
//! residual, and Harrell's concordance index.

use crate::error::{Error, Result};

/// One right-censored observation: an observed time, whether it was an event
/// (`true`) or a censoring (`false`), and the covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

/// A right-censored dataset with a fixed covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let p = records[0].covariates.len();
        for (i, r) in records.iter().enumerate() {
            if !(r.time > 0.0 && r.time.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "record {}: time must be positive and finite, got {}",
                    i, r.time
                )));
            }
            if r.covariates.len() != p {
                return Err(Error::ShapeMismatch(format!(
                    "record {}: expected {} covariates, got {}",
                    i,
                    p,
                    r.covariates.len()
                )));
            }
            if !r.covariates.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "record {}: non-finite covariate",
                    i
                )));
            }
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn covariate_dim(&self) -> usize {
        self.records[0].covariates.len()
    }

    /// Fraction of censored records.
    pub fn censoring_rate(&self) -> f64 {
        let c = self.records.iter().filter(|r| !r.event).count();
        c as f64 / self.records.len() as f64
    }

    /// New dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices
            .iter()
            .map(|&i| self.records[i].clone())
            .collect::<Vec<_>>();
        Dataset::new(records)
    }

    /// Sorted distinct observed times.
    pub fn distinct_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.records.iter().map(|r| r.time).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }
}

/// A right-continuous non-increasing step function over time. The curve is 1
/// before the first knot; at and after a knot it takes that knot's value.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    times: Vec<f64>,
    probs: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(times: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if times.len() != probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} knot times but {} probabilities",
                times.len(),
                probs.len()
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(
                    "curve times must be strictly increasing".into(),
                ));
            }
        }
        if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(
                "curve times must be positive and finite".into(),
            ));
        }
        let mut prev = 1.0;
        for &p in &probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "curve probability {} outside [0, 1]",
                    p
                )));
            }
            if p > prev + 1e-12 {
                return Err(Error::InvalidParameter(
                    "curve probabilities must be non-increasing".into(),
                ));
            }
            prev = p;
        }
        Ok(SurvivalCurve { times, probs })
    }

    /// The constant curve S(t) = 1.
    pub fn all_ones() -> Self {
        SurvivalCurve {
            times: Vec::new(),
            probs: Vec::new(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Right-continuous step evaluation: the value at the last knot <= t,
    /// or 1 when t precedes every knot.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&kt| kt <= t);
        if idx == 0 {
            1.0
        } else {
            self.probs[idx - 1]
        }
    }
}

/// Risk scores aligned with a dataset's records; higher means higher risk.
#[derive(Debug, Clone)]
pub struct RiskScores(Vec<f64>);

impl RiskScores {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if !scores.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidParameter("non-finite risk score".into()));
        }
        Ok(RiskScores(scores))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// How to treat a survival value that appears in a denominator.
#[derive(Debug, Clone, Copy)]
pub enum DenomGuard {
    /// Replace denominators below the floor with the floor.
    FloorAt(f64),
    /// Fail with a singular-curve error when a denominator is below the floor.
    ErrorBelow(f64),
}

impl DenomGuard {
    pub(crate) fn apply(self, denom: f64, what: &str) -> Result<f64> {
        match self {
            DenomGuard::FloorAt(floor) => Ok(denom.max(floor)),
            DenomGuard::ErrorBelow(floor) => {
                if denom < floor {
                    Err(Error::SingularCurve(format!(
                        "survival value {:e} below {:e} in denominator at {}",
                        denom, floor, what
                    )))
                } else {
                    Ok(denom)
                }
            }
        }
    }
}

/// Kaplan-Meier product-limit estimator over the distinct event times.
/// Ties between events and censorings at the same time are resolved with
/// events first.
pub fn km_estimate(data: &Dataset) -> Result<SurvivalCurve> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut obs: Vec<(f64, bool)> = data.records().iter().map(|r| (r.time, r.event)).collect();
    obs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let n = obs.len();
    let mut times = Vec::new();
    let mut probs = Vec::new();
    let mut surv = 1.0;
    let mut i = 0;
    while i < n {
        let t = obs[i].0;
        let at_risk = n - i;
        let mut deaths = 0usize;
        let mut j = i;
        while j < n && obs[j].0 == t {
            if obs[j].1 {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            times.push(t);
            probs.push(surv);
        }
        i = j;
    }
    SurvivalCurve::new(times, probs)
}

/// Signed imbalance of the empirical self-consistency identity at time `t`:
///
/// `S(t) - (1/N) sum_i { I(t_i > t) + (1 - d_i) I(t_i <= t) S(t)/S(t_i) }`
///
/// The Kaplan-Meier curve makes this zero at every observed time.
pub fn km_residual(curve: &SurvivalCurve, data: &Dataset, t: f64, guard: DenomGuard) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let s_t = curve.eval(t);
    let mut sum = 0.0;
    for r in data.records() {
        if r.time > t {
            sum += 1.0;
        } else if !r.event {
            let denom = guard.apply(curve.eval(r.time), &format!("t={}", r.time))?;
            sum += s_t / denom;
        }
    }
    Ok(s_t - sum / data.len() as f64)
}

/// Harrell's concordance index. Comparable pairs are those where the earlier
/// time is an event and the two times differ; pairs where the earlier-failing
/// record has the higher score count as concordant, score ties as half.
pub fn concordance_index(data: &Dataset, scores: &RiskScores) -> Result<f64> {
    if scores.values().len() != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {} records",
            scores.values().len(),
            data.len()
        )));
    }
    let recs = data.records();
    let s = scores.values();
    let mut comparable = 0u64;
    let mut concordant = 0.0f64;
    for i in 0..recs.len() {
        if !recs[i].event {
            continue;
        }
        for j in 0..recs.len() {
            if i == j || recs[i].time >= recs[j].time {
                continue;
            }
            comparable += 1;
            if s[i] > s[j] {
                concordant += 1.0;
            } else if s[i] == s[j] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::UndefinedCindex(
            "no comparable pairs in dataset".into(),
        ));
    }
    Ok(concordant / comparable as f64)
}
