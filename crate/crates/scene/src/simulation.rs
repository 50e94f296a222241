//! Synthetic right-censored data: proportional-hazards and proportional-odds
//! generating processes with closed-form conditional survival and quantile
//! functions, uniform censoring, and the four fixed test subjects used by the
//! evaluation protocols.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::CurveSource;
use crate::survival::{Dataset, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Ph,
    Po,
}

/// Everything that defines one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub model: SimModel,
    pub n: usize,
    pub p: usize,
    /// Censoring upper bound: C ~ Uniform[0, tau].
    pub tau: f64,
    /// Bandwidth of the risk exponent.
    pub r: f64,
    /// Hazard-scale constant; ln(0.1) reproduces the reference censoring rates
    /// for the proportional-hazards model.
    pub lambda_param: f64,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn ph(n: usize, p: usize, tau: f64, seed: u64) -> Self {
        SimulationSpec {
            model: SimModel::Ph,
            n,
            p,
            tau,
            r: 0.7,
            lambda_param: 0.1f64.ln(),
            seed,
        }
    }

    pub fn po(n: usize, p: usize, tau: f64, seed: u64) -> Self {
        SimulationSpec {
            model: SimModel::Po,
            n,
            p,
            tau,
            r: 0.5,
            lambda_param: 0.1f64.ln(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p < 2 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 1 and p >= 2, got n={} p={}",
                self.n, self.p
            )));
        }
        if !(self.tau > 0.0) || !(self.r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau and r must be positive, got tau={} r={}",
                self.tau, self.r
            )));
        }
        Ok(())
    }
}

/// Risk exponent `f(x) = -(x_1^2 + x_2^2) / (2 r^2)`; only the first two
/// coordinates matter.
pub fn risk_exponent(x: &[f64], r: f64) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "risk exponent needs at least two covariates, got {}",
            x.len()
        )));
    }
    Ok(-(x[0] * x[0] + x[1] * x[1]) / (2.0 * r * r))
}

fn ph_hazard(x: &[f64], spec: &SimulationSpec) -> f64 {
    let f = risk_exponent(x, spec.r).expect("validated spec");
    (spec.lambda_param * f.exp()).exp()
}

/// Proportional hazards: `S(t|x) = exp(-t * h(x))` with
/// `h(x) = exp(lambda * e^{f(x)})`.
pub fn ph_true_survival(t: f64, x: &[f64], spec: &SimulationSpec) -> f64 {
    (-t * ph_hazard(x, spec)).exp()
}

/// Proportional odds: `S(t|x) = 1 / (1 + t e^{f(x)})`.
pub fn po_true_survival(t: f64, x: &[f64], spec: &SimulationSpec) -> f64 {
    let f = risk_exponent(x, spec.r).expect("validated spec");
    1.0 / (1.0 + t * f.exp())
}

pub fn true_survival(t: f64, x: &[f64], spec: &SimulationSpec) -> f64 {
    match spec.model {
        SimModel::Ph => ph_true_survival(t, x, spec),
        SimModel::Po => po_true_survival(t, x, spec),
    }
}

/// Inverse of the conditional distribution function: the time t with
/// `S(t|x) = 1 - q`.
pub fn true_quantile(q: f64, x: &[f64], spec: &SimulationSpec) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must lie in (0, 1), got {}",
            q
        )));
    }
    Ok(match spec.model {
        SimModel::Ph => -(1.0 - q).ln() / ph_hazard(x, spec),
        SimModel::Po => {
            let f = risk_exponent(x, spec.r)?;
            (1.0 / (1.0 - q) - 1.0) * (-f).exp()
        }
    })
}

/// Draws a dataset: covariates uniform on [-1, 1]^p, event times by inverse
/// CDF, censoring uniform on [0, tau]. Three independent sub-streams (one per
/// source of randomness) keep the draws reproducible component by component.
pub fn simulate(spec: &SimulationSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut x_rng = stream(spec.seed, 0);
    let mut t_rng = stream(spec.seed, 1);
    let mut c_rng = stream(spec.seed, 2);
    let mut records = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..spec.p).map(|_| x_rng.gen_range(-1.0..1.0)).collect();
        let q = positive_unit(&mut t_rng);
        let t = true_quantile(q, &x, spec)?;
        let c = positive_upto(&mut c_rng, spec.tau);
        records.push(Record {
            time: t.min(c),
            event: t <= c,
            covariates: x,
        });
    }
    Dataset::new(records)
}

fn stream(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx);
    rng
}

fn positive_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.r#gen();
        if u > 0.0 {
            return u;
        }
    }
}

fn positive_upto(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    loop {
        let u = rng.gen_range(0.0..hi);
        if u > 0.0 {
            return u;
        }
    }
}

/// The four fixed evaluation subjects: one random draw plus the constant
/// vectors 0.25, 0.5, and 0.75.
pub fn test_subjects(spec: &SimulationSpec) -> Result<[Vec<f64>; 4]> {
    spec.validate()?;
    let mut rng = stream(spec.seed, 3);
    let random: Vec<f64> = (0..spec.p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok([
        random,
        vec![0.25; spec.p],
        vec![0.5; spec.p],
        vec![0.75; spec.p],
    ])
}

/// Closed-form conditional survival surface of a simulation spec.
#[derive(Debug, Clone)]
pub struct TruthOracle {
    spec: SimulationSpec,
}

impl TruthOracle {
    pub fn new(spec: SimulationSpec) -> Result<Self> {
        spec.validate()?;
        Ok(TruthOracle { spec })
    }

    pub fn spec(&self) -> &SimulationSpec {
        &self.spec
    }

    pub fn survival(&self, t: f64, x: &[f64]) -> f64 {
        true_survival(t, x, &self.spec)
    }

    pub fn quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        true_quantile(q, x, &self.spec)
    }
}

impl CurveSource for TruthOracle {
    fn survival(&self, t: f64, x: &[f64]) -> f64 {
        true_survival(t, x, &self.spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn risk_exponent_values() {
        assert_eq!(risk_exponent(&[0.0, 0.0, 0.3], 0.7).unwrap(), 0.0);
        let f = risk_exponent(&[0.25, 0.25], 0.7).unwrap();
        assert!((f - (-0.125 / 0.98)).abs() < 1e-12);
        // later coordinates are ignored
        let g = risk_exponent(&[0.25, 0.25, 9.0, -4.0], 0.7).unwrap();
        assert_eq!(f, g);
        assert!(matches!(
            risk_exponent(&[0.5], 0.7),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn ph_survival_at_origin() {
        let spec = SimulationSpec::ph(10, 5, 5.0, 0);
        let x = vec![0.0; 5];
        // h(0) = exp(ln 0.1) = 0.1
        assert!((ph_true_survival(1.0, &x, &spec) - (-0.1f64).exp()).abs() < 1e-15);
        assert_eq!(ph_true_survival(0.0, &x, &spec), 1.0);
        let median = true_quantile(0.5, &x, &spec).unwrap();
        assert!((median - 2.0f64.ln() / 0.1).abs() < 1e-12);
    }

    #[test]
    fn ph_hazard_range_on_unit_box() {
        let spec = SimulationSpec::ph(10, 2, 5.0, 0);
        for x in [[0.0, 0.0], [1.0, 1.0], [-1.0, 0.3], [0.6, -0.8]] {
            let h = ph_hazard(&x, &spec);
            assert!((0.1..1.0).contains(&h), "h = {}", h);
        }
    }

    #[test]
    fn po_survival_values() {
        let spec = SimulationSpec::po(10, 5, 5.0, 0);
        let x = vec![0.0; 5];
        assert_eq!(po_true_survival(0.0, &x, &spec), 1.0);
        assert!((po_true_survival(1.0, &x, &spec) - 0.5).abs() < 1e-15);
        let q = true_quantile(0.5, &x, &spec).unwrap();
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for spec in [SimulationSpec::ph(10, 3, 5.0, 0), SimulationSpec::po(10, 3, 5.0, 0)] {
            for _ in 0..1000 {
                let q: f64 = rng.gen_range(0.001..0.999);
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let t = true_quantile(q, &x, &spec).unwrap();
                let s = true_survival(t, &x, &spec);
                assert!((s - (1.0 - q)).abs() < 1e-12, "{} vs {}", s, 1.0 - q);
            }
        }
        let spec = SimulationSpec::ph(10, 3, 5.0, 0);
        assert!(true_quantile(0.0, &[0.0; 3], &spec).is_err());
        assert!(true_quantile(1.0, &[0.0; 3], &spec).is_err());
    }

    #[test]
    fn simulate_is_deterministic_and_valid() {
        let spec = SimulationSpec::ph(500, 5, 5.0, 42);
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert_eq!(a.covariate_dim(), 5);
        assert!(a.records().iter().all(|r| r.time > 0.0));
    }

    #[test]
    fn censoring_vanishes_with_huge_tau() {
        let spec = SimulationSpec::ph(2000, 5, 1e9, 7);
        let data = simulate(&spec).unwrap();
        assert!(data.censoring_rate() < 0.001);
    }

    #[test]
    fn sub_streams_are_independent() {
        // same seed, different tau: covariates and event indicators may differ
        // but the covariate draws must be identical
        let a = simulate(&SimulationSpec::ph(50, 4, 5.0, 3)).unwrap();
        let b = simulate(&SimulationSpec::ph(50, 4, 50.0, 3)).unwrap();
        for (ra, rb) in a.records().iter().zip(b.records()) {
            assert_eq!(ra.covariates, rb.covariates);
        }
    }

    #[test]
    fn ph_censoring_rates_match_reference() {
        // Table values 52.98% at tau=5 and 20.49% at tau=19, within one
        // percentage point over 100 datasets of 4000.
        for (tau, target) in [(5.0, 0.5298), (19.0, 0.2049)] {
            let mut acc = 0.0;
            for seed in 0..100 {
                let data = simulate(&SimulationSpec::ph(4000, 5, tau, 1000 + seed)).unwrap();
                acc += data.censoring_rate();
            }
            let mean = acc / 100.0;
            assert!(
                (mean - target).abs() < 0.01,
                "tau={}: {} vs {}",
                tau,
                mean,
                target
            );
        }
    }

    #[test]
    fn po_censoring_matches_quadrature_of_the_implemented_law() {
        // Independent oracle: P(censored | x) = E_C S(C|x) has the closed form
        // ln(1 + tau a)/(tau a) with a = e^{f(x)}; average it over the
        // covariate law by Monte Carlo.
        let tau = 5.0;
        let spec = SimulationSpec::po(4000, 5, tau, 0);
        let mut quad = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let m = 200_000;
        for _ in 0..m {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = risk_exponent(&x, spec.r).unwrap().exp();
            quad += (1.0 + tau * a).ln() / (tau * a);
        }
        let expected = quad / m as f64;
        let mut acc = 0.0;
        for seed in 0..50 {
            let data = simulate(&SimulationSpec::po(4000, 5, tau, 500 + seed)).unwrap();
            acc += data.censoring_rate();
        }
        let mean = acc / 50.0;
        assert!(
            (mean - expected).abs() < 0.005,
            "simulated {} vs quadrature {}",
            mean,
            expected
        );
    }

    #[test]
    fn empirical_survival_of_uncensored_draws_matches_truth() {
        // Distribution check at a fixed covariate: a large uncensored sample's
        // empirical survival tracks the closed form everywhere on a grid.
        for spec in [SimulationSpec::ph(10, 5, 5.0, 0), SimulationSpec::po(10, 5, 5.0, 0)] {
            let x = vec![0.3; 5];
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let n = 1_000_000;
            let mut times: Vec<f64> = Vec::with_capacity(n);
            for _ in 0..n {
                let q = positive_unit(&mut rng);
                times.push(true_quantile(q, &x, &spec).unwrap());
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let max_t = true_quantile(0.99, &x, &spec).unwrap();
            for i in 0..50 {
                let t = max_t * (i as f64 + 0.5) / 50.0;
                let above = times.len() - times.partition_point(|&v| v <= t);
                let emp = above as f64 / n as f64;
                let truth = true_survival(t, &x, &spec);
                assert!(
                    (emp - truth).abs() < 0.005,
                    "{:?} t={}: {} vs {}",
                    spec.model,
                    t,
                    emp,
                    truth
                );
            }
        }
    }

    #[test]
    fn subjects_have_reference_risk_ranks() {
        let spec = SimulationSpec::ph(10, 5, 5.0, 77);
        let subjects = test_subjects(&spec).unwrap();
        assert_eq!(subjects[2], vec![0.5; 5]);
        // rank = share of the population with a strictly higher risk exponent
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = 1_000_000;
        let mut higher = [0u32; 3];
        let f_subj: Vec<f64> = (1..4)
            .map(|i| risk_exponent(&subjects[i], spec.r).unwrap())
            .collect();
        for _ in 0..m {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let f = risk_exponent(&x, spec.r).unwrap();
            for (i, &fs) in f_subj.iter().enumerate() {
                if f > fs {
                    higher[i] += 1;
                }
            }
        }
        let ranks: Vec<f64> = higher.iter().map(|&h| h as f64 / m as f64).collect();
        assert!((ranks[0] - 0.098).abs() < 0.005, "subject 2 rank {}", ranks[0]);
        assert!((ranks[1] - 0.392).abs() < 0.005, "subject 3 rank {}", ranks[1]);
        assert!((ranks[2] - 0.855).abs() < 0.005, "subject 4 rank {}", ranks[2]);
        // monotone: the 0.25 vector has the higher (less negative) exponent
        assert!(f_subj[0] > f_subj[2]);
    }
}
