//! Empirical weighted self-consistency loss for the generator/discriminator
//! game, with its asymmetric gradient contract: the generator descends on the
//! left term only (every survival value inside the right term is frozen),
//! while the discriminator ascends on the full objective.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{draw_aux, GeneratorModel};
use crate::nn::{sigmoid, Mlp, ParamGrads};
use crate::survival::{Dataset, DenomGuard, Record};

/// Materialized inputs for one loss evaluation: a mini-batch of records, the
/// sampled evaluation times, the survival table over both time sets, and the
/// per-record weight values.
#[derive(Debug, Clone)]
pub struct LossBatch {
    pub records: Vec<Record>,
    pub time_points: Vec<f64>,
    /// `survival_at_obs[k][i]` = S(observed time of record k | x_i).
    pub survival_at_obs: Vec<Vec<f64>>,
    /// `survival_at_points[j][i]` = S(time_points[j] | x_i).
    pub survival_at_points: Vec<Vec<f64>>,
    /// Weight values in [0, 1], one per record.
    pub phi_values: Vec<f64>,
}

impl LossBatch {
    /// Builds the table from any conditional survival source.
    pub fn from_survival_fn(
        records: &[Record],
        time_points: &[f64],
        phi_values: &[f64],
        survival: impl Fn(f64, &[f64]) -> f64,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if time_points.is_empty() {
            return Err(Error::InvalidParameter("need at least one time point".into()));
        }
        if phi_values.len() != records.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weight values for {} records",
                phi_values.len(),
                records.len()
            )));
        }
        let survival_at_obs = records
            .iter()
            .map(|rk| records.iter().map(|ri| survival(rk.time, &ri.covariates)).collect())
            .collect();
        let survival_at_points = time_points
            .iter()
            .map(|&t| records.iter().map(|ri| survival(t, &ri.covariates)).collect())
            .collect();
        let lb = LossBatch {
            records: records.to_vec(),
            time_points: time_points.to_vec(),
            survival_at_obs,
            survival_at_points,
            phi_values: phi_values.to_vec(),
        };
        lb.validate()?;
        Ok(lb)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.survival_at_obs.iter().flatten().all(in_unit)
            || !self.survival_at_points.iter().flatten().all(in_unit)
        {
            return Err(Error::InvalidParameter(
                "survival table values must lie in [0, 1]".into(),
            ));
        }
        if !self.phi_values.iter().all(in_unit) {
            return Err(Error::InvalidParameter(
                "weight values must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn point_index(&self, t: f64) -> Result<usize> {
        self.time_points
            .iter()
            .position(|&v| v == t)
            .ok_or_else(|| Error::InvalidParameter(format!("{} is not one of the evaluation times", t)))
    }
}

/// Loss value and the per-time residuals it averages.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub c_tilde: f64,
    pub per_time_residuals: Vec<f64>,
}

impl LossReport {
    fn from_residuals(per_time_residuals: Vec<f64>) -> Self {
        let m = per_time_residuals.len() as f64;
        let c_tilde = per_time_residuals.iter().map(|r| r * r).sum::<f64>() / m;
        LossReport {
            c_tilde,
            per_time_residuals,
        }
    }
}

/// Left and right sums of the weighted identity at evaluation time `t`:
/// `L = (1/n) sum_i S(t|x_i) phi_i` and
/// `R = (1/n) sum_i { I(t_i > t) + I(censored, t_i <= t) S(t|x_i)/S(t_i|x_i) } phi_i`.
pub fn loss_terms(lb: &LossBatch, t: f64, guard: DenomGuard) -> Result<(f64, f64)> {
    let j = lb.point_index(t)?;
    let n = lb.records.len() as f64;
    let mut left = 0.0;
    let mut right = 0.0;
    for (i, r) in lb.records.iter().enumerate() {
        let phi = lb.phi_values[i];
        let s_t = lb.survival_at_points[j][i];
        left += s_t * phi;
        if r.time > t {
            right += phi;
        } else if !r.event {
            let denom = guard.apply(lb.survival_at_obs[i][i], &format!("record {}", i))?;
            right += s_t / denom * phi;
        }
    }
    Ok((left / n, right / n))
}

/// All per-time residuals `L - R` of a materialized batch.
pub fn batch_residuals(lb: &LossBatch, guard: DenomGuard) -> Result<LossReport> {
    let mut residuals = Vec::with_capacity(lb.time_points.len());
    for &t in &lb.time_points {
        let (l, r) = loss_terms(lb, t, guard)?;
        residuals.push(l - r);
    }
    Ok(LossReport::from_residuals(residuals))
}

pub(crate) struct OmegaEval {
    pub report: LossReport,
    pub grads: Option<ParamGrads>,
}

// Generator-side evaluation. One fresh auxiliary cloud is drawn per record;
// the exact empirical curve fills the reported residuals and every right-hand
// term, while the sigmoid-relaxed curve supplies the gradient path.
#[allow(clippy::too_many_arguments)]
pub(crate) fn omega_eval(
    gen: &GeneratorModel,
    phi: &Mlp,
    batch: &Dataset,
    time_points: &[f64],
    k: usize,
    temperature: f64,
    seed: u64,
    want_grads: bool,
    jobs: usize,
) -> Result<OmegaEval> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {}",
            temperature
        )));
    }
    if time_points.is_empty() {
        return Err(Error::InvalidParameter("need at least one time point".into()));
    }
    let n = batch.len();
    let m = time_points.len();
    let floor = 1.0 / k as f64;

    // Auxiliary draws for every record, in record order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aux: Vec<Vec<Vec<f64>>> = (0..n).map(|_| draw_aux(&mut rng, k, gen.p_u())).collect();

    let phi_values = eval_phi(phi, batch)?;

    struct PerRecord {
        s_exact: Vec<f64>,   // at the m time points
        s_smooth: Vec<f64>,  // at the m time points
        s_own: f64,          // at the record's own observed time
        sig_prime: Vec<f64>, // k x m sigmoid derivatives, kept only for the gradient
        cache: Option<crate::nn::BatchCache>,
    }

    let records = batch.records();
    let per_record = run_per_record(n, jobs, |i| -> Result<PerRecord> {
        let d = gen.p_u() + records[i].covariates.len();
        let mut inputs = Vec::with_capacity(k * d);
        for u in &aux[i] {
            inputs.extend_from_slice(u);
            inputs.extend_from_slice(&records[i].covariates);
        }
        let (times, cache) = gen.net().forward_batch(&inputs, k)?;
        for &t in &times {
            if !t.is_finite() {
                return Err(Error::TrainingDiverged(
                    "generator produced a non-finite time".into(),
                ));
            }
        }
        let kf = k as f64;
        let mut s_exact = vec![0.0; m];
        let mut s_smooth = vec![0.0; m];
        let mut sig_prime = if want_grads { vec![0.0; k * m] } else { Vec::new() };
        for (j, &t) in time_points.iter().enumerate() {
            let mut above = 0usize;
            let mut smooth = 0.0;
            for (s_idx, &tk) in times.iter().enumerate() {
                if tk > t {
                    above += 1;
                }
                let sig = sigmoid((tk - t) / temperature);
                smooth += sig;
                if want_grads {
                    sig_prime[s_idx * m + j] = sig * (1.0 - sig);
                }
            }
            s_exact[j] = above as f64 / kf;
            s_smooth[j] = smooth / kf;
        }
        let own = records[i].time;
        let s_own = times.iter().filter(|&&tk| tk > own).count() as f64 / kf;
        Ok(PerRecord {
            s_exact,
            s_smooth,
            s_own,
            sig_prime,
            cache: if want_grads { Some(cache) } else { None },
        })
    })?;

    // Residuals: exact for the report, smoothed left term for the gradient.
    let nf = n as f64;
    let mut exact_residuals = vec![0.0; m];
    let mut smooth_residuals = vec![0.0; m];
    for (j, &t) in time_points.iter().enumerate() {
        let mut l_exact = 0.0;
        let mut l_smooth = 0.0;
        let mut right = 0.0;
        for (i, pr) in per_record.iter().enumerate() {
            let phi_i = phi_values[i];
            l_exact += pr.s_exact[j] * phi_i;
            l_smooth += pr.s_smooth[j] * phi_i;
            let rec = &records[i];
            if rec.time > t {
                right += phi_i;
            } else if !rec.event {
                right += pr.s_exact[j] / pr.s_own.max(floor) * phi_i;
            }
        }
        exact_residuals[j] = (l_exact - right) / nf;
        smooth_residuals[j] = (l_smooth - right) / nf;
    }
    let report = LossReport::from_residuals(exact_residuals);

    if !want_grads {
        return Ok(OmegaEval { report, grads: None });
    }

    // d/dT_ki of (1/m) sum_j (L_smooth(t_j) - R_frozen(t_j))^2
    //   = (2/m) sum_j r_j * phi_i sig'_kij / (n K temperature)
    let mf = m as f64;
    let kf = k as f64;
    let partials = run_per_record(n, jobs, |i| -> Result<ParamGrads> {
        let pr = &per_record[i];
        let coef = 2.0 * phi_values[i] / (mf * nf * kf * temperature);
        let mut upstream = vec![0.0; k];
        for (s_idx, u) in upstream.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &r) in smooth_residuals.iter().enumerate() {
                acc += r * pr.sig_prime[s_idx * m + j];
            }
            *u = coef * acc;
        }
        let mut grads = ParamGrads::zeros_like(gen.net());
        gen.net()
            .backward_batch(pr.cache.as_ref().expect("cache kept"), &upstream, &mut grads)?;
        Ok(grads)
    })?;

    let mut total = ParamGrads::zeros_like(gen.net());
    for g in partials {
        for l in 0..total.weights.len() {
            for (acc, v) in total.weights[l].iter_mut().zip(&g.weights[l]) {
                *acc += v;
            }
            for (acc, v) in total.biases[l].iter_mut().zip(&g.biases[l]) {
                *acc += v;
            }
        }
    }
    Ok(OmegaEval {
        report,
        grads: Some(total),
    })
}

/// Evaluates the loss of a generator/weight pair on a mini-batch. The reported
/// value uses exact empirical indicators.
pub fn scene_loss(
    gen: &GeneratorModel,
    phi: &Mlp,
    batch: &Dataset,
    time_points: &[f64],
    k: usize,
    temperature: f64,
    seed: u64,
) -> Result<LossReport> {
    Ok(omega_eval(gen, phi, batch, time_points, k, temperature, seed, false, 1)?.report)
}

/// Gradient of the generator parameters under the frozen-right-term contract:
/// only the smoothed left term is differentiated, every survival value inside
/// the right term (numerators and denominators alike) is held constant.
pub fn generator_grad(
    gen: &GeneratorModel,
    phi: &Mlp,
    batch: &Dataset,
    time_points: &[f64],
    k: usize,
    temperature: f64,
    seed: u64,
) -> Result<ParamGrads> {
    Ok(omega_eval(gen, phi, batch, time_points, k, temperature, seed, true, 1)?
        .grads
        .expect("gradients requested"))
}

/// Full gradient of the loss with respect to the weight network. Survival
/// values are exact empirical indicators; the weight enters both terms
/// linearly so no smoothing is involved.
pub fn phi_grad(
    gen: &GeneratorModel,
    phi: &Mlp,
    batch: &Dataset,
    time_points: &[f64],
    k: usize,
    seed: u64,
) -> Result<ParamGrads> {
    Ok(zeta_eval(gen, phi, batch, time_points, k, seed, 1)?.1)
}

// Discriminator-side evaluation: per-record coefficients of phi in each
// residual, chained through the weight network.
pub(crate) fn zeta_eval(
    gen: &GeneratorModel,
    phi: &Mlp,
    batch: &Dataset,
    time_points: &[f64],
    k: usize,
    seed: u64,
    jobs: usize,
) -> Result<(LossReport, ParamGrads)> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if time_points.is_empty() {
        return Err(Error::InvalidParameter("need at least one time point".into()));
    }
    let n = batch.len();
    let m = time_points.len();
    let floor = 1.0 / k as f64;
    let records = batch.records();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aux: Vec<Vec<Vec<f64>>> = (0..n).map(|_| draw_aux(&mut rng, k, gen.p_u())).collect();

    // coefficients[i][j]: residual j's multiplier of phi(x_i)/n
    let coefficients = run_per_record(n, jobs, |i| -> Result<Vec<f64>> {
        let times = crate::generator::generate_times(gen, &records[i].covariates, &aux[i])?;
        let kf = k as f64;
        let own = records[i].time;
        let s_own = times.iter().filter(|&&tk| tk > own).count() as f64 / kf;
        let mut coefs = vec![0.0; m];
        for (j, &t) in time_points.iter().enumerate() {
            let s_t = times.iter().filter(|&&tk| tk > t).count() as f64 / kf;
            let mut c = s_t;
            if records[i].time > t {
                c -= 1.0;
            } else if !records[i].event {
                c -= s_t / s_own.max(floor);
            }
            coefs[j] = c;
        }
        Ok(coefs)
    })?;

    let phi_values = eval_phi(phi, batch)?;
    let nf = n as f64;
    let mf = m as f64;
    let mut residuals = vec![0.0; m];
    for (j, r) in residuals.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            acc += coefficients[i][j] * phi_values[i];
        }
        *r = acc / nf;
    }
    let report = LossReport::from_residuals(residuals.clone());

    // dC/dphi_i = (2/m) sum_j r_j c_ij / n, then backward through the net.
    let mut grads = ParamGrads::zeros_like(phi);
    for (i, r) in records.iter().enumerate() {
        let mut upstream = 0.0;
        for j in 0..m {
            upstream += residuals[j] * coefficients[i][j];
        }
        upstream *= 2.0 / (mf * nf);
        if upstream == 0.0 {
            continue;
        }
        let (_, cache) = phi.forward(&r.covariates)?;
        let (g, _) = phi.backward(&cache, upstream)?;
        for l in 0..grads.weights.len() {
            for (acc, v) in grads.weights[l].iter_mut().zip(&g.weights[l]) {
                *acc += v;
            }
            for (acc, v) in grads.biases[l].iter_mut().zip(&g.biases[l]) {
                *acc += v;
            }
        }
    }
    Ok((report, grads))
}

/// Residuals of an arbitrary conditional survival law over a full dataset,
/// evaluated without materializing the record-by-record table. Useful when
/// both the batch and the time grid are large.
pub fn streaming_residuals(
    records: &[Record],
    time_points: &[f64],
    phi_values: &[f64],
    survival: impl Fn(f64, &[f64]) -> f64,
    guard: DenomGuard,
) -> Result<LossReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if phi_values.len() != records.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} weight values for {} records",
            phi_values.len(),
            records.len()
        )));
    }
    let n = records.len() as f64;
    let denom: Vec<f64> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.event {
                Ok(1.0)
            } else {
                guard.apply(survival(r.time, &r.covariates), &format!("record {}", i))
            }
        })
        .collect::<Result<_>>()?;
    let mut residuals = Vec::with_capacity(time_points.len());
    for &t in time_points {
        let mut acc = 0.0;
        for (i, r) in records.iter().enumerate() {
            let s_t = survival(t, &r.covariates);
            let mut c = s_t;
            if r.time > t {
                c -= 1.0;
            } else if !r.event {
                c -= s_t / denom[i];
            }
            acc += c * phi_values[i];
        }
        residuals.push(acc / n);
    }
    Ok(LossReport::from_residuals(residuals))
}

pub(crate) fn eval_phi(phi: &Mlp, batch: &Dataset) -> Result<Vec<f64>> {
    batch
        .records()
        .iter()
        .map(|r| phi.forward(&r.covariates).map(|(v, _)| v))
        .collect()
}

// Runs a per-index closure, optionally on a few threads, always reducing in
// index order so the result is identical for every thread count.
pub(crate) fn run_per_record<T, F>(n: usize, jobs: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if jobs <= 1 || n <= 1 {
        return (0..n).map(&work).collect();
    }
    let jobs = jobs.min(n);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(Vec::with_capacity(n));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = work(i);
                results.lock().unwrap().push((i, out));
            });
        }
    });
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(i, _)| *i);
    collected.into_iter().map(|(_, r)| r).collect()
}

/// Samples `count` distinct indices from `0..n` without replacement,
/// deterministic in the rng state.
pub(crate) fn sample_without_replacement(
    rng: &mut ChaCha8Rng,
    n: usize,
    count: usize,
) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = i + (rng.next_u64() as usize) % (n - i);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}
