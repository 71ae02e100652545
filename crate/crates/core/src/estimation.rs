//! Monte Carlo estimators with uncertainty quantification.
//!
//! Replications are grouped into fixed chunks of [`CHUNK`] consecutive
//! indices. Chunks may run on any worker, but their partial results are
//! always merged in chunk order, and replication `i` always draws from
//! stream [`derive_seed`]`(seed, i)`. Estimates are therefore bit-identical
//! for any number of workers.

use std::io::Write;

use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::bounds::{VarianceProfile, VarianceSource};
use crate::error::{Error, Result};
use crate::processes::{
    simulate_coupled_block, ObservableF, ObservableKind, ProcessModel, Simulator,
};
use crate::rng::{derive_seed, SimRng};

/// Replications per work unit.
pub const CHUNK: usize = 512;

/// Default two-sided level for confidence intervals.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// A pool of worker threads for replication loops.
pub struct Workers {
    pool: Option<rayon::ThreadPool>,
    threads: usize,
}

impl Workers {
    /// `threads == 0` selects the number of logical processors.
    pub fn new(threads: usize) -> Result<Self> {
        let threads = if threads == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            threads
        };
        if threads == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Workers(e.to_string()))?;
        Ok(Self {
            pool: Some(pool),
            threads,
        })
    }

    pub fn sequential() -> Self {
        Self {
            pool: None,
            threads: 1,
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Evaluates `f` on every chunk of `0..reps`, returning results in chunk
    /// order.
    pub fn map_chunks<T, F>(&self, reps: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    {
        let chunks: Vec<std::ops::Range<usize>> = (0..reps)
            .step_by(CHUNK)
            .map(|start| start..(start + CHUNK).min(reps))
            .collect();
        match &self.pool {
            None => chunks.into_iter().map(f).collect(),
            Some(pool) => pool.install(|| chunks.into_par_iter().map(f).collect()),
        }
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers")
            .field("threads", &self.threads)
            .finish()
    }
}

/// Running central moments up to order four, mergeable across chunks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.count;
        self.count += 1.0;
        let n = self.count;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = *other;
            return;
        }
        let na = self.count;
        let nb = other.count;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.count = n;
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn mean_std_error(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.sample_variance() / self.count).sqrt()
    }

    /// Standard error of [`Moments::sample_variance`] from the fourth
    /// central moment: `Var(s^2) ~ (mu_4 - (n - 3)/(n - 1) s^4) / n`.
    pub fn variance_std_error(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        let n = self.count;
        let s2 = self.sample_variance();
        let mu4 = self.m4 / n;
        ((mu4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n)
            .max(0.0)
            .sqrt()
    }
}

fn merge_all<'a>(parts: impl IntoIterator<Item = &'a Moments>) -> Moments {
    let mut total = Moments::default();
    for m in parts {
        total.merge(m);
    }
    total
}

/// Monte Carlo estimate of `sigma_k^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaEstimate {
    pub k: usize,
    pub sigma_sq_hat: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// Estimates `sigma_k^2 = Var(sum_{i<=k} f(X_i)) / k` for each `k` in
/// `k_list` from `reps` independent stationary trajectories.
///
/// Replication `i` simulates one trajectory of length `max(k_list)`; its
/// first `k` terms give the length-`k` block sum.
pub fn estimate_sigma_profile(
    model: &ProcessModel,
    f: &ObservableF,
    k_list: &[usize],
    reps: usize,
    seed: u64,
    workers: &Workers,
) -> Result<Vec<SigmaEstimate>> {
    if reps < 2 {
        return Err(Error::Precondition(format!(
            "variance estimation needs reps >= 2, got {reps}"
        )));
    }
    if k_list.contains(&0) {
        return Err(Error::Precondition("block lengths must be positive".into()));
    }
    model.validate()?;
    let Some(&max_k) = k_list.iter().max() else {
        return Ok(Vec::new());
    };
    // `want[k - 1]` marks the block lengths to record.
    let mut want = vec![false; max_k];
    for &k in k_list {
        want[k - 1] = true;
    }
    let wanted: Vec<usize> = (1..=max_k).filter(|&k| want[k - 1]).collect();

    let parts = workers.map_chunks(reps, |range| -> Result<Vec<Moments>> {
        let mut moments = vec![Moments::default(); wanted.len()];
        for rep in range {
            let mut rng = SimRng::new(derive_seed(seed, rep as u64));
            let mut sim = Simulator::start(model, &mut rng)?;
            let mut block_sum = 0.0;
            let mut slot = 0;
            for k in 1..=max_k {
                block_sum += f.eval(sim.step(&mut rng));
                if want[k - 1] {
                    moments[slot].push(block_sum);
                    slot += 1;
                }
            }
        }
        Ok(moments)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;

    let by_k: Vec<SigmaEstimate> = wanted
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let m = merge_all(parts.iter().map(|p| &p[slot]));
            let kf = k as f64;
            SigmaEstimate {
                k,
                sigma_sq_hat: m.sample_variance() / kf,
                std_error: m.variance_std_error() / kf,
                reps,
            }
        })
        .collect();
    Ok(k_list
        .iter()
        .map(|k| {
            *by_k
                .iter()
                .find(|e| e.k == *k)
                .expect("every k was recorded")
        })
        .collect())
}

/// Closed-form `sigma_k^2` of `f(u) = u - 1/2` under the doubling map.
///
/// `Cov(X_0, X_r) = 2^-r / 12`, and summing the covariances of a
/// length-`k` block gives `(1/12)(3 - (4 - 2^(2-k)) / k)`.
pub fn doubling_identity_sigma_sq(k: usize) -> f64 {
    assert!(k >= 1, "block length must be positive");
    let kf = k as f64;
    (3.0 - (4.0 - 2f64.powi(2 - k as i32)) / kf) / 12.0
}

/// Limit of [`doubling_identity_sigma_sq`] as `k` grows.
pub const DOUBLING_IDENTITY_LIMIT_VARIANCE: f64 = 0.25;

/// Variance profile in closed form, when the model/observable pair has one.
pub fn analytic_sigma_profile(
    model: &ProcessModel,
    f: &ObservableF,
    n: usize,
) -> Option<VarianceProfile> {
    let sigma_sq: Vec<f64> = match (model, f.kind) {
        (_, ObservableKind::Zero) => vec![0.0; n],
        (ProcessModel::IidUniform, ObservableKind::CenteredIdentity) => vec![1.0 / 12.0; n],
        (ProcessModel::DoublingMap, ObservableKind::CenteredIdentity) => {
            (1..=n).map(doubling_identity_sigma_sq).collect()
        }
        _ => return None,
    };
    VarianceProfile::new(sigma_sq, VarianceSource::Analytic).ok()
}

/// Estimated variance profile for `k = 1..=n`, clipped to the `k/4` cap.
pub fn estimated_sigma_profile(
    model: &ProcessModel,
    f: &ObservableF,
    n: usize,
    reps: usize,
    seed: u64,
    workers: &Workers,
) -> Result<VarianceProfile> {
    let k_list: Vec<usize> = (1..=n).collect();
    let estimates = estimate_sigma_profile(model, f, &k_list, reps, seed, workers)?;
    let sigma_sq = estimates
        .iter()
        .map(|e| e.sigma_sq_hat.min(e.k as f64 / 4.0))
        .collect();
    VarianceProfile::new(sigma_sq, VarianceSource::Estimated)
}

/// Empirical tail probability `P(S(f) >= threshold)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEstimate {
    pub threshold: f64,
    pub hits: u64,
    pub reps: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
}

/// Two-sided Clopper-Pearson interval for `hits` successes in `reps`
/// trials at level `1 - alpha`.
pub fn clopper_pearson(hits: u64, reps: u64, alpha: f64) -> Result<(f64, f64)> {
    if reps == 0 || hits > reps {
        return Err(Error::Precondition(format!("invalid counts {hits}/{reps}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha", alpha, "0 < alpha < 1"));
    }
    let half = alpha / 2.0;
    let n = reps as f64;
    let k = hits as f64;
    let low = if hits == 0 {
        0.0
    } else if hits == reps {
        half.powf(1.0 / n)
    } else {
        // P(Bin(n, p) >= k) = I_p(k, n - k + 1) is increasing in p.
        solve_increasing(|p| beta_reg(k, n - k + 1.0, p), half)
    };
    let high = if hits == reps {
        1.0
    } else if hits == 0 {
        1.0 - half.powf(1.0 / n)
    } else {
        // P(Bin(n, p) <= k) = 1 - I_p(k + 1, n - k) is decreasing in p.
        solve_increasing(|p| beta_reg(k + 1.0, n - k, p), 1.0 - half)
    };
    Ok((low.min(k / n), high.max(k / n)))
}

/// Bisection for `g(p) = target` with `g` increasing on `[0, 1]`.
fn solve_increasing(g: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `S(f) = f(X_1) + ... + f(X_n)` for replication `rep`.
fn partial_sum(
    model: &ProcessModel,
    f: &ObservableF,
    n: usize,
    seed: u64,
    rep: usize,
) -> Result<f64> {
    let mut rng = SimRng::new(derive_seed(seed, rep as u64));
    let mut sim = Simulator::start(model, &mut rng)?;
    Ok((0..n).map(|_| f.eval(sim.step(&mut rng))).sum())
}

/// Tail estimates for several thresholds from one shared set of `reps`
/// trajectories of length `n`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tails(
    model: &ProcessModel,
    f: &ObservableF,
    n: usize,
    thresholds: &[f64],
    reps: usize,
    seed: u64,
    alpha: f64,
    workers: &Workers,
) -> Result<Vec<TailEstimate>> {
    if reps == 0 {
        return Err(Error::Precondition(
            "tail estimation needs reps >= 1".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Precondition(
            "sample length n must be positive".into(),
        ));
    }
    if let Some(t) = thresholds.iter().find(|t| t.is_nan()) {
        return Err(Error::domain("threshold", *t, "a number"));
    }
    model.validate()?;
    let parts = workers.map_chunks(reps, |range| -> Result<Vec<u64>> {
        let mut hits = vec![0u64; thresholds.len()];
        for rep in range {
            let s = partial_sum(model, f, n, seed, rep)?;
            for (h, &t) in hits.iter_mut().zip(thresholds) {
                if s >= t {
                    *h += 1;
                }
            }
        }
        Ok(hits)
    });
    let mut hits = vec![0u64; thresholds.len()];
    for part in parts {
        for (h, p) in hits.iter_mut().zip(part?) {
            *h += p;
        }
    }
    thresholds
        .iter()
        .zip(hits)
        .map(|(&threshold, hits)| {
            let (ci_low, ci_high) = clopper_pearson(hits, reps as u64, alpha)?;
            Ok(TailEstimate {
                threshold,
                hits,
                reps: reps as u64,
                p_hat: hits as f64 / reps as f64,
                ci_low,
                ci_high,
                alpha,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_tail(
    model: &ProcessModel,
    f: &ObservableF,
    n: usize,
    threshold: f64,
    reps: usize,
    seed: u64,
    alpha: f64,
    workers: &Workers,
) -> Result<TailEstimate> {
    Ok(estimate_tails(model, f, n, &[threshold], reps, seed, alpha, workers)?[0])
}

/// Largest coupled-block distance observed for one `(r, j)` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingEstimate {
    pub r: usize,
    pub j: usize,
    pub reps: usize,
    pub max_distance_sum: f64,
}

impl CouplingEstimate {
    /// Empirical lower witness for `delta'_r`.
    pub fn delta_witness(&self) -> f64 {
        self.max_distance_sum / self.r as f64
    }
}

/// Maximum coupled-block distance over `reps` replications for every
/// `(r, j)` pair. The horizon defaults to the smallest one that fits every
/// block.
pub fn estimate_coupling_delta(
    model: &ProcessModel,
    r_list: &[usize],
    j_list: &[usize],
    reps: usize,
    horizon: Option<usize>,
    seed: u64,
    workers: &Workers,
) -> Result<Vec<CouplingEstimate>> {
    if reps == 0 {
        return Err(Error::Precondition(
            "coupling estimation needs reps >= 1".into(),
        ));
    }
    model.validate()?;
    let needed =
        r_list.iter().max().copied().unwrap_or(0) * 2 + j_list.iter().max().copied().unwrap_or(0);
    let horizon = horizon.unwrap_or(needed.saturating_sub(1).max(1));
    let mut out = Vec::with_capacity(r_list.len() * j_list.len());
    for &r in r_list {
        for &j in j_list {
            let pair_seed = derive_seed(derive_seed(seed, r as u64), j as u64);
            let parts = workers.map_chunks(reps, |range| -> Result<f64> {
                let mut max = 0.0f64;
                for rep in range {
                    let block = simulate_coupled_block(
                        model,
                        j,
                        r,
                        horizon,
                        derive_seed(pair_seed, rep as u64),
                    )?;
                    max = max.max(block.distance_sum);
                }
                Ok(max)
            });
            let mut max_distance_sum = 0.0f64;
            for part in parts {
                max_distance_sum = max_distance_sum.max(part?);
            }
            out.push(CouplingEstimate {
                r,
                j,
                reps,
                max_distance_sum,
            });
        }
    }
    Ok(out)
}

/// Largest [`CouplingEstimate::delta_witness`] per `r`, over all split
/// points, in order of first appearance.
pub fn coupling_witness_by_r(estimates: &[CouplingEstimate]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for e in estimates {
        match out.iter_mut().find(|(r, _)| *r == e.r) {
            Some((_, w)) => *w = w.max(e.delta_witness()),
            None => out.push((e.r, e.delta_witness())),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// `E|f(X_1)|` under the stationary law.
pub fn estimate_mean_abs_f(
    model: &ProcessModel,
    f: &ObservableF,
    reps: usize,
    seed: u64,
    workers: &Workers,
) -> Result<MeanEstimate> {
    if reps < 2 {
        return Err(Error::Precondition(format!(
            "mean estimation needs reps >= 2, got {reps}"
        )));
    }
    model.validate()?;
    let parts = workers.map_chunks(reps, |range| -> Result<Moments> {
        let mut m = Moments::default();
        for rep in range {
            let mut rng = SimRng::new(derive_seed(seed, rep as u64));
            let mut sim = Simulator::start(model, &mut rng)?;
            m.push(f.eval(sim.step(&mut rng)).abs());
        }
        Ok(m)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let m = merge_all(&parts);
    Ok(MeanEstimate {
        mean: m.mean(),
        std_error: m.mean_std_error(),
        reps,
    })
}

/// One output line of the estimation commands.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRow {
    pub model: String,
    pub f: String,
    pub k_or_n: usize,
    pub statistic: &'static str,
    pub estimate: f64,
    pub se_or_ci_low: f64,
    pub ci_high: Option<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl EstimateRow {
    pub fn sigma(model: &ProcessModel, f: &ObservableF, e: &SigmaEstimate, seed: u64) -> Self {
        Self {
            model: model.label(),
            f: f.to_string(),
            k_or_n: e.k,
            statistic: "sigma_sq",
            estimate: e.sigma_sq_hat,
            se_or_ci_low: e.std_error,
            ci_high: None,
            reps: e.reps,
            seed,
        }
    }

    pub fn tail(
        model: &ProcessModel,
        f: &ObservableF,
        n: usize,
        e: &TailEstimate,
        seed: u64,
    ) -> Self {
        Self {
            model: model.label(),
            f: f.to_string(),
            k_or_n: n,
            statistic: "tail_probability",
            estimate: e.p_hat,
            se_or_ci_low: e.ci_low,
            ci_high: Some(e.ci_high),
            reps: e.reps as usize,
            seed,
        }
    }
}

/// Writes estimation rows with the header
/// `model,f,k_or_n,statistic,estimate,se_or_ci_low,ci_high,reps,seed`.
pub fn write_estimate_rows<W: Write>(rows: &[EstimateRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "f",
        "k_or_n",
        "statistic",
        "estimate",
        "se_or_ci_low",
        "ci_high",
        "reps",
        "seed",
    ])?;
    for row in rows {
        w.write_record([
            row.model.clone(),
            row.f.clone(),
            row.k_or_n.to_string(),
            row.statistic.to_string(),
            row.estimate.to_string(),
            row.se_or_ci_low.to_string(),
            row.ci_high.map(|c| c.to_string()).unwrap_or_default(),
            row.reps.to_string(),
            row.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Innovations;

    fn identity_for(model: &ProcessModel) -> ObservableF {
        ObservableF::for_model(ObservableKind::CenteredIdentity, model, 0, 0).unwrap()
    }

    /// Brute-force covariance sum: `Var(X_1 + ... + X_k) = sum_{i,j} 2^-|i-j| / 12`.
    fn doubling_sigma_oracle(k: usize) -> f64 {
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                total += 0.5f64.powi((i as i32 - j as i32).abs()) / 12.0;
            }
        }
        total / k as f64
    }

    #[test]
    fn doubling_closed_form_matches_covariance_sum() {
        for k in 1..=64 {
            assert!(
                (doubling_identity_sigma_sq(k) - doubling_sigma_oracle(k)).abs() < 1e-14,
                "k = {k}"
            );
        }
        assert!((doubling_identity_sigma_sq(5) - 0.185_416_666_666_666_66).abs() < 1e-15);
        assert!((doubling_identity_sigma_sq(1) - 1.0 / 12.0).abs() < 1e-16);
        assert!(
            (doubling_identity_sigma_sq(100_000) - DOUBLING_IDENTITY_LIMIT_VARIANCE).abs() < 1e-4
        );
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let mut rng = SimRng::new(4);
        let data: Vec<f64> = (0..3001).map(|_| rng.uniform().powi(3)).collect();
        let mut whole = Moments::default();
        data.iter().for_each(|&x| whole.push(x));
        let mut merged = Moments::default();
        for chunk in data.chunks(97) {
            let mut part = Moments::default();
            chunk.iter().for_each(|&x| part.push(x));
            merged.merge(&part);
        }
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let m2: f64 = data.iter().map(|x| (x - mean).powi(2)).sum();
        let m4: f64 = data.iter().map(|x| (x - mean).powi(4)).sum();
        for m in [whole, merged] {
            assert_eq!(m.count(), data.len());
            assert!((m.mean() - mean).abs() < 1e-14);
            assert!((m.m2 - m2).abs() < 1e-10);
            assert!((m.m4 - m4).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_estimates_iid() {
        let model = ProcessModel::IidUniform;
        let f = identity_for(&model);
        let est =
            estimate_sigma_profile(&model, &f, &[1, 3, 10], 20_000, 1, &Workers::sequential())
                .unwrap();
        assert_eq!(est.iter().map(|e| e.k).collect::<Vec<_>>(), vec![1, 3, 10]);
        for e in est {
            assert!(e.std_error > 0.0);
            assert!(
                (e.sigma_sq_hat - 1.0 / 12.0).abs() < 4.0 * e.std_error,
                "{e:?}"
            );
        }
    }

    #[test]
    fn sigma_estimate_rejects_single_rep() {
        let model = ProcessModel::IidUniform;
        let f = identity_for(&model);
        assert!(estimate_sigma_profile(&model, &f, &[1], 1, 0, &Workers::sequential()).is_err());
        assert!(estimate_sigma_profile(&model, &f, &[0], 10, 0, &Workers::sequential()).is_err());
    }

    #[test]
    fn sigma_standard_error_shrinks_like_root_reps() {
        let model = ProcessModel::DoublingMap;
        let f = identity_for(&model);
        let w = Workers::sequential();
        let small = estimate_sigma_profile(&model, &f, &[5], 5_000, 3, &w).unwrap()[0];
        let large = estimate_sigma_profile(&model, &f, &[5], 20_000, 3, &w).unwrap()[0];
        let ratio = small.std_error / large.std_error;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 100_000, 0.01).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.005f64.powf(1e-5))).abs() < 1e-15);
        let (lo, hi) = clopper_pearson(10, 10, 0.01).unwrap();
        assert_eq!(hi, 1.0);
        assert!((lo - 0.005f64.powf(0.1)).abs() < 1e-15);
        assert!(clopper_pearson(3, 2, 0.01).is_err());
        assert!(clopper_pearson(0, 0, 0.01).is_err());
        assert!(clopper_pearson(1, 2, 0.0).is_err());
    }

    /// `P(Bin(n, p) <= k)` by direct summation.
    fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
        let mut log_choose = 0.0f64;
        let mut total = 0.0;
        for i in 0..=k {
            if i > 0 {
                log_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
            }
            total += (log_choose + i as f64 * p.ln() + (n - i) as f64 * (-p).ln_1p()).exp();
        }
        total
    }

    #[test]
    fn clopper_pearson_inverts_binomial_tails() {
        for &(k, n) in &[(1u64, 10u64), (3, 20), (50, 100), (7, 1000)] {
            let (lo, hi) = clopper_pearson(k, n, 0.05).unwrap();
            assert!(
                (binomial_cdf(k, n, hi) - 0.025).abs() < 1e-9,
                "upper {k}/{n}"
            );
            assert!(
                (1.0 - binomial_cdf(k - 1, n, lo) - 0.025).abs() < 1e-9,
                "lower {k}/{n}"
            );
        }
    }

    #[test]
    fn tail_trivial_thresholds() {
        let model = ProcessModel::DoublingMap;
        let f = identity_for(&model);
        let w = Workers::sequential();
        let tails = estimate_tails(&model, &f, 50, &[25.1, -50.0], 300, 8, 0.01, &w).unwrap();
        assert_eq!(tails[0].hits, 0);
        assert_eq!(tails[0].p_hat, 0.0);
        assert_eq!(tails[1].p_hat, 1.0);
        for t in tails {
            assert!(
                0.0 <= t.ci_low && t.ci_low <= t.p_hat && t.p_hat <= t.ci_high && t.ci_high <= 1.0
            );
        }
    }

    #[test]
    fn estimates_independent_of_worker_count() {
        let model = ProcessModel::LipschitzKernelChain { kappa: 0.7 };
        let f = identity_for(&model);
        let one = Workers::sequential();
        let many = Workers::new(4).unwrap();
        let a = estimate_sigma_profile(&model, &f, &[1, 7, 30], 3_000, 5, &one).unwrap();
        let b = estimate_sigma_profile(&model, &f, &[1, 7, 30], 3_000, 5, &many).unwrap();
        assert_eq!(a, b);
        let a = estimate_tails(&model, &f, 100, &[0.0, 2.0], 2_000, 5, 0.01, &one).unwrap();
        let b = estimate_tails(&model, &f, 100, &[0.0, 2.0], 2_000, 5, 0.01, &many).unwrap();
        assert_eq!(a, b);
        let a = estimate_mean_abs_f(&model, &f, 2_000, 5, &one).unwrap();
        let b = estimate_mean_abs_f(&model, &f, 2_000, 5, &many).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupling_examples() {
        let w = Workers::sequential();
        let est = estimate_coupling_delta(
            &ProcessModel::DoublingMap,
            &[3],
            &[1, 10],
            2_000,
            None,
            9,
            &w,
        )
        .unwrap();
        assert_eq!(est.len(), 2);
        for e in &est {
            assert!(e.max_distance_sum <= 0.25);
            assert!(e.max_distance_sum > 0.0);
        }
        let kernel = ProcessModel::LipschitzKernelChain { kappa: 0.5 };
        let est = estimate_coupling_delta(&kernel, &[2], &[1, 5], 2_000, None, 9, &w).unwrap();
        assert!(est.iter().all(|e| e.max_distance_sum <= 0.375));
        let by_r = coupling_witness_by_r(&est);
        assert_eq!(by_r.len(), 1);
        assert_eq!(by_r[0].0, 2);
    }

    #[test]
    fn mean_abs_zero_observable() {
        let model = ProcessModel::DoublingMap;
        let f = ObservableF::new(ObservableKind::Zero, 0.0);
        let m = estimate_mean_abs_f(&model, &f, 100, 1, &Workers::sequential()).unwrap();
        assert_eq!(m.mean, 0.0);
    }

    #[test]
    fn analytic_profiles() {
        let doubling = ProcessModel::DoublingMap;
        let p = analytic_sigma_profile(&doubling, &identity_for(&doubling), 10).unwrap();
        assert_eq!(p.source(), VarianceSource::Analytic);
        assert!((p.sigma_sq(5) - 0.185_416_666_666_666_66).abs() < 1e-15);
        let kernel = ProcessModel::LipschitzKernelChain { kappa: 0.5 };
        assert!(analytic_sigma_profile(&kernel, &identity_for(&kernel), 10).is_none());
    }

    #[test]
    fn estimate_rows_csv() {
        let model = ProcessModel::IidUniform;
        let f = identity_for(&model);
        let e = SigmaEstimate {
            k: 2,
            sigma_sq_hat: 0.08,
            std_error: 0.001,
            reps: 10,
        };
        let mut buf = Vec::new();
        write_estimate_rows(&[EstimateRow::sigma(&model, &f, &e, 3)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "model,f,k_or_n,statistic,estimate,se_or_ci_low,ci_high,reps,seed\n\
             iid-uniform,identity,2,sigma_sq,0.08,0.001,,10,3\n"
        );
    }
}
