//! Closed-form deviation bounds.
//!
//! Everything here is a pure function of its arguments. Indices follow the
//! usual 1-based convention of the formulas: `delta(r)` is the coefficient
//! at lag `r`, `sigma_sq(k)` the variance per unit length of a block of `k`
//! consecutive terms.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, Error, Result};

/// Tolerance used when checking that a profile is non-increasing.
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

/// Which coupling condition a dependence profile certifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Uniform bound on the phi-coefficients between past and future blocks.
    PhiType,
    /// Almost-sure bound on the coupled block distance; implies `PhiType`.
    LinfType,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::PhiType => "phi_type",
            ProfileKind::LinfType => "linf_type",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated sequence `1 >= delta_1 >= delta_2 >= ... >= delta_n >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceProfile {
    delta: Vec<f64>,
    kind: ProfileKind,
}

impl DependenceProfile {
    /// Clips `raw` to `[0, 1]` and checks that it is non-increasing.
    ///
    /// The error names the first lag that increases by more than
    /// [`MONOTONE_TOLERANCE`].
    pub fn validate(raw: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Precondition(
                "profile must have n >= 1 entries".into(),
            ));
        }
        let mut delta = raw;
        for (i, d) in delta.iter_mut().enumerate() {
            if d.is_nan() {
                return Err(Error::InvalidEntry {
                    index: i + 1,
                    reason: "NaN coefficient".into(),
                });
            }
            *d = d.clamp(0.0, 1.0);
        }
        for r in 1..delta.len() {
            if delta[r] > delta[r - 1] + MONOTONE_TOLERANCE {
                return Err(Error::NonMonotone {
                    index: r + 1,
                    value: delta[r],
                    previous: delta[r - 1],
                });
            }
        }
        Ok(Self { delta, kind })
    }

    pub fn zeros(n: usize, kind: ProfileKind) -> Self {
        Self {
            delta: vec![0.0; n.max(1)],
            kind,
        }
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Coefficient at lag `r` (1-based).
    ///
    /// # Panics
    ///
    /// If `r == 0` or `r > n`.
    pub fn delta(&self, r: usize) -> f64 {
        assert!(r >= 1 && r <= self.delta.len(), "lag {r} out of range");
        self.delta[r - 1]
    }

    /// The coefficients for lags `1..=n`.
    pub fn as_slice(&self) -> &[f64] {
        &self.delta
    }

    /// Reinterpret as a phi-type profile (an L-infinity coupling bound is
    /// also a phi-coefficient bound).
    pub fn as_phi_type(&self) -> Self {
        Self {
            delta: self.delta.clone(),
            kind: ProfileKind::PhiType,
        }
    }

    /// Restrict to the first `n` lags.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n() {
            return Err(Error::OutOfRange {
                what: "n",
                value: n,
                max: self.n(),
            });
        }
        Ok(Self {
            delta: self.delta[..n].to_vec(),
            kind: self.kind,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    Analytic,
    Estimated,
}

impl fmt::Display for VarianceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceSource::Analytic => "analytic",
            VarianceSource::Estimated => "estimated",
        })
    }
}

/// Block variances `sigma_k^2 = Var(X_1 + ... + X_k) / k` for `k = 1..=n`
/// together with their suffix-maximum envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceProfile {
    sigma_sq: Vec<f64>,
    envelope: Vec<f64>,
    source: VarianceSource,
}

impl VarianceProfile {
    /// Checks `0 <= sigma_k^2 <= k/4` (any observable bounded by 1/2 obeys
    /// this) and fills in the envelope.
    pub fn new(sigma_sq: Vec<f64>, source: VarianceSource) -> Result<Self> {
        if sigma_sq.is_empty() {
            return Err(Error::Precondition(
                "variance profile must have n >= 1 entries".into(),
            ));
        }
        for (i, &s) in sigma_sq.iter().enumerate() {
            let k = (i + 1) as f64;
            if !(s >= 0.0) {
                return Err(Error::InvalidEntry {
                    index: i + 1,
                    reason: format!("sigma_sq = {s} is negative or NaN"),
                });
            }
            if s > k / 4.0 * (1.0 + 1e-12) {
                return Err(Error::InvalidEntry {
                    index: i + 1,
                    reason: format!("sigma_sq = {s} exceeds k/4 = {}", k / 4.0),
                });
            }
        }
        let envelope = variance_envelope(&sigma_sq);
        Ok(Self {
            sigma_sq,
            envelope,
            source,
        })
    }

    /// Same variance at every block length.
    pub fn constant(value: f64, n: usize, source: VarianceSource) -> Result<Self> {
        Self::new(vec![value; n], source)
    }

    pub fn n(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn source(&self) -> VarianceSource {
        self.source
    }

    /// `sigma_k^2` (1-based).
    pub fn sigma_sq(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.n(), "block length {k} out of range");
        self.sigma_sq[k - 1]
    }

    /// `max_{k <= j <= n} sigma_j^2` (1-based).
    pub fn envelope(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.n(), "block length {k} out of range");
        self.envelope[k - 1]
    }

    pub fn sigma_sq_slice(&self) -> &[f64] {
        &self.sigma_sq
    }

    pub fn envelope_slice(&self) -> &[f64] {
        &self.envelope
    }
}

/// Suffix maximum of `sigma_sq`, computed in a single backward pass.
pub fn variance_envelope(sigma_sq: &[f64]) -> Vec<f64> {
    let mut envelope = sigma_sq.to_vec();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    envelope
}

/// Outcome of a block-size selector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockSelection {
    Selected {
        k: usize,
        /// Envelope value at `k` for the phi-type bound, plain block variance
        /// at `k` for the coupling bound.
        variance_at_k: f64,
    },
    /// The selection inequality fails for every `k <= n`.
    NoValidBlockSize,
}

impl BlockSelection {
    pub fn k(&self) -> Option<usize> {
        match *self {
            BlockSelection::Selected { k, .. } => Some(k),
            BlockSelection::NoValidBlockSize => None,
        }
    }

    pub fn variance_at_k(&self) -> Option<f64> {
        match *self {
            BlockSelection::Selected { variance_at_k, .. } => Some(variance_at_k),
            BlockSelection::NoValidBlockSize => None,
        }
    }

    fn require(&self) -> Result<(usize, f64)> {
        match *self {
            BlockSelection::Selected { k, variance_at_k } => Ok((k, variance_at_k)),
            BlockSelection::NoValidBlockSize => Err(Error::NoValidBlockSize),
        }
    }
}

/// Bennett's rate function `h(x) = (1 + x) ln(1 + x) - x`.
pub fn bennett_h(x: f64) -> Result<f64> {
    let x = non_negative("x", x)?;
    if x < 1e-3 {
        // sum_{m >= 2} (-1)^m x^m / (m (m - 1)); the first term is x^2 / 2.
        let mut term = x * x;
        let mut sum = 0.0;
        for m in 2..12 {
            let mf = m as f64;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * term / (mf * (mf - 1.0));
            term *= x;
        }
        return Ok(sum);
    }
    Ok((1.0 + x) * x.ln_1p() - x)
}

/// Bernstein's rate function `h1(x) = 1 + x - sqrt(1 + 2x)`.
pub fn bernstein_h1(x: f64) -> Result<f64> {
    let x = non_negative("x", x)?;
    // (1 + x)^2 - (1 + 2x) = x^2, so this form has no cancellation.
    Ok(x * x / (1.0 + x + (1.0 + 2.0 * x).sqrt()))
}

/// `h1^{-1}(y) = sqrt(2y) + y`.
pub fn h1_inverse(y: f64) -> Result<f64> {
    let y = non_negative("y", y)?;
    Ok((2.0 * y).sqrt() + y)
}

/// Deviation level `sqrt(2 n sigma_1^2 x) + x / 6` exceeded with probability
/// at most `e^{-x}` by a sum of `n` independent centered terms bounded by 1/2.
pub fn iid_bernstein_threshold(n: usize, sigma1_sq: f64, x: f64) -> Result<f64> {
    check_n(n)?;
    let sigma1_sq = non_negative("sigma1_sq", sigma1_sq)?;
    let x = non_negative("x", x)?;
    Ok(clamp_round_off(
        (2.0 * n as f64 * sigma1_sq * x).sqrt() + x / 6.0,
    ))
}

/// Hoeffding-type level `sqrt(1/2 * sum_{j=1}^n (1 + 2 (n - j) phi_j)^2 * x)`.
///
/// `phi[j - 1]` is the phi-coefficient between the past up to `j` and the
/// remaining future; entries beyond `n - 1` are ignored and the `j = n`
/// summand is always 1.
pub fn hoeffding_threshold(n: usize, phi: &[f64], x: f64) -> Result<f64> {
    check_n(n)?;
    let x = non_negative("x", x)?;
    if phi.len() + 1 < n {
        return Err(Error::LengthMismatch {
            left: "phi",
            left_len: phi.len(),
            right: "n - 1",
            right_len: n - 1,
        });
    }
    let mut total = 0.0;
    for j in 1..=n {
        let factor = if j == n {
            1.0
        } else {
            let p = phi[j - 1];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidEntry {
                    index: j,
                    reason: format!("phi = {p} outside [0, 1]"),
                });
            }
            1.0 + 2.0 * (n - j) as f64 * p
        };
        total += factor * factor;
    }
    Ok(clamp_round_off((0.5 * total * x).sqrt()))
}

/// Smallest `k` with `k * delta_k <= envelope_k`.
pub fn select_k_star(
    delta: &DependenceProfile,
    variance: &VarianceProfile,
) -> Result<BlockSelection> {
    if delta.n() != variance.n() {
        return Err(Error::LengthMismatch {
            left: "delta",
            left_len: delta.n(),
            right: "variance",
            right_len: variance.n(),
        });
    }
    let found = (1..=delta.n()).find(|&k| k as f64 * delta.delta(k) <= variance.envelope(k));
    Ok(match found {
        Some(k) => BlockSelection::Selected {
            k,
            variance_at_k: variance.envelope(k),
        },
        None => BlockSelection::NoValidBlockSize,
    })
}

/// Smallest `k` with `n * delta'_k <= k * x`, where `n` is the variance
/// profile's length. The selection depends on `x`; the same `x` must be
/// passed to [`thm2_threshold`].
pub fn select_k_star_prime(
    delta_prime: &DependenceProfile,
    variance: &VarianceProfile,
    x: f64,
) -> Result<BlockSelection> {
    if delta_prime.kind() != ProfileKind::LinfType {
        return Err(Error::KindMismatch {
            expected: ProfileKind::LinfType.as_str(),
            found: delta_prime.kind().as_str(),
        });
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("x", x, "x > 0"));
    }
    if delta_prime.n() != variance.n() {
        return Err(Error::LengthMismatch {
            left: "delta_prime",
            left_len: delta_prime.n(),
            right: "variance",
            right_len: variance.n(),
        });
    }
    let n = variance.n() as f64;
    let found = (1..=variance.n()).find(|&k| n * delta_prime.delta(k) <= k as f64 * x);
    Ok(match found {
        Some(k) => BlockSelection::Selected {
            k,
            variance_at_k: variance.sigma_sq(k),
        },
        None => BlockSelection::NoValidBlockSize,
    })
}

/// `5.8 sqrt(n sigma_bar^2_{k*} x) + 1.5 k* x`, the level exceeded with
/// probability at most `e^{-x}` under a phi-type profile.
pub fn thm1_threshold(n: usize, selection: &BlockSelection, x: f64) -> Result<f64> {
    check_n(n)?;
    let (k, envelope) = selection.require()?;
    let x = non_negative("x", x)?;
    let envelope = non_negative("envelope_at_k_star", envelope)?;
    Ok(clamp_round_off(
        5.8 * (n as f64 * envelope * x).sqrt() + 1.5 * k as f64 * x,
    ))
}

/// Bennett-type tail bound
/// `exp(-(2 n sigma_k^2 / k^2) h(k (x - n delta'_k) / (2 n sigma_k^2)))`,
/// valid for `x >= n delta'_k`.
///
/// A zero variance is handled by continuity: the bound is 1 at
/// `x = n delta'_k` and 0 beyond.
pub fn thm2_bennett_tail(
    n: usize,
    k: usize,
    sigma_k_sq: f64,
    delta_prime_k: f64,
    x: f64,
) -> Result<f64> {
    check_n(n)?;
    check_k(k, n)?;
    let sigma_k_sq = non_negative("sigma_k_sq", sigma_k_sq)?;
    let delta_prime_k = non_negative("delta_prime_k", delta_prime_k)?;
    if x.is_nan() {
        return Err(Error::domain("x", x, "a number"));
    }
    let nf = n as f64;
    let kf = k as f64;
    let shift = nf * delta_prime_k;
    if x < shift {
        return Err(Error::Precondition(format!(
            "x = {x} is below n * delta'_k = {shift}"
        )));
    }
    let excess = x - shift;
    if sigma_k_sq == 0.0 {
        return Ok(if excess > 0.0 { 0.0 } else { 1.0 });
    }
    let scale = 2.0 * nf * sigma_k_sq;
    let exponent = scale / (kf * kf) * bennett_h(kf * excess / scale)?;
    Ok((-exponent).exp().clamp(0.0, 1.0))
}

/// `2 sqrt(n sigma^2_{k*'} x) + 1.34 k*' x`, the level exceeded with
/// probability at most `e^{-x}` under an L-infinity coupling profile.
pub fn thm2_threshold(n: usize, selection: &BlockSelection, x: f64) -> Result<f64> {
    check_n(n)?;
    let (k, sigma_sq) = selection.require()?;
    let x = non_negative("x", x)?;
    let sigma_sq = non_negative("sigma_sq_at_k_star_prime", sigma_sq)?;
    Ok(clamp_round_off(
        2.0 * (n as f64 * sigma_sq * x).sqrt() + 1.34 * k as f64 * x,
    ))
}

/// Upper bound `sigma_1^2 + 2 E|f(X_1)| sum_{r=1}^{k-1} delta_r` on the block
/// variance `sigma_k^2`.
pub fn varest_bound(
    sigma1_sq: f64,
    mean_abs_f: f64,
    delta: &DependenceProfile,
    k: usize,
) -> Result<f64> {
    let sigma1_sq = non_negative("sigma1_sq", sigma1_sq)?;
    let mean_abs_f = non_negative("mean_abs_f", mean_abs_f)?;
    if mean_abs_f > 0.5 {
        return Err(Error::domain("mean_abs_f", mean_abs_f, "mean_abs_f <= 1/2"));
    }
    check_k(k, delta.n())?;
    let lag_sum: f64 = delta.as_slice()[..k - 1].iter().sum();
    Ok(sigma1_sq + 2.0 * mean_abs_f * lag_sum)
}

/// Block length `min(floor(1/t), n)` used with [`log_mgf_bound_thm1`].
pub fn chernoff_block_len(t: f64, n: usize) -> Result<usize> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, "0 <= t <= 1"));
    }
    if t == 0.0 {
        return Ok(n);
    }
    Ok(((1.0 / t).floor() as usize).clamp(1, n))
}

/// Bound `4 n t^2 (2 (e - 2) sigma_k^2 + e k delta_k)` on the log moment
/// generating function `ln E exp(t S)` under a phi-type profile, for
/// `0 <= t <= 1` and `k` chosen by [`chernoff_block_len`].
pub fn log_mgf_bound_thm1(
    t: f64,
    n: usize,
    k: usize,
    sigma_k_sq: f64,
    delta_k: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, "0 <= t <= 1"));
    }
    check_n(n)?;
    check_k(k, n)?;
    let sigma_k_sq = non_negative("sigma_k_sq", sigma_k_sq)?;
    let delta_k = non_negative("delta_k", delta_k)?;
    Ok(4.0 * n as f64 * t * t * (2.0 * (E - 2.0) * sigma_k_sq + E * k as f64 * delta_k))
}

/// Bound `(2 n sigma_k^2 / k^2)(e^{kt} - kt - 1) + n delta'_k t` on
/// `ln E exp(t S)` under an L-infinity coupling profile, for `t >= 0`.
pub fn log_mgf_bound_thm2(
    t: f64,
    n: usize,
    k: usize,
    sigma_k_sq: f64,
    delta_prime_k: f64,
) -> Result<f64> {
    let t = non_negative("t", t)?;
    check_n(n)?;
    check_k(k, n)?;
    let sigma_k_sq = non_negative("sigma_k_sq", sigma_k_sq)?;
    let delta_prime_k = non_negative("delta_prime_k", delta_prime_k)?;
    let nf = n as f64;
    let kf = k as f64;
    let kt = kf * t;
    // exp_m1 keeps e^{kt} - 1 - kt accurate for small kt.
    let curvature = kt.exp_m1() - kt;
    Ok(2.0 * nf * sigma_k_sq / (kf * kf) * curvature + nf * delta_prime_k * t)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("n must be positive".into()));
    }
    Ok(())
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            max: n,
        });
    }
    Ok(())
}

fn clamp_round_off(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}
