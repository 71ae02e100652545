//! Dependence profiles for the example process families.
//!
//! Each constructor turns model parameters into a validated
//! [`DependenceProfile`] of length `n`. Formulas of the form
//! `r * delta_r = g(r)` are divided through by `r` and clipped to `[0, 1]`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{DependenceProfile, ProfileKind};
use crate::error::{Error, Result};

/// Cut-off after which power-law tails are bounded by an integral.
const POWER_LAW_EXPLICIT_TERMS: usize = 4096;

/// Nonnegative weights `a_1, a_2, ...` with a closed-form (or rigorously
/// upper-bounded) tail sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSequence {
    /// `a_j = scale * ratio^j`.
    Geometric { scale: f64, ratio: f64 },
    /// `a_j = scale * j^(-exponent)`.
    PowerLaw { scale: f64, exponent: f64 },
    /// `a_j = terms[j - 1]`, zero beyond the last term.
    Finite { terms: Vec<f64> },
}

impl WeightSequence {
    pub fn geometric(scale: f64, ratio: f64) -> Result<Self> {
        let w = WeightSequence::Geometric { scale, ratio };
        w.check()?;
        Ok(w)
    }

    pub fn power_law(scale: f64, exponent: f64) -> Result<Self> {
        let w = WeightSequence::PowerLaw { scale, exponent };
        w.check()?;
        Ok(w)
    }

    pub fn finite(terms: Vec<f64>) -> Result<Self> {
        let w = WeightSequence::Finite { terms };
        w.check()?;
        Ok(w)
    }

    /// Rejects negative scales and non-summable sequences.
    pub fn check(&self) -> Result<()> {
        match self {
            WeightSequence::Geometric { scale, ratio } => {
                if !(*scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::domain("scale", *scale, "finite scale >= 0"));
                }
                if !(0.0..1.0).contains(ratio) {
                    return Err(Error::DivergentWeights(format!(
                        "geometric ratio {ratio} is not in [0, 1)"
                    )));
                }
            }
            WeightSequence::PowerLaw { scale, exponent } => {
                if !(*scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::domain("scale", *scale, "finite scale >= 0"));
                }
                if !(*exponent > 1.0) {
                    return Err(Error::DivergentWeights(format!(
                        "power-law exponent {exponent} must exceed 1"
                    )));
                }
            }
            WeightSequence::Finite { terms } => {
                if let Some((i, a)) = terms
                    .iter()
                    .enumerate()
                    .find(|(_, a)| !(**a >= 0.0) || !a.is_finite())
                {
                    return Err(Error::InvalidEntry {
                        index: i + 1,
                        reason: format!("weight {a} is not a finite nonnegative number"),
                    });
                }
            }
        }
        Ok(())
    }

    /// `a_j` for `j >= 1`.
    pub fn term(&self, j: usize) -> f64 {
        assert!(j >= 1, "weights are indexed from 1");
        match self {
            WeightSequence::Geometric { scale, ratio } => scale * ratio.powi(j as i32),
            WeightSequence::PowerLaw { scale, exponent } => scale * (j as f64).powf(-exponent),
            WeightSequence::Finite { terms } => terms.get(j - 1).copied().unwrap_or(0.0),
        }
    }

    /// `sum_{i >= p} a_i` for `p >= 1`. Exact for geometric and finite
    /// weights, an upper bound for power laws.
    pub fn tail_sum(&self, p: usize) -> f64 {
        let p = p.max(1);
        match self {
            WeightSequence::Geometric { scale, ratio } => {
                scale * ratio.powi(p as i32) / (1.0 - ratio)
            }
            WeightSequence::PowerLaw { scale, exponent } => {
                let cutoff = p + POWER_LAW_EXPLICIT_TERMS;
                let explicit: f64 = (p..cutoff).map(|i| (i as f64).powf(-exponent)).sum();
                // sum_{i >= N} i^-s <= N^-s + N^(1-s) / (s - 1)
                let nf = cutoff as f64;
                let remainder = nf.powf(-exponent) + nf.powf(1.0 - exponent) / (exponent - 1.0);
                scale * (explicit + remainder)
            }
            WeightSequence::Finite { terms } => terms.iter().skip(p - 1).sum(),
        }
    }

    /// `a(F) = sum_{j >= 1} a_j`.
    pub fn total(&self) -> f64 {
        self.tail_sum(1)
    }

    /// Smallest `m` whose tail `sum_{i > m} a_i` is at most `tolerance`.
    pub fn truncation_for(&self, tolerance: f64) -> usize {
        match self {
            WeightSequence::Finite { terms } => terms.len().max(1),
            _ => {
                let mut m = 1;
                while self.tail_sum(m + 1) > tolerance && m < 1 << 20 {
                    m += 1;
                }
                m
            }
        }
    }
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSequence::Geometric { scale, ratio } => write!(f, "geometric({scale},{ratio})"),
            WeightSequence::PowerLaw { scale, exponent } => {
                write!(f, "power_law({scale},{exponent})")
            }
            WeightSequence::Finite { terms } => write!(f, "finite({} terms)", terms.len()),
        }
    }
}

/// Expected modulus of continuity `eta -> E[w_H(U_0, eta)]`.
pub type ModulusMean = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Regularity data for a Bernoulli shift driven by a mixing innovation
/// process.
#[derive(Clone)]
pub struct ShiftRegularity {
    /// `phi[m - 1]` is the innovation mixing coefficient at lag `m`.
    pub phi: Vec<f64>,
    /// `v[k - 1]` bounds the effect of replacing innovations older than `k`.
    pub v: Vec<f64>,
    pub modulus_mean: ModulusMean,
}

impl ShiftRegularity {
    pub fn new(phi: Vec<f64>, v: Vec<f64>, modulus_mean: ModulusMean) -> Result<Self> {
        for (name, seq) in [("phi", &phi), ("v", &v)] {
            for (i, &x) in seq.iter().enumerate() {
                if !(x >= 0.0) {
                    return Err(Error::InvalidEntry {
                        index: i + 1,
                        reason: format!("{name} = {x} is negative or NaN"),
                    });
                }
                if i > 0 && x > seq[i - 1] + crate::bounds::MONOTONE_TOLERANCE {
                    return Err(Error::NonMonotone {
                        index: i + 1,
                        value: x,
                        previous: seq[i - 1],
                    });
                }
            }
        }
        Ok(Self {
            phi,
            v,
            modulus_mean,
        })
    }

    /// Lipschitz `H`: `w_H(x, eta) = slope * eta`.
    pub fn with_linear_modulus(phi: Vec<f64>, v: Vec<f64>, slope: f64) -> Result<Self> {
        Self::new(phi, v, Arc::new(move |eta| slope * eta))
    }
}

impl fmt::Debug for ShiftRegularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftRegularity")
            .field("phi", &self.phi)
            .field("v", &self.v)
            .finish_non_exhaustive()
    }
}

/// Clips to `[0, 1]` and checks monotonicity.
pub fn validate_profile(raw: Vec<f64>, kind: ProfileKind) -> Result<DependenceProfile> {
    DependenceProfile::validate(raw, kind)
}

/// `total / r`, nudged by one ulp when that makes `delta * r == total`
/// exactly.
fn per_lag(total: f64, r: usize) -> f64 {
    let rf = r as f64;
    let q = total / rf;
    [q, q.next_up(), q.next_down()]
        .into_iter()
        .find(|d| d * rf == total)
        .unwrap_or(q)
}

fn from_lag_totals(
    n: usize,
    kind: ProfileKind,
    lag_total: impl Fn(usize) -> f64,
) -> Result<DependenceProfile> {
    if n == 0 {
        return Err(Error::Precondition(
            "profile length n must be positive".into(),
        ));
    }
    let raw = (1..=n).map(|r| per_lag(lag_total(r), r).min(1.0)).collect();
    DependenceProfile::validate(raw, kind)
}

/// Doubling map: `r * delta_r = (4/9) 2^-r`. The map satisfies the
/// coupling condition with the same sequence, so the profile is tagged
/// L-infinity.
pub fn doubling_map_profile(n: usize) -> Result<DependenceProfile> {
    from_lag_totals(n, ProfileKind::LinfType, |r| {
        4.0 / 9.0 * 0.5f64.powi(r as i32)
    })
}

/// Doubling map with the almost-sure contraction bound `r * delta'_r = 2^(1-r)`
/// obtained from `|X_{j+m} - X*_{j+m}| <= 2^-m`.
pub fn doubling_map_contraction_profile(n: usize) -> Result<DependenceProfile> {
    from_lag_totals(n, ProfileKind::LinfType, |r| 0.5f64.powi(r as i32 - 1))
}

/// Expanding maps with `r * delta_r = c * rho^r`.
pub fn expanding_map_profile(c: f64, rho: f64, n: usize) -> Result<DependenceProfile> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain("C", c, "C > 0"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain("rho", rho, "0 < rho < 1"));
    }
    from_lag_totals(n, ProfileKind::PhiType, |r| c * rho.powi(r as i32))
}

/// Markov chains whose kernel maps 1-Lipschitz functions to
/// kappa-Lipschitz ones: `r * delta'_r = kappa^r (1 + kappa + ... + kappa^r)`.
pub fn markov_contraction_profile(kappa: f64, n: usize) -> Result<DependenceProfile> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain("kappa", kappa, "0 < kappa < 1"));
    }
    from_lag_totals(n, ProfileKind::LinfType, |r| {
        let geometric_sum = (1.0 - kappa.powi(r as i32 + 1)) / (1.0 - kappa);
        kappa.powi(r as i32) * geometric_sum
    })
}

/// `min_{1 <= p <= j} a^(r/p) + tail(p)` for every `j` in `1..=max_j`,
/// as a running minimum over `p`.
fn memory_prefix_minima(total: f64, weights: &WeightSequence, r: usize, max_j: usize) -> Vec<f64> {
    let mut best = f64::INFINITY;
    (1..=max_j)
        .map(|p| {
            let candidate = total.powf(r as f64 / p as f64) + weights.tail_sum(p);
            best = best.min(candidate);
            best
        })
        .collect()
}

/// Chains with infinite memory `X_t = F(X_{t-1}, X_{t-2}, ...; xi_t)` under
/// the contraction `a(F) < 1`:
/// `r * delta'_r = sum_{j=r}^{2r-1} inf_{0 < p <= j} { a(F)^(r/p) + sum_{i >= p} a_i(F) }`.
pub fn infinite_memory_profile(weights: &WeightSequence, n: usize) -> Result<DependenceProfile> {
    weights.check()?;
    let total = weights.total();
    if total >= 1.0 {
        return Err(Error::ContractionViolation { total });
    }
    from_lag_totals(n, ProfileKind::LinfType, |r| {
        let minima = memory_prefix_minima(total, weights, r, 2 * r - 1);
        minima[r - 1..].iter().sum()
    })
}

/// Bernoulli shifts with `d(H(x), H(y)) <= sum_i a_i d(x_i, y_i)`:
/// `r * delta'_r = c * sum_{i >= r} a_i`.
pub fn bernoulli_shift_linf_profile(
    c: f64,
    weights: &WeightSequence,
    n: usize,
) -> Result<DependenceProfile> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain("C", c, "C > 0"));
    }
    weights.check()?;
    from_lag_totals(n, ProfileKind::LinfType, |r| c * weights.tail_sum(r))
}

/// Bernoulli shifts of mixing innovations:
/// `delta_r = inf_{1 <= k <= r-1} { 2 phi_{r-k} + (3 E w_H(U_0, 2 v_k)) ^ 1 }`,
/// with `delta_1 = 1` for the empty infimum.
pub fn bernoulli_shift_phi_profile(reg: &ShiftRegularity, n: usize) -> Result<DependenceProfile> {
    if n == 0 {
        return Err(Error::Precondition(
            "profile length n must be positive".into(),
        ));
    }
    let needed = n - 1;
    if reg.phi.len() < needed || reg.v.len() < needed {
        return Err(Error::LengthMismatch {
            left: "phi/v",
            left_len: reg.phi.len().min(reg.v.len()),
            right: "n - 1",
            right_len: needed,
        });
    }
    // Only depends on k, so evaluate the modulus once per k.
    let memory_terms: Vec<f64> = (1..n)
        .map(|k| (3.0 * (reg.modulus_mean)(2.0 * reg.v[k - 1])).min(1.0))
        .collect();
    let raw = (1..=n)
        .map(|r| {
            (1..r)
                .map(|k| 2.0 * reg.phi[r - k - 1] + memory_terms[k - 1])
                .fold(1.0f64, f64::min)
        })
        .collect();
    DependenceProfile::validate(raw, ProfileKind::PhiType)
}

/// Writes `r,delta,kind` rows.
pub fn write_profile_csv<W: Write>(profile: &DependenceProfile, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "delta", "kind"])?;
    for (i, d) in profile.as_slice().iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            d.to_string(),
            profile.kind().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
