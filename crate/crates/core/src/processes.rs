//! Seeded simulators for the example processes.
//!
//! All state spaces are subsets of `[0, 1]` with `d(x, y) = |x - y|`.
//! Simulators start from (an approximation of) the stationary law and are
//! driven by an [`Innovations`] source, so a `(model, n, seed)` triple always
//! yields the same trajectory.

use std::collections::VecDeque;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{DependenceProfile, ProfileKind};
use crate::coefficients::{self, WeightSequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Innovations, SimRng};

/// Tail weight below which shift and memory models are truncated by default.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

/// Burn-in target: initial-condition bias at most `2^-52`.
const BURN_IN_BITS: f64 = 52.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "variant",
    rename_all = "snake_case",
    deny_unknown_fields,
    from = "StrictModel"
)]
pub enum ProcessModel {
    /// `X_t = U_t`, iid Uniform[0, 1].
    IidUniform,
    /// `X_t = (X_{t-1} + xi_t) / 2` with fair bits `xi_t`; time-reversed
    /// orbit of `x -> 2x mod 1`.
    DoublingMap,
    /// `X_t = kappa X_{t-1} + (1 - kappa) U_t`.
    LipschitzKernelChain { kappa: f64 },
    /// `X_t = (1 - theta) sum_{i < M} theta^i U_{t-i}`.
    BernoulliShiftGeometric {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
    /// `X_t = sum_{j <= M} a_j X_{t-j} + (1 - sum_{j <= M} a_j) U_t`.
    InfiniteMemoryChain {
        weights: WeightSequence,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
}

/// Mirror of [`ProcessModel`] whose unit variants are empty structs, so that
/// stray keys next to the tag are rejected.
#[derive(Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
enum StrictModel {
    IidUniform {},
    DoublingMap {},
    LipschitzKernelChain {
        kappa: f64,
    },
    BernoulliShiftGeometric {
        theta: f64,
        #[serde(default)]
        truncation: Option<usize>,
    },
    InfiniteMemoryChain {
        weights: WeightSequence,
        #[serde(default)]
        truncation: Option<usize>,
    },
}

impl From<StrictModel> for ProcessModel {
    fn from(raw: StrictModel) -> Self {
        match raw {
            StrictModel::IidUniform {} => ProcessModel::IidUniform,
            StrictModel::DoublingMap {} => ProcessModel::DoublingMap,
            StrictModel::LipschitzKernelChain { kappa } => {
                ProcessModel::LipschitzKernelChain { kappa }
            }
            StrictModel::BernoulliShiftGeometric { theta, truncation } => {
                ProcessModel::BernoulliShiftGeometric { theta, truncation }
            }
            StrictModel::InfiniteMemoryChain {
                weights,
                truncation,
            } => ProcessModel::InfiniteMemoryChain {
                weights,
                truncation,
            },
        }
    }
}

impl ProcessModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::IidUniform | ProcessModel::DoublingMap => Ok(()),
            ProcessModel::LipschitzKernelChain { kappa } => {
                if *kappa > 0.0 && *kappa < 1.0 {
                    Ok(())
                } else {
                    Err(Error::domain("kappa", *kappa, "0 < kappa < 1"))
                }
            }
            ProcessModel::BernoulliShiftGeometric { theta, truncation } => {
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::domain("theta", *theta, "0 < theta < 1"));
                }
                check_truncation(*truncation)
            }
            ProcessModel::InfiniteMemoryChain {
                weights,
                truncation,
            } => {
                weights.check()?;
                let total = weights.total();
                if total >= 1.0 {
                    return Err(Error::ContractionViolation { total });
                }
                check_truncation(*truncation)
            }
        }
    }

    /// Weights `a_i` of the shift representation, or the Lipschitz
    /// coefficients of the memory recursion.
    pub fn weights(&self) -> Option<WeightSequence> {
        match self {
            ProcessModel::BernoulliShiftGeometric { theta, .. } => {
                // a_i = (1 - theta) theta^(i - 1)
                Some(WeightSequence::Geometric {
                    scale: (1.0 - theta) / theta,
                    ratio: *theta,
                })
            }
            ProcessModel::InfiniteMemoryChain { weights, .. } => Some(weights.clone()),
            _ => None,
        }
    }

    /// Number of retained lags for shift and memory models.
    pub fn truncation(&self) -> Option<usize> {
        match self {
            ProcessModel::BernoulliShiftGeometric { truncation, .. }
            | ProcessModel::InfiniteMemoryChain { truncation, .. } => {
                Some(truncation.unwrap_or_else(|| {
                    self.weights()
                        .expect("shift models carry weights")
                        .truncation_for(DEFAULT_TRUNCATION_TOLERANCE)
                }))
            }
            _ => None,
        }
    }

    /// Weight discarded by the truncation, `sum_{i > M} a_i`.
    pub fn truncation_error(&self) -> f64 {
        match (self.weights(), self.truncation()) {
            (Some(w), Some(m)) => w.tail_sum(m + 1),
            _ => 0.0,
        }
    }

    /// Stationary mean of `X_t`.
    pub fn stationary_mean(&self) -> f64 {
        match self {
            ProcessModel::BernoulliShiftGeometric { theta, .. } => {
                let m = self.truncation().unwrap_or(1);
                (1.0 - theta.powi(m as i32)) / 2.0
            }
            _ => 0.5,
        }
    }

    /// Whether `X_t` is exactly Uniform[0, 1] under the stationary law.
    pub fn has_uniform_marginal(&self) -> bool {
        matches!(self, ProcessModel::IidUniform | ProcessModel::DoublingMap)
    }

    /// Dependence profile of length `n` certified by the model.
    ///
    /// Every model here admits an L-infinity coupling, so the profiles are
    /// tagged `LinfType` and also serve as phi-type profiles.
    pub fn dependence_profile(&self, n: usize) -> Result<DependenceProfile> {
        self.validate()?;
        match self {
            ProcessModel::IidUniform => Ok(DependenceProfile::zeros(n, ProfileKind::LinfType)),
            ProcessModel::DoublingMap => coefficients::doubling_map_profile(n),
            ProcessModel::LipschitzKernelChain { kappa } => {
                coefficients::markov_contraction_profile(*kappa, n)
            }
            ProcessModel::BernoulliShiftGeometric { theta, .. } => {
                // |X_i - X*_i| <= theta^(i - j), so the coupled block sum over
                // lags r..2r-1 is at most theta^r / (1 - theta) = C sum_{i >= r} a_i.
                let c = theta / (1.0 - theta);
                coefficients::bernoulli_shift_linf_profile(c, &self.weights().unwrap(), n)
            }
            ProcessModel::InfiniteMemoryChain { weights, .. } => {
                coefficients::infinite_memory_profile(weights, n)
            }
        }
    }

    /// Short identifier used in reports.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn check_truncation(truncation: Option<usize>) -> Result<()> {
    match truncation {
        Some(0) => Err(Error::Precondition("truncation must be at least 1".into())),
        _ => Ok(()),
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessModel::IidUniform => f.write_str("iid-uniform"),
            ProcessModel::DoublingMap => f.write_str("doubling-map"),
            ProcessModel::LipschitzKernelChain { kappa } => write!(f, "lipschitz-kernel:{kappa}"),
            ProcessModel::BernoulliShiftGeometric { theta, truncation } => match truncation {
                Some(m) => write!(f, "bernoulli-shift:{theta}:{m}"),
                None => write!(f, "bernoulli-shift:{theta}"),
            },
            ProcessModel::InfiniteMemoryChain {
                weights,
                truncation,
            } => {
                match weights {
                    WeightSequence::Geometric { scale, ratio } => {
                        write!(f, "infinite-memory:{scale}:{ratio}")?
                    }
                    other => write!(f, "infinite-memory[{other}]")?,
                }
                if let Some(m) = truncation {
                    write!(f, ":{m}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses the compact CLI syntax:
///
/// ```text
/// iid-uniform
/// doubling-map
/// lipschitz-kernel:KAPPA
/// bernoulli-shift:THETA[:M]
/// infinite-memory:SCALE:RATIO[:M]     (a_j = SCALE * RATIO^j)
/// ```
impl FromStr for ProcessModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let float = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::config("model", format!("`{s}` is missing parameter {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::config("model", format!("`{s}`: {e}")))
        };
        let truncation = |i: usize| -> Result<Option<usize>> {
            parts
                .get(i)
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|e| Error::config("model", format!("`{s}`: {e}")))
                })
                .transpose()
        };
        let expect_len = |lo: usize, hi: usize| -> Result<()> {
            if parts.len() < lo || parts.len() > hi {
                Err(Error::config(
                    "model",
                    format!("`{s}` has the wrong number of parameters"),
                ))
            } else {
                Ok(())
            }
        };
        let model = match parts[0] {
            "iid-uniform" | "iid" => {
                expect_len(1, 1)?;
                ProcessModel::IidUniform
            }
            "doubling-map" | "doubling" => {
                expect_len(1, 1)?;
                ProcessModel::DoublingMap
            }
            "lipschitz-kernel" | "kernel" => {
                expect_len(2, 2)?;
                ProcessModel::LipschitzKernelChain { kappa: float(1)? }
            }
            "bernoulli-shift" | "shift" => {
                expect_len(2, 3)?;
                ProcessModel::BernoulliShiftGeometric {
                    theta: float(1)?,
                    truncation: truncation(2)?,
                }
            }
            "infinite-memory" | "memory" => {
                expect_len(3, 4)?;
                ProcessModel::InfiniteMemoryChain {
                    weights: WeightSequence::Geometric {
                        scale: float(1)?,
                        ratio: float(2)?,
                    },
                    truncation: truncation(3)?,
                }
            }
            other => return Err(Error::config("model", format!("unknown model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Clone, Debug)]
enum State {
    Iid {
        x: f64,
    },
    Doubling {
        x: f64,
    },
    Kernel {
        kappa: f64,
        x: f64,
    },
    Shift {
        /// `coeffs[i] = (1 - theta) theta^i`
        coeffs: Vec<f64>,
        /// Newest innovation at the back.
        window: VecDeque<f64>,
        x: f64,
    },
    Memory {
        /// `lags[j - 1] = a_j`
        lags: Vec<f64>,
        innovation_weight: f64,
        /// Newest state at the back.
        history: VecDeque<f64>,
    },
}

/// A running simulation of one process path.
#[derive(Clone, Debug)]
pub struct Simulator {
    state: State,
}

impl Simulator {
    /// Draws `X_0` from the stationary law (or a burned-in approximation).
    pub fn start<I: Innovations>(model: &ProcessModel, src: &mut I) -> Result<Self> {
        model.validate()?;
        let state = match model {
            ProcessModel::IidUniform => State::Iid { x: src.uniform() },
            ProcessModel::DoublingMap => {
                // X_0 = sum_{j=0}^{63} xi_{-j} 2^-(j+1), exactly Uniform to 64 bits.
                let bits = src.bits64();
                State::Doubling {
                    x: bits as f64 * (1.0 / 18_446_744_073_709_551_616.0),
                }
            }
            ProcessModel::LipschitzKernelChain { kappa } => {
                let mut state = State::Kernel {
                    kappa: *kappa,
                    x: 0.5,
                };
                for _ in 0..burn_in_steps(*kappa) {
                    step_state(&mut state, src);
                }
                state
            }
            ProcessModel::BernoulliShiftGeometric { theta, .. } => {
                let m = model.truncation().unwrap();
                let coeffs: Vec<f64> = (0..m)
                    .map(|i| (1.0 - theta) * theta.powi(i as i32))
                    .collect();
                let window: VecDeque<f64> = (0..m).map(|_| src.uniform()).collect();
                let x = shift_value(&coeffs, &window);
                State::Shift { coeffs, window, x }
            }
            ProcessModel::InfiniteMemoryChain { weights, .. } => {
                let m = model.truncation().unwrap();
                let lags: Vec<f64> = (1..=m).map(|j| weights.term(j)).collect();
                let retained: f64 = lags.iter().sum();
                let mut state = State::Memory {
                    lags,
                    innovation_weight: 1.0 - retained,
                    history: vec![0.5; m].into(),
                };
                // Errors contract by a factor `retained` every m steps.
                let rounds = if retained > 0.0 {
                    burn_in_steps(retained)
                } else {
                    1
                };
                for _ in 0..rounds * m {
                    step_state(&mut state, src);
                }
                state
            }
        };
        Ok(Self { state })
    }

    pub fn current(&self) -> f64 {
        match &self.state {
            State::Iid { x }
            | State::Doubling { x }
            | State::Kernel { x, .. }
            | State::Shift { x, .. } => *x,
            State::Memory { history, .. } => *history.back().unwrap(),
        }
    }

    /// Advances one step and returns the new state.
    pub fn step<I: Innovations>(&mut self, src: &mut I) -> f64 {
        step_state(&mut self.state, src)
    }
}

fn burn_in_steps(contraction: f64) -> usize {
    (BURN_IN_BITS * LN_2 / (1.0 / contraction).ln()).ceil() as usize
}

fn shift_value(coeffs: &[f64], window: &VecDeque<f64>) -> f64 {
    let x: f64 = coeffs
        .iter()
        .zip(window.iter().rev())
        .map(|(c, u)| c * u)
        .sum();
    x.clamp(0.0, 1.0)
}

fn step_state<I: Innovations>(state: &mut State, src: &mut I) -> f64 {
    match state {
        State::Iid { x } => {
            *x = src.uniform();
            *x
        }
        State::Doubling { x } => {
            let bit = if src.bit() { 1.0 } else { 0.0 };
            *x = 0.5 * (*x + bit);
            *x
        }
        State::Kernel { kappa, x } => {
            *x = (*kappa * *x + (1.0 - *kappa) * src.uniform()).clamp(0.0, 1.0);
            *x
        }
        State::Shift { coeffs, window, x } => {
            window.pop_front();
            window.push_back(src.uniform());
            *x = shift_value(coeffs, window);
            *x
        }
        State::Memory {
            lags,
            innovation_weight,
            history,
        } => {
            let memory: f64 = lags
                .iter()
                .zip(history.iter().rev())
                .map(|(a, x)| a * x)
                .sum();
            let next = (memory + *innovation_weight * src.uniform()).clamp(0.0, 1.0);
            history.pop_front();
            history.push_back(next);
            next
        }
    }
}

/// Stationary draw of `X_0` for `seed`.
pub fn stationary_init(model: &ProcessModel, seed: u64) -> Result<f64> {
    let mut rng = SimRng::new(seed);
    Ok(Simulator::start(model, &mut rng)?.current())
}

/// `X_1, ..., X_n` from a stationary start.
pub fn simulate(model: &ProcessModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = SimRng::new(seed);
    simulate_with(model, n, &mut rng)
}

pub fn simulate_with<I: Innovations>(
    model: &ProcessModel,
    n: usize,
    src: &mut I,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Precondition(
            "trajectory length n must be positive".into(),
        ));
    }
    let mut sim = Simulator::start(model, src)?;
    Ok((0..n).map(|_| sim.step(src)).collect())
}

/// A block of a path and of its coupled copy.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledBlock {
    /// Split index: innovations up to `j` differ, later ones are shared.
    pub j: usize,
    /// Half-length: the block covers indices `r + j ..= 2r + j - 1`.
    pub r: usize,
    pub original: Vec<f64>,
    pub starred: Vec<f64>,
    pub distance_sum: f64,
}

impl CoupledBlock {
    /// First index covered by the block.
    pub fn first_index(&self) -> usize {
        self.r + self.j
    }

    /// Writes `i,x_i,x_star_i,dist` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "x_i", "x_star_i", "dist"])?;
        for (offset, (x, xs)) in self.original.iter().zip(&self.starred).enumerate() {
            w.write_record([
                (self.first_index() + offset).to_string(),
                x.to_string(),
                xs.to_string(),
                (x - xs).abs().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the coupled pair for split `j` and half-length `r` within a
/// horizon of `horizon` observations.
pub fn simulate_coupled_block(
    model: &ProcessModel,
    j: usize,
    r: usize,
    horizon: usize,
    seed: u64,
) -> Result<CoupledBlock> {
    let mut original = SimRng::new(derive_seed(seed, 0));
    let mut starred = SimRng::new(derive_seed(seed, 1));
    let shared = SimRng::new(derive_seed(seed, 2));
    simulate_coupled_block_with(model, j, r, horizon, &mut original, &mut starred, shared)
}

/// Like [`simulate_coupled_block`] with explicit innovation sources: the
/// original path uses `original` up to `j`, the copy uses `starred`, and
/// both consume identical draws from `shared` afterwards.
pub fn simulate_coupled_block_with<A, B, S>(
    model: &ProcessModel,
    j: usize,
    r: usize,
    horizon: usize,
    original: &mut A,
    starred: &mut B,
    shared: S,
) -> Result<CoupledBlock>
where
    A: Innovations,
    B: Innovations,
    S: Innovations + Clone,
{
    if j == 0 || r == 0 {
        return Err(Error::Precondition(
            "split index j and half-length r must be positive".into(),
        ));
    }
    let last = 2 * r + j - 1;
    if last > horizon {
        return Err(Error::OutOfRange {
            what: "2r + j - 1",
            value: last,
            max: horizon,
        });
    }
    let mut sim = Simulator::start(model, original)?;
    let mut sim_star = Simulator::start(model, starred)?;
    for _ in 0..j {
        sim.step(original);
        sim_star.step(starred);
    }
    let mut shared_a = shared.clone();
    let mut shared_b = shared;
    let mut block = Vec::with_capacity(r);
    let mut block_star = Vec::with_capacity(r);
    for t in j + 1..=last {
        let x = sim.step(&mut shared_a);
        let xs = sim_star.step(&mut shared_b);
        if t >= r + j {
            block.push(x);
            block_star.push(xs);
        }
    }
    let distance_sum = block
        .iter()
        .zip(&block_star)
        .map(|(x, xs)| (x - xs).abs())
        .sum();
    Ok(CoupledBlock {
        j,
        r,
        original: block,
        starred: block_star,
        distance_sum,
    })
}

/// Writes `t,x_t` rows for a trajectory starting at `t = 1`.
pub fn write_trajectory_csv<W: Write>(trajectory: &[f64], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_t"])?;
    for (t, x) in trajectory.iter().enumerate() {
        w.write_record([(t + 1).to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Observables from the class of 1-Lipschitz functions bounded by 1/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "id",
    rename_all = "snake_case",
    deny_unknown_fields,
    from = "StrictObservable"
)]
pub enum ObservableKind {
    /// `u - mu`
    CenteredIdentity,
    /// `cos(2 pi omega u) / (4 pi omega) - mu`
    CenteredCosine { omega: u32 },
    /// `f = 0`; degenerate case for tests.
    Zero,
}

#[derive(Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
enum StrictObservable {
    CenteredIdentity {},
    CenteredCosine { omega: u32 },
    Zero {},
}

impl From<StrictObservable> for ObservableKind {
    fn from(raw: StrictObservable) -> Self {
        match raw {
            StrictObservable::CenteredIdentity {} => ObservableKind::CenteredIdentity,
            StrictObservable::CenteredCosine { omega } => ObservableKind::CenteredCosine { omega },
            StrictObservable::Zero {} => ObservableKind::Zero,
        }
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableKind::CenteredIdentity => f.write_str("identity"),
            ObservableKind::CenteredCosine { omega } => write!(f, "cosine:{omega}"),
            ObservableKind::Zero => f.write_str("zero"),
        }
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "identity" || s == "centered-identity" => {
                Ok(ObservableKind::CenteredIdentity)
            }
            None if s == "zero" => Ok(ObservableKind::Zero),
            Some(("cosine" | "centered-cosine", omega)) => {
                let omega: u32 = omega
                    .parse()
                    .map_err(|e| Error::config("observable", format!("`{s}`: {e}")))?;
                if omega == 0 {
                    return Err(Error::config("observable", "omega must be positive"));
                }
                Ok(ObservableKind::CenteredCosine { omega })
            }
            _ => Err(Error::config(
                "observable",
                format!("unknown observable `{s}`"),
            )),
        }
    }
}

impl ObservableKind {
    fn raw(self, u: f64) -> f64 {
        match self {
            ObservableKind::CenteredIdentity => u,
            ObservableKind::CenteredCosine { omega } => {
                let w = f64::from(omega);
                (2.0 * PI * w * u).cos() / (4.0 * PI * w)
            }
            ObservableKind::Zero => 0.0,
        }
    }
}

/// An observable together with the constant that centers it under a
/// model's stationary law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableF {
    pub kind: ObservableKind,
    pub mu: f64,
    /// Whether `mu` came from simulation rather than a closed form.
    pub mu_estimated: bool,
}

impl ObservableF {
    pub fn new(kind: ObservableKind, mu: f64) -> Self {
        Self {
            kind,
            mu,
            mu_estimated: false,
        }
    }

    /// Centers `kind` for `model`, analytically when possible and otherwise
    /// from `reps` stationary draws seeded by `seed`.
    pub fn for_model(
        kind: ObservableKind,
        model: &ProcessModel,
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        model.validate()?;
        if let Some(mu) = analytic_mean(kind, model) {
            return Ok(Self::new(kind, mu));
        }
        if reps == 0 {
            return Err(Error::Precondition(
                "centering by simulation needs reps >= 1".into(),
            ));
        }
        let mut sum = 0.0;
        for rep in 0..reps {
            let mut rng = SimRng::stream(seed, rep as u64);
            let mut sim = Simulator::start(model, &mut rng)?;
            sum += kind.raw(sim.step(&mut rng));
        }
        Ok(Self {
            kind,
            mu: sum / reps as f64,
            mu_estimated: true,
        })
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match self.kind {
            ObservableKind::CenteredIdentity => 1.0,
            ObservableKind::CenteredCosine { .. } => 0.5,
            ObservableKind::Zero => 0.0,
        }
    }

    /// `f(u)`, kept inside `[-1/2, 1/2]`. The clamp is the identity on every
    /// state the models can reach and preserves the Lipschitz constant.
    pub fn eval(&self, u: f64) -> f64 {
        (self.kind.raw(u) - self.mu).clamp(-0.5, 0.5)
    }
}

impl fmt::Display for ObservableF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

/// Pointwise `f(X_t)`.
pub fn eval_observable(f: &ObservableF, trajectory: &[f64]) -> Vec<f64> {
    trajectory.iter().map(|&u| f.eval(u)).collect()
}

fn analytic_mean(kind: ObservableKind, model: &ProcessModel) -> Option<f64> {
    match kind {
        ObservableKind::Zero => Some(0.0),
        ObservableKind::CenteredIdentity => Some(model.stationary_mean()),
        ObservableKind::CenteredCosine { omega } => {
            let w = f64::from(omega);
            let s = 2.0 * PI * w;
            let mean_cos = match model {
                ProcessModel::IidUniform | ProcessModel::DoublingMap => 0.0,
                ProcessModel::LipschitzKernelChain { kappa } => {
                    // X = (1 - kappa) sum_i kappa^i U_i
                    let mut weights = Vec::new();
                    let mut c = 1.0 - kappa;
                    while c > 1e-18 {
                        weights.push(c);
                        c *= kappa;
                    }
                    weighted_uniform_sum_cf(s, &weights).0
                }
                ProcessModel::BernoulliShiftGeometric { theta, .. } => {
                    let m = model.truncation()?;
                    let weights: Vec<f64> = (0..m)
                        .map(|i| (1.0 - theta) * theta.powi(i as i32))
                        .collect();
                    weighted_uniform_sum_cf(s, &weights).0
                }
                ProcessModel::InfiniteMemoryChain { .. } => return None,
            };
            Some(mean_cos / (4.0 * PI * w))
        }
    }
}

/// Characteristic function `E exp(i s sum_k w_k U_k)` of a weighted sum of
/// independent uniforms, as `(re, im)`.
fn weighted_uniform_sum_cf(s: f64, weights: &[f64]) -> (f64, f64) {
    weights.iter().fold((1.0, 0.0), |(re, im), w| {
        let a = s * w;
        // E exp(i a U) = (e^{ia} - 1) / (ia)
        let (cre, cim) = if a.abs() < 1e-8 {
            (1.0, a / 2.0)
        } else {
            (a.sin() / a, (1.0 - a.cos()) / a)
        };
        (re * cre - im * cim, re * cim + im * cre)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ConstantInnovations;

    fn all_models() -> Vec<ProcessModel> {
        vec![
            ProcessModel::IidUniform,
            ProcessModel::DoublingMap,
            ProcessModel::LipschitzKernelChain { kappa: 0.5 },
            ProcessModel::BernoulliShiftGeometric {
                theta: 0.5,
                truncation: None,
            },
            ProcessModel::InfiniteMemoryChain {
                weights: WeightSequence::Geometric {
                    scale: 0.5,
                    ratio: 0.5,
                },
                truncation: Some(20),
            },
        ]
    }

    #[test]
    fn doubling_init_forced_bits() {
        let mut zeros = ConstantInnovations::zeros();
        let sim = Simulator::start(&ProcessModel::DoublingMap, &mut zeros).unwrap();
        assert_eq!(sim.current(), 0.0);
        let mut ones = ConstantInnovations::ones();
        let sim = Simulator::start(&ProcessModel::DoublingMap, &mut ones).unwrap();
        // 1 - 2^-64 rounds to 1.0 in binary64.
        assert_eq!(sim.current(), 1.0 - 2f64.powi(-64));
    }

    #[test]
    fn doubling_contracts_to_zero_without_innovations() {
        let mut rng = SimRng::new(11);
        let mut sim = Simulator::start(&ProcessModel::DoublingMap, &mut rng).unwrap();
        let x0 = sim.current();
        let mut zeros = ConstantInnovations::zeros();
        for t in 1..=30 {
            assert_eq!(sim.step(&mut zeros), x0 * 0.5f64.powi(t));
        }
    }

    #[test]
    fn trajectories_stay_in_unit_interval() {
        for model in all_models() {
            for seed in 0..5 {
                let path = simulate(&model, 500, seed).unwrap();
                assert_eq!(path.len(), 500);
                assert!(path.iter().all(|x| (0.0..=1.0).contains(x)), "{model}");
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        for model in all_models() {
            assert_eq!(
                simulate(&model, 200, 99).unwrap(),
                simulate(&model, 200, 99).unwrap()
            );
            assert_ne!(
                simulate(&model, 200, 99).unwrap(),
                simulate(&model, 200, 100).unwrap()
            );
        }
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(simulate(&ProcessModel::LipschitzKernelChain { kappa: 1.0 }, 5, 0).is_err());
        assert!(simulate(
            &ProcessModel::BernoulliShiftGeometric {
                theta: 0.5,
                truncation: Some(0)
            },
            5,
            0
        )
        .is_err());
        let bad = ProcessModel::InfiniteMemoryChain {
            weights: WeightSequence::Geometric {
                scale: 2.0,
                ratio: 0.5,
            },
            truncation: None,
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::ContractionViolation { .. })
        ));
        assert!(simulate(&ProcessModel::DoublingMap, 0, 0).is_err());
    }

    #[test]
    fn default_truncation() {
        let model = ProcessModel::BernoulliShiftGeometric {
            theta: 0.5,
            truncation: None,
        };
        // theta^M <= 2^-40 first at M = 40.
        assert_eq!(model.truncation(), Some(40));
        assert!(model.truncation_error() <= DEFAULT_TRUNCATION_TOLERANCE);
    }

    #[test]
    fn coupled_block_doubling_bound() {
        for r in 1..=12 {
            for seed in 0..200 {
                let block =
                    simulate_coupled_block(&ProcessModel::DoublingMap, 5, r, 100, seed).unwrap();
                assert_eq!(block.original.len(), r);
                assert!(block.distance_sum <= 0.5f64.powi(r as i32 - 1));
            }
        }
    }

    #[test]
    fn coupled_block_kernel_bound() {
        let kappa: f64 = 0.5;
        let model = ProcessModel::LipschitzKernelChain { kappa };
        for r in 1..=8 {
            let bound: f64 = (r..2 * r).map(|m| kappa.powi(m as i32)).sum();
            for seed in 0..200 {
                let block = simulate_coupled_block(&model, 3, r, 100, seed).unwrap();
                assert!(block.distance_sum <= bound + 1e-15);
            }
        }
    }

    #[test]
    fn coupled_block_identical_presplit_innovations() {
        for model in all_models() {
            let mut a = SimRng::new(5);
            let mut b = SimRng::new(5);
            let block =
                simulate_coupled_block_with(&model, 4, 3, 20, &mut a, &mut b, SimRng::new(6))
                    .unwrap();
            assert_eq!(block.distance_sum, 0.0, "{model}");
        }
    }

    #[test]
    fn coupled_block_starred_shares_post_split_innovations() {
        let model = ProcessModel::IidUniform;
        let block = simulate_coupled_block(&model, 7, 4, 50, 1).unwrap();
        assert_eq!(block.original, block.starred);
    }

    #[test]
    fn coupled_block_horizon() {
        assert!(matches!(
            simulate_coupled_block(&ProcessModel::DoublingMap, 10, 6, 20, 0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(simulate_coupled_block(&ProcessModel::DoublingMap, 9, 6, 20, 0).is_ok());
    }

    #[test]
    fn coupled_block_csv() {
        let block = simulate_coupled_block(&ProcessModel::DoublingMap, 1, 2, 10, 0).unwrap();
        let mut buf = Vec::new();
        block.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,x_i,x_star_i,dist");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("3,"));
    }

    #[test]
    fn observable_examples() {
        let f = ObservableF::for_model(
            ObservableKind::CenteredIdentity,
            &ProcessModel::DoublingMap,
            0,
            0,
        )
        .unwrap();
        assert_eq!(f.mu, 0.5);
        assert_eq!(f.eval(0.75), 0.25);
        let cos = ObservableF::for_model(
            ObservableKind::CenteredCosine { omega: 1 },
            &ProcessModel::IidUniform,
            0,
            0,
        )
        .unwrap();
        assert_eq!(cos.mu, 0.0);
        assert!((cos.eval(0.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn observables_respect_class_bounds() {
        let mut rng = SimRng::new(1);
        for kind in [
            ObservableKind::CenteredIdentity,
            ObservableKind::CenteredCosine { omega: 1 },
            ObservableKind::CenteredCosine { omega: 3 },
        ] {
            for model in all_models() {
                let f = ObservableF::for_model(kind, &model, 1000, 3).unwrap();
                for _ in 0..2000 {
                    let u = rng.uniform();
                    let v = rng.uniform();
                    assert!(f.eval(u).abs() <= 0.5);
                    assert!(
                        (f.eval(u) - f.eval(v)).abs()
                            <= (u - v).abs() * f.lipschitz_constant() + 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn kernel_cosine_centering_matches_simulation() {
        let model = ProcessModel::LipschitzKernelChain { kappa: 0.6 };
        let kind = ObservableKind::CenteredCosine { omega: 1 };
        let analytic = ObservableF::for_model(kind, &model, 0, 0).unwrap();
        assert!(!analytic.mu_estimated);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let reps = 40_000;
        for rep in 0..reps {
            let x = stationary_init(&model, derive_seed(17, rep)).unwrap();
            let g = kind.raw(x);
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / reps as f64;
        let se = ((sum_sq / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!(
            (mean - analytic.mu).abs() < 4.0 * se,
            "{mean} vs {}",
            analytic.mu
        );
    }

    #[test]
    fn memory_cosine_centering_is_estimated() {
        let model = ProcessModel::InfiniteMemoryChain {
            weights: WeightSequence::Geometric {
                scale: 0.5,
                ratio: 0.5,
            },
            truncation: Some(20),
        };
        let f = ObservableF::for_model(ObservableKind::CenteredCosine { omega: 1 }, &model, 500, 2)
            .unwrap();
        assert!(f.mu_estimated);
        assert!(
            ObservableF::for_model(ObservableKind::CenteredCosine { omega: 1 }, &model, 0, 2)
                .is_err()
        );
    }

    #[test]
    fn model_syntax_round_trips() {
        for text in [
            "iid-uniform",
            "doubling-map",
            "lipschitz-kernel:0.5",
            "bernoulli-shift:0.3",
            "bernoulli-shift:0.3:25",
            "infinite-memory:0.5:0.5",
            "infinite-memory:0.5:0.5:30",
        ] {
            let model: ProcessModel = text.parse().unwrap();
            assert_eq!(model.to_string(), text);
        }
        assert!("lipschitz-kernel".parse::<ProcessModel>().is_err());
        assert!("lipschitz-kernel:1.5".parse::<ProcessModel>().is_err());
        assert!("warp-drive".parse::<ProcessModel>().is_err());
        assert!("doubling-map:3".parse::<ProcessModel>().is_err());
    }

    #[test]
    fn model_json_round_trips() {
        for model in all_models() {
            let text = serde_json::to_string(&model).unwrap();
            let back: ProcessModel = serde_json::from_str(&text).unwrap();
            assert_eq!(back, model);
        }
        let err = serde_json::from_str::<ProcessModel>(r#"{"variant":"doubling_map","extra":1}"#);
        assert!(err.is_err());
        let err = serde_json::from_str::<ProcessModel>(
            r#"{"variant":"lipschitz_kernel_chain","kappa":0.5,"x":1}"#,
        );
        assert!(err.is_err());
        let err = serde_json::from_str::<ObservableKind>(r#"{"id":"centered_identity","omega":3}"#);
        assert!(err.is_err());
        let ok = serde_json::from_str::<ObservableKind>(r#"{"id":"centered_cosine","omega":3}"#)
            .unwrap();
        assert_eq!(ok, ObservableKind::CenteredCosine { omega: 3 });
    }

    #[test]
    fn observable_syntax() {
        assert_eq!(
            "identity".parse::<ObservableKind>().unwrap(),
            ObservableKind::CenteredIdentity
        );
        assert_eq!(
            "cosine:2".parse::<ObservableKind>().unwrap(),
            ObservableKind::CenteredCosine { omega: 2 }
        );
        assert!("cosine:0".parse::<ObservableKind>().is_err());
        assert!("square".parse::<ObservableKind>().is_err());
    }

    #[test]
    fn model_profiles_are_valid() {
        for model in all_models() {
            let p = model.dependence_profile(200).unwrap();
            assert_eq!(p.n(), 200);
            assert_eq!(p.kind(), ProfileKind::LinfType);
        }
    }
}
