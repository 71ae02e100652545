//! Experiment orchestration: configuration, end-to-end verification runs
//! and CSV reports.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    self, BlockSelection, DependenceProfile, ProfileKind, VarianceProfile, VarianceSource,
};
use crate::error::{Error, Result};
use crate::estimation::{self, Workers, DEFAULT_ALPHA};
use crate::processes::{ObservableF, ObservableKind, ProcessModel};
use crate::rng::derive_seed;

/// Seed streams carved out of the base seed.
const CENTERING_STREAM: u64 = 1;
const VARIANCE_STREAM: u64 = 2;
const TAIL_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Independent Bernstein baseline with `sigma_1^2`.
    IidEq1,
    /// Phi-type profile, block size `k*`.
    Thm1,
    /// L-infinity coupling profile, block size `k*'` tied to `x`.
    Thm2,
    /// Hoeffding-type bound from the phi-coefficients of the future.
    Hoeffding,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::IidEq1 => "iid_eq1",
            Theorem::Thm1 => "thm1",
            Theorem::Thm2 => "thm2",
            Theorem::Hoeffding => "hoeffding",
        }
    }

    fn needs_variance(self) -> bool {
        !matches!(self, Theorem::Hoeffding)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "iid_eq1" | "iid" => Ok(Theorem::IidEq1),
            "thm1" => Ok(Theorem::Thm1),
            "thm2" => Ok(Theorem::Thm2),
            "hoeffding" => Ok(Theorem::Hoeffding),
            other => Err(Error::config(
                "theorem",
                format!("unknown theorem `{other}`"),
            )),
        }
    }
}

/// A single theorem or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TheoremSelection {
    One(Theorem),
    Many(Vec<Theorem>),
}

impl TheoremSelection {
    pub fn to_vec(&self) -> Vec<Theorem> {
        match self {
            TheoremSelection::One(t) => vec![*t],
            TheoremSelection::Many(ts) => ts.clone(),
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// A verification experiment, read from a JSON document with exactly these
/// fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ProcessModel,
    pub observable: ObservableKind,
    pub n: usize,
    pub x_grid: Vec<f64>,
    pub theorem: TheoremSelection,
    pub reps: usize,
    pub base_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| Error::config("model", e.to_string()))?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        if self.x_grid.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::config(
                "x_grid",
                "entries must be finite and strictly positive",
            ));
        }
        if self.x_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "x_grid",
                "entries must be strictly increasing",
            ));
        }
        if self.theorem.to_vec().is_empty() {
            return Err(Error::config("theorem", "at least one theorem is required"));
        }
        if let ObservableKind::CenteredCosine { omega: 0 } = self.observable {
            return Err(Error::config("observable", "omega must be positive"));
        }
        Ok(())
    }
}

/// Best-effort name of the offending field in a serde error message.
fn json_field(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "<document>".to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No block size satisfied the selection inequality.
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One bound checked at one deviation level `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub theorem: Theorem,
    pub x: f64,
    pub k_selected: Option<usize>,
    pub variance_used: Option<f64>,
    pub threshold: Option<f64>,
    /// `e^{-x}`
    pub bound_value: f64,
    pub p_hat: Option<f64>,
    pub ci_high: Option<f64>,
    pub verdict: Verdict,
}

impl ReportRow {
    /// Recomputes the verdict from the row's own fields.
    pub fn recomputed_verdict(&self) -> Verdict {
        match self.ci_high {
            None => Verdict::Skipped,
            Some(c) if c <= self.bound_value => Verdict::Pass,
            Some(_) => Verdict::Fail,
        }
    }
}

pub const REPORT_HEADER: [&str; 9] = [
    "theorem",
    "x",
    "k_selected",
    "variance_used",
    "threshold",
    "bound_value",
    "p_hat",
    "ci_high",
    "verdict",
];

/// Facts about a run that do not fit the per-row schema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub observable: String,
    pub n: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub alpha: f64,
    /// `None` when no theorem needed block variances.
    pub variance_source: Option<VarianceSource>,
    pub variance_estimator: Option<&'static str>,
    pub centering_mu: f64,
    pub centering_estimated: bool,
    pub truncation: Option<usize>,
    pub truncation_error: f64,
    pub profile_kind: ProfileKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub rows: Vec<ReportRow>,
    pub summary: RunSummary,
}

impl Verification {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Fail)
    }
}

/// Phi-coefficients of the whole future after `j`, read off an L-infinity
/// coupling profile.
///
/// Lags `r..2r-1` after the split contribute at most `r delta'_r`, so the
/// dyadic blocks `r = 1, 2, 4, ...` bound the total coupling distance of
/// the `n - j` future terms, and `phi_j` is that total divided by `n - j`.
pub fn hoeffding_phi_from_coupling(profile: &DependenceProfile, n: usize) -> Result<Vec<f64>> {
    if profile.kind() != ProfileKind::LinfType {
        return Err(Error::KindMismatch {
            expected: ProfileKind::LinfType.as_str(),
            found: profile.kind().as_str(),
        });
    }
    if profile.n() + 1 < n {
        return Err(Error::LengthMismatch {
            left: "profile",
            left_len: profile.n(),
            right: "n - 1",
            right_len: n.saturating_sub(1),
        });
    }
    Ok((1..n)
        .map(|j| {
            let future = n - j;
            let mut total = 0.0;
            let mut r = 1;
            while r <= future {
                total += r as f64 * profile.delta(r);
                r *= 2;
            }
            (total / future as f64).min(1.0)
        })
        .collect())
}

/// Threshold at level `x` for one theorem, before any simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannedBound {
    pub theorem: Theorem,
    pub x: f64,
    pub k_selected: Option<usize>,
    pub variance_used: Option<f64>,
    pub threshold: Option<f64>,
}

/// Thresholds for every `(theorem, x)` pair. Rows whose selector finds no
/// block size have `threshold == None`.
pub fn plan_bounds(
    theorems: &[Theorem],
    x_grid: &[f64],
    n: usize,
    profile: &DependenceProfile,
    variance: Option<&VarianceProfile>,
) -> Result<Vec<PlannedBound>> {
    let need_variance = || {
        variance.ok_or_else(|| {
            Error::Precondition("a variance profile is required for this theorem".into())
        })
    };
    let mut out = Vec::new();
    for &theorem in theorems {
        match theorem {
            Theorem::IidEq1 => {
                let sigma1 = need_variance()?.sigma_sq(1);
                for &x in x_grid {
                    out.push(PlannedBound {
                        theorem,
                        x,
                        k_selected: Some(1),
                        variance_used: Some(sigma1),
                        threshold: Some(bounds::iid_bernstein_threshold(n, sigma1, x)?),
                    });
                }
            }
            Theorem::Thm1 => {
                let selection = bounds::select_k_star(&profile.as_phi_type(), need_variance()?)?;
                for &x in x_grid {
                    out.push(planned(theorem, x, &selection, |s| {
                        bounds::thm1_threshold(n, s, x)
                    })?);
                }
            }
            Theorem::Thm2 => {
                let variance = need_variance()?;
                for &x in x_grid {
                    let selection = bounds::select_k_star_prime(profile, variance, x)?;
                    out.push(planned(theorem, x, &selection, |s| {
                        bounds::thm2_threshold(n, s, x)
                    })?);
                }
            }
            Theorem::Hoeffding => {
                let phi = hoeffding_phi_from_coupling(profile, n)?;
                for &x in x_grid {
                    out.push(PlannedBound {
                        theorem,
                        x,
                        k_selected: None,
                        variance_used: None,
                        threshold: Some(bounds::hoeffding_threshold(n, &phi, x)?),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn planned(
    theorem: Theorem,
    x: f64,
    selection: &BlockSelection,
    threshold: impl Fn(&BlockSelection) -> Result<f64>,
) -> Result<PlannedBound> {
    Ok(match selection {
        BlockSelection::NoValidBlockSize => PlannedBound {
            theorem,
            x,
            k_selected: None,
            variance_used: None,
            threshold: None,
        },
        BlockSelection::Selected { k, variance_at_k } => PlannedBound {
            theorem,
            x,
            k_selected: Some(*k),
            variance_used: Some(*variance_at_k),
            threshold: Some(threshold(selection)?),
        },
    })
}

/// Runs every `(theorem, x)` pair of `config` against one shared set of
/// simulated partial sums.
pub fn run_verification(config: &ExperimentConfig, workers: &Workers) -> Result<Verification> {
    config.validate()?;
    let model = &config.model;
    let n = config.n;
    let theorems = config.theorem.to_vec();

    let f = ObservableF::for_model(
        config.observable,
        model,
        config.reps,
        derive_seed(config.base_seed, CENTERING_STREAM),
    )?;
    let profile = model.dependence_profile(n)?;

    let variance = if theorems.iter().any(|t| t.needs_variance()) {
        Some(match estimation::analytic_sigma_profile(model, &f, n) {
            Some(p) => p,
            None => {
                let reps = config.reps.max(2);
                estimation::estimated_sigma_profile(
                    model,
                    &f,
                    n,
                    reps,
                    derive_seed(config.base_seed, VARIANCE_STREAM),
                    workers,
                )?
            }
        })
    } else {
        None
    };

    let plans = plan_bounds(&theorems, &config.x_grid, n, &profile, variance.as_ref())?;
    let thresholds: Vec<f64> = plans.iter().filter_map(|p| p.threshold).collect();
    let tails = if thresholds.is_empty() {
        Vec::new()
    } else {
        estimation::estimate_tails(
            model,
            &f,
            n,
            &thresholds,
            config.reps,
            derive_seed(config.base_seed, TAIL_STREAM),
            config.alpha,
            workers,
        )?
    };

    let mut tails = tails.into_iter();
    let rows = plans
        .iter()
        .map(|plan| {
            let bound_value = (-plan.x).exp();
            match plan.threshold {
                None => ReportRow {
                    theorem: plan.theorem,
                    x: plan.x,
                    k_selected: None,
                    variance_used: None,
                    threshold: None,
                    bound_value,
                    p_hat: None,
                    ci_high: None,
                    verdict: Verdict::Skipped,
                },
                Some(threshold) => {
                    let tail = tails.next().expect("one tail estimate per threshold");
                    let verdict = if tail.ci_high <= bound_value {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    };
                    ReportRow {
                        theorem: plan.theorem,
                        x: plan.x,
                        k_selected: plan.k_selected,
                        variance_used: plan.variance_used,
                        threshold: Some(threshold),
                        bound_value,
                        p_hat: Some(tail.p_hat),
                        ci_high: Some(tail.ci_high),
                        verdict,
                    }
                }
            }
        })
        .collect();

    let summary = RunSummary {
        model: model.label(),
        observable: config.observable.to_string(),
        n,
        reps: config.reps,
        base_seed: config.base_seed,
        alpha: config.alpha,
        variance_source: variance.as_ref().map(|v| v.source()),
        variance_estimator: variance.as_ref().map(|v| match v.source() {
            VarianceSource::Analytic => "closed form",
            VarianceSource::Estimated => "independent stationary replicas, prefix block sums",
        }),
        centering_mu: f.mu,
        centering_estimated: f.mu_estimated,
        truncation: model.truncation(),
        truncation_error: model.truncation_error(),
        profile_kind: profile.kind(),
    };
    Ok(Verification { rows, summary })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Serializes the report as CSV. `f64` values use Rust's shortest
/// round-trip formatting.
pub fn write_report<W: Write>(rows: &[ReportRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for row in rows {
        w.write_record([
            row.theorem.to_string(),
            row.x.to_string(),
            opt(row.k_selected),
            opt(row.variance_used),
            opt(row.threshold),
            row.bound_value.to_string(),
            opt(row.p_hat),
            opt(row.ci_high),
            row.verdict.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_report(rows: &[ReportRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_report(rows, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// Writes the report to `path`.
pub fn emit_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    fs::write(path, render_report(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the run summary as pretty JSON next to a report.
pub fn emit_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `report.csv` -> `report.meta.json`
pub fn summary_path(report: &Path) -> PathBuf {
    report.with_extension("meta.json")
}

/// Dependence families for the block-size asymptotics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaFamily {
    /// `r delta_r = c rho^r`
    Geometric { c: f64, rho: f64 },
    /// `delta_r = c r^-decay` with `decay > 1`, so `r delta_r = c r^(1 - decay)`.
    Polynomial { c: f64, decay: f64 },
}

impl DeltaFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaFamily::Geometric { c, rho } => {
                if !(c > 0.0) {
                    return Err(Error::domain("C", c, "C > 0"));
                }
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::domain("rho", rho, "0 < rho < 1"));
                }
            }
            DeltaFamily::Polynomial { c, decay } => {
                if !(c > 0.0) {
                    return Err(Error::domain("C", c, "C > 0"));
                }
                if !(decay > 1.0) {
                    return Err(Error::domain("decay", decay, "decay > 1"));
                }
            }
        }
        Ok(())
    }

    /// `r * delta_r`
    pub fn lag_total(&self, r: usize) -> f64 {
        let rf = r as f64;
        match *self {
            DeltaFamily::Geometric { c, rho } => c * rho.powf(rf),
            DeltaFamily::Polynomial { c, decay } => c * rf.powf(1.0 - decay),
        }
    }

    /// Predicted growth of `k*(v)`: `ln(1/v)` or `v^(1 / (1 - decay))`.
    pub fn reference(&self, v: f64) -> f64 {
        match *self {
            DeltaFamily::Geometric { .. } => -v.ln(),
            DeltaFamily::Polynomial { decay, .. } => v.powf(1.0 / (1.0 - decay)),
        }
    }
}

impl FromStr for DeltaFamily {
    type Err = Error;

    /// `geometric:C:RHO` or `polynomial:C:DECAY`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config(
                "family",
                format!("expected NAME:C:PARAM, got `{s}`"),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .parse()
                .map_err(|e| Error::config("family", format!("`{s}`: {e}")))
        };
        let family = match parts[0] {
            "geometric" => DeltaFamily::Geometric {
                c: num(1)?,
                rho: num(2)?,
            },
            "polynomial" => DeltaFamily::Polynomial {
                c: num(1)?,
                decay: num(2)?,
            },
            other => return Err(Error::config("family", format!("unknown family `{other}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

impl fmt::Display for DeltaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaFamily::Geometric { c, rho } => write!(f, "geometric:{c}:{rho}"),
            DeltaFamily::Polynomial { c, decay } => write!(f, "polynomial:{c}:{decay}"),
        }
    }
}

/// Upper limit of the block-size scan.
pub const MAX_BLOCK_SCAN: usize = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticsRow {
    pub v: f64,
    pub k_star: Option<usize>,
    pub reference: f64,
    pub ratio: Option<f64>,
}

/// `k*(v) = min{k : k delta_k <= v}` for each target variance, with its
/// ratio to the predicted growth.
pub fn run_blocksize_asymptotics(
    family: &DeltaFamily,
    targets: &[f64],
) -> Result<Vec<AsymptoticsRow>> {
    family.validate()?;
    if let Some(v) = targets.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::domain("target variance", *v, "v > 0"));
    }
    Ok(targets
        .iter()
        .map(|&v| {
            let k_star = (1..=MAX_BLOCK_SCAN).find(|&k| family.lag_total(k) <= v);
            let reference = family.reference(v);
            let ratio = match k_star {
                Some(k) if reference > 0.0 => Some(k as f64 / reference),
                _ => None,
            };
            AsymptoticsRow {
                v,
                k_star,
                reference,
                ratio,
            }
        })
        .collect())
}

/// `(max - min) / min` of the defined ratios.
pub fn ratio_spread(rows: &[AsymptoticsRow]) -> Option<f64> {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min.is_finite() && min > 0.0).then(|| (max - min) / min)
}

pub fn write_asymptotics<W: Write>(
    family: &DeltaFamily,
    rows: &[AsymptoticsRow],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "v", "k_star", "reference", "ratio"])?;
    for row in rows {
        w.write_record([
            family.to_string(),
            row.v.to_string(),
            opt(row.k_star),
            row.reference.to_string(),
            opt(row.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `0.5,1,2` or the inclusive range `start:stop:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::config("x_grid", format!("`{s}`: {e}")))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config(
                "x_grid",
                "ranges are written start:stop:step",
            ));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !(stop >= start) {
            return Err(Error::config(
                "x_grid",
                "range needs step > 0 and stop >= start",
            ));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| start + i as f64 * step).collect());
    }
    text.split(',').map(num).collect()
}

/// Closed-form thresholds over an `x` grid, without simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsTableRow {
    pub x: f64,
    pub iid_eq1: f64,
    pub thm1: Option<f64>,
    pub k_star: Option<usize>,
    pub thm2: Option<f64>,
    pub k_star_prime: Option<usize>,
    pub hoeffding: f64,
}

pub fn bounds_table(
    x_grid: &[f64],
    n: usize,
    profile: &DependenceProfile,
    variance: &VarianceProfile,
) -> Result<Vec<BoundsTableRow>> {
    let phi = hoeffding_phi_from_coupling(profile, n)?;
    let selection = bounds::select_k_star(&profile.as_phi_type(), variance)?;
    x_grid
        .iter()
        .map(|&x| {
            let thm1 = selection
                .k()
                .map(|_| bounds::thm1_threshold(n, &selection, x))
                .transpose()?;
            let (thm2, k_star_prime) = if x > 0.0 {
                let sel = bounds::select_k_star_prime(profile, variance, x)?;
                (
                    sel.k()
                        .map(|_| bounds::thm2_threshold(n, &sel, x))
                        .transpose()?,
                    sel.k(),
                )
            } else {
                (Some(0.0), None)
            };
            Ok(BoundsTableRow {
                x,
                iid_eq1: bounds::iid_bernstein_threshold(n, variance.sigma_sq(1), x)?,
                thm1,
                k_star: selection.k(),
                thm2,
                k_star_prime,
                hoeffding: bounds::hoeffding_threshold(n, &phi, x)?,
            })
        })
        .collect()
}

pub fn write_bounds_table<W: Write>(rows: &[BoundsTableRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "x",
        "iid_eq1",
        "thm1",
        "k_star",
        "thm2",
        "k_star_prime",
        "hoeffding",
    ])?;
    for row in rows {
        w.write_record([
            row.x.to_string(),
            row.iid_eq1.to_string(),
            opt(row.thm1),
            opt(row.k_star),
            opt(row.thm2),
            opt(row.k_star_prime),
            row.hoeffding.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
