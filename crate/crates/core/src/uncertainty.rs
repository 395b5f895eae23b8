//! Parameter distributions, seeded Monte Carlo and univariate sensitivity runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution, Normal as NormalDist};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaCdf, ContinuousCDF, Normal as NormalCdf};

use crate::engine::{run_with, Params, ScenarioData, ScenarioOutcome, Settings};
use crate::error::{Error, Result};
use crate::policy::PolicySpec;
use crate::rescale::{RescaleMode, TFEE_BETA_ALPHA, TFEE_BETA_BETA};

/// Share of iterations allowed to fail before a run is abandoned.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution {
    Beta { alpha: f64, beta: f64 },
    Normal { mean: f64, sd: f64 },
    /// Normal truncated at zero by rejection.
    NormalNonNeg { mean: f64, sd: f64 },
    Fixed { value: f64 },
}

impl ParamDistribution {
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            Self::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Self::Normal { mean, sd } => mean.is_finite() && sd >= 0.0 && sd.is_finite(),
            Self::NormalNonNeg { mean, sd } => {
                // Rejection needs a reasonable chance of a non-negative draw.
                mean.is_finite() && sd >= 0.0 && sd.is_finite() && (mean >= 0.0 || mean + 3.0 * sd > 0.0)
            }
            Self::Fixed { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid distribution {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Beta { alpha, beta } => BetaDist::new(alpha, beta)
                .expect("checked beta parameters")
                .sample(rng),
            Self::Normal { mean, sd } => normal(mean, sd, rng),
            Self::NormalNonNeg { mean, sd } => loop {
                let x = normal(mean, sd, rng);
                if x >= 0.0 {
                    break x;
                }
            },
            Self::Fixed { value } => value,
        }
    }

    /// Expected value, used for central runs.
    pub fn central(&self) -> f64 {
        match *self {
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::Normal { mean, .. } | Self::NormalNonNeg { mean, .. } => mean,
            Self::Fixed { value } => value,
        }
    }

    /// Inverse CDF at `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("quantile level {p} outside (0, 1)")));
        }
        let q = match *self {
            Self::Beta { alpha, beta } => BetaCdf::new(alpha, beta)
                .map_err(|e| Error::invalid(e.to_string()))?
                .inverse_cdf(p),
            Self::Normal { mean, sd } => {
                if sd == 0.0 {
                    mean
                } else {
                    NormalCdf::new(mean, sd)
                        .map_err(|e| Error::invalid(e.to_string()))?
                        .inverse_cdf(p)
                }
            }
            Self::NormalNonNeg { mean, sd } => {
                if sd == 0.0 {
                    mean.max(0.0)
                } else {
                    let n = NormalCdf::new(mean, sd).map_err(|e| Error::invalid(e.to_string()))?;
                    let lo = n.cdf(0.0);
                    n.inverse_cdf(lo + p * (1.0 - lo))
                }
            }
            Self::Fixed { value } => value,
        };
        Ok(q)
    }
}

fn normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    NormalDist::new(mean, sd).expect("checked sd").sample(rng)
}

/// Which inputs vary between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub tfee: ParamDistribution,
    /// Drawn on the normal scale, then clamped at zero.
    pub disagg_scalar: ParamDistribution,
    /// Draw each PE entry from Normal(e, sd) when an SD table is present.
    pub pe_entries: bool,
    /// Draw each group's η from a zero-truncated Normal(η, sd).
    pub expenditure_elasticities: bool,
}

impl McSpec {
    pub fn from_settings(settings: &Settings) -> Self {
        Self {
            tfee: ParamDistribution::Beta {
                alpha: TFEE_BETA_ALPHA,
                beta: TFEE_BETA_BETA,
            },
            disagg_scalar: ParamDistribution::Normal {
                mean: settings.disagg.value,
                sd: settings.disagg.sd,
            },
            pe_entries: true,
            expenditure_elasticities: true,
        }
    }

    /// Every input pinned at its central value.
    pub fn fixed(settings: &Settings) -> Self {
        Self {
            tfee: ParamDistribution::Fixed {
                value: match settings.mode {
                    RescaleMode::TfeeScaled(t) => t,
                    _ => TFEE_BETA_ALPHA / (TFEE_BETA_ALPHA + TFEE_BETA_BETA),
                },
            },
            disagg_scalar: ParamDistribution::Fixed {
                value: settings.disagg.value,
            },
            pe_entries: false,
            expenditure_elasticities: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.tfee.check()?;
        self.disagg_scalar.check()
    }

    /// Central parameters: distribution means for the scalars, point
    /// estimates for the matrices.
    pub fn central_params(&self, data: &ScenarioData, settings: &Settings) -> Params {
        let mut p = Params::central(data, settings);
        if p.tfee.is_some() {
            p.tfee = Some(self.tfee.central());
        }
        p.disagg_scalar = self.disagg_scalar.central();
        p
    }

    /// One draw. The order of draws is fixed: TFEe, scalar, PE entries row
    /// by row, then η in group order.
    pub fn draw<R: Rng + ?Sized>(&self, data: &ScenarioData, settings: &Settings, rng: &mut R) -> Params {
        let mut p = Params::central(data, settings);
        let tfee = self.tfee.sample(rng);
        if p.tfee.is_some() {
            p.tfee = Some(tfee);
        }
        p.disagg_scalar = self.disagg_scalar.sample(rng).max(0.0);
        if let (true, Some(sd)) = (self.pe_entries, data.pe.sd.as_ref()) {
            for (i, row) in p.pe.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    let x = normal(*e, sd[i][j], rng);
                    *e = if i == j { x.min(0.0) } else { x };
                }
            }
        }
        if let (true, Some(eta)) = (self.expenditure_elasticities, p.eta.as_mut()) {
            for g in eta.by_group.values_mut() {
                let d = ParamDistribution::NormalNonNeg { mean: g.eta, sd: g.sd };
                g.eta = if d.check().is_ok() { d.sample(rng) } else { g.eta };
            }
        }
        p
    }
}

/// Seed of the generator for iteration `k` (SplitMix64 finaliser over the
/// master seed and the index).
pub fn substream_seed(master_seed: u64, k: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master_seed ^ mix(k))
}

pub fn substream(master_seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master_seed, k))
}

/// Linear-interpolation percentile of sorted data, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p / 100.0;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub median: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: percentile(&sorted, 50.0),
            p2_5: percentile(&sorted, 2.5),
            p97_5: percentile(&sorted, 97.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub policy: String,
    pub iterations: usize,
    pub failed: usize,
    pub master_seed: u64,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub summary: McSummary,
    /// Metric values per iteration; `None` where the iteration failed.
    pub iterations: Vec<Option<Vec<(String, f64)>>>,
}

impl McRun {
    /// Plot-ready per-iteration table.
    pub fn iterations_csv(&self) -> String {
        let names: Vec<&String> = self.summary.metrics.keys().collect();
        let mut out = String::from("iteration");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (k, it) in self.iterations.iter().enumerate() {
            out.push_str(&k.to_string());
            let values: BTreeMap<&str, f64> = it
                .iter()
                .flatten()
                .map(|(n, v)| (n.as_str(), *v))
                .collect();
            for n in &names {
                out.push(',');
                if let Some(v) = values.get(n.as_str()) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn monte_carlo(
    data: &ScenarioData,
    settings: &Settings,
    policy: &PolicySpec,
    spec: &McSpec,
    n: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<McRun> {
    if n == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one iteration"));
    }
    spec.check()?;
    let one = |k: usize| -> Result<ScenarioOutcome> {
        let mut rng = substream(master_seed, k as u64);
        let params = spec.draw(data, settings, &mut rng);
        run_with(data, settings, policy, &params)
    };
    // Results are keyed by index, so both paths aggregate identically.
    let results: Vec<Result<ScenarioOutcome>> = match exec {
        Execution::Serial => (0..n).map(one).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(one).collect(),
    };

    let mut failed = 0;
    let mut first_error = None;
    let mut iterations = Vec::with_capacity(n);
    for r in results {
        match r {
            Ok(o) => iterations.push(Some(o.metrics())),
            Err(e) => {
                failed += 1;
                first_error.get_or_insert_with(|| e.to_string());
                iterations.push(None);
            }
        }
    }
    if failed as f64 > MAX_FAILURE_FRACTION * n as f64 || failed == n {
        return Err(Error::TooManyFailures {
            failed,
            total: n,
            first: first_error.unwrap_or_default(),
        });
    }

    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, v) in iterations.iter().flatten().flatten() {
        columns.entry(name.clone()).or_default().push(*v);
    }
    let metrics = columns
        .iter()
        .map(|(k, v)| (k.clone(), MetricSummary::from_values(v)))
        .collect();
    Ok(McRun {
        summary: McSummary {
            policy: policy.name.clone(),
            iterations: n,
            failed,
            master_seed,
            metrics,
        },
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityParam {
    Tfee,
    DisaggScalar,
}

impl std::str::FromStr for SensitivityParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfee" => Ok(Self::Tfee),
            "disagg_scalar" => Ok(Self::DisaggScalar),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRun {
    pub param: SensitivityParam,
    pub percentile: f64,
    pub value: f64,
    pub outcome: ScenarioOutcome,
}

/// Runs with one parameter pinned at each requested percentile of its
/// distribution and everything else at central values.
pub fn univariate_sensitivity(
    data: &ScenarioData,
    settings: &Settings,
    policy: &PolicySpec,
    spec: &McSpec,
    param: SensitivityParam,
    percentiles: &[f64],
) -> Result<Vec<SensitivityRun>> {
    spec.check()?;
    let mut out = Vec::with_capacity(percentiles.len());
    for &pct in percentiles {
        let mut params = spec.central_params(data, settings);
        let value = match param {
            SensitivityParam::Tfee => {
                if params.tfee.is_none() {
                    return Err(Error::invalid(format!(
                        "TFEe sensitivity needs the tfee rescale mode, not {}",
                        settings.mode
                    )));
                }
                let v = spec.tfee.quantile(pct / 100.0)?;
                params.tfee = Some(v);
                v
            }
            SensitivityParam::DisaggScalar => {
                let v = spec.disagg_scalar.quantile(pct / 100.0)?.max(0.0);
                params.disagg_scalar = v;
                v
            }
        };
        out.push(SensitivityRun {
            param,
            percentile: pct,
            value,
            outcome: run_with(data, settings, policy, &params)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop, prop_assert, proptest};

    fn draws(d: ParamDistribution, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn fixed_is_constant() {
        let d = ParamDistribution::Fixed { value: 0.3 };
        assert!(draws(d, 10, 1).iter().all(|&x| x == 0.3));
        assert_eq!(d.quantile(0.025).unwrap(), 0.3);
        assert_eq!(d.central(), 0.3);
    }

    #[test]
    fn beta_six_two() {
        let d = ParamDistribution::Beta { alpha: 6.0, beta: 2.0 };
        let v = draws(d, 100_000, 7);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert_abs_diff_eq!(mean, 0.75, epsilon = 0.01);
        assert_abs_diff_eq!(percentile(&v, 2.5), 0.42, epsilon = 0.02);
        assert_abs_diff_eq!(percentile(&v, 97.5), 0.96, epsilon = 0.01);
        assert_abs_diff_eq!(d.quantile(0.025).unwrap(), 0.42, epsilon = 0.01);
        assert_abs_diff_eq!(d.quantile(0.975).unwrap(), 0.96, epsilon = 0.01);
    }

    #[test]
    fn disagg_scalar_interval() {
        let d = ParamDistribution::Normal { mean: 0.025, sd: 0.0125 };
        let v = draws(d, 100_000, 11);
        assert_abs_diff_eq!(percentile(&v, 2.5), 0.0005, epsilon = 0.002);
        assert_abs_diff_eq!(percentile(&v, 97.5), 0.0495, epsilon = 0.002);
        assert_abs_diff_eq!(d.quantile(0.025).unwrap(), 0.0005, epsilon = 1e-4);
    }

    #[test]
    fn truncated_normal_is_nonnegative() {
        let d = ParamDistribution::NormalNonNeg { mean: 0.1, sd: 0.2 };
        let v = draws(d, 10_000, 3);
        assert!(v[0] >= 0.0);
        assert!(d.quantile(0.001).unwrap() >= 0.0);
        assert!(ParamDistribution::NormalNonNeg { mean: -5.0, sd: 0.1 }.check().is_err());
        assert!(ParamDistribution::Beta { alpha: 0.0, beta: 2.0 }.check().is_err());
    }

    #[test]
    fn percentile_examples() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert_eq!(percentile(&v, 12.5), 1.5);
        assert_eq!(percentile(&[4.0], 2.5), 4.0);
    }

    #[test]
    fn substreams_differ_and_repeat() {
        assert_eq!(substream_seed(1, 5), substream_seed(1, 5));
        assert_ne!(substream_seed(1, 5), substream_seed(1, 6));
        assert_ne!(substream_seed(1, 5), substream_seed(2, 5));
        let a: u64 = Rng::random(&mut substream(9, 3));
        let b: u64 = Rng::random(&mut substream(9, 3));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn summary_is_ordered(v in prop::collection::vec(-1e3..1e3f64, 1..200)) {
            let s = MetricSummary::from_values(&v);
            prop_assert!(s.p2_5 <= s.median && s.median <= s.p97_5);
        }
    }
}
