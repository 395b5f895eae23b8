//! Rescaling of the post-PE basket.
//!
//! A conditional PE matrix keeps the relative pattern of purchases but not a
//! plausible total. After the PE step the basket is scaled by one uniform
//! ratio so that a chosen total (energy, grams or expenditure) hits its target.
//! In the expenditure modes the target follows the food price index through the
//! total food expenditure elasticity (TFEe), and group expenditure elasticities
//! first redistribute the implied income change across food groups.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::demand::{Basket, ExpenditureConvention};
use crate::error::{Error, Result};
use crate::nutrition::total_energy;
use crate::validation::ValidationReport;

/// Mean of Beta(6, 2).
pub const TFEE_CENTRAL: f64 = 0.75;
/// Point estimate from a single-country household demand system.
pub const TFEE_MICHELINI: f64 = 0.832;
pub const TFEE_BETA_ALPHA: f64 = 6.0;
pub const TFEE_BETA_BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElasticity {
    pub eta: f64,
    pub sd: f64,
}

/// Expenditure elasticity per food group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupExpenditureElasticities {
    pub by_group: BTreeMap<String, GroupElasticity>,
}

impl GroupExpenditureElasticities {
    pub fn new(by_group: BTreeMap<String, GroupElasticity>) -> Self {
        Self { by_group }
    }

    pub fn get(&self, group: &str) -> Option<&GroupElasticity> {
        self.by_group.get(group)
    }

    pub fn validate(&self, groups: &[&str]) -> ValidationReport {
        let mut r = ValidationReport::new();
        for (g, e) in &self.by_group {
            if !e.eta.is_finite() {
                r.error(format!("group `{g}`: eta is not finite"));
            } else if e.eta < 0.0 {
                r.warn(format!("group `{g}`: negative eta {}", e.eta));
            }
            if !(e.sd >= 0.0) {
                r.error(format!("group `{g}`: sd {} must be >= 0", e.sd));
            }
        }
        for g in groups {
            if !self.by_group.contains_key(*g) {
                r.error(format!("no expenditure elasticity for group `{g}`"));
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "tfee", rename_all = "snake_case")]
pub enum RescaleMode {
    ConstantEnergy,
    ConstantGrams,
    ConstantExpenditure,
    TfeeScaled(f64),
}

impl fmt::Display for RescaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RescaleMode::ConstantEnergy => f.write_str("energy"),
            RescaleMode::ConstantGrams => f.write_str("grams"),
            RescaleMode::ConstantExpenditure => f.write_str("expenditure"),
            RescaleMode::TfeeScaled(t) => write!(f, "tfee({t})"),
        }
    }
}

impl RescaleMode {
    /// Parses the `--rescale` flag values; `tfee` takes its value separately.
    pub fn parse(kind: &str, tfee: f64) -> Result<Self> {
        match kind {
            "energy" => Ok(Self::ConstantEnergy),
            "grams" => Ok(Self::ConstantGrams),
            "expenditure" => Ok(Self::ConstantExpenditure),
            "tfee" => Ok(Self::TfeeScaled(tfee)),
            other => Err(Error::invalid(format!("unknown rescale mode `{other}`"))),
        }
    }

    pub fn with_tfee(self, tfee: f64) -> Self {
        match self {
            Self::TfeeScaled(_) => Self::TfeeScaled(tfee),
            other => other,
        }
    }
}

/// How the income change fed to the group elasticities is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaBasis {
    /// Fractional gap between the expenditure target and post-PE expenditure.
    #[default]
    Gap,
    /// `tfee * ΔFPI`, the target change relative to baseline.
    Direct,
}

impl FromStr for EtaBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gap" => Ok(Self::Gap),
            "direct" => Ok(Self::Direct),
            other => Err(Error::invalid(format!("unknown eta basis `{other}`"))),
        }
    }
}

/// Food expenditure after a price index change of `dfpi` under elasticity `tfee`.
pub fn tfee_target(e0: f64, tfee: f64, dfpi: f64) -> f64 {
    e0 * (1.0 + tfee * dfpi)
}

#[derive(Debug, Clone)]
pub struct Adjusted {
    pub basket: Basket,
    pub floored: Vec<String>,
}

/// `q_i <- q_i (1 + eta_g(i) x)`, floored at zero.
pub fn group_elasticity_adjust(
    basket: &Basket,
    eta: &GroupExpenditureElasticities,
    x: f64,
) -> Result<Adjusted> {
    let mut floored = Vec::new();
    let q = basket
        .items()
        .iter()
        .map(|f| {
            let e = eta
                .get(&f.group_id)
                .ok_or_else(|| Error::MissingGroupElasticity(f.group_id.clone()))?;
            let mut q = f.quantity * (1.0 + e.eta * x);
            if q < 0.0 {
                floored.push(f.id.clone());
                q = 0.0;
            }
            Ok(q)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Adjusted {
        basket: basket.with_quantities(&q)?,
        floored,
    })
}

/// Multiplies every quantity by `target_e / current_e`, with expenditure at the
/// basket's own prices. Returns the scaled basket and the ratio.
pub fn uniform_rescale(basket: &Basket, target_e: f64) -> Result<(Basket, f64)> {
    let current = basket.total_expenditure();
    if !(current > 0.0) {
        return Err(Error::ZeroExpenditure);
    }
    let r = target_e / current;
    Ok((basket.scaled(r)?, r))
}

/// Options shared by every rescale mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RescaleOptions {
    pub convention: ExpenditureConvention,
    pub eta_basis: EtaBasis,
}

#[derive(Debug, Clone)]
pub struct RescaleOutcome {
    pub basket: Basket,
    /// Final uniform ratio.
    pub ratio: f64,
    /// Income change applied through the group elasticities, if any.
    pub income_change: Option<f64>,
    pub floored: Vec<String>,
    /// Relative miss of the final total against its target.
    pub residual: f64,
}

fn valued(basket: &Basket, baseline: &Basket, convention: ExpenditureConvention) -> Result<f64> {
    match convention {
        ExpenditureConvention::PostPolicy => Ok(basket.total_expenditure()),
        ExpenditureConvention::BaselinePrice => basket.expenditure_at_prices_of(baseline),
    }
}

fn scale_to(
    basket: &Basket,
    current: f64,
    target: f64,
    what: &'static str,
) -> Result<(Basket, f64)> {
    if !(current > 0.0) {
        return Err(match what {
            "expenditure" => Error::ZeroExpenditure,
            _ => Error::invalid(format!("post-PE {what} is zero")),
        });
    }
    let r = target / current;
    Ok((basket.scaled(r)?, r))
}

/// Rescale the post-PE basket under `mode`.
///
/// `dfpi` is the fractional food price index change and only matters for
/// [`RescaleMode::TfeeScaled`]. Without `eta` the group elasticity step is
/// skipped.
pub fn apply_mode(
    post_pe: &Basket,
    mode: RescaleMode,
    baseline: &Basket,
    eta: Option<&GroupExpenditureElasticities>,
    dfpi: f64,
    opts: RescaleOptions,
) -> Result<RescaleOutcome> {
    post_pe.check_aligned(baseline)?;
    match mode {
        RescaleMode::ConstantEnergy => {
            let target = total_energy(baseline);
            if !(target > 0.0) {
                return Err(Error::ZeroBaselineTotal("energy"));
            }
            let (basket, ratio) = scale_to(post_pe, total_energy(post_pe), target, "energy")?;
            let residual = (total_energy(&basket) - target).abs() / target;
            Ok(RescaleOutcome {
                basket,
                ratio,
                income_change: None,
                floored: Vec::new(),
                residual,
            })
        }
        RescaleMode::ConstantGrams => {
            let target = baseline.total_grams();
            if !(target > 0.0) {
                return Err(Error::ZeroBaselineTotal("grams"));
            }
            let (basket, ratio) = scale_to(post_pe, post_pe.total_grams(), target, "grams")?;
            let residual = (basket.total_grams() - target).abs() / target;
            Ok(RescaleOutcome {
                basket,
                ratio,
                income_change: None,
                floored: Vec::new(),
                residual,
            })
        }
        RescaleMode::ConstantExpenditure => {
            let e0 = baseline.total_expenditure();
            if !(e0 > 0.0) {
                return Err(Error::ZeroBaselineTotal("expenditure"));
            }
            to_expenditure(post_pe, baseline, eta, e0, 0.0, opts)
        }
        RescaleMode::TfeeScaled(tfee) => {
            if !tfee.is_finite() {
                return Err(Error::invalid(format!("TFEe {tfee} is not finite")));
            }
            let e0 = baseline.total_expenditure();
            if !(e0 > 0.0) {
                return Err(Error::ZeroBaselineTotal("expenditure"));
            }
            to_expenditure(post_pe, baseline, eta, tfee_target(e0, tfee, dfpi), tfee * dfpi, opts)
        }
    }
}

fn to_expenditure(
    post_pe: &Basket,
    baseline: &Basket,
    eta: Option<&GroupExpenditureElasticities>,
    target: f64,
    direct_change: f64,
    opts: RescaleOptions,
) -> Result<RescaleOutcome> {
    let mut basket = post_pe.clone();
    let mut floored = Vec::new();
    let mut income_change = None;
    if let Some(eta) = eta {
        let x = match opts.eta_basis {
            EtaBasis::Gap => {
                let current = valued(post_pe, baseline, opts.convention)?;
                if !(current > 0.0) {
                    return Err(Error::ZeroExpenditure);
                }
                (target - current) / current
            }
            EtaBasis::Direct => direct_change,
        };
        let adjusted = group_elasticity_adjust(&basket, eta, x)?;
        basket = adjusted.basket;
        floored = adjusted.floored;
        income_change = Some(x);
    }
    let current = valued(&basket, baseline, opts.convention)?;
    let (basket, ratio) = scale_to(&basket, current, target, "expenditure")?;
    let residual = (valued(&basket, baseline, opts.convention)? - target).abs() / target;
    Ok(RescaleOutcome {
        basket,
        ratio,
        income_change,
        floored,
        residual,
    })
}
