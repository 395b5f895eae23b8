//! Scenario pipeline: policy, price response, rescaling, nutrition and the
//! lifetable, run in that order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::demand::{
    apply_pe_matrix, expenditure_change, fpi_change, revealed_tfee, validate_pe_matrix, Basket, Nutrient,
    PeMatrix,
};
use crate::disagg::{audit_adding_up, expand_matrix, AddingUpAudit, DisaggScalar, GroupMapping};
use crate::error::{Error, Result, StageExt};
use crate::io::{self, ScenarioConfig};
use crate::lifetable::{validate_inputs, CohortTable, DiseaseProcess, Lifetable, PifSchedule};
use crate::nutrition::{bmi_change, nutrient_totals, PopulationAnthro};
use crate::policy::{price_change, PolicySpec};
use crate::rescale::{apply_mode, GroupExpenditureElasticities, RescaleMode, RescaleOptions};
use crate::validation::ValidationReport;

/// Reads a data file given its resolved path.
pub type Fetch<'a> = &'a dyn Fn(&Path) -> Result<String>;

#[derive(Debug, Clone)]
pub struct Health {
    pub cohorts: CohortTable,
    pub diseases: Vec<DiseaseProcess>,
    pub lifetable: Lifetable,
}

impl Health {
    pub fn new(cohorts: CohortTable, diseases: Vec<DiseaseProcess>) -> Result<Self> {
        Ok(Self {
            lifetable: Lifetable::new(&cohorts, &diseases)?,
            cohorts,
            diseases,
        })
    }
}

/// Everything read from disk for one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub basket: Basket,
    /// As supplied: either food level or parent-group level.
    pub pe: PeMatrix,
    pub mapping: GroupMapping,
    pub eta: Option<GroupExpenditureElasticities>,
    pub health: Option<Health>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub mode: RescaleMode,
    pub options: RescaleOptions,
    pub anthro: PopulationAnthro,
    pub disagg: DisaggScalar,
    pub discount_rates: Vec<f64>,
}

impl Settings {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let s = Self {
            mode: cfg.rescale_mode()?,
            options: RescaleOptions {
                convention: cfg.rescale.expenditure_convention,
                eta_basis: cfg.rescale.eta_basis,
            },
            anthro: cfg.anthro.resolve()?,
            disagg: cfg.disaggregation,
            discount_rates: cfg.discount_rates.clone(),
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if let Some(r) = self.discount_rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::invalid(format!("discount rate {r} must be >= 0")));
        }
        if !(self.disagg.value >= 0.0 && self.disagg.sd >= 0.0) {
            return Err(Error::invalid("disaggregation scalar and its SD must be >= 0"));
        }
        self.anthro.check()
    }
}

/// Which parent-level PE matrix the foods hang off.
fn resolve_mapping(basket: &Basket, pe: &PeMatrix, rows: Option<&[crate::disagg::Assignment]>) -> Result<GroupMapping> {
    if let Some(rows) = rows {
        return GroupMapping::from_assignments(rows, Some(basket));
    }
    let foods: BTreeSet<&str> = basket.ids().collect();
    let pe_ids: BTreeSet<&str> = pe.food_ids.iter().map(String::as_str).collect();
    if foods == pe_ids {
        Ok(GroupMapping::identity(&pe.food_ids))
    } else {
        GroupMapping::from_basket_groups(basket)
    }
}

impl ScenarioData {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Self::from_config_with(cfg, &io::read_text)
    }

    pub fn from_config_with(cfg: &ScenarioConfig, fetch: Fetch<'_>) -> Result<Self> {
        let read = |rel: &Path| -> Result<(String, std::path::PathBuf)> {
            let p = cfg.path(rel);
            Ok((fetch(&p)?, p))
        };
        let d = &cfg.data;
        let (text, p) = read(&d.foods)?;
        let basket = io::parse_foods(&text, &p)?;
        let (text, p) = read(&d.pe_matrix)?;
        let mut pe = io::parse_pe_matrix(&text, &p)?;
        if let Some(rel) = &d.pe_matrix_sd {
            let (text, p) = read(rel)?;
            let sd = io::parse_pe_sd(&text, &p, &pe)?;
            pe = pe.with_sd(sd);
        }
        let rows = match &d.group_mapping {
            Some(rel) => {
                let (text, p) = read(rel)?;
                Some(io::parse_group_mapping(&text, &p)?)
            }
            None => None,
        };
        let mapping = resolve_mapping(&basket, &pe, rows.as_deref()).stage("group mapping")?;
        let eta = match &d.expenditure_elasticities {
            Some(rel) => {
                let (text, p) = read(rel)?;
                Some(io::parse_expenditure_elasticities(&text, &p)?)
            }
            None => None,
        };
        let health = match (&d.population, &d.diseases) {
            (Some(pop), Some(dis)) => {
                let (text, p) = read(pop)?;
                let cohorts = io::parse_population(&text, &p)?;
                let (dtext, dp) = read(dis)?;
                // Without a links file no disease responds to diet.
                let (ltext, lp) = match &d.rr_links {
                    Some(rel) => read(rel)?,
                    None => ("disease_id,risk_factor,rr_per_unit\n".to_string(), dp.clone()),
                };
                let diseases = io::parse_diseases(&dtext, &dp, &ltext, &lp)?;
                Some(Health::new(cohorts, diseases).stage("lifetable")?)
            }
            (None, None) => None,
            _ => {
                return Err(Error::invalid(
                    "population and diseases must be given together",
                ))
            }
        };
        Ok(Self {
            basket,
            pe,
            mapping,
            eta,
            health,
        })
    }

    /// Food-level PE matrix for scalar `s`.
    pub fn food_pe(&self, s: f64) -> Result<PeMatrix> {
        expand_matrix(&self.pe, &self.mapping, s)
    }

    pub fn disaggregate(&self, s: f64) -> Result<(PeMatrix, AddingUpAudit)> {
        let child = self.food_pe(s)?;
        let audit = audit_adding_up(&self.pe, &self.mapping, &child)?;
        Ok((child, audit))
    }
}

/// Inputs that Monte Carlo draws vary. [`Params::central`] gives the
/// expected-value run.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tfee: Option<f64>,
    pub disagg_scalar: f64,
    pub pe: Vec<Vec<f64>>,
    pub eta: Option<GroupExpenditureElasticities>,
}

impl Params {
    pub fn central(data: &ScenarioData, settings: &Settings) -> Self {
        Self {
            tfee: match settings.mode {
                RescaleMode::TfeeScaled(t) => Some(t),
                _ => None,
            },
            disagg_scalar: settings.disagg.value,
            pe: data.pe.values.clone(),
            eta: data.eta.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalyAtRate {
    pub discount_rate: f64,
    pub delta: f64,
}

/// Changes from baseline for one arm of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub label: String,
    pub expenditure_change_pct: f64,
    pub grams_change: f64,
    pub grams_change_pct: f64,
    pub energy_change_kj: f64,
    pub energy_change_pct: f64,
    pub bmi_change: f64,
    /// Per-day change in each non-energy nutrient.
    pub nutrients: BTreeMap<String, f64>,
    pub haly: Vec<HalyAtRate>,
    pub revealed_tfee: Option<f64>,
    pub floored: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub policy: String,
    pub mode: String,
    pub fpi_change_pct: f64,
    /// Price response alone, no expenditure adjustment.
    pub conventional: OutcomeRow,
    pub rescaled: OutcomeRow,
}

pub fn haly_key(rate: f64) -> String {
    format!("haly_{}pct", (rate * 1e4).round() / 1e2)
}

impl ScenarioOutcome {
    /// Flat metric list used for Monte Carlo summaries.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = vec![("fpi_change_pct".to_string(), self.fpi_change_pct)];
        for row in [&self.conventional, &self.rescaled] {
            let p = &row.label;
            out.push((format!("{p}.expenditure_change_pct"), row.expenditure_change_pct));
            out.push((format!("{p}.grams_change"), row.grams_change));
            out.push((format!("{p}.energy_change_kj"), row.energy_change_kj));
            out.push((format!("{p}.bmi_change"), row.bmi_change));
            for (k, v) in &row.nutrients {
                out.push((format!("{p}.{k}_change"), *v));
            }
            for h in &row.haly {
                out.push((format!("{p}.{}", haly_key(h.discount_rate)), h.delta));
            }
            if let Some(t) = row.revealed_tfee {
                out.push((format!("{p}.revealed_tfee"), t));
            }
        }
        out
    }
}

struct Context<'a> {
    data: &'a ScenarioData,
    settings: &'a Settings,
    dfpi: f64,
}

impl Context<'_> {
    fn row(&self, label: &str, post: &Basket, floored: Vec<String>) -> Result<OutcomeRow> {
        let pre = &self.data.basket;
        let dexp = expenditure_change(pre, post, self.settings.options.convention)?;
        let n0 = nutrient_totals(pre);
        let n1 = nutrient_totals(post);
        let dn = n1.zip(&n0, |a, b| a - b);
        let denergy = dn.energy;
        let dbmi = bmi_change(denergy, &self.settings.anthro);
        let g0 = pre.total_grams();
        let dg = post.total_grams() - g0;

        let mut nutrients = BTreeMap::new();
        for n in Nutrient::ALL.into_iter().filter(|n| *n != Nutrient::Energy) {
            nutrients.insert(n.key().to_string(), dn.get(n));
        }

        let haly = match &self.data.health {
            Some(h) => {
                let mut exposure: BTreeMap<String, f64> =
                    Nutrient::ALL.iter().map(|n| (n.key().to_string(), dn.get(*n))).collect();
                exposure.insert("bmi".into(), dbmi);
                let pifs = PifSchedule::from_exposures(&h.diseases, &exposure, h.lifetable.horizon())
                    .stage("impact fractions")?;
                let streams = h.lifetable.streams(&pifs).stage("lifetable")?;
                self.settings
                    .discount_rates
                    .iter()
                    .map(|&r| HalyAtRate {
                        discount_rate: r,
                        delta: streams.discounted(r).delta,
                    })
                    .collect()
            }
            None => Vec::new(),
        };

        Ok(OutcomeRow {
            label: label.into(),
            expenditure_change_pct: 100.0 * dexp,
            grams_change: dg,
            grams_change_pct: if g0 > 0.0 { 100.0 * dg / g0 } else { 0.0 },
            energy_change_kj: denergy,
            energy_change_pct: if n0.energy > 0.0 { 100.0 * denergy / n0.energy } else { 0.0 },
            bmi_change: dbmi,
            nutrients,
            haly,
            revealed_tfee: if self.dfpi != 0.0 {
                Some(revealed_tfee(dexp, self.dfpi)?)
            } else {
                None
            },
            floored,
        })
    }
}

/// Runs one policy through the full pipeline with the given parameters.
pub fn run_with(data: &ScenarioData, settings: &Settings, policy: &PolicySpec, params: &Params) -> Result<ScenarioOutcome> {
    let basket = &data.basket;
    let dp = price_change(policy, basket).stage("policy")?;
    let parent = PeMatrix::new(data.pe.food_ids.clone(), params.pe.clone());
    let food_pe = expand_matrix(&parent, &data.mapping, DisaggScalar::clamped(params.disagg_scalar))
        .stage("disaggregation")?;
    let post = apply_pe_matrix(basket, &food_pe, &dp).stage("price response")?;
    let dfpi = fpi_change(basket, &dp).stage("price response")?;

    let mode = match params.tfee {
        Some(t) => settings.mode.with_tfee(t),
        None => settings.mode,
    };
    let rescaled = apply_mode(&post.basket, mode, basket, params.eta.as_ref(), dfpi, settings.options)
        .stage("rescale")?;

    let ctx = Context {
        data,
        settings,
        dfpi,
    };
    let mut floored_rescaled = post.floored.clone();
    floored_rescaled.extend(rescaled.floored.iter().cloned());
    let mode_label = match mode {
        RescaleMode::TfeeScaled(_) => "tfee".to_string(),
        other => other.to_string(),
    };
    Ok(ScenarioOutcome {
        policy: policy.name.clone(),
        mode: mode.to_string(),
        fpi_change_pct: 100.0 * dfpi,
        conventional: ctx.row("conventional", &post.basket, post.floored.clone())?,
        rescaled: ctx.row(&mode_label, &rescaled.basket, floored_rescaled)?,
    })
}

/// Expected-value run.
pub fn run_scenario(data: &ScenarioData, settings: &Settings, policy: &PolicySpec) -> Result<ScenarioOutcome> {
    run_with(data, settings, policy, &Params::central(data, settings))
}

/// Loads and checks everything a config refers to. Problems are collected
/// rather than stopping at the first one where possible.
pub fn validate(cfg: &ScenarioConfig, fetch: Fetch<'_>) -> ValidationReport {
    let mut r = ValidationReport::new();
    let settings = match Settings::from_config(cfg) {
        Ok(s) => Some(s),
        Err(e) => {
            r.error(e.to_string());
            None
        }
    };
    let policy = match cfg.policy.as_ref().map(|p| p.resolve()) {
        Some(Err(e)) => {
            r.error(e.to_string());
            None
        }
        Some(Ok(p)) => Some(p),
        None => None,
    };
    let data = match ScenarioData::from_config_with(cfg, fetch) {
        Ok(d) => d,
        Err(e) => {
            r.error(e.to_string());
            return r;
        }
    };

    r.absorb("PE matrix", validate_pe_matrix(&data.pe));
    if let Some(eta) = &data.eta {
        let groups: BTreeSet<&str> = data.basket.items().iter().map(|f| f.group_id.as_str()).collect();
        let groups: Vec<&str> = groups.into_iter().collect();
        r.absorb("expenditure elasticities", eta.validate(&groups));
    } else {
        r.warn("no expenditure elasticities; group adjustment is skipped");
    }
    let s = settings.as_ref().map_or(DisaggScalar::default().value, |s| s.disagg.value);
    match data.food_pe(s) {
        Ok(food_pe) => {
            let covered: BTreeSet<&str> = food_pe.food_ids.iter().map(String::as_str).collect();
            for id in data.basket.ids() {
                if !covered.contains(id) {
                    r.error(format!("food `{id}` has no price elasticities after disaggregation"));
                }
            }
        }
        Err(e) => r.error(format!("disaggregation: {e}")),
    }
    if let Some(h) = &data.health {
        r.absorb("lifetable", validate_inputs(&h.cohorts, &h.diseases));
        let mut known: BTreeSet<String> = Nutrient::ALL.iter().map(|n| n.key().to_string()).collect();
        known.insert("bmi".into());
        for d in &h.diseases {
            for l in &d.links {
                if !known.contains(&l.risk_factor) {
                    r.error(format!("disease `{}`: unknown risk factor `{}`", d.id, l.risk_factor));
                }
            }
        }
    }
    if let Some(p) = &policy {
        if let Err(e) = price_change(p, &data.basket) {
            r.error(format!("policy `{}`: {e}", p.name));
        }
    }
    r
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::demand::ExpenditureConvention;
    use crate::demand::fixtures::three_food;
    use crate::policy::PolicyComponent;
    use approx::assert_abs_diff_eq;

    pub fn fruit_subsidy_policy() -> PolicySpec {
        PolicySpec {
            name: "fruit_subsidy".into(),
            components: vec![PolicyComponent::AdValorem {
                selector: vec!["fruit".into()],
                fraction: -0.2,
            }],
        }
    }

    fn textbox_data(q: (f64, f64, f64)) -> ScenarioData {
        let basket = three_food(q.0, q.1, q.2);
        let pe = crate::demand::fixtures::three_food_pe();
        ScenarioData {
            mapping: GroupMapping::identity(&pe.food_ids),
            basket,
            pe,
            eta: None,
            health: None,
        }
    }

    fn baseline_price_settings(mode: RescaleMode) -> Settings {
        Settings {
            mode,
            options: RescaleOptions {
                convention: ExpenditureConvention::BaselinePrice,
                ..Default::default()
            },
            anthro: PopulationAnthro::default(),
            disagg: DisaggScalar::fixed(0.0),
            discount_rates: vec![0.0],
        }
    }

    #[test]
    fn textbox_setting_one_through_pipeline() {
        let data = textbox_data((50.0, 200.0, 200.0));
        let s = baseline_price_settings(RescaleMode::ConstantExpenditure);
        let out = run_scenario(&data, &s, &fruit_subsidy_policy()).unwrap();
        for row in [&out.conventional, &out.rescaled] {
            assert_abs_diff_eq!(row.energy_change_kj, 7.0, epsilon = 1e-9);
            assert_abs_diff_eq!(row.expenditure_change_pct, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(row.grams_change, 0.0, epsilon = 1e-9);
        }
        assert!(out.conventional.haly.is_empty());
    }

    #[test]
    fn textbox_setting_two_conventional() {
        let data = textbox_data((100.0, 100.0, 200.0));
        let s = baseline_price_settings(RescaleMode::ConstantExpenditure);
        let out = run_scenario(&data, &s, &fruit_subsidy_policy()).unwrap();
        assert_abs_diff_eq!(out.conventional.energy_change_pct, 100.0 * 31.0 / 1300.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.conventional.expenditure_change_pct, 100.0 * 0.07 / 2.9, epsilon = 1e-9);
        assert_abs_diff_eq!(out.rescaled.expenditure_change_pct, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn null_policy_changes_nothing() {
        let data = textbox_data((50.0, 200.0, 200.0));
        for mode in [RescaleMode::ConstantExpenditure, RescaleMode::TfeeScaled(0.75), RescaleMode::ConstantEnergy] {
            let out = run_scenario(&data, &baseline_price_settings(mode), &PolicySpec::null()).unwrap();
            assert_eq!(out.fpi_change_pct, 0.0);
            for (_, v) in out.metrics() {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
            assert!(out.rescaled.revealed_tfee.is_none());
        }
    }

    #[test]
    fn stage_context_on_errors() {
        let data = textbox_data((50.0, 200.0, 200.0));
        let bad = PolicySpec {
            name: "bad".into(),
            components: vec![PolicyComponent::AdValorem {
                selector: vec!["nothing".into()],
                fraction: 0.1,
            }],
        };
        let err = run_scenario(&data, &baseline_price_settings(RescaleMode::ConstantEnergy), &bad).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "policy", .. }));
        assert!(err.to_string().starts_with("policy: "));
    }

    #[test]
    fn haly_keys() {
        assert_eq!(haly_key(0.0), "haly_0pct");
        assert_eq!(haly_key(0.03), "haly_3pct");
        assert_eq!(haly_key(0.035), "haly_3.5pct");
    }
}
