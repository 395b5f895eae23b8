//! Proportional multistate lifetable.
//!
//! Every cohort (sex x starting age) is followed in annual steps to the oldest
//! tabulated age. Each disease runs as its own illness-death process (healthy,
//! diseased, dead from the disease) alongside the main lifetable, once for
//! business as usual (BAU) and once with incidence scaled by `1 - PIF`.
//! Differences in disease mortality shift all-cause mortality, and differences
//! in prevalence, weighted by the disability weight, shift the prevalent YLD
//! rate used to health-adjust life-years.
//!
//! Rates are converted to annual probabilities with `1 - exp(-rate)`. Disease
//! prevalence and mortality are taken at the start of each year; life-years are
//! the mean of the start and end survivors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::ValidationReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub sex: String,
    pub age: u32,
    pub count: f64,
    /// All-cause mortality rate per year.
    pub mortality: f64,
    /// Prevalent years lived with disability per person-year.
    pub pyld: f64,
}

/// Population and background rates. Rows with `count > 0` start a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub rows: Vec<PopulationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseRates {
    pub sex: String,
    pub age: u32,
    pub incidence: f64,
    pub case_fatality: f64,
    pub remission: f64,
    pub prevalence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagWindow {
    pub start: f64,
    pub end: f64,
}

impl LagWindow {
    pub const NONE: LagWindow = LagWindow { start: 0.0, end: 0.0 };

    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start >= 0.0 && start <= end) {
            return Err(Error::invalid(format!("lag window [{start}, {end}] is invalid")));
        }
        Ok(Self { start, end })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureLink {
    pub risk_factor: String,
    /// Relative risk per unit of exposure.
    pub rr_per_unit: f64,
    pub lag: LagWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseProcess {
    pub id: String,
    pub dw: f64,
    pub rates: Vec<DiseaseRates>,
    pub links: Vec<ExposureLink>,
}

/// `1 - rr^Δx`: the proportional fall in incidence from an exposure shift.
pub fn pif(delta_exposure: f64, rr_per_unit: f64) -> f64 {
    1.0 - rr_per_unit.powf(delta_exposure)
}

pub fn combine_pifs(pifs: &[f64]) -> Result<f64> {
    let mut keep = 1.0;
    for &p in pifs {
        if p >= 1.0 {
            return Err(Error::PifAtUnity(p));
        }
        keep *= 1.0 - p;
    }
    Ok(1.0 - keep)
}

/// PIF phased in linearly across the lag window.
pub fn lagged_pif(pif: f64, t: f64, lag: LagWindow) -> f64 {
    if t < lag.start {
        0.0
    } else if t >= lag.end {
        pif
    } else {
        pif * (t - lag.start) / (lag.end - lag.start)
    }
}

/// `Σ v_t / (1 + rate)^t` with `t` counted from zero.
pub fn discount_stream(values: &[f64], rate: f64) -> f64 {
    let factor = 1.0 / (1.0 + rate);
    let mut weight = 1.0;
    let mut total = 0.0;
    for v in values {
        total += v * weight;
        weight *= factor;
    }
    total
}

/// PIF per disease per year since the policy started. Years past the end of
/// a row reuse its last value; an empty row means no effect.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PifSchedule {
    pub by_disease: Vec<Vec<f64>>,
}

impl PifSchedule {
    pub fn zeros(n_diseases: usize) -> Self {
        Self {
            by_disease: vec![Vec::new(); n_diseases],
        }
    }

    pub fn constant(values: &[f64]) -> Self {
        Self {
            by_disease: values.iter().map(|&v| vec![v]).collect(),
        }
    }

    pub fn at(&self, disease: usize, year: usize) -> f64 {
        match self.by_disease.get(disease) {
            Some(row) if !row.is_empty() => row[year.min(row.len() - 1)],
            _ => 0.0,
        }
    }

    /// Combined, lagged PIFs from exposure changes keyed by risk factor.
    pub fn from_exposures(
        diseases: &[DiseaseProcess],
        exposure_change: &BTreeMap<String, f64>,
        horizon: usize,
    ) -> Result<Self> {
        let mut by_disease = Vec::with_capacity(diseases.len());
        for d in diseases {
            let base: Vec<(f64, LagWindow)> = d
                .links
                .iter()
                .map(|l| {
                    let dx = exposure_change.get(&l.risk_factor).ok_or_else(|| {
                        Error::invalid(format!(
                            "disease `{}`: unknown risk factor `{}`",
                            d.id, l.risk_factor
                        ))
                    })?;
                    Ok((pif(*dx, l.rr_per_unit), l.lag))
                })
                .collect::<Result<_>>()?;
            let mut row = Vec::with_capacity(horizon);
            let mut parts = Vec::with_capacity(base.len());
            for t in 0..horizon {
                parts.clear();
                parts.extend(base.iter().map(|&(p, lag)| lagged_pif(p, t as f64, lag)));
                row.push(combine_pifs(&parts)?);
            }
            by_disease.push(row);
        }
        Ok(Self { by_disease })
    }
}

/// HALYs over the remaining lifetime of every cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalyResult {
    pub haly_bau: f64,
    pub haly_scenario: f64,
    pub delta: f64,
}

/// Undiscounted population HALYs per year since the policy started.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalyStreams {
    pub bau: Vec<f64>,
    pub scenario: Vec<f64>,
}

impl HalyStreams {
    pub fn discounted(&self, rate: f64) -> HalyResult {
        let haly_bau = discount_stream(&self.bau, rate);
        let haly_scenario = discount_stream(&self.scenario, rate);
        // The difference is discounted directly so that a null scenario gives
        // exactly zero.
        let diff: Vec<f64> = self
            .scenario
            .iter()
            .zip(&self.bau)
            .map(|(s, b)| s - b)
            .collect();
        HalyResult {
            haly_bau,
            haly_scenario,
            delta: discount_stream(&diff, rate),
        }
    }
}

/// Annual probabilities for one disease at one age.
#[derive(Debug, Clone, Copy, Default)]
struct AgeRates {
    incidence: f64,
    case_fatality: f64,
    remission: f64,
    prevalence: f64,
}

#[derive(Debug, Clone, Copy)]
struct Step {
    incidence_rate: f64,
    /// BAU incidence probability.
    ip: f64,
    fp: f64,
    rp: f64,
}

/// Dense per-age inputs for one sex.
#[derive(Debug, Clone)]
struct SexSchedule {
    /// All-cause death probability.
    q: Vec<f64>,
    pyld: Vec<f64>,
    /// `steps[age * n_diseases + k]`
    steps: Vec<Step>,
    prevalence0: Vec<f64>,
}

/// BAU trajectory of one cohort, kept so that scenario runs only need to
/// follow the intervention arm.
#[derive(Debug, Clone)]
struct Cohort {
    sex: usize,
    age0: usize,
    count: f64,
    /// `(prevalence, disease mortality)` at `t * n_diseases + k`.
    bau: Vec<(f64, f64)>,
}

/// Validated lifetable inputs with rates expanded to single years of age
/// and the BAU arm precomputed.
#[derive(Debug, Clone)]
pub struct Lifetable {
    sexes: Vec<String>,
    schedules: Vec<SexSchedule>,
    dw: Vec<f64>,
    cohorts: Vec<Cohort>,
    bau_stream: Vec<f64>,
    horizon: usize,
}

/// Step function over tabulated ages: each age uses the closest row at or below it.
fn densify<T: Copy + Default>(points: &[(u32, T)], max_age: u32) -> Vec<T> {
    let mut out = Vec::with_capacity(max_age as usize + 1);
    let mut k = 0;
    for age in 0..=max_age {
        while k + 1 < points.len() && points[k + 1].0 <= age {
            k += 1;
        }
        out.push(points.get(k).map(|p| p.1).unwrap_or_default());
    }
    out
}

pub fn validate_inputs(cohorts: &CohortTable, diseases: &[DiseaseProcess]) -> ValidationReport {
    let mut r = ValidationReport::new();
    let mut seen = BTreeSet::new();
    for row in &cohorts.rows {
        let at = format!("population sex {} age {}", row.sex, row.age);
        if !seen.insert((row.sex.clone(), row.age)) {
            r.error(format!("{at}: duplicate row"));
        }
        if !(row.count >= 0.0 && row.count.is_finite()) {
            r.error(format!("{at}: count {} must be >= 0", row.count));
        }
        if !(row.mortality >= 0.0 && row.mortality.is_finite()) {
            r.error(format!("{at}: negative rate, mortality {}", row.mortality));
        }
        if !(0.0..1.0).contains(&row.pyld) {
            r.error(format!("{at}: pyld {} outside [0, 1)", row.pyld));
        }
    }
    let sexes: BTreeSet<&str> = cohorts.rows.iter().map(|r| r.sex.as_str()).collect();
    let mut ids = BTreeSet::new();
    for d in diseases {
        if !ids.insert(d.id.as_str()) {
            r.error(format!("disease `{}` listed twice", d.id));
        }
        if !(0.0..=1.0).contains(&d.dw) {
            r.error(format!("disease `{}`: dw {} outside [0, 1]", d.id, d.dw));
        }
        for x in &d.rates {
            let at = format!("disease `{}` sex {} age {}", d.id, x.sex, x.age);
            for (name, v) in [
                ("incidence", x.incidence),
                ("case_fatality", x.case_fatality),
                ("remission", x.remission),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    r.error(format!("{at}: negative rate, {name} {v}"));
                }
            }
            if !(0.0..=1.0).contains(&x.prevalence) {
                r.error(format!("{at}: prevalence {} outside [0, 1]", x.prevalence));
            }
        }
        for sex in &sexes {
            if !d.rates.iter().any(|x| x.sex == *sex) {
                r.error(format!("disease `{}` has no rates for sex {sex}", d.id));
            }
        }
        for l in &d.links {
            if !(l.rr_per_unit > 0.0 && l.rr_per_unit.is_finite()) {
                r.error(format!(
                    "disease `{}`: rr_per_unit {} for `{}` must be > 0",
                    d.id, l.rr_per_unit, l.risk_factor
                ));
            }
            if !(l.lag.start >= 0.0 && l.lag.start <= l.lag.end) {
                r.error(format!(
                    "disease `{}`: lag window [{}, {}] for `{}` is invalid",
                    d.id, l.lag.start, l.lag.end, l.risk_factor
                ));
            }
        }
    }
    r
}

impl Lifetable {
    pub fn new(cohorts: &CohortTable, diseases: &[DiseaseProcess]) -> Result<Self> {
        let report = validate_inputs(cohorts, diseases);
        if let Some(e) = report.errors.first() {
            return Err(if e.contains("negative rate") {
                Error::NegativeRate(e.clone())
            } else {
                Error::invalid(e.clone())
            });
        }

        let mut by_sex: BTreeMap<String, Vec<&PopulationRow>> = BTreeMap::new();
        for row in &cohorts.rows {
            by_sex.entry(row.sex.clone()).or_default().push(row);
        }
        let nd = diseases.len();
        let mut sexes = Vec::new();
        let mut schedules = Vec::new();
        for (sex, rows) in &mut by_sex {
            rows.sort_by_key(|r| r.age);
            let top = rows.last().map_or(0, |r| r.age);
            let m: Vec<(u32, f64)> = rows.iter().map(|r| (r.age, r.mortality)).collect();
            let p: Vec<(u32, f64)> = rows.iter().map(|r| (r.age, r.pyld)).collect();
            let per_disease: Vec<Vec<AgeRates>> = diseases
                .iter()
                .map(|d| {
                    let mut pts: Vec<(u32, AgeRates)> = d
                        .rates
                        .iter()
                        .filter(|x| &x.sex == sex)
                        .map(|x| {
                            (
                                x.age,
                                AgeRates {
                                    incidence: x.incidence,
                                    case_fatality: x.case_fatality,
                                    remission: x.remission,
                                    prevalence: x.prevalence,
                                },
                            )
                        })
                        .collect();
                    pts.sort_by_key(|p| p.0);
                    densify(&pts, top)
                })
                .collect();
            let ages = top as usize + 1;
            let mut steps = Vec::with_capacity(ages * nd);
            let mut prevalence0 = Vec::with_capacity(ages * nd);
            for age in 0..ages {
                for rates in &per_disease {
                    let r = rates[age];
                    steps.push(Step {
                        incidence_rate: r.incidence,
                        ip: 1.0 - (-r.incidence).exp(),
                        fp: 1.0 - (-r.case_fatality).exp(),
                        rp: 1.0 - (-r.remission).exp(),
                    });
                    prevalence0.push(r.prevalence);
                }
            }
            sexes.push(sex.clone());
            schedules.push(SexSchedule {
                q: densify(&m, top).iter().map(|m| 1.0 - (-m).exp()).collect(),
                pyld: densify(&p, top),
                steps,
                prevalence0,
            });
        }

        let mut table = Self {
            sexes,
            schedules,
            dw: diseases.iter().map(|d| d.dw).collect(),
            cohorts: Vec::new(),
            bau_stream: Vec::new(),
            horizon: 0,
        };
        for r in cohorts.rows.iter().filter(|r| r.count > 0.0) {
            let sex = table.sexes.iter().position(|s| *s == r.sex).unwrap_or_default();
            table.cohorts.push(Cohort {
                sex,
                age0: r.age as usize,
                count: r.count,
                bau: Vec::new(),
            });
        }
        table.horizon = table
            .cohorts
            .iter()
            .map(|c| table.schedules[c.sex].q.len() - c.age0)
            .max()
            .unwrap_or(0);

        let none = PifSchedule::zeros(nd);
        let mut bau_stream = vec![0.0; table.horizon];
        let mut trajectories = Vec::with_capacity(table.cohorts.len());
        for c in &table.cohorts {
            let mut traj = Vec::new();
            table.follow(c, &none, None, &mut bau_stream, Some(&mut traj))?;
            trajectories.push(traj);
        }
        for (c, traj) in table.cohorts.iter_mut().zip(trajectories) {
            c.bau = traj;
        }
        table.bau_stream = bau_stream;
        Ok(table)
    }

    /// Number of simulated years (the longest remaining lifetime).
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn disease_count(&self) -> usize {
        self.dw.len()
    }

    /// Follows one cohort under `pifs`, adding HALYs to `stream`.
    ///
    /// With `bau` the trajectory is compared against the stored BAU arm;
    /// without it the run is the BAU arm itself and `record` collects its
    /// prevalence and disease mortality.
    fn follow(
        &self,
        c: &Cohort,
        pifs: &PifSchedule,
        bau: Option<&[(f64, f64)]>,
        stream: &mut [f64],
        mut record: Option<&mut Vec<(f64, f64)>>,
    ) -> Result<()> {
        let sched = &self.schedules[c.sex];
        let nd = self.dw.len();
        let mut state: Vec<(f64, f64)> = (0..nd)
            .map(|k| {
                let p0 = sched.prevalence0[c.age0 * nd + k];
                (1.0 - p0, p0)
            })
            .collect();
        let mut l = 1.0f64;
        for t in 0..(sched.q.len() - c.age0) {
            let age = c.age0 + t;
            let mut dmort = 0.0;
            let mut dprev = 0.0;
            for (k, st) in state.iter_mut().enumerate() {
                let step = sched.steps[age * nd + k];
                let pif_k = pifs.at(k, t);
                let ip = if pif_k == 0.0 {
                    step.ip
                } else {
                    1.0 - (-(step.incidence_rate * (1.0 - pif_k))).exp()
                };
                let (s, cases) = *st;
                let alive = s + cases;
                let (p, m) = if alive > 0.0 {
                    (cases / alive, cases * step.fp / alive)
                } else {
                    (0.0, 0.0)
                };
                if !(0.0..=1.0).contains(&p) || !(ip.is_finite() && ip <= 1.0) {
                    return Err(Error::NonConvergence(format!(
                        "disease {k}, sex {}, age {age}: prevalence {p}",
                        self.sexes[c.sex]
                    )));
                }
                match bau {
                    Some(b) => {
                        let (pb, mb) = b[t * nd + k];
                        dmort += m - mb;
                        dprev += self.dw[k] * (p - pb);
                    }
                    None => {
                        if let Some(r) = record.as_deref_mut() {
                            r.push((p, m));
                        }
                    }
                }
                let new = s * ip;
                let die = cases * step.fp;
                let rem = (cases - die) * step.rp;
                *st = (s - new + rem, cases - die - rem + new);
            }
            let q_bau = sched.q[age];
            let pyld_bau = sched.pyld[age];
            let (q, pyld) = match bau {
                Some(_) => (
                    (q_bau + dmort).clamp(0.0, 1.0),
                    (pyld_bau + dprev).clamp(0.0, 1.0),
                ),
                None => (q_bau, pyld_bau),
            };
            let next = l * (1.0 - q);
            stream[t] += c.count * 0.5 * (l + next) * (1.0 - pyld);
            l = next;
        }
        Ok(())
    }

    /// Yearly population HALYs for BAU and the scenario.
    pub fn streams(&self, pifs: &PifSchedule) -> Result<HalyStreams> {
        let mut scenario = vec![0.0; self.horizon];
        for c in &self.cohorts {
            self.follow(c, pifs, Some(&c.bau), &mut scenario, None)?;
        }
        Ok(HalyStreams {
            bau: self.bau_stream.clone(),
            scenario,
        })
    }
}

/// Runs BAU and scenario over all cohorts and discounts at `discount`.
pub fn run_lifetable(
    cohorts: &CohortTable,
    diseases: &[DiseaseProcess],
    pifs: &PifSchedule,
    discount: f64,
) -> Result<HalyResult> {
    if !(discount >= 0.0) {
        return Err(Error::invalid(format!("discount rate {discount} must be >= 0")));
    }
    Ok(Lifetable::new(cohorts, diseases)?.streams(pifs)?.discounted(discount))
}

#[cfg(test)]
pub(crate) mod toy {
    use super::*;

    /// The toy table documented in `tests/fixtures/lifetable_toy_oracle.py`.
    pub fn cohorts() -> CohortTable {
        let rows = [(0, 1000.0, 0.01, 0.05), (1, 0.0, 0.02, 0.08), (2, 0.0, 0.05, 0.12)];
        CohortTable {
            rows: rows
                .iter()
                .map(|&(age, count, mortality, pyld)| PopulationRow {
                    sex: "f".into(),
                    age,
                    count,
                    mortality,
                    pyld,
                })
                .collect(),
        }
    }

    pub fn disease() -> DiseaseProcess {
        let rows = [
            (0, 0.10, 0.05, 0.02, 0.05),
            (1, 0.20, 0.10, 0.01, 0.10),
            (2, 0.30, 0.20, 0.0, 0.15),
        ];
        DiseaseProcess {
            id: "d".into(),
            dw: 0.3,
            rates: rows
                .iter()
                .map(|&(age, incidence, case_fatality, remission, prevalence)| DiseaseRates {
                    sex: "f".into(),
                    age,
                    incidence,
                    case_fatality,
                    remission,
                    prevalence,
                })
                .collect(),
            links: vec![ExposureLink {
                risk_factor: "bmi".into(),
                rr_per_unit: 1.1,
                lag: LagWindow::NONE,
            }],
        }
    }
}
