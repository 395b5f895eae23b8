//! CSV and TOML readers. Every parser takes the text plus the path it came
//! from, so errors point at `file:line` whether the data is on disk or
//! embedded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::demand::{Basket, ExpenditureConvention, FoodItem, NutrientVector, PeMatrix};
use crate::disagg::{Assignment, DisaggScalar};
use crate::error::{Error, Result};
use crate::lifetable::{CohortTable, DiseaseProcess, DiseaseRates, ExposureLink, LagWindow, PopulationRow};
use crate::nutrition::{PopulationAnthro, DEFAULT_HEIGHT_M, DEFAULT_RHO};
use crate::policy::{self, PolicySpec};
use crate::rescale::{EtaBasis, GroupElasticity, GroupExpenditureElasticities, RescaleMode, TFEE_CENTRAL};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(origin: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(origin: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    parse_err(origin, line, message)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

/// Typed rows with their 1-based line numbers.
fn rows<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<Vec<(u64, T)>> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| csv_err(origin, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(origin, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec.deserialize(Some(&headers)).map_err(|e| csv_err(origin, e))?;
        out.push((line, row));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct FoodRecord {
    id: String,
    name: String,
    group_id: String,
    quantity_g_per_day: f64,
    price_per_100g: f64,
    energy_kj_per_100g: f64,
    satfat_g_per_100g: f64,
    sugar_g_per_100g: f64,
    salt_g_per_100g: f64,
    pufa_g_per_100g: f64,
    fruit_g_per_100g: f64,
    veg_g_per_100g: f64,
    ssb_ml_per_100g: f64,
}

pub fn parse_foods(text: &str, origin: &Path) -> Result<Basket> {
    let mut items = Vec::new();
    for (line, r) in rows::<FoodRecord>(text, origin)? {
        let item = FoodItem {
            id: r.id,
            name: r.name,
            group_id: r.group_id,
            quantity: r.quantity_g_per_day,
            price: r.price_per_100g,
            composition: NutrientVector {
                energy: r.energy_kj_per_100g,
                saturated_fat: r.satfat_g_per_100g,
                sugar: r.sugar_g_per_100g,
                salt: r.salt_g_per_100g,
                pufa: r.pufa_g_per_100g,
                fruit: r.fruit_g_per_100g,
                vegetable: r.veg_g_per_100g,
                ssb_volume: r.ssb_ml_per_100g,
            },
        };
        // Check each row here so the error carries its line.
        Basket::new(vec![item.clone()]).map_err(|e| parse_err(origin, line, e.to_string()))?;
        if items.iter().any(|f: &FoodItem| f.id == item.id) {
            return Err(parse_err(origin, line, format!("duplicate food id `{}`", item.id)));
        }
        items.push(item);
    }
    Basket::new(items)
}

/// Square table with ids in the header row and the first column.
fn parse_square(text: &str, origin: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| csv_err(origin, e))?.clone();
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::with_capacity(ids.len());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(origin, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_id = rec.get(0).unwrap_or_default();
        if ids.get(k).map(String::as_str) != Some(row_id) {
            return Err(parse_err(
                origin,
                line,
                format!("row id `{row_id}` does not match column {} of the header", k + 1),
            ));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| parse_err(origin, line, format!("`{cell}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    if values.len() != ids.len() {
        return Err(parse_err(
            origin,
            1,
            format!("{} columns but {} rows", ids.len(), values.len()),
        ));
    }
    Ok((ids, values))
}

pub fn parse_pe_matrix(text: &str, origin: &Path) -> Result<PeMatrix> {
    let (ids, values) = parse_square(text, origin)?;
    Ok(PeMatrix::new(ids, values))
}

/// SD table for `pem`; ids must match in the same order.
pub fn parse_pe_sd(text: &str, origin: &Path, pem: &PeMatrix) -> Result<Vec<Vec<f64>>> {
    let (ids, values) = parse_square(text, origin)?;
    if ids != pem.food_ids {
        return Err(parse_err(origin, 1, "ids differ from the PE matrix"));
    }
    if let Some(bad) = values.iter().flatten().find(|v| !(**v >= 0.0)) {
        return Err(parse_err(origin, 1, format!("negative or missing SD {bad}")));
    }
    Ok(values)
}

#[derive(Deserialize)]
struct MappingRecord {
    child_id: String,
    parent_id: String,
    #[serde(default)]
    share: Option<f64>,
}

pub fn parse_group_mapping(text: &str, origin: &Path) -> Result<Vec<Assignment>> {
    Ok(rows::<MappingRecord>(text, origin)?
        .into_iter()
        .map(|(_, r)| Assignment {
            child_id: r.child_id,
            parent_id: r.parent_id,
            share: r.share,
        })
        .collect())
}

#[derive(Deserialize)]
struct EtaRecord {
    group_id: String,
    eta: f64,
    #[serde(default)]
    sd: f64,
}

pub fn parse_expenditure_elasticities(text: &str, origin: &Path) -> Result<GroupExpenditureElasticities> {
    let mut by_group = BTreeMap::new();
    for (line, r) in rows::<EtaRecord>(text, origin)? {
        if !(r.eta.is_finite() && r.sd >= 0.0) {
            return Err(parse_err(origin, line, format!("bad eta {} / sd {}", r.eta, r.sd)));
        }
        if by_group
            .insert(r.group_id.clone(), GroupElasticity { eta: r.eta, sd: r.sd })
            .is_some()
        {
            return Err(parse_err(origin, line, format!("group `{}` listed twice", r.group_id)));
        }
    }
    Ok(GroupExpenditureElasticities::new(by_group))
}

pub fn parse_population(text: &str, origin: &Path) -> Result<CohortTable> {
    Ok(CohortTable {
        rows: rows::<PopulationRow>(text, origin)?
            .into_iter()
            .map(|(_, r)| r)
            .collect(),
    })
}

#[derive(Deserialize)]
struct DiseaseRecord {
    disease_id: String,
    age: u32,
    sex: String,
    incidence: f64,
    case_fatality: f64,
    remission: f64,
    prevalence: f64,
    dw: f64,
}

#[derive(Deserialize)]
struct LinkRecord {
    disease_id: String,
    risk_factor: String,
    rr_per_unit: f64,
    #[serde(default)]
    lag_start: f64,
    #[serde(default)]
    lag_end: f64,
}

/// Diseases in first-seen order, with their risk factor links attached.
pub fn parse_diseases(
    diseases_text: &str,
    diseases_origin: &Path,
    links_text: &str,
    links_origin: &Path,
) -> Result<Vec<DiseaseProcess>> {
    let mut out: Vec<DiseaseProcess> = Vec::new();
    for (line, r) in rows::<DiseaseRecord>(diseases_text, diseases_origin)? {
        let rates = DiseaseRates {
            sex: r.sex,
            age: r.age,
            incidence: r.incidence,
            case_fatality: r.case_fatality,
            remission: r.remission,
            prevalence: r.prevalence,
        };
        match out.iter_mut().find(|d| d.id == r.disease_id) {
            Some(d) => {
                if d.dw != r.dw {
                    return Err(parse_err(
                        diseases_origin,
                        line,
                        format!("disease `{}` has dw {} here but {} earlier", d.id, r.dw, d.dw),
                    ));
                }
                d.rates.push(rates);
            }
            None => out.push(DiseaseProcess {
                id: r.disease_id,
                dw: r.dw,
                rates: vec![rates],
                links: Vec::new(),
            }),
        }
    }
    for (line, r) in rows::<LinkRecord>(links_text, links_origin)? {
        let lag = LagWindow::new(r.lag_start, r.lag_end)
            .map_err(|e| parse_err(links_origin, line, e.to_string()))?;
        let d = out
            .iter_mut()
            .find(|d| d.id == r.disease_id)
            .ok_or_else(|| parse_err(links_origin, line, format!("unknown disease `{}`", r.disease_id)))?;
        d.links.push(ExposureLink {
            risk_factor: r.risk_factor,
            rr_per_unit: r.rr_per_unit,
            lag,
        });
    }
    Ok(out)
}

/// Either the name of a built-in scenario or an inline spec.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicyRef {
    Builtin(String),
    Inline(PolicySpec),
}

impl PolicyRef {
    pub fn resolve(&self) -> Result<PolicySpec> {
        match self {
            PolicyRef::Builtin(name) => policy::builtin(name)
                .ok_or_else(|| Error::invalid(format!("unknown built-in policy `{name}`"))),
            PolicyRef::Inline(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub foods: PathBuf,
    pub pe_matrix: PathBuf,
    pub pe_matrix_sd: Option<PathBuf>,
    pub group_mapping: Option<PathBuf>,
    pub expenditure_elasticities: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub diseases: Option<PathBuf>,
    pub rr_links: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescaleConfig {
    /// energy, grams, expenditure or tfee.
    pub mode: String,
    pub tfee: f64,
    pub eta_basis: EtaBasis,
    pub expenditure_convention: ExpenditureConvention,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        Self {
            mode: "tfee".into(),
            tfee: TFEE_CENTRAL,
            eta_basis: EtaBasis::default(),
            expenditure_convention: ExpenditureConvention::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnthroConfig {
    pub mean_height_m: f64,
    pub baseline_bmi: f64,
    pub rho_kj_per_day_per_kg: Option<f64>,
    pub kj_per_day_per_bmi_unit: Option<f64>,
}

impl Default for AnthroConfig {
    fn default() -> Self {
        Self {
            mean_height_m: DEFAULT_HEIGHT_M,
            baseline_bmi: 27.5,
            rho_kj_per_day_per_kg: None,
            kj_per_day_per_bmi_unit: None,
        }
    }
}

impl AnthroConfig {
    pub fn resolve(&self) -> Result<PopulationAnthro> {
        match (self.rho_kj_per_day_per_kg, self.kj_per_day_per_bmi_unit) {
            (Some(_), Some(_)) => Err(Error::invalid(
                "give either rho_kj_per_day_per_kg or kj_per_day_per_bmi_unit, not both",
            )),
            (None, Some(k)) => PopulationAnthro::from_composite(self.mean_height_m, self.baseline_bmi, k),
            (rho, None) => {
                let a = PopulationAnthro {
                    mean_height: self.mean_height_m,
                    baseline_bmi: self.baseline_bmi,
                    energy_to_weight: rho.unwrap_or(DEFAULT_RHO),
                };
                a.check()?;
                Ok(a)
            }
        }
    }
}

fn default_discount_rates() -> Vec<f64> {
    vec![0.0, 0.03]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub data: DataPaths,
    pub policy: Option<PolicyRef>,
    #[serde(default)]
    pub rescale: RescaleConfig,
    #[serde(default)]
    pub anthro: AnthroConfig,
    #[serde(default)]
    pub disaggregation: DisaggScalar,
    #[serde(default = "default_discount_rates")]
    pub discount_rates: Vec<f64>,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1) as u64);
            parse_err(origin, line, e.message().to_string())
        })?;
        cfg.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn path(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn rescale_mode(&self) -> Result<RescaleMode> {
        RescaleMode::parse(&self.rescale.mode, self.rescale.tfee)
    }
}
