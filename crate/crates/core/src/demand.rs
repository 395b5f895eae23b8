//! Food baskets, price elasticity matrices and the conventional (linear,
//! Marshallian) application of price changes.
//!
//! Prices are currency per 100 g and quantities are grams per day, so the
//! daily expenditure on a food is `quantity * price / 100`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::ValidationReport;

/// Elasticities with a larger magnitude than this are flagged as suspicious.
pub const PE_MAGNITUDE_WARNING: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nutrient {
    #[serde(alias = "kj")]
    Energy,
    #[serde(alias = "safa", alias = "satfat")]
    SaturatedFat,
    Sugar,
    Salt,
    Pufa,
    Fruit,
    #[serde(alias = "vegetables", alias = "veg")]
    Vegetable,
    #[serde(alias = "ssb")]
    SsbVolume,
}

impl Nutrient {
    pub const ALL: [Nutrient; 8] = [
        Nutrient::Energy,
        Nutrient::SaturatedFat,
        Nutrient::Sugar,
        Nutrient::Salt,
        Nutrient::Pufa,
        Nutrient::Fruit,
        Nutrient::Vegetable,
        Nutrient::SsbVolume,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Nutrient::Energy => "energy",
            Nutrient::SaturatedFat => "saturated_fat",
            Nutrient::Sugar => "sugar",
            Nutrient::Salt => "salt",
            Nutrient::Pufa => "pufa",
            Nutrient::Fruit => "fruit",
            Nutrient::Vegetable => "vegetable",
            Nutrient::SsbVolume => "ssb_volume",
        }
    }
}

impl fmt::Display for Nutrient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Nutrient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = match s.trim().to_ascii_lowercase().as_str() {
            "energy" | "kj" => Nutrient::Energy,
            "saturated_fat" | "satfat" | "safa" => Nutrient::SaturatedFat,
            "sugar" => Nutrient::Sugar,
            "salt" => Nutrient::Salt,
            "pufa" => Nutrient::Pufa,
            "fruit" => Nutrient::Fruit,
            "vegetable" | "vegetables" | "veg" => Nutrient::Vegetable,
            "ssb_volume" | "ssb" => Nutrient::SsbVolume,
            other => return Err(Error::UnknownNutrient(other.to_string())),
        };
        Ok(n)
    }
}

/// Nutrient amounts: per 100 g of a food, or per day for basket totals.
///
/// Energy is in kJ, SSB volume in ml, everything else in grams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientVector {
    pub energy: f64,
    pub saturated_fat: f64,
    pub sugar: f64,
    pub salt: f64,
    pub pufa: f64,
    pub fruit: f64,
    pub vegetable: f64,
    pub ssb_volume: f64,
}

impl NutrientVector {
    pub fn get(&self, n: Nutrient) -> f64 {
        match n {
            Nutrient::Energy => self.energy,
            Nutrient::SaturatedFat => self.saturated_fat,
            Nutrient::Sugar => self.sugar,
            Nutrient::Salt => self.salt,
            Nutrient::Pufa => self.pufa,
            Nutrient::Fruit => self.fruit,
            Nutrient::Vegetable => self.vegetable,
            Nutrient::SsbVolume => self.ssb_volume,
        }
    }

    pub fn get_mut(&mut self, n: Nutrient) -> &mut f64 {
        match n {
            Nutrient::Energy => &mut self.energy,
            Nutrient::SaturatedFat => &mut self.saturated_fat,
            Nutrient::Sugar => &mut self.sugar,
            Nutrient::Salt => &mut self.salt,
            Nutrient::Pufa => &mut self.pufa,
            Nutrient::Fruit => &mut self.fruit,
            Nutrient::Vegetable => &mut self.vegetable,
            Nutrient::SsbVolume => &mut self.ssb_volume,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = *self;
        for n in Nutrient::ALL {
            *out.get_mut(n) = f(self.get(n));
        }
        out
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = *self;
        for n in Nutrient::ALL {
            *out.get_mut(n) = f(self.get(n), other.get(n));
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn is_nonnegative(&self) -> bool {
        Nutrient::ALL.iter().all(|&n| self.get(n) >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub id: String,
    pub name: String,
    pub group_id: String,
    /// Grams per day per capita.
    pub quantity: f64,
    /// Currency per 100 g.
    pub price: f64,
    /// Composition per 100 g of food.
    pub composition: NutrientVector,
}

impl FoodItem {
    pub fn expenditure(&self) -> f64 {
        self.quantity * self.price / 100.0
    }

    fn check(&self) -> Result<()> {
        if !(self.quantity >= 0.0 && self.quantity.is_finite()) {
            return Err(Error::invalid(format!(
                "food `{}`: quantity {} must be finite and >= 0",
                self.id, self.quantity
            )));
        }
        if !(self.price > 0.0 && self.price.is_finite()) {
            return Err(Error::invalid(format!(
                "food `{}`: price {} must be finite and > 0",
                self.id, self.price
            )));
        }
        if !self.composition.is_nonnegative() {
            return Err(Error::invalid(format!(
                "food `{}`: composition values must be >= 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// An ordered set of foods with quantities and prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basket {
    items: Vec<FoodItem>,
}

impl Basket {
    pub fn new(items: Vec<FoodItem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            item.check()?;
            if !seen.insert(item.id.as_str()) {
                return Err(Error::invalid(format!("duplicate food id `{}`", item.id)));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[FoodItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|f| f.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|f| f.id == id)
    }

    pub fn quantities(&self) -> Vec<f64> {
        self.items.iter().map(|f| f.quantity).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.items.iter().map(|f| f.price).collect()
    }

    pub fn expenditures(&self) -> Vec<f64> {
        self.items.iter().map(FoodItem::expenditure).collect()
    }

    pub fn total_expenditure(&self) -> f64 {
        self.items.iter().map(FoodItem::expenditure).sum()
    }

    /// Expenditure on this basket's quantities valued at another basket's prices.
    pub fn expenditure_at_prices_of(&self, other: &Basket) -> Result<f64> {
        self.check_aligned(other)?;
        Ok(self
            .items
            .iter()
            .zip(&other.items)
            .map(|(a, b)| a.quantity * b.price / 100.0)
            .sum())
    }

    pub fn total_grams(&self) -> f64 {
        self.items.iter().map(|f| f.quantity).sum()
    }

    /// Same foods and prices with new quantities.
    pub fn with_quantities(&self, quantities: &[f64]) -> Result<Basket> {
        if quantities.len() != self.items.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} quantities for {} foods",
                quantities.len(),
                self.items.len()
            )));
        }
        let items = self
            .items
            .iter()
            .zip(quantities)
            .map(|(f, &q)| FoodItem {
                quantity: q,
                ..f.clone()
            })
            .collect();
        Basket::new(items)
    }

    /// Multiply every quantity by `ratio`.
    pub fn scaled(&self, ratio: f64) -> Result<Basket> {
        let q: Vec<f64> = self.items.iter().map(|f| f.quantity * ratio).collect();
        self.with_quantities(&q)
    }

    pub(crate) fn check_aligned(&self, other: &Basket) -> Result<()> {
        if self.items.len() != other.items.len()
            || self.items.iter().zip(&other.items).any(|(a, b)| a.id != b.id)
        {
            return Err(Error::DimensionMismatch(
                "baskets do not list the same foods in the same order".into(),
            ));
        }
        Ok(())
    }
}

/// Marshallian price elasticities. `values[i][j]` is the percentage change in
/// the quantity of food `i` for a 1% change in the price of food `j`.
///
/// Shape is not enforced at construction so that malformed input can be
/// reported by [`validate_pe_matrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeMatrix {
    pub food_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub sd: Option<Vec<Vec<f64>>>,
}

impl PeMatrix {
    pub fn new(food_ids: Vec<String>, values: Vec<Vec<f64>>) -> Self {
        Self {
            food_ids,
            values,
            sd: None,
        }
    }

    pub fn with_sd(mut self, sd: Vec<Vec<f64>>) -> Self {
        self.sd = Some(sd);
        self
    }

    pub fn dim(&self) -> usize {
        self.food_ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.food_ids.iter().position(|f| f == id)
    }

    fn is_square(&self) -> bool {
        let n = self.food_ids.len();
        self.values.len() == n && self.values.iter().all(|r| r.len() == n)
    }

    pub(crate) fn ensure_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "PE matrix is not square over {} ids",
                self.food_ids.len()
            )))
        }
    }

    /// Position in this matrix of each basket food, failing if any is absent
    /// or the sizes differ.
    fn alignment(&self, basket: &Basket) -> Result<Vec<usize>> {
        self.ensure_square()?;
        if self.dim() != basket.len() {
            return Err(Error::DimensionMismatch(format!(
                "PE matrix has {} foods, basket has {}",
                self.dim(),
                basket.len()
            )));
        }
        let index: HashMap<&str, usize> = self
            .food_ids
            .iter()
            .enumerate()
            .map(|(k, id)| (id.as_str(), k))
            .collect();
        basket
            .ids()
            .map(|id| {
                index.get(id).copied().ok_or_else(|| {
                    Error::DimensionMismatch(format!("food `{id}` missing from PE matrix"))
                })
            })
            .collect()
    }
}

/// Fractional price change per food (`Δp/p`), in basket order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceChange(pub Vec<f64>);

impl PriceChange {
    pub fn zero(n: usize) -> Self {
        PriceChange(vec![0.0; n])
    }

    pub fn uniform(n: usize, delta: f64) -> Self {
        PriceChange(vec![delta; n])
    }

    pub fn deltas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_for(&self, basket: &Basket) -> Result<()> {
        if self.0.len() != basket.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} price changes for {} foods",
                self.0.len(),
                basket.len()
            )));
        }
        for (d, f) in self.0.iter().zip(basket.items()) {
            if !(*d > -1.0) || !d.is_finite() {
                return Err(Error::PriceWouldBeNonpositive {
                    food: f.id.clone(),
                    delta: *d,
                });
            }
        }
        Ok(())
    }
}

/// Which prices value the post-policy basket when computing expenditure change.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpenditureConvention {
    /// Post-policy quantities at post-policy prices.
    #[default]
    PostPolicy,
    /// Post-policy quantities at baseline prices (worked-example tables).
    BaselinePrice,
}

impl FromStr for ExpenditureConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post_policy" | "post-policy" => Ok(Self::PostPolicy),
            "baseline_price" | "baseline-price" => Ok(Self::BaselinePrice),
            other => Err(Error::invalid(format!(
                "unknown expenditure convention `{other}`"
            ))),
        }
    }
}

/// Result of pushing a price change through a PE matrix.
#[derive(Debug, Clone)]
pub struct PeOutcome {
    /// Post-policy quantities at post-policy prices.
    pub basket: Basket,
    /// Ids of foods whose linear response went negative and were set to 0.
    pub floored: Vec<String>,
}

pub fn compute_shares(basket: &Basket) -> Result<Vec<f64>> {
    let total = basket.total_expenditure();
    if !(total > 0.0) {
        return Err(Error::ZeroExpenditure);
    }
    Ok(basket.expenditures().into_iter().map(|e| e / total).collect())
}

/// `q_i' = q_i (1 + Σ_j e_ij δ_j)`, floored at zero, with prices moved to
/// `p_i (1 + δ_i)`.
pub fn apply_pe_matrix(basket: &Basket, pem: &PeMatrix, dp: &PriceChange) -> Result<PeOutcome> {
    dp.check_for(basket)?;
    let pos = pem.alignment(basket)?;
    let deltas = dp.deltas();
    let mut floored = Vec::new();
    let mut items = Vec::with_capacity(basket.len());
    for (i, food) in basket.items().iter().enumerate() {
        let row = &pem.values[pos[i]];
        let response: f64 = pos
            .iter()
            .zip(deltas)
            .map(|(&pj, &d)| row[pj] * d)
            .sum();
        let mut q = food.quantity * (1.0 + response);
        if !q.is_finite() {
            return Err(Error::NonFiniteResult(food.id.clone()));
        }
        if q < 0.0 {
            floored.push(food.id.clone());
            q = 0.0;
        }
        items.push(FoodItem {
            quantity: q,
            price: food.price * (1.0 + deltas[i]),
            ..food.clone()
        });
    }
    Ok(PeOutcome {
        basket: Basket::new(items)?,
        floored,
    })
}

/// Baseline-share weighted mean of the fractional price changes.
pub fn fpi_change(basket: &Basket, dp: &PriceChange) -> Result<f64> {
    dp.check_for(basket)?;
    let shares = compute_shares(basket)?;
    Ok(shares.iter().zip(dp.deltas()).map(|(w, d)| w * d).sum())
}

pub fn expenditure_change(
    pre: &Basket,
    post: &Basket,
    convention: ExpenditureConvention,
) -> Result<f64> {
    let before = pre.total_expenditure();
    if !(before > 0.0) {
        return Err(Error::ZeroExpenditure);
    }
    let after = match convention {
        ExpenditureConvention::PostPolicy => {
            pre.check_aligned(post)?;
            post.total_expenditure()
        }
        ExpenditureConvention::BaselinePrice => post.expenditure_at_prices_of(pre)?,
    };
    Ok((after - before) / before)
}

/// Expenditure change per unit change in the food price index.
pub fn revealed_tfee(exp_change: f64, fpi_change: f64) -> Result<f64> {
    if fpi_change == 0.0 {
        return Err(Error::ZeroFpiChange);
    }
    Ok(exp_change / fpi_change)
}

pub fn validate_pe_matrix(pem: &PeMatrix) -> ValidationReport {
    let mut report = ValidationReport::new();
    let n = pem.food_ids.len();
    if pem.values.len() != n || pem.values.iter().any(|r| r.len() != pem.values.len()) {
        let cols = pem.values.first().map_or(0, Vec::len);
        report.error(format!(
            "not square: {} rows x {} columns for {} ids",
            pem.values.len(),
            cols,
            n
        ));
    }
    let mut seen = HashSet::new();
    for id in &pem.food_ids {
        if !seen.insert(id) {
            report.error(format!("duplicate id `{id}`"));
        }
    }
    for (i, row) in pem.values.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            if !e.is_finite() {
                report.error(format!("non-finite entry at ({i}, {j})"));
                continue;
            }
            if i == j && e > 0.0 {
                report.error(format!("positive own-PE at index {i} ({e})"));
            }
            if e.abs() > PE_MAGNITUDE_WARNING {
                report.warn(format!("|e| > {PE_MAGNITUDE_WARNING} at ({i}, {j}): {e}"));
            }
        }
    }
    if let Some(sd) = &pem.sd {
        let same_shape = sd.len() == pem.values.len()
            && sd.iter().zip(&pem.values).all(|(a, b)| a.len() == b.len());
        if !same_shape {
            report.error("SD matrix shape differs from PE matrix");
        } else if sd.iter().flatten().any(|s| !(s.is_finite() && *s >= 0.0)) {
            report.error("SD matrix has negative or non-finite entries");
        }
    }
    report
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn shares_setting_one() {
        let s = compute_shares(&three_food(50.0, 200.0, 200.0)).unwrap();
        assert_abs_diff_eq!(s[0] * 100.0, 6.3, epsilon = 0.1);
        assert_abs_diff_eq!(s[1] * 100.0, 31.3, epsilon = 0.1);
        assert_abs_diff_eq!(s[2] * 100.0, 62.5, epsilon = 0.1);
        assert_abs_diff_eq!(s.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn shares_setting_two() {
        let s = compute_shares(&three_food(100.0, 100.0, 200.0)).unwrap();
        assert_abs_diff_eq!(s[0] * 100.0, 13.8, epsilon = 0.1);
        assert_abs_diff_eq!(s[1] * 100.0, 17.2, epsilon = 0.1);
        assert_abs_diff_eq!(s[2] * 100.0, 69.0, epsilon = 0.1);
    }

    #[test]
    fn single_food_share_is_one() {
        let b = Basket::new(vec![food("a", 10.0, 2.0, 1.0)]).unwrap();
        assert_eq!(compute_shares(&b).unwrap(), vec![1.0]);
    }

    #[test]
    fn zero_expenditure_is_an_error() {
        let b = three_food(0.0, 0.0, 0.0);
        assert!(matches!(compute_shares(&b), Err(Error::ZeroExpenditure)));
        assert!(matches!(
            fpi_change(&b, &PriceChange::zero(3)),
            Err(Error::ZeroExpenditure)
        ));
    }

    #[test]
    fn fruit_subsidy_setting_one() {
        let out = apply_pe_matrix(&three_food(50.0, 200.0, 200.0), &three_food_pe(), &fruit_subsidy())
            .unwrap();
        let q = out.basket.quantities();
        assert_abs_diff_eq!(q[0], 60.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q[1], 188.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q[2], 202.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.basket.items()[0].price, 0.32, epsilon = 1e-12);
        assert!(out.floored.is_empty());
    }

    #[test]
    fn fruit_subsidy_setting_two() {
        let pre = three_food(100.0, 100.0, 200.0);
        let out = apply_pe_matrix(&pre, &three_food_pe(), &fruit_subsidy()).unwrap();
        let q = out.basket.quantities();
        assert_abs_diff_eq!(q[0], 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q[1], 94.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q[2], 202.0, epsilon = 1e-9);
        let kj = |b: &Basket| -> f64 {
            b.items().iter().map(|f| f.quantity * f.composition.energy / 100.0).sum()
        };
        assert_abs_diff_eq!(kj(&pre), 1300.0, epsilon = 1e-9);
        assert_abs_diff_eq!(kj(&out.basket), 1331.0, epsilon = 1e-9);
        let dexp =
            expenditure_change(&pre, &out.basket, ExpenditureConvention::BaselinePrice).unwrap();
        assert_abs_diff_eq!(dexp * 100.0, 2.41, epsilon = 0.005);
    }

    #[test]
    fn zero_price_change_is_identity() {
        let pre = three_food(50.0, 200.0, 200.0);
        let out = apply_pe_matrix(&pre, &three_food_pe(), &PriceChange::zero(3)).unwrap();
        assert_eq!(out.basket, pre);
    }

    #[test]
    fn pe_matrix_can_be_ordered_differently_from_basket() {
        let mut pem = three_food_pe();
        pem.food_ids.swap(0, 2);
        pem.values.swap(0, 2);
        for row in &mut pem.values {
            row.swap(0, 2);
        }
        let out = apply_pe_matrix(&three_food(50.0, 200.0, 200.0), &pem, &fruit_subsidy()).unwrap();
        assert_abs_diff_eq!(out.basket.quantities()[1], 188.0, epsilon = 1e-9);
    }

    #[test]
    fn negative_quantities_are_floored() {
        let pre = three_food(50.0, 200.0, 200.0);
        let out = apply_pe_matrix(&pre, &three_food_pe(), &PriceChange(vec![1.5, 0.0, 0.0])).unwrap();
        assert_eq!(out.basket.quantities()[0], 0.0);
        assert_eq!(out.floored, vec!["fruit".to_string()]);
    }

    #[test]
    fn mismatched_dimensions() {
        let pre = three_food(50.0, 200.0, 200.0);
        let pem = PeMatrix::new(vec!["fruit".into()], vec![vec![-1.0]]);
        assert!(matches!(
            apply_pe_matrix(&pre, &pem, &PriceChange::zero(3)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            apply_pe_matrix(&pre, &three_food_pe(), &PriceChange::zero(2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn price_change_must_exceed_minus_one() {
        let pre = three_food(50.0, 200.0, 200.0);
        let err = apply_pe_matrix(&pre, &three_food_pe(), &PriceChange(vec![-1.0, 0.0, 0.0]));
        assert!(matches!(err, Err(Error::PriceWouldBeNonpositive { .. })));
    }

    #[test]
    fn fpi_examples() {
        let b = three_food(100.0, 100.0, 200.0);
        assert_abs_diff_eq!(fpi_change(&b, &PriceChange::uniform(3, 0.05)).unwrap(), 0.05, epsilon = 1e-15);
        // 0.40 / 2.90 of spending is on fruit
        assert_abs_diff_eq!(
            fpi_change(&b, &fruit_subsidy()).unwrap(),
            -0.20 * 0.40 / 2.90,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(fpi_change(&b, &fruit_subsidy()).unwrap(), -0.0276, epsilon = 1e-4);
        let single = Basket::new(vec![food("a", 10.0, 2.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(fpi_change(&single, &PriceChange(vec![0.10])).unwrap(), 0.10, epsilon = 1e-15);
    }

    #[test]
    fn expenditure_change_examples() {
        let b = three_food(50.0, 200.0, 200.0);
        assert_eq!(expenditure_change(&b, &b, ExpenditureConvention::PostPolicy).unwrap(), 0.0);
        let dearer = apply_pe_matrix(
            &b,
            &PeMatrix::new(
                b.ids().map(String::from).collect(),
                vec![vec![0.0; 3]; 3],
            ),
            &PriceChange::uniform(3, 0.10),
        )
        .unwrap()
        .basket;
        assert_abs_diff_eq!(
            expenditure_change(&b, &dearer, ExpenditureConvention::PostPolicy).unwrap(),
            0.10,
            epsilon = 1e-12
        );
        assert_eq!(
            expenditure_change(&b, &dearer, ExpenditureConvention::BaselinePrice).unwrap(),
            0.0
        );
    }

    #[test]
    fn revealed_tfee_examples() {
        assert_abs_diff_eq!(revealed_tfee(-0.0192, 0.0391).unwrap(), -0.491, epsilon = 0.005);
        assert_abs_diff_eq!(revealed_tfee(-0.0104, 0.0188).unwrap(), -0.553, epsilon = 0.005);
        assert_eq!(revealed_tfee(0.0, 0.3).unwrap(), 0.0);
        assert!(matches!(revealed_tfee(0.1, 0.0), Err(Error::ZeroFpiChange)));
    }

    #[test]
    fn validator_reports() {
        assert!(validate_pe_matrix(&three_food_pe()).is_empty());

        let mut pos = three_food_pe();
        pos.values[1][1] = 0.5;
        let r = validate_pe_matrix(&pos);
        assert_eq!(r.errors.len(), 1);
        assert!(r.errors[0].contains("positive own-PE at index 1"));

        let rect = PeMatrix::new(vec!["a".into(), "b".into()], vec![vec![-1.0, 0.0, 0.0]; 2]);
        assert!(validate_pe_matrix(&rect).errors[0].contains("not square"));

        let mut wild = three_food_pe();
        wild.values[0][2] = 7.0;
        wild.values[2][0] = f64::NAN;
        let r = validate_pe_matrix(&wild);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.errors.iter().any(|e| e.contains("non-finite")));
    }

    #[test]
    fn basket_rejects_bad_items() {
        assert!(Basket::new(vec![food("a", -1.0, 1.0, 0.0)]).is_err());
        assert!(Basket::new(vec![food("a", 1.0, 0.0, 0.0)]).is_err());
        assert!(Basket::new(vec![food("a", 1.0, 1.0, 0.0), food("a", 2.0, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn nutrient_keys_round_trip() {
        for n in Nutrient::ALL {
            assert_eq!(n.key().parse::<Nutrient>().unwrap(), n);
        }
        assert_eq!("safa".parse::<Nutrient>().unwrap(), Nutrient::SaturatedFat);
        assert!(matches!("fibre".parse::<Nutrient>(), Err(Error::UnknownNutrient(_))));
    }

    type Case = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

    fn arb_case() -> impl Strategy<Value = Case> {
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(1.0..500.0f64, n),
                prop::collection::vec(0.1..3.0f64, n),
                prop::collection::vec(prop::collection::vec(-0.3..0.3f64, n), n),
                prop::collection::vec(-0.1..0.1f64, n),
                prop::collection::vec(-0.1..0.1f64, n),
            )
        })
    }

    fn basket_from(q: &[f64], p: &[f64]) -> Basket {
        Basket::new(
            q.iter()
                .zip(p)
                .enumerate()
                .map(|(k, (&q, &p))| food(&format!("f{k}"), q, p, 100.0))
                .collect(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn pe_application_is_linear((q, p, e, d1, d2) in arb_case(), a in -1.5..1.5f64, b in -1.5..1.5f64) {
            let basket = basket_from(&q, &p);
            let pem = PeMatrix::new(basket.ids().map(String::from).collect(), e);
            let delta = |d: &[f64]| -> Vec<f64> {
                let out = apply_pe_matrix(&basket, &pem, &PriceChange(d.to_vec())).unwrap();
                assert!(out.floored.is_empty());
                out.basket.quantities().iter().zip(&q).map(|(x, y)| x - y).collect()
            };
            let combo: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + b * y).collect();
            let lhs = delta(&combo);
            let r1 = delta(&d1);
            let r2 = delta(&d2);
            for k in 0..q.len() {
                prop_assert!((lhs[k] - (a * r1[k] + b * r2[k])).abs() < 1e-9 * (1.0 + q[k]));
            }
        }

        #[test]
        fn uniform_price_change_moves_fpi_exactly((q, p, _e, _d1, _d2) in arb_case(), d in -0.5..0.5f64) {
            let basket = basket_from(&q, &p);
            let f = fpi_change(&basket, &PriceChange::uniform(q.len(), d)).unwrap();
            prop_assert!((f - d).abs() < 1e-12);
        }

        #[test]
        fn revealed_tfee_is_scale_invariant((q, p, e, d1, _d2) in arb_case(), c in 0.01..100.0f64) {
            let run = |scale: f64| -> f64 {
                let qs: Vec<f64> = q.iter().map(|x| x * scale).collect();
                let basket = basket_from(&qs, &p);
                let pem = PeMatrix::new(basket.ids().map(String::from).collect(), e.clone());
                let dp = PriceChange(d1.clone());
                let post = apply_pe_matrix(&basket, &pem, &dp).unwrap().basket;
                let dexp = expenditure_change(&basket, &post, ExpenditureConvention::PostPolicy).unwrap();
                revealed_tfee(dexp, fpi_change(&basket, &dp).unwrap()).unwrap_or(0.0)
            };
            let (a, b) = (run(1.0), run(c));
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }
}
