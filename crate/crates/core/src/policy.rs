//! Tax and subsidy policies, translated into fractional price changes with
//! full pass-through to consumer prices.

use serde::{Deserialize, Serialize};

use crate::demand::{Basket, Nutrient, PriceChange};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyComponent {
    /// Tax of `rate` currency per 100 g of `nutrient`, levied on every food.
    NutrientExcise { nutrient: Nutrient, rate: f64 },
    /// Proportional price change on the selected foods or food groups.
    /// Negative fractions are subsidies.
    AdValorem { selector: Vec<String>, fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default)]
    pub components: Vec<PolicyComponent>,
}

impl PolicySpec {
    pub fn null() -> Self {
        Self {
            name: "null".into(),
            components: Vec::new(),
        }
    }

    pub fn is_null(&self) -> bool {
        self.components.is_empty()
    }
}

pub fn builtin_scenarios() -> Vec<PolicySpec> {
    vec![
        PolicySpec {
            name: "safa_tax".into(),
            components: vec![PolicyComponent::NutrientExcise {
                nutrient: Nutrient::SaturatedFat,
                rate: 2.0,
            }],
        },
        PolicySpec {
            name: "sugar_tax".into(),
            components: vec![PolicyComponent::NutrientExcise {
                nutrient: Nutrient::Sugar,
                rate: 0.4,
            }],
        },
        PolicySpec {
            name: "fv_subsidy".into(),
            components: vec![PolicyComponent::AdValorem {
                selector: vec!["fruit".into(), "vegetables".into()],
                fraction: -0.20,
            }],
        },
    ]
}

pub fn builtin(name: &str) -> Option<PolicySpec> {
    if name == "null" {
        return Some(PolicySpec::null());
    }
    builtin_scenarios().into_iter().find(|p| p.name == name)
}

impl PolicyComponent {
    fn add_deltas(&self, basket: &Basket, deltas: &mut [f64]) -> Result<()> {
        match self {
            PolicyComponent::NutrientExcise { nutrient, rate } => {
                if !rate.is_finite() {
                    return Err(Error::invalid(format!("excise rate {rate} is not finite")));
                }
                for (d, food) in deltas.iter_mut().zip(basket.items()) {
                    // rate per 100 g of nutrient, n grams of nutrient per 100 g of food
                    *d += rate * food.composition.get(*nutrient) / (100.0 * food.price);
                }
            }
            PolicyComponent::AdValorem { selector, fraction } => {
                if !(*fraction > -1.0 && fraction.is_finite()) {
                    return Err(Error::invalid(format!(
                        "ad valorem fraction {fraction} must be finite and > -1"
                    )));
                }
                let mut hit = false;
                for (d, food) in deltas.iter_mut().zip(basket.items()) {
                    if selector
                        .iter()
                        .any(|s| *s == food.id || *s == food.group_id)
                    {
                        *d += fraction;
                        hit = true;
                    }
                }
                if !hit {
                    return Err(Error::EmptySelector(selector.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Sum of each component's fractional price change, per basket food.
pub fn price_change(policy: &PolicySpec, basket: &Basket) -> Result<PriceChange> {
    let mut deltas = vec![0.0; basket.len()];
    for c in &policy.components {
        c.add_deltas(basket, &mut deltas)?;
    }
    for (d, food) in deltas.iter().zip(basket.items()) {
        if !(*d > -1.0) {
            return Err(Error::PriceWouldBeNonpositive {
                food: food.id.clone(),
                delta: *d,
            });
        }
    }
    Ok(PriceChange(deltas))
}
