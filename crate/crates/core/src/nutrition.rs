//! Daily nutrient totals and the steady-state energy intake to BMI mapping.

use serde::{Deserialize, Serialize};

use crate::demand::{Basket, NutrientVector};
use crate::error::{Error, Result};

/// kJ/day per kg of eventual body weight change (steady-state rule of thumb).
pub const DEFAULT_RHO: f64 = 100.0;
pub const DEFAULT_HEIGHT_M: f64 = 1.70;
/// kJ/day per unit of BMI implied by the Table-style calibration
/// (348 kJ -> 0.61 and 740 kJ -> 1.30 BMI units).
pub const CALIBRATED_KJ_PER_BMI_UNIT: f64 = 569.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationAnthro {
    pub mean_height: f64,
    pub baseline_bmi: f64,
    /// kJ/day per kg of eventual weight change.
    pub energy_to_weight: f64,
}

impl Default for PopulationAnthro {
    fn default() -> Self {
        Self {
            mean_height: DEFAULT_HEIGHT_M,
            baseline_bmi: 27.5,
            energy_to_weight: DEFAULT_RHO,
        }
    }
}

impl PopulationAnthro {
    /// Keeps `mean_height` and picks `rho` so that `rho * height^2` equals
    /// the composite coefficient.
    pub fn from_composite(mean_height: f64, baseline_bmi: f64, kj_per_bmi_unit: f64) -> Result<Self> {
        let a = Self {
            mean_height,
            baseline_bmi,
            energy_to_weight: kj_per_bmi_unit / (mean_height * mean_height),
        };
        a.check()?;
        Ok(a)
    }

    pub fn calibrated() -> Self {
        Self::from_composite(DEFAULT_HEIGHT_M, 27.5, CALIBRATED_KJ_PER_BMI_UNIT)
            .expect("calibrated preset is valid")
    }

    /// kJ/day of sustained intake change per unit of BMI.
    pub fn kj_per_bmi_unit(&self) -> f64 {
        self.energy_to_weight * self.mean_height * self.mean_height
    }

    pub fn check(&self) -> Result<()> {
        if !(self.mean_height > 1.0 && self.mean_height < 2.2) {
            return Err(Error::invalid(format!(
                "mean height {} m outside (1.0, 2.2)",
                self.mean_height
            )));
        }
        if !(self.energy_to_weight > 0.0 && self.energy_to_weight.is_finite()) {
            return Err(Error::invalid(format!(
                "energy-to-weight coefficient {} must be positive",
                self.energy_to_weight
            )));
        }
        Ok(())
    }
}

/// Per-day totals `Σ q_i c_ik / 100`.
pub fn nutrient_totals(basket: &Basket) -> NutrientVector {
    basket
        .items()
        .iter()
        .fold(NutrientVector::default(), |acc, f| {
            acc.zip(&f.composition, |a, c| a + f.quantity * c / 100.0)
        })
}

pub fn total_energy(basket: &Basket) -> f64 {
    basket
        .items()
        .iter()
        .map(|f| f.quantity * f.composition.energy / 100.0)
        .sum()
}

/// Steady-state BMI shift for a sustained change in energy intake.
pub fn bmi_change(delta_energy: f64, anthro: &PopulationAnthro) -> f64 {
    delta_energy / anthro.energy_to_weight / (anthro.mean_height * anthro.mean_height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::fixtures::three_food;
    use approx::assert_abs_diff_eq;

    #[test]
    fn totals_for_three_food_world() {
        assert_abs_diff_eq!(nutrient_totals(&three_food(50.0, 200.0, 200.0)).energy, 1375.0, epsilon = 1e-9);
        assert_abs_diff_eq!(nutrient_totals(&three_food(120.0, 94.0, 202.0)).energy, 1331.0, epsilon = 1e-9);
        assert_eq!(nutrient_totals(&Basket::new(vec![]).unwrap()), NutrientVector::default());
    }

    #[test]
    fn totals_are_linear() {
        let b = three_food(50.0, 200.0, 200.0);
        let t = nutrient_totals(&b);
        let t3 = nutrient_totals(&b.scaled(3.0).unwrap());
        assert_abs_diff_eq!(t3.energy, 3.0 * t.energy, epsilon = 1e-9);
    }

    #[test]
    fn bmi_examples() {
        let calibrated = PopulationAnthro::calibrated();
        assert_eq!(bmi_change(0.0, &calibrated), 0.0);
        assert_abs_diff_eq!(bmi_change(-348.0, &calibrated), -0.61, epsilon = 0.005);
        assert_abs_diff_eq!(bmi_change(-740.0, &calibrated), -1.30, epsilon = 0.005);
        assert_abs_diff_eq!(calibrated.kj_per_bmi_unit(), 569.0, epsilon = 1e-9);
        let plain = PopulationAnthro::default();
        assert_abs_diff_eq!(bmi_change(-400.0, &plain), 2.0 * bmi_change(-200.0, &plain), epsilon = 1e-15);
        assert_abs_diff_eq!(plain.kj_per_bmi_unit(), 289.0, epsilon = 1e-9);
    }

    #[test]
    fn anthro_bounds() {
        assert!(PopulationAnthro::from_composite(2.5, 27.0, 569.0).is_err());
        assert!(PopulationAnthro::from_composite(1.7, 27.0, -1.0).is_err());
    }
}
