//! The three-food worked example: a 20% fruit subsidy under one PE matrix,
//! applied to two different starting diets.

use std::fmt::Write;

use crate::demand::{apply_pe_matrix, Basket, FoodItem, NutrientVector, PeMatrix};
use crate::error::Result;
use crate::nutrition::total_energy;
use crate::policy::{price_change, PolicyComponent, PolicySpec};

const FOODS: [(&str, &str, f64, f64); 3] = [
    ("fruit", "Fruit", 0.40, 150.0),
    ("vegetables", "Vegetables", 0.50, 150.0),
    ("cereals", "Cereals", 1.00, 500.0),
];

pub fn basket(quantities: [f64; 3]) -> Result<Basket> {
    Basket::new(
        FOODS
            .iter()
            .zip(quantities)
            .map(|(&(id, name, price, kj), q)| FoodItem {
                id: id.into(),
                name: name.into(),
                group_id: id.into(),
                quantity: q,
                price,
                composition: NutrientVector {
                    energy: kj,
                    ..Default::default()
                },
            })
            .collect(),
    )
}

/// Fruit price column only: own −1, vegetables +0.30, cereals −0.05.
pub fn pe_matrix() -> PeMatrix {
    PeMatrix::new(
        FOODS.iter().map(|f| f.0.to_string()).collect(),
        vec![
            vec![-1.0, 0.0, 0.0],
            vec![0.30, -1.0, 0.0],
            vec![-0.05, 0.0, -1.0],
        ],
    )
}

pub fn fruit_subsidy() -> PolicySpec {
    PolicySpec {
        name: "fruit_subsidy".into(),
        components: vec![PolicyComponent::AdValorem {
            selector: vec!["fruit".into()],
            fraction: -0.20,
        }],
    }
}

/// Pre- and post-subsidy baskets for a starting diet.
pub fn simulate(quantities: [f64; 3]) -> Result<(Basket, Basket)> {
    let pre = basket(quantities)?;
    let dp = price_change(&fruit_subsidy(), &pre)?;
    let post = apply_pe_matrix(&pre, &pe_matrix(), &dp)?.basket;
    Ok((pre, post))
}

fn round_half_up(x: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    let r = (x * k + x.signum() * 1e-9).round() / k;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// One decimal, with a trailing ".0" dropped.
fn short_pct(x: f64) -> String {
    let s = format!("{:.1}", round_half_up(x, 1));
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn with_commas(x: f64) -> String {
    let digits = format!("{:.0}", round_half_up(x, 0));
    let mut out = String::new();
    for (k, c) in digits.chars().enumerate() {
        if k > 0 && (digits.len() - k) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn block(out: &mut String, label: &str, b: &Basket, baseline: &Basket) {
    let grams = b.total_grams();
    let kj = total_energy(b);
    // Valued at baseline prices throughout.
    let spend: Vec<f64> = b
        .items()
        .iter()
        .zip(baseline.items())
        .map(|(f, p)| f.quantity * p.price / 100.0)
        .collect();
    let total_spend: f64 = spend.iter().sum();
    for (k, f) in b.items().iter().enumerate() {
        let e = f.quantity * f.composition.energy / 100.0;
        let head = if k == 0 { label } else { "" };
        let _ = writeln!(
            out,
            "{head}\t{}\t{} ({}%)\t{} ({}%)\t${:.2} ({}%)",
            f.name,
            with_commas(f.quantity),
            short_pct(100.0 * f.quantity / grams),
            with_commas(e),
            short_pct(100.0 * e / kj),
            round_half_up(spend[k], 2),
            short_pct(100.0 * spend[k] / total_spend),
        );
    }
    let _ = writeln!(
        out,
        "\tTotal\t{:.0}\t{:.0}\t${:.2}",
        round_half_up(grams, 0),
        round_half_up(kj, 0),
        round_half_up(total_spend, 2)
    );
}

fn pct_change(a: f64, b: f64) -> f64 {
    100.0 * (b - a) / a
}

fn setting(out: &mut String, title: &str, suffix: &str, q: [f64; 3]) -> Result<f64> {
    let (pre, post) = simulate(q)?;
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "\t\tg/day\tkJ\tExpenditure");
    block(out, &format!("Pre-subsidy{suffix}"), &pre, &pre);
    block(out, &format!("Post-20% subsidy on fruit{suffix}"), &post, &pre);
    let de = pct_change(total_energy(&pre), total_energy(&post));
    let spend0 = pre.total_expenditure();
    let spend1 = post.expenditure_at_prices_of(&pre)?;
    let _ = writeln!(
        out,
        "\tDifference pre- to post-subsidy\t{}%\t{:.2}%\t{:.2}%",
        short_pct(pct_change(pre.total_grams(), post.total_grams())),
        round_half_up(de, 2),
        round_half_up(pct_change(spend0, spend1), 2),
    );
    Ok(de)
}

/// Both settings' tables, tab separated, followed by the energy distortion
/// ratio between them.
pub fn textbox() -> Result<String> {
    let mut out = String::new();
    let d1 = setting(&mut out, "Setting 1", "", [50.0, 200.0, 200.0])?;
    out.push('\n');
    let d2 = setting(&mut out, "Setting 2", " in new setting", [100.0, 100.0, 200.0])?;
    out.push('\n');
    let _ = writeln!(
        out,
        "Energy change, setting 2 relative to setting 1: {:.2}% / {:.2}% = {:.2}x",
        round_half_up(d2, 2),
        round_half_up(d1, 2),
        d2 / d1
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_helpers() {
        assert_eq!(short_pct(25.0), "25");
        assert_eq!(short_pct(6.25), "6.3");
        assert_eq!(short_pct(68.98), "69");
        assert_eq!(short_pct(-0.00001), "0");
        assert_eq!(with_commas(1010.0), "1,010");
        assert_eq!(with_commas(75.0), "75");
        assert_eq!(with_commas(1234567.0), "1,234,567");
    }

    #[test]
    fn golden_output() {
        let expected = include_str!("../tests/fixtures/textbox.txt");
        assert_eq!(textbox().unwrap(), expected);
    }
}
