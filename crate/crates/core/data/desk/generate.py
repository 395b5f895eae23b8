"""Regenerates the synthetic parts of the desk dataset.

foods.csv        ~50 foods in 23 groups, NZ-like quantities, prices (NZD/100 g)
                 and composition per 100 g. Illustrative, not survey data.
population.csv   two sexes, single years of age 0-100, Gompertz mortality,
                 pYLD rising with age.
diseases.csv     coronary heart disease, type 2 diabetes, colorectal cancer.
rr_links.csv     relative risk per unit of exposure change, with lag windows.

pe_matrix.csv, pe_matrix_sd.csv and expenditure_elasticities.csv hold published
23-group estimates and are not produced here.

Run from this directory: python3 generate.py
"""
import csv
import math

# id, name, group, g/day, price/100 g, kJ, satfat, sugar, salt, pufa, fruit, veg, ssb ml
FOODS = [
    ("diet_cola", "Diet cola", "diet_soft_drinks", 60, 0.25, 5, 0, 0, 0.02, 0, 0, 0, 0),
    ("diet_lemonade", "Diet lemonade", "diet_soft_drinks", 30, 0.22, 4, 0, 0, 0.02, 0, 0, 0, 0),
    ("cola", "Cola", "regular_soft_drinks", 90, 0.22, 180, 0, 10.6, 0.02, 0, 0, 0, 100),
    ("lemonade", "Lemonade", "regular_soft_drinks", 40, 0.20, 170, 0, 10.0, 0.02, 0, 0, 0, 100),
    ("energy_drink", "Energy drink", "regular_soft_drinks", 10, 0.90, 190, 0, 11.0, 0.10, 0, 0, 0, 100),
    ("orange_juice", "Orange juice", "fruit_drinks", 60, 0.35, 180, 0, 8.5, 0.01, 0, 0, 0, 0),
    ("cordial", "Cordial and fruit drink", "fruit_drinks", 50, 0.15, 120, 0, 7.0, 0.02, 0, 0, 0, 100),
    ("tea_coffee", "Tea and coffee", "other_nonalcoholic", 450, 0.10, 10, 0.1, 0.5, 0.01, 0, 0, 0, 0),
    ("bottled_water", "Bottled water", "other_nonalcoholic", 150, 0.12, 0, 0, 0, 0.01, 0, 0, 0, 0),
    ("apples", "Apples and pears", "fruit", 55, 0.40, 220, 0, 10.0, 0, 0.1, 100, 0, 0),
    ("bananas", "Bananas", "fruit", 45, 0.35, 370, 0.1, 12.0, 0, 0.1, 100, 0, 0),
    ("citrus", "Citrus fruit", "fruit", 30, 0.45, 170, 0, 8.0, 0, 0, 100, 0, 0),
    ("berries", "Berries and kiwifruit", "fruit", 20, 1.20, 220, 0, 7.0, 0, 0.2, 100, 0, 0),
    ("potatoes", "Potatoes and kumara", "vegetables", 70, 0.25, 320, 0, 1.0, 0.01, 0.05, 0, 100, 0),
    ("carrots", "Root vegetables", "vegetables", 25, 0.30, 150, 0, 5.0, 0.05, 0.1, 0, 100, 0),
    ("leafy_greens", "Leafy greens", "vegetables", 25, 0.90, 90, 0, 1.0, 0.03, 0.1, 0, 100, 0),
    ("tomatoes", "Tomatoes and salad", "vegetables", 30, 0.60, 80, 0, 3.0, 0.01, 0.1, 0, 100, 0),
    ("butter", "Butter", "butter", 10, 1.10, 3000, 51, 0.5, 1.5, 3.0, 0, 0, 0),
    ("cheddar", "Cheddar cheese", "cheese_cream", 20, 1.40, 1700, 21, 0.1, 1.7, 1.0, 0, 0, 0),
    ("lite_cheese", "Reduced-fat cheese", "cheese_cream", 8, 1.50, 1300, 13, 0.1, 1.6, 0.6, 0, 0, 0),
    ("cream", "Cream and sour cream", "cheese_cream", 8, 0.90, 1450, 23, 3.0, 0.05, 1.2, 0, 0, 0),
    ("ice_cream", "Ice cream", "ice_cream", 15, 0.70, 850, 7, 22.0, 0.15, 0.3, 0, 0, 0),
    ("frozen_yoghurt", "Frozen yoghurt", "ice_cream", 5, 0.90, 600, 2, 20.0, 0.10, 0.1, 0, 0, 0),
    ("biscuits", "Sweet biscuits", "cakes_biscuits", 15, 0.80, 2000, 10, 30.0, 0.6, 1.5, 0, 0, 0),
    ("cakes", "Cakes and muffins", "cakes_biscuits", 15, 1.10, 1600, 8, 32.0, 0.5, 1.5, 0, 0, 0),
    ("chocolate", "Chocolate", "chocolate_confectionery", 10, 1.60, 2200, 19, 55.0, 0.15, 1.2, 0, 0, 0),
    ("lollies", "Lollies", "chocolate_confectionery", 8, 1.20, 1500, 0.2, 65.0, 0.10, 0, 0, 0, 0),
    ("pies", "Meat pies", "pastry", 20, 1.10, 1150, 7, 2.0, 1.1, 1.0, 0, 0, 0),
    ("sausage_rolls", "Sausage rolls", "pastry", 10, 1.20, 1200, 8, 1.5, 1.2, 1.0, 0, 0, 0),
    ("table_sugar", "Sugar", "sauces_sugar", 10, 0.30, 1700, 0, 100.0, 0, 0, 0, 0, 0),
    ("tomato_sauce", "Tomato sauce", "sauces_sugar", 8, 0.60, 450, 0, 24.0, 2.5, 0.1, 0, 0, 0),
    ("jam_honey", "Jam and honey", "sauces_sugar", 6, 0.90, 1100, 0, 65.0, 0.05, 0, 0, 0, 0),
    ("margarine", "Margarine spreads", "margarine_oil", 10, 0.70, 2500, 14, 0.5, 1.2, 20.0, 0, 0, 0),
    ("cooking_oil", "Cooking oil", "margarine_oil", 8, 0.60, 3700, 7, 0, 0, 28.0, 0, 0, 0),
    ("chips_snacks", "Potato chips and snacks", "other_grocery", 15, 1.20, 2200, 4, 2.0, 1.2, 8.0, 0, 0, 0),
    ("ready_meals", "Soups and ready meals", "other_grocery", 40, 0.60, 300, 1, 1.5, 0.8, 0.5, 0, 10, 0),
    ("nuts_seeds", "Nuts and seeds", "other_grocery", 5, 2.20, 2500, 7, 4.0, 0.3, 20.0, 0, 0, 0),
    ("fresh_fish", "Fresh fish", "fish_seafood", 12, 2.50, 450, 0.5, 0, 0.2, 1.0, 0, 0, 0),
    ("canned_fish", "Canned fish", "fish_seafood", 8, 1.30, 500, 0.4, 0, 0.9, 0.8, 0, 0, 0),
    ("beef", "Beef", "beef_lamb", 35, 2.20, 800, 4, 0, 0.15, 0.3, 0, 0, 0),
    ("lamb", "Lamb and hogget", "beef_lamb", 15, 2.40, 950, 6, 0, 0.15, 0.3, 0, 0, 0),
    ("pork", "Pork", "pork", 20, 1.80, 850, 4, 0, 0.15, 0.6, 0, 0, 0),
    ("chicken", "Chicken", "poultry", 35, 1.30, 700, 2, 0, 0.2, 1.5, 0, 0, 0),
    ("whole_milk", "Whole milk", "milk_yoghurt_eggs", 150, 0.18, 270, 2.3, 4.7, 0.1, 0.1, 0, 0, 0),
    ("trim_milk", "Trim milk", "milk_yoghurt_eggs", 100, 0.18, 150, 0.1, 4.8, 0.1, 0, 0, 0, 0),
    ("yoghurt", "Yoghurt", "milk_yoghurt_eggs", 25, 0.80, 400, 1.5, 12.0, 0.15, 0.1, 0, 0, 0),
    ("eggs", "Eggs", "milk_yoghurt_eggs", 20, 0.90, 600, 3, 0.3, 0.35, 1.5, 0, 0, 0),
    ("sausages", "Sausages", "processed_meat", 15, 1.10, 1050, 8, 1.0, 1.6, 1.5, 0, 0, 0),
    ("ham_bacon", "Ham and bacon", "processed_meat", 12, 2.00, 700, 3, 1.0, 2.8, 0.6, 0, 0, 0),
    ("white_bread", "White bread", "bread_breakfast", 40, 0.45, 1000, 0.5, 3.0, 1.1, 0.8, 0, 0, 0),
    ("wholegrain_bread", "Wholegrain bread", "bread_breakfast", 30, 0.70, 1000, 0.6, 3.0, 1.0, 1.2, 0, 0, 0),
    ("breakfast_cereal", "Breakfast cereal", "bread_breakfast", 25, 1.00, 1550, 1, 18.0, 0.8, 1.0, 0, 0, 0),
    ("pasta_rice", "Pasta and rice", "pasta_cereal", 60, 0.35, 600, 0.2, 0.5, 0.05, 0.2, 0, 0, 0),
    ("noodles", "Instant noodles", "pasta_cereal", 15, 0.80, 1800, 3, 2.0, 2.0, 1.0, 0, 0, 0),
]

MAX_AGE = 100


def population():
    rows = []
    for sex, mult in (("female", 0.7), ("male", 1.0)):
        for age in range(MAX_AGE + 1):
            count = 32000.0 if age < 60 else 32000.0 * math.exp(-0.06 * (age - 60))
            mortality = min(1.5, mult * (0.0002 + 0.00003 * math.exp(0.095 * age)))
            pyld = 0.04 + 0.25 * (age / 100.0) ** 2
            rows.append((sex, age, round(count, 1), round(mortality, 7), round(pyld, 5)))
    return rows


def diseases():
    rows = []
    for sex, mult in (("female", 0.75), ("male", 1.0)):
        for age in range(MAX_AGE + 1):
            chd = (
                min(0.1, mult * 0.00001 * math.exp(0.09 * age)),
                min(0.5, 0.02 * math.exp(0.03 * (age - 50))),
                0.0,
                min(0.4, mult * 0.0005 * math.exp(0.08 * age)),
                0.08,
            )
            t2d = (
                min(0.05, mult * 0.0002 * math.exp(0.05 * age)),
                min(0.3, 0.005 * math.exp(0.04 * (age - 50))),
                0.0,
                min(0.25, mult * 0.002 * math.exp(0.05 * age)),
                0.05,
            )
            crc = (
                min(0.02, mult * 0.000002 * math.exp(0.1 * age)),
                0.10,
                0.10,
                min(0.05, mult * 0.00002 * math.exp(0.1 * age)),
                0.20,
            )
            for name, (inc, cf, rem, prev, dw) in (
                ("chd", chd),
                ("t2_diabetes", t2d),
                ("colorectal_cancer", crc),
            ):
                rows.append((name, age, sex, round(inc, 8), round(cf, 6), rem, round(prev, 7), dw))
    return rows


RR_LINKS = [
    ("chd", "bmi", 1.05, 0, 5),
    ("chd", "salt", 1.06, 0, 5),
    ("chd", "saturated_fat", 1.01, 0, 5),
    ("chd", "pufa", 0.99, 0, 5),
    ("chd", "fruit", 0.9995, 0, 5),
    ("chd", "vegetable", 0.9995, 0, 5),
    ("t2_diabetes", "bmi", 1.15, 0, 5),
    ("t2_diabetes", "ssb_volume", 1.0005, 0, 5),
    ("colorectal_cancer", "bmi", 1.03, 10, 30),
    ("colorectal_cancer", "vegetable", 0.9995, 10, 30),
]


def write(name, header, rows):
    with open(name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


write(
    "foods.csv",
    [
        "id", "name", "group_id", "quantity_g_per_day", "price_per_100g",
        "energy_kj_per_100g", "satfat_g_per_100g", "sugar_g_per_100g",
        "salt_g_per_100g", "pufa_g_per_100g", "fruit_g_per_100g",
        "veg_g_per_100g", "ssb_ml_per_100g",
    ],
    FOODS,
)
write("population.csv", ["sex", "age", "count", "mortality", "pyld"], population())
write(
    "diseases.csv",
    ["disease_id", "age", "sex", "incidence", "case_fatality", "remission", "prevalence", "dw"],
    diseases(),
)
write("rr_links.csv", ["disease_id", "risk_factor", "rr_per_unit", "lag_start", "lag_end"], RR_LINKS)
