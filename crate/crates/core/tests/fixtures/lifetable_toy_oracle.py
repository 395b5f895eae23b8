"""Brute-force recurrence for the toy lifetable fixture.

One female cohort of 1000 people aged 0, followed over ages 0, 1, 2, with one
disease. The scenario sets the disease's potential impact fraction to 1 from
year 0 (no new cases). Writes lifetable_toy.json next to this script.

Annual step, rates converted to probabilities with 1 - exp(-rate):
  per disease, starting from S = 1 - p0, C = p0:
    prevalence = C / (S + C);  disease mortality = C * fp / (S + C)
    new = S * ip;  die = C * fp;  rem = (C - die) * rp
    S <- S - new + rem;  C <- C - die - rem + new
  all-cause death probability in the scenario:
    q = 1 - exp(-m) + (disease mortality scenario - disease mortality BAU)
  life-years (l_t + l_t+1) / 2, weighted by 1 - pYLD, where the scenario pYLD
  is pYLD + dw * (prevalence scenario - prevalence BAU).
"""
import json
import math
import os

AGES = [0, 1, 2]
COUNT = 1000.0
MORTALITY = [0.01, 0.02, 0.05]
PYLD = [0.05, 0.08, 0.12]
INCIDENCE = [0.10, 0.20, 0.30]
CASE_FATALITY = [0.05, 0.10, 0.20]
REMISSION = [0.02, 0.01, 0.0]
PREVALENCE = [0.05, 0.10, 0.15]
DW = 0.3


def prob(rate):
    return 1.0 - math.exp(-rate)


def run(pif):
    S, C = 1.0 - PREVALENCE[0], PREVALENCE[0]
    history = []
    for t, _age in enumerate(AGES):
        ip = prob(INCIDENCE[t] * (1.0 - pif))
        fp = prob(CASE_FATALITY[t])
        rp = prob(REMISSION[t])
        alive = S + C
        prev = C / alive
        mort = C * fp / alive
        new, die = S * ip, C * fp
        rem = (C - die) * rp
        S, C = S - new + rem, C - die - rem + new
        history.append((prev, mort))
    return history


def halys(pif, discount):
    bau = run(0.0)
    scen = run(pif)
    l_b = l_s = 1.0
    total_b = total_s = 0.0
    for t in range(len(AGES)):
        qb = prob(MORTALITY[t])
        qs = min(1.0, max(0.0, qb + scen[t][1] - bau[t][1]))
        nb, ns = l_b * (1 - qb), l_s * (1 - qs)
        ly_b, ly_s = (l_b + nb) / 2, (l_s + ns) / 2
        py_s = min(1.0, max(0.0, PYLD[t] + DW * (scen[t][0] - bau[t][0])))
        d = (1 + discount) ** t
        total_b += COUNT * ly_b * (1 - PYLD[t]) / d
        total_s += COUNT * ly_s * (1 - py_s) / d
        l_b, l_s = nb, ns
    return total_b, total_s


out = {}
for rate in (0.0, 0.03):
    b, s = halys(1.0, rate)
    out[f"discount_{rate}"] = {"haly_bau": b, "haly_scenario": s, "delta": s - b}
here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "lifetable_toy.json"), "w") as fh:
    json.dump(out, fh, indent=2)
    fh.write("\n")
print(json.dumps(out, indent=2))
