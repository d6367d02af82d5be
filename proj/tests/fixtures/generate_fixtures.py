#!/usr/bin/env python3
"""Regenerates the shipped test fixtures. Output is deterministic.

  covidr_245.csv      245 annotated covid rows
  features_328.csv    328 labelled feature rows (30 COV+, 298 COV-)
  feedback_30.jsonl   30 completed review records

Usage: generate_fixtures.py [OUT_DIR]   (default: this directory)
"""

import json
import random
import sys
from pathlib import Path

SYMPTOMS = [
    "Atelectasis", "Cardiomegaly", "Consolidation", "Edema", "Effusion", "Emphysema", "Fibrosis",
    "Hernia", "Infiltration", "Mass", "Nodule", "Pleural_Thickening", "Pneumonia", "Pneumothorax",
]
MORPH = ["ASO", "GGO", "ASO_GGO", "No_ASO_GGO", "Missing_ASO_GGO"]
FINDINGS = ["none", "ggo", "bilat_patchy", "bilat_sym", "bilat_periph", "unilat_rt", "unilat_lt"]


def covidr_rows():
    # 44 rows with no finding, 35 GGO only, 110 GGO plus one ASO flag,
    # 56 with one ASO flag only. ASO flags are dealt out to reach
    # 30/18/54/36/28.
    aso_pool = (["bilat_patchy"] * 30 + ["bilat_sym"] * 18 + ["bilat_periph"] * 54 +
                ["unilat_rt"] * 36 + ["unilat_lt"] * 28)
    kinds = ["none"] * 44 + ["ggo"] * 35 + ["ggo+aso"] * 110 + ["aso"] * 56
    rows = []
    aso_iter = iter(aso_pool)
    for i, kind in enumerate(kinds):
        flags = {f: "0" for f in FINDINGS}
        if kind == "none":
            flags["none"] = "1"
        if "ggo" in kind:
            flags["ggo"] = "1"
        if "aso" in kind:
            flags[next(aso_iter)] = "1"
        # A few annotators left unset cells blank; blank reads as absent.
        if i % 17 == 5:
            for f in FINDINGS:
                if flags[f] == "0":
                    flags[f] = ""
                    break
        rows.append([f"covidr-{i + 1:04d}", "covid"] + [flags[f] for f in FINDINGS])
    assert next(aso_iter, None) is None
    return rows


def fixture_tree_label(sym, morph):
    """The reference tree, evaluated directly on named features."""
    top = max(range(5), key=lambda k: (morph[k], -k))
    aso = MORPH[top] in ("ASO", "ASO_GGO")
    missing = MORPH[top] == "Missing_ASO_GGO"
    s = dict(zip(SYMPTOMS, sym))
    if aso:
        return "COV+"
    if missing:
        return "COV-"
    if s["Infiltration"] <= 0.406:
        if s["Emphysema"] <= 0.127:
            return "COV-"
        return "COV+" if s["Edema"] > 0.085 else "COV-"
    return "COV+" if s["Emphysema"] <= 0.122 else "COV-"


THRESHOLDS = {"Infiltration": 0.406, "Emphysema": (0.122, 0.127), "Edema": 0.085}


def safe_value(rng, name):
    while True:
        v = round(rng.random(), 6)
        t = THRESHOLDS.get(name)
        ts = t if isinstance(t, tuple) else (t,) if t is not None else ()
        if all(abs(v - x) > 1e-3 for x in ts):
            return v


def feature_rows():
    # Quotas per (truth, tree prediction): TP 26, FN 4, FP 1, TN 297.
    quota = {("COV+", "COV+"): 26, ("COV+", "COV-"): 4, ("COV-", "COV+"): 1, ("COV-", "COV-"): 297}
    rng = random.Random(20201)
    rows = []
    while any(quota.values()):
        sym = [safe_value(rng, n) for n in SYMPTOMS]
        top = rng.randrange(5)
        morph = [0.1] * 5
        morph[top] = 0.6
        pred = fixture_tree_label(sym, morph)
        truth = "COV+" if rng.random() < 0.5 else "COV-"
        if quota[(truth, pred)] == 0:
            continue
        quota[(truth, pred)] -= 1
        rows.append((sym, morph, truth))
    out = []
    for i, (sym, morph, truth) in enumerate(rows):
        out.append([f"case-{i + 1:04d}"] + [f"{v:.6f}".rstrip("0").rstrip(".") if v else "0" for v in sym] +
                   [f"{v:g}" for v in morph] + [truth])
    return out


def feedback_records():
    # Record groups by which inductive ratings are relevant:
    #   0        neither           (1)
    #   1..8     textual only      (8)
    #   9..18    both              (10)
    #   19..29   visual only       (11)
    n = 30
    vis_rel = list(range(9, 30))
    txt_rel = list(range(1, 19))

    vis_ind = ["NotUseful"] * n
    for k, i in enumerate(vis_rel):
        vis_ind[i] = "Useful" if k < 14 else "SomewhatUseful"
    txt_ind = ["NotUseful"] * n
    for k, i in enumerate(txt_rel):
        txt_ind[i] = "Useful" if k < 17 else "SomewhatUseful"

    vis_des = ["Useful"] * 21 + ["SomewhatUseful"] * 5 + ["NotUseful"] * 4
    txt_des = ["Useful"] * 6 + ["SomewhatUseful"] * 4 + ["NotUseful"] * 20

    cmp_visual = ["same"] * n
    for k, i in enumerate(vis_rel):
        cmp_visual[i] = "first-better" if k < 5 else "second-better" if k < 13 else "same"
    cmp_textual = ["same"] * n
    for k, i in enumerate(txt_rel):
        cmp_textual[i] = "first-better" if k < 13 else "same"

    # 25 sure (19 agree, 6 disagree), 5 unsure (4 model correct, 1 not).
    records = []
    for i in range(n):
        truth = "COV+" if i % 3 == 0 else "COV-"
        other = "COV-" if truth == "COV+" else "COV+"
        if i < 25:
            sure = "sure"
            model_dx = truth if i % 7 != 6 else other
            rad_dx = model_dx if i < 19 else ("COV-" if model_dx == "COV+" else "COV+")
        else:
            sure = "unsure"
            model_dx = truth if i < 29 else other
            rad_dx = truth
        records.append({
            "case_id": f"case-{i + 1:04d}",
            "stage": "Complete",
            "radiologist_dx": rad_dx,
            "sure": sure,
            "model_dx": model_dx,
            "truth": truth,
            "quality": ["Low", "Medium", "High"][i % 3],
            "ratings": {"vis_ind": vis_ind[i], "vis_des": vis_des[i], "text_ind": txt_ind[i], "text_des": txt_des[i]},
            "cmp_visual": cmp_visual[i],
            "cmp_textual": cmp_textual[i],
            "cmp_overall": ["first-better", "second-better", "same"][i % 3],
        })
    return records


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "covidr_245.csv", "w", newline="") as f:
        f.write(",".join(["image_id", "cohort"] + FINDINGS) + "\n")
        for r in covidr_rows():
            f.write(",".join(r) + "\n")
    with open(out / "features_328.csv", "w", newline="") as f:
        f.write(",".join(["case_id"] + SYMPTOMS + ["p_aso", "p_ggo", "p_aso_ggo", "p_none", "p_missing", "truth"]) + "\n")
        for r in feature_rows():
            f.write(",".join(r) + "\n")
    with open(out / "feedback_30.jsonl", "w", newline="") as f:
        for r in feedback_records():
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
