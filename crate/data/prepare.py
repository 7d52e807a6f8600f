"""Regenerate the bundled CSV datasets from their upstream archives.

Inputs (not shipped here):
  --orange  directory containing Orange/datasets/*.tab from the Orange3 3.4.5 sdist
  --keel    directory containing keel_ds/data/balanced/raw/*.dat from the keel-ds 0.2.5 wheel

Every output is a headered CSV with "?" as the missing-value token.
"""
import argparse
import csv
import os
import statistics
from collections import Counter


def read_tab(path):
    with open(path) as fh:
        rows = [line.rstrip("\n").split("\t") for line in fh]
    header, body = rows[0], rows[3:]
    return header, [[c if c not in ("", "?") else "?" for c in r] for r in body]


def read_dat(path):
    with open(path) as fh:
        return [
            [c.strip() for c in line.strip().split(",")]
            for line in fh
            if line.strip() and not line.startswith("@")
        ]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{os.path.basename(path)}: {len(rows)} rows, {len(header)} columns")


def fmt(x):
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-0") else "0"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--orange", required=True)
    ap.add_argument("--keel", required=True)
    ap.add_argument("--out", default=os.path.dirname(os.path.abspath(__file__)))
    a = ap.parse_args()
    od = os.path.join(a.orange, "Orange", "datasets")
    kd = os.path.join(a.keel, "keel_ds", "data", "balanced", "raw")

    # Congressional voting records: class first, 16 y/n votes.
    header, rows = read_tab(os.path.join(od, "voting.tab"))
    write_csv(os.path.join(a.out, "vote.csv"), header, rows)

    # Wisconsin breast cancer (original), sample id dropped, 699 rows.
    header, rows = read_tab(os.path.join(od, "breast-cancer-wisconsin-disc.tab"))
    header = [h.lower().replace(" ", "_") for h in header[1:]]
    write_csv(os.path.join(a.out, "breast_cancer.csv"), header, [r[1:] for r in rows])

    # Heart disease (Cleveland), 303 rows; slope coded 1..3 as an ordinal.
    header, rows = read_tab(os.path.join(od, "heart_disease.tab"))
    header = [h.replace(" ", "_").replace(">", "gt") for h in header]
    slope = {"upsloping": "1", "flat": "2", "downsloping": "3", "?": "?"}
    for r in rows:
        r[10] = slope[r[10]]
    write_csv(os.path.join(a.out, "heart_cleveland.csv"), header, rows)

    # Australian credit (Statlog) is crx with A5 removed (it is a relabeling of
    # A4) and missing values replaced by the column mode / mean.
    header, rows = read_tab(os.path.join(od, "crx.tab"))
    numeric = {1, 2, 7, 10, 13, 14}
    cols = list(zip(*rows))
    fill = {}
    for i, col in enumerate(cols):
        present = [v for v in col if v != "?"]
        if i in numeric:
            fill[i] = fmt(statistics.fmean(float(v) for v in present))
        else:
            counts = Counter(present)
            fill[i] = max(sorted(counts), key=lambda v: counts[v])
    keep = [i for i in range(len(header)) if i != 4]
    out = [[(r[i] if r[i] != "?" else fill[i]) for i in keep] for r in rows]
    write_csv(os.path.join(a.out, "australian.csv"), [header[i] for i in keep], out)

    # Heart disease (Statlog), 270 rows.
    names = ["age", "sex", "chest_pain", "rest_bp", "cholesterol", "fbs", "rest_ecg",
             "max_hr", "exercise_angina", "oldpeak", "slope", "major_vessels", "thal",
             "class"]
    write_csv(os.path.join(a.out, "heart_statlog.csv"), names, read_dat(os.path.join(kd, "heart.dat")))

    # German credit, 1000 rows, 7 numeric + 13 categorical.
    names = ["checking", "duration", "history", "purpose", "amount", "savings",
             "employment", "installment_rate", "personal_status", "debtors", "residence",
             "property", "age", "installment_plans", "housing", "existing_credits", "job",
             "liable", "telephone", "foreign", "class"]
    write_csv(os.path.join(a.out, "german.csv"), names, read_dat(os.path.join(kd, "german.dat")))

    # Mushroom, complete cases only (5644 of the 8124 UCI rows).
    names = ["cap_shape", "cap_surface", "cap_color", "bruises", "odor", "gill_attachment",
             "gill_spacing", "gill_size", "gill_color", "stalk_shape", "stalk_root",
             "stalk_surface_above_ring", "stalk_surface_below_ring", "stalk_color_above_ring",
             "stalk_color_below_ring", "veil_type", "veil_color", "ring_number", "ring_type",
             "spore_print_color", "population", "habitat", "class"]
    write_csv(os.path.join(a.out, "mushroom.csv"), names, read_dat(os.path.join(kd, "mushroom.dat")))


if __name__ == "__main__":
    main()
