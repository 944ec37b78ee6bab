#!/usr/bin/env python3
"""Fetch the three benchmark tables and write trimmed CSVs into data/.

The raw files ship inside two PyPI wheels (pulled with `pip download`):
  - responsibly: ProPublica COMPAS two-year recidivism, UCI Adult (train + test)
  - ethicml: UCI Default of Credit Card Clients

Only the columns referenced by the recipes in data/*.toml are kept.
Usage: python3 scripts/fetch_datasets.py [--out data]
"""
import argparse
import csv
import glob
import io
import os
import subprocess
import tempfile
import zipfile

WHEELS = {"responsibly": "responsibly==0.1.2", "ethicml": "ethicml==1.3.0"}

COMPAS_COLS = ["sex", "age_cat", "race", "juv_fel_count", "juv_misd_count",
               "priors_count", "c_charge_degree", "two_year_recid"]
ADULT_COLS = ["age", "workclass", "fnlwgt", "education", "education-num",
              "marital-status", "occupation", "relationship", "race", "sex",
              "capital-gain", "capital-loss", "hours-per-week", "native-country",
              "income"]
CREDIT_COLS = ["LIMIT_BAL", "SEX", "EDUCATION", "MARRIAGE", "AGE",
               "PAY_0", "PAY_2", "PAY_3", "PAY_4", "PAY_5", "PAY_6",
               "BILL_AMT1", "PAY_AMT1", "PAY_AMT2", "PAY_AMT3", "PAY_AMT4",
               "default"]


def fetch(tmp):
    files = {}
    for name, req in WHEELS.items():
        subprocess.run(["pip", "download", "--no-deps", "-q", "-d", tmp, req], check=True)
        wheel = glob.glob(os.path.join(tmp, f"{name}-*.whl"))[0]
        files[name] = zipfile.ZipFile(wheel)
    return files


def write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{path}: {len(rows)} rows")


def compas(z, out):
    text = z.read("responsibly/dataset/compas/compas-scores-two-years.csv").decode()
    reader = csv.DictReader(io.StringIO(text))
    rows = [[r[c] for c in COMPAS_COLS] for r in reader]
    write(os.path.join(out, "compas.csv"), COMPAS_COLS, rows)


def adult(z, out):
    rows = []
    for part in ("adult.data", "adult.test"):
        text = z.read(f"responsibly/dataset/adult/{part}").decode()
        for line in text.splitlines():
            if not line.strip() or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            cells[-1] = cells[-1].rstrip(".")
            rows.append(cells)
    write(os.path.join(out, "adult.csv"), ADULT_COLS, rows)


def credit(z, out):
    text = z.read("ethicml/data/csvs/UCI_Credit_Card.csv").decode()
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for r in reader:
        r["EDUCATION"] = next(str(k) for k in range(7) if r[f"EDUCATION_{k}"] == "1")
        r["MARRIAGE"] = next(str(k) for k in range(4) if r[f"MARRIAGE_{k}"] == "1")
        r["default"] = r["default-payment-next-month"]
        rows.append([r[c] for c in CREDIT_COLS])
    write(os.path.join(out, "default_credit.csv"), CREDIT_COLS, rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheels = fetch(tmp)
        compas(wheels["responsibly"], args.out)
        adult(wheels["responsibly"], args.out)
        credit(wheels["ethicml"], args.out)


if __name__ == "__main__":
    main()
