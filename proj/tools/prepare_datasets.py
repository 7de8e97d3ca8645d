#!/usr/bin/env python3
"""Fetch and normalize the UCI Adult and Bank-marketing datasets.

Writes <out>/adult_train.csv, adult_test.csv, bank_train.csv, bank_test.csv:
comma-separated with a header row and a 0/1 label column named "y".

Sources are tried in order: an explicit local path, the UCI archive, and
(Adult only) the copy shipped inside the `responsibly` wheel.
"""

import argparse
import csv
import io
import random
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country",
]
ADULT_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/"
BANK_URL = "https://archive.ics.uci.edu/static/public/222/bank+marketing.zip"


def fetch(url, timeout=30):
    with urllib.request.urlopen(url, timeout=timeout) as r:
        return r.read()


def adult_from_wheel():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp,
                        "responsibly==0.1.2"], check=True)
        wheel = next(Path(tmp).glob("responsibly-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            return (z.read("responsibly/dataset/adult/adult.data"),
                    z.read("responsibly/dataset/adult/adult.test"))


def load_adult_raw(source):
    if source:
        src = Path(source)
        return (src / "adult.data").read_bytes(), (src / "adult.test").read_bytes()
    try:
        return fetch(ADULT_URL + "adult.data"), fetch(ADULT_URL + "adult.test")
    except Exception as e:  # noqa: BLE001
        print(f"adult: UCI download failed ({e}); trying the responsibly wheel", file=sys.stderr)
        return adult_from_wheel()


def adult_rows(raw):
    rows = []
    for line in raw.decode("utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 15:
            continue
        label = cells[14].rstrip(".")
        rows.append(cells[:14] + ["1" if label == ">50K" else "0"])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def prepare_adult(out, source):
    train_raw, test_raw = load_adult_raw(source)
    write_csv(out / "adult_train.csv", ADULT_COLUMNS + ["y"], adult_rows(train_raw))
    write_csv(out / "adult_test.csv", ADULT_COLUMNS + ["y"], adult_rows(test_raw))


def load_bank_raw(source):
    if source:
        return Path(source).read_bytes()
    blob = fetch(BANK_URL, timeout=60)
    with zipfile.ZipFile(io.BytesIO(blob)) as outer:
        inner_name = next(n for n in outer.namelist() if n.endswith("bank-additional.zip"))
        with zipfile.ZipFile(io.BytesIO(outer.read(inner_name))) as inner:
            name = next(n for n in inner.namelist() if n.endswith("bank-additional-full.csv"))
            return inner.read(name)


def prepare_bank(out, source, seed):
    raw = load_bank_raw(source).decode("utf-8")
    reader = csv.reader(io.StringIO(raw), delimiter=";")
    header = next(reader)
    rows = [r for r in reader if len(r) == len(header)]
    label = header.index("y")
    features = [h for i, h in enumerate(header) if i != label]
    data = [[c for i, c in enumerate(r) if i != label] + ["1" if r[label] == "yes" else "0"] for r in rows]
    random.Random(seed).shuffle(data)
    cut = int(len(data) * 0.8)
    write_csv(out / "bank_train.csv", features + ["y"], data[:cut])
    write_csv(out / "bank_test.csv", features + ["y"], data[cut:])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="data")
    ap.add_argument("--adult-dir", help="directory holding adult.data and adult.test")
    ap.add_argument("--bank-csv", help="path to bank-additional-full.csv")
    ap.add_argument("--seed", type=int, default=2019, help="seed of the Bank 80/20 split")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for name, job in (("adult", lambda: prepare_adult(out, args.adult_dir)),
                      ("bank", lambda: prepare_bank(out, args.bank_csv, args.seed))):
        try:
            job()
        except Exception as e:  # noqa: BLE001
            print(f"{name}: unavailable ({e})", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
