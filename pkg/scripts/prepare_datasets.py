#!/usr/bin/env python3
"""Convert raw benchmark files into the CSV + schema pairs the harness reads.

Nothing is downloaded. Fetch the raw files yourself, then e.g.::

    python scripts/prepare_datasets.py covertype covtype.data.gz  --out data/
    python scripts/prepare_datasets.py msd_year   YearPredictionMSD.txt
    python scripts/prepare_datasets.py musk1      clean1.data
    python scripts/prepare_datasets.py elephant   elephant.data
    python scripts/prepare_datasets.py higgs_500k HIGGS.csv.gz

Raw formats expected:

covertype   UCI covtype.data: 54 attributes then the class (1-7)
msd_year    UCI YearPredictionMSD.txt: year then 90 attributes
musk1       UCI clean1.data: molecule, conformation, 166 attributes, class
elephant    sparse MIL benchmark format, one instance per line:
            ``inst_id:bag_id:label idx:value ...`` with label -1/0 or 1
higgs_500k  UCI HIGGS.csv: label then 28 attributes; first 500,000 rows kept
"""
import argparse
import csv
import gzip
import json
import sys
from pathlib import Path


def open_text(path):
    path = Path(path)
    return gzip.open(path, "rt") if path.suffix == ".gz" else open(path)


def numeric(names):
    return [{"name": n, "type": "numeric"} for n in names]


def covertype(src, limit):
    names = [f"a{i}" for i in range(54)]
    schema = {"features": numeric(names), "target": {"name": "class", "type": "class",
                                                     "values": [str(c) for c in range(1, 8)]}}

    def rows():
        for line in src:
            cells = line.strip().split(",")
            if len(cells) == 55:
                yield cells[:54] + [str(int(cells[54]))]
    return names + ["class"], schema, rows()


def msd_year(src, limit):
    names = [f"t{i}" for i in range(90)]
    schema = {"features": numeric(names), "target": {"name": "year", "type": "numeric"}}

    def rows():
        for line in src:
            cells = line.strip().split(",")
            if len(cells) == 91:
                yield cells[1:] + [cells[0]]
    return names + ["year"], schema, rows()


def musk1(src, limit):
    names = [f"f{i}" for i in range(1, 167)]
    schema = {"features": numeric(names), "target": {"name": "label", "type": "bag_label"},
              "bag_id": "molecule"}

    def rows():
        for line in src:
            cells = line.strip().rstrip(".").split(",")
            if len(cells) == 169:
                yield cells[2:168] + [str(int(float(cells[168]))), cells[0]]
    return names + ["label", "molecule"], schema, rows()


def sparse_mil(src, limit, n_features=230):
    names = [f"f{i}" for i in range(1, n_features + 1)]
    schema = {"features": numeric(names), "target": {"name": "label", "type": "bag_label"},
              "bag_id": "bag"}

    def rows():
        for line in src:
            parts = line.split()
            if not parts:
                continue
            _, bag, label = parts[0].split(":")
            x = ["0"] * n_features
            for kv in parts[1:]:
                k, v = kv.split(":")
                x[int(k) - 1] = v
            yield x + ["1" if float(label) > 0 else "0", bag]
    return names + ["label", "bag"], schema, rows()


def higgs(src, limit):
    names = [f"h{i}" for i in range(28)]
    schema = {"features": numeric(names), "target": {"name": "label", "type": "class", "values": ["0", "1"]}}

    def rows():
        for i, line in enumerate(src):
            if i >= (limit or 500_000):
                return
            cells = line.strip().split(",")
            yield cells[1:] + [str(int(float(cells[0])))]
    return names + ["label"], schema, rows()


CONVERTERS = {"covertype": covertype, "msd_year": msd_year, "musk1": musk1,
              "elephant": sparse_mil, "higgs_500k": higgs}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dataset", choices=sorted(CONVERTERS))
    ap.add_argument("raw", help="raw input file (.gz accepted)")
    ap.add_argument("--out", default="data", help="output directory (default: data/)")
    ap.add_argument("--limit", type=int, help="row cap (higgs_500k only)")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open_text(args.raw) as src:
        header, schema, rows = CONVERTERS[args.dataset](src, args.limit)
        n = 0
        with open(out / f"{args.dataset}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow(row)
                n += 1
    schema["format_version"] = 1
    (out / f"{args.dataset}.schema.json").write_text(json.dumps(schema, indent=1) + "\n")
    print(f"wrote {n} rows to {out / (args.dataset + '.csv')}", file=sys.stderr)


if __name__ == "__main__":
    main()
