#!/usr/bin/env python3
"""Plot a survey CSV written by ``oulab survey --out-csv``.

    python scripts/plot_survey.py survey.csv [-o residuals.png] [--check-only]

The header is validated before anything is drawn; ``--check-only`` stops
after validation (exit 0 if the schema matches, 1 otherwise).  matplotlib
is only imported when a figure is requested.
"""
import argparse
import csv
import re
import sys

LEADING = ["lambda_re", "lambda_im", "gen_residual"]
TRAILING = ["l1_norm", "l2_trunc_ratio", "pass"]


def check_header(header):
    """Return the number of semigroup columns, or raise ValueError."""
    if header[:3] != LEADING or header[-3:] != TRAILING:
        raise ValueError(f"unexpected columns: {header}")
    middle = header[3:-3]
    for k, name in enumerate(middle):
        if not re.fullmatch(rf"semi_residual_t{k}", name):
            raise ValueError(f"column {name!r} should be semi_residual_t{k}")
    return len(middle)


def load(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_semi = check_header(header)
        rows = []
        for line in reader:
            if len(line) != len(header):
                raise ValueError(f"row has {len(line)} fields, expected {len(header)}")
            vals = [float(v) for v in line[:-1]]
            if line[-1] not in ("true", "false"):
                raise ValueError(f"pass column must be true/false, got {line[-1]!r}")
            rows.append(vals + [line[-1] == "true"])
    return header, n_semi, rows


def plot(header, rows, out):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    re_, im_ = np.array([r[0] for r in rows]), np.array([r[1] for r in rows])
    gen = np.array([r[2] for r in rows])
    ok = np.array([r[-1] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 5))
    sc = ax.scatter(re_, im_, c=np.log10(np.maximum(gen, 1e-300)), cmap="viridis")
    ax.scatter(re_[~ok], im_[~ok], facecolors="none", edgecolors="r", s=80, label="fail")
    fig.colorbar(sc, label="log10 generator residual")
    ax.set_xlabel("Re lambda")
    ax.set_ylabel("Im lambda")
    if (~ok).any():
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("-o", "--output", default="survey.png")
    p.add_argument("--check-only", action="store_true")
    args = p.parse_args(argv)
    try:
        header, n_semi, rows = load(args.csv)
    except (OSError, ValueError, StopIteration) as exc:
        print(f"{args.csv}: {exc or 'empty file'}", file=sys.stderr)
        return 1
    print(f"{args.csv}: {len(rows)} rows, {n_semi} semigroup times, "
          f"{sum(r[-1] for r in rows)} passing")
    if not args.check_only and rows:
        plot(header, rows, args.output)
        print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
