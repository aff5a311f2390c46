"""Command-line interface: ``sshape {fit,profile,curve,simulate,bench}``.

Exit codes: 0 success, 2 bad flags or unreadable input, 3 abscissae not
strictly increasing, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import simbench
from .core import RegressionData, diagnostics
from .homotopy import HomotopyError
from .solver import SolveMethod, fit_sshape, rss_profile

EXIT_PARSE = 2
EXIT_ORDER = 3
EXIT_SOLVER = 4

METHODS = [m.value for m in SolveMethod]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(v) -> str:
    """Round-trip safe number formatting (17 significant digits)."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_xy(path: str) -> RegressionData:
    """Two-column CSV with an optional header line."""
    try:
        with open(path, newline="") if path != "-" else _stdin() as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_PARSE) from None
    except (UnicodeDecodeError, csv.Error) as exc:
        raise CliError(f"{path}: not a text CSV file ({exc})", EXIT_PARSE) from None
    lines = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if lines and not all(_is_number(c) for c in lines[0][1]):
        lines = lines[1:]
    if not lines:
        raise CliError(f"{path}: no data rows", EXIT_PARSE)
    x, y = [], []
    for lineno, row in lines:
        if len(row) != 2:
            raise CliError(f"{path}, line {lineno}: expected 2 columns, found {len(row)}", EXIT_PARSE)
        try:
            xv, yv = float(row[0]), float(row[1])
        except ValueError:
            raise CliError(f"{path}, line {lineno}: not a number: {row!r}", EXIT_PARSE) from None
        if not (math.isfinite(xv) and math.isfinite(yv)):
            raise CliError(f"{path}, line {lineno}: non-finite value", EXIT_PARSE)
        x.append(xv)
        y.append(yv)
    for k in range(1, len(x)):
        if not x[k] > x[k - 1]:
            what = "duplicate" if x[k] == x[k - 1] else "decreasing"
            raise CliError(
                f"{path}, line {lines[k][0]}: {what} x value {fmt(x[k])} "
                f"(previous row has {fmt(x[k - 1])}); x must be strictly increasing",
                EXIT_ORDER,
            )
    return RegressionData(np.array(x), np.array(y))


def _stdin():
    return io.TextIOWrapper(sys.stdin.buffer, newline="")


def emit(text: str, out: str | None) -> None:
    """Write to ``out`` atomically (temp file then rename), or to stdout."""
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sshape-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v
                    for v in r])
    return buf.getvalue()


def _fit(data: RegressionData, method: str, invert: bool):
    work = RegressionData(data.x, -data.y) if invert else data
    try:
        fit = fit_sshape(work, method)
    except (HomotopyError, np.linalg.LinAlgError) as exc:
        raise CliError(f"solver failed: {exc}", EXIT_SOLVER) from None
    theta = -fit.theta if invert else fit.theta
    return fit, theta


# -- subcommands --------------------------------------------------------------

def cmd_fit(args) -> str:
    data = read_xy(args.input)
    fit, theta = _fit(data, args.method, args.invert)
    diag = diagnostics(fit.fit)
    if args.format == "csv":
        return csv_text(["x", "y", "fitted"], zip(data.x, data.y, theta))
    report = {
        "method": fit.method,
        "n": data.n,
        "inverted": bool(args.invert),
        "inflection": fit.inflection,
        "inflection_index": fit.inflection_index,
        "rss": fit.rss,
        "knots": [float(data.x[k]) for k in fit.knots],
        "knot_indices": list(fit.knots),
        "fitted": [float(t) for t in theta],
        "diagnostics": {
            "range_v": (-1.0 if args.invert else 1.0) * diag.range_v,
            "affine_pieces": diag.affine_pieces,
        },
    }
    return json.dumps(report, indent=2) + "\n"


def cmd_profile(args) -> str:
    data = read_xy(args.input)
    work = RegressionData(data.x, -data.y) if args.invert else data
    try:
        prof = rss_profile(work)
    except (HomotopyError, np.linalg.LinAlgError) as exc:
        raise CliError(f"solver failed: {exc}", EXIT_SOLVER) from None
    if args.format == "json":
        return json.dumps({"x": data.x.tolist(), "rss": prof.tolist()}, indent=2) + "\n"
    return csv_text(["x", "rss"], zip(data.x, prof))


def cmd_curve(args) -> str:
    if args.points < 2:
        raise CliError("--points must be at least 2", EXIT_PARSE)
    data = read_xy(args.input)
    fit, _ = _fit(data, args.method, args.invert)
    span = data.x[-1] - data.x[0]
    margin = args.margin * span
    t = np.linspace(data.x[0] - margin, data.x[-1] + margin, args.points)
    vals = fit(t)
    if args.invert:
        vals = -vals
    if args.format == "json":
        return json.dumps({"t": t.tolist(), "value": np.asarray(vals).tolist()}, indent=2) + "\n"
    return csv_text(["t", "value"], zip(t, np.atleast_1d(vals)))


SIM_COLUMNS = ["n", "reps", "failures", "mean_l2n_loss", "median_l2n_loss", "sd_l2n_loss",
               "mean_inflection_err", "median_inflection_err", "sd_inflection_err"]


def cmd_simulate(args) -> str:
    signal = simbench.SIGNALS[args.signal]
    design = simbench.DesignSpec(args.design)
    noise = simbench.NoiseSpec(args.sigma, args.seed)
    res = simbench.study(signal, design, noise, args.ns, args.reps, args.method)
    rows = res.summary()
    slopes = res.slopes()
    if args.format == "json":
        payload = {
            "signal": signal.name, "design": design.kind, "sigma": noise.sigma,
            "seed": noise.seed, "method": res.method,
            "rows": [{k: r[k] for k in SIM_COLUMNS} for r in rows],
            "slopes": slopes,
        }
        return json.dumps(payload, indent=2) + "\n"
    table = [[r[k] for k in SIM_COLUMNS] for r in rows]
    footer = ["slope", "", ""] + [
        slopes.get(k, "") if k in slopes else "" for k in SIM_COLUMNS[3:]
    ]
    return csv_text(SIM_COLUMNS, table + [footer])


def cmd_bench(args) -> str:
    rows = simbench.timing_study(args.ns, args.sigmas, METHODS, args.reps, args.seed)
    cells = {}
    for r in rows:
        cells.setdefault((r.n, r.sigma), {})[r.method] = r
    header = ["n", "sigma", "time_seq", "time_scan_selected", "time_scan_all",
              "ratio_scan_selected_seq", "ratio_scan_all_seq",
              "rss_seq", "rss_scan_selected", "rss_scan_all"]
    out = []
    for (n, sigma), c in cells.items():
        seq, sel, full = c["seq"], c["scan-selected"], c["scan-all"]
        out.append([n, sigma, seq.median_time, sel.median_time, full.median_time,
                    sel.median_time / seq.median_time, full.median_time / seq.median_time,
                    seq.rss, sel.rss, full.rss])
    if args.format == "json":
        return json.dumps([dict(zip(header, r)) for r in out], indent=2) + "\n"
    return csv_text(header, out)


# -- argument parsing ---------------------------------------------------------

def _int_list(s: str) -> list:
    try:
        vals = [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {s!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers: {s!r}")
    return vals


def _float_list(s: str) -> list:
    try:
        vals = [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {s!r}")
    if not vals or any(not v >= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected nonnegative numbers: {s!r}")
    return vals


def _nonneg_float(s: str) -> float:
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sshape",
                                description="S-shaped least squares regression.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default="csv", with_method=True):
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=["csv", "json"], default=fmt_default)
        if with_method:
            sp.add_argument("--method", choices=METHODS, default="seq")

    sp = sub.add_parser("fit", help="fit an S-shaped curve to x,y CSV data")
    sp.add_argument("input", help="CSV file with columns x,y ('-' for stdin)")
    sp.add_argument("--invert", action="store_true", help="fit an inverted S-shape")
    common(sp, fmt_default="json")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("profile", help="RSS of the best fit for each inflection point")
    sp.add_argument("input")
    sp.add_argument("--invert", action="store_true")
    common(sp, with_method=False)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("curve", help="sample the fitted curve on a grid")
    sp.add_argument("input")
    sp.add_argument("--points", type=int, default=101)
    sp.add_argument("--margin", type=_nonneg_float, default=0.0,
                    help="extend the grid by this fraction of the x range on each side")
    sp.add_argument("--invert", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("simulate", help="Monte Carlo study of loss and inflection error")
    sp.add_argument("--signal", choices=["f1", "f2", "f3", "f4"], default="f4")
    sp.add_argument("--design", choices=["uniform", "beta48", "equispaced"], default="uniform")
    sp.add_argument("--sigma", type=_nonneg_float, default=0.1)
    sp.add_argument("--ns", type=_int_list, default=[100, 200, 500, 1000])
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="running times of the three methods")
    sp.add_argument("--ns", type=_int_list, default=[100, 200, 500, 1000])
    sp.add_argument("--sigmas", type=_float_list, default=[1.0, 0.1, 0.01])
    sp.add_argument("--reps", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    common(sp, with_method=False)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "reps", 1) < 1:
        parser.error("--reps must be positive")
    try:
        text = args.func(args)
        emit(text, args.out)
    except CliError as exc:
        print(f"sshape: error: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
