"""``eop`` command-line entry point.

Every subcommand writes its artifacts atomically and then a JSON manifest with
the resolved configuration, the command parameters, and SHA-256 digests of
inputs and outputs. Paths in the manifest are relative to the manifest's own
directory, so identical runs in different directories give identical
manifests. ``--threads`` is deliberately left out of the manifest because it
never changes results.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import os
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .analytics import compare_premiums, horizon_histogram
from .calibration import fit_g, read_quotes
from .config import RunConfig, load_config, parse_bounds
from .fixtures import synthetic_prices, write_price_csv
from .io import (FORMAT_VERSION, atomic_write, load_returns, load_series, save_series,
                 sha256_file, write_json)
from .marketdata import CsvFormat, PriceSeries, ingest_csv, preprocess
from .pricing import EnsembleSpec, ladder, price_ladder, trading_minutes_between
from .wavelet import FilterSpec, filter_series

log = logging.getLogger("eop")


class CommandError(Exception):
    """Bad input detected after argument parsing; reported with exit status 1."""


class Run:
    """Tracks inputs and outputs of one invocation and writes the manifest."""

    def __init__(self, command: str, cfg: RunConfig, manifest: str | None):
        self.command = command
        self.cfg = cfg
        self.manifest = manifest
        self.params: dict = {}
        self.inputs: dict[str, Path] = {}
        self.outputs: dict[str, Path] = {}
        self._preexisting: set[Path] = set()

    def input(self, role: str, path: str) -> Path:
        p = Path(path)
        if not p.is_file():
            raise CommandError(f"input file not found: {path}")
        self.inputs[role] = p
        return p

    def output(self, role: str, path: str) -> Path:
        p = Path(path)
        if p.exists():
            self._preexisting.add(p)
        self.outputs[role] = p
        return p

    def manifest_path(self) -> Path:
        if self.manifest:
            return Path(self.manifest)
        if self.outputs:
            first = next(iter(self.outputs.values()))
            return first.with_name(first.name + ".manifest.json")
        return Path(f"eop-{self.command}.manifest.json")

    def _entry(self, path: Path, base: Path) -> dict:
        return {"path": os.path.relpath(path.resolve(), base.resolve()),
                "sha256": sha256_file(path)}

    def write_manifest(self) -> Path:
        target = self.manifest_path()
        base = target.parent
        payload = {
            "tool": "eop",
            "version": __version__,
            "series_format": FORMAT_VERSION,
            "command": self.command,
            "config": self.cfg.to_dict(),
            "parameters": self.params,
            "inputs": {k: self._entry(p, base) for k, p in sorted(self.inputs.items())},
            "outputs": {k: self._entry(p, base) for k, p in sorted(self.outputs.items())},
        }
        write_json(target, payload)
        return target

    def discard_outputs(self) -> None:
        for p in self.outputs.values():
            if p in self._preexisting:
                continue
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _parse_strikes(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("strike range must be START:STOP:STEP")
        lo, hi, step = map(float, parts)
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError("strike range needs STOP >= START and STEP > 0")
        n = int(round((hi - lo) / step))
        return [lo + i * step for i in range(n + 1)]
    return [float(s) for s in text.split(",") if s.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _expiry_minutes(args, cfg: RunConfig) -> int:
    if args.expiry_minutes is not None:
        return args.expiry_minutes
    if args.expiry_date is None or args.quote_date is None:
        raise CommandError("give --expiry-minutes, or both --quote-date and --expiry-date")
    return trading_minutes_between(args.quote_date, args.expiry_date, cfg.minutes_per_day,
                                   cfg.holidays)


def _format_premium_table(quotes, header: dict) -> str:
    out = _io.StringIO()
    out.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
    out.write(f"{'strike':>10} {'premium':>12} {'exercised':>10} {'stddev':>12}\n")
    for q in quotes:
        out.write(f"{q.strike:>10.2f} {q.premium:>12.4f} {q.exercised_fraction:>10.4f} "
                  f"{q.payoff_stddev:>12.4f}\n")
    return out.getvalue()


# -- subcommands -------------------------------------------------------------------------

def cmd_synth(args, run: Run) -> None:
    cfg = run.cfg
    run.params = {"days": args.days, "spot": args.spot, "annual_sigma": args.sigma}
    ts, px = synthetic_prices(days=args.days, spot=args.spot, annual_sigma=args.sigma,
                              seed=cfg.seed, minutes_per_day=cfg.minutes_per_day,
                              minutes_per_year=cfg.minutes_per_year)
    write_price_csv(run.output("prices", args.out), ts, px)


def cmd_ingest(args, run: Run) -> None:
    fmt = CsvFormat(args.timestamp_col, args.price_col, args.timestamp_format)
    run.params = {"timestamp_col": fmt.timestamp, "price_col": fmt.price,
                  "timestamp_format": fmt.timestamp_format}
    series = ingest_csv(run.input("csv", args.input), fmt, run.cfg.minutes_per_day)
    save_series(series, run.output("series", args.out))
    print(f"ingested {len(series)} records in {len(series.session_boundaries) + 1} sessions")


def cmd_preprocess(args, run: Run) -> None:
    cfg = run.cfg
    src = load_series(run.input("series", args.input))
    if not isinstance(src, PriceSeries):
        raise CommandError(f"{args.input}: expected a price series")
    ret = preprocess(src, cfg.outlier_sigma, cfg.drift_window_minutes)
    save_series(ret, run.output("returns", args.out))
    print(f"{len(ret)} returns, {ret.outliers_neutralized} outliers neutralized"
          + (", drift fallback to global mean" if ret.drift_fallback else ""))


def cmd_filter(args, run: Run) -> None:
    cfg = run.cfg
    run.params = {"keep_mean": not args.no_mean}
    ret = load_returns(run.input("returns", args.input))
    filtered, report = filter_series(ret, cfg.J, FilterSpec(cfg.j_star, not args.no_mean),
                                     threads=args.threads)
    save_series(filtered, run.output("filtered", args.out))
    if args.report:
        write_json(run.output("report", args.report), report.to_dict())
    print(f"{report.subseries_count} subseries of {report.subseries_length}, "
          f"{report.retained_coefficients} of {report.processed_samples} values kept "
          f"({100 * report.retention_fraction:.4f}%), remainder {report.remainder_samples}")


def cmd_price(args, run: Run) -> None:
    cfg = run.cfg
    expiry = _expiry_minutes(args, cfg)
    run.params = {"spot": args.spot, "strikes": args.strikes, "expiry_minutes": expiry,
                  "g": args.g}
    ret = load_returns(run.input("series", args.series))
    spec = EnsembleSpec(expiry, cfg.ensemble_stride)
    reqs = ladder(args.spot, args.strikes, expiry, cfg.rate_annual, args.g, cfg.minutes_per_year)
    quotes = price_ladder(ret, reqs, spec, threads=args.threads)
    header = {"spot": args.spot, "expiry_minutes": expiry, "rate": cfg.rate_annual,
              "g": args.g, "windows": quotes[0].sample_count}
    table = _format_premium_table(quotes, header)
    sys.stdout.write(table)
    if args.out:
        with atomic_write(run.output("table", args.out)) as fh:
            fh.write(table)
    if args.json:
        write_json(run.output("json", args.json), {
            **header, "quotes": [q.__dict__ for q in quotes]})


def cmd_calibrate(args, run: Run) -> None:
    cfg = run.cfg
    quotes = read_quotes(run.input("quotes", args.quotes), cfg.rate_annual, args.exclude or ())
    if args.expiry_minutes is not None:
        expiry = args.expiry_minutes
    else:
        expiry = trading_minutes_between(quotes.quote_date, quotes.expiry_date,
                                         cfg.minutes_per_day, cfg.holidays)
    floor = cfg.exclude_floor if args.exclude_floor else None
    run.params = {"expiry_minutes": expiry, "exclude": sorted(quotes.exclusions),
                  "exclude_floor": floor}
    ret = load_returns(run.input("series", args.series))
    result = fit_g(quotes, ret, EnsembleSpec(expiry, cfg.ensemble_stride),
                   cfg.calibration_bounds, minutes_per_year=cfg.minutes_per_year,
                   exclude_below=floor, threads=args.threads)
    lines = [f"g = {result.g:.4f}  sigma* = {100 * result.sigma_star:.2f}%  "
             f"(historical {100 * result.sigma_historical:.2f}%)  rss = {result.rss:.4f}"
             + ("  [at search bound]" if result.at_bound else ""),
             f"{'strike':>10} {'market':>10} {'model':>10} {'residual':>10}"]
    for f in result.per_strike:
        mark = " x" if f.strike in result.excluded else ""
        lines.append(f"{f.strike:>10.2f} {f.market:>10.2f} {f.model:>10.2f} "
                     f"{f.residual:>10.2f}{mark}")
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if args.out:
        write_json(run.output("result", args.out), result.to_dict())
    if args.table:
        with atomic_write(run.output("table", args.table)) as fh:
            fh.write(table)


def cmd_hist(args, run: Run) -> None:
    cfg = run.cfg
    stride = args.stride or cfg.ensemble_stride
    run.params = {"horizons": args.horizons, "stride": stride}
    ret = load_returns(run.input("series", args.series))
    with atomic_write(run.output("histogram", args.out)) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon", "bin_left", "bin_right", "count"])
        for h in args.horizons:
            hist = horizon_histogram(ret, h, stride, cfg.hist_bins)
            for lo, hi, c in hist.rows():
                w.writerow([h, repr(lo), repr(hi), c])
            print(f"T={h}: {hist.sample_count} windows, stddev {hist.stddev:.6g}, "
                  f"excess kurtosis {hist.excess_kurtosis:.3f}")


def cmd_compare(args, run: Run) -> None:
    cfg = run.cfg
    expiry = _expiry_minutes(args, cfg)
    market = None
    strikes = args.strikes
    if args.market:
        qs = read_quotes(run.input("market", args.market), cfg.rate_annual)
        table = dict(qs.quotes)
        strikes = strikes or sorted(table)
        market = [table.get(k) for k in strikes]
    if not strikes:
        raise CommandError("give --strikes or --market")
    run.params = {"spot": args.spot, "strikes": strikes, "expiry_minutes": expiry, "g": args.g}
    orig = load_returns(run.input("original", args.original))
    filt = load_returns(run.input("filtered", args.filtered))
    rows = compare_premiums(orig, filt, args.spot, strikes, expiry, cfg.rate_annual, args.g,
                            stride=cfg.ensemble_stride, minutes_per_year=cfg.minutes_per_year,
                            market=market, threads=args.threads)
    print(f"{'strike':>10} {'MKT':>10} {'OP':>10} {'OP_filt':>10} {'abs_diff':>10}")
    for r in rows:
        mkt = "X" if r.market is None else f"{r.market:.2f}"
        print(f"{r.strike:>10.2f} {mkt:>10} {r.premium_original:>10.2f} "
              f"{r.premium_filtered:>10.2f} {r.abs_diff:>10.4f}")
    if args.out:
        out = run.output("comparison", args.out)
        if out.suffix == ".json":
            write_json(out, [r.to_dict() for r in rows])
        else:
            with atomic_write(out) as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["strike", "market", "original", "filtered", "abs_diff", "rel_diff"])
                for r in rows:
                    d = r.to_dict()
                    w.writerow(["" if v is None else repr(v) for v in d.values()])


# -- parser ------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (default: $EOP_CONFIG)")
    p.add_argument("--manifest", help="manifest path (default: <first output>.manifest.json)")
    p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")


def _expiry_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--expiry-minutes", type=int, help="expiry in trading minutes")
    g.add_argument("--expiry-date", type=date.fromisoformat)
    p.add_argument("--quote-date", type=date.fromisoformat)
    p.add_argument("--holidays", help="comma-separated ISO dates excluded from the calendar")
    p.add_argument("--rate", type=float, dest="rate_annual", help="annual risk-free rate")
    p.add_argument("--minutes-per-year", type=int)
    p.add_argument("--stride", type=int, dest="ensemble_stride", help="window stride in minutes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eop", description="Empirical option pricing toolchain")
    parser.add_argument("--version", action="version",
                        version=f"eop {__version__} (series format v{FORMAT_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="write a synthetic minute-price CSV")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=25)
    p.add_argument("--spot", type=float, default=5500.0)
    p.add_argument("--sigma", type=float, default=0.08, help="annualized volatility")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="read a minute-price CSV into a series file")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timestamp-col", default="timestamp")
    p.add_argument("--price-col", default="price")
    p.add_argument("--timestamp-format", help="strptime pattern (default ISO-8601)")
    p.add_argument("--minutes-per-day", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="fill gaps, purify and detrend into returns")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--outlier-sigma", type=float)
    p.add_argument("--drift-window", type=int, dest="drift_window_minutes")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("filter", help="Haar low-pass filter a return series")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--J", type=int, dest="J")
    p.add_argument("--jstar", type=int, dest="j_star")
    p.add_argument("--report", help="compression report JSON")
    p.add_argument("--no-mean", action="store_true", help="drop the per-subseries mean")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("price", help="price a call strike ladder")
    _common(p)
    _expiry_args(p)
    p.add_argument("--series", required=True)
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strikes", type=_parse_strikes, required=True, help="START:STOP:STEP or list")
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--out", help="write the premium table here")
    p.add_argument("--json", help="write quotes as JSON here")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("calibrate", help="least-squares fit of g to market premiums")
    _common(p)
    p.add_argument("--series", required=True)
    p.add_argument("--quotes", required=True)
    p.add_argument("--rate", type=float, dest="rate_annual")
    p.add_argument("--bounds", type=parse_bounds, dest="calibration_bounds")
    p.add_argument("--expiry-minutes", type=int)
    p.add_argument("--holidays")
    p.add_argument("--minutes-per-year", type=int)
    p.add_argument("--stride", type=int, dest="ensemble_stride")
    p.add_argument("--exclude", type=_parse_strikes, help="strikes left out of the fit")
    p.add_argument("--exclude-floor", action="store_true",
                   help="refit without strikes whose model premium is below the floor")
    p.add_argument("--out", help="CalibrationResult JSON")
    p.add_argument("--table", help="write the fit table here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("hist", help="horizon-aggregated return histograms")
    _common(p)
    p.add_argument("--series", required=True)
    p.add_argument("--horizons", type=_parse_ints, default=[100, 300, 600])
    p.add_argument("--stride", type=int)
    p.add_argument("--bins", type=int, dest="hist_bins")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("compare", help="original vs filtered premiums")
    _common(p)
    _expiry_args(p)
    p.add_argument("--original", required=True)
    p.add_argument("--filtered", required=True)
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strikes", type=_parse_strikes)
    p.add_argument("--market", help="quotes CSV supplying MKT premiums")
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--out", help="CSV or .json")
    p.set_defaults(func=cmd_compare)
    return parser


_CONFIG_FLAGS = ("minutes_per_day", "minutes_per_year", "outlier_sigma", "drift_window_minutes",
                 "J", "j_star", "ensemble_stride", "rate_annual", "calibration_bounds", "seed",
                 "hist_bins", "holidays")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if getattr(args, "expiry_date", None) is not None and args.quote_date is None:
        parser.error("--expiry-date requires --quote-date")
    try:
        overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
        cfg = load_config(args.config).updated(**overrides)
    except (OSError, ValueError, KeyError) as exc:
        print(f"eop: configuration error: {exc}", file=sys.stderr)
        return 2
    run = Run(args.command, cfg, args.manifest)
    try:
        args.func(args, run)
        run.write_manifest()
    except (CommandError, OSError, ValueError, FloatingPointError) as exc:
        run.discard_outputs()
        print(f"eop {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
