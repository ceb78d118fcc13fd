"""Command-line entry point: ``stpatterns <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from .ensemble import trajectory_window
from .errors import CapacityError, ContractViolation, EnsembleFormatError
from .experiments import (
    BASES,
    PUBLISHED_VALUES,
    ExperimentConfig,
    ReportRow,
    experiment1,
    experiment2,
    experiment3,
    get_ensemble,
    resolve_base,
    run_all,
    write_experiment1,
    write_experiment2,
    write_experiment3,
)
from .integration import evifpp, is_integrated
from .pattern import SpatioTemporalPattern
from .render import window_text, windows_svg


def _shift(text: str) -> tuple[int, int]:
    rows, _, cols = text.partition(",")
    return int(rows), int(cols or 0)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--height", type=int, default=4)
    p.add_argument("--window-start", type=int, default=8, help="time label of the first window slice")
    p.add_argument("--initial-time", type=int, default=1, help="time label of the initial state")
    p.add_argument("--length", type=int, default=3, help="number of slices in the window")
    p.add_argument("--symmetry", choices=["full", "translations"], default="full")
    p.add_argument("--log-base", choices=[*BASES, "auto"], default="auto")
    p.add_argument("--n", type=int, default=14, help="cells fixed per slice in the subset search")
    p.add_argument("--shift", type=_shift, default=(1, 0), metavar="ROWS[,COLS]",
                   help="translation applied to the initial condition in experiment 3")
    p.add_argument("--cache-dir", type=Path, default=None,
                   help="ensemble cache directory (default: $STPATTERNS_CACHE_DIR or ~/.cache/stpatterns)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--workers", type=int, default=1)


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        width=args.width, height=args.height, window_start=args.window_start, initial_time=args.initial_time,
        length=args.length, symmetry=args.symmetry, log_base=args.log_base, n=args.n, shift=args.shift,
        cache_dir=args.cache_dir, output_dir=args.out, workers=args.workers,
    )


def _print_rows(values: dict[str, float], base: str) -> bool:
    ok = True
    for name, published in PUBLISHED_VALUES:
        if name in values:
            row = ReportRow(name, published, values[name], base)
            ok &= row.passed
            print(f"{name:<18} published {published:5.1f}  computed {row.computed:6.1f}  "
                  f"({row.computed!r}, base {base})  {'PASS' if row.passed else 'FAIL'}")
    return ok


def read_pattern_file(path: Path, width: int, initial_time: int) -> SpatioTemporalPattern:
    """Lines of ``t row col value`` (whitespace or comma separated); ``#`` starts a comment.

    ``t`` is a time label, so with the default ``initial_time=1`` the
    window slices are ``t = 8, 9, 10``.
    """
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = re.split(r"[\s,]+", line)
        if len(fields) != 4:
            raise ContractViolation(f"{path}:{lineno}: expected 't row col value'")
        t, r, c, v = map(int, fields)
        values[(t - initial_time, r * width + c)] = v
    return SpatioTemporalPattern.from_mapping(values)


def cmd_evifpp(args) -> int:
    cfg = _config(args)
    tab = get_ensemble(cfg)
    base = resolve_base(cfg, tab)
    pattern = read_pattern_file(args.pattern, cfg.width, cfg.initial_time)
    ev = evifpp(tab, pattern, BASES[base])
    print(f"nodes {len(pattern)}  p = {tab.pattern_probability(pattern)}  EVIFPP = {ev.value!r} (base {base})"
          + ("" if ev.occurred else "  [pattern never occurs]"))
    if args.integration != "finest" and ev.occurred:
        decision = is_integrated(tab, pattern, args.integration, BASES[base])
        witness = "-" if decision.witness is None else decision.witness.descriptor(list(pattern.nodes))
        print(f"integrated ({args.integration}): {decision.integrated}  min evidence {decision.min_evidence!r}  "
              f"partitions checked {decision.partitions_checked}  witness {witness}")
    return 0


def cmd_render(args) -> int:
    cfg = _config(args)
    win = trajectory_window(int(args.initial, 16), cfg.width, cfg.height, cfg.steps, cfg.length)
    print(window_text(win))
    if args.svg:
        args.svg.write_text(windows_svg([(f"t={cfg.window_start}..", win, None)]))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stpatterns", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build-ensemble", "experiment1", "experiment2", "experiment3", "report"):
        _common(sub.add_parser(name))
    p = sub.add_parser("evifpp", help="EVIFPP of a pattern read from a file")
    _common(p)
    p.add_argument("pattern", type=Path)
    p.add_argument("--integration", choices=["finest", "all", "bipartitions"], default="finest",
                   help="also test integration over all partitions or bipartitions")
    p = sub.add_parser("render", help="print the window reached from an initial state")
    _common(p)
    p.add_argument("initial", help="initial state as hex bits (bit k = cell k)")
    p.add_argument("--svg", type=Path)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.command == "evifpp":
            return cmd_evifpp(args)
        if args.command == "render":
            return cmd_render(args)
        cfg = _config(args)
        tab = get_ensemble(cfg)
        if args.command == "build-ensemble":
            print(f"{len(tab)} distinct windows, multiplicities sum to {int(tab.counts.sum())}; cache {cfg.cache_path()}")
            return 0
        if args.command == "report":
            res = run_all(cfg, tab)
            print(res.report.text(), end="")
            return 0 if res.report.passed else 1
        base = resolve_base(cfg, tab)
        out = Path(cfg.output_dir)
        exp1 = experiment1(cfg, tab, base)
        if args.command == "experiment1":
            write_experiment1(cfg, exp1, out)
            ok = _print_rows(exp1.values, base)
            print("\n".join(exp1.notes))
            return 0 if ok else 1
        exp2 = experiment2(cfg, tab, base)
        if args.command == "experiment2":
            write_experiment2(cfg, exp2, out)
            ok = _print_rows(exp2.values, base) and bool(exp2.motility)
            print("\n".join(exp2.notes))
            return 0 if ok else 1
        exp3 = experiment3(cfg, tab, base, exp2)
        write_experiment3(cfg, exp3, out)
        ok = _print_rows(exp3.values, base)
        print(f"shifted nodes {exp3.shifted_nodes!r} vs original optimum {exp3.original_max!r}")
        print("\n".join(exp3.notes))
        return 0 if ok and exp3.shifted_nodes == exp3.original_max else 1
    except (CapacityError, EnsembleFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: use a smaller grid, or delete/override the ensemble cache with --cache-dir", file=sys.stderr)
        return 2
    except (ContractViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
