"""Command-line front end.

Subcommands
-----------
curves          error probability of each scheme over an |alpha|^2 sweep, as CSV
optimize        one DP run: backward pass, forward retrace, tree export
simulate        Monte Carlo run of an exported tree
check-ordering  sweep and verify the scheme dominance chain

Exit codes: 0 success, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import baselines
from .cache import TableCache, default_cache_dir
from .dp import run_backward
from .model import config_from_mean_photons
from .policy import ControlMode, exact_pc, export_tree, import_tree, retrace_forward, simulate
from .tables import Family, GridSpec, Interpolation

log = logging.getLogger("adaptive_ppm")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

SCHEMES = ("theory", "dd", "cn", "icn1", "icn2", "gk-dp", "proj-dp", "proj-dp-retraced")
# top (worst) to bottom (best)
ORDERING = ("dd", "cn", "icn1", "icn2", "gk-dp", "proj-dp", "theory")
ORDERING_TOL = 1e-3

DEFAULTS = {
    "M": [2],
    "alpha2": None,
    "schemes": ["theory", "dd", "cn", "icn1", "icn2"],
    "grid": 1000,
    "interp": "bilinear",
    "out": None,
    "seed": 0,
    "cache_dir": None,
    "trials": 100_000,
    "workers": 1,
    "family": "projective",
    "mode": "lookup",
}


class UsageError(Exception):
    pass


def _parse_list(text, conv, name):
    if isinstance(text, (list, tuple)):
        return [conv(t) for t in text]
    if isinstance(text, (int, float)):
        return [conv(text)]
    text = str(text).strip()
    if not text:
        raise UsageError(f"--{name}: empty list")
    try:
        if ":" in text:
            lo, hi, step = (float(t) for t in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError("range must be lo:hi:step with step > 0 and hi >= lo")
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [conv(round(lo + i * step, 12)) for i in range(n)]
        return [conv(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name}: {exc}") from None


def _settings(args) -> dict:
    """Merge defaults, the optional JSON config file, then explicit flags."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: {exc}") from None
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"--config: unknown keys {sorted(unknown)}")
        merged.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    merged["M"] = _parse_list(merged["M"], int, "M")
    if merged["alpha2"] is None:
        raise UsageError("--alpha2 is required")
    merged["alpha2"] = _parse_list(merged["alpha2"], float, "alpha2")
    if not merged["alpha2"]:
        raise UsageError("--alpha2: empty list")
    if any(a < 0 for a in merged["alpha2"]):
        raise UsageError("--alpha2 values must be >= 0")
    if any(m < 2 for m in merged["M"]):
        raise UsageError("--M values must be >= 2")
    schemes = merged["schemes"]
    if isinstance(schemes, str):
        schemes = [s.strip() for s in schemes.split(",") if s.strip()]
    bad = [s for s in schemes if s not in SCHEMES]
    if bad or not schemes:
        raise UsageError(f"--schemes: invalid {bad or 'empty'}; valid names: {', '.join(SCHEMES)}")
    merged["schemes"] = list(dict.fromkeys(schemes))
    if int(merged["grid"]) < 100:
        raise UsageError("--grid must be >= 100 points per axis")
    try:
        merged["interp"] = Interpolation(merged["interp"])
        merged["family"] = Family(merged["family"])
        merged["mode"] = ControlMode(merged["mode"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if int(merged["workers"]) < 1:
        raise UsageError("--workers must be >= 1")
    if merged["cache_dir"] is None:
        merged["cache_dir"] = default_cache_dir()
    return merged


def _fmt(x: float) -> str:
    return repr(float(x))


def _point(M: int, alpha2: float, schemes, grid_n: int, interp: Interpolation, cache_dir, mode):
    """All requested scheme rows at one (M, alpha2)."""
    cfg = config_from_mean_photons(M, alpha2)
    cache = TableCache(cache_dir) if cache_dir else None
    rows = []
    for s in schemes:
        params = ""
        if s == "theory":
            pe = baselines.pe_helstrom(cfg)
        elif s == "dd":
            pe = baselines.pe_direct_detection(cfg)
        elif s == "cn":
            pe = baselines.pe_conditional_nulling(cfg)
        elif s in ("icn1", "icn2"):
            res = baselines.optimize_icn(cfg, type_two=(s == "icn2"))
            pe = res.pe
            params = f"beta={_fmt(res.params.beta)};gain={_fmt(res.params.gain)}"
        else:
            family = Family.GK if s == "gk-dp" else Family.PROJECTIVE
            grid = GridSpec.for_cardinality(M, grid_n, interp)
            result = run_backward(cfg, grid, family, cache=cache)
            c = result.control0
            params = (f"phi0={_fmt(c.phi)}" if family is Family.PROJECTIVE
                      else f"beta0={_fmt(c.beta)};assoc0={c.association.value}")
            if s == "proj-dp-retraced":
                pe = 1.0 - exact_pc(retrace_forward(result, mode), cfg).pc
            else:
                pe = result.pe
            params += f";grid={grid_n}"
        rows.append((M, alpha2, s, pe, params))
    return rows


def _sweep(st) -> list:
    jobs = [(M, a, st["schemes"], int(st["grid"]), st["interp"], st["cache_dir"], st["mode"])
            for M in st["M"] for a in st["alpha2"]]
    if int(st["workers"]) > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(st["workers"])) as pool:
            parts = list(pool.map(_point, *zip(*jobs)))
    else:
        parts = [_point(*j) for j in jobs]
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def _write_csv(rows, out):
    text = "M,alpha2,scheme,pe,params\n" + "".join(
        f"{M},{_fmt(a)},{s},{_fmt(pe)},{params}\n" for M, a, s, pe, params in rows)
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None


def ordering_violations(rows, tol: float = ORDERING_TOL) -> list:
    """Adjacent pairs of the dominance chain violated by more than ``tol``."""
    by_point = {}
    for M, a, s, pe, _ in rows:
        by_point.setdefault((M, a), {})[s] = pe
    bad = []
    for (M, a), pes in sorted(by_point.items()):
        chain = [s for s in ORDERING if s in pes]
        for upper, lower in zip(chain, chain[1:]):
            if pes[lower] > pes[upper] + tol:
                bad.append((M, a, upper, lower, pes[upper], pes[lower]))
    return bad


def _report_ordering(rows) -> int:
    bad = ordering_violations(rows)
    for M, a, up, lo, pu, pl in bad:
        print(f"ordering violated at M={M} alpha2={a}: pe[{lo}]={pl:.6g} > pe[{up}]={pu:.6g}",
              file=sys.stderr)
    if bad:
        return EXIT_NUMERIC
    print(f"ordering holds at {len({(r[0], r[1]) for r in rows})} points", file=sys.stderr)
    return EXIT_OK


def cmd_curves(args) -> int:
    st = _settings(args)
    rows = _sweep(st)
    _write_csv(rows, st["out"])
    return _report_ordering(rows) if args.check_ordering else EXIT_OK


def cmd_check_ordering(args) -> int:
    if args.schemes is None:
        args.schemes = ",".join(ORDERING)
    st = _settings(args)
    rows = _sweep(st)
    if st["out"] is not None:
        _write_csv(rows, st["out"])
    return _report_ordering(rows)


def cmd_optimize(args) -> int:
    st = _settings(args)
    if len(st["M"]) != 1 or len(st["alpha2"]) != 1:
        raise UsageError("optimize takes a single --M and a single --alpha2")
    M, a2 = st["M"][0], st["alpha2"][0]
    cfg = config_from_mean_photons(M, a2)
    grid = GridSpec.for_cardinality(M, int(st["grid"]), st["interp"])
    cache = TableCache(st["cache_dir"]) if st["cache_dir"] else None
    t0 = time.perf_counter()
    result = run_backward(cfg, grid, st["family"], cache=cache)
    t1 = time.perf_counter()
    tree = retrace_forward(result, st["mode"])
    ev = exact_pc(tree, cfg)
    gap = result.pc - ev.pc
    out = st["out"] or f"tree_{st['family'].value}_M{M}_a{a2:g}.txt"
    try:
        Path(out).write_text(export_tree(tree))
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None
    print(f"M={M} alpha2={a2:g} family={st['family'].value} grid={grid.n_u} "
          f"backward_pc={result.pc:.10f} retraced_pc={ev.pc:.10f} gap={gap:.3e} "
          f"pe={1 - ev.pc:.10f} helstrom={baselines.pe_helstrom(cfg):.10f} "
          f"clamped={result.n_clamped} backward_s={t1 - t0:.2f} tree={out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be >= 1")
    st = _settings(args)
    try:
        text = Path(args.tree).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read tree file: {exc}") from None
    try:
        tree = import_tree(text)
    except ValueError as exc:
        raise UsageError(f"{args.tree}: {exc}") from None
    if len(st["alpha2"]) != 1:
        raise UsageError("simulate takes a single --alpha2")
    cfg = config_from_mean_photons(tree.M, st["alpha2"][0])
    trials = int(st["trials"])
    p, se = simulate(tree, cfg, trials, int(st["seed"]))
    exact = exact_pc(tree, cfg).pc
    print(f"M={tree.M} alpha2={st['alpha2'][0]:g} trials={trials} seed={st['seed']} "
          f"pc_hat={p:.6f} stderr={se:.6f} exact_pc={exact:.6f} z={(p - exact) / se if se else 0.0:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-ppm", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sweep=True):
        sp.add_argument("--config", help="JSON file with default settings (flags override)")
        sp.add_argument("--M", help="cardinality, or comma list")
        sp.add_argument("--alpha2", help="mean photon numbers: comma list or lo:hi:step")
        sp.add_argument("--grid", type=int, help="grid points per axis (default 1000)")
        sp.add_argument("--interp", choices=[i.value for i in Interpolation])
        sp.add_argument("--out", help="output path ('-' for stdout)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--cache-dir", dest="cache_dir", help="table cache directory")
        sp.add_argument("--mode", choices=[m.value for m in ControlMode],
                        help="retrace control rule")
        if sweep:
            sp.add_argument("--schemes", help=f"comma list from {{{','.join(SCHEMES)}}}")
            sp.add_argument("--workers", type=int, help="parallel sweep points")

    sp = sub.add_parser("curves", help="error probability curves as CSV")
    common(sp)
    sp.add_argument("--check-ordering", action="store_true",
                    help="exit 3 if the dominance chain is violated")
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("check-ordering", help="verify the scheme dominance chain")
    common(sp)
    sp.set_defaults(func=cmd_check_ordering)

    sp = sub.add_parser("optimize", help="DP run, retrace and tree export")
    common(sp, sweep=False)
    sp.add_argument("--family", choices=[f.value for f in Family])
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("simulate", help="Monte Carlo evaluation of a tree file")
    sp.add_argument("tree")
    common(sp, sweep=False)
    sp.add_argument("--trials", type=int)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"adaptive-ppm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"adaptive-ppm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
