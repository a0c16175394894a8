"""``morseflow`` command-line entry point.

Exit codes: 0 pass, 1 error, 2 non-simple maximum (eigenvalue tie),
3 principal line ending at a saddle, 4 failed property check.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import checks
from .config import load_config
from .critical import NonSimpleTie, find_critical_points, simplicity_gap
from .errors import MorseFlowError
from .experiments import default_deltas, run_concentration, run_scaling_comparison
from .flow import SADDLE_HIT, trace_principal
from .graph import RANK0, RANK1, build_maxmin, export, validate_dim1
from .io import atomic_write, atomic_write_json
from .rng import check_seed

EXIT_OK, EXIT_ERROR, EXIT_NON_SIMPLE, EXIT_SADDLE_HIT, EXIT_PROPERTY_FAIL = 0, 1, 2, 3, 4
MIN_SAMPLES = 100


class UsageError(MorseFlowError):
    pass


def _say(msg: str = "") -> None:
    print(msg, flush=True)


def _parse_deltas(text):
    if text is None:
        return None
    if isinstance(text, list):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _setting(args, cfg, name, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.params.get(name, default) if cfg is not None else default


def _load(args, required=True):
    if args.config is None:
        if required:
            raise UsageError("--config is required for this subcommand")
        return None
    return load_config(args.config)


def _critset(args, cfg):
    grid = int(_setting(args, cfg, "grid", 32))
    if grid < 4:
        raise UsageError("grid must be at least 4 per axis")
    return find_critical_points(cfg.landscape, grid)


def _pick_maximum(args, cfg, critset) -> int:
    pid = _setting(args, cfg, "maximum")
    if pid is not None:
        return int(pid)
    if not critset.maxima:
        raise UsageError("the landscape has no maximum")
    return critset.maxima[0].id


def _check_maximum(cfg, critset, pid):
    """Exit code for a maximum that fails simplicity, else None."""
    p = critset[pid]
    if isinstance(simplicity_gap(p, cfg.landscape.tolerances.gap_rel_tol), NonSimpleTie):
        _say(f"maximum {pid}: tied smallest eigenvalue (gap_rel {p.gap_rel:.3g})")
        return EXIT_NON_SIMPLE
    lines = trace_principal(cfg.landscape, p, critset)
    for line in lines:
        if line.outcome != "minimum":
            _say(f"maximum {pid}: principal line {line.sign} ends with {line.outcome}"
                 f" (terminal {line.terminal_id})")
            return EXIT_SADDLE_HIT if line.outcome == SADDLE_HIT else EXIT_ERROR
    return None


def _samples(args, cfg) -> int:
    n = int(_setting(args, cfg, "samples", 2000))
    if n < MIN_SAMPLES:
        raise UsageError(f"N must be at least {MIN_SAMPLES} for stochastic subcommands, got {n}")
    return n


def _deltas(args, cfg, critset, pid):
    deltas = _parse_deltas(_setting(args, cfg, "deltas"))
    if deltas is None:
        deltas = default_deltas(min(0.4, 0.45 * critset.separation(pid)))
    return deltas


def cmd_critical(args) -> int:
    cfg = _load(args)
    cs = _critset(args, cfg)
    out = Path(args.out)
    fmt = args.format or "json"
    if fmt == "csv":
        n = cfg.landscape.n
        rows = ["id,kind,index,value," + ",".join(f"x{i + 1}" for i in range(n)) + ",gap_rel"]
        for p in cs:
            loc = ",".join(repr(float(v)) for v in p.location)
            rows.append(f"{p.id},{p.kind},{p.morse_index},{p.value!r},{loc},{p.gap_rel!r}")
        atomic_write(out / "critical.csv", "\n".join(rows) + "\n")
    elif fmt == "json":
        atomic_write_json(out / "critical.json", cs.to_record())
    else:
        raise UsageError(f"format {fmt!r} is not available for critical")
    _say(f"{len(cs)} critical points: {len(cs.minima)} minima, {len(cs.saddles)} saddles, "
         f"{len(cs.maxima)} maxima (Euler sum {cs.euler_sum()})")
    code = EXIT_OK
    for p in cs.maxima:
        verdict = simplicity_gap(p, cfg.landscape.tolerances.gap_rel_tol)
        tie = isinstance(verdict, NonSimpleTie)
        _say(f"  maximum {p.id} at {np.round(p.location, 6).tolist()}: eigenvalues "
             f"{np.round(p.eigenvalues, 6).tolist()}, {'TIE' if tie else 'simple gap'}")
        if tie:
            code = EXIT_NON_SIMPLE
    return code


def cmd_graph(args) -> int:
    cfg = _load(args)
    L = cfg.landscape
    cs = _critset(args, cfg)
    lines, ties, saddle_hits = [], [], []
    for p in cs.maxima:
        if isinstance(simplicity_gap(p, L.tolerances.gap_rel_tol), NonSimpleTie):
            ties.append(p.id)
            continue
        pair = trace_principal(L, p, cs)
        lines.extend(pair)
        for line in pair:
            _say(f"maximum {p.id} {line.sign}: {line.outcome} -> {line.terminal_id}")
            if line.outcome == SADDLE_HIT:
                saddle_hits.append(p.id)
    out = Path(args.out)
    atomic_write_json(out / "principal_lines.json", [line.to_record() for line in lines])
    if ties:
        _say(f"NON_SIMPLE: tied eigenvalues at maxima {ties}")
        return EXIT_NON_SIMPLE
    if saddle_hits:
        _say(f"SADDLE_HIT: principal lines of maxima {sorted(set(saddle_hits))} end at saddles")
        return EXIT_SADDLE_HIT
    g = build_maxmin(cs, lines)
    fmt = args.format or "dot"
    if fmt not in ("dot", "json"):
        raise UsageError(f"format {fmt!r} is not available for graph")
    atomic_write(out / f"graph.{fmt}", export(g, fmt))
    _say(f"max-min graph: {len(g.maxima)} maxima, {len(g.minima)} minima, {len(g.edges)} edges")
    if L.n == 1:
        topology = RANK1 if L.manifold.periodic else RANK0
        try:
            validate_dim1(g, topology)
        except MorseFlowError as exc:
            _say(f"PROPERTY_FAIL: {exc}")
            return EXIT_PROPERTY_FAIL
        _say(f"1-D structure ({topology}) holds")
    return EXIT_OK


def cmd_concentrate(args) -> int:
    cfg = _load(args)
    cs = _critset(args, cfg)
    pid = _pick_maximum(args, cfg, cs)
    n = _samples(args, cfg)
    code = _check_maximum(cfg, cs, pid)
    if code is not None:
        return code
    deltas = _deltas(args, cfg, cs, pid)
    rep = run_concentration(cfg.landscape, pid, deltas, n, args.seed, cs, args.threads)
    out = Path(args.out)
    atomic_write(out / "concentration.csv", rep.to_csv())
    atomic_write_json(out / "concentration.json", rep.to_record())
    _say(f"maximum {pid}: principal minima {rep.m_plus} (+) and {rep.m_minus} (-)")
    for r in rep.rows:
        _say(f"  delta={r.delta:<8g} f={r.f:.4f}  [{r.wilson_lo:.4f}, {r.wilson_hi:.4f}]  "
             f"unresolved={r.unresolved}")
    if not rep.monotone_within_noise():
        _say("PROPERTY_FAIL: f decreases beyond Wilson noise as delta shrinks")
        return EXIT_PROPERTY_FAIL
    return EXIT_OK


def cmd_scaling(args) -> int:
    cfg = _load(args)
    cs = _critset(args, cfg)
    pid = _pick_maximum(args, cfg, cs)
    n = _samples(args, cfg)
    code = _check_maximum(cfg, cs, pid)
    if code is not None:
        return code
    deltas = _deltas(args, cfg, cs, pid)
    cmp = run_scaling_comparison(cfg.landscape, pid, deltas, n, args.seed, cs, args.threads)
    out = Path(args.out)
    atomic_write(out / "scaling.csv", cmp.to_csv())
    atomic_write_json(out / "scaling.json", cmp.to_record())
    _say(f"eigenvalue ratio {cmp.eigenvalue_ratio:.4f}: predicted exponent {cmp.predicted:.4f}, "
         f"fitted {'n/a' if cmp.fitted is None else f'{cmp.fitted:.4f}'}")
    if cmp.slow_convergence:
        _say("slow convergence: predicted exponent below 0.25, concentration degrades")
    tol = float(_setting(args, cfg, "tolerance", 0.2))
    if cmp.fitted is None or abs(cmp.deviation) > tol:
        _say(f"PROPERTY_FAIL: fitted exponent deviates from the prediction by more than {tol}")
        return EXIT_PROPERTY_FAIL
    return EXIT_OK


def cmd_linear_check(args) -> int:
    cfg = _load(args, required=False)
    n = _samples(args, cfg) if args.samples is not None else 100_000
    results, estimates = checks.linear_checks(args.seed, n)
    out = Path(args.out)
    for ratio, est in estimates.items():
        rows = ["delta,ratio"] + [f"{d!r},{r!r}" for d, r in est.rows()]
        atomic_write(out / f"linear_ratio{ratio:g}.csv", "\n".join(rows) + "\n")
    atomic_write_json(out / "linear_check.json", {
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in results],
        "fitted_exponents": {f"{k:g}": {"fitted": e.slope, "predicted": e.predicted}
                             for k, e in estimates.items()},
    })
    return _report(results)


def cmd_perturb_check(args) -> int:
    cfg = _load(args, required=False)
    pairs = int(_setting(args, cfg, "pairs", 200))
    results = checks.perturb_checks(args.seed, pairs)
    atomic_write_json(Path(args.out) / "perturb_check.json",
                      [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in results])
    return _report(results)


def _report(results) -> int:
    for c in results:
        _say(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}")
    return EXIT_OK if all(c.passed for c in results) else EXIT_PROPERTY_FAIL


COMMANDS = {
    "critical": cmd_critical,
    "graph": cmd_graph,
    "concentrate": cmd_concentrate,
    "scaling": cmd_scaling,
    "linear-check": cmd_linear_check,
    "perturb-check": cmd_perturb_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morseflow", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="landscape config (JSON)")
    parser.add_argument("--seed", type=int, default=0, help="master seed, unsigned 64-bit")
    parser.add_argument("--out", default="morseflow-out", help="report directory")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--format", choices=("dot", "json", "csv"))
    parser.add_argument("--grid", type=int, help="Newton seeds per axis")
    parser.add_argument("--maximum", type=int, help="critical point id of the maximum")
    parser.add_argument("--deltas", help="comma-separated decreasing ball radii")
    parser.add_argument("--samples", type=int, help="samples per radius")
    parser.add_argument("--pairs", type=int, help="random SPD pairs for perturb-check")
    parser.add_argument("--tolerance", type=float, help="allowed exponent deviation for scaling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.seed = check_seed(args.seed)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[args.command](args)
    except (MorseFlowError, ValueError, OSError) as exc:
        print(f"morseflow: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
