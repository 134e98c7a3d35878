"""Command-line entry point: ``wanloc <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
import time

import numpy as np

from . import __version__, config as configmod
from .errors import ConfigError, WanlocError
from .fiber import validate_gap
from .pipeline import localize, prepare, setup

EXIT_CODES = """exit codes:
  0  success
  1  unexpected library error or I/O failure
  2  configuration or usage error
  3  lattice error (singular basis, invalid grid size)
  4  spectrum error (eigensolver failure, gap violation)
  5  frame error (degenerate projection, transport gap, non-orthonormal input)
  6  optimization error (line-search stall, oracle preconditions)
  7  Wannier error (center drift, insufficient decay)
  8  harmonic-map error (quadrature divergence, tangency, invalid polynomials)
"""


# -- output -----------------------------------------------------------------

def fmt(x) -> str:
    return format(float(x), ".17g")


def _json(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _json(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with 17 significant digits and the caller's key order."""
    return _json(obj) + "\n"


class Output:
    def __init__(self, directory, formats=("json", "csv"), quiet=False):
        self.directory = directory
        self.formats = formats
        self.quiet = quiet
        self.written = []

    def _path(self, name):
        os.makedirs(self.directory, exist_ok=True)
        return os.path.join(self.directory, name)

    def json(self, name, obj):
        if "json" not in self.formats:
            return
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(obj))
        self.written.append(path)

    def csv(self, name, header, rows):
        if "csv" not in self.formats:
            return
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        self.written.append(path)

    def say(self, msg):
        if not self.quiet:
            print(msg)


def read_gauge_csv(path, nk: int, m: int) -> np.ndarray:
    gauge = np.zeros((nk, m, m), dtype=complex)
    seen = np.zeros((nk, m, m), dtype=bool)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["kIndex", "row", "col", "re", "im"]:
                raise ConfigError(f"{path}:1: unexpected gauge header {header}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    k, a, b = int(row[0]), int(row[1]), int(row[2])
                    gauge[k, a, b] = complex(float(row[3]), float(row[4]))
                    seen[k, a, b] = True
                except (ValueError, IndexError):
                    raise ConfigError(f"{path}:{lineno}: malformed gauge row") from None
    except OSError as exc:
        raise ConfigError(f"cannot read gauge {path}: {exc}") from exc
    if not seen.all():
        raise ConfigError(f"{path}: gauge does not cover {nk} k-points with m={m}")
    return gauge


def gauge_rows(gauge):
    nk, m, _ = gauge.shape
    for k in range(nk):
        for a in range(m):
            for b in range(m):
                yield [k, a, b, float(gauge[k, a, b].real), float(gauge[k, a, b].imag)]


def wannier_rows(ws):
    sc = ws.supercell
    x = (sc.reduced_points() @ sc.lattice.basis).reshape(-1, sc.dim)
    for a in range(ws.m):
        vals = ws.values[a].ravel()
        for j in range(vals.size):
            v = vals[j]
            yield [*map(float, x[j]), a, float(v.real), float(v.imag), float(abs(v))]


def wannier_summary(ws, decay_error=None) -> dict:
    out = {"samplesPerCell": list(ws.supercell.samples_per_cell),
           "norms": ws.norms().tolist(),
           "centers": ws.centers.tolist(), "spreads": ws.spreads.tolist(),
           "latticeCenters": ws.lattice_centers.tolist(),
           "latticeSpreads": ws.lattice_spreads.tolist(),
           "spreadTotal": float(np.sum(ws.lattice_spreads))}
    if ws.decay is not None:
        out["decay"] = [f.to_dict() for f in ws.decay]
    if decay_error is not None:
        out["decayError"] = decay_error
    return out


def _wannier_outputs(out, ws, decay_error):
    header = [*[f"x{i + 1}" for i in range(ws.supercell.dim)], "band", "re", "im", "abs"]
    out.csv("wannier.csv", header, wannier_rows(ws))
    return wannier_summary(ws, decay_error)


# -- subcommands ------------------------------------------------------------

def _load(args, need):
    if not args.config:
        raise ConfigError("--config PATH is required for this subcommand")
    rc = configmod.build(configmod.load(args.config), need)
    if args.seed is not None:
        rc.optimizer = dataclasses.replace(rc.optimizer, seed=args.seed)
    return rc


def _output(args, rc=None) -> Output:
    directory = args.out or (rc.directory if rc is not None and rc.directory else ".")
    formats = rc.formats if rc is not None else ("json", "csv")
    return Output(directory, formats, args.quiet)


def cmd_bands(args) -> int:
    rc = _load(args, ("potential", "window", "grid"))
    out = _output(args, rc)
    prob = setup(rc.lattice, rc.potential, rc.sizes, rc.cutoff, None, args.threads)
    w = rc.window
    nb = min(prob.basis.size, w.first + w.count + 1)
    d = prob.grid.dim
    evals = np.array([s.eigenvalues[:nb] for s in prob.spectra])
    rows = [[i, *map(float, prob.grid.points[i]), *map(float, evals[i])]
            for i in range(prob.grid.npoints)]
    out.csv("bands.csv", ["kIndex", *[f"k{i + 1}" for i in range(d)],
                          *[f"E{j}" for j in range(nb)]], rows)
    lo, hi = w.first, w.first + w.count
    gaps = {"window": {"first": w.first, "count": w.count}}
    gaps["gapBelow"] = float(evals[:, lo].min() - evals[:, lo - 1].max()) if lo > 0 else None
    gaps["gapAbove"] = float(evals[:, hi].min() - evals[:, hi - 1].max()) if hi < nb else None
    edge = np.all(np.isclose(prob.grid.reduced, -0.5), axis=1)
    if edge.any():
        e = evals[np.argmax(edge)]
        gaps["zoneCornerGaps"] = np.diff(e).tolist()
    failure = None
    try:
        gaps["minDirectGap"] = validate_gap(prob.spectra, w).min_gap
        gaps["valid"] = True
    except WanlocError as exc:
        gaps["valid"] = False
        gaps["error"] = str(exc)
        failure = exc
    out.json("bands_gaps.json", gaps)
    out.say(f"bands: {prob.grid.npoints} k-points, {nb} bands; gap below "
            f"{gaps['gapBelow']}, above {gaps['gapAbove']}")
    if failure is not None:
        raise failure
    return 0


def _trace_block(res) -> dict:
    tr = res.trace
    return {"iterations": len(tr.objective) - 1, "converged": bool(tr.converged),
            "finalObjective": tr.final_objective, "gradNorm": tr.grad_norm[-1],
            "elResidual": tr.el_residual,
            "recenterings": [{"iter": it, "shifts": s} for it, s in tr.recenterings],
            "fdChecks": [{"iter": it, "exact": ex, "fd": fd} for it, ex, fd in tr.fd_checks],
            "history": tr.rows()}


def _oracle_block(orc, final=None) -> dict:
    out = {"objective": orc.objective, "poissonObjective": orc.poisson_objective,
           "winding": list(orc.winding), "gradNorm": orc.grad_norm,
           "poissonGradNorm": orc.poisson_grad_norm,
           "sectors": [{"winding": list(k), "objective": v} for k, v in orc.sector_objectives.items()]}
    if final is not None:
        out["relativeDifference"] = abs(final - orc.objective) / abs(orc.objective)
    return out


def cmd_localize(args) -> int:
    rc = _load(args, ("potential", "window", "grid"))
    out = _output(args, rc)
    t0 = time.perf_counter()
    prob = prepare(rc, args.threads, trial=args.frame_trial)
    start = args.start or rc.start
    res = localize(prob, rc.optimizer, start, rc.samples_per_cell, oracle=args.oracle)
    tr = res.trace
    doc = {"window": {"first": prob.window.first, "count": prob.window.count,
                      "minGap": prob.window.min_gap},
           "frame": {"trial": args.frame_trial or rc.trial, "sigmaMin": float(prob.sigma_min.min())},
           "trace": _trace_block(res), "functional": res.report.to_dict(),
           "wannier": _wannier_outputs(out, res.wannier, res.decay_error)}
    if res.oracle is not None:
        doc["oracle"] = _oracle_block(res.oracle, tr.final_objective)
    out.json("localize.json", doc)
    out.csv("trace.csv", ["iter", "objective", "gradNorm", "step"],
            ([r["iter"], r["F"], r["gradNorm"], r["step"]] for r in tr.rows()))
    out.csv("gauge.csv", ["kIndex", "row", "col", "re", "im"], gauge_rows(tr.gauge))
    out.say(f"localize: F = {fmt(tr.final_objective)} after {len(tr.objective) - 1} iterations "
            f"(converged: {tr.converged}, gradNorm {tr.grad_norm[-1]:.3g}) "
            f"in {time.perf_counter() - t0:.2f} s")
    if res.decay_error:
        out.say(f"decay fit skipped: {res.decay_error}")
    return 0


def cmd_synthesize(args) -> int:
    rc = _load(args, ("potential", "window", "grid"))
    out = _output(args, rc)
    prob = prepare(rc, args.threads, trial=args.frame_trial)
    from .optimizer import identity_gauge
    from .wannier import attach_lattice_moments, decay_fit, moments, synthesize
    from .errors import InsufficientDecay
    nk, m = prob.grid.npoints, prob.window.count
    gauge = read_gauge_csv(args.gauge, nk, m) if args.gauge else identity_gauge(nk, m)
    ws = moments(synthesize(prob.frame.with_gauge(gauge), rc.samples_per_cell))
    attach_lattice_moments(ws, prob.stencil)
    err = None
    try:
        decay_fit(ws)
    except InsufficientDecay as exc:
        err = str(exc)
    out.json("wannier.json", _wannier_outputs(out, ws, err))
    out.say(f"synthesize: spreads {ws.lattice_spreads.tolist()}")
    return 0


def cmd_oracle(args) -> int:
    rc = _load(args, ("potential", "window", "grid"))
    out = _output(args, rc)
    prob = prepare(rc, args.threads, trial=args.frame_trial)
    from .optimizer import abelian_poisson_oracle
    orc = abelian_poisson_oracle(prob.frame)
    out.json("oracle.json", _oracle_block(orc))
    out.csv("oracle_gauge.csv", ["kIndex", "row", "col", "re", "im"], gauge_rows(orc.gauge))
    out.say(f"oracle-abelian: F = {fmt(orc.objective)}, winding {orc.winding}, "
            f"gradNorm {orc.grad_norm:.3g}")
    return 0


def default_harmonic_cases():
    from .harmonic import make_line
    return [("m2-degree1", make_line([[1], [0, 1]])),
            ("m2-degree2", make_line([[1], [0, 0, 1]])),
            ("m2-degree3", make_line([[1], [0, 0, 0, 1]])),
            ("m3-degree1", make_line([[1], [0, 1], [2]])),
            ("m3-degree2", make_line([[1], [0, 1], [0, 0, 1]])),
            ("m3-degree3", make_line([[1, 2], [0, 1, 0, 1], [0, 0, 1]]))]


def monomial_line(m: int, degree: int):
    """``(1, z^e_1, ..., z^degree)`` with exponents spread over the components."""
    from .harmonic import make_line
    polys = []
    for a in range(m):
        e = (a * degree) // (m - 1)
        c = [0.0] * (e + 1)
        c[e] = 1.0
        polys.append(c)
    return make_line(polys)


def harmonic_suite(cases, trials: int, seed: int, quad_order: int = 48) -> dict:
    from . import harmonic as hm
    rng = np.random.default_rng(seed)
    report = hm.quantization_check(cases, quad_order)
    identity = {}
    for m in (2, 3):
        worst = 0.0
        for _ in range(trials):
            u = hm.random_special_unitary(m, rng)
            dus = [rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)) for _ in range(3)]
            lhs, rhs = hm.second_variation_identity(u, dus)
            worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
        identity[f"m{m}"] = {"trials": trials, "maxRelativeError": worst, "pass": worst <= 1e-9}
    deg1 = next((r for r in report if r["degree"] == 1 and r["case"].startswith("m2")), None)
    bound = hm.stability_energy_bound(2)
    out = {"cases": report, "secondVariation": identity}
    if deg1 is not None:
        out["energyBound"] = {"m": 2, "energy": deg1["energy"], "bound": bound,
                              "exceeds": deg1["energy"] > bound}
    out["pass"] = all(r["pass"] for r in report) and all(v["pass"] for v in identity.values())
    return out


def cmd_harmonic(args) -> int:
    out = Output(args.out or ".", ("json", "csv"), args.quiet)
    cases = default_harmonic_cases()
    if args.degree is not None or args.m is not None:
        m = args.m if args.m is not None else 2
        deg = args.degree if args.degree is not None else 1
        if m < 2 or deg < 0:
            raise ConfigError("--m must be >= 2 and --degree >= 0")
        cases.append((f"m{m}-degree{deg}-extra", monomial_line(m, deg)))
    doc = harmonic_suite(cases, args.trials, 0 if args.seed is None else args.seed)
    out.json("harmonic.json", doc)
    for r in doc["cases"]:
        out.say(f"{r['case']}: degree {r['degree']}, E/8pi = {r['ratioTo8pi']:.6f}, "
                f"{'pass' if r['pass'] else 'FAIL'}")
    for k, v in doc["secondVariation"].items():
        out.say(f"second variation {k}: {v['trials']} trials, max rel. error "
                f"{v['maxRelativeError']:.2e}, {'pass' if v['pass'] else 'FAIL'}")
    return 0 if doc["pass"] else 1


# -- parser -----------------------------------------------------------------

def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="run configuration file")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory")
    p.add_argument("--seed", metavar="N", type=int, default=d, help="seed override")
    p.add_argument("--threads", metavar="N", type=int, default=d, help="worker threads for k-point solves")
    p.add_argument("--quiet", action="store_true", default=d, help="no progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wanloc", description="Localized Wannier functions by gauge optimization.",
        epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    frame = argparse.ArgumentParser(add_help=False)
    frame.add_argument("--frame-trial", choices=("eigenvector", "random"), default=None,
                       help="trial orbitals for the reference frame")

    p = sub.add_parser("bands", parents=[common], help="band energies on the k-grid and gap report",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.set_defaults(func=cmd_bands)
    p = sub.add_parser("localize", parents=[common, frame], help="minimize the spread functional",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--start", choices=("identity", "random"), default=None, help="initial gauge")
    p.add_argument("--oracle", action="store_true", help="append the single-band Poisson oracle")
    p.set_defaults(func=cmd_localize)
    p = sub.add_parser("synthesize", parents=[common, frame], help="Wannier functions from a gauge",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--gauge", metavar="CSV", default=None,
                   help="gauge written by 'localize' (default: identity)")
    p.set_defaults(func=cmd_synthesize)
    p = sub.add_parser("oracle-abelian", parents=[common, frame], help="single-band Poisson oracle",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("harmonic-check", parents=[common], help="harmonic-map verification suite",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--degree", type=int, default=None, help="degree of an added monomial case")
    p.add_argument("--m", type=int, default=None, help="matrix size of the added case")
    p.add_argument("--trials", type=int, default=100, help="random trials per m for the identity")
    p.set_defaults(func=cmd_harmonic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    args.threads = args.threads or 1
    args.quiet = bool(args.quiet)
    try:
        return args.func(args)
    except WanlocError as exc:
        print(f"wanloc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"wanloc: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
