"""Command line front end: ``vvlab expand|solve|sweep|verify``.

The orchestrator owns all mutable state.  Per-eps jobs receive an immutable
:class:`~vvlab.config.RunConfig` and return plain result records, which are
merged in descending eps order so the output never depends on ``--jobs``.
Files whose content is a pure function of the configuration (manifests,
tables, dumps) are byte-identical between runs; wall-clock timings go to
separate files.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import io
from .composite import assemble_composite, residual
from .config import ConfigError, RunConfig, load_config
from .hierarchy import ExpansionHierarchy, build_hierarchy, lattice
from .ns import error_norms, solve_steady_ns
from .verify import TERM_TOLERANCES, run_verify

log = logging.getLogger("vvlab")

COLUMNS = ("eps", "err_leading", "v_max", "err_composite", "residual_l2", "newton_iterations",
           "converged", "config_hash")
FIT_COLUMNS = ("err_leading", "v_max", "err_composite", "residual_l2")
#: Error columns whose every entry is below this are treated as exactly zero (no slope fitted).
DEGENERATE = 1e-12


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: int


def fit_rate(eps: Sequence[float], err: Sequence[float]) -> RateFit:
    """Least-squares line through ``(log eps, log err)``.

    Non-finite or non-positive entries are dropped; at least three must remain.
    """
    e = np.asarray(eps, dtype=float)
    r = np.asarray(err, dtype=float)
    ok = np.isfinite(e) & np.isfinite(r) & (e > 0) & (r > 0)
    if ok.sum() < 3:
        raise ValueError("a rate fit needs at least three finite positive points")
    lr = stats.linregress(np.log(e[ok]), np.log(r[ok]))
    return RateFit(float(lr.slope), float(lr.intercept), float(lr.rvalue**2), int(ok.sum()))


# ---------------------------------------------------------------------------
# per-eps jobs
# ---------------------------------------------------------------------------

@dataclass
class EpsResult:
    eps: float
    err_leading: float = math.nan
    v_max: float = math.nan
    err_composite: float = math.nan
    residual_l2: float = math.nan
    newton_iterations: int = 0
    converged: bool = False
    seconds: float = 0.0
    error: str = ""
    fields: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, cfg_hash: str) -> list:
        return [self.eps, self.err_leading, self.v_max, self.err_composite, self.residual_l2,
                self.newton_iterations, self.converged, cfg_hash]


_HIERARCHY_CACHE: dict[tuple[str, str], ExpansionHierarchy] = {}


def hierarchy_for(cfg: RunConfig, delta: float | None = None) -> ExpansionHierarchy:
    """Build (once per process) the expansion of ``cfg`` up to its order."""
    key = (cfg.hash, repr(delta))
    if key not in _HIERARCHY_CACHE:
        _HIERARCHY_CACHE[key] = build_hierarchy(cfg.spec(delta), cfg.order, rtol=min(cfg.gmres_rtol, 1e-10))
    return _HIERARCHY_CACHE[key]


def run_epsilon(cfg: RunConfig, eps: float, h: ExpansionHierarchy | None = None,
                keep_fields: bool = False) -> EpsResult:
    """Composite, Navier-Stokes solve started from it, and the error norms, at one eps."""
    t0 = time.perf_counter()
    out = EpsResult(eps)
    try:
        h = h or hierarchy_for(cfg)
        comp = assemble_composite(h, eps)
        out.residual_l2 = residual(comp).l2
        state = solve_steady_ns(cfg.spec(), eps, guess=comp, tol=cfg.newton_tol,
                                max_iter=cfg.max_newton, gmres_rtol=cfg.gmres_rtol)
        rep = error_norms(state, h.A, h.upper.u[Fraction(0)], comp)
        out.err_leading, out.v_max, out.err_composite = rep.err_leading, rep.v_max, rep.err_composite
        out.newton_iterations, out.converged = state.iterations, state.converged
        if keep_fields:
            out.fields = {"u": state.u.physical, "v": state.v.physical, "p": state.p.physical,
                          "u_a": comp.u.physical, "v_a": comp.v.physical, "p_a": comp.p.physical}
    except Exception as exc:  # a failed eps is a table entry, not a crash
        log.error("eps=%g failed: %s", eps, exc)
        out.error = f"{type(exc).__name__}: {exc}"
    out.seconds = time.perf_counter() - t0
    return out


def _job(args: tuple[RunConfig, float, bool]) -> EpsResult:
    cfg, eps, keep = args
    return run_epsilon(cfg, eps, keep_fields=keep)


def run_epsilons(cfg: RunConfig, jobs: int = 1, keep_fields: bool = False,
                 h: ExpansionHierarchy | None = None) -> list[EpsResult]:
    """All eps of the config, merged in descending order."""
    if jobs <= 1 or len(cfg.epsilons) == 1:
        h = h or hierarchy_for(cfg)
        results = [run_epsilon(cfg, e, h, keep_fields) for e in cfg.epsilons]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, [(cfg, e, keep_fields) for e in cfg.epsilons]))
    return sorted(results, key=lambda r: -r.eps)


# ---------------------------------------------------------------------------
# convergence table
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    config_hash: str
    order: Fraction
    rows: list[EpsResult]
    slopes: dict[str, RateFit | None]

    @classmethod
    def from_results(cls, cfg: RunConfig, results: list[EpsResult]) -> "ConvergenceTable":
        rows = sorted(results, key=lambda r: -r.eps)
        slopes: dict[str, RateFit | None] = {}
        good = [r for r in rows if r.converged and not r.error]
        for col in FIT_COLUMNS:
            vals = [getattr(r, col) for r in good]
            if len(vals) < 3 or max(vals) < DEGENERATE:
                slopes[col] = None
                continue
            try:
                slopes[col] = fit_rate([r.eps for r in good], vals)
            except ValueError:
                slopes[col] = None
        return cls(cfg.hash, cfg.order, rows, slopes)

    def csv(self) -> str:
        return io.csv_text(COLUMNS, (r.row(self.config_hash) for r in self.rows))

    def dat(self) -> str:
        return io.dat_text(COLUMNS[:-1], (r.row(self.config_hash)[:-1] for r in self.rows))

    def timings_csv(self) -> str:
        return io.csv_text(("eps", "seconds", "config_hash"),
                           ([r.eps, r.seconds, self.config_hash] for r in self.rows))

    def manifest(self) -> dict:
        return {
            "schema": "vvlab.sweep/1",
            "config_hash": self.config_hash,
            "order": str(self.order),
            "columns": list(COLUMNS),
            "failed": [{"eps": r.eps, "error": r.error or "not converged"}
                       for r in self.rows if r.error or not r.converged],
            "slopes": {k: (None if v is None else {"slope": v.slope, "intercept": v.intercept,
                                                   "r2": v.r2, "points": v.points})
                       for k, v in self.slopes.items()},
        }

    @property
    def passed(self) -> bool:
        return all(r.converged and not r.error for r in self.rows)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _term_fields(h: ExpansionHierarchy, kind: str, s: Fraction) -> dict[str, tuple[np.ndarray, str]]:
    """Sampled components of one term with their dump names."""
    if kind == "euler":
        y = h.spec.disc.y_grid().nodes
        t = h.cascade.terms[s]
        return {"u": (t.u(y), f"u_e^({s})"), "v": (t.v(y), f"v_e^({s})")}
    series = h.upper if kind == "upper" else h.lower
    shift = Fraction(1) if kind == "upper" else Fraction(2, 3)
    tag = "p" if kind == "upper" else "hat"
    out = {"u": (series.u[s].physical, f"u_{tag}^({s})")}
    if s + shift in series.v:
        out["v"] = (series.v[s + shift].physical, f"v_{tag}^({s + shift})")
    if s + shift in series.p:
        out["p"] = (series.p[s + shift].physical, f"p_{tag}^({s + shift})")
    return out


def _term_passed(checks: dict[str, float]) -> bool:
    return all(abs(v) <= TERM_TOLERANCES[k] for k, v in checks.items() if k in TERM_TOLERANCES)


def cmd_expand(cfg: RunConfig, out: Path, h: ExpansionHierarchy | None = None) -> dict:
    """Build the expansion, dump every term and write ``manifest.json``."""
    h = h or hierarchy_for(cfg)
    fdir = out / "expand" / "fields"
    fdir.mkdir(parents=True, exist_ok=True)
    terms = []
    for e in sorted(h.entries, key=lambda e: (e.exponent, ("euler", "upper", "lower").index(e.kind))):
        files = {}
        for comp, (arr, name) in _term_fields(h, e.kind, e.exponent).items():
            fname = f"{e.kind}-{str(e.exponent).replace('/', '_')}.{comp}.vvlb"
            files[comp] = {"path": f"fields/{fname}", "sha256": io.write_field(fdir / fname, arr, 0.0, name)}
        terms.append({
            "label": e.label,
            "kind": e.kind,
            "exponent": str(e.exponent),
            "far_constant": e.far_constant,
            "checks": {k: v for k, v in sorted(e.checks.items())},
            "passed": _term_passed(e.checks),
            "files": files,
        })
    manifest = {
        "schema": "vvlab.expand/1",
        "config_hash": cfg.hash,
        "order": str(h.order),
        "exponents": [str(s) for s in lattice(h.order)],
        "A": h.A,
        "trivial": h.is_trivial(1e-14),
        "grids": {"y": len(h.spec.disc.y_grid()), "zeta": [len(h.upper.grid), h.upper.grid.bound],
                  "eta": [len(h.lower.grid), h.lower.grid.bound], "n_x": cfg.n_x},
        "terms": terms,
        "passed": all(t["passed"] for t in terms),
    }
    (out / "expand" / "manifest.json").write_text(io.json_text(manifest))
    return manifest


def cmd_solve(cfg: RunConfig, out: Path, jobs: int = 1) -> list[EpsResult]:
    """Solve at every eps, dump the discrete and composite fields and a summary."""
    results = run_epsilons(cfg, jobs, keep_fields=True)
    sdir = out / "solve"
    sdir.mkdir(parents=True, exist_ok=True)
    summary = []
    for r in results:
        tag = io.fmt17(r.eps)
        files = {}
        for name, arr in r.fields.items():
            fname = f"eps{tag}.{name}.vvlb"
            files[name] = io.write_field(sdir / fname, arr, r.eps, name)
        summary.append({"eps": r.eps, "converged": r.converged, "newton_iterations": r.newton_iterations,
                        "err_leading": r.err_leading, "v_max": r.v_max, "err_composite": r.err_composite,
                        "residual_l2": r.residual_l2, "error": r.error, "files": files})
    (sdir / "summary.json").write_text(io.json_text({"schema": "vvlab.solve/1", "config_hash": cfg.hash,
                                                     "order": str(cfg.order), "runs": summary}))
    return results


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int = 1, dat: bool = False,
              h: ExpansionHierarchy | None = None) -> ConvergenceTable:
    table = ConvergenceTable.from_results(cfg, run_epsilons(cfg, jobs, h=h))
    sdir = out / "sweep"
    sdir.mkdir(parents=True, exist_ok=True)
    (sdir / "convergence.csv").write_text(table.csv(), newline="")
    (sdir / "convergence.json").write_text(io.json_text(table.manifest()))
    (sdir / "timings.csv").write_text(table.timings_csv(), newline="")
    if dat:
        (sdir / "convergence.dat").write_text(table.dat())
    return table


def cmd_verify(cfg: RunConfig, out: Path, inject: Sequence[str] = ()) -> dict:
    report = run_verify(cfg, frozenset(inject))
    vdir = out / "verify"
    vdir.mkdir(parents=True, exist_ok=True)
    (vdir / "report.json").write_text(io.json_text(report))
    return report


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _eps_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from exc
    return tuple(sorted(vals, reverse=True))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vvlab", description="Boundary-layer expansions and steady "
                                "Navier-Stokes solves for sheared flow in a periodic channel.")
    p.add_argument("command", choices=("expand", "solve", "sweep", "verify"))
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-eps runs")
    p.add_argument("--out", help="output directory (overrides [output] directory)")
    p.add_argument("--order", help="truncation order, e.g. 0, 1, 5/3, 2")
    p.add_argument("--epsilon", type=_eps_list, help="comma-separated eps list")
    p.add_argument("--dat", action="store_true", help="also write a gnuplot-ready .dat table")
    p.add_argument("--inject", action="append", default=[], help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            order=args.order, epsilons=args.epsilon, out_dir=args.out)
    except (ConfigError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "expand":
        try:
            manifest = cmd_expand(cfg, out)
        except Exception as exc:
            print(f"expansion failed: {exc}", file=sys.stderr)
            return 1
        bad = [t["label"] for t in manifest["terms"] if not t["passed"]]
        print(f"{len(manifest['terms'])} terms, A = {manifest['A']:.12g}, trivial = {manifest['trivial']}")
        for label in bad:
            print(f"FAIL {label}")
        return 0 if not bad else 1
    if args.command == "solve":
        results = cmd_solve(cfg, out, args.jobs)
        for r in results:
            state = "ok" if r.converged else f"FAILED {r.error}"
            print(f"eps={r.eps:g}: {state}  |u-Ay-u_p0|={r.err_leading:.3e}  |u-u^a|={r.err_composite:.3e}")
        return 0 if all(r.converged for r in results) else 1
    if args.command == "sweep":
        table = cmd_sweep(cfg, out, args.jobs, args.dat)
        print(table.csv(), end="")
        for col, fit in table.slopes.items():
            print(f"slope[{col}] = " + ("n/a" if fit is None else f"{fit.slope:.4f} (R^2 {fit.r2:.4f})"))
        return 0 if table.passed else 1
    report = cmd_verify(cfg, out, args.inject)
    for s in report["suites"]:
        print(f"{'PASS' if s['passed'] else 'FAIL'} {s['name']}")
        for c in s["checks"]:
            if not c["passed"]:
                print(f"    {c['name']}: {c['value']:.3e} > {c['tolerance']:.1e}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
