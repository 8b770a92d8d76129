"""Run configuration: INI files with typed sections.

See ``docs/config.md`` for the schema.  Every section is optional; missing
keys take the defaults of :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .hierarchy import lattice
from .problem import Discretisation, ProblemSpec


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs.  Instances are immutable and hashable by content."""

    alpha: float = 1.0
    delta: float = 0.1
    f_modes: tuple[tuple[int, float, float], ...] = ((1, 1.0, 0.0),)
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05)
    order: Fraction = Fraction(1)
    n_x: int = 32
    n_y: int = 512
    n_psi: int = 2200
    n_zeta: int = 2000
    n_eta: int = 2000
    zeta_min: float = -40.0
    eta_max: float = 40.0
    y_grading: float = 0.0
    newton_tol: float = 1e-10
    max_newton: int = 30
    gmres_rtol: float = 1e-12
    out_dir: str = "vvlab-out"
    seed: int = 20240601
    samples: int = 100
    verify_deltas: tuple[float, ...] = (0.05, 0.1, 0.2)
    kappas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.9)

    def problems(self) -> list[str]:
        """Every invariant violation, as human-readable messages naming the field."""
        out = []
        for name in ("n_x", "n_y", "n_psi", "n_zeta", "n_eta"):
            if getattr(self, name) < 8:
                out.append(f"grid.{name} must be at least 8 (got {getattr(self, name)})")
        if self.n_x % 2:
            out.append(f"grid.n_x must be even (got {self.n_x})")
        if self.alpha <= 0:
            out.append(f"problem.alpha must be positive (got {self.alpha})")
        if self.delta < 0:
            out.append(f"problem.delta must be non-negative (got {self.delta})")
        for e in self.epsilons:
            if not 0 < e < 1:
                out.append(f"sweep.epsilon value {e} is outside (0, 1)")
        if list(self.epsilons) != sorted(self.epsilons, reverse=True):
            out.append("sweep.epsilon must be sorted in descending order")
        if len(set(self.epsilons)) != len(self.epsilons):
            out.append("sweep.epsilon contains duplicates")
        if len({n for n, _, _ in self.f_modes}) != len(self.f_modes):
            out.append("problem.f lists a mode number more than once")
        for n, _, _ in self.f_modes:
            if n < 0 or n > self.n_x // 4:
                out.append(f"problem.f mode {n} is not band-limited to n_x/4 = {self.n_x // 4}")
        if self.order not in lattice(3):
            out.append(f"expansion.order {self.order} is not an exponent of the expansion up to 3")
        if self.zeta_min >= 0:
            out.append("grid.zeta_min must be negative")
        if self.eta_max <= 0:
            out.append("grid.eta_max must be positive")
        if not self.newton_tol > 0:
            out.append("solver.newton_tol must be positive")
        if self.max_newton < 1:
            out.append("solver.max_newton must be at least 1")
        if self.samples < 1:
            out.append("verify.samples must be at least 1")
        for k in self.kappas:
            if not 0 <= k < 1:
                out.append(f"verify.kappa value {k} is outside [0, 1)")
        for d in self.verify_deltas:
            if d < 0:
                out.append(f"verify.delta value {d} is negative")
        return out

    def validate(self) -> "RunConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    # derived objects ------------------------------------------------------
    @property
    def disc(self) -> Discretisation:
        return Discretisation(self.n_x, self.n_y, self.n_psi, self.n_zeta, self.n_eta,
                              self.zeta_min, self.eta_max, self.y_grading)

    def spec(self, delta: float | None = None) -> ProblemSpec:
        return ProblemSpec(self.alpha, self.delta if delta is None else delta, self.f_modes, self.disc)

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "order" in kw:
            kw["order"] = Fraction(kw["order"]).limit_denominator(3)
        if "epsilons" in kw:
            kw["epsilons"] = tuple(float(e) for e in kw["epsilons"])
        return replace(self, **kw).validate()

    def canonical(self) -> dict:
        """Content that determines results (output location excluded)."""
        d = asdict(self)
        d.pop("out_dir")
        d["order"] = str(self.order)
        d["f_modes"] = [list(m) for m in self.f_modes]
        for k in ("epsilons", "verify_deltas", "kappas"):
            d[k] = list(d[k])
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_DEFAULT = RunConfig()

# (section, key) -> (attribute, parser)
def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _modes(text: str) -> tuple[tuple[int, float, float], ...]:
    """``"1:1.0:0.0, 2:0:0.5"`` -> ``((1, 1.0, 0.0), (2, 0.0, 0.5))``."""
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"mode entry {item!r} is not of the form n:a:b")
        out.append((int(parts[0]), float(parts[1]), float(parts[2])))
    return tuple(out)


_SCHEMA = {
    ("problem", "alpha"): ("alpha", float),
    ("problem", "delta"): ("delta", float),
    ("problem", "f"): ("f_modes", _modes),
    ("expansion", "order"): ("order", lambda t: Fraction(t.strip()).limit_denominator(3)),
    ("sweep", "epsilon"): ("epsilons", _floats),
    ("grid", "n_x"): ("n_x", int),
    ("grid", "n_y"): ("n_y", int),
    ("grid", "n_psi"): ("n_psi", int),
    ("grid", "n_zeta"): ("n_zeta", int),
    ("grid", "n_eta"): ("n_eta", int),
    ("grid", "zeta_min"): ("zeta_min", float),
    ("grid", "eta_max"): ("eta_max", float),
    ("grid", "y_grading"): ("y_grading", float),
    ("solver", "newton_tol"): ("newton_tol", float),
    ("solver", "max_newton"): ("max_newton", int),
    ("solver", "gmres_rtol"): ("gmres_rtol", float),
    ("output", "directory"): ("out_dir", str),
    ("verify", "seed"): ("seed", int),
    ("verify", "samples"): ("samples", int),
    ("verify", "delta"): ("verify_deltas", _floats),
    ("verify", "kappa"): ("kappas", _floats),
}


def parse_config(text: str) -> RunConfig:
    """Parse INI text, fill defaults and validate."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    values, problems = {}, []
    for section in cp.sections():
        for key, raw in cp.items(section):
            spec = _SCHEMA.get((section, key))
            if spec is None:
                problems.append(f"unknown key {section}.{key}")
                continue
            attr, conv = spec
            try:
                values[attr] = conv(raw)
            except (ValueError, ZeroDivisionError) as exc:
                problems.append(f"{section}.{key}: cannot parse {raw!r} ({exc})")
    if problems:
        raise ConfigError(problems)
    return replace(_DEFAULT, **values).validate()


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {path} does not exist"])
    return parse_config(path.read_text())


def dump_config(cfg: RunConfig) -> str:
    """INI text that :func:`parse_config` maps back to ``cfg``."""
    fmt = lambda xs: ", ".join(repr(float(x)) for x in xs)
    modes = ", ".join(f"{n}:{a!r}:{b!r}" for n, a, b in cfg.f_modes)
    return "\n".join([
        "[problem]", f"alpha = {cfg.alpha!r}", f"delta = {cfg.delta!r}", f"f = {modes}", "",
        "[expansion]", f"order = {cfg.order}", "",
        "[sweep]", f"epsilon = {fmt(cfg.epsilons)}", "",
        "[grid]", *(f"{k} = {getattr(cfg, k)!r}" for k in
                    ("n_x", "n_y", "n_psi", "n_zeta", "n_eta", "zeta_min", "eta_max", "y_grading")), "",
        "[solver]", f"newton_tol = {cfg.newton_tol!r}", f"max_newton = {cfg.max_newton}",
        f"gmres_rtol = {cfg.gmres_rtol!r}", "",
        "[output]", f"directory = {cfg.out_dir}", "",
        "[verify]", f"seed = {cfg.seed}", f"samples = {cfg.samples}",
        f"delta = {fmt(cfg.verify_deltas)}", f"kappa = {fmt(cfg.kappas)}", "",
    ])
