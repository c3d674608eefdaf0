"""Flat ``section.key = value`` experiment configuration.

Grammar, one entry per line::

    # comment
    grid.n = 2049
    m.kind = "quadratic"
    m.coeffs = [0, 0, 0.5, 0, 0.25]

Values are JSON literals (numbers, strings in double quotes, lists, ``null``,
``true``/``false``). Unknown keys are rejected.
"""

import json

import numpy as np

from .grid import Grid1D, default_grid
from .model import SelectionError, SelectionSpec, TruncationSpec

__all__ = ["ConfigError", "DEFAULTS", "parse_config", "load_config", "ExperimentConfig"]


class ConfigError(ValueError):
    pass


_NUM = (int, float)
_LIST = (list,)

# key -> (default, accepted types, nullable)
DEFAULTS = {
    "grid.L": (None, _NUM, True),
    "grid.n": (2049, (int,), False),
    "m.kind": ("quadratic", (str,), False),
    "m.beta": (1.0, _NUM, True),
    "m.coeffs": (None, _LIST, True),
    "m.table": (None, (str,), True),
    "initial.mode": ("sine", (str,), False),
    "initial.epsilon": (0.2, _NUM, False),
    "run.generations": (12, (int,), False),
    "run.tol": (1e-10, _NUM, False),
    "run.max_iter": (400, (int,), False),
    "run.slack": (1e-3, _NUM, False),
    "run.noise_floor": (1e-6, _NUM, False),
    "transport.quantization": (32, (int,), False),
    "transport.x_pairs": ([[0.0, 1.0], [-2.0, 2.0]], _LIST, False),
    "truncation.R": (None, _NUM, True),
    "duality.pairs": (200, (int,), False),
    "duality.max_points": (6, (int,), False),
    "duality.epsilon": (0.1, _NUM, False),
    "lowerbound.potentials": ([[0, 0, 0.5], [0, 0, 0.5, 0, 0.25]], _LIST, False),
    "lowerbound.gamma": (1.0, _NUM, False),
    "lowerbound.deltas": ([0.25, 0.5, 0.75, 1.0], _LIST, False),
    "lowerbound.x0_factors": ([1.05, 1.25, 1.5, 1.75, 2.0], _LIST, False),
    "lowerbound.R": (6.0, _NUM, True),
    "lowerbound.upper_limit": ("proof", (str,), False),
    "figures.beta_max": (3.0, _NUM, False),
    "figures.alpha_max": (5.0, _NUM, False),
    "output.dir": ("out", (str,), False),
    "seed": (0, (int,), False),
}


def _check_type(key, value):
    _, types, nullable = DEFAULTS[key]
    if value is None:
        if not nullable:
            raise ConfigError(f"{key}: null is not allowed")
        return
    if isinstance(value, bool) or not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"{key}: expected {names}, got {value!r}")


def parse_config(text):
    """Parse config text into a dict of explicitly set keys."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: {key}: cannot parse value {value!r} ({exc.msg})") from None
        _check_type(key, parsed)
        out[key] = parsed
    return out


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        with open(path) as fh:
            values = parse_config(fh.read())
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        _check_type(key, value)
        values[key] = value
    return ExperimentConfig(values)


class ExperimentConfig:
    """Typed view of a parsed config; missing keys fall back to defaults."""

    def __init__(self, values):
        self.values = {k: v for k, (v, _, _) in DEFAULTS.items()}
        self.values.update(values)
        self.explicit = frozenset(values)

    def __getitem__(self, key):
        return self.values[key]

    def grid(self, alpha_expected=1.0):
        L = self["grid.L"]
        if L is None:
            return default_grid(alpha_expected, self["grid.n"])
        return Grid1D.symmetric(L, self["grid.n"])

    def selection(self, grid):
        """Build and certify the selection function on ``grid``."""
        kind = self["m.kind"]
        # the default beta belongs to the quadratic kind; other kinds certify their own
        beta = self["m.beta"] if kind == "quadratic" or "m.beta" in self.explicit else None
        try:
            if kind == "quadratic":
                if beta is None:
                    raise ConfigError("m.beta is required for m.kind = \"quadratic\"")
                spec = SelectionSpec.quadratic(beta)
            elif kind == "even_polynomial":
                if self["m.coeffs"] is None:
                    raise ConfigError("m.coeffs is required for m.kind = \"even_polynomial\"")
                spec = SelectionSpec.even_polynomial(self["m.coeffs"], beta=beta, grid=grid)
            elif kind == "tabulated":
                if self["m.table"] is None:
                    raise ConfigError("m.table is required for m.kind = \"tabulated\"")
                tab = np.loadtxt(self["m.table"], delimiter=",", skiprows=1, ndmin=2)
                spec = SelectionSpec.tabulated(tab[:, 0], tab[:, 1], beta=beta)
            else:
                raise ConfigError(f"m.kind: unknown selection kind {kind!r}")
            spec.certify(grid)
        except SelectionError as exc:
            raise ConfigError(f"selection rejected: {exc}") from None
        return spec

    def truncation(self):
        R = self["truncation.R"]
        return None if R is None else TruncationSpec(R)
