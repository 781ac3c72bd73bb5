"""Run configuration: one JSON document drives every pipeline command.

Schema (all keys optional, defaults below):

    problem: eps, K, r, h, radius (null = automatic), measure
      measure: {"kind": "gaussian", "sigma2": .., "mean": ..}
             | {"kind": "dirac", "expr": "0.5 + 0.1*cos(2*pi*x)"} or {"values": [..]}
             | {"kind": "ensemble", "values": [[..], ..], "weights": [..]}
    oracle: N, dt, n_samples, seed, quadrature
    solver: backend, max_iter, eps_abs, eps_rel, rho, polish
    compare: rel_tol, floor
    io: out_dir
"""

from __future__ import annotations

import copy
import json
import os
import tempfile
from dataclasses import dataclass
from typing import Any

import numpy as np

from .liouville import DiracAtFunction, Ensemble, GaussianProduct, InitialMeasureSpec
from .relaxation import RelaxationOptions
from .solver import SolverOptions
from .spectral import GridFunction

__all__ = ["RunConfig", "ConfigError", "DEFAULTS", "atomic_write"]


class ConfigError(ValueError):
    """Invalid run configuration."""


DEFAULTS: dict[str, Any] = {
    "problem": {
        "eps": 0.1,
        "K": 2,
        "r": 4,
        "h": None,  # defaults to K
        "radius": None,  # automatic from the measure
        "measure": {"kind": "gaussian", "sigma2": 0.1, "mean": 0.0},
    },
    "oracle": {
        "N": 128,
        "dt": 1e-3,
        "n_samples": 10000,
        "seed": 0,
        "quadrature": "trapezoid",
    },
    "solver": {
        "backend": "admm",
        "max_iter": 50000,
        "eps_abs": 1e-8,
        "eps_rel": 1e-8,
        "rho": 1.0,
        "polish": True,
    },
    "compare": {"rel_tol": 1e-3, "floor": 1e-9},
    "io": {"out_dir": "runs/default"},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _grid_from_expr(expr: str, N: int) -> GridFunction:
    x = np.arange(N) / N
    allowed = {
        "x": x,
        "pi": np.pi,
        "cos": np.cos,
        "sin": np.sin,
        "exp": np.exp,
        "abs": np.abs,
    }
    try:
        vals = eval(expr, {"__builtins__": {}}, allowed)  # noqa: S307 - restricted names
    except Exception as exc:
        raise ConfigError(f"cannot evaluate dirac expression {expr!r}: {exc}") from exc
    return GridFunction(np.broadcast_to(np.asarray(vals, dtype=float), (N,)).copy())


@dataclass
class RunConfig:
    raw: dict

    @staticmethod
    def load(path: str | None = None, overrides: dict | None = None) -> "RunConfig":
        doc = DEFAULTS
        if path is not None:
            with open(path) as fh:
                doc = _merge(doc, json.load(fh))
        if overrides:
            doc = _merge(doc, overrides)
        cfg = RunConfig(doc)
        cfg.validate()
        return cfg

    # ---- validated accessors ----

    def validate(self) -> None:
        p, o, s = self.raw["problem"], self.raw["oracle"], self.raw["solver"]
        if p["eps"] < 0:
            raise ConfigError("problem.eps must be >= 0")
        if not isinstance(p["K"], int) or p["K"] < 0:
            raise ConfigError("problem.K must be a nonnegative integer")
        if not isinstance(p["r"], int) or p["r"] < 2:
            raise ConfigError("problem.r must be an integer >= 2")
        h = p["h"] if p["h"] is not None else p["K"]
        if not isinstance(h, int) or h < 0 or h > p["K"]:
            raise ConfigError("problem.h must be an integer in [0, K]")
        if p["radius"] is not None and p["radius"] <= 0:
            raise ConfigError("problem.radius must be positive")
        if o["N"] < 2 * p["K"] + 1:
            raise ConfigError("oracle.N must be >= 2K+1")
        if o["dt"] <= 0 or o["dt"] > 0.5:
            raise ConfigError("oracle.dt must be in (0, 0.5]")
        if o["n_samples"] < 1:
            raise ConfigError("oracle.n_samples must be >= 1")
        if s["max_iter"] < 1:
            raise ConfigError("solver.max_iter must be >= 1")
        if s["backend"] != "admm":
            raise ConfigError(f"unknown solver backend {s['backend']!r}")
        self.measure()  # validates the measure block

    @property
    def eps(self) -> float:
        return float(self.raw["problem"]["eps"])

    @property
    def K(self) -> int:
        return self.raw["problem"]["K"]

    @property
    def r(self) -> int:
        return self.raw["problem"]["r"]

    @property
    def h(self) -> int:
        h = self.raw["problem"]["h"]
        return self.K if h is None else h

    @property
    def radius(self) -> float | None:
        return self.raw["problem"]["radius"]

    @property
    def seed(self) -> int:
        return int(self.raw["oracle"]["seed"])

    @property
    def out_dir(self) -> str:
        return self.raw["io"]["out_dir"]

    def measure(self) -> InitialMeasureSpec:
        m = self.raw["problem"]["measure"]
        kind = m.get("kind")
        N = self.raw["oracle"]["N"]
        if kind == "gaussian":
            sigma2 = m.get("sigma2", 0.1)
            if np.any(np.asarray(sigma2) < 0):
                raise ConfigError("gaussian sigma2 must be >= 0")
            return GaussianProduct(sigma2, m.get("mean", 0.0))
        if kind == "dirac":
            if "values" in m:
                return DiracAtFunction(GridFunction(np.asarray(m["values"], dtype=float)))
            return DiracAtFunction(_grid_from_expr(m.get("expr", "0.5"), N))
        if kind == "ensemble":
            members = tuple(GridFunction(np.asarray(v, dtype=float)) for v in m["values"])
            weights = tuple(m["weights"]) if "weights" in m else None
            return Ensemble(members, weights)
        raise ConfigError(f"unknown measure kind {kind!r}")

    def solver_options(self) -> SolverOptions:
        s = self.raw["solver"]
        return SolverOptions(
            rho=float(s["rho"]),
            max_iter=int(s["max_iter"]),
            eps_abs=float(s["eps_abs"]),
            eps_rel=float(s["eps_rel"]),
        )

    def relaxation_options(self) -> RelaxationOptions:
        s = self.raw["solver"]
        return RelaxationOptions(
            polish=bool(s["polish"]),
            backend=s["backend"],
            solver=self.solver_options(),
        )

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=1, sort_keys=True)


def atomic_write(path: str, data: str | bytes) -> None:
    """Write via temp file + rename so partial outputs never land."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
