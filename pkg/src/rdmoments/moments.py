"""Multi-index algebra, polynomials, moment sequences and matrix templates.

Variables are the time coordinate ``t`` and the real spectral coordinates
``u0, u1, v1, ..., uK, vK`` of a truncated Fourier state (``u_k = Re c_k``,
``v_k = Im c_k``).  Spatial coordinates are numbered ``0 -> u0``,
``2k-1 -> uk``, ``2k -> vk``; the Fourier mode of coordinate ``j`` is
``(j + 1) // 2``.

A multi-index carries a time exponent and a sparse map of spatial exponents.
Its algebraic degree is the total exponent sum; its harmonic degree is the
largest Fourier mode among coordinates with a nonzero exponent.  The
canonical monomial order is graded lexicographic with
``t > u0 > u1 > v1 > ... > uK > vK``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "MultiIndex",
    "Polynomial",
    "MomentSequence",
    "MatrixTemplate",
    "coord_name",
    "coord_mode",
    "n_coords",
    "enumerate_monomials",
    "riesz",
    "moment_matrix",
    "localizing_matrix",
    "evaluate_template",
    "gaussian_central_moment",
    "gaussian_moment",
]

_TIME = -1  # internal variable id for t in enumeration


def n_coords(K: int) -> int:
    """Number of real spatial coordinates for mode cutoff K."""
    return 1 + 2 * K


def coord_mode(j: int) -> int:
    """Fourier mode of spatial coordinate j (0 for u0)."""
    return (j + 1) // 2


def coord_name(j: int) -> str:
    if j == 0:
        return "u0"
    k = (j + 1) // 2
    return f"u{k}" if j % 2 == 1 else f"v{k}"


def coord_id(name: str) -> int:
    kind, k = name[0], int(name[1:])
    if k == 0:
        if kind != "u":
            raise ValueError(f"unknown coordinate {name!r}")
        return 0
    return 2 * k - 1 if kind == "u" else 2 * k


@dataclass(frozen=True)
class MultiIndex:
    """Exponent vector over (t, u0, u1, v1, ...); spatial part is sparse."""

    a0: int = 0
    spatial: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.a0 < 0 or any(e <= 0 or c < 0 for c, e in self.spatial):
            raise ValueError(f"invalid multi-index {self}")
        if list(self.spatial) != sorted(self.spatial):
            object.__setattr__(self, "spatial", tuple(sorted(self.spatial)))

    @staticmethod
    def from_dict(a0: int = 0, spatial: dict[int, int] | None = None) -> "MultiIndex":
        items = tuple(sorted((c, e) for c, e in (spatial or {}).items() if e != 0))
        return MultiIndex(a0, items)

    @property
    def degree(self) -> int:
        return self.a0 + sum(e for _, e in self.spatial)

    @property
    def harmonic(self) -> int:
        return max((coord_mode(c) for c, _ in self.spatial), default=0)

    @property
    def is_zero(self) -> bool:
        return self.a0 == 0 and not self.spatial

    def sort_key(self):
        # graded lex, t most significant, earlier coordinate more significant
        return (self.degree, -self.a0, tuple((c, -e) for c, e in self.spatial))

    def mul(self, other: "MultiIndex") -> "MultiIndex":
        exps: dict[int, int] = dict(self.spatial)
        for c, e in other.spatial:
            exps[c] = exps.get(c, 0) + e
        return MultiIndex.from_dict(self.a0 + other.a0, exps)

    def drop_time(self) -> "MultiIndex":
        return MultiIndex(0, self.spatial)

    def spatial_value(self, x: np.ndarray) -> float:
        out = 1.0
        for c, e in self.spatial:
            out *= x[c] ** e
        return out

    def value(self, t: float, x: np.ndarray) -> float:
        return t**self.a0 * self.spatial_value(x)

    def spatial_str(self) -> str:
        if not self.spatial:
            return "1"
        return "*".join(
            coord_name(c) + (f"^{e}" if e > 1 else "") for c, e in self.spatial
        )

    def __str__(self) -> str:
        if self.is_zero:
            return "1"
        t = "" if self.a0 == 0 else ("t" if self.a0 == 1 else f"t^{self.a0}")
        s = self.spatial_str() if self.spatial else ""
        return "*".join(p for p in (t, s) if p and p != "1") or t or s

    @staticmethod
    def parse_spatial(text: str) -> tuple[tuple[int, int], ...]:
        text = text.strip()
        if text in ("", "1"):
            return ()
        exps: dict[int, int] = {}
        for factor in text.split("*"):
            name, _, e = factor.partition("^")
            c = coord_id(name)
            exps[c] = exps.get(c, 0) + (int(e) if e else 1)
        return tuple(sorted(exps.items()))


ZERO_INDEX = MultiIndex()


class Polynomial:
    """Sparse real polynomial: map MultiIndex -> coefficient, no stored zeros."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: dict[MultiIndex, float] | None = None):
        self.coeffs = {a: float(c) for a, c in (coeffs or {}).items() if c != 0.0}

    @staticmethod
    def monomial(a: MultiIndex, c: float = 1.0) -> "Polynomial":
        return Polynomial({a: c})

    @staticmethod
    def constant(c: float) -> "Polynomial":
        return Polynomial({ZERO_INDEX: c})

    def add_term(self, a: MultiIndex, c: float) -> None:
        v = self.coeffs.get(a, 0.0) + c
        if v == 0.0:
            self.coeffs.pop(a, None)
        else:
            self.coeffs[a] = v

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = Polynomial(self.coeffs)
        for a, c in other.coeffs.items():
            out.add_term(a, c)
        return out

    def scale(self, s: float) -> "Polynomial":
        return Polynomial({a: s * c for a, c in self.coeffs.items()})

    def mul_monomial(self, a: MultiIndex, s: float = 1.0) -> "Polynomial":
        return Polynomial({b.mul(a): s * c for b, c in self.coeffs.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out = Polynomial()
        for a, ca in self.coeffs.items():
            for b, cb in other.coeffs.items():
                out.add_term(a.mul(b), ca * cb)
        return out

    @property
    def degree(self) -> int:
        return max((a.degree for a in self.coeffs), default=0)

    def evaluate(self, t: float, x: np.ndarray) -> float:
        return sum(c * a.value(t, x) for a, c in self.coeffs.items())

    def items_sorted(self):
        return sorted(self.coeffs.items(), key=lambda kv: kv[0].sort_key())

    def __repr__(self) -> str:
        terms = " + ".join(f"{c:g}*{a}" for a, c in self.items_sorted())
        return terms or "0"


def enumerate_monomials(
    K: int,
    degree: int,
    harmonic: int,
    include_time: bool = True,
    include_spatial: bool = True,
) -> list[MultiIndex]:
    """All multi-indices with algebraic degree <= degree and harmonic degree
    <= harmonic over the coordinates of cutoff K (plus t when requested), in
    canonical graded-lex order.

    The count is C(n + degree, degree) with n = (1 if time) + 1 + 2*min(K, harmonic).
    """
    if degree < 0 or harmonic < 0:
        raise ValueError("degree and harmonic caps must be nonnegative")
    admissible = (
        [j for j in range(n_coords(K)) if coord_mode(j) <= harmonic]
        if include_spatial
        else []
    )
    variables = ([_TIME] if include_time else []) + admissible
    out: list[MultiIndex] = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(variables, d):
            a0 = sum(1 for v in combo if v == _TIME)
            exps: dict[int, int] = {}
            for v in combo:
                if v != _TIME:
                    exps[v] = exps.get(v, 0) + 1
            out.append(MultiIndex.from_dict(a0, exps))
    return out


class CapError(KeyError):
    """A multi-index violates the caps of a moment sequence."""


@dataclass
class MomentSequence:
    """Map MultiIndex -> real moment with enforced truncation caps."""

    max_degree: int
    max_harmonic: int
    K: int
    data: dict[MultiIndex, float] = field(default_factory=dict)

    def check(self, a: MultiIndex) -> MultiIndex:
        if a.degree > self.max_degree or a.harmonic > self.max_harmonic:
            raise CapError(f"index {a} outside caps (degree {self.max_degree}, harmonic {self.max_harmonic})")
        return a

    def set(self, a: MultiIndex, v: float) -> None:
        self.data[self.check(a)] = float(v)

    def get(self, a: MultiIndex) -> float:
        self.check(a)
        try:
            return self.data[a]
        except KeyError:
            raise CapError(f"moment {a} not present in sequence") from None

    def __contains__(self, a: MultiIndex) -> bool:
        return a in self.data

    def indices(self) -> list[MultiIndex]:
        return sorted(self.data, key=lambda a: a.sort_key())

    def mass(self) -> float:
        return self.get(ZERO_INDEX)

    # ---- serialization (CSV and JSON, lossless via repr round-trip) ----

    def to_rows(self) -> list[tuple[int, str, str]]:
        return [(a.a0, a.spatial_str(), repr(self.data[a])) for a in self.indices()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a0", "spatial", "value"])
        w.writerows(self.to_rows())
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, max_degree: int, max_harmonic: int, K: int) -> "MomentSequence":
        seq = MomentSequence(max_degree, max_harmonic, K)
        rows = list(csv.reader(io.StringIO(text)))
        for a0, spatial, value in rows[1:]:
            seq.set(MultiIndex(int(a0), MultiIndex.parse_spatial(spatial)), float(value))
        return seq

    def to_json_obj(self) -> dict:
        return {
            "caps": {"degree": self.max_degree, "harmonic": self.max_harmonic, "K": self.K},
            "entries": [{"a0": a0, "x": s, "v": float(v)} for a0, s, v in self.to_rows()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1, sort_keys=True)

    @staticmethod
    def from_json_obj(obj: dict) -> "MomentSequence":
        caps = obj["caps"]
        seq = MomentSequence(caps["degree"], caps["harmonic"], caps["K"])
        for ent in obj["entries"]:
            seq.set(MultiIndex(ent["a0"], MultiIndex.parse_spatial(ent["x"])), ent["v"])
        return seq

    @staticmethod
    def from_json(text: str) -> "MomentSequence":
        return MomentSequence.from_json_obj(json.loads(text))

    @staticmethod
    def dirac(t: float | None, x: np.ndarray, max_degree: int, max_harmonic: int, K: int) -> "MomentSequence":
        """Moments of a Dirac at (t, x); t=None for a spatial-only measure."""
        seq = MomentSequence(max_degree, max_harmonic, K)
        for a in enumerate_monomials(K, max_degree, max_harmonic, include_time=t is not None):
            seq.set(a, a.value(t if t is not None else 1.0, x))
        return seq


def riesz(p: Polynomial, m: MomentSequence) -> float:
    """Riesz functional: sum of p_a * m_a over the support of p."""
    return sum(c * m.get(a) for a, c in p.coeffs.items())


@dataclass
class MatrixTemplate:
    """Symmetric matrix whose entries are linear combinations of moments.

    Entries are stored for i <= j only; entry (i, j) is a list of
    (MultiIndex, coefficient) pairs.
    """

    basis: list[MultiIndex]
    entries: dict[tuple[int, int], list[tuple[MultiIndex, float]]]
    label: str = ""

    @property
    def size(self) -> int:
        return len(self.basis)

    def referenced_indices(self) -> set[MultiIndex]:
        out: set[MultiIndex] = set()
        for terms in self.entries.values():
            out.update(a for a, _ in terms)
        return out


def moment_matrix(
    K: int, s: int, harmonic: int, include_time: bool = True, include_spatial: bool = True
) -> MatrixTemplate:
    """Moment matrix template of order s: entry (alpha, beta) = m_{alpha+beta}."""
    basis = enumerate_monomials(K, s, harmonic, include_time, include_spatial)
    entries = {}
    for i, a in enumerate(basis):
        for j in range(i, len(basis)):
            entries[(i, j)] = [(a.mul(basis[j]), 1.0)]
    return MatrixTemplate(basis, entries, label=f"moment(s={s})")


def localizing_matrix(
    g: Polynomial,
    K: int,
    s: int,
    harmonic: int,
    include_time: bool = True,
    include_spatial: bool = True,
    label: str = "",
) -> MatrixTemplate:
    """Localizing matrix template: entry (alpha, beta) = sum_c g_c m_{alpha+beta+c}."""
    basis = enumerate_monomials(K, s, harmonic, include_time, include_spatial)
    entries = {}
    for i, a in enumerate(basis):
        for j in range(i, len(basis)):
            ab = a.mul(basis[j])
            acc: dict[MultiIndex, float] = {}
            for c, gc in g.coeffs.items():
                key = ab.mul(c)
                acc[key] = acc.get(key, 0.0) + gc
            entries[(i, j)] = sorted(acc.items(), key=lambda kv: kv[0].sort_key())
    return MatrixTemplate(basis, entries, label=label or f"localizing(s={s})")


def evaluate_template(T: MatrixTemplate, m: MomentSequence) -> np.ndarray:
    """Fill a template with values from a moment sequence (exactly symmetric)."""
    n = T.size
    M = np.zeros((n, n))
    for (i, j), terms in T.entries.items():
        v = sum(c * m.get(a) for a, c in terms)
        M[i, j] = v
        M[j, i] = v
    return M


def gaussian_central_moment(p: int, sigma: float) -> float:
    """E[Z^p] for Z ~ N(0, sigma^2): sigma^p (p-1)!! for even p, 0 for odd."""
    if p % 2 == 1:
        return 0.0
    return sigma**p * math.prod(range(p - 1, 0, -2)) if p > 0 else 1.0


def gaussian_moment(p: int, mean: float, sigma: float) -> float:
    """E[X^p] for X ~ N(mean, sigma^2) via the binomial expansion."""
    return sum(
        math.comb(p, m) * mean ** (p - m) * gaussian_central_moment(m, sigma)
        for m in range(p + 1)
    )
