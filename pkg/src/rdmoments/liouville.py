"""Linear moment equations of the weak transport identity, with truncation
bookkeeping, plus initial-measure moments.

For a monomial test function phi_a(t, x) = t^a0 * x^a the transport identity
of the flow reads

    occ_expr(m^{0,1})  =  m^1_{a|t=1}  -  m^0_a

where occ_expr collects the time-derivative term a0 * m_{(a0-1, a)} and the
drift terms sum_j a_j * (t^a0 x^{a-e_j} * P_j)(m), P_j the drift polynomials.
Constraints store occ_expr with positive signs; the residual of a pair of
occupation/terminal sequences is  m^1 - m^0 - occ_expr, which vanishes on
exact push-forward moments up to truncation.  Product terms falling outside
the occupation caps are dropped and tallied (count and absolute coefficient
mass) -- that tail is exactly what the per-constraint slack absorbs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .moments import (
    MomentSequence,
    MultiIndex,
    Polynomial,
    enumerate_monomials,
    gaussian_moment,
    n_coords,
)
from .spectral import GridFunction, dft, to_real

__all__ = [
    "InitialMeasureSpec",
    "DiracAtFunction",
    "GaussianProduct",
    "Ensemble",
    "LiouvilleConstraint",
    "test_indices",
    "assemble_constraint",
    "assemble_system",
    "initial_moments",
    "residual",
    "constraints_manifest",
]


# ---------------------------------------------------------------------------
# initial measure specifications


@dataclass(frozen=True)
class DiracAtFunction:
    """Dirac at the truncated spectral state of a grid function."""

    y0: GridFunction

    def coords(self, K: int) -> np.ndarray:
        return to_real(dft(self.y0, K))


@dataclass(frozen=True)
class GaussianProduct:
    """Independent Gaussian on every retained real coordinate.

    Scalars broadcast to all coordinates; sigma=0 coordinates are exact
    Dirac factors.
    """

    sigma2: float | np.ndarray = 0.1
    mean: float | np.ndarray = 0.0

    def params(self, K: int) -> tuple[np.ndarray, np.ndarray]:
        n = n_coords(K)
        s2 = np.broadcast_to(np.asarray(self.sigma2, dtype=float), (n,))
        mu = np.broadcast_to(np.asarray(self.mean, dtype=float), (n,))
        if np.any(s2 < 0):
            raise ValueError("Gaussian variances must be nonnegative")
        return s2, mu


@dataclass(frozen=True)
class Ensemble:
    """Weighted mixture of Diracs at grid functions."""

    members: tuple[GridFunction, ...]
    weights: tuple[float, ...] | None = None

    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            w = np.full(len(self.members), 1.0 / len(self.members))
        else:
            w = np.asarray(self.weights, dtype=float)
        if w.size != len(self.members) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        return w


InitialMeasureSpec = DiracAtFunction | GaussianProduct | Ensemble


# ---------------------------------------------------------------------------
# constraints


@dataclass
class LiouvilleConstraint:
    """One linear moment equation with truncation-slack bookkeeping."""

    test_index: MultiIndex
    occ_coeffs: dict[MultiIndex, float]
    terminal_index: MultiIndex
    terminal_coeff: float
    rhs: float
    initial_index: MultiIndex | None  # non-None iff a0 == 0
    truncated_count: int
    truncated_mass: float
    slack_id: int = -1


def test_indices(r: int, h: int, K: int) -> list[MultiIndex]:
    """All test indices over (t, x) with algebraic degree <= r and harmonic
    degree <= h, excluding the zero index (the mass identity is emitted
    separately as a stabilizer)."""
    if r < 1:
        raise ValueError("relaxation order must be >= 1")
    return [a for a in enumerate_monomials(K, r, h) if not a.is_zero]


def assemble_constraint(
    a: MultiIndex,
    drift_polys: list[Polynomial],
    degree_cap: int,
    harmonic_cap: int,
) -> LiouvilleConstraint:
    """Build the moment equation for test index a.

    Occupation caps: every product term with algebraic degree > degree_cap or
    harmonic degree > harmonic_cap is dropped and tallied.
    """
    occ = Polynomial()
    if a.a0 > 0:
        occ.add_term(MultiIndex(a.a0 - 1, a.spatial), float(a.a0))
    dropped_n, dropped_mass = 0, 0.0
    for c, e in a.spatial:
        # d/dx_c of the test monomial, times the drift component P_c
        base = MultiIndex.from_dict(
            a.a0, {cc: (ee - 1 if cc == c else ee) for cc, ee in a.spatial}
        )
        for b, coef in drift_polys[c].coeffs.items():
            idx = base.mul(b)
            w = e * coef
            if idx.degree > degree_cap or idx.harmonic > harmonic_cap:
                dropped_n += 1
                dropped_mass += abs(w)
            else:
                occ.add_term(idx, w)
    return LiouvilleConstraint(
        test_index=a,
        occ_coeffs=dict(occ.coeffs),
        terminal_index=a.drop_time(),
        terminal_coeff=1.0,
        rhs=0.0,
        initial_index=a if a.a0 == 0 else None,
        truncated_count=dropped_n,
        truncated_mass=dropped_mass,
    )


def assemble_system(
    r: int,
    h: int,
    K: int,
    drift_polys: list[Polynomial],
    initial: MomentSequence | None = None,
) -> list[LiouvilleConstraint]:
    """Constraints for all test indices at order r, slack ids in canonical
    order; rhs bound from the initial moments when provided."""
    constraints = []
    for i, a in enumerate(test_indices(r, h, K)):
        c = assemble_constraint(a, drift_polys, degree_cap=r + 1, harmonic_cap=h)
        c.slack_id = i
        if initial is not None and c.initial_index is not None:
            c.rhs = initial.get(c.initial_index)
        constraints.append(c)
    return constraints


def initial_moments(
    spec: InitialMeasureSpec, indices: list[MultiIndex], K: int
) -> MomentSequence:
    """Moments of the initial measure at the given spatial indices.

    Indices with a time exponent get the 0^a0 factor, i.e. value 0.
    """
    deg = max((a.degree for a in indices), default=0)
    har = max((a.harmonic for a in indices), default=0)
    seq = MomentSequence(deg, har, K)

    if isinstance(spec, DiracAtFunction):
        x0 = spec.coords(K)
        for a in indices:
            seq.set(a, 0.0 if a.a0 > 0 else a.spatial_value(x0))
    elif isinstance(spec, GaussianProduct):
        s2, mu = spec.params(K)
        sigma = np.sqrt(s2)
        for a in indices:
            if a.a0 > 0:
                seq.set(a, 0.0)
                continue
            v = 1.0
            for c, e in a.spatial:
                v *= gaussian_moment(e, mu[c], sigma[c])
            seq.set(a, v)
    elif isinstance(spec, Ensemble):
        w = spec.normalized_weights()
        xs = [to_real(dft(m, K)) for m in spec.members]
        for a in indices:
            if a.a0 > 0:
                seq.set(a, 0.0)
            else:
                seq.set(a, float(sum(wi * a.spatial_value(x) for wi, x in zip(w, xs))))
    else:
        raise TypeError(f"unknown initial measure spec {type(spec)!r}")
    return seq


def residual(
    c: LiouvilleConstraint, occ: MomentSequence, term: MomentSequence
) -> float:
    """Residual m^1_a - m^0_a - occ_expr(occ); zero on exact push-forward
    moments whose drift terms are fully retained."""
    occ_val = sum(coef * occ.get(a) for a, coef in c.occ_coeffs.items())
    return c.terminal_coeff * term.get(c.terminal_index) - c.rhs - occ_val


def constraints_manifest(
    constraints: list[LiouvilleConstraint], r: int, h: int, K: int
) -> dict:
    """JSON-ready dump of the assembled system (diffable, deterministic)."""
    items = []
    for c in constraints:
        items.append(
            {
                "test": str(c.test_index),
                "slack": c.slack_id,
                "occ": [
                    [str(a), coef]
                    for a, coef in sorted(
                        c.occ_coeffs.items(), key=lambda kv: kv[0].sort_key()
                    )
                ],
                "terminal": [str(c.terminal_index), c.terminal_coeff],
                "rhs": c.rhs,
                "truncated": [c.truncated_count, c.truncated_mass],
            }
        )
    return {
        "caps": {"r": r, "h": h, "K": K, "occ_degree": r + 1},
        "count": len(constraints),
        "constraints": items,
    }
