"""Optimality certificates for candidate test channels and input policies.

A per-letter distortion ``e(cell)`` certifies a joint when it can be written as
``-c * L(cell) + d0(source part of cell)`` with ``c > 0``, where ``L`` is the
log-ratio between the joint kernel and the causal reconstruction product.
Channel costs are certified the same way with ``lambda * L + d0`` and a single
constant ``d0``. The unknowns are found by least squares; the certificate
carries the max-abs residual over all supported cells.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .directed import DEFAULT_BUDGET, RatePoint, _check_budget, rate_delayk, recon_window_law
from .errors import ValidationError
from .models import JointMarkovModel, next_state_map

DEFAULT_TOL = 1e-9

OPTIMAL = "optimal"
NOT_OPTIMAL = "not-optimal"
UNDER_DETERMINED = "under-determined"


@dataclass(frozen=True)
class DistortionTable:
    """Per-letter distortion keyed by ``(x_window, xhat_window)`` symbol tuples.

    ``x_window`` holds ``order + delay`` source symbols ending at the current
    one; ``xhat_window`` holds the last ``delay`` reconstructions.
    """

    order: int
    delay: int
    values: Mapping[tuple, float]

    def __post_init__(self):
        values = {}
        for (xw, yw), v in self.values.items():
            xw, yw = tuple(xw), tuple(yw)
            if len(xw) != self.order + self.delay or len(yw) != self.delay:
                raise ValidationError(
                    f"cell {list(xw)}/{list(yw)} has the wrong arity for order "
                    f"{self.order}, delay {self.delay}"
                )
            if not np.isfinite(v):
                raise ValidationError(f"non-finite distortion at cell {list(xw)}/{list(yw)}")
            values[(xw, yw)] = float(v)
        object.__setattr__(self, "values", values)

    def __getitem__(self, cell):
        return self.values[cell]

    def __len__(self):
        return len(self.values)

    def shifted(self, d0: Callable[[tuple], float]) -> "DistortionTable":
        return DistortionTable(
            self.order, self.delay, {k: v + d0(k[0]) for k, v in self.values.items()}
        )

    def scaled(self, alpha: float) -> "DistortionTable":
        return DistortionTable(self.order, self.delay, {k: alpha * v for k, v in self.values.items()})


@dataclass(frozen=True)
class OptimalityCertificate:
    status: str
    c: float | None
    d0: dict
    residual: float
    message: str = ""
    constraint: float | None = None  # stationary expected distortion or cost
    n_cells: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self) -> dict:
        def key(k):
            return ",".join(str(s) for s in k) if isinstance(k, tuple) else str(k)

        return {
            "status": self.status,
            "c": self.c,
            "residual": self.residual,
            "d0": {key(k): v for k, v in self.d0.items()},
            "constraint": self.constraint,
            "cells": self.n_cells,
            "message": self.message,
        }


def _digits(index: int, base: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        out.append(index % base)
        index //= base
    return tuple(reversed(out))


@dataclass(frozen=True)
class CellLaw:
    """Supported cells of a per-letter measure with their stationary mass and log-ratio."""

    x_parts: list  # symbol tuples, the key of d0
    y_parts: list
    prob: np.ndarray
    log_ratio: np.ndarray

    def keys(self):
        return list(zip(self.x_parts, self.y_parts))


def source_cells(joint: JointMarkovModel, k: int, budget: int = DEFAULT_BUDGET) -> CellLaw:
    """Cells ``(x_{i-k+1-m}^{i}, xhat_{i-k+1}^{i})`` with positive stationary mass.

    ``log_ratio`` is ``log2 P(x_i, xhat_i | s_i) / P(xhat_i | xhat_{i-k+1}^{i-1}, w)``,
    which for ``k = 1`` reduces to ``log2 P(x_i | xhat_i, s_i)``.
    """
    if k < 1:
        raise ValueError("delay must be >= 1")
    J = joint.array
    S, X, Y = J.shape
    _check_budget(S * X**k * Y**k, budget, f"delay-{k} cell enumeration")
    nxt = next_state_map(X, joint.order)
    P = joint.stationary[:, None, None].copy()
    st = np.arange(S)[:, None]
    for _ in range(k):
        before = st
        Jt = J[st]
        P = (P[:, :, None, :, None] * Jt[:, :, :, None, :]).reshape(S, -1, P.shape[2] * Y)
        st = nxt[st].reshape(S, -1)
    laws = recon_window_law(joint, k, budget)
    prev = laws[k - 2] if k > 1 else joint.stationary[:, None]

    w, xi, yi = np.nonzero(P > 0)
    x_last, y_last = xi % X, yi % Y
    num = J[before[w, xi // X], x_last, y_last]
    den = laws[k - 1][w, yi] / prev[w, yi // Y]
    log_ratio = np.log2(num) - np.log2(den)

    xa, ya = joint.source_alphabet, joint.recon_alphabet
    ctx = joint.kernel.contexts
    x_parts = [ctx[a] + tuple(xa[d] for d in _digits(b, X, k)) for a, b in zip(w.tolist(), xi.tolist())]
    y_parts = [tuple(ya[d] for d in _digits(b, Y, k)) for b in yi.tolist()]
    return CellLaw(x_parts, y_parts, P[w, xi, yi], log_ratio)


def solve_certificate(values, design, groups, tol: float = DEFAULT_TOL) -> tuple[str, float | None, dict, float, str]:
    """Least-squares fit ``values ~ scale * design + offset[group]``.

    Returns ``(status, scale, offsets, residual, message)``. The system is
    under-determined when ``design`` is constant inside every group (the scale
    is then unconstrained), and degenerate when the fitted scale is zero.
    """
    values = np.asarray(values, dtype=float)
    design = np.asarray(design, dtype=float)
    index: dict = {}
    g = np.array([index.setdefault(key, len(index)) for key in groups], dtype=np.int64)
    labels = list(index)
    counts = np.bincount(g)

    def centered(v):
        return v - (np.bincount(g, weights=v) / counts)[g]

    f_c = centered(design)
    e_c = centered(values)
    scale_ref = max(1.0, float(np.abs(design).max(initial=0.0)))
    if np.abs(f_c).max(initial=0.0) <= 1e-12 * scale_ref:
        offsets = np.bincount(g, weights=values) / counts
        residual = float(np.abs(values - offsets[g]).max(initial=0.0))
        d0 = {key: float(o) for key, o in zip(labels, offsets)}
        return (UNDER_DETERMINED, None, d0, residual,
                "log-ratio is constant within every offset group; the scale is unconstrained")
    scale = float(f_c @ e_c / (f_c @ f_c))
    offsets = np.bincount(g, weights=values - scale * design) / counts
    residual = float(np.abs(values - scale * design - offsets[g]).max())
    d0 = {key: float(o) for key, o in zip(labels, offsets)}
    if residual > tol:
        return NOT_OPTIMAL, scale, d0, residual, (
            f"condition not satisfied: residual {residual:.3g} exceeds tolerance {tol:.3g}"
        )
    if abs(scale) <= tol:
        return UNDER_DETERMINED, 0.0, d0, residual, (
            "degenerate: the measure is an offset alone and constrains nothing"
        )
    if scale < 0:
        return NOT_OPTIMAL, scale, d0, residual, (
            f"condition not satisfied: fitted scale {scale:.6g} is negative"
        )
    return OPTIMAL, scale, d0, residual, "condition satisfied"


def _d0_lookup(d0) -> Callable[[tuple], float]:
    if d0 is None:
        return lambda key: 0.0
    if callable(d0):
        return d0
    return lambda key: float(d0.get(tuple(key), 0.0))


def synthesize_distortion(
    joint: JointMarkovModel, k: int, c: float, d0=None, budget: int = DEFAULT_BUDGET
) -> DistortionTable:
    """Distortion under which ``joint``'s test channel is optimal at delay ``k``.

    ``d0`` maps the source part of a cell (``order + k`` symbols) to an offset;
    it may be a mapping (missing keys are 0), a callable, or None.
    Zero-probability cells are omitted.
    """
    if not c > 0:
        raise ValueError("scale c must be positive")
    cells = source_cells(joint, k, budget)
    offset = _d0_lookup(d0)
    values = {
        (xp, yp): -c * L + offset(xp)
        for xp, yp, L in zip(cells.x_parts, cells.y_parts, cells.log_ratio.tolist())
    }
    return DistortionTable(joint.order, k, values)


def _table_values(cells: CellLaw, table: Mapping, what: str) -> np.ndarray:
    out = np.empty(len(cells.x_parts))
    for i, key in enumerate(cells.keys()):
        try:
            out[i] = table[key]
        except KeyError:
            raise ValidationError(
                f"{what} has no value for supported cell {list(key[0])}/{list(key[1])}"
            ) from None
    return out


def expected_distortion(joint: JointMarkovModel, dist: DistortionTable, budget: int = DEFAULT_BUDGET) -> float:
    """Stationary expectation of the per-letter distortion."""
    if dist.order != joint.order:
        raise ValidationError(f"distortion order {dist.order} != model order {joint.order}")
    cells = source_cells(joint, dist.delay, budget)
    return float(cells.prob @ _table_values(cells, dist.values, "distortion table"))


def verify_distortion(
    joint: JointMarkovModel, k: int, dist: DistortionTable, tol: float = DEFAULT_TOL,
    budget: int = DEFAULT_BUDGET,
) -> OptimalityCertificate:
    """Solve ``e = -c L + d0`` over the supported cells and certify the result.

    A passing certificate means the distortion has the form under which the
    joint's test channel attains the feed-forward rate-distortion function. A
    failing one only says the sufficient condition does not hold.
    """
    if dist.order != joint.order or dist.delay != k:
        raise ValidationError(
            f"distortion table arity (order {dist.order}, delay {dist.delay}) does not "
            f"match model order {joint.order}, delay {k}"
        )
    cells = source_cells(joint, k, budget)
    e = _table_values(cells, dist.values, "distortion table")
    status, c, d0, residual, msg = solve_certificate(e, -cells.log_ratio, cells.x_parts, tol)
    return OptimalityCertificate(
        status, c, d0, residual, msg, float(cells.prob @ e), len(e)
    )


def rd_point(
    joint: JointMarkovModel, k: int, dist: DistortionTable, budget: int = DEFAULT_BUDGET
) -> RatePoint:
    """Rate at delay ``k`` paired with the stationary expected distortion."""
    rp = rate_delayk(joint, k, budget)
    D = expected_distortion(joint, dist, budget)
    return RatePoint(rp.rate, k, rp.method, dict(rp.diagnostics), distortion=D)


# -- channel side -----------------------------------------------------------


def synthesize_cost(channel_joint, lam: float, d0: float = 0.0):
    """Cost table ``lam * log2[P(y_i | x, y-window) / P(y_i | y-window)] + d0``."""
    from .channel import CostTable

    if not lam > 0:
        raise ValueError("lambda must be positive")
    cells = channel_joint.cells()
    values = {
        (xp, yp): lam * L + d0
        for xp, yp, L in zip(cells.x_parts, cells.y_parts, cells.log_ratio.tolist())
    }
    return CostTable(channel_joint.cost_x_order, channel_joint.cost_y_order, values)


def verify_cost(channel_joint, cost, tol: float = DEFAULT_TOL) -> OptimalityCertificate:
    """Solve ``cost = lam L + d0`` (two unknowns) and certify the input policy."""
    if (cost.x_order, cost.y_order) != (channel_joint.cost_x_order, channel_joint.cost_y_order):
        raise ValidationError(
            f"cost table windows (x {cost.x_order}, y {cost.y_order}) do not match the "
            f"channel's (x {channel_joint.cost_x_order}, y {channel_joint.cost_y_order})"
        )
    cells = channel_joint.cells()
    v = _table_values(cells, cost.values, "cost table")
    status, lam, d0, residual, msg = solve_certificate(
        v, cells.log_ratio, ["const"] * len(v), tol
    )
    return OptimalityCertificate(status, lam, d0, residual, msg, float(cells.prob @ v), len(v))
