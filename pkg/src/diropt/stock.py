"""Stock-value prediction example: a birth-death chain watched by an investor.

The investor declares ``xhat_i = 1`` when she expects the value to drop from
day ``i-1`` to day ``i`` and already knows every past value. The chain has
states ``0..K`` (``K`` is the top state; the delay is a separate ``k``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .models import JointMarkovModel, MarkovSourceModel, TestChannelModel, compose_joint
from .optimality import DistortionTable
from .prob import StochasticTable, entropy

RECON = (0, 1)


@dataclass(frozen=True)
class BirthDeathChain:
    """Up-probabilities ``p[j]`` for states ``0..K-1``, down-probabilities ``q[j-1]`` for ``1..K``."""

    p: tuple
    q: tuple

    def __post_init__(self):
        p, q = tuple(float(v) for v in self.p), tuple(float(v) for v in self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if len(p) == 0 or len(p) != len(q):
            raise ValidationError(f"need K >= 1 up and down probabilities, got {len(p)} and {len(q)}")
        for j in range(self.K + 1):
            up, down = self.up(j), self.down(j)
            if (j < self.K and not up > 0) or (j > 0 and not down > 0):
                raise ValidationError(f"state {j}: transition probabilities must be positive")
            if up + down > 1 + 1e-12:
                raise ValidationError(f"state {j}: p + q = {up + down:.6g} exceeds 1")

    @property
    def K(self) -> int:
        return len(self.p)

    @property
    def states(self) -> tuple:
        return tuple(range(self.K + 1))

    def up(self, j: int) -> float:
        return self.p[j] if j < self.K else 0.0

    def down(self, j: int) -> float:
        return self.q[j - 1] if j > 0 else 0.0

    @cached_property
    def source(self) -> MarkovSourceModel:
        n = self.K + 1
        T = np.zeros((n, n))
        for j in range(n):
            up, down = self.up(j), self.down(j)
            if j < self.K:
                T[j, j + 1] = up
            if j > 0:
                T[j, j - 1] = down
            T[j, j] = 1.0 - up - down
        return MarkovSourceModel.from_array(self.states, 1, T)

    @property
    def stationary(self) -> np.ndarray:
        return self.source.stationary

    def epsilon_bound(self) -> float:
        """Largest error level for which the optimal policy tables stay nonnegative."""
        return min(min(q, 1.0 - q) for q in self.q)

    def epsilon_for(self, D: float) -> float:
        return D / (1.0 - self.stationary[0])

    def distortion_for(self, epsilon: float) -> float:
        return epsilon * (1.0 - self.stationary[0])


def build_chain(p: Sequence[float], q: Sequence[float]) -> BirthDeathChain:
    return BirthDeathChain(tuple(p), tuple(q))


def _check_epsilon(chain: BirthDeathChain, epsilon: float, allow_zero: bool = False):
    bound = chain.epsilon_bound()
    lower_ok = epsilon >= 0 if allow_zero else epsilon > 0
    if not (lower_ok and epsilon <= bound + 1e-15):
        offending = [j for j in range(1, chain.K + 1)
                     if epsilon > min(chain.down(j), 1 - chain.down(j))]
        where = f" (violated at states {offending})" if offending else ""
        raise DomainError(
            f"epsilon {epsilon:.6g} outside the validity range "
            f"{'[' if allow_zero else '('}0, {bound:.6g}]{where}"
        )
    if not allow_zero and epsilon >= 0.5:
        raise DomainError(f"epsilon {epsilon:.6g} must be below 1/2")


def _policy_row(q: float, eps: float, drop: bool) -> tuple[float, float]:
    """``P(xhat = 0), P(xhat = 1)`` given a drop / no drop from a state with down-probability ``q``."""
    if drop:
        zero = eps * (1 - q - eps) / (q * (1 - 2 * eps))
        one = (1 - eps) * (q - eps) / (q * (1 - 2 * eps))
    else:
        zero = (1 - eps) * (1 - q - eps) / ((1 - q) * (1 - 2 * eps))
        one = eps * (q - eps) / ((1 - q) * (1 - 2 * eps))
    return zero, one


def build_policy(chain: BirthDeathChain, epsilon: float) -> TestChannelModel:
    """Optimal reconstruction law ``P(xhat_i | x_{i-1}, x_i)``.

    From state 0 the investor always declares 0. Elsewhere a missed drop and
    a false alarm each occur with conditional probability ``epsilon`` given
    the declaration.
    """
    _check_epsilon(chain, epsilon)
    n = chain.K + 1
    probs = np.zeros((n, n, 2))
    defined = np.zeros((n, n), dtype=bool)
    T = chain.source.array
    for j in range(n):
        for x in range(n):
            if T[j, x] <= 0:
                continue
            defined[j, x] = True
            if j == 0:
                probs[j, x] = (1.0, 0.0)
            else:
                probs[j, x] = _policy_row(chain.down(j), epsilon, drop=(x == j - 1))
    return TestChannelModel.from_array(chain.states, RECON, 1, probs, defined)


def build_forward_table(chain: BirthDeathChain, epsilon: float) -> StochasticTable:
    """``P(x_i | x_{i-1}, xhat_i)`` with contexts ``(x_{i-1}, xhat_i)``.

    Contexts of zero probability (a drop declared from state 0, or a
    declaration that ``epsilon`` at the bound makes impossible) are absent.
    """
    _check_epsilon(chain, epsilon)
    n = chain.K + 1
    contexts = [(j, y) for j in range(n) for y in RECON]
    rows = {}
    p0 = chain.up(0)
    rows[(0, 0)] = {0: 1 - p0, 1: p0}
    for j in range(1, n):
        p, q = chain.up(j), chain.down(j)
        stay = 1 - p - q
        for y, err, ok in ((0, epsilon, 1 - epsilon), (1, 1 - epsilon, epsilon)):
            mass = (1 - q - epsilon) if y == 0 else (q - epsilon)
            if mass <= 0:
                continue
            row = {j - 1: err, j: ok * stay / (1 - q)}
            if j < chain.K:
                row[j + 1] = ok * p / (1 - q)
            rows[(j, y)] = row
    return StochasticTable.from_rows(rows, chain.states, contexts)


def stock_joint(chain: BirthDeathChain, epsilon: float) -> JointMarkovModel:
    return compose_joint(chain.source, build_policy(chain, epsilon))


def distortion_table(chain: BirthDeathChain) -> DistortionTable:
    """Drop-prediction Hamming distortion: 1 for a missed drop or a false alarm."""
    values = {((0, x), (0,)): 0.0 for x in (0, 1)}
    for j in range(1, chain.K + 1):
        for x in (j - 1, j, j + 1):
            if x > chain.K:
                continue
            for y in RECON:
                values[((j, x), (y,))] = float((y == 1) != (x == j - 1))
    return DistortionTable(1, 1, values)


def stock_rate(chain: BirthDeathChain, D: float, interior: str = "drop") -> float:
    """Closed-form feed-forward rate-distortion function in bits/sample.

    ``R(D) = sum_{j>=1} pi_j (h(q_j) - h(eps))`` with ``eps = D / (1 - pi_0)``.
    ``interior="full"`` replaces ``h(q_j)`` for interior states by the full
    three-way transition entropy ``h(p_j, q_j, 1 - p_j - q_j)``; that variant
    overstates the directed information of the policy whenever ``p_j > 0``
    and is kept only for comparison.
    """
    if D < 0:
        raise DomainError(f"distortion {D} is negative")
    eps = chain.epsilon_for(D)
    _check_epsilon(chain, eps, allow_zero=True)
    pi = chain.stationary
    h_eps = entropy([eps, 1 - eps])
    rate = 0.0
    for j in range(1, chain.K + 1):
        p, q = chain.up(j), chain.down(j)
        if interior == "full" and j < chain.K:
            h_row = entropy([p, q, 1 - p - q])
        elif interior in ("drop", "full"):
            h_row = entropy([q, 1 - q])
        else:
            raise ValueError(f"unknown interior mode {interior!r}")
        rate += pi[j] * (h_row - h_eps)
    return max(rate, 0.0)


def max_distortion(chain: BirthDeathChain) -> float:
    return chain.distortion_for(chain.epsilon_bound())


def rd_curve(chain: BirthDeathChain, D_grid: Iterable[float]) -> list[tuple[float, float]]:
    """``(D, R)`` rows over the part of ``D_grid`` inside the validity domain."""
    d_max = max_distortion(chain)
    rows = [(float(D), stock_rate(chain, float(D))) for D in D_grid if 0 <= D <= d_max]
    if not rows:
        raise DomainError(f"no grid point inside the valid distortion range [0, {d_max:.9g}]")
    return rows
