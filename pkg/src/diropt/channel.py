"""Finite-window channels driven by a delayed-feedback input policy.

The channel emits ``P(y_i | x_{i-mx}^{i}, y_{i-my}^{i-1})`` and the encoder
draws ``P(x_i | x_{i-a}^{i-1}, y_{i-k-b+1}^{i-k})`` from outputs it has seen
with delay ``k``. Together they form a Markov process on the state
``(x-window, y-window)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

from .directed import (
    DEFAULT_BUDGET, DEFAULT_QUANTILE, RatePoint, _check_budget, run_chunks,
    seed_chunks, summarize_trials, trial_seeds, worker_count,
)
from .errors import ExactModeUnavailableError, ValidationError
from .models import _check_alphabet, sample_chain
from .optimality import CellLaw
from .prob import DEFAULT_TOL, StochasticTable, conditional_mutual_information, stationary_distribution, validate_table


def _windows(alphabet, length):
    return list(itertools.product(alphabet, repeat=length))


def _validated(table, contexts, outputs, tol, what):
    if table.contexts != tuple(tuple(c) for c in contexts):
        raise ValidationError(f"{what}: contexts do not enumerate the declared windows")
    if table.outputs != tuple(outputs):
        raise ValidationError(f"{what}: outputs {table.outputs} != {tuple(outputs)}")
    report = validate_table(table, tol)
    if report:
        raise ValidationError(f"{what}: " + "; ".join(str(v) for v in report))
    if not table.defined.all():
        raise ValidationError(f"{what}: every context needs a row")


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Contexts are ``x_{i-mx}..x_i`` followed by ``y_{i-my}..y_{i-1}``."""

    input_alphabet: tuple
    output_alphabet: tuple
    x_order: int
    y_order: int
    kernel: StochasticTable
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "input_alphabet", _check_alphabet(self.input_alphabet, "input alphabet"))
        object.__setattr__(self, "output_alphabet", _check_alphabet(self.output_alphabet, "output alphabet"))
        if self.x_order < 0 or self.y_order < 0:
            raise ValidationError("window orders must be >= 0")
        ctx = [a + b for a in _windows(self.input_alphabet, self.x_order + 1)
               for b in _windows(self.output_alphabet, self.y_order)]
        _validated(self.kernel, ctx, self.output_alphabet, self.tol, "channel kernel")

    @classmethod
    def from_array(cls, input_alphabet, output_alphabet, x_order, y_order, probs, tol=DEFAULT_TOL):
        """``probs`` has shape ``(X**(mx+1), Y**my, Y)``."""
        input_alphabet, output_alphabet = tuple(input_alphabet), tuple(output_alphabet)
        ctx = [a + b for a in _windows(input_alphabet, x_order + 1)
               for b in _windows(output_alphabet, y_order)]
        table = StochasticTable(ctx, output_alphabet, np.asarray(probs, float).reshape(len(ctx), -1))
        return cls(input_alphabet, output_alphabet, x_order, y_order, table, tol)

    @property
    def array(self) -> np.ndarray:
        X, Y = len(self.input_alphabet), len(self.output_alphabet)
        return self.kernel.probs.reshape(X ** (self.x_order + 1), Y**self.y_order, Y)


@dataclass(frozen=True, eq=False)
class InputPolicy:
    """Contexts are ``x_{i-a}..x_{i-1}`` followed by ``y_{i-k-b+1}..y_{i-k}``."""

    input_alphabet: tuple
    output_alphabet: tuple
    delay: int
    x_order: int
    y_order: int
    kernel: StochasticTable
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "input_alphabet", _check_alphabet(self.input_alphabet, "input alphabet"))
        object.__setattr__(self, "output_alphabet", _check_alphabet(self.output_alphabet, "output alphabet"))
        if self.delay < 1:
            raise ValidationError("feedback delay must be >= 1")
        if self.x_order < 0 or self.y_order < 0:
            raise ValidationError("window orders must be >= 0")
        width = self.x_order + self.y_order
        bad = [c for c in self.kernel.contexts if len(c) != width]
        if bad:
            raise ValidationError(
                f"policy context {list(bad[0])} does not match the declared windows "
                f"(x {self.x_order}, y {self.y_order}, delay {self.delay})"
            )
        ctx = [a + b for a in _windows(self.input_alphabet, self.x_order)
               for b in _windows(self.output_alphabet, self.y_order)]
        _validated(self.kernel, ctx, self.input_alphabet, self.tol, "input policy")

    @classmethod
    def from_array(cls, input_alphabet, output_alphabet, delay, x_order, y_order, probs, tol=DEFAULT_TOL):
        """``probs`` has shape ``(X**a, Y**b, X)``."""
        input_alphabet, output_alphabet = tuple(input_alphabet), tuple(output_alphabet)
        ctx = [a + b for a in _windows(input_alphabet, x_order)
               for b in _windows(output_alphabet, y_order)]
        table = StochasticTable(ctx, input_alphabet, np.asarray(probs, float).reshape(len(ctx), -1))
        return cls(input_alphabet, output_alphabet, delay, x_order, y_order, table, tol)

    @classmethod
    def iid(cls, input_alphabet, output_alphabet, probs, delay: int = 1):
        return cls.from_array(input_alphabet, output_alphabet, delay, 0, 0, np.asarray(probs, float)[None])

    @property
    def array(self) -> np.ndarray:
        X, Y = len(self.input_alphabet), len(self.output_alphabet)
        return self.kernel.probs.reshape(X**self.x_order, Y**self.y_order, X)

    @property
    def y_span(self) -> int:
        """How far back the oldest fed-back output lies."""
        return self.delay + self.y_order - 1 if self.y_order else 0


@dataclass(frozen=True)
class CostTable:
    """Per-letter cost keyed by ``(x_{i-mx}^{i}, y_{i-L}^{i})`` symbol tuples."""

    x_order: int
    y_order: int
    values: Mapping[tuple, float]

    def __post_init__(self):
        values = {}
        for (xw, yw), v in self.values.items():
            xw, yw = tuple(xw), tuple(yw)
            if len(xw) != self.x_order + 1 or len(yw) != self.y_order + 1:
                raise ValidationError(f"cost cell {list(xw)}/{list(yw)} has the wrong arity")
            if not np.isfinite(v):
                raise ValidationError(f"non-finite cost at cell {list(xw)}/{list(yw)}")
            values[(xw, yw)] = float(v)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


def _digits(index, base, length):
    out = []
    for _ in range(length):
        out.append(index % base)
        index //= base
    return tuple(reversed(out))


@dataclass(frozen=True, eq=False)
class ChannelJoint:
    """Markov process of a channel under a feedback policy.

    The state is ``(x_{i-Lx}^{i-1}, y_{i-Ly}^{i-1})`` indexed as
    ``xw * |Y|**Ly + yw``; ``kernel[s, x, y]`` is ``P(x_i, y_i | s)``.
    """

    channel: ChannelModel
    policy: InputPolicy
    x_window: int
    y_window: int
    kernel: np.ndarray
    next_state: np.ndarray  # (S, X, Y)

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def exact(self) -> bool:
        """Outputs form a finite-order Markov chain iff no past input is hidden state."""
        return self.x_window == 0

    @property
    def cost_x_order(self) -> int:
        return self.channel.x_order

    @property
    def cost_y_order(self) -> int:
        return self.y_window

    @cached_property
    def stationary(self) -> np.ndarray:
        S = self.n_states
        T = np.zeros((S, S))
        np.add.at(T, (np.repeat(np.arange(S), self.next_state[0].size), self.next_state.reshape(S, -1).ravel()),
                  self.kernel.reshape(S, -1).ravel())
        pi = stationary_distribution(T)
        pi.setflags(write=False)
        return pi

    @cached_property
    def channel_law(self) -> np.ndarray:
        """``P(y | x, state)`` of shape ``(S, X, Y)``; zero where the input is impossible."""
        px = self.kernel.sum(axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(px > 0, self.kernel / np.where(px > 0, px, 1.0), 0.0)

    def _require_exact(self):
        if not self.exact:
            raise ExactModeUnavailableError(
                f"the output process is hidden-Markov (input window {self.x_window} is not "
                "observed), so P(y_i | y^(i-1)) has no finite window; use Monte-Carlo mode"
            )

    def cells(self) -> CellLaw:
        """Cost cells ``(x_i, y_{i-Ly}^{i})`` with positive stationary mass and their log-ratio."""
        self._require_exact()
        P = self.stationary[:, None, None] * self.kernel
        py = P.sum(axis=1, keepdims=True)
        s, x, y = np.nonzero(P > 0)
        log_ratio = np.log2(self.channel_law[s, x, y]) - np.log2(
            py[s, 0, y] / self.stationary[s]
        )
        xa, ya = self.channel.input_alphabet, self.channel.output_alphabet
        Y = len(ya)
        x_parts = [(xa[i],) for i in x.tolist()]
        y_parts = [tuple(ya[d] for d in _digits(w, Y, self.y_window)) + (ya[j],)
                   for w, j in zip(s.tolist(), y.tolist())]
        return CellLaw(x_parts, y_parts, P[s, x, y], log_ratio)


def compose_channel_joint(
    channel: ChannelModel, policy: InputPolicy, budget: int = DEFAULT_BUDGET
) -> ChannelJoint:
    """Joint law ``vecP^k(x^n | y^n) * vecP^ch(y^n | x^n)`` as a finite-state chain."""
    if channel.input_alphabet != policy.input_alphabet or channel.output_alphabet != policy.output_alphabet:
        raise ValidationError("channel and policy alphabets differ")
    X, Y = len(channel.input_alphabet), len(channel.output_alphabet)
    Lx = max(channel.x_order, policy.x_order)
    Ly = max(channel.y_order, policy.y_span)
    S = X**Lx * Y**Ly
    _check_budget(S * X * Y, budget, "channel state space")
    Wy = Y**Ly
    ch, pol = channel.array, policy.array
    kernel = np.zeros((S, X, Y))
    nxt = np.zeros((S, X, Y), dtype=np.int64)
    for xw_i, xw in enumerate(itertools.product(range(X), repeat=Lx)):
        for yw_i, yw in enumerate(itertools.product(range(Y), repeat=Ly)):
            s = xw_i * Wy + yw_i
            px_ctx = _index(xw[Lx - policy.x_order:], X)
            fb = yw[Ly - policy.y_span: Ly - policy.y_span + policy.y_order] if policy.y_order else ()
            px = pol[px_ctx, _index(fb, Y)]
            cy_ctx = _index(yw[Ly - channel.y_order:], Y)
            for x in range(X):
                cx_ctx = _index(xw[Lx - channel.x_order:] + (x,), X)
                kernel[s, x] = px[x] * ch[cx_ctx, cy_ctx]
                xw_next = _index((xw + (x,))[1:], X) if Lx else 0
                for y in range(Y):
                    yw_next = _index((yw + (y,))[1:], Y) if Ly else 0
                    nxt[s, x, y] = xw_next * Wy + yw_next
    cj = ChannelJoint(channel, policy, Lx, Ly, kernel, nxt)
    _ = cj.stationary
    return cj


def _index(digits, base):
    i = 0
    for d in digits:
        i = i * base + d
    return i


def feedback_info_rate(channel_joint: ChannelJoint) -> RatePoint:
    """``E[log2 P(y_i | x-window, y-window) - log2 P(y_i | y-history)]`` under the stationary law.

    With no hidden input state this is ``I(X_i; Y_i | Y-window)``; for a
    memoryless channel and an i.i.d. policy it is the single-letter ``I(X; Y)``.
    """
    channel_joint._require_exact()
    P = channel_joint.stationary[:, None, None] * channel_joint.kernel
    return RatePoint(conditional_mutual_information(P), channel_joint.policy.delay, "exact")


def expected_cost(channel_joint: ChannelJoint, cost: CostTable) -> float:
    from .optimality import _table_values

    cells = channel_joint.cells()
    return float(cells.prob @ _table_values(cells, cost.values, "cost table"))


# -- Monte-Carlo -------------------------------------------------------------


def sample_channel(channel_joint: ChannelJoint, n: int, seeds) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sample ``(initial_states, states, x, y)``; ``states[:, i]`` precedes symbol ``i``."""
    cj = channel_joint
    S, X, Y = cj.kernel.shape
    initial, cells = sample_chain(cj.kernel.reshape(S, -1), cj.next_state.reshape(S, -1),
                                  cj.stationary, n, list(seeds))
    x, y = cells // Y, cells % Y
    states = np.empty(cells.shape, dtype=np.int64)
    flat_next = cj.next_state.reshape(S, -1)
    s = initial.astype(np.int64)
    for i in range(n):
        states[:, i] = s
        s = flat_next[s, cells[:, i]]
    return initial, states, x, y


def _output_log_likelihoods(cj: ChannelJoint, states, y) -> np.ndarray:
    """Per-letter ``log2 P(y_i | y-prefix, y_1..y_{i-1})`` by forward filtering on the input window."""
    S, X, Y = cj.kernel.shape
    Wy = Y**cj.y_window
    py_state = cj.kernel.sum(axis=1)  # (S, Y)
    yw = states % Wy
    if cj.exact:
        return np.log2(py_state[states, y])
    H = X**cj.x_window
    T, n = y.shape
    pi = cj.stationary.reshape(H, Wy)
    belief = pi[:, yw[:, 0]].T  # (T, H)
    belief = belief / belief.sum(axis=1, keepdims=True)
    h_next = (cj.next_state[:, :, 0] // Wy).reshape(H, Wy, X)  # hidden part after input x
    out = np.empty((T, n))
    hs = np.arange(H)
    for i in range(n):
        s_idx = hs[None, :] * Wy + yw[:, i : i + 1]  # (T, H)
        lik = cj.kernel[s_idx, :, y[:, i][:, None]]  # (T, H, X)
        joint = belief[:, :, None] * lik  # (T, H, X)
        pred = joint.sum(axis=(1, 2))
        out[:, i] = np.log2(pred)
        targets = h_next[hs[None, :, None], yw[:, i][:, None, None], np.arange(X)[None, None, :]]
        new = np.zeros((T, H))
        np.add.at(new, (np.repeat(np.arange(T), H * X), targets.reshape(T, -1).ravel()),
                  joint.reshape(T, -1).ravel())
        belief = new / pred[:, None]
    return out


def _channel_chunk(cj: ChannelJoint, n, seeds):
    _, states, x, y = sample_channel(cj, n, seeds)
    num = cj.channel_law[states, x, y]
    if np.any(num <= 0):
        raise ValidationError("structural zero hit on a sampled path (channel)")
    terms = np.log2(num) - _output_log_likelihoods(cj, states, y)
    return terms.mean(axis=1)


def channel_spectrum_estimate(
    channel_joint: ChannelJoint,
    n: int,
    trials: int,
    quantile: float = 1.0 - DEFAULT_QUANTILE,
    seed: int = 0,
    workers: int | None = None,
) -> RatePoint:
    """Estimate the liminf-in-probability of ``(1/n) log2 vecP^ch(y^n | x^n) / P(y^n)``.

    The returned rate is the lower ``quantile`` of the trial averages (0.05 by
    default, mirroring the upper quantile used on the source side).
    """
    if trials < 30:
        raise ValueError("spectrum estimation needs at least 30 trials")
    workers = worker_count(workers)
    chunks = [(channel_joint, n, part) for part in seed_chunks(trial_seeds(seed, trials), n, workers)]
    values = np.concatenate(run_chunks(_channel_chunk, chunks, workers))
    diag = summarize_trials(values, quantile)
    diag.update(n=n, seed=seed)
    return RatePoint(diag["quantile_value"], channel_joint.policy.delay, "monte-carlo", diag)


def sample_costs(channel_joint: ChannelJoint, cost: CostTable, n: int, seed) -> np.ndarray:
    """Per-letter costs along one sampled path (exact-mode channels only)."""
    channel_joint._require_exact()
    cj = channel_joint
    _, states, x, y = sample_channel(cj, n, [seed])
    S, X, Y = cj.kernel.shape
    lookup = np.full((S, X, Y), np.nan)
    xa, ya = cj.channel.input_alphabet, cj.channel.output_alphabet
    for s in range(S):
        yw = tuple(ya[d] for d in _digits(s, Y, cj.y_window))
        for xi in range(X):
            for yi in range(Y):
                v = cost.values.get(((xa[xi],), yw + (ya[yi],)))
                if v is not None:
                    lookup[s, xi, yi] = v
    out = lookup[states[0], x[0], y[0]]
    if np.isnan(out).any():
        raise ValidationError("cost table misses a cell visited by the sampled path")
    return out
