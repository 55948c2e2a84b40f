"""Factorized Markov processes: sources, test channels and their joints.

A state is the window of the last ``m`` source symbols, oldest first. States
are indexed in :func:`itertools.product` order, so appending symbol ``x`` to
state ``s`` gives state ``(s * |X| + x) % |X|**m``.
"""
from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .prob import DEFAULT_TOL, StochasticTable, stationary_distribution, validate_table


def window_contexts(alphabet: Sequence, length: int) -> list[tuple]:
    return list(itertools.product(alphabet, repeat=length))


def next_state_map(n_symbols: int, order: int) -> np.ndarray:
    """``nxt[s, x]``: state index after appending symbol ``x`` to state ``s``."""
    S = n_symbols**order
    s = np.arange(S)[:, None]
    x = np.arange(n_symbols)[None, :]
    return (s * n_symbols + x) % S


def _check_alphabet(alphabet, name):
    alphabet = tuple(alphabet)
    if not alphabet:
        raise ValidationError(f"{name} is empty")
    if len({str(a) for a in alphabet}) != len(alphabet):
        raise ValidationError(f"{name} symbols must have distinct string forms: {alphabet}")
    return alphabet


def _check_table(table: StochasticTable, contexts, outputs, tol, what):
    if table.contexts != tuple(contexts):
        raise ValidationError(f"{what}: contexts do not enumerate the expected windows")
    if table.outputs != tuple(outputs):
        raise ValidationError(f"{what}: outputs {table.outputs} != {tuple(outputs)}")
    report = validate_table(table, tol)
    if report:
        raise ValidationError(f"{what}: " + "; ".join(str(v) for v in report))


def _state_transition(kernel: np.ndarray, order: int) -> np.ndarray:
    """Collapse ``P(x | s)`` of shape ``(S, X)`` into an ``(S, S)`` chain."""
    S, X = kernel.shape
    nxt = next_state_map(X, order)
    T = np.zeros((S, S))
    np.add.at(T, (np.repeat(np.arange(S), X), nxt.ravel()), kernel.ravel())
    return T


@dataclass(frozen=True, eq=False)
class MarkovSourceModel:
    """Stationary ergodic source with ``P(x_i | x_{i-m}^{i-1})``."""

    alphabet: tuple
    order: int
    kernel: StochasticTable
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "alphabet", _check_alphabet(self.alphabet, "source alphabet"))
        if self.order < 0:
            raise ValidationError("order must be >= 0")
        _check_table(
            self.kernel, window_contexts(self.alphabet, self.order), self.alphabet, self.tol,
            "source kernel",
        )
        _ = self.stationary

    @classmethod
    def from_array(cls, alphabet, order, probs, defined=None, tol=DEFAULT_TOL):
        alphabet = tuple(alphabet)
        table = StochasticTable(window_contexts(alphabet, order), alphabet, probs, defined)
        return cls(alphabet, order, table, tol)

    @property
    def n_states(self) -> int:
        return len(self.alphabet) ** self.order

    @property
    def array(self) -> np.ndarray:
        return self.kernel.probs

    @cached_property
    def stationary(self) -> np.ndarray:
        pi = stationary_distribution(
            StochasticTable(
                self.kernel.contexts, self.kernel.contexts,
                _state_transition(self.array, self.order), self.kernel.defined,
            )
        )
        pi.setflags(write=False)
        return pi


@dataclass(frozen=True, eq=False)
class TestChannelModel:
    """Reconstruction law ``P(xhat_i | x_{i-m}^{i})``; contexts include the current symbol."""

    __test__ = False  # not a pytest class

    source_alphabet: tuple
    recon_alphabet: tuple
    order: int
    kernel: StochasticTable
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "source_alphabet", _check_alphabet(self.source_alphabet, "source alphabet"))
        object.__setattr__(self, "recon_alphabet", _check_alphabet(self.recon_alphabet, "recon alphabet"))
        if self.order < 0:
            raise ValidationError("order must be >= 0")
        _check_table(
            self.kernel, window_contexts(self.source_alphabet, self.order + 1),
            self.recon_alphabet, self.tol, "test-channel kernel",
        )

    @classmethod
    def from_array(cls, source_alphabet, recon_alphabet, order, probs, defined=None, tol=DEFAULT_TOL):
        """``probs`` has shape ``(S, X, Xhat)``; ``defined`` (optional) shape ``(S, X)``."""
        source_alphabet, recon_alphabet = tuple(source_alphabet), tuple(recon_alphabet)
        probs = np.asarray(probs, dtype=float)
        flat = probs.reshape(-1, len(recon_alphabet))
        if defined is not None:
            defined = np.asarray(defined, dtype=bool).ravel()
        table = StochasticTable(window_contexts(source_alphabet, order + 1), recon_alphabet, flat, defined)
        return cls(source_alphabet, recon_alphabet, order, table, tol)

    @property
    def array(self) -> np.ndarray:
        S = len(self.source_alphabet) ** self.order
        return self.kernel.probs.reshape(S, len(self.source_alphabet), len(self.recon_alphabet))

    @property
    def defined(self) -> np.ndarray:
        S = len(self.source_alphabet) ** self.order
        return self.kernel.defined.reshape(S, len(self.source_alphabet))


@dataclass(frozen=True, eq=False)
class JointMarkovModel:
    """Joint process ``P(x_i, xhat_i | x_{i-m}^{i-1})`` with its stationary state law."""

    source_alphabet: tuple
    recon_alphabet: tuple
    order: int
    kernel: StochasticTable
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "source_alphabet", _check_alphabet(self.source_alphabet, "source alphabet"))
        object.__setattr__(self, "recon_alphabet", _check_alphabet(self.recon_alphabet, "recon alphabet"))
        if self.order < 0:
            raise ValidationError("order must be >= 0")
        pairs = list(itertools.product(self.source_alphabet, self.recon_alphabet))
        _check_table(
            self.kernel, window_contexts(self.source_alphabet, self.order), pairs, self.tol,
            "joint kernel",
        )
        _ = self.stationary

    @classmethod
    def from_array(cls, source_alphabet, recon_alphabet, order, probs, defined=None, tol=DEFAULT_TOL):
        """``probs`` has shape ``(S, X, Xhat)``; ``defined`` (optional) shape ``(S,)``."""
        source_alphabet, recon_alphabet = tuple(source_alphabet), tuple(recon_alphabet)
        probs = np.asarray(probs, dtype=float)
        S = len(source_alphabet) ** order
        pairs = list(itertools.product(source_alphabet, recon_alphabet))
        table = StochasticTable(
            window_contexts(source_alphabet, order), pairs, probs.reshape(S, -1), defined
        )
        return cls(source_alphabet, recon_alphabet, order, table, tol)

    @property
    def n_states(self) -> int:
        return len(self.source_alphabet) ** self.order

    @property
    def array(self) -> np.ndarray:
        return self.kernel.probs.reshape(
            self.n_states, len(self.source_alphabet), len(self.recon_alphabet)
        )

    @property
    def defined(self) -> np.ndarray:
        return self.kernel.defined

    @cached_property
    def source(self) -> MarkovSourceModel:
        return MarkovSourceModel.from_array(
            self.source_alphabet, self.order, self.array.sum(axis=2), self.defined, self.tol
        )

    @property
    def stationary(self) -> np.ndarray:
        return self.source.stationary

    def stationary_cells(self) -> np.ndarray:
        """``pi(s) P(x, xhat | s)`` as an ``(S, X, Xhat)`` array."""
        return self.stationary[:, None, None] * self.array


def compose_joint(source: MarkovSourceModel, test: TestChannelModel) -> JointMarkovModel:
    """``P(x, xhat | s) = P(x | s) P(xhat | s, x)``."""
    if source.order != test.order:
        raise ValidationError(f"order mismatch: source {source.order}, test channel {test.order}")
    if source.alphabet != test.source_alphabet:
        raise ValidationError("source alphabets differ between source and test channel")
    P = source.array
    needed = (P > 0) & ~test.defined
    if needed.any():
        s, x = np.argwhere(needed)[0]
        ctx = source.kernel.contexts[s] + (source.alphabet[x],)
        raise ValidationError(f"test channel has no row for reachable context {list(ctx)}")
    J = P[:, :, None] * test.array
    return JointMarkovModel.from_array(
        source.alphabet, test.recon_alphabet, source.order, J, source.kernel.defined, source.tol
    )


def forward_conditional(joint: JointMarkovModel) -> StochasticTable:
    """``P(x | s, xhat)`` with contexts ``(s..., xhat)``; zero-mass contexts are absent."""
    J = joint.array
    den = J.sum(axis=1)  # (S, Xhat)
    defined = den > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(defined[:, None, :], J / den[:, None, :], 0.0)
    rows = cond.transpose(0, 2, 1).reshape(-1, len(joint.source_alphabet))
    contexts = [s + (y,) for s in joint.kernel.contexts for y in joint.recon_alphabet]
    return StochasticTable(contexts, joint.source_alphabet, rows, defined.ravel())


def reverse_conditional(joint: JointMarkovModel) -> StochasticTable:
    """``P(xhat | s, x)`` with contexts ``(s..., x)``; defined only where ``P(x | s) > 0``."""
    J = joint.array
    den = J.sum(axis=2)  # (S, X)
    defined = den > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(defined[:, :, None], J / den[:, :, None], 0.0)
    rows = cond.reshape(-1, len(joint.recon_alphabet))
    contexts = [s + (x,) for s in joint.kernel.contexts for x in joint.source_alphabet]
    return StochasticTable(contexts, joint.recon_alphabet, rows, defined.ravel())


def recover_test_channel(joint: JointMarkovModel) -> TestChannelModel:
    """The test channel recovered from a joint by Bayes inversion."""
    table = reverse_conditional(joint)
    return TestChannelModel(
        joint.source_alphabet, joint.recon_alphabet, joint.order, table, joint.tol
    )


# -- sampling ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled joint path as symbol indices.

    ``initial_state`` is the index of the ``m``-symbol warm-up window that
    precedes ``x[0]``; it is drawn from the stationary law.
    """

    n: int
    x: np.ndarray
    xhat: np.ndarray
    initial_state: int
    seed: object

    def symbols(self, joint: JointMarkovModel) -> tuple[list, list]:
        return (
            [joint.source_alphabet[i] for i in self.x],
            [joint.recon_alphabet[i] for i in self.xhat],
        )


def _cumulative_rows(P: np.ndarray) -> np.ndarray:
    C = np.cumsum(P, axis=-1)
    total = C[..., -1:]
    C = np.where(total > 0, C / np.where(total > 0, total, 1.0), 1.0)
    C = np.minimum(C, 1.0)
    C[..., -1] = 1.0
    return C


def _stationary_cdf(pi: np.ndarray) -> np.ndarray:
    return _cumulative_rows(pi[None])[0]


def sample_chain(kernel: np.ndarray, nxt: np.ndarray, pi: np.ndarray, n: int, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Ancestral sampling of a finite-state process with emitted cells.

    ``kernel[s]`` is a distribution over cells, ``nxt[s, cell]`` the follow-up
    state. Each seed gets its own generator, so trial ``t`` is reproducible on
    its own regardless of how seeds are batched.

    Returns ``(initial_states, cells)`` of shapes ``(T,)`` and ``(T, n)``.
    """
    C = _cumulative_rows(kernel)
    pi_cdf = _stationary_cdf(pi)
    T = len(seeds)
    u0 = np.empty(T)
    u = np.empty((T, n))
    for t, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        u0[t] = rng.random()
        u[t] = rng.random(n)
    states = np.searchsorted(pi_cdf, u0, side="right").clip(max=len(pi) - 1)
    initial = states.copy()
    dtype = np.int32 if kernel.shape[1] < 2**31 else np.int64
    cells = np.empty((T, n), dtype=dtype)
    if T == 1:
        rows = C.tolist()
        nxt_rows = nxt.tolist()
        s = int(states[0])
        out = [0] * n
        for i, ui in enumerate(u[0].tolist()):
            c = bisect.bisect_right(rows[s], ui)
            out[i] = c
            s = nxt_rows[s][c]
        cells[0] = out
        return initial, cells
    # the cell drawn at step i depends only on (state, u_i): resolve it for every
    # state up front, leaving a cheap index chase for the sequential part
    S, K = C.shape
    block = max(1, min(n, 2**22 // max(1, T * S)))
    rows = np.arange(T)
    s = states
    for a in range(0, n, block):
        ub = u[:, a : a + block]
        cand = np.stack([np.searchsorted(C[r], ub, side="right") for r in range(S)], axis=2)  # (T, B, S)
        cand = cand.clip(max=K - 1)
        follow = nxt[np.arange(S)[None, None, :], cand]
        B = ub.shape[1]
        visited = np.empty((T, B), dtype=np.int64)
        for i in range(B):
            visited[:, i] = s
            s = follow[rows, i, s]
        cells[:, a : a + B] = cand[rows[:, None], np.arange(B)[None, :], visited]
    return initial, cells


def _joint_sampling_tables(joint: JointMarkovModel):
    S, X, Y = joint.array.shape
    kernel = joint.array.reshape(S, X * Y)
    nxt = np.repeat(next_state_map(X, joint.order), Y, axis=1)
    return kernel, nxt


def sample_trajectories(joint: JointMarkovModel, n: int, seeds) -> list[Trajectory]:
    if n < 1:
        raise ValueError("trajectory length must be >= 1")
    kernel, nxt = _joint_sampling_tables(joint)
    initial, cells = sample_chain(kernel, nxt, joint.stationary, n, list(seeds))
    Y = len(joint.recon_alphabet)
    return [
        Trajectory(n, cells[t] // Y, cells[t] % Y, int(initial[t]), seed)
        for t, seed in enumerate(seeds)
    ]


def sample_trajectory(joint: JointMarkovModel, n: int, seed) -> Trajectory:
    """Draw one path of length ``n`` starting from the stationary law; deterministic in ``seed``."""
    return sample_trajectories(joint, n, [seed])[0]
