"""Finite-probability primitives: stochastic tables, stationary laws, entropies.

All logarithms are base 2 and every rate is in bits per sample. Cells with
zero probability contribute nothing (``0 log 0 = 0``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NonErgodicError, ValidationError

DEFAULT_TOL = 1e-12


def prob_vector(values, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return ``values`` as a read-only float vector, checking it is a distribution."""
    p = np.array(values, dtype=float).ravel()
    if p.size == 0:
        raise ValidationError("empty probability vector")
    if np.any(p < -tol):
        raise ValidationError(f"negative entry {p.min():.3g} in probability vector")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"probability vector sums to {p.sum():.17g}")
    p.setflags(write=False)
    return p


@dataclass(frozen=True, eq=False)
class StochasticTable:
    """Conditional law ``P(output | context)`` over finite alphabets.

    ``probs[r]`` is the row for ``contexts[r]``. Rows whose ``defined`` flag is
    False are structurally absent (the context itself has probability zero) and
    are skipped by validation and by every log-ratio computation.
    """

    contexts: tuple
    outputs: tuple
    probs: np.ndarray
    defined: np.ndarray = field(default=None)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape != (len(self.contexts), len(self.outputs)):
            raise ValidationError(
                f"probs shape {probs.shape} does not match "
                f"{len(self.contexts)} contexts x {len(self.outputs)} outputs"
            )
        if self.defined is None:
            defined = np.ones(len(self.contexts), dtype=bool)
        else:
            defined = np.array(self.defined, dtype=bool)
        probs[~defined] = 0.0
        probs.setflags(write=False)
        defined.setflags(write=False)
        object.__setattr__(self, "contexts", tuple(tuple(c) for c in self.contexts))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "defined", defined)

    @classmethod
    def from_rows(
        cls,
        rows: Mapping[tuple, Mapping[Hashable, float]],
        outputs: Sequence,
        contexts: Sequence[tuple] | None = None,
    ) -> "StochasticTable":
        """Build from ``{context: {output: prob}}``; contexts not in ``rows`` are absent."""
        if contexts is None:
            contexts = list(rows)
        index = {o: j for j, o in enumerate(outputs)}
        probs = np.zeros((len(contexts), len(outputs)))
        defined = np.zeros(len(contexts), dtype=bool)
        for r, ctx in enumerate(contexts):
            row = rows.get(tuple(ctx))
            if row is None:
                continue
            defined[r] = True
            for out, value in row.items():
                if out not in index:
                    raise ValidationError(f"unknown output {out!r} in row {ctx!r}")
                probs[r, index[out]] = value
        return cls(tuple(contexts), tuple(outputs), probs, defined)

    def row(self, context) -> dict | None:
        r = self.contexts.index(tuple(context))
        if not self.defined[r]:
            return None
        return dict(zip(self.outputs, self.probs[r].tolist()))

    def __len__(self):
        return len(self.contexts)


@dataclass(frozen=True)
class RowViolation:
    context: Any
    kind: str  # "negative" or "normalization"
    amount: float

    def __str__(self):
        if self.kind == "negative":
            return f"row {list(self.context)}: negative entry {self.amount:.6g}"
        return f"row {list(self.context)}: sum deviates from 1 by {self.amount:+.6g}"


def validate_table(table: StochasticTable, tol: float = DEFAULT_TOL) -> list[RowViolation]:
    """List every defined row that is negative or mis-normalized beyond ``tol``.

    An empty list means the table is valid.
    """
    report = []
    for r in np.flatnonzero(table.defined):
        row = table.probs[r]
        lo = row.min()
        if lo < -tol:
            report.append(RowViolation(table.contexts[r], "negative", float(lo)))
        excess = row.sum() - 1.0
        if abs(excess) > tol:
            report.append(RowViolation(table.contexts[r], "normalization", float(excess)))
    return report


def _as_square(transition) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(transition, StochasticTable):
        T = np.asarray(transition.probs)
        defined = np.asarray(transition.defined)
    else:
        T = np.asarray(transition, dtype=float)
        defined = np.ones(T.shape[0], dtype=bool)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {T.shape}")
    return T, defined


def recurrent_classes(transition) -> list[np.ndarray]:
    """Closed communicating classes of the chain (states with absent rows excluded)."""
    T, defined = _as_square(transition)
    adj = (T > 0) & defined[:, None]
    n_comp, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    leaves = np.ones(n_comp, dtype=bool)
    src, dst = np.nonzero(adj)
    leaves[labels[src][labels[src] != labels[dst]]] = False
    leaves[np.unique(labels[~defined])] = False
    return [np.flatnonzero(labels == c) for c in np.flatnonzero(leaves)]


def stationary_distribution(transition, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Stationary law ``pi`` with ``pi T = pi`` by a direct linear solve.

    Transient states get probability zero. Periodic chains are fine; a chain
    with more than one recurrent class raises :class:`NonErgodicError`.
    Structurally absent rows must be unreachable from defined ones.
    """
    T, defined = _as_square(transition)
    leaks = (T[defined][:, ~defined] > 0).any(axis=1)
    if leaks.any():
        bad = np.flatnonzero(defined)[leaks]
        raise ValidationError(f"states {bad.tolist()} transition into absent rows")
    classes = recurrent_classes(transition)
    if len(classes) != 1:
        raise NonErgodicError(classes)
    C = classes[0]
    sub = T[np.ix_(C, C)]
    A = sub.T - np.eye(len(C))
    A[-1, :] = 1.0
    b = np.zeros(len(C))
    b[-1] = 1.0
    pi_c = np.linalg.solve(A, b)
    pi = np.zeros(T.shape[0])
    pi[C] = np.clip(pi_c, 0.0, None)
    pi /= pi.sum()
    return pi


def entropy(p) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def conditional_mutual_information(joint) -> float:
    """``I(A; B | S)`` in bits for a joint array indexed ``[s, a, b]``.

    A 2-D array is read as ``[a, b]`` with a trivial conditioning variable.
    """
    P = np.asarray(joint, dtype=float)
    if P.ndim == 2:
        P = P[None]
    if P.ndim != 3:
        raise ValidationError(f"joint must be 2-D or 3-D, got {P.ndim}-D")
    ps = P.sum(axis=(1, 2), keepdims=True)
    pa = P.sum(axis=2, keepdims=True)
    pb = P.sum(axis=1, keepdims=True)
    mask = P > 0
    s, a, b = np.nonzero(mask)
    # a sum of logs stays finite where pa * pb would underflow
    log_ratio = (np.log2(P[mask]) + np.log2(ps[s, 0, 0])
                 - np.log2(pa[s, a, 0]) - np.log2(pb[s, 0, b]))
    return float(max((P[mask] * log_ratio).sum(), 0.0))


def mutual_information(joint) -> float:
    """``I(A; B)`` in bits for a 2-D joint array."""
    return conditional_mutual_information(np.asarray(joint, dtype=float)[None])
