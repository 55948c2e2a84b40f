"""k-delay directed-information rates of factorized Markov joints.

Three routes compute the same quantity for a stationary ergodic joint:

* :func:`rate_delay1` -- the single-letter form ``I(X; Xhat | S)``;
* :func:`rate_delayk` -- exact for any delay, marginalizing the ``k`` hidden
  source symbols between the fed-forward window and the current time;
* :func:`spectrum_estimate` -- Monte-Carlo samples of the normalized
  information density, whose upper quantile estimates the limsup in probability.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, ValidationError
from .models import JointMarkovModel, next_state_map, sample_chain, _joint_sampling_tables
from .prob import conditional_mutual_information, entropy

DEFAULT_BUDGET = 10**7
DEFAULT_QUANTILE = 0.95
MC_ELEMENTS = 5 * 10**6  # cap on trials * steps held in memory by one work item


@dataclass(frozen=True)
class RatePoint:
    rate: float
    delay: int
    method: str  # "exact", "forward-marginalized" or "monte-carlo"
    diagnostics: dict = field(default_factory=dict)
    distortion: float | None = None
    model_hash: str | None = None

    def to_dict(self) -> dict:
        out = {"rate_bits": self.rate, "delay": self.delay, "method": self.method}
        if self.distortion is not None:
            out["distortion"] = self.distortion
        if self.model_hash is not None:
            out["model_hash"] = self.model_hash
        out["diagnostics"] = dict(self.diagnostics)
        return out


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get("DIROPT_WORKERS", "1"))
    return max(1, workers)


def rate_delay1(joint: JointMarkovModel) -> RatePoint:
    """Directed-information rate with unit feed-forward delay: ``sum_s pi(s) I(X; Xhat | S=s)``."""
    rate = conditional_mutual_information(joint.stationary_cells())
    return RatePoint(rate, 1, "exact")


def _check_budget(size: int, budget: int, what: str):
    if size > budget:
        raise BudgetExceededError(
            f"{what} needs {size} table entries (budget {budget}); "
            "use the Monte-Carlo spectrum estimate instead"
        )


def recon_window_law(joint: JointMarkovModel, k: int, budget: int = DEFAULT_BUDGET) -> list[np.ndarray]:
    """Laws of ``(w, xhat_1..xhat_t)`` for ``t = 1..k``.

    ``w`` is the source state just before ``x_1`` (drawn from the stationary
    law) and the source symbols ``x_1..x_t`` are summed out. Entry ``t-1`` of
    the result has shape ``(S, Xhat**t)``.
    """
    J = joint.array
    S, X, Y = J.shape
    _check_budget(S * S * Y**k * X, budget, f"delay-{k} marginalization")
    M = np.zeros((S, X, S))
    M[np.arange(S)[:, None], np.arange(X)[None, :], next_state_map(X, joint.order)] = 1.0
    alpha = np.zeros((S, S, 1))
    alpha[np.arange(S), np.arange(S), 0] = joint.stationary
    laws = []
    for _ in range(k):
        alpha = np.einsum("wsh,sxy,sxt->wthy", alpha, J, M)
        alpha = alpha.reshape(S, S, -1)
        laws.append(alpha.sum(axis=1))
    return laws


def _entropy_reconstruction_given_window(joint: JointMarkovModel) -> float:
    """``H(Xhat_i | X_{i-m}^{i})`` under the stationary law."""
    P = joint.stationary_cells()
    return entropy(P) - entropy(P.sum(axis=2))


def rate_delayk(joint: JointMarkovModel, k: int, budget: int = DEFAULT_BUDGET) -> RatePoint:
    """Exact k-delay directed-information rate.

    The rate is ``H(Xhat_i | Xhat_{i-k+1}^{i-1}, W) - H(Xhat_i | X_{i-m}^{i})``
    where ``W`` is the source window that ends ``k`` steps before ``i``. Given
    the source path the reconstructions are independent, so the first term is
    exact after summing out the ``k`` unobserved source symbols.
    """
    if k < 1:
        raise ValueError("delay must be >= 1")
    laws = recon_window_law(joint, k, budget)
    h_full = entropy(laws[-1])
    h_prev = entropy(laws[-2]) if k > 1 else entropy(joint.stationary)
    rate = h_full - h_prev - _entropy_reconstruction_given_window(joint)
    return RatePoint(max(rate, 0.0), k, "exact" if k == 1 else "forward-marginalized")


# -- Monte-Carlo information spectrum ---------------------------------------


def _window_index(a: np.ndarray, width: int, base: int) -> np.ndarray:
    """Base-``base`` index of ``a[:, i-width+1 .. i]`` for every column ``i >= width-1``."""
    n = a.shape[1]
    idx = np.zeros((a.shape[0], n - width + 1), dtype=np.int64)
    for j in range(width):
        idx = idx * base + a[:, j : n - width + 1 + j]
    return idx


def _source_states(x: np.ndarray, initial: np.ndarray, n_symbols: int, order: int) -> np.ndarray:
    """State index before every symbol, from the warm-up state and the path."""
    T, n = x.shape
    digits = np.zeros((T, order), dtype=np.int64)
    rem = initial.astype(np.int64)
    for j in range(order - 1, -1, -1):
        digits[:, j] = rem % n_symbols
        rem //= n_symbols
    ext = np.concatenate([digits, x.astype(np.int64)], axis=1)
    if order == 0:
        return np.zeros((T, n), dtype=np.int64)
    return _window_index(ext, order, n_symbols)[:, :n]


def _log2_or_guard(p: np.ndarray, what: str) -> np.ndarray:
    if np.any(p <= 0):
        raise ValidationError(f"structural zero hit on a sampled path ({what})")
    return np.log2(p)


def _density_terms(joint: JointMarkovModel, k: int, x, xhat, initial, laws) -> np.ndarray:
    """Per-letter log2 [P(x, xhat | s) / (P(x | s) vecP^k(xhat_i | ...))], shape ``(T, n)``."""
    J = joint.array
    S, X, Y = J.shape
    states = _source_states(x, initial, X, joint.order)
    px = J.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        rev = np.where(px[:, :, None] > 0, J / px[:, :, None], 0.0)
    num = _log2_or_guard(rev[states, x, xhat], "test channel")

    T, n = x.shape
    den = np.empty((T, n))
    # first k steps: no fed-forward source symbols yet, condition on past xhat only
    for t in range(min(k, n)):
        marg = laws[t].sum(axis=0)
        prev = laws[t - 1].sum(axis=0) if t > 0 else np.ones(1)
        full = _window_index(xhat[:, : t + 1], t + 1, Y)[:, 0]
        den[:, t] = marg[full] / prev[full // Y]
    if n > k:
        cond_full = laws[k - 1]
        cond_prev = laws[k - 2] if k > 1 else joint.stationary[:, None]
        win = _window_index(xhat, k, Y)[:, 1:]  # windows ending at i = k..n-1
        w = states[:, 1 : n - k + 1]
        den[:, k:] = cond_full[w, win] / cond_prev[w, win // Y]
    return num - _log2_or_guard(den, "delay-k denominator")


def _spectrum_chunk(joint, k, n, seeds, laws):
    kernel, nxt = _joint_sampling_tables(joint)
    initial, cells = sample_chain(kernel, nxt, joint.stationary, n, seeds)
    Y = len(joint.recon_alphabet)
    terms = _density_terms(joint, k, cells // Y, cells % Y, initial, laws)
    return terms.mean(axis=1)


def run_chunks(fn, chunks, workers):
    if workers == 1 or len(chunks) == 1:
        return [fn(*c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *c) for c in chunks]
        return [f.result() for f in futures]


def trial_seeds(seed: int, trials: int) -> list[list[int]]:
    return [[int(seed), t] for t in range(trials)]


def seed_chunks(seeds: list, n: int, workers: int) -> list[list]:
    """Split trial seeds into work items.

    Every trial draws from its own generator, so the split only affects speed
    and memory, never the per-trial values.
    """
    size = min(-(-len(seeds) // workers), max(1, MC_ELEMENTS // n))
    return [seeds[i : i + size] for i in range(0, len(seeds), size)]


def summarize_trials(values: np.ndarray, quantile: float) -> dict:
    return {
        "trials": int(values.size),
        "mean": float(values.mean()),
        "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "quantile": float(quantile),
        "quantile_value": float(np.quantile(values, quantile)),
    }


def spectrum_estimate(
    joint: JointMarkovModel,
    k: int,
    n: int,
    trials: int,
    quantile: float = DEFAULT_QUANTILE,
    seed: int = 0,
    workers: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> RatePoint:
    """Estimate the limsup-in-probability of the normalized information density.

    Each trial samples a stationary path of length ``n`` with seed
    ``(seed, trial)`` and averages the per-letter log-ratio. The returned rate
    is the ``quantile`` of the trial averages; mean and std are in diagnostics.
    """
    if trials < 30:
        raise ValueError("spectrum estimation needs at least 30 trials")
    if k < 1 or n < 1:
        raise ValueError("delay and block length must be >= 1")
    laws = recon_window_law(joint, k, budget)
    workers = worker_count(workers)
    chunks = [(joint, k, n, part, laws) for part in seed_chunks(trial_seeds(seed, trials), n, workers)]
    values = np.concatenate(run_chunks(_spectrum_chunk, chunks, workers))
    diag = summarize_trials(values, quantile)
    diag.update(n=n, seed=seed)
    return RatePoint(diag["quantile_value"], k, "monte-carlo", diag)
