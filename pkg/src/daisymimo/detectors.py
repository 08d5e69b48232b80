"""Uplink detectors: zero-forcing baseline and the recursive per-antenna methods.

All recursive detectors share the same shape: an estimate of the K transmitted
symbols is threaded through the antennas in order, and antenna ``n`` refines it
using only its own channel row ``h_n`` and observation ``y_n``::

    s_hat[n] = f(s_hat[n-1], h_n, y_n)

Three update rules are provided.

``rls``
    Recursive least squares. A K x K matrix ``gamma`` (initialized to the
    identity) tracks the inverse of ``I + sum h_i* h_i^T`` through rank-one
    downdates. Because ``gamma`` depends only on the channel, its recursion is
    hoisted into a per-coherence-block preprocessing pass that stores, per
    antenna, the gain pair ``(alpha_n, z_n)``; each resource element then costs
    O(K):

        eps_n   = y_n - h_n^T s_hat[n-1]
        s_hat[n] = s_hat[n-1] + alpha_n * z_n * eps_n

    With a zero initial estimate the final output equals the ridge-regularized
    least-squares solution ``(I + H^H H)^-1 H^H y``, which approaches the
    zero-forcing solution as M grows.

``sgd``
    Stochastic gradient descent on ``min_s ||y - H s||^2``, one antenna's
    residual per step: ``s_hat[n] = s_hat[n-1] + mu_n * conj(h_n) * eps_n``.

``asgd``
    SGD on an internal iterate ``x``, with the reported estimate switching to
    the running average of ``x`` once the step index reaches the onset ``n0``.
    The average is maintained recursively; no iterate history is stored.

No matrix is ever inverted explicitly: zero forcing goes through a
least-squares factorization and RLS through the rank-one recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .signal_model import ChannelMatrix, ReceivedVector

__all__ = [
    "AsgdParams",
    "AsgdState",
    "EstimateVector",
    "IllConditionedChannel",
    "RlsPrecomp",
    "RlsState",
    "SgdParams",
    "StepRecord",
    "asgd_step",
    "gamma_update",
    "rls_preprocess",
    "rls_step",
    "rls_step_direct",
    "run_chain",
    "sgd_step",
    "zf_detect",
]

ALGORITHMS = ("rls", "sgd", "asgd")

# Gramian condition estimates above this raise instead of returning garbage.
GRAMIAN_COND_LIMIT = 1e12


class IllConditionedChannel(ValueError):
    """Raised when the Gramian H^H H is too ill-conditioned to invert reliably."""


@dataclass
class EstimateVector:
    """K-vector symbol estimate; ``antenna_index`` counts absorbed antennas (0 = prior)."""

    values: np.ndarray
    antenna_index: int = 0

    def copy(self) -> "EstimateVector":
        return EstimateVector(self.values.copy(), self.antenna_index)


@dataclass
class StepRecord:
    """One recursive update: the scalar prediction error and the refreshed estimate."""

    epsilon: complex
    estimate_after: EstimateVector


@dataclass
class RlsState:
    """Unsplit RLS state: the inverse-Gramian surrogate plus the current estimate."""

    gamma: np.ndarray
    estimate: EstimateVector

    def validate(self, hermitian_tol: float = 1e-10) -> None:
        """Check the gamma invariants (Hermitian, positive definite)."""
        gap = np.abs(self.gamma - self.gamma.conj().T).max()
        if gap > hermitian_tol:
            raise ValueError(f"gamma deviates from Hermitian by {gap:.3e}")
        eigvals = np.linalg.eigvalsh(self.gamma)
        if eigvals.min() <= 0:
            raise ValueError(f"gamma not positive definite (min eigenvalue {eigvals.min():.3e})")


@dataclass
class RlsPrecomp:
    """Per-antenna RLS gains for one coherence block.

    ``alphas[n]`` is the real scalar gain and ``zs[n]`` the K-vector direction
    for antenna ``n``; ``gamma_final`` is the surrogate matrix after absorbing
    every row, kept for diagnostics and for chaining blocks of antennas.
    """

    alphas: np.ndarray
    zs: np.ndarray
    gamma_final: np.ndarray
    block_id: int = 0

    def __len__(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class SgdParams:
    """Step-size configuration: constant ``mu`` or a per-antenna ``schedule(n)``.

    ``n`` is the 1-based antenna index. Exactly one of the two must be set.
    """

    mu: Optional[float] = None
    schedule: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if (self.mu is None) == (self.schedule is None):
            raise ValueError("set exactly one of mu / schedule")
        if self.mu is not None and not self.mu > 0:
            raise ValueError(f"step size must be positive, got {self.mu}")

    def step_size(self, n: int) -> float:
        if self.mu is not None:
            return self.mu
        mu_n = self.schedule(n)
        if not mu_n > 0:
            raise ValueError(f"schedule returned non-positive step size {mu_n} at n={n}")
        return mu_n


@dataclass(frozen=True)
class AsgdParams:
    """Averaged-SGD configuration: step size plus the averaging onset ``n0`` (>= 1)."""

    mu: float
    n0: int

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"step size must be positive, got {self.mu}")
        if self.n0 < 1:
            raise ValueError(f"averaging onset must be >= 1, got {self.n0}")

    def step_size(self, n: int) -> float:
        return self.mu


@dataclass
class AsgdState:
    """Averaged-SGD state: raw iterate ``x``, averaged output ``s_avg``, step count ``n``."""

    x: np.ndarray
    s_avg: np.ndarray
    n: int
    n0: int


def zf_detect(h: ChannelMatrix, y: Union[ReceivedVector, np.ndarray]) -> EstimateVector:
    """Zero-forcing detection via a least-squares factorization (no explicit inverse).

    Solves ``min_s ||y - H s||`` with a rank-revealing solver and refuses
    channels whose Gramian condition estimate exceeds ``GRAMIAN_COND_LIMIT``.
    """
    samples = np.asarray(getattr(y, "samples", y))
    if samples.shape != (h.m_antennas,):
        raise ValueError(f"received vector shape {samples.shape} does not match M={h.m_antennas}")
    solution, _, rank, sing = np.linalg.lstsq(h.entries, samples, rcond=None)
    if rank < h.k_users:
        raise IllConditionedChannel(f"channel is rank deficient (rank {rank} < K={h.k_users})")
    gram_cond = (sing[0] / sing[-1]) ** 2
    if gram_cond > GRAMIAN_COND_LIMIT:
        raise IllConditionedChannel(
            f"Gramian condition estimate {gram_cond:.3e} exceeds limit {GRAMIAN_COND_LIMIT:.1e}"
        )
    return EstimateVector(values=solution, antenna_index=h.m_antennas)


def gamma_update(gamma: np.ndarray, row: np.ndarray):
    """Absorb one channel row into the inverse-Gramian surrogate.

    Returns ``(alpha, z, gamma_next)`` with ``z = gamma @ conj(row)`` and
    ``alpha = 1 / (1 + row @ z)``. For Hermitian positive-definite ``gamma``
    the quadratic form ``row @ z`` is real positive, so ``alpha`` lies in
    (0, 1]; the (float-noise) imaginary part is dropped. ``gamma_next`` is
    re-symmetrized to keep drift over many rank-one updates bounded.
    """
    z = gamma @ row.conj()
    quad = row @ z
    alpha = 1.0 / (1.0 + quad.real)
    gamma_next = gamma - (alpha * z)[:, None] * z.conj()[None, :]
    gamma_next = 0.5 * (gamma_next + gamma_next.conj().T)
    if not (np.isfinite(alpha) and np.isfinite(gamma_next).all()):
        raise ValueError("non-finite values in gamma recursion")
    return alpha, z, gamma_next


def rls_preprocess(
    rows,
    k: Optional[int] = None,
    gamma0: Optional[np.ndarray] = None,
    block_id: int = 0,
    keep_gamma_history: bool = False,
):
    """Run the channel-only half of RLS over the given rows (one coherence block).

    Starting from the identity (or ``gamma0`` when chaining partial blocks),
    absorbs each row via :func:`gamma_update` and records the per-antenna
    ``(alpha, z)`` pairs. Cost is O(K^2) per antenna; afterwards every resource
    element of the block reuses the stored gains at O(K) per antenna.

    Returns an :class:`RlsPrecomp`, or ``(RlsPrecomp, gamma_history)`` when
    ``keep_gamma_history`` is set (history[n] is gamma after row ``n``).
    """
    rows = getattr(rows, "entries", rows)
    rows = np.asarray(rows, dtype=np.complex128)
    if rows.ndim != 2:
        raise ValueError(f"rows must form a 2-D array, got shape {rows.shape}")
    if k is not None and rows.shape[1] != k:
        raise ValueError(f"rows have length {rows.shape[1]}, expected K={k}")
    m, k = rows.shape
    gamma = np.eye(k, dtype=np.complex128) if gamma0 is None else np.asarray(gamma0, dtype=np.complex128)
    alphas = np.empty(m)
    zs = np.empty((m, k), dtype=np.complex128)
    history = []
    for n in range(m):
        alpha, z, gamma = gamma_update(gamma, rows[n])
        alphas[n] = alpha
        zs[n] = z
        if keep_gamma_history:
            history.append(gamma.copy())
    precomp = RlsPrecomp(alphas=alphas, zs=zs, gamma_final=gamma, block_id=block_id)
    if keep_gamma_history:
        return precomp, history
    return precomp


def rls_step(prev: EstimateVector, row: np.ndarray, y_n: complex, alpha: float, z: np.ndarray) -> StepRecord:
    """One O(K) RLS update using a precomputed ``(alpha, z)`` gain pair."""
    eps = y_n - row @ prev.values
    after = prev.values + (alpha * eps) * z
    return StepRecord(epsilon=eps, estimate_after=EstimateVector(after, prev.antenna_index + 1))


def rls_step_direct(state: RlsState, row: np.ndarray, y_n: complex) -> tuple:
    """Textbook single-shot RLS update (gamma and estimate together).

    Reference form for the split preprocess/per-RE path; both produce the same
    sequence up to float rounding.
    """
    eps = y_n - row @ state.estimate.values
    alpha, z, gamma_next = gamma_update(state.gamma, row)
    after = state.estimate.values + (alpha * eps) * z
    next_state = RlsState(
        gamma=gamma_next,
        estimate=EstimateVector(after, state.estimate.antenna_index + 1),
    )
    return next_state, StepRecord(epsilon=eps, estimate_after=next_state.estimate)


def sgd_step(prev: EstimateVector, row: np.ndarray, y_n: complex, mu_n: float) -> StepRecord:
    """One SGD update: move along the conjugate row by the prediction error.

    ``mu_n = 0`` is tolerated (null step) so boundary behavior stays testable;
    production schedules must be positive.
    """
    if mu_n < 0:
        raise ValueError(f"step size must be >= 0, got {mu_n}")
    eps = y_n - row @ prev.values
    after = prev.values + (mu_n * eps) * row.conj()
    return StepRecord(epsilon=eps, estimate_after=EstimateVector(after, prev.antenna_index + 1))


def asgd_step(state: AsgdState, row: np.ndarray, y_n: complex, mu_n: float) -> AsgdState:
    """One averaged-SGD update.

    The raw iterate follows the SGD rule; the reported estimate equals the raw
    iterate before the onset and afterwards the running average over steps
    ``n0..n``, maintained recursively as
    ``s_avg += (x - s_avg) / (n - n0 + 1)``.
    """
    if state.n0 < 1:
        raise ValueError(f"averaging onset must be >= 1, got {state.n0}")
    eps = y_n - row @ state.x
    x_next = state.x + (mu_n * eps) * row.conj()
    n_next = state.n + 1
    if n_next < state.n0:
        s_next = x_next.copy()
    else:
        n_prime = n_next - state.n0 + 1
        s_next = state.s_avg + (x_next - state.s_avg) / n_prime
    return AsgdState(x=x_next, s_avg=s_next, n=n_next, n0=state.n0)


def _initial_estimate(k: int, s0) -> np.ndarray:
    if s0 is None:
        return np.zeros(k, dtype=np.complex128)
    values = np.asarray(getattr(s0, "values", s0), dtype=np.complex128)
    if values.shape != (k,):
        raise ValueError(f"initial estimate shape {values.shape} does not match K={k}")
    return values.copy()


def run_chain(
    algorithm: str,
    h: ChannelMatrix,
    y: Union[ReceivedVector, np.ndarray],
    params=None,
    s0=None,
) -> list:
    """Run one detector over all antennas in order; return the full trajectory.

    The trajectory holds one :class:`EstimateVector` per antenna index (the
    last entry is the detector output), which is what the MSE-vs-antenna-index
    experiments consume. Clustering plays no role here: the update sequence is
    the same however the antennas are later grouped.

    ``params`` is an :class:`RlsPrecomp` (optional, recomputed if omitted),
    :class:`SgdParams`, or :class:`AsgdParams` depending on ``algorithm``.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    samples = np.asarray(getattr(y, "samples", y))
    m, k = h.m_antennas, h.k_users
    if samples.shape != (m,):
        raise ValueError(f"received vector shape {samples.shape} does not match M={m}")
    start = _initial_estimate(k, s0)
    trajectory = []

    if algorithm == "rls":
        precomp = params if params is not None else rls_preprocess(h.entries)
        if len(precomp) != m:
            raise ValueError(f"precomp covers {len(precomp)} antennas, channel has {m}")
        estimate = EstimateVector(start, 0)
        for n in range(m):
            record = rls_step(estimate, h.row(n), samples[n], precomp.alphas[n], precomp.zs[n])
            estimate = record.estimate_after
            trajectory.append(estimate)
    elif algorithm == "sgd":
        if not isinstance(params, SgdParams):
            raise ValueError("sgd needs SgdParams")
        estimate = EstimateVector(start, 0)
        for n in range(m):
            record = sgd_step(estimate, h.row(n), samples[n], params.step_size(n + 1))
            estimate = record.estimate_after
            trajectory.append(estimate)
    else:
        if not isinstance(params, AsgdParams):
            raise ValueError("asgd needs AsgdParams")
        state = AsgdState(x=start.copy(), s_avg=start.copy(), n=0, n0=params.n0)
        for n in range(m):
            state = asgd_step(state, h.row(n), samples[n], params.step_size(n + 1))
            trajectory.append(EstimateVector(state.s_avg, state.n))
    return trajectory
