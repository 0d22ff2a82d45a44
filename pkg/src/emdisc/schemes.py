"""Euler-Maruyama schemes on [0, 1] and the sign-change occupation statistic.

All functions accept a single path (1-d arrays) or a batch of paths
stacked along the first axis. The arithmetic order is fixed, so a path
gives bit-identical results whether it is simulated alone or in a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .randomness import BrownianPath
from .sde_model import SdeProblem
from .transform import GTransform, TransformedProblem, g_inverse

__all__ = [
    "EmPath",
    "ContinuousEmEval",
    "em_discrete",
    "em_continuous_on_fine",
    "linear_interpolant_eval",
    "linear_interpolant_on_fine",
    "transformed_em",
    "transformed_em_continuous_on_fine",
    "sign_change_occupation",
]


@dataclass(frozen=True)
class EmPath:
    """Scheme values at the grid points ``i / n``; shape ``(..., n + 1)``."""

    n: int
    values: np.ndarray


@dataclass(frozen=True)
class ContinuousEmEval:
    """Time-continuous scheme evaluated at ``j / n_fine``; shape ``(..., n_fine + 1)``."""

    n: int
    n_fine: int
    values: np.ndarray

    @property
    def step(self) -> int:
        return self.n_fine // self.n

    def node_values(self) -> np.ndarray:
        return self.values[..., ::self.step]


def _brownian_values(path) -> np.ndarray:
    if isinstance(path, BrownianPath):
        return path.values
    return np.asarray(path, dtype=float)


def _fine_step(n_fine: int, n: int) -> int:
    if n < 1 or n_fine % n:
        raise ValueError(f"n={n} does not divide n_fine={n_fine}")
    return n_fine // n


def _em_nodes(coef, x0, dw: np.ndarray) -> np.ndarray:
    """Run the recursion ``x + a(x) h + b(x) dW`` along the last axis of ``dw``."""
    n = dw.shape[-1]
    h = 1.0 / n
    out = np.empty(dw.shape[:-1] + (n + 1,))
    out[..., 0] = x0
    x = out[..., 0]
    for i in range(n):
        a, b = coef(x)
        x = x + a * h + b * dw[..., i]
        out[..., i + 1] = x
    return out


def _problem_coef(problem: SdeProblem):
    return lambda x: (problem.mu(x), problem.sigma(x))


def _tilde_coef(tp: TransformedProblem):
    def coef(z):
        _, mu_t, sigma_t = tp.coefficients(z)
        return mu_t, sigma_t
    return coef


def em_discrete(problem: SdeProblem, increments, n: int) -> EmPath:
    """Euler-Maruyama values at ``i/n`` driven by the Brownian increments."""
    dw = np.asarray(increments, dtype=float)
    if dw.shape[-1] != n:
        raise ValueError(f"expected {n} increments, got {dw.shape[-1]}")
    return EmPath(n, _em_nodes(_problem_coef(problem), problem.x0, dw))


def _continuous_from_nodes(coef, nodes: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    n_fine = w.shape[-1] - 1
    step = _fine_step(n_fine, n)
    j = np.arange(n_fine + 1)
    node = j // step
    frozen = nodes[..., node]
    a, b = coef(nodes)
    dt = (j - node * step) / n_fine
    dw = w - w[..., node * step]
    return frozen + a[..., node] * dt + b[..., node] * dw


def em_continuous_on_fine(problem: SdeProblem, path, n: int) -> ContinuousEmEval:
    """Time-continuous Euler-Maruyama scheme at every fine grid time.

    Coefficients are frozen at the last coarse grid point and the true
    Brownian increment since that point is used.
    """
    w = _brownian_values(path)
    n_fine = w.shape[-1] - 1
    step = _fine_step(n_fine, n)
    coef = _problem_coef(problem)
    nodes = _em_nodes(coef, problem.x0, np.diff(w[..., ::step]))
    return ContinuousEmEval(n, n_fine, _continuous_from_nodes(coef, nodes, w, n))


def linear_interpolant_eval(empath: EmPath, t):
    """Piecewise linear interpolation of the grid values at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("t must lie in [0, 1]")
    n = empath.n
    nt = n * t
    i = np.minimum(np.floor(nt).astype(int), n - 1)
    v = empath.values
    out = (nt - i) * v[..., i + 1] + (i + 1 - nt) * v[..., i]
    return float(out) if np.ndim(out) == 0 else out


def linear_interpolant_on_fine(empath: EmPath, n_fine: int) -> np.ndarray:
    """The interpolant at ``j / n_fine``; exact at the grid points."""
    n = empath.n
    step = _fine_step(n_fine, n)
    j = np.arange(n_fine + 1)
    i = np.minimum(j // step, n - 1)
    frac = (j - i * step) / step
    v = empath.values
    return frac * v[..., i + 1] + (1.0 - frac) * v[..., i]


def transformed_em(problem: SdeProblem, tp: TransformedProblem, t: GTransform,
                   increments, n: int) -> EmPath:
    """Euler-Maruyama for ``Z = G(X)`` mapped back through ``G^{-1}``."""
    dw = np.asarray(increments, dtype=float)
    if dw.shape[-1] != n:
        raise ValueError(f"expected {n} increments, got {dw.shape[-1]}")
    if t.is_identity:
        return em_discrete(problem, dw, n)
    z = _em_nodes(_tilde_coef(tp), tp.z0, dw)
    return EmPath(n, np.asarray(g_inverse(t, z), dtype=float))


def transformed_em_continuous_on_fine(problem: SdeProblem, tp: TransformedProblem,
                                      t: GTransform, path, n: int) -> ContinuousEmEval:
    """Time-continuous scheme for ``Z`` at the fine times, mapped back to ``X``."""
    if t.is_identity:
        return em_continuous_on_fine(problem, path, n)
    w = _brownian_values(path)
    n_fine = w.shape[-1] - 1
    step = _fine_step(n_fine, n)
    coef = _tilde_coef(tp)
    nodes = _em_nodes(coef, tp.z0, np.diff(w[..., ::step]))
    z = _continuous_from_nodes(coef, nodes, w, n)
    return ContinuousEmEval(n, n_fine, np.asarray(g_inverse(t, z), dtype=float))


def sign_change_occupation(cont: ContinuousEmEval, xi: float):
    """Fraction of fine times where the scheme and its last grid value straddle ``xi``.

    Ties count as sign changes.
    """
    v = cont.values
    j = np.arange(1, cont.n_fine + 1)
    below = (j // cont.step) * cont.step
    fired = (v[..., j] - xi) * (v[..., below] - xi) <= 0.0
    out = np.count_nonzero(fired, axis=-1) / cont.n_fine
    return float(out) if np.ndim(out) == 0 else out
