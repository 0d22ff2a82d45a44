"""Transformation that removes the drift discontinuities.

``G(x) = x + sum_i alpha_i (x - xi_i) |x - xi_i| phi((x - xi_i) / nu)``
with the bump ``phi(u) = (1 - u^2)^3`` on ``[-1, 1]``. The coefficients
``alpha_i`` are chosen so that ``Z = G(X)`` solves an SDE whose drift and
diffusion are Lipschitz. ``G`` is the identity outside the bumps and maps
every bump interval ``[xi_i - nu, xi_i + nu]`` onto itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .sde_model import SdeProblem, drift_limits, validate

__all__ = [
    "bump",
    "bump_d1",
    "bump_d2",
    "GTransform",
    "TransformedProblem",
    "build_transform",
    "identity_transform",
    "g",
    "g_prime",
    "g_second",
    "g_inverse",
    "transformed_problem",
    "lipschitz_estimate",
    "sample_window",
]

GRID_PER_BUMP = 4096


def _scalar(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def bump(u):
    u = np.asarray(u, dtype=float)
    w = 1.0 - u * u
    return _scalar(np.where(np.abs(u) <= 1.0, w * w * w, 0.0))


def bump_d1(u):
    u = np.asarray(u, dtype=float)
    w = 1.0 - u * u
    return _scalar(np.where(np.abs(u) <= 1.0, -6.0 * u * w * w, 0.0))


def bump_d2(u):
    u = np.asarray(u, dtype=float)
    w = 1.0 - u * u
    return _scalar(np.where(np.abs(u) <= 1.0, w * (30.0 * u * u - 6.0), 0.0))


@dataclass(frozen=True)
class GTransform:
    """Parameters of ``G``.

    ``jump_terms[i]`` is ``2 (mu(xi_i+) - mu(xi_i)) / sigma(xi_i)^2``, the
    extra contribution to ``G''`` at the breakpoint itself. It vanishes
    when the drift value at the breakpoint is its right limit.
    """

    xi: tuple
    alpha: tuple
    nu: float
    rho: float
    gprime_min: float = 1.0
    gprime_max: float = 1.0
    jump_terms: tuple = ()

    @property
    def k(self) -> int:
        return len(self.xi)

    @property
    def is_identity(self) -> bool:
        return self.k == 0

    def __call__(self, x):
        return g(self, x)

    def inverse(self, y, tol: float = 1e-12):
        return g_inverse(self, y, tol)


def identity_transform() -> GTransform:
    return GTransform((), (), 1.0, math.inf)


def _rho(xi, alpha) -> float:
    cands = [1.0 / (6.0 * abs(a)) if a != 0.0 else math.inf for a in alpha]
    cands += [(xi[i] - xi[i - 1]) / 2.0 for i in range(1, len(xi))]
    return min(cands)


def build_transform(problem: SdeProblem, nu_fraction: float = 0.5,
                    zero_tol: float = 1e-12) -> GTransform:
    """Construct ``G`` for an admissible problem.

    ``nu = nu_fraction * rho``; when ``rho`` is infinite (all jumps are
    removable) ``nu = 1``.
    """
    if not 0.0 < nu_fraction < 1.0:
        raise ValueError("nu_fraction must lie in (0, 1)")
    report = validate(problem, zero_tol)
    if not report.admissible:
        raise ValueError(f"problem is not admissible: {report.summary()}")
    drift = problem.drift
    if drift.k == 0:
        return identity_transform()
    xi = drift.breakpoints
    alpha, jumps = [], []
    for i in range(1, drift.k + 1):
        left, right = drift_limits(drift, i)
        s2 = float(problem.sigma(xi[i - 1])) ** 2
        alpha.append((left - right) / (2.0 * s2))
        jumps.append(2.0 * (right - drift.breakpoint_values[i - 1]) / s2)
    rho = _rho(xi, alpha)
    nu = 1.0 if math.isinf(rho) else nu_fraction * rho
    t = GTransform(tuple(xi), tuple(alpha), nu, rho, jump_terms=tuple(jumps))
    lo, hi = 1.0, 1.0
    for c in xi:
        gp = g_prime(t, np.linspace(c - nu, c + nu, GRID_PER_BUMP))
        lo, hi = min(lo, float(gp.min())), max(hi, float(gp.max()))
    if not lo > 0.0:
        raise ValueError(f"G' is not bounded away from 0 (min {lo:g}); choose a smaller nu")
    return GTransform(tuple(xi), tuple(alpha), nu, rho, lo, hi, tuple(jumps))


def g(t: GTransform, x):
    x = np.asarray(x, dtype=float)
    out = x
    for c, a in zip(t.xi, t.alpha):
        d = x - c
        out = out + a * d * np.abs(d) * bump(d / t.nu)
    return _scalar(out)


def g_prime(t: GTransform, x):
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    for c, a in zip(t.xi, t.alpha):
        d = x - c
        u = d / t.nu
        ad = np.abs(d)
        out = out + a * (2.0 * ad * bump(u) + d * ad * bump_d1(u) / t.nu)
    return _scalar(out)


def g_second(t: GTransform, x):
    """Density of ``G'``; at a breakpoint the value is fixed by the drift value there."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nu = t.nu
    for c, a in zip(t.xi, t.alpha):
        d = x - c
        u = d / nu
        ad = np.abs(d)
        out = out + a * (2.0 * np.sign(d) * bump(u) + 4.0 * ad * bump_d1(u) / nu
                         + d * ad * bump_d2(u) / (nu * nu))
    for c, a, jump in zip(t.xi, t.alpha, t.jump_terms):
        hit = x == c
        if np.any(hit):
            out = np.where(hit, 2.0 * a + g_prime(t, c) * jump, out)
    return _scalar(out)


def g_inverse(t: GTransform, y, tol: float = 1e-12, max_iter: int = 100):
    """Solve ``G(x) = y`` to ``|G(x) - y| <= tol * max(1, |y|)``.

    Newton steps on ``G'`` are safeguarded by bisection inside a bracket
    derived from the Lipschitz constant ``1 / gprime_min`` of the inverse.
    Points outside every bump are returned unchanged.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    y = np.asarray(y, dtype=float)
    x = np.array(y, dtype=float, copy=True)
    if t.is_identity:
        return _scalar(x)
    yv = np.atleast_1d(y)
    xv = np.atleast_1d(x)
    near = np.zeros(yv.shape, dtype=bool)
    for c in t.xi:
        near |= np.abs(yv - c) < t.nu
    if not np.any(near):
        return _scalar(x)
    ys = yv[near]
    xs = _solve(t, ys, tol, max_iter)
    xv[near] = xs
    return _scalar(xv.reshape(y.shape))


def _solve(t: GTransform, ys, tol, max_iter):
    thresh = tol * np.maximum(1.0, np.abs(ys))
    gy = g(t, ys)
    width = np.abs(ys - gy) / t.gprime_min + 1.0
    lo, hi = ys - width, ys + width
    for _ in range(60):
        bad = (g(t, lo) > ys) | (g(t, hi) < ys)
        if not np.any(bad):
            break
        width = np.where(bad, 2.0 * width, width)
        lo, hi = np.where(bad, ys - width, lo), np.where(bad, ys + width, hi)
    else:
        raise RuntimeError("could not bracket G^{-1}(y)")

    x = ys.copy()
    r = gy - ys
    active = np.abs(r) > thresh
    it = 0
    while np.any(active):
        it += 1
        if it > max_iter + 200:
            raise RuntimeError(
                "G^{-1} did not converge; the cached G' bounds may be wrong")
        idx = np.nonzero(active)[0]
        xa, ra = x[idx], r[idx]
        la, ha = lo[idx], hi[idx]
        la = np.where(ra < 0, xa, la)
        ha = np.where(ra > 0, xa, ha)
        if it <= max_iter:
            xn = xa - ra / g_prime(t, xa)
            outside = ~((xn > la) & (xn < ha))
            xn = np.where(outside, 0.5 * (la + ha), xn)
        else:
            xn = 0.5 * (la + ha)
        rn = g(t, xn) - ys[idx]
        x[idx], r[idx], lo[idx], hi[idx] = xn, rn, la, ha
        active[idx] = np.abs(rn) > thresh[idx]
    return x


@dataclass(frozen=True)
class TransformedProblem:
    """The SDE solved by ``Z = G(X)``; coefficients act on ``z``."""

    z0: float
    transform: GTransform
    problem: SdeProblem
    lipschitz_estimates: tuple = (math.nan, math.nan)

    def coefficients(self, z):
        """Return ``(x, mu_tilde(z), sigma_tilde(z))`` with ``x = G^{-1}(z)``."""
        t, p = self.transform, self.problem
        x = g_inverse(t, z)
        if t.is_identity:
            return x, p.mu(x), p.sigma(x)
        gp = g_prime(t, x)
        s = p.sigma(x)
        mu_t = gp * p.mu(x) + 0.5 * g_second(t, x) * s * s
        return x, mu_t, gp * s

    def mu_tilde(self, z):
        return self.coefficients(z)[1]

    def sigma_tilde(self, z):
        return self.coefficients(z)[2]


def lipschitz_estimate(f: Callable, lo: float, hi: float, n: int = 4097) -> float:
    """Largest difference quotient of ``f`` on a uniform grid over ``[lo, hi]``."""
    z = np.linspace(lo, hi, n)
    v = np.asarray(f(z), dtype=float)
    return float(np.max(np.abs(np.diff(v)) / np.diff(z)))


def sample_window(t: GTransform, problem: SdeProblem) -> tuple[float, float]:
    """A window covering every bump, with unit margins."""
    if t.is_identity:
        return problem.x0 - 1.0, problem.x0 + 1.0
    return min(t.xi) - t.nu - 1.0, max(t.xi) + t.nu + 1.0


def transformed_problem(t: GTransform, problem: SdeProblem,
                        n_grid: int = 2 ** 14 + 1) -> TransformedProblem:
    tp = TransformedProblem(float(g(t, problem.x0)), t, problem)
    lo, hi = sample_window(t, problem)
    est = (lipschitz_estimate(tp.mu_tilde, lo, hi, n_grid),
           lipschitz_estimate(tp.sigma_tilde, lo, hi, n_grid))
    return TransformedProblem(tp.z0, t, problem, est)
