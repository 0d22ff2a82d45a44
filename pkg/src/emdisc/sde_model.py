"""Scalar SDE problems with a piecewise Lipschitz drift.

The problems handled here have the form

    dX_t = mu(X_t) dt + sigma(X_t) dW_t,   t in [0, 1],   X_0 = x0,

where ``mu`` is Lipschitz on each open interval between finitely many
breakpoints and ``sigma`` is globally Lipschitz and non-zero at every
breakpoint of ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "FunctionSpec",
    "PiecewiseDrift",
    "SdeProblem",
    "ValidationReport",
    "Check",
    "eval_drift",
    "drift_limits",
    "eval_diffusion",
    "validate",
    "gbm_parameters",
    "problem_from_dict",
    "problem_to_dict",
    "step_drift",
]

_FORMS = ("constant", "affine", "custom")


@dataclass(frozen=True)
class FunctionSpec:
    """A globally defined Lipschitz function of one real variable.

    Use the :meth:`constant`, :meth:`affine` and :meth:`custom`
    constructors. ``affine(a, b)`` is ``a + b*x``. Custom functions must be
    vectorised over numpy arrays and come with a declared Lipschitz
    constant; they cannot be serialised.
    """

    form: str
    params: tuple
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"unknown function form {self.form!r}")
        n_expected = {"constant": 1, "affine": 2, "custom": 1}[self.form]
        if len(self.params) != n_expected:
            raise ValueError(
                f"{self.form} takes {n_expected} parameter(s), got {len(self.params)}"
            )
        if self.form == "custom" and self.func is None:
            raise ValueError("custom FunctionSpec needs a callable")

    @classmethod
    def constant(cls, c: float) -> "FunctionSpec":
        return cls("constant", (float(c),))

    @classmethod
    def affine(cls, a: float, b: float) -> "FunctionSpec":
        return cls("affine", (float(a), float(b)))

    @classmethod
    def custom(cls, func: Callable, lipschitz: float) -> "FunctionSpec":
        return cls("custom", (float(lipschitz),), func)

    @property
    def intercept(self) -> float:
        if self.form == "custom":
            return float(self.func(np.float64(0.0)))
        return self.params[0]

    @property
    def slope(self) -> float:
        """Coefficient of ``x`` for parametric forms (0 for constants)."""
        if self.form == "affine":
            return self.params[1]
        if self.form == "constant":
            return 0.0
        raise TypeError("custom functions have no slope")

    @property
    def lipschitz(self) -> float:
        if self.form == "custom":
            return abs(self.params[0])
        return abs(self.slope)

    @property
    def growth_bound(self) -> float:
        """A constant ``c`` with ``|f(x)| <= c * (1 + |x|)`` for all x."""
        return abs(self.intercept) + self.lipschitz

    def __call__(self, x):
        if self.form == "constant":
            return self.params[0] + 0.0 * np.asarray(x, dtype=float)[()]
        if self.form == "affine":
            return self.params[0] + self.params[1] * np.asarray(x, dtype=float)[()]
        return self.func(np.asarray(x, dtype=float)[()])

    def to_dict(self) -> dict:
        if self.form == "custom":
            raise TypeError("custom functions cannot be serialised")
        return {"form": self.form, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionSpec":
        _check_keys(d, {"form", "params"}, {"form", "params"}, "function")
        form = d["form"]
        if form not in ("constant", "affine"):
            raise ValueError(f"function form must be 'constant' or 'affine', got {form!r}")
        params = tuple(float(v) for v in d["params"])
        return cls(form, params)


@dataclass(frozen=True)
class PiecewiseDrift:
    """Drift coefficient with breakpoints ``xi_1 < ... < xi_k``.

    ``pieces[i]`` is used on the open interval between breakpoint ``i-1``
    and breakpoint ``i`` (0-based, with the outer intervals unbounded).
    ``breakpoint_values[i]`` is the drift value *at* ``breakpoints[i]``;
    it defaults to the right-hand limit.
    """

    breakpoints: tuple
    pieces: tuple
    breakpoint_values: tuple = None

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        pieces = tuple(self.pieces)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pieces)
        if len(pieces) != len(bps) + 1:
            raise ValueError(
                f"need {len(bps) + 1} pieces for {len(bps)} breakpoints, got {len(pieces)}"
            )
        if self.breakpoint_values is None:
            vals = tuple(float(pieces[i + 1](b)) for i, b in enumerate(bps))
        else:
            vals = tuple(float(v) for v in self.breakpoint_values)
            if len(vals) != len(bps):
                raise ValueError("breakpoint_values must match breakpoints in length")
        object.__setattr__(self, "breakpoint_values", vals)

    @classmethod
    def lipschitz(cls, f: FunctionSpec) -> "PiecewiseDrift":
        """A drift without breakpoints."""
        return cls((), (f,))

    @property
    def k(self) -> int:
        return len(self.breakpoints)

    @property
    def parametric(self) -> bool:
        return all(p.form != "custom" for p in self.pieces)

    def __call__(self, x):
        return eval_drift(self, x)


@dataclass(frozen=True)
class SdeProblem:
    x0: float
    drift: PiecewiseDrift
    diffusion: FunctionSpec

    def __post_init__(self):
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def growth_constant(self) -> float:
        """Constant K with ``|mu(x)| + |sigma(x)| <= K (1 + |x|)``."""
        k_drift = max(p.growth_bound for p in self.drift.pieces)
        for xi, v in zip(self.drift.breakpoints, self.drift.breakpoint_values):
            k_drift = max(k_drift, abs(v) / (1.0 + abs(xi)))
        return k_drift + self.diffusion.growth_bound

    def mu(self, x):
        return eval_drift(self.drift, x)

    def sigma(self, x):
        return self.diffusion(x)


def eval_drift(drift: PiecewiseDrift, x):
    """Evaluate a piecewise drift at scalar or array ``x``."""
    xa = np.asarray(x, dtype=float)
    bps = np.asarray(drift.breakpoints, dtype=float)
    if drift.k == 0:
        out = np.asarray(drift.pieces[0](xa), dtype=float)
        return out[()] if out.ndim == 0 else out
    idx = np.searchsorted(bps, xa, side="left")
    if drift.parametric:
        a = np.array([p.intercept for p in drift.pieces])
        b = np.array([p.slope for p in drift.pieces])
        out = a[idx] + b[idx] * xa
    else:
        out = np.empty(xa.shape)
        for i, piece in enumerate(drift.pieces):
            m = idx == i
            if np.any(m):
                out[m] = piece(xa[m])
    out = np.asarray(out, dtype=float)
    at_bp = idx < drift.k
    if np.any(at_bp):
        hit = at_bp & (bps[np.minimum(idx, drift.k - 1)] == xa)
        if np.any(hit):
            vals = np.asarray(drift.breakpoint_values)
            out = np.where(hit, vals[np.minimum(idx, drift.k - 1)], out)
    return out[()] if out.ndim == 0 else out


def drift_limits(drift: PiecewiseDrift, i: int) -> tuple[float, float]:
    """One-sided limits ``(mu(xi_i-), mu(xi_i+))`` at breakpoint ``i`` (1-based)."""
    if not 1 <= i <= drift.k:
        raise IndexError(f"breakpoint index {i} outside 1..{drift.k}")
    xi = drift.breakpoints[i - 1]
    return float(drift.pieces[i - 1](xi)), float(drift.pieces[i](xi))


def eval_diffusion(diffusion: FunctionSpec, x):
    return diffusion(x)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    growth_constant: float

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def reason(self) -> str:
        """Comma separated names of violated assumptions, empty if admissible."""
        failed = []
        for c in self.checks:
            tag = c.name.split(":")[0]
            if not c.passed and tag not in failed:
                failed.append(tag)
        return ", ".join(failed)

    def summary(self) -> str:
        if self.admissible:
            return f"admissible (K={self.growth_constant:g})"
        bad = [f"{c.name} ({c.detail})" for c in self.checks if not c.passed]
        return f"inadmissible: {self.reason} violated; " + "; ".join(bad)


def validate(problem: SdeProblem, zero_tol: float = 1e-12) -> ValidationReport:
    """Check the piecewise-Lipschitz drift and non-degenerate diffusion assumptions.

    Violations are reported, never raised.
    """
    if not zero_tol > 0:
        raise ValueError("zero_tol must be positive")
    checks = []
    bps = problem.drift.breakpoints
    ordered = all(b0 < b1 for b0, b1 in zip(bps, bps[1:]))
    finite_bps = all(math.isfinite(b) for b in bps)
    checks.append(Check("A1: breakpoint ordering", ordered and finite_bps,
                        "" if ordered and finite_bps else f"breakpoints {bps}"))
    for i, piece in enumerate(problem.drift.pieces):
        ok = math.isfinite(piece.lipschitz) and math.isfinite(piece.intercept)
        checks.append(Check(f"A1: piece {i} Lipschitz", ok,
                            "" if ok else f"Lipschitz constant {piece.lipschitz}"))
    ok = math.isfinite(problem.diffusion.lipschitz) and math.isfinite(
        problem.diffusion.intercept)
    checks.append(Check("A2: diffusion Lipschitz", ok,
                        "" if ok else f"Lipschitz constant {problem.diffusion.lipschitz}"))
    for i, xi in enumerate(bps, start=1):
        s = float(problem.diffusion(xi))
        ok = abs(s) > zero_tol
        checks.append(Check(f"A2: sigma(xi_{i}) nonzero", ok,
                            "" if ok else f"sigma({xi:g}) = {s:g}"))
    if not math.isfinite(problem.x0):
        checks.append(Check("x0: finite", False, f"x0 = {problem.x0}"))
    return ValidationReport(tuple(checks), problem.growth_constant)


def gbm_parameters(problem: SdeProblem) -> Optional[tuple[float, float]]:
    """Return ``(a, b)`` if the problem is ``dX = aX dt + bX dW``, else None."""
    if problem.drift.k != 0 or not problem.drift.parametric:
        return None
    mu, sigma = problem.drift.pieces[0], problem.diffusion
    if sigma.form == "custom" or mu.intercept != 0.0 or sigma.intercept != 0.0:
        return None
    return mu.slope, sigma.slope


_PROBLEM_KEYS = {"x0", "drift", "diffusion"}
_DRIFT_KEYS = {"breakpoints", "pieces", "breakpoint_values"}


def _check_keys(d, allowed, required, what):
    if not isinstance(d, dict):
        raise ValueError(f"{what} must be a JSON object")
    extra = set(d) - set(allowed)
    if extra:
        raise ValueError(f"unknown {what} key(s): {sorted(extra)}")
    missing = set(required) - set(d)
    if missing:
        raise ValueError(f"missing {what} key(s): {sorted(missing)}")


def problem_from_dict(d: dict) -> SdeProblem:
    """Build a problem from its JSON form, rejecting unknown keys."""
    _check_keys(d, _PROBLEM_KEYS, _PROBLEM_KEYS, "problem")
    dd = d["drift"]
    _check_keys(dd, _DRIFT_KEYS, {"pieces"}, "drift")
    drift = PiecewiseDrift(
        tuple(dd.get("breakpoints", ())),
        tuple(FunctionSpec.from_dict(p) for p in dd["pieces"]),
        dd.get("breakpoint_values"),
    )
    return SdeProblem(float(d["x0"]), drift, FunctionSpec.from_dict(d["diffusion"]))


def problem_to_dict(problem: SdeProblem) -> dict:
    return {
        "x0": problem.x0,
        "drift": {
            "breakpoints": list(problem.drift.breakpoints),
            "pieces": [p.to_dict() for p in problem.drift.pieces],
            "breakpoint_values": list(problem.drift.breakpoint_values),
        },
        "diffusion": problem.diffusion.to_dict(),
    }


def step_drift(xi: Sequence[float], levels: Sequence[float], x0: float = 0.0,
               sigma: float = 1.0) -> SdeProblem:
    """Convenience: piecewise constant drift with constant diffusion."""
    pieces = tuple(FunctionSpec.constant(v) for v in levels)
    return SdeProblem(x0, PiecewiseDrift(tuple(xi), pieces), FunctionSpec.constant(sigma))
