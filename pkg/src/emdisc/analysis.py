"""Monte Carlo strong-error and occupation-time studies.

A study simulates ``M`` Brownian paths on the fine grid, runs a reference
solution and the coarse scheme for every ``n`` in ``n_list`` on each path,
and stores one number per (path, n) in a preallocated slot array. Paths are
split into fixed batches, so the number of worker threads never changes
a result.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .randomness import SeedSpec, generate_block
from .schemes import (
    EmPath,
    em_continuous_on_fine,
    em_discrete,
    linear_interpolant_on_fine,
    sign_change_occupation,
    transformed_em,
    transformed_em_continuous_on_fine,
)
from .sde_model import SdeProblem, gbm_parameters, validate
from .transform import GTransform, TransformedProblem, build_transform, transformed_problem

__all__ = [
    "StudyConfig",
    "ErrorRow",
    "ErrorTable",
    "RateFit",
    "OccupationRow",
    "OccupationTable",
    "StudyResult",
    "reference_path",
    "run_study",
    "final_time_error",
    "supnorm_error",
    "path_lq_error",
    "occupation_study",
    "reference_crosscheck",
    "fit_rate",
    "lq_norm",
    "pth_mean",
]

SCHEMES = ("em", "transformed_em")
REFERENCES = ("transformed_fine", "direct_fine", "closed_form_gbm")
METRICS = ("final", "sup", "lq", "occupation")


@dataclass(frozen=True)
class StudyConfig:
    n_list: tuple = tuple(2 ** e for e in range(4, 11))
    n_fine: int = 2 ** 14
    M: int = 1000
    p: float = 2.0
    q: float = math.inf
    scheme: str = "em"
    reference: str = "transformed_fine"
    seed: int = 0
    nu_fraction: float = 0.5
    batch_size: int = 250

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "q", float(self.q))
        if not self.n_list or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError("n_list must be a non-empty increasing list")
        bad = [n for n in self.n_list if n < 1 or self.n_fine % n]
        if bad:
            raise ValueError(f"n_fine={self.n_fine} is not divisible by {bad}")
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if not self.q >= 1:
            raise ValueError("q must lie in [1, inf]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    @property
    def n_ref(self) -> int:
        return self.n_fine


@dataclass(frozen=True)
class ErrorRow:
    n: int
    error: float
    std_error: float
    M: int


@dataclass(frozen=True)
class ErrorTable:
    rows: tuple
    p: float = 2.0
    q: float = math.inf
    scheme: str = "em"
    reference: str = ""

    @property
    def ns(self) -> np.ndarray:
        return np.array([r.n for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])

    @property
    def std_errors(self) -> np.ndarray:
        return np.array([r.std_error for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "error", "std_error", "M", "p", "q", "scheme", "reference"])
        for r in self.rows:
            w.writerow([r.n, repr(r.error), repr(r.std_error), r.M, _fmt(self.p),
                        _fmt(self.q), self.scheme, self.reference])
        return buf.getvalue()


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared}


@dataclass(frozen=True)
class OccupationRow:
    n: int
    xi: float
    mean_meas: float
    pmean_meas: float
    std_error: float
    pmean_std_error: float
    M: int


@dataclass(frozen=True)
class OccupationTable:
    rows: tuple
    p: float = 2.0

    def error_table(self, xi: float, kind: str = "mean") -> ErrorTable:
        """Rows for one breakpoint as an :class:`ErrorTable` (for rate fits)."""
        sel = [r for r in self.rows if r.xi == xi]
        if kind == "mean":
            rows = [ErrorRow(r.n, r.mean_meas, r.std_error, r.M) for r in sel]
            return ErrorTable(tuple(rows), p=1.0)
        if kind == "pmean":
            rows = [ErrorRow(r.n, r.pmean_meas, r.pmean_std_error, r.M) for r in sel]
            return ErrorTable(tuple(rows), p=self.p)
        raise ValueError("kind must be 'mean' or 'pmean'")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "xi", "mean_meas", "pmean_meas", "std_error", "M"])
        for r in self.rows:
            w.writerow([r.n, repr(r.xi), repr(r.mean_meas), repr(r.pmean_meas),
                        repr(r.std_error), r.M])
        return buf.getvalue()


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return repr(float(v))


def pth_mean(samples, p: float) -> tuple[float, float]:
    """``(mean(|e|^p))^(1/p)`` and its delta-method standard error."""
    e = np.abs(np.asarray(samples, dtype=float))
    m = e.size
    ep = e ** p
    s = float(np.sum(ep)) / m
    if s == 0.0:
        return 0.0, 0.0
    se_s = float(np.std(ep, ddof=1)) / math.sqrt(m)
    est = s ** (1.0 / p)
    return est, est / (p * s) * se_s


def lq_norm(values, q: float):
    """L_q norm on [0, 1] of a function given at ``j / N``, j = 0..N.

    Uses the left rectangle rule for finite ``q`` and the grid maximum for
    ``q = inf``. Works along the last axis.
    """
    v = np.abs(np.asarray(values, dtype=float))
    if math.isinf(q):
        return np.max(v, axis=-1)
    n = v.shape[-1] - 1
    return (np.sum(v[..., :-1] ** q, axis=-1) / n) ** (1.0 / q)


def reference_path(problem: SdeProblem, transform: Optional[GTransform],
                   tp: Optional[TransformedProblem], path, mode: str) -> np.ndarray:
    """Reference solution on the fine grid, driven by the same Brownian path."""
    w = np.asarray(getattr(path, "values", path), dtype=float)
    n_fine = w.shape[-1] - 1
    if mode == "closed_form_gbm":
        ab = gbm_parameters(problem)
        if ab is None:
            raise ValueError("closed_form_gbm reference needs dX = aX dt + bX dW")
        a, b = ab
        t = np.arange(n_fine + 1) / n_fine
        return problem.x0 * np.exp((a - 0.5 * b * b) * t + b * w)
    dw = np.diff(w, axis=-1)
    if mode == "direct_fine":
        return em_discrete(problem, dw, n_fine).values
    if mode == "transformed_fine":
        if transform is None or tp is None:
            transform = build_transform(problem)
            tp = transformed_problem(transform, problem)
        return transformed_em(problem, tp, transform, dw, n_fine).values
    raise ValueError(f"unknown reference mode {mode!r}")


@dataclass
class StudyResult:
    """Per-path results, indexed ``[path, n_index]`` (and ``[.., xi_index]``)."""

    config: StudyConfig
    xi: tuple = ()
    final: Optional[np.ndarray] = None
    sup: Optional[np.ndarray] = None
    lq: Optional[np.ndarray] = None
    occupation: Optional[np.ndarray] = None

    def table(self, metric: str, p: Optional[float] = None) -> ErrorTable:
        data = getattr(self, metric) if metric in ("final", "sup", "lq") else None
        if data is None:
            raise ValueError(f"metric {metric!r} was not computed")
        p = self.config.p if p is None else p
        rows = []
        for j, n in enumerate(self.config.n_list):
            est, se = pth_mean(data[:, j], p)
            rows.append(ErrorRow(n, est, se, self.config.M))
        q = self.config.q if metric == "lq" else math.inf
        return ErrorTable(tuple(rows), p, q, self.config.scheme, self.config.reference)

    def occupation_table(self, p: Optional[float] = None) -> OccupationTable:
        if self.occupation is None:
            raise ValueError("occupation was not computed")
        p = self.config.p if p is None else p
        rows = []
        m = self.config.M
        for j, n in enumerate(self.config.n_list):
            for i, xi in enumerate(self.xi):
                v = self.occupation[:, j, i]
                mean = float(np.sum(v)) / m
                se = float(np.std(v, ddof=1)) / math.sqrt(m)
                pm, pse = pth_mean(v, p)
                rows.append(OccupationRow(n, xi, mean, pm, se, pse, m))
        return OccupationTable(tuple(rows), p)


def _batches(m: int, size: int):
    return [range(s, min(s + size, m)) for s in range(0, m, size)]


def run_study(config: StudyConfig, problem: SdeProblem,
              metrics: Sequence[str] = ("final", "sup", "lq"),
              xi: Optional[Sequence[float]] = None, workers: int = 1) -> StudyResult:
    """Simulate all paths and collect the requested per-path metrics.

    ``xi`` overrides the levels used for the occupation statistic (default:
    the drift breakpoints).
    """
    metrics = tuple(metrics)
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metric(s) {sorted(unknown)}")
    report = validate(problem)
    if not report.admissible:
        raise ValueError(f"problem is not admissible: {report.summary()}")
    cfg = config
    levels = tuple(float(v) for v in (problem.drift.breakpoints if xi is None else xi))
    if "occupation" in metrics and not levels:
        raise ValueError("occupation study needs at least one breakpoint")

    need_transform = cfg.scheme == "transformed_em" or (
        cfg.reference == "transformed_fine" and set(metrics) - {"occupation"})
    if need_transform:
        t = build_transform(problem, cfg.nu_fraction)
        tp = transformed_problem(t, problem)
    else:
        t = tp = None

    m, nl = cfg.M, len(cfg.n_list)
    res = StudyResult(cfg, levels)
    for name in ("final", "sup", "lq"):
        if name in metrics:
            setattr(res, name, np.empty((m, nl)))
    if "occupation" in metrics:
        res.occupation = np.empty((m, nl, len(levels)))
    seed = SeedSpec(cfg.seed)

    def work(idx: range):
        w = generate_block(seed, idx, cfg.n_fine)
        sl = slice(idx.start, idx.stop)
        ref = None
        if set(metrics) & {"final", "sup", "lq"}:
            ref = reference_path(problem, t, tp, w, cfg.reference)
        for j, n in enumerate(cfg.n_list):
            step = cfg.n_fine // n
            need_cont = "sup" in metrics or "occupation" in metrics
            if need_cont:
                if cfg.scheme == "em":
                    cont = em_continuous_on_fine(problem, w, n)
                else:
                    cont = transformed_em_continuous_on_fine(problem, tp, t, w, n)
                nodes = EmPath(n, cont.node_values())
            elif cfg.scheme == "em":
                nodes = em_discrete(problem, np.diff(w[:, ::step]), n)
            else:
                nodes = transformed_em(problem, tp, t, np.diff(w[:, ::step]), n)
            if "final" in metrics:
                res.final[sl, j] = np.abs(ref[:, -1] - nodes.values[:, -1])
            if "sup" in metrics:
                res.sup[sl, j] = np.max(np.abs(ref - cont.values), axis=-1)
            if "lq" in metrics:
                interp = linear_interpolant_on_fine(nodes, cfg.n_fine)
                res.lq[sl, j] = lq_norm(ref - interp, cfg.q)
            if "occupation" in metrics:
                for i, level in enumerate(levels):
                    res.occupation[sl, j, i] = sign_change_occupation(cont, level)

    batches = _batches(m, cfg.batch_size)
    if workers <= 1:
        for b in batches:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, batches))
    return res


def final_time_error(config: StudyConfig, problem: SdeProblem, workers: int = 1) -> ErrorTable:
    """Strong error at t = 1 for every n in ``config.n_list``."""
    return run_study(config, problem, ("final",), workers=workers).table("final")


def supnorm_error(config: StudyConfig, problem: SdeProblem, workers: int = 1) -> ErrorTable:
    """Strong error in the maximum norm of the time-continuous scheme."""
    return run_study(config, problem, ("sup",), workers=workers).table("sup")


def path_lq_error(config: StudyConfig, problem: SdeProblem, workers: int = 1) -> ErrorTable:
    """Strong error of the piecewise linear interpolant in the L_q norm on [0, 1]."""
    return run_study(config, problem, ("lq",), workers=workers).table("lq")


def occupation_study(config: StudyConfig, problem: SdeProblem,
                     xi: Optional[Sequence[float]] = None,
                     workers: int = 1) -> OccupationTable:
    if xi is None and problem.drift.k == 0:
        raise ValueError("occupation study needs a drift with at least one breakpoint")
    res = run_study(config, problem, ("occupation",), xi=xi, workers=workers)
    return res.occupation_table()


def reference_crosscheck(config: StudyConfig, problem: SdeProblem, n: int,
                         workers: int = 1) -> dict:
    """Compare final-time errors under the transformed and direct references.

    Both studies share the seed, hence the Brownian paths.
    """
    cfg = replace(config, n_list=(n,))
    out = {}
    for mode in ("transformed_fine", "direct_fine"):
        row = final_time_error(replace(cfg, reference=mode), problem, workers).rows[0]
        out[mode] = (row.error, row.std_error)
    (e1, s1), (e2, s2) = out["transformed_fine"], out["direct_fine"]
    combined = math.hypot(s1, s2)
    out["difference"] = abs(e1 - e2)
    out["combined_std_error"] = combined
    out["agree"] = abs(e1 - e2) <= 3.0 * combined
    return out


def fit_rate(table: ErrorTable) -> RateFit:
    """Least-squares line through ``(log n, log error)``; the slope is minus the rate."""
    ns, errs = table.ns.astype(float), table.errors
    keep = errs > 0
    if not np.all(keep):
        warnings.warn(f"dropping {int(np.sum(~keep))} row(s) with non-positive error")
    if np.sum(keep) < 3:
        raise ValueError("need at least 3 rows with positive error to fit a rate")
    x, y = np.log(ns[keep]), np.log(errs[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)
