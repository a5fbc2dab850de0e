"""Smoothing, functional principal components and Karhunen-Loeve scores.

All integrals over the observation interval are evaluated with composite
trapezoid quadrature on a :class:`Grid`.  Trajectories of ``G`` functional
covariates for ``n`` subjects are carried as an ``(n, G, n_grid)`` array in a
:class:`FunctionalSample`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .exceptions import (
    BandwidthTooSmall,
    GridMismatch,
    InsufficientData,
    InvalidArgument,
    InvalidCovariance,
)

KernelName = Literal["epanechnikov", "gaussian"]


@dataclass(frozen=True)
class Grid:
    """Strictly increasing evaluation points with trapezoid weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidArgument("a grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgument("grid points must be strictly increasing")
        if w.shape != pts.shape or np.any(w < 0):
            raise InvalidArgument("weights must be nonnegative and match the points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points: Sequence[float]) -> "Grid":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidArgument("a grid needs at least two points")
        d = np.diff(pts)
        w = np.zeros_like(pts)
        w[:-1] += d / 2
        w[1:] += d / 2
        return cls(pts, w)

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0, num: int = 51) -> "Grid":
        return cls.from_points(np.linspace(lo, hi, num))

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    def __len__(self) -> int:
        return self.points.size

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature of ``values`` along the last axis."""
        return np.asarray(values) @ self.weights

    def same_as(self, other: "Grid", tol: float = 1e-12) -> bool:
        return len(self) == len(other) and bool(
            np.all(np.abs(self.points - other.points) <= tol)
        )


@dataclass(frozen=True)
class FunctionalSample:
    """Trajectories of ``G`` covariates for ``n`` subjects on a shared grid.

    ``values`` has shape ``(n, G, len(grid))``.
    """

    grid: Grid
    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[2] != len(self.grid):
            raise InvalidArgument(
                f"values must have shape (n, G, {len(self.grid)}), got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("trajectory values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def G(self) -> int:
        return self.values.shape[1]

    def subset(self, idx) -> "FunctionalSample":
        return replace(self, values=self.values[idx], centered=False)


@dataclass(frozen=True)
class EigenSystem:
    """FPCA output for one covariate.

    ``eigenfunctions`` holds the retained ``truncation`` functions as rows of
    an ``(m, len(grid))`` array; ``eigenvalues`` and ``fve`` cover the full
    spectrum.
    """

    covariate: int
    grid: Grid
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    fve: np.ndarray
    truncation: int = field(default=0)

    def __post_init__(self):
        if self.truncation == 0:
            object.__setattr__(self, "truncation", self.eigenfunctions.shape[0])


@dataclass(frozen=True)
class SmootherConfig:
    """Local linear smoother settings.

    ``bandwidth`` is either a positive number or the string ``"rule"``, which
    resolves to ``rule_constant * (t_hi - t_lo) * n_obs ** (-1/5)``.
    """

    eval_grid: Grid
    bandwidth: float | str = "rule"
    kernel: KernelName = "epanechnikov"
    rule_constant: float = 1.0

    def resolve_bandwidth(self, n_obs: int) -> float:
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "rule":
                raise InvalidArgument(f"unknown bandwidth rule {self.bandwidth!r}")
            span = self.eval_grid.hi - self.eval_grid.lo
            h = self.rule_constant * span * n_obs ** (-0.2)
        else:
            h = float(self.bandwidth)
        if not h > 0:
            raise InvalidArgument(f"bandwidth must be positive, got {h}")
        return h


def _kernel(u: np.ndarray, kind: str) -> np.ndarray:
    if kind == "epanechnikov":
        return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    if kind == "gaussian":
        return np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
    raise InvalidArgument(f"unknown kernel {kind!r}")


def smoother_matrix(times: np.ndarray, cfg: SmootherConfig) -> np.ndarray:
    """Linear weights ``L`` such that ``L @ values`` is the smoothed curve.

    Row ``e`` holds the local linear weights for evaluation point ``e``.
    Points whose local design is singular get Nadaraya-Watson weights.
    """
    t_obs = np.asarray(times, dtype=float)
    if t_obs.size < 2 or np.unique(t_obs).size < 2:
        raise InsufficientData("local linear smoothing needs >= 2 distinct times")
    h = cfg.resolve_bandwidth(t_obs.size)
    t_eval = cfg.eval_grid.points
    d = t_obs[None, :] - t_eval[:, None]
    k = _kernel(d / h, cfg.kernel)
    s0 = k.sum(axis=1)
    empty = s0 <= 0
    if np.any(empty):
        bad = t_eval[np.argmax(empty)]
        raise BandwidthTooSmall(f"no observations within bandwidth {h:g} of t={bad:g}")
    s1 = (k * d).sum(axis=1)
    s2 = (k * d * d).sum(axis=1)
    det = s0 * s2 - s1 * s1
    local_linear = det > 1e-10 * s0 * s2
    safe_det = np.where(local_linear, det, 1.0)
    ll = k * (s2[:, None] - s1[:, None] * d) / safe_det[:, None]
    nw = k / s0[:, None]
    return np.where(local_linear[:, None], ll, nw)


def local_linear_smooth(times, values, cfg: SmootherConfig) -> np.ndarray:
    """Smooth one trajectory observed at ``times`` onto ``cfg.eval_grid``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InsufficientData("fewer than 2 observations")
    return smoother_matrix(times, cfg) @ v


def smooth_longitudinal(subject, covariate, time, value, cfg: SmootherConfig,
                        subjects=None, covariates=None) -> tuple[FunctionalSample, list, list]:
    """Build a :class:`FunctionalSample` from long-format observations.

    Returns the sample together with the subject and covariate labels in the
    order used for its first two axes.
    """
    subject = np.asarray(subject)
    covariate = np.asarray(covariate)
    time = np.asarray(time, dtype=float)
    value = np.asarray(value, dtype=float)
    lo, hi = cfg.eval_grid.lo, cfg.eval_grid.hi
    outside = (time < lo - 1e-12) | (time > hi + 1e-12)
    if np.any(outside):
        raise InvalidArgument(f"observation time {time[outside][0]:g} outside [{lo:g}, {hi:g}]")
    subjects = sorted(set(subject.tolist())) if subjects is None else list(subjects)
    covariates = sorted(set(covariate.tolist())) if covariates is None else list(covariates)
    out = np.empty((len(subjects), len(covariates), len(cfg.eval_grid)))
    order = np.lexsort((time, covariate, subject))
    subject, covariate, time, value = subject[order], covariate[order], time[order], value[order]
    keys = list(zip(subject.tolist(), covariate.tolist()))
    starts = {}
    for pos, key in enumerate(keys):
        starts.setdefault(key, [pos, pos])[1] = pos + 1
    for i, s in enumerate(subjects):
        for g, c in enumerate(covariates):
            span = starts.get((s, c))
            if span is None or span[1] - span[0] < 2:
                raise InsufficientData(
                    f"subject {s!r} has fewer than 2 observations of covariate {c!r}"
                )
            sl = slice(*span)
            out[i, g] = local_linear_smooth(time[sl], value[sl], cfg)
    return FunctionalSample(cfg.eval_grid, out), subjects, covariates


def center_sample(sample: FunctionalSample) -> tuple[FunctionalSample, np.ndarray]:
    """Subtract the cross-sectional mean curve of every covariate.

    Returns the centered sample and the ``(G, n_grid)`` mean curves.
    """
    mean = sample.values.mean(axis=0)
    return replace(sample, values=sample.values - mean, centered=True), mean


def sample_covariance(sample: FunctionalSample, g: int) -> np.ndarray:
    """``(1/n) sum_i X_i(s) X_i(t)`` for covariate ``g`` of a centered sample."""
    if sample.n < 2:
        raise InsufficientData("covariance needs at least two subjects")
    x = sample.values[:, g, :]
    c = x.T @ x / sample.n
    return (c + c.T) / 2


def fpca(cov: np.ndarray, grid: Grid, n_components: int | None = None,
         fve_threshold: float = 0.95, covariate: int = 0) -> EigenSystem:
    """Eigendecompose a covariance surface under trapezoid quadrature.

    Truncation is ``n_components`` when given, otherwise the smallest number
    of components whose cumulative fraction of variance reaches
    ``fve_threshold``.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (len(grid), len(grid)):
        raise GridMismatch(f"covariance shape {cov.shape} does not match grid of {len(grid)}")
    if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-8:
        raise InvalidCovariance("covariance is not symmetric")
    if np.any(grid.weights <= 0):
        raise InvalidArgument("fpca needs strictly positive quadrature weights")
    sw = np.sqrt(grid.weights)
    m = sw[:, None] * cov * sw[None, :]
    evals, evecs = np.linalg.eigh((m + m.T) / 2)
    evals = np.clip(evals[::-1], 0.0, None)
    funcs = (evecs[:, ::-1] / sw[:, None]).T
    idx = np.argmax(np.abs(funcs), axis=1)
    signs = np.sign(funcs[np.arange(funcs.shape[0]), idx])
    funcs *= np.where(signs == 0, 1.0, signs)[:, None]
    total = evals.sum()
    fve = np.cumsum(evals) / total if total > 0 else np.ones_like(evals)
    if n_components is not None:
        k = int(n_components)
        if not 1 <= k <= evals.size:
            raise InvalidArgument(f"n_components must be in [1, {evals.size}]")
    else:
        if not 0 < fve_threshold <= 1:
            raise InvalidArgument("fve_threshold must lie in (0, 1]")
        k = int(np.searchsorted(fve, fve_threshold - 1e-12) + 1)
        k = min(k, evals.size)
    return EigenSystem(covariate, grid, evals, funcs[:k].copy(), fve, k)


def compute_scores(sample: FunctionalSample, es: EigenSystem) -> np.ndarray:
    """Quadrature scores ``int X_i(t) gamma_j(t) dt``; shape ``(n, m)``."""
    if not sample.grid.same_as(es.grid):
        raise GridMismatch("sample and eigensystem live on different grids")
    x = sample.values[:, es.covariate, :]
    return x @ (es.eigenfunctions * sample.grid.weights).T


def fourier_values(m: int, t, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Orthonormal Fourier functions on ``[lo, hi]`` evaluated at ``t``.

    Ordered as constant, then ``sin``/``cos`` pairs of increasing frequency;
    shape ``(m, len(t))``.
    """
    if m < 1:
        raise InvalidArgument("m must be at least 1")
    span = hi - lo
    u = (np.asarray(t, dtype=float) - lo) / span
    out = np.empty((m, u.size))
    out[0] = 1.0
    for j in range(1, m):
        k = (j + 1) // 2
        trig = np.sin if j % 2 == 1 else np.cos
        out[j] = np.sqrt(2.0) * trig(2 * np.pi * k * u)
    return out / np.sqrt(span)


def fourier_basis(m: int, grid: Grid) -> np.ndarray:
    """Fourier functions sampled on ``grid``, shape ``(m, len(grid))``."""
    return fourier_values(m, grid.points, grid.lo, grid.hi)
