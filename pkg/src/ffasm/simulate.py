"""Synthetic data for the factor and equal-correlation scenarios.

Scores of ``G`` covariates with ``m`` Fourier components each are stacked into
``a_i`` (length ``p = G m``) and turned into curves on a 51-point grid with
white measurement noise.  Covariates 1-4 carry harmonically decaying
coefficient curves, 5-6 a weak single harmonic, the rest are null.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .exceptions import GridMismatch, InvalidArgument
from .fda import FunctionalSample, Grid, fourier_basis, fourier_values

TYPE1 = frozenset({0, 1, 2, 3})
TYPE2 = frozenset({4, 5})
TRUE_SUPPORT = TYPE1 | TYPE2


@dataclass(frozen=True)
class ScenarioConfig:
    """Settings for one simulated data set.  Covariates are 0-indexed."""

    scenario: Literal["factor", "equal_corr"] = "factor"
    n: int = 100
    G: int = 20
    m: int = 10
    K: int | None = None
    rho: float | None = None
    grid_points: int = 51
    noise_sd_curve: float = 0.5
    noise_sd_response: float = float(np.sqrt(0.1))
    var_f: float = 25.0
    var_u: float = 1.0
    var_B: float = 1.0
    signal_scale: float = 1.0
    fix_loadings: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.scenario == "factor":
            if self.K is None or self.rho is not None:
                raise InvalidArgument("the factor scenario needs K and no rho")
            if self.K < 1:
                raise InvalidArgument("K must be positive")
        elif self.scenario == "equal_corr":
            if self.rho is None or self.K is not None:
                raise InvalidArgument("the equal-correlation scenario needs rho and no K")
            if not 0 <= self.rho < 1:
                raise InvalidArgument("rho must lie in [0, 1)")
        else:
            raise InvalidArgument(f"unknown scenario {self.scenario!r}")

    @property
    def p(self) -> int:
        return self.G * self.m

    @property
    def grid(self) -> Grid:
        return Grid.uniform(0.0, 1.0, self.grid_points)


@dataclass(frozen=True)
class GroundTruth:
    scores: np.ndarray            # (n, G*m) generating scores in the Fourier basis
    eta: np.ndarray               # (G, m) coefficient of beta^(g) in the Fourier basis
    betas: np.ndarray             # (G, n_grid) coefficient curves
    factors: np.ndarray | None = None
    loadings: np.ndarray | None = None
    support: frozenset = field(default=TRUE_SUPPORT)
    type1: frozenset = field(default=TYPE1)
    type2: frozenset = field(default=TYPE2)


def replication_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)`` via ``SeedSequence`` entropy mixing."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def true_eta(G: int, m: int = 10, scale: float = 1.0) -> np.ndarray:
    eta = np.zeros((G, m))
    harmonic = 1.0 / np.arange(1, m + 1) ** 2
    eta[: min(4, G)] = harmonic
    if m >= 2:
        eta[4: min(6, G), 1] = 0.25
    return scale * eta


def true_betas(cfg: ScenarioConfig) -> np.ndarray:
    """Coefficient curves on the scenario grid, shape ``(G, n_grid)``."""
    return true_eta(cfg.G, cfg.m, cfg.signal_scale) @ fourier_basis(cfg.m, cfg.grid)


def equicorrelation_sqrt(p: int, rho: float) -> np.ndarray:
    """Symmetric square root of the matrix with unit diagonal and off-diagonal rho."""
    if not 0 <= rho < 1:
        raise InvalidArgument("rho must lie in [0, 1)")
    a = np.sqrt(1 - rho)
    c = (np.sqrt(1 + (p - 1) * rho) - a) / p
    return a * np.eye(p) + c * np.ones((p, p))


def curves_from_scores(scores: np.ndarray, cfg: ScenarioConfig, rng: np.random.Generator | None = None,
                       noise_sd: float | None = None) -> FunctionalSample:
    n = scores.shape[0]
    phi = fourier_basis(cfg.m, cfg.grid)
    vals = scores.reshape(n, cfg.G, cfg.m) @ phi
    sd = cfg.noise_sd_curve if noise_sd is None else noise_sd
    if rng is not None and sd > 0:
        vals = vals + sd * rng.standard_normal(vals.shape)
    return FunctionalSample(cfg.grid, vals)


def response_from_scores(scores: np.ndarray, eta: np.ndarray, sd: float,
                         rng: np.random.Generator | None = None) -> np.ndarray:
    """Score-space response ``sum_g a^(g) . eta^(g) + noise``."""
    y = scores @ eta.ravel()
    if rng is not None and sd > 0:
        y = y + sd * rng.standard_normal(y.shape)
    return y


def gen_response(sample: FunctionalSample, betas: np.ndarray, sd: float,
                 rng: np.random.Generator | None = None, grid: Grid | None = None) -> np.ndarray:
    """Quadrature response ``sum_g int beta^(g)(t) X_i^(g)(t) dt + noise``."""
    if grid is not None and not grid.same_as(sample.grid):
        raise GridMismatch("coefficient curves are on a different grid")
    betas = np.asarray(betas, dtype=float)
    if betas.shape != sample.values.shape[1:]:
        raise GridMismatch(f"betas shape {betas.shape} does not match sample {sample.values.shape[1:]}")
    y = np.einsum("igt,gt,t->i", sample.values, betas, sample.grid.weights)
    if rng is not None and sd > 0:
        y = y + sd * rng.standard_normal(y.shape)
    return y


def _finish(cfg: ScenarioConfig, scores, rng, F=None, B=None):
    eta = true_eta(cfg.G, cfg.m, cfg.signal_scale)
    sample = curves_from_scores(scores, cfg, rng)
    y = response_from_scores(scores, eta, cfg.noise_sd_response, rng)
    betas = eta @ fourier_basis(cfg.m, cfg.grid)
    return sample, y, GroundTruth(scores, eta, betas, F, B)


def gen_scenario1(cfg: ScenarioConfig, rng: np.random.Generator | None = None):
    """Factor scenario: ``a_i = B f_i + u_i``.

    Returns ``(sample, y, truth)``.  The response is generated from the
    noise-free scores.
    """
    if cfg.scenario != "factor":
        raise InvalidArgument("gen_scenario1 needs scenario='factor'")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    load_rng = np.random.default_rng([cfg.seed, 0xB]) if cfg.fix_loadings else rng
    B = np.sqrt(cfg.var_B) * load_rng.standard_normal((cfg.p, cfg.K))
    F = np.sqrt(cfg.var_f) * rng.standard_normal((cfg.n, cfg.K))
    U = np.sqrt(cfg.var_u) * rng.standard_normal((cfg.n, cfg.p))
    return _finish(cfg, F @ B.T + U, rng, F, B)


def gen_scenario2(cfg: ScenarioConfig, rng: np.random.Generator | None = None):
    """Equal-correlation scenario: ``a_i ~ N(0, Sigma)`` with unit variances, correlation rho."""
    if cfg.scenario != "equal_corr":
        raise InvalidArgument("gen_scenario2 needs scenario='equal_corr'")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    p, rho = cfg.p, cfg.rho
    Z = rng.standard_normal((cfg.n, p))
    a = np.sqrt(1 - rho)
    c = (np.sqrt(1 + (p - 1) * rho) - a) / p
    scores = a * Z + c * Z.sum(axis=1, keepdims=True)
    return _finish(cfg, scores, rng)


def generate(cfg: ScenarioConfig, rng: np.random.Generator | None = None):
    if cfg.scenario == "factor":
        return gen_scenario1(cfg, rng)
    return gen_scenario2(cfg, rng)


def observe_longitudinal(scores: np.ndarray, cfg: ScenarioConfig, n_obs: int,
                         rng: np.random.Generator, noise_sd: float | None = None):
    """Noisy observations of the curves at ``n_obs`` deterministic design points.

    Design points are ``j / (n_obs + 1)``, ``j = 1..n_obs`` (uniform design
    density).  Returns ``(times, values)`` with values of shape
    ``(n, G, n_obs)``.
    """
    times = np.arange(1, n_obs + 1) / (n_obs + 1)
    phi = fourier_values(cfg.m, times)
    n = scores.shape[0]
    vals = scores.reshape(n, cfg.G, cfg.m) @ phi
    sd = cfg.noise_sd_curve if noise_sd is None else noise_sd
    return times, vals + sd * rng.standard_normal(vals.shape)
