"""Baseline selectors on the stacked score matrix: plain MCP and group MCP.

Both consume the same :class:`FunctionalScores` the factor-augmented fit
builds, so any difference in accuracy comes from the augmentation step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import _cd
from .exceptions import InvalidArgument, NumericalError, ShapeMismatch
from .factors import ScoreMatrix
from .model import (
    FfasmConfig,
    FfasmFit,
    FunctionalScores,
    choose_lambda_and_fit,
    reconstruct_beta,
    selected_covariates,
)
from .penalized import CVResult, DesignMatrix, FitResult, lambda_grid, _splits


@dataclass(frozen=True)
class GroupStructure:
    """Contiguous column ranges, one per covariate, partitioning the columns."""

    groups: tuple[tuple[int, int], ...]

    def __post_init__(self):
        groups = tuple((int(a), int(b)) for a, b in self.groups)
        if not groups:
            raise InvalidArgument("at least one group is required")
        pos = 0
        for a, b in groups:
            if a != pos or b <= a:
                raise InvalidArgument("groups must be non-empty, contiguous and cover all columns")
            pos = b
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_scores(cls, A: ScoreMatrix) -> "GroupStructure":
        return cls(tuple((off, off + w) for _, off, w in A.blocks))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "GroupStructure":
        ends = np.cumsum(sizes)
        return cls(tuple((int(e - s), int(e)) for s, e in zip(sizes, ends)))

    @property
    def n_columns(self) -> int:
        return self.groups[-1][1]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b - a for a, b in self.groups])


def _fit_result(fs: FunctionalScores, method: str, H, lam, cv, y_mean, cfg: FfasmConfig) -> FfasmFit:
    truncs = tuple(es.truncation for es in fs.eigensystems)
    return FfasmFit(
        method=method,
        beta0=y_mean,
        H=np.asarray(H, dtype=float),
        gamma=None,
        beta_curves=reconstruct_beta(H, fs.eigensystems),
        selected=selected_covariates(H, truncs, cfg.selection_threshold),
        eigensystems=fs.eigensystems,
        grid=fs.grid,
        mean_curves=fs.mean_curves,
        score_means=fs.score_means,
        y_mean=y_mean,
        lam=float(lam),
        K=0,
        truncations=truncs,
        family=cfg.family,
        path="projection_linear",
        cv=cv,
        config=cfg.to_dict(),
    )


def _check_gaussian(y, fs: FunctionalScores, cfg: FfasmConfig):
    if cfg.family.kind != "gaussian":
        raise InvalidArgument("baselines support the gaussian family only")
    y = np.asarray(y, dtype=float)
    if y.shape != (fs.scores.n,):
        raise ShapeMismatch("response length does not match the score matrix")
    return y


def fit_mcp_scores(fs: FunctionalScores, y, cfg: FfasmConfig = FfasmConfig()) -> FfasmFit:
    """Penalized least squares of centered ``y`` on the centered scores.

    The intercept is the response mean and is left unpenalized; the penalty
    kind, CV scheme and lambda grid follow ``cfg``.
    """
    y = _check_gaussian(y, fs, cfg)
    y_mean = float(y.mean())
    H, lam, cv = choose_lambda_and_fit(y - y_mean, DesignMatrix.plain(fs.scores.data), cfg, cfg.family)
    return _fit_result(fs, "mcp", H, lam, cv, y_mean, cfg)


# ---------------------------------------------------------------- group MCP

@dataclass(frozen=True)
class GroupConfig:
    scaling: Literal["sqrt_size", "none"] = "sqrt_size"
    standardize: bool = True

    def weights(self, groups: GroupStructure) -> np.ndarray:
        if self.scaling == "sqrt_size":
            return np.sqrt(groups.sizes.astype(float))
        if self.scaling == "none":
            return np.ones(len(groups.groups))
        raise InvalidArgument(f"unknown group scaling {self.scaling!r}")


@dataclass
class _GroupProblem:
    Xs: np.ndarray
    scale: np.ndarray
    starts: np.ndarray
    lengths: np.ndarray
    lips: np.ndarray
    weights: np.ndarray
    curv: np.ndarray


def _group_problem(X, groups: GroupStructure, gcfg: GroupConfig) -> _GroupProblem:
    X = np.asarray(X, dtype=float)
    if X.shape[1] != groups.n_columns:
        raise ShapeMismatch("group structure does not cover the design columns")
    scale = np.ones(X.shape[1])
    if gcfg.standardize:
        sd = X.std(axis=0)
        scale = np.where(sd > 1e-12, sd, 1.0)
    Xs = np.asfortranarray(X / scale)
    n = X.shape[0]
    lips = np.array([np.linalg.eigvalsh(Xs[:, a:b].T @ Xs[:, a:b] / n)[-1] for a, b in groups.groups])
    starts = np.array([a for a, _ in groups.groups], dtype=np.int64)
    return _GroupProblem(Xs, scale, starts, groups.sizes.astype(np.int64), lips,
                         gcfg.weights(groups), np.einsum("ij,ij->j", Xs, Xs) / n)


def group_lambda_max(y, prob: _GroupProblem) -> float:
    """Smallest lambda at which every group is zero (``y`` already centered)."""
    n = prob.Xs.shape[0]
    norms = [np.linalg.norm(prob.Xs[:, s:s + m].T @ y) / n / w
             for s, m, w in zip(prob.starts, prob.lengths, prob.weights)]
    return float(max(norms)) * (1 + 1e-10)


def _group_run(prob: _GroupProblem, y, kind: int, lam: float, gamma: float, theta0,
               tol: float, max_iter: int):
    theta = np.array(theta0, dtype=float, copy=True)
    trace = np.empty(max_iter)
    free = np.zeros(theta.size, dtype=np.bool_)
    it, conv, _ = _cd.gcd_gaussian(prob.Xs, y, theta, prob.starts, prob.lengths, prob.lips,
                                   prob.weights, free, prob.curv, kind, lam, gamma, tol,
                                   max_iter, trace)
    if not np.all(np.isfinite(theta)):
        raise NumericalError("group coordinate descent diverged")
    return theta, int(it), bool(conv), trace[:it]


def group_lambda_path(y, X, groups: GroupStructure, cfg: FfasmConfig = FfasmConfig(),
                      gcfg: GroupConfig = GroupConfig(), lambdas=None) -> list[FitResult]:
    """Warm-started group MCP fits of centered ``y`` on ``X`` over a lambda grid."""
    y = np.asarray(y, dtype=float)
    prob = _group_problem(X, groups, gcfg)
    if lambdas is None:
        lambdas = lambda_grid(group_lambda_max(y, prob), cfg.n_lambda, cfg.lambda_ratio)
    gamma = cfg.penalty.gamma if cfg.penalty.kind == "mcp" else 3.0
    theta = np.zeros(prob.Xs.shape[1])
    fits = []
    for lam in lambdas:
        theta, it, conv, trace = _group_run(prob, y, _cd.MCP, float(lam), gamma, theta,
                                            cfg.tol, cfg.max_iter)
        obj = float(trace[-1]) if it else float("nan")
        fits.append(FitResult(theta / prob.scale, obj, it, conv, float(lam)))
    return fits


def group_cross_validate(y, X, groups: GroupStructure, cfg: FfasmConfig = FfasmConfig(),
                         gcfg: GroupConfig = GroupConfig(), lambdas=None) -> CVResult:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if lambdas is None:
        prob = _group_problem(X, groups, gcfg)
        lambdas = lambda_grid(group_lambda_max(y, prob), cfg.n_lambda, cfg.lambda_ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    splits = _splits(len(y), cfg.cv, cfg.cv_folds, np.random.default_rng(cfg.seed))
    errs = np.empty((len(splits), lambdas.size))
    weights = np.empty(len(splits))
    for s, (train, test) in enumerate(splits):
        fits = group_lambda_path(y[train], X[train], groups, cfg, gcfg, lambdas)
        for j, f in enumerate(fits):
            errs[s, j] = np.mean((y[test] - X[test] @ f.theta) ** 2)
        weights[s] = test.size
    mean_err = weights @ errs / weights.sum()
    best = mean_err.min()
    idx = int(np.flatnonzero(mean_err <= best + 1e-12 * max(abs(best), 1.0))[0])
    return CVResult(float(lambdas[idx]), idx, lambdas, mean_err, errs)


def fit_group_mcp(fs: FunctionalScores, y, cfg: FfasmConfig = FfasmConfig(),
                  groups: GroupStructure | None = None,
                  gcfg: GroupConfig = GroupConfig()) -> FfasmFit:
    """Group MCP with one group per covariate on the centered scores."""
    y = _check_gaussian(y, fs, cfg)
    groups = GroupStructure.from_scores(fs.scores) if groups is None else groups
    y_mean = float(y.mean())
    yc = y - y_mean
    X = fs.scores.data
    if cfg.lam is not None:
        H = group_lambda_path(yc, X, groups, cfg, gcfg, [cfg.lam])[0].theta
        return _fit_result(fs, "grmcp", H, cfg.lam, None, y_mean, cfg)
    prob = _group_problem(X, groups, gcfg)
    lambdas = lambda_grid(group_lambda_max(yc, prob), cfg.n_lambda, cfg.lambda_ratio)
    cv = group_cross_validate(yc, X, groups, cfg, gcfg, lambdas)
    H = group_lambda_path(yc, X, groups, cfg, gcfg, lambdas[:cv.index + 1])[-1].theta
    return _fit_result(fs, "grmcp", H, cv.lam, cv, y_mean, cfg)
