"""Sparse generalized linear models with lasso, MCP and SCAD penalties.

Objective (per observation average)::

    (1/n) sum_i [-y_i eta_i + b(eta_i)] + sum_{j penalized} J_lambda(theta_j)

Penalized columns are standardized to unit sample variance before fitting
(the penalty acts on the standardized coefficients) and the coefficients are
mapped back afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import _cd
from .exceptions import InvalidArgument, InvalidResponse, NumericalError

_KIND_CODE = {"lasso": _cd.LASSO, "mcp": _cd.MCP, "scad": _cd.SCAD}
_DEFAULT_GAMMA = {"lasso": 0.0, "mcp": 3.0, "scad": 3.7}


@dataclass(frozen=True)
class PenaltySpec:
    kind: Literal["lasso", "mcp", "scad"] = "mcp"
    lam: float = 0.0
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise InvalidArgument(f"unknown penalty {self.kind!r}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", _DEFAULT_GAMMA[self.kind])
        if self.lam < 0:
            raise InvalidArgument("lambda must be nonnegative")
        if self.kind == "mcp" and not self.gamma > 1:
            raise InvalidArgument("MCP needs gamma > 1")
        if self.kind == "scad" and not self.gamma > 2:
            raise InvalidArgument("SCAD needs gamma > 2")

    @property
    def code(self) -> int:
        return _KIND_CODE[self.kind]

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.kind, float(lam), self.gamma)


@dataclass(frozen=True)
class GlmFamily:
    kind: Literal["gaussian", "logistic"] = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "logistic"):
            raise InvalidArgument(f"unknown family {self.kind!r}")

    @property
    def curvature_bound(self) -> float:
        """Upper bound on b''."""
        return 1.0 if self.kind == "gaussian" else 0.25

    def b(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.kind == "gaussian":
            return 0.5 * eta * eta
        return np.logaddexp(0.0, eta)

    def mean(self, eta):
        """b'(eta)."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "gaussian":
            return eta
        return 1.0 / (1.0 + np.exp(-eta))

    def variance(self, eta):
        """b''(eta)."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "gaussian":
            return np.ones_like(eta)
        mu = self.mean(eta)
        return mu * (1 - mu)

    def check_response(self, y: np.ndarray) -> None:
        if self.kind == "logistic" and not np.all((y == 0) | (y == 1)):
            raise InvalidResponse("logistic responses must be 0 or 1")

    def deviance(self, y, eta) -> float:
        """Mean validation loss: squared error or binomial deviance."""
        y = np.asarray(y, dtype=float)
        if self.kind == "gaussian":
            return float(np.mean((y - eta) ** 2))
        return float(2 * np.mean(-y * eta + self.b(eta)))


@dataclass(frozen=True)
class DesignMatrix:
    """Regression design with a per-column penalty mask and role labels."""

    data: np.ndarray
    penalize: np.ndarray
    roles: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.data, dtype=float)
        if x.ndim != 2:
            raise InvalidArgument("design must be a 2-d array")
        mask = np.asarray(self.penalize, dtype=bool)
        if mask.shape != (x.shape[1],):
            raise InvalidArgument("penalty mask length must equal the number of columns")
        roles = tuple(self.roles) if self.roles else ("x",) * x.shape[1]
        if len(roles) != x.shape[1]:
            raise InvalidArgument("one role label per column")
        if roles.count("intercept") > 1:
            raise InvalidArgument("at most one intercept column")
        object.__setattr__(self, "data", x)
        object.__setattr__(self, "penalize", mask)
        object.__setattr__(self, "roles", roles)

    @classmethod
    def plain(cls, X, intercept: bool = False, penalize_intercept: bool = False) -> "DesignMatrix":
        X = np.asarray(X, dtype=float)
        if not intercept:
            return cls(X, np.ones(X.shape[1], dtype=bool))
        data = np.column_stack([np.ones(X.shape[0]), X])
        mask = np.r_[penalize_intercept, np.ones(X.shape[1], dtype=bool)]
        return cls(data, mask, ("intercept",) + ("x",) * X.shape[1])

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def rows(self, idx) -> "DesignMatrix":
        return DesignMatrix(self.data[idx], self.penalize, self.roles)


@dataclass
class FitResult:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    lam: float
    trace: np.ndarray | None = None
    lambda_path: list["FitResult"] | None = None


def penalty_value(spec: PenaltySpec, t) -> float | np.ndarray:
    a = np.abs(np.asarray(t, dtype=float))
    lam, gam = spec.lam, spec.gamma
    if spec.kind == "lasso":
        out = lam * a
    elif spec.kind == "mcp":
        out = np.where(a <= gam * lam, lam * a - a * a / (2 * gam), 0.5 * gam * lam * lam)
    else:
        mid = (2 * gam * lam * a - a * a - lam * lam) / (2 * (gam - 1))
        out = np.where(a <= lam, lam * a,
                       np.where(a <= gam * lam, mid, 0.5 * lam * lam * (gam + 1)))
    return float(out) if out.ndim == 0 else out


def prox(spec: PenaltySpec, z: float, step: float) -> float:
    """argmin_t (t - z)^2 / (2 step) + penalty(t), by closed form per region."""
    if not step > 0:
        raise InvalidArgument("step must be positive")
    return float(_cd.prox_scalar(spec.code, float(z), float(step), spec.lam, spec.gamma))


def _as_design(X) -> DesignMatrix:
    return X if isinstance(X, DesignMatrix) else DesignMatrix.plain(X)


def glm_loss(y, X, theta, family: GlmFamily = GlmFamily()) -> tuple[float, np.ndarray]:
    """Unpenalized loss ``(1/n) sum [-y eta + b(eta)]`` and its gradient."""
    X = _as_design(X).data
    y = np.asarray(y, dtype=float)
    family.check_response(y)
    eta = X @ np.asarray(theta, dtype=float)
    n = y.size
    value = float(np.sum(-y * eta + family.b(eta)) / n)
    grad = X.T @ (family.mean(eta) - y) / n
    return value, grad


@dataclass
class _Prepared:
    Xs: np.ndarray
    scale: np.ndarray
    curv: np.ndarray
    pen: np.ndarray


def _prepare(design: DesignMatrix, standardize: bool) -> _Prepared:
    X = design.data
    scale = np.ones(design.d)
    if standardize:
        sd = X.std(axis=0)
        use = design.penalize & (np.array(design.roles) != "intercept") & (sd > 1e-12)
        scale[use] = sd[use]
    Xs = np.asfortranarray(X / scale)
    curv = np.einsum("ij,ij->j", Xs, Xs) / X.shape[0]
    return _Prepared(Xs, scale, curv, design.penalize.copy())


def _run(prep: _Prepared, y, family: GlmFamily, spec: PenaltySpec, theta0,
         tol: float, max_iter: int):
    theta = np.array(theta0, dtype=float, copy=True)
    trace = np.empty(max_iter)
    if family.kind == "gaussian":
        it, conv, _ = _cd.cd_gaussian(prep.Xs, y, theta, prep.pen, prep.curv, spec.code,
                                      spec.lam, spec.gamma, tol, max_iter, trace)
    else:
        it, conv, _ = _cd.cd_logistic(prep.Xs, y, theta, prep.pen, prep.curv, spec.code,
                                      spec.lam, spec.gamma, tol, max_iter, trace)
    trace = trace[:it]
    if not np.all(np.isfinite(theta)) or (it and not np.isfinite(trace[-1])):
        raise NumericalError("coordinate descent produced a non-finite objective")
    return theta, int(it), bool(conv), trace


def fit_penalized(y, X, family: GlmFamily = GlmFamily(), spec: PenaltySpec = PenaltySpec(),
                  tol: float = 1e-7, max_iter: int = 10000, standardize: bool = True,
                  theta0=None) -> FitResult:
    """Penalized (G)LM by cyclic coordinate descent.

    Non-convergence is reported through ``converged=False``, not raised.
    The returned ``objective`` is on the standardized coefficient scale.
    """
    design = _as_design(X)
    y = np.asarray(y, dtype=float)
    family.check_response(y)
    if y.shape != (design.n,):
        raise InvalidArgument("y length must match the design rows")
    prep = _prepare(design, standardize)
    start = np.zeros(design.d) if theta0 is None else np.asarray(theta0) * prep.scale
    theta_s, it, conv, trace = _run(prep, y, family, spec, start, tol, max_iter)
    obj = float(trace[-1]) if it else float("nan")
    return FitResult(theta_s / prep.scale, obj, it, conv, spec.lam, trace)


def _null_gradient(prep: _Prepared, y, family: GlmFamily, tol: float, max_iter: int) -> np.ndarray:
    """Gradient of the loss at the fit that uses only unpenalized columns."""
    free = ~prep.pen
    theta = np.zeros(prep.Xs.shape[1])
    if free.any():
        sub = _Prepared(np.asfortranarray(prep.Xs[:, free]), prep.scale[free],
                        prep.curv[free], np.zeros(free.sum(), dtype=bool))
        th, _, _, _ = _run(sub, y, family, PenaltySpec("lasso", 0.0), np.zeros(free.sum()),
                           tol, max_iter)
        theta[free] = th
    eta = prep.Xs @ theta
    return prep.Xs.T @ (family.mean(eta) - y) / y.size


def lambda_max(y, X, family: GlmFamily = GlmFamily(), standardize: bool = True) -> float:
    """Smallest lambda at which every penalized coefficient is zero."""
    design = _as_design(X)
    prep = _prepare(design, standardize)
    grad = _null_gradient(prep, np.asarray(y, dtype=float), family, 1e-10, 10000)
    if not prep.pen.any():
        return 0.0
    # the relative margin absorbs rounding between this gradient and the solver's
    return float(np.max(np.abs(grad[prep.pen])) * (1 + 1e-10))


def lambda_grid(lam_max: float, n_lambda: int = 50, ratio: float = 1e-3) -> np.ndarray:
    if n_lambda < 1:
        raise InvalidArgument("n_lambda must be at least 1")
    lam_max = max(lam_max, 1e-10)
    if n_lambda == 1:
        return np.array([lam_max])
    return lam_max * ratio ** (np.arange(n_lambda) / (n_lambda - 1))


def lambda_path(y, X, family: GlmFamily = GlmFamily(), spec: PenaltySpec = PenaltySpec(),
                n_lambda: int = 50, ratio: float = 1e-3, lambdas: Sequence[float] | None = None,
                tol: float = 1e-7, max_iter: int = 10000, standardize: bool = True) -> list[FitResult]:
    """Warm-started fits over a decreasing geometric lambda grid."""
    design = _as_design(X)
    y = np.asarray(y, dtype=float)
    family.check_response(y)
    prep = _prepare(design, standardize)
    if lambdas is None:
        lam_max = lambda_max(y, design, family, standardize)
        lambdas = lambda_grid(lam_max, n_lambda, ratio)
    fits = []
    theta = np.zeros(design.d)
    for lam in lambdas:
        s = spec.with_lambda(lam)
        theta, it, conv, trace = _run(prep, y, family, s, theta, tol, max_iter)
        obj = float(trace[-1]) if it else float("nan")
        fits.append(FitResult(theta / prep.scale, obj, it, conv, float(lam)))
    return fits


@dataclass
class CVResult:
    lam: float
    index: int
    lambdas: np.ndarray
    errors: np.ndarray
    fold_errors: np.ndarray = field(repr=False, default=None)


def _splits(n: int, scheme: str, k: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    if scheme == "kfold":
        if k < 2 or n < 3 * k:
            raise InvalidArgument(f"{k}-fold CV needs k >= 2 and n >= {3 * k}")
        folds = np.array_split(perm, k)
        return [(np.setdiff1d(perm, f), f) for f in folds]
    third = n // 3
    if third < 1 or n - third < 1:
        raise InvalidArgument("holdout needs at least 3 observations")
    if scheme == "holdout_third":
        return [(perm[:third], perm[third:])]
    if scheme == "validate_third":
        return [(perm[third:], perm[:third])]
    raise InvalidArgument(f"unknown CV scheme {scheme!r}")


def cross_validate(y, X, family: GlmFamily = GlmFamily(), spec: PenaltySpec = PenaltySpec(),
                   scheme: Literal["kfold", "holdout_third", "validate_third"] = "kfold",
                   k: int = 5, seed: int | np.random.Generator | None = 0,
                   lambdas: Sequence[float] | None = None, n_lambda: int = 50,
                   ratio: float = 1e-3, tol: float = 1e-7, max_iter: int = 10000,
                   standardize: bool = True) -> CVResult:
    """Choose lambda by out-of-sample deviance; ties go to the larger lambda.

    ``holdout_third`` fits on a random ``n // 3`` subset and scores the rest;
    ``validate_third`` fits on the complement of such a subset and scores it.
    """
    design = _as_design(X)
    y = np.asarray(y, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if lambdas is None:
        lambdas = lambda_grid(lambda_max(y, design, family, standardize), n_lambda, ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    splits = _splits(design.n, scheme, k, rng)
    errs = np.empty((len(splits), lambdas.size))
    weights = np.empty(len(splits))
    for s, (train, test) in enumerate(splits):
        if train.size == 0 or test.size == 0:
            raise InvalidArgument("empty fold")
        fits = lambda_path(y[train], design.rows(train), family, spec, lambdas=lambdas,
                           tol=tol, max_iter=max_iter, standardize=standardize)
        Xt = design.data[test]
        for j, f in enumerate(fits):
            errs[s, j] = family.deviance(y[test], Xt @ f.theta)
        weights[s] = test.size
    mean_err = weights @ errs / weights.sum()
    best = np.min(mean_err)
    idx = int(np.flatnonzero(mean_err <= best + 1e-12 * max(abs(best), 1.0))[0])
    return CVResult(float(lambdas[idx]), idx, lambdas, mean_err, errs)


def project_out(F, targets):
    """Residualize ``targets`` on the column space of ``F`` by least squares."""
    F = np.asarray(F, dtype=float)
    T = np.asarray(targets, dtype=float)
    if F.size == 0 or F.shape[1] == 0:
        return T.copy()
    coef, *_ = np.linalg.lstsq(F, T, rcond=None)
    return T - F @ coef
