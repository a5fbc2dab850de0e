"""Factor-augmented sparse selection of functional covariates.

Pipeline: center curves, per-covariate FPCA scores, factor decomposition of
the stacked scores, then a penalized fit on the idiosyncratic part.  Two
estimation routes are available:

``projection_linear``
    Residualize the response and ``U`` on the factors and run a penalized
    least squares fit on the residuals (Gaussian only).
``glm_augmented``
    Penalized GLM on the augmented design ``[1, U, F]`` with the factor
    coefficients left unpenalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .exceptions import GridMismatch, InvalidArgument, ShapeMismatch
from .factors import (
    FactorDecomposition,
    FactorSelectionConfig,
    ScoreMatrix,
    assemble_scores,
    estimate_factors,
    select_num_factors,
)
from .fda import (
    EigenSystem,
    FunctionalSample,
    Grid,
    center_sample,
    compute_scores,
    fpca,
    sample_covariance,
)
from .penalized import (
    CVResult,
    DesignMatrix,
    GlmFamily,
    PenaltySpec,
    cross_validate,
    lambda_grid,
    lambda_max,
    lambda_path,
    project_out,
)

Path = Literal["projection_linear", "glm_augmented"]
CVScheme = Literal["kfold", "holdout_third", "validate_third"]


@dataclass(frozen=True)
class FfasmConfig:
    """Settings for :func:`fit_ffasm`.

    ``n_components`` fixes every truncation level; when ``None`` each
    covariate keeps the components reaching ``fve_threshold``.  A fixed factor
    count of 0 switches the augmentation off.  ``lam`` skips cross-validation.
    """

    n_components: int | None = None
    fve_threshold: float = 0.95
    factors: FactorSelectionConfig = FactorSelectionConfig()
    penalty: PenaltySpec = PenaltySpec("mcp")
    family: GlmFamily = GlmFamily("gaussian")
    path: Path = "projection_linear"
    cv: CVScheme = "kfold"
    cv_folds: int = 5
    n_lambda: int = 50
    lambda_ratio: float = 1e-3
    lam: float | None = None
    penalize_intercept: bool = True
    standardize: bool = True
    selection_threshold: float = 0.0
    tol: float = 1e-7
    max_iter: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.path == "projection_linear" and self.family.kind != "gaussian":
            raise InvalidArgument("the projection path needs the gaussian family")
        if self.path not in ("projection_linear", "glm_augmented"):
            raise InvalidArgument(f"unknown path {self.path!r}")

    def to_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "fve_threshold": self.fve_threshold,
            "factors": {"method": self.factors.method, "k_max": self.factors.k_max,
                        "c_n": self.factors.c_n, "k": self.factors.k},
            "penalty": {"kind": self.penalty.kind, "gamma": self.penalty.gamma},
            "family": self.family.kind,
            "path": self.path,
            "cv": self.cv,
            "cv_folds": self.cv_folds,
            "n_lambda": self.n_lambda,
            "lambda_ratio": self.lambda_ratio,
            "lam": self.lam,
            "penalize_intercept": self.penalize_intercept,
            "standardize": self.standardize,
            "selection_threshold": self.selection_threshold,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FfasmConfig":
        d = dict(d)
        kw = {}
        if "factors" in d:
            kw["factors"] = FactorSelectionConfig(**d.pop("factors"))
        if "penalty" in d:
            kw["penalty"] = PenaltySpec(**d.pop("penalty"))
        if "family" in d:
            kw["family"] = GlmFamily(d.pop("family"))
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw, **d)


@dataclass(frozen=True)
class FunctionalScores:
    """Centering, eigensystems and stacked scores of a training sample."""

    grid: Grid
    mean_curves: np.ndarray
    eigensystems: tuple[EigenSystem, ...]
    scores: ScoreMatrix
    score_means: np.ndarray

    def transform(self, sample: FunctionalSample) -> np.ndarray:
        """Stacked scores of new curves, centered like the training scores."""
        if not sample.grid.same_as(self.grid):
            raise GridMismatch("new sample is on a different grid")
        if sample.G != len(self.eigensystems):
            raise ShapeMismatch("new sample has a different number of covariates")
        centered = FunctionalSample(sample.grid, sample.values - self.mean_curves, True)
        blocks = [compute_scores(centered, es) for es in self.eigensystems]
        return np.hstack(blocks) - self.score_means


def functional_scores(sample: FunctionalSample, n_components: int | None = None,
                      fve_threshold: float = 0.95) -> FunctionalScores:
    centered, mean = center_sample(sample)
    systems, blocks = [], []
    for g in range(sample.G):
        es = fpca(sample_covariance(centered, g), sample.grid, n_components,
                  fve_threshold, covariate=g)
        systems.append(es)
        blocks.append(compute_scores(centered, es))
    raw = np.hstack(blocks)
    A = assemble_scores(blocks, list(range(sample.G)))
    return FunctionalScores(sample.grid, mean, tuple(systems), A, raw.mean(axis=0))


@dataclass
class FfasmFit:
    method: str
    beta0: float
    H: np.ndarray
    gamma: np.ndarray | None
    beta_curves: np.ndarray
    selected: frozenset
    eigensystems: tuple[EigenSystem, ...]
    grid: Grid
    mean_curves: np.ndarray
    score_means: np.ndarray
    y_mean: float
    lam: float
    K: int
    truncations: tuple[int, ...]
    family: GlmFamily = GlmFamily()
    path: str = "projection_linear"
    decomposition: FactorDecomposition | None = None
    loadings: np.ndarray | None = None
    cv: CVResult | None = None
    config: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def model_size(self) -> int:
        return len(self.selected)

    def eta_blocks(self) -> list[np.ndarray]:
        out, off = [], 0
        for m in self.truncations:
            out.append(self.H[off:off + m])
            off += m
        return out


def reconstruct_beta(H, eigensystems: Sequence[EigenSystem]) -> np.ndarray:
    """Coefficient curves ``sum_j eta_j^(g) gamma_j^(g)(t)``, shape ``(G, n_grid)``."""
    H = np.asarray(H, dtype=float)
    widths = [es.truncation for es in eigensystems]
    if H.shape != (sum(widths),):
        raise ShapeMismatch(f"H has length {H.size}, eigensystems need {sum(widths)}")
    n_grid = len(eigensystems[0].grid)
    curves = np.zeros((len(eigensystems), n_grid))
    off = 0
    for g, (es, w) in enumerate(zip(eigensystems, widths)):
        curves[g] = H[off:off + w] @ es.eigenfunctions
        off += w
    return curves


def selected_covariates(H, truncations: Sequence[int], threshold: float = 0.0) -> frozenset:
    """Covariates with at least one coefficient above ``threshold`` in size."""
    H = np.asarray(H)
    out, off = set(), 0
    for g, w in enumerate(truncations):
        if np.any(np.abs(H[off:off + w]) > threshold):
            out.add(g)
        off += w
    return frozenset(out)


def choose_lambda_and_fit(y, design: DesignMatrix, cfg: FfasmConfig, family: GlmFamily):
    """Cross-validate (unless ``cfg.lam`` is set) and fit on all rows.

    Returns ``(theta, lam, cv_result)``.
    """
    spec = cfg.penalty
    kw = dict(tol=cfg.tol, max_iter=cfg.max_iter, standardize=cfg.standardize)
    if cfg.lam is not None:
        fits = lambda_path(y, design, family, spec, lambdas=[cfg.lam], **kw)
        return fits[0].theta, float(cfg.lam), None
    lambdas = lambda_grid(lambda_max(y, design, family, cfg.standardize),
                          cfg.n_lambda, cfg.lambda_ratio)
    cv = cross_validate(y, design, family, spec, scheme=cfg.cv, k=cfg.cv_folds,
                        seed=cfg.seed, lambdas=lambdas, **kw)
    fits = lambda_path(y, design, family, spec, lambdas=lambdas[:cv.index + 1], **kw)
    return fits[-1].theta, cv.lam, cv


def _resolve_k(A: ScoreMatrix, cfg: FfasmConfig, notes: list[str]) -> int:
    fc = cfg.factors
    if fc.method == "fixed":
        if fc.k is None:
            raise InvalidArgument("fixed factor selection needs k")
        return int(fc.k)
    k = select_num_factors(A, fc)
    if k < 1:
        msg = "factor selection returned 0 factors; using 1"
        warnings.warn(msg)
        notes.append(msg)
        k = 1
    return k


def fit_ffasm(sample: FunctionalSample, y, cfg: FfasmConfig = FfasmConfig(),
              scores: FunctionalScores | None = None) -> FfasmFit:
    y = np.asarray(y, dtype=float)
    if y.shape != (sample.n,):
        raise ShapeMismatch("response length does not match the number of subjects")
    cfg.family.check_response(y)
    fs = scores if scores is not None else functional_scores(
        sample, cfg.n_components, cfg.fve_threshold)
    A = fs.scores
    notes: list[str] = []
    K = _resolve_k(A, cfg, notes)
    if K > 0:
        dec = estimate_factors(A, K)
        F, U = dec.F, dec.U
    else:
        dec, F, U = None, np.zeros((A.n, 0)), A.data
    p = A.p
    y_mean = float(y.mean())
    if cfg.path == "projection_linear":
        if K >= A.n:
            raise InvalidArgument("the projection path needs n > K")
        y_t = project_out(F, y - y_mean)
        U_t = project_out(F, U)
        H, lam, cv = choose_lambda_and_fit(y_t, DesignMatrix.plain(U_t), cfg, cfg.family)
        beta0 = y_mean
        # least-squares factor coefficients; F'F/n = I and F'U = 0
        gamma = F.T @ (y - y_mean) / A.n if K > 0 else None
    else:
        data = np.column_stack([np.ones(A.n), U, F])
        mask = np.r_[cfg.penalize_intercept, np.ones(p, bool), np.zeros(K, bool)]
        roles = ("intercept",) + ("u",) * p + ("f",) * K
        theta, lam, cv = choose_lambda_and_fit(y, DesignMatrix(data, mask, roles), cfg, cfg.family)
        beta0, H, gamma = float(theta[0]), theta[1:p + 1], theta[p + 1:]
    truncs = tuple(es.truncation for es in fs.eigensystems)
    return FfasmFit(
        method="ffasm",
        beta0=beta0,
        H=np.asarray(H, dtype=float),
        gamma=gamma,
        beta_curves=reconstruct_beta(H, fs.eigensystems),
        selected=selected_covariates(H, truncs, cfg.selection_threshold),
        eigensystems=fs.eigensystems,
        grid=fs.grid,
        mean_curves=fs.mean_curves,
        score_means=fs.score_means,
        y_mean=y_mean,
        lam=float(lam),
        K=K,
        truncations=truncs,
        family=cfg.family,
        path=cfg.path,
        decomposition=dec,
        loadings=None if dec is None else dec.B,
        cv=cv,
        config=cfg.to_dict(),
        warnings=notes,
    )


def _new_scores(fit: FfasmFit, sample: FunctionalSample) -> np.ndarray:
    fs = FunctionalScores(fit.grid, fit.mean_curves, fit.eigensystems, None, fit.score_means)
    return fs.transform(sample)


def _split_factors(fit: FfasmFit, A_new: np.ndarray):
    B = fit.loadings
    f_new = np.linalg.solve(B.T @ B, (A_new @ B).T).T
    return f_new, A_new - f_new @ B.T


def predict(fit: FfasmFit, new_sample: FunctionalSample, *,
            factor_adjusted: bool = False) -> np.ndarray:
    """Predicted responses (probabilities for the logistic family).

    Parameters
    ----------
    fit : FfasmFit
    new_sample : FunctionalSample
        Curves on the training grid.
    factor_adjusted : bool
        Projection route only.  By default the prediction is the plug-in
        ``y_mean + sum_g int beta_g (X_g - mu_g)``, whose factor component is
        ``F B' H``.  When true, new scores are split into factors and
        idiosyncratic parts and the factor component uses the least-squares
        factor coefficients instead.  This is far more stable when the
        selected ``H`` misses part of the signal, because the factors carry
        most of the response variance.  The augmented-GLM route always
        predicts this way.
    """
    A_new = _new_scores(fit, new_sample)
    has_factors = fit.loadings is not None and fit.loadings.shape[1] > 0
    if fit.path == "glm_augmented":
        if has_factors:
            f_new, u_new = _split_factors(fit, A_new)
            eta = fit.beta0 + u_new @ fit.H + f_new @ fit.gamma
        else:
            eta = fit.beta0 + A_new @ fit.H
        return fit.family.mean(eta)
    if factor_adjusted and has_factors:
        f_new, u_new = _split_factors(fit, A_new)
        return fit.y_mean + u_new @ fit.H + f_new @ fit.gamma
    return fit.y_mean + A_new @ fit.H
