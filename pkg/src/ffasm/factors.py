"""Stacked score matrix and its latent factor decomposition.

The stacked scores ``A`` (``n x p``) are split as ``A = F B^T + U`` where the
columns of ``F / sqrt(n)`` are the top eigenvectors of ``A A^T`` and
``B = A^T F / n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import orthogonal_procrustes, subspace_angles

from .exceptions import (
    DegenerateSpectrum,
    InvalidArgument,
    NumericalError,
    ShapeMismatch,
)


@dataclass(frozen=True)
class ScoreMatrix:
    """Column-stacked score blocks; ``blocks`` holds ``(covariate, offset, width)``."""

    data: np.ndarray
    blocks: tuple[tuple[int, int, int], ...]
    centered: bool = True

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def block_of(self, column: int) -> tuple[int, range]:
        """Covariate label and column range owning ``column``."""
        for g, off, width in self.blocks:
            if off <= column < off + width:
                return g, range(off, off + width)
        raise IndexError(column)

    def block_slices(self) -> list[slice]:
        return [slice(off, off + w) for _, off, w in self.blocks]


@dataclass(frozen=True)
class FactorDecomposition:
    K: int
    F: np.ndarray
    B: np.ndarray
    U: np.ndarray
    eigenvalues: np.ndarray

    def factors_for(self, scores: np.ndarray) -> np.ndarray:
        """Factor values for new score rows, ``scores B (B^T B)^{-1}``."""
        gram = self.B.T @ self.B
        return np.linalg.solve(gram, (np.asarray(scores) @ self.B).T).T


@dataclass(frozen=True)
class FactorSelectionConfig:
    """How the number of factors is chosen.

    ``k_max=None`` resolves to ``min(p // 2, n // 2, 15)``.
    """

    method: Literal["ratio", "ic", "pc", "fixed"] = "ratio"
    k_max: int | None = None
    c_n: float = 0.0
    k: int | None = None

    def resolve_k_max(self, n: int, p: int) -> int:
        k_max = self.k_max if self.k_max is not None else min(p // 2, n // 2, 15)
        k_max = max(int(k_max), 1)
        if k_max >= min(n, p):
            raise InvalidArgument(f"k_max={k_max} must be below min(n, p)={min(n, p)}")
        return k_max


def assemble_scores(blocks: Sequence[np.ndarray], covariates: Sequence[int] | None = None,
                    center: bool = True) -> ScoreMatrix:
    """Stack per-covariate score blocks column-wise, covariate by covariate."""
    mats = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not mats:
        raise InvalidArgument("no score blocks given")
    n = mats[0].shape[0]
    if any(m.shape[0] != n for m in mats):
        raise ShapeMismatch("score blocks disagree on the number of subjects")
    covariates = list(range(len(mats))) if covariates is None else list(covariates)
    if len(set(covariates)) != len(covariates) or len(covariates) != len(mats):
        raise InvalidArgument("covariate labels must be distinct, one per block")
    layout, off = [], 0
    for g, m in zip(covariates, mats):
        layout.append((g, off, m.shape[1]))
        off += m.shape[1]
    data = np.hstack(mats)
    if center:
        data = data - data.mean(axis=0)
    return ScoreMatrix(data, tuple(layout), center)


def _as_array(A) -> np.ndarray:
    return A.data if isinstance(A, ScoreMatrix) else np.asarray(A, dtype=float)


def gram_eigen(A) -> tuple[np.ndarray, np.ndarray, str]:
    """Descending eigenpairs of the smaller Gram matrix of ``A``.

    Returns ``(eigenvalues, eigenvectors, side)``; ``side`` is ``"p"`` for
    ``A^T A`` and ``"n"`` for ``A A^T``.  The nonzero eigenvalues coincide.
    """
    a = _as_array(A)
    n, p = a.shape
    side = "p" if p <= n else "n"
    gram = a.T @ a if side == "p" else a @ a.T
    try:
        vals, vecs = np.linalg.eigh((gram + gram.T) / 2)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    return np.clip(vals[::-1], 0.0, None), vecs[:, ::-1], side


def estimate_factors(A, K: int) -> FactorDecomposition:
    """Principal-component estimate of ``K`` factors, loadings and idiosyncratics."""
    a = _as_array(A)
    n, p = a.shape
    if not 1 <= K <= min(n, p):
        raise InvalidArgument(f"K={K} outside [1, {min(n, p)}]")
    vals, vecs, side = gram_eigen(a)
    if side == "n":
        u = vecs[:, :K]
    else:
        if np.any(vals[:K] <= 0):
            raise NumericalError("requested more factors than the rank of A")
        u = a @ vecs[:, :K] / np.sqrt(vals[:K])
        # re-orthonormalise to remove rounding drift
        u, _ = np.linalg.qr(u)
    F = np.sqrt(n) * u
    idx = np.argmax(np.abs(F), axis=0)
    signs = np.sign(F[idx, np.arange(K)])
    F = F * np.where(signs == 0, 1.0, signs)
    B = a.T @ F / n
    U = a - F @ B.T
    k_keep = min(vals.size, max(K, 15))
    return FactorDecomposition(K, F, B, U, vals[:k_keep] / n)


def _spectrum(A, needed: int) -> np.ndarray:
    vals, _, _ = gram_eigen(A)
    if vals.size < needed:
        vals = np.concatenate([vals, np.zeros(needed - vals.size)])
    return vals


def ratio_statistics(A, cfg: FactorSelectionConfig = FactorSelectionConfig()) -> np.ndarray:
    """``(lambda_{k+1} + C_n) / (lambda_k + C_n)`` for ``k = 1..k_max``."""
    a = _as_array(A)
    k_max = cfg.resolve_k_max(*a.shape)
    vals = _spectrum(a, k_max + 1)
    if vals[0] <= 0:
        raise DegenerateSpectrum("A^T A has no positive eigenvalue")
    num = vals[1:k_max + 1] + cfg.c_n
    den = vals[:k_max] + cfg.c_n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return ratios


def select_num_factors_ratio(A, cfg: FactorSelectionConfig = FactorSelectionConfig()) -> int:
    """Eigenvalue-ratio estimate of the number of factors (smallest k on ties)."""
    return int(np.argmin(ratio_statistics(A, cfg)) + 1)


def information_criteria(A, cfg: FactorSelectionConfig = FactorSelectionConfig()) -> dict:
    """IC and PC values for ``k = 1..k_max``.

    ``V(k)`` is the mean squared residual after removing ``k`` principal
    components; the penalty is ``k (n+p)/(np) log(np/(n+p))``.
    """
    a = _as_array(A)
    n, p = a.shape
    k_max = cfg.resolve_k_max(n, p)
    vals = _spectrum(a, k_max + 1)
    if vals[0] <= 0:
        raise DegenerateSpectrum("A^T A has no positive eigenvalue")
    total = float(np.sum(a * a))
    ks = np.arange(1, k_max + 1)
    v = np.clip(total - np.cumsum(vals)[:k_max], 0.0, None) / (n * p)
    penalty = ks * (n + p) / (n * p) * np.log(n * p / (n + p))
    ic = np.log(np.maximum(v, 1e-300)) + penalty
    pc = v + v[-1] * penalty
    return {"k": ks, "V": v, "ic": ic, "pc": pc}


def select_num_factors_ic(A, cfg: FactorSelectionConfig = FactorSelectionConfig(),
                          criterion: Literal["ic", "pc"] = "ic") -> int:
    crit = information_criteria(A, cfg)[criterion]
    return int(np.argmin(crit) + 1)


def select_num_factors(A, cfg: FactorSelectionConfig) -> int:
    if cfg.method == "fixed":
        if cfg.k is None:
            raise InvalidArgument("fixed factor selection needs k")
        return int(cfg.k)
    if cfg.method == "ratio":
        return select_num_factors_ratio(A, cfg)
    if cfg.method in ("ic", "pc"):
        return select_num_factors_ic(A, cfg, cfg.method)
    raise InvalidArgument(f"unknown factor selection method {cfg.method!r}")


def align_factors(F_hat: np.ndarray, F_true: np.ndarray) -> np.ndarray:
    """Rotate ``F_hat`` onto ``F_true`` by orthogonal Procrustes."""
    R, _ = orthogonal_procrustes(F_hat, F_true)
    return F_hat @ R


def principal_angles(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Principal angles (radians) between the column spaces of X and Y."""
    return subspace_angles(np.atleast_2d(X), np.atleast_2d(Y))
