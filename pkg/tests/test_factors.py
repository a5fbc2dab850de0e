import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from ffasm.exceptions import DegenerateSpectrum, InvalidArgument, ShapeMismatch
from ffasm.factors import (
    FactorSelectionConfig,
    assemble_scores,
    estimate_factors,
    information_criteria,
    principal_angles,
    ratio_statistics,
    select_num_factors_ic,
    select_num_factors_ratio,
)
from ffasm.model import functional_scores
from ffasm.simulate import ScenarioConfig, gen_scenario1, replication_rng


def _with_spectrum(vals, n, seed=0):
    """n x p matrix whose A^T A has exactly the given eigenvalues."""
    rng = np.random.default_rng(seed)
    p = len(vals)
    Q, _ = np.linalg.qr(rng.normal(size=(n, p)))
    V = ortho_group.rvs(p, random_state=seed)
    return Q @ np.diag(np.sqrt(vals)) @ V.T


# ------------------------------------------------------------------ assemble

def test_assemble_offsets_and_lookup():
    rng = np.random.default_rng(0)
    A = assemble_scores([rng.normal(size=(6, 2)), rng.normal(size=(6, 3))])
    assert A.p == 5
    assert [b[1] for b in A.blocks] == [0, 2]
    assert np.allclose(A.data.mean(axis=0), 0, atol=1e-12)


def test_assemble_single_block_equals_centered_input():
    x = np.arange(12.0).reshape(4, 3) ** 1.5
    A = assemble_scores([x])
    assert np.allclose(A.data, x - x.mean(axis=0))


def test_block_lookup_roundtrip():
    rng = np.random.default_rng(1)
    widths = [3, 1, 4]
    A = assemble_scores([rng.normal(size=(5, w)) for w in widths], covariates=[0, 1, 2])
    off = 0
    for g, w in enumerate(widths):
        for c in range(off, off + w):
            gg, cols = A.block_of(c)
            assert gg == g and cols == range(off, off + w)
        off += w


def test_assemble_row_mismatch():
    with pytest.raises(ShapeMismatch):
        assemble_scores([np.zeros((4, 2)), np.zeros((5, 2))])


# ------------------------------------------------------------------ estimate_factors

def test_rank_one_recovery():
    rng = np.random.default_rng(3)
    n = 30
    f = rng.normal(size=n)
    f = (f - f.mean()) / np.sqrt(np.mean((f - f.mean()) ** 2))  # |f|^2 = n
    b = rng.normal(size=8)
    dec = estimate_factors(np.outer(f, b), 1)
    assert min(np.max(np.abs(dec.F[:, 0] - f)), np.max(np.abs(dec.F[:, 0] + f))) < 1e-8
    assert np.max(np.abs(dec.U)) < 1e-8


@pytest.mark.parametrize("shape", [(20, 6), (6, 20)])
def test_full_rank_reconstruction(shape):
    rng = np.random.default_rng(5)
    A = rng.normal(size=shape)
    dec = estimate_factors(A, min(shape))
    assert np.linalg.norm(dec.U) < 1e-8 * np.linalg.norm(A)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(5, 40), p=st.integers(5, 40), k=st.integers(1, 4),
       seed=st.integers(0, 10_000))
def test_decomposition_identities(n, p, k, seed):
    A = np.random.default_rng(seed).normal(size=(n, p))
    A -= A.mean(axis=0)
    dec = estimate_factors(A, k)
    scale = np.linalg.norm(A)
    assert np.allclose(dec.F.T @ dec.F / n, np.eye(k), atol=1e-8)
    assert np.max(np.abs(dec.U.T @ dec.F)) < 1e-8 * max(scale, 1)
    assert np.max(np.abs(A - dec.F @ dec.B.T - dec.U)) < 1e-10 * max(scale, 1)
    for col in dec.F.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_routes_agree_on_subspace():
    rng = np.random.default_rng(8)
    A = rng.normal(size=(12, 30))
    wide = estimate_factors(A, 3)
    tall = estimate_factors(A.T, 3)
    # the factor space of A is the loading space of A^T
    assert np.max(principal_angles(wide.F, tall.B)) < 1e-6


def test_k_out_of_range():
    with pytest.raises(InvalidArgument):
        estimate_factors(np.ones((4, 3)), 4)
    with pytest.raises(InvalidArgument):
        estimate_factors(np.ones((4, 3)), 0)


# ------------------------------------------------------------------ ratio criterion

def test_ratio_example_spectrum():
    A = _with_spectrum([100, 90, 1, 0.9, 0.8], n=10)
    cfg = FactorSelectionConfig("ratio", k_max=4)
    r = ratio_statistics(A, cfg)
    assert np.allclose(r, [0.9, 1 / 90, 0.9, 0.8 / 0.9], atol=1e-10)
    assert select_num_factors_ratio(A, cfg) == 2


def test_ratio_degenerate_spectrum():
    with pytest.raises(DegenerateSpectrum):
        select_num_factors_ratio(np.zeros((10, 6)), FactorSelectionConfig(k_max=2))


def test_ratio_single_dominant_factor():
    rng = np.random.default_rng(2)
    A = np.outer(rng.normal(size=50), rng.normal(size=12)) + 1e-3 * rng.normal(size=(50, 12))
    assert select_num_factors_ratio(A) == 1


def test_k_max_validation():
    with pytest.raises(InvalidArgument):
        FactorSelectionConfig(k_max=10).resolve_k_max(10, 20)
    assert FactorSelectionConfig().resolve_k_max(100, 200) == 15
    assert FactorSelectionConfig().resolve_k_max(20, 8) == 4


# ------------------------------------------------------------------ IC / PC

def test_ic_isotropic_picks_one():
    A = _with_spectrum([5.0] * 20, n=200)
    cfg = FactorSelectionConfig("ic", k_max=8)
    assert select_num_factors_ic(A, cfg, "ic") == 1


def test_ic_noiseless_rank_two():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(40, 2)) @ rng.normal(size=(2, 15))
    crit = information_criteria(A, FactorSelectionConfig("ic", k_max=5))
    assert crit["V"][1] < 1e-20
    assert select_num_factors_ic(A, FactorSelectionConfig("ic", k_max=5), "ic") == 2
    assert np.all(np.isfinite(crit["ic"]))


def test_ic_and_ratio_agree_on_scenario_one():
    agree = 0
    for r in range(20):
        cfg = ScenarioConfig("factor", K=4)
        sample, _, _ = gen_scenario1(cfg, replication_rng(41, r))
        A = functional_scores(sample, 10).scores
        k_ratio = select_num_factors_ratio(A)
        k_ic = select_num_factors_ic(A, FactorSelectionConfig("ic"), "ic")
        agree += (k_ratio == 4 and k_ic == 4)
    assert agree >= 16


# ------------------------------------------------------------------ invariances

def test_block_rotation_invariance():
    rng = np.random.default_rng(9)
    blocks = [rng.normal(size=(40, 3)) + rng.normal(size=(40, 1)) * 3 for _ in range(4)]
    A = assemble_scores(blocks)
    rotated = assemble_scores([b @ ortho_group.rvs(3, random_state=10 + i)
                               for i, b in enumerate(blocks)])
    ev = np.linalg.eigvalsh(A.data.T @ A.data)
    ev_rot = np.linalg.eigvalsh(rotated.data.T @ rotated.data)
    assert np.allclose(ev, ev_rot, atol=1e-8 * ev.max())
    d1, d2 = estimate_factors(A, 2), estimate_factors(rotated, 2)
    assert np.max(principal_angles(d1.F, d2.F)) < 1e-6


def test_redundant_columns_barely_move_factor_space():
    rng = np.random.default_rng(12)
    n, p, K = 200, 30, 2
    F = rng.normal(size=(n, K)) * 5
    A = F @ rng.normal(size=(K, p)) + rng.normal(size=(n, p)) * 0.3
    omega = 0.05
    extra = rng.normal(size=(n, 10)) * np.sqrt(omega)
    base = estimate_factors(A - A.mean(0), K)
    grown = np.hstack([A, extra])
    wider = estimate_factors(grown - grown.mean(0), K)
    assert np.max(principal_angles(base.F, wider.F)) < 0.05
