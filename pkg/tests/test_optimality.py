import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diropt import (
    DistortionTable, MarkovSourceModel, TestChannelModel, ValidationError, build_chain,
    compose_joint, distortion_table, expected_distortion, rd_point, stock_joint,
    synthesize_distortion, verify_distortion,
)
from diropt.optimality import NOT_OPTIMAL, OPTIMAL, UNDER_DETERMINED, solve_certificate, source_cells

from oracles import random_joint, random_stochastic


def stock2(eps=0.2):
    chain = build_chain([0.5], [0.5])
    return chain, stock_joint(chain, eps)


def iid_uniform(test_probs, Y=2):
    src = MarkovSourceModel.from_array((0, 1), 0, [[0.5, 0.5]])
    return compose_joint(src, TestChannelModel.from_array((0, 1), range(Y), 0, test_probs))


def test_synthesized_stock_distortion_reproduces_hamming_table():
    chain, joint = stock2(0.2)
    c = 1 / math.log2(0.8 / 0.2)
    assert c == pytest.approx(0.5)
    cells = source_cells(joint, 1)
    raw = synthesize_distortion(joint, 1, c)
    # anchor d0 on the zero-distortion cell of each source pair: a declared drop
    # after a drop, no declaration otherwise; the other cell is then a prediction
    d0 = {}
    for j, x in set(cells.x_parts):
        anchor = (1,) if x == j - 1 else (0,)
        d0[(j, x)] = -raw[((j, x), anchor)]
    table = synthesize_distortion(joint, 1, c, d0)
    assert table[((1, 0), (0,))] == pytest.approx(1.0, abs=1e-12)
    assert table[((1, 0), (1,))] == pytest.approx(0.0, abs=1e-12)
    hamming = distortion_table(chain)
    for key, v in table.values.items():
        assert v == pytest.approx(hamming[key], abs=1e-12)


def test_copy_channel_distortion_is_zero_on_diagonal():
    joint = iid_uniform([[[1, 0], [0, 1]]])
    table = synthesize_distortion(joint, 1, 1.0)
    assert set(table.values) == {((0,), (0,)), ((1,), (1,))}
    assert all(v == 0 for v in table.values.values())


def test_scaling_c_scales_distortion():
    joint = random_joint(np.random.default_rng(0), 3, 2, 1)
    d0 = {xp: float(i) for i, xp in enumerate(set(source_cells(joint, 1).x_parts))}
    a = synthesize_distortion(joint, 1, 0.4, d0)
    b = synthesize_distortion(joint, 1, 0.8, d0)
    for key in a.values:
        off = d0[key[0]]
        assert b[key] - off == pytest.approx(2 * (a[key] - off), abs=1e-12)


def test_stock_table_certified_with_expected_scale():
    _, joint = stock2(0.2)
    chain = build_chain([0.5], [0.5])
    cert = verify_distortion(joint, 1, distortion_table(chain))
    assert cert.status == OPTIMAL and cert.optimal
    assert cert.c == pytest.approx(0.5, abs=1e-12)
    assert cert.residual <= 1e-9
    assert cert.constraint == pytest.approx(0.1, abs=1e-15)


def test_perturbed_cell_is_not_optimal():
    chain, joint = stock2(0.2)
    table = distortion_table(chain)
    values = dict(table.values)
    values[((1, 1), (1,))] += 0.05
    cert = verify_distortion(joint, 1, DistortionTable(1, 1, values))
    assert cert.status == NOT_OPTIMAL
    assert cert.residual > 1e-9
    assert "not satisfied" in cert.message


def test_constant_table_is_under_determined():
    chain, joint = stock2(0.2)
    table = DistortionTable(1, 1, {k: 1.0 for k in distortion_table(chain).values})
    cert = verify_distortion(joint, 1, table)
    assert cert.status == UNDER_DETERMINED
    assert not cert.optimal


def test_one_reconstruction_per_context_is_under_determined():
    joint = iid_uniform([[[1, 0], [0, 1]]])
    cert = verify_distortion(joint, 1, synthesize_distortion(joint, 1, 1.0))
    assert cert.status == UNDER_DETERMINED
    assert cert.c is None


def test_negative_scale_is_not_optimal():
    joint = random_joint(np.random.default_rng(1), 2, 2, 1)
    table = synthesize_distortion(joint, 1, 1.0).scaled(-1.0)
    cert = verify_distortion(joint, 1, table)
    assert cert.status == NOT_OPTIMAL
    assert cert.c == pytest.approx(-1.0)
    assert "negative" in cert.message


def test_missing_supported_cell_rejected():
    chain, joint = stock2(0.2)
    values = dict(distortion_table(chain).values)
    values.pop(((1, 0), (1,)))
    with pytest.raises(ValidationError, match=r"\[1, 0\]"):
        verify_distortion(joint, 1, DistortionTable(1, 1, values))


def test_arity_mismatch_rejected():
    _, joint = stock2(0.2)
    with pytest.raises(ValidationError, match="arity"):
        verify_distortion(joint, 2, distortion_table(build_chain([0.5], [0.5])))
    with pytest.raises(ValidationError, match="arity"):
        DistortionTable(1, 1, {((0,), (0,)): 1.0})


@pytest.mark.parametrize("k", [1, 2, 3])
def test_roundtrip_recovers_scale(k):
    rng = np.random.default_rng(k)
    for _ in range(10):
        joint = random_joint(rng, 2, 3, 1, sparsity=0.2)
        d0 = {xp: rng.normal() for xp in set(source_cells(joint, k).x_parts)}
        cert = verify_distortion(joint, k, synthesize_distortion(joint, k, 0.7, d0))
        assert cert.status == OPTIMAL
        assert cert.c == pytest.approx(0.7, abs=1e-10)
        assert cert.residual <= 1e-10
        for key, v in d0.items():
            assert cert.d0[key] == pytest.approx(v, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0), st.integers(1, 2))
def test_certificate_invariant_under_offsets(seed, alpha, k):
    rng = np.random.default_rng(seed)
    joint = random_joint(rng, 2, 2, 1, sparsity=0.2)
    table = synthesize_distortion(joint, k, 1.3)
    base = verify_distortion(joint, k, table)
    shift = {xp: rng.normal() for xp in base.d0}
    shifted = verify_distortion(joint, k, table.shifted(lambda xp: shift[xp]))
    scaled = verify_distortion(joint, k, table.scaled(alpha))
    for cert in (base, shifted, scaled):
        assert cert.status == base.status
    if base.status == OPTIMAL:
        assert shifted.c == pytest.approx(base.c, rel=1e-9)
        assert scaled.c == pytest.approx(alpha * base.c, rel=1e-9)
        for key in base.d0:
            assert scaled.d0[key] == pytest.approx(alpha * base.d0[key], abs=1e-9)


def test_stock_grid_certified_and_distortion_identity():
    chain = build_chain([0.3, 0.3], [0.2, 0.4])
    bound = min(chain.q)
    pi0 = chain.stationary[0]
    for eps in np.arange(0.05, 0.5, 0.05):
        if not eps < bound:
            continue
        joint = stock_joint(chain, eps)
        cert = verify_distortion(joint, 1, distortion_table(chain))
        assert cert.status == OPTIMAL
        assert cert.c == pytest.approx(1 / math.log2((1 - eps) / eps), abs=1e-9)
        assert rd_point(joint, 1, distortion_table(chain)).distortion == pytest.approx(
            (1 - pi0) * eps, abs=1e-12)


def test_stock_validity_endpoint_is_under_determined():
    # at eps = q the declaration is always 0: zero rate, and every scale fits
    chain = build_chain([0.5], [0.3])
    cert = verify_distortion(stock_joint(chain, 0.3), 1, distortion_table(chain))
    assert cert.status == UNDER_DETERMINED and cert.c is None
    assert stock_joint(chain, 0.3).array[:, :, 1].sum() == 0


def test_rd_point_examples():
    chain, joint = stock2(0.2)
    pt = rd_point(joint, 1, distortion_table(chain))
    assert (pt.rate, pt.distortion) == (pytest.approx(0.139036, abs=1e-6), pytest.approx(0.1, abs=1e-12))

    hamming = DistortionTable(0, 1, {((x,), (y,)): float(x != y) for x in (0, 1) for y in (0, 1)})
    copy = rd_point(iid_uniform([[[1, 0], [0, 1]]]), 1, hamming)
    assert (copy.rate, copy.distortion) == (pytest.approx(1.0), 0.0)

    indep = rd_point(iid_uniform([[[0.2, 0.8], [0.2, 0.8]]]), 1, hamming)
    assert indep.rate == pytest.approx(0.0, abs=1e-15)
    assert indep.distortion == pytest.approx(0.5 * 0.8 + 0.5 * 0.2)


def test_expected_distortion_direct_sum():
    rng = np.random.default_rng(3)
    joint = random_joint(rng, 3, 2, 1)
    values = {((s, x), (y,)): rng.random() for s in range(3) for x in range(3) for y in range(2)}
    P = joint.stationary_cells()
    direct = sum(P[s, x, y] * v for ((s, x), (y,)), v in values.items())
    assert expected_distortion(joint, DistortionTable(1, 1, values)) == pytest.approx(direct, abs=1e-15)


def test_solve_certificate_degenerate_scale():
    status, scale, d0, residual, msg = solve_certificate([2.0, 2.0, 2.0], [0.0, 1.0, 3.0], ["g"] * 3)
    assert status == UNDER_DETERMINED and scale == 0.0
    assert "degenerate" in msg
    assert d0 == {"g": 2.0} and residual == 0.0


def test_certificate_json_keys():
    chain, joint = stock2(0.2)
    doc = verify_distortion(joint, 1, distortion_table(chain)).to_dict()
    assert set(doc) >= {"status", "c", "residual", "d0"}
    assert set(doc["d0"]) == {"0,0", "0,1", "1,0", "1,1"}
