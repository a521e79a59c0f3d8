import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_composition
from qroot.block_encoding import (
    BlockEncoding,
    CostLedger,
    amplify,
    bounded_diag,
    column_to_diag,
    density_from_purification,
    dilate,
    from_json_dict,
    from_state_diag,
    identity_encoding,
    lin_combo,
    product,
    projector,
    scale_down,
    take_block,
    tensor,
    to_json,
    to_json_dict,
    transpose,
)

GOLDEN = Path(__file__).parent / "golden" / "encoding_example.json"


def test_from_state_diag_basis_state():
    u = from_state_diag([1.0, 0.0])
    np.testing.assert_allclose(u.op, np.diag([1.0, 0.0]))
    assert u.alpha == 1.0 and u.eps == 0.0


def test_from_state_diag_direct_construction():
    u = from_state_diag([0.6, 0.8])
    np.testing.assert_allclose(u.op, np.diag([0.6, 0.8]))


def test_from_state_diag_uniform_depth():
    u = from_state_diag(np.full(8, 1 / np.sqrt(8)))
    np.testing.assert_allclose(np.diag(u.op), np.full(8, 1 / np.sqrt(8)))
    assert u.cost.modeled_depth == 3.0
    assert u.ancillas == 3 + 3


def test_from_state_diag_rejects_non_unit():
    with pytest.raises(ValueError, match="unit norm"):
        from_state_diag([0.5, 0.5])


def test_product_identity_case():
    a = bounded_diag([0.3, -0.4])
    out = product(identity_encoding(2), a)
    np.testing.assert_allclose(out.op, a.op)
    assert out.alpha == 1.0


def test_product_diagonals():
    out = product(bounded_diag([0.5, 0.5]), bounded_diag([0.5, -0.5]))
    np.testing.assert_allclose(np.diag(out.op), [0.25, -0.25])
    assert out.alpha == 1.0


def test_product_random_alphas():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4))
    ua = BlockEncoding(a, 2.0 * np.linalg.norm(a, 2), 0, 0.0, CostLedger())
    ub = BlockEncoding(b, 3.0 * np.linalg.norm(b, 2), 0, 0.0, CostLedger())
    out = product(ua, ub)
    np.testing.assert_allclose(out.op, a @ b, atol=1e-12)
    assert out.alpha == ua.alpha * ub.alpha


def test_lin_combo_single_term():
    a = bounded_diag([0.2, 0.7])
    out = lin_combo([a], [1])
    np.testing.assert_allclose(out.op, a.op)


def test_lin_combo_half_shift():
    # (I - diag(f))/2 for f = (0.4, -0.2)
    out = lin_combo([identity_encoding(2), bounded_diag([0.4, -0.2])], [1, -1])
    np.testing.assert_allclose(np.diag(out.effective), [0.3, 0.6])


def test_lin_combo_three_random_diagonals():
    rng = np.random.default_rng(2)
    vs = [rng.uniform(-1, 1, 4) for _ in range(3)]
    signs = [1, -1, 1]
    out = lin_combo([bounded_diag(v) for v in vs], signs)
    expect = sum(s * v for s, v in zip(signs, vs)) / 3
    np.testing.assert_allclose(np.diag(out.effective), expect, atol=1e-14)


def test_lin_combo_rejects_mismatch():
    with pytest.raises(ValueError):
        lin_combo([identity_encoding(2), identity_encoding(4)], [1, 1])
    with pytest.raises(ValueError):
        lin_combo([], [])


def test_tensor_block_repeat():
    a = bounded_diag([0.5, -0.5])
    out = tensor(identity_encoding(2), a)
    np.testing.assert_allclose(out.op, np.kron(np.eye(2), a.op))


def test_tensor_projector_selects_block():
    g = bounded_diag([0.3, 0.6])
    out = tensor(projector(1, 2), g)
    expect = np.zeros((4, 4), dtype=complex)
    expect[2, 2], expect[3, 3] = 0.3, 0.6
    np.testing.assert_allclose(out.op, expect)


def test_tensor_diagonal_example():
    out = tensor(bounded_diag([0.5, 0.5]), bounded_diag([1.0, -1.0]))
    np.testing.assert_allclose(np.diag(out.op), [0.5, -0.5, 0.5, -0.5])


def test_scale_down_alpha_doubles():
    a = bounded_diag([0.5, 0.1])
    out = scale_down(a, 2.0)
    np.testing.assert_allclose(out.op, a.op)
    assert out.alpha == 2.0


def test_scale_down_inserts_coefficient():
    a = bounded_diag([0.8, -0.6])
    out = scale_down(a, 4.0)  # coefficient 0.25
    np.testing.assert_allclose(out.effective, 0.25 * a.op, atol=1e-15)


def test_scale_down_composition_law():
    a = bounded_diag([0.9, 0.3])
    chained = scale_down(scale_down(a, 2.0), 3.0)
    direct = scale_down(a, 6.0)
    np.testing.assert_allclose(chained.effective, direct.effective)


def test_scale_down_rejects_small_factor():
    with pytest.raises(ValueError):
        scale_down(identity_encoding(2), 1.0)


def test_amplify_scalar_multiplication():
    out = amplify(bounded_diag([0.2, 0.1]), 2.0, 0.25, 1e-9)
    np.testing.assert_allclose(np.diag(out.effective), [0.4, 0.2])


def test_amplify_removes_combination_prefactor():
    vs = [np.array([0.12, -0.2]), np.array([0.05, 0.18]),
          np.array([0.2, 0.01]), np.array([-0.07, 0.09])]
    combo = lin_combo([bounded_diag(v) for v in vs], [1, 1, 1, 1])
    out = amplify(combo, 4.0, 0.1, 1e-12)
    np.testing.assert_allclose(np.diag(out.effective), sum(vs), atol=1e-13)


def test_amplify_near_identity_small_cost():
    tiny = amplify(bounded_diag([0.2, 0.1]), 1.0 + 1e-9, 0.25, 1e-3)
    np.testing.assert_allclose(np.diag(tiny.effective),
                               [0.2 * (1 + 1e-9), 0.1 * (1 + 1e-9)])
    assert tiny.cost.modeled_depth < 100


def test_amplify_margin_rejection():
    with pytest.raises(ValueError, match="margin"):
        amplify(bounded_diag([0.8, 0.1]), 2.0, 0.1, 1e-9)


def test_projector_examples():
    np.testing.assert_allclose(projector(0, 2).op, np.diag([1.0, 0.0]))
    np.testing.assert_allclose(projector(3, 4).op, np.diag([0, 0, 0, 1.0]))
    with pytest.raises(ValueError):
        projector(4, 4)


def test_projector_idempotent():
    p = projector(2, 8)
    np.testing.assert_allclose(product(p, p).op, p.op)


def test_density_product_state():
    psi = np.array([0.6, 0.8])
    phi = np.kron([1.0, 0.0], psi)
    rho = density_from_purification(phi, 2)
    np.testing.assert_allclose(rho.op, np.outer(psi, psi), atol=1e-15)


def test_density_bell_state():
    bell = np.array([1.0, 0, 0, 1.0]) / np.sqrt(2)
    rho = density_from_purification(bell, 2)
    np.testing.assert_allclose(rho.op, np.eye(2) / 2, atol=1e-15)


def test_density_interference_state():
    # two real states on a 4-dim register; keep the flag qubit (trailing)
    rng = np.random.default_rng(3)
    phi1 = rng.standard_normal(4)
    phi1 /= np.linalg.norm(phi1)
    phi2 = rng.standard_normal(4)
    phi2 /= np.linalg.norm(phi2)
    psi = np.zeros((2, 4, 2))
    psi[0, :, 0] = (phi1 + phi2) / 2
    psi[1, :, 1] = (phi1 - phi2) / 2
    rho = density_from_purification(psi.reshape(-1), 2)
    # partial-trace oracle
    mat = psi.reshape(8, 2)
    oracle = np.einsum("ai,aj->ij", mat, mat.conj())
    np.testing.assert_allclose(rho.op, oracle, atol=1e-14)
    assert abs(rho.op[0, 0] - (1 + phi1 @ phi2) / 2) < 1e-12
    assert rho.cost.state_prep_queries == 2


def test_dilate_zero_block():
    z = BlockEncoding(np.zeros((2, 2)), 1.0, 0, 0.0, CostLedger())
    u = dilate(z)
    np.testing.assert_allclose(u[:2, :2], 0, atol=1e-14)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)


def test_dilate_defect_blocks():
    u = dilate(from_state_diag([0.6, 0.8]))
    np.testing.assert_allclose(np.abs(np.diag(u[:2, 2:])), [0.8, 0.6],
                               atol=1e-12)


def test_dilate_random_contraction():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a /= 2 * np.linalg.norm(a, 2)
    enc = BlockEncoding(a, 1.0, 0, 0.0, CostLedger())
    u = dilate(enc)
    np.testing.assert_allclose(u[:4, :4], a, atol=1e-10)
    assert np.max(np.abs(u @ u.conj().T - np.eye(8))) <= 1e-9


def test_column_and_block_helpers():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4)) / 4
    enc = BlockEncoding(a, 1.0, 0, 0.0, CostLedger())
    col = column_to_diag(enc)
    np.testing.assert_allclose(np.diag(col.op), a[:, 0])
    blk = take_block(enc, 2)
    np.testing.assert_allclose(blk.op, a[:2, :2])
    np.testing.assert_allclose(transpose(enc).op, a.T)


# depth uses dyadic rationals so float addition stays exactly associative
ledgers = st.builds(CostLedger,
                    st.integers(0, 50), st.integers(0, 50),
                    st.integers(0, 800).map(lambda k: k / 8.0),
                    st.integers(0, 50))


@settings(max_examples=50, derandomize=True)
@given(ledgers, ledgers, ledgers)
def test_ledger_merge_associative_commutative(a, b, c):
    assert a.merge(b) == b.merge(a)
    assert a.merge(b).merge(c) == a.merge(b.merge(c))


def test_alpha_never_decreases_without_amplification():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a = bounded_diag(rng.uniform(-1, 1, 4))
        b = scale_down(bounded_diag(rng.uniform(-1, 1, 4)),
                       float(rng.uniform(1.1, 3.0)))
        for out, parents in ((product(a, b), (a, b)),
                             (lin_combo([a, b], [1, -1]), (a, b)),
                             (tensor(a, b), (a, b))):
            assert out.alpha >= max(p.alpha for p in parents) - 1e-12


def test_amplify_divides_alpha_exactly():
    u = scale_down(bounded_diag([0.3, 0.2]), 2.0)
    out = amplify(u, 1.5, 0.1, 1e-9)
    assert abs(out.alpha - u.alpha / 1.5) < 1e-15


def test_random_compositions_match_direct_arithmetic():
    rng = np.random.default_rng(42)
    for _ in range(60):
        enc, expect = random_composition(rng)
        assert np.max(np.abs(enc.effective - expect)) <= 1e-10 + enc.eps


def test_serialization_round_trip_and_golden():
    enc = scale_down(bounded_diag([0.5, -0.25]), 2.0)
    again = from_json_dict(to_json_dict(enc))
    np.testing.assert_allclose(again.op, enc.op)
    assert again.alpha == enc.alpha and again.cost == enc.cost
    golden = json.loads(GOLDEN.read_text())
    assert json.loads(to_json(enc)) == golden


def test_invariant_norm_violation_rejected():
    with pytest.raises(ValueError, match="spectral norm"):
        BlockEncoding(np.eye(2) * 2.0, 1.0, 0, 0.0, CostLedger())
