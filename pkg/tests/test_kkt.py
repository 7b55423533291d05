import numpy as np
import pytest

from ivrobust.kkt import NONPOSITIVE, SLACK, VIOLATED, check_kkt_pair, inclusion, sign_conditions
from ivrobust.model import Tolerances


def test_certified_pairs(load):
    for name, z, lam in (("ex_suff2", [0.0], [4.0]), ("ex_suff1", [0.0, 0.0], [3.0, 1.0]),
                         ("ex_dual", [0.25], [8.0])):
        cert = check_kkt_pair(load(name), z, lam)
        assert cert.verdict, (name, cert.reason)
        assert cert.inclusion_residual <= 1e-9


def test_wrong_multiplier_fails_inclusion(load):
    cert = check_kkt_pair(load("ex_suff2"), [0.0], [8.0])
    assert not cert.verdict
    assert "inclusion residual" in cert.reason
    assert cert.inclusion_residual > cert.allowance


def test_sign_branches(load):
    prob = load("ex_suff2")
    signs = sign_conditions(prob, [2.0], [0.0])
    assert signs[0].branch == NONPOSITIVE and signs[0].ok
    assert not sign_conditions(prob, [2.0], [1.0])[0].ok
    # lam below tol_pos counts as zero
    assert sign_conditions(prob, [2.0], [1e-13])[0].ok
    assert not sign_conditions(prob, [2.0], [1e-13], Tolerances(pos=1e-14))[0].ok
    g0 = sign_conditions(prob, [0.0], [4.0])[0]
    assert g0.branch == SLACK and g0.ok


def test_points_outside(load):
    prob = load("ex_dual")
    cert = check_kkt_pair(prob, [-1.0], [0.0])
    assert not cert.verdict and cert.reason == "point is not in S"
    assert sign_conditions(prob, [0.0], [0.0])[0].branch in (SLACK, VIOLATED)


def test_length_and_sign_validation(load):
    prob = load("ex_suff1")
    with pytest.raises(ValueError):
        check_kkt_pair(prob, [0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        check_kkt_pair(prob, [0.0, 0.0], [1.0])
    with pytest.raises(ValueError):
        check_kkt_pair(prob, [0.0, 0.0], [1.0, -1.0])


def test_inclusion_decomposition_reproduces_residual(load):
    prob = load("ex_suff1")
    inc = inclusion(prob, [0.0, 0.0], [3.0, 1.0])
    assert inc.ok and inc.exact_surrogate is not None
    assert np.linalg.norm(inc.decomposition.residual) == pytest.approx(inc.dist, abs=1e-12)
