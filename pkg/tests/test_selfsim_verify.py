import math

import numpy as np
import pytest

from prandtl_lab import profile_degenerate as pd
from prandtl_lab import profile_generic as pg
from prandtl_lab.kernels import DomainError
from prandtl_lab.selfsim_verify import (DEGENERATE_MAP, GENERIC_MAP, EquationId, crocco_residual,
                                        interior_grid, jacobian_det, stationary_report,
                                        stationary_residual, transport_residual, upsilon,
                                        volume_residual)

GEN = pg.GenericProfile()
DEG = pd.DegenerateProfile()


def test_transport_residual_vanishes_only_for_correct_exponents():
    rng = np.random.default_rng(3)
    for a, b in rng.uniform(-2, 2, size=(10, 2)):
        assert abs(transport_residual(GENERIC_MAP, 1.5, -0.25, a, b)) < 1e-12
        assert abs(transport_residual(DEGENERATE_MAP, 1.5, -0.5, a, b)) < 1e-12
    assert abs(transport_residual(GENERIC_MAP, 1.5, -0.5, 0.7, 0.9)) > 1e-2
    assert abs(transport_residual(DEGENERATE_MAP, 1.5, -0.25, 0.7, 0.9)) > 1e-2


def test_crocco_residual():
    for X, th in ((0.3, 0.2), (-1.0, 1.5), (2.0, -0.1)):
        assert abs(crocco_residual(X, th)) < 1e-12
    assert abs(crocco_residual(0.3, 0.2, beta=-0.5)) > 1e-2
    with pytest.raises(DomainError):
        crocco_residual(-5.0, 0.1)


def test_volume_residual_and_jacobian():
    assert volume_residual(pg.phi_map).max_abs < 1e-6
    assert volume_residual(pd.phi_prime_map).max_abs < 1e-6
    assert volume_residual(pg.phi_map).equation_id is EquationId.volume
    assert len(volume_residual(pg.phi_map).points) == 49
    shear = lambda a, b: (2.0 * a + b, 0.5 * b)
    assert jacobian_det(shear, 0.3, 0.1) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("prof", [GEN, DEG], ids=["generic", "degenerate"])
def test_stationary_residual_small_and_exponents_discriminate(prof):
    X = 0.4
    Y = 0.3 * prof.support_top(X)
    assert abs(stationary_residual(prof, prof.alpha, prof.beta, X, Y)) < 1e-6
    assert abs(stationary_residual(prof, prof.alpha, prof.beta + 0.25, X, Y)) > 1e-3


def test_upsilon_routes_agree():
    for prof, X, f in ((GEN, 0.3, 0.3), (DEG, 0.5, 0.6)):
        Y = f * prof.support_top(X)
        assert upsilon(prof, X, Y, route="y") == pytest.approx(upsilon(prof, X, Y), abs=1e-7)


def test_stationary_residual_rejects_outside_points():
    with pytest.raises(DomainError):
        stationary_residual(GEN, 1.5, -0.25, 0.0, 3.0)


def test_interior_grid_and_report():
    pts = interior_grid(GEN, [0.0, 0.5], [0.25, 0.75])
    assert len(pts) == 4
    assert pts[1][1] == pytest.approx(0.75 * 2.0 * pg.y_star(0.0))
    rep = stationary_report(GEN, 1.5, -0.25, pts[:2])
    assert rep.equation_id is EquationId.stationary
    assert rep.max_abs < 1e-6
    assert math.isfinite(rep.max_abs)
