import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscotank.errors import DomainError, NotHCompliantError
from viscotank.friction import (
    BoundedCustom, CfAbsV, DosSantos, GerbeauPerthame, LinearPlusHV, Zero, h_bar_bound,
    k_tilde_max, kappa_eval, make_friction,
)
from viscotank.model import PhysicalParams

P = PhysicalParams(g=1, mu=1, sigma=0, L=1, m=1, H_max=2)


def test_kappa_values():
    assert kappa_eval(Zero(), 0.7, -3.0, 1.0) == 0.0
    assert kappa_eval(GerbeauPerthame(3.0), 1.0, 5.0, 1.0) == pytest.approx(0.6)
    assert kappa_eval(CfAbsV(2.0), 1.0, -3.0, 1.0) == pytest.approx(6.0)
    assert kappa_eval(LinearPlusHV(0.5, 2.0), 2.0, -1.0, 1.0) == pytest.approx(4.5)
    ds = kappa_eval(DosSantos(1.0, 2.0), 1.0, 0.5, 1.0)
    assert ds == pytest.approx(0.5 * 4 ** (4 / 3))


def test_kappa_rejects_nonpositive_level():
    with pytest.raises(DomainError):
        kappa_eval(Zero(), 0.0, 1.0, 1.0)


def test_level_bounds():
    assert h_bar_bound(Zero(), 0.5, P) == 0.0
    assert h_bar_bound(GerbeauPerthame(3.0), 1.0, P) == pytest.approx(0.6)
    for model in (CfAbsV(1.0), DosSantos(1.0, 1.0), LinearPlusHV(1.0, 1.0)):
        with pytest.raises(NotHCompliantError):
            h_bar_bound(model, 0.5, P)
    assert h_bar_bound(LinearPlusHV(0.3), 0.5, P) == pytest.approx(0.3 / 0.25)
    with pytest.raises(DomainError):
        h_bar_bound(Zero(), 1.5, P)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 10.0), st.floats(0.05, 5.0), st.floats(-5, 5))
def test_level_bound_dominates_kappa(omega, b3, mu, v):
    m = GerbeauPerthame(b3)
    p = P.with_(mu=mu)
    kb = h_bar_bound(m, omega, p)
    for h in np.linspace(omega, 2.0, 17):
        assert m.kappa(h, v, mu) / h**2 <= kb * (1 + 1e-12)


def test_k_tilde_examples():
    assert k_tilde_max(Zero(), 1.0, 1.0, 2.0, 1.0) == 0.0
    assert k_tilde_max(CfAbsV(1.0), 1.0, 1.0, 2.0, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert k_tilde_max(GerbeauPerthame(3.0), 1.0, 1.0, 2.0, 1.0) == pytest.approx(0.6, rel=1e-12)
    with pytest.raises(DomainError):
        k_tilde_max(Zero(), 3.0, 1.0, 2.0, 1.0)


def test_k_tilde_interior_maximum():
    # kappa/h^2 = h (1 - h) peaks at h = 1/2 inside the box
    m = BoundedCustom(1.0, lambda h, v: np.asarray(h) ** 3 * (1 - np.asarray(h)) + 0 * np.asarray(v))
    assert k_tilde_max(m, 0.1, 1.0, 0.9, 1.0) == pytest.approx(0.25, rel=1e-9)


def test_dos_santos_maximum_matches_fine_scan():
    m = DosSantos(0.7, 1.5)
    kt = k_tilde_max(m, 0.4, 0.8, 2.0, 1.0)
    hs = np.linspace(0.4, 2.0, 20001)
    ref = float(np.max(m.kappa(hs, 0.8, 1.0) / hs**2))
    assert kt >= ref * (1 - 1e-12)
    assert kt == pytest.approx(ref, rel=1e-6)


def test_bounded_custom_enforces_bound():
    m = BoundedCustom(1.0, lambda h, v: 2.0 + 0 * np.asarray(h))
    with pytest.raises(DomainError):
        m.kappa(1.0, 0.0, 1.0)


def test_factory():
    assert isinstance(make_friction("gerbeau_perthame", b3=1.0), GerbeauPerthame)
    with pytest.raises(DomainError):
        make_friction("manning")
    with pytest.raises(DomainError):
        CfAbsV(-1.0)
