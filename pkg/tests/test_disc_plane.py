"""Disc-times-plane automorphisms, classification, and obstructions."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tamelab import disc_plane as dp
from tamelab.cn_tame import Polynomial
from tamelab.core import (
    DiscreteSequence,
    GeneratorInfo,
    disc_plane as disc_plane_space,
    properness_check,
)
from tamelab.errors import InconclusivePrefix, PointOutsideAmbient
from tamelab.rng import stream


def _aut(theta=0.0, alpha=0j, logf=(), g=()):
    return dp.DiscPlaneAut(
        dp.MoebiusDisc(theta, alpha), Polynomial(tuple(logf)), Polynomial(tuple(g))
    )


def _dseq(points, generator=None):
    return DiscreteSequence(
        disc_plane_space(),
        tuple(np.asarray(p, dtype=complex) for p in points),
        generator=generator,
    )


_moebius_params = st.tuples(
    st.floats(min_value=-3.1, max_value=3.1),
    st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False),
)


class TestMoebius:
    def test_alpha_on_circle_rejected(self):
        with pytest.raises(PointOutsideAmbient):
            dp.MoebiusDisc(0.0, 1.0 + 0j)

    def test_centered_half_maps_to_zero(self):
        m = dp.MoebiusDisc(0.0, 0.5)
        assert abs(m.apply(0.5)) < 1e-15

    @given(_moebius_params, _moebius_params, st.complex_numbers(max_magnitude=0.95))
    @settings(max_examples=60, deadline=None)
    def test_compose_matches_chained_apply(self, pa, pb, z):
        a = dp.MoebiusDisc(*pa)
        b = dp.MoebiusDisc(*pb)
        c = a.compose(b)
        assert abs(c.apply(z) - a.apply(b.apply(z))) < 1e-11

    @given(_moebius_params, st.complex_numbers(max_magnitude=0.95))
    @settings(max_examples=60, deadline=None)
    def test_inverse_undoes(self, p, z):
        m = dp.MoebiusDisc(*p)
        assert abs(m.inverse().apply(m.apply(z)) - z) < 1e-11


class TestApply:
    def test_identity_fixes_points(self):
        a = dp.DiscPlaneAut.identity()
        p = np.array([0.3 + 0.2j, 5.0 - 1.0j])
        assert np.allclose(dp.dp_apply(a, p), p, atol=0)

    def test_vertical_translation(self):
        a = _aut(g=(1.0,))
        out = dp.dp_apply(a, [0.5, 2.0])
        assert out[0] == pytest.approx(0.5)
        assert out[1] == pytest.approx(3.0)

    def test_moebius_base_shift(self):
        a = _aut(alpha=0.5)
        out = dp.dp_apply(a, [0.5, 2.0])
        assert abs(out[0]) < 1e-15
        assert out[1] == pytest.approx(2.0)

    def test_rejects_base_outside_disc(self):
        with pytest.raises(PointOutsideAmbient):
            dp.dp_apply(dp.DiscPlaneAut.identity(), [1.5, 0.0])

    @given(
        st.complex_numbers(max_magnitude=0.9),
        st.complex_numbers(max_magnitude=50.0),
        st.complex_numbers(max_magnitude=50.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_base_image_ignores_fiber(self, z, w1, w2):
        a = _aut(theta=0.7, alpha=0.2 + 0.1j, logf=(0.1, 0.3), g=(1.0, 2.0))
        out1 = dp.dp_apply(a, [z, w1])
        out2 = dp.dp_apply(a, [z, w2])
        assert abs(out1[0] - out2[0]) < 1e-14


class TestCompose:
    def test_identity_right_unit(self):
        a = _aut(theta=0.4, alpha=0.3j, logf=(0.2, 0.1), g=(1.0, 0.5))
        comp, residual = dp.dp_compose(a, dp.DiscPlaneAut.identity())
        assert comp == a
        assert residual == 0.0

    def test_identity_left_unit(self):
        b = _aut(theta=-0.9, alpha=0.2, logf=(0.1,), g=(0.0, 2.0))
        comp, residual = dp.dp_compose(dp.DiscPlaneAut.identity(), b)
        assert comp == b
        assert residual == 0.0

    def test_trivial_base_constant_multiplier_is_exact(self):
        c = 0.3 - 0.2j
        g1 = Polynomial((1.0, 2.0, 0.5j))
        g2 = Polynomial((0.5, -1.0))
        a = _aut(logf=(c,), g=g1.coeffs)
        b = _aut(logf=(0.7,), g=g2.coeffs)
        comp, residual = dp.dp_compose(a, b)
        assert residual == 0.0
        want_g = Polynomial((np.exp(c),)) * g2 + g1
        assert comp.g == want_g
        assert comp.logf == Polynomial((c + 0.7,))

    def test_generic_pair_residual_small(self):
        a = _aut(theta=0.3, alpha=0.2 + 0.1j, logf=(0.1, 0.2, -0.1), g=(1.0, 0.3))
        b = _aut(theta=-0.7, alpha=0.25j, logf=(0.05, 0.3), g=(0.2, 0.0, 0.4))
        comp, residual = dp.dp_compose(a, b)
        assert residual < 1e-6
        rng = stream(5, "compose-spot")
        for _ in range(25):
            z = 0.9 * math.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            w = complex(rng.standard_normal(), rng.standard_normal())
            p = np.array([z, w])
            want = a.apply(b.apply(p))
            got = comp.apply(p)
            assert np.max(np.abs(got - want)) < 1e-5

    def test_inverse_roundtrip_thousand_points(self):
        a = _aut(theta=0.5, alpha=0.3 - 0.2j, logf=(0.2, -0.3, 0.1), g=(0.5, 1.0))
        inv, residual = dp.dp_invert(a)
        assert residual < 1e-9


class TestClassify:
    def test_oversized_fiber_violates(self):
        d = _dseq([(0.0, float(k)) for k in range(1, 21)])
        v = dp.dp_classify(d)
        assert v.is_violated
        assert len(v.witness) == 20

    def test_boundary_escape_certifies(self):
        gen = GeneratorInfo.of("discplane-base", boundary_escape=True)
        d = _dseq([(1.0 - 2.0**-k, 0.0) for k in range(1, 21)], generator=gen)
        v = dp.dp_classify(d, min_gap_disc=1e-6)
        assert v.is_certified
        assert v.reason == "boundary-escape"

    def test_interior_accumulation_violates(self):
        d = _dseq([(1.0 / (k + 2), 0.0) for k in range(1, 101)])
        v = dp.dp_classify(d, min_gap_disc=1e-3)
        assert v.is_violated
        assert len(v.witness) == 2

    def test_plain_prefix_is_consistent(self):
        d = _dseq([(0.1 * k, 0.0) for k in range(1, 9)])
        assert dp.dp_classify(d).state == "consistent-up-to-prefix"

    def test_certified_implies_proper_prefix(self):
        gen = GeneratorInfo.of("discplane-base", boundary_escape=True)
        d = _dseq([(1.0 - 2.0**-k, 0.0) for k in range(1, 16)], generator=gen)
        v = dp.dp_classify(d, min_gap_disc=1e-6)
        assert v.is_certified
        images = [np.array([p[0]]) for p in d.points]
        check = properness_check(images, min_gap=1e-6, max_fiber=8)
        assert check.state == "consistent-up-to-prefix"


class TestNontameBound:
    def test_identity_fails_at_one(self):
        d = _dseq([(0.0, float(k)) for k in range(1, 9)])
        rep = dp.dp_nontame_bound(d, dp.DiscPlaneAut.identity())
        assert rep.first_failure_index == 1
        assert rep.proximity_cap == pytest.approx(1.0)
        assert rep.lhs[0] == pytest.approx(2.0)
        assert rep.rhs[0] == pytest.approx(2.0 * (1.0 + 1e-6))

    def test_constant_hundred_multiplier_fails_at_seven(self):
        a = _aut(logf=(math.log(100.0),))
        d = _dseq([(0.0, float(k)) for k in range(1, 12)])
        rep = dp.dp_nontame_bound(d, a)
        assert rep.first_failure_index == 7

    def test_huge_additive_term_fails_at_twenty(self):
        a = _aut(g=(1e6,))
        d = _dseq([(2.0**-k, 1.0) for k in range(1, 25)])
        rep = dp.dp_nontame_bound(d, a)
        first = next(
            k
            for k in range(1, 25)
            if abs(1.0 + 1e6) + 1.0 / (1.0 - 2.0**-k) < 2.0**k * (1.0 + 1e-6)
        )
        assert rep.first_failure_index == first == 20

    def test_short_prefix_inconclusive(self):
        a = _aut(g=(1e6,))
        d = _dseq([(0.0, float(k)) for k in range(1, 5)])
        with pytest.raises(InconclusivePrefix):
            dp.dp_nontame_bound(d, a)


class TestPoincare:
    def test_two_point_signature(self):
        sig = dp.poincare_signature([0.0, 0.5])
        assert sig.shape == (1,)
        assert sig[0] == pytest.approx(math.log(3.0), abs=1e-12)

    def test_single_point_empty(self):
        assert dp.poincare_signature([0.3j]).size == 0

    @given(
        st.lists(st.complex_numbers(max_magnitude=0.9), min_size=2, max_size=6),
        _moebius_params,
    )
    @settings(max_examples=50, deadline=None)
    def test_moebius_invariance(self, zs, p):
        m = dp.MoebiusDisc(*p)
        before = dp.poincare_signature(zs)
        after = dp.poincare_signature([m.apply(z) for z in zs])
        assert np.max(np.abs(before - after)) < 1e-10

    def test_shipped_pair_is_inequivalent(self):
        left, right = dp.inequivalent_base_pair()
        sig_l = dp.poincare_signature(left)
        sig_r = dp.poincare_signature(right)
        assert sig_l.shape == sig_r.shape
        assert np.max(np.abs(sig_l - sig_r)) > 1e-3

    def test_csv_fifteen_digits(self):
        sig = dp.poincare_signature([0.0, 0.5, 0.2j])
        text = dp.signature_csv(sig)
        lines = text.strip().split("\n")
        assert len(lines) == 3
        assert [float(s) for s in lines] == pytest.approx(list(sig), abs=1e-13)
