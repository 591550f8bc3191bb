"""Haar sampling, tail-measure estimates, thresholds, and the omega fraction."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tamelab import generic_projection as gp
from tamelab.core import DiscreteSequence, GeneratorInfo, cn, sln
from tamelab.errors import (
    AmbientMismatch,
    DimensionMismatch,
    PrefixTooBounded,
    SearchExhausted,
    ZeroVector,
)


def _sampler(seed: int, counter: int = 0) -> gp.HaarSampler:
    return gp.HaarSampler(2, seed, counter)


def _diag(value: float) -> np.ndarray:
    return np.diag([value, 1.0 / value]).astype(np.complex128)


class TestHaarSampler:
    def test_single_draw_is_special_unitary(self):
        u = gp.haar_su(_sampler(7))
        assert np.max(np.abs(u.conj().T @ u - np.eye(2))) <= gp.UNITARY_TOL
        assert abs(np.linalg.det(u) - 1.0) <= gp.UNITARY_TOL

    def test_batch_draws_are_special_unitary(self):
        us = gp.haar_su_batch(_sampler(11), 500)
        gram = np.einsum("kij,kil->kjl", us.conj(), us)
        assert np.max(np.abs(gram - np.eye(2))) <= gp.UNITARY_TOL
        assert np.max(np.abs(np.linalg.det(us) - 1.0)) <= gp.UNITARY_TOL

    def test_counter_addresses_each_draw(self):
        # A draw depends only on (n, seed, index): slicing a batch,
        # advancing the sampler, and drawing singly all agree bitwise.
        batch = gp.haar_su_batch(_sampler(7), 10)
        assert np.array_equal(batch[5], gp.haar_su(_sampler(7, counter=5)))
        head = gp.haar_su_batch(_sampler(7), 4)
        tail = gp.haar_su_batch(_sampler(7).advanced(4), 6)
        assert np.array_equal(np.concatenate([head, tail]), batch)

    def test_fixed_seed_replays_identical_matrices(self):
        a = gp.haar_su_batch(_sampler(3), 32)
        b = gp.haar_su_batch(_sampler(3), 32)
        assert np.array_equal(a, b)

    def test_first_entry_moment_matches_sphere_oracle(self):
        # The first column is uniform on the unit sphere of C^2, so
        # |u11|^2 is uniform on [0, 1] with mean one half.
        us = gp.haar_su_batch(_sampler(11), 100_000)
        assert abs(np.mean(np.abs(us[:, 0, 0]) ** 2) - 0.5) <= 0.005
        assert abs(np.mean(np.abs(us[:, 1, 0]) ** 2) - 0.5) <= 0.005

    def test_trace_distribution_invariant_under_translation(self):
        # Two-sample Kolmogorov-Smirnov on tr(V U') against tr(U) over
        # disjoint draw windows, below the 1 percent critical value.
        m = 100_000
        us = gp.haar_su_batch(_sampler(13), m)
        vs = gp.haar_su_batch(_sampler(13).advanced(m), m)
        fixed = gp.haar_su(_sampler(99))
        a = np.sort(np.real(np.trace(us, axis1=1, axis2=2)))
        b = np.sort(np.real(np.trace(fixed @ vs, axis1=1, axis2=2)))
        grid = np.concatenate([a, b])
        cdf_a = np.searchsorted(a, grid, side="right") / m
        cdf_b = np.searchsorted(b, grid, side="right") / m
        statistic = np.max(np.abs(cdf_a - cdf_b))
        assert statistic < 1.628 * math.sqrt(2.0 * m / (m * m))

    def test_dimension_three_is_supported(self):
        us = gp.haar_su_batch(gp.HaarSampler(3, 5), 200)
        gram = np.einsum("kij,kil->kjl", us.conj(), us)
        assert np.max(np.abs(gram - np.eye(3))) <= gp.UNITARY_TOL
        assert np.max(np.abs(np.linalg.det(us) - 1.0)) <= gp.UNITARY_TOL

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            gp.HaarSampler(0, 1)
        with pytest.raises(ValueError):
            gp.HaarSampler(2, 1, -1)
        with pytest.raises(ValueError):
            gp.haar_su_batch(_sampler(1), 0)


class TestInvariantEmbedding:
    def test_products_of_entries(self):
        g = np.array([[1.0, 2.0], [0.5, 3.0]], dtype=np.complex128)
        assert np.allclose(gp.InvariantEmbedding().embed(g), [2.0, 3.0, 1.0, 1.5])

    def test_right_torus_invariance(self):
        chart = gp.InvariantEmbedding()
        g = np.array([[1.0 + 1j, 2.0], [0.5, 3.0 - 2j]])
        for t in (3.0, 0.25, np.exp(1j * 0.7), 2.0 * np.exp(-1j * 1.1)):
            torus = np.diag([t, 1.0 / t])
            assert np.max(np.abs(chart.embed(g @ torus) - chart.embed(g))) <= 1e-12

    def test_determinant_survives_as_coordinate_difference(self):
        chart = gp.InvariantEmbedding()
        rng = np.random.default_rng(0)
        for _ in range(50):
            g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            w = chart.embed(g)
            det = g[0, 0] * g[1, 1] - g[1, 0] * g[0, 1]
            assert abs(w[1] - w[2] - det) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.5, 2.0), st.floats(-3.0, 3.0))
    def test_invariance_for_arbitrary_torus_elements(self, mod, arg):
        chart = gp.InvariantEmbedding()
        g = np.array([[1.0 + 1j, -2.0], [0.5j, 3.0]])
        t = mod * np.exp(1j * arg)
        torus = np.diag([t, 1.0 / t])
        assert np.max(np.abs(chart.embed(g @ torus) - chart.embed(g))) <= 1e-12

    def test_only_dimension_two_exists(self):
        with pytest.raises(AmbientMismatch):
            gp.InvariantEmbedding(3)
        with pytest.raises(DimensionMismatch):
            gp.InvariantEmbedding().embed(np.eye(3))


class TestMCEstimate:
    def test_binomial_standard_error(self):
        est = gp.MCEstimate.from_hits(30, 400, seed=5)
        assert est.estimate == 30 / 400
        assert est.stderr == math.sqrt(0.075 * 0.925 / 400)
        assert est.samples == 400 and est.seed == 5

    def test_degenerate_proportions_have_zero_error(self):
        assert gp.MCEstimate.from_hits(0, 100, 0).stderr == 0.0
        assert gp.MCEstimate.from_hits(100, 100, 0).stderr == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            gp.MCEstimate(1.5, 0.0, 10, 0)
        with pytest.raises(ValueError):
            gp.MCEstimate(0.5, -0.1, 10, 0)
        with pytest.raises(ValueError):
            gp.MCEstimate(0.5, 0.1, 0, 0)

    def test_json_shape(self):
        blob = gp.MCEstimate.from_hits(1, 4, 9).to_json()
        assert set(blob) == {"estimate", "stderr", "samples", "seed"}


class TestMeasureEstimate:
    def test_huge_radius_catches_everything(self):
        est = gp.measure_estimate(_diag(1000.0), 1e9, 200, _sampler(0))
        assert est.estimate == 1.0

    def test_zero_radius_catches_nothing(self):
        est = gp.measure_estimate(_diag(10.0), 0.0, 200, _sampler(0))
        assert est.estimate == 0.0

    def test_zero_probe_rejected(self):
        with pytest.raises(ZeroVector):
            gp.measure_estimate(np.zeros((2, 2)), 1.0, 10, _sampler(0))

    def test_shape_and_action_validation(self):
        with pytest.raises(DimensionMismatch):
            gp.measure_estimate(np.ones(3), 1.0, 10, _sampler(0))
        with pytest.raises(ValueError):
            gp.measure_estimate(_diag(2.0), 1.0, 10, _sampler(0), action="spin")
        with pytest.raises(AmbientMismatch):
            gp.measure_estimate(_diag(2.0), 1.0, 10, gp.HaarSampler(3, 0))

    def test_events_nest_exactly_in_radius(self):
        values = [
            gp.measure_estimate(_diag(10.0), r, 2000, _sampler(6)).estimate
            for r in (0.5, 1.0, 2.0, 5.0, 20.0, 60.0)
        ]
        assert values == sorted(values)

    def test_group_points_never_enter_the_unit_ball(self):
        # The tuple norm is the product of the column norms, which
        # Cauchy-Schwarz bounds below by |det| = 1 on the group; no
        # twist can move a group point inside radius one.
        for scale in (10.0, 100.0, 1000.0):
            est = gp.measure_estimate(_diag(scale), 1.0, 10_000, _sampler(3))
            assert est.estimate == 0.0

    def test_decay_is_strict_above_the_floor(self):
        # Same probes one radius up: the tail event has mass about
        # 18 (r/R^2)^2 per branch, so 10^4 samples resolve a strictly
        # decreasing triple at r = 150.
        ests = [
            gp.measure_estimate(_diag(scale), 150.0, 10_000, _sampler(3)).estimate
            for scale in (10.0, 100.0, 1000.0)
        ]
        assert ests[0] > ests[1] > ests[2]
        assert ests[0] == 1.0
        assert ests == [1.0, 0.0005, 0.0]

    def test_translation_action_is_an_exact_indicator(self):
        # Left translation moves both columns by the same unitary, so
        # the tuple norm never depends on the draw.
        g = _diag(2.0)
        above = gp.measure_estimate(g, 1.0001, 50, _sampler(1), action="translation")
        below = gp.measure_estimate(g, 0.9999, 50, _sampler(1), action="translation")
        assert above.estimate == 1.0
        assert below.estimate == 0.0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 2.0))
    def test_embedded_mode_event_inclusion_is_exact(self, seed, radius):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w = v + 0.1 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        eps = float(np.linalg.norm(v - w))
        sampler = _sampler(seed % 997)
        left = gp.measure_estimate(v, radius, 200, sampler)
        right = gp.measure_estimate(w, radius + eps + 1e-9, 200, sampler)
        assert left.estimate <= right.estimate

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 4.0))
    def test_matrix_mode_event_inclusion_with_quadratic_slack(self, seed, radius):
        # The chart is quadratic, so the inclusion radius grows by the
        # gap times the sum of the input norms.
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        w = v + 0.05 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        gap = float(np.linalg.norm(v - w))
        slack = gap * (np.linalg.norm(v) + np.linalg.norm(w)) + 1e-9
        sampler = _sampler(seed % 991)
        left = gp.measure_estimate(v, radius, 200, sampler)
        right = gp.measure_estimate(w, radius + slack, 200, sampler)
        assert left.estimate <= right.estimate

    def test_report_row_matches_csv_columns(self):
        est = gp.measure_estimate(_diag(10.0), 1.0, 100, _sampler(2))
        row = gp.mc_report_row("conjugation", _diag(10.0), 1.0, est)
        assert tuple(row) == gp.MC_CSV_COLUMNS
        assert row["v_norm"] == pytest.approx(np.sqrt(100.0 + 0.01))
        with pytest.raises(ValueError):
            gp.mc_report_row("spin", _diag(10.0), 1.0, est)


class TestGEstimate:
    def test_radius_above_sup_bound_saturates(self):
        # Conjugation preserves the entry norm, so a unit probe's two
        # columns square-sum to one and the tuple norm stays under 1/2.
        est = gp.g_estimate(0.6, 8, 500, _sampler(0))
        assert est.estimate == 1.0

    def test_envelope_nonincreasing_under_halving(self):
        values = [
            gp.g_estimate(r, 8, 2000, _sampler(0)).estimate
            for r in (0.5, 0.25, 0.125)
        ]
        assert values[0] >= values[1] >= values[2]
        assert values == [1.0, 0.0705, 0.0]

    def test_small_radius_envelope_regression(self):
        est = gp.g_estimate(0.01, 8, 10_000, _sampler(0))
        # Frozen from the shipped run; every probe determinant is far
        # above the radius, so the envelope vanishes outright.
        assert est.estimate <= 0.2
        assert est.estimate == 0.0

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            gp.g_estimate(0.0, 4, 100, _sampler(0))
        with pytest.raises(ValueError):
            gp.g_estimate(1.0, 0, 100, _sampler(0))


class TestThresholdEstimateType:
    def test_json_round_trip(self):
        th = gp.ThresholdEstimate((1.0, 2.0), (0.25, 0.125), 500, 4, seed=9)
        blob = th.to_json()
        assert set(blob) == {"R", "delta", "config"}
        assert blob["config"] == {
            "samples_per_level": 500,
            "sphere_probes": 4,
            "seed": 9,
        }
        assert gp.ThresholdEstimate.from_json(blob) == th

    def test_validation(self):
        with pytest.raises(ValueError):
            gp.ThresholdEstimate((2.0, 1.0), (0.25, 0.125), 10, 2)
        with pytest.raises(ValueError):
            gp.ThresholdEstimate((1.0,), (0.25, 0.125), 10, 2)
        with pytest.raises(ValueError):
            gp.ThresholdEstimate((), (), 10, 2)
        with pytest.raises(ValueError):
            gp.ThresholdEstimate((-1.0,), (0.25,), 10, 2)


class TestThresholdSearch:
    def test_budgets_follow_the_halving_schedule(self):
        th = gp.threshold_estimate(5, seed=0)
        assert th.delta == (0.25, 0.125, 0.0625, 0.03125, 0.015625)
        assert len(th) == 5

    def test_radii_nondecreasing_with_frozen_regression(self):
        th = gp.threshold_estimate(5, seed=0)
        assert list(th.rhat) == sorted(th.rhat)
        assert np.allclose(
            th.rhat, (1.703125, 2.6875, 3.71875, 4.5, 5.21875), rtol=0.05
        )

    def test_levels_use_disjoint_draw_windows(self):
        # The first level of a deep run reproduces a one-level run
        # exactly: each level owns its own stretch of the stream.
        deep = gp.threshold_estimate(3, seed=0)
        shallow = gp.threshold_estimate(1, seed=0)
        assert deep.rhat[0] == shallow.rhat[0]

    def test_sanity_points_escape_simultaneously(self):
        # Points twice as far as the estimated radii: the budgets sum
        # to under one half, so a sampled twist pushing every level
        # past its height appears well within a thousand draws.
        th = gp.threshold_estimate(5, samples_per_level=10_000, seed=0)
        probes = gp._unit_probes(0, 8)
        chart = gp.InvariantEmbedding()
        ks = gp.haar_su_batch(gp.HaarSampler(2, 123), 1000)
        ok = np.ones(1000, dtype=bool)
        for level in range(1, 6):
            point = 2.0 * th.rhat[level - 1] * probes[(level - 1) % 8]
            moved = np.einsum("kji,jl,klm->kim", ks.conj(), point, ks)
            heights = np.linalg.norm(chart.embed_batch(moved), axis=-1)
            ok &= heights >= level
        assert int(ok.sum()) >= 1

    def test_cap_exhaustion_raises(self, monkeypatch):
        # The shipped event always clears the budget at finite radius,
        # so exercising the guard narrows the cap below the bracket.
        monkeypatch.setattr(gp, "RADIUS_CAP", 0.5)
        with pytest.raises(SearchExhausted):
            gp.threshold_estimate(1, samples_per_level=200, seed=0)

    def test_level_validation(self):
        with pytest.raises(ValueError):
            gp.threshold_estimate(0)
        with pytest.raises(ValueError):
            gp.threshold_estimate(1, samples_per_level=0)


class TestOmegaCheck:
    def test_diagonal_tower_passes(self):
        pts = tuple(_diag(float(2**j)) for j in range(1, 9))
        d = DiscreteSequence(sln(2), pts, GeneratorInfo.of("diagtorus", count=8))
        report = gp.omega_check(d, 1000, _sampler(5))
        assert report.fraction >= 0.99
        assert report.samples == 1000

    def test_central_pair_is_exempt(self):
        # Negating a matrix flips both columns, so every entry product
        # and hence the image is bit-identical; the ratio -I is central
        # and the collision is allowed.
        m = np.array([[2.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
        d = DiscreteSequence(sln(2), (m, -m))
        report = gp.omega_check(d, 500, _sampler(1))
        assert report.fraction == 1.0
        assert report.failures == ()

    def test_single_point_always_passes(self):
        m = np.array([[2.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
        report = gp.omega_check(DiscreteSequence(sln(2), (m,)), 200, _sampler(2))
        assert report.fraction == 1.0

    def test_non_central_coset_collision_is_diagnosed(self):
        # A pair differing by a small torus factor collides under every
        # twist while its ratio stays away from the center.
        x = np.array([[2.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
        y = x @ np.diag([1.0 + 1e-7, 1.0 / (1.0 + 1e-7)])
        report = gp.omega_check(DiscreteSequence(sln(2), (x, y)), 300, _sampler(4))
        assert report.fraction == 0.0
        index, reason = report.failures[0]
        assert index == 0
        assert "not central" in reason

    def test_fiber_cap_parameter_reaches_properness(self):
        m = np.array([[2.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
        d = DiscreteSequence(sln(2), (m, -m))
        report = gp.omega_check(d, 100, _sampler(1), max_fiber=1)
        assert report.fraction == 0.0
        assert "fiber of size 2" in report.failures[0][1]

    def test_input_validation(self):
        with pytest.raises(AmbientMismatch):
            gp.omega_check(
                DiscreteSequence(cn(2), (np.array([1.0 + 0j, 0.0]),)),
                10,
                _sampler(0),
            )
        m = np.array([[2.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
        with pytest.raises(ValueError):
            gp.omega_check(DiscreteSequence(sln(2), ()), 10, _sampler(0))
        with pytest.raises(ValueError):
            gp.omega_check(DiscreteSequence(sln(2), (m,)), 0, _sampler(0))

    def test_report_json_shape(self):
        m = np.array([[2.0, 1.0], [1.0, 1.0]], dtype=np.complex128)
        report = gp.omega_check(DiscreteSequence(sln(2), (m,)), 50, _sampler(2))
        blob = report.to_json()
        assert set(blob) == {"fraction", "samples", "seed", "failures"}
        assert blob["failures"] == []


class TestSelectTameSubset:
    def _thresholds(self) -> gp.ThresholdEstimate:
        return gp.ThresholdEstimate(
            (5.0, 50.0, 500.0), (0.25, 0.125, 0.0625), 100, 8, seed=0
        )

    def test_greedy_selects_the_climbing_tail(self):
        points = [np.array([radius + 0j, 0.0]) for radius in (1, 10, 100, 1000)]
        out = gp.select_tame_subset(points, self._thresholds())
        assert len(out) == 3
        assert [p[0].real for p in out.points] == [10.0, 100.0, 1000.0]
        assert out.generator.family == "threshold-select"
        assert out.generator.get("depth") == 3

    def test_everything_bounded_is_rejected(self):
        points = [np.array([2.0 + 0j, 0.0]), np.array([4.0 + 0j, 0.0])]
        with pytest.raises(PrefixTooBounded):
            gp.select_tame_subset(points, self._thresholds())

    def test_single_admissible_point_gives_depth_one(self):
        out = gp.select_tame_subset([np.array([7.0 + 0j, 0.0])], self._thresholds())
        assert len(out) == 1
        assert out.generator.get("depth") == 1

    def test_group_points_keep_the_matrix_ambient(self):
        mats = [_diag(float(2**j)) for j in range(3, 7)]
        th = gp.ThresholdEstimate((4.0, 30.0), (0.25, 0.125), 100, 8)
        out = gp.select_tame_subset(mats, th)
        assert out.ambient == sln(2)
        assert len(out) == 2

    def test_sequence_input_keeps_ambient_and_records_source(self):
        pts = tuple(np.array([float(10**j) + 0j, 1.0]) for j in range(4))
        d = DiscreteSequence(cn(2), pts, GeneratorInfo.of("cn-powers", alpha=1))
        out = gp.select_tame_subset(d, self._thresholds())
        assert out.ambient == cn(2)
        assert out.generator.get("source") == "cn-powers"

    def test_mixed_flat_widths_rejected(self):
        points = [np.array([10.0 + 0j]), np.array([20.0 + 0j, 0.0])]
        with pytest.raises(DimensionMismatch):
            gp.select_tame_subset(points, self._thresholds())

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.1, 1e6), min_size=1, max_size=12, unique=True))
    def test_selected_heights_clear_their_radii(self, norms):
        thresholds = self._thresholds()
        points = [np.array([x + 0j]) for x in norms]
        try:
            out = gp.select_tame_subset(points, thresholds)
        except PrefixTooBounded:
            assert all(x <= thresholds.rhat[0] for x in norms)
            return
        for i, p in enumerate(out.points):
            assert np.linalg.norm(p) > thresholds.rhat[i]
