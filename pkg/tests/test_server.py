"""Tests for server aggregation: weighting, ordering, failures, coupling."""

import numpy as np
import pytest

from fedhen import (NestedArchSpec, RoundUploads, aggregate_decoupled,
                    aggregate_shared, build_index_map, constraint_residual,
                    project)

from conftest import make_arch


def naive_mean(vectors):
    """Sequential per-element accumulation in the order given."""
    acc = [0.0] * len(vectors[0])
    for vec in vectors:
        for i, v in enumerate(vec):
            acc[i] += v
    return np.array([a / len(vectors) for a in acc])


def random_uploads(arch, rng, n_simple, n_complex, failed=()):
    simple = [(d, rng.standard_normal(arch.simple_param_count))
              for d in range(n_simple)]
    complex_ = [(100 + d, rng.standard_normal(arch.param_count))
                for d in range(n_complex)]
    return RoundUploads(simple, complex_, frozenset(failed))


class TestAggregateShared:
    def test_single_simple_upload(self):
        arch = NestedArchSpec((1, 1), (1, 2), (1, 1), (1, 2), n_classes=2)
        subnet, rest = build_index_map(arch)
        prev_ws = np.zeros(arch.simple_param_count)
        prev_wc = np.arange(arch.param_count, dtype=float)
        up = np.random.default_rng(0).standard_normal(arch.simple_param_count)
        uploads = RoundUploads([(3, up)], [])
        w_s, w_c, stalled = aggregate_shared(uploads, prev_ws, prev_wc, subnet, rest)
        assert not stalled
        assert np.array_equal(w_s, up)
        assert np.array_equal(w_c[subnet], up)
        assert np.array_equal(w_c[rest], prev_wc[rest])

    def test_two_device_uniform_weighting(self):
        arch = NestedArchSpec((1, 1), (1, 2), (1, 1), (1, 2), n_classes=2)
        subnet, rest = build_index_map(arch)
        w_simple = np.zeros(arch.simple_param_count)
        w_complex = np.zeros(arch.param_count)
        w_complex[subnet] = 2.0
        uploads = RoundUploads([(0, w_simple)], [(1, w_complex)])
        w_s, _, _ = aggregate_shared(uploads, np.zeros_like(w_simple),
                                     np.zeros_like(w_complex), subnet, rest)
        assert np.array_equal(w_s, np.full(arch.simple_param_count, 1.0))

    def test_matches_naive_oracle(self):
        arch = make_arch()
        subnet, rest = build_index_map(arch)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            uploads = random_uploads(arch, rng, int(rng.integers(0, 4)),
                                     int(rng.integers(0, 4)))
            if not uploads.simple_models and not uploads.complex_models:
                continue
            prev_ws = rng.standard_normal(arch.simple_param_count)
            prev_wc = rng.standard_normal(arch.param_count)
            w_s, w_c, stalled = aggregate_shared(uploads, prev_ws, prev_wc,
                                                 subnet, rest)
            assert not stalled
            contribs = [w for _, w in uploads.simple_models]
            contribs += [w[subnet] for _, w in uploads.complex_models]
            np.testing.assert_array_equal(w_s, naive_mean(contribs))
            if uploads.complex_models:
                rest_mean = naive_mean([w[rest] for _, w in uploads.complex_models])
                np.testing.assert_array_equal(w_c[rest], rest_mean)
            else:
                np.testing.assert_array_equal(w_c[rest], prev_wc[rest])
            np.testing.assert_array_equal(w_c[subnet], w_s)

    def test_upload_order_irrelevant(self):
        arch = make_arch()
        subnet, rest = build_index_map(arch)
        rng = np.random.default_rng(5)
        uploads = random_uploads(arch, rng, 3, 3)
        shuffled = RoundUploads(uploads.simple_models[::-1],
                                uploads.complex_models[::-1])
        prev_ws = np.zeros(arch.simple_param_count)
        prev_wc = np.zeros(arch.param_count)
        a = aggregate_shared(uploads, prev_ws, prev_wc, subnet, rest)
        b = aggregate_shared(shuffled, prev_ws, prev_wc, subnet, rest)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_failed_devices_shrink_divisor(self):
        arch = make_arch()
        subnet, rest = build_index_map(arch)
        rng = np.random.default_rng(6)
        uploads = random_uploads(arch, rng, 3, 2, failed={1, 100})
        w_s, w_c, _ = aggregate_shared(uploads, np.zeros(arch.simple_param_count),
                                       np.zeros(arch.param_count), subnet, rest)
        survivors = [w for d, w in uploads.simple_models if d != 1]
        survivors += [w[subnet] for d, w in uploads.complex_models if d != 100]
        np.testing.assert_array_equal(w_s, naive_mean(survivors))
        rest_survivors = [w[rest] for d, w in uploads.complex_models if d != 100]
        np.testing.assert_array_equal(w_c[rest], naive_mean(rest_survivors))

    def test_all_failed_stalls_and_keeps_previous(self):
        arch = make_arch()
        subnet, rest = build_index_map(arch)
        rng = np.random.default_rng(7)
        uploads = random_uploads(arch, rng, 2, 1, failed={0, 1, 100})
        prev_ws = rng.standard_normal(arch.simple_param_count)
        prev_wc = rng.standard_normal(arch.param_count)
        w_s, w_c, stalled = aggregate_shared(uploads, prev_ws, prev_wc, subnet, rest)
        assert stalled
        assert np.array_equal(w_s, prev_ws) and np.array_equal(w_c, prev_wc)

    def test_constraint_holds_bitwise(self):
        arch = make_arch()
        subnet, rest = build_index_map(arch)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            uploads = random_uploads(arch, rng, int(rng.integers(1, 4)),
                                     int(rng.integers(0, 4)))
            w_s, w_c, _ = aggregate_shared(uploads,
                                           np.zeros(arch.simple_param_count),
                                           np.zeros(arch.param_count), subnet, rest)
            assert constraint_residual(w_s, w_c, subnet) == 0.0
            assert np.array_equal(project(w_c, subnet), w_s)


class TestAggregateDecoupled:
    def test_simple_only_round(self):
        uploads = RoundUploads([(0, np.array([1.0, 3.0])), (1, np.array([3.0, 5.0]))], [])
        prev_wc = np.array([7.0, 8.0, 9.0])
        w_s, w_c, stalled = aggregate_decoupled(uploads, np.zeros(2), prev_wc)
        assert not stalled
        assert np.array_equal(w_s, [2.0, 4.0])
        assert np.array_equal(w_c, prev_wc)

    def test_complex_only_round(self):
        uploads = RoundUploads([], [(5, np.array([2.0, 2.0])), (6, np.array([4.0, 6.0]))])
        prev_ws = np.array([1.0])
        w_s, w_c, _ = aggregate_decoupled(uploads, prev_ws, np.zeros(2))
        assert np.array_equal(w_s, prev_ws)
        assert np.array_equal(w_c, [3.0, 4.0])

    def test_matches_naive_group_means(self):
        arch = make_arch()
        for seed in range(20):
            rng = np.random.default_rng([11, seed])
            uploads = random_uploads(arch, rng, int(rng.integers(1, 4)),
                                     int(rng.integers(1, 4)))
            w_s, w_c, _ = aggregate_decoupled(uploads,
                                              np.zeros(arch.simple_param_count),
                                              np.zeros(arch.param_count))
            np.testing.assert_array_equal(
                w_s, naive_mean([w for _, w in uploads.simple_models]))
            np.testing.assert_array_equal(
                w_c, naive_mean([w for _, w in uploads.complex_models]))

    def test_no_cross_architecture_coupling(self):
        arch = make_arch()
        subnet, _ = build_index_map(arch)
        rng = np.random.default_rng(13)
        uploads = random_uploads(arch, rng, 2, 2)
        w_s, w_c, _ = aggregate_decoupled(uploads,
                                          np.zeros(arch.simple_param_count),
                                          np.zeros(arch.param_count))
        assert constraint_residual(w_s, w_c, subnet) > 0.0


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        RoundUploads([(0, np.zeros(2))], [(0, np.zeros(3))])
