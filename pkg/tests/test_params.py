import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from m2n2.errors import DataFormatError
from m2n2.params import (
    MergeSpec,
    SegmentSpec,
    load_params,
    merge_segments,
    merge_split,
    mutate_gaussian,
    sample_merge_spec,
    save_params,
    slerp,
)


def finite_vectors(dim):
    return arrays(np.float64, dim, elements=st.floats(-10, 10, allow_nan=False))


class TestSlerp:
    def test_endpoints_exact(self, rng):
        a = rng.standard_normal(17)
        b = rng.standard_normal(17)
        np.testing.assert_array_equal(slerp(a, b, 0.0), a)
        np.testing.assert_array_equal(slerp(a, b, 1.0), b)

    def test_quarter_circle_oracle(self):
        # closed form: omega = pi/2, both coefficients sin(pi/4) = sqrt(2)/2
        out = slerp([1.0, 0.0], [0.0, 1.0], 0.5)
        np.testing.assert_allclose(out, [0.70710678, 0.70710678], atol=1e-8)

    def test_parallel_fallback_returns_input(self, rng):
        a = rng.standard_normal(9)
        for t in (0.0, 0.3, 0.71, 1.0):
            np.testing.assert_allclose(slerp(a, a, t), a, rtol=1e-12)

    def test_zero_vector_falls_back_to_lerp(self, rng):
        b = rng.standard_normal(5)
        zero = np.zeros(5)
        np.testing.assert_allclose(slerp(zero, b, 0.25), 0.25 * b)

    def test_antiparallel_falls_back_to_lerp(self):
        a = np.array([2.0, 0.0])
        np.testing.assert_allclose(slerp(a, -a, 0.5), [0.0, 0.0], atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            slerp([1.0, 2.0], [1.0, 2.0, 3.0], 0.5)

    def test_t_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            slerp([1.0], [2.0], 1.5)

    def test_unit_norm_preserved(self, rng):
        for _ in range(50):
            a = rng.standard_normal(12)
            b = rng.standard_normal(12)
            a /= np.linalg.norm(a)
            b /= np.linalg.norm(b)
            for t in np.linspace(0.0, 1.0, 7):
                assert abs(np.linalg.norm(slerp(a, b, t)) - 1.0) < 1e-6

    @given(a=finite_vectors(8), b=finite_vectors(8),
           t=st.floats(0.0, 1.0, allow_nan=False))
    @settings(max_examples=150, deadline=None)
    def test_symmetry_and_finiteness(self, a, b, t):
        left = slerp(a, b, t)
        right = slerp(b, a, 1.0 - t)
        assert np.all(np.isfinite(left))
        assert left.shape == a.shape
        np.testing.assert_allclose(left, right, atol=1e-9)


class TestMergeSplit:
    def test_wm_zero_is_prefix_suffix_concat(self, rng):
        a = rng.standard_normal(10)
        b = rng.standard_normal(10)
        out = merge_split(a, b, MergeSpec(w_m=0.0, w_s=4))
        np.testing.assert_array_equal(out, np.concatenate([a[:4], b[4:]]))

    def test_split_at_end_is_whole_vector_slerp(self, rng):
        a = rng.standard_normal(6)
        b = rng.standard_normal(6)
        out = merge_split(a, b, MergeSpec(w_m=0.3, w_s=6))
        np.testing.assert_array_equal(out, slerp(a, b, 0.3))

    def test_per_segment_oracle(self):
        a = np.array([1.0, 0.0, 0.0, 2.0])
        b = np.array([0.0, 1.0, 2.0, 0.0])
        out = merge_split(a, b, MergeSpec(w_m=0.5, w_s=2))
        expected = np.concatenate([
            slerp([1.0, 0.0], [0.0, 1.0], 0.5),
            slerp([0.0, 2.0], [2.0, 0.0], 0.5),
        ])
        np.testing.assert_allclose(out, expected, atol=1e-12)

    @given(a=finite_vectors(7), b=finite_vectors(7), w_m=st.floats(0, 1))
    @settings(max_examples=100, deadline=None)
    def test_degenerate_split_reduces_to_slerp(self, a, b, w_m):
        at_end = merge_split(a, b, MergeSpec(w_m=w_m, w_s=7))
        at_start = merge_split(a, b, MergeSpec(w_m=w_m, w_s=0))
        np.testing.assert_array_equal(at_end, slerp(a, b, w_m))
        np.testing.assert_array_equal(at_start, slerp(a, b, 1.0 - w_m))

    def test_invalid_spec_rejected(self):
        a = np.zeros(4)
        with pytest.raises(ValueError, match="split index"):
            merge_split(a, a, MergeSpec(w_m=0.5, w_s=5))
        with pytest.raises(ValueError, match="mixing ratio"):
            merge_split(a, a, MergeSpec(w_m=1.5, w_s=2))
        with pytest.raises(ValueError, match="dimension mismatch"):
            merge_split(np.zeros(3), a, MergeSpec(w_m=0.5, w_s=1))


class TestMergeSegments:
    def two_segment_spec(self):
        return MergeSpec(segments=(
            SegmentSpec(start=0, end=3, w_m=0.2, w_s=1),
            SegmentSpec(start=3, end=6, w_m=0.9, w_s=2),
        ))

    def test_single_full_segment_equals_merge_split(self, rng):
        a = rng.standard_normal(6)
        b = rng.standard_normal(6)
        spec = MergeSpec(segments=(SegmentSpec(start=0, end=6, w_m=0.4, w_s=2),))
        np.testing.assert_array_equal(
            merge_segments(a, b, spec),
            merge_split(a, b, MergeSpec(w_m=0.4, w_s=2)),
        )

    def test_all_second_parent(self, rng):
        a = rng.standard_normal(6)
        b = rng.standard_normal(6)
        # w_m=0, w_s=0: empty prefix, suffix interpolated at 1-w_m=1 -> parent B
        spec = MergeSpec(segments=(
            SegmentSpec(start=0, end=3, w_m=0.0, w_s=0),
            SegmentSpec(start=3, end=6, w_m=0.0, w_s=0),
        ))
        np.testing.assert_array_equal(merge_segments(a, b, spec), b)

    def test_composition_oracle(self, rng):
        a = rng.standard_normal(6)
        b = rng.standard_normal(6)
        out = merge_segments(a, b, self.two_segment_spec())
        expected = np.concatenate([
            merge_split(a[:3], b[:3], MergeSpec(w_m=0.2, w_s=1)),
            merge_split(a[3:], b[3:], MergeSpec(w_m=0.9, w_s=2)),
        ])
        np.testing.assert_array_equal(out, expected)

    def test_bad_partitions_rejected(self):
        a = np.zeros(6)
        overlapping = MergeSpec(segments=(
            SegmentSpec(0, 4, 0.5, 0), SegmentSpec(3, 6, 0.5, 0)))
        with pytest.raises(ValueError, match="contiguous"):
            merge_segments(a, a, overlapping)
        short = MergeSpec(segments=(SegmentSpec(0, 4, 0.5, 0),))
        with pytest.raises(ValueError, match="cover"):
            merge_segments(a, a, short)
        with pytest.raises(ValueError, match="segments"):
            merge_segments(a, a, MergeSpec(w_m=0.5, w_s=1))
        with pytest.raises(ValueError, match="segments"):
            merge_split(a, a, self.two_segment_spec())


class TestMutateGaussian:
    def test_deterministic_given_seed(self):
        a = np.zeros(4)
        out1 = mutate_gaussian(a, 0.05, np.random.default_rng(3))
        out2 = mutate_gaussian(a, 0.05, np.random.default_rng(3))
        np.testing.assert_array_equal(out1, out2)

    def test_sigma_zero_limit(self, rng):
        a = rng.standard_normal(30)
        np.testing.assert_allclose(mutate_gaussian(a, 1e-12, rng), a, atol=1e-10)

    def test_noise_scale_matches_sigma(self):
        a = np.zeros(100_000)
        out = mutate_gaussian(a, 0.05, np.random.default_rng(11))
        assert abs(np.std(out - a) / 0.05 - 1.0) < 0.02

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            mutate_gaussian(np.zeros(3), 0.0, np.random.default_rng(0))
        with pytest.raises(ValueError, match="sigma"):
            mutate_gaussian(np.zeros(3), -1.0, np.random.default_rng(0))


class TestSampleMergeSpec:
    def test_split_range_tiny_dim(self):
        rng = np.random.default_rng(5)
        seen = {sample_merge_spec(rng, 1).w_s for _ in range(100)}
        assert seen == {0, 1}

    def test_mixing_ratio_mean(self):
        rng = np.random.default_rng(6)
        values = [sample_merge_spec(rng, 10).w_m for _ in range(100_000)]
        assert abs(np.mean(values) - 0.5) < 0.005

    def test_deterministic_given_seed(self):
        draws1 = [sample_merge_spec(np.random.default_rng(9), 50) for _ in range(5)]
        draws2 = [sample_merge_spec(np.random.default_rng(9), 50) for _ in range(5)]
        assert draws1 == draws2

    def test_bad_dim_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            sample_merge_spec(np.random.default_rng(0), 0)

    def test_segmented_sampling_is_valid(self):
        rng = np.random.default_rng(7)
        spec = sample_merge_spec(rng, 10, segments=[(0, 4), (4, 10)])
        spec.validate(10)
        assert [s.start for s in spec.segments] == [0, 4]
        for seg in spec.segments:
            assert 0 <= seg.w_s <= seg.end - seg.start


class TestPersistence:
    def test_memory_roundtrip(self, tmp_path, rng):
        values = rng.standard_normal(257).astype(np.float32).astype(np.float64)
        path = tmp_path / "model.m2n2"
        save_params(path, values)
        np.testing.assert_array_equal(load_params(path), values)

    def test_file_roundtrip_bit_exact(self, tmp_path, rng):
        first = tmp_path / "a.m2n2"
        second = tmp_path / "b.m2n2"
        save_params(first, rng.standard_normal(64))
        save_params(second, load_params(first))
        assert first.read_bytes() == second.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.m2n2"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(DataFormatError, match="magic"):
            load_params(path)

    def test_truncated_payload_rejected(self, tmp_path, rng):
        path = tmp_path / "model.m2n2"
        save_params(path, rng.standard_normal(16))
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(DataFormatError, match="payload"):
            load_params(path)

    def test_unsupported_version_rejected(self, tmp_path):
        path = tmp_path / "model.m2n2"
        save_params(path, np.zeros(2))
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError, match="version"):
            load_params(path)

    def test_nonfinite_save_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="non-finite"):
            save_params(tmp_path / "model.m2n2", np.array([1.0, np.inf]))


@given(a=finite_vectors(9), b=finite_vectors(9),
       w_m=st.floats(0, 1), w_s=st.integers(0, 9))
@settings(max_examples=150, deadline=None)
def test_operators_preserve_dimension_and_finiteness(a, b, w_m, w_s):
    out = merge_split(a, b, MergeSpec(w_m=w_m, w_s=w_s))
    assert out.shape == a.shape
    assert np.all(np.isfinite(out))
