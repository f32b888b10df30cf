import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genaudio_eval.corruption import (
    CorruptionError,
    CorruptionSpec,
    add_noise,
    apply_corruption,
    corrupted_count,
    corruption_file_id,
    mask_random,
    mix_interference,
    reorder_events,
)
from genaudio_eval.errors import InvariantError
from genaudio_eval.mel import MelConfig, MelSpectrogram

FLOOR = np.log(1e-10)


def make_mel(values, source_id="m", n_mels=None):
    values = np.asarray(values, dtype=np.float64)
    cfg = MelConfig(n_mels=n_mels or values.shape[1])
    return MelSpectrogram(values, cfg, source_id)


def random_mel(rng, t=40, m=8, source_id="m", lo=0.0, hi=10.0):
    return make_mel(rng.uniform(lo, hi, size=(t, m)), source_id=source_id)


class TestCorruptionSpec:
    def test_valid(self):
        spec = CorruptionSpec("noise", 0.5, seed=7)
        assert spec.segments == 4

    @pytest.mark.parametrize("kwargs", [
        {"kind": "blur", "fraction": 0.5},
        {"kind": "noise", "fraction": 1.5},
        {"kind": "noise", "fraction": -0.1},
        {"kind": "reorder", "fraction": 0.5, "segments": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvariantError):
            CorruptionSpec(**kwargs)


class TestAddNoise:
    def test_constant_mel_becomes_doubled_value(self, rng):
        mel = make_mel(np.full((30, 6), 4.0))
        out = add_noise(mel, rng)
        # Zero range -> zero variance -> deterministic shift by the mean.
        np.testing.assert_array_equal(out.values, np.full((30, 6), 8.0))

    def test_constant_mel_floor_clamp(self, rng):
        mel = make_mel(np.full((30, 6), -15.0))
        out = add_noise(mel, rng)
        np.testing.assert_array_equal(out.values, np.full((30, 6), max(-30.0, FLOOR)))

    def test_noise_field_statistics(self):
        # Oracle: sample statistics of the emitted noise field.
        rng_data = np.random.default_rng(7)
        mel = make_mel(rng_data.uniform(0.0, 10.0, size=(100, 64)))
        out = add_noise(mel, np.random.default_rng(21))
        noise = out.values - mel.values  # floor never binds this high up
        n = noise.size
        target_mean = mel.values.mean()
        target_var = 0.2 * (mel.values.max() - mel.values.min())
        se_mean = np.sqrt(target_var / n)
        assert abs(noise.mean() - target_mean) <= 3 * se_mean
        se_var = target_var * np.sqrt(2.0 / (n - 1))
        assert abs(noise.var(ddof=1) - target_var) <= 3 * se_var

    def test_deterministic_for_fixed_seed(self, rng):
        mel = random_mel(np.random.default_rng(3))
        a = add_noise(mel, np.random.default_rng(99))
        b = add_noise(mel, np.random.default_rng(99))
        np.testing.assert_array_equal(a.values, b.values)

    def test_shape_and_floor_preserved(self, rng):
        # Values hugging the floor force the clamp to actually engage.
        mel = random_mel(rng, lo=FLOOR, hi=FLOOR + 2.0)
        out = add_noise(mel, rng)
        assert out.values.shape == mel.values.shape
        assert out.values.min() >= FLOOR
        assert np.all(np.isfinite(out.values))


class TestMaskRandom:
    def test_860_frame_example(self):
        # 860 frames -> two spans of exactly 86 frames each.
        rng = np.random.default_rng(5)
        mel = make_mel(np.ones((860, 4)))
        meta = {}
        out = mask_random(mel, rng, meta=meta)
        assert meta["mask_span"] == 86
        for start in meta["mask_starts"]:
            assert 0 <= start <= 860 - 86
            np.testing.assert_array_equal(out.values[start : start + 86], FLOOR)

    def test_default_config_span(self):
        rng = np.random.default_rng(5)
        mel = make_mel(np.ones((994, 4)))
        meta = {}
        mask_random(mel, rng, meta=meta)
        assert meta["mask_span"] == 99

    def test_masked_entry_count_matches_union_of_spans(self):
        # Oracle: recount masked entries from the recorded start positions.
        for seed in range(12):
            rng = np.random.default_rng(seed)
            mel = make_mel(np.ones((60, 5)))
            meta = {}
            out = mask_random(mel, rng, meta=meta)
            span = meta["mask_span"]
            frames = set()
            for start in meta["mask_starts"]:
                frames.update(range(start, start + span))
            assert (out.values == FLOOR).all(axis=1).sum() == len(frames)
            untouched = sorted(set(range(60)) - frames)
            np.testing.assert_array_equal(out.values[untouched], 1.0)

    def test_too_short_rejected(self, rng):
        with pytest.raises(CorruptionError, match="T >= 20"):
            mask_random(make_mel(np.ones((19, 4))), rng)


class TestMixInterference:
    def test_self_mix_raises_by_ln2(self, rng):
        mel = random_mel(rng, lo=-5.0, hi=5.0)
        out = mix_interference(mel, mel)
        np.testing.assert_allclose(out.values, mel.values + np.log(2.0), atol=1e-9)

    def test_scaled_copy_power_matched(self, rng):
        mel = random_mel(rng, lo=-5.0, hi=5.0)
        scaled = make_mel(mel.values + 2.5, source_id="loud")
        out = mix_interference(mel, scaled)
        # 0 dB: post-scale interferer power equals target power, so the mix
        # is exactly double the target in linear power.
        np.testing.assert_allclose(out.values, mel.values + np.log(2.0), atol=1e-9)

    def test_disjoint_band_energies(self):
        # Oracle: per-band linear energy summation before/after.
        t, m = 30, 6
        base = np.full((t, m), FLOOR)
        target = base.copy()
        target[:, 1] = 5.0
        interferer = base.copy()
        interferer[:, 4] = 3.0
        out = mix_interference(make_mel(target), make_mel(interferer, source_id="i"))
        p_target = np.exp(target)
        p_int = np.exp(interferer)
        scale = p_target.sum() / p_int.sum()
        expected = np.log(np.maximum(p_target + scale * p_int, 1e-10))
        np.testing.assert_allclose(out.values, expected, atol=1e-12)
        band_energy = np.exp(out.values).sum(axis=0)
        assert band_energy[1] == pytest.approx(np.exp(5.0) * t, rel=1e-6)
        assert band_energy[4] == pytest.approx(scale * np.exp(3.0) * t, rel=1e-6)

    def test_shape_mismatch_rejected(self, rng):
        a = random_mel(rng, t=30)
        b = random_mel(rng, t=31, source_id="i")
        with pytest.raises(CorruptionError, match="shape"):
            mix_interference(a, b)


class TestReorderEvents:
    def test_two_segments_always_swap(self, rng):
        mel = random_mel(rng, t=40)
        out = reorder_events(mel, 2, np.random.default_rng(0))
        np.testing.assert_array_equal(out.values[:20], mel.values[20:])
        np.testing.assert_array_equal(out.values[20:], mel.values[:20])

    def test_segment_lengths_for_default_config(self, rng):
        mel = random_mel(rng, t=994)
        meta = {}
        reorder_events(mel, 4, np.random.default_rng(1), meta=meta)
        assert meta["segment_lengths"] == [249, 249, 248, 248]

    def test_permutation_is_derangement(self, rng):
        for seed in range(20):
            meta = {}
            reorder_events(random_mel(rng, t=37), 5, np.random.default_rng(seed), meta=meta)
            perm = meta["segment_perm"]
            assert sorted(perm) == list(range(5))
            assert all(p != i for i, p in enumerate(perm))

    @given(t=st.integers(8, 120), k=st.integers(2, 8), seed=st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_frame_multiset_preserved(self, t, k, seed):
        if t < k:
            return
        rng = np.random.default_rng(seed)
        mel = random_mel(rng, t=t, m=4)
        out = reorder_events(mel, k, np.random.default_rng(seed + 1))
        got = np.array(sorted(map(tuple, out.values)))
        want = np.array(sorted(map(tuple, mel.values)))
        np.testing.assert_array_equal(got, want)

    def test_preconditions(self, rng):
        mel = random_mel(rng, t=3)
        with pytest.raises(CorruptionError):
            reorder_events(mel, 1, rng)
        with pytest.raises(CorruptionError):
            reorder_events(mel, 4, rng)


class TestApplyCorruption:
    def corpus(self, n=10, t=40):
        rng = np.random.default_rng(17)
        return [random_mel(rng, t=t, source_id=f"clip{i:02d}") for i in range(n)]

    def test_fraction_zero_is_identity(self):
        mels = self.corpus()
        out = apply_corruption(mels, CorruptionSpec("noise", 0.0, seed=1))
        assert all(o is m for o, m in zip(out, mels))

    def test_fraction_one_corrupts_everything(self):
        mels = self.corpus()
        out = apply_corruption(mels, CorruptionSpec("noise", 1.0, seed=1))
        assert all(not np.array_equal(o.values, m.values) for o, m in zip(out, mels))

    def test_fraction_selects_rounded_count_deterministically(self):
        mels = self.corpus()
        meta1, meta2 = {}, {}
        apply_corruption(mels, CorruptionSpec("noise", 0.3, seed=5), meta=meta1)
        apply_corruption(mels, CorruptionSpec("noise", 0.3, seed=5), meta=meta2)
        assert len(meta1["corrupted_ids"]) == 3
        assert meta1["corrupted_ids"] == meta2["corrupted_ids"]

    def test_ids_and_order_preserved(self):
        mels = self.corpus()
        out = apply_corruption(mels, CorruptionSpec("mask", 0.5, seed=2))
        assert [o.source_id for o in out] == [m.source_id for m in mels]

    @given(seed=st.integers(0, 500), f1=st.floats(0, 1), f2=st.floats(0, 1))
    @settings(max_examples=30, deadline=None)
    def test_nested_subsets_across_fractions(self, seed, f1, f2):
        lo, hi = sorted([f1, f2])
        mels = self.corpus()
        meta_lo, meta_hi = {}, {}
        apply_corruption(mels, CorruptionSpec("noise", lo, seed=seed), meta=meta_lo)
        apply_corruption(mels, CorruptionSpec("noise", hi, seed=seed), meta=meta_hi)
        assert set(meta_lo["corrupted_ids"]) <= set(meta_hi["corrupted_ids"])

    def test_interfere_requires_pool(self):
        with pytest.raises(CorruptionError, match="pool"):
            apply_corruption(self.corpus(), CorruptionSpec("interfere", 0.5, seed=1))

    def test_interfere_uses_pool_without_replacement(self):
        mels = self.corpus()
        rng = np.random.default_rng(8)
        pool = [random_mel(rng, t=40, source_id=f"noisebed{i}") for i in range(10)]
        meta = {}
        apply_corruption(mels, CorruptionSpec("interfere", 0.5, seed=3), interferer_pool=pool, meta=meta)
        used = [info["interferer_id"] for info in meta["items"].values()]
        assert len(used) == 5
        assert len(set(used)) == 5

    def test_small_pool_samples_with_replacement(self, caplog):
        mels = self.corpus()
        rng = np.random.default_rng(8)
        pool = [random_mel(rng, t=40, source_id="only")]
        meta = {}
        out = apply_corruption(
            mels, CorruptionSpec("interfere", 1.0, seed=3), interferer_pool=pool, meta=meta
        )
        assert len(meta["corrupted_ids"]) == 10
        assert all(np.isfinite(o.values).all() for o in out)

    def test_determinism_is_order_independent(self):
        mels = self.corpus()
        spec = CorruptionSpec("noise", 1.0, seed=11)
        out_fwd = apply_corruption(mels, spec)
        out_rev = apply_corruption(mels[::-1], spec)
        by_id = {o.source_id: o for o in out_rev}
        for o in out_fwd:
            np.testing.assert_array_equal(o.values, by_id[o.source_id].values)

    def test_mask_positions_recorded_per_item(self):
        mels = self.corpus(t=60)
        meta = {}
        apply_corruption(mels, CorruptionSpec("mask", 0.4, seed=9), meta=meta)
        assert set(meta["corrupted_ids"]) == set(meta["items"])
        for info in meta["items"].values():
            assert len(info["mask_starts"]) == 2


def test_corrupted_count_rounding():
    assert corrupted_count(0.0, 10) == 0
    assert corrupted_count(0.3, 10) == 3
    assert corrupted_count(0.25, 10) == 3  # half rounds up
    assert corrupted_count(1.0, 10) == 10
    assert corrupted_count(0.1, 20) == 2


def test_corruption_file_id_format():
    spec = CorruptionSpec("noise", 0.3, seed=1)
    assert corruption_file_id("clip07", spec) == "clip07#noise@0.3"
