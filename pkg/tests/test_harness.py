import json

import numpy as np
import pytest
from scipy.stats import spearmanr

from genaudio_eval.backbone import MelStatsProvider, embed_set, save_embedding_file
from genaudio_eval.corpus import write_interferer_pool, write_synthetic_corpus
from genaudio_eval.errors import DataError
from genaudio_eval.harness import (
    BenchmarkRow,
    BenchmarkTable,
    PipelineConfig,
    emit_report,
    load_corpus,
    run_evaluate,
    run_sweep,
    sweep_csv,
    sweep_svg,
    thread_cap,
)
from genaudio_eval.metrics import frechet_distance, gaussian_stats

FAST = PipelineConfig(clip_seconds=2.0)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    write_synthetic_corpus(d, n_clips=12, seed=0, seconds=2.0)
    return d


@pytest.fixture(scope="module")
def interferer_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("interferers")
    write_interferer_pool(d, n_clips=6, seed=1, seconds=2.0)
    return d


class TestRunEvaluate:
    def test_self_evaluation_is_zero(self, corpus_dir):
        report = run_evaluate(corpus_dir, corpus_dir, config=FAST)
        assert report.fd == 0.0 and report.fad == 0.0 and report.kl == 0.0
        assert report.isc > 1.0
        assert report.backbones == {"fd": "melstats", "fad": "melstats", "logits": "melstats"}

    def test_disjoint_corpora_positive_fd(self, corpus_dir, tmp_path):
        other = tmp_path / "other"
        write_synthetic_corpus(other, n_clips=10, seed=99, seconds=2.0)
        report = run_evaluate(other, corpus_dir, metrics=["fd"], config=FAST)
        assert report.fd > 0.0
        # Oracle: direct metric computation on the two embedding sets.
        provider = MelStatsProvider(64)
        gen = embed_set(load_corpus(other, FAST), provider)
        ref = embed_set(load_corpus(corpus_dir, FAST), provider)
        direct = frechet_distance(gaussian_stats(gen), gaussian_stats(ref))
        assert report.fd == pytest.approx(direct, rel=1e-12)

    def test_missing_kl_pair_names_id(self, corpus_dir, tmp_path):
        partial = tmp_path / "partial"
        partial.mkdir()
        for p in sorted(corpus_dir.glob("*.wav"))[:-1]:
            (partial / p.name).write_bytes(p.read_bytes())
        with pytest.raises(DataError, match="tone|noise"):
            run_evaluate(partial, corpus_dir, metrics=["kl"], config=FAST)

    def test_empty_directory_rejected(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(DataError, match="no .wav files"):
            run_evaluate(empty, empty, config=FAST)

    def test_report_written_to_json(self, corpus_dir, tmp_path):
        out = tmp_path / "report.json"
        report = run_evaluate(corpus_dir, corpus_dir, config=FAST, out_json=out)
        parsed = json.loads(out.read_text())
        assert parsed == report.to_dict()

    def test_emb1_backbone_end_to_end(self, corpus_dir, tmp_path, rng):
        # Synthetic EMB1 fixtures standing in for a real backbone extractor.
        emb_dir = tmp_path / "emb"
        emb_dir.mkdir()
        ids = [f"clip{i}" for i in range(8)]
        ref = embed_set_like(rng, ids, name="external")
        gen = embed_set_like(rng, ids, name="external")
        save_embedding_file(gen, emb_dir / "generated.emb1")
        save_embedding_file(ref, emb_dir / "reference.emb1")
        report = run_evaluate(
            tmp_path / "unused-gen", tmp_path / "unused-ref",
            backbone=f"emb:{emb_dir}", config=FAST,
        )
        assert report.fd > 0.0 and report.kl >= 0.0 and report.isc >= 1.0
        assert report.backbones["fd"].startswith("emb:")

    def test_mixed_backbones_fad_pair(self, corpus_dir, tmp_path, rng):
        emb_dir = tmp_path / "emb2"
        emb_dir.mkdir()
        ids = [p.stem for p in sorted(corpus_dir.glob("*.wav"))]
        save_embedding_file(embed_set_like(rng, ids, name="fadnet"), emb_dir / "generated.emb1")
        save_embedding_file(embed_set_like(rng, ids, name="fadnet"), emb_dir / "reference.emb1")
        report = run_evaluate(
            corpus_dir, corpus_dir,
            backbone="melstats", fad_backbone=f"emb:{emb_dir}", config=FAST,
        )
        assert report.fd == 0.0        # melstats self-comparison
        assert report.fad > 0.0        # independent random embeddings differ
        assert report.backbones["fd"] == "melstats"
        assert report.backbones["fad"].startswith("emb:")

    def test_unknown_backbone_selection(self, corpus_dir):
        with pytest.raises(DataError, match="backbone"):
            run_evaluate(corpus_dir, corpus_dir, backbone="vggish", config=FAST)


def embed_set_like(rng, ids, name):
    from genaudio_eval.backbone import EmbeddingSet

    n = len(ids)
    return EmbeddingSet(
        rng.normal(size=(n, 32)).astype(np.float32),
        rng.normal(size=(n, 8)).astype(np.float32),
        ids,
        name,
    )


@pytest.fixture(scope="module")
def noise_sweep(corpus_dir):
    return run_sweep(corpus_dir, "noise", steps=5, seed=0, config=FAST)


@pytest.fixture(scope="module")
def mask_sweep(corpus_dir):
    return run_sweep(corpus_dir, "mask", steps=11, seed=2, config=FAST)


class TestRunSweep:
    def test_grid_shape(self, noise_sweep):
        assert noise_sweep.fractions == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert len(noise_sweep.reports) == 5

    def test_fraction_zero_row_is_exactly_zero(self, noise_sweep):
        first = noise_sweep.reports[0]
        assert first.fd == 0.0 and first.fad == 0.0 and first.kl == 0.0

    def test_distance_grows_with_fraction(self, noise_sweep):
        fds = [r.fd for r in noise_sweep.reports]
        assert fds[0] < fds[-1]
        assert spearmanr(noise_sweep.fractions, fds).statistic >= 0.9

    def test_sweep_point_matches_direct_recomputation(self, corpus_dir, noise_sweep):
        # Oracle: corrupt + embed + Fréchet by hand for one grid point.
        from genaudio_eval.corruption import CorruptionSpec, apply_corruption

        mels = load_corpus(corpus_dir, FAST)
        provider = MelStatsProvider(64)
        clean = embed_set(mels, provider)
        corrupted = apply_corruption(mels, CorruptionSpec("noise", 0.5, seed=0))
        direct = frechet_distance(
            gaussian_stats(embed_set(corrupted, provider)), gaussian_stats(clean)
        )
        assert noise_sweep.reports[2].fd == pytest.approx(direct, rel=1e-12)

    def test_deterministic_outputs(self, corpus_dir, noise_sweep):
        again = run_sweep(corpus_dir, "noise", steps=5, seed=0, config=FAST)
        assert json.dumps(again.to_dict()) == json.dumps(noise_sweep.to_dict())
        assert sweep_csv(again) == sweep_csv(noise_sweep)

    def test_eleven_point_grid_default(self, noise_sweep):
        grid = [i / 10 for i in range(11)]
        assert len(grid) == 11 and grid[0] == 0.0 and grid[-1] == 1.0

    def test_interference_sweep_requires_pool(self, corpus_dir):
        with pytest.raises(DataError, match="interferer"):
            run_sweep(corpus_dir, "interfere", steps=3, config=FAST)

    def test_interference_sweep_runs(self, corpus_dir, interferer_dir):
        result = run_sweep(corpus_dir, "interfere", steps=3, seed=1,
                           interferer_dir=interferer_dir, config=FAST)
        assert result.reports[0].fd == 0.0
        assert result.reports[-1].fd > 0.0

    def test_small_corpus_rejected(self, tmp_path):
        small = tmp_path / "small"
        write_synthetic_corpus(small, n_clips=4, seed=3, seconds=2.0)
        with pytest.raises(DataError, match="at least 10"):
            run_sweep(small, "noise", steps=3, config=FAST)

    def test_too_few_steps_rejected(self, corpus_dir):
        with pytest.raises(DataError, match="steps"):
            run_sweep(corpus_dir, "noise", steps=1, config=FAST)


class TestEmitReport:
    def test_csv_line_count(self, mask_sweep, tmp_path):
        (path,) = emit_report(mask_sweep, csv_path=tmp_path / "s.csv")
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 12
        assert lines[0] == "fraction,fd,isc,kl,fad"

    def test_svg_bytes_deterministic(self, mask_sweep, tmp_path):
        emit_report(mask_sweep, svg_path=tmp_path / "a.svg")
        emit_report(mask_sweep, svg_path=tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
        text = (tmp_path / "a.svg").read_text()
        assert text.startswith("<svg") and "polyline" in text
        assert "fraction of corpus corrupted" in text

    def test_json_structure(self, mask_sweep, tmp_path):
        (path,) = emit_report(mask_sweep, json_path=tmp_path / "s.json")
        doc = json.loads(path.read_text())
        assert doc["kind"] == "mask"
        assert len(doc["fractions"]) == len(doc["reports"]) == 11
        assert doc["reports"][0]["fd"] == 0.0

    def test_svg_flat_series_handled(self, corpus_dir):
        result = run_sweep(corpus_dir, "noise", steps=3, seed=0, config=FAST)
        # KL could in principle be flat; rendering must not divide by zero.
        assert "<polyline" in sweep_svg(result)

    def test_metric_report_json_only(self, corpus_dir, tmp_path):
        report = run_evaluate(corpus_dir, corpus_dir, metrics=["fd"], config=FAST)
        with pytest.raises(DataError):
            emit_report(report, csv_path=tmp_path / "r.csv")
        (path,) = emit_report(report, json_path=tmp_path / "r.json")
        assert json.loads(path.read_text())["fd"] == 0.0


class TestBenchmarkTable:
    def test_known_row_layout(self):
        table = BenchmarkTable([BenchmarkRow("ESC50", "Text", 60.63, 5.55, 3.01, 5.95)])
        text = table.format()
        lines = text.split("\n")
        assert lines[0] == "Dataset,Condition,FD↓,IS↑,KL↓,FAD↓"
        assert lines[1] == "ESC50,Text,60.63,5.55,3.01,5.95"

    def test_format_deterministic(self, tmp_path):
        table = BenchmarkTable([
            BenchmarkRow("ESC50", "Text", 60.63, 5.55, 3.01, 5.95),
            BenchmarkRow("ESC50", "Audio", 47.46, 6.68, 2.08, 4.81),
        ])
        emit_report(table, csv_path=tmp_path / "a.csv")
        emit_report(table, csv_path=tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_nonfinite_rejected(self):
        with pytest.raises(Exception):
            BenchmarkRow("X", "Text", float("nan"), 1.0, 1.0, 1.0)


class TestPipelineConfig:
    def test_digest_stable(self):
        assert PipelineConfig().digest() == PipelineConfig().digest()
        assert PipelineConfig().digest() != FAST.digest()

    def test_mel_config_tracks_rate(self):
        cfg = PipelineConfig(sample_rate=8000)
        assert cfg.mel_config().f_max == 4000.0

    def test_thread_cap_env(self, monkeypatch):
        monkeypatch.setenv("GENAUDIO_EVAL_THREADS", "3")
        assert thread_cap() == 3
        monkeypatch.setenv("GENAUDIO_EVAL_THREADS", "junk")
        assert thread_cap() >= 1
