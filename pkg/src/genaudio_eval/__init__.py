"""Evaluation toolkit for generated audio.

Scores sets of generated clips against references with Fréchet distances
over embedding Gaussians (FD/FAD), inception score, and paired KL
divergence; probes metric sensitivity with seeded mel-spectrogram
corruptions swept from 0% to 100% of a corpus; and ships a numerically
verifiable forward-diffusion kernel.
"""

from .audio_io import AudioClip, fix_duration, load_audio, resample, save_wav
from .backbone import (
    BackboneProvider,
    EmbeddingSet,
    MelStatsProvider,
    embed_set,
    load_embedding_file,
    melstats_embed,
    save_embedding_file,
)
from .corruption import (
    CorruptionSpec,
    add_noise,
    apply_corruption,
    corruption_file_id,
    mask_random,
    mix_interference,
    reorder_events,
)
from .diffusion import (
    ConditionEmbedding,
    Latent,
    NoiseSchedule,
    denoising_loss,
    forward_marginal,
    forward_step,
    make_schedule,
    reverse_step,
)
from .errors import DataError, InvariantError, NumericError, ToolkitError, UsageError
from .harness import (
    BenchmarkRow,
    BenchmarkTable,
    PipelineConfig,
    SweepResult,
    emit_report,
    load_corpus,
    run_evaluate,
    run_sweep,
)
from .mel import (
    MelConfig,
    MelSpectrogram,
    load_mel,
    mel_center_freqs,
    mel_filterbank,
    mel_spectrogram,
    save_mel,
)
from .metrics import (
    GaussianStats,
    MetricReport,
    evaluate_all,
    frechet_distance,
    gaussian_stats,
    inception_score,
    kl_divergence,
    sqrtm_psd,
    strip_corruption_suffix,
)

__version__ = "0.1.0"
