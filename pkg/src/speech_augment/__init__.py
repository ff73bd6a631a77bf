"""Data augmentation toolkit for small pathological-speech corpora.

Five waveform/feature augmenters (spectral-envelope warping, room
reverberation, pitch modification, speaking-rate transformation, and
mel-cepstral feature emission for an external feature mapper), plus the
dataset-doubling pipeline, speaker-disjoint fold planning, and
phone-error-rate scoring used to evaluate them.
"""

from .audio_io import AudioClip, load_wav, resample, save_wav, to_canonical
from .manifest import (
    FoldPlan,
    Gender,
    Group,
    Origin,
    UtteranceRecord,
    load_manifest,
    make_folds,
    plan_doubling,
    save_manifest,
)
from .pitch import BetaResult, PitchModSpec, apply_pitch_mod, compute_beta
from .pipeline import RunConfig, RunReport, run_augmentation
from .rate import RateCurve, WarpPath, apply_rate, constant_rate_curve, dtw_align, match_rate, path_to_rate_curve
from .reverb import ImpulseResponse, RoomSpec, apply_reverb, generate_rir, image_sources
from .scoring import AlignmentCounts, align, crossfold_report, per, score_corpus
from .spectral import (
    FeatureMatrix,
    PitchTrack,
    Spectrogram,
    estimate_f0,
    extract_features,
    istft,
    read_features,
    spectral_envelope,
    stft,
    synthesize_from_features,
    write_features,
)
from .vtlp import ALPHA_GRID, WarpSpec, apply_vtlp, sample_alpha, warp_frequency

__version__ = "0.1.0"
