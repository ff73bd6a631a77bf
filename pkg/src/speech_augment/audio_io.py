"""WAV file I/O and sample-rate conversion.

Everything downstream operates on mono float arrays at 16 kHz; this module is
the only place that touches RIFF bytes. Readable encodings: PCM 16-bit and
IEEE float32. Written audio is always PCM 16-bit mono.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

CANONICAL_RATE = 16000

# int16 full scale used both on read and on write, so a round trip is
# exact to within half a quantization step (plus one step at +1.0).
PCM_SCALE = 32768.0


class WavHeaderError(ValueError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedEncodingError(ValueError):
    """WAVE encoding other than PCM 16-bit or IEEE float 32-bit."""


@dataclass
class AudioClip:
    """Mono waveform with its sample rate and an opaque utterance id."""

    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be mono (1-D)")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        """Clip length in seconds."""
        return len(self.samples) / self.sample_rate


def load_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file as a mono clip with amplitudes in [-1, 1].

    Multi-channel audio is mixed down by averaging channels. The sample rate
    is preserved as read; use :func:`to_canonical` to get 16 kHz.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavHeaderError(f"{path}: missing RIFF/WAVE signature")

    fmt_chunk = None
    payload = None
    off = 12
    while off + 8 <= len(data):
        chunk_id = data[off : off + 4]
        (size,) = struct.unpack_from("<I", data, off + 4)
        body = data[off + 8 : off + 8 + size]
        if chunk_id == b"fmt ":
            fmt_chunk = body
        elif chunk_id == b"data":
            payload = body
        off += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt_chunk is None or len(fmt_chunk) < 16:
        raise WavHeaderError(f"{path}: missing or short fmt chunk")
    if payload is None:
        raise WavHeaderError(f"{path}: missing data chunk")

    fmt_tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt_chunk, 0)
    if fmt_tag == 0xFFFE and len(fmt_chunk) >= 26:
        # WAVE_FORMAT_EXTENSIBLE: actual format is the first word of the GUID
        (fmt_tag,) = struct.unpack_from("<H", fmt_chunk, 24)
    if channels < 1:
        raise WavHeaderError(f"{path}: channel count {channels} in fmt chunk")
    if rate <= 0:
        raise WavHeaderError(f"{path}: sample rate {rate} in fmt chunk")

    if fmt_tag == 1 and bits == 16:
        width = 2 * channels
        raw = np.frombuffer(payload[: len(payload) - len(payload) % width], "<i2")
        x = raw.astype(np.float64) / PCM_SCALE
    elif fmt_tag == 3 and bits == 32:
        width = 4 * channels
        raw = np.frombuffer(payload[: len(payload) - len(payload) % width], "<f4")
        x = raw.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {fmt_tag} with {bits}-bit samples "
            "(only PCM16 and IEEE float32 are readable)"
        )

    if channels > 1:
        x = x[: len(x) // channels * channels].reshape(-1, channels).mean(axis=1)
    return AudioClip(x, int(rate), id=path.stem)


def _riff_header(n_payload: int, rate: int, fmt_tag: int, bits: int) -> bytes:
    block = bits // 8  # mono
    return b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + n_payload),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, fmt_tag, 1, rate, rate * block, block, bits),
            b"data",
            struct.pack("<I", n_payload),
        ]
    )


def save_wav(clip: AudioClip, path) -> int:
    """Write a PCM 16-bit mono file; returns the number of clipped samples.

    Out-of-range samples saturate at full scale rather than aborting, so
    augmenters with occasional >1 transients survive batch runs.
    """
    if len(clip.samples) == 0:
        raise ValueError("refusing to write an empty clip")
    ints = np.round(clip.samples * PCM_SCALE)
    clipped = int(np.count_nonzero((ints > 32767.0) | (ints < -32768.0)))
    pcm = np.clip(ints, -32768.0, 32767.0).astype("<i2")
    payload = pcm.tobytes()
    Path(path).write_bytes(_riff_header(len(payload), clip.sample_rate, 1, 16) + payload)
    return clipped


def save_wav_float32(clip: AudioClip, path) -> None:
    """Write an IEEE float32 mono file (used for impulse responses)."""
    if len(clip.samples) == 0:
        raise ValueError("refusing to write an empty clip")
    payload = clip.samples.astype("<f4").tobytes()
    Path(path).write_bytes(_riff_header(len(payload), clip.sample_rate, 3, 32) + payload)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited polyphase resampling (windowed-sinc FIR, >=65 taps).

    Output length is round(len * target/orig) within one sample; content
    above the new Nyquist is attenuated by the Kaiser-windowed filter
    (beta 9, roughly 90 dB stopband).
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.id)

    ratio = Fraction(int(target_rate), int(clip.sample_rate))
    up, down = ratio.numerator, ratio.denominator
    max_rate = max(up, down)
    taps = firwin(64 * max_rate + 1, 1.0 / max_rate, window=("kaiser", 9.0))
    y = resample_poly(clip.samples, up, down, window=taps)

    n_target = int(round(len(clip.samples) * target_rate / clip.sample_rate))
    if len(y) > n_target + 1:
        y = y[: n_target + 1]
    elif len(y) < n_target - 1:
        y = np.pad(y, (0, n_target - 1 - len(y)))
    return AudioClip(y, int(target_rate), clip.id)


def to_canonical(clip: AudioClip) -> AudioClip:
    """Resample to the 16 kHz rate every augmenter expects."""
    if clip.sample_rate == CANONICAL_RATE:
        return clip
    return resample(clip, CANONICAL_RATE)
