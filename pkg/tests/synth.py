"""Synthetic signals and measurement helpers shared by the test modules."""

import numpy as np

from speech_augment.audio_io import AudioClip
from speech_augment.spectral import _cepstral_envelope_rows, stft

RATE = 16000


def make_vowel(f0=200.0, duration=1.0, formant=1000.0, bandwidth=150.0, amplitude=0.5):
    """Steady vowel: pulse train through a Gaussian formant resonance."""
    n = int(duration * RATE)
    phase = np.cumsum(np.full(n, f0 / RATE))
    pulses = np.diff(np.floor(phase), prepend=0.0) > 0
    exc = np.zeros(n)
    exc[pulses] = 1.0
    freqs = np.fft.rfftfreq(n, 1.0 / RATE)
    shape = np.exp(-0.5 * ((freqs - formant) / bandwidth) ** 2) + 1e-4
    x = np.fft.irfft(np.fft.rfft(exc) * shape, n)
    x = amplitude * x / np.max(np.abs(x))
    fade = int(0.01 * RATE)
    ramp = np.linspace(0.0, 1.0, fade)
    x[:fade] *= ramp
    x[-fade:] *= ramp[::-1]
    return AudioClip(x, RATE, id=f"vowel{int(f0)}")


def envelope_peak_hz(clip, fmin=300.0, fmax=4000.0, fft_size=1024):
    """Formant location: peak of the mean spectral envelope, sub-bin refined."""
    gram = stft(clip, fft_size, fft_size // 4)
    env = _cepstral_envelope_rows(np.abs(gram.frames), 30).mean(axis=0)
    freqs = np.fft.rfftfreq(fft_size, 1.0 / clip.sample_rate)
    band = np.where((freqs >= fmin) & (freqs <= fmax))[0]
    i = band[np.argmax(env[band])]
    y0, y1, y2 = np.log(env[i - 1]), np.log(env[i]), np.log(env[i + 1])
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if abs(denom) > 1e-12 else 0.0
    return (i + float(np.clip(shift, -0.5, 0.5))) * clip.sample_rate / fft_size
