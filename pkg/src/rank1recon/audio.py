"""WAV input/output and segment extraction."""
from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy.io import wavfile

from .exceptions import ParameterError

_INT_SCALE = {np.dtype("int16"): 32768.0, np.dtype("int32"): 2147483648.0}


class AudioFormatError(OSError):
    """The file is missing, unreadable, or not an uncompressed PCM/float WAV."""


def load_wav(path) -> Tuple[np.ndarray, int]:
    """Read a WAV file as a mono float signal in ``[-1, 1]`` plus its sample rate.

    Integer PCM is scaled by ``1 / 2**(bits-1)`` (8-bit unsigned is centered
    first); multichannel audio is averaged to mono.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise AudioFormatError(f"{path}: no such file") from exc
    except OSError as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    except Exception as exc:  # scipy leaks assorted errors on malformed headers
        raise AudioFormatError(f"{path}: unsupported or corrupt WAV ({exc!r})") from exc
    if data.dtype == np.uint8:
        signal = (data.astype(float) - 128.0) / 128.0
    elif data.dtype in _INT_SCALE:
        # scipy returns 24-bit PCM left-justified in int32
        signal = data.astype(float) / _INT_SCALE[data.dtype]
    elif np.issubdtype(data.dtype, np.floating):
        signal = data.astype(float)
    else:
        raise AudioFormatError(f"{path}: unsupported sample type {data.dtype}")
    if signal.ndim == 2:
        signal = signal.mean(axis=1)
    return signal, int(rate)


def write_wav(path, signal, rate: int) -> None:
    """Write a 16-bit PCM mono WAV; samples are clipped to ``[-1, 1)``."""
    signal = np.asarray(signal, dtype=float)
    pcm = np.clip(np.round(signal * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), rate, pcm)


def rms(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x * x)))


def extract_segments(signal, length: int, min_rms: float = 0.0,
                     max_count: Optional[int] = None) -> List[Tuple[int, np.ndarray]]:
    """Non-overlapping windows of ``length`` samples with RMS ``>= min_rms``.

    Returns ``(start_index, segment)`` pairs in temporal order, at most
    ``max_count`` of them.
    """
    signal = np.asarray(signal, dtype=float)
    if length < 2:
        raise ParameterError("segment length must be at least 2")
    if length > signal.size:
        raise ParameterError(f"segment length {length} exceeds signal length {signal.size}")
    segments = []
    for start in range(0, signal.size - length + 1, length):
        seg = signal[start:start + length]
        if rms(seg) >= min_rms:
            segments.append((start, seg.copy()))
            if max_count is not None and len(segments) >= max_count:
                break
    return segments
