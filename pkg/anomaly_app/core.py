"""
Data model shared by every detector, and the push-broom streaming contract
that replays a cube one line at a time.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .exceptions import ConfigurationError, DataFormatError, ShapeMismatchError

FORWARD = 'forward'
FLIPPED = 'flipped'
DIRECTIONS = (FORWARD, FLIPPED)

# Below this the line carries no intra-line anomaly signal
ZERO_STD = 1e-12


@dataclass(frozen=True)
class DataCube:
    """lines x pixels x bands radiance, line-major then pixel then band"""
    data: np.ndarray
    name: str = 'cube'

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise DataFormatError(f"cube must be 3-D, got shape {data.shape}")
        if min(data.shape) < 1:
            raise DataFormatError(f"cube dimensions must be >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataFormatError(f"cube '{self.name}' contains NaN or Inf values")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def lines(self):
        return self.data.shape[0]

    @property
    def pixels_per_line(self):
        return self.data.shape[1]

    @property
    def bands(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def __str__(self):
        return f"{self.name} ({self.lines} lines x {self.pixels_per_line} px x {self.bands} bands)"


@dataclass(frozen=True)
class SpectralLine:
    """One camera line: p x b radiance matrix, indexed in emission order"""
    index: int
    pixels: np.ndarray

    @property
    def p(self):
        return self.pixels.shape[0]

    @property
    def b(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class GroundTruthMask:
    """lines x p binary labels, 1 = anomaly"""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DataFormatError(f"mask must be 2-D, got shape {data.shape}")
        if data.size and not np.isin(data, (0, 1)).all():
            raise DataFormatError("mask values must be 0 or 1")
        data = np.ascontiguousarray(data, dtype=np.uint8)
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def anomaly_count(self):
        return int(self.data.sum())

    def check_against(self, cube):
        """Raise if this mask does not cover the companion cube"""
        if self.shape != cube.shape[:2]:
            raise ShapeMismatchError(
                f"mask shape {self.shape} does not match cube {cube.shape[:2]}"
            )


@dataclass
class ScoredLine:
    """Per-pixel Mahalanobis distances and their line-normalized form"""
    index: int
    raw_scores: np.ndarray
    norm_scores: np.ndarray
    decisions: Optional[np.ndarray] = None
    warmup: bool = False
    scored: bool = True
    flagged: bool = False

    @classmethod
    def from_distances(cls, index, distances, warmup=False, flagged=False):
        raw = np.asarray(distances, dtype=np.float64)
        return cls(index=index, raw_scores=raw, norm_scores=normalize_scores(raw),
                   warmup=warmup, flagged=flagged)

    @classmethod
    def unscored(cls, index, p):
        """Placeholder for a line a detector could not score yet"""
        zeros = np.zeros(p, dtype=np.float64)
        return cls(index=index, raw_scores=zeros, norm_scores=zeros.copy(),
                   warmup=True, scored=False)

    @property
    def p(self):
        return self.raw_scores.shape[0]


@dataclass(frozen=True)
class StreamConfig:
    direction: str = FORWARD
    buffer_len: int = 99

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(
                f"direction must be one of {DIRECTIONS}, got {self.direction!r}"
            )
        if self.buffer_len < 1:
            raise ConfigurationError(f"buffer_len must be >= 1, got {self.buffer_len}")

    def validate_for(self, cube):
        if self.buffer_len >= cube.lines:
            raise ConfigurationError(
                f"buffer_len {self.buffer_len} must be smaller than the cube's "
                f"{cube.lines} lines"
            )


def normalize_scores(distances):
    """(δ - mean) / std with population std; constant lines normalize to 0"""
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size == 0:
        return distances.copy()
    std = distances.std()
    if std < ZERO_STD:
        return np.zeros_like(distances)
    return (distances - distances.mean()) / std


def flip_cube(cube):
    """Reverse the along-track order of a cube"""
    return DataCube(cube.data[::-1], name=f"{cube.name}-flipped")


def stream_cube(cube, cfg):
    """Yield the cube one SpectralLine at a time in the configured direction."""
    if not isinstance(cube, DataCube):
        raise ConfigurationError("stream_cube expects a DataCube")
    cfg.validate_for(cube)
    order = range(cube.lines) if cfg.direction == FORWARD else range(cube.lines - 1, -1, -1)
    return _emit(cube.data, order)


def _emit(data, order):
    for index, native in enumerate(order):
        yield SpectralLine(index=index, pixels=data[native])


def mask_for_stream(mask, cfg):
    """Align ground truth with the emission order of stream_cube"""
    if cfg.direction == FORWARD:
        return mask
    return GroundTruthMask(mask.data[::-1])


class LineDetector(ABC):
    """
    Streaming detector contract.

    A detector consumes SpectralLines in emission order and yields exactly
    one ScoredLine per input line, in index order. Detectors that emit with
    a lag implement run directly.
    """
    name = 'detector'

    @abstractmethod
    def run(self, lines: Iterable[SpectralLine]) -> Iterator[ScoredLine]:
        ...

    def config_snapshot(self):
        return {'detector': self.name}

    def __repr__(self):
        return f"{type(self).__name__}({self.config_snapshot()})"


class CausalLineDetector(LineDetector):
    """A detector that scores each line as soon as it arrives"""

    @abstractmethod
    def score_line(self, line: SpectralLine) -> ScoredLine:
        ...

    def run(self, lines):
        for line in lines:
            yield self.score_line(line)
