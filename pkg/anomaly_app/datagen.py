"""
Synthetic cubes: the class-blended background with shrinking square targets,
uniform random cubes for speed sweeps, and abrupt class-switch streams.

Class signatures are smooth synthetic band profiles standing in for
vegetation, sand and water; absolute detection numbers on these cubes are
not comparable with results on real imagery, only orderings are.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core import DataCube, GroundTruthMask
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# (normalized wavelength, reflectance-like level) control points
SIGNATURE_KNOTS = {
    'vegetation': ([0.0, 0.15, 0.22, 0.3, 0.38, 0.6, 1.0], [0.05, 0.09, 0.06, 0.05, 0.42, 0.45, 0.38]),
    'sand': ([0.0, 0.25, 0.5, 0.75, 1.0], [0.14, 0.24, 0.33, 0.40, 0.44]),
    'water': ([0.0, 0.2, 0.4, 0.6, 1.0], [0.11, 0.09, 0.05, 0.02, 0.01]),
    'runway': ([0.0, 0.3, 0.6, 1.0], [0.17, 0.21, 0.24, 0.26]),
}
BACKGROUND_CLASSES = ('vegetation', 'sand', 'water')


def signature(kind, bands):
    """Smooth band profile of the given kind sampled at `bands` wavelengths"""
    x, y = SIGNATURE_KNOTS[kind]
    spline = CubicSpline(x, y, bc_type='natural')
    return np.clip(spline(np.linspace(0.0, 1.0, bands)), 0.005, None)


def default_signatures(bands):
    return np.vstack([signature(kind, bands) for kind in BACKGROUND_CLASSES])


@dataclass
class SyntheticSpec:
    lines: int = 2400
    pixels: int = 600
    bands: int = 90
    class_signatures: Optional[np.ndarray] = None
    class_regions: int = 6
    transition_width: int = 20
    target_columns: int = 24
    target_base_size: int = 16
    size_cycle: int = 6
    mixing_fractions: Sequence[float] = (0.1, 0.2, 0.3, 0.5)
    target_repeats: int = 3
    anomaly_signature: Optional[np.ndarray] = None
    noise_sigma: float = 0.02
    brightness_sigma: float = 0.05
    seed: int = 0
    name: str = 'synthetic'

    def __post_init__(self):
        if min(self.lines, self.pixels, self.bands) < 1:
            raise ConfigurationError("lines, pixels and bands must be >= 1")
        if self.class_signatures is None:
            self.class_signatures = default_signatures(self.bands)
        if self.anomaly_signature is None:
            self.anomaly_signature = signature('runway', self.bands)
        self.class_signatures = np.atleast_2d(np.asarray(self.class_signatures, dtype=np.float64))
        self.anomaly_signature = np.asarray(self.anomaly_signature, dtype=np.float64)
        self.mixing_fractions = tuple(float(f) for f in self.mixing_fractions)

        if self.class_signatures.shape[1] != self.bands:
            raise ConfigurationError("class signatures must have one value per band")
        if self.anomaly_signature.shape != (self.bands,):
            raise ConfigurationError("anomaly signature must have one value per band")
        if not self.mixing_fractions:
            raise ConfigurationError("at least one mixing fraction is required")
        if any(not 0.0 <= f <= 1.0 for f in self.mixing_fractions):
            raise ConfigurationError("mixing fractions must lie in [0, 1]")
        if min(self.target_base_size, self.target_columns, self.size_cycle, self.target_repeats) < 1:
            raise ConfigurationError(
                "target size, column count, size cycle and repeats must be >= 1")
        if self.class_regions < 1:
            raise ConfigurationError("at least one class region is required")
        if self.transition_width < 0:
            raise ConfigurationError("transition width must be >= 0")
        if self.noise_sigma < 0 or self.brightness_sigma < 0:
            raise ConfigurationError("noise levels must be >= 0")
        region = self.lines / self.class_regions
        if self.transition_width > region:
            raise ConfigurationError(
                f"transition width {self.transition_width} exceeds the {region:.0f}-line class region"
            )

    @property
    def target_sizes(self):
        """
        Along-track size of each target column: halving with a 1 px floor,
        restarting from the base size every size_cycle columns.
        """
        return [max(1, self.target_base_size >> (j % self.size_cycle))
                for j in range(self.target_columns)]

    @property
    def row_fractions(self):
        """Mixing fraction of each across-track target row"""
        return self.mixing_fractions * self.target_repeats

    def target_boxes(self):
        """(line_start, pixel_start, size, mixing fraction) for every target"""
        fractions = self.row_fractions
        rows = len(fractions)
        line_spacing = self.lines / self.target_columns
        pixel_spacing = self.pixels / rows
        boxes = []
        for j, size in enumerate(self.target_sizes):
            if size > line_spacing or size > pixel_spacing:
                raise ConfigurationError(
                    f"target of {size} px does not fit the {line_spacing:.0f} x "
                    f"{pixel_spacing:.0f} grid cell"
                )
            line_start = int((j + 0.5) * line_spacing) - size // 2
            for r, fraction in enumerate(fractions):
                pixel_start = int((r + 0.5) * pixel_spacing) - size // 2
                if (line_start < 0 or pixel_start < 0 or line_start + size > self.lines
                        or pixel_start + size > self.pixels):
                    raise ConfigurationError(f"target column {j}, row {r} overflows the image")
                boxes.append((line_start, pixel_start, size, fraction))
        return boxes

    @property
    def expected_anomaly_pixels(self):
        return len(self.row_fractions) * sum(size * size for size in self.target_sizes)


def background_profile(spec):
    """
    lines x bands clean background. The class regions cycle through the
    class signatures and are blended linearly across each boundary.
    """
    signatures = spec.class_signatures
    n_classes = signatures.shape[0]
    t = np.arange(spec.lines, dtype=np.float64)[:, None]
    profile = np.repeat(signatures[:1], spec.lines, axis=0)
    region = spec.lines / spec.class_regions
    for i in range(1, spec.class_regions):
        boundary = i * region
        if spec.transition_width > 0:
            weight = np.clip((t - (boundary - spec.transition_width / 2)) / spec.transition_width,
                             0.0, 1.0)
        else:
            weight = (t >= boundary).astype(np.float64)
        profile = (1.0 - weight) * profile + weight * signatures[i % n_classes]
    return profile


def apply_sensor_noise(clean, rng, noise_sigma, brightness_sigma):
    """Per-pixel illumination scale and per-sample multiplicative Gaussian noise"""
    data = clean
    if brightness_sigma > 0:
        gain = 1.0 + brightness_sigma * rng.standard_normal(clean.shape[:2])
        data = data * gain[:, :, None]
    if noise_sigma > 0:
        data = data * (1.0 + noise_sigma * rng.standard_normal(clean.shape))
    return data


def gen_synthetic(spec, chunk_lines=128):
    """
    Build the synthetic cube and its ground-truth mask from a SyntheticSpec.

    Lines are generated in chunks to bound memory; the output depends on the
    seed and chunk_lines only.
    """
    rng = np.random.default_rng(spec.seed)
    boxes = spec.target_boxes()
    profile = background_profile(spec)

    mask = np.zeros((spec.lines, spec.pixels), dtype=np.uint8)
    for line_start, pixel_start, size, _ in boxes:
        mask[line_start:line_start + size, pixel_start:pixel_start + size] = 1

    data = np.empty((spec.lines, spec.pixels, spec.bands), dtype=np.float32)
    for start in range(0, spec.lines, chunk_lines):
        stop = min(start + chunk_lines, spec.lines)
        clean = np.repeat(profile[start:stop, None, :], spec.pixels, axis=1)
        for line_start, pixel_start, size, fraction in boxes:
            lo, hi = max(line_start, start), min(line_start + size, stop)
            if lo >= hi:
                continue
            rows = slice(lo - start, hi - start)
            cols = slice(pixel_start, pixel_start + size)
            clean[rows, cols] = (1.0 - fraction) * spec.anomaly_signature + fraction * clean[rows, cols]
        data[start:stop] = apply_sensor_noise(clean, rng, spec.noise_sigma, spec.brightness_sigma)

    logger.info("generated %s: %d targets, %d anomalous pixels", spec.name, len(boxes),
                int(mask.sum()))
    return DataCube(data, name=spec.name), GroundTruthMask(mask)


def gen_random_cube(pixels, lines, bands, seed):
    """i.i.d. uniform [0, 1) cube, deterministic per seed"""
    if min(pixels, lines, bands) < 1:
        raise ConfigurationError("pixels, lines and bands must be >= 1")
    rng = np.random.default_rng(seed)
    data = rng.random((lines, pixels, bands), dtype=np.float32)
    return DataCube(data, name=f"random-{pixels}x{lines}x{bands}-s{seed}")


def gen_class_switch_cube(pixels, lines_before, lines_after, bands, noise_sigma=0.01,
                          classes=('vegetation', 'sand'), seed=0):
    """Background that switches abruptly from one class to another at line `lines_before`"""
    rng = np.random.default_rng(seed)
    before, after = (signature(kind, bands) for kind in classes)
    profile = np.vstack([np.repeat(before[None], lines_before, axis=0),
                         np.repeat(after[None], lines_after, axis=0)])
    clean = np.repeat(profile[:, None, :], pixels, axis=1)
    data = apply_sensor_noise(clean, rng, noise_sigma, 0.0)
    return DataCube(data.astype(np.float32), name=f"switch-{classes[0]}-{classes[1]}")
