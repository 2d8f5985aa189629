"""Texture descriptors: GLCM statistics and uniform LBP histograms.

The default descriptor is 38 values per image: six co-occurrence statistics at
0 and 90 degrees followed by a 26-bin uniform LBP histogram (24 neighbours,
radius 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DescriptorConfig",
    "GLCM_MEASURES",
    "quantize",
    "glcm",
    "glcm_measures",
    "lbp_codes",
    "lbp_histogram",
    "extract",
    "feature_names",
    "extract_dataset",
]

GLCM_MEASURES = ("asm", "energy", "contrast", "correlation", "dissimilarity", "homogeneity")


@dataclass(frozen=True)
class DescriptorConfig:
    glcm_angles: tuple[int, ...] = (0, 90)
    glcm_distance: int = 1
    quantization_levels: int = 8
    lbp_neighbors: int = 24
    lbp_radius: float = 3

    def __post_init__(self):
        if not self.glcm_angles or any(a not in (0, 90) for a in self.glcm_angles):
            raise ValueError("glcm_angles must be a non-empty subset of {0, 90}")
        if self.glcm_distance < 1:
            raise ValueError("glcm_distance must be at least 1")
        if not 2 <= self.quantization_levels <= 256:
            raise ValueError("quantization_levels must lie in [2, 256]")
        if self.lbp_neighbors < 4:
            raise ValueError("lbp_neighbors must be at least 4")
        if self.lbp_radius <= 0:
            raise ValueError("lbp_radius must be positive")


def _as_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("expected a 2-d grayscale image")
    return image


def quantize(image, levels: int) -> np.ndarray:
    """Map 8-bit intensities onto ``levels`` equal-width gray levels."""
    image = _as_image(image).astype(np.int64)
    if image.min(initial=0) < 0 or image.max(initial=0) > 255:
        raise ValueError("quantize expects 8-bit intensities")
    return (image * levels) // 256


def glcm(image, angle: int = 0, distance: int = 1, levels: int = 8) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix of an already-quantized image.

    Pixel ``(r, c)`` is paired with ``(r, c + d)`` at 0 degrees and with
    ``(r - d, c)`` at 90 degrees. Every pair is counted in both directions.
    """
    image = _as_image(image)
    if not np.issubdtype(image.dtype, np.integer):
        raise ValueError("glcm expects integer gray levels")
    if image.size and (image.min() < 0 or image.max() >= levels):
        raise ValueError(f"gray levels must lie in [0, {levels})")
    rows, cols = image.shape
    if angle == 0:
        if cols <= distance:
            raise ValueError("image too narrow for the horizontal offset")
        ref, nbr = image[:, :-distance], image[:, distance:]
    elif angle == 90:
        if rows <= distance:
            raise ValueError("image too short for the vertical offset")
        ref, nbr = image[distance:, :], image[:-distance, :]
    else:
        raise ValueError("angle must be 0 or 90")
    codes = ref.astype(np.int64).ravel() * levels + nbr.astype(np.int64).ravel()
    counts = np.bincount(codes, minlength=levels * levels).reshape(levels, levels).astype(float)
    counts += counts.T
    return counts / counts.sum()


def glcm_measures(matrix) -> np.ndarray:
    """ASM, energy, contrast, correlation, dissimilarity and homogeneity.

    A matrix with zero marginal variance (a flat image) has correlation 1.
    """
    p = np.asarray(matrix, dtype=float)
    levels = p.shape[0]
    i, j = np.indices((levels, levels), dtype=float)
    asm = float(np.sum(p * p))
    diff = i - j
    contrast = float(np.sum(diff * diff * p))
    dissimilarity = float(np.sum(np.abs(diff) * p))
    homogeneity = float(np.sum(p / (1.0 + diff * diff)))
    mu_i = float(np.sum(i * p))
    mu_j = float(np.sum(j * p))
    var_i = float(np.sum((i - mu_i) ** 2 * p))
    var_j = float(np.sum((j - mu_j) ** 2 * p))
    if var_i * var_j < 1e-15:
        correlation = 1.0
    else:
        correlation = float(np.sum((i - mu_i) * (j - mu_j) * p) / math.sqrt(var_i * var_j))
    return np.array([asm, math.sqrt(asm), contrast, correlation, dissimilarity, homogeneity])


def _neighbor_offsets(P: int, R: float) -> tuple[np.ndarray, np.ndarray]:
    angles = 2 * np.pi * np.arange(P) / P
    # rounding removes sin/cos residue so axis-aligned samples land on pixel centres
    dr = np.round(-R * np.sin(angles), 5)
    dc = np.round(R * np.cos(angles), 5)
    return dr, dc


def lbp_codes(image, P: int = 24, R: float = 3) -> np.ndarray:
    """Uniform-pattern label (0..P+1) of every interior pixel.

    A neighbour sampled at least as bright as the centre contributes a 1 bit.
    Patterns with at most two circular 0/1 transitions are labelled by their
    number of 1 bits; all others share label ``P + 1``.
    """
    if P < 4:
        raise ValueError("P must be at least 4")
    img = _as_image(image).astype(float)
    rows, cols = img.shape
    margin = int(math.ceil(R))
    if rows < 2 * margin + 1 or cols < 2 * margin + 1:
        raise ValueError(f"image {rows}x{cols} too small for radius {R}")
    rr, cc = np.mgrid[margin : rows - margin, margin : cols - margin]
    center = img[rr, cc]
    bits = np.empty((P,) + center.shape, dtype=np.int8)
    for p, (dr, dc) in enumerate(zip(*_neighbor_offsets(P, R))):
        y = rr + dr
        x = cc + dc
        y0 = np.floor(y).astype(int)
        x0 = np.floor(x).astype(int)
        fy = y - y0
        fx = x - x0
        y1 = np.minimum(y0 + 1, rows - 1)
        x1 = np.minimum(x0 + 1, cols - 1)
        # lerp form is exact when both endpoints are equal
        top = img[y0, x0] + fx * (img[y0, x1] - img[y0, x0])
        bottom = img[y1, x0] + fx * (img[y1, x1] - img[y1, x0])
        bits[p] = (top + fy * (bottom - top)) >= center
    ones = bits.sum(axis=0)
    transitions = np.abs(bits - np.roll(bits, 1, axis=0)).sum(axis=0)
    return np.where(transitions <= 2, ones, P + 1)


def lbp_histogram(image, P: int = 24, R: float = 3) -> np.ndarray:
    codes = lbp_codes(image, P, R)
    hist = np.bincount(codes.ravel(), minlength=P + 2).astype(float)
    return hist / hist.sum()


def feature_names(config: DescriptorConfig = DescriptorConfig()) -> list[str]:
    names = [f"glcm_a{a}_{m}" for a in config.glcm_angles for m in GLCM_MEASURES]
    names += [f"lbp_{b}" for b in range(config.lbp_neighbors + 2)]
    return names


def extract(image, config: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Descriptor vector laid out as ``feature_names(config)``."""
    image = _as_image(image)
    levels = config.quantization_levels
    q = quantize(image, levels)
    parts = [glcm_measures(glcm(q, a, config.glcm_distance, levels)) for a in config.glcm_angles]
    parts.append(lbp_histogram(image, config.lbp_neighbors, config.lbp_radius))
    return np.concatenate(parts)


def extract_dataset(images, labels, config: DescriptorConfig = DescriptorConfig()):
    """Descriptor table for a labelled image collection."""
    from .dataset import Dataset

    X = np.array([extract(img, config) for img in images])
    return Dataset(X, np.array([int(c) for c in labels]), feature_names(config))
