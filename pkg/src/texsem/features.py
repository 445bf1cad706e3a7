"""Gabor wavelet filter bank and 48-dimensional texture features.

The bank holds 24 complex kernels (4 geometrically spaced center
frequencies x 6 evenly spaced orientations). A feature vector records,
per filter, the mean and standard deviation of the complex response
magnitude over the image, in filter order: f0 mean, f0 std, f1 mean, ...
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import DatasetError, InvalidInputError, TextureImage

# One-octave half-amplitude bandwidth: sigma = _BANDWIDTH_K / f.
_BANDWIDTH_K = math.sqrt(math.log(2.0) / 2.0) * 3.0 / math.pi

N_FILTERS = 24
FEATURE_DIM = 2 * N_FILTERS


@dataclass(frozen=True)
class GaborBank:
    kernels: tuple[np.ndarray, ...]
    scales: int
    orientations: int
    kernel_size: int
    f_lo: float
    f_hi: float
    frequencies: tuple[float, ...]
    thetas: tuple[float, ...]


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != FEATURE_DIM:
            raise InvalidInputError(
                f"feature vector needs {FEATURE_DIM} values, got {len(self.values)}"
            )
        for i in range(1, FEATURE_DIM, 2):
            if self.values[i] < 0.0:
                raise InvalidInputError(f"std feature at index {i} is negative")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def build_bank(scales: int = 4, orientations: int = 6, f_lo: float = 0.05,
               f_hi: float = 0.4, kernel_size: int = 31) -> GaborBank:
    """Construct the filter bank.

    Center frequencies are geometrically spaced from f_hi down to f_lo
    (cycles/pixel); orientations are evenly spaced over [0, pi). Every
    kernel is DC-corrected (mean subtracted) and L2-normalized.
    """
    if scales * orientations != N_FILTERS:
        raise InvalidInputError(
            f"scales*orientations must be {N_FILTERS}, got {scales}*{orientations}"
        )
    if not (0.0 < f_lo < f_hi <= 0.5):
        raise InvalidInputError(
            f"need 0 < f_lo < f_hi <= 0.5, got f_lo={f_lo}, f_hi={f_hi}"
        )
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise InvalidInputError(f"kernel_size must be odd and >= 3, got {kernel_size}")

    ratio = (f_lo / f_hi) ** (1.0 / (scales - 1)) if scales > 1 else 1.0
    freqs = [f_hi * ratio**s for s in range(scales)]
    thetas = [math.pi * o / orientations for o in range(orientations)]

    half = kernel_size // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(float)

    kernels = []
    out_f, out_t = [], []
    for f in freqs:
        sigma = _BANDWIDTH_K / f
        for theta in thetas:
            xr = x * math.cos(theta) + y * math.sin(theta)
            yr = -x * math.sin(theta) + y * math.cos(theta)
            envelope = np.exp(-(xr**2 + yr**2) / (2.0 * sigma**2))
            carrier = np.exp(2j * math.pi * f * xr)
            g = envelope * carrier
            g = g - g.mean()
            g = g / np.linalg.norm(g)
            g.flags.writeable = False
            kernels.append(g)
            out_f.append(f)
            out_t.append(theta)
    return GaborBank(
        kernels=tuple(kernels),
        scales=scales,
        orientations=orientations,
        kernel_size=kernel_size,
        f_lo=f_lo,
        f_hi=f_hi,
        frequencies=tuple(out_f),
        thetas=tuple(out_t),
    )


def _next_fast_len(n: int) -> int:
    """Smallest 5-smooth integer >= n (decent FFT sizes)."""
    while True:
        m = n
        for p in (2, 3, 5):
            while m % p == 0:
                m //= p
        if m == 1:
            return n
        n += 1


def _kernel_spectra(bank: GaborBank, shape: tuple[int, int]):
    h, w = shape
    pad = bank.kernel_size // 2
    fh = _next_fast_len(h + 4 * pad)
    fw = _next_fast_len(w + 4 * pad)
    return [np.fft.fft2(k, s=(fh, fw)) for k in bank.kernels], (fh, fw)


def _responses(img: TextureImage, bank: GaborBank, spectra, fft_shape):
    """Same-size complex convolution magnitudes, one array per filter."""
    pad = bank.kernel_size // 2
    padded = np.pad(img.pixels, pad, mode="reflect")
    pf = np.fft.fft2(padded, s=fft_shape)
    k = bank.kernel_size
    out = []
    for spec in spectra:
        full = np.fft.ifft2(pf * spec)
        valid = full[k - 1 : k - 1 + img.height, k - 1 : k - 1 + img.width]
        out.append(np.abs(valid))
    return out


def extract(img: TextureImage, bank: GaborBank) -> FeatureVector:
    """Mean and std of each filter's response magnitude over the image."""
    return extract_many([img], bank)[0]


def extract_many(images: Sequence[TextureImage], bank: GaborBank) -> list[FeatureVector]:
    """Extract features for many images, sharing kernel FFTs per shape."""
    cache: dict[tuple[int, int], tuple] = {}
    results = []
    for img in images:
        if img.width < bank.kernel_size or img.height < bank.kernel_size:
            raise InvalidInputError(
                f"image {img.width}x{img.height} smaller than kernel "
                f"size {bank.kernel_size}"
            )
        shape = (img.height, img.width)
        if shape not in cache:
            cache[shape] = _kernel_spectra(bank, shape)
        spectra, fft_shape = cache[shape]
        values = []
        for mag in _responses(img, bank, spectra, fft_shape):
            values.append(float(mag.mean()))
            values.append(float(mag.std()))
        results.append(FeatureVector(tuple(values)))
    return results


def standardize(features: Sequence[FeatureVector] | np.ndarray):
    """Z-score features per dimension over the set.

    Returns (standardized, mean, std). Zero-variance dimensions are centered
    but not divided (std entry stays 1 in the returned stats). Accepts and
    returns FeatureVector lists or plain arrays.
    """
    as_vectors = not isinstance(features, np.ndarray)
    matrix = (
        np.asarray([f.values for f in features], dtype=float)
        if as_vectors
        else np.asarray(features, dtype=float)
    )
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise InvalidInputError("standardize needs at least 2 feature rows")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std_safe = np.where(std > 0.0, std, 1.0)
    z = (matrix - mean) / std_safe
    if as_vectors:
        return [FeatureVector(tuple(row)) for row in z], mean, std_safe
    return z, mean, std_safe


def apply_standardization(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - mean) / std


def save_features_csv(path, ids: Sequence[int], matrix: np.ndarray) -> None:
    """Per-dataset feature cache: id column plus 48 feature columns."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"dim_{k}" for k in range(matrix.shape[1])])
        for sid, row in zip(ids, matrix):
            writer.writerow([sid] + [repr(float(v)) for v in row])


def load_features_csv(path) -> list[tuple[int, np.ndarray]]:
    return ingest_external_features(path)


def ingest_external_features(path) -> list[tuple[int, np.ndarray]]:
    """Parse an external feature file: header `id,dim_0,...,dim_{D-1}`.

    Vectors may have any dimension; rows whose column count disagrees with
    the header fail with their line number.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"feature file not found: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"feature file {path} is empty (no header)") from None
        if not header or header[0] != "id":
            raise DatasetError(f"feature file {path}: first column must be 'id'")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DatasetError(
                    f"feature file {path} line {lineno}: expected {width} "
                    f"columns, got {len(row)}"
                )
            try:
                rows.append((int(row[0]), np.asarray([float(v) for v in row[1:]])))
            except ValueError as exc:
                raise DatasetError(f"feature file {path} line {lineno}: {exc}") from None
    return rows


def attach_features(samples, rows: Sequence[tuple[int, np.ndarray]]):
    """Attach parsed feature vectors to samples by id.

    Ids in `rows` that match no sample are an error (all of them reported).
    Samples without a row keep features=None.
    """
    by_id = {s.id: s for s in samples}
    unmatched = sorted(sid for sid, _ in rows if sid not in by_id)
    if unmatched:
        raise DatasetError(f"feature ids not present in dataset: {unmatched}")
    updated = dict(by_id)
    for sid, vec in rows:
        updated[sid] = by_id[sid].with_features(vec)
    return [updated[s.id] for s in samples]
