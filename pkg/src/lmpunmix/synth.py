"""Synthetic scenes: random pure-pixel mosaic, box-filter mixing, Gaussian noise."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .types import AbundanceMatrix, HyperCube, SignatureMatrix


@dataclass(frozen=True)
class SpectralLibrary:
    names: tuple
    spectra: np.ndarray
    wavelengths: tuple

    def __post_init__(self):
        spectra = np.array(self.spectra, dtype=float)
        if spectra.ndim != 2:
            raise ValueError("library spectra must be L x M")
        if not np.all(np.isfinite(spectra)) or np.any(spectra < 0):
            raise ValueError("library spectra must be finite and nonnegative")
        if len(self.names) != spectra.shape[1]:
            raise ValueError(f"{len(self.names)} names for {spectra.shape[1]} spectra")
        if len(self.wavelengths) != spectra.shape[0]:
            raise ValueError(f"{len(self.wavelengths)} wavelengths for {spectra.shape[0]} bands")
        spectra.setflags(write=False)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True)
class SynthScene:
    cube: HyperCube
    true_A: SignatureMatrix
    true_S: AbundanceMatrix
    snr_db: float
    filter_size: int
    names: tuple = ()
    seed: Optional[int] = None


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate_pure_mosaic(library, c: int, width: int, height: int, seed=None) -> AbundanceMatrix:
    """One-hot abundance image where each pixel holds one random endmember.

    Draws are repeated until every endmember appears at least once.
    """
    N = width * height
    if c > N:
        raise ValueError(f"cannot place {c} endmembers in {N} pixels")
    if library is not None and len(library) < c:
        raise ValueError(f"library has {len(library)} spectra, need {c}")
    rng = _rng(seed)
    while True:
        labels = rng.integers(0, c, N)
        if np.unique(labels).size == c:
            break
    S = np.zeros((c, N))
    S[labels, np.arange(N)] = 1.0
    return AbundanceMatrix(S)


def _box_sum(img: np.ndarray, r: int) -> np.ndarray:
    """Sum over a (2r+1)^2 window clipped to the image, for each channel."""
    C, H, W = img.shape
    pad = np.zeros((C, H + 1, W + 1))
    pad[:, 1:, 1:] = img.cumsum(axis=1).cumsum(axis=2)
    rows = np.arange(H)
    cols = np.arange(W)
    r0 = np.clip(rows - r, 0, H)[:, None]
    r1 = np.clip(rows + r + 1, 0, H)[:, None]
    c0 = np.clip(cols - r, 0, W)[None, :]
    c1 = np.clip(cols + r + 1, 0, W)[None, :]
    return pad[:, r1, c1] - pad[:, r0, c1] - pad[:, r1, c0] + pad[:, r0, c0]


def lowpass_mix(S, width: int, height: int, w: int) -> AbundanceMatrix:
    """Replace each abundance vector by the mean over its ``w x w`` window.

    Windows are clipped at the image border and the mean is taken over the
    pixels actually inside, so columns stay on the simplex.
    """
    if w < 1 or w % 2 == 0:
        raise ValueError(f"filter size must be an odd integer >= 1, got {w}")
    Sd = np.asarray(getattr(S, "data", S), dtype=float)
    c, N = Sd.shape
    if N != width * height:
        raise ValueError("abundance count does not match the grid")
    if w == 1:
        return AbundanceMatrix(Sd.copy())
    r = w // 2
    img = Sd.reshape(c, height, width)
    sums = _box_sum(img, r)
    counts = _box_sum(np.ones((1, height, width)), r)
    mixed = (sums / counts).reshape(c, N)
    mixed /= mixed.sum(axis=0, keepdims=True)
    return AbundanceMatrix(mixed)


def noise_variance(X, snr_db: float) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.mean(X * X) / 10.0 ** (snr_db / 10.0))


def add_noise(X, snr_db: float, seed=None) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise at the requested global SNR.

    ``snr_db = inf`` returns a copy of ``X``.
    """
    X = np.asarray(getattr(X, "data", X), dtype=float)
    if not np.any(X):
        raise ValueError("signal is identically zero")
    if np.isinf(snr_db) and snr_db > 0:
        return X.copy()
    sigma = np.sqrt(noise_variance(X, snr_db))
    return X + _rng(seed).normal(0.0, sigma, X.shape)


def _has_pure_pixel(S: np.ndarray) -> bool:
    return bool(np.any(S.max(axis=0) == 1.0))


def make_scene(library: SpectralLibrary, c: int = 6, width: int = 64, height: int = 64,
               w: int = 3, snr_db: float = 25.0, seed=None, no_pure_pixels: bool = False,
               max_tries: int = 200) -> SynthScene:
    """Compose library draw, mosaic, mixing and noise into one scene.

    The seed is split into independent streams for the endmember draw, the
    mosaic and the noise.
    """
    if len(library) < c:
        raise ValueError(f"library has {len(library)} spectra, need {c}")
    if no_pure_pixels and w == 1:
        raise ValueError("a 1x1 filter cannot remove pure pixels")
    pick_ss, mosaic_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    cols = np.sort(np.random.default_rng(pick_ss).choice(len(library), c, replace=False))
    A = library.spectra[:, cols]
    mosaic_rng = np.random.default_rng(mosaic_ss)
    for _ in range(max_tries):
        pure = generate_pure_mosaic(library, c, width, height, mosaic_rng)
        S = lowpass_mix(pure, width, height, w)
        if not (no_pure_pixels and _has_pure_pixel(S.data)):
            break
    else:
        raise RuntimeError(f"no pure-pixel-free mosaic after {max_tries} tries")
    clean = A @ S.data
    noisy = add_noise(clean, snr_db, np.random.default_rng(noise_ss))
    cube = HyperCube(noisy, width, height, library.wavelengths)
    return SynthScene(
        cube=cube,
        true_A=SignatureMatrix(A),
        true_S=S,
        snr_db=float(snr_db),
        filter_size=w,
        names=tuple(library.names[i] for i in cols),
        seed=seed if isinstance(seed, int) else None,
    )


def bundled_library() -> SpectralLibrary:
    """The packaged 16-material, 224-band mineral-like library."""
    from importlib.resources import files

    from .io import read_library_csv

    return read_library_csv(files("lmpunmix") / "data" / "mineral_library.csv")
