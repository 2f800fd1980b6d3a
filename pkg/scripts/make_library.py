#!/usr/bin/env python3
"""Regenerate the bundled mineral-like spectral library.

The spectra are synthetic stand-ins shaped like laboratory mineral
reflectance curves (smooth continuum plus Gaussian absorption bands at
typical Fe, OH, H2O, Al-OH, Mg-OH and carbonate positions).  They are not
USGS measurements; real library files load through the same CSV reader.

    python scripts/make_library.py src/lmpunmix/data/mineral_library.csv
"""
import sys

import numpy as np

N_BANDS = 224
WL = np.linspace(0.38, 2.5, N_BANDS)

# name: (base, slope per um, vnir edge depth, [(center um, depth, width um), ...])
MATERIALS = {
    "alunite_synth": (0.62, 0.06, 0.25, [(1.43, 0.35, 0.03), (1.76, 0.2, 0.03), (2.17, 0.4, 0.035), (2.32, 0.15, 0.03)]),
    "kaolinite_synth": (0.70, 0.02, 0.20, [(1.40, 0.25, 0.02), (1.91, 0.12, 0.03), (2.165, 0.3, 0.015), (2.205, 0.4, 0.02)]),
    "muscovite_synth": (0.55, 0.05, 0.15, [(1.41, 0.2, 0.025), (1.91, 0.15, 0.03), (2.20, 0.45, 0.025), (2.35, 0.25, 0.03)]),
    "montmorillonite_synth": (0.58, -0.03, 0.18, [(1.41, 0.22, 0.03), (1.91, 0.35, 0.04), (2.21, 0.25, 0.03)]),
    "buddingtonite_synth": (0.45, 0.04, 0.12, [(1.30, 0.10, 0.05), (1.58, 0.12, 0.04), (2.02, 0.25, 0.04), (2.12, 0.18, 0.03)]),
    "calcite_synth": (0.80, -0.02, 0.05, [(1.87, 0.08, 0.04), (1.99, 0.1, 0.04), (2.34, 0.35, 0.04)]),
    "chalcedony_synth": (0.52, 0.07, 0.10, [(1.41, 0.2, 0.04), (1.91, 0.3, 0.05), (2.26, 0.2, 0.06)]),
    "nontronite_synth": (0.48, 0.08, 0.40, [(0.96, 0.3, 0.12), (1.42, 0.25, 0.03), (1.91, 0.3, 0.04), (2.29, 0.25, 0.03)]),
    "jarosite_synth": (0.42, 0.10, 0.45, [(0.91, 0.35, 0.1), (1.47, 0.15, 0.04), (1.85, 0.12, 0.04), (2.27, 0.3, 0.03)]),
    "pyrophyllite_synth": (0.74, 0.01, 0.12, [(1.40, 0.3, 0.015), (2.165, 0.5, 0.015)]),
    "dickite_synth": (0.68, 0.03, 0.15, [(1.38, 0.25, 0.015), (2.18, 0.35, 0.015), (2.205, 0.35, 0.015)]),
    "hematite_synth": (0.30, 0.12, 0.65, [(0.86, 0.45, 0.1)]),
    "goethite_synth": (0.36, 0.09, 0.55, [(0.93, 0.4, 0.11), (1.91, 0.05, 0.05)]),
    "sphene_synth": (0.50, 0.05, 0.30, [(0.95, 0.15, 0.15), (1.45, 0.08, 0.1), (2.25, 0.08, 0.12)]),
    "andradite_synth": (0.40, 0.08, 0.40, [(0.86, 0.3, 0.1), (1.20, 0.15, 0.15)]),
    "pyrope_synth": (0.46, 0.06, 0.25, [(0.69, 0.2, 0.06), (1.28, 0.25, 0.2)]),
}


def spectrum(base, slope, edge, bands, rng):
    # Fe/charge-transfer fall-off toward the blue end
    continuum = base + slope * (WL - 0.38)
    continuum *= 1.0 - edge * np.exp(-((WL - 0.38) / 0.18) ** 2)
    r = continuum.copy()
    for center, depth, width in bands:
        r *= 1.0 - depth * np.exp(-0.5 * ((WL - center) / width) ** 2)
    # mild instrument-like texture, smoothed
    tex = np.convolve(rng.normal(0.0, 0.004, N_BANDS), np.ones(5) / 5, mode="same")
    return np.clip(r + tex, 0.01, 1.0)


def main(path):
    rng = np.random.default_rng(20190101)
    names = list(MATERIALS)
    spectra = np.column_stack([spectrum(*MATERIALS[n], rng) for n in names])
    with open(path, "w") as fh:
        fh.write("wavelength," + ",".join(names) + "\n")
        for i in range(N_BANDS):
            row = [WL[i]] + list(spectra[i])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "mineral_library.csv")
