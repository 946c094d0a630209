"""CIELAB (D65, 2 degree observer) to sRGB conversion for frame export."""

from __future__ import annotations

import math

# D65 reference white
XN, YN, ZN = 95.047, 100.0, 108.883

_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def lab_to_xyz(lab: tuple[float, float, float]) -> tuple[float, float, float]:
    L, a, b = lab
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0

    def finv(f):
        f3 = f ** 3
        return f3 if f3 > _EPS else (116.0 * f - 16.0) / _KAPPA

    yr = fy ** 3 if L > _KAPPA * _EPS else L / _KAPPA
    return XN * finv(fx), YN * yr, ZN * finv(fz)


def lab_to_srgb(lab: tuple[float, float, float]) -> tuple[tuple[int, int, int], bool]:
    """Convert Lab to 8-bit sRGB; the flag reports gamut clipping."""
    x, y, z = (v / 100.0 for v in lab_to_xyz(lab))
    r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z
    g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z
    b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z

    clipped = False
    out = []
    for c in (r, g, b):
        if c < 0.0 or c > 1.0:
            clipped = True
            c = min(1.0, max(0.0, c))
        c = 12.92 * c if c <= 0.0031308 else 1.055 * c ** (1.0 / 2.4) - 0.055
        out.append(int(round(255.0 * min(1.0, max(0.0, c)))))
    return (out[0], out[1], out[2]), clipped
