"""Structural similarity with uniform 8x8 windows.

SSIM is evaluated on every (overlapping) 8x8 window of two planes and averaged
(MSSIM).  Window moments are obtained from summed-area tables.
"""

import numpy as np

WINDOW = 8
C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


def _window_sums(x, size):
    s = np.pad(np.cumsum(np.cumsum(x, axis=0), axis=1), ((1, 0), (1, 0)))
    return s[size:, size:] - s[:-size, size:] - s[size:, :-size] + s[:-size, :-size]


def ssim_map(a, b, window=WINDOW):
    """SSIM of each ``window x window`` window (valid positions only)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < window:
        raise ValueError(f"planes smaller than the {window}x{window} window")
    n = window * window
    mu_a = _window_sums(a, window) / n
    mu_b = _window_sums(b, window) / n
    var_a = _window_sums(a * a, window) / n - mu_a ** 2
    var_b = _window_sums(b * b, window) / n - mu_b ** 2
    cov = _window_sums(a * b, window) / n - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a ** 2 + mu_b ** 2 + C1) * (var_a + var_b + C2)
    return num / den


def mssim(a, b, window=WINDOW) -> float:
    return float(ssim_map(a, b, window).mean())
