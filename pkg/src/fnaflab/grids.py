"""Complex 2-D grid arithmetic, centered Fourier transforms, image metrics.

Conventions:

* Images are 2-D real arrays, k-space grids are 2-D complex arrays.  Both
  are plain numpy arrays; the validators below enforce the invariants.
* Transforms are centered (DC at ``(rows // 2, cols // 2)``) and
  orthonormally scaled, so Parseval holds exactly and round trips are
  identities up to floating point noise.
* All metric accumulations run in float64 regardless of storage dtype.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyRegionError, InvalidInputError, UndefinedMetricError

MIN_GRID_SIDE = 8

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def as_image(a) -> np.ndarray:
    """Validate a 2-D real image and return it as float64."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("image contains non-finite values")
    return arr


def as_grid(a) -> np.ndarray:
    """Validate a 2-D complex grid and return it as complex128."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise InvalidInputError(f"grid must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < MIN_GRID_SIDE or arr.shape[1] < MIN_GRID_SIDE:
        raise InvalidInputError(
            f"grid sides must be >= {MIN_GRID_SIDE}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise InvalidInputError("grid contains non-finite values")
    return arr


def as_region(mask, shape: tuple[int, int]) -> np.ndarray:
    """Validate a boolean region mask against an image shape."""
    arr = np.asarray(mask)
    if arr.dtype != np.bool_:
        raise InvalidInputError("region mask must be boolean")
    if arr.shape != tuple(shape):
        raise InvalidInputError(
            f"region shape {arr.shape} does not match image shape {tuple(shape)}"
        )
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")


def fft2c(grid) -> np.ndarray:
    """Centered, orthonormal forward 2-D Fourier transform."""
    g = as_grid(grid)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(g), norm="ortho"))


def ifft2c(ksp) -> np.ndarray:
    """Centered, orthonormal inverse 2-D Fourier transform."""
    k = as_grid(ksp)
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k), norm="ortho"))


def nmse(recon, target) -> float:
    """Normalized mean squared error, sum((r-t)^2) / sum(t^2)."""
    r = as_image(recon)
    t = as_image(target)
    _check_same_shape(r, t)
    denom = float(np.sum(t * t))
    if denom == 0.0:
        raise UndefinedMetricError("NMSE undefined for an all-zero target")
    diff = r - t
    return float(np.sum(diff * diff)) / denom


def psnr(recon, target) -> float:
    """Peak signal-to-noise ratio in dB against the target's max value."""
    r = as_image(recon)
    t = as_image(target)
    _check_same_shape(r, t)
    mse = float(np.mean((r - t) ** 2))
    peak = float(t.max())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _box_sum(a: np.ndarray, k: int) -> np.ndarray:
    """Sums over every k-by-k window fully inside ``a`` (valid positions)."""
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.float64)
    s[1:, 1:] = np.cumsum(np.cumsum(np.asarray(a, dtype=np.float64), axis=0), axis=1)
    return s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]


def _ssim_terms(r: np.ndarray, t: np.ndarray):
    """Window means/variances/covariance plus the stabilization constants."""
    win = SSIM_WINDOW
    if r.shape[0] < win or r.shape[1] < win:
        raise InvalidInputError(
            f"images must be at least {win}x{win} for SSIM, got {r.shape}"
        )
    n = win * win
    cov_norm = n / (n - 1)  # sample (unbiased) covariance
    mu_r = _box_sum(r, win) / n
    mu_t = _box_sum(t, win) / n
    s_rr = _box_sum(r * r, win) / n
    s_tt = _box_sum(t * t, win) / n
    s_rt = _box_sum(r * t, win) / n
    var_r = cov_norm * (s_rr - mu_r * mu_r)
    var_t = cov_norm * (s_tt - mu_t * mu_t)
    cov = cov_norm * (s_rt - mu_r * mu_t)
    peak = float(t.max())
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    return mu_r, mu_t, var_r, var_t, cov, c1, c2


def ssim(recon, target) -> float:
    """Mean structural similarity over all 7x7 windows.

    Uniform window, k1=0.01, k2=0.03, dynamic range taken from the target's
    max value.
    """
    r = as_image(recon)
    t = as_image(target)
    _check_same_shape(r, t)
    mu_r, mu_t, var_r, var_t, cov, c1, c2 = _ssim_terms(r, t)
    a1 = 2.0 * mu_r * mu_t + c1
    a2 = 2.0 * cov + c2
    b1 = mu_r * mu_r + mu_t * mu_t + c1
    b2 = var_r + var_t + c2
    return float(np.mean(a1 * a2 / (b1 * b2)))


def ssim_and_grad(recon, target) -> tuple[float, np.ndarray]:
    """Mean SSIM and its gradient with respect to the reconstruction."""
    r = as_image(recon)
    t = as_image(target)
    _check_same_shape(r, t)
    win = SSIM_WINDOW
    n = win * win
    cov_norm = n / (n - 1)
    mu_r, mu_t, var_r, var_t, cov, c1, c2 = _ssim_terms(r, t)
    a1 = 2.0 * mu_r * mu_t + c1
    a2 = 2.0 * cov + c2
    b1 = mu_r * mu_r + mu_t * mu_t + c1
    b2 = var_r + var_t + c2
    denom = b1 * b2
    value = float(np.mean(a1 * a2 / denom))

    # Backprop through the window statistics; each window contributes
    # 1/n_windows to the mean.
    n_windows = a1.size
    d_s = 1.0 / n_windows
    d_a1 = d_s * a2 / denom
    d_a2 = d_s * a1 / denom
    d_b1 = -d_s * a1 * a2 / (denom * b1)
    d_b2 = -d_s * a1 * a2 / (denom * b2)
    d_cov = 2.0 * d_a2
    d_var_r = d_b2
    d_mu_r = 2.0 * mu_t * d_a1 + 2.0 * mu_r * d_b1
    # var_r = cov_norm * (s_rr - mu_r^2), cov = cov_norm * (s_rt - mu_r mu_t)
    d_s_rr = cov_norm * d_var_r
    d_s_rt = cov_norm * d_cov
    d_mu_r = d_mu_r - 2.0 * cov_norm * mu_r * d_var_r - cov_norm * mu_t * d_cov

    # Adjoint of the valid-window mean: scatter each window's coefficient
    # back onto its n pixels, i.e. a box sum of the zero-padded coefficient
    # grid divided by n.
    def scatter(coef: np.ndarray) -> np.ndarray:
        padded = np.zeros((r.shape[0] + win - 1, r.shape[1] + win - 1))
        padded[win - 1 : win - 1 + coef.shape[0], win - 1 : win - 1 + coef.shape[1]] = coef
        return _box_sum(padded, win) / n

    grad = scatter(d_mu_r) + 2.0 * r * scatter(d_s_rr) + t * scatter(d_s_rt)
    return value, grad


def image_metrics(recon, target) -> dict[str, float]:
    """NMSE, PSNR and SSIM of a reconstruction against its target."""
    return {
        "nmse": nmse(recon, target),
        "psnr": psnr(recon, target),
        "ssim": ssim(recon, target),
    }


def masked_nmse(recon, target, region) -> float:
    """NMSE restricted to the true pixels of a region mask."""
    r = as_image(recon)
    t = as_image(target)
    _check_same_shape(r, t)
    m = as_region(region, r.shape)
    if not m.any():
        raise EmptyRegionError("region mask selects no pixels")
    # Same elementwise expressions and accumulation order as nmse(), so a
    # full-image mask reproduces the global value bit for bit.
    t_sq = t * t
    denom = float(np.sum(t_sq[m]))
    if denom == 0.0:
        raise UndefinedMetricError("masked NMSE undefined: zero-energy region in target")
    diff = r - t
    diff_sq = diff * diff
    return float(np.sum(diff_sq[m])) / denom
