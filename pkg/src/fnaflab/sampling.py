"""Cartesian column undersampling: mask generation and the k-space operator.

Masks follow the public single-coil convention: a fully sampled central
band of low-frequency columns plus i.i.d. Bernoulli columns elsewhere,
with the probability chosen so the expected sampled fraction equals
1/acceleration.  Presets: center fraction 0.08 at 4x, 0.04 at 8x.

Columns (the phase-encode direction) are masked, never rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import grids
from .errors import ConfigError, InvalidInputError

CENTER_FRACTIONS = {4: 0.08, 8: 0.04}

# A mask whose sampled fraction strays more than this (relative) from the
# 1/acceleration budget is redrawn.
FRACTION_TOLERANCE = 0.20
_MAX_REDRAWS = 10_000


@dataclass(frozen=True)
class MaskSpec:
    """Acceleration factor, fully sampled center fraction, RNG seed."""

    acceleration: int
    center_fraction: float
    seed: int

    def __post_init__(self):
        if self.acceleration < 2:
            raise ConfigError(f"acceleration must be >= 2, got {self.acceleration}")
        if not 0.0 < self.center_fraction < 1.0:
            raise ConfigError(
                f"center_fraction must be in (0, 1), got {self.center_fraction}"
            )


def preset_spec(acceleration: int, seed: int) -> MaskSpec:
    """The stock spec for a supported acceleration factor (4x or 8x)."""
    if acceleration not in CENTER_FRACTIONS:
        raise ConfigError(
            f"no preset for acceleration {acceleration}; supported: "
            f"{sorted(CENTER_FRACTIONS)}"
        )
    return MaskSpec(acceleration, CENTER_FRACTIONS[acceleration], seed)


@dataclass(frozen=True)
class SamplingMask:
    """Boolean selection over k-space columns plus the spec that made it."""

    cols_selected: np.ndarray
    spec: MaskSpec

    @property
    def n_cols(self) -> int:
        return int(self.cols_selected.size)

    @property
    def sampled_fraction(self) -> float:
        return float(np.count_nonzero(self.cols_selected)) / self.n_cols

    def to_json(self) -> str:
        payload = {
            "cols": self.n_cols,
            "selected": np.flatnonzero(self.cols_selected).tolist(),
            "spec": {
                "acceleration": self.spec.acceleration,
                "center_fraction": self.spec.center_fraction,
                "seed": self.spec.seed,
            },
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SamplingMask":
        payload = json.loads(text)
        selected = np.zeros(int(payload["cols"]), dtype=bool)
        selected[np.asarray(payload["selected"], dtype=int)] = True
        spec = MaskSpec(**payload["spec"])
        return cls(selected, spec)


def center_band(center_fraction: float, cols: int) -> slice:
    """The slice of always-sampled low-frequency columns."""
    n_low = int(round(center_fraction * cols))
    n_low = max(n_low, 1)
    pad = (cols - n_low + 1) // 2
    return slice(pad, pad + n_low)


def generate_mask(spec: MaskSpec, cols: int) -> SamplingMask:
    """Draw a column mask: full center band + Bernoulli outer columns.

    Deterministic given (spec, cols).  Draws are repeated until the sampled
    fraction is within 20% (relative) of 1/acceleration; the degenerate
    budget where only the center band fits is returned as-is.
    """
    if cols < 16:
        raise ConfigError(f"need at least 16 columns, got {cols}")
    band = center_band(spec.center_fraction, cols)
    n_low = band.stop - band.start
    budget = cols / spec.acceleration
    if n_low > 2.0 * budget:
        raise ConfigError(
            f"center band of {n_low} columns exceeds the {budget:.1f}-column "
            f"budget at acceleration {spec.acceleration} by more than the budget"
        )
    selected = np.zeros(cols, dtype=bool)
    selected[band] = True
    prob = (budget - n_low) / (cols - n_low)
    if prob <= 0.0:
        return SamplingMask(selected, spec)

    rng = np.random.default_rng(spec.seed)
    outer = ~selected
    lo = (1.0 - FRACTION_TOLERANCE) * budget
    hi = (1.0 + FRACTION_TOLERANCE) * budget
    for _ in range(_MAX_REDRAWS):
        draw = selected.copy()
        draw[outer] = rng.random(int(outer.sum())) < prob
        total = int(np.count_nonzero(draw))
        if lo <= total <= hi:
            return SamplingMask(draw, spec)
    raise ConfigError(
        f"could not draw a mask within {FRACTION_TOLERANCE:.0%} of the "
        f"1/{spec.acceleration} budget after {_MAX_REDRAWS} attempts"
    )


def apply_mask(ksp, mask: SamplingMask) -> np.ndarray:
    """Zero the unselected columns of a k-space grid."""
    k = grids.as_grid(ksp)
    if k.shape[1] != mask.n_cols:
        raise InvalidInputError(
            f"mask has {mask.n_cols} columns, k-space has {k.shape[1]}"
        )
    out = k.copy()
    out[:, ~mask.cols_selected] = 0.0
    return out


def undersample_complex(image, mask: SamplingMask) -> np.ndarray:
    """Column-masked k-space round trip, kept complex.

    This variant is linear and closed under addition, so feature injection
    and information-preservation checks use it; magnitude is taken only at
    the model input boundary.
    """
    img = grids.as_image(image)
    return grids.ifft2c(apply_mask(grids.fft2c(img.astype(np.complex128)), mask))


def undersample(image, mask: SamplingMask) -> np.ndarray:
    """Zero-filled reconstruction: magnitude of the masked round trip."""
    return np.abs(undersample_complex(image, mask))
