"""Image-quality figures: contrast-to-noise ratio and relative RMS error."""
from dataclasses import dataclass

import numpy as np

from .core import MistError, ScalarField, check_same_grid


class DegenerateRoiError(MistError):
    pass


@dataclass(frozen=True)
class Roi:
    """Axis-aligned rectangle in pixel units; ``x0``/``y0`` is the top-left."""

    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if min(self.x0, self.y0) < 0 or min(self.width, self.height) < 1:
            raise ValueError(f"invalid ROI {self}")
        if self.width * self.height < 4:
            raise ValueError(f"ROI area must be at least 4 pixels: {self}")

    @classmethod
    def parse(cls, text):
        """Build from ``"x0,y0,w,h"``."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"ROI must be 'x0,y0,w,h', got {text!r}")
        return cls(*(int(p) for p in parts))

    def check_inside(self, field):
        if self.x0 + self.width > field.width or self.y0 + self.height > field.height:
            raise ValueError(
                f"ROI {self} exceeds field bounds {field.width}x{field.height}"
            )

    def overlaps(self, other):
        return not (
            self.x0 + self.width <= other.x0 or other.x0 + other.width <= self.x0
            or self.y0 + self.height <= other.y0 or other.y0 + other.height <= self.y0
        )

    def take(self, field):
        self.check_inside(field)
        return field.values[self.y0:self.y0 + self.height, self.x0:self.x0 + self.width]


@dataclass(frozen=True)
class CnrStats:
    cnr: float
    mean_background: float
    mean_feature: float
    std_background: float


def cnr_stats(field: ScalarField, roi_background: Roi, roi_feature: Roi) -> CnrStats:
    """CNR = (mean_bg - mean_feature) / std_bg, with the population std."""
    if roi_background.overlaps(roi_feature):
        raise ValueError("background and feature ROIs must be disjoint")
    bg = roi_background.take(field)
    fg = roi_feature.take(field)
    mu1, mu2 = float(bg.mean()), float(fg.mean())
    sigma1 = float(bg.std())
    if sigma1 == 0:
        raise DegenerateRoiError("background ROI has zero variance; CNR is undefined")
    return CnrStats((mu1 - mu2) / sigma1, mu1, mu2, sigma1)


def cnr(field: ScalarField, roi_background: Roi, roi_feature: Roi) -> float:
    return cnr_stats(field, roi_background, roi_feature).cnr


def interior(values, border):
    if border < 0:
        raise ValueError("border must be non-negative")
    if border == 0:
        return values
    return values[border:-border, border:-border]


def rms_relative_error(estimate: ScalarField, truth: ScalarField, border_exclude=8, mask=None):
    """RMS(estimate - truth) / RMS(truth) over the interior.

    ``mask``, if given, further restricts the comparison to pixels where it
    is true (same shape as the fields).
    """
    check_same_grid(estimate, truth)
    e = interior(estimate.values, border_exclude)
    t = interior(truth.values, border_exclude)
    if e.size == 0:
        raise ValueError("border exclusion leaves no pixels")
    if mask is not None:
        sel = interior(np.asarray(mask, dtype=bool), border_exclude)
        e, t = e[sel], t[sel]
    denom = np.sqrt(np.mean(t * t)) if t.size else 0.0
    if denom == 0:
        raise DegenerateRoiError("truth is identically zero in the comparison region")
    return float(np.sqrt(np.mean((e - t) ** 2)) / denom)
