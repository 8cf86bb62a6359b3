"""Reinhard color-statistics transfer in the decorrelated lab space.

The fixed transform constants (RGB->LMS, LMS->RGB and the lab rotation) are
the single source of truth for the whole package:

    RGB->LMS  [[0.381100, 0.578300, 0.040200],
               [0.196700, 0.724400, 0.078200],
               [0.024100, 0.128800, 0.844400]]
    LMS->RGB  [[ 4.467900, -3.587300,  0.119300],
               [-1.218600,  2.380900, -0.162400],
               [ 0.049700, -0.243900,  1.204500]]
    lab  = diag(1/sqrt(3), 1/sqrt(6), 1/sqrt(2)) @ [[1,1,1],[1,1,-2],[1,-1,0]] @ log10(LMS)

LMS values are floored at 1e-6 before the log so black pixels stay finite.
"""

import json
from dataclasses import dataclass

import numpy as np

from .imaging import HistokitError

RGB2LMS = np.array(
    [[0.3811, 0.5783, 0.0402], [0.1967, 0.7244, 0.0782], [0.0241, 0.1288, 0.8444]]
)
LMS2RGB = np.array(
    [[4.4679, -3.5873, 0.1193], [-1.2186, 2.3809, -0.1624], [0.0497, -0.2439, 1.2045]]
)
_LAB_FWD = np.diag([1.0 / np.sqrt(3.0), 1.0 / np.sqrt(6.0), 1.0 / np.sqrt(2.0)]) @ np.array(
    [[1.0, 1.0, 1.0], [1.0, 1.0, -2.0], [1.0, -1.0, 0.0]]
)
_LAB_INV = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -2.0, 0.0]]) @ np.diag(
    [np.sqrt(3.0) / 3.0, np.sqrt(6.0) / 6.0, np.sqrt(2.0) / 2.0]
)
LOG_FLOOR = 1e-6


@dataclass(frozen=True)
class StainStats:
    """Per-channel mean and standard deviation in lab space."""

    l_mean: float
    a_mean: float
    b_mean: float
    l_std: float
    a_std: float
    b_std: float

    def __post_init__(self):
        if min(self.l_std, self.a_std, self.b_std) < 0:
            raise HistokitError("stain stats stds must be >= 0")

    @property
    def means(self):
        return np.array([self.l_mean, self.a_mean, self.b_mean])

    @property
    def stds(self):
        return np.array([self.l_std, self.a_std, self.b_std])

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def rgb_to_lab(image):
    """uint8 RGB image -> float64 (H, W, 3) lab plane."""
    rgb = np.asarray(image, dtype=np.float64) / 255.0
    lms = np.maximum(rgb @ RGB2LMS.T, LOG_FLOOR)
    return np.log10(lms) @ _LAB_FWD.T


def lab_to_rgb(plane):
    """Float lab plane -> uint8 RGB, out-of-gamut values clamped to [0, 255]."""
    lms = np.power(10.0, np.asarray(plane, dtype=np.float64) @ _LAB_INV.T)
    rgb = np.clip(lms @ LMS2RGB.T, 0.0, 1.0)
    return np.rint(rgb * 255.0).astype(np.uint8)


def stain_stats(image):
    """lab-space channel means/stds (population std) of an RGB image."""
    lab = rgb_to_lab(image).reshape(-1, 3)
    mean = lab.mean(axis=0)
    std = lab.std(axis=0)
    return StainStats(mean[0], mean[1], mean[2], std[0], std[1], std[2])


def normalize_lab(lab, target):
    """Map lab channels to the target statistics.

    Each channel is shifted/scaled so its mean/std match the target; a
    zero-variance source channel collapses to the target mean (scale 0).
    """
    lab = np.asarray(lab, dtype=np.float64)
    src_mean = lab.reshape(-1, 3).mean(axis=0)
    src_std = lab.reshape(-1, 3).std(axis=0)
    scale = np.where(src_std > 0, target.stds / np.where(src_std > 0, src_std, 1.0), 0.0)
    return (lab - src_mean) * scale + target.means


def reinhard_normalize(image, target):
    """Normalize an RGB image to target lab statistics (Reinhard transfer)."""
    return lab_to_rgb(normalize_lab(rgb_to_lab(image), target))
