"""Curve-to-curve distances between 3D point samples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

BRUTE_LIMIT = 10_000


@dataclass
class CurveDistanceReport:
    hausdorff_one_directional: float
    chamfer: float
    n_from: int
    n_to: int
    direction: str = "computed->reference"

    def to_dict(self):
        return {
            "hd": self.hausdorff_one_directional,
            "cd": self.chamfer,
            "n_from": self.n_from,
            "n_to": self.n_to,
            "direction": self.direction,
        }


def nearest_distances(A, B, method="tree"):
    """Distance from every point of ``A`` to its nearest point of ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("nearest distances need two non-empty point sets")
    if method == "brute":
        if len(A) * len(B) > BRUTE_LIMIT * BRUTE_LIMIT:
            raise ValueError("brute-force nearest neighbours are limited to small inputs")
        out = np.empty(len(A))
        for i in range(0, len(A), 256):
            d = np.linalg.norm(A[i:i + 256, None, :] - B[None, :, :], axis=-1)
            out[i:i + 256] = d.min(axis=1)
        return out
    d, _ = cKDTree(B).query(A)
    return d


def hausdorff_cd(A, B, direction="computed->reference", method="tree"):
    """One-directional Hausdorff (max) and Chamfer (mean) of nearest distances A -> B."""
    d = nearest_distances(A, B, method)
    return CurveDistanceReport(float(d.max()), float(d.mean()), len(A), len(B), direction)
