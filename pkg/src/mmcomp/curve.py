"""Coverage curves produced by both engines."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass
class CoverageCurve:
    thresholds_db: np.ndarray
    coverage: np.ndarray
    method: str
    ci_halfwidth: Optional[np.ndarray] = None
    raw: Optional[np.ndarray] = None  # unclamped analytic values, when available
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thresholds_db = np.asarray(self.thresholds_db, dtype=float)
        self.coverage = np.asarray(self.coverage, dtype=float)
        if self.thresholds_db.shape != self.coverage.shape:
            raise ValueError("thresholds and coverage differ in length")
        if np.any(np.diff(self.thresholds_db) <= 0):
            raise ValueError("thresholds must be strictly ascending")
        if self.ci_halfwidth is not None:
            self.ci_halfwidth = np.asarray(self.ci_halfwidth, dtype=float)

    def __len__(self):
        return self.thresholds_db.shape[0]

    def at(self, threshold_db):
        """Coverage at one of the curve's thresholds."""
        hit = np.flatnonzero(np.isclose(self.thresholds_db, threshold_db, atol=1e-9))
        if hit.size == 0:
            raise KeyError(f"threshold {threshold_db} dB not on this curve")
        return float(self.coverage[hit[0]])

    @property
    def entries(self):
        ci = self.ci_halfwidth if self.ci_halfwidth is not None else [None] * len(self)
        return [(float(t), float(c), None if h is None else float(h), self.method)
                for t, c, h in zip(self.thresholds_db, self.coverage, ci)]
