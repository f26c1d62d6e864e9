"""Time series produced by every evolution and measurement run."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["KineticsTrace", "TRACE_COLUMNS"]

TRACE_COLUMNS = ("time", "pop_x", "pop_y", "captured_fraction", "scoop_count")


@dataclass
class KineticsTrace:
    """Samples of ``(time, pop_x, pop_y, captured_fraction, scoop_count)``.

    For measurement runs ``pop_x``/``pop_y`` are the populations of the
    not-yet-captured sub-ensemble just before each event and ``scoop_count``
    is the number of particles captured (scoop) or seen in well Y (look only)
    at that event.  Continuous runs have no events and store NaN there.
    """

    time: np.ndarray
    pop_x: np.ndarray
    pop_y: np.ndarray
    captured_fraction: np.ndarray
    scoop_count: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in TRACE_COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.time)
        if any(len(getattr(self, name)) != n for name in TRACE_COLUMNS):
            raise ValueError("all trace columns must have the same length")
        if n > 1 and np.any(np.diff(self.time) <= 0):
            raise ValueError("trace times must be strictly increasing")

    def __len__(self):
        return len(self.time)

    def columns(self):
        """Column arrays in output order."""
        return [getattr(self, name) for name in TRACE_COLUMNS]

    def decimate(self, stride):
        """Every ``stride``-th sample, always keeping the last one."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        if stride == 1 or len(self) == 0:
            return self
        idx = np.arange(stride - 1, len(self), stride)
        if idx.size == 0 or idx[-1] != len(self) - 1:
            idx = np.append(idx, len(self) - 1)
        return KineticsTrace(*(col[idx] for col in self.columns()), meta=dict(self.meta))
