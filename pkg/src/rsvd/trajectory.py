from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trajectory:
    """Time-ordered states plus named monitor series sampled at the same times."""

    times: np.ndarray
    states: list
    monitors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            # backward integration stores decreasing times; require monotone either way
            if not np.all(np.diff(self.times) < 0):
                raise ValueError("times must be strictly monotone")
        for name, series in self.monitors.items():
            if len(series) != len(self.times):
                raise ValueError(f"monitor {name!r} has wrong length")

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]
