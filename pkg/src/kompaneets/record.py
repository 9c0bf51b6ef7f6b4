"""Time-series container filled by :func:`kompaneets.solver.run`."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Mesh


@dataclass
class RunRecord:
    """Diagnostics captured every ``record_every`` steps of a run.

    ``loss_integral`` is the running integral of ``n_t(0)**2`` accumulated
    with the trapezoid rule on every time step, not only on recorded ones.
    ``energy_source`` likewise accumulates ``int int x n**2 dx dt``.
    Optional series are ``None`` when their toggle was off.
    """

    mesh: Mesh
    dt: float
    record_every: int
    nonlinearity: str
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    photon_numbers: list = field(default_factory=list)
    boundary_values: list = field(default_factory=list)
    loss_integral: list = field(default_factory=list)
    entropies: Optional[list] = None
    dissipations: Optional[list] = None
    energy: Optional[list] = None
    energy_source: Optional[list] = None
    snapshots: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def initial(self) -> np.ndarray:
        return self.snapshots[0]

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def series(self) -> dict:
        """Recorded scalar series as numpy arrays, keyed by column name."""
        out = {
            "t": np.asarray(self.times),
            "N": np.asarray(self.photon_numbers),
            "n0": np.asarray(self.boundary_values),
            "loss_integral": np.asarray(self.loss_integral),
        }
        for key, attr in (("H", "entropies"), ("D", "dissipations"), ("energy", "energy")):
            vals = getattr(self, attr)
            if vals is not None:
                out[key] = np.asarray(vals)
        return out
