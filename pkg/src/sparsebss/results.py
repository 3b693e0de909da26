"""Result container shared by the separation engines."""

from dataclasses import dataclass, field

import numpy as np

from .sourcemodel import SourceFactors


@dataclass
class SeparationResult:
    """Output of a separation run.

    spectrograms holds the per-source estimates at the reference channel,
    shape (N, F, T).  cost is the objective trace: entry 0 is the initial
    state, entry i the value after sweep i.  Exactly one of demixing
    (F, N, M) or spatial (N, F, M, M) is set, depending on the engine.
    """

    spectrograms: np.ndarray
    cost: np.ndarray
    factors: SourceFactors
    demixing: np.ndarray = field(default=None)
    spatial: np.ndarray = field(default=None)

    @property
    def n_sources(self):
        return self.spectrograms.shape[0]

    def cost_rows(self):
        """(iteration, cost) pairs for CSV dumps."""
        return list(enumerate(self.cost.tolist()))
