"""Hierarchy bookkeeping: multi-index enumeration and neighbor tables.

An auxiliary operator is labelled by one non-negative integer per
(bath, expansion-term) pair; the tier is the sum of those integers and the
hierarchy keeps every label with tier <= depth.  Enumeration is
lexicographic and therefore bitwise reproducible between builds.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bath import BathExpansion


class ResourceError(RuntimeError):
    """Hierarchy would exceed the configured memory budget."""


def hierarchy_size(n_modes, depth):
    """Number of multi-indices with sum <= depth over n_modes slots."""
    return math.comb(n_modes + depth, depth)


def enumerate_indices(n_modes, depth):
    """All multi-indices with tier <= depth, in lexicographic order."""
    out = []

    def rec(prefix, budget, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for v in range(budget + 1):
            prefix.append(v)
            rec(prefix, budget - v, slots - 1)
            prefix.pop()

    rec([], depth, n_modes)
    return out


@dataclass(frozen=True)
class Hierarchy:
    """Immutable index set plus everything the equations of motion need.

    ``up[a, j]`` / ``down[a, j]`` hold the position of the neighbor with the
    j-th exponent count raised / lowered (or -1 when outside the hierarchy).
    ``mode_bath[j]`` maps exponent j to its bath (0 or 1) and ``coupling_diag``
    holds the diagonals of the two system coupling operators
    sigma_z^(1) (x) I and I (x) sigma_z^(2).
    """

    counts: np.ndarray
    up: np.ndarray
    down: np.ndarray
    depth: int
    expansions: tuple = field(repr=False)
    mode_bath: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    rates: np.ndarray = field(repr=False)
    damping: np.ndarray = field(repr=False)
    coupling_diag: np.ndarray = field(repr=False)

    @property
    def n_ados(self):
        return self.counts.shape[0]

    @property
    def n_modes(self):
        return self.counts.shape[1]

    @property
    def tiers(self):
        return self.counts.sum(axis=1)

    def position(self, multi_index):
        """Position of a multi-index in the layout (first-tier lookups)."""
        t = tuple(multi_index)
        pos = self._positions().get(t)
        if pos is None:
            raise KeyError(f"multi-index {t} not in hierarchy (depth {self.depth})")
        return pos

    def _positions(self):
        cache = getattr(self, "_pos_cache", None)
        if cache is None:
            cache = {tuple(row): i for i, row in enumerate(self.counts)}
            object.__setattr__(self, "_pos_cache", cache)
        return cache

    def first_tier_positions(self, bath):
        """Positions of the tier-1 members belonging to one bath (0 or 1)."""
        mode_ids = np.flatnonzero(self.mode_bath == bath)
        return [int(self.up[0, j]) for j in mode_ids]


COUPLING_DIAG = np.array(
    [[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]]
)  # sigma_z (x) I  and  I (x) sigma_z


def build_hierarchy(expansion1, expansion2, depth, max_bytes=2**32):
    """Enumerate the hierarchy for two bath expansions, truncated at ``depth``.

    ``max_bytes`` bounds the memory footprint of one hierarchy state (all
    auxiliary 4x4 matrices); a build whose state would exceed it raises
    :class:`ResourceError` with the computed count.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    for exp in (expansion1, expansion2):
        if not isinstance(exp, BathExpansion):
            raise TypeError("build_hierarchy expects BathExpansion inputs")

    n1 = len(expansion1.rates)
    n2 = len(expansion2.rates)
    n_modes = n1 + n2
    count = hierarchy_size(n_modes, depth)
    state_bytes = count * 16 * 16  # complex128 entries of one full state
    if state_bytes > max_bytes:
        raise ResourceError(
            f"hierarchy with {count} auxiliary operators needs "
            f"{state_bytes / 2**20:.0f} MiB per state, over the "
            f"{max_bytes / 2**20:.0f} MiB budget"
        )

    indices = enumerate_indices(n_modes, depth)
    pos = {t: i for i, t in enumerate(indices)}
    counts = np.array(indices, dtype=np.int64)
    up = -np.ones((count, n_modes), dtype=np.int64)
    down = -np.ones((count, n_modes), dtype=np.int64)
    for i, t in enumerate(indices):
        lt = list(t)
        for j in range(n_modes):
            lt[j] += 1
            k = pos.get(tuple(lt))
            if k is not None:
                up[i, j] = k
            lt[j] -= 2
            if lt[j] >= 0:
                down[i, j] = pos[tuple(lt)]
            lt[j] += 1

    coefficients = np.concatenate(
        [expansion1.coefficients, expansion2.coefficients]
    ).astype(np.complex128)
    rates = np.concatenate([expansion1.rates, expansion2.rates])
    if np.max(np.abs(rates.imag)) > 0:
        raise ValueError("overdamped-bath expansions must have real rates")
    rates = rates.real.astype(np.float64)
    mode_bath = np.array([0] * n1 + [1] * n2, dtype=np.int64)
    damping = counts @ rates

    return Hierarchy(
        counts=counts,
        up=up,
        down=down,
        depth=depth,
        expansions=(expansion1, expansion2),
        mode_bath=mode_bath,
        coefficients=coefficients,
        rates=rates,
        damping=damping,
        coupling_diag=COUPLING_DIAG.copy(),
    )
