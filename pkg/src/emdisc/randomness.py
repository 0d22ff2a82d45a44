"""Reproducible Brownian paths on a fine uniform grid of [0, 1].

Every path is generated from its own Philox stream keyed by
``(master_seed, tag, path_index)``, so a path never depends on which
worker produced it or in which order.

Generated Brownian values are rounded to the dyadic lattice
``2**-LATTICE_BITS``. Sums and differences of lattice numbers of modest
size are exact in double precision, so coarse increments, prefix sums and
their differences all agree bit for bit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SeedSpec",
    "BrownianPath",
    "generate_path",
    "generate_values",
    "generate_block",
    "coarse_path",
    "coarsen",
    "value_at",
    "LATTICE_BITS",
]

LATTICE_BITS = 40
_SCALE = float(2 ** LATTICE_BITS)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    tag: str = "brownian"

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")

    def generator(self, path_index: int) -> np.random.Generator:
        """Independent generator for one path, a pure function of the key."""
        tag_key = zlib.crc32(self.tag.encode("utf-8"))
        ss = np.random.SeedSequence(int(self.master_seed),
                                    spawn_key=(tag_key, int(path_index)))
        return np.random.Generator(np.random.Philox(ss))


class BrownianPath:
    """Brownian motion sampled at ``j / n_fine``, j = 0..n_fine.

    The prefix sums ``W_{j/n_fine}`` are the stored quantity; increments
    are their differences.
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        values = np.array(values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("need at least two Brownian values")
        if values[0] != 0.0:
            raise ValueError("Brownian path must start at 0")
        values.setflags(write=False)
        self._values = values

    @classmethod
    def from_increments(cls, increments) -> "BrownianPath":
        inc = np.asarray(increments, dtype=float)
        return cls(np.concatenate(([0.0], np.cumsum(inc))))

    @property
    def n_fine(self) -> int:
        return self._values.size - 1

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self._values)

    def __len__(self):
        return self.n_fine

    def __repr__(self):
        return f"BrownianPath(n_fine={self.n_fine}, W_1={self._values[-1]:.6g})"


def _check_n(n_fine: int):
    if int(n_fine) < 1:
        raise ValueError("n_fine must be a positive integer")


def generate_values(seed: SeedSpec, path_index: int, n_fine: int) -> np.ndarray:
    """Brownian values ``W_{j/n_fine}``, j = 0..n_fine, on the dyadic lattice."""
    _check_n(n_fine)
    z = seed.generator(path_index).standard_normal(n_fine)
    w = np.empty(n_fine + 1)
    w[0] = 0.0
    np.cumsum(z, out=w[1:])
    w[1:] *= 1.0 / np.sqrt(n_fine)
    return np.round(w * _SCALE) / _SCALE


def generate_path(seed: SeedSpec, path_index: int, n_fine: int) -> BrownianPath:
    return BrownianPath(generate_values(seed, path_index, n_fine))


def generate_block(seed: SeedSpec, path_indices, n_fine: int) -> np.ndarray:
    """Stack the Brownian values of several paths, shape ``(len(path_indices), n_fine+1)``."""
    _check_n(n_fine)
    out = np.empty((len(path_indices), n_fine + 1))
    for row, idx in enumerate(path_indices):
        out[row] = generate_values(seed, idx, n_fine)
    return out


def _step(n_fine: int, n_coarse: int) -> int:
    if n_coarse < 1 or n_fine % n_coarse:
        raise ValueError(f"n_coarse={n_coarse} does not divide n_fine={n_fine}")
    return n_fine // n_coarse


def coarsen(path: BrownianPath, n_coarse: int) -> np.ndarray:
    """Increments ``W_{(i+1)/n} - W_{i/n}`` for the coarse grid with ``n_coarse`` steps."""
    step = _step(path.n_fine, n_coarse)
    return np.diff(path.values[::step])


def coarse_path(path: BrownianPath, n_coarse: int) -> BrownianPath:
    """The same Brownian motion seen only at the coarse grid points."""
    step = _step(path.n_fine, n_coarse)
    return BrownianPath(path.values[::step])


def value_at(path: BrownianPath, j: int) -> float:
    if not 0 <= j <= path.n_fine:
        raise IndexError(f"grid index {j} outside 0..{path.n_fine}")
    return float(path.values[j])
