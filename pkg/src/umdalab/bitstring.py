"""Bitstring search points and the OneMax / LeadingOnes / BinVal benchmarks.

Scalar functions take a :class:`BitString` (or any 0/1 sequence). The
``*_rows`` variants operate on a ``(count, n)`` uint8 matrix, one individual
per row, and are what the sampling loop uses.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class BitString:
    """Immutable fixed-length bitstring, stored packed eight bits per byte.

    Logical position ``i`` (0-based here, 1-based in the usual notation)
    maps to bit ``7 - i % 8`` of byte ``i // 8``, i.e. left to right.
    """

    __slots__ = ("_packed", "_n")

    def __init__(self, bits):
        arr = np.asarray(bits)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size == 0:
            raise ValueError("a bitstring needs at least one bit")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("every element must be 0 or 1")
        self._n = int(arr.size)
        packed = np.packbits(arr.astype(np.uint8))
        packed.flags.writeable = False
        self._packed = packed

    @classmethod
    def from_str(cls, text):
        return cls([int(ch) for ch in text.strip()])

    @property
    def n(self):
        return self._n

    @property
    def packed(self):
        return self._packed

    @property
    def bits(self):
        out = np.unpackbits(self._packed, count=self._n)
        out.flags.writeable = False
        return out

    def complement(self):
        return BitString(1 - self.bits)

    def __len__(self):
        return self._n

    def __getitem__(self, i):
        return int(self.bits[i])

    def __iter__(self):
        return iter(int(b) for b in self.bits)

    def __eq__(self, other):
        if not isinstance(other, BitString):
            return NotImplemented
        return self._n == other._n and bytes(self._packed) == bytes(other._packed)

    def __hash__(self):
        return hash((self._n, bytes(self._packed)))

    def __str__(self):
        return "".join(str(int(b)) for b in self.bits)

    def __repr__(self):
        return f"BitString('{self}')"


def _as_bits(x):
    if isinstance(x, BitString):
        return x.bits
    return np.asarray(x, dtype=np.uint8)


def onemax(x):
    """Number of one-bits."""
    return int(_as_bits(x).sum())


def leadingones(x):
    """Length of the longest all-ones prefix."""
    bits = _as_bits(x)
    zeros = np.flatnonzero(bits == 0)
    return int(zeros[0]) if zeros.size else int(bits.size)


def binval(x):
    """Binary value with the first bit most significant, as an exact Python int."""
    bits = _as_bits(x)
    return int.from_bytes(np.packbits(bits).tobytes(), "big") >> ((-bits.size) % 8)


def binval_compare(x, y):
    """Sign of ``binval(x) - binval(y)`` computed by lexicographic comparison."""
    a, b = _as_bits(x), _as_bits(y)
    if a.size != b.size:
        raise ValueError("bitstrings must have equal length")
    diff = np.flatnonzero(a != b)
    if diff.size == 0:
        return 0
    return 1 if a[diff[0]] else -1


def onemax_rows(rows):
    return rows.sum(axis=1, dtype=np.int64)


def leadingones_rows(rows):
    zero = rows == 0
    first = zero.argmax(axis=1).astype(np.int64)
    first[~zero.any(axis=1)] = rows.shape[1]
    return first


def binval_rows(rows):
    """Dense ranks that order rows exactly like BinVal (no big integers).

    Equal rows share a rank; a larger rank means a larger BinVal.
    """
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    packed = np.packbits(rows, axis=1)
    # byte-wise lexicographic order of packed rows == BinVal order
    keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, inverse = np.unique(keys, return_inverse=True)
    return inverse.astype(np.int64).ravel()


def all_ones_rows(rows):
    return rows.all(axis=1)


@dataclass(frozen=True)
class Problem:
    """A maximisation problem on bitstrings.

    ``keys`` maps a row matrix to integer sort keys (larger is fitter) and
    ``is_optimal`` flags rows that are global optima. ``code`` selects the
    compiled fitness inside the numba kernel; user-defined problems leave it
    ``None`` and always run on the numpy path.
    """

    name: str
    keys: Callable[[np.ndarray], np.ndarray]
    is_optimal: Callable[[np.ndarray], np.ndarray] = all_ones_rows
    fitness: Optional[Callable] = None
    code: Optional[int] = None


ONEMAX = Problem("onemax", onemax_rows, fitness=onemax, code=0)
LEADINGONES = Problem("leadingones", leadingones_rows, fitness=leadingones, code=1)
BINVAL = Problem("binval", binval_rows, fitness=binval, code=2)

PROBLEMS = {p.name: p for p in (ONEMAX, LEADINGONES, BINVAL)}


def get_problem(name):
    try:
        return PROBLEMS[name]
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; choose from {', '.join(sorted(PROBLEMS))}"
        ) from None
