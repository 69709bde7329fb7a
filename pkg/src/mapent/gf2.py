"""Bit-packed GF(2) linear algebra (64 columns per uint64 word)."""

from __future__ import annotations

from typing import Iterable, List, Sequence

import numpy as np


class Gf2Matrix:
    """Dense bit matrix over GF(2), rows packed into uint64 words."""

    def __init__(self, words: np.ndarray, n_cols: int):
        self.words = np.ascontiguousarray(words, dtype=np.uint64)
        self.n_cols = int(n_cols)
        if self.words.ndim != 2:
            raise ValueError("words must be 2-d")
        if self.words.shape[1] != (self.n_cols + 63) // 64:
            raise ValueError("word count does not match column count")

    @property
    def n_rows(self) -> int:
        return self.words.shape[0]

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "Gf2Matrix":
        return cls(np.zeros((n_rows, (n_cols + 63) // 64), dtype=np.uint64), n_cols)

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[int]], n_cols: int) -> "Gf2Matrix":
        """Build from per-row column-index lists; repeated indices cancel (parity)."""
        m = cls.zeros(len(rows), n_cols)
        for r, cols in enumerate(rows):
            col_list = list(cols)
            if not col_list:
                continue
            counts = np.bincount(np.asarray(col_list, dtype=np.int64))
            odd = np.nonzero(counts % 2)[0]
            if odd.size and odd.max() >= n_cols:
                raise ValueError("column index out of range")
            m.words[r, odd // 64] ^= np.uint64(1) << (odd % 64).astype(np.uint64)
        return m

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "Gf2Matrix":
        dense = np.asarray(dense, dtype=np.uint8) & 1
        n_rows, n_cols = dense.shape
        m = cls.zeros(n_rows, n_cols)
        for c in range(n_cols):
            mask = dense[:, c].astype(bool)
            m.words[mask, c // 64] ^= np.uint64(1) << np.uint64(c % 64)
        return m

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        for c in range(self.n_cols):
            bit = np.uint64(1) << np.uint64(c % 64)
            out[:, c] = (self.words[:, c // 64] & bit) != 0
        return out

    def stack(self, other: "Gf2Matrix") -> "Gf2Matrix":
        if other.n_cols != self.n_cols:
            raise ValueError("column counts differ")
        return Gf2Matrix(np.vstack([self.words, other.words]), self.n_cols)

    def copy(self) -> "Gf2Matrix":
        return Gf2Matrix(self.words.copy(), self.n_cols)

    def _eliminate(self) -> List[int]:
        """In-place reduced row echelon form; returns pivot columns."""
        w = self.words
        pivots: List[int] = []
        r = 0
        n_rows = w.shape[0]
        for col in range(self.n_cols):
            if r >= n_rows:
                break
            word, bit = col // 64, np.uint64(1) << np.uint64(col % 64)
            hits = np.nonzero(w[r:, word] & bit)[0]
            if hits.size == 0:
                continue
            piv = r + int(hits[0])
            if piv != r:
                w[[r, piv]] = w[[piv, r]]
            others = np.nonzero(w[:, word] & bit)[0]
            others = others[others != r]
            if others.size:
                w[others] ^= w[r]
            pivots.append(col)
            r += 1
        return pivots

    def rank(self) -> int:
        return len(self.copy()._eliminate())

    def null_space_basis(self) -> np.ndarray:
        """Dense uint8 basis (dim, n_cols) of the right null space."""
        reduced = self.copy()
        pivots = reduced._eliminate()
        pivot_set = set(pivots)
        free_cols = [c for c in range(self.n_cols) if c not in pivot_set]
        dense = reduced.to_dense()[:len(pivots)]
        basis = np.zeros((len(free_cols), self.n_cols), dtype=np.uint8)
        for i, f in enumerate(free_cols):
            basis[i, f] = 1
            # pivot row j has 1 in column f iff pivot var j depends on x_f
            basis[i, np.asarray(pivots, dtype=np.int64)] = dense[:, f]
        return basis

    def mul_dense(self, vectors: np.ndarray) -> np.ndarray:
        """Matrix-vector products over GF(2): (batch, n_cols) -> (batch, n_rows)."""
        dense = self.to_dense()
        return (np.asarray(vectors, dtype=np.uint8) @ dense.T) % 2


def rank_of_rows(rows: Sequence[Iterable[int]], n_cols: int) -> int:
    return Gf2Matrix.from_rows(rows, n_cols).rank()
