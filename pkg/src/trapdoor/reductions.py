"""Reductions between binary product estimation and trapdoor density estimation.

The lift turns each row of a product-distribution dataset into one trapdoor
sample. Its randomness is kept as an explicit per-row record so that, with the
record held fixed, changing one input row changes exactly one output sample.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from trapdoor.distributions import (
    Dataset,
    Hard,
    Key,
    Sample,
    Seed,
    TrapdoorParams,
    prob_vector,
    tv_decomposed,
)
from trapdoor.errors import ContractError, DatasetFormatError, StructuralError

PRODUCT_HEADER = "product-dataset v1"
_HEADER_RE = re.compile(r"^product-dataset v1 d=(\d+)$")


class ProductDataset:
    """Rows drawn from a binary product distribution over ``{0,1}^d``."""

    __slots__ = ("d", "rows")

    def __init__(self, d: int, rows: np.ndarray | Sequence[Sequence[int]]):
        if int(d) != d or d < 2:
            raise StructuralError(f"product dataset dimension must be an integer >= 2, got {d!r}")
        d = int(d)
        rows = np.array(rows, dtype=np.int64).reshape(-1, d) if len(rows) else np.zeros((0, d))
        if np.any((rows != 0) & (rows != 1)):
            raise StructuralError("product dataset rows must contain only 0/1")
        rows = np.ascontiguousarray(rows, dtype=np.uint8)
        rows.setflags(write=False)
        self.d = d
        self.rows = rows

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProductDataset):
            return NotImplemented
        return self.d == other.d and np.array_equal(self.rows, other.rows)

    def __repr__(self) -> str:
        return f"ProductDataset(d={self.d}, n={len(self)})"

    def replace_row(self, i: int, row: Sequence[int]) -> "ProductDataset":
        """A neighbouring dataset: row ``i`` swapped for ``row``."""
        rows = self.rows.copy()
        rows[i] = row
        return ProductDataset(self.d, rows)


def sample_product(p: Sequence[float], n: int, seed: Seed) -> ProductDataset:
    """Draw ``n`` rows from ``prod_j Bern(p_j)``."""
    p = prob_vector(p)
    rng = np.random.default_rng(seed)
    return ProductDataset(p.size, rng.random((n, p.size)) < p)


def format_product_dataset(x: ProductDataset) -> str:
    lines = [f"{PRODUCT_HEADER} d={x.d}"]
    lines.extend(" ".join("1" if b else "0" for b in row) for row in x.rows)
    return "\n".join(lines) + "\n"


def parse_product_dataset(text: str, path: str | None = None) -> ProductDataset:
    lines = text.splitlines()
    m = _HEADER_RE.match(lines[0].strip()) if lines else None
    if not m:
        got = lines[0] if lines else ""
        raise DatasetFormatError(
            f"expected header '{PRODUCT_HEADER} d=<d>', got {got!r}", line=1, path=path
        )
    d = int(m.group(1))
    if d < 2:
        raise DatasetFormatError(f"dimension must be at least 2, got {d}", line=1, path=path)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens:
            continue
        if len(tokens) != d or any(t not in ("0", "1") for t in tokens):
            raise DatasetFormatError(
                f"row needs exactly {d} bits (0/1), got {raw.strip()!r}", line=lineno, path=path
            )
        rows.append([int(t) for t in tokens])
    return ProductDataset(d, np.array(rows, dtype=np.uint8).reshape(-1, d))


def write_product_dataset(x: ProductDataset, path: str | Path) -> None:
    Path(path).write_text(format_product_dataset(x), encoding="utf-8")


def read_product_dataset(path: str | Path) -> ProductDataset:
    return parse_product_dataset(Path(path).read_text(encoding="utf-8"), path=str(path))


# --------------------------------------------------------------------------
# The lift
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LiftRandomness:
    """Per-row lift randomness: keep the row as a key sample, or reveal coordinate ``coord``.

    ``coord`` is 1-based and is ignored where ``keep`` is true.
    """

    keep: np.ndarray
    coord: np.ndarray

    def __len__(self) -> int:
        return int(self.keep.size)


def lift_randomness(n: int, d: int, w: float, seed: Seed) -> LiftRandomness:
    """Draw the lift randomness for ``n`` rows.

    Row ``i`` consumes uniforms ``2i`` and ``2i + 1`` of the stream, so its
    record depends only on ``(seed, i)`` and not on ``n``.
    """
    if not 0.0 <= w <= 1.0:
        raise ContractError(f"lift weight must lie in [0, 1], got {w}")
    u = np.random.default_rng(seed).random((n, 2))
    keep = u[:, 0] < w
    coord = np.minimum((u[:, 1] * d).astype(np.int64), d - 1) + 1
    return LiftRandomness(keep, coord)


def lift_row(row: Sequence[int], keep: bool, coord: int) -> Sample:
    """Deterministic image of one product row under fixed lift randomness."""
    if keep:
        return Key(tuple(int(b) for b in row))
    return Hard(coord if row[coord - 1] else -coord)


def apply_lift(x: ProductDataset, randomness: LiftRandomness) -> Dataset:
    if len(randomness) != len(x):
        raise ContractError(f"randomness covers {len(randomness)} rows, dataset has {len(x)}")
    keep, coord = randomness.keep, randomness.coord
    if np.any((coord < 1) | (coord > x.d)):
        raise ContractError(f"lift coordinates must lie in 1..{x.d}")
    revealed = x.rows[np.arange(len(x)), coord - 1]
    hard = np.where(keep, 0, np.where(revealed == 1, coord, -coord))
    bits = np.where(keep[:, None], x.rows, 0)
    return Dataset(x.d, bits, hard)


def lift_product_samples(x: ProductDataset, w: float, seed: Seed) -> Dataset:
    """Turn product rows into trapdoor samples distributed as ``D_{w,d,p}``.

    Each row independently stays as a key sample with probability ``w``;
    otherwise a uniformly random coordinate ``j`` is revealed as ``+j`` if that
    bit is 1 and ``-j`` if it is 0. Row ``i`` maps to sample ``i``.
    """
    return apply_lift(x, lift_randomness(len(x), x.d, w, seed))


# --------------------------------------------------------------------------
# Parameter extraction and projection
# --------------------------------------------------------------------------


def extract_parameters(params: TrapdoorParams) -> np.ndarray:
    """The probability vector of a class member. Post-processing only."""
    return params.p_array


@dataclass(frozen=True)
class HypothesisNet:
    """A finite set of class members sharing ``(w, d)``."""

    elements: tuple[TrapdoorParams, ...]

    def __post_init__(self) -> None:
        elements = tuple(self.elements)
        if not elements:
            raise ContractError("hypothesis net must be non-empty")
        w, d = elements[0].w, elements[0].d
        if any(e.w != w or e.d != d for e in elements):
            raise ContractError("all net members must share w and d")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def from_vectors(cls, w: float, vectors: Iterable[Sequence[float]]) -> "HypothesisNet":
        return cls(tuple(TrapdoorParams.of(w, v) for v in vectors))

    @property
    def w(self) -> float:
        return self.elements[0].w

    @property
    def d(self) -> int:
        return self.elements[0].d

    def __len__(self) -> int:
        return len(self.elements)


def project_to_class(candidate: TrapdoorParams, net: HypothesisNet) -> TrapdoorParams:
    """Net member closest to ``candidate`` in TV; ties go to the lowest index."""
    if not net.elements:
        raise ContractError("hypothesis net must be non-empty")
    if candidate.d != net.d or candidate.w != net.w:
        raise ContractError(
            f"candidate (w={candidate.w}, d={candidate.d}) does not match net "
            f"(w={net.w}, d={net.d})"
        )
    best, best_tv = net.elements[0], tv_decomposed(candidate, net.elements[0])
    for e in net.elements[1:]:
        tv = tv_decomposed(candidate, e)
        if tv < best_tv:
            best, best_tv = e, tv
    return best
