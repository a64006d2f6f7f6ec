"""The trapdoor distribution family D_{w,d,p} and its total variation geometry.

A member of the family is a mixture over the disjoint support
``{0,1}^d  U  {+-1, ..., +-d}``:

* with probability ``w`` a *key* sample, a bit vector drawn from the product
  of ``Bern(p_j)``;
* with probability ``(1 - w) / d`` for each ``j``, a *hard* sample equal to
  ``+j`` with probability ``p_j`` and ``-j`` otherwise.

Atoms of the finite support are indexed canonically: key atoms first, in
lexicographic bit order with the first coordinate most significant, then
``+1, -1, +2, -2, ..., +d, -d``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from trapdoor.errors import CapabilityError, ContractError, DatasetFormatError, StructuralError

#: Largest dimension for which the exact routines enumerate ``{0,1}^d``.
MAX_BRUTEFORCE_DIM = 20

Seed = Union[int, np.random.SeedSequence, np.random.Generator, None]


def prob_vector(values: Iterable[float], d: int | None = None) -> np.ndarray:
    """Validate ``values`` as a probability vector and return a read-only float array."""
    arr = np.array(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise StructuralError("probability vector must be a non-empty 1-d sequence")
    if d is not None and arr.size != d:
        raise StructuralError(f"probability vector has length {arr.size}, expected {d}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ContractError("probability vector entries must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TrapdoorParams:
    """Parameters ``(w, d, p)`` of one distribution in the class ``H_{w,d}``."""

    w: float
    d: int
    p: tuple[float, ...]

    def __post_init__(self) -> None:
        if isinstance(self.d, bool) or int(self.d) != self.d:
            raise StructuralError(f"d must be an integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.d < 2:
            raise ContractError(f"d must be at least 2, got {self.d}")
        w = float(self.w)
        if not 0.0 < w < 1.0:
            raise ContractError(f"mixing weight w must lie in (0, 1), got {self.w}")
        object.__setattr__(self, "w", w)
        arr = prob_vector(self.p, self.d)
        object.__setattr__(self, "p", tuple(float(v) for v in arr))

    @classmethod
    def of(cls, w: float, p: Sequence[float] | np.ndarray) -> "TrapdoorParams":
        """Build params with ``d`` taken from ``len(p)``."""
        p = list(p)
        return cls(w=w, d=len(p), p=tuple(p))

    @property
    def p_array(self) -> np.ndarray:
        arr = np.asarray(self.p, dtype=float)
        arr.setflags(write=False)
        return arr


# --------------------------------------------------------------------------
# Samples and datasets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Key:
    """A key-component sample: a bit vector in ``{0,1}^d``."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise StructuralError(f"key sample must be a non-empty bit vector, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)


@dataclass(frozen=True)
class Hard:
    """A hard-component sample: a signed coordinate index ``+-j``."""

    j: int

    def __post_init__(self) -> None:
        if isinstance(self.j, bool) or int(self.j) != self.j or self.j == 0:
            raise StructuralError(f"hard sample must be a nonzero integer, got {self.j!r}")
        object.__setattr__(self, "j", int(self.j))


Sample = Union[Key, Hard]


def _check_sample(x: Sample, d: int) -> None:
    if isinstance(x, Key):
        if len(x.bits) != d:
            raise StructuralError(f"key sample has {len(x.bits)} bits, expected {d}")
    elif isinstance(x, Hard):
        if abs(x.j) > d:
            raise StructuralError(f"hard sample index {x.j} exceeds dimension {d}")
    else:
        raise StructuralError(f"not a sample: {x!r}")


class Dataset:
    """An ordered, immutable collection of samples over a declared dimension.

    Stored column-wise: ``bits`` is an ``(n, d)`` uint8 array whose rows at hard
    positions are zero, and ``hard`` is an ``(n,)`` int64 array holding the
    signed index of hard samples and 0 at key positions.
    """

    __slots__ = ("d", "bits", "hard")

    def __init__(self, d: int, bits: np.ndarray, hard: np.ndarray):
        if int(d) != d or d < 2:
            raise StructuralError(f"dataset dimension must be an integer >= 2, got {d!r}")
        d = int(d)
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        hard = np.ascontiguousarray(hard, dtype=np.int64)
        if hard.ndim != 1 or bits.shape != (hard.size, d):
            raise StructuralError(
                f"bits shape {bits.shape} inconsistent with {hard.size} samples of dimension {d}"
            )
        if np.any(bits > 1):
            raise StructuralError("key bits must be 0 or 1")
        if np.any(np.abs(hard) > d):
            raise StructuralError(f"hard sample index exceeds dimension {d}")
        if np.any(bits[hard != 0]):
            raise StructuralError("hard positions must carry zero bit rows")
        bits.setflags(write=False)
        hard.setflags(write=False)
        self.d = d
        self.bits = bits
        self.hard = hard

    @classmethod
    def from_samples(cls, d: int, samples: Iterable[Sample]) -> "Dataset":
        samples = list(samples)
        bits = np.zeros((len(samples), d), dtype=np.uint8)
        hard = np.zeros(len(samples), dtype=np.int64)
        for i, x in enumerate(samples):
            _check_sample(x, d)
            if isinstance(x, Key):
                bits[i] = x.bits
            else:
                hard[i] = x.j
        return cls(d, bits, hard)

    @classmethod
    def empty(cls, d: int) -> "Dataset":
        return cls(d, np.zeros((0, d), dtype=np.uint8), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.hard.size)

    def __getitem__(self, i: int) -> Sample:
        j = int(self.hard[i])
        if j == 0:
            return Key(tuple(int(b) for b in self.bits[i]))
        return Hard(j)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.hard, other.hard)
            and np.array_equal(self.bits, other.bits)
        )

    def __repr__(self) -> str:
        return f"Dataset(d={self.d}, n={len(self)}, key_count={self.key_count})"

    @property
    def is_key(self) -> np.ndarray:
        return self.hard == 0

    @property
    def key_count(self) -> int:
        return int(np.count_nonzero(self.hard == 0))

    @property
    def key_bits(self) -> np.ndarray:
        """Bit rows of the key samples, in dataset order."""
        return self.bits[self.hard == 0]

    def hard_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate counts ``(#Hard(+j), #Hard(-j))`` for ``j = 1..d``."""
        h = self.hard
        plus = np.bincount(h[h > 0], minlength=self.d + 1)[1:]
        minus = np.bincount(-h[h < 0], minlength=self.d + 1)[1:]
        return plus.astype(np.int64), minus.astype(np.int64)


# --------------------------------------------------------------------------
# pmf and sampling
# --------------------------------------------------------------------------


def pmf(params: TrapdoorParams, x: Sample) -> float:
    """Probability of the single atom ``x`` under ``D_{w,d,p}``.

    >>> pmf(TrapdoorParams(0.1, 2, (1.0, 1.0)), Hard(1))
    0.45
    """
    _check_sample(x, params.d)
    if isinstance(x, Key):
        # 0**0 is taken as 1: a factor is p_j or 1 - p_j, never a power.
        return params.w * math.prod(pj if b else 1.0 - pj for pj, b in zip(params.p, x.bits))
    pj = params.p[abs(x.j) - 1]
    return (1.0 - params.w) / params.d * (pj if x.j > 0 else 1.0 - pj)


def support_size(d: int) -> int:
    return 2**d + 2 * d


def _guard(d: int) -> None:
    if d > MAX_BRUTEFORCE_DIM:
        raise CapabilityError(
            f"exact enumeration is limited to d <= {MAX_BRUTEFORCE_DIM}, got d={d}"
        )


def product_pmf(p: Sequence[float] | np.ndarray) -> np.ndarray:
    """Pmf of ``prod_j Bern(p_j)`` over ``{0,1}^d`` in canonical key-atom order."""
    p = np.asarray(p, dtype=float)
    _guard(p.size)
    probs = np.ones(1)
    for pj in p:
        probs = np.stack([probs * (1.0 - pj), probs * pj], axis=-1).ravel()
    return probs


def support_pmf(params: TrapdoorParams) -> np.ndarray:
    """Pmf of ``params`` over the whole support, in canonical atom order."""
    _guard(params.d)
    p = params.p_array
    scale = (1.0 - params.w) / params.d
    hard = np.empty(2 * params.d)
    hard[0::2] = scale * p
    hard[1::2] = scale * (1.0 - p)
    return np.concatenate([params.w * product_pmf(p), hard])


def atom_index(x: Sample, d: int) -> int:
    _check_sample(x, d)
    if isinstance(x, Key):
        return int(sum(b << (d - 1 - i) for i, b in enumerate(x.bits)))
    return 2**d + 2 * (abs(x.j) - 1) + (0 if x.j > 0 else 1)


def atom_at(index: int, d: int) -> Sample:
    """Inverse of :func:`atom_index`."""
    if not 0 <= index < support_size(d):
        raise StructuralError(f"atom index {index} outside support of dimension {d}")
    if index < 2**d:
        return Key(tuple((index >> (d - 1 - i)) & 1 for i in range(d)))
    k = index - 2**d
    j = k // 2 + 1
    return Hard(j if k % 2 == 0 else -j)


def atom_indices(data: Dataset) -> np.ndarray:
    """Canonical atom index of every sample in ``data``."""
    d = data.d
    _guard(d)
    weights = (1 << np.arange(d - 1, -1, -1)).astype(np.int64)
    key_idx = data.bits.astype(np.int64) @ weights
    h = data.hard
    hard_idx = 2**d + 2 * (np.abs(h) - 1) + (h < 0)
    return np.where(h == 0, key_idx, hard_idx)


def sample(params: TrapdoorParams, n: int, seed: Seed) -> Dataset:
    """Draw ``n`` independent samples from ``D_{w,d,p}``; deterministic given ``seed``."""
    if int(n) != n or n < 0:
        raise ContractError(f"sample count must be a non-negative integer, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    d, p = params.d, params.p_array
    is_key = rng.random(n) < params.w
    k = int(np.count_nonzero(is_key))
    bits = np.zeros((n, d), dtype=np.uint8)
    bits[is_key] = rng.random((k, d)) < p
    j = rng.integers(1, d + 1, size=n - k)
    positive = rng.random(n - k) < p[j - 1]
    hard = np.zeros(n, dtype=np.int64)
    hard[~is_key] = np.where(positive, j, -j)
    return Dataset(d, bits, hard)


# --------------------------------------------------------------------------
# Total variation
# --------------------------------------------------------------------------


def _half_abs_sum(a: np.ndarray, b: np.ndarray) -> float:
    return min(1.0, 0.5 * math.fsum(np.abs(a - b)))


def tv_product_bruteforce(p1: Sequence[float], p2: Sequence[float]) -> float:
    """TV between two binary product distributions by enumerating ``{0,1}^d``."""
    p1 = prob_vector(p1)
    p2 = prob_vector(p2)
    if p1.size != p2.size:
        raise ContractError(f"dimension mismatch: {p1.size} vs {p2.size}")
    _guard(p1.size)
    return _half_abs_sum(product_pmf(p1), product_pmf(p2))


def tv_exact_bruteforce(a: TrapdoorParams, b: TrapdoorParams) -> float:
    """Half the l1 distance between the two pmfs over the full support.

    Unlike :func:`tv_decomposed` this accepts unequal mixing weights.
    """
    if a.d != b.d:
        raise ContractError(f"dimension mismatch: {a.d} vs {b.d}")
    return _half_abs_sum(support_pmf(a), support_pmf(b))


def tv_decomposed(a: TrapdoorParams, b: TrapdoorParams) -> float:
    """TV through the disjoint-support split of the two mixture components.

    For a shared weight ``w`` the distance is
    ``w * TV(prod Bern(a.p), prod Bern(b.p)) + (1 - w) / d * ||a.p - b.p||_1``.
    """
    if a.d != b.d:
        raise ContractError(f"dimension mismatch: {a.d} vs {b.d}")
    if a.w != b.w:
        raise ContractError(
            f"decomposition needs a shared mixing weight, got {a.w} and {b.w}; "
            "use tv_exact_bruteforce"
        )
    _guard(a.d)
    key_term = a.w * tv_product_bruteforce(a.p, b.p)
    hard_term = (1.0 - a.w) / a.d * math.fsum(abs(x - y) for x, y in zip(a.p, b.p))
    return min(1.0, math.fsum([key_term, hard_term]))


def empirical_tv(data: Dataset, params: TrapdoorParams) -> float:
    """TV between the empirical atom histogram of ``data`` and the pmf of ``params``.

    An empty dataset yields 1.0. The empty histogram puts zero mass everywhere,
    so the event "the whole support" already shows a gap of 1.
    """
    if data.d != params.d:
        raise ContractError(f"dimension mismatch: dataset d={data.d}, params d={params.d}")
    _guard(params.d)
    if len(data) == 0:
        return 1.0
    counts = np.bincount(atom_indices(data), minlength=support_size(params.d))
    return _half_abs_sum(counts / len(data), support_pmf(params))


# --------------------------------------------------------------------------
# Text formats
# --------------------------------------------------------------------------

DATASET_HEADER = "trapdoor-dataset v1"
_HEADER_RE = re.compile(r"^trapdoor-dataset v1 d=(\d+)$")
_ATOM_RE = re.compile(r"^\s*([KkHh])\s*:\s*(.+?)\s*$")


def format_atom(x: Sample) -> str:
    """``K:b1,...,bd`` for key samples, ``H:+j`` / ``H:-j`` for hard samples."""
    if isinstance(x, Key):
        return "K:" + ",".join(str(b) for b in x.bits)
    return f"H:{x.j:+d}"


def parse_atom(text: str, d: int | None = None) -> Sample:
    m = _ATOM_RE.match(text)
    if not m:
        raise StructuralError(f"malformed atom {text!r}; expected K:b1,...,bd or H:+-j")
    kind, body = m.group(1).upper(), m.group(2)
    try:
        if kind == "K":
            x: Sample = Key(tuple(int(t) for t in body.split(",")))
        else:
            x = Hard(int(body))
    except ValueError as exc:
        raise StructuralError(f"malformed atom {text!r}: {exc}") from None
    if d is not None:
        _check_sample(x, d)
    return x


def format_dataset(data: Dataset) -> str:
    lines = [f"{DATASET_HEADER} d={data.d}"]
    for i in range(len(data)):
        j = int(data.hard[i])
        if j == 0:
            lines.append("K " + " ".join("1" if b else "0" for b in data.bits[i]))
        else:
            lines.append(f"H {j}")
    return "\n".join(lines) + "\n"


def parse_dataset(text: str, path: str | None = None) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError("missing header", line=1, path=path)
    m = _HEADER_RE.match(lines[0].strip())
    if not m:
        raise DatasetFormatError(
            f"expected header '{DATASET_HEADER} d=<d>', got {lines[0]!r}", line=1, path=path
        )
    d = int(m.group(1))
    if d < 2:
        raise DatasetFormatError(f"dimension must be at least 2, got {d}", line=1, path=path)
    samples: list[Sample] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens:
            continue
        tag, rest = tokens[0], tokens[1:]
        if tag == "K":
            if len(rest) != d or any(t not in ("0", "1") for t in rest):
                raise DatasetFormatError(
                    f"key sample needs exactly {d} bits (0/1), got {raw.strip()!r}",
                    line=lineno,
                    path=path,
                )
            samples.append(Key(tuple(int(t) for t in rest)))
        elif tag == "H":
            try:
                if len(rest) != 1:
                    raise ValueError
                j = int(rest[0])
            except ValueError:
                raise DatasetFormatError(
                    f"hard sample needs one signed integer, got {raw.strip()!r}",
                    line=lineno,
                    path=path,
                ) from None
            if j == 0 or abs(j) > d:
                raise DatasetFormatError(
                    f"hard index must satisfy 1 <= |j| <= {d}, got {j}", line=lineno, path=path
                )
            samples.append(Hard(j))
        else:
            raise DatasetFormatError(f"unknown sample tag {tag!r}", line=lineno, path=path)
    return Dataset.from_samples(d, samples)


def write_dataset(data: Dataset, path: str | Path) -> None:
    Path(path).write_text(format_dataset(data), encoding="utf-8")


def read_dataset(path: str | Path) -> Dataset:
    return parse_dataset(Path(path).read_text(encoding="utf-8"), path=str(path))
