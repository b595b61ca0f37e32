"""Hashed sparse feature vectors with namespaces and generated interactions.

Raw feature identities are hashed with 32-bit MurmurHash3 (x86 variant),
salted by a seed derived from the namespace name.  Pairwise and triple
interactions between namespaces are generated on the fly by combining the
member indices with an FNV-style multiply/xor, as in the usual hashing trick.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import mmh3
import numpy as np

MASK32 = 0xFFFFFFFF
FNV_PRIME = 16777619
DEFAULT_BITS = 18
CONSTANT_NAMESPACE = "const"
CONSTANT_ID = 11650396  # arbitrary fixed raw id for the bias feature


def hash32(raw: str | bytes, salt: int = 0) -> int:
    """Unsigned MurmurHash3_x86_32 of ``raw`` with ``salt`` as the seed."""
    return mmh3.hash(raw, salt & MASK32, signed=False)


def namespace_seed(namespace: str) -> int:
    return hash32(namespace, 0)


def combine(left: int, right: int) -> int:
    """Combine two 32-bit feature hashes into one (order matters)."""
    return ((left * FNV_PRIME) ^ right) & MASK32


@dataclass(frozen=True)
class InteractionSpec:
    """Which namespaces to cross.  Order inside a pair/triple is significant."""

    pairs: tuple[tuple[str, str], ...] = ()
    triples: tuple[tuple[str, str, str], ...] = ()

    def namespaces(self) -> set[str]:
        used: set[str] = set()
        for group in self.pairs + self.triples:
            used.update(group)
        return used

    def validate(self, known: Sequence[str]) -> None:
        missing = self.namespaces() - set(known)
        if missing:
            raise ValueError(f"interaction refers to unknown namespaces: {sorted(missing)}")

    def to_dict(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs], "triples": [list(t) for t in self.triples]}

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionSpec":
        return cls(
            pairs=tuple(tuple(p) for p in d.get("pairs", ())),
            triples=tuple(tuple(t) for t in d.get("triples", ())),
        )


NO_INTERACTIONS = InteractionSpec()

# gather plans for interaction expansion, keyed by (spec, namespace sizes)
_PLAN_CACHE: dict[tuple, tuple[np.ndarray, ...]] = {}


def _plan(spec: InteractionSpec, names: tuple[str, ...], sizes: tuple[int, ...]):
    key = (spec, names, sizes)
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        return plan
    offsets = dict()
    start = 0
    for name, size in zip(names, sizes):
        offsets[name] = (start, size)
        start += size
    absent = (0, 0)
    pl, pr, ta, tb, tc = [], [], [], [], []
    for x, y in spec.pairs:
        (ox, nx), (oy, ny) = offsets.get(x, absent), offsets.get(y, absent)
        for i in range(nx):
            for j in range(ny):
                pl.append(ox + i)
                pr.append(oy + j)
    for x, y, z in spec.triples:
        (ox, nx), (oy, ny), (oz, nz) = (offsets.get(n, absent) for n in (x, y, z))
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    ta.append(ox + i)
                    tb.append(oy + j)
                    tc.append(oz + k)
    plan = tuple(np.asarray(a, dtype=np.int64) for a in (pl, pr, ta, tb, tc))
    if len(_PLAN_CACHE) > 4096:
        _PLAN_CACHE.clear()
    _PLAN_CACHE[key] = plan
    return plan


@dataclass
class FeatureVector:
    """Sparse feature vector partitioned into namespaces.

    Indices stored here are already masked to ``bits``.  ``flatten`` produces
    the deduplicated (index, value) arrays a learner consumes, including all
    interaction features named by ``spec``.
    """

    bits: int = DEFAULT_BITS
    spec: InteractionSpec = NO_INTERACTIONS
    indices: dict[str, list[int]] = field(default_factory=dict)
    values: dict[str, list[float]] = field(default_factory=dict)
    _flat: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False, compare=False)
    # set by with_namespace when the extra namespace takes part in no interaction,
    # so flatten can reuse the parent's expansion
    _base: "FeatureVector | None" = field(default=None, repr=False, compare=False)

    @property
    def mask(self) -> int:
        return (1 << self.bits) - 1

    def add(self, namespace: str, raw: str | bytes, value: float = 1.0) -> int:
        idx = hash32(raw, namespace_seed(namespace)) & self.mask
        self.add_index(namespace, idx, value)
        return idx

    def add_index(self, namespace: str, h: int, value: float = 1.0) -> None:
        """Append an already hashed feature; it is masked here."""
        self.indices.setdefault(namespace, []).append(h & self.mask)
        self.values.setdefault(namespace, []).append(value)
        self._flat = None

    def add_constant(self) -> None:
        self.add_index(CONSTANT_NAMESPACE, CONSTANT_ID)

    def with_namespace(self, namespace: str, hashes: Sequence[int], values: Sequence[float] | None = None) -> "FeatureVector":
        """Shallow copy carrying one extra (or replaced) namespace."""
        indices = dict(self.indices)
        vals = dict(self.values)
        indices[namespace] = [h & self.mask for h in hashes]
        vals[namespace] = list(values) if values is not None else [1.0] * len(hashes)
        base = None
        if namespace not in self.indices and namespace not in self.spec.namespaces():
            base = self
        return FeatureVector(self.bits, self.spec, indices, vals, _base=base)

    def namespace_sizes(self) -> dict[str, int]:
        return {ns: len(ix) for ns, ix in self.indices.items()}

    @property
    def num_features(self) -> int:
        """Total feature count including interaction-expanded features."""
        sizes = self.namespace_sizes()
        count = sum(sizes.values())
        for x, y in self.spec.pairs:
            count += sizes.get(x, 0) * sizes.get(y, 0)
        for x, y, z in self.spec.triples:
            count += sizes.get(x, 0) * sizes.get(y, 0) * sizes.get(z, 0)
        return count

    @property
    def sum_sq(self) -> float:
        """Sum of squared values over all (expanded, undeduplicated) features."""
        names = tuple(self.indices)
        vals = np.asarray([v for ns in names for v in self.values[ns]], dtype=np.float64)
        if not len(vals):
            return 0.0
        pl, pr, ta, tb, tc = _plan(self.spec, names, tuple(len(self.indices[n]) for n in names))
        total = float(np.sum(vals**2))
        total += float(np.sum((vals[pl] * vals[pr]) ** 2))
        total += float(np.sum((vals[ta] * vals[tb] * vals[tc]) ** 2))
        return total

    def expanded(self) -> tuple[np.ndarray, np.ndarray]:
        """All features (unigrams then pairs then triples), duplicates kept."""
        names = tuple(self.indices)
        idx = np.fromiter((i for ns in names for i in self.indices[ns]), dtype=np.uint64)
        val = np.fromiter((v for ns in names for v in self.values[ns]), dtype=np.float64)
        sizes = tuple(len(self.indices[n]) for n in names)
        pl, pr, ta, tb, tc = _plan(self.spec, names, sizes)
        m32 = np.uint64(MASK32)
        prime = np.uint64(FNV_PRIME)
        mask = np.uint64(self.mask)
        parts_i = [idx]
        parts_v = [val]
        if len(pl):
            parts_i.append((((idx[pl] * prime) & m32) ^ idx[pr]) & mask)
            parts_v.append(val[pl] * val[pr])
        if len(ta):
            ab = ((idx[ta] * prime) & m32) ^ idx[tb]
            parts_i.append((((ab * prime) & m32) ^ idx[tc]) & mask)
            parts_v.append(val[ta] * val[tb] * val[tc])
        return np.concatenate(parts_i).astype(np.int64), np.concatenate(parts_v)

    def flatten(self) -> tuple[np.ndarray, np.ndarray]:
        """Deduplicated (sorted index, summed value) arrays; cached."""
        if self._flat is None and self._base is not None and self._base.indices.keys() <= self.indices.keys():
            bi, bv = self._base.flatten()
            extra = [ns for ns in self.indices if ns not in self._base.indices]
            idx = np.concatenate([bi] + [np.asarray(self.indices[ns], dtype=np.int64) for ns in extra])
            val = np.concatenate([bv] + [np.asarray(self.values[ns], dtype=np.float64) for ns in extra])
            self._flat = _dedupe(idx, val)
        if self._flat is None:
            idx, val = self.expanded()
            self._flat = _dedupe(idx, val)
        return self._flat

    def dump(self) -> Iterator[str]:
        """Debug lines ``namespace<TAB>index<TAB>value`` for unigram features."""
        for ns, ix in self.indices.items():
            for i, v in zip(ix, self.values[ns]):
                yield f"{ns}\t{i}\t{v:g}"


def _dedupe(idx: np.ndarray, val: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inverse = np.unique(idx, return_inverse=True)
    summed = np.bincount(inverse, weights=val, minlength=len(uniq))
    return uniq, summed


def expand_interactions(vector: FeatureVector, spec: InteractionSpec | None = None) -> Iterator[tuple[int, float]]:
    """Yield the interaction features of ``vector`` (pairs first, then triples)."""
    spec = vector.spec if spec is None else spec
    mask = vector.mask
    for x, y in spec.pairs:
        for ix, vx in zip(vector.indices.get(x, ()), vector.values.get(x, ())):
            for iy, vy in zip(vector.indices.get(y, ()), vector.values.get(y, ())):
                yield combine(ix, iy) & mask, vx * vy
    for x, y, z in spec.triples:
        for ix, vx in zip(vector.indices.get(x, ()), vector.values.get(x, ())):
            for iy, vy in zip(vector.indices.get(y, ()), vector.values.get(y, ())):
                xy = combine(ix, iy)
                for iz, vz in zip(vector.indices.get(z, ()), vector.values.get(z, ())):
                    yield combine(xy, iz) & mask, vx * vy * vz
