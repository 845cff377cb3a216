"""Polynomials over binary variables.

A polynomial over variables in {0, 1} is stored as a mapping from sorted
tuples of distinct variable indices to real coefficients.  Because x * x == x
for binary x, repeated indices inside a monomial collapse to a single index,
so the sorted-tuple form is canonical.  The empty tuple holds the constant
term.  Zero coefficients are never stored.
"""

from __future__ import annotations

import heapq
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

Monomial = Tuple[int, ...]


class BinaryPolynomial:
    """Real-coefficient polynomial over binary variables.

    Instances are value-like: all operations return new polynomials and the
    term mapping is never mutated after construction.  ``num_vars`` fixes the
    length of assignments the polynomial accepts; it may exceed the largest
    index actually used.
    """

    __slots__ = ("_terms", "_num_vars")

    def __init__(self, terms: Mapping[Iterable[int], float] | None = None,
                 num_vars: int = 0):
        canon: Dict[Monomial, float] = {}
        max_idx = -1
        if terms:
            for key, coeff in terms.items():
                mono = tuple(sorted(set(key)))
                for idx in mono:
                    if not isinstance(idx, (int, np.integer)) or idx < 0:
                        raise ValueError(f"variable index must be a non-negative int, got {idx!r}")
                if mono:
                    max_idx = max(max_idx, mono[-1])
                coeff = float(coeff)
                if mono in canon:
                    canon[mono] += coeff
                else:
                    canon[mono] = coeff
            canon = {m: c for m, c in canon.items() if c != 0.0}
        num_vars = int(num_vars)
        if num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        if max_idx >= num_vars:
            num_vars = max_idx + 1
        self._terms = canon
        self._num_vars = num_vars

    @classmethod
    def _raw(cls, canonical_terms: Dict[Monomial, float], num_vars: int) -> "BinaryPolynomial":
        # fast path for internal builders: keys already sorted/dedup'd, zeros pruned
        poly = object.__new__(cls)
        poly._terms = canonical_terms
        poly._num_vars = num_vars
        return poly

    @property
    def num_vars(self) -> int:
        return self._num_vars

    @property
    def terms(self) -> Dict[Monomial, float]:
        """Copy of the term mapping (sorted index tuples to coefficients)."""
        return dict(self._terms)

    @property
    def num_terms(self) -> int:
        return len(self._terms)

    @property
    def degree(self) -> int:
        """Largest monomial length; 0 for constant or empty polynomials."""
        if not self._terms:
            return 0
        return max(len(m) for m in self._terms)

    def coefficient(self, key: Iterable[int]) -> float:
        return self._terms.get(tuple(sorted(set(key))), 0.0)

    def evaluate(self, assignment: Sequence[int]) -> float:
        """Value of the polynomial at a 0/1 assignment of length num_vars."""
        if len(assignment) != self._num_vars:
            raise ValueError(
                f"assignment length {len(assignment)} != num_vars {self._num_vars}")
        total = 0.0
        for mono, coeff in self._terms.items():
            for idx in mono:
                if not assignment[idx]:
                    break
            else:
                total += coeff
        return total

    def add_scaled(self, other: "BinaryPolynomial", scale: float = 1.0) -> "BinaryPolynomial":
        """Return self + scale * other."""
        merged = dict(self._terms)
        for mono, coeff in other._terms.items():
            new = merged.get(mono, 0.0) + scale * coeff
            if new == 0.0:
                merged.pop(mono, None)
            else:
                merged[mono] = new
        return BinaryPolynomial._raw(merged, max(self._num_vars, other._num_vars))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryPolynomial):
            return NotImplemented
        return self._num_vars == other._num_vars and self._terms == other._terms

    def __repr__(self) -> str:
        return (f"BinaryPolynomial(num_vars={self._num_vars}, "
                f"num_terms={len(self._terms)}, degree={self.degree})")

    def to_dict(self) -> dict:
        """JSON-ready form: {"num_vars": n, "terms": [{"vars": [...], "coeff": c}]}."""
        return {
            "num_vars": self._num_vars,
            "terms": [{"vars": list(mono), "coeff": coeff}
                      for mono, coeff in sorted(self._terms.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BinaryPolynomial":
        for field in ("num_vars", "terms"):
            if field not in data:
                raise ValueError(f"polynomial JSON missing field: {field}")
        terms: Dict[Monomial, float] = {}
        for entry in data["terms"]:
            if "vars" not in entry or "coeff" not in entry:
                raise ValueError("polynomial JSON term needs 'vars' and 'coeff'")
            mono = tuple(entry["vars"])
            terms[mono] = terms.get(mono, 0.0) + float(entry["coeff"])
        return cls(terms, num_vars=int(data["num_vars"]))


def reduce_to_quadratic(poly: BinaryPolynomial,
                        penalty: float | None = None,
                        ) -> Tuple[BinaryPolynomial, Dict[int, Tuple[int, int]]]:
    """Rewrite a degree >= 3 polynomial as an equivalent quadratic one.

    The most frequent variable pair among monomials of degree >= 3 is replaced
    by a fresh auxiliary variable, with a quadratic penalty that is zero
    exactly when the auxiliary equals the product of the pair, until no cubic
    or higher monomial remains.  Minimizing the result over original plus
    auxiliary variables reproduces the original minimum, and restricting a
    minimizer to the original variables gives an original minimizer.

    Returns (quadratic polynomial, aux map) where the aux map sends each new
    variable index to the pair it stands for.  Quadratic input is returned
    unchanged with an empty map.
    """
    if penalty is not None and penalty <= 0:
        raise ValueError("penalty must be positive")
    if poly.degree <= 2:
        return poly, {}
    # A violated substitution must cost more than any achievable objective
    # swing, so strictly over half the total coefficient mass is enough.
    lam = penalty if penalty is not None else 1.0 + 2.0 * sum(
        abs(c) for c in poly._terms.values())

    high: Dict[Monomial, float] = {}
    low: Dict[Monomial, float] = {}
    for mono, coeff in poly._terms.items():
        (high if len(mono) >= 3 else low)[mono] = coeff

    pair_monos: Dict[Tuple[int, int], set] = {}
    heap: list = []

    def index_mono(mono: Monomial) -> None:
        for a in range(len(mono)):
            for b in range(a + 1, len(mono)):
                pair = (mono[a], mono[b])
                bucket = pair_monos.setdefault(pair, set())
                bucket.add(mono)
                heapq.heappush(heap, (-len(bucket), pair))

    def unindex_mono(mono: Monomial) -> None:
        for a in range(len(mono)):
            for b in range(a + 1, len(mono)):
                pair = (mono[a], mono[b])
                bucket = pair_monos[pair]
                bucket.discard(mono)
                if not bucket:
                    del pair_monos[pair]

    def merge(target: Dict[Monomial, float], mono: Monomial, coeff: float) -> None:
        into_high = len(mono) >= 3
        existed = into_high and mono in high
        new = target.get(mono, 0.0) + coeff
        if new == 0.0:
            if mono in target:
                del target[mono]
                if existed:
                    unindex_mono(mono)
        else:
            target[mono] = new
            if into_high and not existed:
                index_mono(mono)

    for mono in high:
        index_mono(mono)

    num_vars = poly.num_vars
    aux_map: Dict[int, Tuple[int, int]] = {}
    while pair_monos:
        # lazy heap: every count change pushed an entry, so the first entry
        # whose count is current is the max-count pair, ties to smallest pair
        while True:
            negc, pair = heapq.heappop(heap)
            current = len(pair_monos.get(pair, ()))
            if current == 0:
                continue
            if -negc == current:
                break
            heapq.heappush(heap, (-current, pair))
        u, v = pair
        aux = num_vars
        num_vars += 1
        aux_map[aux] = (u, v)
        for mono in sorted(pair_monos[pair]):
            coeff = high.pop(mono)
            unindex_mono(mono)
            replaced = tuple(sorted((set(mono) - {u, v}) | {aux}))
            merge(high if len(replaced) >= 3 else low, replaced, coeff)
        # penalty lam * (u v - 2 u aux - 2 v aux + 3 aux): zero iff aux == u*v
        merge(low, (u, v), lam)
        merge(low, (u, aux), -2.0 * lam)
        merge(low, (v, aux), -2.0 * lam)
        merge(low, (aux,), 3.0 * lam)

    low.update(high)  # leftovers in high are impossible, but keep the merge total
    return BinaryPolynomial._raw({m: c for m, c in low.items() if c != 0.0},
                                 num_vars), aux_map


def brute_force_minimize(poly: BinaryPolynomial,
                         max_vars: int = 24) -> Tuple[Tuple[int, ...], float]:
    """Exact minimum by enumerating all assignments.

    Returns (assignment, value); among ties the lexicographically smallest
    assignment wins.  Refuses polynomials with more than max_vars variables.
    """
    n = poly.num_vars
    if n > max_vars:
        raise ValueError(f"{n} variables exceeds brute-force cap {max_vars}")
    if n == 0:
        return (), poly.evaluate(())
    # variable i maps to bit (n-1-i), so ascending integers enumerate
    # assignments in lexicographic tuple order and argmin's first hit
    # is the lexicographically smallest minimizer
    ks = np.arange(1 << n, dtype=np.int64)
    vals = np.zeros(1 << n, dtype=np.float64)
    for mono, coeff in poly._terms.items():
        mask = 0
        for idx in mono:
            mask |= 1 << (n - 1 - idx)
        if mask:
            vals += coeff * ((ks & mask) == mask)
        else:
            vals += coeff
    best = int(np.argmin(vals))
    bits = tuple((best >> (n - 1 - i)) & 1 for i in range(n))
    return bits, float(vals[best])
