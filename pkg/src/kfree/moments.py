"""Moment <-> free-cumulant engine over arbitrary expectation functionals.

Words are tuples of opaque hashable labels (an operator name, possibly
bundled with a time tag).  The engine never touches matrices: everything
flows through an expectation functional mapping a word to a number, so the
same code serves symbolic checks, Monte Carlo ensemble averages, and
thermal exact-diagonalization functionals.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .partitions import (
    Partition,
    enumerate_nc,
    iter_set_partitions,
    kreweras_complement,
    nc_lattice,
    partition_lattice_moebius,
)

Word = tuple[Hashable, ...]
Value = complex | float | Fraction


class Expectation:
    """A cached expectation functional on words of operator labels.

    The empty word evaluates to 1 (normalization).  `cyclic=True` declares
    invariance under cyclic rotation of the word, which is used purely as a
    cache key optimization for trace-like functionals.
    """

    def __init__(self, fn: Callable[[Word], Value], cyclic: bool = False):
        self._fn = fn
        self.cyclic = cyclic
        self._cache: dict[Word, Value] = {}

    def _key(self, word: Word) -> Word:
        if not self.cyclic or len(word) < 2:
            return word
        rotations = [word[i:] + word[:i] for i in range(len(word))]
        return min(rotations, key=repr)

    def __call__(self, word: Sequence[Hashable]) -> Value:
        word = tuple(word)
        if not word:
            return 1
        key = self._key(word)
        if key not in self._cache:
            self._cache[key] = self._fn(key)
        return self._cache[key]

    @classmethod
    def from_table(cls, table: Mapping[Word, Value]) -> "Expectation":
        def fn(word: Word) -> Value:
            if word not in table:
                raise KeyError(f"moment table has no entry for word {word!r}")
            return table[word]

        return cls(fn)

    @classmethod
    def from_moment_sequence(cls, moments: Sequence[Value], label: Hashable = "A") -> "Expectation":
        """Single-operator functional: <A^n> = moments[n-1]."""

        def fn(word: Word) -> Value:
            if any(w != label for w in word):
                raise KeyError(f"unknown label in {word!r}; expected {label!r}")
            n = len(word)
            if n > len(moments):
                raise KeyError(f"moment of order {n} not provided")
            return moments[n - 1]

        return cls(fn, cyclic=True)

    @classmethod
    def normalized_trace(cls, operators: Mapping[Hashable, np.ndarray]) -> "Expectation":
        """<word> = Tr(product)/D over a dictionary of dense matrices."""
        dims = {m.shape[0] for m in operators.values()}
        if len(dims) != 1:
            raise ValueError("operators must share one dimension")
        (dim,) = dims

        def fn(word: Word) -> complex:
            prod = operators[word[0]]
            for label in word[1:]:
                prod = prod @ operators[label]
            return complex(np.trace(prod)) / dim

        return cls(fn, cyclic=True)

    @classmethod
    def weighted_trace(cls, operators: Mapping[Hashable, np.ndarray], weights: np.ndarray) -> "Expectation":
        """<word> = sum_i w_i (product)_{ii} for a diagonal density weight."""

        def fn(word: Word) -> complex:
            prod = operators[word[0]]
            for label in word[1:]:
                prod = prod @ operators[label]
            return complex(np.dot(weights, np.diagonal(prod)))

        return cls(fn, cyclic=False)


def blockwise_moment(word: Sequence[Hashable], sigma: Partition, phi: Callable[[Word], Value]) -> Value:
    """Product over blocks of sigma of the moment of the block sub-word."""
    word = tuple(word)
    if sigma.n != len(word):
        raise ValueError(f"partition on {sigma.n} points vs word of length {len(word)}")
    out: Value = 1
    for block in sigma.blocks:
        out *= phi(tuple(word[i - 1] for i in block))
    return out


def free_cumulant(phi: Callable[[Word], Value], word: Sequence[Hashable]) -> Value:
    """kappa_n(word) by Moebius inversion over NC(n)."""
    word = tuple(word)
    n = len(word)
    lattice = nc_lattice(n)
    one = Partition.full(n)
    total: Value = 0
    for sigma in lattice.partitions:
        total += blockwise_moment(word, sigma, phi) * lattice.moebius(sigma, one)
    return total


def free_cumulant_recursive(phi: Callable[[Word], Value], word: Sequence[Hashable]) -> Value:
    """kappa_n(word) by the recursive definition, for cross-checking."""
    word = tuple(word)
    n = len(word)
    if n == 1:
        return phi(word)
    total: Value = phi(word)
    for pi in enumerate_nc(n):
        if pi == Partition.full(n):
            continue
        term: Value = 1
        for block in pi.blocks:
            term *= free_cumulant_recursive(phi, tuple(word[i - 1] for i in block))
        total -= term
    return total


def kappa_pi(pi: Partition, word: Sequence[Hashable], phi: Callable[[Word], Value]) -> Value:
    """Product of free cumulants over the blocks of a non-crossing pi."""
    word = tuple(word)
    out: Value = 1
    for block in pi.blocks:
        out *= free_cumulant(phi, tuple(word[i - 1] for i in block))
    return out


def moments_from_cumulants(word: Sequence[Hashable], kappa: Callable[[Word], Value]) -> Value:
    """<word> = sum over NC(n) of the blockwise cumulant products."""
    word = tuple(word)
    total: Value = 0
    for pi in enumerate_nc(len(word)):
        term: Value = 1
        for block in pi.blocks:
            term *= kappa(tuple(word[i - 1] for i in block))
        total += term
    return total


def classical_cumulant(phi: Callable[[Word], Value], word: Sequence[Hashable]) -> Value:
    """Ordinary cumulant: Moebius inversion over all set partitions."""
    word = tuple(word)
    n = len(word)
    one = Partition.full(n)
    total: Value = 0
    for sigma in iter_set_partitions(n):
        total += blockwise_moment(word, sigma, phi) * partition_lattice_moebius(sigma, one)
    return total


class CumulantSet:
    """Lazy kappa evaluations over one functional, with caching."""

    def __init__(self, phi: Callable[[Word], Value]):
        self.phi = phi
        self._cache: dict[Word, Value] = {}

    def kappa(self, word: Sequence[Hashable]) -> Value:
        word = tuple(word)
        if word not in self._cache:
            self._cache[word] = free_cumulant(self.phi, word)
        return self._cache[word]

    def kappa_pi(self, pi: Partition, word: Sequence[Hashable]) -> Value:
        word = tuple(word)
        out: Value = 1
        for block in pi.blocks:
            out *= self.kappa(tuple(word[i - 1] for i in block))
        return out

    def table(self, label: Hashable, max_order: int) -> dict[int, Value]:
        return {n: self.kappa((label,) * n) for n in range(1, max_order + 1)}


def mixed_moment_free(
    phi_a: Callable[[Word], Value],
    phi_b: Callable[[Word], Value],
    a_word: Sequence[Hashable],
    b_word: Sequence[Hashable],
) -> Value:
    """<A1 B1 ... An Bn> for free families, via the dual-partition formula:
    sum over pi in NC(n) of kappa_pi(A) times the B moments grouped by the
    Kreweras complement of pi."""
    a_word, b_word = tuple(a_word), tuple(b_word)
    if len(a_word) != len(b_word):
        raise ValueError("words must have equal length")
    n = len(a_word)
    cumulants = CumulantSet(phi_a)
    total: Value = 0
    for pi in enumerate_nc(n):
        total += cumulants.kappa_pi(pi, a_word) * blockwise_moment(b_word, kreweras_complement(pi), phi_b)
    return total


def free_mixed_word(
    word: Sequence[tuple[Hashable, Hashable]],
    phis: Mapping[Hashable, Callable[[Word], Value]],
) -> Value:
    """Moment of an arbitrary word of elements from free families.

    `word` is a sequence of (family, label) pairs.  Mixed free cumulants of
    free families vanish, so only non-crossing partitions with single-family
    blocks survive the moment-cumulant expansion.
    """
    word = tuple(word)
    n = len(word)
    cumulant_sets = {fam: CumulantSet(phi) for fam, phi in phis.items()}
    total: Value = 0
    for pi in enumerate_nc(n):
        term: Value = 1
        for block in pi.blocks:
            families = {word[i - 1][0] for i in block}
            if len(families) > 1:
                term = 0
                break
            (fam,) = families
            term *= cumulant_sets[fam].kappa(tuple(word[i - 1][1] for i in block))
        total += term
    return total


def alternating_centered_moment(
    phi_a: Callable[[Word], Value],
    phi_b: Callable[[Word], Value],
    n: int,
    a_powers: Sequence[int] | None = None,
    b_powers: Sequence[int] | None = None,
    empirical: Callable[[Word], Value] | None = None,
) -> Value:
    """Expand <prod_i (A^{n_i} - <A^{n_i}>)(B^{m_i} - <B^{m_i}>)>.

    With `empirical` unset the surviving mixed words are evaluated under the
    freeness assumption, in which case the result vanishes identically;
    an empirical functional (labels "A"/"B") yields the numeric residual.
    """
    a_powers = tuple(a_powers) if a_powers is not None else (1,) * n
    b_powers = tuple(b_powers) if b_powers is not None else (1,) * n
    if len(a_powers) != n or len(b_powers) != n:
        raise ValueError("need one power per alternating slot")
    factors: list[tuple[Hashable, int, Value]] = []
    for i in range(n):
        factors.append(("A", a_powers[i], phi_a(("A",) * a_powers[i])))
        factors.append(("B", b_powers[i], phi_b(("B",) * b_powers[i])))

    def evaluate(kept: tuple[int, ...]) -> Value:
        flat: list[tuple[Hashable, Hashable]] = []
        for idx in kept:
            fam, power, _ = factors[idx]
            flat.extend([(fam, fam)] * power)
        if not flat:
            return 1
        if empirical is not None:
            return empirical(tuple(fam for fam, _ in flat))
        return free_mixed_word(flat, {"A": phi_a, "B": phi_b})

    total: Value = 0
    for mask in range(1 << len(factors)):
        kept = tuple(i for i in range(len(factors)) if mask >> i & 1)
        sign_part: Value = 1
        for i in range(len(factors)):
            if not (mask >> i & 1):
                sign_part *= -factors[i][2]
        total += sign_part * evaluate(kept)
    return total


def free_sum_cumulant(kappa_a: Value, kappa_b: Value) -> Value:
    """kappa_n(A+B) = kappa_n(A) + kappa_n(B) for free A, B."""
    return kappa_a + kappa_b
