"""The k-fold Haar twirling channel over permutation operators.

The channel output lives in the span of the replica permutation operators
W_alpha (Schur-Weyl), so it is represented as a coefficient map over S_k.
Exact coefficients come from the Weingarten matrix at finite D; asymptotic
coefficients are cumulant-weighted, kappa_alpha / D^(k - #alpha).

Index convention, pinned by a dense unit test before anything builds on it:
W_alpha |j_1 ... j_k> = |j_alpha(1), ..., j_alpha(k)>, which makes
Tr(W_beta A_1 x ... x A_k) the product over forward-ordered cycles of beta
of the traces of the cycle products, and W_a W_b = W_{ba}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .errors import RegimeError
from .moments import CumulantSet, Expectation, Value, Word, blockwise_moment
from .partitions import Partition, kreweras_complement
from .permutations import (
    Permutation,
    all_permutations,
    canonicalize_by_conjugation,
    compose,
    full_cycle,
    geodesic_set,
    inverse,
    permutation_to_nc,
)
from .weingarten import moebius_between_permutations, weingarten_table

DENSE_VALIDATION_CAP = 4096


def positional_labels(k: int) -> tuple[int, ...]:
    return tuple(range(1, k + 1))


def permutation_operator(alpha: Permutation, D: int) -> np.ndarray:
    """Dense W_alpha on the D^k-dimensional replica space (validation sizes)."""
    k = alpha.k
    if D**k > DENSE_VALIDATION_CAP:
        raise ValueError(f"dense permutation operator capped at D^k <= {DENSE_VALIDATION_CAP}")
    cols = np.arange(D**k)
    digits = np.empty((k, D**k), dtype=np.int64)
    rem = cols.copy()
    for t in range(k - 1, -1, -1):
        digits[t] = rem % D
        rem //= D
    rows = np.zeros(D**k, dtype=np.int64)
    for t in range(k):
        rows = rows * D + digits[alpha(t + 1) - 1]
    w = np.zeros((D**k, D**k))
    w[rows, cols] = 1.0
    return w


def cycle_words(beta: Permutation, labels: Sequence[Hashable]) -> list[Word]:
    """The label words read forward along each cycle of beta."""
    return [tuple(labels[i - 1] for i in cyc) for cyc in beta.cycles()]


def permuted_trace(beta: Permutation, phi: Callable[[Word], Value], labels: Sequence[Hashable], D: int) -> Value:
    """Tr(W_beta A_1 x ... x A_k) expressed through normalized moments."""
    out: Value = D ** beta.num_cycles()
    for word in cycle_words(beta, labels):
        out *= phi(word)
    return out


@dataclass
class ChannelCoefficients:
    """Coefficient of W_{alpha^-1} for each alpha in S_k."""

    k: int
    D: int
    mode: str  # "exact" | "asymptotic"
    coeffs: dict[Permutation, Value] = field(default_factory=dict)

    def coefficient(self, alpha: Permutation) -> Value:
        return self.coeffs[alpha]

    def reconstruct_dense(self) -> np.ndarray:
        out = np.zeros((self.D**self.k, self.D**self.k), dtype=complex)
        for alpha, c in self.coeffs.items():
            out += complex(c) * permutation_operator(inverse(alpha), self.D)
        return out

    def trace(self) -> Value:
        """Trace of the reconstructed output, sum_alpha c_alpha D^(#alpha)."""
        total: Value = 0
        for alpha, c in self.coeffs.items():
            total += c * self.D ** alpha.num_cycles()
        return total


def channel_exact(
    k: int,
    D: int,
    phi: Callable[[Word], Value],
    labels: Sequence[Hashable] | None = None,
) -> ChannelCoefficients:
    """Exact Haar channel coefficients via the Weingarten matrix.

    coeff(alpha) = sum_beta Wg(alpha, beta) D^(#beta) prod_cycles <cycle word>.
    Stays in exact rationals whenever phi returns exact values.
    """
    if D < k:
        raise RegimeError(f"exact channel needs D >= k (got D={D}, k={k})")
    labels = tuple(labels) if labels is not None else positional_labels(k)
    table = weingarten_table(k, D)
    perms = all_permutations(k)
    traces = {beta: permuted_trace(beta, phi, labels, D) for beta in perms}
    coeffs: dict[Permutation, Value] = {}
    for alpha in perms:
        acc: Value = 0
        for beta in perms:
            wg = table.wg(alpha, beta)
            tr = traces[beta]
            if isinstance(tr, (int, Fraction)):
                acc += wg * tr
            else:
                acc += complex(wg) * tr
        coeffs[alpha] = acc
    return ChannelCoefficients(k=k, D=D, mode="exact", coeffs=coeffs)


def kappa_alpha(
    alpha: Permutation,
    phi: Callable[[Word], Value],
    labels: Sequence[Hashable] | None = None,
) -> Value:
    """Cumulant coefficient of W_{alpha^-1} in the large-D channel.

    Canonical alphas evaluate as the blockwise free cumulant of the orbit
    partition; otherwise the word is reordered by the conjugating
    permutation first.
    """
    labels = tuple(labels) if labels is not None else positional_labels(alpha.k)
    rho, alpha_c = canonicalize_by_conjugation(alpha)
    pi = permutation_to_nc(alpha_c)
    word = tuple(labels[rho(p) - 1] for p in range(1, alpha.k + 1))
    return CumulantSet(phi).kappa_pi(pi, word)


def kappa_alpha_geodesic(
    alpha: Permutation,
    phi: Callable[[Word], Value],
    labels: Sequence[Hashable] | None = None,
) -> Value:
    """Independent route: Moebius-weighted moment sum over the geodesic."""
    labels = tuple(labels) if labels is not None else positional_labels(alpha.k)
    total: Value = 0
    for beta in geodesic_set(alpha):
        term: Value = moebius_between_permutations(beta, alpha)
        for word in cycle_words(beta, labels):
            term *= phi(word)
        total += term
    return total


def channel_asymptotic(
    k: int,
    D: int,
    phi: Callable[[Word], Value],
    labels: Sequence[Hashable] | None = None,
) -> ChannelCoefficients:
    """Leading-order channel: coeff(alpha) = kappa_alpha / D^(k - #alpha)."""
    labels = tuple(labels) if labels is not None else positional_labels(k)
    coeffs: dict[Permutation, Value] = {}
    for alpha in all_permutations(k):
        kap = kappa_alpha(alpha, phi, labels)
        denom = D ** (k - alpha.num_cycles())
        coeffs[alpha] = Fraction(kap, denom) if isinstance(kap, int) else kap / denom
    return ChannelCoefficients(k=k, D=D, mode="asymptotic", coeffs=coeffs)


def otoc_haar_formula(
    phi_a: Callable[[Word], Value],
    phi_b: Callable[[Word], Value],
    k: int,
    a_labels: Sequence[Hashable] | None = None,
    b_labels: Sequence[Hashable] | None = None,
) -> Value:
    """Leading-order 2k-OTOC: sum over NC(k) of kappa_pi(A) <B>_{pi*}."""
    a_labels = tuple(a_labels) if a_labels is not None else positional_labels(k)
    b_labels = tuple(b_labels) if b_labels is not None else positional_labels(k)
    from .partitions import enumerate_nc

    cumulants = CumulantSet(phi_a)
    total: Value = 0
    for pi in enumerate_nc(k):
        total += cumulants.kappa_pi(pi, a_labels) * blockwise_moment(
            b_labels, kreweras_complement(pi), phi_b
        )
    return total


def otoc_haar_channel(
    coeffs: ChannelCoefficients,
    phi_b: Callable[[Word], Value],
    b_labels: Sequence[Hashable] | None = None,
) -> Value:
    """Contraction route: (1/D) sum_alpha c_alpha Tr(W_{alpha^-1 gamma} xB).

    With exact coefficients this is the exact finite-D Haar average of the
    2k-OTOC; with asymptotic coefficients it reproduces the cumulant
    formula up to the dropped orders.
    """
    k, D = coeffs.k, coeffs.D
    b_labels = tuple(b_labels) if b_labels is not None else positional_labels(k)
    gamma = full_cycle(k)
    total: Value = 0
    for alpha, c in coeffs.coeffs.items():
        grouping = compose(inverse(alpha), gamma)
        term: Value = c * D ** grouping.num_cycles()
        for word in cycle_words(grouping, b_labels):
            term *= phi_b(word)
        total += term
    return (
        Fraction(total, D)
        if isinstance(total, int)
        else total / D
    )


def haar_word_average_exact(
    phi_a: Callable[[Word], Value],
    phi_b: Callable[[Word], Value],
    word: Sequence[str],
    D: int,
) -> Value:
    """Exact finite-D Haar average of a mixed word moment E<w(A^U, B)>.

    The word is a cyclic sequence over letters "A" (rotated) and "B"
    (fixed).  Splitting at the A positions turns it into a 2m-OTOC with
    composite B strings (possibly empty), evaluated through the exact
    m-fold channel contraction.
    """
    word = tuple(word)
    if any(w not in ("A", "B") for w in word):
        raise ValueError(f"word letters must be 'A' or 'B': {word!r}")
    m = sum(1 for w in word if w == "A")
    if m == 0:
        return phi_b(word)
    # rotate so the word starts at an A, then collect the B-run after each A
    start = word.index("A")
    word = word[start:] + word[:start]
    runs_after: list[list[str]] = []
    for w in word:
        if w == "A":
            runs_after.append([])
        else:
            runs_after[-1].append(w)
    a_labels = tuple(range(1, m + 1))
    b_labels = tuple(tuple(("B",) * len(r)) for r in runs_after)

    def phi_composite(comp_word: Word) -> Value:
        flat = tuple(letter for group in comp_word for letter in group)
        if not flat:
            return 1
        return phi_b(flat)

    coeffs = channel_exact(m, D, Expectation(lambda w: phi_a(("A",) * len(w)), cyclic=True), a_labels)
    return otoc_haar_channel(coeffs, phi_composite, b_labels)


@dataclass
class OtocResult:
    formula: Value
    channel: Value | None = None


def otoc_haar(
    phi_a: Callable[[Word], Value],
    phi_b: Callable[[Word], Value],
    k: int,
    D: int | None = None,
    a_labels: Sequence[Hashable] | None = None,
    b_labels: Sequence[Hashable] | None = None,
) -> OtocResult:
    """Both evaluation paths of the Haar-averaged 2k-OTOC.

    The channel-contraction value requires a dimension and is exact at that
    D; the formula value is the leading large-D factorization.
    """
    formula = otoc_haar_formula(phi_a, phi_b, k, a_labels, b_labels)
    chan = None
    if D is not None:
        coeffs = channel_exact(k, D, phi_a, a_labels)
        chan = otoc_haar_channel(coeffs, phi_b, b_labels)
    return OtocResult(formula=formula, channel=chan)


def word_functional_from_matrices(mats: Sequence[np.ndarray]) -> Expectation:
    """Positional-label functional over an explicit operator tuple."""
    ops = {i + 1: np.asarray(m, dtype=complex) for i, m in enumerate(mats)}
    return Expectation.normalized_trace(ops)


def otoc_term_structure(k: int) -> list[tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]]:
    """Symbolic 2k-OTOC expansion: (A-cumulant blocks, B-moment blocks) pairs."""
    from .partitions import enumerate_nc

    out = []
    for pi in enumerate_nc(k):
        out.append((pi.blocks, kreweras_complement(pi).blocks))
    return out
