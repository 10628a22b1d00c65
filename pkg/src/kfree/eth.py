"""Exact diagonalization, thermal free cumulants, distinct-index spectral
sums, long-time averages, and perturbed-basis (macroscopically
indistinguishable Hamiltonian) ensembles.

Spectral sums are organized around "slot chains": a product of operator
matrix elements around one or more trace cycles, with a diagonal weight
vector per cycle and an energy-phase coefficient per slot.  Restricting
slots to distinct eigenstates, or keeping only resonant terms of a long
time average, both reduce to inclusion-exclusion over the set-partition
lattice of the slots, with each merged term a single einsum contraction.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Iterable, Sequence

import numpy as np

from .moments import Expectation, free_cumulant
from .partitions import (
    Partition,
    enumerate_nc,
    iter_set_partitions,
    kreweras_complement,
    leq,
    nc_lattice,
    partition_lattice_moebius,
)

DEFAULT_DIM_CAP = 4096
BRUTE_FORCE_DIM_CAP = 60
RESONANCE_EPS_FACTOR = 1e-10


# ---------------------------------------------------------------------------
# models and thermal states
# ---------------------------------------------------------------------------


def goe_matrix(D: int, rng) -> np.ndarray:
    a = rng.standard_normal((D, D))
    return (a + a.T) / 2.0


def bimodal_observable(D: int, rng) -> np.ndarray:
    """Traceless involution (+-1 spectrum) on a random basis.

    Unit second moment and order-one higher free cumulants, which makes it a
    useful probe operator where a GOE draw (semicircle, vanishing higher
    cumulants) would give a degenerate baseline.
    """
    if D % 2:
        raise ValueError("bimodal observable needs even dimension")
    g = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    q, r = np.linalg.qr(g)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    signs = np.array([1.0] * (D // 2) + [-1.0] * (D // 2))
    return (q * signs) @ q.conj().T


def normalize_observable(m: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Make an operator traceless and unit-normalized in the second moment."""
    m = np.asarray(m, dtype=complex)
    D = m.shape[0]
    w = weights if weights is not None else np.full(D, 1.0 / D)
    m = m - np.dot(w, np.diagonal(m)) * np.eye(D)
    norm = np.sqrt(abs(np.dot(w, np.diagonal(m @ m))))
    return m / norm


class SpectralModel:
    """Eigen-decomposed Hamiltonian with observables stored in its eigenbasis."""

    def __init__(self, energies: np.ndarray, basis: np.ndarray, observables: dict[str, np.ndarray], provenance: str = "user"):
        self.energies = np.asarray(energies, dtype=float)
        self.basis = np.asarray(basis, dtype=complex)
        self.observables = {k: np.asarray(v, dtype=complex) for k, v in observables.items()}
        self.provenance = provenance
        if not np.all(np.diff(self.energies) >= 0):
            raise ValueError("energies must be sorted ascending")
        unit_dev = np.max(np.abs(self.basis.conj().T @ self.basis - np.eye(self.dim)))
        if unit_dev > 1e-10:
            raise ValueError(f"eigenvector matrix not unitary: deviation {unit_dev:.3e}")

    @property
    def dim(self) -> int:
        return len(self.energies)

    def spectral_width(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    def observable(self, obs) -> np.ndarray:
        """Resolve a named observable; raw arrays are taken as eigenbasis matrices."""
        if isinstance(obs, str):
            return self.observables[obs]
        return np.asarray(obs, dtype=complex)

    def level_spacing_ratio(self) -> float:
        """Mean adjacent-gap ratio over the central half of the spectrum."""
        e = self.energies
        gaps = np.diff(e)
        lo, hi = len(gaps) // 4, 3 * len(gaps) // 4
        s1, s2 = gaps[lo:hi], gaps[lo + 1 : hi + 1]
        r = np.minimum(s1, s2) / np.maximum(s1, s2)
        return float(np.mean(r))

    def resonance_report(self, eps: float | None = None, n_samples: int = 20000, seed: int = 0) -> dict:
        """Count near-resonances |E_i + E_j - E_k - E_l| < eps among sampled
        quadruples, excluding the trivial ones where {i,j} == {k,l}."""
        if eps is None:
            eps = RESONANCE_EPS_FACTOR * self.spectral_width()
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, self.dim, size=(n_samples, 4))
        e = self.energies
        delta = np.abs(e[idx[:, 0]] + e[idx[:, 1]] - e[idx[:, 2]] - e[idx[:, 3]])
        trivial = ((idx[:, 0] == idx[:, 2]) & (idx[:, 1] == idx[:, 3])) | (
            (idx[:, 0] == idx[:, 3]) & (idx[:, 1] == idx[:, 2])
        )
        hits = int(np.sum((delta < eps) & ~trivial))
        return {"eps": eps, "n_samples": n_samples, "near_resonances": hits}


def build_model(
    hamiltonian: np.ndarray,
    observables: dict[str, np.ndarray] | None = None,
    provenance: str = "user",
    dim_cap: int = DEFAULT_DIM_CAP,
) -> SpectralModel:
    """Dense diagonalization; observables are rotated into the eigenbasis."""
    h = np.asarray(hamiltonian)
    if h.shape[0] > dim_cap:
        raise ValueError(f"dimension {h.shape[0]} exceeds cap {dim_cap}")
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise ValueError("hamiltonian must be Hermitian")
    energies, basis = np.linalg.eigh(h)
    obs = {}
    for name, m in (observables or {}).items():
        obs[name] = basis.conj().T @ np.asarray(m, dtype=complex) @ basis
    return SpectralModel(energies, basis, obs, provenance=provenance)


def goe_model(D: int, seed: int = 0, observables: Sequence[str] = ("A", "B"), normalized: bool = True) -> SpectralModel:
    """GOE Hamiltonian with independent GOE observables named in `observables`."""
    rng = np.random.default_rng(seed)
    model = build_model(goe_matrix(D, rng), provenance=f"goe(D={D}, seed={seed})")
    for name in observables:
        m = goe_matrix(D, rng).astype(complex)
        model.observables[name] = normalize_observable(m) if normalized else m
    return model


def _pauli_site(op: np.ndarray, site: int, L: int) -> np.ndarray:
    out = np.array([[1.0]])
    for i in range(L):
        out = np.kron(out, op if i == site else np.eye(2))
    return out


def ising_model(L: int, J: float = 1.0, hx: float = -1.05, hz: float = 0.5) -> SpectralModel:
    """Mixed-field Ising chain (open boundary) at a standard chaotic point,
    with mid-chain sigma-z / sigma-x observables."""
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    D = 2**L
    h = np.zeros((D, D))
    for i in range(L - 1):
        h += J * _pauli_site(sz, i, L) @ _pauli_site(sz, i + 1, L)
    for i in range(L):
        h += hx * _pauli_site(sx, i, L) + hz * _pauli_site(sz, i, L)
    mid = L // 2
    obs = {"sz_mid": _pauli_site(sz, mid, L), "sx_mid": _pauli_site(sx, mid, L)}
    return build_model(h, obs, provenance=f"ising(L={L}, J={J}, hx={hx}, hz={hz})")


@dataclass
class ThermalState:
    beta: float
    weights: np.ndarray
    Z: float

    @classmethod
    def from_model(cls, model: SpectralModel, beta: float) -> "ThermalState":
        # energies shifted by the ground state before exponentiating, so Z
        # here is the shifted partition function
        shifted = model.energies - model.energies[0]
        w = np.exp(-beta * shifted)
        Z = float(np.sum(w))
        return cls(beta=beta, weights=w / Z, Z=Z)

    def effective_dim(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


def thermal_state(model: SpectralModel, beta: float) -> ThermalState:
    return ThermalState.from_model(model, beta)


def heisenberg(model: SpectralModel, obs, t: float) -> np.ndarray:
    """Time-evolved operator in the eigenbasis: A(t)_ij = e^{i(E_i-E_j)t} A_ij."""
    m = model.observable(obs)
    if t == 0.0:
        return m
    phases = np.exp(1j * model.energies * t)
    return (phases[:, None] * m) * phases.conj()[None, :]


def thermal_word_moment(model: SpectralModel, state: ThermalState, word: Sequence[tuple]) -> complex:
    """<A_1(t_1) ... A_n(t_n)> under the canonical weight of `state`.

    `word` is a sequence of (observable, time) pairs.
    """
    prod = None
    for obs, t in word:
        m = heisenberg(model, obs, t)
        prod = m if prod is None else prod @ m
    if prod is None:
        return 1.0
    return complex(np.dot(state.weights, np.diagonal(prod)))


def _letters_functional(model: SpectralModel, state: ThermalState, letters: list[np.ndarray]) -> Expectation:
    """Positional functional over pre-dressed matrices (labels = indices)."""

    def fn(positions):
        prod = letters[positions[0]]
        for p in positions[1:]:
            prod = prod @ letters[p]
        return complex(np.dot(state.weights, np.diagonal(prod)))

    return Expectation(fn)


def thermal_free_cumulant(model: SpectralModel, state: ThermalState, word: Sequence[tuple]) -> complex:
    """kappa^beta_n of a word of (observable, time) letters, by Moebius
    inversion of thermal word moments over NC(n)."""
    letters = [heisenberg(model, obs, t) for obs, t in word]
    phi = _letters_functional(model, state, letters)
    return complex(free_cumulant(phi, tuple(range(len(letters)))))


def alternating_word(A, B, k: int, t: float) -> tuple:
    """The 2k-letter word A(t) B A(t) B ... used by freeness probes."""
    return tuple(x for _ in range(k) for x in ((A, t), (B, 0.0)))


# ---------------------------------------------------------------------------
# slot chains: merged sums, distinct-index sums, strict time averages
# ---------------------------------------------------------------------------


@dataclass
class SlotChains:
    """One or more trace cycles of operators with per-slot phase coefficients.

    cycles[c] is the matrix sequence of cycle c (eigenbasis); weights[c] is
    the diagonal weight vector contracted with that cycle's first slot;
    slot_coeffs holds the integer coefficient of E_slot * t in the total
    phase (built from which letters are time-dependent).
    """

    cycles: list[list[np.ndarray]]
    weights: list[np.ndarray]
    slot_coeffs: tuple[int, ...]

    @property
    def n_slots(self) -> int:
        return len(self.slot_coeffs)


def chains_from_word(model: SpectralModel, state: ThermalState, word: Sequence[tuple]) -> SlotChains:
    """Single-cycle chains for a word of (observable, timed: bool) letters."""
    mats = [model.observable(obs) for obs, _ in word]
    m = len(mats)
    coeffs = [0] * m
    for i, (_, timed) in enumerate(word):
        if timed:
            coeffs[i] += 1  # left slot of letter i is slot i
            coeffs[(i + 1) % m] -= 1
    return SlotChains(cycles=[mats], weights=[state.weights], slot_coeffs=tuple(coeffs))


def merged_chain_sum(chains: SlotChains, merge: Partition) -> complex:
    """Unrestricted chain sum with slots identified per `merge` (one einsum)."""
    if merge.n != chains.n_slots:
        raise ValueError("merge partition must cover every slot")
    idx = merge.block_index()
    letters = string.ascii_lowercase
    subs = []
    operands = []
    slot = 1
    for cyc, w in zip(chains.cycles, chains.weights):
        p = len(cyc)
        start = slot
        subs.append(letters[idx[start]])
        operands.append(w)
        for i, m in enumerate(cyc):
            left = start + i
            right = start + (i + 1) % p
            subs.append(letters[idx[left]] + letters[idx[right]])
            operands.append(m)
        slot += p
    expr = ",".join(subs) + "->"
    return complex(np.einsum(expr, *operands, optimize=True))


@lru_cache(maxsize=None)
def _slot_partitions(m: int) -> tuple[Partition, ...]:
    return tuple(iter_set_partitions(m))


def distinct_slot_sum(chains: SlotChains) -> complex:
    """Chain sum restricted to pairwise-distinct slot values.

    Inclusion-exclusion over the slot-partition lattice: the all-distinct
    term is sum_Q mu(0,Q) S_Q over merged unrestricted sums S_Q.
    """
    m = chains.n_slots
    zero = Partition.singletons(m)
    total = 0.0 + 0.0j
    for q in _slot_partitions(m):
        mu = partition_lattice_moebius(zero, q)
        total += mu * merged_chain_sum(chains, q)
    return total


def coincidence_pattern_sum(chains: SlotChains, pattern: Partition) -> complex:
    """Sum over slot assignments whose coincidence pattern is exactly `pattern`
    (equal within blocks, distinct across blocks)."""
    total = 0.0 + 0.0j
    for q in _slot_partitions(chains.n_slots):
        if leq(pattern, q):
            total += partition_lattice_moebius(pattern, q) * merged_chain_sum(chains, q)
    return total


@lru_cache(maxsize=None)
def _strict_average_coeffs(m: int, slot_coeffs: tuple[int, ...]) -> tuple[tuple[Partition, int], ...]:
    """Coefficients c_Q with E_inf[sum] = sum_Q c_Q S_Q.

    A slot assignment with exact coincidence pattern P survives the infinite
    time average iff every block of P has zero total phase coefficient
    (generic spectra: no accidental resonances).  Expanding the survivors
    over merged sums gives c_Q = sum_{P <= Q} zeta(P) mu(P, Q).
    """
    parts = _slot_partitions(m)

    def zeta(p: Partition) -> bool:
        return all(sum(slot_coeffs[i - 1] for i in b) == 0 for b in p.blocks)

    zeta_flags = {p: zeta(p) for p in parts}
    out = []
    for q in parts:
        c = 0
        for p in parts:
            if zeta_flags[p] and leq(p, q):
                c += partition_lattice_moebius(p, q)
        if c != 0:
            out.append((q, c))
    return tuple(out)


def strict_chain_average(chains: SlotChains) -> complex:
    """Infinite-time average of the chain sum, by resonance-pattern grouping."""
    total = 0.0 + 0.0j
    for q, c in _strict_average_coeffs(chains.n_slots, chains.slot_coeffs):
        total += c * merged_chain_sum(chains, q)
    return total


def _windowed_chain_sum(chains: SlotChains, energies: np.ndarray, t_max: float, chunk_elems: int = 2_000_000) -> complex:
    """Finite-window average with the phase kernel (e^{i T d} - 1)/(i T d).

    Materializes amplitude tensors chunked over the first slot; intended for
    modest dimensions (the slot count is small by construction).
    """
    m = chains.n_slots
    D = len(energies)
    if D ** (m - 1) > 64_000_000:
        raise ValueError(f"windowed average too large: D={D}, slots={m}")
    idx = Partition.singletons(m).block_index()
    letters = string.ascii_lowercase
    subs = []
    operands = []
    slot = 1
    slot_axes = []
    for cyc, w in zip(chains.cycles, chains.weights):
        p = len(cyc)
        start = slot
        subs.append(letters[idx[start]])
        operands.append(w)
        for i, mat in enumerate(cyc):
            left = start + i
            right = start + (i + 1) % p
            subs.append(letters[idx[left]] + letters[idx[right]])
            operands.append(mat)
        slot_axes.extend(range(start - 1, start - 1 + p))
        slot += p
    out_subs = "".join(letters[i] for i in range(m))
    expr = ",".join(subs) + "->" + out_subs

    chunk = max(1, chunk_elems // max(1, D ** (m - 1)))
    total = 0.0 + 0.0j
    coeffs = chains.slot_coeffs
    for lo in range(0, D, chunk):
        sel = slice(lo, lo + chunk)
        ops = []
        for s, op in zip(subs, operands):
            if letters[0] not in s:
                ops.append(op)
            elif op.ndim == 1:
                ops.append(op[sel])
            else:
                axis = s.index(letters[0])
                ops.append(op[sel, :] if axis == 0 else op[:, sel])
        amp = np.einsum(expr, *ops, optimize=True)
        delta = np.zeros(amp.shape)
        for axis in range(m):
            e = energies[sel] if axis == 0 else energies
            shape = [1] * m
            shape[axis] = len(e)
            delta = delta + coeffs[axis] * e.reshape(shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            phase = 1j * t_max * delta
            kernel = np.where(np.abs(delta) < 1e-14, 1.0, (np.exp(phase) - 1.0) / np.where(phase == 0, 1.0, phase))
        total += complex(np.sum(amp * kernel))
    return total


# ---------------------------------------------------------------------------
# public time-average interface
# ---------------------------------------------------------------------------


@dataclass
class TimeWindow:
    mode: str = "infinite"  # "finite" | "infinite"
    t_max: float | None = None

    def __post_init__(self):
        if self.mode not in ("finite", "infinite"):
            raise ValueError(f"unknown window mode {self.mode!r}")
        if self.mode == "finite" and (self.t_max is None or self.t_max <= 0):
            raise ValueError("finite windows need t_max > 0")


@dataclass
class SpectralSum:
    """Explicit amplitude/frequency representation of a time-dependent sum."""

    amplitudes: np.ndarray
    frequencies: np.ndarray

    def value(self, t: float) -> complex:
        return complex(np.sum(self.amplitudes * np.exp(1j * t * self.frequencies)))

    def averaged(self, window: TimeWindow, eps_res: float = 0.0) -> "SpectralSum":
        if window.mode == "infinite":
            keep = np.abs(self.frequencies) <= eps_res
            return SpectralSum(np.where(keep, self.amplitudes, 0.0), np.where(keep, self.frequencies, 0.0))
        phase = 1j * window.t_max * self.frequencies
        kernel = np.where(np.abs(phase) < 1e-14, 1.0, (np.exp(phase) - 1.0) / np.where(phase == 0, 1.0, phase))
        return SpectralSum(self.amplitudes * kernel, self.frequencies)

    def total(self) -> complex:
        return complex(np.sum(self.amplitudes))


def word_spectral_sum(model: SpectralModel, state: ThermalState, word: Sequence[tuple]) -> SpectralSum:
    """Materialized spectral decomposition of a timed word moment (small D).

    Oracle-grade: enumerates every index assignment of the cyclic chain.
    """
    chains = chains_from_word(model, state, word)
    m = chains.n_slots
    D = model.dim
    if D**m > 20_000_000:
        raise ValueError("word too large to materialize")
    idx = Partition.singletons(m).block_index()
    letters = string.ascii_lowercase
    subs = [letters[idx[1]]]
    operands = [chains.weights[0]]
    for i, mat in enumerate(chains.cycles[0]):
        subs.append(letters[idx[i + 1]] + letters[idx[(i + 1) % m + 1]])
        operands.append(mat)
    amp = np.einsum(",".join(subs) + "->" + "".join(letters[:m]), *operands, optimize=True)
    freq = np.zeros(amp.shape)
    for axis in range(m):
        shape = [1] * m
        shape[axis] = D
        freq = freq + chains.slot_coeffs[axis] * model.energies.reshape(shape)
    return SpectralSum(amp.reshape(-1), freq.reshape(-1))


def time_average(model: SpectralModel, state: ThermalState, word: Sequence[tuple], window: TimeWindow) -> complex:
    """Time-averaged moment of a word of (observable, timed: bool) letters.

    Finite windows integrate against the phase kernel; the infinite window
    keeps only resonant terms via resonance grouping of slot patterns.
    """
    chains = chains_from_word(model, state, word)
    if window.mode == "infinite":
        return strict_chain_average(chains)
    return _windowed_chain_sum(chains, model.energies, window.t_max)


def averaged_expectation(model: SpectralModel, state: ThermalState, letters: Sequence[tuple], window: TimeWindow) -> Expectation:
    """Functional whose word moments are individually time-averaged.

    `letters` is the full word as (observable, timed) pairs; the functional
    is indexed by letter positions so cumulant machinery can slice it.
    """
    resolved = [(model.observable(obs), timed) for obs, timed in letters]

    def fn(positions):
        subword = [resolved[p] for p in positions]
        chains = SlotChains(
            cycles=[[m for m, _ in subword]],
            weights=[state.weights],
            slot_coeffs=_subword_coeffs(subword),
        )
        if window.mode == "infinite":
            return strict_chain_average(chains)
        return _windowed_chain_sum(chains, model.energies, window.t_max)

    return Expectation(fn)


def _subword_coeffs(subword: list[tuple[np.ndarray, bool]]) -> tuple[int, ...]:
    m = len(subword)
    coeffs = [0] * m
    for i, (_, timed) in enumerate(subword):
        if timed:
            coeffs[i] += 1
            coeffs[(i + 1) % m] -= 1
    return tuple(coeffs)


def averaged_free_cumulant(
    model: SpectralModel, state: ThermalState, word: Sequence[tuple], window: TimeWindow
) -> complex:
    """Free cumulant of individually time-averaged word moments.

    The average sits inside each moment (ensemble-inclusive expectation);
    Moebius inversion happens after averaging.
    """
    phi = averaged_expectation(model, state, word, window)
    return complex(free_cumulant(phi, tuple(range(len(word)))))


# ---------------------------------------------------------------------------
# distinct-index cumulants
# ---------------------------------------------------------------------------


def distinct_index_cumulant(
    model: SpectralModel,
    state: ThermalState,
    A,
    B,
    k: int = 2,
    t: float = 0.0,
    method: str = "auto",
) -> complex:
    """Restricted spectral sum representation of kappa^beta_{2k}.

    Sum over pairwise distinct eigenstate indices of
    w_{i0} A(t)_{i0 i1} B_{i1 i2} A(t)_{i2 i3} B_{i3 i0} ... around the
    2k-cycle.  `method` "einsum" uses inclusion-exclusion over coincidence
    patterns; "brute" is the O(D^{2k}) oracle (small D).
    """
    mats = []
    for _ in range(k):
        mats.append(heisenberg(model, A, t))
        mats.append(model.observable(B))
    chains = SlotChains(cycles=[mats], weights=[state.weights], slot_coeffs=(0,) * (2 * k))
    if method == "auto":
        method = "einsum"
    if method == "einsum":
        return distinct_slot_sum(chains)
    if method != "brute":
        raise ValueError(f"unknown method {method!r}")
    if k == 2:
        return _distinct_brute_k2(chains, model.dim)
    return _distinct_brute_generic(chains, model.dim)


def _distinct_brute_k2(chains: SlotChains, D: int) -> complex:
    if D > BRUTE_FORCE_DIM_CAP:
        raise ValueError(f"brute force capped at D <= {BRUTE_FORCE_DIM_CAP}")
    m1, m2, m3, m4 = chains.cycles[0]
    w = chains.weights[0]
    b = np.arange(D)
    base = (
        (b[:, None, None] != b[None, :, None])
        & (b[:, None, None] != b[None, None, :])
        & (b[None, :, None] != b[None, None, :])
    )
    total = 0.0 + 0.0j
    for x0 in range(D):
        amp = np.einsum("b,bc,cd,d->bcd", m1[x0, :], m2, m3, m4[:, x0], optimize=True)
        mask = base & (b[:, None, None] != x0) & (b[None, :, None] != x0) & (b[None, None, :] != x0)
        total += w[x0] * np.sum(amp[mask])
    return complex(total)


def _distinct_brute_generic(chains: SlotChains, D: int) -> complex:
    import itertools

    m = chains.n_slots
    if D**m > 10_000_000:
        raise ValueError("generic brute force too large")
    mats = chains.cycles[0]
    w = chains.weights[0]
    total = 0.0 + 0.0j
    for combo in itertools.permutations(range(D), m):
        term = w[combo[0]]
        for i, mat in enumerate(mats):
            term = term * mat[combo[i], combo[(i + 1) % m]]
        total += term
    return complex(total)


# ---------------------------------------------------------------------------
# long-time factorization, free-k times, window factorization
# ---------------------------------------------------------------------------


def thermal_cumulant_set(model: SpectralModel, state: ThermalState, obs) -> dict[int, complex]:
    """Equal-time thermal free cumulants of one observable up to order 6."""
    m = model.observable(obs)
    out = {}
    for n in range(1, 7):
        word = ((m, 0.0),) * n
        out[n] = thermal_free_cumulant(model, state, word)
    return out


def otoc_long_time_factorization(model: SpectralModel, state: ThermalState, A, B, k: int) -> tuple[complex, complex, float]:
    """Strict-infinite averaged 2k-OTOC against its cumulant factorization.

    lhs = E_inf <A(t) B ... A(t) B>;  rhs = sum over NC(k) of the thermal
    cumulant products of A times the B moments grouped by the dual
    partition.  Returns (lhs, rhs, |lhs - rhs|).
    """
    word = tuple(x for _ in range(k) for x in ((A, True), (B, False)))
    lhs = time_average(model, state, word, TimeWindow("infinite"))

    a_mat, b_mat = model.observable(A), model.observable(B)
    kappa_cache: dict[int, complex] = {}

    def kappa(n: int) -> complex:
        if n not in kappa_cache:
            kappa_cache[n] = thermal_free_cumulant(model, state, ((a_mat, 0.0),) * n)
        return kappa_cache[n]

    moment_cache: dict[int, complex] = {}

    def b_moment(n: int) -> complex:
        if n not in moment_cache:
            moment_cache[n] = thermal_word_moment(model, state, ((b_mat, 0.0),) * n)
        return moment_cache[n]

    rhs = 0.0 + 0.0j
    for pi in enumerate_nc(k):
        term = 1.0 + 0.0j
        for block in pi.blocks:
            term *= kappa(len(block))
        for block in kreweras_complement(pi).blocks:
            term *= b_moment(len(block))
        rhs += term
    return complex(lhs), complex(rhs), abs(complex(lhs) - complex(rhs))


@dataclass
class FreeTimeResult:
    reached: bool
    time: float | None
    threshold: float
    times: np.ndarray
    magnitudes: np.ndarray


def free_k_time(
    model: SpectralModel,
    state: ThermalState,
    A,
    B,
    k: int,
    threshold: float = 0.05,
    t_grid: Sequence[float] | None = None,
) -> FreeTimeResult:
    """Smallest grid time after which |kappa^beta_{2k}(A(t),B,...)| stays
    below threshold times its initial magnitude for the rest of the grid."""
    if t_grid is None:
        width = max(model.spectral_width(), 1e-12)
        t_grid = np.linspace(0.0, 40.0 / width, 81)
    times = np.asarray(list(t_grid), dtype=float)
    mags = np.array(
        [abs(thermal_free_cumulant(model, state, alternating_word(A, B, k, t))) for t in times]
    )
    baseline = mags[0]
    cutoff = threshold * baseline
    below = mags <= cutoff
    for i in range(len(times)):
        if below[i:].all():
            return FreeTimeResult(True, float(times[i]), threshold, times, mags)
    return FreeTimeResult(False, None, threshold, times, mags)


def appendix_b_crossing_term(model: SpectralModel, state: ThermalState, A, B) -> complex:
    """The off-diagonal pairing that separates the joint average from the
    product of averages: sum_{i != j} w_i w_j A_{ji} B_{ij} A_{ij} B_{ji}."""
    a, b = model.observable(A), model.observable(B)
    w = state.weights
    full = np.einsum("i,j,ji,ij,ij,ji->", w, w, a, b, a, b, optimize=True)
    diag = np.sum(w**2 * np.diagonal(a) ** 2 * np.diagonal(b) ** 2)
    return complex(full - diag)


def factorization_gap(model: SpectralModel, state: ThermalState, A, B, window: TimeWindow) -> tuple[complex, complex, complex]:
    """(joint, product, gap) for E_t[<A(t)B><A(t)B>] vs (E_t[<A(t)B>])^2."""
    a, b = model.observable(A), model.observable(B)
    joint_chains = SlotChains(
        cycles=[[a, b], [a, b]],
        weights=[state.weights, state.weights],
        slot_coeffs=(1, -1, 1, -1),
    )
    single = ((a, True), (b, False))
    if window.mode == "infinite":
        joint = strict_chain_average(joint_chains)
        mean = time_average(model, state, single, window)
    else:
        joint = _windowed_chain_sum(joint_chains, model.energies, window.t_max)
        mean = time_average(model, state, single, window)
    product = mean * mean
    return complex(joint), complex(product), complex(joint - product)


def phase_average_delta_structure(model: SpectralModel, eps: float | None = None) -> float:
    """Exhaustively compare the strict phase average of
    e^{-it[(E_i - E_ibar) + (E_j - E_jbar)]} with the resonance pattern
    d_{i,ibar} d_{j,jbar} + (d_{i,jbar} d_{j,ibar} - triple coincidence).
    Returns the largest mismatch over all index quadruples (small D only)."""
    D = model.dim
    if D > 24:
        raise ValueError("exhaustive delta-structure check is for small D")
    if eps is None:
        eps = RESONANCE_EPS_FACTOR * model.spectral_width()
    e = model.energies
    worst = 0.0
    for i in range(D):
        for ibar in range(D):
            for j in range(D):
                for jbar in range(D):
                    delta = (e[i] - e[ibar]) + (e[j] - e[jbar])
                    strict = 1.0 if abs(delta) < eps else 0.0
                    formula = float(i == ibar and j == jbar) + (
                        float(i == jbar and j == ibar) - float(i == ibar == j == jbar)
                    )
                    worst = max(worst, abs(strict - formula))
    return worst


# ---------------------------------------------------------------------------
# perturbed-basis ensembles
# ---------------------------------------------------------------------------


@dataclass
class DeutschSpec:
    """Family of weak perturbations H + c*lambda*H' of a base Hamiltonian.

    `perturbation` is given in the eigenbasis of the base model; `strength`
    is the constant c (thought of as N^{-exponent} in a scaling family, the
    exponent is carried as configuration metadata only)."""

    perturbation: np.ndarray
    strength: float
    lambdas: tuple[float, ...]
    exponent: float | None = None
    beta: float = 0.0


@dataclass
class DeutschReport:
    lambdas: tuple[float, ...]
    overlaps: dict[float, np.ndarray]
    rotated: dict[float, np.ndarray]
    band_profile: dict[float, tuple[np.ndarray, np.ndarray]]
    mixed_kappa4: dict[tuple[float, float], complex]
    beta: float


def deutsch_ensemble(model: SpectralModel, spec: DeutschSpec, observable="A") -> DeutschReport:
    """Diagonalize each perturbed Hamiltonian, rotate the observable into
    each perturbed eigenbasis, and probe mutual freeness with the base
    thermal weight."""
    D = model.dim
    h0 = np.diag(model.energies)
    a = model.observable(observable)
    state = thermal_state(model, spec.beta)
    overlaps: dict[float, np.ndarray] = {}
    rotated: dict[float, np.ndarray] = {}
    band: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for lam in spec.lambdas:
        h = h0 + spec.strength * lam * spec.perturbation
        evals, vecs = np.linalg.eigh(h)
        overlap = np.abs(vecs) ** 2
        overlaps[lam] = overlap
        rotated[lam] = vecs.conj().T @ a @ vecs
        omega = np.abs(model.energies[:, None] - evals[None, :])
        bins = np.linspace(0.0, float(np.max(omega)) + 1e-12, 25)
        which = np.digitize(omega.reshape(-1), bins) - 1
        mass = np.zeros(len(bins) - 1)
        counts = np.zeros(len(bins) - 1)
        np.add.at(mass, which.clip(0, len(bins) - 2), overlap.reshape(-1))
        np.add.at(counts, which.clip(0, len(bins) - 2), 1.0)
        band[lam] = (0.5 * (bins[1:] + bins[:-1]), mass / np.maximum(counts, 1.0))

    mixed: dict[tuple[float, float], complex] = {}
    for l1 in spec.lambdas:
        for l2 in spec.lambdas:
            if l2 < l1:
                continue
            word = ((rotated[l1], 0.0), (rotated[l2], 0.0), (rotated[l1], 0.0), (rotated[l2], 0.0))
            mixed[(l1, l2)] = thermal_free_cumulant(model, state, word)
    return DeutschReport(
        lambdas=tuple(spec.lambdas),
        overlaps=overlaps,
        rotated=rotated,
        band_profile=band,
        mixed_kappa4=mixed,
        beta=spec.beta,
    )
