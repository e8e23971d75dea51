"""Quadratic fermion forms of the annealing Hamiltonians.

Jordan-Wigner maps both the transverse-field chain and the symmetrized
heat-bath generator onto the BCS block form

    H = (c+  c) [[ A,  B], [-B, -A]] (c  c+)^T  (+ scalar offset),

with A symmetric and B antisymmetric.  Every coupling enters as a term
kappa (c+_a - c_a)(c+_b + c_b), contributing kappa/2 to A_ab, A_ba, B_ab
and -kappa/2 to B_ba.  Periodic spin chains are simulated in the even
fermion-parity sector, where terms wrapping the boundary flip sign
(antiperiodic fermions).

Single-particle excitation energies are twice the positive eigenvalues of
the block matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonRepresentableError, NumericError
from .observables import antisymmetrize

_EXACT_ZERO = 0.0


def _safe_sech(z):
    """sech evaluated through decaying exponentials; exact for |z| -> inf."""
    z = np.abs(np.asarray(z, dtype=float))
    return 2.0 * np.exp(-z) / (1.0 + np.exp(-2.0 * z))


def _beta_times(beta, x):
    """beta*x with inf*0 := 0, so exactly degenerate flips survive T -> 0."""
    x = np.asarray(x, dtype=float)
    if np.isinf(beta):
        with np.errstate(invalid="ignore"):
            return np.where(x == 0.0, 0.0, np.sign(x) * np.inf)
    return beta * x


@dataclass(frozen=True)
class HeatBathCouplings:
    """Pauli-operator coefficients of the symmetrized heat-bath generator.

    gamma0/gamma2 are per-site coefficients of sigma^x_j and
    sigma^z_{j-1} sigma^x_j sigma^z_{j+1}; gamma1 is the per-bond
    sigma^z sigma^z coefficient.  The scalar (alpha/2) L completes the
    diagonal part.
    """

    gamma0: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    alpha: float
    beta: float


@dataclass
class QuadraticHamiltonian:
    """Blocks A (symmetric), B (antisymmetric) plus a scalar offset.

    The offset carries additive constants kept out of the blocks, e.g. the
    (alpha/2) L of the heat-bath generator; with it the SA operator has an
    exact zero ground eigenvalue at every fixed temperature.
    """

    A: np.ndarray
    B: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        self.A = 0.5 * (self.A + self.A.T)
        self.B = 0.5 * (self.B - self.B.T)

    @property
    def L(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class BdGSpectrum:
    """Eigen-decomposition of the Bogoliubov-de Gennes block matrix.

    eigenvalues come in +-e pairs (particle-hole symmetry); columns of
    ``eigenvectors`` are stacked (u, v) blocks.  ``gap`` is the smallest
    positive single-particle excitation energy, i.e. twice the smallest
    positive eigenvalue.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gap: float
    offset: float = 0.0

    @property
    def L(self):
        return self.eigenvalues.size // 2

    @property
    def excitation_energies(self):
        return 2.0 * self.eigenvalues[self.eigenvalues > 0]

    @property
    def ground_energy(self):
        """Many-body ground-state energy including the scalar offset."""
        return -float(np.sum(self.eigenvalues[self.eigenvalues > 0])) + self.offset


def heat_bath_couplings(couplings, beta, alpha=1.0):
    """Closed-form Gamma^(0,1,2) of the symmetrized heat-bath generator.

    Bulk site j with neighbor bonds Jl, Jr:
        gamma0 = (alpha/4) [sech(beta(Jl+Jr)) + sech(beta(Jl-Jr))]
        gamma2 = (alpha/4) [sech(beta(Jl-Jr)) - sech(beta(Jl+Jr))]
    and bond (j, j+1):
        gamma1 = (alpha/4) [tanh(beta(Jl+Jj)) - tanh(beta(Jl-Jj))
                            + tanh(beta(Jj+Jr)) + tanh(beta(Jj-Jr))]
    with absent bonds at open ends entering as 0, which reduces to the
    single-bond boundary forms automatically.  Validated against the dense
    symmetrized generator by projection onto the operator basis.
    """
    if not alpha > 0:
        raise ConfigError("rate constant alpha must be positive")
    if beta < 0:
        raise ConfigError("inverse temperature beta must be >= 0")
    J = couplings.J_array()
    if couplings.is_periodic:
        jl = np.roll(J, 1)          # left bond of site j
        jr = J                      # right bond of site j
        j_prev = np.roll(J, 1)      # bond left of bond b's first site
        j_next = np.roll(J, -1)     # bond right of bond b's second site
    else:
        jl = np.concatenate([[0.0], J])
        jr = np.concatenate([J, [0.0]])
        j_prev = np.concatenate([[0.0], J[:-1]])
        j_next = np.concatenate([J[1:], [0.0]])
    sp = _safe_sech(_beta_times(beta, jl + jr))
    sm = _safe_sech(_beta_times(beta, jl - jr))
    gamma0 = 0.25 * alpha * (sp + sm)
    gamma2 = 0.25 * alpha * (sm - sp)
    th = np.tanh
    gamma1 = 0.25 * alpha * (
        th(_beta_times(beta, j_prev + J)) - th(_beta_times(beta, j_prev - J))
        + th(_beta_times(beta, J + j_next)) + th(_beta_times(beta, J - j_next)))
    return HeatBathCouplings(gamma0=gamma0, gamma1=gamma1, gamma2=gamma2,
                             alpha=alpha, beta=beta)


def _add_pair_terms(A, B, a_idx, c_idx, kappa_eff):
    """Accumulate kappa (c+_a - c_a)(c+_b + c_b) terms (wrap signs folded in).

    Each directed pair appears at most once per call, so plain fancy-indexed
    accumulation is safe.
    """
    half = 0.5 * np.asarray(kappa_eff)
    A[a_idx, c_idx] += half
    A[c_idx, a_idx] += half
    B[a_idx, c_idx] += half
    B[c_idx, a_idx] -= half


def sa_block_indices(couplings):
    """Precomputed index arrays and wrap signs for the SA block assembly."""
    L = couplings.L
    a1 = np.arange(couplings.n_bonds)
    c1 = (a1 + 1) % L
    sign1 = np.where(c1 < a1, -1.0, 1.0)  # wrap bond: antiperiodic sector sign
    js = np.arange(L) if couplings.is_periodic else np.arange(1, L - 1)
    a2 = (js - 1) % L
    c2 = (js + 1) % L
    sign2 = np.where(c2 < a2, -1.0, 1.0)
    return (a1, c1, sign1), (js, a2, c2, sign2)


def sa_blocks(couplings, beta, alpha=1.0, indices=None):
    """Raw (A, B) arrays of the fermionized heat-bath generator."""
    hb = heat_bath_couplings(couplings, beta, alpha)
    L = couplings.L
    if couplings.is_periodic and L < 4:
        raise ConfigError("periodic SA chains need L >= 4")
    if indices is None:
        indices = sa_block_indices(couplings)
    (a1, c1, sign1), (js, a2, c2, sign2) = indices
    A = np.zeros((L, L))
    B = np.zeros((L, L))
    A[np.diag_indices(L)] = hb.gamma0
    _add_pair_terms(A, B, a1, c1, -hb.gamma1 * sign1)
    _add_pair_terms(A, B, a2, c2, hb.gamma2[js] * sign2)
    return A, B


def build_sa_hamiltonian(couplings, beta, alpha=1.0):
    """Fermionized heat-bath generator -K + V at fixed beta.

    The scalar (alpha/2) L rides in ``offset`` so the ground eigenvalue of
    the full operator is exactly zero (the sqrt-Gibbs mode).
    """
    A, B = sa_blocks(couplings, beta, alpha)
    return QuadraticHamiltonian(A=A, B=B, offset=0.5 * alpha * couplings.L)


def build_qa_hamiltonian(couplings, gamma_field):
    """Transverse-field chain -sum J sigma^z sigma^z - Gamma sum sigma^x."""
    if gamma_field < 0:
        raise ConfigError("transverse field must be >= 0")
    L = couplings.L
    if couplings.is_periodic and L < 3:
        raise ConfigError("periodic QA chains need L >= 3")
    A = np.zeros((L, L))
    B = np.zeros((L, L))
    A[np.diag_indices(L)] = gamma_field
    a1 = np.arange(couplings.n_bonds)
    c1 = (a1 + 1) % L
    sign1 = np.where(c1 < a1, -1.0, 1.0)
    _add_pair_terms(A, B, a1, c1, -couplings.J_array() * sign1)
    return QuadraticHamiltonian(A=A, B=B, offset=0.0)


def bdg_matrix(h):
    """The 2L x 2L block matrix [[A, B], [-B, -A]] (symmetric for real blocks)."""
    return np.block([[h.A, h.B], [-h.B, -h.A]])


def bdg_diagonalize(h):
    """Full eigensystem of the BdG matrix with particle-hole pairing enforced."""
    M = bdg_matrix(h)
    if not np.all(np.isfinite(M)):
        raise NumericError("non-finite entries in BdG matrix")
    vals, vecs = np.linalg.eigh(M)
    L = h.L
    scale = max(1.0, float(np.abs(vals).max()))
    pairing_dev = float(np.abs(vals + vals[::-1]).max())
    if pairing_dev > 1e-10 * scale:
        raise NumericError(
            f"particle-hole symmetry violated ({pairing_dev:.3e} vs scale {scale:.3e})"
        )
    # enforce exact +- pairing: mirror the upper half onto the lower
    vals = vals.copy()
    vals[:L] = -vals[L:][::-1]
    positive = vals[vals > 0]
    gap = 2.0 * float(positive.min()) if positive.size else _EXACT_ZERO
    return BdGSpectrum(eigenvalues=vals, eigenvectors=vecs, gap=gap, offset=h.offset)


def ground_state_pairing(spectrum):
    """Pairing matrix Z of the BdG ground state.

    Quasiparticle annihilators of the positive-energy modes kill the state;
    with (u, v) eigenvector blocks this pins U^T Z = -V^T.  A singular U
    block means the ground state has no vacuum component (e.g. the
    classical point Gamma = 0) and cannot be represented.
    """
    L = spectrum.L
    pos = spectrum.eigenvalues > 0
    if int(pos.sum()) != L:
        raise NonRepresentableError(
            "ground sector degenerate with zero modes; start the anneal at "
            "nonzero transverse field / temperature"
        )
    U = spectrum.eigenvectors[:L, pos]
    V = spectrum.eigenvectors[L:, pos]
    try:
        Z = -np.linalg.solve(U.T, V.T)
    except np.linalg.LinAlgError as exc:
        raise NonRepresentableError(
            "vacuum component of the ground state vanishes (singular U block)"
        ) from exc
    if np.abs(Z).max() > 1e12:
        raise NonRepresentableError("pairing matrix diverges for this ground state")
    return antisymmetrize(Z)


def ordered_qa_dispersion(J, gamma_field, L):
    """Closed-form excitation energies 2 sqrt(G^2+J^2+2 G J cos k) of the
    uniform periodic chain on the even-sector grid k_m = (2m+1) pi / L."""
    if L % 2:
        raise ConfigError("even-sector k grid needs even L")
    k = (2 * np.arange(L // 2) + 1) * np.pi / L
    return 2.0 * np.sqrt(gamma_field**2 + J**2 + 2.0 * gamma_field * J * np.cos(k))


def spectrum_to_csv_rows(spectrum):
    """(index, eigenvalue) rows for CSV export."""
    return [(i, float(v)) for i, v in enumerate(spectrum.eigenvalues)]
