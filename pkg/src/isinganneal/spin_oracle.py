"""Dense 2^L reference implementations for small chains.

Everything here enumerates the full configuration space and is used to
validate the fermionic code paths: the Glauber master equation, its
symmetrized generator, real/imaginary-time Schrodinger evolution, and the
explicit Fock-space expansion of Gaussian (BCS) states.

Basis conventions, used consistently everywhere:

* Spin z-basis: configuration index ``s`` has bit ``j`` equal to 0 for
  sigma_j = +1 and 1 for sigma_j = -1, i.e. sigma_j = 1 - 2*bit_j(s).
* Fermion Fock basis: index ``s`` has bit ``j`` equal to the occupation
  n_j; operators carry the Jordan-Wigner sign string over sites below j.
  Site j occupies the j-th slot of the Kronecker chain, so bit j of the
  index is its occupation for both bases.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply
from scipy.special import expit

from .errors import ConfigError, IntegrationError
from .observables import ObservableRecord

_MAX_L_EVOLVE = 12
_MAX_L_DENSE = 10

_ID2 = sp.identity(2, format="csr")
_SX = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
_SZ = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
_SMINUS = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))  # annihilator |1> -> |0>


def _require_size(L, cap):
    if L > cap:
        raise ConfigError(f"dense oracle limited to L <= {cap}, got L={L}")


def _kron_chain(ops):
    """Kronecker product with site 0 as the fastest-varying index bit."""
    out = ops[-1]
    for op in reversed(ops[:-1]):
        out = sp.kron(out, op, format="csr")
    return out


def site_operator(L, j, op):
    """Single-site operator embedded in the 2^L space (no strings)."""
    ops = [_ID2] * L
    ops[j] = op
    return _kron_chain(ops)


def pauli_string(L, factors):
    """Product of single-site Paulis, e.g. factors=[(j, 'z'), (j+1, 'z')]."""
    ops = [_ID2] * L
    table = {"x": _SX, "z": _SZ}
    for j, name in factors:
        ops[j] = ops[j] @ table[name]
    return _kron_chain(ops)


@lru_cache(maxsize=8)
def fermion_operators(L):
    """Sparse annihilators c_0..c_{L-1} with Jordan-Wigner sign strings."""
    _require_size(L, _MAX_L_DENSE)
    ops = []
    for j in range(L):
        chain = [_SZ] * j + [_SMINUS] + [_ID2] * (L - 1 - j)
        ops.append(_kron_chain(chain))
    return tuple(ops)


def spin_configurations(L):
    """sigma values per site, shape (L, 2^L), entries +-1."""
    s = np.arange(2**L)
    return np.array([1 - 2 * ((s >> j) & 1) for j in range(L)], dtype=np.int8)


def classical_energies(couplings):
    """H_cl(sigma) = -sum_b J_b sigma_a sigma_b over all 2^L configurations."""
    sigma = spin_configurations(couplings.L)
    e = np.zeros(2**couplings.L)
    for a, b, j, _ in couplings.bonds():
        e -= j * sigma[a] * sigma[b]
    return e


def flip_energy_changes(couplings):
    """Delta E of a single flip: row j holds H(flip_j(s)) - H(s)."""
    L = couplings.L
    sigma = spin_configurations(L).astype(float)
    delta = np.zeros((L, 2**L))
    for j in range(L):
        jl, jr = couplings.neighbor_bonds(j)
        left = sigma[(j - 1) % L] if (j > 0 or couplings.is_periodic) else 0.0
        right = sigma[(j + 1) % L] if (j < L - 1 or couplings.is_periodic) else 0.0
        delta[j] = 2.0 * sigma[j] * (jl * left + jr * right)
    return delta


def _beta_times(beta, x):
    """beta*x with the convention inf*0 = 0 (exactly degenerate flips)."""
    x = np.asarray(x, dtype=float)
    if np.isinf(beta):
        with np.errstate(invalid="ignore"):
            return np.where(x == 0.0, 0.0, np.sign(x) * np.inf)
    return beta * x


def heat_bath_rates(delta_e, beta, alpha):
    """W(sigma -> flipped) = alpha e^{-beta E_new} / (e^{-beta E_old} + e^{-beta E_new})."""
    return alpha * expit(-_beta_times(beta, delta_e))


def _safe_sech(z):
    z = np.abs(np.asarray(z, dtype=float))
    return 2.0 * np.exp(-z) / (1.0 + np.exp(-2.0 * z))


def gibbs_distribution(couplings, beta):
    """Normalized Gibbs weights at fixed inverse temperature."""
    e = classical_energies(couplings)
    w = np.exp(-_beta_times(beta, e - e.min()))
    return w / w.sum()


def bond_sign_vectors(couplings):
    """Diagonal of sigma^z_a sigma^z_b for every bond, shape (n_bonds, 2^L)."""
    sigma = spin_configurations(couplings.L)
    return np.array([sigma[a] * sigma[b] for a, b, _, _ in couplings.bonds()], dtype=float)


def classical_observables(P, couplings, t=0.0, energies=None):
    """Classical averages sum_sigma P(sigma) O(sigma) of the standard diagnostics."""
    signs = bond_sign_vectors(couplings)
    J = couplings.J_array()
    expvals = signs @ P
    rho = np.sum(1.0 - expvals) / (2.0 * couplings.n_bonds)
    eps = float(J @ (1.0 - expvals)) / couplings.L
    energy = float((energies if energies is not None else classical_energies(couplings)) @ P)
    return ObservableRecord(t=t, rho_def=float(rho), eps_res=eps, energy=energy)


def quantum_observables(psi, couplings, t=0.0, hamiltonian=None):
    """Normalized expectations <psi|O|psi> of the diagnostics (z-basis psi)."""
    w = np.abs(psi) ** 2
    w = w / w.sum()
    signs = bond_sign_vectors(couplings)
    J = couplings.J_array()
    expvals = signs @ w
    rho = np.sum(1.0 - expvals) / (2.0 * couplings.n_bonds)
    eps = float(J @ (1.0 - expvals)) / couplings.L
    energy = 0.0
    if hamiltonian is not None:
        psin = psi / np.linalg.norm(psi)
        energy = float(np.real(np.vdot(psin, hamiltonian @ psin)))
    return ObservableRecord(t=t, rho_def=float(rho), eps_res=eps, energy=energy)


# ---------------------------------------------------------------------------
# Glauber master equation
# ---------------------------------------------------------------------------

def dense_master_equation(couplings, schedule, P0=None, tau=None, tol=1e-10,
                          sample_times=None):
    """Integrate the heat-bath single-flip master equation with T(t).

    Returns (final P, list of ObservableRecord) holding classical averages at
    the sample times.  P0 defaults to the Gibbs state at the initial
    temperature.
    """
    L = couplings.L
    _require_size(L, _MAX_L_EVOLVE)
    tau = schedule.tau if tau is None else tau
    alpha = schedule.alpha
    delta = flip_energy_changes(couplings)
    flips = [np.arange(2**L) ^ (1 << j) for j in range(L)]
    energies = classical_energies(couplings)

    if P0 is None:
        P0 = gibbs_distribution(couplings, schedule.beta(0.0))
    P0 = np.asarray(P0, dtype=float)
    if abs(P0.sum() - 1.0) > 1e-9 or P0.min() < -1e-12:
        raise ConfigError("P0 must be a probability vector")

    def rhs(t, P):
        beta = schedule.beta(min(t, tau))
        dP = np.zeros_like(P)
        for j in range(L):
            w_out = heat_bath_rates(delta[j], beta, alpha)
            w_in = alpha * expit(_beta_times(beta, delta[j]))
            dP += w_in * P[flips[j]] - w_out * P
        return dP

    if sample_times is None:
        sample_times = np.linspace(0.0, tau, 9)
    sol = solve_ivp(rhs, (0.0, tau), P0, method="DOP853", t_eval=sample_times,
                    rtol=tol, atol=tol * 1e-3)
    if not sol.success:
        raise IntegrationError(f"master equation integration failed: {sol.message}")
    records = []
    for i, t in enumerate(sol.t):
        P = sol.y[:, i]
        if P.min() < -100 * tol:
            raise IntegrationError(f"negative probabilities at t={t}", t=t)
        records.append(classical_observables(P, couplings, t=t, energies=energies))
    return sol.y[:, -1], records


# ---------------------------------------------------------------------------
# Symmetrized generator and dense Schrodinger evolution
# ---------------------------------------------------------------------------

def dense_symmetrized_generator(couplings, beta, alpha=1.0):
    """Hermitian form of the heat-bath generator in the spin z-basis.

    Off-diagonal entries -K with K = sqrt(W_out W_in) = (alpha/2) sech(beta
    DeltaE / 2); diagonal V(sigma) = sum_j W_out.  Detailed balance makes the
    matrix symmetric with sqrt(P_eq) as an exact zero mode.
    """
    L = couplings.L
    _require_size(L, _MAX_L_DENSE)
    dim = 2**L
    delta = flip_energy_changes(couplings)
    H = np.zeros((dim, dim))
    idx = np.arange(dim)
    V = np.zeros(dim)
    for j in range(L):
        K = 0.5 * alpha * _safe_sech(0.5 * _beta_times(beta, delta[j]))
        H[idx ^ (1 << j), idx] -= K
        V += heat_bath_rates(delta[j], beta, alpha)
    H[idx, idx] += V
    return H


def _sa_generator_apply(couplings, alpha, delta, flips):
    """Matrix-free application of the symmetrized generator at given beta."""

    def apply(beta, psi):
        out = np.zeros_like(psi)
        for j in range(couplings.L):
            K = 0.5 * alpha * _safe_sech(0.5 * _beta_times(beta, delta[j]))
            out -= K * psi[flips[j]]
            out += heat_bath_rates(delta[j], beta, alpha) * psi
        return out

    return apply


def dense_schrodinger(couplings, schedule, domain, psi0, tol=1e-10,
                      sample_times=None, hamiltonian="qa"):
    """Dense wavefunction evolution in the spin z-basis.

    hamiltonian="qa": transverse-field chain with Gamma(t); domain selects
    real time (norm conserving) or imaginary time (ground-state filtering,
    integrated as the norm-preserving projected flow).  hamiltonian="sa":
    the symmetrized heat-bath generator at beta(t), always imaginary time.

    Returns (final normalized psi, list of ObservableRecord).
    """
    L = couplings.L
    _require_size(L, _MAX_L_EVOLVE)
    tau = schedule.tau
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)

    if hamiltonian == "qa":
        M_zz = sum(j * pauli_string(L, [(a, "z"), (b, "z")])
                   for a, b, j, _ in couplings.bonds())
        M_x = sum(site_operator(L, j, _SX) for j in range(L))

        def h_apply(t, psi):
            return -(M_zz @ psi) - schedule.value(min(t, tau)) * (M_x @ psi)
    elif hamiltonian == "sa":
        if domain != "imaginary":
            raise ConfigError("the SA generator evolves in imaginary time only")
        delta = flip_energy_changes(couplings)
        flips = [np.arange(2**L) ^ (1 << j) for j in range(L)]
        gen = _sa_generator_apply(couplings, schedule.alpha, delta, flips)

        def h_apply(t, psi):
            return gen(schedule.beta(min(t, tau)), psi)
    else:
        raise ConfigError(f"unknown hamiltonian {hamiltonian!r}")

    if domain == "real":
        def rhs(t, psi):
            return -1j * h_apply(t, psi)
    elif domain == "imaginary":
        def rhs(t, psi):
            hpsi = h_apply(t, psi)
            mean = np.real(np.vdot(psi, hpsi)) / np.real(np.vdot(psi, psi))
            return -(hpsi - mean * psi)
    else:
        raise ConfigError(f"unknown time domain {domain!r}")

    if sample_times is None:
        sample_times = np.linspace(0.0, tau, 9)
    sol = solve_ivp(rhs, (0.0, tau), psi0, method="DOP853", t_eval=sample_times,
                    rtol=tol, atol=tol * 1e-3)
    if not sol.success:
        raise IntegrationError(f"dense Schrodinger integration failed: {sol.message}")

    records = []
    for i, t in enumerate(sol.t):
        psi = sol.y[:, i]
        rec = quantum_observables(psi, couplings, t=t)
        energy = np.real(np.vdot(psi, h_apply(t, psi)) / np.vdot(psi, psi))
        records.append(ObservableRecord(t=rec.t, rho_def=rec.rho_def,
                                        eps_res=rec.eps_res, energy=float(energy)))
    psi_final = sol.y[:, -1]
    return psi_final / np.linalg.norm(psi_final), records


# ---------------------------------------------------------------------------
# Gaussian states in the Fock basis
# ---------------------------------------------------------------------------

def dense_gaussian_state(Z):
    """Explicit Fock-space expansion of exp(1/2 sum Z_ij c+_i c+_j)|0>, normalized."""
    Z = np.asarray(Z)
    L = Z.shape[0]
    _require_size(L, _MAX_L_DENSE)
    if not np.allclose(Z, -Z.T, atol=1e-10 * max(1.0, np.abs(Z).max())):
        raise ConfigError("pairing matrix must be antisymmetric")
    c = fermion_operators(L)
    dim = 2**L
    S = sp.csr_matrix((dim, dim), dtype=complex)
    for i in range(L):
        for j in range(i + 1, L):
            if Z[i, j] != 0.0:
                S = S + Z[i, j] * (c[i].conj().T @ c[j].conj().T)
    vac = np.zeros(dim, dtype=complex)
    vac[0] = 1.0
    psi = expm_multiply(S, vac)
    return psi / np.linalg.norm(psi)


def dense_greens_functions(psi):
    """G_{j'j} = <c+_j c_j'> and F_{j'j} = <c_j c_j'> of a Fock-basis state."""
    L = int(np.log2(psi.size))
    c = fermion_operators(L)
    G = np.zeros((L, L), dtype=complex)
    F = np.zeros((L, L), dtype=complex)
    psi = psi / np.linalg.norm(psi)
    cpsi = [op @ psi for op in c]
    for j in range(L):
        for jp in range(L):
            G[jp, j] = np.vdot(cpsi[j], cpsi[jp])
            F[jp, j] = np.vdot(psi, c[j] @ cpsi[jp])
    return G, F


def fermion_quadratic_dense(A, B, offset=0.0):
    """Dense Fock-basis matrix of the BCS form built from blocks A, B."""
    A = np.asarray(A)
    B = np.asarray(B)
    L = A.shape[0]
    _require_size(L, _MAX_L_DENSE)
    c = fermion_operators(L)
    dim = 2**L
    H = sp.csr_matrix((dim, dim))
    for i in range(L):
        for j in range(L):
            if A[i, j] != 0.0:
                H = H + A[i, j] * (c[i].conj().T @ c[j] - c[i] @ c[j].conj().T)
            if B[i, j] != 0.0:
                H = H + B[i, j] * (c[i].conj().T @ c[j].conj().T - c[i] @ c[j])
    return H.toarray() + offset * np.eye(dim)


# ---------------------------------------------------------------------------
# Basis maps between the spin and fermion pictures
# ---------------------------------------------------------------------------

def hadamard_rotation(L):
    """Unitary from the spin z-basis to the sigma^x product basis.

    Column s of the result is the x-basis state whose index bits are the
    fermion occupations n_j = (1 - sigma^x_j)/2; rotating a z-basis spin
    operator with it lands in the basis shared with ``fermion_operators``.
    """
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    U = np.array([[1.0]])
    for _ in range(L):
        U = np.kron(h, U)
    return U


def parity_signs(L):
    """(-1)^(number of set bits) for every basis index."""
    s = np.arange(2**L)
    odd = np.zeros(2**L, dtype=bool)
    for j in range(L):
        odd ^= ((s >> j) & 1).astype(bool)
    return np.where(odd, -1.0, 1.0)


def even_sector_indices(L):
    return np.nonzero(parity_signs(L) > 0)[0]
