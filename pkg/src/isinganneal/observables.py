"""Green's functions and physical diagnostics of Gaussian fermion states.

The dynamical state is the antisymmetric pairing matrix Z of the BCS form
exp(1/2 sum Z_ij c+_i c+_j)|0>; normalization is implicit.  Index
conventions follow G_{j'j} = <c+_j c_j'> and F_{j'j} = <c_j c_j'>.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericError

#: Relative antisymmetry tolerance maintained along trajectories.
ANTISYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GreensPair:
    """Normal and anomalous Green's functions of one Gaussian state."""

    G: np.ndarray
    F: np.ndarray


@dataclass(frozen=True)
class ObservableRecord:
    """Diagnostics at one instant: defect density, residual energy, energy."""

    t: float
    rho_def: float
    eps_res: float
    energy: float


def antisymmetrize(Z):
    """Project exactly onto the antisymmetric part, (Z - Z^T)/2."""
    return 0.5 * (Z - Z.T)


def check_pairing(Z, where=""):
    """Validate pairing-matrix invariants: finite entries, antisymmetry."""
    if not np.all(np.isfinite(Z.view(float) if np.iscomplexobj(Z) else Z)):
        raise NumericError(f"non-finite pairing matrix {where}".strip())
    scale = max(1.0, float(np.abs(Z).max()))
    dev = float(np.abs(Z + Z.T).max())
    if dev > 1e-10 * scale:
        raise NumericError(
            f"pairing matrix lost antisymmetry ({dev:.3e} rel {where})".strip()
        )


def greens_from_pairing(Z):
    """G = (1 + Z Z+)^-1 Z Z+ and F = (1 + Z Z+)^-1 Z via a Hermitian solve.

    1 + Z Z+ is positive definite with eigenvalues >= 1, so the Cholesky
    factorization cannot fail on healthy input; a failure signals corruption
    and is surfaced as NumericError.
    """
    Z = np.asarray(Z)
    zzd = Z @ Z.conj().T
    S = np.eye(Z.shape[0], dtype=zzd.dtype) + zzd
    try:
        factor = cho_factor(S, lower=True, check_finite=True)
    except Exception as exc:  # non-finite or non-PD: corrupted state
        raise NumericError(f"ill-conditioned Green's function solve: {exc}") from exc
    G = cho_solve(factor, zzd)
    F = cho_solve(factor, Z)
    G = 0.5 * (G + G.conj().T)
    F = 0.5 * (F - F.T)
    return GreensPair(G=G, F=F)


def bond_expectations(greens, couplings):
    """<sigma^z_a sigma^z_b> for every bond, from G and F.

    A bond is G_{b,a} + F_{a,b} + c.c.; the periodic wrap bond carries the
    extra sign of the even fermion-parity sector.
    """
    G, F = greens.G, greens.F
    vals = np.empty(couplings.n_bonds)
    for idx, (a, b, _, wraps) in enumerate(couplings.bonds()):
        raw = complex(G[b, a] + F[a, b])
        # the conjugate pair makes the expectation real; a residual imaginary
        # part flags a corrupted (non-Hermitian G / non-antisymmetric F) state
        full = raw + complex(G[b, a].conjugate() + F[a, b].conjugate())
        herm_dev = abs(complex(G[b, a]) - complex(G[a, b]).conjugate())
        anti_dev = abs(complex(F[a, b]) + complex(F[b, a]))
        if abs(full.imag) > 1e-10 or herm_dev > 1e-8 or anti_dev > 1e-8:
            raise NumericError(
                f"bond ({a},{b}) expectation corrupted "
                f"(imag={full.imag:.3e}, herm={herm_dev:.3e}, anti={anti_dev:.3e})"
            )
        val = full.real
        vals[idx] = -val if wraps else val
    if np.any(np.abs(vals) > 1.0 + 1e-8):
        raise NumericError("bond expectation outside [-1, 1]")
    return vals


def energy_expectation(greens, hamiltonian):
    """<H> of the Gaussian state under a quadratic Hamiltonian."""
    G, F = greens.G, greens.F
    A, B = hamiltonian.A, hamiltonian.B
    val = (np.trace(A @ G) + np.trace(A @ G.T) - np.trace(A)
           + np.trace(B @ F.conj().T) - np.trace(B @ F))
    return float(np.real(val)) + hamiltonian.offset


def defect_and_energy(greens, couplings, t=0.0, hamiltonian=None):
    """Defect density, residual energy per site, and (optional) total energy.

    rho_def averages (1 - <sigma^z sigma^z>)/2 over the bonds; eps_res
    weights the same broken-bond measure by J_j and divides by L, i.e. the
    classical energy above the ferromagnetic ground state per site.
    """
    vals = bond_expectations(greens, couplings)
    J = couplings.J_array()
    rho = float(np.sum(1.0 - vals)) / (2.0 * couplings.n_bonds)
    eps = float(J @ (1.0 - vals)) / couplings.L
    energy = energy_expectation(greens, hamiltonian) if hamiltonian is not None else 0.0
    return ObservableRecord(t=t, rho_def=rho, eps_res=eps, energy=energy)
