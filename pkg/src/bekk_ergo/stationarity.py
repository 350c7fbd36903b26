"""
Second-order stationarity: spectral checks, fixed points and the ARCH(inf) filter.

All fixed points are obtained by a dense linear solve in vech coordinates.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from . import matcore
from .exceptions import DomainError, InconsistencyError
from .state import ChainState

__all__ = [
    "StationarityReport",
    "ArchInfinityCoeffs",
    "rho_AB",
    "rho_B",
    "rho_companion",
    "check_h3",
    "stationary_covariance",
    "dual_covariance",
    "volatility_fixed_point",
    "attracting_point",
    "companion_tail_constants",
    "arch_infinity_coeffs",
    "arch_infinity_reconstruct",
]

DEFAULT_TRUNCATION_TOL = 1e-10
MAX_TRUNCATION = 10_000


def _sum_A(m):
    return np.sum(m.vech_form.A, axis=0)


def _sum_B(m):
    return np.sum(m.vech_form.B, axis=0)


def rho_AB(m):
    """Spectral radius of ``sum A_i + sum B_j``."""
    return matcore.spectral_radius(_sum_A(m) + _sum_B(m))


def rho_B(m):
    return matcore.spectral_radius(_sum_B(m))


def rho_companion(m):
    return matcore.spectral_radius(m.blocks.B_block)


@dataclass(frozen=True, eq=False)
class StationarityReport:
    rho_AB: float
    rho_B: float
    rho_companion: float
    stationary: bool
    tol_margin: float
    Sigma: Optional[np.ndarray] = None
    Sigma_tilde: Optional[np.ndarray] = None
    T: Optional[ChainState] = None

    def to_dict(self):
        def mat(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "rho_AB": self.rho_AB,
            "rho_B": self.rho_B,
            "rho_companion": self.rho_companion,
            "stationary": self.stationary,
            "tol_margin": self.tol_margin,
            "Sigma": mat(self.Sigma),
            "Sigma_tilde": mat(self.Sigma_tilde),
            "T": None if self.T is None else self.T.to_vector().tolist(),
        }


def check_h3(m, tol_margin=0.0):
    """
    Decide whether ``rho(sum A_i + sum B_j) < 1 - tol_margin``.

    A radius of exactly one is reported as non-stationary; nothing is
    certified on the boundary.  When the relevant radii are below one the
    report also carries the stationary covariance, the volatility fixed point
    and the attracting state.
    """
    r_ab, r_b, r_c = rho_AB(m), rho_B(m), rho_companion(m)
    stationary = r_ab < 1.0 - tol_margin
    Sigma = stationary_covariance(m) if r_ab < 1.0 else None
    Sigma_tilde = T = None
    if r_b < 1.0:
        Sigma_tilde = volatility_fixed_point(m)
        T = attracting_point(m)
    return StationarityReport(
        rho_AB=r_ab,
        rho_B=r_b,
        rho_companion=r_c,
        stationary=bool(stationary),
        tol_margin=float(tol_margin),
        Sigma=Sigma,
        Sigma_tilde=Sigma_tilde,
        T=T,
    )


def _fixed_point(C, op, what):
    h = op.shape[0]
    v = np.linalg.solve(np.eye(h) - op, matcore.vech(C))
    S = matcore.unvech(v)
    if not matcore.is_positive_definite(S):
        raise InconsistencyError(f"{what}: linear solve returned a non positive definite matrix")
    return S


def stationary_covariance(m):
    """
    Unique positive definite solution of
    ``Sigma = C + sum Abar Sigma Abar' + sum Bbar Sigma Bbar'``.
    """
    r = rho_AB(m)
    if r >= 1.0:
        raise DomainError(f"no stationary covariance: rho_AB = {r:.6g} >= 1")
    return _fixed_point(m.C, _sum_A(m) + _sum_B(m), "stationary_covariance")


def dual_covariance(m):
    """Fixed point with transposed coefficients, ``Sigma = C + sum F' Sigma F``."""
    r = rho_AB(m)
    if r >= 1.0:
        raise DomainError(f"no dual fixed point: rho_AB = {r:.6g} >= 1")
    mt = m.transposed()
    return _fixed_point(m.C, _sum_A(mt) + _sum_B(mt), "dual_covariance")


def volatility_fixed_point(m):
    """``vech(Sigma~) = (I - sum B_j)^{-1} vech(C)``."""
    r = rho_B(m)
    if r >= 1.0:
        raise DomainError(f"no volatility fixed point: rho_B = {r:.6g} >= 1")
    return _fixed_point(m.C, _sum_B(m), "volatility_fixed_point")


def attracting_point(m):
    """Unique solution of ``T = scrC + Btilde T`` as a :class:`ChainState`."""
    r = rho_B(m)
    if r >= 1.0:
        raise DomainError(f"no attracting point: rho_B = {r:.6g} >= 1")
    Bt, c = m.blocks.Btilde_block, m.blocks.scrC
    T = np.linalg.solve(np.eye(len(c)) - Bt, c)
    resid = np.linalg.norm(T - c - Bt @ T)
    if resid > 1e-10 * (1.0 + np.linalg.norm(T)):
        raise InconsistencyError(f"attracting point residual {resid:.3e}")
    return ChainState.from_vector(T, m.d, m.p, m.q)


@dataclass(frozen=True, eq=False)
class ArchInfinityCoeffs:
    """Coefficients ``K_1..K_n`` of the ARCH(inf) filter.

    ``K[i - 1]`` holds ``K_i``.  ``tail_bound`` bounds ``sum_{i>n} ||K_i||_2``.
    """

    K: np.ndarray
    intercept: np.ndarray  # vech(Sigma~)
    truncation_norm: float
    tail_bound: float

    @property
    def n(self):
        return self.K.shape[0]

    def tail_norms(self):
        return np.linalg.norm(self.K, ord=2, axis=(1, 2))


def companion_tail_constants(m):
    """
    Constants ``(kappa, gamma)`` with ``||B^k||_2 <= kappa * gamma**k``.

    Obtained from the Lyapunov solution ``B' P B - P = -I``: the ``P``-norm
    contracts by ``gamma = sqrt(1 - 1/lambda_max(P))`` per step and
    ``kappa = sqrt(cond(P))`` converts back to the Euclidean norm.
    """
    Bb = m.blocks.B_block
    if rho_companion(m) >= 1.0:
        raise DomainError("companion matrix is not stable")
    P = linalg.solve_discrete_lyapunov(Bb.T, np.eye(Bb.shape[0]))
    w = np.linalg.eigvalsh(matcore.symmetrize(P))
    gamma = float(np.sqrt(max(0.0, 1.0 - 1.0 / w[-1])))
    kappa = float(np.sqrt(w[-1] / w[0]))
    return kappa, gamma


def _tail_bound(n, a_norms, kappa, gamma):
    # sum_{m>n} ||K_m|| <= sum_j ||A_j|| sum_{k >= n-j+1} ||B^k||
    total = 0.0
    for j, a in enumerate(a_norms, start=1):
        k0 = max(n - j + 1, 0)
        total += a * kappa * gamma**k0 / (1.0 - gamma)
    return total


def arch_infinity_coeffs(m, n=None, tol=DEFAULT_TRUNCATION_TOL, cap=MAX_TRUNCATION):
    """
    ``K_i = [B^{i-1} A]_{1,1} + ... + [B^{i-q} A]_{1,q}`` for ``i = 1..n``.

    With ``n=None`` the truncation is the smallest ``n`` whose operator-norm
    tail bound drops below ``tol``, capped at ``cap``.
    """
    if rho_B(m) >= 1.0:
        raise DomainError("ARCH(inf) coefficients need rho_B < 1")
    if n is not None and n < 1:
        raise DomainError(f"truncation must be >= 1, got {n}")
    A = m.vech_form.A
    a_norms = [np.linalg.norm(Ai, 2) for Ai in A]
    kappa, gamma = companion_tail_constants(m)
    if n is None:
        n = 1
        while n < cap and _tail_bound(n, a_norms, kappa, gamma) >= tol:
            n += 1
    h, q = m.h, m.q
    Bb = m.blocks.B_block
    # E holds the first block column of B^k; [B^k]_{1,1} = E[:h].
    E = np.zeros((Bb.shape[0], h))
    E[:h] = np.eye(h)
    powers = []
    K = np.zeros((n, h, h))
    for i in range(1, n + 1):
        powers.append(E[:h].copy())
        for j in range(1, min(q, i) + 1):
            K[i - 1] += powers[i - j] @ A[j - 1]
        E = Bb @ E
    K.setflags(write=False)
    return ArchInfinityCoeffs(
        K=K,
        intercept=matcore.vech(volatility_fixed_point(m)),
        truncation_norm=float(np.linalg.norm(K[-1], 2)),
        tail_bound=float(_tail_bound(n, a_norms, kappa, gamma)),
    )


def arch_infinity_reconstruct(coeffs, xs, t):
    """
    Truncated filter value of ``vech(Sigma_t)``.

    ``xs[k]`` is the observation at time ``k``; observations at negative
    times are taken to be zero.
    """
    xs = np.asarray(xs, dtype=float)
    out = np.array(coeffs.intercept, dtype=float)
    rows, cols = np.triu_indices(xs.shape[1])
    for i in range(1, coeffs.n + 1):
        k = t - i
        if k < 0:
            break
        x = xs[k]
        out += coeffs.K[i - 1] @ (x[cols] * x[rows])
    return out
