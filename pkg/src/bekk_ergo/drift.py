"""
Foster-Lyapunov drift certificate for stationary BEKK models.

The Lyapunov function on the state ``y = (Sigma_1..Sigma_p, X_1..X_q)`` is

    V(y) = sum_{k<=p} tr(V_k Sigma_k) + sum_{k<=q} X_k' V_{p+k} X_k + 1

with

    V_k     = (p-k+1)/(p+q) C + sum_{j>=k} sum_r Bbar_{j,r}' S Bbar_{j,r}
    V_{p+k} = (q-k+1)/(p+q) C + sum_{i>=k} sum_r Abar_{i,r}' S Abar_{i,r}

where ``S`` solves ``S = C + sum F' S F`` over all coefficient matrices.
The one-step drift then satisfies ``E[V(Y_1) | Y_0 = y] <= alpha0 V(y) + b``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import matcore
from .exceptions import CertificateFailure, DomainError
from .state import ChainState
from .simulate import GAUSSIAN, next_sigma, run, step_many
from .stationarity import attracting_point, dual_covariance, rho_AB

__all__ = [
    "DriftCertificate",
    "DriftReport",
    "build_certificate",
    "evaluate_V",
    "conditional_drift",
    "telescoped_drift",
    "telescoping_residuals",
    "monte_carlo_drift",
    "random_states",
    "verify_drift",
]


@dataclass(frozen=True, eq=False)
class DriftCertificate:
    Sigma_dual: np.ndarray
    V_mats: np.ndarray  # (p+q, d, d)
    alphas: np.ndarray  # per-block contraction factors alpha_k
    alpha0: float
    alpha: float
    b: float
    K_level: float
    p: int
    q: int

    def to_dict(self):
        return {
            "Sigma_dual": self.Sigma_dual.tolist(),
            "V_mats": self.V_mats.tolist(),
            "alphas": self.alphas.tolist(),
            "alpha0": self.alpha0,
            "alpha": self.alpha,
            "b": self.b,
            "K_level": self.K_level,
            "p": self.p,
            "q": self.q,
        }


def _quad(mats, S):
    """``sum F' S F``."""
    out = np.zeros_like(S)
    for F in mats:
        out += F.T @ S @ F
    return out


def build_certificate(m):
    """Construct ``V_1..V_{p+q}``, ``alpha0``, ``alpha``, ``b`` and the level of K."""
    r = rho_AB(m)
    if r >= 1.0:
        raise DomainError(f"drift certificate needs rho_AB < 1, got {r:.6g}")
    p, q = m.p, m.q
    S = dual_covariance(m)
    Cn = m.C / (p + q)
    V = []
    for k in range(1, p + 1):
        V.append((p - k + 1) * Cn + sum(_quad(m.B[j - 1], S) for j in range(k, p + 1)))
    for k in range(1, q + 1):
        V.append((q - k + 1) * Cn + sum(_quad(m.A[i - 1], S) for i in range(k, q + 1)))
    V = np.array([matcore.symmetrize(Vk) for Vk in V])
    # max of x'(V_k - C/(p+q))x over x'V_k x = 1: top generalized eigenvalue
    alphas = np.array([linalg.eigh(Vk - Cn, Vk, eigvals_only=True)[-1] for Vk in V])
    alphas = np.clip(alphas, 0.0, None)
    alpha0 = float(alphas.max())
    alpha = (alpha0 + 1.0) / 2.0
    b = float(np.trace(S @ m.C)) + 1.0 - alpha0
    V.setflags(write=False)
    return DriftCertificate(
        Sigma_dual=S,
        V_mats=V,
        alphas=alphas,
        alpha0=alpha0,
        alpha=alpha,
        b=b,
        K_level=b / (alpha - alpha0),
        p=p,
        q=q,
    )


def evaluate_V(cert, y):
    """Value of the Lyapunov function at state ``y`` (always ``>= 1``)."""
    y.require_U()
    p = cert.p
    total = 1.0
    for k in range(p):
        total += float(np.trace(cert.V_mats[k] @ y.sigma(k)))
    for k in range(cert.q):
        x = y.x_blocks[k]
        total += float(x @ cert.V_mats[p + k] @ x)
    return total


def conditional_drift(m, cert, y):
    """
    Exact ``E[V(Y_n) | Y_{n-1} = y]`` for innovations with identity covariance.

    Uses ``E[X_n' V X_n | y] = tr(Sigma_n V)``.
    """
    y.require_U()
    p, q = m.p, m.q
    Vm = cert.V_mats
    Sn = next_sigma(m, y)
    total = 1.0 + float(np.trace((Vm[0] + Vm[p]) @ Sn))
    for k in range(2, p + 1):
        total += float(np.trace(Vm[k - 1] @ y.sigma(k - 2)))
    for k in range(2, q + 1):
        x = y.x_blocks[k - 2]
        total += float(x @ Vm[p + k - 1] @ x)
    return total


def telescoped_drift(m, cert, y):
    """
    The same expectation written through the telescoping identities::

        sum_k tr((V_k - C/(p+q)) Sigma_k) + sum_k X_k'(V_{p+k} - C/(p+q))X_k
            + tr((V_1 + V_{p+1}) C) + 1
    """
    y.require_U()
    p, q = m.p, m.q
    Vm = cert.V_mats
    Cn = m.C / (p + q)
    total = 1.0 + float(np.trace((Vm[0] + Vm[p]) @ m.C))
    for k in range(p):
        total += float(np.trace((Vm[k] - Cn) @ y.sigma(k)))
    for k in range(q):
        x = y.x_blocks[k]
        total += float(x @ (Vm[p + k] - Cn) @ x)
    return total


def telescoping_residuals(m, cert):
    """
    Frobenius residuals of the identities linking consecutive ``V_k``.

    Returns a dict with lists ``"B"`` (length p) and ``"A"`` (length q).
    """
    p, q = m.p, m.q
    Vm = cert.V_mats
    W = Vm[0] + Vm[p]
    Cn = m.C / (p + q)
    out = {"B": [], "A": []}
    for k in range(1, p + 1):
        lhs = _quad(m.B[k - 1], W) + (Vm[k] if k < p else 0.0)
        out["B"].append(float(np.linalg.norm(lhs - (Vm[k - 1] - Cn))))
    for k in range(1, q + 1):
        lhs = _quad(m.A[k - 1], W) + (Vm[p + k] if k < q else 0.0)
        out["A"].append(float(np.linalg.norm(lhs - (Vm[p + k - 1] - Cn))))
    return out


def monte_carlo_drift(m, cert, y, n_draws, rng, innov=None):
    """Monte Carlo mean and standard error of ``V(F(y, eps))``."""
    innov = innov or GAUSSIAN
    eps = innov.draw(rng, n_draws, m.d)
    vals = _V_after_step(m, cert, y, step_many(m, y, eps))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_draws))


def _V_after_step(m, cert, y, x_new):
    # the sigma part of the next state does not depend on eps
    p, q = m.p, m.q
    Vm = cert.V_mats
    Sn = next_sigma(m, y)
    base = 1.0 + float(np.trace(Vm[0] @ Sn))
    for k in range(2, p + 1):
        base += float(np.trace(Vm[k - 1] @ y.sigma(k - 2)))
    for k in range(2, q + 1):
        x = y.x_blocks[k - 2]
        base += float(x @ Vm[p + k - 1] @ x)
    return base + np.einsum("ni,ij,nj->n", x_new, Vm[p], x_new)


def random_states(m, n, rng, scale_range=(1e-2, 1e3), min_eig=None):
    """
    Random states in ``U`` with log-uniform scales.

    With ``min_eig`` set, the smallest eigenvalue of every sigma block is
    replaced by ``min_eig`` times the largest one (near-boundary stress
    states; for ``d = 1`` the block itself is scaled down by ``min_eig``).
    """
    d, p, q = m.d, m.p, m.q
    lo, hi = np.log(scale_range[0]), np.log(scale_range[1])
    out = []
    for _ in range(n):
        sig = []
        for _ in range(p):
            G = rng.standard_normal((d, d))
            w = np.exp(rng.uniform(lo, hi, size=d))
            Q, _ = np.linalg.qr(G)
            if min_eig is not None:
                w[np.argmin(w)] = min_eig * w.max()
            sig.append(matcore.symmetrize((Q * w) @ Q.T))
        xs = rng.standard_normal((q, d)) * np.exp(rng.uniform(lo, hi, size=(q, 1)) / 2)
        out.append(ChainState.from_matrices(sig, xs))
    return out


@dataclass
class DriftReport:
    n_states: int
    violations: int
    worst_slack: float  # min over states of (rhs - lhs) / rhs
    witness: dict = None
    n_outside_K: int = 0
    mc: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.violations == 0

    def to_dict(self):
        return {
            "ok": self.ok,
            "n_states": self.n_states,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
            "n_outside_K": self.n_outside_K,
            "witness": self.witness,
            "mc": self.mc,
            "config": self.config,
        }


def _check_state(m, cert, y, rtol):
    lhs = conditional_drift(m, cert, y)
    V = evaluate_V(cert, y)
    inside = V <= cert.K_level
    rhs = cert.alpha * V + (cert.b if inside else 0.0)
    slack = (rhs - lhs) / rhs
    return slack, slack < -rtol, inside, lhs, rhs


def verify_drift(
    m,
    cert,
    n_path_states=1000,
    n_random_states=200,
    n_boundary_states=50,
    seed=0,
    mc_states=0,
    mc_draws=100_000,
    mc_sigmas=3.0,
    threads=1,
    rtol=1e-12,
    raise_on_failure=False,
):
    """
    Check ``E[V | y] <= alpha V(y) + b 1{V(y) <= K_level}`` on sampled states.

    States come from a simulated path started at the attracting point, from
    random PD states and from near-singular PD states.  Optionally the
    analytic drift is compared with a Monte Carlo mean at ``mc_states`` of
    them; each such comparison uses its own child seed.
    """
    ss = np.random.SeedSequence(seed)
    s_path, s_rand, s_mc = ss.spawn(3)
    states = []
    if n_path_states:
        traj = run(m, attracting_point(m), n_path_states, burn_in=0, seed=s_path)
        states += [traj.state_at(t) for t in range(1, traj.n_steps + 1)]
    rng = np.random.default_rng(s_rand)
    states += random_states(m, n_random_states, rng)
    states += random_states(m, n_boundary_states, rng, min_eig=1e-6)

    violations = 0
    worst = np.inf
    witness = None
    outside = 0
    for y in states:
        slack, bad, inside, lhs, rhs = _check_state(m, cert, y, rtol)
        outside += not inside
        if bad:
            violations += 1
        if slack < worst:
            worst = slack
            witness = {"state": y.to_dict(), "drift": lhs, "bound": rhs, "inside_K": bool(inside)}

    mc = {}
    if mc_states:
        picks = states[:: max(1, len(states) // mc_states)][:mc_states]
        seeds = s_mc.spawn(len(picks))

        def one(args):
            y, sd = args
            mean, se = monte_carlo_drift(m, cert, y, mc_draws, np.random.default_rng(sd))
            exact = conditional_drift(m, cert, y)
            return abs(mean - exact) / se if se > 0 else abs(mean - exact)

        with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
            z = list(ex.map(one, zip(picks, seeds)))
        mc = {
            "n_states": len(picks),
            "draws": mc_draws,
            "max_abs_z": float(max(z)),
            "sigmas": mc_sigmas,
            "within": bool(max(z) <= mc_sigmas),
        }

    report = DriftReport(
        n_states=len(states),
        violations=violations,
        worst_slack=float(worst),
        witness=witness,
        n_outside_K=outside,
        mc=mc,
        config={
            "n_path_states": n_path_states,
            "n_random_states": n_random_states,
            "n_boundary_states": n_boundary_states,
            "seed": seed if isinstance(seed, (int, type(None))) else str(seed),
            "rtol": rtol,
        },
    )
    if raise_on_failure and not report.ok:
        raise CertificateFailure(f"{violations} drift violations", witness)
    return report
