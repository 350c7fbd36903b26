"""
Simulation of the BEKK Markov chain ``Y_n = F(Y_{n-1}, eps_n)``.

``X_n = G(Sigma_n) eps_n`` where ``G`` is the unique PSD square root by
default; a Cholesky factor can be selected for cross-checks.  Random streams
come from numpy's ``SeedSequence``/``PCG64`` so independent chains get
independent child streams.
"""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import _kernels, matcore
from .exceptions import DimensionError, DomainError
from .model import model_hash
from .state import ChainState
from .stationarity import arch_infinity_coeffs, attracting_point, rho_AB, rho_B

__all__ = [
    "InnovationSpec",
    "GAUSSIAN",
    "parse_innovation",
    "Trajectory",
    "next_sigma",
    "step",
    "step_many",
    "run",
    "run_ensemble",
    "resolve_start",
    "OffStateReport",
    "offstate_probe",
    "RNG_ALGORITHM",
    "DIVERGENCE_FACTOR",
]

RNG_ALGORITHM = "PCG64"
DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class InnovationSpec:
    """
    Law of the innovations, normalised to mean zero and identity covariance.

    ``kind`` is ``"gaussian"``, ``"student_t"`` (multivariate t with ``dof > 2``
    degrees of freedom, rescaled by ``sqrt((dof-2)/dof)``) or ``"custom"``.  A
    custom law supplies ``sampler(rng, n, d) -> (n, d) array`` and is trusted
    to be normalised.
    """

    kind: str = "gaussian"
    dof: Optional[float] = None
    sampler: Optional[Callable] = field(default=None, compare=False)
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t", "custom"):
            raise DomainError(f"unknown innovation kind {self.kind!r}")
        if self.kind == "student_t" and (self.dof is None or self.dof <= 2):
            raise DomainError("student_t innovations need dof > 2 for finite variance")
        if self.kind == "custom" and self.sampler is None:
            raise DomainError("custom innovations need a sampler")

    @property
    def scaling(self):
        if self.kind == "student_t":
            return float(np.sqrt((self.dof - 2.0) / self.dof))
        return 1.0

    def draw(self, rng, n, d):
        if self.kind == "gaussian":
            return rng.standard_normal((n, d))
        if self.kind == "student_t":
            z = rng.standard_normal((n, d))
            w = rng.chisquare(self.dof, size=(n, 1))
            return z * np.sqrt(self.dof / w) * self.scaling
        eps = np.asarray(self.sampler(rng, n, d), dtype=float)
        if eps.shape != (n, d):
            raise DimensionError(f"custom sampler returned shape {eps.shape}, expected {(n, d)}")
        return eps

    def to_dict(self):
        out = {"kind": self.kind, "scaling": self.scaling}
        if self.dof is not None:
            out["dof"] = self.dof
        if self.name:
            out["name"] = self.name
        return out


GAUSSIAN = InnovationSpec()


def parse_innovation(text):
    """``"gaussian"`` or ``"t:<dof>"``."""
    text = text.strip().lower()
    if text in ("gaussian", "normal", "n"):
        return GAUSSIAN
    if text.startswith("t:"):
        return InnovationSpec("student_t", dof=float(text[2:]))
    raise DomainError(f"cannot parse innovation spec {text!r}")


# -- single steps (reference implementation) ----------------------------------

def _root(S, sqrt_mode):
    if sqrt_mode == "psd":
        return matcore.psd_sqrt(S)
    if sqrt_mode == "cholesky":
        return np.linalg.cholesky(S)
    raise DomainError(f"unknown sqrt_mode {sqrt_mode!r}")


def next_sigma(m, y):
    """``Sigma_n`` implied by the lags stored in ``y = Y_{n-1}`` (BEKK form)."""
    S = np.array(m.C)
    for i, lag in enumerate(m.A):
        xx = np.outer(y.x_blocks[i], y.x_blocks[i])
        for F in lag:
            S = S + F @ xx @ F.T
    for j, lag in enumerate(m.B):
        Sj = y.sigma(j)
        for F in lag:
            S = S + F @ Sj @ F.T
    return matcore.symmetrize(S)


def step(m, y, eps, sqrt_mode="psd"):
    """
    One transition of the chain.

    Builds ``Sigma_new`` from the stored lags in BEKK form, sets
    ``X_new = Sigma_new^{1/2} eps`` and shifts every block by one lag.
    """
    y.check_model(m)
    y.require_U()
    eps = np.asarray(eps, dtype=float).reshape(m.d)
    S = next_sigma(m, y)
    x = _root(S, sqrt_mode) @ eps
    sig = np.vstack([matcore.vech(S)[None], y.sigma_blocks[:-1]])
    xs = np.vstack([x[None], y.x_blocks[:-1]])
    return ChainState(sig, xs)


def step_many(m, y, eps, sqrt_mode="psd"):
    """New observations ``X_new`` for a batch of innovations ``eps`` (n, d)."""
    y.check_model(m)
    y.require_U()
    R = _root(next_sigma(m, y), sqrt_mode)
    return np.asarray(eps, dtype=float) @ R.T


# -- trajectories ---------------------------------------------------------------

@dataclass(eq=False)
class Trajectory:
    """
    Output of :func:`run`.

    Row ``k`` of ``vech_sigmas`` / ``xs`` holds time ``t0 + k``.  Times
    ``1..burn_in`` are burn-in; they are stored only when the run kept them
    (then ``t0 == 1``), otherwise ``t0 == burn_in + 1``.
    """

    model_hash: str
    seed: object
    start: ChainState
    n: int
    burn_in: int
    vech_sigmas: np.ndarray
    xs: np.ndarray
    t0: int
    diverged: bool = False
    n_steps: int = 0  # completed transitions, burn-in included
    innovation: dict = field(default_factory=dict)
    sqrt_mode: str = "psd"
    rng: str = RNG_ALGORITHM

    @property
    def d(self):
        return self.xs.shape[1]

    @property
    def sigmas(self):
        return np.array([matcore.unvech(v) for v in self.vech_sigmas])

    def post_burn_in(self):
        """``(vech_sigmas, xs)`` restricted to times after the burn-in."""
        k = max(0, self.burn_in + 1 - self.t0)
        return self.vech_sigmas[k:], self.xs[k:]

    def _sigma_at(self, t):
        if t <= 0:
            return self.start.sigma_blocks[-t]
        return self.vech_sigmas[t - self.t0]

    def _x_at(self, t):
        if t <= 0:
            return self.start.x_blocks[-t]
        return self.xs[t - self.t0]

    def state_at(self, t):
        """Full chain state ``Y_t``."""
        p, q = self.start.p, self.start.q
        earliest = t - max(p, q) + 1
        if t > self.n_steps or (earliest < self.t0 and earliest > 0) or (self.t0 > 1 and earliest <= 0):
            raise DomainError(f"state at time {t} is not available in this trajectory")
        return ChainState([self._sigma_at(t - j) for j in range(p)],
                          [self._x_at(t - i) for i in range(q)])

    def metadata(self):
        return {
            "model_hash": self.model_hash,
            "seed": self.seed,
            "rng": self.rng,
            "innovation": self.innovation,
            "sqrt_mode": self.sqrt_mode,
            "n": self.n,
            "burn_in": self.burn_in,
            "first_time": self.t0,
            "n_steps": self.n_steps,
            "diverged": self.diverged,
            "start": self.start.to_dict(),
        }


def resolve_start(m, start):
    if start is None or (isinstance(start, str) and start in ("attracting_point", "T")):
        return attracting_point(m)
    if not isinstance(start, ChainState):
        raise DomainError(f"unsupported start {start!r}")
    start.check_model(m)
    start.require_U()
    return start


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _seed_repr(ss, seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return {"entropy": str(ss.entropy), "spawn_key": list(ss.spawn_key)}


def _integrate(m, start, eps, sqrt_mode):
    rows, cols = matcore._lower_indices(m.d)
    N = eps.shape[0]
    out_sig = np.empty((N, m.h))
    out_x = np.empty((N, m.d))
    limit = DIVERGENCE_FACTOR * float(np.linalg.norm(m.C))
    done = _kernels.garch_path(
        matcore.vech(m.C).astype(float),
        np.ascontiguousarray(m.vech_form.A),
        np.ascontiguousarray(m.vech_form.B),
        np.array(start.sigma_blocks, dtype=float),
        np.array(start.x_blocks, dtype=float),
        np.ascontiguousarray(eps, dtype=float),
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
        _kernels.CHOLESKY if sqrt_mode == "cholesky" else _kernels.PSD,
        limit,
        out_sig,
        out_x,
    )
    return out_sig[:done], out_x[:done], done < N


def run(m, start="attracting_point", n=1000, burn_in=0, seed=None, innov=GAUSSIAN,
        sqrt_mode="psd", keep_burn_in=False, warn=True):
    """
    Simulate ``burn_in + n`` transitions from ``start``.

    Deterministic for a given ``(seed, innov, start, sqrt_mode)``.  Runs from
    models with ``rho_AB >= 1`` are allowed (with a warning); they stop early
    and are flagged ``diverged`` once ``||Sigma||_F`` exceeds
    ``1e12 * ||C||_F``.
    """
    if sqrt_mode not in ("psd", "cholesky"):
        raise DomainError(f"unknown sqrt_mode {sqrt_mode!r}")
    if warn and rho_AB(m) >= 1.0:
        warnings.warn("model violates rho_AB < 1; the chain has no stationary second moments",
                      RuntimeWarning, stacklevel=2)
    start = resolve_start(m, start)
    ss = _seed_sequence(seed)
    rng = np.random.Generator(np.random.PCG64(ss))
    eps = innov.draw(rng, burn_in + n, m.d)
    sig, xs, diverged = _integrate(m, start, eps, sqrt_mode)
    done = sig.shape[0]
    t0 = 1
    if not keep_burn_in:
        k = min(burn_in, done)
        sig, xs, t0 = sig[k:], xs[k:], burn_in + 1
    return Trajectory(
        model_hash=model_hash(m),
        seed=_seed_repr(ss, seed),
        start=start,
        n=n,
        burn_in=burn_in,
        vech_sigmas=sig,
        xs=xs,
        t0=t0,
        diverged=bool(diverged),
        n_steps=done,
        innovation=innov.to_dict(),
        sqrt_mode=sqrt_mode,
    )


def run_ensemble(m, starts, horizon, seed=None, innov=GAUSSIAN, sqrt_mode="psd", threads=1,
                 lags=None):
    """
    Independent chains, one per entry of ``starts``, each with its own child
    stream of ``seed``.

    Returns an array ``(n_chains, horizon + 1, state_dim)`` of full state
    vectors; index 0 along the time axis is the start.  With ``lags`` given
    only those times are returned, in that order.  Chains that diverge are
    filled with NaN.
    """
    starts = [resolve_start(m, s) for s in starts]
    children = _seed_sequence(seed).spawn(len(starts))
    lags = np.arange(horizon + 1) if lags is None else np.asarray(lags, dtype=int)
    if lags.size and (lags.min() < 0 or lags.max() > horizon):
        raise DomainError(f"lags must lie in [0, {horizon}]")
    out = np.empty((len(starts), len(lags), m.state_dim))
    p, q, h, d = m.p, m.q, m.h, m.d

    def one(c):
        y0 = starts[c]
        rng = np.random.Generator(np.random.PCG64(children[c]))
        eps = innov.draw(rng, horizon, d)
        sig, xs, diverged = _integrate(m, y0, eps, sqrt_mode)
        if diverged:
            out[c] = np.nan
            return
        # rows run oldest to newest; time t sits at row t + p - 1 (resp. q - 1)
        hist_s = np.vstack([y0.sigma_blocks[::-1], sig])
        hist_x = np.vstack([y0.x_blocks[::-1], xs])
        for k, t in enumerate(lags):
            out[c, k, :p * h] = hist_s[t:t + p][::-1].ravel()
            out[c, k, p * h:] = hist_x[t:t + q][::-1].ravel()

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        list(ex.map(one, range(len(starts))))
    return out


# -- off-manifold starts --------------------------------------------------------

@dataclass
class OffStateReport:
    """
    Coordinates of the sigma blocks that follow a noise-free affine recursion.

    On the state-space variety each such coordinate is frozen at its fixed
    value.  A start that disagrees keeps a non-zero offset; ``offsets`` holds
    the offset recursion over the probed horizon for each lag-0 coordinate as
    floats (these may underflow to zero; ``offset_nonzero`` is the exact
    record).
    """

    coords: list  # (row, col) labels of the decoupled vech entries
    vech_index: list
    fixed_values: list
    fixed_values_exact: list
    start_values: list  # per sigma lag, per coordinate
    on_manifold: bool
    persistent: list  # per coordinate: offset never vanished within horizon
    first_zero_step: list  # per coordinate: first n >= 0 with zero offset, or None
    horizon: int
    k_rows_zero: bool
    offsets: list = field(default_factory=list, repr=False)
    offset_nonzero: Optional[np.ndarray] = field(default=None, repr=False)  # (horizon+1, n)
    start_nonzero: Optional[np.ndarray] = field(default=None, repr=False)  # (p, n)

    def off_at(self, t, lag=0):
        """Exact test of a non-zero offset in sigma block ``lag`` of ``Y_t``."""
        k = t - lag
        if k >= 0:
            return self.offset_nonzero[k]
        return self.start_nonzero[-k]

    @property
    def flagged(self):
        return not self.on_manifold

    def to_dict(self):
        return {
            "flagged": self.flagged,
            "on_manifold": self.on_manifold,
            "coords": [list(c) for c in self.coords],
            "vech_index": self.vech_index,
            "fixed_values": self.fixed_values,
            "fixed_values_exact": [str(f) for f in self.fixed_values_exact],
            "start_values": self.start_values,
            "persistent": self.persistent,
            "first_zero_step": self.first_zero_step,
            "horizon": self.horizon,
            "k_rows_zero": self.k_rows_zero,
        }


def decoupled_coordinates(m):
    """
    Largest set ``S`` of vech coordinates with ``A_i[S, :] = 0`` for every ARCH
    lag and ``B_j[S, not S] = 0`` for every GARCH lag.
    """
    A, B = m.vech_form.A, m.vech_form.B
    S = {c for c in range(m.h) if all(not np.any(Ai[c]) for Ai in A)}
    changed = True
    while changed:
        changed = False
        outside = [c for c in range(m.h) if c not in S]
        for c in sorted(S):
            if any(np.any(Bj[c, outside]) for Bj in B):
                S.discard(c)
                changed = True
    return sorted(S)


def _solve_exact(M, rhs):
    """Gaussian elimination over the rationals."""
    n = len(rhs)
    a = [list(row) + [r] for row, r in zip(M, rhs)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        pv = a[col][col]
        a[col] = [v / pv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


ROUNDING_ULPS = 8


def _is_rounding_of(x, exact):
    """True iff the float ``x`` (as a Fraction) lies within a few ulps of ``exact``."""
    return abs(x - exact) <= ROUNDING_ULPS * Fraction(np.spacing(abs(float(exact))))


def offstate_probe(m, start="attracting_point", horizon=10_000):
    """
    Detect noise-free coordinates and test whether ``start`` agrees with them.

    The offset of a decoupled coordinate from its fixed value obeys a linear
    recursion driven only by the GARCH matrices; it is iterated in exact
    rational arithmetic so that "never equal to the fixed value" is decided
    without rounding.
    """
    if rho_B(m) >= 1.0:
        raise DomainError("offstate_probe needs rho_B < 1")
    start = resolve_start(m, start)
    S = decoupled_coordinates(m)
    rows, cols = matcore._lower_indices(m.d)
    K = arch_infinity_coeffs(m, n=max(4 * m.p * m.h + m.q, 16)).K
    k_rows_zero = bool(all(not np.any(K[:, c, :]) for c in S))
    if not S:
        return OffStateReport([], [], [], [], [], True, [], [], horizon, k_rows_zero,
                              offset_nonzero=np.zeros((horizon + 1, 0), dtype=bool),
                              start_nonzero=np.zeros((m.p, 0), dtype=bool))

    Bss = [[[Fraction(float(Bj[r, c])) for c in S] for r in S] for Bj in m.vech_form.B]
    cS = [Fraction(float(matcore.vech(m.C)[c])) for c in S]
    n = len(S)
    total = [[sum((Bj[r][c] for Bj in Bss), Fraction(0)) for c in range(n)] for r in range(n)]
    lhs = [[(1 if r == c else 0) - total[r][c] for c in range(n)] for r in range(n)]
    fixed = _solve_exact(lhs, cS)

    start_vals = [[Fraction(float(start.sigma_blocks[j, c])) for c in S] for j in range(m.p)]
    # a float start within rounding of the fixed value is taken to sit exactly
    # on it (the float solve cannot do better); anything further away is a
    # genuine offset
    dev = [[Fraction(0) if _is_rounding_of(sv, fv) else sv - fv for sv, fv in zip(lag, fixed)]
           for lag in start_vals]
    on_manifold = all(v == 0 for lag in dev for v in lag)
    dev0 = list(dev[0])
    start_nonzero = [[v != 0 for v in lag] for lag in dev]

    first_zero = [0 if v == 0 else None for v in dev0]
    offsets = [[float(v) for v in dev[0]]]
    nonzero = [[v != 0 for v in dev[0]]]
    for step_n in range(1, horizon + 1):
        if all(v == 0 for lag in dev for v in lag):
            offsets.extend([[0.0] * n] * (horizon + 1 - step_n))
            nonzero.extend([[False] * n] * (horizon + 1 - step_n))
            break
        new = [sum((Bss[j][r][c] * dev[j][c] for j in range(m.p) for c in range(n)), Fraction(0))
               for r in range(n)]
        dev = [new] + dev[:-1]
        offsets.append([float(v) for v in new])
        nonzero.append([v != 0 for v in new])
        for r in range(n):
            if first_zero[r] is None and new[r] == 0:
                first_zero[r] = step_n

    return OffStateReport(
        coords=[(int(rows[c]), int(cols[c])) for c in S],
        vech_index=list(S),
        fixed_values=[float(f) for f in fixed],
        fixed_values_exact=fixed,
        start_values=[[float(v) for v in lag] for lag in start_vals],
        on_manifold=on_manifold,
        persistent=[d0 != 0 and fz is None for d0, fz in zip(dev0, first_zero)],
        first_zero_step=first_zero,
        horizon=horizon,
        k_rows_zero=k_rows_zero,
        offsets=offsets,
        offset_nonzero=np.array(nonzero, dtype=bool),
        start_nonzero=np.array(start_nonzero, dtype=bool),
    )
