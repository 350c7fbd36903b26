"""
Empirical checks of ergodicity, stationary moments and state-space dimension.

The distances used by :func:`convergence_probe` are sample proxies.  Total
variation between the n-step law and the stationary law cannot be estimated
from samples of continuous coordinates, so the probe uses the energy distance
(or per-coordinate Kolmogorov-Smirnov statistics) on standardized
coordinates.  Coordinates that are constant under the stationary law are an
exception: for those total variation is exact, it is 1 when the chain sits
on a different atom and 0 otherwise.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from . import matcore
from .exceptions import DomainError
from .model import model_hash
from .simulate import GAUSSIAN, offstate_probe, resolve_start, run_ensemble
from .stationarity import attracting_point, rho_AB, stationary_covariance

__all__ = [
    "ConvergenceReport",
    "OrbitDimensionReport",
    "MomentReport",
    "MIN_CHAINS",
    "energy_distance",
    "convergence_probe",
    "orbit_dimension",
    "moment_check",
    "moment_check_arrays",
    "batch_means",
]

MIN_CHAINS = 100
METRICS = ("energy", "ks")


# -- distances ------------------------------------------------------------------

def energy_distance(X, Y, YY=None):
    """
    Energy distance ``sqrt(2 E|X-Y| - E|X-X'| - E|Y-Y'|)`` between two samples.

    V-statistic version, so it is non-negative and symmetric.  ``YY`` may hold
    a precomputed ``E|Y-Y'|``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    xy = cdist(X, Y).mean()
    xx = cdist(X, X).mean()
    yy = cdist(Y, Y).mean() if YY is None else YY
    return math.sqrt(max(2.0 * xy - xx - yy, 0.0))


def _coord_distance(u, v, metric):
    if metric == "ks":
        return float(stats.ks_2samp(u, v).statistic)
    return float(stats.energy_distance(u, v))


def _atom_tv(values, atom):
    """Mass of ``values`` away from the atom ``atom`` (exact TV to a point mass)."""
    tol = 1e-9 * (1.0 + abs(atom))
    return float(np.mean(np.abs(values - atom) > tol))


# -- convergence probe ------------------------------------------------------------

@dataclass(eq=False)
class ConvergenceReport:
    """
    Distance between ensemble marginals at lags ``1..horizon`` and a
    reference sample of the stationary law.

    ``distance_curve[s, t-1]`` is the distance at lag ``t`` for start ``s``
    over the non-atomic coordinates; ``per_coordinate`` splits it by
    coordinate, with exact total variation on atomic coordinates.
    """

    starts: list
    horizon: int
    chains_per_start: int
    metric: str
    distance_curve: np.ndarray  # (n_starts, horizon)
    per_coordinate: np.ndarray  # (n_starts, horizon, state_dim)
    coordinate_labels: list
    atomic: list  # state indices that are constant under the reference law
    noise_floor: float
    noise_floor_per_coordinate: np.ndarray
    fits: list  # per start
    off_state: list  # offstate_probe dict per start
    config: dict = field(default_factory=dict)

    @property
    def lags(self):
        return np.arange(1, self.horizon + 1)

    @property
    def fitted_rate(self):
        """Rate of the first start, with its confidence band (or None)."""
        return self.fits[0] if self.fits else None

    def to_dict(self):
        return {
            "starts": [s.to_dict() for s in self.starts],
            "horizon": self.horizon,
            "chains_per_start": self.chains_per_start,
            "metric": self.metric,
            "lags": self.lags.tolist(),
            "distance_curve": self.distance_curve.tolist(),
            "per_coordinate": self.per_coordinate.tolist(),
            "coordinate_labels": self.coordinate_labels,
            "atomic": self.atomic,
            "noise_floor": self.noise_floor,
            "noise_floor_per_coordinate": self.noise_floor_per_coordinate.tolist(),
            "fits": self.fits,
            "off_state": self.off_state,
            "config": self.config,
        }

    def to_csv(self, path=None):
        """Long-format ``lag,start,distance`` rows; returns the text if ``path`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lag", "start", "distance"])
        for s in range(len(self.starts)):
            for t, dist in zip(self.lags, self.distance_curve[s]):
                w.writerow([int(t), s, repr(float(dist))])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None


def state_labels(m):
    """Names of the state coordinates, e.g. ``sigma[0][1,0]`` or ``x[1][0]``."""
    rows, cols = matcore._lower_indices(m.d)
    out = [f"sigma[{j}][{r},{c}]" for j in range(m.p) for r, c in zip(rows, cols)]
    out += [f"x[{i}][{k}]" for i in range(m.q) for k in range(m.d)]
    return out


def _fit_decay(curve, floor, min_points=3):
    """Least-squares fit of ``log d_t`` against ``t`` before the curve reaches the floor."""
    lags = np.arange(1, len(curve) + 1)
    below = np.nonzero(curve <= floor)[0]
    end = int(below[0]) if below.size else len(curve)
    if end < min_points:
        return {"ok": False, "reason": f"only {end} lags above the noise floor", "fit_range": [1, end]}
    t, y = lags[:end], np.log(curve[:end])
    res = stats.linregress(t, y)
    tq = stats.t.ppf(0.975, end - 2) if end > 2 else np.inf
    lo, hi = res.slope - tq * res.stderr, res.slope + tq * res.stderr
    return {
        "ok": True,
        "fit_range": [1, end],
        "slope": float(res.slope),
        "intercept": float(res.intercept),
        "r2": float(res.rvalue**2),
        "rate": float(np.exp(res.slope)),
        "rate_ci95": [float(np.exp(lo)), float(np.exp(hi))],
    }


def _default_reference_lag(m, horizon):
    r = rho_AB(m)
    memory = math.ceil(math.log(1e-8) / math.log(r)) if 0.0 < r < 1.0 else 0
    return max(4 * horizon, memory, 200)


def convergence_probe(m, starts=("attracting_point",), chains_per_start=200, horizon=100,
                      seed=0, metric="energy", n_reference=1000, reference_lag=None,
                      n_null=8, innov=GAUSSIAN, threads=1):
    """
    Per-lag distance between the law of ``Y_t`` started at each entry of
    ``starts`` and a reference sample from the stationary law.

    The reference consists of ``n_reference`` chains run from ``T`` for
    ``reference_lag`` steps.  The noise floor is the mean plus two standard
    deviations of the same distance computed between the reference and
    ``n_null`` further near-stationary samples of size ``chains_per_start``.
    A log-linear fit over the lags above the floor gives the decay rate; it is
    a property of the proxy distance and is not claimed to equal the
    theoretical ergodicity rate.

    Starts off the state-space variety are allowed; they are flagged in
    ``off_state`` and their atomic coordinates carry exact total variation.
    """
    if metric not in METRICS:
        raise DomainError(f"metric must be one of {METRICS}, got {metric!r}")
    if chains_per_start < MIN_CHAINS:
        raise DomainError(
            f"chains_per_start={chains_per_start} is too small for a distributional comparison; "
            f"use at least {MIN_CHAINS} (a few hundred is better)"
        )
    r = rho_AB(m)
    if r >= 1.0:
        raise DomainError(f"convergence_probe needs a stationary model, rho_AB = {r:.6g}")
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    starts = [resolve_start(m, s) for s in starts]
    if reference_lag is None:
        reference_lag = _default_reference_lag(m, horizon)
    children = np.random.SeedSequence(seed).spawn(len(starts) + 1)

    # reference plus null samples, all from T
    T = attracting_point(m)
    gap = max(1, reference_lag // (2 * n_null))
    null_lags = [reference_lag - k * gap for k in range(n_null)]
    n_ref_total = n_reference + chains_per_start
    ref_all = run_ensemble(m, [T] * n_ref_total, reference_lag, seed=children[-1], innov=innov,
                           threads=threads, lags=null_lags)
    ref_all = ref_all[~np.isnan(ref_all).any(axis=(1, 2))]
    ref = ref_all[:n_reference, 0]
    nulls = [ref_all[n_reference:, k] for k in range(n_null)]

    mean = ref.mean(axis=0)
    std = ref.std(axis=0)
    atomic = [int(i) for i in np.nonzero(std <= 1e-12 * (1.0 + np.abs(mean)))[0]]
    free = [i for i in range(m.state_dim) if i not in atomic]
    scale = np.where(std > 0, std, 1.0)

    def standardize(a):
        return (a[:, free] - mean[free]) / scale[free]

    ref_z = standardize(ref)
    ref_self = cdist(ref_z, ref_z).mean() if metric == "energy" and free else None

    def joint(sample_z):
        if not free:
            return 0.0
        if metric == "ks":
            return max(_coord_distance(sample_z[:, k], ref_z[:, k], "ks") for k in range(len(free)))
        return energy_distance(sample_z, ref_z, YY=ref_self)

    def per_coord(sample):
        out = np.empty(m.state_dim)
        for i in range(m.state_dim):
            if i in atomic:
                out[i] = _atom_tv(sample[:, i], mean[i])
            else:
                out[i] = _coord_distance((sample[:, i] - mean[i]) / scale[i],
                                         (ref[:, i] - mean[i]) / scale[i], metric)
        return out

    null_joint = np.array([joint(standardize(nz)) for nz in nulls])
    null_coord = np.array([per_coord(nz) for nz in nulls])
    sd = null_joint.std(ddof=1) if n_null > 1 else 0.0
    floor = float(null_joint.mean() + 2.0 * sd)
    floor_coord = null_coord.mean(axis=0) + 2.0 * (null_coord.std(axis=0, ddof=1) if n_null > 1 else 0.0)

    curves = np.empty((len(starts), horizon))
    coords = np.empty((len(starts), horizon, m.state_dim))
    fits, off = [], []
    h = m.h
    for s, y0 in enumerate(starts):
        probe = offstate_probe(m, y0, horizon=horizon)
        off.append(probe.to_dict())
        ens = run_ensemble(m, [y0] * chains_per_start, horizon, seed=children[s], innov=innov,
                           threads=threads, lags=np.arange(1, horizon + 1))
        ens = ens[~np.isnan(ens).any(axis=(1, 2))]
        if ens.shape[0] < MIN_CHAINS:
            raise DomainError(f"only {ens.shape[0]} chains from start {s} stayed finite")
        # decoupled sigma coordinates: exact offsets instead of float comparisons
        exact = {j * h + c: (j, k) for j in range(m.p) for k, c in enumerate(probe.vech_index)}
        for t in range(1, horizon + 1):
            sample = ens[:, t - 1]
            curves[s, t - 1] = joint(standardize(sample))
            row = per_coord(sample)
            for idx, (j, k) in exact.items():
                if idx in atomic:
                    row[idx] = float(probe.off_at(t, j)[k])
            coords[s, t - 1] = row
        fits.append(_fit_decay(curves[s], floor))

    return ConvergenceReport(
        starts=starts,
        horizon=horizon,
        chains_per_start=chains_per_start,
        metric=metric,
        distance_curve=curves,
        per_coordinate=coords,
        coordinate_labels=state_labels(m),
        atomic=atomic,
        noise_floor=floor,
        noise_floor_per_coordinate=floor_coord,
        fits=fits,
        off_state=off,
        config={
            "seed": seed,
            "n_reference": int(ref.shape[0]),
            "reference_lag": int(reference_lag),
            "n_null": n_null,
            "null_lags": null_lags,
            "innovation": innov.to_dict(),
            "standardization": "reference mean and standard deviation",
        },
    )


# -- orbit dimension --------------------------------------------------------------

@dataclass(eq=False)
class OrbitDimensionReport:
    ambient_dim: int
    linear_rank: int
    quadratic_rank: int
    feature_dim: int
    degenerate: bool
    singular_values: np.ndarray
    quadratic_singular_values: np.ndarray
    constant_coordinates: list
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "ambient_dim": self.ambient_dim,
            "linear_rank": self.linear_rank,
            "quadratic_rank": self.quadratic_rank,
            "feature_dim": self.feature_dim,
            "degenerate": self.degenerate,
            "singular_values": self.singular_values.tolist(),
            "quadratic_singular_values": self.quadratic_singular_values.tolist(),
            "constant_coordinates": self.constant_coordinates,
            "config": self.config,
        }


def _numerical_rank(M, rtol):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.sum(s > s[0] * rtol)), s


def quadratic_features(Z):
    """All monomials of degree 1 and 2 in the columns of ``Z``."""
    n, k = Z.shape
    i, j = np.triu_indices(k)
    return np.hstack([Z, Z[:, i] * Z[:, j]])


def orbit_dimension(m, n_samples=200, depth=20, seed=0, rank_rtol=1e-8, threads=1):
    """
    Numerical dimension of the forward orbit of ``T``.

    Collects ``F^k(T, eps_1..eps_k)`` for ``k = 1..depth`` over ``n_samples``
    independent noise sequences, centres the point cloud and counts singular
    values above ``sigma_max * rank_rtol * ambient_dim``, both in the raw
    coordinates and in all monomials of degree at most two (after
    standardizing each coordinate).
    """
    T = attracting_point(m)
    ens = run_ensemble(m, [T] * n_samples, depth, seed=seed, threads=threads,
                       lags=np.arange(1, depth + 1))
    pts = ens.reshape(-1, m.state_dim)
    pts = pts[np.isfinite(pts).all(axis=1)]
    ambient = m.state_dim
    rtol = rank_rtol * ambient

    centred = pts - pts.mean(axis=0)
    lin, s_lin = _numerical_rank(centred, rtol)

    std = pts.std(axis=0)
    const = [int(i) for i in np.nonzero(std <= 1e-12 * (1.0 + np.abs(pts.mean(axis=0))))[0]]
    Z = centred / np.where(std > 0, std, 1.0)
    F = quadratic_features(Z)
    Fs = F.std(axis=0)
    F = (F - F.mean(axis=0)) / np.where(Fs > 0, Fs, 1.0)
    quad, s_quad = _numerical_rank(F, rtol)

    return OrbitDimensionReport(
        ambient_dim=ambient,
        linear_rank=lin,
        quadratic_rank=quad,
        feature_dim=F.shape[1],
        degenerate=lin < ambient,
        singular_values=s_lin,
        quadratic_singular_values=s_quad,
        constant_coordinates=const,
        config={"n_samples": n_samples, "depth": depth, "seed": seed, "rank_rtol": rank_rtol,
                "threshold": "sigma_max * rank_rtol * ambient_dim", "n_points": int(pts.shape[0])},
    )


# -- stationary moments -------------------------------------------------------------

def batch_means(series, batch_length=None):
    """
    Mean and batch-means standard error of each column of ``series``.

    Returns ``(mean, se, batch_length, n_batches)``; the default batch length
    is ``floor(sqrt(n))``.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    n = series.shape[0]
    b = batch_length or max(1, math.isqrt(n))
    nb = n // b
    if nb < 2:
        raise DomainError(f"need at least two batches, got n={n}, batch length {b}")
    means = series[: nb * b].reshape(nb, b, -1).mean(axis=1)
    se = means.std(axis=0, ddof=1) / math.sqrt(nb)
    return series.mean(axis=0), se, b, nb


def _z(diff, se, scale, n):
    # the standard error is floored at the rounding error of an n-term sum so
    # that coordinates that are constant in exact arithmetic do not blow up
    floor = 4.0 * n * np.finfo(float).eps * (1.0 + np.abs(scale))
    return diff / np.maximum(se, floor)


@dataclass(eq=False)
class MomentReport:
    n: int
    batch_length: int
    n_batches: int
    target: np.ndarray  # vech of the stationary covariance
    mean_xx: np.ndarray
    mean_sigma: np.ndarray
    se_xx: np.ndarray
    se_sigma: np.ndarray
    z_xx: np.ndarray
    z_sigma: np.ndarray
    z_tower: np.ndarray  # mean(XX') - mean(Sigma)
    z_crit: float = 3.0

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(np.concatenate([self.z_xx, self.z_sigma, self.z_tower]))))

    @property
    def ok(self):
        return self.max_abs_z <= self.z_crit

    def to_dict(self):
        def mat(v):
            return matcore.unvech(np.asarray(v)).tolist()

        return {
            "ok": self.ok,
            "n": self.n,
            "batch_length": self.batch_length,
            "n_batches": self.n_batches,
            "z_crit": self.z_crit,
            "max_abs_z": self.max_abs_z,
            "Sigma": mat(self.target),
            "mean_XXt": mat(self.mean_xx),
            "mean_Sigma": mat(self.mean_sigma),
            "se_XXt": mat(self.se_xx),
            "se_Sigma": mat(self.se_sigma),
            "z_XXt": mat(self.z_xx),
            "z_Sigma": mat(self.z_sigma),
            "z_XXt_minus_Sigma": mat(self.z_tower),
        }


def moment_check_arrays(xs, vech_sigmas, Sigma, batch_length=None, z_crit=3.0):
    """Batch-means z-scores of ``XX'`` and ``Sigma_n`` time averages against ``Sigma``."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vech_sigmas, dtype=float)
    d = xs.shape[1]
    rows, cols = matcore._lower_indices(d)
    xx = xs[:, rows] * xs[:, cols]
    target = matcore.vech(np.asarray(Sigma, dtype=float))
    mx, sx, b, nb = batch_means(xx, batch_length)
    ms, ss, _, _ = batch_means(vs, b)
    md, sdiff, _, _ = batch_means(xx - vs, b)
    return MomentReport(
        n=xs.shape[0],
        batch_length=b,
        n_batches=nb,
        target=target,
        mean_xx=mx,
        mean_sigma=ms,
        se_xx=sx,
        se_sigma=ss,
        z_xx=_z(mx - target, sx, target, xs.shape[0]),
        z_sigma=_z(ms - target, ss, target, xs.shape[0]),
        z_tower=_z(md, sdiff, target, xs.shape[0]),
        z_crit=z_crit,
    )


def moment_check(traj, m, batch_length=None, z_crit=3.0):
    """
    Compare post-burn-in time averages of ``X X'`` and ``Sigma_n`` with the
    stationary covariance of ``m``.
    """
    if traj.diverged:
        raise DomainError("trajectory diverged; stationary moments do not apply")
    if traj.model_hash != model_hash(m):
        raise DomainError("trajectory was generated from a different model")
    vs, xs = traj.post_burn_in()
    return moment_check_arrays(xs, vs, stationary_covariance(m), batch_length, z_crit)
