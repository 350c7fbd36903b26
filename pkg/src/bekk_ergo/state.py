"""Markov state of a BEKK GARCH(p, q) process."""
from dataclasses import dataclass

import numpy as np

from . import matcore
from .exceptions import DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class ChainState:
    """
    ``Y_n = (vech(Sigma_n), ..., vech(Sigma_{n-p+1}), X_n, ..., X_{n-q+1})``.

    Attributes
    ----------
    sigma_blocks : ndarray, (p, d(d+1)/2)
        Half-vectorised conditional covariances, most recent first.
    x_blocks : ndarray, (q, d)
        Observations, most recent first.
    """

    sigma_blocks: np.ndarray
    x_blocks: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigma_blocks, dtype=float, ndmin=2)
        x = np.array(self.x_blocks, dtype=float, ndmin=2)
        if s.ndim != 2 or x.ndim != 2:
            raise DimensionError("sigma_blocks and x_blocks must be 2-d")
        d = matcore.vech_dim(s.shape[1])
        if x.shape[1] != d:
            raise DimensionError(f"x blocks have length {x.shape[1]}, expected {d}")
        s.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "sigma_blocks", s)
        object.__setattr__(self, "x_blocks", x)

    @property
    def d(self):
        return self.x_blocks.shape[1]

    @property
    def p(self):
        return self.sigma_blocks.shape[0]

    @property
    def q(self):
        return self.x_blocks.shape[0]

    @property
    def dim(self):
        return self.sigma_blocks.size + self.x_blocks.size

    def sigma(self, lag=0):
        """Covariance matrix of the ``lag``-th sigma block."""
        return matcore.unvech(self.sigma_blocks[lag])

    def sigmas(self):
        return [self.sigma(j) for j in range(self.p)]

    def to_vector(self):
        return np.concatenate([self.sigma_blocks.ravel(), self.x_blocks.ravel()])

    @classmethod
    def from_vector(cls, vec, d, p, q):
        vec = np.asarray(vec, dtype=float)
        h = matcore.vech_length(d)
        if vec.shape != (p * h + q * d,):
            raise DimensionError(f"state vector has shape {vec.shape}, expected ({p * h + q * d},)")
        return cls(vec[:p * h].reshape(p, h), vec[p * h:].reshape(q, d))

    @classmethod
    def from_matrices(cls, sigmas, xs):
        return cls([matcore.vech(np.asarray(S, dtype=float)) for S in sigmas], xs)

    def scaled(self, t):
        return ChainState(self.sigma_blocks * t, self.x_blocks * t)

    def in_U(self, tol=None):
        """True iff every sigma block is positive definite."""
        return all(matcore.is_positive_definite(S, tol) for S in self.sigmas())

    def require_U(self):
        for j, S in enumerate(self.sigmas()):
            if not matcore.is_positive_definite(S):
                raise DomainError(f"sigma block {j} is not positive definite")

    def compatible(self, m):
        return self.d == m.d and self.p == m.p and self.q == m.q

    def check_model(self, m):
        if not self.compatible(m):
            raise DimensionError(
                f"state (d={self.d}, p={self.p}, q={self.q}) does not match "
                f"model (d={m.d}, p={m.p}, q={m.q})"
            )

    def to_dict(self):
        return {"sigma_blocks": self.sigma_blocks.tolist(), "x_blocks": self.x_blocks.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["sigma_blocks"], obj["x_blocks"])

    def __repr__(self):
        return f"ChainState(d={self.d}, p={self.p}, q={self.q})"
