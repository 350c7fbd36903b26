"""
BEKK GARCH(p, q) models and their derived linear forms.

The conditional covariance recursion is

    Sigma_n = C + sum_{i<=q} sum_k Abar[i][k] X_{n-i} X_{n-i}' Abar[i][k]'
                + sum_{j<=p} sum_r Bbar[j][r] Sigma_{n-j} Bbar[j][r]'

where every coefficient matrix is stored exactly as the factor that
multiplies from the left.  In vec coordinates the ARCH lag ``i`` acts through
``Atilde_i = sum_k Abar[i][k] (x) Abar[i][k]`` and in vech coordinates through
``A_i = H Atilde_i K'`` (same for the GARCH lags).
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .exceptions import ModelError

__all__ = [
    "FORMAT",
    "BekkModel",
    "VecForm",
    "VechForm",
    "CompanionBlocks",
    "validate",
    "kron_sum",
    "vech_operator",
    "bekk_action",
    "to_vec_form",
    "to_vech_form",
    "companion_blocks",
    "model_to_dict",
    "model_from_dict",
    "model_to_json",
    "load_model",
    "save_model",
    "model_hash",
]

FORMAT = "bekk-v1"


@dataclass(frozen=True)
class VecForm:
    Atilde: np.ndarray  # (q, d*d, d*d)
    Btilde: np.ndarray  # (p, d*d, d*d)


@dataclass(frozen=True)
class VechForm:
    A: np.ndarray  # (q, h, h), h = d(d+1)/2
    B: np.ndarray  # (p, h, h)


@dataclass(frozen=True)
class CompanionBlocks:
    """Block matrices of the state-space embedding.

    ``B_block`` is the ``p*h`` square companion matrix with ``(B_1 ... B_p)``
    in its first block row and identities on the block sub-diagonal,
    ``A_block`` is ``p*h x q*h`` with ``(A_1 ... A_q)`` in its first block row,
    ``Btilde_block = diag(B_block, 0)`` acts on the full state and
    ``scrC``/``scrC1`` are ``vech(C)`` padded with zeros to the full state and
    to the sigma part respectively.
    """

    B_block: np.ndarray
    A_block: np.ndarray
    Btilde_block: np.ndarray
    scrC: np.ndarray
    scrC1: np.ndarray


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_family(value, name, d):
    """Coerce ``value`` into a tuple (per lag) of tuples of d x d arrays."""
    if value is None:
        raise ModelError(name, "missing")
    lags = []
    for i, lag in enumerate(value):
        arr = np.asarray(lag, dtype=float)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1:] != (d, d):
            raise ModelError(
                f"{name}[{i}]",
                f"expected a non-empty list of {d}x{d} matrices, got shape {arr.shape}",
            )
        if not np.all(np.isfinite(arr)):
            raise ModelError(f"{name}[{i}]", "non-finite entries")
        lags.append(tuple(_freeze(m) for m in arr))
    if not lags:
        raise ModelError(name, "at least one lag is required")
    return tuple(lags)


def kron_sum(mats):
    """``sum_k F_k (x) F_k``: the vec-coordinate matrix of ``M -> sum F M F'``."""
    mats = list(mats)
    out = matcore.kron(mats[0], mats[0])
    for F in mats[1:]:
        out = out + matcore.kron(F, F)
    return out


def vech_operator(mats):
    """
    Matrix of ``M -> sum_k F_k M F_k'`` restricted to symmetric ``M``.

    Works for float and for ``object`` (e.g. sympy) entries.
    """
    mats = [np.asarray(F) for F in mats]
    d = mats[0].shape[0]
    H, K = matcore.elimination_duplication(d)
    if mats[0].dtype == object:
        H, K = H.astype(object), K.astype(object)
    return H @ kron_sum(mats) @ K.T


def bekk_action(mats, M):
    """``sum_k F_k M F_k'`` evaluated directly."""
    M = np.asarray(M)
    out = np.zeros_like(M, dtype=float)
    for F in mats:
        out = out + F @ M @ F.T
    return out


@dataclass(frozen=True, eq=False)
class BekkModel:
    """
    A validated BEKK GARCH(p, q) model.

    Parameters
    ----------
    C : array_like, (d, d)
        Positive definite intercept.
    A : sequence
        ``A[i]`` is the list of ``l_i`` ARCH matrices of lag ``i + 1``.  A bare
        ``d x d`` matrix is accepted for ``l_i = 1``.
    B : sequence
        ``B[j]`` is the list of ``s_j`` GARCH matrices of lag ``j + 1``.

    The vec form, vech form and companion blocks are computed on
    construction and exposed as read-only attributes.
    """

    C: np.ndarray
    A: tuple
    B: tuple
    vec_form: VecForm = field(init=False, repr=False)
    vech_form: VechForm = field(init=False, repr=False)
    blocks: CompanionBlocks = field(init=False, repr=False)

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] < 1:
            raise ModelError("C", f"must be a non-empty square matrix, got shape {C.shape}")
        if not np.all(np.isfinite(C)):
            raise ModelError("C", "non-finite entries")
        if not np.allclose(C, C.T, rtol=0, atol=1e-12 * (1 + np.abs(C).max())):
            raise ModelError("C", "not symmetric")
        C = matcore.symmetrize(C)
        if not matcore.is_positive_definite(C):
            raise ModelError("C", "C not positive definite")
        d = C.shape[0]
        object.__setattr__(self, "C", _freeze(C))
        object.__setattr__(self, "A", _as_family(self.A, "A", d))
        object.__setattr__(self, "B", _as_family(self.B, "B", d))
        object.__setattr__(self, "vec_form", _vec_form(self))
        object.__setattr__(self, "vech_form", _vech_form(self))
        object.__setattr__(self, "blocks", _companion(self))

    @property
    def d(self):
        return self.C.shape[0]

    @property
    def p(self):
        return len(self.B)

    @property
    def q(self):
        return len(self.A)

    @property
    def l(self):
        return [len(a) for a in self.A]

    @property
    def s(self):
        return [len(b) for b in self.B]

    @property
    def h(self):
        """Length of a half-vectorised ``d x d`` matrix."""
        return matcore.vech_length(self.d)

    @property
    def state_dim(self):
        return self.p * self.h + self.q * self.d

    def all_A(self):
        return [F for lag in self.A for F in lag]

    def all_B(self):
        return [F for lag in self.B for F in lag]

    def transposed(self):
        """Model with every coefficient matrix transposed (same intercept)."""
        return BekkModel(
            self.C,
            [[F.T for F in lag] for lag in self.A],
            [[F.T for F in lag] for lag in self.B],
        )

    def __repr__(self):
        return f"BekkModel(d={self.d}, p={self.p}, q={self.q}, l={self.l}, s={self.s})"


def validate(C, A, B):
    """Build a :class:`BekkModel`, raising :class:`ModelError` on failure."""
    return BekkModel(C, A, B)


def _vec_form(m):
    return VecForm(
        Atilde=_freeze([kron_sum(lag) for lag in m.A]),
        Btilde=_freeze([kron_sum(lag) for lag in m.B]),
    )


def _vech_form(m):
    H, K = matcore.elimination_duplication(m.d)
    return VechForm(
        A=_freeze([H @ At @ K.T for At in m.vec_form.Atilde]),
        B=_freeze([H @ Bt @ K.T for Bt in m.vec_form.Btilde]),
    )


def _companion(m):
    h, p, q, d = m.h, m.p, m.q, m.d
    Bb = np.zeros((p * h, p * h))
    Ab = np.zeros((p * h, q * h))
    for j, Bj in enumerate(m.vech_form.B):
        Bb[:h, j * h:(j + 1) * h] = Bj
    for j in range(1, p):
        Bb[j * h:(j + 1) * h, (j - 1) * h:j * h] = np.eye(h)
    for i, Ai in enumerate(m.vech_form.A):
        Ab[:h, i * h:(i + 1) * h] = Ai
    n = p * h + q * d
    Bt = np.zeros((n, n))
    Bt[:p * h, :p * h] = Bb
    c1 = np.zeros(p * h)
    c1[:h] = matcore.vech(m.C)
    c = np.zeros(n)
    c[:h] = c1[:h]
    return CompanionBlocks(_freeze(Bb), _freeze(Ab), _freeze(Bt), _freeze(c), _freeze(c1))


def to_vec_form(m):
    return m.vec_form


def to_vech_form(m):
    return m.vech_form


def companion_blocks(m):
    return m.blocks


# -- serialisation -----------------------------------------------------------

def model_to_dict(m):
    return {
        "format": FORMAT,
        "d": m.d,
        "p": m.p,
        "q": m.q,
        "C": m.C.tolist(),
        "A": [[F.tolist() for F in lag] for lag in m.A],
        "B": [[F.tolist() for F in lag] for lag in m.B],
    }


def model_to_json(m, indent=2):
    return json.dumps(model_to_dict(m), indent=indent)


def model_from_dict(obj):
    """Parse a ``bekk-v1`` document (already decoded from JSON)."""
    if not isinstance(obj, dict):
        raise ModelError("<root>", "expected a JSON object")
    fmt = obj.get("format")
    if fmt != FORMAT:
        raise ModelError("format", f"expected {FORMAT!r}, got {fmt!r}")
    for key in ("d", "p", "q", "C", "A", "B"):
        if key not in obj:
            raise ModelError(key, "missing")
    d, p, q = obj["d"], obj["p"], obj["q"]
    for key, val in (("d", d), ("p", p), ("q", q)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise ModelError(key, f"must be a positive integer, got {val!r}")
    if not isinstance(obj["A"], list) or len(obj["A"]) != q:
        raise ModelError("A", f"expected {q} lag families")
    if not isinstance(obj["B"], list) or len(obj["B"]) != p:
        raise ModelError("B", f"expected {p} lag families")
    try:
        C = np.asarray(obj["C"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError("C", f"not a numeric matrix ({exc})") from None
    if C.shape != (d, d):
        raise ModelError("C", f"expected shape ({d}, {d}), got {C.shape}")
    fams = {}
    for name in ("A", "B"):
        lags = []
        for i, lag in enumerate(obj[name]):
            try:
                arr = np.asarray(lag, dtype=float)
            except (TypeError, ValueError) as exc:
                raise ModelError(f"{name}[{i}]", f"not numeric ({exc})") from None
            lags.append(arr)
        fams[name] = lags
    return BekkModel(C, fams["A"], fams["B"])


def load_model(path):
    """Read a model file.  JSON syntax errors surface as ``json.JSONDecodeError``."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return model_from_dict(obj)


def save_model(m, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(m))
        fh.write("\n")


def model_hash(m):
    """SHA-256 of the canonical JSON encoding (first 16 hex digits)."""
    blob = json.dumps(model_to_dict(m), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]

