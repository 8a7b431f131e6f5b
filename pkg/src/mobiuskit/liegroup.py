"""The Möbius group O(1, n+1), its graded Lie algebra, and KAK factorization.

Coordinates are indexed ``e_0, e_1, ..., e_{n+1}`` with the Lorentz form
``J = diag(-1, 1, ..., 1)``.  The model sphere is the projectivized null cone;
the basepoint ``o`` is the null line through ``e_0 + e_{n+1}`` and the
parabolic subgroup ``P`` is its stabilizer.

Grading of the algebra relative to ``o``::

    g = n+  (+)  R  (+)  o(n)  (+)  n-

``n-`` generates the chart translations (it lies in the Lie algebra of ``P``),
``R`` the chart homotheties, ``o(n)`` the chart rotations, and ``n+`` is the
complement of the parabolic algebra, whose exponential moves ``o``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

LORENTZ_TOL = 1e-10
REPAIR_TOL = 1e-6


class LorentzError(ValueError):
    """Raised when a matrix is too far from O(1, n+1) to be repaired."""


class DimensionError(ValueError):
    pass


@lru_cache(maxsize=None)
def _lorentz_cached(n: int) -> np.ndarray:
    J = np.eye(n + 2)
    J[0, 0] = -1.0
    J.setflags(write=False)
    return J


@dataclass(frozen=True)
class LorentzForm:
    """The form ``q^{1,n+1}`` on R^{n+2}."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"model dimension must be >= 1, got {self.n}")

    @property
    def J(self) -> np.ndarray:
        return _lorentz_cached(self.n)

    def pairing(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def lorentz_form(n: int) -> np.ndarray:
    return LorentzForm(n).J


def _model_dim(mat: np.ndarray) -> int:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 3:
        raise DimensionError(f"expected a square (n+2)x(n+2) matrix, got shape {mat.shape}")
    return mat.shape[0] - 2


def lorentz_residual(mat) -> float:
    """Relative membership residual ``|m^T J m - J|_inf / max(1, |m|_inf^2)``.

    The normalization keeps the residual meaningful for long words whose
    entries are large; for elements of moderate size it is the plain residual.
    """
    mat = np.asarray(mat, dtype=float)
    J = lorentz_form(_model_dim(mat))
    raw = np.max(np.abs(mat.T @ J @ mat - J))
    scale = max(1.0, float(np.max(np.abs(mat)))) ** 2
    return float(raw / scale)


def lorentz_check(mat, tol: float = LORENTZ_TOL) -> tuple[bool, float]:
    """Return ``(is_member, residual)`` for membership in O(1, n+1)."""
    res = lorentz_residual(mat)
    return res < tol, res


def canonicalize(mat: np.ndarray) -> np.ndarray:
    """Projective representative: first nonzero entry of row 0 made nonnegative."""
    mat = np.array(mat, dtype=float)
    row = mat[0]
    nz = np.flatnonzero(row)
    if nz.size and row[nz[0]] < 0:
        mat = -mat
    return mat


def _newton_repair(mat: np.ndarray) -> np.ndarray:
    J = lorentz_form(_model_dim(mat))
    E = J @ mat.T @ J @ mat - np.eye(mat.shape[0])
    return mat @ (np.eye(mat.shape[0]) - 0.5 * E)


@dataclass(frozen=True, eq=False)
class GroupElement:
    """An element of PO(1, n+1), stored as its canonical matrix representative.

    Matrices within ``REPAIR_TOL`` of the group are projected back with one
    Newton step; anything further away raises :class:`LorentzError`.
    """

    mat: np.ndarray

    def __init__(self, mat, *, check: bool = True):
        mat = np.array(mat, dtype=float)
        _model_dim(mat)
        if check:
            ok, res = lorentz_check(mat)
            if not ok:
                if res >= REPAIR_TOL:
                    raise LorentzError(f"matrix violates the Lorentz invariant (residual {res:.3e})")
                mat = _newton_repair(mat)
                ok, res = lorentz_check(mat)
                if not ok:
                    raise LorentzError(f"Newton repair failed (residual {res:.3e})")
        mat = canonicalize(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls(np.eye(n + 2), check=False)

    @property
    def n(self) -> int:
        return self.mat.shape[0] - 2

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        if not isinstance(other, GroupElement):
            return NotImplemented
        return GroupElement(self.mat @ other.mat, check=False)

    def inv(self) -> "GroupElement":
        J = lorentz_form(self.n)
        return GroupElement(J @ self.mat.T @ J, check=False)

    def distance(self, other: "GroupElement") -> float:
        """Max-norm distance between canonical representatives."""
        return float(np.max(np.abs(self.mat - other.mat)))

    def __repr__(self) -> str:
        return f"GroupElement(n={self.n}, mat={self.mat.tolist()!r})"


def boost(t: float, n: int) -> GroupElement:
    """The one-parameter subgroup ``a(t)``: chart homothety ``x -> e^t x``."""
    m = np.eye(n + 2)
    c, s = np.cosh(t), np.sinh(t)
    m[0, 0] = m[n + 1, n + 1] = c
    m[0, n + 1] = m[n + 1, 0] = s
    return GroupElement(m, check=False)


def compact_element(R) -> GroupElement:
    """Embed ``R`` in O(n+1) as ``diag(1, R)`` in the maximal compact K."""
    R = np.asarray(R, dtype=float)
    m = np.eye(R.shape[0] + 1)
    m[1:, 1:] = R
    return GroupElement(m)


def random_orthogonal(d: int, rng: np.random.Generator, special: bool = False) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if special and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_group_element(n: int, rng: np.random.Generator, scale: float = 10.0) -> GroupElement:
    """Project a matrix with entries in ``[-scale, scale]`` onto O(1, n+1).

    The projection is a Gram-Schmidt pass for the Lorentz form; the first
    column is lifted to the future unit hyperboloid so it is timelike.
    """
    J = lorentz_form(n)
    raw = rng.uniform(-scale, scale, size=(n + 2, n + 2))
    x = raw[1:, 0]
    cols = [np.concatenate([[np.sqrt(1.0 + x @ x)], x])]
    for j in range(1, n + 2):
        v = raw[:, j].copy()
        for _ in range(2):
            for k, w in enumerate(cols):
                sign = -1.0 if k == 0 else 1.0
                v -= sign * (v @ J @ w) * w
        norm2 = v @ J @ v
        if norm2 <= 1e-12:
            v = np.eye(n + 2)[j]
            for k, w in enumerate(cols):
                sign = -1.0 if k == 0 else 1.0
                v -= sign * (v @ J @ w) * w
            norm2 = v @ J @ v
        cols.append(v / np.sqrt(norm2))
    return GroupElement(np.column_stack(cols))


# -- parabolic subgroup ------------------------------------------------------

@lru_cache(maxsize=None)
def _lightcone_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    C = np.zeros((n + 2, n + 2))
    C[0, 0] = C[n + 1, 0] = 1.0  # l+ = e0 + e_{n+1}
    C[0, n + 1] = 1.0  # l- = e0 - e_{n+1}
    C[n + 1, n + 1] = -1.0
    C[1:n + 1, 1:n + 1] = np.eye(n)
    Cinv = np.linalg.inv(C)
    C.setflags(write=False)
    Cinv.setflags(write=False)
    return C, Cinv


@dataclass(frozen=True, eq=False)
class ParabolicElement:
    """The chart similarity ``x -> lam * A @ x + v`` (an element of P)."""

    lam: float
    A: np.ndarray
    v: np.ndarray

    def __init__(self, lam, A=None, v=None, *, n: int | None = None):
        if A is None and v is None and n is None:
            raise DimensionError("cannot infer dimension; pass A, v or n")
        if A is None:
            A = np.eye(n if n is not None else len(v))
        A = np.array(A, dtype=float)
        if v is None:
            v = np.zeros(A.shape[0])
        v = np.array(v, dtype=float)
        lam = float(lam)
        if not lam > 0:
            raise ValueError(f"scale must be positive, got {lam}")
        if A.shape != (v.size, v.size):
            raise DimensionError(f"A has shape {A.shape} but v has size {v.size}")
        if np.max(np.abs(A.T @ A - np.eye(v.size))) >= LORENTZ_TOL:
            raise ValueError("A is not orthogonal")
        A.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def mu(self) -> float:
        return float(np.linalg.norm(self.v))

    def __call__(self, x):
        """Chart action."""
        x = np.asarray(x, dtype=float)
        return self.lam * x @ self.A.T + self.v

    def __matmul__(self, other: "ParabolicElement") -> "ParabolicElement":
        return ParabolicElement(self.lam * other.lam, self.A @ other.A, self.lam * self.A @ other.v + self.v)

    def inv(self) -> "ParabolicElement":
        return ParabolicElement(1.0 / self.lam, self.A.T, -(self.A.T @ self.v) / self.lam)


def parabolic_to_matrix(p: ParabolicElement) -> GroupElement:
    n = p.n
    D = np.diag(np.concatenate([[p.lam], np.ones(n), [1.0 / p.lam]]))
    R = np.eye(n + 2)
    R[1:n + 1, 1:n + 1] = p.A
    T = np.eye(n + 2)
    T[0, 1:n + 1] = p.v
    T[0, n + 1] = p.v @ p.v
    T[1:n + 1, n + 1] = 2.0 * p.v
    C, Cinv = _lightcone_basis(n)
    return GroupElement(C @ (T @ R @ D) @ Cinv)


def parabolic_from_matrix(g: GroupElement, tol: float = 1e-8) -> ParabolicElement:
    """Inverse of :func:`parabolic_to_matrix`; raises if ``g`` does not fix ``o``."""
    n = g.n
    C, Cinv = _lightcone_basis(n)
    M = Cinv @ g.mat @ C
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M[1:, 0])) > tol * scale:
        raise ValueError("element does not fix the basepoint o")
    M = M * np.sign(M[n + 1, n + 1])
    lam = M[0, 0]
    A = M[1:n + 1, 1:n + 1]
    u, _, vt = np.linalg.svd(A)
    v = lam * M[1:n + 1, n + 1] / 2.0
    return ParabolicElement(lam, u @ vt, v)


def fixes_basepoint(g: GroupElement, tol: float = 1e-8) -> bool:
    v = g.mat @ (np.eye(g.n + 2)[0] + np.eye(g.n + 2)[g.n + 1])
    v = v / np.linalg.norm(v)
    target = np.zeros(g.n + 2)
    target[0] = target[-1] = 1.0 / np.sqrt(2.0)
    return bool(min(np.linalg.norm(v - target), np.linalg.norm(v + target)) < tol)


# -- Lie algebra ---------------------------------------------------------------

def plus_generator(n: int, i: int) -> np.ndarray:
    """Unnormalized generator of n+ along chart axis ``i`` (0-based)."""
    m = np.zeros((n + 2, n + 2))
    k = i + 1
    m[k, 0] = m[k, n + 1] = 1.0
    m[0, k] = 1.0
    m[n + 1, k] = -1.0
    return m


def minus_generator(n: int, i: int) -> np.ndarray:
    """Unnormalized generator of n- (chart translation along axis ``i``)."""
    m = np.zeros((n + 2, n + 2))
    k = i + 1
    m[k, 0] = 1.0
    m[k, n + 1] = -1.0
    m[0, k] = m[n + 1, k] = 1.0
    return m


def scal_generator(n: int) -> np.ndarray:
    m = np.zeros((n + 2, n + 2))
    m[0, n + 1] = m[n + 1, 0] = 1.0
    return m


def rotation_generator(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n + 2, n + 2))
    m[j + 1, i + 1] = 1.0
    m[i + 1, j + 1] = -1.0
    return m


@lru_cache(maxsize=None)
def _basis_cached(n: int) -> tuple[np.ndarray, tuple[str, ...]]:
    mats, labels = [], []
    for i in range(n):
        mats.append(plus_generator(n, i))
        labels.append(f"plus{i}")
    mats.append(scal_generator(n))
    labels.append("scal")
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(rotation_generator(n, i, j))
            labels.append(f"rot{i}{j}")
    for i in range(n):
        mats.append(minus_generator(n, i))
        labels.append(f"minus{i}")
    B = np.array([m / np.linalg.norm(m) for m in mats])
    B.setflags(write=False)
    return B, tuple(labels)


def algebra_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal basis ``X_1..X_m`` of o(1, n+1), shape (m, n+2, n+2).

    Ordered as n+ (n), scal (1), o(n) (n(n-1)/2), n- (n).
    """
    return _basis_cached(n)[0]


def basis_labels(n: int) -> tuple[str, ...]:
    return _basis_cached(n)[1]


def algebra_dim(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def coords(X, n: int | None = None) -> np.ndarray:
    """Coordinates of an algebra matrix in the orthonormal basis."""
    X = np.asarray(X, dtype=float)
    if n is None:
        n = X.shape[-1] - 2
    B = algebra_basis(n)
    return np.einsum("kij,...ij->...k", B, X)


def from_coords(c, n: int) -> np.ndarray:
    return np.einsum("k,kij->ij", np.asarray(c, dtype=float), algebra_basis(n))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """An element of o(1, n+1) with its graded components.

    ``plus``/``minus`` are the coefficients on the unnormalized n+/n-
    generators, ``scal`` the boost coefficient and ``rot`` the skew block.
    """

    mat: np.ndarray
    plus: np.ndarray = field(init=False)
    scal: float = field(init=False)
    rot: np.ndarray = field(init=False)
    minus: np.ndarray = field(init=False)

    def __init__(self, mat, *, tol: float = 1e-10):
        mat = np.array(mat, dtype=float)
        n = _model_dim(mat)
        J = lorentz_form(n)
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat.T @ J + J @ mat)) > tol * scale:
            raise ValueError("matrix is not in o(1, n+1)")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        plus, scal, rot, minus = decompose(mat)
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "scal", scal)
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "minus", minus)

    @classmethod
    def from_components(cls, plus=None, scal=0.0, rot=None, minus=None, *, n: int) -> "AlgebraElement":
        return cls(assemble(plus, scal, rot, minus, n=n))

    @property
    def n(self) -> int:
        return self.mat.shape[0] - 2

    def coords(self) -> np.ndarray:
        return coords(self.mat, self.n)

    def bracket(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.mat @ other.mat - other.mat @ self.mat)

    def is_pure_plus(self, tol: float = 1e-14) -> bool:
        return (abs(self.scal) <= tol and np.all(np.abs(self.rot) <= tol)
                and np.all(np.abs(self.minus) <= tol))


def assemble(plus=None, scal=0.0, rot=None, minus=None, *, n: int) -> np.ndarray:
    m = np.zeros((n + 2, n + 2))
    plus = np.zeros(n) if plus is None else np.asarray(plus, dtype=float)
    minus = np.zeros(n) if minus is None else np.asarray(minus, dtype=float)
    m[1:n + 1, 0] = plus + minus
    m[1:n + 1, n + 1] = plus - minus
    m[0, 1:n + 1] = plus + minus
    m[n + 1, 1:n + 1] = minus - plus
    m[0, n + 1] = m[n + 1, 0] = scal
    if rot is not None:
        rot = np.asarray(rot, dtype=float)
        if np.max(np.abs(rot + rot.T), initial=0.0) > 1e-12:
            raise ValueError("rotation block must be skew-symmetric")
        m[1:n + 1, 1:n + 1] = rot
    return m


def decompose(mat) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    mat = np.asarray(mat, dtype=float)
    n = _model_dim(mat)
    a = mat[1:n + 1, 0]
    b = mat[1:n + 1, n + 1]
    plus = 0.5 * (a + b)
    minus = 0.5 * (a - b)
    return plus, float(mat[n + 1, 0]), mat[1:n + 1, 1:n + 1].copy(), minus


def exp_algebra(X) -> GroupElement:
    mat = X.mat if isinstance(X, AlgebraElement) else np.asarray(X, dtype=float)
    return GroupElement(scipy.linalg.expm(mat))


def adjoint(g: GroupElement) -> np.ndarray:
    """Matrix of ``Ad(g): X -> g X g^{-1}`` in the orthonormal basis."""
    B = algebra_basis(g.n)
    ginv = g.inv().mat
    conj = np.einsum("ij,kjl,lm->kim", g.mat, B, ginv)
    return coords(conj, g.n).T


# -- KAK --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KAKDecomposition:
    """``g = k1 @ boost(t) @ k2`` with ``k1, k2`` in K = O(1) x O(n+1)."""

    k1: GroupElement
    t: float
    k2: GroupElement
    degenerate: bool

    def reconstruct(self) -> GroupElement:
        return self.k1 @ boost(self.t, self.k1.n) @ self.k2


def _minimal_rotation(w: np.ndarray) -> np.ndarray:
    """Rotation of R^d taking the last axis to the unit vector ``w``.

    It is the identity on the orthogonal complement of span(e_last, w); for
    ``w = -e_last`` the half-turn in the (e_0, e_last) plane is used.
    """
    d = w.size
    e = np.zeros(d)
    e[-1] = 1.0
    c = float(np.clip(w @ e, -1.0, 1.0))
    if c > 1.0 - 1e-15:
        return np.eye(d)
    if c < -1.0 + 1e-15:
        R = np.eye(d)
        R[0, 0] = R[-1, -1] = -1.0
        return R
    u = w - c * e
    u /= np.linalg.norm(u)
    s = np.sqrt(max(0.0, 1.0 - c * c))
    # rotation by angle theta in the (e, u) plane
    R = np.eye(d) + s * (np.outer(u, e) - np.outer(e, u)) + (c - 1.0) * (np.outer(e, e) + np.outer(u, u))
    return R


def _polar_orthogonal(M: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(M)
    return u @ vt


def kak(g: GroupElement, tol: float = 1e-9) -> KAKDecomposition:
    """Cartan decomposition with the Weyl normalization ``t >= 0``.

    Convention: ``k1`` is the minimal rotation carrying ``e_{n+1}`` to the
    spatial direction of ``g e_0``; the residual centralizer factor is put in
    ``k2``.  ``degenerate`` is set when ``t < tol`` (``k1`` is then arbitrary).
    """
    n = g.n
    m = g.mat
    c = m[1:, 0]
    sh = float(np.linalg.norm(c))
    t = float(np.arcsinh(sh))
    degenerate = t < tol
    s2 = 1.0 if m[0, 0] >= 0 else -1.0
    if sh > 0:
        R1 = _minimal_rotation(s2 * c / sh)
    else:
        R1 = np.eye(n + 1)
    k1 = np.eye(n + 2)
    k1[1:, 1:] = R1
    h = k1.T @ m  # = boost(t) @ k2
    k2 = np.zeros((n + 2, n + 2))
    k2[0, 0] = s2
    R2 = np.empty((n + 1, n + 1))
    R2[:n, :] = h[1:n + 1, 1:]
    R2[n, :] = h[n + 1, 1:] / np.cosh(t)
    k2[1:, 1:] = _polar_orthogonal(R2)
    return KAKDecomposition(GroupElement(k1, check=False), t, GroupElement(k2, check=False), degenerate)


def kak_residual(g: GroupElement, dec: KAKDecomposition) -> float:
    """Relative reconstruction residual ``|k1 a k2 - g|_inf / max(1, |g|_inf)``."""
    r = dec.reconstruct().mat
    return float(np.max(np.abs(r - g.mat)) / max(1.0, float(np.max(np.abs(g.mat)))))


def log_group(g, guard: float = 0.5) -> np.ndarray:
    """Principal matrix logarithm of an element near the identity.

    ``guard`` bounds the spectral radius of ``g - I``; outside it the
    principal log is not trusted and ``ValueError`` is raised.
    """
    mat = g.mat if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    n = mat.shape[0] - 2
    rho = float(np.max(np.abs(np.linalg.eigvals(mat - np.eye(n + 2)))))
    if rho >= guard:
        raise ValueError(f"transition outside the log region (spectral radius {rho:.3f})")
    L = scipy.linalg.logm(mat)
    if np.iscomplexobj(L):
        L = L.real
    return L
