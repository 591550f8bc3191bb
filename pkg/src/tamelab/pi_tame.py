"""Properness through a projection, and the fiberwise push automorphism.

A discrete set upstairs may look wild, yet project to something discrete
with bounded fibers.  When that happens, moving each point along its
fiber by a group element chosen from the projected position yields an
automorphism x -> x * F(project(x)) that raises heights at will.  This
module builds exactly that map for the first-column fibration of the
unimodular group, where the fiber group Q is block triangular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cn_tame import LagrangePoly, Polynomial, interpolate_nodes
from .core import (
    DISTINCT_TOL,
    MAX_COLUMN_NORM,
    MAX_FIBER,
    MIN_GAP,
    AmbientSpace,
    Automorphism,
    DiscreteSequence,
    HeightAssignment,
    Verdict,
    _pair,
    exhaust_eval,
    max_norm_distance,
    properness_check,
    sl_matrix,
    sln,
)
from .errors import (
    AmbientMismatch,
    DegenerateConfiguration,
    FiberCollision,
    InterpolationIllConditioned,
    NotSameFiber,
    SearchExhausted,
    UnsupportedPair,
)
from .rng import stream

FIRST_COLUMN = "first-column"
RIGHT_TORUS = "right-torus"

Q_COLUMN_TOL = 1e-10
FIBER_MATCH_TOL = 1e-9
_SEARCH_CAP = 2**60
_NEWTON_NODE_LIMIT = 40


@dataclass(frozen=True)
class BundleSpec:
    """A projection out of the matrix ambient, named by what survives it."""

    total: AmbientSpace
    kind: str = FIRST_COLUMN

    def __post_init__(self):
        if self.total.kind != "sln":
            raise AmbientMismatch("bundle projections live over the matrix ambient")
        if self.kind not in (FIRST_COLUMN, RIGHT_TORUS):
            raise ValueError(f"unknown bundle kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.total.n


def first_column(n: int) -> BundleSpec:
    return BundleSpec(sln(n), FIRST_COLUMN)


def right_torus(n: int) -> BundleSpec:
    return BundleSpec(sln(n), RIGHT_TORUS)


@dataclass(frozen=True)
class QElement:
    """Unimodular matrix stabilizing e1: first column exactly e1, top row
    free, lower-right block in the smaller unimodular group."""

    n: int
    entries: np.ndarray

    def __post_init__(self):
        a = sl_matrix(self.entries)
        if a.shape[0] != self.n:
            raise AmbientMismatch(f"expected {self.n}x{self.n} entries")
        e1 = np.zeros(self.n, dtype=np.complex128)
        e1[0] = 1.0
        if float(np.max(np.abs(a[:, 0] - e1))) > Q_COLUMN_TOL:
            raise NotSameFiber("first column must be e1")
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_blocks(cls, r: np.ndarray, lower: np.ndarray) -> "QElement":
        r = np.atleast_1d(np.asarray(r, dtype=np.complex128))
        lower = np.asarray(lower, dtype=np.complex128)
        n = r.shape[0] + 1
        m = np.eye(n, dtype=np.complex128)
        m[0, 1:] = r
        m[1:, 1:] = lower
        return cls(n, m)

    @property
    def r_block(self) -> np.ndarray:
        return np.array(self.entries[0, 1:])

    @property
    def l_block(self) -> np.ndarray:
        return np.array(self.entries[1:, 1:])


def project(b: BundleSpec, a) -> np.ndarray:
    """The part of a matrix the bundle's fiber group cannot move."""
    m = sl_matrix(a)
    if m.shape[0] != b.n:
        raise AmbientMismatch(f"expected {b.n}x{b.n}, got {m.shape[0]}x{m.shape[1]}")
    if b.kind == FIRST_COLUMN:
        return np.array(m[:, 0])
    cols = m / np.linalg.norm(m, axis=0, keepdims=True)
    out = np.empty_like(cols)
    for j in range(b.n):
        v = cols[:, j]
        lead = int(np.argmax(np.abs(v) > 1e-12))
        phase = v[lead] / abs(v[lead])
        out[:, j] = v * np.conj(phase)
    return out


def pi_tame_check(
    d: DiscreteSequence,
    b: BundleSpec,
    min_gap: float = MIN_GAP,
    max_fiber: int = MAX_FIBER,
) -> Verdict:
    """Discrete projected image with bounded fibers, at prefix scale."""
    if d.ambient.kind != "sln" or d.ambient.n != b.n:
        raise AmbientMismatch("sequence and bundle ambients disagree")
    images = [project(b, p) for p in d.points]
    return properness_check(images, min_gap=min_gap, max_fiber=max_fiber)


def q_factor(a, b) -> QElement:
    """The fiber-group element carrying b to a when both sit over the same
    projected point: g = b^{-1} a, with the structural zeros of Q restored."""
    am = sl_matrix(a)
    bm = sl_matrix(b)
    if am.shape != bm.shape:
        raise AmbientMismatch("q_factor needs matrices of equal size")
    drift = float(np.max(np.abs(am[:, 0] - bm[:, 0])))
    if drift > FIBER_MATCH_TOL:
        raise NotSameFiber(f"first columns differ by {drift:.3g}")
    g = np.linalg.solve(bm, am)
    return QElement.from_blocks(g[0, 1:], g[1:, 1:])


def _principal_log(lower: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm of a diagonalizable unimodular block;
    rejects defective inputs and branch mismatches (nonzero trace)."""
    if lower.shape == (1, 1):
        val = complex(np.log(lower[0, 0]))
        out = np.array([[val]])
    else:
        w, v = np.linalg.eig(lower)
        if np.any(w == 0) or np.linalg.cond(v) > 1e10:
            raise DegenerateConfiguration(
                "lower block is defective; no principal logarithm"
            )
        out = v @ np.diag(np.log(w)) @ np.linalg.inv(v)
    trace = complex(np.trace(out))
    if abs(trace) > 1e-8:
        raise DegenerateConfiguration(
            f"principal logarithm has trace {trace:.3g}; the block sits on "
            "a nonprincipal branch"
        )
    return out - np.eye(lower.shape[0]) * (trace / lower.shape[0])


def _matrix_exp(m: np.ndarray) -> np.ndarray:
    if m.shape == (1, 1):
        return np.array([[np.exp(m[0, 0])]])
    w, v = np.linalg.eig(m)
    if np.linalg.cond(v) > 1e10:
        raise DegenerateConfiguration("exponent matrix is defective")
    return v @ np.diag(np.exp(w)) @ np.linalg.inv(v)


def _fit_scalar(ss: np.ndarray, values: np.ndarray):
    if len(ss) <= _NEWTON_NODE_LIMIT:
        return interpolate_nodes(list(zip(ss, values)), distinct_tol=0.0)
    return LagrangePoly.fit(ss, values)


@dataclass(frozen=True)
class QPolyMap:
    """F: projected point -> Q, polynomial in a separating scalar <u, y>.

    Coordinates are the top-row block r and the principal logarithm of the
    lower block, each interpolated separately; the log coordinates are kept
    traceless so the exponential stays unimodular.
    """

    n: int
    u: np.ndarray
    r_fns: tuple
    logl_fns: tuple

    def separator(self, y) -> complex:
        return complex(np.sum(self.u * np.asarray(y, dtype=np.complex128)))

    def q_of(self, y) -> QElement:
        s = self.separator(y)
        r = np.array([fn(s) for fn in self.r_fns])
        k = self.n - 1
        logl = np.array([fn(s) for fn in self.logl_fns]).reshape(k, k)
        logl -= np.eye(k) * (np.trace(logl) / k)
        return QElement.from_blocks(r, _matrix_exp(logl))

    def to_json(self) -> dict:
        fns = list(self.r_fns) + list(self.logl_fns)
        return {
            "kind": "bundle-push",
            "bundle": FIRST_COLUMN,
            "separator_u": [_pair(z) for z in self.u],
            "coeffs": [fn.to_json() for fn in fns],
        }


def _zero_fit(count: int):
    return tuple(Polynomial() for _ in range(count))


def fit_q_map(images, elements, seed: int = 0) -> QPolyMap:
    """Interpolates fiber-group elements over their projected positions.

    A seeded random functional separates the images; up to 64 draws are
    tried before giving up on the configuration.
    """
    ys = [np.asarray(y, dtype=np.complex128) for y in images]
    if not ys:
        raise ValueError("need at least one node")
    n = len(ys[0])
    for i in range(len(ys)):
        for j in range(i + 1, len(ys)):
            if max_norm_distance(ys[i], ys[j]) <= Q_COLUMN_TOL:
                raise FiberCollision(f"images {i} and {j} coincide")
    rng = stream(seed, "q-map-separator")
    u = None
    for _ in range(64):
        cand = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ss = np.array([np.sum(cand * y) for y in ys])
        scale = max(1.0, float(np.max(np.abs(ss))))
        gaps = np.abs(ss[:, None] - ss[None, :]) + np.eye(len(ss)) * scale
        if float(np.min(gaps)) > DISTINCT_TOL * scale:
            u = cand
            break
    if u is None:
        raise DegenerateConfiguration(
            "no separating functional found for the projected images"
        )
    ss = np.array([np.sum(u * y) for y in ys])
    rs = np.stack([np.atleast_1d(el.r_block) for el in elements])
    logs = np.stack([_principal_log(el.l_block).reshape(-1) for el in elements])
    r_fns = tuple(_fit_scalar(ss, rs[:, j]) for j in range(rs.shape[1]))
    logl_fns = tuple(_fit_scalar(ss, logs[:, j]) for j in range(logs.shape[1]))
    return QPolyMap(n, u, r_fns, logl_fns)


@dataclass(frozen=True)
class BundlePushAut(Automorphism):
    """x -> x * F(first column of x); moves points along fibers only."""

    fmap: QPolyMap
    kind = "bundle-push"

    def apply(self, p: np.ndarray) -> np.ndarray:
        m = np.asarray(p, dtype=np.complex128)
        return m @ self.fmap.q_of(m[:, 0]).entries

    def to_json(self) -> dict:
        return self.fmap.to_json()


def _search_shear_parameter(x: np.ndarray, target: float) -> float:
    """Smallest doubling parameter t with max column norm of
    x * (I + t E_{12}) at least the target."""
    col1 = x[:, 0]
    col2 = x[:, 1]
    base = float(np.max(np.linalg.norm(x, axis=0)))
    if base >= target:
        return 0.0
    t = 1.0
    while t <= _SEARCH_CAP:
        if max(base, float(np.linalg.norm(col2 + t * col1))) >= target:
            return t
        t *= 2.0
    raise SearchExhausted(
        f"no shear parameter up to 2^60 reaches height {target:g}"
    )


def bundle_push(
    d: DiscreteSequence,
    zeta: HeightAssignment,
    bundle: BundleSpec | None = None,
    seed: int = 0,
) -> tuple[BundlePushAut, tuple[float, ...]]:
    """Raises every prefix point at least to its demanded height by a push
    along the first-column fibers, leaving projections untouched."""
    if d.ambient.kind != "sln":
        raise AmbientMismatch("bundle push needs the matrix ambient")
    b = bundle if bundle is not None else first_column(d.ambient.n)
    if b.kind != FIRST_COLUMN:
        raise UnsupportedPair("the push construction works along first-column fibers")
    if b.n != d.ambient.n:
        raise AmbientMismatch("sequence and bundle ambients disagree")
    if len(zeta) != len(d):
        raise ValueError("need one height per prefix point")
    n = d.ambient.n
    images = [project(b, p) for p in d.points]
    ts = [
        _search_shear_parameter(p, zeta[i]) for i, p in enumerate(d.points)
    ]
    if all(t == 0.0 for t in ts):
        fmap = QPolyMap(
            n, np.zeros(n, dtype=np.complex128), _zero_fit(n - 1), _zero_fit((n - 1) ** 2)
        )
    else:
        elements = []
        for t in ts:
            r = np.zeros(n - 1, dtype=np.complex128)
            r[0] = t
            elements.append(QElement.from_blocks(r, np.eye(n - 1)))
        fmap = fit_q_map(images, elements, seed=seed)
    phi = BundlePushAut(fmap)
    achieved = []
    for i, p in enumerate(d.points):
        h = exhaust_eval(MAX_COLUMN_NORM, phi.apply(p), d.ambient)
        if h < zeta[i] - 1e-9 * (1.0 + zeta[i]):
            raise InterpolationIllConditioned(
                f"achieved height {h:.6g} at point {i} fell below the demand "
                f"{zeta[i]:.6g} after interpolation"
            )
        achieved.append(h)
    return phi, tuple(achieved)
