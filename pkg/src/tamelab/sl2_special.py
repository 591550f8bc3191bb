"""Constructions special to 2x2 unimodular matrices.

Three groups of tools live here.  Overshears rescale the second column
of a matrix by a factor that depends only on the first column, with the
factor pinned to one whenever the corner entry vanishes; they preserve
the determinant and fix the first column entry for entry.  Right
translations slide a matrix along its first-column fiber and carry a
natural distance.  On top of both sits a three-stage pipeline that turns
any prefix with discrete first-column images into one whose second-column
images escape nested balls, and an exact-arithmetic enumerator for
matrices over the integers of an imaginary quadratic field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .cn_tame import Polynomial, interpolate_nodes
from .core import (
    DISTINCT_TOL,
    MAX_FIBER,
    MIN_GAP,
    Automorphism,
    Composite,
    DiscreteSequence,
    GeneratorInfo,
    LinearAut,
    Verdict,
    _pair,
    group_fibers,
    properness_check,
    sl_matrix,
    sln,
)
from .errors import (
    AmbientMismatch,
    EmptyResult,
    InconsistentFiber,
    LambdaVanishes,
    NotSameFiber,
    StageFailed,
    UnsupportedField,
    ZeroVector,
)
from .pi_tame import BundlePushAut, QElement, fit_q_map, first_column, pi_tame_check
from .rng import stream

SMALL_CORNER_TOL = 1e-10
LAMBDA_FLOOR = 1e-12
SAME_COLUMN_TOL = 1e-10
CROSS_CHECK_TOL = 1e-8
AXIS_CLEARANCE = 1e-8
_TRY_CAP = 64


@dataclass(frozen=True)
class BivariatePoly:
    """Polynomial in two variables; ``coeffs[i][j]`` multiplies a**i * b**j."""

    coeffs: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        rows = []
        width = max((len(r) for r in self.coeffs), default=0)
        for row in self.coeffs:
            padded = tuple(complex(z) for z in row) + (0j,) * (width - len(row))
            if not all(np.isfinite(z.real) and np.isfinite(z.imag) for z in padded):
                raise ValueError("coefficients must be finite")
            rows.append(padded)
        object.__setattr__(self, "coeffs", tuple(rows))

    @classmethod
    def zero(cls) -> "BivariatePoly":
        return cls(())

    @classmethod
    def constant(cls, value) -> "BivariatePoly":
        return cls(((complex(value),),))

    @classmethod
    def from_separated(cls, u, inner: Polynomial) -> "BivariatePoly":
        """Expand ``p(u[0]*a + u[1]*b)`` into an explicit coefficient grid."""
        u0, u1 = complex(u[0]), complex(u[1])
        deg = len(inner.coeffs) - 1
        if deg < 0:
            return cls.zero()
        grid = [[0j] * (deg + 1) for _ in range(deg + 1)]
        for j, c in enumerate(inner.coeffs):
            for m in range(j + 1):
                grid[m][j - m] += c * math.comb(j, m) * u0**m * u1 ** (j - m)
        return cls(tuple(tuple(row) for row in grid))

    @property
    def is_zero(self) -> bool:
        return all(z == 0 for row in self.coeffs for z in row)

    def __call__(self, a, b) -> complex:
        a, b = complex(a), complex(b)
        total = 0j
        for row in reversed(self.coeffs):
            inner = 0j
            for c in reversed(row):
                inner = inner * b + c
            total = total * a + inner
        return total

    def to_json(self) -> dict:
        return {"coeffs": [[_pair(z) for z in row] for row in self.coeffs]}


@dataclass(frozen=True)
class OvershearSpec:
    """Second-column rescaling factor in structural unit-at-the-wall form.

    The factor is lambda(a, b) = 1 + a * shift(a, b), so lambda(0, w) = 1
    holds identically and the corner limit of the rescaled matrix needs no
    division.  ``inverted`` swaps in 1 / lambda, which keeps the same
    structural form with shift' = -shift / lambda.
    """

    shift: BivariatePoly
    inverted: bool = False

    @classmethod
    def identity(cls) -> "OvershearSpec":
        return cls(BivariatePoly.zero())

    def shift_at(self, a, b) -> complex:
        base = self.shift(a, b)
        if not self.inverted:
            return base
        lam = 1.0 + complex(a) * base
        if abs(lam) < LAMBDA_FLOOR:
            raise LambdaVanishes(
                f"factor has modulus {abs(lam):.3g} at the requested point"
            )
        return -base / lam

    def lambda_at(self, a, b) -> complex:
        val = 1.0 + complex(a) * self.shift_at(a, b)
        if abs(val) < LAMBDA_FLOOR:
            raise LambdaVanishes(
                f"factor has modulus {abs(val):.3g} at the requested point"
            )
        return val

    def to_json(self) -> dict:
        return {"shift": self.shift.to_json(), "inverted": self.inverted}


def overshear_apply(s: OvershearSpec, m) -> np.ndarray:
    """Rescale the second column by lambda(first column), keeping det = 1.

    The bottom-right entry is (1 + b*c*lambda) / a away from the a = 0
    wall; at the wall the equivalent form lambda*d - shift(a, b) is used,
    which is the removable-singularity value (1 - lambda)/a = -shift taken
    literally, with no cancellation.
    """
    m = sl_matrix(m)
    a, c = m[0, 0], m[0, 1]
    b, d = m[1, 0], m[1, 1]
    lam = s.lambda_at(a, b)
    if abs(a) >= SMALL_CORNER_TOL:
        d2 = (1.0 + b * c * lam) / a
    else:
        d2 = lam * d - s.shift_at(a, b)
    return np.array([[a, c * lam], [b, d2]], dtype=np.complex128)


_ROUNDTRIP_SAMPLES = (
    np.array([[1.0, 0.3], [-0.2, 0.94]]),
    np.array([[0.1, -1.0], [1.0, 0.0]]),
    np.array([[1e-12, -1.0], [1.0, 0.5]]),
    np.array([[0.25 + 0.1j, 0.4], [0.3j, (1.0 + 0.4 * 0.3j) / (0.25 + 0.1j)]]),
)


def overshear_inverse(s: OvershearSpec) -> OvershearSpec:
    """The overshear undoing `s`, checked by round trips on fixed samples.

    Samples where the factor vanishes are outside the domain of the
    inverse and are skipped rather than reported.
    """
    inv = OvershearSpec(s.shift, not s.inverted)
    for sample in _ROUNDTRIP_SAMPLES:
        try:
            back = overshear_apply(inv, overshear_apply(s, sample))
        except LambdaVanishes:
            continue
        drift = float(np.max(np.abs(back - sample)))
        if drift > 1e-9:
            raise StageFailed(
                "inverse-roundtrip", f"sample returns with error {drift:.3g}"
            )
    return inv


def right_translate(m, t) -> np.ndarray:
    """Slide `m` along its first-column fiber by `t`."""
    m = sl_matrix(m)
    t = complex(t)
    a, c = m[0, 0], m[0, 1]
    b, d = m[1, 0], m[1, 1]
    return np.array([[a, c + a * t], [b, d + b * t]], dtype=np.complex128)


def fiber_distance(a_mat, b_mat) -> float:
    """|t| for the translation carrying one matrix to the other.

    Both matrices must share a first column; the translation parameter is
    read off the better-conditioned second-column entry and cross-checked
    on the other one.
    """
    first = sl_matrix(a_mat)
    second = sl_matrix(b_mat)
    col_gap = float(np.max(np.abs(first[:, 0] - second[:, 0])))
    if col_gap > SAME_COLUMN_TOL:
        raise NotSameFiber(f"first columns differ by {col_gap:.3g}")
    a, b = first[0, 0], first[1, 0]
    dc = second[0, 1] - first[0, 1]
    dd = second[1, 1] - first[1, 1]
    if abs(a) >= abs(b):
        t = dc / a
        slack = abs(dd - b * t)
    else:
        t = dd / b
        slack = abs(dc - a * t)
    if slack > CROSS_CHECK_TOL:
        raise InconsistentFiber(
            f"second columns disagree with a single translation by {slack:.3g}"
        )
    return abs(t)


def fiber_affine_probe(s: OvershearSpec, v, samples):
    """Fit the map induced on the fiber coordinate; returns
    (slope, intercept, max residual).

    The fiber over `v` is swept by translations of a base matrix at the
    given parameter values, the overshear is applied, and the image
    parameters are fit affinely.  The slope recovers lambda(v).
    """
    v = np.asarray(v, dtype=np.complex128).reshape(2)
    if float(np.max(np.abs(v))) == 0.0:
        raise ZeroVector("the fiber base point must be nonzero")
    ts = [complex(t) for t in samples]
    if len(ts) < 2:
        raise ValueError("need at least two sample parameters")
    a, b = v
    # read the coordinate off the top entry whenever a is nonzero: the
    # base below makes that entry exactly a*t*lambda, so dividing by a
    # loses nothing; the bottom entry would carry the division branch's
    # eps/|a| cancellation noise near the wall
    top_route = abs(a) >= SMALL_CORNER_TOL or (a != 0 and b == 0)
    if top_route:
        base = np.array([[a, 0.0], [b, 1.0 / a]], dtype=np.complex128)
    else:
        base = np.array([[a, -1.0 / b], [b, 0.0]], dtype=np.complex128)
    origin = overshear_apply(s, base)
    coords = []
    for t in ts:
        img = overshear_apply(s, right_translate(base, t))
        if top_route:
            coords.append((img[0, 1] - origin[0, 1]) / a)
        else:
            coords.append((img[1, 1] - origin[1, 1]) / b)
    design = np.stack([np.array(ts), np.ones(len(ts), dtype=np.complex128)], axis=1)
    sol, *_ = np.linalg.lstsq(design, np.array(coords), rcond=None)
    slope, intercept = complex(sol[0]), complex(sol[1])
    residual = float(np.max(np.abs(design @ sol - np.array(coords))))
    return slope, intercept, residual


@dataclass(frozen=True)
class OvershearAut(Automorphism):
    """Overshear as a composable ambient map."""

    spec: OvershearSpec
    kind = "overshear"

    def apply(self, p: np.ndarray) -> np.ndarray:
        return overshear_apply(self.spec, p)

    def to_json(self) -> dict:
        return {"kind": self.kind, "factor": self.spec.to_json()}


def _left_move(points, rng):
    """A determinant-one matrix whose action clears both axes for every
    first column, found by seeded rejection."""
    for _ in range(_TRY_CAP):
        raw = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        det = raw[0, 0] * raw[1, 1] - raw[0, 1] * raw[1, 0]
        if abs(det) < 1e-6:
            continue
        cand = raw / np.sqrt(det)
        clearance = min(
            float(np.min(np.abs(cand @ p[:, 0]))) for p in points
        )
        if clearance >= AXIS_CLEARANCE:
            return cand
    raise StageFailed(
        "axis-move", f"no draw cleared the axes after {_TRY_CAP} tries"
    )


def _fiber_radii(points) -> list[float]:
    """Half the closest same-fiber gap per point; singletons get 1."""
    fibers = group_fibers([p[:, 0] for p in points])
    radii = [1.0] * len(points)
    for members in fibers.values():
        if len(members) < 2:
            continue
        for i in members:
            gap = min(
                fiber_distance(points[i], points[j]) for j in members if j != i
            )
            radii[i] = 0.5 * gap
    return radii


def _clearance_shear(points, radii, rng):
    """Overshear whose factor meets the per-point clearance target
    |lambda| * radius * column_norm > index."""
    fibers = group_fibers([p[:, 0] for p in points])
    reps = [points[members[0]][:, 0] for members in fibers.values()]
    targets = []
    for members in fibers.values():
        need = max(
            (k + 1) / (radii[k] * float(np.linalg.norm(points[k][:, 0])))
            for k in members
        )
        targets.append(2.0 * max(1.0, need))
    for _ in range(_TRY_CAP):
        u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        svals = [u[0] * v[0] + u[1] * v[1] for v in reps]
        scale = max(1.0, max(abs(x) for x in svals))
        gap = min(
            (abs(svals[i] - svals[j]) for i in range(len(svals))
             for j in range(i + 1, len(svals))),
            default=np.inf,
        )
        if gap <= DISTINCT_TOL * scale:
            continue
        nodes = [
            (svals[i], (targets[i] - 1.0) / reps[i][0]) for i in range(len(reps))
        ]
        inner = interpolate_nodes(nodes, distinct_tol=0.0)
        return OvershearSpec(BivariatePoly.from_separated(u, inner))
    raise StageFailed(
        "fiber-rescale", "no separating direction found for the fiber images"
    )


def sl2_column_pipeline(d: DiscreteSequence, seed: int = 0, max_fiber: int = MAX_FIBER):
    """Move a prefix with discrete first-column images until the second
    column is proper; returns (composite map, verdict).

    Stage one left-multiplies by a seeded generic determinant-one matrix
    so no first column touches a coordinate axis.  Stage two overshears
    so each point's fiber radius, scaled by its column norm, clears its
    index.  Stage three right-translates each fiber until every
    second-column image leaves the ball whose radius is the point's
    index, with translations drawn seeded-generic until the images are
    also pairwise separated.  `max_fiber` is the input gate's cap on
    first-column fiber sizes; exact enumerations need it raised.
    """
    if d.ambient.kind != "sln" or d.ambient.n != 2:
        raise AmbientMismatch("the pipeline runs over 2x2 matrices")
    if len(d) == 0:
        return Composite(()), Verdict.consistent("empty prefix; nothing to move")
    gate = pi_tame_check(d, first_column(2), max_fiber=max_fiber)
    if gate.is_violated:
        raise StageFailed("input-gate", f"first-column projection fails: {gate.detail}")
    rng = stream(seed, "sl2-pipeline")

    left = _left_move(d.points, rng)
    moved = [left @ p for p in d.points]

    radii = _fiber_radii(moved)
    spec = _clearance_shear(moved, radii, rng)
    for k, p in enumerate(moved):
        v = p[:, 0]
        have = abs(spec.lambda_at(v[0], v[1])) * radii[k] * float(np.linalg.norm(v))
        if not have > k + 1:
            raise StageFailed(
                "fiber-rescale",
                f"point {k} clears {have:.3g}, needs more than {k + 1}",
            )
    sheared = [overshear_apply(spec, p) for p in moved]

    fibers = group_fibers([p[:, 0] for p in sheared])
    verdict = None
    translations: list[complex] = []
    for _ in range(_TRY_CAP):
        translations = []
        final = list(sheared)
        for members in fibers.values():
            v = sheared[members[0]][:, 0]
            vnorm = float(np.linalg.norm(v))
            need = max(members) + 2 + max(
                float(np.linalg.norm(sheared[k][:, 1])) for k in members
            )
            t = (need / vnorm) * (1.0 + 0.25 * abs(rng.standard_normal()))
            t = complex(t * np.exp(2j * np.pi * rng.random()))
            translations.append(t)
            for k in members:
                final[k] = right_translate(sheared[k], t)
        images = [p[:, 1] for p in final]
        escaped = all(
            float(np.linalg.norm(img)) > k + 1 for k, img in enumerate(images)
        )
        verdict = properness_check(images, min_gap=MIN_GAP, max_fiber=MAX_FIBER)
        if escaped and not verdict.is_violated:
            break
    else:
        raise StageFailed(
            "ball-escape",
            f"translations kept colliding after {_TRY_CAP} rounds: {verdict.detail}",
        )

    elements = [
        QElement(2, np.array([[1.0, t], [0.0, 1.0]], dtype=np.complex128))
        for t in translations
    ]
    reps = [sheared[members[0]][:, 0] for members in fibers.values()]
    push = BundlePushAut(fit_q_map(reps, elements, seed=seed))
    composite = Composite((LinearAut(left), OvershearAut(spec), push))
    final_verdict = Verdict.consistent(f"{verdict.detail}; translation seed {seed}")
    return composite, final_verdict


_HALF_INTEGER = {3: 1, 7: 2, 11: 3}
_PLAIN = {1: 1, 2: 2}
_FIELD_TAGS = ("Q", "Q(i)", "Q(sqrt-2)", "Q(sqrt-3)", "Q(sqrt-7)", "Q(sqrt-11)")


def _field_params(tag: str):
    """(d, half_integer_flag) for a supported field tag; None for Q."""
    if tag == "Q":
        return None
    if tag == "Q(i)":
        return 1, False
    if tag.startswith("Q(sqrt-") and tag.endswith(")"):
        d = int(tag[len("Q(sqrt-"):-1])
        if d in _PLAIN:
            return d, False
        if d in _HALF_INTEGER:
            return d, True
    raise UnsupportedField(f"field {tag!r} is not in the supported list")


@dataclass(frozen=True)
class GaussianIntegerParams:
    """Which quadratic integer ring, and how far out to enumerate."""

    field: str
    height_bound: int

    def __post_init__(self):
        _field_params(self.field)
        if self.height_bound < 1:
            raise EmptyResult(
                f"height bound {self.height_bound} admits no matrices"
            )


def _ring_mul(p, q, d: int, half: bool):
    """Multiply x + y*w coordinates exactly; w*w = -d, or w - (1+d)/4 in
    the half-integer rings."""
    x, y = p
    u, v = q
    if half:
        c = (1 + d) // 4
        return (x * u - c * y * v, x * v + y * u + y * v)
    return (x * u - d * y * v, x * v + y * u)


@dataclass(frozen=True)
class ExactMatrix:
    """2x2 matrix with exact quadratic-integer entries.

    Each entry is an integer pair (x, y) meaning x + y*w; the layout is
    [[a, c], [b, d]] so (a, b) is the first column.
    """

    a: tuple[int, int]
    b: tuple[int, int]
    c: tuple[int, int]
    d: tuple[int, int]

    def to_complex(self, omega: complex) -> np.ndarray:
        def emb(p):
            return p[0] + p[1] * omega

        return np.array(
            [[emb(self.a), emb(self.c)], [emb(self.b), emb(self.d)]],
            dtype=np.complex128,
        )

    def to_json(self) -> dict:
        return {
            "a": [self.a[0], self.a[1]],
            "b": [self.b[0], self.b[1]],
            "c": [self.c[0], self.c[1]],
            "d": [self.d[0], self.d[1]],
        }


def _omega_complex(field) -> complex:
    if field is None:
        return 0j
    d, half = field
    if half:
        return complex(0.5, math.sqrt(d) / 2.0)
    return complex(0.0, math.sqrt(d))


def gaussian_sl2_exact(p: GaussianIntegerParams) -> tuple[ExactMatrix, ...]:
    """Every determinant-one matrix with coordinate height within the
    bound, in lexicographic entry order, with exact integer arithmetic."""
    field = _field_params(p.field)
    h = p.height_bound
    span = range(-h, h + 1)
    if field is None:
        entries = [(x, 0) for x in span]
        d_val, half = 0, False
    else:
        d_val, half = field
        entries = [(x, y) for x in span for y in span]
    out = []
    for ea, eb, ec, ed in product(entries, repeat=4):
        ad = _ring_mul(ea, ed, d_val, half)
        cb = _ring_mul(ec, eb, d_val, half)
        if (ad[0] - cb[0], ad[1] - cb[1]) == (1, 0):
            out.append(ExactMatrix(ea, eb, ec, ed))
    return tuple(out)


def _lattice_min_modulus(field, h: int) -> float:
    """Smallest modulus of a nonzero ring element reachable as a
    coordinate difference at the given height."""
    omega = _omega_complex(field)
    span = range(-2 * h, 2 * h + 1)
    best = np.inf
    for x in span:
        for y in span if field is not None else (0,):
            if (x, y) == (0, 0):
                continue
            best = min(best, abs(x + y * omega))
    return float(best)


def gaussian_sl2_generate(p: GaussianIntegerParams) -> DiscreteSequence:
    """The exact enumeration embedded as a matrix prefix; first-column
    images stay on the integer lattice, which has unit minimum gap."""
    field = _field_params(p.field)
    exacts = gaussian_sl2_exact(p)
    if not exacts:
        raise EmptyResult("no matrices at this height")
    if _lattice_min_modulus(field, p.height_bound) < 1.0 - 1e-12:
        raise UnsupportedField(
            f"field {p.field!r} packs lattice points closer than one"
        )
    omega = _omega_complex(field)
    points = tuple(e.to_complex(omega) for e in exacts)
    gen = GeneratorInfo.of("sl2-gauss", field=p.field, height_bound=p.height_bound)
    return DiscreteSequence(sln(2), points, gen)
