"""Shared primitives: ambient spaces, discrete sequences, exhaustion
functions, and the discreteness/properness checks every other module
builds on.

Conventions fixed here for the whole package:

* points in flat ambients are complex numpy vectors, matrix-group points
  are complex numpy square matrices;
* the exhaustion on the matrix group is the maximum Euclidean column
  norm, on flat space the Euclidean norm;
* checks on finite prefixes never claim more than the prefix supports:
  they return a three-valued `Verdict`, and the certified state is
  reserved for criteria with an actual proof behind them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    AmbientMismatch,
    DeterminantError,
    DimensionMismatch,
    PointOutsideAmbient,
    UnsupportedPair,
)

DET_TOL = 1e-9
MIN_GAP = 1e-6
DISTINCT_TOL = 1e-6
MAX_FIBER = 8

AMBIENT_KINDS = ("cn", "punctured-cn", "disc-plane", "sln")

EUCLIDEAN_NORM = "euclidean-norm"
MAX_COLUMN_NORM = "max-column-norm"
PUNCTURED_TAU = "punctured-tau"
DISC_PLANE_TAU = "disc-plane-tau"

EXHAUSTION_KINDS = (EUCLIDEAN_NORM, MAX_COLUMN_NORM, PUNCTURED_TAU, DISC_PLANE_TAU)


@dataclass(frozen=True)
class AmbientSpace:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in AMBIENT_KINDS:
            raise AmbientMismatch(f"unknown ambient kind {self.kind!r}")
        if self.kind == "cn" and self.n < 1:
            raise DimensionMismatch("flat ambient needs n >= 1")
        if self.kind in ("punctured-cn", "sln") and self.n < 2:
            raise DimensionMismatch(f"{self.kind} needs n >= 2")
        if self.kind == "disc-plane" and self.n != 2:
            raise DimensionMismatch("disc-plane points are (z, w) pairs; n must be 2")

    @property
    def is_matrix(self) -> bool:
        return self.kind == "sln"

    def default_exhaustion(self) -> str:
        return {
            "cn": EUCLIDEAN_NORM,
            "punctured-cn": PUNCTURED_TAU,
            "disc-plane": DISC_PLANE_TAU,
            "sln": MAX_COLUMN_NORM,
        }[self.kind]


def cn(n: int) -> AmbientSpace:
    return AmbientSpace("cn", n)


def punctured_cn(n: int) -> AmbientSpace:
    return AmbientSpace("punctured-cn", n)


def disc_plane() -> AmbientSpace:
    return AmbientSpace("disc-plane", 2)


def sln(n: int) -> AmbientSpace:
    return AmbientSpace("sln", n)


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError(f"{what} contains non-finite entries")


def sl_matrix(entries, det_tol: float = DET_TOL) -> np.ndarray:
    """Validate a square complex matrix as unimodular and return it.

    The tolerance is scaled by the product of column norms (the natural
    magnitude of a determinant of that size), floored at 1.
    """
    a = np.array(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    _require_finite(a, "matrix")
    scale = max(1.0, float(np.prod(np.linalg.norm(a, axis=0))))
    det = complex(np.linalg.det(a))
    if abs(det - 1.0) > det_tol * scale:
        raise DeterminantError(
            f"determinant {det:.6g} differs from 1 by {abs(det - 1.0):.3g} "
            f"(allowed {det_tol * scale:.3g})"
        )
    return a


def as_point(ambient: AmbientSpace, value, det_tol: float = DET_TOL) -> np.ndarray:
    """Coerce and validate one point of the given ambient space."""
    if ambient.is_matrix:
        a = sl_matrix(value, det_tol)
        if a.shape[0] != ambient.n:
            raise DimensionMismatch(
                f"expected {ambient.n}x{ambient.n}, got {a.shape[0]}x{a.shape[1]}"
            )
        return a
    v = np.array(value, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] != ambient.n:
        raise DimensionMismatch(f"expected a vector of length {ambient.n}")
    _require_finite(v, "point")
    if ambient.kind == "punctured-cn" and not np.any(v != 0):
        raise PointOutsideAmbient("the puncture (origin) is not a point of this space")
    if ambient.kind == "disc-plane" and abs(v[0]) >= 1.0:
        raise PointOutsideAmbient(f"|z| = {abs(v[0]):.6g} is not inside the unit disc")
    return v


@dataclass(frozen=True)
class GeneratorInfo:
    """Symbolic family descriptor attached to a generated sequence."""

    family: str
    params: tuple[tuple[str, object], ...] = ()

    @classmethod
    def of(cls, family: str, **params) -> "GeneratorInfo":
        return cls(family, tuple(sorted(params.items())))

    def get(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def to_json(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorInfo":
        return cls.of(obj["family"], **obj.get("params", {}))


def _flat(p: np.ndarray) -> np.ndarray:
    return p.reshape(-1)


def max_norm_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Largest entrywise modulus of the difference; the prefix metric."""
    return float(np.max(np.abs(_flat(p) - _flat(q))))


@dataclass(frozen=True)
class DiscreteSequence:
    """A finite prefix of points in a tagged ambient space."""

    ambient: AmbientSpace
    points: tuple[np.ndarray, ...]
    generator: GeneratorInfo | None = None

    def __post_init__(self):
        validated = tuple(as_point(self.ambient, p) for p in self.points)
        object.__setattr__(self, "points", validated)
        seen: dict[bytes, int] = {}
        for i, p in enumerate(validated):
            key = (_flat(p) + 0.0).tobytes()
            if key in seen:
                raise ValueError(
                    f"points {seen[key]} and {i} coincide; prefixes must be "
                    "pairwise distinct"
                )
            seen[key] = i

    def __len__(self) -> int:
        return len(self.points)

    def replace_points(self, points: Iterable, generator=None) -> "DiscreteSequence":
        return DiscreteSequence(self.ambient, tuple(points), generator)

    def to_json(self) -> dict:
        pts = []
        for p in self.points:
            if self.ambient.is_matrix:
                pts.append([[_pair(z) for z in row] for row in p])
            else:
                pts.append([_pair(z) for z in p])
        obj = {"ambient": self.ambient.kind, "n": self.ambient.n, "points": pts}
        if self.generator is not None:
            obj["generator"] = self.generator.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteSequence":
        ambient = AmbientSpace(obj["ambient"], int(obj["n"]))
        pts = []
        for entry in obj["points"]:
            if ambient.is_matrix:
                pts.append([[_unpair(z) for z in row] for row in entry])
            else:
                pts.append([_unpair(z) for z in entry])
        gen = obj.get("generator")
        return cls(
            ambient,
            tuple(pts),
            GeneratorInfo.from_json(gen) if gen is not None else None,
        )


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _unpair(p) -> complex:
    return complex(float(p[0]), float(p[1]))


@dataclass(frozen=True)
class HeightAssignment:
    """Positive target heights, one per point index."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(not np.isfinite(v) or v <= 0 for v in vals):
            raise ValueError("heights must be finite and positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, count: int) -> "HeightAssignment":
        return cls((float(value),) * count)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]


VIOLATED = "violated"
CONSISTENT = "consistent-up-to-prefix"
CERTIFIED = "certified"


@dataclass(frozen=True)
class Verdict:
    """Three-valued outcome of a finite-prefix criterion."""

    state: str
    witness: tuple[int, ...] = ()
    reason: str = ""
    detail: str = ""

    def __post_init__(self):
        if self.state not in (VIOLATED, CONSISTENT, CERTIFIED):
            raise ValueError(f"unknown verdict state {self.state!r}")
        if self.state == VIOLATED and not self.witness:
            raise ValueError("a violation needs at least one witness index")
        if self.state == CERTIFIED and not self.reason:
            raise ValueError("a certificate needs a criterion tag")

    @classmethod
    def violated(cls, witness: Sequence[int], detail: str = "") -> "Verdict":
        return cls(VIOLATED, tuple(int(i) for i in witness), "", detail)

    @classmethod
    def consistent(cls, detail: str = "") -> "Verdict":
        return cls(CONSISTENT, (), "", detail)

    @classmethod
    def certified(cls, reason: str, detail: str = "") -> "Verdict":
        return cls(CERTIFIED, (), reason, detail)

    @property
    def is_violated(self) -> bool:
        return self.state == VIOLATED

    @property
    def is_certified(self) -> bool:
        return self.state == CERTIFIED

    def to_json(self) -> dict:
        return {
            "state": self.state,
            "witness": list(self.witness),
            "reason": self.reason,
            "detail": self.detail,
        }


def exhaust_eval(kind: str, p, ambient: AmbientSpace) -> float:
    """Evaluate one of the shipped exhaustion functions at a point."""
    p = as_point(ambient, p)
    if kind == EUCLIDEAN_NORM:
        if ambient.is_matrix:
            raise UnsupportedPair("euclidean-norm applies to vector ambients")
        return float(np.linalg.norm(p))
    if kind == MAX_COLUMN_NORM:
        if not ambient.is_matrix:
            raise UnsupportedPair("max-column-norm applies to the matrix ambient")
        return float(np.max(np.linalg.norm(p, axis=0)))
    if kind == PUNCTURED_TAU:
        r = float(np.linalg.norm(p))
        if r == 0.0:
            raise PointOutsideAmbient("punctured exhaustion undefined at the origin")
        return max(r, 1.0 / r)
    if kind == DISC_PLANE_TAU:
        if ambient.kind != "disc-plane":
            raise UnsupportedPair("disc-plane-tau applies to the disc-plane ambient")
        z, w = p[0], p[1]
        return float(abs(w) + 1.0 / (1.0 - abs(z)))
    raise UnsupportedPair(f"unknown exhaustion kind {kind!r}")


def _close_pair_scan(flats: np.ndarray, min_gap: float) -> tuple[int, int] | None:
    """First pair of rows within min_gap in the max-norm, or None.

    Sorting on the real part of the first coordinate bounds the window:
    any pair closer than min_gap in max-norm is also closer than min_gap
    in that one coordinate.
    """
    m = flats.shape[0]
    order = np.argsort(flats[:, 0].real, kind="stable")
    anchor = flats[order, 0].real
    for a in range(m):
        b = a + 1
        while b < m and anchor[b] - anchor[a] <= min_gap:
            i, j = int(order[a]), int(order[b])
            if np.max(np.abs(flats[i] - flats[j])) <= min_gap:
                return (min(i, j), max(i, j))
            b += 1
    return None


def discreteness_check(d: DiscreteSequence, min_gap: float = MIN_GAP) -> Verdict:
    """Violated if two prefix points sit within min_gap of each other."""
    if len(d) == 0:
        raise ValueError("discreteness needs a nonempty prefix")
    if min_gap <= 0:
        raise ValueError("min_gap must be positive")
    flats = np.stack([_flat(p) for p in d.points])
    hit = _close_pair_scan(flats, float(min_gap))
    if hit is not None:
        i, j = hit
        gap = max_norm_distance(d.points[i], d.points[j])
        return Verdict.violated((i, j), f"points {i} and {j} are {gap:.3g} apart")
    return Verdict.consistent(f"all pairwise gaps exceed {min_gap:g}")


def group_fibers(images: Sequence[np.ndarray]) -> dict[bytes, list[int]]:
    """Indices grouped by exact image equality."""
    fibers: dict[bytes, list[int]] = {}
    for i, img in enumerate(images):
        key = (_flat(np.asarray(img, dtype=np.complex128)) + 0.0).tobytes()
        fibers.setdefault(key, []).append(i)
    return fibers


def properness_check(
    images: Sequence[np.ndarray],
    min_gap: float = MIN_GAP,
    max_fiber: int = MAX_FIBER,
    fiber_keys: dict[bytes, list[int]] | None = None,
) -> Verdict:
    """Discrete image and bounded fibers, at prefix scale.

    `fiber_keys` may supply the grouping (original indices per image);
    when omitted, images are grouped by exact equality.
    """
    if len(images) == 0:
        raise ValueError("properness needs a nonempty image list")
    arrays = [np.asarray(img, dtype=np.complex128) for img in images]
    fibers = fiber_keys if fiber_keys is not None else group_fibers(arrays)
    for members in fibers.values():
        if len(members) > max_fiber:
            return Verdict.violated(
                members,
                f"fiber of size {len(members)} exceeds the bound {max_fiber}",
            )
    reps = [members[0] for members in fibers.values()]
    if len(reps) >= 2:
        flats = np.stack([_flat(arrays[i]) for i in reps])
        hit = _close_pair_scan(flats, float(min_gap))
        if hit is not None:
            i, j = reps[hit[0]], reps[hit[1]]
            return Verdict.violated(
                (i, j), f"distinct images {i} and {j} are within {min_gap:g}"
            )
    return Verdict.consistent(
        f"{len(reps)} distinct images, largest fiber "
        f"{max(len(v) for v in fibers.values())}"
    )


_EXHAUSTION_FLOOR = {
    EUCLIDEAN_NORM: 0.0,
    PUNCTURED_TAU: 1.0,
    DISC_PLANE_TAU: 1.0,
    MAX_COLUMN_NORM: 1.0,
}


def zeta0_reduce(
    zeta: HeightAssignment, rho: str, tau: str, ambient: AmbientSpace
) -> HeightAssignment:
    """Convert a height demand against tau into one against rho.

    Per value c the output exceeds sup{rho(p) : tau(p) < c} by 1. Only
    pairs with a closed-form sublevel supremum are supported; anything
    else raises rather than estimating a supremum numerically.
    """
    if rho not in EXHAUSTION_KINDS or tau not in EXHAUSTION_KINDS:
        raise UnsupportedPair(f"unknown exhaustion kinds ({rho!r}, {tau!r})")

    def reduce_one(c: float) -> float:
        if rho == tau:
            floor = _EXHAUSTION_FLOOR[tau]
            return c + 1.0 if c > floor else 1.0
        if rho == EUCLIDEAN_NORM and tau == PUNCTURED_TAU:
            return c + 1.0 if c > 1.0 else 1.0
        raise UnsupportedPair(
            f"no closed-form sublevel supremum for rho={rho!r}, tau={tau!r}"
        )

    return HeightAssignment(tuple(reduce_one(c) for c in zeta.values))


class Automorphism:
    """Duck-typed contract for ambient-space maps; subclasses set `kind`
    and implement `apply` plus `to_json`."""

    kind = "abstract"

    def apply(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, p) -> np.ndarray:
        return self.apply(np.asarray(p, dtype=np.complex128))

    def to_json(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class IdentityAut(Automorphism):
    kind = "identity"

    def apply(self, p: np.ndarray) -> np.ndarray:
        return np.array(p, dtype=np.complex128)


@dataclass(frozen=True)
class LinearAut(Automorphism):
    """Invertible linear map on a vector ambient."""

    matrix: np.ndarray
    kind = "linear"

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "matrix": [[_pair(z) for z in row] for row in self.matrix],
        }


@dataclass(frozen=True)
class ScalarAut(Automorphism):
    """Multiplication by a nonzero scalar."""

    factor: complex
    kind = "scalar"

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.factor * p

    def to_json(self) -> dict:
        return {"kind": self.kind, "factor": _pair(self.factor)}


@dataclass(frozen=True)
class Composite(Automorphism):
    """Left-to-right composition: stages[0] runs first."""

    stages: tuple[Automorphism, ...]
    kind = "composite"

    def apply(self, p: np.ndarray) -> np.ndarray:
        for s in self.stages:
            p = s.apply(p)
        return p

    def to_json(self) -> dict:
        return {"kind": self.kind, "stages": [s.to_json() for s in self.stages]}


def canonical_json(data) -> str:
    """Stable serialization: sorted keys, repr floats, trailing newline.

    Identical values always produce identical bytes, and every float
    round-trips exactly (shortest repr).
    """
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_sequence(d: DiscreteSequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(d.to_json()))


def load_sequence(path) -> DiscreteSequence:
    with open(path, "r", encoding="utf-8") as fh:
        return DiscreteSequence.from_json(json.load(fh))
