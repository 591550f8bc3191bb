"""The product of the unit disc with the complex plane.

Every automorphism of this product fibers over the disc: a Moebius map
downstairs, an affine map w -> f(z) w + g(z) upstairs with f
nonvanishing.  The module carries that explicit group, the prefix-scale
tameness classifier for its discrete subsets, the quantitative failure
of any would-be tameness transport for base-accumulating sequences, and
the Poincare-distance obstruction that separates base configurations.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .cn_tame import Polynomial
from .core import (
    MAX_FIBER,
    MIN_GAP,
    Automorphism,
    DiscreteSequence,
    Verdict,
    _close_pair_scan,
    _pair,
    as_point,
    disc_plane as disc_plane_space,
    group_fibers,
)
from .errors import AmbientMismatch, InconclusivePrefix, PointOutsideAmbient, ZeroPoint
from .rng import stream

ALPHA_MARGIN = 1e-12

_FIT_SAMPLES = 4096
_FIT_DEGREE_CAP = 512
# The fit ring must clear the evaluation disc for Taylor decay, yet stay
# small enough that exp(logf) does not blow up the FFT's dynamic range.
_FIT_RING_CAP = 1.075
_EVAL_RADIUS = 1.0 - 1e-3
_RESIDUAL_SEED = 31


@dataclass(frozen=True)
class MoebiusDisc:
    """Disc automorphism z -> e^{i theta} (z - alpha) / (1 - conj(alpha) z)."""

    theta: float = 0.0
    alpha: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "alpha", complex(self.alpha))
        if abs(self.alpha) >= 1.0 - ALPHA_MARGIN:
            raise PointOutsideAmbient(
                f"|alpha| = {abs(self.alpha):.6g} is not inside the unit disc"
            )

    @property
    def is_identity(self) -> bool:
        return self.theta == 0.0 and self.alpha == 0j

    def matrix(self) -> np.ndarray:
        ph = cmath.exp(1j * self.theta)
        return np.array(
            [[ph, -ph * self.alpha], [-np.conj(self.alpha), 1.0]],
            dtype=np.complex128,
        )

    @classmethod
    def from_matrix(cls, m) -> "MoebiusDisc":
        m = np.asarray(m, dtype=np.complex128)
        return cls(cmath.phase(complex(m[0, 0] / m[1, 1])), -complex(np.conj(m[1, 0] / m[1, 1])))

    def apply(self, z):
        ph = cmath.exp(1j * self.theta)
        return ph * (z - self.alpha) / (1.0 - np.conj(self.alpha) * z)

    def compose(self, other: "MoebiusDisc") -> "MoebiusDisc":
        """self after other; other acts first."""
        return MoebiusDisc.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "MoebiusDisc":
        return MoebiusDisc(-self.theta, -cmath.exp(1j * self.theta) * self.alpha)

    def to_json(self) -> dict:
        return {"theta": self.theta, "alpha": _pair(self.alpha)}


@dataclass(frozen=True)
class DiscPlaneAut(Automorphism):
    """(z, w) -> (phi(z), exp(logf(z)) w + g(z)).

    The multiplier is stored through its logarithm, so nonvanishing on
    the disc is structural instead of a numerical check.
    """

    phi: MoebiusDisc
    logf: Polynomial
    g: Polynomial
    kind = "disc-plane"

    @classmethod
    def identity(cls) -> "DiscPlaneAut":
        return cls(MoebiusDisc(), Polynomial(), Polynomial())

    @property
    def is_plain_identity(self) -> bool:
        return self.phi.is_identity and self.logf.is_zero and self.g.is_zero

    def multiplier(self, z):
        return np.exp(self.logf(z))

    def apply(self, p: np.ndarray) -> np.ndarray:
        q = as_point(disc_plane_space(), p)
        z, w = complex(q[0]), complex(q[1])
        return np.array(
            [self.phi.apply(z), np.exp(self.logf(z)) * w + self.g(z)],
            dtype=np.complex128,
        )

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "phi": self.phi.to_json(),
            "logf": self.logf.to_json(),
            "g": self.g.to_json(),
        }


def dp_apply(a: DiscPlaneAut, p) -> np.ndarray:
    return a.apply(np.asarray(p, dtype=np.complex128))


def _taylor_fit(fn, pole_radius: float) -> Polynomial:
    """Taylor polynomial of a function holomorphic on |z| < pole_radius (> 1),
    fitted by FFT on a ring between the evaluation disc and the singularity."""
    rc = min(0.5 * (1.0 + pole_radius), _FIT_RING_CAP)
    ring = rc * np.exp(2j * np.pi * np.arange(_FIT_SAMPLES) / _FIT_SAMPLES)
    vals = np.asarray(fn(ring), dtype=np.complex128)
    coeffs = np.fft.fft(vals) / _FIT_SAMPLES
    coeffs = coeffs[: _FIT_DEGREE_CAP + 1] / rc ** np.arange(_FIT_DEGREE_CAP + 1)
    top = float(np.max(np.abs(coeffs)))
    if top > 0.0:
        coeffs[np.abs(coeffs) < 1e-16 * top] = 0.0
    return Polynomial(tuple(complex(c) for c in coeffs))


def _pole_radius(mob: MoebiusDisc) -> float:
    return math.inf if mob.alpha == 0 else 1.0 / abs(mob.alpha)


def _worst_roundtrip(got_fn, want_fn, count: int, label: str) -> float:
    rng = stream(_RESIDUAL_SEED, label)
    worst = 0.0
    for _ in range(count):
        r = _EVAL_RADIUS * math.sqrt(float(rng.uniform()))
        z = r * cmath.exp(2j * math.pi * float(rng.uniform()))
        w = complex(rng.standard_normal() + 1j * rng.standard_normal())
        p = np.array([z, w], dtype=np.complex128)
        got = got_fn(p)
        want = want_fn(p)
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def dp_compose(a: DiscPlaneAut, b: DiscPlaneAut) -> tuple[DiscPlaneAut, float]:
    """Composite acting as b first, then a, plus a max residual.

    The Moebius part composes exactly.  The fiber part stays exact when b
    keeps the base rigidly rotated and either a's multiplier is constant
    or b adds nothing upstairs; otherwise the fiber data is refitted as
    polynomials and the worst mismatch over seeded test points on the
    evaluation disc is reported.
    """
    if b.is_plain_identity:
        return a, 0.0
    if a.is_plain_identity:
        return b, 0.0
    phi_c = a.phi.compose(b.phi)
    if b.phi.alpha == 0 and (a.logf.degree <= 0 or b.g.is_zero):
        phase = cmath.exp(1j * b.phi.theta)
        logf_c = a.logf.scale_argument(phase) + b.logf
        if b.g.is_zero:
            g_c = a.g.scale_argument(phase)
        else:
            fa = cmath.exp(complex(a.logf.coeffs[0])) if a.logf.coeffs else 1.0
            g_c = Polynomial((fa,)) * b.g + a.g.scale_argument(phase)
        return DiscPlaneAut(phi_c, logf_c, g_c), 0.0

    pole = _pole_radius(b.phi)
    logf_c = _taylor_fit(lambda z: a.logf(b.phi.apply(z)) + b.logf(z), pole)
    g_c = _taylor_fit(
        lambda z: np.exp(a.logf(b.phi.apply(z))) * b.g(z) + a.g(b.phi.apply(z)),
        pole,
    )
    comp = DiscPlaneAut(phi_c, logf_c, g_c)
    residual = _worst_roundtrip(
        comp.apply, lambda p: a.apply(b.apply(p)), 200, "compose-residual"
    )
    return comp, residual


def dp_invert(a: DiscPlaneAut) -> tuple[DiscPlaneAut, float]:
    """Inverse in the same representation: (phi^{-1}, 1/(f o phi^{-1}),
    -(g o phi^{-1})/(f o phi^{-1})), with the fiber data refitted when the
    base part genuinely moves points; residual over 1000 roundtrips."""
    phi_inv = a.phi.inverse()
    if a.phi.alpha == 0:
        phase = cmath.exp(-1j * a.phi.theta)
        logf_i = -a.logf.scale_argument(phase)
        if a.logf.degree <= 0:
            fa = cmath.exp(complex(a.logf.coeffs[0])) if a.logf.coeffs else 1.0
            g_i = Polynomial((-1.0 / fa,)) * a.g.scale_argument(phase)
            inv = DiscPlaneAut(phi_inv, logf_i, g_i)
            return inv, 0.0
        g_i = _taylor_fit(
            lambda z: -a.g(phase * z) * np.exp(-a.logf(phase * z)), math.inf
        )
    else:
        pole = _pole_radius(phi_inv)
        logf_i = _taylor_fit(lambda z: -a.logf(phi_inv.apply(z)), pole)
        g_i = _taylor_fit(
            lambda z: -a.g(phi_inv.apply(z)) * np.exp(-a.logf(phi_inv.apply(z))),
            pole,
        )
    inv = DiscPlaneAut(phi_inv, logf_i, g_i)
    residual = _worst_roundtrip(
        lambda p: inv.apply(a.apply(p)), lambda p: p, 1000, "invert-residual"
    )
    return inv, residual


def dp_classify(
    d: DiscreteSequence,
    min_gap_disc: float = MIN_GAP,
    max_fiber: int = MAX_FIBER,
) -> Verdict:
    """Prefix-scale tameness classification over the disc factor.

    An oversized fiber or an interior accumulation pattern of the base
    points violates outright; a generator-declared monotone escape of the
    base to the unit circle with singleton fibers certifies; anything
    else stays consistent-up-to-prefix.
    """
    if d.ambient.kind != "disc-plane":
        raise AmbientMismatch(f"expected a disc-plane sequence, got {d.ambient.kind}")
    zs = np.array([complex(p[0]) for p in d.points])
    fibers = group_fibers([np.array([z]) for z in zs])
    for members in fibers.values():
        if len(members) > max_fiber:
            return Verdict.violated(
                tuple(members),
                f"fiber over z = {zs[members[0]]:.6g} has {len(members)} points "
                f"(cap {max_fiber})",
            )
    first_at = sorted(members[0] for members in fibers.values())
    interior = [i for i in first_at if 1.0 - abs(zs[i]) > 10.0 * min_gap_disc]
    if len(interior) >= 2:
        flats = zs[np.array(interior)].reshape(-1, 1)
        hit = _close_pair_scan(flats, float(min_gap_disc))
        if hit is not None:
            i, j = interior[hit[0]], interior[hit[1]]
            return Verdict.violated(
                (i, j),
                f"base points {i} and {j} are {abs(zs[i] - zs[j]):.3g} apart "
                f"well inside the disc",
            )
    escapes = bool(d.generator is not None and d.generator.get("boundary_escape"))
    radii = np.abs(zs)
    monotone = bool(np.all(np.diff(radii) >= 0.0))
    singletons = all(len(m) == 1 for m in fibers.values())
    if escapes and monotone and singletons:
        return Verdict.certified(
            "boundary-escape",
            "declared monotone escape of the base verified on the prefix; "
            "all fibers are singletons",
        )
    return Verdict.consistent("no oversized fiber or interior base collapse found")


@dataclass(frozen=True)
class DpNontameReport:
    """First index where a candidate automorphism undershoots the doubling
    height demand along a base-accumulating sequence."""

    first_failure_index: int
    proximity_cap: float
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "first_failure_index": self.first_failure_index,
            "proximity_cap": self.proximity_cap,
            "lhs": list(self.lhs),
            "rhs": list(self.rhs),
        }


def dp_nontame_bound(seq: DiscreteSequence, a: DiscPlaneAut) -> DpNontameReport:
    """Quantitative failure witness for a candidate automorphism against
    heights R_k = 2^k |q_k| along points (p_k, q_k) with p_k convergent.

    The achieved height of the image is bounded by the fiber magnitude
    plus the boundary-proximity term 1/(1 - |phi(p_k)|); the first index
    where that bound drops below R_k (with a small safety margin on R_k)
    is the witness.
    """
    if seq.ambient.kind != "disc-plane":
        raise AmbientMismatch(f"expected a disc-plane sequence, got {seq.ambient.kind}")
    ps = np.array([complex(p[0]) for p in seq.points])
    qs = np.array([complex(p[1]) for p in seq.points])
    if np.any(qs == 0):
        raise ZeroPoint("fiber coordinates q_k must be nonzero")
    count = len(ps)
    if count >= 4:
        def diam(arr):
            return float(np.max(np.abs(arr[:, None] - arr[None, :])))

        whole, tail = diam(ps), diam(ps[count // 2 :])
        if tail > 0.5 * whole + 1e-12:
            raise ValueError("base points p_k do not look convergent on this prefix")
    lhs, rhs = [], []
    for k in range(1, count + 1):
        z, q = ps[k - 1], qs[k - 1]
        image_zn = abs(a.phi.apply(z))
        lhs.append(
            float(abs(np.exp(a.logf(z)) * q + a.g(z)) + 1.0 / (1.0 - image_zn))
        )
        rhs.append(float(2.0**k * abs(q) * (1.0 + 1e-6)))
    cap = max(
        1.0 / (1.0 - abs(a.phi.apply(z))) for z in ps
    )
    for k in range(1, count + 1):
        if lhs[k - 1] < rhs[k - 1]:
            return DpNontameReport(k, float(cap), tuple(lhs), tuple(rhs))
    raise InconclusivePrefix(
        f"no index up to {count} undershoots the doubling heights; extend the prefix"
    )


def poincare_distance(a: complex, b: complex) -> float:
    m = abs((a - b) / (1.0 - np.conj(b) * a))
    return float(math.log((1.0 + m) / (1.0 - m)))


def poincare_signature(points) -> np.ndarray:
    """Sorted multiset of pairwise Poincare distances; a Moebius-invariant
    fingerprint of a finite base configuration."""
    zs = [complex(z) for z in points]
    for z in zs:
        if abs(z) >= 1.0:
            raise PointOutsideAmbient(f"|z| = {abs(z):.6g} is not inside the unit disc")
    out = [
        poincare_distance(zs[i], zs[j])
        for i in range(len(zs))
        for j in range(i + 1, len(zs))
    ]
    return np.array(sorted(out))


def signature_csv(signature) -> str:
    """One distance per line, 15 significant digits."""
    return "".join(f"{float(d):.15g}\n" for d in np.asarray(signature))


def inequivalent_base_pair() -> tuple[tuple[complex, ...], tuple[complex, ...]]:
    """Two three-point base configurations with different signatures, so no
    automorphism of the product can match one discrete set onto the other."""
    return ((0j, 0.5 + 0j, 0.5j), (0j, 0.6 + 0j, 0.5j))
