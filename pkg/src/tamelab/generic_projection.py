"""Seeded Monte-Carlo estimates for torus projections of 2x2 matrices.

The compact group SU(n) is sampled through a counter-addressed Haar
sampler: every draw is a pure function of (n, seed, draw index), so a
batch partitioned across workers reproduces the single-worker stream
bit for bit. On top of the sampler sit estimators for how often a
twisted torus projection of a matrix stays inside a small ball:

  * `InvariantEmbedding` maps g = [[a, c], [b, d]] to the right-torus
    invariant tuple (ac, ad, bc, bd), the coordinate chart of the
    quotient by diag(t, 1/t).
  * `measure_estimate` samples the tail event "the embedded image of
    the moved matrix has norm below r". The shipped way of moving a
    matrix is conjugation, which twists the torus being quotiented by;
    left translation is kept as a configuration value but its tuple
    norm is unitarily invariant, so translation estimates are exact
    indicator functions of the input alone.
  * `g_estimate` takes the upper envelope over seeded unit-sphere
    probes, `threshold_estimate` binary-searches the radii at which
    the tail mass drops below the budget 2^-(n+1), and `omega_check`
    measures how often a sampled twist keeps a finite prefix proper
    and collision-free away from the center.
  * `select_tame_subset` greedily extracts a subsequence climbing past
    estimated threshold radii.

A norm floor worth knowing about: for any matrix the tuple norm equals
the product of the two column norms, which dominates |det|. Moving a
determinant-one matrix by unitaries on either side cannot push the
embedded image below norm one, so tail radii at or under one have
exactly zero mass on the group itself. Decay is visible above the
floor, and for off-group points of large entry norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DET_TOL,
    MAX_FIBER,
    MIN_GAP,
    DiscreteSequence,
    GeneratorInfo,
    cn,
    properness_check,
    sln,
)
from .errors import (
    AmbientMismatch,
    DimensionMismatch,
    PrefixTooBounded,
    SearchExhausted,
    ZeroVector,
)
from .rng import stream

UNITARY_TOL = 1e-10
CENTRAL_RATIO_TOL = 1e-8
RADIUS_CAP = 1e12
SEARCH_REL_TOL = 1e-2

ACTIONS = ("conjugation", "translation")

_MASK64 = (1 << 64) - 1
_INV53 = float(2.0**-53)


@dataclass(frozen=True)
class HaarSampler:
    """Addressable source of Haar-distributed SU(n) matrices.

    The draw at index `counter` depends only on (n, seed, counter):
    the raw Philox stream for key (seed, n) is cut into fixed-size
    blocks, one block window per draw, so any batch decomposition
    yields the identical matrices.
    """

    n: int
    seed: int
    counter: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if self.counter < 0:
            raise ValueError("draw index must be nonnegative")

    @property
    def _blocks_per_draw(self) -> int:
        # 2 n^2 uniforms feed n^2 complex gaussians; Philox emits 4
        # raw words per 128-bit counter step.
        return (2 * self.n * self.n + 3) // 4

    def advanced(self, draws: int) -> "HaarSampler":
        return replace(self, counter=self.counter + int(draws))

    def raw_uniforms(self, count: int) -> np.ndarray:
        """Rows of 2 n^2 uniforms in [0, 1), one row per draw."""
        bpd = self._blocks_per_draw
        key = np.array([self.seed & _MASK64, self.n], dtype=np.uint64)
        start = self.counter * bpd
        bits = np.random.Philox(
            key=key, counter=[start & _MASK64, start >> 64, 0, 0]
        ).random_raw(count * bpd * 4)
        words = bits.reshape(count, bpd * 4)[:, : 2 * self.n * self.n]
        return (words >> np.uint64(11)).astype(np.float64) * _INV53


def haar_su_batch(sampler: HaarSampler, count: int) -> np.ndarray:
    """Stack of `count` consecutive draws starting at sampler.counter."""
    if count < 1:
        raise ValueError("batch needs at least one draw")
    n = sampler.n
    u = sampler.raw_uniforms(count)
    radial = u[:, : n * n]
    angular = u[:, n * n :]
    ginibre = np.sqrt(-np.log1p(-radial)) * np.exp(2j * math.pi * angular)
    q, r = np.linalg.qr(ginibre.reshape(count, n, n))
    diag = np.diagonal(r, axis1=1, axis2=2)
    mags = np.abs(diag)
    phases = np.where(mags > 0.0, diag / np.where(mags > 0.0, mags, 1.0), 1.0)
    q = q * phases[:, None, :]
    det = np.linalg.det(q)
    fix = np.exp(-1j * np.angle(det) / n) / np.abs(det) ** (1.0 / n)
    return q * fix[:, None, None]


def haar_su(sampler: HaarSampler) -> np.ndarray:
    """The single SU(n) draw at the sampler's current index."""
    return haar_su_batch(sampler, 1)[0]


@dataclass(frozen=True)
class InvariantEmbedding:
    """Chart g = [[a, c], [b, d]] -> (ac, ad, bc, bd) of the torus quotient.

    Rescaling the columns by (t, 1/t) leaves every product unchanged,
    and ad - bc recovers the determinant, so the tuple separates right
    cosets of the diagonal torus.
    """

    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise AmbientMismatch(
                "the invariant tuple chart exists for 2 by 2 matrices only"
            )

    def embed(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.complex128)
        if m.shape != (2, 2):
            raise DimensionMismatch(f"expected a 2 by 2 matrix, got {m.shape}")
        return self.embed_batch(m[None, :, :])[0]

    def embed_batch(self, ms: np.ndarray) -> np.ndarray:
        ms = np.asarray(ms, dtype=np.complex128)
        a, c = ms[..., 0, 0], ms[..., 0, 1]
        b, d = ms[..., 1, 0], ms[..., 1, 1]
        return np.stack([a * c, a * d, b * c, b * d], axis=-1)

    def __call__(self, m) -> np.ndarray:
        return self.embed(m)


@dataclass(frozen=True)
class MCEstimate:
    """A proportion estimate with its binomial standard error."""

    estimate: float
    stderr: float
    samples: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError("a proportion lives in [0, 1]")
        if self.samples < 1:
            raise ValueError("an estimate needs at least one sample")
        if self.stderr < 0.0:
            raise ValueError("standard error cannot be negative")

    @classmethod
    def from_hits(cls, hits: int, samples: int, seed: int) -> "MCEstimate":
        p = hits / samples
        return cls(p, math.sqrt(p * (1.0 - p) / samples), samples, seed)

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
        }


def _tail_norms(
    v: np.ndarray, samples: int, sampler: HaarSampler, action: str
) -> np.ndarray:
    """Embedded-image norms of the moved input, one per sampled twist."""
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}; choose from {ACTIONS}")
    if sampler.n != 2:
        raise AmbientMismatch("tail estimates run over SU(2) twists")
    v = np.asarray(v, dtype=np.complex128)
    if not np.any(v):
        raise ZeroVector("the probe must be nonzero")
    ks = haar_su_batch(sampler, samples)
    chart = InvariantEmbedding()
    if v.shape == (2, 2):
        if action == "conjugation":
            moved = np.einsum("kji,jl,klm->kim", ks.conj(), v, ks)
        else:
            moved = ks @ v
        return np.linalg.norm(chart.embed_batch(moved), axis=-1)
    if v.shape == (4,):
        # A tuple-space point carries no matrix to conjugate, so the
        # twist acts linearly on the tuple arranged as a 2 by 2 array.
        # Both arrangements are isometries; the estimate degenerates
        # to an indicator of the input norm, which is exactly what
        # makes the event-inclusion inequality sharp here.
        w = v.reshape(2, 2)
        if action == "conjugation":
            moved = np.einsum("kji,jl,klm->kim", ks.conj(), w, ks)
        else:
            moved = np.einsum("kij,jl,kml->kim", ks, w, ks)
        return np.linalg.norm(moved.reshape(samples, 4), axis=-1)
    raise DimensionMismatch(
        f"expected a 2 by 2 matrix or a length-4 tuple, got shape {v.shape}"
    )


def measure_estimate(
    v,
    r: float,
    samples: int,
    sampler: HaarSampler,
    action: str = "conjugation",
) -> MCEstimate:
    """Proportion of sampled twists with embedded-image norm below r.

    The input is either a 2 by 2 matrix (entry space) or a length-4
    embedded tuple. With the conjugation action the event reads "the
    projection of v to the quotient by the k-twisted torus lands in
    the r-ball"; its probability decays as the input norm grows. The
    events for growing r nest on a shared sampler, so estimates are
    exactly nondecreasing in r.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    norms = _tail_norms(v, samples, sampler, action)
    hits = int(np.count_nonzero(norms < float(r)))
    return MCEstimate.from_hits(hits, samples, sampler.seed)


MC_CSV_COLUMNS = ("action", "v_norm", "r", "samples", "seed", "estimate", "stderr")


def mc_report_row(action: str, v, r: float, est: MCEstimate) -> dict:
    """One report row per estimate, keyed exactly by MC_CSV_COLUMNS."""
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}; choose from {ACTIONS}")
    flat = np.asarray(v, dtype=np.complex128).reshape(-1)
    return {
        "action": action,
        "v_norm": float(np.linalg.norm(flat)),
        "r": float(r),
        "samples": est.samples,
        "seed": est.seed,
        "estimate": est.estimate,
        "stderr": est.stderr,
    }


def _unit_probes(seed: int, count: int) -> np.ndarray:
    """Seeded unit-norm probe matrices, stacked (count, 2, 2)."""
    rng = stream(seed, "unit-probes")
    flat = rng.standard_normal((count, 4)) + 1j * rng.standard_normal((count, 4))
    flat /= np.linalg.norm(flat, axis=1, keepdims=True)
    return flat.reshape(count, 2, 2)


def g_estimate(
    r: float,
    sphere_probes: int,
    samples_per_probe: int,
    sampler: HaarSampler,
    action: str = "conjugation",
) -> MCEstimate:
    """Upper envelope of the tail estimate over seeded unit probes.

    Every probe owns a disjoint draw window of the sampler, so repeat
    calls with the same seed share both the probes and the twists;
    the envelope is therefore exactly nondecreasing in r.
    """
    if r <= 0.0:
        raise ValueError("the ball radius must be positive")
    if sphere_probes < 1:
        raise ValueError("need at least one probe")
    probes = _unit_probes(sampler.seed, sphere_probes)
    best: MCEstimate | None = None
    for j in range(sphere_probes):
        window = sampler.advanced(j * samples_per_probe)
        est = measure_estimate(probes[j], r, samples_per_probe, window, action)
        if best is None or est.estimate > best.estimate:
            best = est
    return best


@dataclass(frozen=True)
class ThresholdEstimate:
    """Estimated escape radii, one per tail-budget level 2^-(n+1)."""

    rhat: tuple[float, ...]
    delta: tuple[float, ...]
    samples_per_level: int
    sphere_probes: int
    seed: int = 0

    def __post_init__(self):
        if len(self.rhat) != len(self.delta):
            raise ValueError("one budget per radius")
        if len(self.rhat) == 0:
            raise ValueError("at least one level")
        if any(r <= 0.0 for r in self.rhat):
            raise ValueError("radii are positive")
        if list(self.rhat) != sorted(self.rhat):
            raise ValueError("radii are nondecreasing")

    def __len__(self) -> int:
        return len(self.rhat)

    def to_json(self) -> dict:
        return {
            "R": list(self.rhat),
            "delta": list(self.delta),
            "config": {
                "samples_per_level": self.samples_per_level,
                "sphere_probes": self.sphere_probes,
                "seed": self.seed,
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ThresholdEstimate":
        cfg = obj.get("config", {})
        return cls(
            tuple(float(x) for x in obj["R"]),
            tuple(float(x) for x in obj["delta"]),
            int(cfg.get("samples_per_level", 0) or 1),
            int(cfg.get("sphere_probes", 0) or 1),
            int(cfg.get("seed", 0)),
        )


def threshold_estimate(
    levels: int,
    *,
    samples_per_level: int = 2000,
    sphere_probes: int = 8,
    seed: int = 0,
) -> ThresholdEstimate:
    """Smallest radii whose guarded tail mass clears each level budget.

    Level n targets the budget 2^-(n+1) for the event "the embedded
    image of the conjugated sphere-R probe has norm below n". Scaling
    the probe only rescales precomputed unit-probe norms by R^2, so
    the per-probe estimate is exactly nonincreasing in R on the fixed
    draw window and the accepted region is an up-set; bisection to 1%
    relative width returns its accepting endpoint. The guard adds
    three standard errors before comparing against the budget, and
    the returned radii are cumulative maxima.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    if samples_per_level < 1 or sphere_probes < 1:
        raise ValueError("sampling counts must be positive")
    probes = _unit_probes(seed, sphere_probes)
    chart = InvariantEmbedding()
    base = HaarSampler(2, seed)
    radii: list[float] = []
    deltas: list[float] = []
    m = samples_per_level
    for level in range(1, levels + 1):
        unit_norms = []
        for j in range(sphere_probes):
            offset = ((level - 1) * sphere_probes + j) * m
            ks = haar_su_batch(base.advanced(offset), m)
            moved = np.einsum("kji,jl,klm->kim", ks.conj(), probes[j], ks)
            unit_norms.append(np.linalg.norm(chart.embed_batch(moved), axis=-1))
        budget = 2.0 ** -(level + 1)

        def clears(radius: float) -> bool:
            worst = 0.0
            for norms in unit_norms:
                p = np.count_nonzero(radius * radius * norms < level) / m
                worst = max(worst, p + 3.0 * math.sqrt(p * (1.0 - p) / m))
            return worst < budget

        lo, hi = 0.0, 1.0
        while not clears(hi):
            lo = hi
            hi *= 2.0
            if hi > RADIUS_CAP:
                raise SearchExhausted(
                    f"no radius below {RADIUS_CAP:g} meets the level-{level} "
                    "tail budget"
                )
        while hi - lo > SEARCH_REL_TOL * hi:
            mid = 0.5 * (lo + hi)
            if clears(mid):
                hi = mid
            else:
                lo = mid
        radii.append(hi if not radii else max(hi, radii[-1]))
        deltas.append(budget)
    return ThresholdEstimate(
        tuple(radii), tuple(deltas), samples_per_level, sphere_probes, seed
    )


@dataclass(frozen=True)
class OmegaReport:
    """Pass fraction of sampled twists, with per-failure diagnostics."""

    fraction: float
    samples: int
    seed: int
    failures: tuple[tuple[int, str], ...] = ()

    def to_json(self) -> dict:
        return {
            "fraction": self.fraction,
            "samples": self.samples,
            "seed": self.seed,
            "failures": [[i, reason] for i, reason in self.failures],
        }


def _central_ratio_table(points: np.ndarray) -> np.ndarray:
    """Pair table: does x_i^(-1) x_j lie in the center {I, -I}."""
    m = len(points)
    table = np.zeros((m, m), dtype=bool)
    eye = np.eye(2)
    for i in range(m):
        a, c = points[i, 0, 0], points[i, 0, 1]
        b, d = points[i, 1, 0], points[i, 1, 1]
        inv = np.array([[d, -c], [-b, a]])
        for j in range(m):
            ratio = inv @ points[j]
            plus = np.max(np.abs(ratio - eye))
            minus = np.max(np.abs(ratio + eye))
            table[i, j] = min(plus, minus) <= CENTRAL_RATIO_TOL
    return table


def omega_check(
    d: DiscreteSequence,
    k_samples: int,
    sampler: HaarSampler,
    *,
    min_gap: float = MIN_GAP,
    max_fiber: int = MAX_FIBER,
) -> OmegaReport:
    """Fraction of sampled twists that keep the prefix proper.

    For each sampled k the prefix is conjugated by k and pushed through
    the invariant chart, realizing the projection along the k-twisted
    torus. A twist passes when the images are proper at prefix scale
    and any image collision comes from a central ratio; a pair whose
    ratio is central always collides, since negating a matrix leaves
    every entry product unchanged.
    """
    if d.ambient != sln(2):
        raise AmbientMismatch("the omega fraction runs over SL2 prefixes")
    if len(d) == 0:
        raise ValueError("the omega fraction needs a nonempty prefix")
    if k_samples < 1:
        raise ValueError("need at least one sampled twist")
    points = np.stack(d.points)
    m = len(points)
    central = _central_ratio_table(points)
    ks = haar_su_batch(sampler, k_samples)
    chart = InvariantEmbedding()
    images = np.empty((k_samples, m, 4), dtype=np.complex128)
    for i in range(m):
        moved = np.einsum("kji,jl,klm->kim", ks.conj(), points[i], ks)
        images[:, i, :] = chart.embed_batch(moved)
    failures: list[tuple[int, str]] = []
    if m > 1:
        gaps = np.linalg.norm(
            images[:, :, None, :] - images[:, None, :, :], axis=-1
        )
        rows, cols = np.triu_indices(m, 1)
        suspects = np.nonzero(np.any(gaps[:, rows, cols] < min_gap, axis=1))[0]
    else:
        suspects = np.array([], dtype=int)
    for t in suspects:
        reason = None
        labels = list(range(m))
        for i in range(m):
            for j in range(i + 1, m):
                if gaps[t, i, j] >= min_gap:
                    continue
                if not central[i, j]:
                    reason = (
                        f"images {i} and {j} collide but the point ratio "
                        "is not central"
                    )
                    break
                root = labels[i]
                labels = [root if lab == labels[j] else lab for lab in labels]
            if reason is not None:
                break
        if reason is None:
            classes: dict[bytes, list[int]] = {}
            for i, lab in enumerate(labels):
                classes.setdefault(f"class-{lab}".encode(), []).append(i)
            verdict = properness_check(
                list(images[t]),
                min_gap=min_gap,
                max_fiber=max_fiber,
                fiber_keys=classes,
            )
            if verdict.is_violated:
                reason = verdict.detail
        if reason is not None:
            failures.append((int(t), reason))
    fraction = 1.0 - len(failures) / k_samples
    return OmegaReport(fraction, k_samples, sampler.seed, tuple(failures))


def select_tame_subset(points, thresholds: ThresholdEstimate) -> DiscreteSequence:
    """Greedy subsequence whose heights climb past the threshold radii.

    Points are scanned in order; the next point whose flat Euclidean
    norm exceeds the next unmet radius is kept, as deep as the
    threshold list allows. Heights use the same entry-space norm the
    threshold search scaled its probes with.
    """
    if isinstance(points, DiscreteSequence):
        ambient = points.ambient
        pts = [np.asarray(p, dtype=np.complex128) for p in points.points]
        generator = points.generator
    else:
        pts = [np.asarray(p, dtype=np.complex128) for p in points]
        generator = None
        matrixlike = all(p.shape == (2, 2) for p in pts)
        if matrixlike and all(
            abs(np.linalg.det(p) - 1.0) <= DET_TOL for p in pts
        ):
            ambient = sln(2)
        else:
            widths = {p.reshape(-1).shape[0] for p in pts}
            if len(widths) != 1:
                raise DimensionMismatch("points must share one flat dimension")
            ambient = cn(widths.pop())
            pts = [p.reshape(-1) for p in pts]
    selected: list[np.ndarray] = []
    level = 0
    for p in pts:
        if level == len(thresholds):
            break
        if float(np.linalg.norm(p.reshape(-1))) > thresholds.rhat[level]:
            selected.append(p)
            level += 1
    if level == 0:
        raise PrefixTooBounded(
            f"no point exceeds the first threshold {thresholds.rhat[0]:g}"
        )
    family = generator.family if generator is not None else "input"
    info = GeneratorInfo.of("threshold-select", depth=level, source=family)
    return DiscreteSequence(ambient, tuple(selected), info)
