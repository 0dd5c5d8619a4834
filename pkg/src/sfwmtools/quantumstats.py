"""Monte Carlo photon counting for a pulsed pair source and g2 estimators.

Each pulse carries N pairs, where N is a sum of K independent thermal
(geometric) Schmidt modes of mean mu/K, i.e. negative binomial with shape
K (non-integer K allowed). Photons are thinned independently by the arm
transmission and detector efficiency, and coincidences are binned per
pulse. Clicks are sparse, so only pulses with at least one detected
photon are ever materialised: their positions form a Bernoulli process
drawn from geometric gaps and their contents from the zero-truncated
thinned distribution.

Modes
-----
``cross``           signal arm on ``det_a``, idler arm on ``det_b``.
``self_signal``     signal arm split 50:50 onto ``det_a`` and ``det_b``.
``self_idler``      idler arm split 50:50 onto ``det_a`` and ``det_b``
                    (uses ``idler_schmidt_modes``).
``cross_shuffled``  as ``cross`` but the two arms are drawn from
                    independent pulses, removing all pair correlation.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.stats import nbinom

from .errors import DomainError

MODES = ("cross", "self_signal", "self_idler", "cross_shuffled")
CHUNK_PULSES = 1 << 28
MIN_PULSES = 100_000


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float
    dead_time_s: float = 0.0
    dark_rate_hz: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise DomainError("detector efficiency must lie in [0, 1]")
        if self.dead_time_s < 0 or self.dark_rate_hz < 0:
            raise DomainError("dead time and dark rate must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorModel":
        return cls(
            efficiency=float(d["efficiency"]),
            dead_time_s=float(d.get("dead_time_s", 0.0)),
            dark_rate_hz=float(d.get("dark_rate_hz", 0.0)),
            label=str(d.get("label", "")),
        )


@dataclass(frozen=True)
class PairSourceModel:
    mean_pairs_per_pulse: float
    schmidt_modes: float = 1.0
    rep_rate_hz: float = 80e6
    transmission_signal: float = 1.0
    transmission_idler: float = 1.0
    # unfiltered idler (~30 nm vs 3 nm signal filter) seen as more modes
    idler_schmidt_modes: float = 10.0

    def __post_init__(self):
        if self.mean_pairs_per_pulse < 0:
            raise DomainError("mean pairs per pulse must be >= 0")
        if self.schmidt_modes < 1 or self.idler_schmidt_modes < 1:
            raise DomainError("Schmidt mode numbers must be >= 1")
        if self.rep_rate_hz <= 0:
            raise DomainError("rep rate must be positive")
        for t in (self.transmission_signal, self.transmission_idler):
            if not 0 <= t <= 1:
                raise DomainError("transmissions must lie in [0, 1]")

    @property
    def purity(self) -> float:
        return 1.0 / self.schmidt_modes

    @classmethod
    def from_dict(cls, d: dict) -> "PairSourceModel":
        d = dict(d)
        if "purity" in d and "schmidt_modes" not in d:
            d["schmidt_modes"] = 1.0 / float(d.pop("purity"))
        d.pop("purity", None)
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass
class CountingRecord:
    pulses: int = 0
    singles_s: int = 0
    singles_i: int = 0
    coincidences: int = 0
    split_coincidences: int = 0
    seed: int = 0
    mode: str = "cross"
    params: dict = field(default_factory=dict)

    def __add__(self, other: "CountingRecord") -> "CountingRecord":
        if self.mode != other.mode:
            raise ValueError("cannot merge records of different modes")
        return CountingRecord(
            self.pulses + other.pulses,
            self.singles_s + other.singles_s,
            self.singles_i + other.singles_i,
            self.coincidences + other.coincidences,
            self.split_coincidences + other.split_coincidences,
            self.seed,
            self.mode,
            self.params,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CountingRecord":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _mode_setup(src: PairSourceModel, det_a: DetectorModel, det_b: DetectorModel, mode: str):
    """Shape K and per-unit detection probabilities for (a-only, b-only, both)."""
    ea, eb = det_a.efficiency, det_b.efficiency
    if mode in ("cross", "cross_shuffled"):
        qa, qb = src.transmission_signal * ea, src.transmission_idler * eb
        return src.schmidt_modes, (qa * (1 - qb), (1 - qa) * qb, qa * qb)
    if mode == "self_signal":
        t, k = src.transmission_signal, src.schmidt_modes
    elif mode == "self_idler":
        t, k = src.transmission_idler, src.idler_schmidt_modes
    else:
        raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")
    return k, (t * ea / 2, t * eb / 2, 0.0)


def _pgf(mu: float, k: float, z):
    """E[z^N] for N negative binomial with mean mu and shape k."""
    return (1.0 + (mu / k) * (1.0 - np.asarray(z))) ** (-k)


def click_probabilities(
    src: PairSourceModel, det_a: DetectorModel, det_b: DetectorModel, mode: str = "cross"
) -> tuple[float, float, float]:
    """Exact per-pulse P(a), P(b), P(a and b) without dead time.

    Closed form from the photon-number generating function; serves as an
    independent check on :func:`simulate_counts`.
    """
    k, (pa, pb, pab) = _mode_setup(src, det_a, det_b, mode)
    mu = src.mean_pairs_per_pulse
    da = -math.expm1(-det_a.dark_rate_hz / src.rep_rate_hz)
    db = -math.expm1(-det_b.dark_rate_hz / src.rep_rate_hz)
    qa, qb = pa + pab, pb + pab
    no_a = _pgf(mu, k, 1 - qa) * (1 - da)
    no_b = _pgf(mu, k, 1 - qb) * (1 - db)
    if mode == "cross_shuffled":
        no_ab = no_a * no_b
    else:
        no_ab = _pgf(mu, k, 1 - (pa + pb + pab)) * (1 - da) * (1 - db)
    return float(1 - no_a), float(1 - no_b), float(1 - no_a - no_b + no_ab)


def _bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices of successes among n Bernoulli(p) trials."""
    if p <= 0 or n <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    out = []
    pos = -1
    while True:
        expected = (n - pos) * p
        size = int(expected + 6 * math.sqrt(expected) + 64)
        steps = np.cumsum(rng.geometric(p, size=size)) + pos
        out.append(steps[steps < n])
        if steps[-1] >= n:
            break
        pos = int(steps[-1])
    return np.concatenate(out).astype(np.int64)


def _truncated_counts(rng: np.random.Generator, size: int, mean: float, k: float) -> np.ndarray:
    """Zero-truncated negative binomial draws (mean and shape of the untruncated law)."""
    if size == 0:
        return np.empty(0, dtype=np.int64)
    p = k / (k + mean)
    dmax = max(int(nbinom.isf(1e-17, k, p)) + 2, 2)
    support = np.arange(1, dmax + 1)
    pmf = nbinom.pmf(support, k, p)
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    return support[np.searchsorted(cdf, rng.random(size), side="right").clip(max=len(support) - 1)]


def _split(rng: np.random.Generator, counts: np.ndarray, probs) -> list[np.ndarray]:
    """Multinomially distribute each count over categories with given probabilities."""
    total = float(sum(probs))
    rest = counts.copy()
    out = []
    remaining = total
    for p in probs[:-1]:
        frac = min(p / remaining, 1.0) if remaining > 0 else 0.0
        x = rng.binomial(rest, frac)
        out.append(x)
        rest = rest - x
        remaining -= p
    out.append(rest)
    return out


def _photon_clicks(rng, n, mu, k, probs):
    """Pulse indices with a photon click on a and on b (before dead time)."""
    q_any = sum(probs)
    if mu <= 0 or q_any <= 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    m = mu * q_any
    p_active = float(-np.expm1(-k * np.log1p(m / k)))
    idx = _bernoulli_positions(rng, n, p_active)
    d = _truncated_counts(rng, idx.size, m, k)
    a_only, b_only, both = _split(rng, d, probs)
    return idx[(a_only + both) > 0], idx[(b_only + both) > 0]


@njit(cache=True)
def _nonparalyzable(idx, dead, last):
    keep = np.zeros(idx.size, dtype=np.bool_)
    for j in range(idx.size):
        if idx[j] - last >= dead:
            keep[j] = True
            last = idx[j]
    return keep, last


def _register(idx: np.ndarray, dead_pulses: float, last: float) -> tuple[np.ndarray, float]:
    if dead_pulses <= 0 or idx.size == 0:
        return idx, (float(idx[-1]) if idx.size else last)
    keep, last = _nonparalyzable(idx.astype(np.float64), float(dead_pulses), float(last))
    return idx[keep], last


def simulate_counts(
    src: PairSourceModel,
    det_a: DetectorModel,
    det_b: DetectorModel,
    duration_s: float,
    seed: int = 0,
    mode: str = "cross",
    chunk_pulses: int = CHUNK_PULSES,
) -> CountingRecord:
    """Simulate ``duration_s`` of pulsed operation and tally clicks.

    Detectors are non-paralyzable: a click is registered only if at least
    ``dead_time_s`` has elapsed since the previous registered click. Dark
    counts are Poissonian per pulse window. The pulse train is processed in
    fixed-size chunks seeded from one SeedSequence, with dead-time state
    carried across chunk boundaries.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")
    pulses = int(round(duration_s * src.rep_rate_hz))
    if pulses < MIN_PULSES:
        raise DomainError(f"duration gives {pulses} pulses; need at least {MIN_PULSES}")
    k, probs = _mode_setup(src, det_a, det_b, mode)
    mu = src.mean_pairs_per_pulse
    dark = [-math.expm1(-d.dark_rate_hz / src.rep_rate_hz) for d in (det_a, det_b)]
    dead = [d.dead_time_s * src.rep_rate_hz for d in (det_a, det_b)]
    last = [-math.inf, -math.inf]

    n_chunks = -(-pulses // chunk_pulses)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sa = sb = cc = 0
    for c, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        n = min(chunk_pulses, pulses - c * chunk_pulses)
        if mode == "cross_shuffled":
            qa, qb = probs[0] + probs[2], probs[1] + probs[2]
            a, _ = _photon_clicks(rng, n, mu, k, (qa, 0.0, 0.0))
            _, b = _photon_clicks(rng, n, mu, k, (0.0, qb, 0.0))
        else:
            a, b = _photon_clicks(rng, n, mu, k, probs)
        regs = []
        for j, clicks in enumerate((a, b)):
            darks = _bernoulli_positions(rng, n, dark[j])
            if darks.size:
                clicks = np.union1d(clicks, darks)
            offset = c * chunk_pulses
            reg, last[j] = _register(clicks + offset, dead[j], last[j])
            regs.append(reg)
        sa += regs[0].size
        sb += regs[1].size
        cc += np.intersect1d(regs[0], regs[1], assume_unique=True).size

    params = {
        "source": asdict(src),
        "detector_a": asdict(det_a),
        "detector_b": asdict(det_b),
        "duration_s": duration_s,
        "chunk_pulses": chunk_pulses,
    }
    cross = mode.startswith("cross")
    return CountingRecord(
        pulses=pulses,
        singles_s=int(sa),
        singles_i=int(sb),
        coincidences=int(cc) if cross else 0,
        split_coincidences=0 if cross else int(cc),
        seed=int(seed),
        mode=mode,
        params=params,
    )


def _ratio_estimate(n: int, a: int, b: int, ab: int) -> tuple[float, float]:
    """g = p_ab / (p_a p_b) and its delta-method standard error for i.i.d. pulses."""
    if a == 0 or b == 0:
        raise DomainError("zero singles: g2 undefined")
    pa, pb, pab = a / n, b / n, ab / n
    g = pab / (pa * pb)
    x, y, z = 1 / (pa * pb), g / pa, g / pb
    second = x * x * pab + y * y * pa + z * z * pb - 2 * x * y * pab - 2 * x * z * pab + 2 * y * z * pab
    var = max(second - g * g, 0.0) / n
    return g, math.sqrt(var)


def g2_cross(rec: CountingRecord) -> tuple[float, float]:
    """Signal-idler g2 = C N / (S_s S_i) with standard error."""
    if not rec.mode.startswith("cross"):
        raise DomainError("g2_cross needs a cross-mode record")
    return _ratio_estimate(rec.pulses, rec.singles_s, rec.singles_i, rec.coincidences)


def g2_self(rec: CountingRecord) -> tuple[float, float]:
    """Unheralded autocorrelation from a 50:50 split record."""
    if not rec.mode.startswith("self"):
        raise DomainError("g2_self needs a self_signal or self_idler record")
    return _ratio_estimate(rec.pulses, rec.singles_s, rec.singles_i, rec.split_coincidences)


def purity_from_g2(g_self: float) -> float:
    """Schmidt purity 1/K = g - 1 for a thermal marginal."""
    if not 1.0 <= g_self <= 2.0:
        raise DomainError(f"non-thermal statistics: g2 = {g_self} outside [1, 2]")
    return g_self - 1.0


def cauchy_schwarz(gss, gii, gsi) -> tuple[float, float]:
    """Violation ratio gsi^2 / (gss gii) and significance in standard deviations.

    Each argument is ``(value, std_error)``. The significance is the
    distance of gsi above the classical bound sqrt(gss gii), divided by the
    propagated error of that difference.
    """
    (ss, dss), (ii, dii), (si, dsi) = gss, gii, gsi
    if min(ss, ii, si) <= 0:
        raise DomainError("g2 values must be positive")
    ratio = si * si / (ss * ii)
    bound = math.sqrt(ss * ii)
    d_bound = 0.5 * bound * math.hypot(dss / ss, dii / ii)
    err = math.hypot(dsi, d_bound)
    n_sigma = (si - bound) / err if err > 0 else math.copysign(math.inf, si - bound)
    return ratio, n_sigma
