"""Exact simulation of chain trajectories and empirical checks.

Paths are generated from the jump chain: the holding time at ``a`` is
``-log(1 - u) / lam(a)`` (inverse CDF, one uniform) and the next state is
drawn from ``p(a, .)`` by bisection on the cumulative row (one uniform).
Every replica owns a PCG64 stream derived from ``SeedSequence(seed,
spawn_key=(replica,))``, so results do not depend on the order in which
replicas run.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.stats import kstwobign

from .analysis import MetaPartition, ValleySpec
from .chain import Chain
from .errors import AbsorbedBeforeTarget, StartsInAnnulus, TooFewSamples, UnknownState
from .paths import PathSample, ProjectedPath
from .trace import extract_trace_path

__all__ = [
    "replica_rng", "sample_path", "KSResult", "ks_exponential_test", "ExitLawStats",
    "exit_law_experiment", "project_path", "MetaRateEstimate", "empirical_meta_rates",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "PCG64 via SeedSequence(seed, spawn_key=(replica,))"
BATCH = 512
MIN_KS_SAMPLES = 30
CONSISTENCY_LABEL = "consistency check only; not a verification of path-space convergence"


def replica_rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


class _Uniforms:
    """Buffered uniforms on [0, 1) drawn in fixed-size batches."""

    def __init__(self, rng):
        self.rng = rng
        self.buf = []
        self.pos = 0

    def __call__(self):
        if self.pos >= len(self.buf):
            self.buf = self.rng.random(BATCH).tolist()
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


def _jump_tables(chain):
    tables = chain.__dict__.get("_jump_tables")
    if tables is None:
        P = chain.jump
        targets, cums = [], []
        for i in range(chain.n):
            lo, hi = P.indptr[i], P.indptr[i + 1]
            targets.append(P.indices[lo:hi].tolist())
            cums.append(np.cumsum(P.data[lo:hi]).tolist())
        tables = (targets, cums, chain.holding.tolist())
        chain.__dict__["_jump_tables"] = tables
    return tables


def sample_path(chain: Chain, start, target=None, horizon: Optional[float] = None,
                seed: int = 0, stream: int = 0, rng=None,
                allow_absorption: bool = False) -> PathSample:
    """Simulate from ``start`` until entering ``target`` or reaching ``horizon``.

    Parameters
    ----------
    target : iterable of states, optional
        The path stops at the first entrance into this set; the entered
        state is stored as ``end_state`` and contributes no segment.
    horizon : float, optional
        Time at which the path is cut.
    seed, stream : int
        Select the random stream when ``rng`` is not given.
    allow_absorption : bool
        When False, reaching an absorbing state before the target raises
        :class:`AbsorbedBeforeTarget`.
    """
    if start not in chain.index:
        raise UnknownState(start)
    tset = set(chain.indices(target).tolist()) if target is not None else set()
    if target is not None and not tset:
        raise ValueError("target set must be nonempty")
    if horizon is not None and not horizon > 0:
        raise ValueError("horizon must be positive")
    if target is None and horizon is None:
        raise ValueError("give a target set or a horizon")
    s = chain.index[start]
    if s in tset:
        raise ValueError("start lies in the target set")
    if rng is None:
        rng = replica_rng(seed, stream)
    uniform = _Uniforms(rng)
    targets, cums, hold = _jump_tables(chain)
    log1p = math.log1p
    states, times = [s], [0.0]
    t = 0.0
    end = None
    while True:
        lam = hold[s]
        if lam <= 0:
            if target is not None and horizon is None and not allow_absorption:
                raise AbsorbedBeforeTarget(chain.states[s])
            if horizon is not None:
                times.append(float(horizon))
                reason = "horizon"
            else:
                times.append(math.inf)
                reason = "absorbed"
            break
        t += -log1p(-uniform()) / lam
        if horizon is not None and t >= horizon:
            times.append(float(horizon))
            reason = "horizon"
            break
        cum = cums[s]
        k = bisect_right(cum, uniform() * cum[-1])
        s = targets[s][min(k, len(cum) - 1)]
        times.append(t)
        if s in tset:
            end = chain.states[s]
            reason = "hit-target"
            break
        states.append(s)
    labels = tuple(chain.states[i] for i in states)
    return PathSample(labels, tuple(times), reason, end_state=end, seed=seed, stream=stream)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int


def ks_exponential_test(samples) -> KSResult:
    """One-sample Kolmogorov-Smirnov test against the mean-one exponential law.

    The p-value is the asymptotic Kolmogorov tail ``P(K > sqrt(n) D)``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < MIN_KS_SAMPLES:
        raise TooFewSamples(f"KS test needs at least {MIN_KS_SAMPLES} samples, got {n}")
    cdf = -np.expm1(-np.maximum(x, 0.0))
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - cdf)), float(np.max(cdf - (i - 1) / n)))
    return KSResult(d, float(kstwobign.sf(math.sqrt(n) * d)), n)


@dataclass(frozen=True)
class ExitLawStats:
    """Per-replica exit records of one valley and their aggregates.

    ``exit_times`` and ``delta_occupation`` are normalised by ``theta``.
    """

    n: int
    start: object
    theta: float
    attractor_first_frequency: float
    exit_times: np.ndarray = field(repr=False)
    delta_occupation: np.ndarray = field(repr=False)
    mean_exit_time: float
    ks: Optional[KSResult]
    mean_delta_occupation: float
    max_delta_occupation: float
    seed: int
    rng: str = RNG_ALGORITHM

    def as_dict(self):
        return {
            "samples": self.n, "start": self.start, "theta": self.theta,
            "attractor_first_frequency": self.attractor_first_frequency,
            "mean_exit_time": self.mean_exit_time,
            "ks_statistic": self.ks.statistic if self.ks else None,
            "ks_p_value": self.ks.p_value if self.ks else None,
            "mean_delta_occupation": self.mean_delta_occupation,
            "max_delta_occupation": self.max_delta_occupation,
            "seed": self.seed, "rng": self.rng,
        }


def exit_law_experiment(chain: Chain, spec: ValleySpec, theta: float, reps: int = 10_000,
                        seed: int = 0, start=None) -> ExitLawStats:
    """Simulate exits from the basin of ``spec`` and summarise them.

    Each replica starts at ``start`` (default: the attractor) and runs until
    it enters ``B^c``.  It records whether the attractor was visited first,
    ``T_{B^c} / theta`` and the time spent in the annulus over ``theta``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    if reps < 1:
        raise ValueError("reps must be positive")
    start = spec.xi if start is None else start
    if start not in spec.W:
        raise ValueError("start must lie in the well")
    outside = [s for s in chain.states if s not in spec.B]
    if not outside:
        raise ValueError("basin must not be the whole state space")
    delta = spec.delta
    hits = 0
    exits = np.empty(reps)
    occ = np.empty(reps)
    for r in range(reps):
        path = sample_path(chain, start, target=outside, seed=seed, stream=r)
        if path.hitting_time({spec.xi}) is not None:
            hits += 1
        exits[r] = path.horizon / theta
        occ[r] = path.occupation(delta) / theta
    ks = ks_exponential_test(exits) if reps >= MIN_KS_SAMPLES else None
    return ExitLawStats(
        n=reps, start=start, theta=float(theta), attractor_first_frequency=hits / reps,
        exit_times=exits, delta_occupation=occ, mean_exit_time=math.fsum(exits) / reps,
        ks=ks, mean_delta_occupation=math.fsum(occ) / reps,
        max_delta_occupation=float(np.max(occ)), seed=seed)


def project_path(path: PathSample, partition: MetaPartition, variant: str = "trace") -> ProjectedPath:
    """Label a path by metastates.

    ``"trace"`` keeps only the time spent in the wells; ``"last-visit"``
    labels every instant with the last well visited, which requires the
    path to start inside a well.  Times are exact fractions.
    """
    psi = partition.psi
    if variant == "trace":
        tr = extract_trace_path(path, partition.union)
        segs = [(psi[s], d) for s, d in tr.exact_segments()]
        offset = Fraction(tr.dropped_prefix)
    elif variant == "last-visit":
        if path.start not in psi:
            raise StartsInAnnulus(f"path starts at {path.start!r}, outside every well")
        segs, cur = [], None
        for s, d in path.exact_segments():
            cur = psi.get(s, cur)
            segs.append((cur, d))
        offset = Fraction(0)
    else:
        raise ValueError(f"unknown projection variant {variant!r}")
    labels, times = [], [offset]
    for x, d in segs:
        if labels and labels[-1] == x:
            times[-1] += d
        else:
            labels.append(x)
            times.append(times[-1] + d)
    return ProjectedPath(tuple(labels), tuple(times), variant)


@dataclass(frozen=True)
class MetaRateEstimate:
    """Maximum-likelihood jump rates of the projected, time-rescaled process."""

    labels: tuple
    counts: dict
    occupation: dict
    rates: dict
    stderr: dict
    theta: float
    horizon: float
    reps: int
    seed: int
    variant: str
    rng: str = RNG_ALGORITHM
    note: str = CONSISTENCY_LABEL

    def as_dict(self):
        return {
            "labels": list(self.labels),
            "counts": [[x, y, c] for (x, y), c in sorted(self.counts.items(), key=repr)],
            "occupation": [[x, t] for x, t in sorted(self.occupation.items(), key=repr)],
            "rates": [[x, y, r, self.stderr[(x, y)]]
                      for (x, y), r in sorted(self.rates.items(), key=repr)],
            "theta": self.theta, "horizon": self.horizon, "reps": self.reps,
            "seed": self.seed, "variant": self.variant, "rng": self.rng, "note": self.note,
        }


def empirical_meta_rates(chain: Chain, partition: MetaPartition, theta: float,
                         horizon: Optional[float] = None, reps: int = 10_000, seed: int = 0,
                         variant: str = "trace", starts=None) -> MetaRateEstimate:
    """Estimate ``r(x, y)`` as jump counts over rescaled occupation times.

    Replica ``i`` starts at the attractor of the ``i mod kappa``-th well
    unless ``starts`` supplies explicit states.  ``horizon`` is in real time
    (default ``50 theta``).  Standard errors are ``sqrt(n_xy) / T_x``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    horizon = 50.0 * theta if horizon is None else float(horizon)
    labels = partition.labels
    if starts is None:
        starts = [partition.attractors[x] for x in labels]
    starts = list(starts)
    counts = {(x, y): 0 for x in labels for y in labels if x != y}
    occ = {x: Fraction(0) for x in labels}
    for r in range(reps):
        path = sample_path(chain, starts[r % len(starts)], horizon=horizon, seed=seed,
                           stream=r, allow_absorption=True)
        proj = project_path(path, partition, variant)
        for k, (x, d) in enumerate(proj.segments):
            occ[x] += d
            if k + 1 < len(proj.labels):
                counts[(x, proj.labels[k + 1])] += 1
    th = Fraction(theta)
    occupation = {x: float(t / th) for x, t in occ.items()}
    rates, stderr = {}, {}
    for (x, y), c in counts.items():
        T = occupation[x]
        rates[(x, y)] = c / T if T > 0 else math.nan
        stderr[(x, y)] = math.sqrt(c) / T if T > 0 else math.nan
    return MetaRateEstimate(tuple(labels), counts, occupation, rates, stderr,
                            float(theta), horizon, reps, seed, variant)
