"""Valley, tunneling and metastability conditions over a family of chains.

A :class:`ChainFamily` maps an integer parameter ``N`` to a chain.  Each
asymptotic condition of the form ``lim_N a_N = 0`` is evaluated on a grid of
``N`` values and decided by a log-log least-squares fit; the raw sequence is
always returned alongside the verdict.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .chain import (Chain, ChainSpec, StationaryMeasure, additive_until_hitting, build_chain,
                    stationary_measure)
from .errors import InvalidSpec, ModeMismatch, NonPositiveValue, NotReversible
from .potential import capacity, mean_set_rate, point_capacity
from .trace import trace_by_hitting

__all__ = [
    "DEFAULT_GRID", "ChainFamily", "ValleySpec", "MetaPartition", "FitResult", "scale_fit",
    "fit_sequence", "valley_depth", "ValleyConditionTable", "check_valley_conditions",
    "TunnelingReport", "tunneling_analysis", "mean_rate_between",
]

DEFAULT_GRID = tuple(int(round(10 ** k)) for k in (1.0, 1.5, 2.0, 2.5, 3.0))
VANISH_EXPONENT = -0.2
DIVERGE_EXPONENT = 0.2
MAX_FIT_RESIDUAL = 0.25
ABSORBING_FRACTION = 1e-6


@dataclass(frozen=True)
class ValleySpec:
    """Well ``W`` inside basin ``B`` with attractor ``xi``; ``delta = B - W``."""

    W: frozenset
    B: frozenset
    xi: object

    def __post_init__(self):
        W, B = frozenset(self.W), frozenset(self.B)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "B", B)
        if not W:
            raise InvalidSpec("well must be nonempty")
        if not W <= B:
            raise InvalidSpec("well must be contained in the basin")
        if self.xi not in W:
            raise InvalidSpec("attractor must belong to the well")

    @property
    def delta(self):
        return self.B - self.W

    def outside(self, chain: Chain):
        out = frozenset(s for s in chain.states if s not in self.B)
        if not out:
            raise InvalidSpec("basin must be a proper subset of the state space")
        return out


@dataclass(frozen=True)
class MetaPartition:
    """Disjoint wells ``wells[x]`` with attractors ``attractors[x]``."""

    wells: Mapping
    attractors: Mapping

    def __post_init__(self):
        wells = {x: frozenset(w) for x, w in dict(self.wells).items()}
        object.__setattr__(self, "wells", wells)
        object.__setattr__(self, "attractors", dict(self.attractors))
        if len(wells) < 2:
            raise InvalidSpec("a partition needs at least two wells")
        seen = set()
        for x, w in wells.items():
            if not w:
                raise InvalidSpec(f"well {x!r} is empty")
            if seen & w:
                raise InvalidSpec("wells must be pairwise disjoint")
            seen |= w
        if set(self.attractors) != set(wells):
            raise InvalidSpec("every well needs exactly one attractor")
        for x, a in self.attractors.items():
            if a not in wells[x]:
                raise InvalidSpec(f"attractor {a!r} is not in well {x!r}")

    @property
    def labels(self):
        return tuple(self.wells)

    @property
    def union(self):
        return frozenset().union(*self.wells.values())

    @property
    def psi(self):
        return {s: x for x, w in self.wells.items() for s in w}

    def others(self, x):
        return self.union - self.wells[x]

    def delta(self, chain: Chain):
        u = self.union
        return frozenset(s for s in chain.states if s not in u)


class ChainFamily:
    """Parameterised chains ``N -> ChainSpec`` evaluated on a grid."""

    def __init__(self, generator: Callable[[int], ChainSpec], n_grid: Sequence[int] = DEFAULT_GRID,
                 label: str = "", simulation_only: bool = False):
        grid = tuple(int(n) for n in n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidSpec("N grid must be nonempty and strictly increasing")
        self.generator = generator
        self.n_grid = grid
        self.label = label
        self.simulation_only = simulation_only
        self._cache = {}

    def __repr__(self):
        return f"ChainFamily({self.label!r}, n_grid={self.n_grid})"

    def spec(self, N):
        return self.generator(N)

    def chain(self, N) -> Chain:
        if N not in self._cache:
            self._cache[N] = build_chain(self.generator(N), simulation_only=self.simulation_only)
        return self._cache[N]

    def stationary(self, N) -> StationaryMeasure:
        key = ("mu", N)
        if key not in self._cache:
            self._cache[key] = stationary_measure(self.chain(N))
        return self._cache[key]

    def with_grid(self, n_grid):
        return ChainFamily(self.generator, n_grid, self.label, self.simulation_only)


@dataclass(frozen=True)
class FitResult:
    """Log-log fit ``value ~ prefactor * N^exponent`` with a verdict.

    ``verdict`` is one of ``vanishes``, ``converges``, ``diverges`` or
    ``inconclusive``.  ``limit`` is 0, the grid-top value, ``inf`` or None
    respectively.
    """

    n_grid: tuple
    values: tuple
    exponent: Optional[float]
    prefactor: Optional[float]
    residual: Optional[float]
    verdict: str
    limit: Optional[float]
    note: str = ""

    def as_dict(self):
        return {"n_grid": list(self.n_grid), "values": list(self.values),
                "exponent": self.exponent, "prefactor": self.prefactor,
                "residual": self.residual, "verdict": self.verdict, "limit": self.limit,
                "note": self.note}


def scale_fit(values, n_grid, vanish: float = VANISH_EXPONENT, diverge: float = DIVERGE_EXPONENT,
              max_residual: float = MAX_FIT_RESIDUAL) -> FitResult:
    """Least-squares fit of ``log(value)`` against ``log(N)``.

    Parameters
    ----------
    values, n_grid : sequences of equal length, at least 4 entries
        Positive values and the grid they were computed on.
    vanish, diverge : float
        Exponent thresholds for the ``vanishes`` and ``diverges`` verdicts.
    max_residual : float
        RMS log residual above which the fit is ``inconclusive``.

    Raises
    ------
    NonPositiveValue
        If any value is zero, negative or not finite.
    """
    v = np.asarray(values, dtype=float)
    n = np.asarray(n_grid, dtype=float)
    if v.shape != n.shape:
        raise ValueError("values and grid differ in length")
    if v.size < 4:
        raise ValueError("scale_fit needs at least 4 grid points")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise NonPositiveValue("scale_fit needs finite positive values")
    x, y = np.log(n), np.log(v)
    slope, icpt = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    if rms > max_residual:
        verdict, limit = "inconclusive", None
    elif slope < vanish:
        verdict, limit = "vanishes", 0.0
    elif slope > diverge:
        verdict, limit = "diverges", math.inf
    else:
        verdict, limit = "converges", float(v[-1])
    return FitResult(tuple(int(k) for k in n_grid), tuple(v.tolist()), float(slope),
                     float(math.exp(icpt)), rms, verdict, limit)


def fit_sequence(values, n_grid, **kw) -> FitResult:
    """:func:`scale_fit` extended to sequences with exact zeros.

    An identically zero sequence vanishes.  A sequence with some zeros is
    fitted on its positive entries when at least four remain, otherwise it
    is inconclusive.
    """
    v = [float(a) for a in values]
    grid = tuple(int(k) for k in n_grid)
    if any(a < 0 or math.isnan(a) for a in v):
        raise NonPositiveValue("sequence has negative or undefined entries")
    if all(a == 0 for a in v):
        return FitResult(grid, tuple(v), None, None, None, "vanishes", 0.0, "identically zero")
    if any(math.isinf(a) for a in v):
        if all(math.isinf(a) for a in v):
            return FitResult(grid, tuple(v), None, None, None, "diverges", math.inf,
                             "identically infinite")
        return FitResult(grid, tuple(v), None, None, None, "inconclusive", None,
                         "sequence has infinite entries")
    if len(v) < 4:
        return FitResult(grid, tuple(v), None, None, None, "inconclusive", None,
                         "fewer than 4 grid points")
    if any(a == 0 for a in v):
        keep = [(k, a) for k, a in zip(grid, v) if a > 0]
        if len(keep) < 4:
            return FitResult(grid, tuple(v), None, None, None, "inconclusive", None,
                             "too few positive entries")
        fit = scale_fit([a for _, a in keep], [k for k, _ in keep], **kw)
        return FitResult(grid, tuple(v), fit.exponent, fit.prefactor, fit.residual,
                         fit.verdict, fit.limit, "fitted on positive entries")
    return scale_fit(v, grid, **kw)


def mean_rate_between(trace, mu, A, B) -> float:
    """``r_F(A, B)`` on a trace, zero when ``B`` is empty."""
    if not B:
        return 0.0
    return mean_set_rate(trace, mu, A, B)


def valley_depth(chain: Chain, mu: StationaryMeasure, spec: ValleySpec, route: str = "auto") -> float:
    """Depth of a valley at fixed ``N``.

    ``route="capacity"`` returns ``mu(W) / Cap(W, B^c)`` (reversible chains);
    ``route="trace"`` returns ``1 / r(W, B^c)`` for the trace on
    ``W + B^c``; ``"auto"`` picks the capacity route when ``mu`` is reversible.
    With an empty annulus the equilibrium potential is the indicator of
    ``W`` and both routes reduce to ``mu(W) / sum_{a in W} mu(a) R(a, W^c)``,
    which is evaluated directly.
    """
    out = spec.outside(chain)
    if route == "auto":
        route = "capacity" if mu.reversible else "trace"
    if route not in ("capacity", "trace"):
        raise ValueError(f"unknown depth route {route!r}")
    if not spec.delta:
        if route == "capacity" and not mu.reversible:
            raise NotReversible("capacity route needs a reversible measure")
        w = chain.indices(spec.W)
        flux = np.asarray(chain.rates[w][:, chain.indices(out)].sum(axis=1)).ravel()
        return mu.mass(chain, spec.W) / math.fsum(mu.mu[w] * flux)
    if route == "capacity":
        return mu.mass(chain, spec.W) / capacity(chain, mu, spec.W, out).cap
    if route == "trace":
        tr = trace_by_hitting(chain, spec.W | out)
        return 1.0 / mean_set_rate(tr, mu, spec.W, out)


def _sup_additive(chain, g, starts, target):
    u = additive_until_hitting(chain, g, target)
    return float(np.max(u[chain.indices(starts)]))


@dataclass
class ValleyConditionTable:
    """Per-``N`` sequences of valley diagnostics with their fits."""

    spec: ValleySpec
    mode: str
    n_grid: tuple
    depth: list
    sequences: dict
    fits: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def verdicts(self):
        return {k: f.verdict for k, f in self.fits.items() if k != "depth"}

    @property
    def holds(self):
        return all(v == "vanishes" for v in self.verdicts.values())

    def as_dict(self):
        return {
            "well": sorted(self.spec.W, key=repr), "basin": sorted(self.spec.B, key=repr),
            "xi": self.spec.xi, "mode": self.mode, "n_grid": list(self.n_grid),
            "depth": list(self.depth),
            "sequences": {k: list(v) for k, v in self.sequences.items()},
            "fits": {k: f.as_dict() for k, f in self.fits.items()},
            "notes": dict(self.notes), "holds": self.holds,
        }


def check_valley_conditions(family: ChainFamily, spec: ValleySpec,
                            mode: str = "general") -> ValleyConditionTable:
    """Evaluate the sufficient valley conditions over the grid.

    General mode, with ``r_N = r(W, B^c)`` from the trace on ``W + B^c``:

    * ``attractor_return``: ``sup_{eta in W} E_eta[int_0^{T_xi} R^W 1{W}]`` on
      that trace, where ``R^W`` is the trace rate from a state into ``B^c``;
    * ``well_occupation``: ``r_N sup_eta E_eta[T_xi(W)]``;
    * ``annulus_occupation``: ``r_N sup_eta E_eta[T_{B^c}(delta)]``.

    Reversible mode evaluates ``Cap(W, B^c) / Cap(xi)`` and
    ``mu(delta) / mu(W)``.  A singleton well has infinite point capacity,
    so its capacity ratio is identically zero.
    """
    if mode not in ("general", "reversible"):
        raise ValueError(f"unknown mode {mode!r}")
    grid = family.n_grid
    depth = []
    if mode == "general":
        keys = ("attractor_return", "well_occupation", "annulus_occupation")
    else:
        keys = ("capacity_ratio", "mass_ratio")
    seqs = {k: [] for k in keys}
    notes = {}
    for N in grid:
        chain = family.chain(N)
        mu = family.stationary(N)
        out = spec.outside(chain)
        if mode == "reversible":
            if not mu.reversible:
                raise ModeMismatch(
                    f"reversible mode requested but the chain at N={N} is not reversible "
                    f"(residual {mu.reversibility_residual:.3e})")
            cap = capacity(chain, mu, spec.W, out).cap
            depth.append(mu.mass(chain, spec.W) / cap)
            if len(spec.W) == 1:
                seqs["capacity_ratio"].append(0.0)
                notes["capacity_ratio"] = "singleton well: point capacity infinite, ratio identically zero"
            else:
                seqs["capacity_ratio"].append(cap / point_capacity(chain, mu, spec.W, spec.xi))
            seqs["mass_ratio"].append(mu.mass(chain, spec.delta) / mu.mass(chain, spec.W))
            continue
        F = spec.W | out
        tr = trace_by_hitting(chain, F)
        r = mean_set_rate(tr, mu, spec.W, out)
        depth.append(1.0 / r)
        tchain = tr.chain
        sup = tr.support
        out_idx = [i for i, s in enumerate(sup) if s in out]
        escape = {s: float(tr.rates[i, out_idx].sum()) for i, s in enumerate(sup) if s in spec.W}
        seqs["attractor_return"].append(
            _sup_additive(tchain, escape, spec.W, {spec.xi}) if len(spec.W) > 1 else 0.0)
        seqs["well_occupation"].append(
            r * _sup_additive(chain, chain.indicator(spec.W), spec.W, {spec.xi})
            if len(spec.W) > 1 else 0.0)
        if spec.delta:
            seqs["annulus_occupation"].append(
                r * _sup_additive(chain, chain.indicator(spec.delta), spec.W, out))
        else:
            seqs["annulus_occupation"].append(0.0)
            notes["annulus_occupation"] = "empty annulus"
    fits = {"depth": fit_sequence(depth, grid)}
    for k, v in seqs.items():
        fits[k] = fit_sequence(v, grid)
    return ValleyConditionTable(spec, mode, grid, depth, seqs, fits, notes)


@dataclass
class TunnelingReport:
    """Inter-well rates over the grid, their limits and condition verdicts.

    ``rates[k][x][y]`` is ``r_N(E^x, E^y)`` at the ``k``-th grid point and
    ``scaled`` the same multiplied by ``theta[k]``.  ``conditions[name][x]``
    holds a :class:`FitResult` for a per-well condition sequence;
    ``conditions[name]["all"]`` for global ones.
    """

    labels: tuple
    n_grid: tuple
    theta: list
    theta_source: str
    rates: list
    scaled: list
    fits: dict
    limits: dict
    absorbing: tuple
    inaccessible: tuple
    conditions: dict
    checks: dict
    notes: dict

    def limit(self, x, y):
        return self.limits[(x, y)]

    def verdict(self, name, x="all"):
        return self.conditions[name][x].verdict

    def as_dict(self):
        lab = list(self.labels)

        def table(t):
            return [[[row[x][y] for y in lab] for x in lab] for row in t]

        return {
            "labels": lab, "n_grid": list(self.n_grid), "theta": list(self.theta),
            "theta_source": self.theta_source,
            "rates": table(self.rates), "scaled_rates": table(self.scaled),
            "fitted_limits": [[x, y, self.limits[(x, y)]] for x in lab for y in lab if x != y],
            "fits": [[x, y, self.fits[(x, y)].as_dict()] for x in lab for y in lab if x != y],
            "absorbing": list(self.absorbing), "inaccessible": list(self.inaccessible),
            "conditions": {name: {str(x): f.as_dict() for x, f in per.items()}
                           for name, per in self.conditions.items()},
            "checks": dict(self.checks), "notes": dict(self.notes),
        }


def tunneling_analysis(family: ChainFamily, partition,
                       theta: Optional[Callable[[int], float]] = None) -> TunnelingReport:
    """Inter-well rates on the scale ``theta`` and the tunneling conditions.

    ``partition`` is a :class:`MetaPartition` or a function of ``N``
    returning one.  For every grid point the trace on the union of wells gives
    ``r_N(E^x, E^y)``.  ``theta`` defaults to ``1 / max_x r_N(E^x, rest)``.
    Conditions (each a sequence that should vanish):

    * ``C1``: ``sup_{eta in E^x} E_eta[T_{rest}(delta)] / theta`` by direct solve;
    * ``C2``: ``sup_{eta in E^x} E_eta[int_0^{T_xi} R^x 1{E^x}]`` on the trace;
    * ``C3``: ``r_N(E^x, rest) sup_{eta in E^x} E_eta[T_xi(E^x)]``;
    * ``M3``: ``C1`` for non-absorbing wells and, on reversible chains, the
      capacity bound ``sup_eta mu(delta) / (theta Cap(eta, rest))`` for
      absorbing ones;
    * ``M3_global``: ``sup_{eta in delta} E_eta[T_E] / theta`` (all starts in
      the annulus);
    * reversible only: ``H1`` ``Cap(E^x, rest) / Cap(xi_x)``, ``H2``
      ``mu(delta) / mu(E^x)`` and ``H2'`` ``H2 / (theta r_N(E^x, rest))``.
    """
    grid = family.n_grid
    part_at = partition if callable(partition) else (lambda N: partition)
    labels = part_at(grid[0]).labels
    thetas, rates_t, scaled_t = [], [], []
    seq = {}
    checks = {"rate_sum_residual": 0.0, "capacity_route_residual": 0.0, "reversible": True}

    def push(name, x, value):
        seq.setdefault(name, {}).setdefault(x, []).append(float(value))

    for N in grid:
        chain = family.chain(N)
        mu = family.stationary(N)
        partition = part_at(N)
        if partition.labels != labels:
            raise InvalidSpec("well labels change across the grid")
        wells, E = partition.wells, partition.union
        rev = mu.reversible
        checks["reversible"] = checks["reversible"] and rev
        delta = partition.delta(chain)
        tr = trace_by_hitting(chain, E)
        r = {x: {y: (mean_set_rate(tr, mu, wells[x], wells[y]) if x != y else 0.0)
                 for y in labels} for x in labels}
        out_rate = {x: mean_rate_between(tr, mu, wells[x], partition.others(x)) for x in labels}
        for x in labels:
            s = sum(r[x].values())
            checks["rate_sum_residual"] = max(
                checks["rate_sum_residual"], abs(s - out_rate[x]) / max(out_rate[x], 1e-300))
        if theta is None:
            th = 1.0 / max(out_rate.values())
        else:
            th = float(theta(N))
            if not th > 0:
                raise NonPositiveValue(f"theta at N={N} is not positive")
        thetas.append(th)
        rates_t.append(r)
        scaled_t.append({x: {y: th * r[x][y] for y in labels} for x in labels})

        tchain = tr.chain
        sup = tr.support
        mu_delta = mu.mass(chain, delta)
        for x in labels:
            Ex, rest, xi = wells[x], partition.others(x), partition.attractors[x]
            if len(Ex) > 1:
                rest_idx = [i for i, s in enumerate(sup) if s in rest]
                rx = {s: float(tr.rates[i, rest_idx].sum()) for i, s in enumerate(sup) if s in Ex}
                push("C2", x, _sup_additive(tchain, rx, Ex, {xi}))
                push("C3", x, out_rate[x] * _sup_additive(chain, chain.indicator(Ex), Ex, {xi}))
            else:
                push("C2", x, 0.0)
                push("C3", x, 0.0)
            if delta:
                c1 = _sup_additive(chain, chain.indicator(delta), Ex, rest) / th
            else:
                c1 = 0.0
            push("C1", x, c1)
            if rev:
                cap_x = capacity(chain, mu, Ex, rest).cap
                push("H1", x, 0.0 if len(Ex) == 1 else cap_x / point_capacity(chain, mu, Ex, xi))
                h2 = mu_delta / mu.mass(chain, Ex)
                push("H2", x, h2)
                push("H2'", x, h2 / (th * out_rate[x]) if out_rate[x] > 0 else math.inf)
                bound = max(mu_delta / (th * capacity(chain, mu, {eta}, rest).cap) for eta in Ex)
                push("C1_bound", x, bound)
                # route through capacities for every ordered pair
                for y in labels:
                    if y == x:
                        continue
                    Ey = wells[y]
                    rhs = 0.5 * (cap_x + capacity(chain, mu, Ey, partition.others(y)).cap
                                 - capacity(chain, mu, Ex | Ey, E - Ex - Ey).cap)
                    lhs = mu.mass(chain, Ex) * r[x][y]
                    scale = max(abs(lhs), abs(rhs))
                    if scale > 1e-300:
                        checks["capacity_route_residual"] = max(
                            checks["capacity_route_residual"], abs(lhs - rhs) / scale)
        if delta:
            push("M3_global", "all",
                 _sup_additive(chain, np.ones(chain.n), delta, E) / th)
        else:
            push("M3_global", "all", 0.0)

    fits = {(x, y): fit_sequence([row[x][y] for row in scaled_t], grid)
            for x in labels for y in labels if x != y}
    limits = {k: f.limit for k, f in fits.items()}
    finite = [v for v in limits.values() if v is not None and math.isfinite(v)]
    rmax = max(finite) if finite else 0.0
    cut = ABSORBING_FRACTION * rmax

    def small(v):
        return v is not None and math.isfinite(v) and v <= cut

    absorbing = tuple(x for x in labels
                      if all(small(limits[(x, y)]) for y in labels if y != x))
    inaccessible = tuple(x for x in labels if x not in absorbing
                         and all(small(limits[(y, x)]) for y in labels if y != x))

    conditions = {}
    for name, per in seq.items():
        conditions[name] = {x: fit_sequence(v, grid) for x, v in per.items()}
    # H0: every scaled rate sequence has a finite limit
    conditions["H0"] = {"all": FitResult(
        grid, tuple(), None, None, None,
        "holds" if all(f.verdict in ("vanishes", "converges") for f in fits.values()) else "fails",
        None, "all scaled rate sequences converge")}
    m3 = {}
    for x in labels:
        if x in absorbing and "C1_bound" in conditions:
            m3[x] = conditions["C1_bound"][x]
        else:
            m3[x] = conditions["C1"][x]
    conditions["M3"] = m3
    notes = {}
    if theta is None:
        notes["theta"] = "theta_N = 1 / max_x r_N(E^x, rest)"
    if not checks["reversible"]:
        checks.pop("capacity_route_residual")
        notes["reversible"] = "capacity conditions H1, H2, H2' skipped: chain not reversible"
    return TunnelingReport(tuple(labels), grid, thetas, "auto" if theta is None else "user",
                           rates_t, scaled_t, fits, limits, absorbing, inaccessible,
                           conditions, checks, notes)
