"""Trace processes.

The trace of a chain on a set ``F`` is the process observed only while it
sits in ``F``: excursions outside ``F`` are cut out and time is glued back
together.  It is again a Markov chain, with rates

    R^F(a, b) = R(a, b) + sum_{z not in F} R(a, z) P_z[T_F = T_b].

Two independent routes are provided: one harmonic solve against the
complement (:func:`trace_by_hitting`) and state-by-state elimination
(:func:`trace_by_elimination`).  The weighted variant :func:`h_trace` runs
the clock at speed ``h``; its rates are ``lam(a)/h(a) P_a[T+_F = T+_b]``.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from .chain import (Chain, ChainSpec, StationaryMeasure, _complement, _interior_solve,
                    build_chain, stationary_measure)
from .errors import EmptySupport, InvalidSpec, NeverVisitsA, SolverFailure
from .paths import PathSample

__all__ = [
    "TraceChain", "trace_by_hitting", "trace_by_elimination", "h_trace",
    "trace_stationary", "extract_trace_path", "return_distribution",
]

TRUNCATION = 1e-14


@dataclass(frozen=True, eq=False)
class TraceChain:
    """Trace (or weighted trace) of ``base`` on ``support``.

    ``rates`` is a dense ``|F| x |F|`` array in the order of ``support``;
    ``weight`` is ``h`` restricted to the support, or None for an indicator.
    """

    base: Chain
    support: tuple
    rates: np.ndarray
    weight: Optional[np.ndarray] = None

    @property
    def holding(self):
        return self.rates.sum(axis=1)

    def rate(self, a, b):
        i, j = self.support.index(a), self.support.index(b)
        return float(self.rates[i, j])

    def spec(self):
        n = len(self.support)
        rates = {(self.support[i], self.support[j]): self.rates[i, j]
                 for i in range(n) for j in range(n) if i != j and self.rates[i, j] > 0}
        return ChainSpec(self.support, rates)

    @cached_property
    def chain(self) -> Chain:
        """The trace as a standalone :class:`Chain` (needs two or more states)."""
        return build_chain(self.spec())


def _support_indices(chain, F):
    idx = chain.indices(F)
    if idx.size == 0:
        raise EmptySupport("trace support must be nonempty")
    return idx


def _absorption(chain, f_idx):
    """``H[z, b] = P_z[T_F = T_b]`` for ``z`` outside ``F``, one factorization."""
    c_idx = _complement(chain.n, f_idx)
    if c_idx.size == 0:
        return c_idx, np.zeros((0, f_idx.size))
    rhs = chain.jump[c_idx][:, f_idx].toarray()
    H = _interior_solve(chain, c_idx, rhs)
    return c_idx, H.reshape(c_idx.size, f_idx.size)


def return_distribution(chain: Chain, F) -> np.ndarray:
    """Matrix ``q[a, b] = P_a[T+_F = T+_b]`` for ``a, b`` in ``F`` (diagonal included)."""
    f_idx = _support_indices(chain, F)
    c_idx, H = _absorption(chain, f_idx)
    q = chain.jump[f_idx][:, f_idx].toarray()
    if c_idx.size:
        q += chain.jump[f_idx][:, c_idx].toarray() @ H
    return q


def _truncate(rates, holding):
    small = rates < TRUNCATION * holding[:, None]
    rates = rates.copy()
    rates[small] = 0.0
    return rates


def trace_by_hitting(chain: Chain, F, truncate: bool = True) -> TraceChain:
    """Trace rates from absorption probabilities into ``F``.

    All ``|F|`` right-hand sides share one factorization of the
    complement-restricted system.
    """
    f_idx = _support_indices(chain, F)
    c_idx, H = _absorption(chain, f_idx)
    R = chain.rates
    RF = R[f_idx][:, f_idx].toarray()
    if c_idx.size:
        RF += R[f_idx][:, c_idx].toarray() @ H
    np.fill_diagonal(RF, 0.0)
    if truncate:
        RF = _truncate(RF, chain.holding[f_idx])
    support = tuple(chain.states[i] for i in f_idx)
    return TraceChain(chain, support, RF)


def trace_by_elimination(chain: Chain, F, order=None) -> TraceChain:
    """Trace rates by removing the states outside ``F`` one at a time.

    Removing ``z`` replaces ``R(a, b)`` by ``R(a, b) + R(a, z) p(z, b)``, with
    ``p`` the jump probabilities of the current reduced chain.  The default
    order is the chain's state order; any permutation gives the same result.
    """
    f_idx = _support_indices(chain, F)
    if order is None:
        drop = [chain.states[i] for i in _complement(chain.n, f_idx)]
    else:
        drop = list(order)
        if sorted(chain.index[s] for s in drop) != _complement(chain.n, f_idx).tolist():
            raise InvalidSpec("elimination order must list exactly the states outside F")
    R = chain.rates.toarray()
    alive = np.ones(chain.n, dtype=bool)
    for z in drop:
        k = chain.index[z]
        alive[k] = False
        out = R[k] * alive
        lam = out.sum()
        if lam <= 0:
            raise SolverFailure(f"state {z!r} has no exit during elimination")
        inflow = R[:, k] * alive
        R += np.outer(inflow, out / lam)
        R[k, :] = 0.0
        R[:, k] = 0.0
        np.fill_diagonal(R, 0.0)
    RF = R[np.ix_(f_idx, f_idx)]
    support = tuple(chain.states[i] for i in f_idx)
    return TraceChain(chain, support, RF)


def h_trace(chain: Chain, h) -> TraceChain:
    """Weighted trace for a nonnegative weight ``h`` with support ``F = {h > 0}``."""
    hv = chain.vector(h)
    if np.any(hv < 0):
        raise InvalidSpec("weight must be nonnegative")
    f_idx = np.flatnonzero(hv > 0)
    if f_idx.size == 0:
        raise EmptySupport("weight has empty support")
    support = tuple(chain.states[i] for i in f_idx)
    q = return_distribution(chain, support)
    Rh = (chain.holding[f_idx] / hv[f_idx])[:, None] * q
    np.fill_diagonal(Rh, 0.0)
    return TraceChain(chain, support, Rh, weight=hv[f_idx].copy())


def trace_stationary(trace: TraceChain, mu: Optional[StationaryMeasure] = None,
                     tol: float = 1e-10) -> StationaryMeasure:
    """Invariant probability of the trace: ``h mu`` restricted to the support.

    The candidate is checked against the trace generator rather than solved
    for; reversibility is re-evaluated on the trace rates.
    """
    base = trace.base
    if mu is None:
        mu = stationary_measure(base)
    f_idx = base.indices(trace.support)
    w = trace.weight if trace.weight is not None else np.ones(f_idx.size)
    nu = w * mu.mu[f_idx]
    nu = nu / nu.sum()
    R = trace.rates
    hold = R.sum(axis=1)
    flux = nu @ R - nu * hold
    scale = max(float(np.max(nu * hold)), np.finfo(float).tiny)
    residual = float(np.max(np.abs(flux))) if nu.size else 0.0
    if residual > tol * scale * max(1, nu.size):
        raise SolverFailure(f"trace invariance residual {residual:.3e}")
    flow = nu[:, None] * R
    diff = np.abs(flow - flow.T)
    denom = np.maximum(flow, flow.T)
    nz = denom > 0
    rev = float(np.max(diff[nz] / denom[nz])) if nz.any() else 0.0
    return StationaryMeasure(trace.support, nu, hold * nu, rev <= 1e-8, rev, residual)


def extract_trace_path(path, A):
    """Trace of a sampled path on ``A``.

    Segments outside ``A`` are removed and neighbouring segments in the same
    state merged.  Durations are accumulated as exact fractions, so the
    total duration equals the occupation time of ``A`` with no rounding.
    A leading stretch outside ``A`` is dropped and its length reported in
    ``dropped_prefix``.
    """
    A = set(A)
    states, durations = [], []
    prefix = Fraction(0)
    for s, d in path.exact_segments():
        if s not in A:
            if not states:
                prefix += d
            continue
        if states and states[-1] == s:
            durations[-1] += d
        else:
            states.append(s)
            durations.append(d)
    if not states:
        raise NeverVisitsA("path never visits the set")
    times = [Fraction(0)]
    for d in durations:
        times.append(times[-1] + d)
    return PathSample(tuple(states), tuple(times), path.stop_reason,
                      dropped_prefix=prefix, seed=path.seed, stream=path.stream)
