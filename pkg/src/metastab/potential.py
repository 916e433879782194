"""Potential theory for reversible chains.

Capacities are computed in the normalised invariant measure ``mu``.  Every
capacity is produced by two routes: the Dirichlet form of the equilibrium
potential, and the return-race sum ``sum_{a in A} M(a) P_a[T+_B < T+_A]``.
The identity helpers return both sides of an identity together with their
relative difference instead of a bare boolean.
"""

from dataclasses import dataclass
import numpy as np

from .chain import (Chain, StationaryMeasure, _complement, additive_until_hitting,
                    hitting_probability, transient_functional_vector)
from .errors import NotReversible, OverlappingSets, SingletonWell, SolverFailure
from .trace import TraceChain, h_trace, trace_by_hitting, trace_stationary

__all__ = [
    "CapacityReport", "IdentityCheck", "dirichlet_form", "equilibrium_potential",
    "capacity", "point_capacity", "mean_set_rate", "three_set_rate_identity",
    "two_set_rate_identity",
    "h_capacity_scaling", "hitting_integral_formula", "centered_occupation_bound",
    "replacement_bound",
]

POTENTIAL_SLACK = 1e-10
AGREEMENT_GUARD = 1e-6


def _rel(a, b, floor=0.0):
    scale = max(abs(a), abs(b), floor)
    return 0.0 if scale == 0 else abs(a - b) / scale


@dataclass(frozen=True)
class CapacityReport:
    A: frozenset
    B: frozenset
    cap: float
    potential: np.ndarray
    escape_value: float
    residual: float

    @property
    def agreement(self):
        return _rel(self.cap, self.escape_value)


@dataclass(frozen=True)
class IdentityCheck:
    """Two sides of an identity and their relative difference.

    ``scale`` is the magnitude of the terms combined on either side; it
    bounds the denominator from below when the sides cancel to zero.
    """

    name: str
    lhs: float
    rhs: float
    scale: float = 0.0

    @property
    def residual(self):
        return _rel(self.lhs, self.rhs, self.scale)

    def as_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "scale": self.scale,
                "residual": self.residual}


def _require_reversible(mu):
    if not mu.reversible:
        raise NotReversible(
            f"measure is not reversible (detailed-balance residual "
            f"{mu.reversibility_residual:.3e})")


def dirichlet_form(chain: Chain, mu: StationaryMeasure, f) -> float:
    """``1/2 sum_{a,b} mu(a) R(a,b) (f(b) - f(a))^2``."""
    _require_reversible(mu)
    fv = chain.vector(f)
    R = chain.rates.tocoo()
    d = fv[R.col] - fv[R.row]
    return 0.5 * float(np.sum(mu.mu[R.row] * R.data * d * d))


def _check_sets(chain, A, B, allow_empty=False):
    a, b = chain.indices(A), chain.indices(B)
    if np.intersect1d(a, b).size:
        raise OverlappingSets("A and B must be disjoint")
    if not allow_empty and (a.size == 0 or b.size == 0):
        raise ValueError("A and B must be nonempty")
    return a, b


def equilibrium_potential(chain: Chain, mu: StationaryMeasure, A, B) -> np.ndarray:
    """``f(x) = P_x[T_A < T_B]``; solves the Dirichlet problem with 1 on A, 0 on B."""
    _check_sets(chain, A, B)
    f = hitting_probability(chain, A, B)
    if f.min() < -POTENTIAL_SLACK or f.max() > 1 + POTENTIAL_SLACK:
        raise SolverFailure("equilibrium potential left [0, 1]")
    return f


def capacity(chain: Chain, mu: StationaryMeasure, A, B) -> CapacityReport:
    """Capacity between disjoint sets, by two independent routes.

    ``cap`` is the Dirichlet form of the equilibrium potential;
    ``escape_value`` is the return-race sum over ``A``.  The capacity
    against an empty set is 0.
    """
    _require_reversible(mu)
    a, b = _check_sets(chain, A, B, allow_empty=True)
    A, B = frozenset(A), frozenset(B)
    if a.size == 0 or b.size == 0:
        return CapacityReport(A, B, 0.0, np.full(chain.n, 1.0 if b.size == 0 else 0.0), 0.0, 0.0)
    f = equilibrium_potential(chain, mu, A, B)
    cap = dirichlet_form(chain, mu, f)
    # P_a[T+_B < T+_A] = sum_x p(a, x) P_x[T_B < T_A] and the latter is 1 - f
    escape = chain.jump[a].dot(1.0 - f)
    escape_value = float(np.dot(mu.jump_measure[a], escape))
    interior = _complement(chain.n, np.concatenate([a, b]))
    if interior.size:
        residual = float(np.max(np.abs(f[interior] - chain.jump[interior].dot(f))))
    else:
        residual = 0.0
    if _rel(cap, escape_value) > AGREEMENT_GUARD:
        raise SolverFailure(
            f"capacity routes disagree: Dirichlet {cap:.6e} vs escape {escape_value:.6e}")
    return CapacityReport(A, B, cap, f, escape_value, residual)


def point_capacity(chain: Chain, mu: StationaryMeasure, W, xi) -> float:
    """``min_{a in W, a != xi} Cap({a}, {xi})``."""
    others = [s for s in W if s != xi]
    if xi not in set(W) or not others:
        raise SingletonWell("well must contain the attractor and at least one other state")
    return min(capacity(chain, mu, {s}, {xi}).cap for s in others)


def mean_set_rate(trace: TraceChain, mu: StationaryMeasure, A, B) -> float:
    """Average rate at which the trace jumps from ``A`` into ``B``.

    The average over ``A`` is taken with respect to ``h * mu`` where ``mu``
    is the invariant measure of the base chain.
    """
    A, B = set(A), set(B)
    if A & B:
        raise OverlappingSets("A and B must be disjoint")
    sup = trace.support
    ia = [i for i, s in enumerate(sup) if s in A]
    ib = [i for i, s in enumerate(sup) if s in B]
    if len(ia) != len(A) or len(ib) != len(B):
        raise ValueError("A and B must lie inside the trace support")
    base = trace.base
    w = mu.mu[base.indices(sup)]
    if trace.weight is not None:
        w = w * trace.weight
    wa = w[ia]
    flux = trace.rates[np.ix_(ia, ib)].sum(axis=1)
    return float(np.dot(wa, flux) / wa.sum())


def three_set_rate_identity(chain: Chain, mu: StationaryMeasure, F, A, B) -> IdentityCheck:
    """``mu(A) r_F(A,B)`` against ``(Cap(A,F-A) + Cap(B,F-B) - Cap(A+B, F-A-B)) / 2``."""
    F, A, B = set(F), set(A), set(B)
    if not (A <= F and B <= F):
        raise ValueError("A and B must be subsets of F")
    if A & B:
        raise OverlappingSets("A and B must be disjoint")
    tr = trace_by_hitting(chain, F)
    lhs = mu.mass(chain, A) * mean_set_rate(tr, mu, A, B)
    AB = A | B
    caps = (capacity(chain, mu, A, F - A).cap, capacity(chain, mu, B, F - B).cap,
            capacity(chain, mu, AB, F - AB).cap)
    rhs = 0.5 * (caps[0] + caps[1] - caps[2])
    return IdentityCheck("three-set rate", lhs, rhs, max(caps))


def two_set_rate_identity(chain: Chain, mu: StationaryMeasure, A, B) -> IdentityCheck:
    """``mu(A) r_{A+B}(A, B)`` against ``Cap(A, B)``."""
    tr = trace_by_hitting(chain, set(A) | set(B))
    lhs = mu.mass(chain, A) * mean_set_rate(tr, mu, A, B)
    return IdentityCheck("two-set rate", lhs, capacity(chain, mu, A, B).cap)


def h_capacity_scaling(chain: Chain, mu: StationaryMeasure, h, A, B) -> IdentityCheck:
    """``<h>_mu Cap_h(A, B)`` on the weighted trace against ``Cap(A, B)``."""
    _require_reversible(mu)
    tr = h_trace(chain, h)
    if not (set(A) <= set(tr.support) and set(B) <= set(tr.support)):
        raise ValueError("A and B must lie in the support of h")
    mu_h = trace_stationary(tr, mu)
    cap_h = capacity(tr.chain, mu_h, A, B).cap
    mean_h = float(np.dot(chain.vector(h), mu.mu))
    return IdentityCheck("weighted-trace capacity", mean_h * cap_h, capacity(chain, mu, A, B).cap)


def hitting_integral_formula(chain: Chain, mu: StationaryMeasure, A, B, g) -> IdentityCheck:
    """Mean of ``int_0^{T_B} g`` from the last-exit law on ``A``, two ways.

    ``rhs = <g, f_AB>_mu / Cap(A, B)``; ``lhs`` mixes linear-solve
    expectations ``E_a[int_0^{T_B} g]`` over ``nu(a) = M(a) P_a[T+_B < T+_A] / Cap``.
    """
    rep = capacity(chain, mu, A, B)
    gv = chain.vector(g)
    rhs = float(np.dot(gv * mu.mu, rep.potential)) / rep.cap
    a = chain.indices(A)
    escape = chain.jump[a].dot(1.0 - rep.potential)
    nu = mu.jump_measure[a] * escape / rep.cap
    u = additive_until_hitting(chain, gv, B)
    lhs = float(np.dot(nu, u[a]))
    return IdentityCheck("hitting integral", lhs, rhs)


def replacement_bound(chain: Chain, mu: StationaryMeasure, g, xi, t: float):
    """Both sides of the replacement bound for a mean-zero ``g``.

    Returns ``(sup_x |E_x[int_0^t g]|, 2 max_{a in A} E_a[int_0^{T_xi} |g|])``
    with ``A`` the support of ``g``, which must contain ``xi``.  No
    reversibility is needed.
    """
    gv = chain.vector(g)
    support = np.flatnonzero(gv)
    if support.size == 0:
        raise ValueError("g must have nonempty support")
    if chain.index[xi] not in set(support.tolist()):
        raise ValueError("xi must lie in the support of g")
    mean = float(np.dot(mu.mu, gv))
    if abs(mean) > 1e-10 * float(np.dot(mu.mu, np.abs(gv))):
        raise ValueError(f"g must have zero mean under mu (mean {mean:.3e})")
    lhs = float(np.max(np.abs(transient_functional_vector(chain, gv, t))))
    u = additive_until_hitting(chain, np.abs(gv), {xi})
    return lhs, 2.0 * float(np.max(u[support]))


def centered_occupation_bound(chain: Chain, mu: StationaryMeasure, block, xi, g):
    """Both sides of the attractor bound for a centred observable on one block.

    With ``g_c = (g - <g>_block) 1{block}`` returns
    ``(max_{a in block} E_a[int_0^{T_xi} |g_c|], 2 <|g|>_block mu(block) / Cap(xi))``
    where ``Cap(xi)`` is the point capacity of ``xi`` within the block.
    """
    _require_reversible(mu)
    idx = chain.indices(block)
    gv = chain.vector(g)
    w = mu.mu[idx]
    mean = float(np.dot(w, gv[idx]) / w.sum())
    gc = np.zeros(chain.n)
    gc[idx] = np.abs(gv[idx] - mean)
    u = additive_until_hitting(chain, gc, {xi})
    lhs = float(np.max(u[idx]))
    if idx.size < 2:
        return lhs, float("inf")
    avg_abs = float(np.dot(w, np.abs(gv[idx])) / w.sum())
    rhs = 2 * avg_abs * float(w.sum()) / point_capacity(chain, mu, block, xi)
    return lhs, rhs
