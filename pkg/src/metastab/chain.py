"""Finite continuous-time Markov chains.

A chain is given by off-diagonal jump rates ``R(a, b)``.  The holding rate
of a state is the row sum ``lam(a) = sum_b R(a, b)`` and the embedded jump
chain moves with probabilities ``p(a, b) = R(a, b) / lam(a)``.  All linear
algebra is done on the jump chain (``I - P``) rather than on the generator:
rows of ``I - P`` are normalised, which keeps solves well conditioned when
rates span many orders of magnitude.
"""

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components
from scipy.stats import poisson

from .errors import (InvalidSpec, NotIrreducible, OverlappingSets, SimulationOnly,
                     SolverFailure, UnknownState, ZeroHoldingRate)

__all__ = [
    "ChainSpec", "Chain", "StationaryMeasure", "build_chain", "stationary_measure",
    "hitting_probability", "expected_additive_until_hitting", "additive_until_hitting",
    "transient_functional", "transient_functional_vector", "escape_probability",
]

DEFAULT_TOL = 1e-10
REVERSIBILITY_TOL = 1e-8
UNIFORMIZATION_FACTOR = 1.05
POISSON_TAIL = 1e-12
MAX_UNIFORMIZATION_DEPTH = 10_000_000


@dataclass(frozen=True)
class ChainSpec:
    """Ordered state labels plus a sparse ``{(a, b): rate}`` mapping."""

    states: tuple
    rates: Mapping = field(default_factory=dict)

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(set(states)) != len(states):
            raise InvalidSpec("duplicate state labels")
        known = set(states)
        clean = {}
        for (a, b), r in dict(self.rates).items():
            if a not in known:
                raise UnknownState(a)
            if b not in known:
                raise UnknownState(b)
            if a == b:
                raise InvalidSpec(
                    f"self-loop rate at {a!r}: a jump to the same state does not "
                    "change the process; omit the entry")
            r = float(r)
            if not math.isfinite(r) or r < 0:
                raise InvalidSpec(f"rate {a!r}->{b!r} must be finite and >= 0, got {r!r}")
            if r > 0:
                clean[(a, b)] = r
        object.__setattr__(self, "rates", clean)

    def scaled(self, c):
        return ChainSpec(self.states, {k: c * v for k, v in self.rates.items()})


class Chain:
    """Validated chain with holding rates and jump probabilities.

    Instances are treated as immutable; the arrays are flagged read-only.

    Attributes
    ----------
    states : tuple
        State labels in the order given by the spec.
    rates : scipy.sparse.csr_matrix
        Off-diagonal rate matrix ``R``.
    holding : ndarray
        Holding rates ``lam``.
    jump : scipy.sparse.csr_matrix
        Jump-chain transition matrix ``P`` (zero rows for absorbing states).
    simulation_only : bool
        True when absorbing states were allowed; analysis routines refuse
        such chains.
    """

    def __init__(self, spec, rates, holding, jump, simulation_only=False):
        self.spec = spec
        self.states = spec.states
        self.index = {s: i for i, s in enumerate(self.states)}
        self.rates = rates
        self.holding = holding
        self.jump = jump
        self.simulation_only = simulation_only
        self.holding.flags.writeable = False

    def __repr__(self):
        return f"Chain(n={self.n}, simulation_only={self.simulation_only})"

    @property
    def n(self):
        return len(self.states)

    def indices(self, subset: Iterable[Hashable]) -> np.ndarray:
        try:
            idx = sorted({self.index[s] for s in subset})
        except KeyError as exc:
            raise UnknownState(exc.args[0]) from None
        return np.asarray(idx, dtype=np.intp)

    def mask(self, subset):
        m = np.zeros(self.n, dtype=bool)
        m[self.indices(subset)] = True
        return m

    def indicator(self, subset):
        return self.mask(subset).astype(float)

    def vector(self, g) -> np.ndarray:
        """Coerce a per-state function (mapping, callable or array) to an array."""
        if isinstance(g, Mapping):
            v = np.zeros(self.n)
            for s, val in g.items():
                v[self.index[s]] = val
            return v
        if callable(g):
            return np.array([float(g(s)) for s in self.states])
        v = np.asarray(g, dtype=float)
        if v.shape != (self.n,):
            raise InvalidSpec(f"per-state vector has shape {v.shape}, expected ({self.n},)")
        return v

    def generator(self):
        return (self.rates - sp.diags(self.holding)).tocsr()

    def rate(self, a, b):
        return float(self.rates[self.index[a], self.index[b]])

    def p(self, a, b):
        return float(self.jump[self.index[a], self.index[b]])

    def require_analysable(self):
        if self.simulation_only:
            raise SimulationOnly("chain has absorbing states and is restricted to simulation")


def build_chain(spec: ChainSpec, simulation_only: bool = False) -> Chain:
    """Compute holding rates and jump probabilities, checking irreducibility.

    With ``simulation_only=True`` states without outgoing rates are allowed
    (they are absorbing) and irreducibility is not required.
    """
    n = len(spec.states)
    if n == 0:
        raise InvalidSpec("empty state space")
    index = {s: i for i, s in enumerate(spec.states)}
    rows, cols, vals = [], [], []
    for (a, b), r in spec.rates.items():
        rows.append(index[a])
        cols.append(index[b])
        vals.append(r)
    rates = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    rates.sum_duplicates()
    holding = np.asarray(rates.sum(axis=1)).ravel()
    if not simulation_only:
        zero = np.flatnonzero(holding <= 0)
        if zero.size and n > 1:
            raise ZeroHoldingRate(spec.states[zero[0]])
        if n == 1:
            raise ZeroHoldingRate(spec.states[0])
        ncomp, labels = connected_components(rates, directed=True, connection="strong")
        if ncomp > 1:
            comps = [[spec.states[i] for i in np.flatnonzero(labels == c)] for c in range(ncomp)]
            raise NotIrreducible(comps)
    inv = np.divide(1.0, holding, out=np.zeros(n), where=holding > 0)
    jump = (sp.diags(inv) @ rates).tocsr()
    return Chain(spec, rates, holding, jump, simulation_only=simulation_only)


@dataclass(frozen=True)
class StationaryMeasure:
    """Invariant probability ``mu`` and jump-chain measure ``M = lam * mu``."""

    states: tuple
    mu: np.ndarray
    jump_measure: np.ndarray
    reversible: bool
    reversibility_residual: float
    residual: float

    def mass(self, chain, subset):
        return float(self.mu[chain.indices(subset)].sum())

    def as_dict(self):
        return dict(zip(self.states, self.mu.tolist()))


def _lu(matrix):
    try:
        return spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SolverFailure(f"sparse factorization failed: {exc}") from None


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise SolverFailure(f"non-finite values in {what}")


def detailed_balance_residual(chain, mu):
    flow = (sp.diags(mu) @ chain.rates).tocsr()
    diff = abs(flow - flow.T).tocoo()
    if diff.nnz == 0:
        return 0.0
    scale = flow.maximum(flow.T).tocsr()
    denom = np.asarray(scale[diff.row, diff.col]).ravel()
    return float(np.max(diff.data / denom))


def stationary_measure(chain: Chain, tol: float = DEFAULT_TOL,
                       reversibility_tol: float = REVERSIBILITY_TOL) -> StationaryMeasure:
    """Invariant probability measure of an irreducible chain.

    The jump-chain measure ``M`` is obtained by fixing ``M`` at the first
    state and solving the remaining rows of ``M (I - P) = 0`` with a sparse
    LU factorization; ``mu = M / lam`` is then normalised.  One step of
    iterative refinement is applied before the residual check.

    Raises
    ------
    SolverFailure
        If the residual ``|mu L|_inf`` exceeds ``tol * max(lam)``.
    """
    chain.require_analysable()
    n = chain.n
    P = chain.jump
    A = (sp.identity(n, format="csr") - P).T.tocsr()
    if n == 1:
        M = np.ones(1)
    else:
        sub = A[1:, 1:]
        lu = _lu(sub)
        rhs = -A[1:, 0].toarray().ravel()
        x = lu.solve(rhs)
        x = x + lu.solve(rhs - sub @ x)
        M = np.concatenate([[1.0], x])
    _check_finite(M, "stationary solve")
    mu = M / chain.holding
    if np.any(mu <= 0):
        raise SolverFailure("stationary solve produced non-positive mass")
    mu = mu / mu.sum()
    residual = float(np.max(np.abs(chain.generator().T @ mu)))
    if residual > tol * float(np.max(chain.holding)):
        raise SolverFailure(f"invariance residual {residual:.3e} above tolerance")
    rev = detailed_balance_residual(chain, mu)
    mu.flags.writeable = False
    jm = chain.holding * mu
    jm.flags.writeable = False
    return StationaryMeasure(chain.states, mu, jm, rev <= reversibility_tol, rev, residual)


def _interior_solve(chain, interior, rhs):
    """Solve ``(I - P)[interior, interior] x = rhs``."""
    P = chain.jump
    sub = sp.identity(interior.size, format="csc") - P[interior][:, interior].tocsc()
    lu = _lu(sub)
    x = lu.solve(np.asarray(rhs, dtype=float))
    _check_finite(x, "harmonic solve")
    resid = np.max(np.abs(sub @ x - rhs)) if x.size else 0.0
    scale = max(1.0, float(np.max(np.abs(rhs))) if np.size(rhs) else 1.0)
    if resid > 1e-8 * scale:
        x = x + lu.solve(rhs - sub @ x)
        resid = np.max(np.abs(sub @ x - rhs))
        if resid > 1e-8 * scale:
            raise SolverFailure(f"harmonic solve residual {resid:.3e}")
    return x


def _complement(n, idx):
    mask = np.ones(n, dtype=bool)
    mask[idx] = False
    return np.flatnonzero(mask)


def hitting_probability(chain: Chain, A, B) -> np.ndarray:
    """``P_x[T_A < T_B]`` for every state: 1 on A, 0 on B, harmonic elsewhere."""
    a, b = chain.indices(A), chain.indices(B)
    if np.intersect1d(a, b).size:
        raise OverlappingSets("A and B must be disjoint")
    f = np.zeros(chain.n)
    f[a] = 1.0
    interior = _complement(chain.n, np.concatenate([a, b]))
    if interior.size:
        rhs = np.asarray(chain.jump[interior][:, a].sum(axis=1)).ravel()
        f[interior] = _interior_solve(chain, interior, rhs)
    return f


def additive_until_hitting(chain: Chain, g, target) -> np.ndarray:
    """Vector of ``E_x[int_0^{T_target} g(X_s) ds]`` over all states ``x``.

    Solves ``L u = -g`` off the target with ``u = 0`` on it.
    """
    t = chain.indices(target)
    if t.size == 0:
        raise InvalidSpec("target set must be nonempty")
    gv = chain.vector(g)
    u = np.zeros(chain.n)
    interior = _complement(chain.n, t)
    if interior.size:
        u[interior] = _interior_solve(chain, interior, gv[interior] / chain.holding[interior])
    return u


def expected_additive_until_hitting(chain: Chain, g, start, target) -> float:
    """``E_start[int_0^{T_target} g(X_s) ds]``; zero when ``start`` is in the target."""
    if start not in chain.index:
        raise UnknownState(start)
    return float(additive_until_hitting(chain, g, target)[chain.index[start]])


def transient_functional_vector(chain: Chain, g, t: float) -> np.ndarray:
    """``E_x[int_0^t g(X_s) ds]`` for every ``x`` by uniformization.

    With ``Lam = 1.05 max(lam)`` and ``Q = I + L / Lam``,
    ``int_0^t e^{sL} g ds = Lam^{-1} sum_k P(N_{Lam t} > k) Q^k g``; the series
    is cut once the Poisson survival weight drops below 1e-12.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    gv = chain.vector(g)
    if t == 0:
        return np.zeros(chain.n)
    lam = UNIFORMIZATION_FACTOR * float(np.max(chain.holding))
    mean = lam * t
    if mean > MAX_UNIFORMIZATION_DEPTH:
        raise SolverFailure(f"uniformization depth {mean:.3g} exceeds guard")
    kmax = int(poisson.isf(POISSON_TAIL, mean)) + 1
    weights = poisson.sf(np.arange(kmax + 1), mean)
    Q = (sp.identity(chain.n, format="csr") + chain.generator() / lam).tocsr()
    acc = np.zeros(chain.n)
    v = gv.copy()
    for w in weights:
        acc += w * v
        v = Q @ v
    return acc / lam


def transient_functional(chain: Chain, g, start, t: float) -> float:
    return float(transient_functional_vector(chain, g, t)[chain.index[start]])


def escape_probability(chain: Chain, start, A, B) -> float:
    """``P_start[T+_B < T+_A]`` for ``start`` in ``A`` (return-race probability)."""
    if start not in set(A):
        raise InvalidSpec("start must belong to A")
    h = hitting_probability(chain, B, A)
    i = chain.index[start]
    return float(chain.jump[i].dot(h)[0])
