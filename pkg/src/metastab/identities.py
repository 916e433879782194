"""Battery of potential-theoretic identities on a single reversible chain.

Every entry is an :class:`~metastab.potential.IdentityCheck` holding both
sides of an identity computed along independent routes.
"""

import numpy as np

from .chain import Chain, StationaryMeasure, additive_until_hitting
from .potential import (IdentityCheck, capacity, h_capacity_scaling, hitting_integral_formula,
                        three_set_rate_identity, two_set_rate_identity)

__all__ = ["random_disjoint_sets", "identity_battery", "occupation_formula"]


def random_disjoint_sets(states, k, rng):
    """Split a random subset of ``states`` into ``k`` nonempty disjoint sets."""
    states = list(states)
    if len(states) < k:
        raise ValueError("not enough states")
    size = int(rng.integers(k, len(states) + 1))
    pick = [states[i] for i in rng.permutation(len(states))[:size]]
    cuts = sorted(rng.choice(np.arange(1, size), size=k - 1, replace=False).tolist()) if k > 1 else []
    bounds = [0] + cuts + [size]
    return [set(pick[bounds[j]:bounds[j + 1]]) for j in range(k)]


def occupation_formula(chain: Chain, mu: StationaryMeasure, eta, xi, W) -> IdentityCheck:
    """``E_eta[T_xi(W)]`` by a linear solve against ``<1_W, f> / Cap(eta, xi)``."""
    rep = capacity(chain, mu, {eta}, {xi})
    ind = chain.indicator(W)
    rhs = float(np.dot(ind * mu.mu, rep.potential)) / rep.cap
    lhs = float(additive_until_hitting(chain, ind, {xi})[chain.index[eta]])
    return IdentityCheck("point occupation", lhs, rhs)


def identity_battery(chain: Chain, mu: StationaryMeasure, seed: int = 0):
    """Run every identity once on randomly chosen sets (needs 3 or more states).

    Returns a list of :class:`IdentityCheck`.
    """
    rng = np.random.default_rng(seed)
    S = chain.states
    out = []
    A, B = random_disjoint_sets(S, 2, rng)
    rep = capacity(chain, mu, A, B)
    out.append(IdentityCheck("capacity routes", rep.cap, rep.escape_value))
    out.append(two_set_rate_identity(chain, mu, A, B))
    F = random_disjoint_sets(S, 3, rng)
    out.append(three_set_rate_identity(chain, mu, set().union(*F), F[0], F[1]))
    h = rng.uniform(0.5, 2.0, chain.n)
    off = [i for i in range(chain.n) if S[i] not in A and S[i] not in B]
    if off:
        h[off[int(rng.integers(len(off)))]] = 0.0
    out.append(h_capacity_scaling(chain, mu, h, A, B))
    g = rng.uniform(0.0, 1.0, chain.n)
    out.append(hitting_integral_formula(chain, mu, A, B, g))
    i, j = rng.choice(chain.n, size=2, replace=False)
    W = {S[k] for k in range(chain.n) if rng.random() < 0.5} | {S[i]}
    out.append(occupation_formula(chain, mu, S[i], S[j], W))
    return out
