"""Builtin chain families used as worked examples.

Each builtin comes with the valleys and well partitions it is usually
analysed with and the natural time scale of its tunneling behaviour.
"""

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .analysis import DEFAULT_GRID, ChainFamily, MetaPartition, ValleySpec
from .chain import ChainSpec
from .errors import InvalidSpec
from .expr import compile_expression

__all__ = ["Fixture", "BUILTINS", "builtin", "torus2"]

TORUS_STATE_CAP = 100_000


@dataclass
class Fixture:
    name: str
    family: ChainFamily
    valleys: list = field(default_factory=list)
    partition: Optional[MetaPartition] = None
    theta: Optional[Callable[[int], float]] = None
    theta_text: Optional[str] = None
    params: dict = field(default_factory=dict)
    partition_fn: Optional[Callable[[int], MetaPartition]] = None

    @property
    def simulation_only(self):
        return self.family.simulation_only

    def partition_at(self, N):
        """Well partition at grid point ``N`` (some builtins depend on ``N``)."""
        if self.partition_fn is not None:
            return self.partition_fn(N)
        return self.partition


def _spec(states, rates):
    return ChainSpec(tuple(states), rates)


def _ex1(N):
    return _spec((-1, 0, 1), {(-1, 0): N, (1, 0): N, (0, -1): 1.0, (0, 1): 1.0})


def _ex2(N):
    return _spec((-1, 0, 1), {(-1, 0): 1.0, (1, 0): 1.0, (0, -1): N, (0, 1): N})


def _ex4(N):
    return _spec((0, 1, 2), {(1, 0): N - 1.0, (1, 2): 1.0, (2, 1): 1.0 / N, (0, 1): float(N) ** 2})


def _ex6(N):
    return _spec((1, 2, 3), {(1, 2): N, (2, 1): N - 1.0, (2, 3): 1.0})


def _ex8(N):
    # the holding "rates" at 0 and 3 are self-jumps and do not move the process
    return _spec((0, 1, 2, 3), {(1, 0): 1 - 1.0 / N, (2, 3): 1 - 1.0 / N,
                                (1, 2): 1.0 / N, (2, 1): 1.0 / N})


def _zigzag(r12, r32, r34, r54):
    rates = {}
    for j in (2, 4):
        rates[(j, j - 1)] = 1.0
        rates[(j, j + 1)] = 1.0
    rates.update({(1, 2): r12, (3, 2): r32, (3, 4): r34, (5, 4): r54})
    return _spec(range(1, 6), rates)


def _ex5(N):
    N = float(N)
    return _zigzag(N ** -2, N ** -3, 1 / N, 1 / N)


def _ex7(N):
    N = float(N)
    return _zigzag(1 / N, N ** -2, 1 / N, 1 / N)


def _pow(k):
    return lambda N: float(N) ** k


def torus2(d: int = 1, theta: str = "N^3", n_grid=(8, 16, 32, 64), max_states: int = TORUS_STATE_CAP,
           label: str = "torus2") -> Fixture:
    """Two copies of the discrete torus of side ``N`` joined pointwise.

    Nearest-neighbour moves inside a copy have rate ``1/(2d)``; switching
    copy at the same site has rate ``1/theta_N``.
    """
    if d not in (1, 2, 3):
        raise InvalidSpec("torus dimension must be 1, 2 or 3")
    th = compile_expression(theta)
    for N in n_grid:
        if N < 3:
            raise InvalidSpec("torus side must be at least 3")
        if 2 * N ** d > max_states:
            raise InvalidSpec(
                f"torus2 with d={d}, N={N} has {2 * N ** d} states, above the cap {max_states}")

    def gen(N):
        sites = list(itertools.product(range(N), repeat=d))
        states = [(x, j) for j in (1, -1) for x in sites]
        hop = 1.0 / (2 * d)
        switch = 1.0 / th(N)
        rates = {}
        for x in sites:
            for j in (1, -1):
                rates[((x, j), (x, -j))] = switch
                for axis in range(d):
                    for step in (1, -1):
                        y = list(x)
                        y[axis] = (y[axis] + step) % N
                        rates[((x, j), (tuple(y), j))] = hop
        return ChainSpec(tuple(states), rates)

    fam = ChainFamily(gen, n_grid, label)
    origin = tuple([0] * d)

    def wells(N):
        sites = list(itertools.product(range(N), repeat=d))
        return MetaPartition({1: {(x, 1) for x in sites}, 2: {(x, -1) for x in sites}},
                             {1: (origin, 1), 2: (origin, -1)})

    return Fixture(label, fam, theta=th, theta_text=theta, partition_fn=wells,
                   params={"d": d, "theta": theta, "max_states": max_states})


def _fixture(name, n_grid=DEFAULT_GRID):
    if name == "ex1":
        return Fixture(name, ChainFamily(_ex1, n_grid, name),
                       valleys=[ValleySpec({-1}, {-1, 0}, -1)],
                       theta=lambda N: 2.0, theta_text="2")
    if name == "ex2":
        return Fixture(name, ChainFamily(_ex2, n_grid, name),
                       valleys=[ValleySpec({-1}, {-1, 0}, -1), ValleySpec({-1}, {-1}, -1)],
                       theta=lambda N: 2.0, theta_text="2")
    if name == "ex4":
        return Fixture(name, ChainFamily(_ex4, n_grid, name),
                       valleys=[ValleySpec({1, 2}, {1, 2}, 1)],
                       partition=MetaPartition({1: {0}, 2: {1, 2}}, {1: 0, 2: 1}),
                       theta=_pow(-2), theta_text="N^-2")
    if name == "ex5":
        return Fixture(name, ChainFamily(_ex5, n_grid, name),
                       valleys=[ValleySpec({3}, {3, 4}, 3), ValleySpec({5}, {4, 5}, 5),
                                ValleySpec({1}, {1, 2}, 1), ValleySpec({3, 4, 5}, {3, 4, 5}, 3),
                                ValleySpec({3, 4, 5}, {2, 3, 4, 5}, 3)],
                       partition=MetaPartition({1: {3}, 2: {5}}, {1: 3, 2: 5}),
                       theta=_pow(1), theta_text="N")
    if name == "ex6":
        # state 3 has no outgoing rate: the exit problem is a simulation experiment
        return Fixture(name, ChainFamily(_ex6, n_grid, name, simulation_only=True),
                       valleys=[ValleySpec({1}, {1, 2}, 1)],
                       theta=lambda N: 2.0, theta_text="2")
    if name == "ex7":
        return Fixture(name, ChainFamily(_ex7, n_grid, name),
                       valleys=[ValleySpec({1}, {1, 2}, 1), ValleySpec({3}, {3, 4}, 3),
                                ValleySpec({5}, {4, 5}, 5)],
                       partition=MetaPartition({1: {1}, 2: {3}, 3: {5}}, {1: 1, 2: 3, 3: 5}),
                       theta=_pow(1), theta_text="N")
    if name == "ex8":
        return Fixture(name, ChainFamily(_ex8, n_grid, name, simulation_only=True),
                       valleys=[ValleySpec({1, 2}, {1, 2}, 1)],
                       theta=lambda N: 1.0, theta_text="1")
    raise InvalidSpec(f"unknown builtin family {name!r}")


BUILTINS = ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7", "ex8", "torus2")


def builtin(name: str, n_grid=None, **params) -> Fixture:
    """Builtin fixture by name; ``torus2`` (alias ``ex3``) accepts ``d``, ``theta``, ``max_states``."""
    if name in ("torus2", "ex3"):
        if n_grid is not None:
            params["n_grid"] = n_grid
        return torus2(**params)
    if params:
        raise InvalidSpec(f"builtin {name!r} takes no parameters")
    return _fixture(name, DEFAULT_GRID if n_grid is None else tuple(n_grid))
