"""Exception hierarchy.

Every error raised by the library derives from :class:`MetastabError` and
carries an ``exit_code`` used by the command line front end: input
problems map to 2, numerical failures to 3.
"""


class MetastabError(Exception):
    exit_code = 3

    def to_record(self):
        return {"error": type(self).__name__, "message": str(self)}


class InputError(MetastabError):
    exit_code = 2


class InvalidSpec(InputError):
    pass


class ZeroHoldingRate(InputError):
    def __init__(self, state):
        super().__init__(f"state {state!r} has no outgoing rate")
        self.state = state


class NotIrreducible(InputError):
    def __init__(self, components):
        sizes = [len(c) for c in components]
        super().__init__(
            f"rate graph is not irreducible: {len(components)} strongly "
            f"connected components of sizes {sizes}")
        self.components = components


class SimulationOnly(InputError):
    pass


class UnknownState(InputError):
    def __init__(self, state):
        super().__init__(f"unknown state {state!r}")
        self.state = state


class OverlappingSets(InputError):
    pass


class EmptySupport(InputError):
    pass


class SingletonWell(InputError):
    pass


class ModeMismatch(InputError):
    pass


class NonPositiveValue(InputError):
    pass


class TooFewSamples(InputError):
    pass


class NeverVisitsA(InputError):
    pass


class StartsInAnnulus(InputError):
    pass


class ParseError(InputError):
    def __init__(self, line, message):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line


class NegativeRate(InputError):
    def __init__(self, n, edge, value):
        super().__init__(f"rate {edge[0]!r}->{edge[1]!r} evaluates to {value!r} at N={n}")
        self.n = n
        self.edge = edge


class NotReversible(MetastabError):
    pass


class SolverFailure(MetastabError):
    pass


class AbsorbedBeforeTarget(MetastabError):
    def __init__(self, state):
        super().__init__(f"path absorbed at {state!r} before reaching the target")
        self.state = state
