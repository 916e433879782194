"""Canned numerical checks for the builtin examples.

Each check compares a computed quantity with the value the example is known
to produce.  Monte Carlo checks are labelled as consistency checks.
"""

from dataclasses import dataclass

from .analysis import check_valley_conditions, tunneling_analysis, valley_depth
from .fixtures import builtin
from .simulate import exit_law_experiment

__all__ = ["Check", "verify_example", "EXAMPLE_CHECKS"]


@dataclass(frozen=True)
class Check:
    name: str
    value: object
    expected: str
    passed: bool
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "value": self.value, "expected": self.expected,
                "passed": self.passed, "detail": self.detail}


def _within(x, lo, hi):
    return x is not None and lo <= x <= hi


def _depths_ex5(fx, **_):
    N = fx.family.n_grid[-1]
    chain, mu = fx.family.chain(N), fx.family.stationary(N)
    targets = [2 * N, 2 * N, 2 * N ** 2, 2 * N ** 3, 4 * N ** 3]
    out = []
    for spec, t in zip(fx.valleys, targets):
        ratio = valley_depth(chain, mu, spec, route="capacity") / t
        out.append(Check(f"depth W={sorted(spec.W)} B={sorted(spec.B)} / {t:g}", ratio,
                         "1 within 1%", abs(ratio - 1) <= 0.01, f"N={N}"))
    return out


def _tunnel_ex5(fx, **_):
    rep = tunneling_analysis(fx.family, fx.partition, fx.theta)
    out = [Check(f"r({x},{y})", rep.limit(x, y), "[0.495, 0.505]",
                 _within(rep.limit(x, y), 0.495, 0.505)) for x, y in ((1, 2), (2, 1))]
    for x in rep.labels:
        f = rep.conditions["H2"][x]
        out.append(Check(f"H2 exponent well {x}", f.exponent, "<= -0.9",
                         f.exponent is not None and f.exponent <= -0.9))
    out.append(Check("M3 well-started", [rep.verdict("M3", x) for x in rep.labels],
                     "all vanish", all(rep.verdict("M3", x) == "vanishes" for x in rep.labels)))
    out.append(Check("M3 global", rep.verdict("M3_global"), "does not vanish",
                     rep.verdict("M3_global") != "vanishes",
                     "annulus contains a deeper well"))
    return out


def _ex5(fx, **kw):
    return _depths_ex5(fx) + _tunnel_ex5(fx)


def _ex2(fx, **_):
    N = fx.family.n_grid[-1]
    chain, mu = fx.family.chain(N), fx.family.stationary(N)
    d1 = valley_depth(chain, mu, fx.valleys[0])
    d0 = valley_depth(chain, mu, fx.valleys[1])
    return [Check("depth ({-1},{-1,0})", d1, "2 within 0.5%", abs(d1 / 2 - 1) <= 0.005, f"N={N}"),
            Check("depth ({-1},{-1})", d0, "1 exactly", d0 == 1.0)]


def _ex7(fx, **_):
    rep = tunneling_analysis(fx.family, fx.partition, fx.theta)
    out = []
    for x in rep.labels:
        for y in rep.labels:
            if x == y:
                continue
            v = rep.limit(x, y)
            if (x, y) in ((1, 2), (2, 3), (3, 2)):
                out.append(Check(f"r({x},{y})", v, "[0.495, 0.505]", _within(v, 0.495, 0.505)))
            else:
                out.append(Check(f"r({x},{y})", v, "< 1e-4", v is not None and v < 1e-4))
    out.append(Check("inaccessible wells", list(rep.inaccessible), "[1]",
                     list(rep.inaccessible) == [1]))
    return out


def _ex4(fx, **_):
    rep = tunneling_analysis(fx.family, fx.partition, fx.theta)
    r12, r21 = rep.limit(1, 2), rep.limit(2, 1)
    return [Check("r(1,2)", r12, "1 within 1%", _within(r12, 0.99, 1.01)),
            Check("r(2,1)", r21, "0", r21 == 0.0),
            Check("absorbing wells", list(rep.absorbing), "[2]", list(rep.absorbing) == [2])]


def _torus(fx, **_):
    rep = tunneling_analysis(fx.family, fx.partition_at, fx.theta)
    return [Check(f"r({x},{y})", rep.limit(x, y), "1 within 1e-8",
                  _within(rep.limit(x, y), 1 - 1e-8, 1 + 1e-8)) for x, y in ((1, 2), (2, 1))]


def _ex1(fx, reps=10_000, seed=0, **_):
    spec = fx.valleys[0]
    table = check_valley_conditions(fx.family, spec, "general")
    v = table.fits["annulus_occupation"].verdict
    out = [Check("annulus occupation condition", v, "does not vanish", v != "vanishes")]
    chain = fx.family.chain(100)
    st = exit_law_experiment(chain, spec, 2.0, reps=reps, seed=seed)
    out.append(Check("mean annulus occupation / theta", st.mean_delta_occupation, "[0.23, 0.27]",
                     _within(st.mean_delta_occupation, 0.23, 0.27),
                     f"N=100, reps={reps}, seed={seed}; consistency check"))
    return out


def _ex6(fx, reps=10_000, seed=0, **_):
    chain = fx.family.chain(100)
    st = exit_law_experiment(chain, fx.valleys[0], 2.0, reps=reps, seed=seed)
    return [Check("mean exit time / 2", st.mean_exit_time, "[0.97, 1.03]",
                  _within(st.mean_exit_time, 0.97, 1.03), f"reps={reps}, seed={seed}"),
            Check("KS p-value vs Exp(1)", st.ks.p_value, ">= 0.01", st.ks.p_value >= 0.01,
                  f"D={st.ks.statistic:.4g}; consistency check")]


def _ex8(fx, reps=10_000, seed=0, **_):
    chain = fx.family.chain(100)
    st = exit_law_experiment(chain, fx.valleys[0], 1.0, reps=reps, seed=seed, start=2)
    return [Check("attractor-first frequency from 2", st.attractor_first_frequency, "<= 0.02",
                  st.attractor_first_frequency <= 0.02, f"N=100, reps={reps}, seed={seed}")]


EXAMPLE_CHECKS = {"ex1": _ex1, "ex2": _ex2, "ex4": _ex4, "ex5": _ex5, "ex6": _ex6,
                  "ex7": _ex7, "ex8": _ex8, "torus2": _torus, "ex3": _torus}


def verify_example(name, reps=10_000, seed=0, fixture=None):
    """Run the canned checks for builtin ``name``; returns a list of :class:`Check`."""
    fx = fixture if fixture is not None else builtin(name)
    return EXAMPLE_CHECKS[name](fx, reps=reps, seed=seed)
