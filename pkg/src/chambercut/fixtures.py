"""Shipped example systems.

Each fixture carries the source system G(p; z) (square in z), the witness
system F = (G, det J_z G) whose projection is the discriminant, and the
routing-function defaults (center, exponent) for each example.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import Polynomial, PolynomialSystem, build_discriminant_system, parse_polynomial


@dataclass
class Fixture:
    name: str
    source: PolynomialSystem | None      # G(p; z); None for explicit-only fixtures
    system: PolynomialSystem | None      # F whose projection is H
    center: tuple | None = None
    exponent: int | None = None
    extra_factors: list = field(default_factory=list)
    explicit_h: Polynomial | None = None
    degH: int | None = None

    @property
    def param_names(self):
        src = self.system or self.source
        return src.param_names if src is not None else self.explicit_h.var_names


def _substituted(texts, names, values, k):
    polys = [parse_polynomial(t, names).substitute(values) for t in texts]
    return PolynomialSystem(polys, k)


def quadratic() -> Fixture:
    # f' = 2z + a (the derivative of z^2 + a z + b)
    names = ["a", "b", "z"]
    G = PolynomialSystem.parse(["z^2 + a*z + b"], names, 2)
    F = PolynomialSystem.parse(["z^2 + a*z + b", "2*z + a"], names, 2)
    h = parse_polynomial("a^2 - 4*b", ["a", "b"])
    return Fixture("quadratic", G, F, (13.0, 2.0), 2, [], h, 2)


def quadratic_with_factor() -> Fixture:
    fx = quadratic()
    fx.name = "quadratic-factor"
    fx.extra_factors = [parse_polynomial("a", ["a", "b"])]
    return fx


KURAMOTO_TEXT = [
    "(s1*c2 - c1*s2) + (s1*c3 - c1*s3) - 3*w1",
    "(s2*c1 - c2*s1) + (s2*c3 - c2*s3) - 3*w2",
    "s1^2 + c1^2 - 1",
    "s2^2 + c2^2 - 1",
]
KURAMOTO_NAMES = ["w1", "w2", "c1", "c2", "s1", "s2", "c3", "s3"]


# Discriminant of the Kuramoto system in (w1, w2), up to a constant factor.
# Recovered by fitting prod(-t_j) on a fixed-direction pencil of lines and
# rounding to integers; it reproduces the witness-set values to ~1e-14.
KURAMOTO_H = (
    "-1*w1^0*w2^0 + 96*w1^0*w2^2 - 2298*w1^0*w2^4 + 22680*w1^0*w2^6 - 96957*w1^0*w2^8 "
    "+ 139968*w1^0*w2^10 + 96*w1^1*w2^1 - 4596*w1^1*w2^3 + 68040*w1^1*w2^5 - "
    "387828*w1^1*w2^7 + 699840*w1^1*w2^9 + 96*w1^2*w2^0 - 6894*w1^2*w2^2 - "
    "20844*w1^2*w2^4 - 226962*w1^2*w2^6 + 1277208*w1^2*w2^8 - 4596*w1^3*w2^1 - "
    "155088*w1^3*w2^3 + 676512*w1^3*w2^5 + 909792*w1^3*w2^7 - 2298*w1^4*w2^0 - "
    "20844*w1^4*w2^2 + 1128249*w1^4*w2^4 - 279936*w1^4*w2^6 + 314928*w1^4*w2^8 + "
    "68040*w1^5*w2^1 + 676512*w1^5*w2^3 - 1084752*w1^5*w2^5 + 1259712*w1^5*w2^7 + "
    "22680*w1^6*w2^0 - 226962*w1^6*w2^2 - 279936*w1^6*w2^4 + 1889568*w1^6*w2^6 - "
    "387828*w1^7*w2^1 + 909792*w1^7*w2^3 + 1259712*w1^7*w2^5 - 96957*w1^8*w2^0 + "
    "1277208*w1^8*w2^2 + 314928*w1^8*w2^4 + 699840*w1^9*w2^1 + 139968*w1^10*w2^0 "
)


def kuramoto() -> Fixture:
    """Three oscillators on a triangle with theta_3 = 0 (c3 = 1, s3 = 0)."""
    G = _substituted(KURAMOTO_TEXT, KURAMOTO_NAMES, {"c3": 1, "s3": 0}, 2)
    h = parse_polynomial(KURAMOTO_H, ["w1", "w2"])
    return Fixture("kuramoto", G, build_discriminant_system(G), (0.47, 0.43), 7, [], h, 12)


RPR_TEXT = [
    "phi1^2 + phi2^2 - 1",
    "p1^2 + p2^2 - 2*(a3*p1 + b3*p2)*phi1 + 2*(b3*p1 - a3*p2)*phi2 + a3^2 + b3^2 - c1",
    "p1^2 + p2^2 - 2*A2*p1 + 2*((a2 - a3)*p1 - b3*p2 + A2*a3 - A2*a2)*phi1"
    " + 2*(b3*p1 + (a2 - a3)*p2 - A2*b3)*phi2 + (a2 - a3)^2 + b3^2 + A2^2 - c2",
    "p1^2 + p2^2 - 2*(A3*p1 + B3*p2) + A3^2 + B3^2 - c3",
]
RPR_CONSTANTS = {"a2": 1.4, "a3": 0.7, "b3": 1.0, "A2": 1.6, "A3": 0.9, "B3": 0.6, "c3": 1.0}
RPR_FIBRE = ["p1", "p2", "phi1", "phi2"]


def rpr(params=("c1", "c2")) -> Fixture:
    """The 3RPR mechanism with the given free parameters; others fixed."""
    all_params = ["c1", "c2", "c3", "a2", "a3", "b3", "A2", "A3", "B3"]
    free = list(params)
    names = free + [q for q in all_params if q not in free] + RPR_FIBRE
    fixed = {q: v for q, v in RPR_CONSTANTS.items() if q not in free}
    G = _substituted(RPR_TEXT, names, fixed, len(free))
    center = {("c1", "c2"): (4.72, 4.33), ("c1", "c2", "c3"): (4.72, 4.33, 1.70),
              ("c1", "c2", "A2"): (4.72, 4.33, 1.70)}.get(tuple(free))
    deg = {("c1", "c2"): 12, ("c1", "c2", "c3"): 12, ("c1", "c2", "A2"): 24}.get(tuple(free))
    name = "3rpr" if tuple(free) == ("c1", "c2") else "3rpr-" + "-".join(free)
    return Fixture(name, G, build_discriminant_system(G), center, None, [], None, deg)


ALLEE_TEXT = [
    "z1*(1 - z1)*(z1 - b) + a*(z2 - z1) + a*(z3 - z1)",
    "z2*(1 - z2)*(z2 - b) + a*(z1 - z2) + a*(z3 - z2)",
    "z3*(1 - z3)*(z3 - b) + a*(z1 - z3) + a*(z2 - z3)",
]


def allee() -> Fixture:
    names = ["a", "b", "z1", "z2", "z3"]
    G = PolynomialSystem.parse(ALLEE_TEXT, names, 2)
    extra = [parse_polynomial(t, ["a", "b"]) for t in ("a", "b", "b - 1/2")]
    return Fixture("allee", G, build_discriminant_system(G), None, None, extra, None, None)


def circle_squared() -> Fixture:
    """A non-reduced presentation of the unit circle: V((x1^2 + x2^2 - 1)^2)."""
    names = ["x1", "x2"]
    F = PolynomialSystem.parse(["(x1^2 + x2^2 - 1)^2"], names, 2)
    h = parse_polynomial("x1^2 + x2^2 - 1", ["x1", "x2"])
    return Fixture("circle-squared", None, F, None, None, [], h, 2)


def trivial_lift(h: Polynomial) -> PolynomialSystem:
    """F = (h(p), z): V(F) = V(h) x {0} projects onto V(h)."""
    names = list(h.var_names) + ["z"]
    hz = h.with_variables(names)
    return PolynomialSystem([hz, Polynomial.variable("z", names)], len(h.var_names))


FIXTURES = {
    "quadratic": quadratic,
    "quadratic-factor": quadratic_with_factor,
    "kuramoto": kuramoto,
    "3rpr": rpr,
    "3rpr-c1-c2-c3": lambda: rpr(("c1", "c2", "c3")),
    "3rpr-c1-c2-A2": lambda: rpr(("c1", "c2", "A2")),
    "allee": allee,
    "circle-squared": circle_squared,
}


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None
