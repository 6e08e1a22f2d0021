"""Sparse multivariate polynomials with complex coefficients.

A polynomial is a map from exponent vectors to nonzero complex coefficients
over an ordered tuple of variable names.  Terms are kept in graded
lexicographic order so printing and hashing are deterministic.

Hot numerical paths do not evaluate :class:`Polynomial` objects term by term;
they go through :class:`CompiledSystem`, which evaluates values, Jacobians and
Hessians of a whole system on a batch of points with a shared monomial table.
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Number
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, NonSquareSystem, ParseError

Exponent = tuple[int, ...]

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def _grlex_key(exp: Exponent) -> tuple:
    return (-sum(exp), tuple(-e for e in exp))


class Polynomial:
    """Immutable sparse polynomial.

    >>> f = parse_polynomial("z^2 + a*z + b", ["a", "b", "z"])
    >>> f.degree, len(f.terms)
    (2, 3)
    """

    __slots__ = ("_terms", "var_names", "_hash")

    def __init__(self, terms: Mapping[Iterable[int], Number], var_names: Sequence[str]):
        names = tuple(var_names)
        n = len(names)
        acc: dict[Exponent, complex] = {}
        for exp, coef in terms.items():
            e = tuple(int(v) for v in exp)
            if len(e) != n:
                raise DimensionError(f"exponent {e} does not match {n} variables")
            if any(v < 0 for v in e):
                raise ValueError(f"negative exponent in {e}")
            acc[e] = acc.get(e, 0j) + complex(coef)
        ordered = sorted((e for e, c in acc.items() if c != 0), key=_grlex_key)
        self._terms = {e: acc[e] for e in ordered}
        self.var_names = names
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, var_names: Sequence[str]) -> "Polynomial":
        return cls({}, var_names)

    @classmethod
    def constant(cls, value: Number, var_names: Sequence[str]) -> "Polynomial":
        return cls({(0,) * len(var_names): value}, var_names)

    @classmethod
    def variable(cls, name: str | int, var_names: Sequence[str]) -> "Polynomial":
        names = tuple(var_names)
        idx = names.index(name) if isinstance(name, str) else int(name)
        exp = [0] * len(names)
        exp[idx] = 1
        return cls({tuple(exp): 1}, names)

    # -- basic properties ---------------------------------------------------
    @property
    def terms(self) -> Mapping[Exponent, complex]:
        return MappingProxyType(self._terms)

    @property
    def nvars(self) -> int:
        return len(self.var_names)

    @property
    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def degree_in(self, indices: Iterable[int]) -> int:
        idx = list(indices)
        if not self._terms:
            return -1
        return max(sum(e[i] for i in idx) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self._terms.values())

    def coefficient_scale(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.var_names != self.var_names:
                raise DimensionError(
                    f"variable mismatch: {self.var_names} vs {other.var_names}")
            return other
        if isinstance(other, (Number, np.number)):
            return Polynomial.constant(complex(other), self.var_names)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for e, c in other._terms.items():
            acc[e] = acc.get(e, 0j) + c
        return Polynomial(acc, self.var_names)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({e: -c for e, c in self._terms.items()}, self.var_names)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[Exponent, complex] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0j) + c1 * c2
        return Polynomial(acc, self.var_names)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Polynomial.constant(1, self.var_names)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.var_names == other.var_names and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.var_names, tuple(self._terms.items())))
        return self._hash

    # -- calculus and evaluation -------------------------------------------
    def differentiate(self, var: int | str) -> "Polynomial":
        i = self.var_names.index(var) if isinstance(var, str) else int(var)
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable index {i} out of range")
        acc = {}
        for e, c in self._terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                acc[tuple(ne)] = c * e[i]
        return Polynomial(acc, self.var_names)

    def __call__(self, x) -> complex:
        return self.evaluate(x)

    def evaluate(self, x) -> complex:
        x = list(x)
        if len(x) != self.nvars:
            raise DimensionError(f"point has {len(x)} coordinates, expected {self.nvars}")
        total = 0j
        for e, c in self._terms.items():
            term = c
            for xi, ei in zip(x, e):
                if ei:
                    term *= xi ** ei
            total += term
        return total

    # -- variable manipulation ---------------------------------------------
    def substitute(self, values: Mapping[str, Number]) -> "Polynomial":
        """Fix some variables to numbers; they are removed from the variable list."""
        for name in values:
            if name not in self.var_names:
                raise KeyError(name)
        keep = [i for i, v in enumerate(self.var_names) if v not in values]
        fixed = [(i, complex(values[v])) for i, v in enumerate(self.var_names) if v in values]
        acc: dict[Exponent, complex] = {}
        for e, c in self._terms.items():
            coef = c
            for i, val in fixed:
                if e[i]:
                    coef *= val ** e[i]
            ne = tuple(e[i] for i in keep)
            acc[ne] = acc.get(ne, 0j) + coef
        return Polynomial(acc, [self.var_names[i] for i in keep])

    def with_variables(self, var_names: Sequence[str]) -> "Polynomial":
        """Re-express over a new variable list that contains all current variables."""
        names = tuple(var_names)
        pos = [names.index(v) for v in self.var_names]
        acc = {}
        for e, c in self._terms.items():
            ne = [0] * len(names)
            for i, p in enumerate(pos):
                ne[p] = e[i]
            acc[tuple(ne)] = c
        return Polynomial(acc, names)

    def compose(self, subs: Sequence["Polynomial"]) -> "Polynomial":
        """Replace variable i by ``subs[i]`` (all subs share one variable list)."""
        if len(subs) != self.nvars:
            raise DimensionError("need one substitute per variable")
        names = subs[0].var_names if subs else ()
        result = Polynomial.zero(names)
        cache: dict[tuple[int, int], Polynomial] = {}

        def power(i, k):
            if (i, k) not in cache:
                cache[(i, k)] = subs[i] ** k
            return cache[(i, k)]

        for e, c in self._terms.items():
            term = Polynomial.constant(c, names)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    # -- printing -----------------------------------------------------------
    def to_text(self) -> str:
        """Canonical text that :func:`parse_polynomial` reads back exactly."""
        if not self.is_real():
            raise ValueError("only real-coefficient polynomials have a text form")
        if not self._terms:
            return "0"
        out = []
        for e, c in self._terms.items():
            val = c.real
            sign = "-" if val < 0 else "+"
            mag = abs(val)
            mono = "*".join(
                name if k == 1 else f"{name}^{k}"
                for name, k in zip(self.var_names, e) if k)
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{_format_number(mag)}*{mono}"
            else:
                body = _format_number(mag)
            out.append((sign, body))
        first_sign, first = out[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in out[1:]:
            text += f" {sign} {body}"
        return text

    def __str__(self):
        if self.is_real():
            return self.to_text()
        parts = []
        for e, c in self._terms.items():
            mono = "*".join(n if k == 1 else f"{n}^{k}"
                            for n, k in zip(self.var_names, e) if k)
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"Polynomial({str(self)!r}, vars={list(self.var_names)})"


def _format_number(x: float) -> str:
    if x == int(x) and abs(x) < 2**53:
        return str(int(x))
    text = repr(float(x))
    if "e" in text or "n" in text:
        num, den = float(x).as_integer_ratio()
        return f"{num}/{den}"
    return text


class PolynomialSystem:
    """A list of polynomials over one variable list, split as (parameters, fibre).

    The first ``k`` variables are parameters p, the remaining ones fibre
    variables z.
    """

    def __init__(self, polys: Sequence[Polynomial], k: int | None = None):
        polys = tuple(polys)
        if not polys:
            raise ValueError("empty system")
        names = polys[0].var_names
        for f in polys:
            if f.var_names != names:
                raise DimensionError("all polynomials must share one variable list")
        self.polys = polys
        self.var_names = names
        self.k = len(names) if k is None else int(k)
        if not 0 <= self.k <= len(names):
            raise ValueError("parameter count out of range")
        self._compiled = None

    @classmethod
    def parse(cls, texts: Sequence[str], var_names: Sequence[str], k: int | None = None):
        return cls([parse_polynomial(t, var_names) for t in texts], k)

    @property
    def nvars(self) -> int:
        return len(self.var_names)

    @property
    def split(self) -> tuple[int, int]:
        return self.k, self.nvars - self.k

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.var_names[:self.k]

    @property
    def fibre_names(self) -> tuple[str, ...]:
        return self.var_names[self.k:]

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def __eq__(self, other):
        return (isinstance(other, PolynomialSystem) and self.polys == other.polys
                and self.k == other.k)

    def __hash__(self):
        return hash((self.polys, self.k))

    def degrees(self) -> list[int]:
        return [f.degree for f in self.polys]

    def is_real(self) -> bool:
        return all(f.is_real() for f in self.polys)

    def coefficient_scale(self) -> float:
        return max(f.coefficient_scale() for f in self.polys)

    def compiled(self) -> "CompiledSystem":
        if self._compiled is None:
            self._compiled = CompiledSystem(self.polys)
        return self._compiled

    def evaluate(self, x) -> np.ndarray:
        return self.compiled().values(np.asarray(x, dtype=complex))

    def to_text(self) -> list[str]:
        return [f.to_text() for f in self.polys]

    def fingerprint(self) -> str:
        """Stable content hash used as a cache key."""
        import hashlib
        h = hashlib.sha256()
        h.update(repr(self.var_names).encode())
        h.update(str(self.k).encode())
        for f in self.polys:
            for e, c in f.terms.items():
                h.update(repr((e, c.real, c.imag)).encode())
            h.update(b";")
        return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Compiled batch evaluation
# ---------------------------------------------------------------------------

class CompiledSystem:
    """Batch evaluator for a polynomial system and its first and second partials.

    All polynomials, their first partials and second partials are expressed
    over one shared monomial table, so one pass over the points yields
    values, Jacobians and Hessians by matrix products.
    """

    def __init__(self, polys: Sequence[Polynomial]):
        polys = list(polys)
        n = polys[0].nvars
        self.nequations = len(polys)
        self.nvars = n
        index: dict[Exponent, int] = {}

        def rows_for(plist):
            rows = []
            for f in plist:
                row = {}
                for e, c in f.terms.items():
                    if e not in index:
                        index[e] = len(index)
                    row[index[e]] = c
                rows.append(row)
            return rows

        d1 = [[f.differentiate(j) for j in range(n)] for f in polys]
        d2 = [[[d1[i][j].differentiate(l) for l in range(n)] for j in range(n)]
              for i in range(len(polys))]
        vrows = rows_for(polys)
        jrows = rows_for([g for row in d1 for g in row])
        hrows = rows_for([g for a in d2 for row in a for g in row])
        T = max(len(index), 1)
        E = np.zeros((T, n), dtype=np.int64)
        for e, i in index.items():
            E[i] = e
        self.exponents = E
        self.max_degree = int(E.max()) if E.size else 0

        def dense(rows):
            M = np.zeros((len(rows), T), dtype=complex)
            for r, row in enumerate(rows):
                for i, c in row.items():
                    M[r, i] = c
            return M

        self._cv = dense(vrows).T.copy()
        self._cj = dense(jrows).T.copy()
        self._ch = dense(hrows).T.copy()
        self._real = all(f.is_real() for f in polys)
        if self._real:
            self._cv, self._cj, self._ch = (m.real.copy() for m in (self._cv, self._cj, self._ch))

    def monomials(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        D = self.max_degree
        shape = X.shape[:-1]
        pw = np.empty(shape + (self.nvars, D + 1), dtype=np.result_type(X.dtype, float))
        pw[..., 0] = 1.0
        for d in range(1, D + 1):
            pw[..., d] = pw[..., d - 1] * X
        E = self.exponents
        mono = pw[..., 0, E[:, 0]]
        for j in range(1, self.nvars):
            mono = mono * pw[..., j, E[:, j]]
        return mono

    def _check(self, X):
        X = np.asarray(X)
        if X.shape[-1] != self.nvars:
            raise DimensionError(f"point has {X.shape[-1]} coordinates, expected {self.nvars}")
        return X

    def values(self, X) -> np.ndarray:
        X = self._check(X)
        return self.monomials(X) @ self._cv

    def jacobian(self, X) -> np.ndarray:
        X = self._check(X)
        m = self.monomials(X) @ self._cj
        return m.reshape(X.shape[:-1] + (self.nequations, self.nvars))

    def hessians(self, X) -> np.ndarray:
        X = self._check(X)
        m = self.monomials(X) @ self._ch
        n = self.nvars
        return m.reshape(X.shape[:-1] + (self.nequations, n, n))

    def evaluate(self, X, order: int = 1):
        """Return ``(F,)``, ``(F, J)`` or ``(F, J, H)`` depending on ``order``."""
        X = self._check(X)
        mono = self.monomials(X)
        lead = X.shape[:-1]
        out = [mono @ self._cv]
        if order >= 1:
            out.append((mono @ self._cj).reshape(lead + (self.nequations, self.nvars)))
        if order >= 2:
            n = self.nvars
            out.append((mono @ self._ch).reshape(lead + (self.nequations, n, n)))
        return tuple(out)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<id>[A-Za-z][A-Za-z0-9_]*)|(?P<op>\S))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.lastgroup is None:
            pos = m.end()
            continue
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, var_names: Sequence[str]):
        self.text = text
        self.names = tuple(var_names)
        for name in self.names:
            if not _IDENT.match(name):
                raise ParseError(f"invalid variable name {name!r}")
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, tok[2], self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        poly = self.expression()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return poly

    def expression(self) -> Polynomial:
        sign = 1
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1 if val == "-" else 1
        result = self.term() * sign
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                result = result + rhs if val == "+" else result - rhs
            else:
                return result

    def term(self) -> Polynomial:
        result = self.factor()
        while self.peek()[:2] == ("op", "*"):
            self.take()
            result = result * self.factor()
        return result

    def factor(self) -> Polynomial:
        base = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            tok = self.peek()
            if tok[:2] == ("op", "-"):
                raise self.error("negative exponent")
            if tok[0] != "num":
                raise self.error("exponent must be a nonnegative integer")
            self.take()
            if not tok[1].isdigit():
                raise self.error("non-integer exponent", tok)
            return base ** int(tok[1])
        return base

    def base(self) -> Polynomial:
        kind, val, pos = self.take()
        if kind == "num":
            value = Fraction(val)
            if self.peek()[:2] == ("op", "/"):
                self.take()
                den = self.take()
                if den[0] != "num":
                    raise self.error("expected denominator", den)
                d = Fraction(den[1])
                if d == 0:
                    raise ParseError("zero denominator", den[2], self.text)
                value = value / d
            return Polynomial.constant(float(value), self.names)
        if kind == "id":
            if val not in self.names:
                raise ParseError(f"unknown identifier {val!r}", pos, self.text)
            return Polynomial.variable(val, self.names)
        if kind == "op" and val == "(":
            inner = self.expression()
            close = self.take()
            if close[:2] != ("op", ")"):
                raise self.error("expected ')'", close)
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected token {val!r}", pos, self.text)


def parse_polynomial(text: str, var_names: Sequence[str]) -> Polynomial:
    """Parse ``text`` over the ordered variables ``var_names``.

    Grammar: sums and differences of products of powers; numbers are decimals
    or ``num/den`` rationals; implicit multiplication is rejected.
    """
    return _Parser(text, var_names).parse()


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def eval_poly(poly: Polynomial, x) -> complex:
    return poly.evaluate(x)


def differentiate(poly: Polynomial, var_index: int | str) -> Polynomial:
    return poly.differentiate(var_index)


def jacobian(system: PolynomialSystem | Sequence[Polynomial], x, var_subset=None) -> np.ndarray:
    """Jacobian rows = equations, columns = ``var_subset`` (default: all variables)."""
    if not isinstance(system, PolynomialSystem):
        system = PolynomialSystem(system)
    x = np.asarray(x, dtype=complex)
    J = system.compiled().jacobian(x)
    if var_subset is None:
        return J
    cols = [system.var_names.index(v) if isinstance(v, str) else int(v) for v in var_subset]
    return J[:, cols]


def second_directional(f, x, u, v):
    """``u^T hess(f)(x) v`` for a polynomial, or per equation for a system."""
    single = isinstance(f, Polynomial)
    system = PolynomialSystem([f]) if single else (
        f if isinstance(f, PolynomialSystem) else PolynomialSystem(f))
    x = np.asarray(x, dtype=complex)
    u = np.asarray(u)
    v = np.asarray(v)
    n = system.nvars
    if x.shape != (n,) or u.shape != (n,) or v.shape != (n,):
        raise DimensionError("point and directions must have one entry per variable")
    H = system.compiled().hessians(x)
    out = np.einsum("eij,i,j->e", H, u, v)
    return out[0] if single else out


def determinant(matrix: Sequence[Sequence[Polynomial]]) -> Polynomial:
    """Cofactor expansion along the first row (fine for the small sizes used here)."""
    size = len(matrix)
    if any(len(row) != size for row in matrix):
        raise NonSquareSystem("determinant of a non-square matrix")
    names = matrix[0][0].var_names

    def rec(rows: tuple[int, ...], cols: tuple[int, ...]) -> Polynomial:
        if len(rows) == 1:
            return matrix[rows[0]][cols[0]]
        total = Polynomial.zero(names)
        r, rest = rows[0], rows[1:]
        for pos, c in enumerate(cols):
            entry = matrix[r][c]
            if entry.is_zero():
                continue
            minor = rec(rest, cols[:pos] + cols[pos + 1:])
            term = entry * minor
            total = total + term if pos % 2 == 0 else total - term
        return total

    return rec(tuple(range(size)), tuple(range(size)))


def build_discriminant_system(G: PolynomialSystem) -> PolynomialSystem:
    """Append ``det J_z G`` to a system square in its fibre variables."""
    k, nz = G.split
    if len(G) != nz:
        raise NonSquareSystem(f"{len(G)} equations in {nz} fibre variables")
    J = [[g.differentiate(k + j) for j in range(nz)] for g in G]
    return PolynomialSystem(list(G.polys) + [determinant(J)], k)

