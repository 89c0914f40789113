"""Exact arithmetic kernel.

Gaussian-rational scalars, sparse multivariate polynomials over Q(i), order
truncated power series, univariate series in a formal parameter ``t`` with
tracked precision, resultants, weighted degrees and generic Jacobian ranks.
No floating point is used anywhere.
"""

from __future__ import annotations

import operator
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence, Union

Rational = Union[int, Fraction]


class GaussianRational:
    """An element re + i*im of Q(i)."""

    __slots__ = ("re", "im")

    def __init__(self, re: Rational | str = 0, im: Rational | str = 0):
        if isinstance(re, float) or isinstance(im, float):
            raise TypeError("floating point values are not accepted")
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def coerce(x) -> "GaussianRational":
        if type(x) is GaussianRational:
            return x
        if isinstance(x, (int, Fraction)):
            return _mk(Fraction(x), _F0)
        if isinstance(x, GaussianRational):
            return x
        raise TypeError(f"cannot coerce {type(x).__name__} to GaussianRational")

    def conj(self) -> "GaussianRational":
        return _mk(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def is_real(self) -> bool:
        return self.im == 0

    def __add__(self, other):
        if type(other) is not GaussianRational:
            if isinstance(other, (int, Fraction)):
                return _mk(self.re + other, self.im)
            return NotImplemented
        return _mk(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        if type(other) is not GaussianRational:
            if isinstance(other, (int, Fraction)):
                return _mk(self.re - other, self.im)
            return NotImplemented
        return _mk(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        if isinstance(other, (int, Fraction)):
            return _mk(other - self.re, -self.im)
        return NotImplemented

    def __neg__(self):
        return _mk(-self.re, -self.im)

    def __mul__(self, other):
        if type(other) is not GaussianRational:
            if isinstance(other, (int, Fraction)):
                return _mk(self.re * other, self.im * other)
            return NotImplemented
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return _mk(a * c, _F0)
        return _mk(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        n = self.abs2()
        if not n:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return _mk(self.re / n, -self.im / n)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero")
            return _mk(self.re / other, self.im / other)
        if type(other) is not GaussianRational:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.inverse() * other
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if type(other) is GaussianRational:
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        return format_scalar(self)

    def to_json(self) -> dict:
        return {"re": fraction_str(self.re), "im": fraction_str(self.im)}


def _mk(re: Fraction, im: Fraction) -> GaussianRational:
    g = object.__new__(GaussianRational)
    g.re = re
    g.im = im
    return g


_F0 = Fraction(0)
ZERO = _mk(Fraction(0), Fraction(0))
ONE = _mk(Fraction(1), Fraction(0))
I = _mk(Fraction(0), Fraction(1))
GR = GaussianRational


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def format_scalar(c: GaussianRational) -> str:
    """Readable form that the manifold DSL parses back, e.g. ``1/2 - 3*i``."""
    re, im = c.re, c.im
    if not im:
        return str(re)
    if im == 1:
        ims = "i"
    elif im == -1:
        ims = "-i"
    else:
        ims = f"{im}*i"
    if not re:
        return ims
    if ims.startswith("-"):
        return f"{re} - {ims[1:]}"
    return f"{re} + {ims}"


def gr(x) -> GaussianRational:
    return GaussianRational.coerce(x)


# ---------------------------------------------------------------------------
# polynomials


Exps = tuple


class Poly:
    """Sparse polynomial over Q(i) in an ordered tuple of named variables."""

    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Mapping | None = None):
        self.vars = tuple(vars)
        n = len(self.vars)
        clean = {}
        if terms:
            for e, c in terms.items():
                c = gr(c)
                if c:
                    e = tuple(e)
                    if len(e) != n:
                        raise ValueError("exponent vector length does not match variables")
                    clean[e] = c
        self.terms = clean

    @classmethod
    def _raw(cls, vars: tuple, terms: dict) -> "Poly":
        p = object.__new__(cls)
        p.vars = vars
        p.terms = terms
        return p

    @classmethod
    def zero(cls, vars: Sequence[str] = ()) -> "Poly":
        return cls._raw(tuple(vars), {})

    @classmethod
    def const(cls, c, vars: Sequence[str] = ()) -> "Poly":
        vars = tuple(vars)
        c = gr(c)
        return cls._raw(vars, {(0,) * len(vars): c} if c else {})

    @classmethod
    def var(cls, name: str, vars: Sequence[str] | None = None) -> "Poly":
        vars = (name,) if vars is None else tuple(vars)
        if name not in vars:
            vars = vars + (name,)
        e = tuple(1 if v == name else 0 for v in vars)
        return cls._raw(vars, {e: ONE})

    @classmethod
    def monomial(cls, vars: Sequence[str], exps: Mapping[str, int], c=1) -> "Poly":
        vars = tuple(vars)
        c = gr(c)
        e = tuple(exps.get(v, 0) for v in vars)
        return cls._raw(vars, {e: c} if c else {})

    # -- structure -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def constant_term(self) -> GaussianRational:
        return self.terms.get((0,) * len(self.vars), ZERO)

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def valuation(self) -> int | None:
        """Lowest total degree of a term, None for zero."""
        return min((sum(e) for e in self.terms), default=None)

    def degree_in(self, var: str) -> int:
        if var not in self.vars:
            return 0 if self.terms else -1
        k = self.vars.index(var)
        return max((e[k] for e in self.terms), default=-1)

    def used_vars(self) -> tuple:
        used = [False] * len(self.vars)
        for e in self.terms:
            for k, x in enumerate(e):
                if x:
                    used[k] = True
        return tuple(v for v, u in zip(self.vars, used) if u)

    def free_of(self, var: str) -> bool:
        return var not in self.used_vars()

    def coeff(self, exps: Mapping[str, int]) -> GaussianRational:
        e = tuple(exps.get(v, 0) for v in self.vars)
        return self.terms.get(e, ZERO)

    def coefficients_in(self, var: str) -> list["Poly"]:
        """Coefficients c_k with self = sum c_k var^k; var stays in vars with exponent 0."""
        if var not in self.vars:
            return [self] if self.terms else []
        k = self.vars.index(var)
        out: dict[int, dict] = {}
        for e, c in self.terms.items():
            d = e[k]
            out.setdefault(d, {})[e[:k] + (0,) + e[k + 1:]] = c
        top = max(out, default=-1)
        return [Poly._raw(self.vars, out.get(d, {})) for d in range(top + 1)]

    def split_by(self, names: Sequence[str]) -> dict[tuple, "Poly"]:
        """Group terms by the exponents of ``names``; values are polys with those exponents removed."""
        idx = [self.vars.index(v) for v in names if v in self.vars]
        pos = {v: self.vars.index(v) for v in names if v in self.vars}
        out: dict[tuple, dict] = {}
        for e, c in self.terms.items():
            key = tuple(e[pos[v]] if v in pos else 0 for v in names)
            rest = list(e)
            for k in idx:
                rest[k] = 0
            out.setdefault(key, {})[tuple(rest)] = c
        return {k: Poly._raw(self.vars, t) for k, t in out.items()}

    def homogeneous_part(self, k: int) -> "Poly":
        return Poly._raw(self.vars, {e: c for e, c in self.terms.items() if sum(e) == k})

    def truncate(self, order: int | None) -> "Poly":
        if order is None:
            return self
        return Poly._raw(self.vars, {e: c for e, c in self.terms.items() if sum(e) <= order})

    def sorted_terms(self) -> list[tuple[tuple, GaussianRational]]:
        return sorted(self.terms.items(), key=lambda ec: (sum(ec[0]), tuple(-x for x in ec[0])))

    # -- variable bookkeeping -----------------------------------------

    def with_vars(self, vars: Sequence[str]) -> "Poly":
        vars = tuple(vars)
        if vars == self.vars:
            return self
        pos = {v: k for k, v in enumerate(vars)}
        idx = []
        for k, v in enumerate(self.vars):
            j = pos.get(v)
            idx.append(j)
        n = len(vars)
        terms = {}
        for e, c in self.terms.items():
            new = [0] * n
            for k, x in enumerate(e):
                if x:
                    j = idx[k]
                    if j is None:
                        raise ValueError(f"variable {self.vars[k]!r} is used but not in target variables")
                    new[j] = x
            terms[tuple(new)] = c
        return Poly._raw(vars, terms)

    def drop_unused(self) -> "Poly":
        return self.with_vars(self.used_vars())

    def rename(self, mapping: Mapping[str, str]) -> "Poly":
        """Rename variables; names may be swapped or merged."""
        newnames = [mapping.get(v, v) for v in self.vars]
        target = []
        for v in newnames:
            if v not in target:
                target.append(v)
        pos = [target.index(v) for v in newnames]
        terms: dict = {}
        n = len(target)
        for e, c in self.terms.items():
            new = [0] * n
            for k, x in enumerate(e):
                new[pos[k]] += x
            key = tuple(new)
            s = terms.get(key)
            terms[key] = c if s is None else s + c
        return Poly(tuple(target), terms)

    def _aligned(self, other: "Poly"):
        if self.vars == other.vars:
            return self.vars, self.terms, other.terms
        vars = self.vars + tuple(v for v in other.vars if v not in self.vars)
        return vars, self.with_vars(vars).terms, other.with_vars(vars).terms

    # -- ring operations ----------------------------------------------

    def _lift(self, other):
        if isinstance(other, Poly):
            return other
        return Poly.const(other, self.vars)

    def __add__(self, other):
        other = self._lift(other)
        vars, a, b = self._aligned(other)
        out = dict(a)
        for e, c in b.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return Poly._raw(vars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c) -> "Poly":
        c = gr(c)
        if not c:
            return Poly._raw(self.vars, {})
        return Poly._raw(self.vars, {e: x * c for e, x in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Poly):
            if isinstance(other, (int, Fraction, GaussianRational)):
                return self.scale(other)
            return NotImplemented
        return self.mul(other)

    __rmul__ = __mul__

    def mul(self, other: "Poly", order: int | None = None) -> "Poly":
        """Product, dropping terms of total degree > order when order is given."""
        vars, a, b = self._aligned(other)
        out: dict = {}
        add = operator.add
        if order is None:
            for e1, c1 in a.items():
                for e2, c2 in b.items():
                    e = tuple(map(add, e1, e2))
                    s = out.get(e)
                    out[e] = c1 * c2 if s is None else s + c1 * c2
        else:
            buckets: dict[int, list] = {}
            for e2, c2 in b.items():
                buckets.setdefault(sum(e2), []).append((e2, c2))
            degs = sorted(buckets)
            for e1, c1 in a.items():
                d1 = sum(e1)
                room = order - d1
                if room < 0:
                    continue
                for d2 in degs:
                    if d2 > room:
                        break
                    for e2, c2 in buckets[d2]:
                        e = tuple(map(add, e1, e2))
                        s = out.get(e)
                        out[e] = c1 * c2 if s is None else s + c1 * c2
        return Poly._raw(vars, {e: c for e, c in out.items() if c})

    def pow(self, k: int, order: int | None = None) -> "Poly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(1, self.vars)
        base = self
        while k:
            if k & 1:
                result = result.mul(base, order)
            k >>= 1
            if k:
                base = base.mul(base, order)
        return result

    def __pow__(self, k: int):
        return self.pow(k)

    def __eq__(self, other):
        if isinstance(other, Poly):
            _, a, b = self._aligned(other)
            return a == b
        if isinstance(other, (int, Fraction, GaussianRational)):
            return self == Poly.const(other, self.vars)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.drop_unused().terms.items()) | frozenset(self.used_vars()))

    # -- calculus and substitution ------------------------------------

    def diff(self, var: str) -> "Poly":
        if var not in self.vars:
            return Poly._raw(self.vars, {})
        k = self.vars.index(var)
        out = {}
        for e, c in self.terms.items():
            x = e[k]
            if x:
                out[e[:k] + (x - 1,) + e[k + 1:]] = c * x
        return Poly._raw(self.vars, out)

    def diff_multi(self, exps: Mapping[str, int]) -> "Poly":
        p = self
        for v, k in exps.items():
            for _ in range(k):
                p = p.diff(v)
        return p

    def bar(self) -> "Poly":
        """Conjugate every coefficient; exponents unchanged."""
        return Poly._raw(self.vars, {e: c.conj() for e, c in self.terms.items()})

    def subs(self, mapping: Mapping[str, object], order: int | None = None) -> "Poly":
        """Substitute polynomials (or scalars) for variables; truncate at ``order`` if given."""
        mapping = {v: p for v, p in mapping.items() if v in self.vars}
        if not mapping:
            return self.truncate(order)
        keep = tuple(v for v in self.vars if v not in mapping)
        outvars = list(keep)
        for p in mapping.values():
            if isinstance(p, Poly):
                for v in p.vars:
                    if v not in outvars:
                        outvars.append(v)
        outvars = tuple(outvars)
        vals = {}
        for v, p in mapping.items():
            vals[v] = p.with_vars(outvars) if isinstance(p, Poly) else Poly.const(p, outvars)
        subnames = [v for v in self.vars if v in mapping]
        groups = self.split_by(subnames)
        keep_pos = [outvars.index(v) for v in keep]
        keep_idx = [self.vars.index(v) for v in keep]
        powers: dict[str, list[Poly]] = {v: [Poly.const(1, outvars)] for v in subnames}

        def power(v: str, k: int) -> Poly:
            lst = powers[v]
            while len(lst) <= k:
                lst.append(lst[-1].mul(vals[v], order))
            return lst[k]

        result: dict = {}
        for key, rest in groups.items():
            prod = None
            for v, k in zip(subnames, key):
                if k:
                    pk = power(v, k)
                    prod = pk if prod is None else prod.mul(pk, order)
            if prod is None:
                prod = Poly.const(1, outvars)
            n = len(outvars)
            kterms = {}
            for e, c in rest.terms.items():
                new = [0] * n
                for j, i in zip(keep_pos, keep_idx):
                    new[j] = e[i]
                kterms[tuple(new)] = c
            part = Poly._raw(outvars, kterms).mul(prod, order)
            for e, c in part.terms.items():
                s = result.get(e)
                result[e] = c if s is None else s + c
        return Poly._raw(outvars, {e: c for e, c in result.items() if c})

    def eval(self, point: Mapping[str, object]):
        """Evaluate at a point whose values may be scalars or any ring elements (e.g. TSeries)."""
        values = []
        for v in self.vars:
            if v in point:
                values.append(point[v])
            else:
                values.append(None)
        cache: list[dict[int, object]] = [dict() for _ in self.vars]

        def power(k: int, x: int):
            c = cache[k]
            if x not in c:
                if values[k] is None:
                    raise KeyError(f"no value supplied for variable {self.vars[k]!r}")
                c[x] = values[k] if x == 1 else power(k, x - 1) * values[k]
            return c[x]

        total = None
        for e, c in self.terms.items():
            term = c
            for k, x in enumerate(e):
                if x:
                    term = term * power(k, x)
            total = term if total is None else total + term
        return ZERO if total is None else total

    def partial_eval(self, point: Mapping[str, object]) -> "Poly":
        return self.subs({v: x for v, x in point.items() if v in self.vars})

    def exact_div(self, other: "Poly") -> "Poly":
        """Quotient of an exact division; raises ValueError when other does not divide self."""
        if not other.terms:
            raise ZeroDivisionError("division by the zero polynomial")
        vars, a, b = self._aligned(other)
        lead_e = max(b)
        lead_c = b[lead_e]
        rem = Poly._raw(vars, dict(a))
        div = Poly._raw(vars, b)
        quot: dict = {}
        while rem.terms:
            e = max(rem.terms)
            diff = tuple(x - y for x, y in zip(e, lead_e))
            if min(diff) < 0:
                raise ValueError("polynomial division is not exact")
            c = rem.terms[e] / lead_c
            quot[diff] = c
            rem = rem - Poly._raw(vars, {diff: c}).mul(div)
        return Poly._raw(vars, quot)

    # -- printing -------------------------------------------------------

    def __repr__(self):
        return f"Poly({str(self)!r}, vars={self.vars})"

    def __str__(self):
        return self.to_str()

    def to_str(self, names: Mapping[str, str] | None = None) -> str:
        if not self.terms:
            return "0"
        names = names or {}
        pieces = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                (names.get(v, v) if x == 1 else f"{names.get(v, v)}^{x}")
                for v, x in zip(self.vars, e) if x
            )
            if not mono:
                pieces.append(_coef_str(c, alone=True))
            elif c == 1:
                pieces.append(mono)
            elif c == -1:
                pieces.append("-" + mono)
            else:
                pieces.append(f"{_coef_str(c, alone=False)}*{mono}")
        out = pieces[0]
        for p in pieces[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


def _coef_str(c: GaussianRational, alone: bool) -> str:
    s = format_scalar(c)
    if not alone and c.re and c.im:
        return f"({s})"
    if not alone and c.im == 0 and c.re.denominator != 1:
        return s
    return s


def poly_vars(*polys: Poly) -> tuple:
    out: list[str] = []
    for p in polys:
        for v in p.vars:
            if v not in out:
                out.append(v)
    return tuple(out)


def bar(p: Poly) -> Poly:
    return p.bar()


# ---------------------------------------------------------------------------
# truncated series


@dataclass(frozen=True)
class Series:
    """A power series known through total degree ``order``."""

    base: Poly
    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("series order must be non-negative")
        object.__setattr__(self, "base", self.base.truncate(self.order))

    @property
    def vars(self):
        return self.base.vars

    def _other(self, other):
        if isinstance(other, Series):
            return other.base, other.order
        if isinstance(other, Poly):
            return other, None
        return Poly.const(other, self.base.vars), None

    def _order(self, o):
        return self.order if o is None else min(self.order, o)

    def __add__(self, other):
        p, o = self._other(other)
        k = self._order(o)
        return Series((self.base + p).truncate(k), k)

    __radd__ = __add__

    def __sub__(self, other):
        p, o = self._other(other)
        k = self._order(o)
        return Series((self.base - p).truncate(k), k)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Series(-self.base, self.order)

    def __mul__(self, other):
        p, o = self._other(other)
        k = self._order(o)
        return Series(self.base.mul(p, k), k)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return Series(self.base.pow(k, self.order), self.order)

    def diff(self, var: str) -> "Series":
        return Series(self.base.diff(var), max(self.order - 1, 0))

    def bar(self) -> "Series":
        return Series(self.base.bar(), self.order)

    def is_zero(self) -> bool:
        return self.base.is_zero()

    def __eq__(self, other):
        if isinstance(other, Series):
            k = min(self.order, other.order)
            return self.base.truncate(k) == other.base.truncate(k)
        if isinstance(other, Poly):
            return self.base == other.truncate(self.order)
        return NotImplemented

    def __hash__(self):
        return hash((self.base, self.order))

    def __str__(self):
        return f"{self.base} + O({self.order + 1})"


def truncate(p: Poly, order: int) -> Series:
    return Series(p, order)


def compose(f, substitutions: Mapping[str, object]):
    """Substitute series/polys into f; the result order is the minimum of the orders involved."""
    orders = []
    if isinstance(f, Series):
        orders.append(f.order)
        base = f.base
    else:
        base = f
    subs = {}
    for v, s in substitutions.items():
        if isinstance(s, Series):
            orders.append(s.order)
            subs[v] = s.base
        else:
            subs[v] = s
    if not orders:
        return base.subs(subs)
    if isinstance(f, Series):
        for v, s in subs.items():
            if v in base.used_vars():
                c = s.constant_term() if isinstance(s, Poly) else gr(s)
                if c:
                    raise ValueError("composition not supported: substituted series has a nonzero constant term")
    k = min(orders)
    return Series(base.subs(subs, k), k)


# ---------------------------------------------------------------------------
# univariate series in a formal parameter t


class TSeries:
    """Power series in one formal variable t, known modulo t**prec (prec None: exact)."""

    __slots__ = ("c", "prec")

    def __init__(self, coeffs: Sequence = (), prec: int | None = None):
        c = [gr(x) for x in coeffs]
        if prec is not None:
            c = c[:prec]
        while c and not c[-1]:
            c.pop()
        self.c = c
        self.prec = prec

    @classmethod
    def _raw(cls, c: list, prec):
        s = object.__new__(cls)
        if prec is not None and len(c) > prec:
            c = c[:prec]
        while c and not c[-1]:
            c.pop()
        s.c = c
        s.prec = prec
        return s

    def valuation(self) -> int | None:
        """Index of the first known nonzero coefficient, or None if zero to known precision."""
        for k, x in enumerate(self.c):
            if x:
                return k
        return None

    def _val_or_prec(self):
        v = self.valuation()
        if v is not None:
            return v
        return self.prec

    def known_nonzero(self) -> bool:
        return any(self.c)

    def __add__(self, other):
        if not isinstance(other, TSeries):
            other = TSeries._raw([gr(other)], None)
        n = max(len(self.c), len(other.c))
        a = self.c + [ZERO] * (n - len(self.c))
        b = other.c + [ZERO] * (n - len(other.c))
        return TSeries._raw([x + y for x, y in zip(a, b)], _pmin(self.prec, other.prec))

    __radd__ = __add__

    def __neg__(self):
        return TSeries._raw([-x for x in self.c], self.prec)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TSeries) else -gr(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TSeries):
            if isinstance(other, (int, Fraction, GaussianRational)):
                g = gr(other)
                return TSeries._raw([x * g for x in self.c], self.prec)
            return NotImplemented
        prec = _mul_prec(self, other)
        a, b = self.c, other.c
        if not a or not b:
            return TSeries._raw([], prec)
        lim = len(a) + len(b) - 1 if prec is None else min(prec, len(a) + len(b) - 1)
        out = [ZERO] * max(lim, 0)
        for i, x in enumerate(a):
            if not x or i >= lim:
                continue
            for j in range(min(len(b), lim - i)):
                y = b[j]
                if y:
                    out[i + j] = out[i + j] + x * y
        return TSeries._raw(out, prec)

    __rmul__ = __mul__

    def shift_down(self, v: int) -> "TSeries":
        """Divide by t**v, assuming the first v coefficients vanish."""
        return TSeries._raw(self.c[v:], None if self.prec is None else self.prec - v)

    def __repr__(self):
        return f"TSeries({[str(x) for x in self.c]}, prec={self.prec})"


def _pmin(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _mul_prec(x: TSeries, y: TSeries):
    cands = []
    if x.prec is not None:
        vy = y.valuation()
        cands.append(x.prec + (vy if vy is not None else (y.prec if y.prec is not None else 10**9)))
    if y.prec is not None:
        vx = x.valuation()
        cands.append(y.prec + (vx if vx is not None else (x.prec if x.prec is not None else 10**9)))
    return min(cands) if cands else None


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightVector:
    """Positive integer weights, one per named variable."""

    weights: tuple
    names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        object.__setattr__(self, "names", tuple(self.names))
        if any(w < 1 for w in self.weights):
            raise ValueError("weights must be positive integers")
        if self.names and len(self.names) != len(self.weights):
            raise ValueError("one weight per named variable is required")

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.names, self.weights))


@dataclass(frozen=True)
class NotHomogeneous:
    low: int
    high: int

    def __bool__(self):
        return False


def weighted_degree(p: Poly, w: WeightVector | Mapping[str, int]) -> int | NotHomogeneous:
    """Common weighted degree of all terms, or the lowest/highest term degrees if they differ."""
    if p.is_zero():
        raise ValueError("zero polynomial has no degree")
    wd = w.as_dict() if isinstance(w, WeightVector) else dict(w)
    ws = []
    for v in p.vars:
        if v in wd:
            ws.append(wd[v])
        elif v in p.used_vars():
            raise ValueError(f"no weight for variable {v!r}")
        else:
            ws.append(0)
    degs = {sum(a * b for a, b in zip(e, ws)) for e in p.terms}
    if len(degs) == 1:
        return degs.pop()
    return NotHomogeneous(min(degs), max(degs))


# ---------------------------------------------------------------------------
# resultants and determinants


def poly_det(matrix: Sequence[Sequence[Poly]]) -> Poly:
    """Determinant of a square matrix of polynomials by fraction-free (Bareiss) elimination."""
    n = len(matrix)
    if n == 0:
        return Poly.const(1)
    vars = poly_vars(*[x for row in matrix for x in row])
    m = [[x.with_vars(vars) for x in row] for row in matrix]
    sign = 1
    prev = Poly.const(1, vars)
    for k in range(n - 1):
        if m[k][k].is_zero():
            for r in range(k + 1, n):
                if not m[r][k].is_zero():
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return Poly.zero(vars)
        piv = m[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = piv * m[i][j] - m[i][k] * m[k][j]
                m[i][j] = num.exact_div(prev)
            m[i][k] = Poly.zero(vars)
        prev = piv
    det = m[n - 1][n - 1]
    return det if sign > 0 else -det


def sylvester_matrix(p: Poly, q: Poly, var: str) -> list[list[Poly]]:
    vars = poly_vars(p, q)
    p, q = p.with_vars(vars), q.with_vars(vars)
    a = p.coefficients_in(var)
    b = q.coefficients_in(var)
    m, n = len(a) - 1, len(b) - 1
    size = m + n
    zero = Poly.zero(vars)
    rows = []
    for i in range(n):
        row = [zero] * size
        for k in range(m + 1):
            row[i + k] = a[m - k]
        rows.append(row)
    for i in range(m):
        row = [zero] * size
        for k in range(n + 1):
            row[i + k] = b[n - k]
        rows.append(row)
    return rows


def resultant(p: Poly, q: Poly, var: str) -> Poly:
    """Sylvester resultant of p and q with respect to var (rows of p first)."""
    if p.degree_in(var) < 1 or q.degree_in(var) < 1:
        raise ValueError("not a polynomial in elimination variable")
    det = poly_det(sylvester_matrix(p, q, var))
    vars = tuple(v for v in det.vars if v != var)
    return det.with_vars(vars)


def univariate_gcd(p: Poly, q: Poly) -> Poly:
    """Monic gcd of two polynomials in (at most) one variable."""
    used = set(p.used_vars()) | set(q.used_vars())
    if len(used) > 1:
        raise ValueError("univariate_gcd expects polynomials in a single variable")
    if not used:
        if p.is_zero() and q.is_zero():
            return p
        return Poly.const(1, poly_vars(p, q))
    var = used.pop()
    a, b = p.with_vars((var,)) if p else Poly.zero((var,)), q.with_vars((var,)) if q else Poly.zero((var,))
    while not b.is_zero():
        a, b = b, _urem(a, b)
    if a.is_zero():
        return a
    lead = a.terms[max(a.terms)]
    return a.scale(lead.inverse())


def _urem(a: Poly, b: Poly) -> Poly:
    db = b.degree()
    lead = b.terms[(db,)]
    r = a
    while not r.is_zero() and r.degree() >= db:
        dr = r.degree()
        c = r.terms[(dr,)] / lead
        r = r - Poly._raw(b.vars, {(dr - db,): c}).mul(b)
    return r


# ---------------------------------------------------------------------------
# exact linear algebra


def matrix_rank(rows: Sequence[Sequence[GaussianRational]]) -> int:
    """Rank over Q(i) by fraction-free row elimination."""
    m = [[gr(x) for x in row] for row in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    prev = ONE
    for col in range(ncols):
        piv = None
        for r in range(rank, len(m)):
            if m[r][col]:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        for i in range(rank + 1, len(m)):
            a = m[i][col]
            row = m[i]
            prow = m[rank]
            for j in range(col + 1, ncols):
                row[j] = (p * row[j] - a * prow[j]) / prev
            row[col] = ZERO
        prev = p
        rank += 1
        if rank == len(m):
            break
    return rank


def series_matrix_rank(rows: Sequence[Sequence[TSeries]]) -> tuple[int, bool]:
    """Rank over the Laurent field in t of a matrix of t-series with tracked precision.

    Returns (rank, certified).  The rank is a lower bound; it is certified when
    every entry left after elimination is known to be exactly zero.
    """
    m = [list(r) for r in rows]
    if not m:
        return 0, True
    ncols = len(m[0])
    rows_left = list(range(len(m)))
    cols_left = list(range(ncols))
    rank = 0
    while rows_left and cols_left:
        best = None
        for i in rows_left:
            for j in cols_left:
                v = m[i][j].valuation()
                if v is not None and (best is None or v < best[0]):
                    best = (v, i, j)
        if best is None:
            break
        _, pi, pj = best
        piv = m[pi][pj]
        rows_left.remove(pi)
        cols_left.remove(pj)
        for i in rows_left:
            a = m[i][pj]
            if not a.known_nonzero() and a.prec is None:
                continue
            for j in cols_left:
                m[i][j] = piv * m[i][j] - a * m[pi][j]
        rank += 1
    certified = all(m[i][j].prec is None and not m[i][j].c for i in rows_left for j in cols_left)
    return rank, certified


def nullspace(rows: Sequence[Mapping[int, GaussianRational]], ncols: int) -> list[dict[int, GaussianRational]]:
    """Basis of the right kernel of a sparse matrix given as {column: value} rows."""
    pivots: dict[int, dict[int, GaussianRational]] = {}
    order: list[int] = []
    for raw in rows:
        r = {k: gr(v) for k, v in raw.items() if v}
        for pc in order:
            if pc in r:
                f = r[pc]
                for k, v in pivots[pc].items():
                    nv = r.get(k, ZERO) - f * v
                    if nv:
                        r[k] = nv
                    else:
                        r.pop(k, None)
        if not r:
            continue
        pc = min(r)
        inv = r[pc].inverse()
        r = {k: v * inv for k, v in r.items()}
        for oc in order:
            orow = pivots[oc]
            if pc in orow:
                f = orow[pc]
                for k, v in r.items():
                    nv = orow.get(k, ZERO) - f * v
                    if nv:
                        orow[k] = nv
                    else:
                        orow.pop(k, None)
        pivots[pc] = r
        order.append(pc)
    basis = []
    for f in range(ncols):
        if f in pivots:
            continue
        vec = {f: ONE}
        for pc in order:
            v = pivots[pc].get(f)
            if v:
                vec[pc] = -v
        basis.append(vec)
    return basis


class SparseBasis:
    """Incremental echelon basis of sparse vectors {key: value}."""

    def __init__(self):
        self.rows: dict = {}
        self.order: list = []

    def __len__(self):
        return len(self.order)

    def reduce(self, vec: Mapping) -> dict:
        r = {k: gr(v) for k, v in vec.items() if v}
        for pc in self.order:
            f = r.get(pc)
            if f:
                for k, v in self.rows[pc].items():
                    nv = r.get(k, ZERO) - f * v
                    if nv:
                        r[k] = nv
                    else:
                        r.pop(k, None)
        return r

    def add(self, vec: Mapping) -> bool:
        """Insert vec; returns False when it is already in the span."""
        r = self.reduce(vec)
        if not r:
            return False
        pc = min(r)
        inv = r[pc].inverse()
        self.rows[pc] = {k: v * inv for k, v in r.items()}
        self.order.append(pc)
        return True


def solve_linear(matrix: Sequence[Sequence[GaussianRational]], rhs: Sequence[GaussianRational]) -> list[GaussianRational]:
    """Solve a square nonsingular system exactly."""
    n = len(matrix)
    m = [[gr(x) for x in row] + [gr(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular linear system")
        m[col], m[piv] = m[piv], m[col]
        inv = m[col][col].inverse()
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def invert_matrix(matrix: Sequence[Sequence[GaussianRational]]) -> list[list[GaussianRational]]:
    n = len(matrix)
    cols = []
    for k in range(n):
        e = [ONE if i == k else ZERO for i in range(n)]
        cols.append(solve_linear(matrix, e))
    return [[cols[j][i] for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# generic rank


SAMPLE_BOUND = 10**6


def random_rational(rng: random.Random, bound: int = SAMPLE_BOUND) -> Fraction:
    return Fraction(rng.randint(-bound, bound), rng.randint(1, bound))


def random_gaussian(rng: random.Random, bound: int = SAMPLE_BOUND) -> GaussianRational:
    return _mk(random_rational(rng, bound), random_rational(rng, bound))


def _as_poly_and_order(c) -> tuple[Poly, int | None]:
    if isinstance(c, Series):
        return c.base, c.order
    if isinstance(c, Poly):
        return c, None
    return Poly.const(c), None


def jacobian(components: Sequence[Poly], variables: Sequence[str]) -> list[list[Poly]]:
    return [[p.diff(v) for v in variables] for p in components]


def symbolic_rank(matrix: Sequence[Sequence[Poly]]) -> int:
    """Largest size of a nonvanishing minor (deterministic; for small matrices)."""
    nr = len(matrix)
    nc = len(matrix[0]) if nr else 0
    for k in range(min(nr, nc), 0, -1):
        for rs in combinations(range(nr), k):
            for cs in combinations(range(nc), k):
                if not poly_det([[matrix[i][j] for j in cs] for i in rs]).is_zero():
                    return k
    return 0


def rank_samples(
    components: Sequence,
    variables: Sequence[str] | None = None,
    *,
    rng: random.Random | None = None,
    retries: int = 3,
    order: int | None = None,
) -> list[int]:
    """Jacobian ranks at independent random samples.

    Exact components are evaluated at random Gaussian-rational points.  When a
    component is only known to some order, each sample is a random formal line
    x = a*t through the origin and the rank is taken over the field of Laurent
    series in t, using only the known coefficients.
    """
    rng = rng or random.Random(0)
    polys = []
    orders = []
    for c in components:
        p, o = _as_poly_and_order(c)
        polys.append(p)
        orders.append(o if order is None else (order if o is None else min(o, order)))
    if variables is None:
        variables = poly_vars(*polys)
    variables = tuple(variables)
    if not variables or not polys:
        return [0] * retries
    jac = jacobian(polys, variables)
    known = [None if o is None else o - 1 for o in orders]
    return matrix_rank_samples(jac, known, rng=rng, retries=retries)


def matrix_rank_samples(
    matrix: Sequence[Sequence[Poly]],
    known_degrees: Sequence[int | None] | None = None,
    *,
    rng: random.Random | None = None,
    retries: int = 3,
) -> list[int]:
    """Ranks of a matrix of polynomials at random samples.

    Row i is known through total degree known_degrees[i] (None: exact).  Exact
    matrices are evaluated at random points; otherwise along random formal lines.
    """
    rng = rng or random.Random(0)
    if known_degrees is None:
        known_degrees = [None] * len(matrix)
    allv = poly_vars(*[e for row in matrix for e in row])
    formal = any(k is not None for k in known_degrees)
    out = []
    for _ in range(retries):
        if not formal:
            point = {v: random_gaussian(rng) for v in allv}
            out.append(matrix_rank([[e.eval(point) for e in row] for row in matrix]))
        else:
            direction = {v: random_gaussian(rng, 1000) for v in allv}
            vals = [[formal_line_eval(e, direction, k) for e in row] for row, k in zip(matrix, known_degrees)]
            out.append(series_matrix_rank(vals)[0])
    return out


def formal_line_eval(p: Poly, direction: Mapping[str, GaussianRational], known_degree: int | None) -> TSeries:
    """Restrict p to the line x = direction*t; known_degree is the degree through which p is known."""
    if known_degree is not None and known_degree < 0:
        return TSeries._raw([], 0)
    prec = None if known_degree is None else known_degree + 1
    buckets: dict[int, GaussianRational] = {}
    for e, c in p.terms.items():
        d = sum(e)
        if prec is not None and d >= prec:
            continue
        term = c
        for v, x in zip(p.vars, e):
            if x:
                term = term * direction[v] ** x
        buckets[d] = buckets.get(d, ZERO) + term
    top = max(buckets, default=-1)
    return TSeries._raw([buckets.get(k, ZERO) for k in range(top + 1)], prec)


def generic_rank(
    components: Sequence,
    variables: Sequence[str] | None = None,
    *,
    rng: random.Random | None = None,
    retries: int = 3,
    order: int | None = None,
    symbolic_threshold: int = 4,
) -> int:
    """Generic rank of the Jacobian of ``components`` (max over random samples)."""
    if not components:
        raise ValueError("component list must be nonempty")
    polys = [_as_poly_and_order(c) for c in components]
    if variables is None:
        variables = poly_vars(*[p for p, _ in polys])
    exact = order is None and all(o is None for _, o in polys)
    if exact and 0 < len(variables) * len(polys) <= symbolic_threshold:
        return symbolic_rank(jacobian([p for p, _ in polys], variables))
    return max(rank_samples(components, variables, rng=rng, retries=retries, order=order))
