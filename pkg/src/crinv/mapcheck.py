"""Holomorphic maps checked on jets: tangency, rank, leaf charts, algebraic
dependence and the reflection vector fields of the complexification.

Map components are small expression trees (polynomials, quotients, ``exp``
and ``sqrt``).  They are expanded at a base point into an ``ESeries``: a finite
sum of E(c) * p_c where E(c) is the transcendental constant exp(c) for a
Gaussian rational c and p_c is a polynomial jet.  Identities are checked group
by group, which is sound because the numbers exp(c) for distinct algebraic c
are linearly independent over the algebraic numbers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from math import factorial, isqrt
from typing import Mapping, Sequence

from .exactalg import (
    ONE,
    ZERO,
    GaussianRational,
    Poly,
    Series,
    format_scalar,
    formal_line_eval,
    generic_rank,
    gr,
    matrix_rank,
    nullspace,
    random_gaussian,
    series_matrix_rank,
)
from .geometry import ManifoldSpec, PointError, PointQ, choose_pivots, conj_name, local_graph
from .nondegen import VectorFieldSpec
from .normalform import NormalModel, _series_inverse


# ---------------------------------------------------------------------------
# exact square roots


def rational_sqrt(q: Fraction) -> Fraction | None:
    q = Fraction(q)
    if q < 0:
        return None
    a, b = isqrt(q.numerator), isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def gaussian_sqrt(c: GaussianRational) -> GaussianRational | None:
    """Square root with positive real part (positive imaginary part on the cut), if rational."""
    x, y = c.re, c.im
    s = rational_sqrt(x * x + y * y)
    if s is None:
        return None
    re = rational_sqrt((x + s) / 2)
    if re is None:
        return None
    if re:
        return GaussianRational(re, y / (2 * re))
    im = rational_sqrt((s - x) / 2)
    if im is None:
        return None
    return GaussianRational(0, im)


# ---------------------------------------------------------------------------
# exponential-grouped series


def _trunc(p: Poly, order: int | None) -> Poly:
    return p if order is None else p.truncate(order)


def _min_order(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class ESeries:
    """sum over c of E(c) * groups[c]; exact when ``order`` is None."""

    __slots__ = ("groups", "vars", "order")

    def __init__(self, groups: Mapping, vars: Sequence[str], order: int | None = None):
        self.vars = tuple(vars)
        self.order = order
        out = {}
        for c, p in groups.items():
            p = _trunc(p.with_vars(self.vars), order)
            if not p.is_zero():
                out[gr(c)] = p
        self.groups = out

    @classmethod
    def const(cls, c, vars, order=None) -> "ESeries":
        return cls({ZERO: Poly.const(c, vars)}, vars, order)

    @classmethod
    def of(cls, p: Poly, order=None) -> "ESeries":
        return cls({ZERO: p}, p.vars, order)

    def is_zero(self) -> bool:
        return not self.groups

    def _lift(self, other) -> "ESeries":
        if isinstance(other, ESeries):
            return other
        if isinstance(other, Poly):
            return ESeries.of(other.with_vars(self.vars))
        return ESeries.const(other, self.vars)

    def __add__(self, other):
        other = self._lift(other)
        g = dict(self.groups)
        for c, p in other.groups.items():
            g[c] = g[c] + p if c in g else p
        return ESeries(g, self.vars, _min_order(self.order, other.order))

    __radd__ = __add__

    def __neg__(self):
        return ESeries({c: -p for c, p in self.groups.items()}, self.vars, self.order)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        k = _min_order(self.order, other.order)
        g: dict = {}
        for a, p in self.groups.items():
            for b, q in other.groups.items():
                pq = p.mul(q, k)
                c = a + b
                g[c] = g[c] + pq if c in g else pq
        return ESeries(g, self.vars, k)

    __rmul__ = __mul__

    def scale(self, c) -> "ESeries":
        return ESeries({e: p.scale(c) for e, p in self.groups.items()}, self.vars, self.order)

    def diff(self, v: str) -> "ESeries":
        o = None if self.order is None else max(self.order - 1, 0)
        return ESeries({c: p.diff(v) for c, p in self.groups.items()}, self.vars, o)

    def bar(self, rename: Mapping[str, str] | None = None) -> "ESeries":
        rename = rename or {}
        vars_ = tuple(rename.get(v, v) for v in self.vars)
        return ESeries({c.conj(): p.bar().rename(rename) for c, p in self.groups.items()}, vars_, self.order)

    def with_vars(self, vars_) -> "ESeries":
        return ESeries(self.groups, vars_, self.order)

    def truncate(self, order: int | None) -> "ESeries":
        return ESeries(self.groups, self.vars, _min_order(self.order, order))

    def single(self) -> tuple[GaussianRational, Poly]:
        """The only group (c, p); zero counts as (0, 0)."""
        if not self.groups:
            return ZERO, Poly.zero(self.vars)
        if len(self.groups) > 1:
            raise ValueError("expression mixes several exponential constants")
        return next(iter(self.groups.items()))

    def plain(self) -> Poly:
        c, p = self.single()
        if c:
            raise ValueError("expression carries a transcendental constant factor")
        return p

    def constant(self) -> dict:
        return {c: p.constant_term() for c, p in self.groups.items() if p.constant_term()}

    def subs(self, mapping: Mapping[str, Poly], order: int | None = None, vars_=None) -> "ESeries":
        k = _min_order(self.order, order)
        vars_ = tuple(vars_) if vars_ is not None else self.vars
        return ESeries({c: p.subs(mapping, k).with_vars(vars_) for c, p in self.groups.items()}, vars_, k)

    # -- transcendental operations ------------------------------------

    def _need_order(self, what: str):
        if self.order is None:
            raise ValueError(f"{what} of a nonconstant series needs a series order")

    def exp(self) -> "ESeries":
        if any(c for c in self.groups):
            raise ValueError("nested exponential with a nonzero transcendental constant")
        p = self.groups.get(ZERO, Poly.zero(self.vars))
        c0 = p.constant_term()
        u = p - Poly.const(c0, self.vars)
        if u.is_zero():
            return ESeries({c0: Poly.const(1, self.vars)}, self.vars, self.order)
        self._need_order("exp")
        K = self.order
        acc = Poly.const(1, self.vars)
        term = Poly.const(1, self.vars)
        for k in range(1, K + 1):
            term = term.mul(u, K).scale(GaussianRational(Fraction(1, k)))
            if term.is_zero():
                break
            acc = acc + term
        return ESeries({c0: acc}, self.vars, K)

    def inverse(self) -> "ESeries":
        c, p = self.single()
        a = p.constant_term()
        if not a:
            raise ZeroDivisionError("division by a function vanishing at the base point")
        ainv = a.inverse()
        u = (p - Poly.const(a, self.vars)).scale(ainv)
        if u.is_zero():
            return ESeries({-c: Poly.const(ainv, self.vars)}, self.vars, self.order)
        self._need_order("division")
        K = self.order
        acc = Poly.const(1, self.vars)
        term = Poly.const(1, self.vars)
        for _ in range(K):
            term = -term.mul(u, K)
            if term.is_zero():
                break
            acc = acc + term
        return ESeries({-c: acc.scale(ainv)}, self.vars, K)

    def sqrt(self) -> "ESeries":
        if any(c for c in self.groups):
            raise ValueError("square root of a transcendental constant")
        p = self.groups.get(ZERO, Poly.zero(self.vars))
        a = p.constant_term()
        if not a:
            raise ValueError("square root of a function vanishing at the base point")
        r = gaussian_sqrt(a)
        if r is None:
            raise ValueError(f"square root of {format_scalar(a)} is not a Gaussian rational")
        u = (p - Poly.const(a, self.vars)).scale(a.inverse())
        if u.is_zero():
            return ESeries.const(r, self.vars, self.order)
        self._need_order("sqrt")
        K = self.order
        acc = Poly.const(1, self.vars)
        term = Poly.const(1, self.vars)
        coef = Fraction(1)
        for k in range(1, K + 1):
            # binomial(1/2, k) from binomial(1/2, k-1)
            coef = coef * (Fraction(1, 2) - (k - 1)) / k
            term = term.mul(u, K)
            if term.is_zero():
                break
            acc = acc + term.scale(GaussianRational(coef))
        return ESeries({ZERO: acc.scale(r)}, self.vars, K)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = ESeries.const(1, self.vars, self.order)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __str__(self):
        if not self.groups:
            return "0"
        parts = []
        for c, p in sorted(self.groups.items(), key=lambda t: (t[0].re, t[0].im)):
            parts.append(f"({p})" if not c else f"E({format_scalar(c)})*({p})")
        tail = "" if self.order is None else f" + O({self.order + 1})"
        return " + ".join(parts) + tail

    __repr__ = __str__


def eval_poly(p: Poly, values: Mapping[str, ESeries], vars_, order: int | None) -> ESeries:
    """p with each variable replaced by an ESeries."""
    acc = ESeries({}, vars_, order)
    cache: dict = {}
    for e, c in p.terms.items():
        term = ESeries.const(c, vars_, order)
        for v, k in zip(p.vars, e):
            if k:
                key = (v, k)
                if key not in cache:
                    cache[key] = values[v].truncate(order) ** k
                term = term * cache[key]
        acc = acc + term
    return acc.truncate(order)


# ---------------------------------------------------------------------------
# expressions


class Expr:
    prec = 4

    def __add__(self, other):
        return add(self, lift(other))

    def __radd__(self, other):
        return add(lift(other), self)

    def __sub__(self, other):
        return add(self, neg(lift(other)))

    def __rsub__(self, other):
        return add(lift(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, lift(other))

    def __rmul__(self, other):
        return mul(lift(other), self)

    def __truediv__(self, other):
        return div(self, lift(other))

    def __pow__(self, k: int):
        return power(self, k)

    def _wrap(self, prec: int) -> str:
        s = str(self)
        return f"({s})" if self.prec < prec else s

    def is_polynomial(self) -> bool:
        return all(x.is_polynomial() for x in self.children())

    def children(self) -> tuple:
        return ()

    def used_vars(self) -> set:
        out = set()
        for x in self.children():
            out |= x.used_vars()
        return out

    def to_poly(self, vars_: Sequence[str]) -> Poly:
        if not self.is_polynomial():
            raise ValueError(f"not a polynomial: {self}")
        return self.evaluate({v: ESeries.of(Poly.var(v, vars_)) for v in vars_}, None, vars_).plain()

    def __eq__(self, other):
        return isinstance(other, Expr) and type(self) is type(other) and self.key() == other.key()

    def __hash__(self):
        return hash((type(self).__name__, self.key()))

    def __repr__(self):
        return f"Expr({str(self)!r})"


@dataclass(frozen=True, eq=False)
class Num(Expr):
    value: GaussianRational

    def key(self):
        return self.value

    @property
    def prec(self):
        c = self.value
        if c.re and c.im:
            return 1
        if c.re < 0 or c.im < 0 or (not c.im and c.re.denominator != 1) or (c.im and c.im != 1):
            return 2
        return 4

    def __str__(self):
        return format_scalar(self.value)

    def bar(self, swap):
        return Num(self.value.conj())

    def subs(self, mapping):
        return self

    def evaluate(self, env, order, vars_):
        return ESeries.const(self.value, vars_, None)


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str

    def key(self):
        return self.name

    def __str__(self):
        return self.name

    def used_vars(self):
        return {self.name}

    def bar(self, swap):
        return Var(swap.get(self.name, conj_name(self.name)))

    def subs(self, mapping):
        return mapping.get(self.name, self)

    def evaluate(self, env, order, vars_):
        if self.name not in env:
            raise KeyError(f"unknown variable {self.name!r}")
        return env[self.name]


@dataclass(frozen=True, eq=False)
class Sum(Expr):
    terms: tuple
    prec = 1

    def key(self):
        return self.terms

    def children(self):
        return self.terms

    def __str__(self):
        out = self.terms[0]._wrap(1)
        for t in self.terms[1:]:
            s = t._wrap(1)
            out += " - " + s[1:] if s.startswith("-") else " + " + s
        return out

    def bar(self, swap):
        return add(*(t.bar(swap) for t in self.terms))

    def subs(self, mapping):
        return add(*(t.subs(mapping) for t in self.terms))

    def evaluate(self, env, order, vars_):
        acc = ESeries({}, vars_, None)
        for t in self.terms:
            acc = acc + t.evaluate(env, order, vars_)
        return acc.truncate(order)


@dataclass(frozen=True, eq=False)
class Prod(Expr):
    factors: tuple
    prec = 2

    def key(self):
        return self.factors

    def children(self):
        return self.factors

    def __str__(self):
        f = self.factors
        if isinstance(f[0], Num) and f[0].value == -1 and len(f) > 1:
            rest = Prod(f[1:]) if len(f) > 2 else f[1]
            return "-" + rest._wrap(3)
        return "*".join(x._wrap(3 if i else 2) for i, x in enumerate(f))

    def bar(self, swap):
        return mul(*(x.bar(swap) for x in self.factors))

    def subs(self, mapping):
        return mul(*(x.subs(mapping) for x in self.factors))

    def evaluate(self, env, order, vars_):
        acc = ESeries.const(1, vars_, None)
        for x in self.factors:
            acc = acc * x.evaluate(env, order, vars_)
        return acc.truncate(order)


@dataclass(frozen=True, eq=False)
class Div(Expr):
    num: Expr
    den: Expr
    prec = 2

    def key(self):
        return (self.num, self.den)

    def children(self):
        return (self.num, self.den)

    def is_polynomial(self):
        return False

    def __str__(self):
        return f"{self.num._wrap(2)}/{self.den._wrap(3)}"

    def bar(self, swap):
        return div(self.num.bar(swap), self.den.bar(swap))

    def subs(self, mapping):
        return div(self.num.subs(mapping), self.den.subs(mapping))

    def evaluate(self, env, order, vars_):
        return (self.num.evaluate(env, order, vars_) * self.den.evaluate(env, order, vars_).truncate(order).inverse()).truncate(order)


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    base: Expr
    k: int
    prec = 3

    def key(self):
        return (self.base, self.k)

    def children(self):
        return (self.base,)

    def is_polynomial(self):
        return self.k >= 0 and self.base.is_polynomial()

    def __str__(self):
        return f"{self.base._wrap(4)}^{self.k}" if self.k >= 0 else f"{self.base._wrap(4)}^({self.k})"

    def bar(self, swap):
        return power(self.base.bar(swap), self.k)

    def subs(self, mapping):
        return power(self.base.subs(mapping), self.k)

    def evaluate(self, env, order, vars_):
        return (self.base.evaluate(env, order, vars_).truncate(order) ** self.k).truncate(order)


FUNCTIONS = ("exp", "sqrt")


@dataclass(frozen=True, eq=False)
class Fn(Expr):
    name: str
    arg: Expr

    def key(self):
        return (self.name, self.arg)

    def children(self):
        return (self.arg,)

    def is_polynomial(self):
        return False

    def __str__(self):
        return f"{self.name}({self.arg})"

    def bar(self, swap):
        if self.name == "sqrt":
            # The branch is fixed by the base point value, which conjugation maps to the conjugate branch.
            return Fn("sqrt", self.arg.bar(swap))
        return Fn(self.name, self.arg.bar(swap))

    def subs(self, mapping):
        return Fn(self.name, self.arg.subs(mapping))

    def evaluate(self, env, order, vars_):
        a = self.arg.evaluate(env, order, vars_).truncate(order)
        return a.exp() if self.name == "exp" else a.sqrt()


@dataclass(frozen=True, eq=False)
class SeriesNode(Expr):
    """A precomputed series in the shifted coordinates around ``center``."""

    series: ESeries
    center: tuple

    def key(self):
        return (str(self.series), self.center)

    def is_polynomial(self):
        return False

    def __str__(self):
        return f"series[{self.series}]"

    def used_vars(self):
        return set(self.series.vars)

    def bar(self, swap):
        sw = {v: swap.get(v, conj_name(v)) for v in self.series.vars}
        return SeriesNode(self.series.bar(sw), tuple((sw[v], c.conj()) for v, c in self.center))

    def subs(self, mapping):
        raise ValueError("cannot substitute into a precomputed series")

    def evaluate(self, env, order, vars_):
        shifted = {}
        for v, c in self.center:
            x = env[v] - ESeries.const(c, vars_)
            if x.constant():
                raise ValueError("series evaluated away from its center")
            shifted[v] = x
        out = ESeries({}, vars_, _min_order(self.series.order, order))
        for c, p in self.series.groups.items():
            e = eval_poly(p, shifted, vars_, out.order)
            out = out + ESeries({c: Poly.const(1, vars_)}, vars_) * e
        return out.truncate(order)


def lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Poly):
        return from_poly(x)
    return Num(gr(x))


def add(*xs: Expr) -> Expr:
    terms = []
    const = ZERO
    for x in xs:
        for t in (x.terms if isinstance(x, Sum) else (x,)):
            if isinstance(t, Num):
                const = const + t.value
            else:
                terms.append(t)
    if const:
        terms.append(Num(const))
    if not terms:
        return Num(ZERO)
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def mul(*xs: Expr) -> Expr:
    const = ONE
    rest = []
    for x in xs:
        for f in (x.factors if isinstance(x, Prod) else (x,)):
            if isinstance(f, Num):
                const = const * f.value
            else:
                rest.append(f)
    if not const:
        return Num(ZERO)
    if not rest:
        return Num(const)
    if const != ONE:
        rest.insert(0, Num(const))
    return rest[0] if len(rest) == 1 else Prod(tuple(rest))


def neg(x: Expr) -> Expr:
    return mul(Num(-ONE), x)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Num):
        if not b.value:
            raise ZeroDivisionError("division by zero")
        return mul(a, Num(b.value.inverse()))
    return Div(a, b)


def power(x: Expr, k: int) -> Expr:
    if k == 0:
        return Num(ONE)
    if k == 1:
        return x
    if isinstance(x, Num):
        return Num(x.value ** k)
    return Pow(x, k)


def exp(x) -> Expr:
    return Fn("exp", lift(x))


def sqrt(x) -> Expr:
    return Fn("sqrt", lift(x))


def from_poly(p: Poly) -> Expr:
    terms = []
    for e, c in p.sorted_terms():
        fs = [Num(c)]
        for v, k in zip(p.vars, e):
            if k:
                fs.append(power(Var(v), k))
        terms.append(mul(*fs))
    return add(*terms) if terms else Num(ZERO)


def evaluate_at(x: Expr, point: Mapping[str, GaussianRational]) -> ESeries:
    """Exact value at a point (no series variables)."""
    env = {v: ESeries.const(c, ()) for v, c in point.items()}
    return x.evaluate(env, None, ())


# ---------------------------------------------------------------------------
# maps


@dataclass(frozen=True)
class MapSpec:
    source: tuple
    components: tuple
    basepoint: PointQ | None = None
    target: tuple = ()
    name: str = ""
    nonalgebraic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "components", tuple(lift(c) for c in self.components))
        if not self.target:
            names = self.source if len(self.source) == len(self.components) else tuple(f"Y{k + 1}" for k in range(len(self.components)))
            object.__setattr__(self, "target", names)
        if len(self.target) != len(self.components):
            raise ValueError("one target coordinate per component is required")

    @property
    def source_dim(self) -> int:
        return len(self.source)

    @property
    def target_dim(self) -> int:
        return len(self.components)

    def base(self) -> PointQ:
        return self.basepoint or PointQ((ZERO,) * self.source_dim)

    def image(self) -> list[dict]:
        """Value of each component at the base point, as {exp constant: coefficient}."""
        pt = dict(zip(self.source, self.base().coords))
        return [evaluate_at(c, pt).constant() for c in self.components]

    def compose(self, inner: "MapSpec") -> "MapSpec":
        """self o inner."""
        if inner.target_dim != self.source_dim:
            raise ValueError("dimension mismatch in composition")
        sub = dict(zip(self.source, inner.components))
        comps = tuple(c.subs(sub) for c in self.components)
        return MapSpec(inner.source, comps, inner.basepoint, self.target, f"{self.name}o{inner.name}", self.nonalgebraic or inner.nonalgebraic)

    def to_json(self) -> dict:
        return {
            "source": list(self.source),
            "target": list(self.target),
            "components": [str(c) for c in self.components],
            "basepoint": self.base().to_json(),
            "nonalgebraic": self.nonalgebraic,
        }


def identity_map(spec: ManifoldSpec) -> MapSpec:
    return MapSpec(spec.coords, tuple(Var(v) for v in spec.coords), spec.basepoint, spec.coords, "id")


def _as_spec(x) -> ManifoldSpec:
    return x.spec() if isinstance(x, NormalModel) else x


@dataclass(frozen=True)
class MapCheck:
    ok: bool
    order: int | None
    component: int | None = None
    monomial: str = ""
    degree: int | None = None
    group: str = ""

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "order": self.order,
            "component": self.component,
            "monomial": self.monomial,
            "degree": self.degree,
            "group": self.group,
        }


def graph_env(spec: ManifoldSpec, p: PointQ, order: int) -> tuple[dict, tuple, int | None]:
    """Values of all (Z, zeta) variables on the complexification near (p, conj p)."""
    try:
        g = local_graph(spec, p, order, candidates=tuple(reversed(spec.coords)), require_full=True)
    except PointError as e:
        if "deficient rank" not in str(e):
            raise
        # Not generic at p: some conjugate variables must be solved as well.
        g = local_graph(spec, p, order, require_full=True)
    o = None if g.exact else g.order
    env = {v: ESeries.of(g.subs[v].with_vars(g.free), o) for v in spec.allvars}
    return env, g.free, o


def first_bad(r: ESeries) -> tuple[str, int, str]:
    best = None
    for c, p in r.groups.items():
        for e, v in p.terms.items():
            key = (sum(e), e, c.re, c.im)
            if best is None or key < best[0]:
                best = (key, c, e, v)
    _, c, e, v = best
    mono = str(Poly._raw(r.vars, {e: v}))
    return mono, sum(e), ("" if not c else format_scalar(c))


def verify_map(H: MapSpec, src, tgt=None, order: int = 10) -> MapCheck:
    """rho'(H(Z), Hbar(zeta)) = 0 on the complexification of src, to total degree ``order``."""
    src = _as_spec(src)
    tgt = src if tgt is None else _as_spec(tgt)
    if H.source != src.coords:
        raise ValueError("map source coordinates differ from the manifold coordinates")
    if H.target_dim != tgt.N:
        raise ValueError("map target dimension differs from the target manifold")
    p = H.basepoint or src.basepoint or PointQ((ZERO,) * src.N)
    env, free, o = graph_env(src, p, order)
    K = _min_order(o, order)
    swap = src.swap()
    vals = {}
    for t, c in zip(tgt.coords, H.components):
        vals[t] = c.evaluate(env, K, free).truncate(K)
        vals[conj_name(t)] = c.bar(swap).evaluate(env, K, free).truncate(K)
    for j, rho in enumerate(tgt.rho):
        r = eval_poly(rho, vals, free, K)
        if not r.is_zero():
            mono, deg, grp = first_bad(r)
            return MapCheck(False, K, j + 1, mono, deg, grp)
    return MapCheck(True, K)


def map_rank(H: MapSpec, order: int = 8, rng: random.Random | None = None) -> int:
    """Generic rank of the Jacobian; a constant exp factor of a component does not change it."""
    base = dict(zip(H.source, H.base().coords))
    vars_ = H.source
    env = {v: ESeries.of(Poly.var(v, vars_) + base[v]) for v in vars_}
    comps = []
    for c in H.components:
        es = c.evaluate(env, order, vars_)
        _, p = es.single()
        comps.append(p if es.order is None else Series(p, es.order))
    return generic_rank(comps, vars_, rng=rng or random.Random(0))


# ---------------------------------------------------------------------------
# leaves h = c


@dataclass
class LeafSpec:
    h: tuple
    c: tuple
    center: PointQ
    coords: tuple
    solved: tuple
    free: tuple
    chart: dict
    order: int | None
    params: tuple = ()
    generic: bool | None = None
    slice_rows: tuple = ()

    def to_json(self) -> dict:
        return {
            "h": [str(x) for x in self.h],
            "c": [x.to_json() for x in self.c],
            "center": self.center.to_json(),
            "solved": list(self.solved),
            "free": list(self.free),
            "chart": {v: str(p) for v, p in self.chart.items()},
            "order": self.order,
            "generic": self.generic,
        }

    def slice_spec(self, name: str = "") -> ManifoldSpec:
        """M intersected with the leaf, in the free coordinates shifted to the center."""
        if not self.slice_rows:
            raise ValueError("no slice equations (center not on M or c not real)")
        return ManifoldSpec(len(self.free), self.slice_rows, self.free, name=name)


def leaf_chart(
    spec: ManifoldSpec,
    h: Sequence,
    c: Sequence,
    center: PointQ | None = None,
    order: int = 8,
    deviations: bool = False,
) -> LeafSpec:
    """Solve h(Z) = c (+ dc when ``deviations``) for q coordinates near the center.

    Chart variables are the remaining coordinates, shifted so the center is 0,
    plus the deviation parameters dc1..dcq.
    """
    h = tuple(lift(x) for x in h)
    c = tuple(gr(x) for x in c)
    q = len(h)
    center = center or spec.basepoint or PointQ((ZERO,) * spec.N)
    coords = spec.coords
    base = dict(zip(coords, center.coords))
    for x, cx in zip(h, c):
        val = evaluate_at(x, base)
        if val.groups != ESeries.const(cx, ()).groups:
            raise PointError(f"h = {x} does not take the value {format_scalar(cx)} at the center")
    env = {v: ESeries.of(Poly.var(v, coords) + base[v]) for v in coords}
    P = [x.evaluate(env, order, coords).plain() for x in h]
    lin = [[pi.coeff({v: 1}) for v in coords] for pi in P]
    rows, cols = choose_pivots(lin, [coords.index(v) for v in reversed(coords)])
    if len(rows) < q:
        raise ValueError("h not independent at center")
    solved = tuple(coords[i] for i in sorted(cols))
    free = tuple(v for v in coords if v not in solved)
    params = tuple(f"dc{k + 1}" for k in range(q))
    tmp = tuple(f"_s{k}" for k in range(len(solved)))
    ren = dict(zip(solved, tmp))
    F = [(pi - Poly.const(ci, coords)).rename(ren) for pi, ci in zip(P, c)]
    sol = _series_inverse(F, params, tmp, order, params=free)
    allv = free + params
    sol = [s.with_vars(allv) for s in sol]
    back = dict(zip(tmp, sol))
    exact = all(f.subs(back).with_vars(allv) == Poly.var(d, allv) for f, d in zip(F, params)) and all(
        x.is_polynomial() for x in h
    )
    chart = {}
    for v in coords:
        local = sol[solved.index(v)] if v in solved else Poly.var(v, allv)
        if not deviations:
            local = local.subs({d: 0 for d in params}).with_vars(free)
        chart[v] = local + base[v]
    leaf = LeafSpec(h, c, center, coords, solved, free, chart, None if exact else order, params if deviations else ())
    if all(x.is_real() for x in c) and all(not r.eval(spec.point_values(center)) for r in spec.rho):
        _certify_slice(spec, leaf, order)
    return leaf


def _certify_slice(spec: ManifoldSpec, leaf: LeafSpec, order: int):
    free = leaf.free
    cfree = tuple(conj_name(v) for v in free)
    allv = free + cfree
    ren = dict(zip(free, cfree))
    sub = {}
    for v in spec.coords:
        p = leaf.chart[v].subs({d: 0 for d in leaf.params}).with_vars(free)
        sub[v] = p.with_vars(allv)
        sub[conj_name(v)] = p.bar().rename(ren).with_vars(allv)
    restricted = [r.subs(sub, leaf.order).with_vars(allv) for r in spec.rho]
    zero = {v: ZERO for v in allv}
    full = [[r.diff(v).eval(zero) for v in allv] for r in restricted]
    hol = [[r.diff(v).eval(zero) for v in free] for r in restricted]
    rk = matrix_rank(full)
    rows, _ = choose_pivots(full, list(range(len(allv))))
    leaf.generic = rk == matrix_rank(hol)
    leaf.slice_rows = tuple(restricted[i] for i in sorted(rows))


# ---------------------------------------------------------------------------
# algebraic dependence


def _monomials(n: int, deg: int) -> list[tuple]:
    out = []
    for d in range(deg + 1):
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def _count_monomials(n: int, deg: int) -> int:
    return factorial(n + deg) // (factorial(n) * factorial(deg))


@dataclass(frozen=True)
class DependenceCertificate:
    P: Poly
    degrees: tuple
    residual_order: int
    exp_factor: GaussianRational = ZERO
    unknowns: int = 0
    equations: int = 0

    def to_json(self) -> dict:
        return {
            "P": str(self.P),
            "degrees": list(self.degrees),
            "residual_order": self.residual_order,
            "exp_factor": format_scalar(self.exp_factor),
            "unknowns": self.unknowns,
            "equations": self.equations,
        }


def _dependence_poly(f: Poly, names: tuple, nu: int, deg_u: int, deg_X: int, deg_v: int, order: int, xname: str):
    nv = len(names)
    u_mon = [e + (0,) * (nv - nu) for e in _monomials(nu, deg_u)]
    v_mon = [(0,) * nu + e for e in _monomials(nv - nu, deg_v)]
    basis = []
    for a in u_mon:
        for b in v_mon:
            basis.append(tuple(x + y for x, y in zip(a, b)))
    powers = [Poly.const(1, names)]
    for _ in range(deg_X):
        powers.append(powers[-1].mul(f, order))
    cols = []
    keys = []
    for k in range(deg_X + 1):
        for e in basis:
            col = Poly._raw(names, {e: ONE}).mul(powers[k], order)
            cols.append(col)
            keys.append((k, e))
    rows: dict = {}
    for j, col in enumerate(cols):
        for e, v in col.terms.items():
            rows.setdefault(e, {})[j] = v
    unknowns = len(cols)
    equations = _count_monomials(nv, order)
    if unknowns >= equations:
        return None, unknowns, equations
    kern = nullspace(list(rows.values()), unknowns)
    if not kern:
        return False, unknowns, equations
    vec = kern[0]
    allv = names + (xname,)
    terms = {}
    for j, v in vec.items():
        if v:
            k, e = keys[j]
            terms[e + (k,)] = v
    P = Poly(allv, terms)
    top = max(e[-1] for e in P.terms)
    lead = min((e for e in P.terms if e[-1] == top), key=lambda e: (sum(e), e))
    return P.scale(P.terms[lead].inverse()), unknowns, equations


def algebraic_dependence(
    f,
    u: Sequence[str],
    deg_u: int,
    deg_X: int,
    order: int,
    params: Sequence[str] = (),
    deg_v: int = 0,
    xname: str = "X",
) -> DependenceCertificate | None:
    """Least-degree P(u, X; v) with P(u, f) = 0 through total degree ``order``.

    Only overdetermined systems are searched (more coefficient equations than
    unknowns), since an underdetermined one always has a kernel.  ``None``
    means no relation at these bounds, which is a bounded negative claim.
    A single constant factor E(c) of f is divided out and reported.
    """
    u = tuple(u)
    params = tuple(params)
    names = u + params
    factor = ZERO
    if isinstance(f, ESeries):
        factor, p = f.single()
    elif isinstance(f, Series):
        p = f.base
        order = min(order, f.order)
    else:
        p = f
    extra = set(p.used_vars()) - set(names)
    if extra:
        raise ValueError(f"series uses variables outside u and parameters: {sorted(extra)}")
    p = p.with_vars(names).truncate(order)
    for dx in range(1, deg_X + 1):
        for du in range(deg_u + 1):
            P, unk, eqs = _dependence_poly(p, names, len(u), du, dx, deg_v, order, xname)
            if P is None or P is False:
                continue
            return DependenceCertificate(P, (du, dx), order, factor, unk, eqs)
    return None


# ---------------------------------------------------------------------------
# reflection vector fields on the complexification


@dataclass
class ReflectionFields:
    vars: tuple
    L: list
    Ltilde: list
    T: list
    V: list
    order: int | None

    def to_json(self) -> dict:
        return {
            "vars": list(self.vars),
            "L": [x.to_json() for x in self.L],
            "Ltilde": [x.to_json() for x in self.Ltilde],
            "T": [x.to_json() for x in self.T],
            "V": [x.to_json() for x in self.V],
            "order": self.order,
        }


def reflection_fields(m: NormalModel, check: bool = True) -> ReflectionFields:
    """L_j, Ltilde_j, T_j and V_j = Ltilde_j - sum_k Q_{k,z_j} T_k on the complexification.

    Coordinates are (z, w, chi, tau); the complexification is w = Q(z, chi, tau),
    equivalently tau = Qbar(chi, z, w).
    """
    allv = m.zs + m.ws + m.chis + m.taus
    Q = [q.with_vars(allv) for q in m.Q]
    Qb = [q.with_vars(allv) for q in m.Qbar()]
    zero = Poly.zero(allv)
    one = Poly.const(1, allv)
    idx = {v: i for i, v in enumerate(allv)}
    known = None if m.order is None else m.order - 1

    def field_(entries: dict, frame: str) -> VectorFieldSpec:
        c = [zero] * len(allv)
        for v, p in entries.items():
            c[idx[v]] = _trunc(p, known)
        return VectorFieldSpec(allv, tuple(c), frame)

    L, Lt, T, V = [], [], [], []
    for j, (zj, cj) in enumerate(zip(m.zs, m.chis)):
        L.append(field_({cj: one, **{t: q.diff(cj) for t, q in zip(m.taus, Qb)}}, f"L{j + 1}"))
        Lt.append(field_({zj: one, **{w: q.diff(zj) for w, q in zip(m.ws, Q)}}, f"Ltilde{j + 1}"))
        coeffs = {zj: one}
        for l, t in enumerate(m.taus):
            acc = zero
            for k, w in enumerate(m.ws):
                acc = acc - Q[k].diff(zj).mul(Qb[l].diff(w), known)
            coeffs[t] = acc
        V.append(field_(coeffs, f"V{j + 1}"))
    for j, wj in enumerate(m.ws):
        T.append(field_({wj: one, **{t: q.diff(wj) for t, q in zip(m.taus, Qb)}}, f"T{j + 1}"))
    out = ReflectionFields(allv, L, Lt, T, V, known)
    if check:
        for X in L + Lt + T + V:
            if not field_is_tangent(m, X, known):
                raise ValueError(f"field not tangent: {X.frame}")
    return out


def complexification_equations(m: NormalModel) -> list[Poly]:
    allv = m.zs + m.ws + m.chis + m.taus
    eqs = [Poly.var(t, allv) - q.with_vars(allv) for t, q in zip(m.taus, m.Qbar())]
    eqs += [Poly.var(w, allv) - q.with_vars(allv) for w, q in zip(m.ws, m.Q)]
    return eqs


def field_is_tangent(m: NormalModel, X: VectorFieldSpec, order: int | None) -> bool:
    allv = X.vars
    back = {t: q.with_vars(allv) for t, q in zip(m.taus, m.Qbar())}
    for rho in complexification_equations(m):
        r = X.apply(rho.with_vars(allv), order).subs(back, order).with_vars(allv)
        if not _trunc(r, order).is_zero():
            return False
    return True


@dataclass(frozen=True)
class ReflectionCheck:
    ok: bool
    ranks: tuple
    needed: int

    def __bool__(self):
        return self.ok


def reflection_step_check(
    m: NormalModel, H: MapSpec, count: int = 10, order: int = 8, rng: random.Random | None = None
) -> ReflectionCheck:
    """Rank of the matrix (L_j Hbar_l) on the complexification near 0 along random formal lines.

    Full rank n means the L-applied identity can be solved for the first
    derivatives, which is the first step of the reflection argument.
    """
    rng = rng or random.Random(0)
    allv = m.zs + m.ws + m.chis + m.taus
    if H.source != m.zs + m.ws:
        raise ValueError("map source must use the model coordinates")
    if any(H.base().coords):
        raise ValueError("the reflection check runs at the model origin")
    fields = reflection_fields(m, check=False)
    env = {v: ESeries.of(Poly.var(v, allv)) for v in allv}
    swap = m.swap()
    back = {t: q.with_vars(allv) for t, q in zip(m.taus, m.Qbar())}
    cols = []
    for comp in H.components:
        hb = comp.bar(swap).evaluate(env, order, allv).truncate(order)
        c, _ = hb.single()
        col = []
        for X in fields.L:
            acc = ESeries({}, allv, order)
            for v, coef in zip(X.vars, X.coeffs):
                if coef:
                    acc = acc + hb.diff(v) * ESeries.of(coef)
            acc = acc.subs(back, order - 1)
            cc, p = acc.single()
            if p and cc != c:
                raise ValueError("derivative left its exponential group")
            col.append(p)
        cols.append(col)
    ranks = []
    for _ in range(count):
        direction = {v: random_gaussian(rng, 1000) for v in allv}
        rows = [[formal_line_eval(cols[l][j], direction, order - 1) for l in range(len(cols))] for j in range(m.n)]
        ranks.append(series_matrix_rank(rows)[0] if rows else 0)
    return ReflectionCheck(all(r == m.n for r in ranks), tuple(ranks), m.n)
