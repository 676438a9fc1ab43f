"""Exact multivariate polynomial and rational-function arithmetic.

All coefficients are rationals (`fractions.Fraction`); no floating point
enters this module.  Monomials are ordered graded-lexicographically under
the ring's fixed variable order, and every canonical form has leading
coefficient one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import IdenticallySingularError, SemalgError

Monomial = tuple[int, ...]


@dataclass(frozen=True)
class Ring:
    """An ordered tuple of variable names."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise SemalgError("duplicate variable names in ring")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def variable(self, name: str) -> "Polynomial":
        return Polynomial.variable(self, self.index(name))


def _grlex_key(mono: Monomial) -> tuple[int, Monomial]:
    return (sum(mono), mono)


class Polynomial:
    """Immutable sparse polynomial with exact rational coefficients."""

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: Ring, terms: dict[Monomial, Fraction]):
        self.ring = ring
        self.terms = {m: c for m, c in terms.items() if c != 0}
        self._hash = None

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(ring: Ring) -> "Polynomial":
        return Polynomial(ring, {})

    @staticmethod
    def constant(ring: Ring, value) -> "Polynomial":
        c = Fraction(value)
        if c == 0:
            return Polynomial.zero(ring)
        return Polynomial(ring, {(0,) * len(ring): c})

    @staticmethod
    def variable(ring: Ring, index: int) -> "Polynomial":
        mono = [0] * len(ring)
        mono[index] = 1
        return Polynomial(ring, {tuple(mono): Fraction(1)})

    # -- predicates and accessors -------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        if self.is_zero:
            return -1
        return max(sum(m) for m in self.terms)

    def degree_in(self, var: int) -> int:
        if self.is_zero:
            return -1
        return max(m[var] for m in self.terms)

    def leading_monomial(self) -> Monomial:
        if self.is_zero:
            raise SemalgError("zero polynomial has no leading term")
        return max(self.terms, key=_grlex_key)

    def leading_coeff(self) -> Fraction:
        return self.terms[self.leading_monomial()]

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: _grlex_key(t[0]), reverse=True)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            out.update(i for i, e in enumerate(m) if e)
        return out

    # -- arithmetic ---------------------------------------------------------

    def _check_ring(self, other: "Polynomial"):
        if self.ring is not other.ring and self.ring != other.ring:
            raise SemalgError("mixed polynomial rings")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_ring(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            acc = terms.get(m)
            if acc is None:
                terms[m] = c
            else:
                acc = acc + c
                if acc == 0:
                    del terms[m]
                else:
                    terms[m] = acc
        return Polynomial(self.ring, terms)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check_ring(other)
        terms: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                acc = terms.get(m)
                if acc is None:
                    terms[m] = c1 * c2
                else:
                    acc = acc + c1 * c2
                    if acc == 0:
                        del terms[m]
                    else:
                        terms[m] = acc
        return Polynomial(self.ring, terms)

    __rmul__ = __mul__

    def scale(self, c) -> "Polynomial":
        c = Fraction(c)
        if c == 0:
            return Polynomial.zero(self.ring)
        return Polynomial(self.ring, {m: c * v for m, v in self.terms.items()})

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise SemalgError("negative polynomial power")
        out = Polynomial.constant(self.ring, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.ring == other.ring and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            items = tuple(sorted(self.terms.items()))
            self._hash = hash((self.ring.names, items))
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({to_string(self)!r})"

    # -- evaluation and substitution -----------------------------------------

    def evaluate(self, values: Sequence) -> Fraction:
        """Evaluate at a point; works for Fraction/int (exact) or float."""
        total = None
        for m, c in self.terms.items():
            prod = c
            for i, e in enumerate(m):
                if e:
                    prod = prod * values[i] ** e
            total = prod if total is None else total + prod
        if total is None:
            return Fraction(0)
        return total

    def substitute(self, ring: Ring, images: Sequence["Polynomial"]) -> "Polynomial":
        """Map each variable to a polynomial of ``ring`` and expand."""
        cache: dict[tuple[int, int], Polynomial] = {}

        def power(i: int, e: int) -> Polynomial:
            key = (i, e)
            if key not in cache:
                cache[key] = images[i] ** e
            return cache[key]

        out = Polynomial.zero(ring)
        for m, c in self.terms.items():
            prod = Polynomial.constant(ring, c)
            for i, e in enumerate(m):
                if e:
                    prod = prod * power(i, e)
            out = out + prod
        return out


# -- content, canonical form, division ----------------------------------------

def content(p: Polynomial) -> Fraction:
    """Positive rational c with p/c integer-coefficient and coprime."""
    if p.is_zero:
        return Fraction(0)
    num_gcd = 0
    den_lcm = 1
    for c in p.terms.values():
        num_gcd = math.gcd(num_gcd, abs(c.numerator))
        den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    return Fraction(num_gcd, den_lcm)


def primitive_part(p: Polynomial) -> Polynomial:
    if p.is_zero:
        return p
    return p.scale(1 / content(p))


def canonicalize(p: Polynomial) -> Polynomial:
    """Scale so the graded-lex leading coefficient is one."""
    if p.is_zero:
        raise SemalgError("cannot canonicalize the zero polynomial")
    return p.scale(1 / p.leading_coeff())


def exact_div(p: Polynomial, q: Polynomial) -> Polynomial | None:
    """Return p/q when q divides p exactly, else None."""
    if q.is_zero:
        raise SemalgError("division by zero polynomial")
    if p.is_zero:
        return p
    ring = p.ring
    lm_q = q.leading_monomial()
    lc_q = q.leading_coeff()
    quotient: dict[Monomial, Fraction] = {}
    rem = p
    while not rem.is_zero:
        lm_r = rem.leading_monomial()
        diff = tuple(a - b for a, b in zip(lm_r, lm_q))
        if any(d < 0 for d in diff):
            return None
        coeff = rem.terms[lm_r] / lc_q
        quotient[diff] = coeff
        t = Polynomial(ring, {diff: coeff})
        rem = rem - t * q
    return Polynomial(ring, quotient)


# -- multivariate gcd (primitive pseudo-remainder sequence) -------------------

def _pos_normal(p: Polynomial) -> Polynomial:
    """Integer-primitive scaling with positive leading coefficient."""
    if p.is_zero:
        return p
    c = content(p)
    if p.leading_coeff() < 0:
        c = -c
    return p.scale(1 / c)


def _coeffs_in(p: Polynomial, var: int) -> dict[int, Polynomial]:
    out: dict[int, dict[Monomial, Fraction]] = {}
    for m, c in p.terms.items():
        e = m[var]
        stripped = m[:var] + (0,) + m[var + 1:]
        out.setdefault(e, {})[stripped] = c
    return {e: Polynomial(p.ring, terms) for e, terms in out.items()}


def _content_in(p: Polynomial, var: int) -> Polynomial:
    coeffs = list(_coeffs_in(p, var).values())
    g = Polynomial.zero(p.ring)
    for c in coeffs:
        g = gcd(g, c)
        if not g.is_zero and g.total_degree() == 0:
            # Coefficients are coprime as polynomials; only the rational
            # content remains, which suffices for primitive-part division.
            return Polynomial.constant(p.ring, content(p))
    return g


def _shift(p: Polynomial, var: int, e: int) -> Polynomial:
    """Multiply by var**e."""
    terms = {}
    for m, c in p.terms.items():
        m2 = list(m)
        m2[var] += e
        terms[tuple(m2)] = c
    return Polynomial(p.ring, terms)


def _prem(f: Polynomial, g: Polynomial, var: int) -> Polynomial:
    """Pseudo-remainder of f by g in the main variable."""
    dg = g.degree_in(var)
    lc_g = _coeffs_in(g, var)[dg]
    r = f
    while not r.is_zero and r.degree_in(var) >= dg:
        dr = r.degree_in(var)
        lc_r = _coeffs_in(r, var)[dr]
        r = lc_g * r - _shift(lc_r, var, dr - dg) * g
    return r


def _monomial_content(p: Polynomial) -> Monomial:
    mins = None
    for m in p.terms:
        mins = m if mins is None else tuple(map(min, mins, m))
    return mins if mins is not None else (0,) * len(p.ring)


def _divide_monomial(p: Polynomial, mono: Monomial) -> Polynomial:
    if not any(mono):
        return p
    return Polynomial(
        p.ring,
        {tuple(a - b for a, b in zip(m, mono)): c for m, c in p.terms.items()},
    )


def gcd(p: Polynomial, q: Polynomial) -> Polynomial:
    """GCD, normalized integer-primitive with positive leading coefficient."""
    if p.is_zero:
        return _pos_normal(q)
    if q.is_zero:
        return _pos_normal(p)
    # Strip the common monomial factor first; it keeps the remainder
    # sequences small and settles the frequent pure-monomial cases.
    mp = _monomial_content(p)
    mq = _monomial_content(q)
    common = tuple(map(min, mp, mq))
    if any(mp) or any(mq):
        p = _divide_monomial(p, mp)
        q = _divide_monomial(q, mq)
    pvars = p.variables() | q.variables()
    if not pvars:
        return _shift_mono(Polynomial.constant(p.ring, 1), common)
    if len(p.terms) == 1 or len(q.terms) == 1:
        # One side is now a pure constant-coefficient monomial stripped to a
        # constant, handled above; a single-term poly shares only monomial
        # factors, already extracted.
        return _shift_mono(Polynomial.constant(p.ring, 1), common)
    if p == q:
        return _shift_mono(_pos_normal(p), common)
    d1 = exact_div(p, q)
    if d1 is not None:
        return _shift_mono(_pos_normal(q), common)
    d2 = exact_div(q, p)
    if d2 is not None:
        return _shift_mono(_pos_normal(p), common)
    # Main variable: smallest maximum degree keeps pseudo-division short.
    var = min(pvars, key=lambda v: (max(p.degree_in(v), q.degree_in(v)), v))
    cp = _content_in(p, var)
    cq = _content_in(q, var)
    c = gcd(cp, cq)
    f = exact_div(p, cp)
    g = exact_div(q, cq)
    if f is None or g is None:
        raise SemalgError("content division failed")  # pragma: no cover
    if f.degree_in(var) < g.degree_in(var):
        f, g = g, f
    while True:
        if g.is_zero:
            h = f
            break
        if g.degree_in(var) == 0:
            h = Polynomial.constant(p.ring, 1)
            break
        r = _prem(f, g, var)
        f = g
        if r.is_zero:
            g = r
        else:
            cr = _content_in(r, var)
            g = exact_div(r, cr)
    return _shift_mono(_pos_normal(c * h), common)


def _shift_mono(p: Polynomial, mono: Monomial) -> Polynomial:
    if not any(mono):
        return p
    return Polynomial(
        p.ring,
        {tuple(a + b for a, b in zip(m, mono)): c for m, c in p.terms.items()},
    )


# -- rational functions --------------------------------------------------------

def _reduce_fraction(
    num: Polynomial, den: Polynomial, term_limit: int, degree_limit: int
) -> tuple[Polynomial, Polynomial]:
    """Cancel common factors of a nonzero fraction.

    Tries cheap routes first (common monomial, whole-denominator factors);
    falls back to the full gcd when both operands are small enough for the
    pseudo-remainder sequence to be safe.
    """
    if den.total_degree() == 0:
        return num, den
    mn = _monomial_content(num)
    md = _monomial_content(den)
    common = tuple(map(min, mn, md))
    if any(common):
        num = _divide_monomial(num, common)
        den = _divide_monomial(den, common)
        if den.total_degree() == 0:
            return num, den
    q = exact_div(num, den)
    if q is not None:
        return q, Polynomial.constant(num.ring, 1)
    if (
        max(len(num.terms), len(den.terms)) <= term_limit
        and max(num.total_degree(), den.total_degree()) <= degree_limit
        and len(num.variables() | den.variables()) <= 8
    ):
        g = gcd(num, den)
        if g.total_degree() > 0:
            num_r = exact_div(num, g)
            den_r = exact_div(den, g)
            if num_r is None or den_r is None:  # pragma: no cover
                raise SemalgError("gcd reduction failed")
            num, den = num_r, den_r
    return num, den


def reduce_by_factors(num: Polynomial, factors: Sequence[Polynomial]) -> tuple[Polynomial, list[Polynomial]]:
    """Divide out each denominator factor from ``num`` as often as possible.

    Returns the reduced numerator and the list of factors that remain in
    the denominator.  Used by the recovery pipeline, where denominators are
    always known in factored form.
    """
    remaining: list[Polynomial] = []
    for f in factors:
        if f.total_degree() == 0:
            continue
        q = exact_div(num, f)
        if q is not None:
            num = q
        else:
            remaining.append(f)
    return num, remaining

class RationalFunction:
    """Quotient of two polynomials, kept in lowest terms.

    Normalization: the common factor of numerator and denominator is
    removed, the denominator is integer-primitive, and its leading
    coefficient is positive.  Full gcd reduction is skipped for very large
    operands (where the pseudo-remainder sequence would be prohibitively
    slow); monomial and whole-factor cancellation always run, which covers
    everything the recovery pipeline produces.
    """

    __slots__ = ("num", "den")

    _GCD_TERM_LIMIT = 80
    _GCD_DEGREE_LIMIT = 10

    def __init__(self, num: Polynomial, den: Polynomial | None = None, *, _normalized=False):
        if den is None:
            den = Polynomial.constant(num.ring, 1)
        if den.is_zero:
            raise SemalgError("zero denominator")
        if not _normalized:
            if num.is_zero:
                den = Polynomial.constant(num.ring, 1)
            else:
                num, den = _reduce_fraction(
                    num, den, self._GCD_TERM_LIMIT, self._GCD_DEGREE_LIMIT
                )
                c = content(den)
                if den.leading_coeff() < 0:
                    c = -c
                num = num.scale(1 / c)
                den = den.scale(1 / c)
        self.num = num
        self.den = den

    @staticmethod
    def from_poly(p: Polynomial) -> "RationalFunction":
        return RationalFunction(p, Polynomial.constant(p.ring, 1), _normalized=True)

    @staticmethod
    def constant(ring: Ring, value) -> "RationalFunction":
        return RationalFunction.from_poly(Polynomial.constant(ring, value))

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def __add__(self, other: "RationalFunction") -> "RationalFunction":
        if self.den == other.den:
            return RationalFunction(self.num + other.num, self.den)
        return RationalFunction(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den, _normalized=True)

    def __sub__(self, other: "RationalFunction") -> "RationalFunction":
        return self + (-other)

    def __mul__(self, other: "RationalFunction") -> "RationalFunction":
        return RationalFunction(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "RationalFunction") -> "RationalFunction":
        if other.is_zero:
            raise SemalgError("division by zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.num * other.den == other.num * self.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def evaluate(self, values: Sequence):
        den = self.den.evaluate(values)
        if den == 0:
            raise ZeroDivisionError("rational function pole")
        return self.num.evaluate(values) / den

    def __repr__(self) -> str:
        return f"RationalFunction({to_string(self.num)!r}, {to_string(self.den)!r})"


# -- fraction-free linear algebra ----------------------------------------------

def bareiss_det(rows: list[list[Polynomial]]) -> Polynomial:
    """Determinant of a square polynomial matrix, fraction-free."""
    k = len(rows)
    if k == 0:
        raise SemalgError("empty matrix")
    ring = rows[0][0].ring
    if k == 1:
        return rows[0][0]
    m = [list(r) for r in rows]
    sign = 1
    prev = Polynomial.constant(ring, 1)
    for step in range(k - 1):
        if m[step][step].is_zero:
            swap = next(
                (i for i in range(step + 1, k) if not m[i][step].is_zero), None
            )
            if swap is None:
                return Polynomial.zero(ring)
            m[step], m[swap] = m[swap], m[step]
            sign = -sign
        piv = m[step][step]
        for i in range(step + 1, k):
            for j in range(step + 1, k):
                num = m[i][j] * piv - m[i][step] * m[step][j]
                q = exact_div(num, prev)
                if q is None:  # pragma: no cover
                    raise SemalgError("Bareiss division failure")
                m[i][j] = q
            m[i][step] = Polynomial.zero(ring)
        prev = piv
    det = m[k - 1][k - 1]
    return det if sign == 1 else -det


def solve_symbolic(
    a: list[list[RationalFunction]], b: list[RationalFunction]
) -> list[RationalFunction]:
    """Exact solution of A x = b over the rational-function field.

    Rows are cleared to polynomials, then Cramer determinants are computed
    fraction-free.  Raises ``IdenticallySingularError`` when det A is the
    zero polynomial.
    """
    k = len(a)
    if k == 0:
        return []
    if any(len(row) != k for row in a) or len(b) != k:
        raise SemalgError("solve_symbolic needs a square system")
    ring = b[0].num.ring
    cleared_a: list[list[Polynomial]] = []
    cleared_b: list[Polynomial] = []
    for i in range(k):
        dens: list[Polynomial] = []
        for entry in [*a[i], b[i]]:
            if entry.den.total_degree() > 0 or entry.den.leading_coeff() != 1:
                if not any(entry.den == d for d in dens):
                    dens.append(entry.den)
        mult = Polynomial.constant(ring, 1)
        for d in dens:
            mult = mult * d
        row = []
        for entry in [*a[i], b[i]]:
            scale = exact_div(mult, entry.den)
            if scale is None:  # pragma: no cover
                raise SemalgError("row clearing failed")
            row.append(entry.num * scale)
        cleared_a.append(row[:-1])
        cleared_b.append(row[-1])
    det = bareiss_det(cleared_a)
    if det.is_zero:
        raise IdenticallySingularError("system matrix has zero determinant")
    out = []
    for j in range(k):
        mat_j = [
            [cleared_b[i] if jj == j else cleared_a[i][jj] for jj in range(k)]
            for i in range(k)
        ]
        out.append(RationalFunction(bareiss_det(mat_j), det))
    return out


# -- serialization ---------------------------------------------------------------

def to_string(p: Polynomial) -> str:
    """Serialize: terms in descending graded-lex order, ``coef*var*var`` each.

    Powers are written as repeated factors; coefficients are exact
    (``p/q``).  The zero polynomial serializes as ``0``.
    """
    if p.is_zero:
        return "0"
    parts = []
    for mono, coeff in p.sorted_terms():
        factors = [str(coeff)]
        for i, e in enumerate(mono):
            factors.extend([p.ring.names[i]] * e)
        parts.append("*".join(factors))
    return " + ".join(parts)


def from_string(ring: Ring, text: str) -> Polynomial:
    text = text.strip()
    if text == "0":
        return Polynomial.zero(ring)
    total = Polynomial.zero(ring)
    for term in text.split("+"):
        factors = [f.strip() for f in term.strip().split("*")]
        try:
            coeff = Fraction(factors[0])
        except ValueError as exc:
            raise SemalgError(f"bad coefficient in term {term!r}") from exc
        mono = [0] * len(ring)
        for name in factors[1:]:
            try:
                mono[ring.index(name)] += 1
            except ValueError as exc:
                raise SemalgError(f"unknown variable {name!r}") from exc
        total = total + Polynomial(ring, {tuple(mono): coeff})
    return total
