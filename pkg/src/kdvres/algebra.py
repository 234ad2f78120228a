"""Sparse graded polynomials over exact rationals.

Everything downstream (differential polynomials in u and its derivatives,
polynomials in the flow symbols d1, d3, ..., bosonic polynomials in J or
in the S-bar variables) is a GradedPoly over some generator catalog.
Coefficients are fractions.Fraction throughout; no floats anywhere.
"""

from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class CatalogMismatchError(ValueError):
    """Raised when combining polynomials over different generator catalogs."""


class Catalog:
    """A family of graded generators, identified by integer ids.

    The grade and print label of a generator are functions of its id, so a
    catalog covers infinitely many generators (u^(i) for every i, d_n for
    every odd n) without preallocation.
    """

    def __init__(self, name, grade_fn, label_fn):
        self.name = name
        self._grade_fn = grade_fn
        self._label_fn = label_fn

    def grade(self, gid):
        return self._grade_fn(gid)

    def label(self, gid):
        return self._label_fn(gid)

    def __eq__(self, other):
        return isinstance(other, Catalog) and other.name == self.name

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"Catalog({self.name!r})"

    def poly(self, terms=None):
        return GradedPoly(self, terms or {})

    def zero(self):
        return GradedPoly(self, {})

    def one(self):
        return GradedPoly(self, {(): ONE})

    def const(self, c):
        c = Fraction(c)
        return GradedPoly(self, {(): c} if c else {})

    def gen(self, gid, exp=1, coeff=ONE):
        coeff = Fraction(coeff)
        if coeff == 0:
            return self.zero()
        return GradedPoly(self, {((gid, exp),): coeff})


def _u_label(i):
    if i == 0:
        return "u"
    if i <= 3:
        return "u" + "'" * i
    return f"u^({i})"


# The three catalogs the engine lives on.  Grades: deg u^(i) = i + 2,
# deg d_n = n (n odd), deg J_{2k} = deg Sbar_{2k} = 2k.
U_CAT = Catalog("u", lambda i: i + 2, _u_label)
D_CAT = Catalog("d", lambda n: n, lambda n: f"d{n}")
J_CAT = Catalog("J", lambda k: k, lambda k: f"J{k}")
SBAR_CAT = Catalog("Sbar", lambda k: k, lambda k: f"S{k}")


def mono_mul(m1, m2):
    """Multiply two monomials given as sorted ((gid, exp), ...) tuples."""
    if not m1:
        return m2
    if not m2:
        return m1
    exps = dict(m1)
    for gid, e in m2:
        exps[gid] = exps.get(gid, 0) + e
    return tuple(sorted(exps.items()))


def mono_degree(mono, catalog):
    return sum(catalog.grade(gid) * e for gid, e in mono)


def mono_key(mono, catalog):
    """Canonical ordering key: total degree, then lex on the flattened
    generator-id sequence (each id repeated by its exponent)."""
    flat = tuple(gid for gid, e in mono for _ in range(e))
    return (mono_degree(mono, catalog), flat)


class GradedPoly:
    """Sparse polynomial: dict from monomial tuple to nonzero Fraction."""

    __slots__ = ("catalog", "terms")

    def __init__(self, catalog, terms):
        self.catalog = catalog
        self.terms = {m: c for m, c in terms.items() if c != 0}

    # -- ring operations -------------------------------------------------

    def _check(self, other):
        if self.catalog != other.catalog:
            raise CatalogMismatchError(
                f"catalog mismatch: {self.catalog.name} vs {other.catalog.name}")

    def __add__(self, other):
        self._check(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m, ZERO) + c
            if s:
                terms[m] = s
            else:
                terms.pop(m, None)
        return GradedPoly(self.catalog, terms)

    def __neg__(self):
        return GradedPoly(self.catalog, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check(other)
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                s = terms.get(m, ZERO) + c1 * c2
                if s:
                    terms[m] = s
                else:
                    terms.pop(m, None)
        return GradedPoly(self.catalog, terms)

    __rmul__ = __mul__

    def scale(self, c):
        c = Fraction(c)
        if c == 0:
            return self.catalog.zero()
        return GradedPoly(self.catalog, {m: c * v for m, v in self.terms.items()})

    def pow(self, n):
        result = self.catalog.one()
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        return (isinstance(other, GradedPoly) and other.catalog == self.catalog
                and other.terms == self.terms)

    def __hash__(self):
        return hash((self.catalog, tuple(sorted(self.terms.items()))))

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    # -- grading ---------------------------------------------------------

    def grade_component(self, d):
        cat = self.catalog
        return GradedPoly(cat, {m: c for m, c in self.terms.items()
                                if mono_degree(m, cat) == d})

    def degrees(self):
        cat = self.catalog
        return sorted({mono_degree(m, cat) for m in self.terms})

    def is_homogeneous(self, d=None):
        degs = self.degrees()
        if not degs:
            return True
        if len(degs) > 1:
            return False
        return d is None or degs[0] == d

    def degree(self):
        """Top degree; -1 for the zero polynomial."""
        degs = self.degrees()
        return degs[-1] if degs else -1

    def constant_term(self):
        return self.terms.get((), ZERO)

    # -- calculus helpers ------------------------------------------------

    def partial(self, gid):
        """Formal partial derivative with respect to one generator."""
        terms = {}
        for m, c in self.terms.items():
            exps = dict(m)
            e = exps.get(gid, 0)
            if not e:
                continue
            if e == 1:
                del exps[gid]
            else:
                exps[gid] = e - 1
            m2 = tuple(sorted(exps.items()))
            s = terms.get(m2, ZERO) + c * e
            if s:
                terms[m2] = s
            else:
                terms.pop(m2, None)
        return GradedPoly(self.catalog, terms)

    def gens_used(self):
        return sorted({gid for m in self.terms for gid, _ in m})

    def substitute(self, image_fn, target_catalog):
        """Ring map sending generator gid to image_fn(gid) (a GradedPoly over
        target_catalog); coefficients map through unchanged."""
        out = target_catalog.zero()
        cache = {}
        for m, c in self.sorted_terms():
            factor = target_catalog.const(c)
            for gid, e in m:
                if gid not in cache:
                    cache[gid] = image_fn(gid)
                img = cache[gid]
                for _ in range(e):
                    factor = factor * img
            out = out + factor
        return out

    # -- canonical form --------------------------------------------------

    def sorted_terms(self):
        cat = self.catalog
        return sorted(self.terms.items(), key=lambda mc: mono_key(mc[0], cat))

    def __repr__(self):
        return f"GradedPoly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            factors = []
            for gid, e in m:
                lab = self.catalog.label(gid)
                factors.append(lab if e == 1 else f"{lab}^{e}")
            body = "*".join(factors)
            coeff = frac_str(c) if c.denominator != 1 else str(c.numerator)
            if body:
                if c == 1:
                    text = body
                elif c == -1:
                    text = f"-{body}"
                else:
                    text = f"{coeff}*{body}"
            else:
                text = coeff
            if parts and not text.startswith("-"):
                parts.append("+ " + text)
            elif parts:
                parts.append("- " + text[1:])
            else:
                parts.append(text)
        return " ".join(parts)

    # -- serialization ---------------------------------------------------

    def to_json(self):
        return [{"monomial": [[gid, e] for gid, e in m], "coeff": frac_str(c)}
                for m, c in self.sorted_terms()]

    @classmethod
    def from_json(cls, data, catalog):
        terms = {}
        for entry in data:
            m = tuple(sorted((int(g), int(e)) for g, e in entry["monomial"]))
            terms[m] = parse_frac(entry["coeff"])
        return cls(catalog, terms)


def frac_str(q):
    """Canonical decimal-free serialization of a rational."""
    return f"{q.numerator}/{q.denominator}"


def parse_frac(s):
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    return Fraction(int(s))


def poly_add_mul(a, b, op):
    """Contracted arithmetic entry point: op in {'add', 'mul'}."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")
