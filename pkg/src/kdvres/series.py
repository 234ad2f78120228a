"""Truncated multivariate series with exact rational coefficients.

One engine covers every series shape the tau-function laboratory needs:

* "deg" generators (the odd times t1, t3, ...) share a total-degree cap,
* "pow" generators (the exponential-lattice variable of a soliton) have an
  individual power cap,
* "laurent" generators (the formal z and w) keep exponents inside a window
  [lo, hi], which may reach below zero.

All arithmetic closes within the stated truncation; dropped exponents are
exactly the ones outside the declared windows, never silent interior loss.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

_MAX_NILPOTENT_ITER = 10000


class SeriesRing:
    def __init__(self, deg_gens=(), deg_cap=0, pow_gens=(), laurent_gens=()):
        """pow_gens: iterable of (name, cap); laurent_gens: (name, lo, hi)."""
        self.names = []
        self.kinds = []
        self.params = []
        for name in deg_gens:
            self.names.append(name)
            self.kinds.append("deg")
            self.params.append(None)
        for name, cap in pow_gens:
            self.names.append(name)
            self.kinds.append("pow")
            self.params.append(cap)
        for name, lo, hi in laurent_gens:
            if lo > 0 or hi < 0:
                raise ValueError("laurent window must contain exponent 0")
            self.names.append(name)
            self.kinds.append("laurent")
            self.params.append((lo, hi))
        self.deg_cap = deg_cap
        self.index = {n: i for i, n in enumerate(self.names)}
        self.nvars = len(self.names)
        self._deg_slots = [i for i, k in enumerate(self.kinds) if k == "deg"]

    def keep(self, exps):
        total = 0
        for i, e in enumerate(exps):
            kind = self.kinds[i]
            if kind == "deg":
                if e < 0:
                    return False
                total += e
            elif kind == "pow":
                if e < 0 or e > self.params[i]:
                    return False
            else:
                lo, hi = self.params[i]
                if e < lo or e > hi:
                    return False
        return total <= self.deg_cap

    def zero(self):
        return Series(self, {})

    def one(self):
        return self.const(1)

    def const(self, c):
        c = Fraction(c)
        if c == 0:
            return Series(self, {})
        return Series(self, {(0,) * self.nvars: c})

    def gen(self, name, power=1, coeff=1):
        exps = [0] * self.nvars
        exps[self.index[name]] = power
        exps = tuple(exps)
        if not self.keep(exps):
            return self.zero()
        coeff = Fraction(coeff)
        return Series(self, {exps: coeff} if coeff else {})

    def series(self, terms):
        return Series(self, {e: Fraction(c) for e, c in terms.items()
                             if c != 0 and self.keep(e)})

    def __eq__(self, other):
        return (isinstance(other, SeriesRing) and other.names == self.names
                and other.kinds == self.kinds and other.params == self.params
                and other.deg_cap == self.deg_cap)

    def __hash__(self):
        return hash((tuple(self.names), tuple(self.kinds), self.deg_cap))


class Series:
    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms):
        self.ring = ring
        self.terms = terms

    def __add__(self, other):
        terms = dict(self.terms)
        for e, c in other.terms.items():
            s = terms.get(e, 0) + c
            if s:
                terms[e] = s
            else:
                terms.pop(e, None)
        return Series(self.ring, terms)

    def __neg__(self):
        return Series(self.ring, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        ring = self.ring
        keep = ring.keep
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        terms = {}
        for e1, c1 in a.items():
            for e2, c2 in b.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                if not keep(e):
                    continue
                s = terms.get(e, 0) + c1 * c2
                if s:
                    terms[e] = s
                else:
                    del terms[e]
        return Series(ring, terms)

    __rmul__ = __mul__

    def scale(self, c):
        c = Fraction(c)
        if c == 0:
            return self.ring.zero()
        return Series(self.ring, {e: c * v for e, v in self.terms.items()})

    def pow_int(self, n):
        out = self.ring.one()
        for _ in range(n):
            out = out * self
        return out

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, Series) and self.terms == other.terms

    def constant_term(self):
        return self.terms.get((0,) * self.ring.nvars, Fraction(0))

    # -- per-generator structure ------------------------------------------

    def partial(self, name):
        """Formal derivative with respect to a deg/pow generator."""
        i = self.ring.index[name]
        terms = {}
        for e, c in self.terms.items():
            k = e[i]
            if not k:
                continue
            e2 = e[:i] + (k - 1,) + e[i + 1:]
            terms[e2] = terms.get(e2, 0) + c * k
        return Series(self.ring, {e: c for e, c in terms.items() if c})

    def mul_gen(self, name, power):
        i = self.ring.index[name]
        keep = self.ring.keep
        terms = {}
        for e, c in self.terms.items():
            e2 = e[:i] + (e[i] + power,) + e[i + 1:]
            if keep(e2):
                terms[e2] = c
        return Series(self.ring, terms)

    def coefficient(self, name, power):
        """Series of terms whose exponent in `name` equals power, with that
        exponent reset to 0."""
        i = self.ring.index[name]
        terms = {}
        for e, c in self.terms.items():
            if e[i] == power:
                terms[e[:i] + (0,) + e[i + 1:]] = c
        return Series(self.ring, terms)

    def exponents_of(self, name):
        i = self.ring.index[name]
        return sorted({e[i] for e in self.terms})

    def scale_gen_action(self, name, op):
        """Apply x*d/dx-type weighting: term with exponent r gets op(r)."""
        i = self.ring.index[name]
        terms = {}
        for e, c in self.terms.items():
            w = op(e[i])
            if w:
                terms[e] = c * w
        return Series(self.ring, terms)

    # -- substitutions -----------------------------------------------------

    def shift_gen(self, name, zname, coeff, zpow):
        """Exact substitution gen -> gen + coeff * z^zpow (binomial expansion).

        Exact for polynomial dependence on `name`; terms leaving the z window
        are the only ones dropped.
        """
        i = self.ring.index[name]
        zi = self.ring.index[zname]
        keep = self.ring.keep
        coeff = Fraction(coeff)
        terms = {}
        for e, c in self.terms.items():
            n = e[i]
            for r in range(n + 1):
                e2 = list(e)
                e2[i] = n - r
                e2[zi] = e[zi] + zpow * r
                e2 = tuple(e2)
                if not keep(e2):
                    continue
                v = c * comb(n, r) * coeff ** r
                s = terms.get(e2, 0) + v
                if s:
                    terms[e2] = s
                else:
                    terms.pop(e2, None)
        return Series(self.ring, terms)

    def twist_pow_gen(self, name, factor):
        """Substitution gen^r -> gen^r * factor^r for a pow generator."""
        i = self.ring.index[name]
        powers = {0: self.ring.one()}
        out = self.ring.zero()
        for e, c in sorted(self.terms.items()):
            r = e[i]
            if r not in powers:
                rmax = max(powers)
                for k in range(rmax + 1, r + 1):
                    powers[k] = powers[k - 1] * factor
            out = out + powers[r] * Series(self.ring, {e: c})
        return out

    # -- analytic helpers (truncation-exact) -------------------------------

    def _capped(self, deg_cap):
        if deg_cap is None:
            return self
        return self.restricted(deg_cap=deg_cap)

    def _nilpotent_powers(self, deg_cap=None):
        """Yield g, g^2, g^3, ... until the truncated power vanishes.

        deg_cap tightens the shared total-degree truncation for the powers
        alone, for callers that only need the result below that degree.
        """
        if self.constant_term() != 0:
            raise ValueError("series has a constant term; not nilpotent")
        power = base = self._capped(deg_cap)
        count = 0
        while not power.is_zero():
            yield power
            power = (power * base)._capped(deg_cap)
            count += 1
            if count > _MAX_NILPOTENT_ITER:
                raise RuntimeError("series power iteration did not terminate")

    def exp_nilpotent(self, deg_cap=None):
        out = self.ring.one()
        r = 1
        fact = Fraction(1)
        for p in self._nilpotent_powers(deg_cap):
            fact /= r
            out = out + p.scale(fact)
            r += 1
        return out

    def log_unit(self, deg_cap=None):
        c0 = self.constant_term()
        if c0 != 1:
            raise ValueError("log requires constant term exactly 1")
        g = self - self.ring.one()
        out = self.ring.zero()
        r = 1
        for p in g._nilpotent_powers(deg_cap):
            out = out + p.scale(Fraction((-1) ** (r + 1), r))
            r += 1
        return out

    def inv_unit(self, deg_cap=None):
        c0 = self.constant_term()
        if c0 == 0:
            raise ZeroDivisionError("series has no invertible constant term")
        g = self.scale(Fraction(1) / c0) - self.ring.one()
        out = self.ring.one()
        sign = -1
        for p in g._nilpotent_powers(deg_cap):
            out = out + p.scale(Fraction(sign))
            sign = -sign
        return out.scale(Fraction(1) / c0)

    def mul_cap(self, other, deg_cap):
        """Product with the shared total-degree truncation tightened."""
        if deg_cap is None:
            return self * other
        return (self._capped(deg_cap) * other._capped(deg_cap))._capped(deg_cap)

    def mul_sliced(self, other, name, deg_cap=None):
        """Product of two series supported on nonpositive powers of `name`,
        computed slice by slice along it; equivalent to * but much cheaper
        for deep Laurent windows, and optionally degree-capped."""
        a = self._slices(name)
        b = other._slices(name)
        depth = self._slice_depth(name)
        acc = {}
        for k1, s1 in a.items():
            for k2, s2 in b.items():
                if k1 + k2 > depth:
                    continue
                p = (s1 * s2)._capped(deg_cap)
                if k1 + k2 in acc:
                    acc[k1 + k2] = acc[k1 + k2] + p
                else:
                    acc[k1 + k2] = p
        out = self.ring.zero()
        for k, s in acc.items():
            out = out + s.mul_gen(name, -k)
        return out

    # -- graded log/inverse along one Laurent variable ------------------------
    #
    # For series supported on nonpositive powers of a formal variable the
    # coefficient recursions below replace the power iteration; they cut the
    # cost from products of full mixed series to products of the (much
    # smaller) per-power slices.

    def _slices(self, name):
        i = self.ring.index[name]
        slices = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                raise ValueError(f"series has positive {name}-powers")
            slices.setdefault(-e[i], {})[e[:i] + (0,) + e[i + 1:]] = c
        return {k: Series(self.ring, t) for k, t in slices.items()}

    def _slice_depth(self, name):
        lo, _hi = self.ring.params[self.ring.index[name]]
        return -lo

    def log_unit_along(self, name, deg_cap=None):
        """log of a series in nonpositive powers of `name`, by the graded
        recursion k L_k = k c_k/c_0 - sum_{j<k} (j/k) L_j c_{k-j}/c_0."""
        c = self._slices(name)
        if not c:
            raise ValueError("log of the zero series")
        depth = self._slice_depth(name)
        inv0 = c[0].inv_unit(deg_cap)
        L = {0: c[0].log_unit(deg_cap)}
        zero = self.ring.zero()
        for k in range(1, depth + 1):
            acc = c.get(k, zero)
            for j in range(1, k):
                if (k - j) in c:
                    acc = acc - (L[j] * c[k - j]).scale(Fraction(j, k))
            L[k] = (acc * inv0)._capped(deg_cap)
        out = self.ring.zero()
        for k, s in L.items():
            out = out + s.mul_gen(name, -k)
        return out

    def inv_unit_along(self, name, deg_cap=None):
        """Inverse of a series in nonpositive powers of `name`."""
        c = self._slices(name)
        depth = self._slice_depth(name)
        b0 = c[0].inv_unit(deg_cap)
        B = {0: b0}
        zero = self.ring.zero()
        for k in range(1, depth + 1):
            acc = zero
            for j in range(1, k + 1):
                if j in c:
                    acc = acc + c[j] * B[k - j]
            B[k] = (-(b0 * acc))._capped(deg_cap)
        out = self.ring.zero()
        for k, s in B.items():
            out = out + s.mul_gen(name, -k)
        return out

    # -- views --------------------------------------------------------------

    def filtered(self, pred):
        return Series(self.ring, {e: c for e, c in self.terms.items() if pred(e)})

    def restricted(self, deg_cap=None, windows=None):
        """Restrict to total t-degree <= deg_cap and per-gen exponent windows
        given as {name: (lo, hi)}."""
        ring = self.ring
        slots = ring._deg_slots
        win = [(ring.index[n], lo, hi) for n, (lo, hi) in (windows or {}).items()]

        def pred(e):
            if deg_cap is not None and sum(e[i] for i in slots) > deg_cap:
                return False
            for i, lo, hi in win:
                if e[i] < lo or e[i] > hi:
                    return False
            return True

        return self.filtered(pred)

    def sorted_terms(self):
        return sorted(self.terms.items())

    def __repr__(self):
        n = len(self.terms)
        return f"Series({n} terms over {self.ring.names})"
