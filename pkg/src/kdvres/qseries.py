"""Truncated q-series with exact integer/rational coefficients.

Used for graded characters: a QSeries holds the coefficients of
q^0 .. q^order and all arithmetic is exact up to that order.
"""

from __future__ import annotations

from fractions import Fraction


class QSeries:
    def __init__(self, coeffs, order):
        coeffs = [Fraction(c) for c in coeffs[:order + 1]]
        coeffs += [Fraction(0)] * (order + 1 - len(coeffs))
        self.coeffs = coeffs
        self.order = order

    @classmethod
    def zero(cls, order):
        return cls([], order)

    @classmethod
    def one(cls, order):
        return cls([1], order)

    @classmethod
    def monomial(cls, n, order, coeff=1):
        c = [0] * (order + 1)
        if n <= order:
            c[n] = coeff
        return cls(c, order)

    def __getitem__(self, n):
        if n > self.order:
            raise IndexError(f"coefficient q^{n} beyond order {self.order}")
        return self.coeffs[n]

    def __add__(self, other):
        order = min(self.order, other.order)
        return QSeries([self.coeffs[i] + other.coeffs[i] for i in range(order + 1)], order)

    def __sub__(self, other):
        order = min(self.order, other.order)
        return QSeries([self.coeffs[i] - other.coeffs[i] for i in range(order + 1)], order)

    def __neg__(self):
        return QSeries([-c for c in self.coeffs], self.order)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return QSeries([c * other for c in self.coeffs], self.order)
        order = min(self.order, other.order)
        out = [Fraction(0)] * (order + 1)
        for i, a in enumerate(self.coeffs[:order + 1]):
            if not a:
                continue
            for j in range(order + 1 - i):
                b = other.coeffs[j]
                if b:
                    out[i + j] += a * b
        return QSeries(out, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        order = min(self.order, other.order)
        if other.coeffs[0] == 0:
            raise ZeroDivisionError("division by a q-series with zero constant term")
        inv0 = Fraction(1) / other.coeffs[0]
        out = [Fraction(0)] * (order + 1)
        for n in range(order + 1):
            acc = self.coeffs[n]
            for k in range(1, n + 1):
                acc -= other.coeffs[k] * out[n - k]
            out[n] = acc * inv0
        return QSeries(out, order)

    def __eq__(self, other):
        order = min(self.order, other.order)
        return self.coeffs[:order + 1] == other.coeffs[:order + 1]

    def truncate(self, order):
        return QSeries(self.coeffs, min(order, self.order))

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def __str__(self):
        parts = []
        for n, c in enumerate(self.coeffs):
            if not c:
                continue
            if n == 0:
                parts.append(str(c))
            elif c == 1:
                parts.append(f"q^{n}")
            else:
                parts.append(f"{c}*q^{n}")
        return " + ".join(parts) if parts else "0"

    def to_json(self):
        from .algebra import frac_str
        return {"order": self.order, "coeffs": [frac_str(c) for c in self.coeffs]}


def qseries_arith(a, b, op):
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def inv_product(order, steps):
    """1 / prod_{k in steps, k <= order} (1 - q^k), exact to the order."""
    out = QSeries.one(order)
    for k in steps:
        if k > order:
            break
        # multiply by 1/(1-q^k) = 1 + q^k + q^2k + ...
        geom = QSeries([Fraction(1) if n % k == 0 else Fraction(0)
                        for n in range(order + 1)], order)
        out = out * geom
    return out


def ch_even_parts(order):
    """Partitions into even parts: 1/prod(1-q^{2i})."""
    return inv_product(order, range(2, order + 1, 2))


def ch_odd_parts(order):
    """Partitions into odd parts: 1/prod(1-q^{2i-1})."""
    return inv_product(order, range(1, order + 1, 2))


def ch_kdv_fields(order):
    """Partitions into parts >= 2: (1-q)/prod(1-q^i)."""
    one_minus_q = QSeries([1, -1], order)
    return one_minus_q * inv_product(order, range(1, order + 1))


def dim_fields(d):
    """Number of degree-d monomials in the u-algebra (partitions of d into
    parts >= 2)."""
    return int(ch_kdv_fields(max(d, 1))[d]) if d >= 0 else 0
