"""Free-fermion calculus on dual (bra-side) Fock states.

States are anchored at the charge -1 dual vacuum: the canonical word

    (I, J)  =  <-1| psi_{i1} ... psi_{ip} psi*_{-j1} ... psi*_{-jq}

with i1 > ... > ip >= 1 and 1 <= j1 < ... < jq, all odd.  Every dual vacuum
is such a word: <-2N-1| = (I=(), J=(1,3,...,2N-1)), because removing the top
filled level lowers the vacuum, <m| psi*_m = <m-2|, with no sign in this
ordering.  The charge of (I, J) is -1 + 2(|I| - |J|) and its degree is
sum(I) + sum(J); with these conventions the degree of <-2N-1| is N^2 and
the charge--(-2N-1) sector has character q^(N^2) / prod(1 - q^(2i)), which
the tests count explicitly.

Operators act on the right of the bra.  A linear combination is a dict from
words to coefficients; coefficients may be Fractions or polynomials (the
D-module layer reuses these right-action routines with operator-valued
coefficients).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .algebra import J_CAT, SBAR_CAT
from .diffalg import omega_pair_table
from .linalg import det_expansion

PSI = "psi"
PSI_STAR = "psi*"

VACUUM = ((), ())


def vacuum_word(N):
    """The dual vacuum <-2N-1| in anchored form."""
    return ((), tuple(range(1, 2 * N, 2)))


def word_degree(w):
    I, J = w
    return sum(I) + sum(J)


def word_charge(w):
    I, J = w
    return -1 + 2 * (len(I) - len(J))


def charge_param(w):
    """N such that the word lies in the charge -2N-1 sector."""
    I, J = w
    return len(J) - len(I)


def _acc(out, w, val):
    if w in out:
        s = out[w] + val
        if s:
            out[w] = s
        else:
            del out[w]
    else:
        out[w] = val


def act_psi(state, n):
    """Right action of psi_n on a combination of canonical words."""
    out = {}
    for (I, J), c in state.items():
        q = len(J)
        if n <= -1:
            jneed = -n
            if jneed in J:
                t = J.index(jneed) + 1
                val = c if (q - t) % 2 == 0 else -c
                _acc(out, (I, J[:t - 1] + J[t:]), val)
            # otherwise the mode reaches the vacuum and annihilates it
        else:
            if n in I:
                continue
            smaller = sum(1 for i in I if i < n)
            val = c if (q + smaller) % 2 == 0 else -c
            I2 = tuple(sorted(I + (n,), reverse=True))
            _acc(out, (I2, J), val)
    return out


def act_psi_star(state, m):
    """Right action of psi*_m on a combination of canonical words."""
    out = {}
    for (I, J), c in state.items():
        p, q = len(I), len(J)
        if m <= -1:
            jnew = -m
            if jnew in J:
                continue
            larger = sum(1 for j in J if j > jnew)
            val = c if larger % 2 == 0 else -c
            J2 = tuple(sorted(J + (jnew,)))
            _acc(out, (I, J2), val)
        else:
            if m not in I:
                continue
            s = I.index(m) + 1
            val = c if (q + p - s) % 2 == 0 else -c
            _acc(out, (I[:s - 1] + I[s:], J), val)
    return out


def act_mode(state, mode):
    kind, idx = mode
    if idx % 2 == 0:
        raise ValueError("mode indices are odd")
    if kind == PSI:
        return act_psi(state, idx)
    if kind == PSI_STAR:
        return act_psi_star(state, idx)
    raise ValueError(f"unknown mode kind {kind!r}")


def normal_order(modes, N=0):
    """Rewrite <-2N-1| followed by the given modes into canonical words.

    Returns a sorted list of (coefficient, word) pairs; signs live in the
    coefficients.
    """
    state = {vacuum_word(N): Fraction(1)}
    for mode in modes:
        state = act_mode(state, mode)
        if not state:
            break
    return sorted(((c, w) for w, c in state.items()), key=lambda cw: cw[1])


@lru_cache(maxsize=None)
def _odd_subsets_by_sum(dmax):
    """All strictly decreasing tuples of distinct positive odd integers,
    grouped by their sum (sums 0..dmax)."""
    by_sum = {d: [] for d in range(dmax + 1)}
    by_sum[0].append(())

    def extend(prefix, smallest, total):
        nxt = smallest + 2
        while total + nxt <= dmax:
            tup = (nxt,) + prefix
            by_sum[total + nxt].append(tuple(sorted(tup, reverse=True)))
            extend(tup, nxt, total + nxt)
            nxt += 2

    extend((), -1, 0)
    return {d: sorted(v) for d, v in by_sum.items()}


def basis_enum(N, d):
    """Canonical words of the charge -2N-1 sector at total degree d.

    The count matches the q^d coefficient of q^(N^2)/prod(1-q^(2i)).
    """
    table = _odd_subsets_by_sum(d)
    words = []
    for dI in range(d + 1):
        dJ = d - dI
        for I in table.get(dI, ()):
            for J in table.get(dJ, ()):
                if len(J) - len(I) == N:
                    words.append((I, tuple(sorted(J))))
    return sorted(words)


class FockTables:
    """Bosonization data: S-bar polynomials, the two-point table and Wick
    matrix elements of the vertex-type insertion T.

    The T insertion is exp(-sum_k J_{2k} h_{-2k} / k) with
    h_{-2k} = sum_n psi_n psi*_{n+2k}; everything here is exact in Q[J].
    """

    def __init__(self):
        self._bars = {0: J_CAT.one()}
        self._j_image = {}
        self._two_point = {}
        self._two_point_depth = 0
        self._element_cache = {}

    # -- S-bar variables and the triangular change of variables ------------

    def bar_s(self, n):
        """S-bar_n (n even >= 0) as a homogeneous polynomial in the J's,
        from exp(-sum J_{2k} z^{-2k} / k) = sum S-bar_{2n} z^{-2n}."""
        if n % 2:
            raise ValueError("S-bar indices are even")
        k = n // 2
        known = max(self._bars)
        while known < k:
            known += 1
            acc = J_CAT.zero()
            for i in range(1, known + 1):
                acc = acc + J_CAT.gen(2 * i) * self._bars[known - i]
            self._bars[known] = acc.scale(Fraction(-1, known))
        return self._bars[k]

    def _j_to_bars_image(self, n):
        """J_{2n} written in the S-bar variables (triangular inversion)."""
        if n not in self._j_image:
            acc = SBAR_CAT.gen(2 * n).scale(-n)
            for k in range(1, n):
                acc = acc - self._j_to_bars_image(k) * SBAR_CAT.gen(2 * (n - k))
            self._j_image[n] = acc
        return self._j_image[n]

    def j_to_bars(self, p):
        return p.substitute(lambda gid: self._j_to_bars_image(gid // 2), SBAR_CAT)

    def bars_to_j(self, p):
        return p.substitute(lambda gid: self.bar_s(gid), J_CAT)

    def convert(self, p, direction):
        if direction == "to_bars":
            return self.j_to_bars(p)
        if direction == "to_j":
            return self.bars_to_j(p)
        raise ValueError(f"unknown direction {direction!r}")

    # -- two-point function -------------------------------------------------

    def _ensure_two_point(self, depth):
        if depth <= self._two_point_depth:
            return
        s = [self.bar_s(2 * k) for k in range(depth + 1)]
        table, consistent = omega_pair_table(s, depth)
        if not consistent:
            raise ValueError("two-point generating identity not divisible")
        self._two_point = table
        self._two_point_depth = depth

    def two_point(self, i, j):
        """<-1| psi_i psi*_{-j} T |-1> for odd i, j >= 1, as a polynomial in
        the J's, homogeneous of degree i + j.  (The free part of the
        propagator vanishes on these index ranges.)"""
        if i % 2 == 0 or j % 2 == 0 or i < 1 or j < 1:
            raise ValueError("two-point indices are odd and positive")
        a, b = (i + 1) // 2, (j + 1) // 2
        self._ensure_two_point(a + b)
        return self._two_point[(a, b)]

    # -- Wick determinant and its brute-force oracle --------------------------

    def t_matrix_element(self, w):
        """<-1| word . T |-1> as the Wick determinant of two-point entries.

        Rows follow the psi's of the canonical word (descending), columns the
        psi*'s (ascending); the canonical-order prefactor is (-1)^(k(k-1)/2).
        The sign convention is validated against the direct oracle in tests.
        """
        I, J = w
        if len(I) != len(J):
            raise ValueError("T matrix elements require a charge -1 word")
        if w in self._element_cache:
            return self._element_cache[w]
        k = len(I)
        if k == 0:
            out = J_CAT.one()
        else:
            rows = [[self.two_point(i, j) for j in J] for i in I]
            out = det_expansion(rows)
            if (k * (k - 1) // 2) % 2:
                out = -out
        self._element_cache[w] = out
        return out

    def _apply_h(self, state, k):
        """Right action of h_{-2k} = sum_n psi_n psi*_{n+2k}; locally finite
        because only finitely many modes act nonzero on each word."""
        out = {}
        for w, c in state.items():
            I, J = w
            candidates = {-j for j in J} | {i - 2 * k for i in I}
            for n in sorted(candidates):
                s1 = act_psi({w: c}, n)
                if not s1:
                    continue
                s2 = act_psi_star(s1, n + 2 * k)
                for w2, c2 in s2.items():
                    _acc(out, w2, c2)
        return out

    def t_matrix_element_oracle(self, w, jorder=None):
        """Independent evaluation of <-1| word . T |-1> by expanding the
        exponential order by order and normal ordering each h-application."""
        d = word_degree(w)
        if jorder is None:
            jorder = d
        result = J_CAT.one() if w == VACUUM else J_CAT.zero()
        state = {w: J_CAT.one()}
        r = 0
        factorial = 1
        while state and 2 * (r + 1) <= jorder:
            new = {}
            for k in range(1, jorder // 2 + 1):
                for w2, c in self._apply_h(state, k).items():
                    val = c * J_CAT.gen(2 * k, coeff=Fraction(-1, k))
                    _acc(new, w2, val)
            state = {w2: c for w2, c in new.items() if not c.is_zero()}
            r += 1
            factorial *= r
            vac = state.get(VACUUM)
            if vac is not None:
                result = result + vac.scale(Fraction(1, factorial))
        return result
