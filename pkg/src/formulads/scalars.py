"""Scalar rings used everywhere else.

Three rings: exact rationals (the oracle ring), fixed-point numbers with b
fractional bits over arbitrary-precision integers (the deployment ring), and
the prime field Z_p (exact, no rounding ever).  Matrices elsewhere are generic
over a small ring protocol; the ring classes at the bottom of this module
implement it for all scalar types plus native float64.
"""

import math
from fractions import Fraction

from .errors import ZeroInverse

# The oracle ring.  fractions.Fraction already guarantees the spec'd
# invariants: reduced, denominator > 0, canonical zero 0/1.
Rational = Fraction

_LN2 = math.log(2.0)


def div_round_half_even(num, den):
    """Nearest integer to num/den, ties to even.  Requires den > 0."""
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


class FixedPoint:
    """mantissa * 2^(-frac_bits), mantissa an arbitrary-precision integer.

    All operands of a single arithmetic expression must share frac_bits;
    mixed-b arithmetic raises ValueError, it is never a silent cast.
    add/sub are exact, mul is exact-then-rounded, div has additive error
    below 2^(-frac_bits).
    """

    __slots__ = ("mantissa", "frac_bits")

    def __init__(self, mantissa, frac_bits):
        if frac_bits < 0:
            raise ValueError("frac_bits must be non-negative")
        self.mantissa = mantissa
        self.frac_bits = frac_bits

    @classmethod
    def parse(cls, text, frac_bits):
        """Parse a decimal ("1.25") or hex-float ("0x1.4p0") literal."""
        text = text.strip()
        if text.lower().startswith(("0x", "-0x", "+0x")):
            exact = Fraction(float.fromhex(text))
        else:
            exact = Fraction(text)
        return fx_round(exact, frac_bits)

    @property
    def value(self):
        return Fraction(self.mantissa, 1 << self.frac_bits)

    def _check(self, other):
        if not isinstance(other, FixedPoint):
            raise TypeError(f"FixedPoint op with {type(other).__name__}")
        if other.frac_bits != self.frac_bits:
            raise ValueError(
                f"mixed fractional bits: {self.frac_bits} vs {other.frac_bits}")

    def __add__(self, other):
        self._check(other)
        return FixedPoint(self.mantissa + other.mantissa, self.frac_bits)

    def __sub__(self, other):
        self._check(other)
        return FixedPoint(self.mantissa - other.mantissa, self.frac_bits)

    def __mul__(self, other):
        self._check(other)
        # exact product has 2b fractional bits; round back to b
        return FixedPoint(
            div_round_half_even(self.mantissa * other.mantissa, 1 << self.frac_bits),
            self.frac_bits)

    def __truediv__(self, other):
        self._check(other)
        if other.mantissa == 0:
            raise ZeroDivisionError("fixed-point division by zero")
        num = self.mantissa << self.frac_bits
        den = other.mantissa
        if den < 0:
            num, den = -num, -den
        return FixedPoint(div_round_half_even(num, den), self.frac_bits)

    def __neg__(self):
        return FixedPoint(-self.mantissa, self.frac_bits)

    def __abs__(self):
        return FixedPoint(abs(self.mantissa), self.frac_bits)

    def __eq__(self, other):
        return (isinstance(other, FixedPoint)
                and other.frac_bits == self.frac_bits
                and other.mantissa == self.mantissa)

    def __lt__(self, other):
        self._check(other)
        return self.mantissa < other.mantissa

    def __le__(self, other):
        self._check(other)
        return self.mantissa <= other.mantissa

    def __hash__(self):
        return hash((self.mantissa, self.frac_bits))

    def __float__(self):
        return self.mantissa / (1 << self.frac_bits)

    def __repr__(self):
        return f"FixedPoint({self.mantissa}, b={self.frac_bits})"


def fx_round(x, frac_bits):
    """Round an exact rational (or int) to frac_bits fractional bits.

    |result - x| <= 2^(-frac_bits-1); ties round to even mantissa.
    """
    if frac_bits < 0:
        raise ValueError("frac_bits must be non-negative")
    x = Fraction(x)
    return FixedPoint(
        div_round_half_even(x.numerator << frac_bits, x.denominator), frac_bits)


def fx_arith(a, c, op):
    if op == "add":
        return a + c
    if op == "sub":
        return a - c
    if op == "mul":
        return a * c
    if op == "div":
        return a / c
    raise ValueError(f"unknown fixed-point op {op!r}")


def fx_sqrt(a):
    """Square root rounded to nearest representable; argument must be >= 0."""
    if a.mantissa < 0:
        raise ValueError("fx_sqrt of a negative value")
    scaled = a.mantissa << a.frac_bits
    t = math.isqrt(scaled)
    # t+1 is closer iff scaled > (t + 1/2)^2, i.e. scaled - t^2 > t
    if scaled - t * t > t:
        t += 1
    return FixedPoint(t, a.frac_bits)


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_probable_prime(n):
    """Deterministic Miller-Rabin for n < 3.3e24 (covers every modulus here)."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


DEFAULT_PRIME = (1 << 61) - 1  # Mersenne; n/p failure odds negligible at desk scale


class FieldElem:
    """Element of Z_p for an odd prime p; arithmetic is exact."""

    __slots__ = ("residue", "modulus")

    def __init__(self, residue, modulus):
        self.residue = residue % modulus
        self.modulus = modulus

    @classmethod
    def parse(cls, text, modulus):
        return cls(int(text, 10), modulus)

    def _check(self, other):
        if not isinstance(other, FieldElem):
            raise TypeError(f"FieldElem op with {type(other).__name__}")
        if other.modulus != self.modulus:
            raise ValueError("mixed moduli")

    def __add__(self, other):
        self._check(other)
        return FieldElem(self.residue + other.residue, self.modulus)

    def __sub__(self, other):
        self._check(other)
        return FieldElem(self.residue - other.residue, self.modulus)

    def __mul__(self, other):
        self._check(other)
        return FieldElem(self.residue * other.residue, self.modulus)

    def __neg__(self):
        return FieldElem(-self.residue, self.modulus)

    def inverse(self):
        if self.residue == 0:
            raise ZeroInverse("inverse of zero in Z_p")
        return FieldElem(pow(self.residue, self.modulus - 2, self.modulus), self.modulus)

    def __truediv__(self, other):
        self._check(other)
        return self * other.inverse()

    def __eq__(self, other):
        return (isinstance(other, FieldElem)
                and other.modulus == self.modulus
                and other.residue == self.residue)

    def __hash__(self):
        return hash((self.residue, self.modulus))

    def __repr__(self):
        return f"FieldElem({self.residue} mod {self.modulus})"


def fp_arith(a, c, op):
    if op == "add":
        return a + c
    if op == "sub":
        return a - c
    if op == "mul":
        return a * c
    if op == "inv":
        return a.inverse()
    raise ValueError(f"unknown field op {op!r}")


# ---------------------------------------------------------------------------
# Ring protocol.  A ring object bundles the scalar operations the dense
# matrix helpers and the dynamic-inverse engines need, so their code is
# written once.  Values are immutable; rings are stateless and shareable.

class RationalRing:
    name = "rational"
    exact = True

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def from_int(self, k):
        return Fraction(k)

    def from_fraction(self, x):
        return Fraction(x)

    def to_fraction(self, a):
        return a

    def to_float(self, a):
        return float(a)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def neg(self, a):
        return -a

    def is_zero(self, a):
        return a == 0

    def abs_float(self, a):
        return abs(float(a))

    def pivot_ok(self, pivot, row_norm):
        return pivot != 0

    def sign(self, a):
        return (a > 0) - (a < 0)

    def log_abs(self, a):
        # exact numerator/denominator logs; avoids overflow on huge fractions
        return math.log(abs(a.numerator)) - math.log(a.denominator)


class Float64Ring:
    name = "float64"
    exact = False

    def zero(self):
        return 0.0

    def one(self):
        return 1.0

    def from_int(self, k):
        return float(k)

    def from_fraction(self, x):
        return x.numerator / x.denominator

    def to_fraction(self, a):
        return Fraction(a)

    def to_float(self, a):
        return a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def neg(self, a):
        return -a

    def is_zero(self, a):
        return a == 0.0

    def abs_float(self, a):
        return abs(a)

    def pivot_ok(self, pivot, row_norm):
        return abs(pivot) > 1e-12 * row_norm

    def sign(self, a):
        return (a > 0.0) - (a < 0.0)

    def log_abs(self, a):
        return math.log(abs(a))

    def sqrt(self, a):
        return math.sqrt(a)


class FixedPointRing:
    """Ring of FixedPoint values at one shared frac_bits b."""

    exact = False

    def __init__(self, frac_bits):
        self.frac_bits = frac_bits
        self.name = f"fixed({frac_bits})"
        self._zero = FixedPoint(0, frac_bits)
        self._one = FixedPoint(1 << frac_bits, frac_bits)

    def zero(self):
        return self._zero

    def one(self):
        return self._one

    def from_int(self, k):
        return FixedPoint(k << self.frac_bits, self.frac_bits)

    def from_fraction(self, x):
        return fx_round(x, self.frac_bits)

    def to_fraction(self, a):
        return a.value

    def to_float(self, a):
        return float(a)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def neg(self, a):
        return -a

    def is_zero(self, a):
        return a.mantissa == 0

    def abs_float(self, a):
        return abs(float(a))

    def pivot_ok(self, pivot, row_norm):
        # singularity tolerance |pivot| >= 2^(-b/2), integer-exact comparison
        return pivot.mantissa * pivot.mantissa >= (1 << self.frac_bits)

    def sign(self, a):
        return (a.mantissa > 0) - (a.mantissa < 0)

    def log_abs(self, a):
        return math.log(abs(a.mantissa)) - self.frac_bits * _LN2

    def sqrt(self, a):
        return fx_sqrt(a)


class PrimeFieldRing:
    """Z_p with plain int residues as the scalar representation."""

    exact = True

    def __init__(self, p):
        if not is_probable_prime(p) or p == 2:
            raise ValueError(f"modulus {p} is not an odd prime")
        self.p = p
        self.name = f"zp({p})"

    def zero(self):
        return 0

    def one(self):
        return 1

    def from_int(self, k):
        return k % self.p

    def from_fraction(self, x):
        num = x.numerator % self.p
        den = x.denominator % self.p
        if den == 0:
            raise ZeroInverse("denominator divisible by p")
        return num * pow(den, self.p - 2, self.p) % self.p

    def to_fraction(self, a):
        return Fraction(a)

    def to_float(self, a):
        return float(a)

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def mul(self, a, b):
        return a * b % self.p

    def div(self, a, b):
        if b == 0:
            raise ZeroInverse("inverse of zero in Z_p")
        return a * pow(b, self.p - 2, self.p) % self.p

    def neg(self, a):
        return -a % self.p

    def is_zero(self, a):
        return a == 0

    def abs_float(self, a):
        return float(a != 0)

    def pivot_ok(self, pivot, row_norm):
        return pivot != 0

    def sign(self, a):
        raise TypeError("no ordering on Z_p")

    def log_abs(self, a):
        raise TypeError("no magnitude on Z_p")
