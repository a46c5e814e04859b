"""Pluggable scalar arithmetic for polynomial and network computations.

Four scalar kinds are supported, all represented by plain Python values so
polynomial dictionaries stay lightweight:

  * ``RealField``      -- float
  * ``ComplexField``   -- complex
  * ``PrimeField(p)``  -- int in [0, p), arithmetic mod a prime p
  * ``DualField(base)``-- pair (a, b) meaning a + b*eps with eps**2 = 0,
                          over any of the other fields (forward-mode
                          differentiation)

A field object owns every operation on its scalars; callers never assume a
concrete representation.  ``magnitude`` maps a scalar to a float used for
tolerance checks and term cleanup; for exact fields it is a 0/1 indicator,
so a "magnitude below threshold" test degenerates to an exact zero test.
"""

from __future__ import annotations

import random

DEFAULT_PRIME = 2147483647  # Mersenne, fits in 32 bits
FLOAT_CLEANUP_REL = 1e-13


class FieldMismatchError(ValueError):
    """Operands built over different scalar fields."""


class ScalarField:
    """Abstract scalar arithmetic. Instances are stateless and hashable."""

    name: str = "abstract"
    exact: bool = False
    cleanup_rel: float = 0.0

    def zero(self):
        raise NotImplementedError

    def one(self):
        raise NotImplementedError

    def from_int(self, n: int):
        raise NotImplementedError

    def add(self, a, b):
        raise NotImplementedError

    def sub(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def is_zero(self, a) -> bool:
        return self.magnitude(a) == 0.0

    def magnitude(self, a) -> float:
        raise NotImplementedError

    def random(self, rng: random.Random):
        """Draw one scalar for randomized constructions (seeded upstream)."""
        raise NotImplementedError

    def to_complex(self, a) -> complex:
        raise NotImplementedError(f"{self.name} scalars have no complex image")

    def coeff_to_json(self, a) -> dict:
        raise NotImplementedError

    def coeff_from_json(self, obj: dict):
        raise NotImplementedError

    def __repr__(self):
        return self.name

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


class RealField(ScalarField):
    name = "real"

    def __init__(self, cleanup_rel: float = FLOAT_CLEANUP_REL):
        self.cleanup_rel = cleanup_rel

    def zero(self):
        return 0.0

    def one(self):
        return 1.0

    def from_int(self, n):
        return float(n)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def inv(self, a):
        return 1.0 / a

    def magnitude(self, a):
        return abs(a)

    def random(self, rng):
        return rng.uniform(-1.0, 1.0)

    def to_complex(self, a):
        return complex(a)

    def coeff_to_json(self, a):
        return {"re": a}

    def coeff_from_json(self, obj):
        return float(obj["re"])


class ComplexField(ScalarField):
    name = "complex"

    def __init__(self, cleanup_rel: float = FLOAT_CLEANUP_REL):
        self.cleanup_rel = cleanup_rel

    def zero(self):
        return 0j

    def one(self):
        return 1 + 0j

    def from_int(self, n):
        return complex(n)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def inv(self, a):
        return 1.0 / a

    def magnitude(self, a):
        return abs(a)

    def random(self, rng):
        return complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))

    def to_complex(self, a):
        return complex(a)

    def coeff_to_json(self, a):
        return {"re": a.real, "im": a.imag}

    def coeff_from_json(self, obj):
        return complex(obj["re"], obj.get("im", 0.0))


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField(ScalarField):
    """GF(p) with scalars stored as ints in [0, p)."""

    exact = True

    def __init__(self, p: int = DEFAULT_PRIME):
        if not is_prime(p):
            raise ValueError(f"modulus {p} is not prime")
        self.p = p
        self.name = f"gf({p})"

    def zero(self):
        return 0

    def one(self):
        return 1

    def from_int(self, n):
        return n % self.p

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def neg(self, a):
        return (-a) % self.p

    def mul(self, a, b):
        return (a * b) % self.p

    def inv(self, a):
        if a % self.p == 0:
            raise ZeroDivisionError("inverse of 0 in GF(p)")
        return pow(a, -1, self.p)

    def magnitude(self, a):
        return 0.0 if a % self.p == 0 else 1.0

    def random(self, rng):
        # nonzero draw: zero weights create degenerate networks
        return rng.randrange(1, self.p)

    def coeff_to_json(self, a):
        return {"re": int(a)}

    def coeff_from_json(self, obj):
        return int(obj["re"]) % self.p


class DualField(ScalarField):
    """First-order dual numbers (a, b) ~ a + b*eps over a base field."""

    def __init__(self, base: ScalarField):
        if isinstance(base, DualField):
            raise ValueError("nested dual fields are not supported")
        self.base = base
        self.name = f"dual({base.name})"
        self.exact = base.exact
        self.cleanup_rel = base.cleanup_rel

    def lift(self, a):
        """Embed a base scalar with zero derivative part."""
        return (a, self.base.zero())

    def seed(self, a):
        """Embed a base scalar with unit derivative part."""
        return (a, self.base.one())

    def value(self, x):
        return x[0]

    def deriv(self, x):
        return x[1]

    def zero(self):
        z = self.base.zero()
        return (z, z)

    def one(self):
        return (self.base.one(), self.base.zero())

    def from_int(self, n):
        return (self.base.from_int(n), self.base.zero())

    def add(self, a, b):
        return (self.base.add(a[0], b[0]), self.base.add(a[1], b[1]))

    def sub(self, a, b):
        return (self.base.sub(a[0], b[0]), self.base.sub(a[1], b[1]))

    def neg(self, a):
        return (self.base.neg(a[0]), self.base.neg(a[1]))

    def mul(self, a, b):
        f = self.base
        return (f.mul(a[0], b[0]), f.add(f.mul(a[0], b[1]), f.mul(a[1], b[0])))

    def inv(self, a):
        # 1/(a + b eps) = 1/a - (b/a^2) eps
        f = self.base
        ia = f.inv(a[0])
        return (ia, f.neg(f.mul(a[1], f.mul(ia, ia))))

    def magnitude(self, a):
        return max(self.base.magnitude(a[0]), self.base.magnitude(a[1]))

    def random(self, rng):
        return (self.base.random(rng), self.base.zero())


REAL = RealField()
COMPLEX = ComplexField()


def field_from_name(name: str, p: int | None = None) -> ScalarField:
    if name == "real":
        return RealField()
    if name == "complex":
        return ComplexField()
    if name == "gfp":
        return PrimeField(p if p is not None else DEFAULT_PRIME)
    raise ValueError(f"unknown field name {name!r}")


def field_json_name(field: ScalarField) -> str:
    if isinstance(field, RealField):
        return "real"
    if isinstance(field, ComplexField):
        return "complex"
    if isinstance(field, PrimeField):
        return "gfp"
    raise ValueError(f"{field.name} has no JSON name")
