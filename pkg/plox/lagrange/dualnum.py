"""Second-order forward-mode automatic differentiation on hyper-dual scalars.

.. code-block:: python

    from plox.lagrange import dualnum

A :class:`Dual2` carries a value together with two first directional derivatives
(along seeds ``u`` and ``v``) and the mixed second derivative along ``(u, v)``. Every
residual in the package (Euler-Lagrange covectors, mass matrices, jets of mapped curves)
is evaluated on these scalars.

Example:

    >>> value, du, dv, duv = d2_eval(lambda x: x * x, [3.0], [1.0], [1.0])
    >>> (value, du, dv, duv)
    (9.0, 6.0, 6.0, 2.0)
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from logging import getLogger
from typing import Callable, Union

import numpy as np

logger = getLogger(__name__)


class DomainError(ArithmeticError):
    """A primitive was evaluated outside of its real domain.

    Attributes:
        primitive: Name of the offending primitive (``log``, ``sqrt``, ``/``, ...).
        value: The argument value that was rejected.
    """

    def __init__(self, primitive: str, value: float, reason: str = "outside of domain") -> None:
        self.primitive = primitive
        self.value = value
        super().__init__(f"{primitive}: argument {value!r} {reason}")


class Dual2:
    """Hyper-dual scalar ``(val, d1, d2, d12)``.

    Arithmetic follows the truncated product ``(a + a1 e1 + a2 e2 + a12 e1e2)`` with
    ``e1**2 = e2**2 = 0``, so ``d12`` of a product is
    ``a.d12*b.val + a.d1*b.d2 + a.d2*b.d1 + a.val*b.d12``.
    """

    __slots__ = ("val", "d1", "d2", "d12")

    def __init__(self, val: float, d1: float = 0.0, d2: float = 0.0, d12: float = 0.0) -> None:
        self.val = val
        self.d1 = d1
        self.d2 = d2
        self.d12 = d12

    def __repr__(self) -> str:
        return f"Dual2({self.val!r}, {self.d1!r}, {self.d2!r}, {self.d12!r})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Dual2):
            return (self.val, self.d1, self.d2, self.d12) == (
                other.val,
                other.d1,
                other.d2,
                other.d12,
            )
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.val, self.d1, self.d2, self.d12)

    def __neg__(self) -> Dual2:
        return Dual2(-self.val, -self.d1, -self.d2, -self.d12)

    def __pos__(self) -> Dual2:
        return self

    def __add__(self, other: Scalar) -> Dual2:
        if isinstance(other, Dual2):
            return Dual2(
                self.val + other.val,
                self.d1 + other.d1,
                self.d2 + other.d2,
                self.d12 + other.d12,
            )
        return Dual2(self.val + other, self.d1, self.d2, self.d12)

    __radd__ = __add__

    def __sub__(self, other: Scalar) -> Dual2:
        if isinstance(other, Dual2):
            return Dual2(
                self.val - other.val,
                self.d1 - other.d1,
                self.d2 - other.d2,
                self.d12 - other.d12,
            )
        return Dual2(self.val - other, self.d1, self.d2, self.d12)

    def __rsub__(self, other: Scalar) -> Dual2:
        return Dual2(other - self.val, -self.d1, -self.d2, -self.d12)  # type: ignore[operator]

    def __mul__(self, other: Scalar) -> Dual2:
        if isinstance(other, Dual2):
            return Dual2(
                self.val * other.val,
                self.d1 * other.val + self.val * other.d1,
                self.d2 * other.val + self.val * other.d2,
                self.d12 * other.val
                + self.d1 * other.d2
                + self.d2 * other.d1
                + self.val * other.d12,
            )
        return Dual2(self.val * other, self.d1 * other, self.d2 * other, self.d12 * other)

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar) -> Dual2:
        if isinstance(other, Dual2):
            return _quotient(self, other)
        if other == 0.0:
            raise DomainError("/", float(other), "is a zero divisor")
        return Dual2(self.val / other, self.d1 / other, self.d2 / other, self.d12 / other)

    def __rtruediv__(self, other: Scalar) -> Dual2:
        return _quotient(Dual2(float(other)), self)  # type: ignore[arg-type]

    def __pow__(self, other: Scalar) -> Dual2:
        return power(self, other)  # type: ignore[return-value]

    def __rpow__(self, other: Scalar) -> Dual2:
        return power(other, self)  # type: ignore[return-value]


Scalar = Union[float, Dual2]
"""Either a plain real or a :class:`Dual2`."""


def lift(value: float, seed_u: float = 0.0, seed_v: float = 0.0) -> Dual2:
    """Lift a real to a seeded hyper-dual scalar ``(value, seed_u, seed_v, 0)``.

    Example:

        >>> lift(3.0, 1.0, 0.0)
        Dual2(3.0, 1.0, 0.0, 0.0)
    """
    return Dual2(float(value), float(seed_u), float(seed_v), 0.0)


def value_of(x: Scalar) -> float:
    return x.val if isinstance(x, Dual2) else float(x)


def _chain(a: Dual2, f: float, df: float, ddf: float) -> Dual2:
    return Dual2(f, df * a.d1, df * a.d2, df * a.d12 + ddf * a.d1 * a.d2)


def _chain2(
    x: Dual2, y: Dual2, f: float, fx: float, fy: float, fxx: float, fxy: float, fyy: float
) -> Dual2:
    """Second-order chain rule for a function of two hyper-dual arguments."""
    return Dual2(
        f,
        fx * x.d1 + fy * y.d1,
        fx * x.d2 + fy * y.d2,
        fx * x.d12
        + fy * y.d12
        + fxx * x.d1 * x.d2
        + fxy * (x.d1 * y.d2 + y.d1 * x.d2)
        + fyy * y.d1 * y.d2,
    )


def _quotient(a: Dual2, b: Dual2) -> Dual2:
    if b.val == 0.0:
        raise DomainError("/", b.val, "is a zero divisor")
    inv = 1.0 / b.val
    q = a.val / b.val
    q1 = (a.d1 - q * b.d1) * inv
    q2 = (a.d2 - q * b.d2) * inv
    return Dual2(q, q1, q2, (a.d12 - q1 * b.d2 - q2 * b.d1 - q * b.d12) * inv)


def divide(a: Scalar, b: Scalar) -> Scalar:
    """Quotient ``a / b``; raises :class:`DomainError` instead of dividing by zero."""
    if isinstance(a, Dual2) or isinstance(b, Dual2):
        return _quotient(_as_dual(a), _as_dual(b))
    if b == 0.0:
        raise DomainError("/", float(b), "is a zero divisor")
    return a / b


def _as_dual(x: Scalar) -> Dual2:
    return x if isinstance(x, Dual2) else Dual2(float(x))


def sin(a: Scalar) -> Scalar:
    if not isinstance(a, Dual2):
        return math.sin(a)
    s, c = math.sin(a.val), math.cos(a.val)
    return _chain(a, s, c, -s)


def cos(a: Scalar) -> Scalar:
    if not isinstance(a, Dual2):
        return math.cos(a)
    s, c = math.sin(a.val), math.cos(a.val)
    return _chain(a, c, -s, -c)


def tan(a: Scalar) -> Scalar:
    x = value_of(a)
    if math.cos(x) == 0.0:
        raise DomainError("tan", x)
    t = math.tan(x)
    if not isinstance(a, Dual2):
        return t
    sec2 = 1.0 + t * t
    return _chain(a, t, sec2, 2.0 * t * sec2)


def exp(a: Scalar) -> Scalar:
    x = value_of(a)
    try:
        e = math.exp(x)
    except OverflowError as ex:
        raise DomainError("exp", x, "overflows") from ex
    if not isinstance(a, Dual2):
        return e
    return _chain(a, e, e, e)


def log(a: Scalar) -> Scalar:
    x = value_of(a)
    if x <= 0.0:
        raise DomainError("log", x, "is not positive")
    if not isinstance(a, Dual2):
        return math.log(x)
    return _chain(a, math.log(x), 1.0 / x, -1.0 / (x * x))


def sqrt(a: Scalar) -> Scalar:
    x = value_of(a)
    if x < 0.0:
        raise DomainError("sqrt", x, "is negative")
    if x == 0.0 and isinstance(a, Dual2) and (a.d1 or a.d2 or a.d12):
        # the value is defined at zero, its derivatives are not
        raise DomainError("sqrt", x, "has no derivative")
    r = math.sqrt(x)
    if not isinstance(a, Dual2):
        return r
    if r == 0.0:
        return Dual2(0.0)
    return _chain(a, r, 0.5 / r, -0.25 / (r * x))


def atan2(y: Scalar, x: Scalar) -> Scalar:
    yv, xv = value_of(y), value_of(x)
    r2 = xv * xv + yv * yv
    if r2 == 0.0:
        raise DomainError("atan2", 0.0, "is undefined at the origin")
    theta = math.atan2(yv, xv)
    if not isinstance(y, Dual2) and not isinstance(x, Dual2):
        return theta
    r4 = r2 * r2
    # arguments ordered (y, x)
    return _chain2(
        _as_dual(y),
        _as_dual(x),
        theta,
        xv / r2,
        -yv / r2,
        -2.0 * xv * yv / r4,
        (yv * yv - xv * xv) / r4,
        2.0 * xv * yv / r4,
    )


def _integer_exponent(b: Scalar) -> int | None:
    if isinstance(b, Dual2):
        if b.d1 != 0.0 or b.d2 != 0.0 or b.d12 != 0.0:
            return None
        b = b.val
    if float(b).is_integer() and abs(b) < 2**31:
        return int(b)
    return None


def power(a: Scalar, b: Scalar) -> Scalar:
    """Raise ``a`` to ``b`` with real-valued semantics.

    Integer exponents (constant ones, including constant Dual2) are allowed for any base
    except a zero base with a negative exponent. Otherwise the base must be positive, or
    zero with a positive exponent; like :func:`sqrt`, a zero base then has derivatives
    only where they vanish, which takes an exponent above 2.

    Raises:
        DomainError: Negative base with non-integer exponent, or zero base that cannot
            be raised or differentiated.
    """
    x = value_of(a)
    n = _integer_exponent(b)
    if n is not None:
        if x == 0.0 and n < 0:
            raise DomainError("^", x, f"cannot be raised to {n}")
        try:
            f = x**n
        except OverflowError as ex:
            raise DomainError("^", x, f"overflows when raised to {n}") from ex
        if not isinstance(a, Dual2):
            return f
        df = n * x ** (n - 1) if n != 0 else 0.0
        ddf = n * (n - 1) * x ** (n - 2) if n not in (0, 1) else 0.0
        return _chain(a, f, df, ddf)

    y = value_of(b)
    if x == 0.0 and y > 0.0:
        # every derivative along the base vanishes at zero only above exponent 2
        if y <= 2.0 and isinstance(a, Dual2) and (a.d1 or a.d2 or a.d12):
            raise DomainError("^", x, f"has no derivative when raised to {y!r}")
        return Dual2(0.0) if isinstance(a, Dual2) or isinstance(b, Dual2) else 0.0
    if x <= 0.0:
        raise DomainError("^", x, "must be positive for a non-integer exponent")
    f = x**y
    if not isinstance(b, Dual2):
        if not isinstance(a, Dual2):
            return f
        return _chain(a, f, y * x ** (y - 1.0), y * (y - 1.0) * x ** (y - 2.0))
    lx = math.log(x)
    return _chain2(
        _as_dual(a),
        b,
        f,
        y * x ** (y - 1.0),
        f * lx,
        y * (y - 1.0) * x ** (y - 2.0),
        x ** (y - 1.0) * (1.0 + y * lx),
        f * lx * lx,
    )


def d2_eval(
    f: Callable[..., Scalar],
    point: Sequence[float],
    dir_u: Sequence[float],
    dir_v: Sequence[float],
) -> tuple[float, float, float, float]:
    """Evaluate ``f`` with its directional derivatives along ``dir_u``, ``dir_v``.

    Example:

        >>> d2_eval(lambda x: x * x * x, [2.0], [1.0], [0.0])
        (8.0, 12.0, 0.0, 0.0)

    Args:
        f: Scalar function of ``k`` arguments built from the supported primitives.
        point: Evaluation point, length ``k``.
        dir_u: First seed direction.
        dir_v: Second seed direction.

    Raises:
        DomainError: A primitive was evaluated outside of its domain.

    Returns:
        tuple[float, float, float, float]: ``(value, du, dv, duv)`` where ``duv`` is the
        bilinear Hessian form ``H(dir_u, dir_v)``.
    """
    if not (len(point) == len(dir_u) == len(dir_v)):
        raise ValueError(
            f"point/dir_u/dir_v lengths differ: {len(point)}, {len(dir_u)}, {len(dir_v)}"
        )
    args = [lift(p, u, v) for p, u, v in zip(point, dir_u, dir_v)]
    out = f(*args)
    if isinstance(out, Dual2):
        return out.as_tuple()
    return (float(out), 0.0, 0.0, 0.0)


def gradient(f: Callable[..., Scalar], point: Sequence[float]) -> np.ndarray:
    """First derivatives of ``f``, two components per seeded evaluation."""
    k = len(point)
    grad = np.zeros(k)
    eye = np.eye(k)
    zero = np.zeros(k)
    for i in range(0, k, 2):
        v = eye[i + 1] if i + 1 < k else zero
        _, du, dv, _ = d2_eval(f, point, eye[i], v)
        grad[i] = du
        if i + 1 < k:
            grad[i + 1] = dv
    return grad


def hessian(f: Callable[..., Scalar], point: Sequence[float]) -> np.ndarray:
    """Full Hessian of ``f`` from ``k(k+1)/2`` seeded evaluations."""
    k = len(point)
    eye = np.eye(k)
    hess = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            hess[i, j] = hess[j, i] = d2_eval(f, point, eye[i], eye[j])[3]
    return hess
