"""A small conformal geometric algebra kernel.

Points, spheres, planes, circles, point pairs and lines of 3-D Euclidean space
are all elements of the 5-D algebra Cl(4,1). Intersections become outer
products, and the inverse kinematics in `bciarm.kinematics` is written entirely
in terms of the operations below.

Internally every multivector is 32 coefficients over the orthonormal basis
e1, e2, e3, e4 = e+ (squares to +1), e5 = e- (squares to -1). Blades are
identified by bitmasks (bit i set means e_{i+1} is a factor) and stored in grade
order, then lexicographic order of their factors: 1, e1, ..., e5, e12, e13, ...,
e45, e123, ..., e12345. The null vectors used by the geometry are

    e0 = (e- - e+) / 2        (origin)
    einf = e+ + e-            (point at infinity)

so that e0.e0 = einf.einf = 0 and e0.einf = -1.

The product tables are generated from the blade bitmasks at import time; nothing
is written out by hand.

Every entity is stored in one of two flavours:

- "standard": the vector-like form that an intersection is built from
  (s = P - r^2/2 einf for a sphere, s1 ^ s2 for a circle, ...). A point X lies
  on the entity when X . value == 0.
- "dual": the wedge of points spanning the entity (x1 ^ x2 ^ x3 ^ einf for a
  plane, x1 ^ x2 for a point pair, ...). A point X lies on it when
  X ^ value == 0.

`dual` converts between the two. The pseudoscalar I = e12345 squares to -1 and
commutes with everything, so dual(dual(A)) == -A for every grade.

"""

import ast
import logging
import math
import re
from dataclasses import dataclass
from typing import ClassVar, Iterable, Literal, Mapping, Sequence, TypeAlias

import numpy as np

logger = logging.getLogger(__name__)

DIMENSION = 5
BLADE_COUNT = 1 << DIMENSION
METRIC = (1.0, 1.0, 1.0, 1.0, -1.0)


def _factors(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(DIMENSION) if mask >> i & 1)


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


BLADES: tuple[int, ...] = tuple(
    sorted(range(BLADE_COUNT), key=lambda m: (_popcount(m), _factors(m)))
)
BLADE_INDEX: dict[int, int] = {mask: i for i, mask in enumerate(BLADES)}
BLADE_NAMES: tuple[str, ...] = tuple(
    "1" if mask == 0 else "e" + "".join(str(i + 1) for i in _factors(mask))
    for mask in BLADES
)
GRADES = np.array([_popcount(mask) for mask in BLADES])


def blade_product(a: int, b: int) -> tuple[int, float]:
    """Product of two basis blades given as bitmasks.

    Returns the resulting blade and its sign: the parity of the swaps needed to
    bring the factors into canonical order, times the squares of the shared
    basis vectors.
    """
    swaps = 0
    shifted = a >> 1
    while shifted:
        swaps += _popcount(shifted & b)
        shifted >>= 1
    sign = -1.0 if swaps & 1 else 1.0
    for i in _factors(a & b):
        sign *= METRIC[i]
    return a ^ b, sign


def _build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    index = np.empty((BLADE_COUNT, BLADE_COUNT), dtype=np.intp)
    geometric = np.zeros((BLADE_COUNT, BLADE_COUNT))
    outer = np.zeros((BLADE_COUNT, BLADE_COUNT))
    inner = np.zeros((BLADE_COUNT, BLADE_COUNT))

    for i, a in enumerate(BLADES):
        for j, b in enumerate(BLADES):
            mask, sign = blade_product(a, b)
            index[i, j] = BLADE_INDEX[mask]
            geometric[i, j] = sign
            if a & b == 0:
                outer[i, j] = sign
            # Grade |r - s| part, scalars included.
            if _popcount(mask) == abs(_popcount(a) - _popcount(b)):
                inner[i, j] = sign

    return index.ravel(), geometric.ravel(), outer.ravel(), inner.ravel()


_INDEX, _GEOMETRIC, _OUTER, _INNER = _build_tables()


def _product(table: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    weights = np.outer(a, b).ravel() * table
    return np.bincount(_INDEX, weights=weights, minlength=BLADE_COUNT)


class CgaError(ValueError):
    pass


class NonFiniteInputError(CgaError):
    pass


class PointAtInfinityError(CgaError):
    pass


class NegativeRadiusError(CgaError):
    pass


class DegenerateEntityError(CgaError):
    pass


class DegenerateIntersectionError(CgaError):
    pass


class ImaginaryPairError(CgaError):
    pass


class ZeroVectorError(CgaError):
    pass


@dataclass(frozen=True, slots=True)
class Tolerance:
    """Near-zero policy shared by every incidence and realness check.

    A quantity counts as zero when its magnitude is at most
    `relative * scale + absolute`, where `scale` is the size of the inputs it
    was computed from.
    """

    relative: float = 1e-9
    absolute: float = 1e-12

    def bound(self, scale: float) -> float:
        return self.relative * scale + self.absolute

    def is_zero(self, value: "Multivector | float", scale: float) -> bool:
        if isinstance(value, Multivector):
            magnitude = float(np.max(np.abs(value.coeffs)))
        else:
            magnitude = abs(value)
        return magnitude <= self.bound(scale)


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True, slots=True, eq=False)
class Multivector:
    """An element of Cl(4,1): 32 coefficients in `BLADE_NAMES` order.

    `*` is the geometric product, `^` the outer product and `|` the inner
    product (the grade |r - s| part of the product of an r-blade and an
    s-blade).
    """

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (BLADE_COUNT,):
            raise ValueError(
                f"a multivector has {BLADE_COUNT} coefficients, got shape {coeffs.shape}"
            )
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zero(cls) -> "Multivector":
        return cls(np.zeros(BLADE_COUNT))

    @classmethod
    def from_scalar(cls, value: float) -> "Multivector":
        coeffs = np.zeros(BLADE_COUNT)
        coeffs[0] = value
        return cls(coeffs)

    @classmethod
    def from_blades(cls, blades: Mapping[str, float]) -> "Multivector":
        coeffs = np.zeros(BLADE_COUNT)
        for name, value in blades.items():
            try:
                coeffs[BLADE_NAMES.index(name)] += value
            except ValueError:
                raise ValueError(f"unknown blade {name!r}") from None
        return cls(coeffs)

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "Multivector":
        """Euclidean 3-vector x1 e1 + x2 e2 + x3 e3."""
        coeffs = np.zeros(BLADE_COUNT)
        for i, value in enumerate(x):
            coeffs[BLADE_INDEX[1 << i]] = value
        return cls(coeffs)

    def _coerce(self, other) -> np.ndarray | None:
        if isinstance(other, Multivector):
            return other.coeffs
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector.from_scalar(float(other)).coeffs
        return None

    def __add__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(self.coeffs + o)

    __radd__ = __add__

    def __sub__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(self.coeffs - o)

    def __rsub__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(o - self.coeffs)

    def __neg__(self) -> "Multivector":
        return Multivector(-self.coeffs)

    def __mul__(self, other) -> "Multivector":
        if isinstance(other, Multivector):
            return Multivector(_product(_GEOMETRIC, self.coeffs, other.coeffs))
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.coeffs * float(other))
        return NotImplemented

    def __rmul__(self, other) -> "Multivector":
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.coeffs * float(other))
        return NotImplemented

    def __truediv__(self, other) -> "Multivector":
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.coeffs / float(other))
        return NotImplemented

    def __xor__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(_product(_OUTER, self.coeffs, o))

    def __rxor__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(_product(_OUTER, o, self.coeffs))

    def __or__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(_product(_INNER, self.coeffs, o))

    def __ror__(self, other) -> "Multivector":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Multivector(_product(_INNER, o, self.coeffs))

    def grade(self, k: int) -> "Multivector":
        return Multivector(np.where(GRADES == k, self.coeffs, 0.0))

    def grades(self, tolerance: Tolerance = DEFAULT_TOLERANCE) -> frozenset[int]:
        """Grades carrying a coefficient above the tolerance."""
        bound = tolerance.bound(self.norm)
        return frozenset(int(g) for g in GRADES[np.abs(self.coeffs) > bound])

    def reverse(self) -> "Multivector":
        signs = np.where((GRADES * (GRADES - 1) // 2) % 2 == 0, 1.0, -1.0)
        return Multivector(self.coeffs * signs)

    @property
    def scalar(self) -> float:
        return float(self.coeffs[0])

    @property
    def norm2(self) -> float:
        """Sum of squared coefficients. Used for tolerance scales only."""
        return float(np.dot(self.coeffs, self.coeffs))

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    @property
    def euclidean(self) -> np.ndarray:
        """The e1, e2, e3 coefficients."""
        return np.array([self.coeffs[BLADE_INDEX[1 << i]] for i in range(3)])

    @property
    def e0_coefficient(self) -> float:
        plus = self.coeffs[BLADE_INDEX[1 << 3]]
        minus = self.coeffs[BLADE_INDEX[1 << 4]]
        return float(minus - plus)

    @property
    def einf_coefficient(self) -> float:
        plus = self.coeffs[BLADE_INDEX[1 << 3]]
        minus = self.coeffs[BLADE_INDEX[1 << 4]]
        return float((plus + minus) / 2)

    def blades(self, tolerance: float = 0.0) -> list[tuple[str, float]]:
        """Nonzero (name, coefficient) pairs in blade order."""
        return [
            (name, float(c))
            for name, c in zip(BLADE_NAMES, self.coeffs)
            if abs(c) > tolerance
        ]

    def __repr__(self) -> str:
        terms = " + ".join(f"{c!r}*{name}" for name, c in self.blades())
        return f"Multivector({terms or '0'})"


def _basis(i: int) -> Multivector:
    coeffs = np.zeros(BLADE_COUNT)
    coeffs[BLADE_INDEX[1 << i]] = 1.0
    return Multivector(coeffs)


E1 = _basis(0)
E2 = _basis(1)
E3 = _basis(2)
E_PLUS = _basis(3)
E_MINUS = _basis(4)
E0 = 0.5 * (E_MINUS - E_PLUS)
EINF = E_PLUS + E_MINUS
I_C = Multivector.from_blades({"e12345": 1.0})
# e0 ^ e3 ^ e2 ^ e1 ^ einf, which is also the inverse of I_C.
I_C_INV = E0 ^ E3 ^ E2 ^ E1 ^ EINF


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    return a * b


def outer_product(a: Multivector, b: Multivector) -> Multivector:
    return a ^ b


def inner_product(a: Multivector, b: Multivector) -> Multivector:
    return a | b


def wedge(factors: Iterable[Multivector]) -> Multivector:
    out = Multivector.from_scalar(1.0)
    for f in factors:
        out = out ^ f
    return out


def dual(a: Multivector) -> Multivector:
    """A* = A . I_c^-1. Applying it twice negates every grade."""
    return a | I_C_INV


# Points

ConformalPoint: TypeAlias = Multivector


def embed_point(x: Sequence[float]) -> ConformalPoint:
    """P = x + |x|^2/2 einf + e0."""
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInputError(f"non-finite point {v}")
    return Multivector.from_vector(v) + 0.5 * float(v @ v) * EINF + E0


def extract_point(
    p: ConformalPoint, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> np.ndarray:
    w = p.e0_coefficient
    if abs(w) <= tolerance.bound(p.norm):
        raise PointAtInfinityError("point at infinity")
    return p.euclidean / w


def normalize_point(
    p: ConformalPoint, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> ConformalPoint:
    """Rescale so that the e0 coefficient is 1."""
    w = p.e0_coefficient
    if abs(w) <= tolerance.bound(p.norm):
        raise PointAtInfinityError("point at infinity")
    return p / w


# Entities

Flavor: TypeAlias = Literal["standard", "dual"]


@dataclass(frozen=True, slots=True)
class Entity:
    value: Multivector
    flavor: Flavor

    kind: ClassVar[str] = "entity"

    @property
    def standard(self) -> Multivector:
        return self.value if self.flavor == "standard" else dual(self.value)

    @property
    def dual_form(self) -> Multivector:
        return self.value if self.flavor == "dual" else dual(self.value)

    @property
    def square(self) -> float:
        """Scalar square of the dual (wedge) form."""
        d = self.dual_form
        return (d * d).scalar

    def is_real(self, tolerance: Tolerance = DEFAULT_TOLERANCE) -> bool:
        return self.square >= -tolerance.bound(self.dual_form.norm2)


@dataclass(frozen=True, slots=True)
class Sphere(Entity):
    kind: ClassVar[str] = "sphere"


@dataclass(frozen=True, slots=True)
class Plane(Entity):
    kind: ClassVar[str] = "plane"


@dataclass(frozen=True, slots=True)
class Line(Entity):
    kind: ClassVar[str] = "line"


@dataclass(frozen=True, slots=True)
class Circle(Entity):
    kind: ClassVar[str] = "circle"

    @property
    def radius2(self) -> float:
        """Squared radius; negative for an imaginary circle."""
        carrier = EINF | self.standard
        den = (carrier * carrier).scalar
        if abs(den) <= DEFAULT_TOLERANCE.bound(carrier.norm2):
            raise DegenerateEntityError("circle has no finite carrier")
        return self.square / den

    def radius(self, tolerance: Tolerance = DEFAULT_TOLERANCE) -> float:
        r2 = self.radius2
        if r2 < -tolerance.bound(1.0):
            raise DegenerateEntityError("imaginary circle has no real radius")
        return math.sqrt(max(r2, 0.0))

    @property
    def center(self) -> np.ndarray:
        c = self.standard
        return extract_point((c * EINF * c).grade(1))


@dataclass(frozen=True, slots=True)
class PointPair(Entity):
    kind: ClassVar[str] = "point pair"

    def points(
        self, tolerance: Tolerance = DEFAULT_TOLERANCE
    ) -> tuple[ConformalPoint, ConformalPoint]:
        """Both split candidates, "+" first."""
        return _split_candidates(self, tolerance)


def make_sphere(center: ConformalPoint, r: float) -> Sphere:
    """s = P - r^2/2 einf."""
    if not math.isfinite(r):
        raise NonFiniteInputError(f"non-finite radius {r}")
    if r < 0:
        raise NegativeRadiusError(f"negative radius {r}")
    return Sphere(normalize_point(center) - 0.5 * r * r * EINF, "standard")


def _checked_wedge(
    factors: Sequence[Multivector], what: str, tolerance: Tolerance
) -> Multivector:
    value = wedge(factors)
    scale = math.prod(f.norm for f in factors)
    if tolerance.is_zero(value, scale):
        raise DegenerateEntityError(f"degenerate {what}: wedge product vanishes")
    return value


def make_plane_wedge(
    factors: Sequence[Multivector], tolerance: Tolerance = DEFAULT_TOLERANCE
) -> Plane:
    """Plane spanned by four factors, e.g. e0 ^ e1 ^ e2 ^ einf."""
    if len(factors) != 4:
        raise ValueError(f"a plane is the wedge of 4 factors, got {len(factors)}")
    return Plane(_checked_wedge(factors, "plane", tolerance), "dual")


def make_line(
    p1: ConformalPoint, p2: ConformalPoint, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> Line:
    """l* = P1 ^ P2 ^ einf."""
    return Line(_checked_wedge([p1, p2, EINF], "line", tolerance), "dual")


def incident(
    point: ConformalPoint, entity: Entity, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> bool:
    p = normalize_point(point)
    d = entity.dual_form
    return tolerance.is_zero(p ^ d, p.norm * d.norm)


def _meet(a: Multivector, b: Multivector, what: str, tolerance: Tolerance) -> Multivector:
    value = a ^ b
    if tolerance.is_zero(value, a.norm * b.norm):
        raise DegenerateIntersectionError(f"{what}: intersection undefined")
    return value


def intersect_spheres(
    s1: Sphere, s2: Sphere, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> Circle:
    """c = s1 ^ s2 on the standard forms. Check `Circle.is_real` for realness."""
    a, b = s1.standard, s2.standard
    c = _meet(a, b, "identical spheres", tolerance)
    if tolerance.is_zero(c ^ EINF, c.norm * EINF.norm):
        raise DegenerateIntersectionError("concentric spheres do not meet in a circle")
    return Circle(c, "standard")


def intersect_plane_sphere(
    pi: Plane, s: Sphere, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> Circle:
    c = _meet(pi.standard, s.standard, "sphere and plane", tolerance)
    if tolerance.is_zero(c ^ EINF, c.norm * EINF.norm):
        raise DegenerateIntersectionError("plane and sphere do not meet in a circle")
    return Circle(c, "standard")


def intersect_circle_plane(
    c: Circle, pi: Plane, tolerance: Tolerance = DEFAULT_TOLERANCE
) -> PointPair:
    value = _meet(c.standard, pi.standard, "circle lies in the plane", tolerance)
    return PointPair(value, "standard")


def _split_candidates(
    pp: PointPair, tolerance: Tolerance
) -> tuple[ConformalPoint, ConformalPoint]:
    b = pp.dual_form
    sq = (b * b).scalar
    if sq < -tolerance.bound(b.norm2):
        raise ImaginaryPairError(f"imaginary pair (square {sq:.3e})")
    if abs(sq) <= tolerance.bound(b.norm2):
        logger.debug("tangent point pair (square %.3e): both points coincide", sq)
    root = math.sqrt(max(sq, 0.0))

    den = EINF | b
    if tolerance.is_zero(den, b.norm):
        raise DegenerateEntityError("degenerate point pair denominator")

    first, second = (
        normalize_point(((b + s) * den).grade(1), tolerance) for s in (root, -root)
    )
    # "+" is the higher point, then the one further along e1.
    x1, x2 = first.euclidean, second.euclidean
    scale = max(float(np.max(np.abs(x1))), float(np.max(np.abs(x2))), 1.0)
    if abs(x1[2] - x2[2]) > tolerance.bound(scale):
        swap = x2[2] > x1[2]
    else:
        swap = x2[0] > x1[0]
    return (second, first) if swap else (first, second)


def split_point_pair(
    pp: PointPair,
    sign: Literal["+", "-"],
    tolerance: Tolerance = DEFAULT_TOLERANCE,
) -> ConformalPoint:
    """P = (Pp +- sqrt(Pp^2)) / (-einf . Pp), normalized.

    "+" returns the point with the larger e3 coefficient, ties broken by the
    larger e1 coefficient.
    """
    plus, minus = _split_candidates(pp, tolerance)
    if sign == "+":
        return plus
    if sign == "-":
        return minus
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def line_direction(l: Line, tolerance: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """(l . e0) . einf as a Euclidean vector.

    For l = P1 ^ P2 ^ einf this is x1 - x2.
    """
    d = ((l.dual_form | E0) | EINF).euclidean
    if np.linalg.norm(d) <= tolerance.bound(l.dual_form.norm):
        raise DegenerateEntityError("degenerate line has no direction")
    return d


def plane_normal(pi: Plane, tolerance: Tolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """(pi* ^ einf) . e0 as a Euclidean vector.

    For the plane e0 ^ a ^ b ^ einf this is a x b.
    """
    n = ((pi.standard ^ EINF) | E0).euclidean
    if np.linalg.norm(n) <= tolerance.bound(pi.value.norm):
        raise DegenerateEntityError("degenerate plane has no normal")
    return n


# Angles

Orientation: TypeAlias = Literal["ccw", "cw"]


def _as_vector(x: Sequence[float] | np.ndarray) -> Multivector:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInputError(f"non-finite vector {v}")
    if not np.any(v):
        raise ZeroVectorError("zero vector has no direction")
    return Multivector.from_vector(v)


def angle_between(
    alpha: Sequence[float] | np.ndarray,
    beta: Sequence[float] | np.ndarray,
    orientation: Orientation = "ccw",
    tolerance: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    """theta = atan2((alpha ^ beta) / N, alpha . beta), in (-pi, pi].

    N is the normalized bivector alpha ^ beta taken with sign + for "ccw" and -
    for "cw". Parallel vectors have no bivector; they give 0 or pi from the sign
    of the dot product.
    """
    a = _as_vector(alpha)
    b = _as_vector(beta)
    dot = (a | b).scalar
    span = a ^ b
    size = math.sqrt(max(-(span * span).scalar, 0.0))
    if size <= tolerance.bound(a.norm * b.norm):
        return 0.0 if dot > 0 else math.pi

    n = span / size if orientation == "ccw" else -span / size
    # A unit Euclidean bivector squares to -1.
    theta = math.atan2((span * -n).scalar, dot)
    return math.pi if theta <= -math.pi else theta


def orientation_about(
    alpha: Sequence[float] | np.ndarray,
    beta: Sequence[float] | np.ndarray,
    axis: Sequence[float] | np.ndarray,
) -> Orientation:
    """"ccw" when alpha turns towards beta counter-clockwise about `axis`."""
    volume = _as_vector(alpha) ^ _as_vector(beta) ^ _as_vector(axis)
    return "ccw" if volume.coeffs[BLADE_INDEX[0b111]] >= 0 else "cw"


def signed_angle(
    alpha: Sequence[float] | np.ndarray,
    beta: Sequence[float] | np.ndarray,
    axis: Sequence[float] | np.ndarray,
    tolerance: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    """Angle from alpha to beta, positive counter-clockwise about `axis`."""
    return angle_between(alpha, beta, orientation_about(alpha, beta, axis), tolerance)


# Expression evaluation for the `cga eval` command.

_NAMED = {
    "e0": E0,
    "einf": EINF,
    "eplus": E_PLUS,
    "eminus": E_MINUS,
    "I": I_C,
}
_BLADE_NAME = re.compile(r"e([1-5]+)")


class ExpressionError(CgaError):
    pass


def _lookup(name: str) -> Multivector:
    if name in _NAMED:
        return _NAMED[name]
    m = _BLADE_NAME.fullmatch(name)
    if m is None:
        raise ExpressionError(f"unknown name {name!r}")
    out = Multivector.from_scalar(1.0)
    for digit in m.group(1):
        out = out * _basis(int(digit) - 1)
    return out


def _as_multivector(v: Multivector | float) -> Multivector:
    return v if isinstance(v, Multivector) else Multivector.from_scalar(v)


def _evaluate(node: ast.AST) -> Multivector | float:
    if isinstance(node, ast.Expression):
        return _evaluate(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        return _lookup(node.id)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _evaluate(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        left, right = _evaluate(node.left), _evaluate(node.right)
        match node.op:
            case ast.Add():
                return left + right
            case ast.Sub():
                return left - right
            case ast.Mult():
                return left * right
            case ast.BitXor():
                return _as_multivector(left) ^ _as_multivector(right)
            case ast.BitOr():
                return _as_multivector(left) | _as_multivector(right)
            case ast.Div() if isinstance(right, float):
                return left / right
        raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        args = [_evaluate(a) for a in node.args]
        match node.func.id, args:
            case "point", [float() as x, float() as y, float() as z]:
                return embed_point([x, y, z])
            case "sphere", [Multivector() as center, float() as r]:
                return make_sphere(center, r).standard
            case "dual", [Multivector() as a]:
                return dual(a)
            case "grade", [Multivector() as a, float() as k] if k.is_integer():
                return a.grade(int(k))
        raise ExpressionError(f"bad call to {node.func.id}()")
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def evaluate(expression: str) -> Multivector:
    """Evaluate a multivector expression.

    Names: e1..e5 and any blade name such as e12 or e123, e0, einf, eplus,
    eminus, I. Operators: + - * ^ | and division by a number. Calls:
    point(x, y, z), sphere(P, r), dual(A), grade(A, k).
    """
    try:
        tree = ast.parse(expression, mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"cannot parse {expression!r}: {e.msg}") from None
    value = _evaluate(tree)
    if isinstance(value, float):
        return Multivector.from_scalar(value)
    return value


def format_blades(a: Multivector) -> list[str]:
    """`blade_name coefficient` lines in blade order."""
    lines = [f"{name} {c!r}" for name, c in a.blades()]
    return lines or ["1 0.0"]
