"""Prime-order cyclic groups with two independent generators.

Two backends share one interface:

* ``TransparentGroup``: the additive group Z_q. Discrete logs are trivial, so
  it doubles as a brute-force oracle for protocol logic. Binding of
  commitments is deliberately *not* modelled here.
* ``ToyCurveGroup``: a short-Weierstrass curve over a small prime field with
  prime order (found by exhaustive point counting). ``G`` and ``H`` are both
  obtained by hash-to-group so nobody knows ``log_G(H)``.

Scalars are plain Python ints, reduced mod ``group.q`` at the boundaries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any


class BackendMismatch(ValueError):
    """Raised when elements from different groups are combined."""


class DecodeError(ValueError):
    """Raised on a non-canonical or malformed serialized element/scalar."""


@dataclass(frozen=True)
class GroupElement:
    group: "Group" = field(repr=False)
    data: Any

    def _check(self, other: "GroupElement") -> None:
        if not isinstance(other, GroupElement):
            raise TypeError(f"expected GroupElement, got {type(other).__name__}")
        if other.group.name != self.group.name:
            raise BackendMismatch(f"{self.group.name} vs {other.group.name}")

    def __add__(self, other: "GroupElement") -> "GroupElement":
        self._check(other)
        return self.group.add(self, other)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        self._check(other)
        return self.group.add(self, self.group.neg(other))

    def __neg__(self) -> "GroupElement":
        return self.group.neg(self)

    def __rmul__(self, k: int) -> "GroupElement":
        return self.group.scalar_mul(k, self)

    def __mul__(self, k: int) -> "GroupElement":
        return self.group.scalar_mul(k, self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.group.name == other.group.name and self.data == other.data

    def __hash__(self) -> int:
        return hash((self.group.name, self.data))

    def is_identity(self) -> bool:
        return self == self.group.identity

    def to_bytes(self) -> bytes:
        return self.group.serialize(self)

    def hex(self) -> str:
        return self.to_bytes().hex()

    def __repr__(self) -> str:
        return f"<{self.group.name}:{self.data}>"


def _tagged_digest(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.digest()


class Group:
    """Common scalar/serialization machinery; subclasses supply the group law."""

    name: str
    q: int
    G: GroupElement
    H: GroupElement

    # -- group law (subclass) -------------------------------------------------
    @property
    def identity(self) -> GroupElement:
        raise NotImplementedError

    def add(self, a: GroupElement, b: GroupElement) -> GroupElement:
        raise NotImplementedError

    def neg(self, a: GroupElement) -> GroupElement:
        raise NotImplementedError

    def serialize(self, a: GroupElement) -> bytes:
        raise NotImplementedError

    def deserialize(self, raw: bytes) -> GroupElement:
        raise NotImplementedError

    def hash_to_group(self, tag: bytes) -> GroupElement:
        raise NotImplementedError

    # -- shared ----------------------------------------------------------------
    def scalar_mul(self, k: int, a: GroupElement) -> GroupElement:
        k %= self.q
        result = self.identity
        addend = a
        while k:
            if k & 1:
                result = self.add(result, addend)
            addend = self.add(addend, addend)
            k >>= 1
        return result

    def scalar(self, k: int) -> int:
        return k % self.q

    @property
    def scalar_width(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def scalar_to_bytes(self, k: int) -> bytes:
        return (k % self.q).to_bytes(self.scalar_width, "big")

    def scalar_from_bytes(self, raw: bytes) -> int:
        if len(raw) != self.scalar_width:
            raise DecodeError(f"scalar must be {self.scalar_width} bytes")
        k = int.from_bytes(raw, "big")
        if k >= self.q:
            raise DecodeError("scalar not reduced")
        return k

    def scalar_hex(self, k: int) -> str:
        return self.scalar_to_bytes(k).hex()

    def scalar_from_hex(self, text: str) -> int:
        try:
            raw = bytes.fromhex(text)
        except (ValueError, TypeError) as exc:
            raise DecodeError(str(exc)) from exc
        return self.scalar_from_bytes(raw)

    def element_from_hex(self, text: str) -> GroupElement:
        try:
            raw = bytes.fromhex(text)
        except (ValueError, TypeError) as exc:
            raise DecodeError(str(exc)) from exc
        return self.deserialize(raw)

    def hash_to_scalar(self, *parts: bytes) -> int:
        return int.from_bytes(_tagged_digest(self.name.encode(), *parts), "big") % self.q

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, q={self.q})"


class TransparentGroup(Group):
    """(Z_q, +) with caller-chosen generators; elements are residues."""

    def __init__(self, q: int = 7919, g: int = 1, h: int = 5657, name: str | None = None):
        if g % q == 0 or h % q == 0 or (g - h) % q == 0:
            raise ValueError("generators must be distinct and non-zero")
        self.q = q
        self.name = name or ("transparent" if (q, g, h) == (7919, 1, 5657) else f"transparent-{q}-{g}-{h}")
        self.G = GroupElement(self, g % q)
        self.H = GroupElement(self, h % q)
        self._identity = GroupElement(self, 0)

    @property
    def identity(self) -> GroupElement:
        return self._identity

    def element(self, value: int) -> GroupElement:
        return GroupElement(self, value % self.q)

    def add(self, a: GroupElement, b: GroupElement) -> GroupElement:
        return GroupElement(self, (a.data + b.data) % self.q)

    def neg(self, a: GroupElement) -> GroupElement:
        return GroupElement(self, (-a.data) % self.q)

    def scalar_mul(self, k: int, a: GroupElement) -> GroupElement:
        return GroupElement(self, (k * a.data) % self.q)

    def serialize(self, a: GroupElement) -> bytes:
        return a.data.to_bytes(self.scalar_width, "big")

    def deserialize(self, raw: bytes) -> GroupElement:
        if len(raw) != self.scalar_width:
            raise DecodeError(f"element must be {self.scalar_width} bytes")
        v = int.from_bytes(raw, "big")
        if v >= self.q:
            raise DecodeError("element not reduced")
        return GroupElement(self, v)

    def hash_to_group(self, tag: bytes) -> GroupElement:
        if not tag:
            raise ValueError("tag must be non-empty")
        counter = 0
        while True:
            v = int.from_bytes(_tagged_digest(b"h2g", tag, counter.to_bytes(4, "big")), "big") % self.q
            if v:
                return GroupElement(self, v)
            counter += 1


# y^2 = x^3 - 3x + 27 over F_262139; 262583 points (prime), counted exhaustively.
TOY_P = 262139
TOY_A = TOY_P - 3
TOY_B = 27
TOY_ORDER = 262583


class ToyCurveGroup(Group):
    """Affine short-Weierstrass arithmetic; ``data`` is ``(x, y)`` or ``None`` at infinity."""

    def __init__(self, p: int = TOY_P, a: int = TOY_A, b: int = TOY_B, order: int = TOY_ORDER,
                 name: str = "toycurve"):
        if p % 4 != 3:
            raise ValueError("p must be 3 mod 4 for the square-root shortcut")
        if (4 * a**3 + 27 * b * b) % p == 0:
            raise ValueError("singular curve")
        self.p, self.a, self.b, self.q = p, a % p, b % p, order
        self.name = name
        self._identity = GroupElement(self, None)
        self.G = self.hash_to_group(b"mwref/generator/G")
        self.H = self.hash_to_group(b"mwref/generator/H")

    @property
    def identity(self) -> GroupElement:
        return self._identity

    def on_curve(self, x: int, y: int) -> bool:
        p = self.p
        return (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def point(self, x: int, y: int) -> GroupElement:
        if not self.on_curve(x, y):
            raise ValueError(f"({x}, {y}) is not on the curve")
        return GroupElement(self, (x % self.p, y % self.p))

    def add(self, a: GroupElement, b: GroupElement) -> GroupElement:
        P, Q = a.data, b.data
        if P is None:
            return b
        if Q is None:
            return a
        p = self.p
        x1, y1 = P
        x2, y2 = Q
        if x1 == x2:
            if (y1 + y2) % p == 0:
                return self._identity
            lam = (3 * x1 * x1 + self.a) * pow(2 * y1, -1, p) % p
        else:
            lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
        x3 = (lam * lam - x1 - x2) % p
        y3 = (lam * (x1 - x3) - y1) % p
        return GroupElement(self, (x3, y3))

    def neg(self, a: GroupElement) -> GroupElement:
        if a.data is None:
            return a
        x, y = a.data
        return GroupElement(self, (x, (-y) % self.p))

    @property
    def coord_width(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def serialize(self, a: GroupElement) -> bytes:
        w = self.coord_width
        if a.data is None:
            return bytes(2 * w) + b"\x01"
        x, y = a.data
        return x.to_bytes(w, "big") + y.to_bytes(w, "big") + b"\x00"

    def deserialize(self, raw: bytes) -> GroupElement:
        w = self.coord_width
        if len(raw) != 2 * w + 1:
            raise DecodeError(f"element must be {2 * w + 1} bytes")
        x = int.from_bytes(raw[:w], "big")
        y = int.from_bytes(raw[w:2 * w], "big")
        flag = raw[-1]
        if flag == 1:
            if x or y:
                raise DecodeError("non-canonical point at infinity")
            return self._identity
        if flag != 0:
            raise DecodeError("bad infinity flag")
        if x >= self.p or y >= self.p or not self.on_curve(x, y):
            raise DecodeError("point not on curve")
        return GroupElement(self, (x, y))

    def hash_to_group(self, tag: bytes) -> GroupElement:
        if not tag:
            raise ValueError("tag must be non-empty")
        p = self.p
        counter = 0
        while True:
            d = _tagged_digest(b"h2c", tag, counter.to_bytes(4, "big"))
            x = int.from_bytes(d[:16], "big") % p
            rhs = (x * x * x + self.a * x + self.b) % p
            y = pow(rhs, (p + 1) // 4, p)
            if rhs and y * y % p == rhs:
                if (y & 1) != (d[16] & 1):
                    y = p - y
                return GroupElement(self, (x, y))
            counter += 1


_REGISTRY: dict[str, Group] = {}


def get_group(name: str) -> Group:
    """Return the shared instance of a named backend (``transparent`` or ``toycurve``)."""
    if name not in _REGISTRY:
        if name == "transparent":
            _REGISTRY[name] = TransparentGroup()
        elif name == "toycurve":
            _REGISTRY[name] = ToyCurveGroup()
        else:
            raise ValueError(f"unknown backend {name!r} (expected transparent|toycurve)")
    return _REGISTRY[name]


BACKENDS = ("transparent", "toycurve")
