"""
Prime-Order Group

Elliptic-curve groups for the PSI family:
- NIST P-256 (default) and P-384 via ecdsa
- try-and-increment hash-to-group over SHA-256
- compressed point encoding and exponent helpers
"""

import logging
import secrets
from functools import lru_cache
from typing import Dict

from cryptography.hazmat.primitives import hashes
from ecdsa import NIST256p, NIST384p
from ecdsa.curves import Curve
from ecdsa.ellipticcurve import PointJacobi
from gmpy2 import legendre, mpz, powmod

from core.errors import InputError

logger = logging.getLogger(__name__)

HASH_DOMAIN = b"collab-blacklist/hash-to-group/v1"
TAG_DOMAIN = b"collab-blacklist/tag/v1"
MAX_HASH_ATTEMPTS = 256

CURVES: Dict[str, Curve] = {"P-256": NIST256p, "P-384": NIST384p}


def sha256(*parts: bytes) -> bytes:
    digest = hashes.Hash(hashes.SHA256())
    for part in parts:
        digest.update(part)
    return digest.finalize()


class GroupParams:
    """
    A prime-order elliptic-curve group.

    Both supported curves have p = 3 mod 4, so square roots are a single
    modular exponentiation.
    """

    def __init__(self, name: str = "P-256"):
        if name not in CURVES:
            raise InputError(f"Unsupported group: {name}")
        self.name = name
        self._curve = CURVES[name]
        self.order = int(self._curve.order)
        self.generator = self._curve.generator
        field = self._curve.curve
        self._p = mpz(field.p())
        self._a = mpz(field.a()) % self._p
        self._b = mpz(field.b())
        self.element_length = self._curve.baselen + 1
        self._hash_to_group = lru_cache(maxsize=65536)(self._try_and_increment)

    @property
    def identifier(self) -> bytes:
        return self.name.encode("ascii")

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupParams) and other.name == self.name

    def __hash__(self) -> int:
        return hash(self.name)

    def __repr__(self) -> str:
        return f"GroupParams({self.name!r})"

    def random_exponent(self) -> int:
        """Uniform in [1, order)."""
        return secrets.randbelow(self.order - 1) + 1

    def inverse(self, exponent: int) -> int:
        return pow(exponent, -1, self.order)

    def _field_element(self, data: bytes, counter: int) -> mpz:
        width = self._curve.baselen + 16
        stream = b""
        block = 0
        while len(stream) < width:
            stream += sha256(HASH_DOMAIN, counter.to_bytes(4, "big"), block.to_bytes(1, "big"), data)
            block += 1
        return mpz(int.from_bytes(stream[:width], "big")) % self._p

    def _try_and_increment(self, data: bytes) -> PointJacobi:
        for counter in range(MAX_HASH_ATTEMPTS):
            x = self._field_element(data, counter)
            z = (powmod(x, 3, self._p) + self._a * x + self._b) % self._p
            if z == 0 or legendre(z, self._p) != 1:
                continue
            y = powmod(z, (self._p + 1) // 4, self._p)
            if y % 2:
                y = self._p - y
            return PointJacobi(self._curve.curve, int(x), int(y), 1, self.order)
        raise InputError(f"No curve point found for input after {MAX_HASH_ATTEMPTS} attempts")

    def hash_to_group(self, data: bytes) -> PointJacobi:
        """Deterministic map from bytes to a group element."""
        return self._hash_to_group(bytes(data))

    def encode(self, point: PointJacobi) -> bytes:
        return point.to_bytes("compressed")

    def decode(self, data: bytes) -> PointJacobi:
        try:
            return PointJacobi.from_bytes(self._curve.curve, data, order=self.order)
        except Exception as e:
            raise InputError(f"Invalid group element encoding: {e}") from e

    def tag(self, point: PointJacobi) -> bytes:
        """One-way tag of a doubly blinded element."""
        return sha256(TAG_DOMAIN, self.encode(point))


def encode_address(address: int) -> bytes:
    return address.to_bytes(4, "big")


@lru_cache(maxsize=None)
def default_group() -> GroupParams:
    return GroupParams("P-256")
