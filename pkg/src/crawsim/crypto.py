"""Shared cryptographic plumbing for the key-management toolkit.

Everything here is deterministic given its inputs: the one-way functions are
domain-separated SHA-256 instances, authenticated encryption derives its nonce
from (key, plaintext), and all randomness flows through a caller-supplied
``random.Random``.  That keeps whole simulation runs bit-reproducible from a
seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from random import Random

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

KEY_WIDTH = 16

DIGITS = "0123456789"


class ProtocolError(Exception):
    """A protocol-level contract was violated."""


class DecryptionError(ProtocolError):
    """Authenticated decryption failed (wrong key or corrupted ciphertext)."""


class HashFn:
    """One-way function with a fixed output width.

    Distinct labels give independent functions over the same input space;
    the label is mixed into every digest so no instance is a prefix or
    truncation of another.
    """

    def __init__(self, label: str, width: int = KEY_WIDTH):
        if width <= 0:
            raise ValueError("hash output width must be positive")
        self._prefix = label.encode("ascii") + b"|"
        self.width = width

    def __call__(self, data: bytes) -> bytes:
        out = hashlib.sha256(self._prefix + data).digest()
        while len(out) < self.width:  # stretch only if width > one digest
            out += hashlib.sha256(self._prefix + out).digest()
        return out[: self.width]


# The re-keying derivation f and the authentication hash E are separate
# instances: knowing one chain gives no foothold in the other.
_REKEY = HashFn("rekey")
_AUTH = HashFn("auth")


def hash_f(key: bytes) -> bytes:
    """Key-refresh derivation; input must already be key-width material."""
    if len(key) != KEY_WIDTH:
        raise ValueError(f"hash_f expects {KEY_WIDTH}-octet keys, got {len(key)}")
    return _REKEY(key)


def hash_E(data: bytes) -> bytes:
    """Authentication one-way hash over arbitrary octet strings."""
    return _AUTH(data)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("xor operands must have equal length")
    return bytes(x ^ y for x, y in zip(a, b))


def encode_code(code: str, width: int = KEY_WIDTH) -> bytes:
    """Map a node code to key-width octets: one octet per decimal digit
    character, right-aligned in a zero-filled buffer."""
    if not code:
        raise ValueError("node code must be non-empty")
    if not code.isascii() or not code.isdigit():
        raise ValueError(f"node code must be decimal digits, got {code!r}")
    raw = code.encode("ascii")
    if len(raw) > width:
        raise ValueError(f"node code {code!r} exceeds key width {width}")
    return raw.rjust(width, b"\x00")


def hash_f_xor(key: bytes, code: str) -> bytes:
    """Middle-node key derivation: f(key xor encoded-code)."""
    return hash_f(xor_bytes(key, encode_code(code, len(key))))


@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes  # AES-GCM output: ciphertext || tag

    def fingerprint(self) -> str:
        return fingerprint(self.nonce + self.body)


def _nonce_for(key: bytes, plaintext: bytes) -> bytes:
    # Deterministic SIV-style nonce: repeats only for identical
    # (key, plaintext) pairs, which then yield identical ciphertexts.
    return hashlib.sha256(b"nonce|" + key + b"|" + plaintext).digest()[:12]


def encrypt(key: bytes, plaintext: bytes) -> Ciphertext:
    if len(key) != KEY_WIDTH:
        raise ValueError(f"encryption key must be {KEY_WIDTH} octets")
    nonce = _nonce_for(key, plaintext)
    return Ciphertext(nonce, AESGCM(key).encrypt(nonce, plaintext, None))


def decrypt(key: bytes, ct: Ciphertext) -> bytes:
    """Return the plaintext, or raise DecryptionError for any wrong key or
    tampered ciphertext."""
    if len(key) != KEY_WIDTH:
        raise ValueError(f"decryption key must be {KEY_WIDTH} octets")
    try:
        return AESGCM(key).decrypt(ct.nonce, ct.body, None)
    except InvalidTag as exc:
        raise DecryptionError("ciphertext does not open under this key") from exc


def random_key(rng: Random) -> bytes:
    return rng.randbytes(KEY_WIDTH)


def random_digit(rng: Random, exclude: str = "") -> str:
    """Draw one decimal digit, skipping any in ``exclude``."""
    allowed = [d for d in DIGITS if d not in exclude]
    if not allowed:
        raise ValueError("no digits left to draw from")
    return rng.choice(allowed)


def fingerprint(data: bytes) -> str:
    """Short stable hex tag for logs and serialized dumps (not a secret)."""
    return hashlib.sha256(data).hexdigest()[:12]
