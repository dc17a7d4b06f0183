"""crawsim: group-key management toolkit and deterministic simulator for the
CRAW multicast re-keying protocol (code-based key trees + one-time-password
authentication), with an LKH baseline for cost comparison."""

__version__ = "0.1.0"

from .crypto import (  # noqa: F401
    KEY_WIDTH,
    Ciphertext,
    DecryptionError,
    ProtocolError,
    decrypt,
    encrypt,
    hash_E,
    hash_f,
    hash_f_xor,
)
