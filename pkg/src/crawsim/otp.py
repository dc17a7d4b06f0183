"""One-time-password authentication with rolling verifiers.

The server never stores the password S or any nonce, only the current
verifier E(N_i xor S).  Each authentication presents two blinded values

    alpha = E(E(N_{i+1} xor S)) xor E(N_i xor S)
    beta  = E(N_{i+1} xor S)    xor E(N_i xor S)

from which the server recovers the candidate next verifier
X = beta xor stored and accepts iff alpha xor E(X) equals the stored value.
Acceptance rolls the record forward to X, so every (alpha, beta) pair is
single-use.  The accepted credential X doubles as the seed of the member's
individual key via the separate derivation hash, so joining needs no extra
key-preparation round.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass
from random import Random

from .crypto import KEY_WIDTH, hash_E, hash_f, random_key, xor_bytes


@dataclass(frozen=True)
class AuthRecord:
    """Server-side verifier state for one member."""

    member_id: str
    session_index: int
    stored_hash: bytes


@dataclass(frozen=True)
class AuthChallenge:
    member_id: str
    alpha: bytes
    beta: bytes

    def wire(self) -> str:
        return f"{self.member_id}:{self.alpha.hex()}:{self.beta.hex()}"


@dataclass(frozen=True)
class AuthOutcome:
    accepted: bool
    record: AuthRecord  # rolled forward on accept, unchanged on reject
    individual_key: bytes | None


def _pad_password(password: bytes) -> bytes:
    # S is combined with key-width nonces by XOR, so normalize its length.
    return password[:KEY_WIDTH].ljust(KEY_WIDTH, b"\x00")


class ClientSecret:
    """Member-side authentication state: password plus the nonce chain.

    ``pending_nonce`` exists only between issuing a challenge and hearing the
    verdict; confirmation promotes it, rejection discards it.
    """

    def __init__(self, member_id: str, password: bytes, rng: Random):
        self.member_id = member_id
        self._password = _pad_password(password)
        self.current_nonce = random_key(rng)
        self.pending_nonce: bytes | None = None

    def _verifier(self, nonce: bytes) -> bytes:
        return hash_E(xor_bytes(nonce, self._password))

    def confirm_success(self) -> None:
        if self.pending_nonce is None:
            raise RuntimeError("no authentication in flight")
        self.current_nonce = self.pending_nonce
        self.pending_nonce = None

    def discard_pending(self) -> None:
        self.pending_nonce = None

    def individual_key(self) -> bytes:
        """The key both sides hold after a confirmed session: f applied to
        the session credential E(N_i xor S)."""
        return hash_f(self._verifier(self.current_nonce))


def register(secret: ClientSecret) -> AuthRecord:
    """Initial enrollment: hand the server E(N_1 xor S), nothing else."""
    return AuthRecord(secret.member_id, 1, secret._verifier(secret.current_nonce))


def make_challenge(secret: ClientSecret, rng: Random) -> AuthChallenge:
    """Draw the next nonce and blind it against the current session value."""
    next_nonce = random_key(rng)
    secret.pending_nonce = next_nonce
    cur = secret._verifier(secret.current_nonce)
    nxt = secret._verifier(next_nonce)
    return AuthChallenge(
        secret.member_id,
        alpha=xor_bytes(hash_E(nxt), cur),
        beta=xor_bytes(nxt, cur),
    )


def verify(record: AuthRecord, challenge: AuthChallenge) -> AuthOutcome:
    """Check a challenge against the stored verifier.

    Accepting returns the rolled record and the fresh individual key;
    rejecting returns the record untouched so replay and corruption leave
    no trace on server state.
    """
    candidate = xor_bytes(challenge.beta, record.stored_hash)
    probe = xor_bytes(challenge.alpha, hash_E(candidate))
    if not hmac.compare_digest(probe, record.stored_hash):
        return AuthOutcome(False, record, None)
    rolled = AuthRecord(record.member_id, record.session_index + 1, candidate)
    return AuthOutcome(True, rolled, hash_f(candidate))
