"""Run-level secrecy audit.

The recorder accumulates, over a whole simulation run, every key the servers
ever stored (the key universe), every key and every node code each member
ever legitimately held, every ciphertext emitted, and each member's
area-membership windows.

The oracle then asks, for every (member, ciphertext) pair: could this member
ever derive the encrypting key?  Derivation capability is the closure of the
member's key knowledge under f and f(. xor code), where the codes available
to a member are those of nodes on paths it has held: a member learns its own
leaf code at delivery and can strip digits to reach the root, but sibling
subtree codes are never handed to it.  Re-keying announcements are treated
as positional control metadata, not as revealing code values; a protocol
that broadcast literal codes would hand every past member the cover keys of
every future leave (f of a remembered group key xor a learned code), which
is exactly the derivation this oracle would then flag.

Expansion is pruned to the key universe, since a hash output that is not a
protocol key cannot re-enter the protocol key set except by hash collision.
A reachable key is only acceptable when the ciphertext was addressed to the
member or emitted inside one of its membership windows.  Backward secrecy
(joiners vs. pre-join traffic), forward secrecy (leavers vs. post-leave
traffic), and movement secrecy all fall out of this single property.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import Ciphertext, DecryptionError, decrypt, hash_f, hash_f_xor

Edge = tuple[str | None, bytes]  # (code used, derived key); None marks plain f


@dataclass(frozen=True)
class CipherRecord:
    enc_key: bytes
    time: int  # ticks
    area: str
    kind: str
    target: str | None = None  # member-id for unicasts
    ciphertext: Ciphertext | None = None


@dataclass
class Window:
    area: str
    start: int
    end: int | None = None  # open until further notice


@dataclass
class RunRecorder:
    key_universe: set[bytes] = field(default_factory=set)
    codes: set[str] = field(default_factory=set)  # every code ever in service
    knowledge: dict[str, set[bytes]] = field(default_factory=dict)
    member_codes: dict[str, set[str]] = field(default_factory=dict)
    ciphertexts: list[CipherRecord] = field(default_factory=list)
    windows: dict[str, list[Window]] = field(default_factory=dict)

    def record_keys(self, keys) -> None:
        self.key_universe.update(keys)

    def record_codes(self, codes) -> None:
        self.codes.update(codes)

    def note_knowledge(self, member: str, keys) -> None:
        self.knowledge.setdefault(member, set()).update(keys)

    def note_codes(self, member: str, codes) -> None:
        self.member_codes.setdefault(member, set()).update(codes)

    def record_ciphertext(self, rec: CipherRecord) -> None:
        self.ciphertexts.append(rec)
        self.key_universe.add(rec.enc_key)

    def open_window(self, member: str, area: str, t: int) -> None:
        self.windows.setdefault(member, []).append(Window(area, t))

    def close_window(self, member: str, area: str, t: int) -> None:
        for w in reversed(self.windows.get(member, [])):
            if w.area == area and w.end is None:
                w.end = t
                return
        raise RuntimeError(f"no open window for {member} in {area}")


def derivation_edges(universe: set[bytes], codes: set[str]) -> dict[bytes, list[Edge]]:
    """Recompute, from first principles, every derivation step that lands
    back inside the key universe, labelled with the code it consumes."""
    edges: dict[bytes, list[Edge]] = {}
    code_list = sorted(codes)
    for key in universe:
        outs: list[Edge] = []
        candidate = hash_f(key)
        if candidate in universe:
            outs.append((None, candidate))
        for code in code_list:
            candidate = hash_f_xor(key, code)
            if candidate in universe:
                outs.append((code, candidate))
        if outs:
            edges[key] = outs
    return edges


def closure(
    knowledge: set[bytes], edges: dict[bytes, list[Edge]], codes: set[str]
) -> set[bytes]:
    """Keys reachable from ``knowledge`` along derivation edges whose code,
    if any, the member actually knows."""
    reached = set(knowledge)
    frontier = list(knowledge)
    while frontier:
        key = frontier.pop()
        for code, nxt in edges.get(key, ()):
            if code is not None and code not in codes:
                continue
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    return reached


def _legal(member: str, rec: CipherRecord, windows: list[Window]) -> bool:
    if rec.target == member:
        return True
    for w in windows:
        if w.area == rec.area and w.start <= rec.time and (w.end is None or rec.time < w.end):
            return True
    return False


def check_secrecy(rec: RunRecorder) -> list[str]:
    """Audit the run; returns human-readable violations (empty = clean)."""
    edges = derivation_edges(rec.key_universe, rec.codes)
    violations = []
    for member, known in rec.knowledge.items():
        reach = closure(known, edges, rec.member_codes.get(member, set()))
        wins = rec.windows.get(member, [])
        for ct in rec.ciphertexts:
            if ct.enc_key in reach and not _legal(member, ct, wins):
                violations.append(
                    f"{member} can derive the key of a {ct.kind} in {ct.area} at t={ct.time}"
                )
    return violations


def operational_decrypt_check(rec: RunRecorder, max_attempts: int = 4000) -> list[str]:
    """Belt-and-braces companion to the closure audit: actually try to open
    a bounded sample of out-of-window ciphertexts with every key the member
    ever held directly."""
    violations = []
    attempts = 0
    for member, known in rec.knowledge.items():
        wins = rec.windows.get(member, [])
        for ct in rec.ciphertexts:
            if ct.ciphertext is None or _legal(member, ct, wins):
                continue
            for key in known:
                attempts += 1
                if attempts > max_attempts:
                    return violations
                try:
                    decrypt(key, ct.ciphertext)
                except DecryptionError:
                    continue
                violations.append(
                    f"{member} opened a {ct.kind} in {ct.area} at t={ct.time}"
                )
    return violations
