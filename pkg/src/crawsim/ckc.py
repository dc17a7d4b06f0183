"""Code-based logical key tree (CKC re-keying).

Every node carries a decimal code: the root is a single digit, each child
appends one digit, and dropping the rightmost digit walks to the parent.
Middle-node keys are never shipped: they are derived locally as
f(AK xor code), so a join costs one unicast and zero multicasts, and a
leave costs one multicast per cover node.

Join: the group key is refreshed in place (AK' = f(AK), so current members
need no message), the insertion leaf is split, the middle keys on the
joiner's path are re-derived from AK', and the newcomer receives AK' plus
its parent code in a single unicast under its individual key.

Leave: the leaver's leaf and parent vanish, the sibling subtree is promoted
into the parent's position (descendants drop the digit at the promotion
depth), a fresh random AK' is multicast under each cover key (the siblings
along the leaver's old root path), and the middle keys the leaver held are
re-derived from AK'.

Cover safety: an internal node key is a deterministic function of a past
group key and a code string, so anyone who held that group key and learned
the exact string can recompute it.  Code strings resurface over time:
promotions re-code whole subtrees, and a member who returns after leaving
walks a fresh path whose positions may reuse strings that once named other
nodes.  Derivations are therefore domain-separated twice:

* trees serving distinct areas get distinct all-digit namespaces, so a
  string learned in one area never collides with a derivation in another;
* every leave opens a new generation, and derivations after the first
  leave carry the generation tag, so a string learned under one generation
  never reproduces a value derived under an earlier one.  Within a single
  generation only joins happen, paths only extend, and a member's strings
  are exactly the prefixes of its own leaf, which never include the cover
  codes (its path's siblings) of its own departure.

Generation zero derives with the bare code, so a freshly built tree matches
the textbook derivation exactly.  As a final guard the server also refuses
any cover key whose recorded derivation (string, epoch) is reproducible
from the remembered strings and lived-through epochs of a departed member
or the leaver, recursing to the cover's children instead; with the domain
separation above this guard is provably idle, and histories made only of
joins keep the canonical cover count equal to the leaver's depth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from random import Random

from .crypto import (
    KEY_WIDTH,
    Ciphertext,
    ProtocolError,
    encrypt,
    fingerprint,
    hash_f,
    hash_f_xor,
    random_digit,
    random_key,
)

ROOT_CODE = "1"


@dataclass
class RekeyCounters:
    """Per-event bookkeeping mirrored in reports: server key generations,
    encryptions performed, and unicast/multicast sends."""

    key_generations: int = 0
    encryptions: int = 0
    unicast_sends: int = 0
    multicast_sends: int = 0

    def __add__(self, other: "RekeyCounters") -> "RekeyCounters":
        return RekeyCounters(
            self.key_generations + other.key_generations,
            self.encryptions + other.encryptions,
            self.unicast_sends + other.unicast_sends,
            self.multicast_sends + other.multicast_sends,
        )


def parent_code(code: str) -> str:
    if len(code) < 2:
        raise ValueError("root code has no parent")
    return code[:-1]


def strict_ancestors(code: str) -> list[str]:
    """Codes strictly between the root and ``code``, top-down."""
    return [code[:i] for i in range(2, len(code))]


GENERATION_LIMIT = 999


def generation_tag(generation: int) -> str:
    """Digit tag mixed into derivations: empty for the first generation,
    then a fixed-width counter that always starts with 0 so it can never be
    read as the first digits of a code (codes start at the root digit 1)."""
    if generation == 0:
        return ""
    if not 0 < generation <= GENERATION_LIMIT:
        raise ProtocolError(f"generation {generation} out of range")
    return f"0{generation:03d}"


def middle_key(namespace: str, generation: int, ak: bytes, code: str) -> bytes:
    """Internal node key: f(AK xor domain-separated code string)."""
    return hash_f_xor(ak, namespace + generation_tag(generation) + code)


@dataclass
class JoinNotice:
    """Plaintext announcement that triggers local re-derivation.

    Key material never rides on it: current members only need to learn that
    a join happened and which path positions were touched.
    """

    epoch: int
    joiner_id: str
    joiner_leaf: str
    split_code: str | None  # former code of the leaf that was split
    occupant_leaf: str | None  # where the split leaf's occupant moved
    affected_codes: list[str] = field(default_factory=list)  # top-down
    generation: int = 0


@dataclass
class LeaveNotice:
    epoch: int
    leaver_id: str
    leaver_code: str
    promoted_src: str | None  # sibling subtree root before promotion
    promoted_dst: str | None  # position (and code) it was promoted into
    affected_codes: list[str] = field(default_factory=list)
    cover_codes: list[str] = field(default_factory=list)  # pre-promotion
    generation: int = 0


@dataclass
class JoinResult:
    notice: JoinNotice
    unicast: Ciphertext  # under the joiner's individual key
    counters: RekeyCounters
    # server-side bookkeeping for the secrecy audit; never shipped to members
    unicast_key: bytes = b""


@dataclass
class LeaveResult:
    notice: LeaveNotice
    multicasts: list[tuple[str, Ciphertext]]  # (cover code, AK' payload)
    counters: RekeyCounters
    # per-payload encryption keys, aligned with ``multicasts``; audit only
    cover_keys: list[bytes] = field(default_factory=list)


class CkcTree:
    """Server-side key tree: code -> key, member -> leaf code.

    Besides the live nodes the tree remembers, per member ever keyed into
    it, the code strings it was assigned and the epochs it was present for.
    Both sets only grow; they feed the cover-safety rule at leave time.
    """

    def __init__(self, group_key: bytes, namespace: str = ""):
        if namespace and not (namespace.isascii() and namespace.isdigit()):
            raise ValueError(f"namespace must be decimal digits, got {namespace!r}")
        self.namespace = namespace
        self.nodes: dict[str, bytes] = {ROOT_CODE: group_key}
        self.leaves: dict[str, str] = {}
        self.epoch = 0
        self.generation = 0  # bumped by every leave
        # every key ever stored, for the secrecy oracle's key universe
        self.key_history: set[bytes] = {group_key}
        # how each node's current value came to be: None for random material
        # (root draws, individual keys), else the (derivation string, epoch)
        # it was computed from; promotions relocate values with their record
        self.derived_from: dict[str, tuple[str, int] | None] = {ROOT_CODE: None}
        # per member: every derivation string ever on its path, and every
        # epoch it lived through (so: every group key it was handed)
        self.member_strings: dict[str, set[str]] = {}
        self.member_epochs: dict[str, set[int]] = {}

    @classmethod
    def new(cls, rng: Random, namespace: str = "") -> "CkcTree":
        return cls(random_key(rng), namespace)

    def group_key(self) -> bytes:
        return self.nodes[ROOT_CODE]

    def member_count(self) -> int:
        return len(self.leaves)

    def depth_of(self, member_id: str) -> int:
        return len(self.leaves[member_id]) - 1

    def path_codes(self, leaf_code: str) -> list[str]:
        """All codes from root to the leaf, top-down."""
        return [leaf_code[:i] for i in range(1, len(leaf_code) + 1)]

    def _set(self, code: str, key: bytes, derived: tuple[str, int] | None = None) -> None:
        self.nodes[code] = key
        self.key_history.add(key)
        self.derived_from[code] = derived

    def _set_middle(self, code: str, ak: bytes) -> None:
        string = self.namespace + generation_tag(self.generation) + code
        self._set(code, hash_f_xor(ak, string), derived=(string, self.epoch))

    def _children(self, code: str) -> list[str]:
        n = len(code) + 1
        return sorted(c for c in self.nodes if len(c) == n and c.startswith(code))

    def _note_presence(self) -> None:
        """Accumulate, after an event, what each present member now knows."""
        prefix = self.namespace + generation_tag(self.generation)
        for member, leaf in self.leaves.items():
            strings = self.member_strings.setdefault(member, set())
            strings.update(prefix + c for c in self.path_codes(leaf))
            self.member_epochs.setdefault(member, set()).add(self.epoch)

    def dump(self) -> str:
        """Deterministic JSON snapshot (keys reduced to fingerprints)."""
        doc = {
            "root": ROOT_CODE,
            "epoch": self.epoch,
            "nodes": {c: fingerprint(k) for c, k in sorted(self.nodes.items())},
            "leaves": dict(sorted(self.leaves.items())),
        }
        return json.dumps(doc, sort_keys=True, indent=1)


@dataclass
class MemberKeyView:
    """One member's slice of the tree: exactly the keys on its root path."""

    member_id: str
    leaf_code: str
    keys: dict[str, bytes]
    epoch: int
    namespace: str = ""
    generation: int = 0

    def group_key(self) -> bytes:
        return self.keys[ROOT_CODE]

    def held_codes(self) -> list[str]:
        return sorted(self.keys)


def _join_plaintext(ak: bytes, parent: str) -> bytes:
    return ak + parent.encode("ascii")


def parse_join_unicast(plaintext: bytes) -> tuple[bytes, str]:
    """Split a decrypted join unicast into (AK', parent code)."""
    if len(plaintext) <= KEY_WIDTH:
        raise ProtocolError("join unicast payload too short")
    return plaintext[:KEY_WIDTH], plaintext[KEY_WIDTH:].decode("ascii")


def ckc_join(
    tree: CkcTree,
    member_id: str,
    individual_key: bytes,
    rng: Random,
    *,
    count_individual_key: bool = False,
) -> JoinResult:
    """Attach a member and roll the group key forward.

    ``count_individual_key`` adds the individual key to the generation
    counter for deployments where the server mints it instead of deriving
    it from authentication.
    """
    if member_id in tree.leaves:
        raise ProtocolError(f"{member_id} already in tree")

    ak_new = hash_f(tree.group_key())

    root_children = tree._children(ROOT_CODE)
    if len(root_children) < 2:
        # the root still has a free child slot (bootstrap or post-leave);
        # attach directly so 2^k members sit at depth k
        split = None
        occupant_leaf = None
        taken = "".join(c[-1] for c in root_children)
        leaf = ROOT_CODE + random_digit(rng, exclude=taken)
    else:
        # shallowest leaf, ties broken by smallest code; reserve room for
        # the namespace and a full-width generation tag in the derivation
        split = min(tree.leaves.values(), key=lambda c: (len(c), c))
        if len(tree.namespace) + 4 + len(split) + 1 > KEY_WIDTH:
            raise ProtocolError("tree depth exceeds code width")
        d_occ = random_digit(rng)
        occupant_leaf = split + d_occ
        leaf = split + random_digit(rng, exclude=d_occ)

    tree.epoch += 1
    tree._set(ROOT_CODE, ak_new)
    affected: list[str] = []
    if split is not None:
        occupant = next(m for m, c in tree.leaves.items() if c == split)
        tree.leaves[occupant] = occupant_leaf
        tree._set(occupant_leaf, tree.nodes[split])
        # the joiner's path positions turned internal or moved under AK'
        affected = strict_ancestors(leaf)
        for code in affected:
            tree._set_middle(code, ak_new)
    tree.leaves[member_id] = leaf
    tree._set(leaf, individual_key)
    tree._note_presence()

    notice = JoinNotice(
        epoch=tree.epoch,
        joiner_id=member_id,
        joiner_leaf=leaf,
        split_code=split,
        occupant_leaf=occupant_leaf,
        affected_codes=affected,
        generation=tree.generation,
    )
    unicast = encrypt(individual_key, _join_plaintext(ak_new, parent_code(leaf)))
    counters = RekeyCounters(
        key_generations=1 + (1 if count_individual_key else 0),
        encryptions=1,
        unicast_sends=1,
        multicast_sends=0,
    )
    return JoinResult(notice, unicast, counters, unicast_key=individual_key)


def _safe_covers(tree: CkcTree, leaver_leaf: str) -> list[str]:
    """Cover codes for a leave: the siblings along the leaver's root path,
    with any cover whose key a departed member (or the leaver) could
    recompute from its remembered strings and lived-through epochs replaced
    by its children, recursively.  Random-valued covers (individual keys)
    have nothing to recompute and are always safe.  The generation tagging
    makes this guard provably idle; it stays as a server-side invariant."""
    departed = [m for m in tree.member_strings if m not in tree.leaves]

    def recomputable(code: str) -> bool:
        derived = tree.derived_from[code]
        if derived is None:
            return False
        string, epoch = derived
        return any(
            string in tree.member_strings[m] and epoch in tree.member_epochs[m]
            for m in departed
        )

    def expand(code: str) -> list[str]:
        if not recomputable(code):
            return [code]
        out: list[str] = []
        for child in tree._children(code):
            out.extend(expand(child))
        return out

    covers: list[str] = []
    for code in tree.path_codes(leaver_leaf)[1:]:  # skip root, top-down
        for sib in tree._children(parent_code(code)):
            if sib != code:
                covers.extend(expand(sib))
    return covers


def ckc_leave(tree: CkcTree, member_id: str, rng: Random) -> LeaveResult:
    """Detach a member, promote its sibling subtree, and multicast a fresh
    group key under the cover keys."""
    if member_id not in tree.leaves:
        raise ProtocolError(f"{member_id} not in tree")
    leaf = tree.leaves.pop(member_id)

    # Cover set and keys are captured before any mutation: remaining members
    # must be able to open the payloads with keys they already hold.
    cover = [(code, tree.nodes[code]) for code in _safe_covers(tree, leaf)]
    del tree.nodes[leaf]
    del tree.derived_from[leaf]

    promoted_src = promoted_dst = None
    if len(leaf) > 2:  # parent is a proper internal node, not the root
        parent = parent_code(leaf)
        siblings = tree._children(parent)
        if len(siblings) == 1:
            promoted_src, promoted_dst = siblings[0], parent
            moved = [c for c in tree.nodes if c.startswith(promoted_src)]
            relocated = {
                promoted_dst + c[len(promoted_src):]: (tree.nodes[c], tree.derived_from[c])
                for c in moved
            }
            for c in moved:
                del tree.nodes[c]
                del tree.derived_from[c]
            for c, (key, derived) in relocated.items():
                tree.nodes[c] = key
                tree.derived_from[c] = derived
            for m, c in tree.leaves.items():
                if c.startswith(promoted_src):
                    tree.leaves[m] = promoted_dst + c[len(promoted_src):]

    if tree.generation >= GENERATION_LIMIT:
        raise ProtocolError("generation counter exhausted")
    tree.generation += 1
    tree.epoch += 1
    ak_new = random_key(rng)
    tree._set(ROOT_CODE, ak_new)
    # middle keys the leaver held are re-derived under the fresh AK'
    affected = [] if promoted_dst is None else strict_ancestors(promoted_dst)
    for code in affected:
        tree._set_middle(code, ak_new)
    tree._note_presence()

    notice = LeaveNotice(
        epoch=tree.epoch,
        leaver_id=member_id,
        leaver_code=leaf,
        promoted_src=promoted_src,
        promoted_dst=promoted_dst,
        affected_codes=affected,
        cover_codes=[c for c, _ in cover],
        generation=tree.generation,
    )
    multicasts = [(code, encrypt(key, ak_new)) for code, key in cover]
    counters = RekeyCounters(
        key_generations=1,
        encryptions=len(multicasts),
        unicast_sends=0,
        multicast_sends=len(multicasts),
    )
    return LeaveResult(notice, multicasts, counters, cover_keys=[k for _, k in cover])


def build_joiner_view(
    member_id: str,
    individual_key: bytes,
    ak_new: bytes,
    parent: str,
    notice: JoinNotice,
    namespace: str = "",
) -> MemberKeyView:
    """Assemble the newcomer's view from the unicast contents and the
    announced leaf assignment."""
    leaf = notice.joiner_leaf
    if parent_code(leaf) != parent:
        raise ProtocolError("announced leaf does not extend the delivered parent code")
    keys = {ROOT_CODE: ak_new, leaf: individual_key}
    for code in strict_ancestors(leaf):
        keys[code] = middle_key(namespace, notice.generation, ak_new, code)
    return MemberKeyView(member_id, leaf, keys, notice.epoch, namespace, notice.generation)


def _check_epoch(view: MemberKeyView, epoch: int) -> bool:
    """True when the notice should be applied; False for stale re-delivery."""
    if epoch <= view.epoch:
        return False
    if epoch != view.epoch + 1:
        raise ProtocolError(
            f"{view.member_id} missed an announcement (view at {view.epoch}, notice {epoch})"
        )
    return True


def ckc_member_refresh_join(view: MemberKeyView, notice: JoinNotice) -> MemberKeyView:
    """Local update on a join announcement: roll AK forward and re-derive
    the touched middle keys that sit on the own path."""
    if not _check_epoch(view, notice.epoch):
        return view
    ak_new = hash_f(view.group_key())
    if notice.split_code is not None and view.leaf_code == notice.split_code:
        # this member occupied the split leaf; it slides down one level
        view.keys[notice.occupant_leaf] = view.keys.pop(notice.split_code)
        view.leaf_code = notice.occupant_leaf
    view.keys[ROOT_CODE] = ak_new
    for code in notice.affected_codes:
        if view.leaf_code.startswith(code):
            view.keys[code] = middle_key(view.namespace, notice.generation, ak_new, code)
    view.epoch = notice.epoch
    return view


def ckc_member_refresh_leave(
    view: MemberKeyView,
    notice: LeaveNotice,
    multicasts: list[tuple[str, Ciphertext]],
) -> MemberKeyView:
    """Local update on a leave: open the cover payload this member can read,
    re-code if inside the promoted subtree, and re-derive affected keys."""
    from .crypto import decrypt  # local import keeps module load light

    if view.member_id == notice.leaver_id:
        raise ProtocolError("departed member cannot refresh")
    if not _check_epoch(view, notice.epoch):
        return view

    mine = [c for c in notice.cover_codes if view.leaf_code.startswith(c)]
    if len(mine) != 1:
        raise ProtocolError(f"{view.member_id} matches {len(mine)} cover nodes, expected 1")
    payload = next(ct for code, ct in multicasts if code == mine[0])
    ak_new = decrypt(view.keys[mine[0]], payload)

    if notice.promoted_src is not None and view.leaf_code.startswith(notice.promoted_src):
        # inside the promoted subtree every held code drops the digit at the
        # promotion depth; the key values themselves are unchanged, and the
        # old parent key dies with its position (the subtree root replaces it)
        src, dst = notice.promoted_src, notice.promoted_dst
        recoded: dict[str, bytes] = {}
        for c, k in view.keys.items():
            if c == dst:
                continue
            recoded[dst + c[len(src):] if c.startswith(src) else c] = k
        view.keys = recoded
        view.leaf_code = dst + view.leaf_code[len(src):]

    view.keys[ROOT_CODE] = ak_new
    view.generation = notice.generation
    for code in notice.affected_codes:
        if view.leaf_code.startswith(code):
            view.keys[code] = middle_key(view.namespace, notice.generation, ak_new, code)
    view.epoch = notice.epoch
    return view


def view_matches_tree(view: MemberKeyView, tree: CkcTree) -> bool:
    """Consistency oracle: the view holds exactly the root-path codes, every
    key equals the server's at the same code, and the counters agree."""
    if view.epoch != tree.epoch or view.generation != tree.generation:
        return False
    expected = tree.path_codes(view.leaf_code)
    if sorted(view.keys) != sorted(expected):
        return False
    return all(view.keys[c] == tree.nodes.get(c) for c in expected)
