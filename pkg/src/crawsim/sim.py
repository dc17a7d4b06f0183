"""Deterministic discrete-event simulator for one multicast group.

Time is integer ticks at 100 nanoseconds so every delay constant in the
timing model is represented exactly; seconds appear only at the formatting
boundary.  A binary heap orders work as (tick, priority, sequence): protocol
steps run before content frames scheduled on the same tick, and equal keys
preserve scheduling order, so a run is a pure function of the scenario and
its seed.

Scheme variants covered by one procedure set:

* ``ckc_craw``     one-time-password authentication; the member's individual
                   key falls out of the accepted credential, so the join
                   setup is the re-authentication delay alone.
* ``ckc_plain``    same tree, ordinary authentication; the server mints the
                   individual key and ships it over a secured channel, which
                   costs the key-generation and distribution delays.
* ``lkh``          binary logical key hierarchy baseline with ordinary
                   authentication.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from random import Random
from typing import Callable

from .ckc import RekeyCounters, generation_tag
from .crypto import DecryptionError, ProtocolError, decrypt, encrypt, fingerprint, random_key
from .entities import (
    STATUS_ACTIVE,
    STATUS_LEFT,
    STATUS_MOVING,
    AreaState,
    AuthAttempt,
    MainServer,
    MobileMember,
    ProtocolMessage,
    RekeyOutcome,
    run_auth,
)
from .otp import ClientSecret
from .secrecy import CipherRecord, RunRecorder

TICKS_PER_SECOND = 10_000_000  # 100 ns resolution


def to_ticks(seconds: float) -> int:
    if seconds < 0:
        raise ValueError("durations cannot be negative")
    return round(seconds * TICKS_PER_SECOND)


def fmt_ticks(ticks: int) -> str:
    """Render ticks as seconds with a fixed seven-place fraction."""
    return f"{ticks // TICKS_PER_SECOND}.{ticks % TICKS_PER_SECOND:07d}"


@dataclass(frozen=True)
class DelayConfig:
    """Timing model in ticks.  Defaults follow the wireless measurements the
    simulator is calibrated against."""

    probe: int = to_ticks(0.0195167)
    reauth: int = to_ticks(0.002517)
    reassoc: int = to_ticks(0.924)
    keygen: int = to_ticks(0.939)
    keydist: int = to_ticks(0.0)
    auth_ordinary: int = to_ticks(0.000237)
    frame_interval: int = to_ticks(0.01)

    _JSON_FIELDS = {
        "t_probe": "probe",
        "t_reauth": "reauth",
        "t_reassoc": "reassoc",
        "t_keygen": "keygen",
        "t_keydist": "keydist",
        "t_auth_ordinary": "auth_ordinary",
        "frame_interval": "frame_interval",
    }

    @classmethod
    def from_seconds(cls, mapping: dict) -> "DelayConfig":
        kwargs = {}
        for key, value in mapping.items():
            if key not in cls._JSON_FIELDS:
                raise ValueError(f"delays: unknown field {key!r}")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"delays.{key}: expected a number, got {value!r}")
            if value < 0:
                raise ValueError(f"delays.{key}: must be non-negative")
            kwargs[cls._JSON_FIELDS[key]] = to_ticks(value)
        return cls(**kwargs)

    def handoff_total(self) -> int:
        return self.probe + self.reauth + self.reassoc

    def join_setup(self, mode: str) -> int:
        """Setup latency between the join request and a usable group key."""
        if mode == "otp":
            return self.reauth
        return self.auth_ordinary + self.keygen + self.keydist

    def join_setup_delta(self) -> int:
        return self.join_setup("ordinary") - self.join_setup("otp")


@dataclass(frozen=True)
class ScenarioEvent:
    time: int  # ticks
    op: str  # "join" | "leave" | "move"
    member: str
    area: str | None = None  # join / leave
    src: str | None = None  # move
    dst: str | None = None


@dataclass
class Scenario:
    name: str
    seed: int
    scheme: str
    group_id: str
    horizon: int  # ticks
    delays: DelayConfig
    areas: dict[str, list[str]]  # initial roster per area
    extra_members: list[str]  # registered, not initially joined
    events: list[ScenarioEvent]
    frames_enabled: bool = False


@dataclass
class EventRow:
    event_id: int
    time: int
    kind: str  # join / leave / move_join / move_leave
    scheme: str
    area: str
    member: str
    size: int  # members keyed in the area after the event
    depth: int
    keys_produced: int
    counters: RekeyCounters


@dataclass
class JoinSetupRecord:
    member: str
    area: str
    mode: str  # "otp" or "ordinary"
    start: int
    done: int

    def setup(self) -> int:
        return self.done - self.start


@dataclass
class HandoffRecord:
    member: str
    src: str
    dst: str
    start: int
    probe: int
    auth: int
    key_prep: int  # individual-key generation wait, zero for otp
    reassoc: int
    completed: bool

    def total(self) -> int:
        return self.probe + self.auth + self.key_prep + self.reassoc


@dataclass(frozen=True)
class FrameRecord:
    time: int
    area: str
    member: str
    decrypted: bool


@dataclass
class MetricsLedger:
    events: list[EventRow] = field(default_factory=list)
    setups: list[JoinSetupRecord] = field(default_factory=list)
    handoffs: list[HandoffRecord] = field(default_factory=list)
    frames: list[FrameRecord] = field(default_factory=list)

    def totals(self) -> RekeyCounters:
        total = RekeyCounters(0, 0, 0, 0)
        for row in self.events:
            total = total + row.counters
        return total


_PRIO_OP = 0
_PRIO_FRAME = 1


class Simulation:
    """Runs one scenario to completion.

    ``on_event`` is invoked as ``on_event(sim, row)`` after every re-keying
    event, with all state and recorder updates already applied; test suites
    hang invariant checks there.
    """

    def __init__(
        self,
        scenario: Scenario,
        recorder: RunRecorder | None = None,
        on_event: Callable | None = None,
    ):
        self.sc = scenario
        self.rng = Random(scenario.seed)
        self.recorder = recorder if recorder is not None else RunRecorder()
        self.ledger = MetricsLedger()
        self.trace: list[ProtocolMessage] = []
        self.on_event = on_event
        self.main = MainServer(scenario.group_id)
        # each area's tree derives under its own all-digit code namespace,
        # so code strings learned in one area are inert in every other
        self.areas = {
            area_id: AreaState(area_id, scenario.scheme, self.rng, namespace=f"{idx:03d}")
            for idx, area_id in enumerate(sorted(scenario.areas))
        }
        self.members: dict[str, MobileMember] = {}
        self._heap: list = []
        self._seq = itertools.count()
        self._frame_seq: dict[str, int] = {a: 0 for a in self.areas}
        self._register_all()
        self._bootstrap()
        for ev in scenario.events:
            self._schedule(ev.time, _PRIO_OP, self._dispatch, ev)
        if scenario.frames_enabled and scenario.delays.frame_interval > 0:
            first = scenario.delays.frame_interval
            self._schedule(first, _PRIO_FRAME, self._frame_tick, first)

    # -- setup -----------------------------------------------------------

    def _register_all(self) -> None:
        roster = [m for a in sorted(self.sc.areas) for m in self.sc.areas[a]]
        roster += list(self.sc.extra_members)
        for member_id in roster:
            if member_id in self.members:
                raise ProtocolError(f"{member_id} listed twice in the scenario")
            if self.sc.scheme == "ckc_craw":
                secret = ClientSecret(member_id, b"pw:" + member_id.encode(), self.rng)
                member = MobileMember(member_id, secret=secret)
                entry = self.main.register_otp(secret)
                self.recorder.record_keys([entry.auth.stored_hash])
                self.recorder.note_knowledge(member_id, [entry.auth.stored_hash])
            else:
                credential = random_key(self.rng)
                member = MobileMember(member_id, credential=credential)
                self.main.register_credential(member_id, credential)
            self.members[member_id] = member

    def _bootstrap(self) -> None:
        """Key the initial rosters at t=0 without trace or metric rows."""
        for area_id in sorted(self.sc.areas):
            area = self.areas[area_id]
            for member_id in self.sc.areas[area_id]:
                member = self.members[member_id]
                attempt = run_auth(self.main, member, self.rng)
                if not attempt.accepted:
                    raise ProtocolError(f"bootstrap auth failed for {member_id}")
                self._note_auth_material(member)
                outcome = area.join(member, attempt.individual_key)
                member.current_area = area_id
                self.main.mainlist.advance(
                    member_id, self.sc.group_id, STATUS_ACTIVE, 0, last_area=area_id
                )
                self.recorder.open_window(member_id, area_id, 0)
                self._record_rekey(area, 0, outcome, target=member_id)

    # -- plumbing ---------------------------------------------------------

    def _schedule(self, ticks: int, prio: int, fn: Callable, *args) -> None:
        heapq.heappush(self._heap, (ticks, prio, next(self._seq), fn, args))

    def _emit(self, ticks: int, kind: str, src: str, dst: str, info: str = "-") -> None:
        self.trace.append(ProtocolMessage(ticks, kind, src, dst, info))

    def _note_auth_material(self, member: MobileMember) -> None:
        if member.secret is None:
            return
        entry = self.main.mainlist.lookup(member.member_id, self.sc.group_id)
        self.recorder.record_keys([entry.auth.stored_hash])
        self.recorder.note_knowledge(member.member_id, [entry.auth.stored_hash])

    def _record_rekey(self, area: AreaState, ticks: int, outcome: RekeyOutcome, target: str | None) -> None:
        tree = area.tree
        self.recorder.record_keys(tree.key_history)
        if self.sc.scheme != "lkh":
            # record the exact strings derivations consumed
            self.recorder.record_codes(
                d[0] for d in tree.derived_from.values() if d is not None
            )
        for msg in outcome.unicast_msgs:
            for p in msg.payloads:
                self.recorder.record_ciphertext(
                    CipherRecord(p.enc_key, ticks, area.area_id, "key_unicast", target=target, ciphertext=p.ciphertext)
                )
        for msg in outcome.multicast_msgs:
            for p in msg.payloads:
                self.recorder.record_ciphertext(
                    CipherRecord(p.enc_key, ticks, area.area_id, "key_multicast", ciphertext=p.ciphertext)
                )
        for m in area.members.values():
            view = m.views[area.area_id]
            self.recorder.note_knowledge(m.member_id, view.keys.values())
            if self.sc.scheme != "lkh":
                # the strings a member holds: its own root path, labelled
                # under the current namespace and generation
                prefix = tree.namespace + generation_tag(tree.generation)
                self.recorder.note_codes(m.member_id, (prefix + c for c in view.keys))

    def _append_event(self, ticks: int, kind: str, area: AreaState, member_id: str, outcome: RekeyOutcome) -> EventRow:
        row = EventRow(
            event_id=len(self.ledger.events) + 1,
            time=ticks,
            kind=kind,
            scheme=self.sc.scheme,
            area=area.area_id,
            member=member_id,
            size=area.size(),
            depth=outcome.depth,
            keys_produced=outcome.keys_produced,
            counters=outcome.counters,
        )
        self.ledger.events.append(row)
        if self.on_event is not None:
            self.on_event(self, row)
        return row

    def _auth_mode(self) -> str:
        return "otp" if self.sc.scheme == "ckc_craw" else "ordinary"

    def _auth_delay(self) -> int:
        d = self.sc.delays
        return d.reauth if self._auth_mode() == "otp" else d.auth_ordinary

    # -- event dispatch ---------------------------------------------------

    def _dispatch(self, ev: ScenarioEvent) -> None:
        handler = {"join": self._op_join, "leave": self._op_leave, "move": self._op_move}[ev.op]
        handler(ev)

    def run(self) -> "Simulation":
        while self._heap:
            ticks, _prio, _seq, fn, args = heapq.heappop(self._heap)
            fn(*args)
        return self

    def check_consistent(self) -> bool:
        return all(area.consistent() for area in self.areas.values())

    # -- join -------------------------------------------------------------

    def _op_join(self, ev: ScenarioEvent) -> None:
        member = self.members[ev.member]
        area = self.areas[ev.area]
        if member.busy:
            raise ProtocolError(f"{ev.member} already has an operation in flight")
        if member.current_area is not None:
            raise ProtocolError(f"{ev.member} is already keyed in {member.current_area}")
        member.busy = True
        t0 = ev.time
        self._emit(t0, "igmp_connect", ev.member, area.area_id)
        self._emit(t0, "join_request", ev.member, area.area_id, f"member={ev.member}")
        attempt = run_auth(self.main, member, self.rng)
        self._emit(t0, "auth_challenge", ev.member, area.area_id, attempt.detail)
        self._emit(t0, "mainlist_query", area.area_id, "main", f"member={ev.member}")
        self._emit(t0, "mainlist_update", "main", area.area_id, f"record member={ev.member}")
        self._schedule(t0 + self._auth_delay(), _PRIO_OP, self._join_auth_done, ev, attempt, t0)

    def _join_auth_done(self, ev: ScenarioEvent, attempt: AuthAttempt, t0: int) -> None:
        member = self.members[ev.member]
        area = self.areas[ev.area]
        t1 = t0 + self._auth_delay()
        self._emit(t1, "auth_result", area.area_id, ev.member, "accepted" if attempt.accepted else "rejected")
        if not attempt.accepted:
            member.busy = False
            return
        self._note_auth_material(member)
        if self._auth_mode() == "otp":
            self._finish_join(ev, attempt.individual_key, t0, t1)
        else:
            d = self.sc.delays
            self._schedule(t1 + d.keygen + d.keydist, _PRIO_OP, self._finish_join_ordinary, ev, attempt, t0)

    def _finish_join_ordinary(self, ev: ScenarioEvent, attempt: AuthAttempt, t0: int) -> None:
        d = self.sc.delays
        t2 = t0 + self._auth_delay() + d.keygen + d.keydist
        area = self.areas[ev.area]
        # individual key travels over the registration-secured channel;
        # it is not part of the re-keying payload accounting
        self._emit(
            t2, "key_unicast", area.area_id, ev.member,
            f"individual-key {fingerprint(attempt.individual_key)}",
        )
        self._finish_join(ev, attempt.individual_key, t0, t2)

    def _finish_join(self, ev: ScenarioEvent, individual_key: bytes, t0: int, t_done: int) -> None:
        member = self.members[ev.member]
        area = self.areas[ev.area]
        outcome = area.join(member, individual_key)
        self._emit_rekey_msgs(area, t_done, outcome, target=ev.member)
        member.current_area = area.area_id
        self.main.mainlist.advance(
            ev.member, self.sc.group_id, STATUS_ACTIVE, t_done, last_area=area.area_id
        )
        self._emit(t_done, "mainlist_update", area.area_id, "main", f"member={ev.member} status=active")
        self.recorder.open_window(ev.member, area.area_id, t_done)
        self._record_rekey(area, t_done, outcome, target=ev.member)
        self.ledger.setups.append(JoinSetupRecord(ev.member, area.area_id, self._auth_mode(), t0, t_done))
        self._append_event(t_done, "join", area, ev.member, outcome)
        member.busy = False

    def _emit_rekey_msgs(self, area: AreaState, ticks: int, outcome: RekeyOutcome, target: str | None) -> None:
        for msg in outcome.unicast_msgs:
            self._emit(ticks, "key_unicast", area.area_id, target or "-", msg.info())
        for msg in outcome.multicast_msgs:
            self._emit(ticks, "key_multicast", area.area_id, f"area:{area.area_id}", msg.info())

    # -- leave ------------------------------------------------------------

    def _op_leave(self, ev: ScenarioEvent) -> None:
        member = self.members[ev.member]
        area = self.areas[ev.area]
        if member.busy:
            raise ProtocolError(f"{ev.member} already has an operation in flight")
        if member.current_area != area.area_id:
            raise ProtocolError(f"{ev.member} is not active in {area.area_id}")
        t0 = ev.time
        self._emit(t0, "leave_request", ev.member, area.area_id, f"member={ev.member}")
        self._emit(t0, "leave_request", area.area_id, "main", f"member={ev.member}")
        self.main.mainlist.advance(ev.member, self.sc.group_id, STATUS_LEFT, t0, last_area=area.area_id)
        self._emit(t0, "mainlist_update", area.area_id, "main", f"member={ev.member} status=left")
        outcome = area.leave(member)
        member.current_area = None
        self._emit_rekey_msgs(area, t0, outcome, target=None)
        self.recorder.close_window(ev.member, area.area_id, t0)
        self._record_rekey(area, t0, outcome, target=None)
        self._append_event(t0, "leave", area, ev.member, outcome)

    # -- movement ---------------------------------------------------------

    def _op_move(self, ev: ScenarioEvent) -> None:
        member = self.members[ev.member]
        if member.busy:
            raise ProtocolError(f"{ev.member} already has an operation in flight")
        if ev.src == ev.dst:
            raise ProtocolError("move source and destination are the same area")
        if member.current_area != ev.src:
            raise ProtocolError(f"{ev.member} is not active in {ev.src}")
        member.busy = True
        # the probe phase scans channels; no protocol messages yet
        self._schedule(ev.time + self.sc.delays.probe, _PRIO_OP, self._move_detach, ev)

    def _move_detach(self, ev: ScenarioEvent) -> None:
        member = self.members[ev.member]
        t1 = ev.time + self.sc.delays.probe
        self._emit(t1, "handoff_leave", ev.member, ev.src)
        self._emit(t1, "handoff_join", ev.member, ev.dst)
        attempt = run_auth(self.main, member, self.rng)
        self._emit(t1, "auth_challenge", ev.member, ev.dst, attempt.detail)
        self.main.mainlist.advance(ev.member, self.sc.group_id, STATUS_MOVING, t1)
        self._emit(t1, "mainlist_update", ev.src, "main", f"member={ev.member} status=moving")
        self._emit(t1, "mainlist_query", ev.dst, "main", f"member={ev.member}")
        self._emit(t1, "mainlist_update", "main", ev.dst, f"record member={ev.member}")
        self._schedule(t1 + self._auth_delay(), _PRIO_OP, self._move_auth_done, ev, attempt, t1)

    def _move_auth_done(self, ev: ScenarioEvent, attempt: AuthAttempt, t1: int) -> None:
        member = self.members[ev.member]
        t2 = t1 + self._auth_delay()
        self._emit(t2, "auth_result", ev.dst, ev.member, "accepted" if attempt.accepted else "rejected")
        if not attempt.accepted:
            # the member never detached from the serving area; revert status
            self.main.mainlist.advance(ev.member, self.sc.group_id, STATUS_ACTIVE, t2)
            self._emit(t2, "mainlist_update", ev.dst, "main", f"member={ev.member} status=active")
            self.ledger.handoffs.append(
                HandoffRecord(
                    ev.member, ev.src, ev.dst, ev.time,
                    probe=self.sc.delays.probe, auth=self._auth_delay(),
                    key_prep=0, reassoc=0, completed=False,
                )
            )
            member.busy = False
            return
        self._note_auth_material(member)
        key_prep = 0
        if self._auth_mode() != "otp":
            key_prep = self.sc.delays.keygen + self.sc.delays.keydist
        self._schedule(t2 + key_prep + self.sc.delays.reassoc, _PRIO_OP, self._move_complete, ev, attempt, t2, key_prep)

    def _move_complete(self, ev: ScenarioEvent, attempt: AuthAttempt, t2: int, key_prep: int) -> None:
        member = self.members[ev.member]
        src, dst = self.areas[ev.src], self.areas[ev.dst]
        t3 = t2 + key_prep + self.sc.delays.reassoc
        if self._auth_mode() != "otp":
            self._emit(
                t3, "key_unicast", dst.area_id, ev.member,
                f"individual-key {fingerprint(attempt.individual_key)}",
            )
        join_outcome = dst.join(member, attempt.individual_key)
        member.current_area = dst.area_id
        self._emit_rekey_msgs(dst, t3, join_outcome, target=ev.member)
        self.main.mainlist.advance(ev.member, self.sc.group_id, STATUS_ACTIVE, t3, last_area=dst.area_id)
        self._emit(t3, "mainlist_update", dst.area_id, "main", f"member={ev.member} status=active")
        self.recorder.open_window(ev.member, dst.area_id, t3)
        self._record_rekey(dst, t3, join_outcome, target=ev.member)
        self._append_event(t3, "move_join", dst, ev.member, join_outcome)
        # the old area serves the member until this acknowledgement
        self._emit(t3, "area_join_ack", dst.area_id, src.area_id, f"member={ev.member}")
        leave_outcome = src.leave(member)
        self._emit_rekey_msgs(src, t3, leave_outcome, target=None)
        self.recorder.close_window(ev.member, src.area_id, t3)
        self._record_rekey(src, t3, leave_outcome, target=None)
        self._append_event(t3, "move_leave", src, ev.member, leave_outcome)
        self.ledger.handoffs.append(
            HandoffRecord(
                ev.member, ev.src, ev.dst, ev.time,
                probe=self.sc.delays.probe, auth=self._auth_delay(),
                key_prep=key_prep, reassoc=self.sc.delays.reassoc, completed=True,
            )
        )
        member.busy = False

    # -- content ----------------------------------------------------------

    def _frame_tick(self, ticks: int) -> None:
        for area_id in sorted(self.areas):
            area = self.areas[area_id]
            if area.size() == 0:
                continue
            self._frame_seq[area_id] += 1
            seq = self._frame_seq[area_id]
            group_key = area.group_key()
            frame = encrypt(group_key, f"{area_id}:{seq}".encode("ascii"))
            self._emit(ticks, "content_frame", area_id, f"area:{area_id}", f"seq={seq} {frame.fingerprint()}")
            self.recorder.record_ciphertext(
                CipherRecord(group_key, ticks, area_id, "content_frame", ciphertext=frame)
            )
            for member_id in sorted(area.members):
                member = area.members[member_id]
                member.delivered += 1
                self.main.mainlist.credit(member_id, self.sc.group_id)
                try:
                    decrypt(member.views[area_id].group_key(), frame)
                    ok = True
                except DecryptionError:
                    ok = False
                if ok:
                    member.decrypted += 1
                self.ledger.frames.append(FrameRecord(ticks, area_id, member_id, ok))
        nxt = ticks + self.sc.delays.frame_interval
        if nxt <= self.sc.horizon:
            self._schedule(nxt, _PRIO_FRAME, self._frame_tick, nxt)


# -- deterministic renderers ----------------------------------------------

METRICS_HEADER = "event_id,time,kind,scheme,area,keygen,enc,unicast,multicast"


def render_metrics_csv(ledger: MetricsLedger) -> str:
    lines = [METRICS_HEADER]
    for row in ledger.events:
        c = row.counters
        lines.append(
            f"{row.event_id},{fmt_ticks(row.time)},{row.kind},{row.scheme},{row.area},"
            f"{c.key_generations},{c.encryptions},{c.unicast_sends},{c.multicast_sends}"
        )
    return "\n".join(lines) + "\n"


def render_trace(trace: list[ProtocolMessage]) -> str:
    lines = [f"{fmt_ticks(m.time)} {m.kind} {m.src}->{m.dst} {m.info}" for m in trace]
    return "\n".join(lines) + "\n" if lines else ""


def render_mainlist(sim: Simulation) -> str:
    doc = {
        "group": sim.sc.group_id,
        "scheme": sim.sc.scheme,
        "entries": sim.main.mainlist.to_doc(fmt_ticks),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_report(sim: Simulation) -> str:
    sc = sim.sc
    d = sc.delays
    out = []
    sizes = " ".join(f"{a}={len(sc.areas[a])}" for a in sorted(sc.areas))
    out.append(f"run: {sc.name} scheme={sc.scheme} seed={sc.seed} horizon={fmt_ticks(sc.horizon)}")
    out.append(f"initial areas: {sizes}")
    out.append("")
    out.append("re-keying events:")
    for row in sim.ledger.events:
        c = row.counters
        out.append(
            f"  event {row.event_id} t={fmt_ticks(row.time)} {row.kind} member={row.member}"
            f" area={row.area} size={row.size} keygen={c.key_generations}"
            f" enc={c.encryptions} unicast={c.unicast_sends} multicast={c.multicast_sends}"
        )
    totals = sim.ledger.totals()
    out.append(
        f"totals: keygen={totals.key_generations} enc={totals.encryptions}"
        f" unicast={totals.unicast_sends} multicast={totals.multicast_sends}"
    )
    out.append("")
    out.append("re-keying cost, joins (keys the server produced for the event,")
    out.append("individual key included when server-minted):")
    for row in sim.ledger.events:
        if row.kind.endswith("join"):
            out.append(
                f"  event {row.event_id} {row.kind} area={row.area} size={row.size} cost={row.keys_produced}"
            )
    out.append("re-keying cost, leaves (tree levels re-keyed, the leaver's depth):")
    for row in sim.ledger.events:
        if row.kind.endswith("leave"):
            out.append(
                f"  event {row.event_id} {row.kind} area={row.area} size={row.size} cost={row.keys_produced}"
            )
    out.append("")
    out.append("timing model:")
    out.append(f"  join setup (otp auth) = {fmt_ticks(d.join_setup('otp'))}")
    out.append(f"  join setup (ordinary auth) = {fmt_ticks(d.join_setup('ordinary'))}")
    out.append(f"  join setup delta = {fmt_ticks(d.join_setup_delta())}")
    out.append(f"  hand-off = probe + reauth + reassoc = {fmt_ticks(d.handoff_total())}")
    if sim.ledger.setups:
        out.append("realized join setups:")
        for s in sim.ledger.setups:
            out.append(f"  member={s.member} area={s.area} mode={s.mode} setup={fmt_ticks(s.setup())}")
    if sim.ledger.handoffs:
        out.append("realized hand-offs:")
        for h in sim.ledger.handoffs:
            state = "completed" if h.completed else "refused"
            out.append(
                f"  member={h.member} {h.src}->{h.dst} probe={fmt_ticks(h.probe)}"
                f" auth={fmt_ticks(h.auth)} key_prep={fmt_ticks(h.key_prep)}"
                f" reassoc={fmt_ticks(h.reassoc)} total={fmt_ticks(h.total())} {state}"
            )
    if sim.ledger.frames:
        out.append("")
        out.append("content delivery:")
        per_member: dict[str, list[int]] = {}
        for fr in sim.ledger.frames:
            cell = per_member.setdefault(fr.member, [0, 0])
            cell[0] += 1
            cell[1] += 1 if fr.decrypted else 0
        for member_id in sorted(per_member):
            delivered, decrypted = per_member[member_id]
            out.append(f"  member={member_id} delivered={delivered} decrypted={decrypted}")
    out.append("")
    return "\n".join(out)
