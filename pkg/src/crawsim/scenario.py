"""Scenario files: strict JSON loading and validation.

A scenario pins everything a run depends on: the scheme, the seed, the
initial per-area rosters, extra registered members, timed events, and the
delay model.  Validation failures name the offending field so a bad file is
diagnosable without reading the loader.
"""

from __future__ import annotations

import json
from pathlib import Path

from .entities import SCHEMES
from .sim import DelayConfig, Scenario, ScenarioEvent, to_ticks

SCHEMA_VERSION = 1

# when a file omits "horizon", leave room after the last event for any
# in-flight hand-off (well under two seconds with default delays)
_HORIZON_MARGIN = to_ticks(2.0)

_TOP_KEYS = {
    "schema_version",
    "name",
    "seed",
    "scheme",
    "group",
    "horizon",
    "content_frames",
    "delays",
    "areas",
    "members",
    "events",
}

_EVENT_KEYS = {
    "join": {"time", "op", "member", "area"},
    "leave": {"time", "op", "member", "area"},
    "move": {"time", "op", "member", "from", "to"},
}


def _fail(field: str, msg: str) -> None:
    raise ValueError(f"{field}: {msg}")


def _need_str(doc: dict, field: str, default: str | None = None) -> str:
    value = doc.get(field, default)
    if not isinstance(value, str) or not value:
        _fail(field, "expected a non-empty string")
    return value


def _need_number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field, f"expected a number, got {value!r}")
    if value < 0:
        _fail(field, "must be non-negative")
    return float(value)


def validate_doc(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValueError("scenario: expected a JSON object at top level")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        _fail(sorted(unknown)[0], "unknown top-level field")
    if doc.get("schema_version") != SCHEMA_VERSION:
        _fail("schema_version", f"expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")

    name = _need_str(doc, "name")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("seed", f"expected an integer, got {seed!r}")
    scheme = _need_str(doc, "scheme")
    if scheme not in SCHEMES:
        _fail("scheme", f"expected one of {', '.join(SCHEMES)}")
    group_id = _need_str(doc, "group", default="group")

    delays_doc = doc.get("delays", {})
    if not isinstance(delays_doc, dict):
        _fail("delays", "expected an object")
    try:
        delays = DelayConfig.from_seconds(delays_doc)
    except ValueError as exc:
        raise ValueError(str(exc)) from None

    frames = doc.get("content_frames", False)
    if not isinstance(frames, bool):
        _fail("content_frames", "expected true or false")

    areas_doc = doc.get("areas")
    if not isinstance(areas_doc, dict) or not areas_doc:
        _fail("areas", "expected a non-empty object mapping area id to member list")
    roster: set[str] = set()
    areas: dict[str, list[str]] = {}
    for area_id, members in areas_doc.items():
        if not isinstance(area_id, str) or not area_id:
            _fail("areas", "area ids must be non-empty strings")
        if ":" in area_id or area_id == "main":
            _fail(f"areas.{area_id}", "area id collides with reserved names")
        if not isinstance(members, list):
            _fail(f"areas.{area_id}", "expected a list of member ids")
        for i, member in enumerate(members):
            if not isinstance(member, str) or not member:
                _fail(f"areas.{area_id}[{i}]", "member ids must be non-empty strings")
            if member in roster:
                _fail(f"areas.{area_id}[{i}]", f"{member} appears more than once")
            roster.add(member)
        areas[area_id] = list(members)

    extra_doc = doc.get("members", [])
    if not isinstance(extra_doc, list):
        _fail("members", "expected a list of member ids")
    extra: list[str] = []
    for i, member in enumerate(extra_doc):
        if not isinstance(member, str) or not member:
            _fail(f"members[{i}]", "member ids must be non-empty strings")
        if member in roster:
            _fail(f"members[{i}]", f"{member} appears more than once")
        roster.add(member)
        extra.append(member)

    events_doc = doc.get("events", [])
    if not isinstance(events_doc, list):
        _fail("events", "expected a list")
    events: list[ScenarioEvent] = []
    last_time = 0.0
    for i, ev in enumerate(events_doc):
        where = f"events[{i}]"
        if not isinstance(ev, dict):
            _fail(where, "expected an object")
        op = ev.get("op")
        if op not in _EVENT_KEYS:
            _fail(f"{where}.op", "expected join, leave, or move")
        unknown = set(ev) - _EVENT_KEYS[op]
        if unknown:
            _fail(f"{where}.{sorted(unknown)[0]}", f"unknown field for op {op!r}")
        seconds = _need_number(ev.get("time"), f"{where}.time")
        member = ev.get("member")
        if not isinstance(member, str) or member not in roster:
            _fail(f"{where}.member", f"{member!r} is not a registered member")
        if op == "move":
            src, dst = ev.get("from"), ev.get("to")
            if src not in areas:
                _fail(f"{where}.from", f"{src!r} is not a declared area")
            if dst not in areas:
                _fail(f"{where}.to", f"{dst!r} is not a declared area")
            if src == dst:
                _fail(f"{where}.to", "source and destination must differ")
            events.append(ScenarioEvent(to_ticks(seconds), "move", member, src=src, dst=dst))
        else:
            area = ev.get("area")
            if area not in areas:
                _fail(f"{where}.area", f"{area!r} is not a declared area")
            events.append(ScenarioEvent(to_ticks(seconds), op, member, area=area))
        last_time = max(last_time, seconds)
    events.sort(key=lambda e: e.time)  # stable: same-tick events keep file order

    if "horizon" in doc:
        horizon = to_ticks(_need_number(doc["horizon"], "horizon"))
    else:
        horizon = to_ticks(last_time) + _HORIZON_MARGIN
    if events and horizon < events[-1].time:
        _fail("horizon", "must not be earlier than the last event")

    return Scenario(
        name=name,
        seed=seed,
        scheme=scheme,
        group_id=group_id,
        horizon=horizon,
        delays=delays,
        areas=areas,
        extra_members=extra,
        events=events,
        frames_enabled=frames,
    )


def load_scenario(path: str | Path) -> Scenario:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return validate_doc(doc)


def apply_overrides(
    doc: dict,
    seed: int | None = None,
    scheme: str | None = None,
    pairs: list[str] | None = None,
) -> dict:
    """Apply command-line overrides to a raw scenario document.

    ``pairs`` are dotted ``key=value`` strings such as
    ``delays.t_probe=0.02``; values parse as JSON when possible and fall
    back to strings.
    """
    out = json.loads(json.dumps(doc))  # deep copy, json-only types
    if seed is not None:
        out["seed"] = seed
    if scheme is not None:
        out["scheme"] = scheme
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"override {pair!r}: expected key=value")
        dotted, _, raw_value = pair.partition("=")
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        node = out
        parts = dotted.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out
