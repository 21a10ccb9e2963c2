"""Timestamp handling.

All timestamps are integers: microseconds since the Unix epoch, UTC.
Input accepts ISO-8601 dates and datetimes (naive values are taken as UTC,
offsets are honored, a trailing ``Z`` is accepted on Python 3.10).
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

MICROS_PER_SECOND = 1_000_000
MICROS_PER_MINUTE = 60 * MICROS_PER_SECOND
MICROS_PER_HOUR = 60 * MICROS_PER_MINUTE
MICROS_PER_DAY = 24 * MICROS_PER_HOUR
MICROS_PER_WEEK = 7 * MICROS_PER_DAY
# Months are a fixed 30 days; see the language docs for rationale.
MICROS_PER_MONTH = 30 * MICROS_PER_DAY

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 date or datetime to epoch microseconds (UTC)."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - _EPOCH
    return (delta.days * MICROS_PER_DAY) + delta.seconds * MICROS_PER_SECOND + delta.microseconds


def format_timestamp(micros: int) -> str:
    """Render epoch microseconds as a canonical UTC ISO-8601 string.

    Sub-second digits are omitted when zero so common timestamps stay short.
    """
    dt = _EPOCH + timedelta(microseconds=int(micros))
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + "Z"


def format_duration(micros: int) -> str:
    """Humanize a duration for plan explanations and CLI summaries."""
    m = int(micros)
    if m == 0:
        return "0d"
    if m % MICROS_PER_DAY == 0:
        return f"{m // MICROS_PER_DAY}d"
    if m % MICROS_PER_HOUR == 0:
        return f"{m // MICROS_PER_HOUR}h"
    if m % MICROS_PER_MINUTE == 0:
        return f"{m // MICROS_PER_MINUTE}m"
    if m % MICROS_PER_SECOND == 0:
        return f"{m // MICROS_PER_SECOND}s"
    return f"{m}us"


def parse_duration(text: str) -> int:
    """Parse a duration like ``45d``, ``12h``, ``30m``, ``10s`` to microseconds."""
    raw = text.strip().lower()
    units = {
        "d": MICROS_PER_DAY,
        "h": MICROS_PER_HOUR,
        "m": MICROS_PER_MINUTE,
        "s": MICROS_PER_SECOND,
        "w": MICROS_PER_WEEK,
    }
    if raw and raw[-1] in units:
        return int(raw[:-1]) * units[raw[-1]]
    raise ValueError(f"cannot parse duration {text!r}; use e.g. 45d, 12h, 30m, 10s")
