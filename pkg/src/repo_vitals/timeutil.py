"""UTC timestamp helpers. All persisted timestamps are ISO-8601, seconds precision, ``Z`` suffix."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

DAY = timedelta(days=1)
MONTH = timedelta(days=30)
SECONDS_PER_DAY = 86_400
SECONDS_PER_MONTH = 30 * SECONDS_PER_DAY


def utc(ts: datetime) -> datetime:
    """Normalise to an aware UTC datetime truncated to whole seconds."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    else:
        ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=0)


def parse_ts(value: str) -> datetime:
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    return utc(datetime.fromisoformat(value))


def format_ts(ts: datetime) -> str:
    return utc(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def epoch(ts: datetime) -> int:
    return int(utc(ts).timestamp())


def from_epoch(seconds: int) -> datetime:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc)


def now() -> datetime:
    return utc(datetime.now(timezone.utc))
