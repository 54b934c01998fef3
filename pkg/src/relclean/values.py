"""Tagged scalar values used for cells and object attributes.

Five kinds are supported: string, real, integer, categorical token, and
timestamp (minute-of-day).  Cells hold a value or ``None`` for missing.
Python scalars carry the tag implicitly: ``str`` for strings and
categorical tokens, ``int``/``float`` for integers/reals, and the
``Minute`` int subclass for timestamps.
"""

from __future__ import annotations

import re

MISSING = None

KIND_STRING = "string"
KIND_REAL = "real"
KIND_INTEGER = "integer"
KIND_CATEGORICAL = "categorical"
KIND_TIMESTAMP = "timestamp"


class Minute(int):
    """Minute-of-day timestamp (0..1439). Equality is minute-granular."""

    __slots__ = ()

    def __repr__(self):
        return f"Minute({int(self):d})"

    def __str__(self):
        return render_minute(int(self))


_AMPM_RE = re.compile(
    r"^\s*(\d{1,2})[:.](\d{2})\s*(a\.?m\.?|p\.?m\.?|am|pm|a|p)\s*$", re.IGNORECASE
)
_HHMM_RE = re.compile(r"^\s*(\d{1,2}):(\d{2})(?::\d{2})?\s*$")
_COMPACT_RE = re.compile(r"^\s*(\d{1,2})(\d{2})\s*$")
_NOON_RE = re.compile(r"^\s*(12)\s*(noon|midnight)\s*$", re.IGNORECASE)

TIME_FORMATS = ("HH:MM", "HH:MM:SS", "H:MM am/pm", "HMM compact", "12 noon/midnight")


def parse_minute(text: str) -> Minute | None:
    """Parse a clock time in one of the accepted formats, or None."""
    m = _HHMM_RE.match(text)
    if m:
        h, mi = int(m.group(1)), int(m.group(2))
        if h < 24 and mi < 60:
            return Minute(h * 60 + mi)
        return None
    m = _AMPM_RE.match(text)
    if m:
        h, mi = int(m.group(1)), int(m.group(2))
        if not (1 <= h <= 12 and mi < 60):
            return None
        suffix = m.group(3).lower()
        pm = suffix.startswith("p")
        h = h % 12
        if pm:
            h += 12
        return Minute(h * 60 + mi)
    m = _COMPACT_RE.match(text)
    if m:
        h, mi = int(m.group(1)), int(m.group(2))
        if h < 24 and mi < 60:
            return Minute(h * 60 + mi)
        return None
    m = _NOON_RE.match(text)
    if m:
        return Minute(0 if m.group(2).lower() == "midnight" else 12 * 60)
    return None


def render_minute(total: int) -> str:
    return f"{total // 60:02d}:{total % 60:02d}"


def parse_cell(text: str | None, kind: str):
    """Parse one CSV cell according to a value kind. Empty/"NULL" is missing."""
    if text is None:
        return MISSING
    stripped = text.strip()
    if stripped == "" or stripped == "NULL":
        return MISSING
    if kind == KIND_TIMESTAMP:
        minute = parse_minute(stripped)
        # Unparseable timestamps stay as raw strings so they can still be
        # compared and reported rather than silently dropped.
        return minute if minute is not None else stripped
    if kind == KIND_REAL:
        try:
            return float(stripped)
        except ValueError:
            return stripped
    if kind == KIND_INTEGER:
        try:
            return int(stripped)
        except ValueError:
            try:
                return float(stripped)
            except ValueError:
                return stripped
    return stripped


def render_value(v) -> str:
    """Canonical text form of a value for CSV output."""
    if v is MISSING:
        return ""
    if isinstance(v, Minute):
        return render_minute(int(v))
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


def values_equal(a, b, rel_tol: float = 1e-6) -> bool:
    """Scoring equality: strings exact after trimming, reals within relative
    tolerance, timestamps minute-granular."""
    if a is MISSING or b is MISSING:
        return a is MISSING and b is MISSING
    if isinstance(a, Minute) or isinstance(b, Minute):
        am = a if isinstance(a, Minute) else parse_minute(str(a).strip())
        bm = b if isinstance(b, Minute) else parse_minute(str(b).strip())
        if am is not None and bm is not None:
            return int(am) == int(bm)
        return str(a).strip() == str(b).strip()
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not (
        isinstance(a, bool) or isinstance(b, bool)
    ):
        fa, fb = float(a), float(b)
        if fa == fb:
            return True
        return abs(fa - fb) <= rel_tol * max(abs(fa), abs(fb))
    if isinstance(a, str) and isinstance(b, str):
        return a.strip() == b.strip()
    # Mixed text/number: compare numerically when both sides parse.
    try:
        return abs(float(a) - float(b)) <= rel_tol * max(abs(float(a)), abs(float(b)), 1e-300)
    except (TypeError, ValueError):
        return str(a).strip() == str(b).strip()
