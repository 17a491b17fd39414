"""
Year-quarter labels (closed vocabulary YYYYQn, no calendar arithmetic)
"""

import re
from typing import List, Sequence

from src.core.errors import PanelError

_QUARTER = re.compile(r"^(\d{4})Q([1-4])$")


def quarter_ordinal(label: str) -> int:
    """Map '2018Q1' to a running quarter count"""
    match = _QUARTER.match(str(label).strip().upper())
    if not match:
        raise PanelError(f"Invalid quarter label '{label}', expected YYYYQn")
    return int(match.group(1)) * 4 + int(match.group(2)) - 1


def quarter_label(ordinal: int) -> str:
    year, q = divmod(int(ordinal), 4)
    return f"{year:04d}Q{q + 1}"


def normalize_quarter(label: str) -> str:
    return quarter_label(quarter_ordinal(label))


def quarter_range(start: str, end: str) -> List[str]:
    """Inclusive run of consecutive quarter labels"""
    first, last = quarter_ordinal(start), quarter_ordinal(end)
    if last < first:
        raise PanelError(f"Quarter range {start}..{end} is empty")
    return [quarter_label(o) for o in range(first, last + 1)]


def quarter_sequence(start: str, count: int) -> List[str]:
    first = quarter_ordinal(start)
    return [quarter_label(first + i) for i in range(count)]


def quarter_position(quarters: Sequence[str], label: str) -> int:
    """Column index of a label inside a panel's quarter axis"""
    target = quarter_ordinal(label)
    for i, q in enumerate(quarters):
        if quarter_ordinal(q) == target:
            return i
    raise PanelError(f"Quarter {label} lies outside the panel range {quarters[0]}..{quarters[-1]}")
