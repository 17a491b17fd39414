"""
GenAI keyword dictionary and mention counting over filing text
"""

import logging
import os
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Pattern, Sequence, Tuple

import numpy as np

from src.core.errors import PanelError
from src.core.paths import asset_path

LOGGER = logging.getLogger(__name__)

_HEADER = re.compile(r"^\[(?P<name>[^\]]+)\]$")


@dataclass(frozen=True)
class KeywordDictionary:
    """Named categories of case-insensitive phrases"""

    categories: Dict[str, Tuple[str, ...]]

    def __post_init__(self):
        seen: Dict[str, str] = {}
        cleaned = {}
        for category, phrases in self.categories.items():
            kept = []
            for phrase in phrases:
                phrase = " ".join(str(phrase).split())
                if not phrase:
                    raise PanelError(f"Empty phrase in keyword category '{category}'")
                key = phrase.lower()
                if key in seen:
                    raise PanelError(
                        f"Phrase '{phrase}' appears in both '{seen[key]}' and '{category}'"
                    )
                seen[key] = category
                kept.append(phrase)
            cleaned[category] = tuple(kept)
        object.__setattr__(self, "categories", cleaned)

    @property
    def phrases(self) -> List[str]:
        return [p for phrases in self.categories.values() for p in phrases]

    @cached_property
    def patterns(self) -> List[Pattern]:
        # Whole-phrase match: no word character may touch either end
        compiled = []
        for phrase in self.phrases:
            body = r"\s+".join(re.escape(token) for token in phrase.split())
            compiled.append(re.compile(rf"(?<!\w){body}(?!\w)", re.IGNORECASE))
        return compiled


def count_mentions(document: str, dictionary: KeywordDictionary) -> int:
    """Sum over phrases of non-overlapping, case-insensitive whole-phrase occurrences"""
    if not document:
        return 0
    return sum(len(pattern.findall(document)) for pattern in dictionary.patterns)


def count_by_category(document: str, dictionary: KeywordDictionary) -> Dict[str, int]:
    return {
        name: count_mentions(document, KeywordDictionary({name: phrases}))
        for name, phrases in dictionary.categories.items()
    }


def parse_keywords(text: str) -> KeywordDictionary:
    """Parse '[category]' headers followed by one phrase per line; '#' starts a comment"""
    categories: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _HEADER.match(line)
        if header:
            current = header.group("name").strip()
            categories.setdefault(current, [])
            continue
        if current is None:
            raise PanelError(f"Keyword line {lineno} appears before any [category] header")
        categories[current].append(line)
    if not categories:
        raise PanelError("Keyword dictionary has no categories")
    return KeywordDictionary({k: tuple(v) for k, v in categories.items()})


def load_keywords(path: str) -> KeywordDictionary:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_keywords(handle.read())


def default_keywords() -> KeywordDictionary:
    """Core, application and strategic GenAI phrases shipped in data/keywords.txt"""
    path = asset_path("data", "keywords.txt")
    if path is None:
        raise PanelError("Default keyword dictionary data/keywords.txt not found")
    return load_keywords(path)


def mentions_from_corpus(directory: str, dictionary: KeywordDictionary,
                         entity_ids: Sequence[str], quarters: Sequence[str]) -> np.ndarray:
    """N x T mention counts from files named '<entity>_<quarter>.txt'; absent files count 0"""
    counts = np.zeros((len(entity_ids), len(quarters)))
    found = 0
    for i, entity in enumerate(entity_ids):
        for t, quarter in enumerate(quarters):
            path = os.path.join(directory, f"{entity}_{quarter}.txt")
            if not os.path.exists(path):
                continue
            with open(path, "r", encoding="utf-8", errors="replace") as handle:
                counts[i, t] = count_mentions(handle.read(), dictionary)
            found += 1
    LOGGER.info("Counted mentions in %d documents under %s", found, directory)
    return counts
