"""The fixed 105-symbol character alphabet and index mapping.

Indices run 1..105; index 0 is the shared blank/pad code used both for
out-of-alphabet characters and for padding short documents. The symbol list
ships as a versioned data file so encodings stay reproducible across
releases. Cedilla-diacritic variants alias onto the comma-below forms (both
spellings occur in the wild) without counting toward the 105.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

ALPHABET_FILE = "alphabet_v1.txt"
BLANK_INDEX = 0

# accepted spelling variants -> canonical symbol
_ALIASES = {
    "ş": "ș",  # ş -> ș
    "ţ": "ț",  # ţ -> ț
    "Ş": "Ș",  # Ş -> Ș
    "Ţ": "Ț",  # Ţ -> Ț
}


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]
    index: dict[str, int]  # symbol (or alias) -> 1..len(symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def encode_char(self, ch: str) -> int:
        return self.index.get(ch, BLANK_INDEX)

    def __contains__(self, ch: str) -> bool:
        return ch in self.index


def build_alphabet() -> Alphabet:
    """Load the versioned symbol list; exactly 105 symbols, stable order."""
    text = resources.files("charcnn.data").joinpath(ALPHABET_FILE).read_text("utf-8")
    unescape = {"<space>": " ", "<hash>": "#"}
    symbols: list[str] = []
    for line in text.splitlines():
        if not line or line.startswith("# "):
            continue
        symbols.append(unescape.get(line, line))
    if len(symbols) != len(set(symbols)):
        raise ValueError("alphabet file contains duplicate symbols")
    if len(symbols) != 105:
        raise ValueError(f"alphabet must have 105 symbols, file has {len(symbols)}")
    index = {s: i for i, s in enumerate(symbols, start=1)}
    for alias, canonical in _ALIASES.items():
        index[alias] = index[canonical]
    return Alphabet(symbols=tuple(symbols), index=index)
