"""Phoneme inventory of the PCVC corpus (6 vowels, 23 consonants)."""

from __future__ import annotations

import enum


class VowelLabel(enum.Enum):
    A = "A"
    I = "I"
    U = "U"
    AE = "æ"
    E = "e"
    O = "o"

    @property
    def index(self) -> int:
        return _VOWEL_INDEX[self]

    @property
    def ascii(self) -> str:
        """Filesystem-safe spelling."""
        return "ae" if self is VowelLabel.AE else self.value

    @classmethod
    def parse(cls, text: str) -> "VowelLabel":
        text = text.strip()
        if text.lower() == "ae":
            return cls.AE
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown vowel {text!r}; expected one of {[v.value for v in cls]}") from None

    @classmethod
    def from_index(cls, i: int) -> "VowelLabel":
        return VOWELS[i]


VOWELS: tuple[VowelLabel, ...] = tuple(VowelLabel)
_VOWEL_INDEX = {v: i for i, v in enumerate(VOWELS)}

CONSONANTS: tuple[str, ...] = (
    "P", "B", "T", "D", "tʃ", "dʒ", "K", "G", "F", "V", "Kh", "Gh",
    "S", "Z", "ʃ", "ʒ", "M", "N", "H", "L", "R", "Q", "j",
)

assert len(CONSONANTS) == 23


def one_hot(labels, n: int = len(VOWELS)):
    import numpy as np

    out = np.zeros((len(labels), n))
    out[np.arange(len(labels)), [v.index for v in labels]] = 1.0
    return out
