"""Train tracks, Stallings graphs and cyclic-splitting dynamics for Out(F_n)."""

from outclass.words import (
    CyclicWord,
    FreeAutomorphism,
    NotAnAutomorphism,
    SearchCapExceeded,
    Word,
)

__all__ = [
    "CyclicWord",
    "FreeAutomorphism",
    "NotAnAutomorphism",
    "SearchCapExceeded",
    "Word",
]

__version__ = "0.1.0"
