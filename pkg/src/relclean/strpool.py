"""Interned strings with packed char-code arrays for the DP kernels.

The typo-likelihood kernels work on int32 code arrays. Interning every
string once keeps per-pair likelihood lookups cacheable by integer id and
lets whole candidate domains be packed into one buffer per kernel call.
"""

from __future__ import annotations

import numpy as np

# Alphabet for string models: lowercase letters, digits, space, common
# punctuation. Everything else folds to code 0 ("other").
ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789 .,'-&()/_:#"
ALPHABET_SIZE = len(ALPHABET) + 1  # +1 for the fold-in "other" code
_CODE_OF = {c: i + 1 for i, c in enumerate(ALPHABET)}


def encode(s: str) -> np.ndarray:
    """Case-folded int32 code array for a string."""
    return np.array([_CODE_OF.get(c, 0) for c in s.lower()], dtype=np.int32)


class StringPool:
    """Bidirectional string <-> id map with cached code arrays."""

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []
        self._codes: list[np.ndarray] = []

    def intern(self, s: str) -> int:
        sid = self._ids.get(s)
        if sid is None:
            sid = len(self._strings)
            self._ids[s] = sid
            self._strings.append(s)
            self._codes.append(encode(s))
        return sid

    def string(self, sid: int) -> str:
        return self._strings[sid]

    def codes(self, sid: int) -> np.ndarray:
        return self._codes[sid]

    def pack(self, sids: list[int]) -> tuple[np.ndarray, np.ndarray]:
        """Concatenate code arrays, returning (buffer, offsets)."""
        offsets = np.zeros(len(sids) + 1, dtype=np.int64)
        arrays = []
        pos = 0
        for i, sid in enumerate(sids):
            arr = self._codes[sid]
            pos += arr.shape[0]
            offsets[i + 1] = pos
            arrays.append(arr)
        if arrays:
            buf = np.concatenate(arrays)
        else:
            buf = np.zeros(0, dtype=np.int32)
        return buf, offsets


POOL = StringPool()
