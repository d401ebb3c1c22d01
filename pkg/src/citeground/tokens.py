"""Pluggable token counting.

Threshold decisions (chunking, stats) only need a consistent counter, not
an exact tokenizer. The default approximates tokens as ceil(utf8_bytes/4),
which is monotone under concatenation; callers that want a real tokenizer
pass their own counter callable.
"""

from __future__ import annotations

import math
from typing import Callable

TokenCounter = Callable[[str], int]


def approx_token_count(text: str) -> int:
    """ceil(byte_length / 4); 0 for empty text."""
    return math.ceil(len(text.encode("utf-8")) / 4)
