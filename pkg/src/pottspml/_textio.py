"""Shared helpers for the whitespace-delimited text formats (LMAP/RIMG/EMIT).

Token positions in diagnostics are 1-based and count every whitespace-
separated token of the file, header included.
"""

from __future__ import annotations

from typing import Iterator


class FormatError(ValueError):
    """A map/image/model file violates its declared format."""


class TokenReader:
    """Sequential token reader that tracks 1-based token positions."""

    def __init__(self, text: str, filename: str = "<input>"):
        self.filename = filename
        self._tokens = text.split()
        self._pos = 0

    @property
    def position(self) -> int:
        return self._pos

    def next_token(self, expect: str) -> str:
        if self._pos >= len(self._tokens):
            raise FormatError(
                f"{self.filename}: token {self._pos + 1}: expected {expect}, "
                f"found end of file"
            )
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def next_int(self, expect: str) -> int:
        tok = self.next_token(expect)
        try:
            return int(tok)
        except ValueError:
            raise FormatError(
                f"{self.filename}: token {self._pos}: expected {expect}, "
                f"found {tok!r}"
            ) from None

    def next_float(self, expect: str) -> float:
        tok = self.next_token(expect)
        try:
            return float(tok)
        except ValueError:
            raise FormatError(
                f"{self.filename}: token {self._pos}: expected {expect}, "
                f"found {tok!r}"
            ) from None

    def expect_literal(self, literal: str) -> None:
        tok = self.next_token(f"{literal!r}")
        if tok != literal:
            raise FormatError(
                f"{self.filename}: token {self._pos}: expected {literal!r}, "
                f"found {tok!r}"
            )

    def expect_end(self) -> None:
        if self._pos < len(self._tokens):
            raise FormatError(
                f"{self.filename}: token {self._pos + 1}: unexpected trailing "
                f"token {self._tokens[self._pos]!r}"
            )

    def iter_remaining(self) -> Iterator[str]:
        while self._pos < len(self._tokens):
            yield self.next_token("value")
