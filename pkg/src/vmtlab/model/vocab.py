"""Token vocabulary with the four reserved specials."""

from __future__ import annotations

import json
from typing import Iterable, Sequence, TextIO

from ..errors import DataError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")


class Vocab:
    def __init__(self, tokens: Sequence[str]):
        for special in SPECIALS:
            if special in tokens:
                raise DataError(f"reserved token {special!r} in vocabulary")
        self.itos = list(SPECIALS) + list(tokens)
        if len(set(self.itos)) != len(self.itos):
            raise DataError("duplicate tokens in vocabulary")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    @classmethod
    def build(cls, token_streams: Iterable[Sequence[str]]) -> "Vocab":
        seen = set()
        for tokens in token_streams:
            seen.update(tokens)
        return cls(sorted(seen))

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(tok, UNK) for tok in tokens]

    def decode(self, ids: Sequence[int], strip_specials: bool = True) -> list[str]:
        out = []
        for i in ids:
            if strip_specials and i in (PAD, BOS, EOS):
                continue
            out.append(self.itos[i])
        return out

    def save(self, stream: TextIO) -> None:
        json.dump({"tokens": self.itos[len(SPECIALS) :]}, stream)

    @classmethod
    def load(cls, stream: TextIO) -> "Vocab":
        obj = json.load(stream)
        if not isinstance(obj, dict) or not isinstance(obj.get("tokens"), list):
            raise DataError("vocabulary file must contain a 'tokens' list")
        return cls(obj["tokens"])
