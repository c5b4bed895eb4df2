"""Tokenizers for metric computation.

``tokenize_zh`` splits every CJK codepoint into its own token while leaving
runs of other non-space characters intact, which is how Chinese MT output is
conventionally scored.  ``tokenize`` is plain whitespace splitting.
"""

# Inclusive codepoint ranges treated as CJK: unified ideographs and their
# extensions, compatibility ideographs, radicals, strokes, kana-width and
# full-width forms, CJK punctuation, and enclosed/compatibility blocks.
_CJK_RANGES = (
    (0x3400, 0x4DB5),
    (0x4E00, 0x9FA5),
    (0x9FA6, 0x9FBB),
    (0xF900, 0xFA2D),
    (0xFA30, 0xFA6A),
    (0xFA70, 0xFAD9),
    (0x20000, 0x2A6D6),
    (0x2F800, 0x2FA1D),
    (0xFF00, 0xFFEF),
    (0x2E80, 0x2EFF),
    (0x3000, 0x303F),
    (0x31C0, 0x31EF),
    (0x2F00, 0x2FDF),
    (0x2FF0, 0x2FFF),
    (0x3100, 0x312F),
    (0x31A0, 0x31BF),
    (0xFE10, 0xFE1F),
    (0xFE30, 0xFE4F),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
    (0x3200, 0x32FF),
    (0x3300, 0x33FF),
)


def is_cjk_char(char: str) -> bool:
    code = ord(char)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


def tokenize_zh(text: str) -> list[str]:
    """Character-level tokens for CJK, run-level tokens for everything else."""
    tokens: list[str] = []
    run: list[str] = []
    for char in text:
        if char.isspace():
            if run:
                tokens.append("".join(run))
                run = []
        elif is_cjk_char(char):
            if run:
                tokens.append("".join(run))
                run = []
            tokens.append(char)
        else:
            run.append(char)
    if run:
        tokens.append("".join(run))
    return tokens


def tokenize(text: str) -> list[str]:
    return text.split()


def get_tokenizer(name: str):
    if name == "zh":
        return tokenize_zh
    if name == "whitespace":
        return tokenize
    raise ValueError(f"unknown tokenizer: {name!r}")
