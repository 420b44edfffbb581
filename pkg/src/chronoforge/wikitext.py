"""Best-effort wikitext to plain text conversion.

The cleaner is a total function: malformed markup never raises. Each markup
family is handled by its own pass, and the inline passes are iterated to a
fixed point so that removals which accidentally splice new markup together
(e.g. a dropped file link joining ``{`` + ``{``) are still cleaned up. The
output therefore never contains ``<``, ``>``, ``{{``, ``[[`` or ``<!--``, and
cleaning an already-clean string is a no-op.

Unbalanced constructs (an unterminated comment, ref, template or table) are
stripped through to the end of the text and reported as flags so ingestion
can mark the page in its cleaning report.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Link targets with these namespace prefixes are media/metadata, not prose:
# the whole construct is dropped instead of being reduced to anchor text.
_DROP_LINK_PREFIXES = ("file:", "image:", "category:")

_REF_OPEN_RE = re.compile(r"<ref(\s[^<>]*?)?>", re.IGNORECASE)
_REF_SELF_RE = re.compile(r"<ref(\s[^<>]*?)?/\s*>", re.IGNORECASE)
_REF_CLOSE_RE = re.compile(r"</ref\s*>", re.IGNORECASE)
_TAG_RE = re.compile(r"</?[A-Za-z][^<>]*?>")
_EXTERNAL_LINK_RE = re.compile(
    r"\[(?:(?:https?|ftp)://|//)[^\s\]]*([^\]]*)\]", re.IGNORECASE
)
_MAGIC_WORD_RE = re.compile(r"__[A-Z]+__")
_HEADING_RE = re.compile(r"^(=+)\s*(.*?)\s*(=+)\s*$")
_LIST_PREFIX_RE = re.compile(r"^[*#:;]+\s*")
_QUOTE_RUN_RE = re.compile(r"'{2,}")
_HSPACE_RE = re.compile(r"[ \t]+")

_MAX_FIXPOINT_ROUNDS = 50


@dataclass
class CleanResult:
    text: str
    flags: list[str] = field(default_factory=list)


def _strip_comments(text: str, flags: set[str]) -> str:
    out = []
    pos = 0
    while True:
        start = text.find("<!--", pos)
        if start < 0:
            out.append(text[pos:])
            break
        out.append(text[pos:start])
        end = text.find("-->", start + 4)
        if end < 0:
            flags.add("unclosed-comment")
            break
        pos = end + 3
    return "".join(out)


def _strip_refs(text: str, flags: set[str]) -> str:
    text = _REF_SELF_RE.sub("", text)
    out = []
    pos = 0
    while True:
        m = _REF_OPEN_RE.search(text, pos)
        if m is None:
            out.append(text[pos:])
            break
        out.append(text[pos : m.start()])
        close = _REF_CLOSE_RE.search(text, m.end())
        if close is None:
            flags.add("unclosed-ref")
            break
        pos = close.end()
    return "".join(out)


def _strip_braced(text: str, open_tok: str, close_tok: str, flag: str, flags: set[str]) -> str:
    """Remove nested ``open_tok ... close_tok`` blocks entirely.

    Used for templates ({{ }}), template parameters ({{{ }}}) and tables
    ({| |}). An unterminated block is stripped to end-of-text and flagged.
    """
    out = []
    pos = 0
    n = len(text)
    while True:
        start = text.find(open_tok, pos)
        if start < 0:
            out.append(text[pos:])
            break
        out.append(text[pos:start])
        depth = 1
        i = start + len(open_tok)
        while i < n and depth:
            if text.startswith(open_tok, i):
                depth += 1
                i += len(open_tok)
            elif text.startswith(close_tok, i):
                depth -= 1
                i += len(close_tok)
            else:
                i += 1
        if depth:
            flags.add(flag)
            break
        pos = i
    return "".join(out)


def _link_anchor(body: str) -> str:
    """Anchor text of an internal link body (``target|label`` or ``target``)."""
    depth = 0
    last_pipe = -1
    i = 0
    while i < len(body):
        if body.startswith("[[", i):
            depth += 1
            i += 2
        elif body.startswith("]]", i):
            depth -= 1
            i += 2
        else:
            if body[i] == "|" and depth == 0:
                last_pipe = i
            i += 1
    target = body if last_pipe < 0 else body[:last_pipe]
    label = "" if last_pipe < 0 else body[last_pipe + 1 :]
    return label if label.strip() else target


def _strip_links(text: str, flags: set[str]) -> str:
    out = []
    pos = 0
    n = len(text)
    while True:
        start = text.find("[[", pos)
        if start < 0:
            out.append(text[pos:])
            break
        out.append(text[pos:start])
        depth = 1
        i = start + 2
        eol = text.find("\n", start)
        if eol < 0:
            eol = n
        while i < n and depth:
            if text.startswith("[[", i):
                depth += 1
                i += 2
            elif text.startswith("]]", i):
                depth -= 1
                i += 2
            else:
                i += 1
        if depth:
            # Links are inline constructs; an unterminated one is resolved
            # within its own line and everything after the line survives.
            flags.add("unclosed-link")
            body = text[start + 2 : eol]
            out.append(_link_anchor(body))
            pos = eol
            continue
        body = text[start + 2 : i - 2]
        target = body.split("|", 1)[0].strip().lstrip(":").lower()
        if not target.startswith(_DROP_LINK_PREFIXES):
            out.append(_link_anchor(body))
        pos = i
    return "".join(out)


def _clean_line(line: str) -> str:
    # Heading wrappers and list/indent prefixes are stripped to a fixed point
    # so a line like "* == x ==" fully reduces in one cleaning pass.
    for _ in range(_MAX_FIXPOINT_ROUNDS):
        new = line.strip()
        m = _HEADING_RE.match(new)
        if m:
            new = m.group(2)
        new = _LIST_PREFIX_RE.sub("", new)
        if new == line:
            break
        line = new
    return _HSPACE_RE.sub(" ", line).strip()


def _inline_passes(text: str, flags: set[str]) -> str:
    text = _strip_comments(text, flags)
    text = _strip_refs(text, flags)
    text = _strip_braced(text, "{{{", "}}}", "unclosed-template", flags)
    text = _strip_braced(text, "{{", "}}", "unclosed-template", flags)
    text = _strip_braced(text, "{|", "|}", "unclosed-table", flags)
    text = _TAG_RE.sub("", text)
    text = _strip_links(text, flags)
    text = _EXTERNAL_LINK_RE.sub(lambda m: m.group(1).strip(), text)
    text = _QUOTE_RUN_RE.sub("", text)
    text = _MAGIC_WORD_RE.sub("", text)
    return text


def clean_wikitext_flagged(wikitext: str) -> CleanResult:
    """Clean wikitext and report which unbalanced constructs were seen."""
    flags: set[str] = set()
    text = wikitext
    for _ in range(_MAX_FIXPOINT_ROUNDS):
        new = _inline_passes(text, flags)
        if new == text:
            break
        text = new
    # Invariant guard: no angle brackets survive, even outside tag syntax.
    text = text.replace("<", " ").replace(">", " ")

    lines = [_clean_line(ln) for ln in text.split("\n")]
    collapsed: list[str] = []
    for ln in lines:
        if ln == "" and collapsed and collapsed[-1] == "":
            continue
        collapsed.append(ln)
    while collapsed and collapsed[0] == "":
        collapsed.pop(0)
    while collapsed and collapsed[-1] == "":
        collapsed.pop()
    return CleanResult("\n".join(collapsed), sorted(flags))


def clean_wikitext(wikitext: str) -> str:
    """Plain-text rendering of wikitext; never raises on malformed input."""
    return clean_wikitext_flagged(wikitext).text
