"""Byte-level BPE and whitespace tokenizers.

Every token count in the pipeline (budgets, packing, scoring) comes from one
configured tokenizer, serialized as JSON and identified downstream by its
SHA-256 digest.

BPE id layout: ids 0..255 are the raw bytes, merge products follow in learned
order, and special tokens (at least the document separator) take the final
ids, so ``vocab_size = 256 + len(merges) + len(special_tokens)``. Training is
greedy highest-adjacent-pair-frequency with ties broken by the
lexicographically smaller (left bytes, right bytes) pair, which makes the
merge list a pure function of the corpus; pair frequencies count every
adjacency and merges apply left to right without overlap.
"""

from __future__ import annotations

import heapq
import hashlib
import json
from collections import Counter
from typing import Iterable, Sequence

DOC_SEPARATOR = "<|endoftext|>"
BPE_BASE_VOCAB = 256


class TokenizerError(ValueError):
    pass


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class WhitespaceTokenizer:
    """Splits on whitespace runs; ids grow with first-seen order.

    Fast stand-in for tests and desk-scale budgeting. Decoding joins with
    single spaces, so it is not lossless; only the bpe kind guarantees
    round-trips.
    """

    kind = "whitespace"

    def __init__(self, special_tokens: Sequence[str] = (DOC_SEPARATOR,)):
        if not special_tokens:
            raise TokenizerError("need at least one special token (document separator)")
        self.special_tokens = list(special_tokens)
        self._ids: dict[str, int] = {tok: i for i, tok in enumerate(self.special_tokens)}
        self._tokens: list[str] = list(self.special_tokens)

    @property
    def separator_id(self) -> int:
        return 0

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    def encode(self, text: str) -> list[int]:
        out = []
        for word in text.split():
            tid = self._ids.get(word)
            if tid is None:
                tid = len(self._tokens)
                self._ids[word] = tid
                self._tokens.append(word)
            out.append(tid)
        return out

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self._tokens[i] for i in ids)

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def scoring_keys(self, text: str) -> list[str]:
        """Hashable per-token keys for count-based scoring."""
        return text.split()

    def key_repr(self, key) -> str:
        return str(key)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "special_tokens": self.special_tokens}


class BpeTokenizer:
    kind = "bpe"

    def __init__(self, merges: Sequence[tuple[int, int]], special_tokens: Sequence[str] = (DOC_SEPARATOR,)):
        if not special_tokens:
            raise TokenizerError("need at least one special token (document separator)")
        self.special_tokens = list(special_tokens)
        self.merges = [tuple(m) for m in merges]
        self._vocab_bytes: list[bytes] = [bytes([b]) for b in range(BPE_BASE_VOCAB)]
        self._ranks: dict[tuple[int, int], int] = {}
        for a, b in self.merges:
            merged_id = len(self._vocab_bytes)
            if a >= merged_id or b >= merged_id:
                raise TokenizerError(f"merge ({a},{b}) references an id not yet defined")
            self._ranks[(a, b)] = merged_id
            self._vocab_bytes.append(self._vocab_bytes[a] + self._vocab_bytes[b])
        self._special_base = len(self._vocab_bytes)

    @property
    def vocab_size(self) -> int:
        return self._special_base + len(self.special_tokens)

    @property
    def separator_id(self) -> int:
        return self._special_base + self.special_tokens.index(DOC_SEPARATOR) \
            if DOC_SEPARATOR in self.special_tokens else self._special_base

    def encode(self, text: str) -> list[int]:
        """Byte-level encode; special tokens are never produced from text."""
        ids = list(text.encode("utf-8"))
        while len(ids) >= 2:
            best_rank = None
            best_pair = None
            for pair in zip(ids, ids[1:]):
                rank = self._ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_pair = pair
            if best_pair is None:
                break
            ids = _merge_once(ids, best_pair, best_rank)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        parts = []
        for i in ids:
            if i >= self._special_base:
                parts.append(self.special_tokens[i - self._special_base].encode("utf-8"))
            else:
                parts.append(self._vocab_bytes[i])
        return b"".join(parts).decode("utf-8", errors="replace")

    def count_tokens(self, text: str) -> int:
        return len(self.encode(text))

    def scoring_keys(self, text: str) -> list[int]:
        return self.encode(text)

    def key_repr(self, key) -> str:
        if isinstance(key, int) and key < self._special_base:
            return self._vocab_bytes[key].decode("utf-8", errors="backslashreplace")
        return str(key)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "vocab_size": self.vocab_size,
            "special_tokens": self.special_tokens,
            "merges": [list(m) for m in self.merges],
        }


def _merge_once(ids: list[int], pair: tuple[int, int], new_id: int) -> list[int]:
    out = []
    i = 0
    n = len(ids)
    while i < n:
        if i + 1 < n and ids[i] == pair[0] and ids[i + 1] == pair[1]:
            out.append(new_id)
            i += 2
        else:
            out.append(ids[i])
            i += 1
    return out


def train_bpe(
    corpus: Iterable[str],
    vocab_size: int,
    special_tokens: Sequence[str] = (DOC_SEPARATOR,),
    seed: int = 0,
) -> BpeTokenizer:
    """Learn a BPE merge list from a document stream.

    ``seed`` is accepted for interface stability but unused: training is
    fully deterministic given the corpus order and the tie rule.
    """
    del seed
    specials = list(special_tokens) or [DOC_SEPARATOR]
    min_vocab = BPE_BASE_VOCAB + len(specials)
    if vocab_size < min_vocab:
        raise TokenizerError(
            f"vocab_size must be at least {min_vocab} (256 byte symbols + {len(specials)} specials)"
        )
    n_merges = vocab_size - min_vocab

    # Flatten the corpus into one token array with -1 sentinels between
    # documents so no pair spans a document boundary. Consumed positions are
    # marked -2 and bypassed via the nxt/prv links.
    ids: list[int] = []
    for text in corpus:
        if ids:
            ids.append(-1)
        ids.extend(text.encode("utf-8"))
    if not ids:
        raise TokenizerError("cannot train on an empty corpus")

    n = len(ids)
    nxt = list(range(1, n + 1))
    prv = list(range(-1, n))
    vocab_bytes: list[bytes] = [bytes([b]) for b in range(BPE_BASE_VOCAB)]

    counts: Counter[tuple[int, int]] = Counter()
    positions: dict[tuple[int, int], set[int]] = {}
    for i in range(n - 1):
        a, b = ids[i], ids[i + 1]
        if a >= 0 and b >= 0:
            counts[(a, b)] += 1
            positions.setdefault((a, b), set()).add(i)

    heap: list[tuple] = []

    def push(pair):
        c = counts[pair]
        if c > 0:
            heapq.heappush(heap, (-c, vocab_bytes[pair[0]], vocab_bytes[pair[1]], pair))

    def bump(pair, pos, delta):
        counts[pair] += delta
        if delta > 0:
            positions.setdefault(pair, set()).add(pos)
        else:
            positions.get(pair, set()).discard(pos)
        push(pair)

    for pair in counts:
        push(pair)

    merges: list[tuple[int, int]] = []
    while len(merges) < n_merges and heap:
        neg, _ba, _bb, pair = heapq.heappop(heap)
        if counts.get(pair, 0) != -neg or -neg <= 0:
            continue  # stale heap entry
        new_id = len(vocab_bytes)
        vocab_bytes.append(vocab_bytes[pair[0]] + vocab_bytes[pair[1]])
        merges.append(pair)
        a, b = pair
        for p in sorted(positions.get(pair, set())):
            if ids[p] != a:
                continue
            q = nxt[p]
            if q >= n or ids[q] != b:
                continue
            l = prv[p]
            r = nxt[q]
            if l >= 0 and ids[l] >= 0:
                bump((ids[l], a), l, -1)
            if r < n and ids[r] >= 0:
                bump((b, ids[r]), q, -1)
            bump((a, b), p, -1)
            ids[p] = new_id
            ids[q] = -2
            nxt[p] = r
            if r < n:
                prv[r] = p
            if l >= 0 and ids[l] >= 0:
                bump((ids[l], new_id), l, +1)
            if r < n and ids[r] >= 0:
                bump((new_id, ids[r]), p, +1)
        counts.pop(pair, None)
        positions.pop(pair, None)

    return BpeTokenizer(merges, specials)


def tokenizer_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "bpe":
        tok = BpeTokenizer(
            [tuple(m) for m in obj.get("merges", [])],
            obj.get("special_tokens", [DOC_SEPARATOR]),
        )
        declared = obj.get("vocab_size")
        if declared is not None and declared != tok.vocab_size:
            raise TokenizerError(
                f"declared vocab_size {declared} != {tok.vocab_size} implied by merges"
            )
        return tok
    if kind == "whitespace":
        return WhitespaceTokenizer(obj.get("special_tokens", [DOC_SEPARATOR]))
    raise TokenizerError(f"unknown tokenizer kind {kind!r}")


def save_tokenizer(tok, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tok.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_tokenizer(path):
    with open(path, encoding="utf-8") as fh:
        return tokenizer_from_dict(json.load(fh))


def tokenizer_digest(tok) -> str:
    """Stable identity of a tokenizer spec, recorded in manifests."""
    return hashlib.sha256(_canonical_json(tok.to_json_dict()).encode("utf-8")).hexdigest()
