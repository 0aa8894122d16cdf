"""Document ingestion, word statistics and vocabulary selection.

Documents are reduced to *word sets*: the distinct vocabulary words they
contain. The vocabulary keeps words that are neither too common (they carry
no similarity signal) nor so rare that they are probably typos.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import regex

logger = logging.getLogger(__name__)

# Runs of letters, combining marks, digits and connector punctuation, with
# internal apostrophes kept (don't, l'été).
_WORD_RE = regex.compile(r"[\p{L}\p{M}\p{N}\p{Pc}]+(?:['’][\p{L}\p{M}\p{N}\p{Pc}]+)*")
_LETTER_RE = regex.compile(r"\p{L}")


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("document id must be a non-empty string")
        if not isinstance(self.text, str):
            raise TypeError(f"document {self.id!r}: text must be a string")


@dataclass(frozen=True)
class FrequencyTable:
    counts: Mapping[str, int]
    total_tokens: int
    n_documents: int = 0

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class VocabularyPolicy:
    min_count: int = 10
    keep_percentile: float = 5.0

    def __post_init__(self):
        if int(self.min_count) != self.min_count or self.min_count < 1:
            raise ValueError(f"min_count must be an integer >= 1, got {self.min_count!r}")
        if not 0 < self.keep_percentile <= 100:
            raise ValueError(f"keep_percentile must be in (0, 100], got {self.keep_percentile!r}")


@dataclass(frozen=True)
class Vocabulary:
    counts: Mapping[str, int]

    @property
    def words(self) -> frozenset[str]:
        return frozenset(self.counts)

    def __contains__(self, word: str) -> bool:
        return word in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def sorted_items(self) -> list[tuple[str, int]]:
        """Items ordered by ascending count, then word."""
        return sorted(self.counts.items(), key=lambda kv: (kv[1], kv[0]))


@dataclass(frozen=True)
class Corpus:
    word_sets: Mapping[str, frozenset[str]]
    vocabulary: Vocabulary
    min_wordset_size: int = 25
    dropped: tuple[str, ...] = field(default=())

    @property
    def ids(self) -> list[str]:
        return sorted(self.word_sets)

    def __len__(self) -> int:
        return len(self.word_sets)


def tokenize(text: str) -> list[str]:
    """Split ``text`` into lowercased words.

    Tokens without a single letter (numbers, underscores) are dropped. There
    is no stemming and no stop-word removal.
    """
    return [tok for tok in _WORD_RE.findall(text.lower()) if _LETTER_RE.search(tok)]


def aggregate_records(records: Iterable[tuple[str, str]]) -> list[RawDocument]:
    """Merge post-level ``(id, text)`` records into one document per id.

    Texts sharing an id are joined with a single space in input order;
    documents keep the order in which their id first appeared.
    """
    parts: dict[str, list[str]] = {}
    for doc_id, text in records:
        parts.setdefault(doc_id, []).append(text)
    return [RawDocument(doc_id, " ".join(texts)) for doc_id, texts in parts.items()]


def index(docs: Iterable[RawDocument]) -> FrequencyTable:
    """Count token occurrences over all documents in a single pass."""
    counts: Counter[str] = Counter()
    seen: set[str] = set()
    n_docs = 0
    for doc in docs:
        if doc.id in seen:
            raise ValueError(f"duplicate document id: {doc.id!r}")
        seen.add(doc.id)
        n_docs += 1
        counts.update(tokenize(doc.text))
    return FrequencyTable(dict(counts), sum(counts.values()), n_docs)


def merge_tables(tables: Iterable[FrequencyTable]) -> FrequencyTable:
    """Combine partial tables, e.g. from parallel workers. Order-independent."""
    counts: Counter[str] = Counter()
    n_docs = 0
    for table in tables:
        counts.update(table.counts)
        n_docs += table.n_documents
    return FrequencyTable(dict(counts), sum(counts.values()), n_docs)


def select_vocabulary(table: FrequencyTable, policy: VocabularyPolicy = VocabularyPolicy()) -> Vocabulary:
    """Drop words below ``min_count``, then keep the rarest ``keep_percentile``
    percent of the remaining distinct words.

    Survivors are ranked by (count, word) so the cut is deterministic; the
    number kept is ``ceil(keep_percentile / 100 * n_survivors)``.
    """
    if not table.counts:
        raise ValueError("frequency table is empty")
    survivors = [(c, w) for w, c in table.counts.items() if c >= policy.min_count]
    if not survivors:
        raise ValueError("vocabulary empty under policy")
    survivors.sort()
    n_keep = math.ceil(policy.keep_percentile / 100.0 * len(survivors))
    # guards against 5/100*20 = 1.0000000000000002 style rounding
    exact = policy.keep_percentile * len(survivors) / 100.0
    if abs(exact - round(exact)) < 1e-9:
        n_keep = int(round(exact))
    n_keep = max(1, min(n_keep, len(survivors)))
    return Vocabulary({w: c for c, w in survivors[:n_keep]})


def build_corpus(docs: Iterable[RawDocument], vocab: Vocabulary, min_wordset_size: int = 25) -> Corpus:
    """Reduce each document to its vocabulary word set and drop small ones."""
    if not len(vocab):
        raise ValueError("vocabulary is empty")
    word_sets: dict[str, frozenset[str]] = {}
    dropped: list[str] = []
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise ValueError(f"duplicate document id: {doc.id!r}")
        seen.add(doc.id)
        words = frozenset(tok for tok in tokenize(doc.text) if tok in vocab)
        if len(words) >= min_wordset_size and words:
            word_sets[doc.id] = words
        else:
            dropped.append(doc.id)
    logger.info("kept %d documents, dropped %d below %d vocabulary words",
                len(word_sets), len(dropped), min_wordset_size)
    return Corpus(word_sets, vocab, min_wordset_size, tuple(sorted(dropped)))


# -- input / output ---------------------------------------------------------

def read_directory(path: str | Path) -> list[RawDocument]:
    """Read every ``*.txt`` file below ``path``; the file stem is the id."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"not a directory: {path}")
    records = []
    for file in sorted(path.rglob("*.txt")):
        records.append((file.stem, file.read_text(encoding="utf-8")))
    return _drop_empty(aggregate_records(records))


def iter_jsonl_records(path: str | Path) -> Iterator[tuple[str, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON record: {exc.msg}") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or not obj["id"]:
                raise ValueError(f"{path}:{lineno}: record needs a non-empty string field 'id'")
            text = obj.get("text")
            if not isinstance(text, str):
                raise ValueError(f"{path}:{lineno}: record needs a string field 'text'")
            yield obj["id"], text


def read_jsonl(path: str | Path) -> list[RawDocument]:
    """Read a JSON-lines corpus; records with the same id are concatenated."""
    return _drop_empty(aggregate_records(iter_jsonl_records(path)))


def read_documents(path: str | Path) -> list[RawDocument]:
    """Read either a directory of text files or a JSON-lines file."""
    path = Path(path)
    if path.is_dir():
        docs = read_directory(path)
    elif path.is_file():
        docs = read_jsonl(path)
    else:
        raise FileNotFoundError(f"no such input: {path}")
    if not docs:
        raise ValueError("no input documents")
    return docs


def _drop_empty(docs: Sequence[RawDocument]) -> list[RawDocument]:
    kept = [d for d in docs if d.text.strip()]
    if len(kept) < len(docs):
        logger.info("dropped %d empty documents", len(docs) - len(kept))
    return kept


def write_counts_tsv(counts: Mapping[str, int], path: str | Path) -> None:
    """Write ``word<TAB>count`` rows sorted by ascending count, then word."""
    rows = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word, count in rows:
            fh.write(f"{word}\t{count}\n")


def read_counts_tsv(path: str | Path) -> dict[str, int]:
    counts = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            word, sep, count = line.rpartition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected word<TAB>count")
            counts[word] = int(count)
    return counts
