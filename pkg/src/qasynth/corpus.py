"""Data model and ingestion: QA examples, passage pools, sampling, JSONL I/O.

The canonical record is an extractive QA example: a context passage, a
question, an answer that (for gold and fully filtered synthetic data) appears
verbatim in the context at a known character offset, a language code, and a
provenance tag saying how the example came to be (gold, mt, pe, pt).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

PROVENANCES = ("gold", "mt", "pe", "pt")
SCENARIOS = ("english_only", "few_shot")

# Exact field set (and order) of one JSONL record.
JSONL_FIELDS = (
    "id",
    "context",
    "question",
    "answer",
    "answer_start",
    "language",
    "provenance",
    "source_dataset",
)


class CorpusError(ValueError):
    """Raised for malformed input data or invalid record construction."""


@dataclass(frozen=True)
class Passage:
    """An unlabeled context passage drawn from a monolingual pool."""

    id: str
    text: str
    language: str
    source: str = ""

    def __post_init__(self):
        if not self.id:
            raise CorpusError("passage id must be non-empty")
        if not self.text:
            raise CorpusError(f"passage {self.id!r}: text must be non-empty")
        if not self.language:
            raise CorpusError(f"passage {self.id!r}: language must be non-empty")


@dataclass(frozen=True)
class QAExample:
    """One extractive QA training/eval example.

    answer_start is the character offset of the answer in the context, or
    None for records whose alignment was discarded (e.g. field-wise machine
    translation). When set, context[answer_start : answer_start+len(answer)]
    must equal answer exactly.

    extra_answers holds alternative gold answers used only for max-over-golds
    evaluation; it is excluded from equality so a serialize/parse round trip
    (which keeps just the first answer) compares equal.
    """

    id: str
    context: str
    question: str
    answer: str
    answer_start: Optional[int]
    language: str
    provenance: str
    source_dataset: str
    extra_answers: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.id:
            raise CorpusError("example id must be non-empty")
        if not self.context:
            raise CorpusError(f"example {self.id!r}: context must be non-empty")
        if not self.question:
            raise CorpusError(f"example {self.id!r}: question must be non-empty")
        if not self.answer:
            raise CorpusError(f"example {self.id!r}: answer must be non-empty")
        if not self.language:
            raise CorpusError(f"example {self.id!r}: language must be non-empty")
        if self.provenance not in PROVENANCES:
            raise CorpusError(
                f"example {self.id!r}: provenance {self.provenance!r} not one of "
                f"{PROVENANCES}"
            )
        if self.answer_start is not None:
            if self.answer_start < 0:
                raise CorpusError(
                    f"example {self.id!r}: answer_start must be >= 0"
                )
            end = self.answer_start + len(self.answer)
            if self.context[self.answer_start : end] != self.answer:
                raise CorpusError(
                    f"example {self.id!r}: context[{self.answer_start}:{end}] "
                    f"does not equal the answer"
                )

    def gold_answers(self) -> Tuple[str, ...]:
        """The training answer followed by any alternative gold answers."""
        return (self.answer,) + self.extra_answers

    def to_json_dict(self) -> dict:
        return {name: getattr(self, name) for name in JSONL_FIELDS}


@dataclass(frozen=True)
class Dataset:
    """A named, ordered collection of QA examples with unique ids."""

    name: str
    examples: Tuple[QAExample, ...]
    scenario: str = "few_shot"

    def __post_init__(self):
        if not self.name:
            raise CorpusError("dataset name must be non-empty")
        if self.scenario not in SCENARIOS:
            raise CorpusError(
                f"dataset {self.name!r}: scenario {self.scenario!r} not one of "
                f"{SCENARIOS}"
            )
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise CorpusError(
                    f"dataset {self.name!r}: duplicate example id {ex.id!r}"
                )
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def by_language(self) -> Dict[str, Tuple[QAExample, ...]]:
        out: Dict[str, List[QAExample]] = {}
        for ex in self.examples:
            out.setdefault(ex.language, []).append(ex)
        return {lang: tuple(exs) for lang, exs in out.items()}


@dataclass(frozen=True)
class IngestReport:
    """Outcome of parsing a raw dataset: counts plus per-record problems."""

    total_qas: int
    parsed: int
    skipped: int
    errors: Tuple[str, ...]


@dataclass(frozen=True)
class DatasetStats:
    """Summary counts for a dataset."""

    total: int
    by_language: Dict[str, int]
    by_provenance: Dict[str, int]
    mean_context_len: float
    mean_question_len: float
    mean_answer_len: float

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "by_language": dict(sorted(self.by_language.items())),
            "by_provenance": dict(sorted(self.by_provenance.items())),
            "mean_context_len": self.mean_context_len,
            "mean_question_len": self.mean_question_len,
            "mean_answer_len": self.mean_answer_len,
        }


def parse_squad_json(
    raw: Union[str, bytes],
    dataset_name: str,
    language: str,
) -> Tuple[Dataset, IngestReport]:
    """Parse a SQuAD-v1.1-format JSON string into a Dataset.

    Structure: {"data": [{"paragraphs": [{"context", "qas": [{"id",
    "question", "answers": [{"text", "answer_start"}, ...]}]}]}]}.

    The first answer of each qa becomes the training answer; the remaining
    distinct answer texts are kept as alternatives for evaluation. A qa with
    an empty answers list is skipped and reported. An answer whose offset
    does not match the context is rejected (reported, skipped). Malformed
    JSON raises CorpusError naming the byte offset of the failure.
    """
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        byte_offset = len(text[: e.pos].encode("utf-8"))
        raise CorpusError(
            f"malformed JSON at byte offset {byte_offset}: {e.msg}"
        ) from e

    if not isinstance(doc, dict) or "data" not in doc:
        raise CorpusError("top-level object must contain a 'data' list")

    examples: List[QAExample] = []
    errors: List[str] = []
    total = 0
    for article in doc["data"]:
        for para in article.get("paragraphs", []):
            context = para.get("context", "")
            for qa in para.get("qas", []):
                total += 1
                qa_id = qa.get("id", f"<unnamed #{total}>")
                answers = qa.get("answers", [])
                if not answers:
                    errors.append(f"{qa_id}: no answers; skipped")
                    continue
                first = answers[0]
                a_text = first.get("text", "")
                a_start = first.get("answer_start")
                if a_start is None:
                    errors.append(f"{qa_id}: answer has no answer_start; skipped")
                    continue
                span = context[a_start : a_start + len(a_text)]
                if span != a_text:
                    errors.append(
                        f"{qa_id}: answer_start {a_start} does not point at the "
                        f"answer text; skipped"
                    )
                    continue
                extras = []
                for alt in answers[1:]:
                    alt_text = alt.get("text", "")
                    if alt_text and alt_text != a_text and alt_text not in extras:
                        extras.append(alt_text)
                try:
                    examples.append(
                        QAExample(
                            id=qa_id,
                            context=context,
                            question=qa.get("question", ""),
                            answer=a_text,
                            answer_start=a_start,
                            language=language,
                            provenance="gold",
                            source_dataset=dataset_name,
                            extra_answers=tuple(extras),
                        )
                    )
                except CorpusError as e:
                    errors.append(f"{qa_id}: {e}; skipped")

    dataset = Dataset(name=dataset_name, examples=tuple(examples))
    report = IngestReport(
        total_qas=total,
        parsed=len(examples),
        skipped=total - len(examples),
        errors=tuple(errors),
    )
    return dataset, report


def load_passage_pool(
    path: Union[str, Path],
    language: str,
    source: str = "",
) -> Tuple[Passage, ...]:
    """Load an NDJSON passage pool: one {"id": ..., "text": ...} per line.

    Blank lines are ignored. Any malformed line raises CorpusError naming
    its 1-based line number.
    """
    path = Path(path)
    passages: List[Passage] = []
    seen = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path.name}:{lineno}: malformed JSON: {e.msg}")
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise CorpusError(
                    f"{path.name}:{lineno}: expected an object with 'id' and 'text'"
                )
            pid = str(obj["id"])
            if pid in seen:
                raise CorpusError(f"{path.name}:{lineno}: duplicate passage id {pid!r}")
            seen.add(pid)
            try:
                passages.append(
                    Passage(
                        id=pid,
                        text=obj["text"],
                        language=language,
                        source=source or path.name,
                    )
                )
            except CorpusError as e:
                raise CorpusError(f"{path.name}:{lineno}: {e}")
    return tuple(passages)


def sample_unlabeled(
    pool: Sequence[Passage],
    n: int,
    seed: int,
    min_len: int = 200,
    max_len: int = 510,
) -> Tuple[Passage, ...]:
    """Sample n passages uniformly without replacement, filtered by length.

    Only passages whose character length is within [min_len, max_len]
    (inclusive) are eligible. Asking for more than the eligible count raises
    with both numbers in the message.
    """
    if n < 0:
        raise CorpusError("sample size must be >= 0")
    eligible = [p for p in pool if min_len <= len(p.text) <= max_len]
    if n > len(eligible):
        raise CorpusError(
            f"requested {n} passages but only {len(eligible)} of {len(pool)} "
            f"are within [{min_len}, {max_len}] characters"
        )
    rng = random.Random(seed)
    return tuple(rng.sample(eligible, n))


def subsample_fewshot(
    dataset: Dataset,
    language: str,
    n: int,
    seed: int,
) -> Dataset:
    """Pick n examples of one language uniformly without replacement.

    Output order is the sampling order (a seeded permutation), so n equal
    to the split size returns the whole split permuted.
    """
    if n <= 0:
        raise CorpusError("n must be >= 1")
    exs = dataset.by_language().get(language, ())
    if len(exs) < n:
        raise CorpusError(
            f"language {language!r} has {len(exs)} examples; need {n}"
        )
    rng = random.Random(seed)
    picked = [exs[i] for i in rng.sample(range(len(exs)), n)]
    return Dataset(
        name=f"{dataset.name}-{language}-fewshot{n}",
        examples=tuple(picked),
        scenario="few_shot",
    )


def dataset_stats(dataset: Dataset) -> DatasetStats:
    """Counts and mean field lengths (characters) for a dataset."""
    by_language: Dict[str, int] = {}
    by_provenance: Dict[str, int] = {}
    c_len = q_len = a_len = 0
    for ex in dataset.examples:
        by_language[ex.language] = by_language.get(ex.language, 0) + 1
        by_provenance[ex.provenance] = by_provenance.get(ex.provenance, 0) + 1
        c_len += len(ex.context)
        q_len += len(ex.question)
        a_len += len(ex.answer)
    n = len(dataset.examples)
    return DatasetStats(
        total=n,
        by_language=by_language,
        by_provenance=by_provenance,
        mean_context_len=c_len / n if n else 0.0,
        mean_question_len=q_len / n if n else 0.0,
        mean_answer_len=a_len / n if n else 0.0,
    )


def write_jsonl(dataset: Dataset, path: Union[str, Path]) -> None:
    """Write one JSON object per example, fixed field set, UTF-8, no ASCII escaping."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ex in dataset.examples:
            fh.write(json.dumps(ex.to_json_dict(), ensure_ascii=False))
            fh.write("\n")


def read_jsonl(
    path: Union[str, Path],
    name: Optional[str] = None,
    scenario: str = "few_shot",
) -> Dataset:
    """Read a JSONL dataset written by write_jsonl.

    Every record must carry exactly the canonical fields; extras or missing
    fields raise with the 1-based line number.
    """
    path = Path(path)
    examples: List[QAExample] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path.name}:{lineno}: malformed JSON: {e.msg}")
            if set(obj) != set(JSONL_FIELDS):
                raise CorpusError(
                    f"{path.name}:{lineno}: expected fields {set(JSONL_FIELDS)}, "
                    f"got {set(obj)}"
                )
            try:
                examples.append(QAExample(**obj))
            except CorpusError as e:
                raise CorpusError(f"{path.name}:{lineno}: {e}")
    return Dataset(
        name=name or path.stem,
        examples=tuple(examples),
        scenario=scenario,
    )


def strip_alignment(example: QAExample) -> QAExample:
    """Return a copy with answer_start dropped (alignment unknown)."""
    return replace(example, answer_start=None)
