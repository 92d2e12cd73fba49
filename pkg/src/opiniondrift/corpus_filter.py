"""Keyword selection and exclusion rules for raw comment dumps.

A comment is kept when it mentions "basic income" (any case) or the
acronym "UBI" (exact case, not embedded in a longer alphanumeric run),
and survives the Ubisoft, gaming-subreddit, bot and date exclusions.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import IO, Any, Iterable, Iterator, Mapping

log = logging.getLogger(__name__)

# 2014-01-01T00:00:00Z
CUTOFF_UTC = 1388534400

GAMING_SUBREDDITS = frozenset(
    {"Rainbow6", "forhonor", "thedivision", "GhostRecon", "Thread_crawler", "assassinscreed"}
)
BOT_AUTHORS = frozenset(
    {
        "AutoModerator",
        "assessment_bot",
        "subredditsummarybot",
        "transcribot",
        "SnapshillBot",
        "sneakpeekbot",
        "twitterInfo_bot",
        "autowikibot",
    }
)

_PHRASE = "basic income"
# ASCII-only class: "UBI" must not touch [0-9A-Za-z] on either side.
_UBI_RE = re.compile(r"(?<![0-9A-Za-z])UBI(?![0-9A-Za-z])")


class Reason(str, enum.Enum):
    KEPT = "Kept"
    NO_KEYWORD = "NoKeyword"
    UBISOFT_PHRASE = "UbisoftPhrase"
    GAMING_SUBREDDIT_UBI_ONLY = "GamingSubredditUbiOnly"
    BOT_AUTHOR = "BotAuthor"
    BEFORE_CUTOFF = "BeforeCutoff"
    MALFORMED_INPUT = "MalformedInput"


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True)
class RawComment:
    id: str
    created_utc: int
    author: str
    subreddit: str
    body: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise MalformedRecord("id must be a nonempty string")
        if isinstance(self.created_utc, bool) or not isinstance(self.created_utc, int):
            raise MalformedRecord("created_utc must be an integer")
        if self.created_utc <= 0:
            raise MalformedRecord("created_utc must be positive")
        if not isinstance(self.subreddit, str) or not self.subreddit:
            raise MalformedRecord("subreddit must be a nonempty string")
        if not isinstance(self.author, str):
            raise MalformedRecord("author must be a string")
        if not isinstance(self.body, str):
            raise MalformedRecord("body must be a string")

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "RawComment":
        if not isinstance(record, Mapping):
            raise MalformedRecord(f"expected an object, got {type(record).__name__}")
        try:
            created = record["created_utc"]
            # dumps sometimes carry the timestamp as a numeric string
            if isinstance(created, str) and created.strip().lstrip("-").isdigit():
                created = int(created)
            elif isinstance(created, float) and created.is_integer():
                created = int(created)
            return cls(
                id=record["id"],
                created_utc=created,
                author=record["author"],
                subreddit=record["subreddit"],
                body=record["body"],
            )
        except KeyError as exc:
            raise MalformedRecord(f"missing field {exc.args[0]!r}") from None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class FilterDecision:
    kept: bool
    reason: Reason

    def __post_init__(self):
        if self.kept != (self.reason is Reason.KEPT):
            raise ValueError("kept must be true exactly when reason is Kept")


def _strip_prefix(name: str, prefix: str) -> str:
    name = name.strip()
    if name.startswith("/"):
        name = name[1:]
    return name[len(prefix):] if name.startswith(prefix) else name


def has_basic_income(body: str) -> bool:
    return _PHRASE in body.lower()


def has_ubi_token(body: str) -> bool:
    return _UBI_RE.search(body) is not None


def match_keywords(body: str) -> bool:
    """True if ``body`` mentions basic income or the standalone acronym UBI."""
    return has_basic_income(body) or has_ubi_token(body)


def apply_exclusions(comment: RawComment) -> FilterDecision:
    """Run the exclusion rules on a keyword-matching comment; first hit wins."""
    body = comment.body
    if "ubisoft" in body.lower():
        return FilterDecision(False, Reason.UBISOFT_PHRASE)
    if _strip_prefix(comment.subreddit, "r/") in GAMING_SUBREDDITS and not has_basic_income(body):
        return FilterDecision(False, Reason.GAMING_SUBREDDIT_UBI_ONLY)
    if _strip_prefix(comment.author, "u/") in BOT_AUTHORS:
        return FilterDecision(False, Reason.BOT_AUTHOR)
    if comment.created_utc < CUTOFF_UTC:
        return FilterDecision(False, Reason.BEFORE_CUTOFF)
    return FilterDecision(True, Reason.KEPT)


def decide(comment: RawComment) -> FilterDecision:
    if not match_keywords(comment.body):
        return FilterDecision(False, Reason.NO_KEYWORD)
    return apply_exclusions(comment)


def empty_counts() -> dict[str, int]:
    return {reason.value: 0 for reason in Reason}


def _run(items) -> tuple[list[tuple[Any, RawComment]], dict[str, int]]:
    kept = []
    counts = Counter()
    for item in items:
        comment = item
        if not isinstance(item, RawComment):
            try:
                comment = RawComment.from_dict(item)
            except MalformedRecord as exc:
                log.debug("skipping malformed record: %s", exc)
                counts[Reason.MALFORMED_INPUT.value] += 1
                continue
        decision = decide(comment)
        counts[decision.reason.value] += 1
        if decision.kept:
            kept.append((item, comment))
    out = empty_counts()
    out.update(counts)
    return kept, out


def filter_stream(
    comments: Iterable[RawComment | Mapping[str, Any]],
) -> tuple[list[RawComment], dict[str, int]]:
    """Filter a sequence of comments (or raw dict records).

    Returns the kept comments in input order and a tally per reason.
    Records that cannot be turned into a :class:`RawComment` are skipped
    and counted under ``MalformedInput``.
    """
    kept, counts = _run(comments)
    return [c for _, c in kept], counts


def filter_records(records: Iterable[Any]) -> tuple[list[Mapping[str, Any]], dict[str, int]]:
    """Like :func:`filter_stream` but returns the kept input records untouched.

    Extra fields (stance and topic labels, for instance) survive filtering.
    """
    kept, counts = _run(records)
    return [item if isinstance(item, Mapping) else item.to_dict() for item, _ in kept], counts


def iter_jsonl(fh: IO[str]) -> Iterator[Any]:
    """Yield parsed records from a newline-delimited JSON stream.

    Undecodable lines are yielded as ``None`` so callers can count them.
    """
    for line in fh:
        line = line.strip()
        if not line:
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError:
            yield None


def write_jsonl(records: Iterable[Mapping[str, Any]], path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for rec in records:
            out.write(json.dumps(rec, ensure_ascii=False) + "\n")


def write_stats(counts: Mapping[str, int], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"counts": dict(counts), "total": sum(counts.values())}, fh, indent=2)
        fh.write("\n")


def filter_file(input_path, output_path, stats_path=None) -> dict[str, int]:
    with open(input_path, encoding="utf-8") as fh:
        kept, counts = filter_records(iter_jsonl(fh))
    write_jsonl(kept, output_path)
    if stats_path is not None:
        write_stats(counts, stats_path)
    return counts
