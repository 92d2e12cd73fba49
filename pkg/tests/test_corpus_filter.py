import json
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opiniondrift.corpus_filter import (
    BOT_AUTHORS,
    CUTOFF_UTC,
    GAMING_SUBREDDITS,
    FilterDecision,
    MalformedRecord,
    RawComment,
    Reason,
    apply_exclusions,
    filter_file,
    filter_records,
    filter_stream,
    match_keywords,
)
from oracles import keyword_oracle

T2020 = 1577836800


def comment(body, subreddit="technology", author="someone", created_utc=T2020, id="c1"):
    return RawComment(id=id, created_utc=created_utc, author=author, subreddit=subreddit, body=body)


@pytest.mark.parametrize(
    "body, expected",
    [
        ("I support Basic Income today", True),
        ("RUBIN said so", False),
        ("UBI: yes please", True),
        ("I bought ubi stock", False),
        ("UBI", True),
        ("we need UBI", True),
        ("(UBI)", True),
        ("UBIs are great", False),
        ("XUBI", False),
        ("UBI2 is a sequel", False),
        ("BASIC INCOME now", True),
        ("basic incomes", True),
        ("UBI_fund", True),
        ("éUBIé", True),
        ("", False),
    ],
)
def test_match_keywords(body, expected):
    assert match_keywords(body) is expected
    assert keyword_oracle(body) is expected


@settings(max_examples=500)
@given(st.text(alphabet=st.sampled_from(list("UBIubi xX9_-:.é")), max_size=20))
def test_match_keywords_agrees_with_scan(body):
    assert match_keywords(body) == keyword_oracle(body)


@given(st.lists(st.sampled_from(list(string.ascii_letters + string.digits)), min_size=1, max_size=4),
       st.lists(st.sampled_from(list(string.ascii_letters + string.digits)), min_size=1, max_size=4))
def test_boundary_rule_embedded_ubi_never_matches(left, right):
    body = "".join(left) + "UBI" + "".join(right)
    if "UBI" in body.replace("UBI", "", 1) or "basic income" in body.lower():
        return
    assert not match_keywords(body)


@pytest.mark.parametrize(
    "kwargs, expected",
    [
        (dict(body="UBI in Ubisoft games"), (False, Reason.UBISOFT_PHRASE)),
        (dict(body="UBI nerf when", subreddit="Rainbow6"), (False, Reason.GAMING_SUBREDDIT_UBI_ONLY)),
        (dict(body="basic income rocks", subreddit="Rainbow6"), (True, Reason.KEPT)),
        (dict(body="UBI thread", author="AutoModerator"), (False, Reason.BOT_AUTHOR)),
        (dict(body="UBI thread", author="u/AutoModerator"), (False, Reason.BOT_AUTHOR)),
        (dict(body="UBI nerf", subreddit="r/forhonor"), (False, Reason.GAMING_SUBREDDIT_UBI_ONLY)),
        (dict(body="UBI nerf", subreddit="rainbow6"), (True, Reason.KEPT)),
        (dict(body="UBI now", created_utc=CUTOFF_UTC - 1), (False, Reason.BEFORE_CUTOFF)),
        (dict(body="UBI now", created_utc=CUTOFF_UTC), (True, Reason.KEPT)),
        # first matching rule wins
        (dict(body="ubisoft UBI", subreddit="Rainbow6", author="AutoModerator", created_utc=1000),
         (False, Reason.UBISOFT_PHRASE)),
        (dict(body="UBI", subreddit="Rainbow6", author="AutoModerator", created_utc=1000),
         (False, Reason.GAMING_SUBREDDIT_UBI_ONLY)),
        (dict(body="UBI", author="AutoModerator", created_utc=1000), (False, Reason.BOT_AUTHOR)),
    ],
)
def test_apply_exclusions(kwargs, expected):
    d = apply_exclusions(comment(**kwargs))
    assert (d.kept, d.reason) == expected


def test_constant_lists():
    assert len(GAMING_SUBREDDITS) == 6
    assert len(BOT_AUTHORS) == 8


def test_filter_decision_invariant():
    with pytest.raises(ValueError):
        FilterDecision(True, Reason.BOT_AUTHOR)
    with pytest.raises(ValueError):
        FilterDecision(False, Reason.KEPT)


def test_empty_stream():
    kept, counts = filter_stream([])
    assert kept == []
    assert set(counts.values()) == {0}
    assert set(counts) == {r.value for r in Reason}


def test_three_comments_one_kept():
    cs = [comment("nothing here", id="a"), comment("UBI please", id="b"), comment("cats", id="c")]
    kept, counts = filter_stream(cs)
    assert [c.id for c in kept] == ["b"]
    assert counts["Kept"] == 1 and counts["NoKeyword"] == 2
    assert sum(counts.values()) == 3


def test_malformed_records_counted_separately():
    records = [
        {"id": "a", "created_utc": T2020, "author": "x", "subreddit": "s", "body": "UBI"},
        {"id": "b", "created_utc": T2020, "author": "x", "body": "UBI"},  # no subreddit
        {"id": "", "created_utc": T2020, "author": "x", "subreddit": "s", "body": "UBI"},
        {"id": "d", "created_utc": -5, "author": "x", "subreddit": "s", "body": "UBI"},
        None,
        "just a string",
        {"id": "e", "created_utc": str(T2020), "author": "x", "subreddit": "s", "body": "UBI"},
    ]
    kept, counts = filter_stream(records)
    assert [c.id for c in kept] == ["a", "e"]
    assert counts["MalformedInput"] == 5
    assert sum(counts.values()) == len(records)


def test_filter_records_keeps_extra_fields():
    rec = {"id": "a", "created_utc": T2020, "author": "x", "subreddit": "s", "body": "UBI", "stance": "supportive"}
    kept, _ = filter_records([rec])
    assert kept == [rec]


bodies = st.sampled_from(["UBI", "basic income", "nope", "Ubisoft UBI", "RUBI", "UBI!", "ubi"])
subs = st.sampled_from(["technology", "Rainbow6", "GhostRecon", "BasicIncome"])
authors = st.sampled_from(["a", "b", "AutoModerator", "sneakpeekbot"])
times = st.sampled_from([CUTOFF_UTC - 100, CUTOFF_UTC, T2020])


@st.composite
def streams(draw):
    n = draw(st.integers(0, 25))
    return [
        RawComment(str(i), draw(times), draw(authors), draw(subs), draw(bodies))
        for i in range(n)
    ]


@given(streams())
def test_filter_properties(cs):
    kept, counts = filter_stream(cs)
    assert sum(counts.values()) == len(cs)
    # order preservation
    ids = [c.id for c in cs]
    positions = [ids.index(c.id) for c in kept]
    assert positions == sorted(positions)
    # keyword soundness
    assert all(match_keywords(c.body) for c in kept)
    # idempotence
    again, counts2 = filter_stream(kept)
    assert again == kept
    assert counts2["Kept"] == len(kept)


def test_filter_file_roundtrip(tmp_path):
    src = tmp_path / "in.jsonl"
    lines = [
        json.dumps({"id": "a", "created_utc": T2020, "author": "x", "subreddit": "s", "body": "UBI"}),
        "{not json",
        "",
        json.dumps({"id": "b", "created_utc": T2020, "author": "x", "subreddit": "s", "body": "nah"}),
    ]
    src.write_text("\n".join(lines) + "\n")
    counts = filter_file(src, tmp_path / "out.jsonl", tmp_path / "stats.json")
    assert counts["Kept"] == 1 and counts["MalformedInput"] == 1 and counts["NoKeyword"] == 1
    out = [json.loads(x) for x in (tmp_path / "out.jsonl").read_text().splitlines()]
    assert [r["id"] for r in out] == ["a"]
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["total"] == 3


def test_raw_comment_validation():
    with pytest.raises(MalformedRecord):
        RawComment("", 1, "a", "s", "b")
    with pytest.raises(MalformedRecord):
        RawComment("x", 0, "a", "s", "b")
    with pytest.raises(MalformedRecord):
        RawComment("x", 1, "a", "", "b")
