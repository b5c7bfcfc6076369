import pytest
from hypothesis import given, settings, strategies as st

from hmmaug import arpa, ngram
from hmmaug.arpa import ArpaFormatError


def _toy():
    return ngram.train([["yah", "kaam", "hai"], ["vah", "kaam", "aasaan", "hai"], ["yah", "hai"]], order=2)


def test_round_trip_scores(tmp_path):
    m = _toy()
    arpa.export_arpa(m, tmp_path / "m.arpa")
    back = arpa.import_arpa(tmp_path / "m.arpa")
    assert back.order == 2 and back.vocab == m.vocab
    for g, p in m.probs.items():
        assert abs(back.log_prob(g[-1], g[:-1]) - m.log_prob(g[-1], g[:-1])) < 1e-6
    for h, b in m.backoffs.items():
        assert abs(back.backoffs[h] / b - 1) < 1e-6
    for sent in (["yah", "kaam"], ["kaam", "vah", "zz"]):
        assert abs(ngram.sentence_log_likelihood(back, sent) - ngram.sentence_log_likelihood(m, sent)) < 1e-6


def test_header_counts_match_sections():
    text = arpa.format_arpa(_toy())
    lines = text.splitlines()
    decl = {int(l.split()[1].split("=")[0]): int(l.split("=")[1]) for l in lines if l.startswith("ngram ")}
    sections, cur = {}, None
    for l in lines:
        if l.endswith("-grams:"):
            cur = int(l[1])
            sections[cur] = 0
        elif cur and l.strip() and not l.startswith("\\"):
            sections[cur] += 1
    assert decl == sections
    assert lines[0] == "\\data\\" and lines[-1] == "\\end\\"


def test_export_deterministic():
    assert arpa.format_arpa(_toy()) == arpa.format_arpa(_toy())


def test_load_model_detects_arpa(tmp_path):
    p = tmp_path / "m.arpa"
    arpa.export_arpa(_toy(), p)
    assert ngram.load_model(p).order == 2


HAND = """\\data\\
ngram 1=2

\\1-grams:
-0.3010300 a
-0.3010300 </s>

\\end\\
"""


def test_hand_written_unigram_fixture():
    m = arpa.parse_arpa(HAND)
    assert m.log_prob("a") == pytest.approx(-0.30103, abs=1e-12)
    assert m.log_prob("</s>") == pytest.approx(-0.30103, abs=1e-12)


def test_count_mismatch_names_section():
    m = _toy()
    text = arpa.format_arpa(m)
    n2 = sum(1 for g in m.probs if len(g) == 2)
    bad = text.replace(f"ngram 2={n2}", f"ngram 2={n2 + 1}")
    with pytest.raises(ArpaFormatError) as ei:
        arpa.parse_arpa(bad)
    assert "2-grams" in str(ei.value)
    assert ei.value.section == "\\2-grams:"


@pytest.mark.parametrize("text,fragment", [
    ("ngram 1=1\n", "line 1"),
    ("\\data\\\nngram x=1\n", "line 2"),
    ("\\data\\\nngram 1=1\n\n\\1-grams:\nabc a\n\n\\end\\\n", "line 5"),
    ("\\data\\\nngram 1=1\n\n\\1-grams:\n-1.0 a\n", "end"),
    ("\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-1.0 a -0.5\n\n\\2-grams:\n-1.0 a b\n\n\\end\\\n", "missing"),
    ("\\data\\\nngram 1=2\n\n\\1-grams:\n-1.0 a\n-1.0 a\n\n\\end\\\n", "duplicate"),
    ("\\data\\\nngram 1=1\n\n\\1-grams:\nnan a\n\n\\end\\\n", "non-finite"),
])
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ArpaFormatError) as ei:
        arpa.parse_arpa(text)
    assert fragment in str(ei.value)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_fuzzed_input_gives_structured_errors(text):
    try:
        arpa.parse_arpa(text)
    except ArpaFormatError as exc:
        assert exc.lineno >= 1
