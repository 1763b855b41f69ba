import pytest
from hypothesis import given, settings, strategies as st

from vulnhunter.tokenizer import (
    CLS, CLS_TYPE, DUAL_CLS, PAD, SEP, SINGLE_CLS, UNK,
    TokenizerError, Vocab, decode, encode, train_bpe,
)

CODE_SNIPPETS = [
    "int f(int a) {\n    return a + 1;\n}\n",
    "void g(void) { /* noop */ }\n",
    "char *s = \"hello\\n\";\n",
    "for (int i = 0; i < n; i++) sum += arr[i];\n",
]


@pytest.fixture(scope="module")
def vocab():
    return train_bpe(CODE_SNIPPETS * 3, vocab_size=300)


def test_forced_single_merge():
    v = train_bpe(["aaaa"], vocab_size=262)
    assert len(v.merges) == 1
    assert v.merges[0] == (b"a", b"a")


def test_training_deterministic():
    a = train_bpe(CODE_SNIPPETS, vocab_size=300)
    b = train_bpe(CODE_SNIPPETS, vocab_size=300)
    assert a.merges == b.merges
    assert a.content_hash() == b.content_hash()


def test_vocab_size_too_small():
    with pytest.raises(TokenizerError):
        train_bpe(["abc"], vocab_size=100)


def test_merge_count_matches_budget():
    # corpus rich enough for the full budget: exact merge count
    v = train_bpe(CODE_SNIPPETS * 3, vocab_size=280)
    assert len(v.merges) == 280 - 256 - 5
    assert v.size == 280


def test_merge_count_stops_when_pairs_exhausted(vocab):
    # the module corpus runs out of mergeable pairs below the 300 target
    assert len(vocab.merges) <= 300 - 256 - 5
    assert vocab.size == 256 + 5 + len(vocab.merges)


def test_every_training_text_encodes_without_unk(vocab):
    unk = vocab.special(UNK)
    for text in CODE_SNIPPETS:
        seq = encode(text, vocab, SINGLE_CLS, 512)
        assert unk not in seq.ids


def test_empty_text_dual(vocab):
    seq = encode("", vocab, DUAL_CLS, 16)
    assert seq.ids == [vocab.special(CLS), vocab.special(CLS_TYPE), vocab.special(SEP)]
    assert seq.line_of == [-1, -1, -1]


def test_empty_text_single(vocab):
    seq = encode("", vocab, SINGLE_CLS, 16)
    assert seq.ids == [vocab.special(CLS), vocab.special(SEP)]


def test_special_placement_dual(vocab):
    seq = encode("int x;", vocab, DUAL_CLS, 64)
    assert seq.ids[0] == vocab.special(CLS)
    assert seq.ids[1] == vocab.special(CLS_TYPE)
    assert seq.ids[-1] == vocab.special(SEP)
    assert all(i not in vocab.special_ids for i in seq.ids[2:-1])


def test_line_map_two_line_function(vocab):
    seq = encode("int f() {\nreturn 0; }\n", vocab, SINGLE_CLS, 128)
    body_lines = {l for l in seq.line_of if l >= 1}
    assert body_lines == {1, 2}


def test_line_map_monotone(vocab):
    seq = encode("a\nbb\nccc\ndddd\n", vocab, SINGLE_CLS, 128)
    content = [l for l in seq.line_of if l >= 1]
    assert content == sorted(content)
    assert min(content) >= 1


def test_round_trip_code_fixtures(vocab):
    for text in CODE_SNIPPETS:
        assert decode(encode(text, vocab, DUAL_CLS, 4096), vocab) == text
        assert decode(encode(text, vocab, SINGLE_CLS, 4096), vocab) == text


_RT_VOCAB = train_bpe(["int f() { return 0; }"], vocab_size=270)


@settings(max_examples=300, deadline=None)
@given(st.text(min_size=0, max_size=120))
def test_round_trip_random_text(text):
    # byte-level alphabet: any valid-unicode input survives untruncated
    assert decode(encode(text, _RT_VOCAB, SINGLE_CLS, 1 << 16), _RT_VOCAB) == text


def test_truncation_keeps_specials(vocab):
    long_text = "token " * 500
    seq = encode(long_text, vocab, DUAL_CLS, 32)
    assert len(seq) == 32
    assert seq.truncated
    assert seq.ids[0] == vocab.special(CLS)
    assert seq.ids[1] == vocab.special(CLS_TYPE)
    assert seq.ids[-1] == vocab.special(SEP)


def test_untruncated_flag(vocab):
    seq = encode("x", vocab, SINGLE_CLS, 32)
    assert not seq.truncated


def test_decode_rejects_unknown_id(vocab):
    with pytest.raises(TokenizerError):
        decode([vocab.size + 999], vocab)


def test_decode_specials_only(vocab):
    assert decode([vocab.special(CLS), vocab.special(SEP)], vocab) == ""


def test_bad_mode(vocab):
    with pytest.raises(TokenizerError):
        encode("x", vocab, "triple_cls", 16)


def test_max_seq_len_too_small_for_specials(vocab):
    with pytest.raises(TokenizerError):
        encode("x", vocab, DUAL_CLS, 2)


def test_save_load_round_trip(tmp_path, vocab):
    path = tmp_path / "vocab.json"
    vocab.save(path)
    loaded = Vocab.load(path)
    assert loaded.merges == vocab.merges
    assert loaded.token_table == vocab.token_table
    assert loaded.content_hash() == vocab.content_hash()
    text = CODE_SNIPPETS[0]
    assert encode(text, loaded, DUAL_CLS, 128).ids == encode(text, vocab, DUAL_CLS, 128).ids


def test_load_rejects_other_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else", "specials": {}, "merges": []}')
    with pytest.raises(TokenizerError):
        Vocab.load(path)


def test_special_ids_distinct_and_reserved(vocab):
    ids = [vocab.special(n) for n in (PAD, UNK, CLS, CLS_TYPE, SEP)]
    assert len(set(ids)) == 5
    # content tokens never collide with special ids
    assert all(i not in vocab.special_ids for i in vocab.token_table.values())


def test_newline_never_merged(vocab):
    for a, b in vocab.merges:
        assert b"\n" not in a and b"\n" not in b
