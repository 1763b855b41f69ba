"""Tokenize code with the dual classification tokens, then extract
functions from a messy C file and map cleaned lines back to the original.
"""

from vulnhunter import tokenizer
from vulnhunter.extractor import extract_functions, newline_offsets

CORPUS = [
    "int add(int a, int b) { return a + b; }\n",
    "void log_value(int v) { printf(\"%d\", v); }\n",
    "char *copy(char *dst, const char *src) { return strcpy(dst, src); }\n",
]

vocab = tokenizer.train_bpe(CORPUS, vocab_size=300)
print(f"vocab: {vocab.size} tokens ({len(vocab.merges)} merges), "
      f"hash {vocab.content_hash()[:12]}..")

text = CORPUS[0]
seq = tokenizer.encode(text, vocab, tokenizer.DUAL_CLS, max_seq_len=64)
print(f"\nencoded {len(seq)} tokens; first ids {seq.ids[:6]}")
print("decode(encode(x)) == x:", tokenizer.decode(seq, vocab) == text)

# the per-position line map is what lets attention scores land on lines
two_line = "int f(int a) {\n  return a + 1;\n}\n"
seq2 = tokenizer.encode(two_line, vocab, tokenizer.SINGLE_CLS, 64)
print("line_of:", seq2.line_of)

MESSY = """\
/* header
   comment */
#include <string.h>

static int helper(const char *s) {
    // the brace in this comment { is invisible
    return strlen(s);
}

int entry(char *dst, const char *src) {
    strcpy(dst, src); /* classic */
    return helper(src);
}
"""

result = extract_functions(MESSY)
nl = newline_offsets(MESSY)
print("\nextracted functions:")
for fn in result.functions:
    print(f"  {fn.name}: original lines {fn.original_span}, "
          f"{len(fn.cleaned_text)} cleaned chars")
    # cleaned line 1 maps back to the function's first original line
    print(f"    cleaned line 1 -> original line {fn.original_line_of(1, nl)}")
