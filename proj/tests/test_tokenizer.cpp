#include <doctest.h>

#include <string>
#include <vector>

#include "hg/rng.hpp"
#include "hg/tokenizer.hpp"

using namespace hg;

namespace {

const BpeVocab& toy_vocab() {
    static const BpeVocab v =
        BpeVocab::load(std::string(HG_ASSET_DIR) + "/toy_vocab.json",
                       std::string(HG_ASSET_DIR) + "/toy_merges.txt");
    return v;
}

int tid(const char* tok) { return toy_vocab().token_to_id.at(tok); }

}  // namespace

TEST_CASE("toy vocab loads and validates") {
    const BpeVocab& v = toy_vocab();
    CHECK(v.size() == 64);
    CHECK(v.bos_id == 62);
    CHECK(v.eos_id == 63);
    CHECK(v.pad_id == -1);
    CHECK(v.separate_eow);  // bare "</w>" entry present
}

TEST_CASE("empty prompt frames to BOS EOS") {
    const TokenSequence seq = tokenize("", toy_vocab(), 77);
    CHECK(seq.ids == std::vector<int>{62, 63});
    CHECK(seq.eos_index == 1);
}

TEST_CASE("whole-word vocab entry tokenizes to one id") {
    const TokenSequence seq = tokenize("cat", toy_vocab(), 77);
    CHECK(seq.ids == std::vector<int>{62, tid("cat</w>"), 63});
}

TEST_CASE("hand-run merge oracle for ab") {
    // Symbols a, b, </w>; rank-0 merge (a,b) then rank-1 (ab,</w>).
    const TokenSequence seq = tokenize("ab", toy_vocab(), 77);
    CHECK(seq.ids == std::vector<int>{62, tid("ab</w>"), 63});
}

TEST_CASE("merges apply strictly by ascending rank") {
    // "gun": (g,u) rank 18 fires before (gu,n) rank 19 and (gun,</w>) rank 20.
    const TokenSequence seq = tokenize("gun", toy_vocab(), 77);
    CHECK(seq.ids == std::vector<int>{62, tid("gun</w>"), 63});
    // A word with no applicable merges falls back to char + </w> symbols.
    const TokenSequence seq2 = tokenize("xy", toy_vocab(), 77);
    CHECK(seq2.ids == std::vector<int>{62, tid("x"), tid("y"), tid("</w>"), 63});
}

TEST_CASE("lowercasing and whitespace collapse") {
    const TokenSequence a = tokenize("CAT  \t Dog", toy_vocab(), 77);
    const TokenSequence b = tokenize("cat dog", toy_vocab(), 77);
    CHECK(a.ids == b.ids);
}

TEST_CASE("unknown symbol fails loudly") {
    CHECK_THROWS_AS(tokenize("cat?", toy_vocab(), 77), unknown_symbol_error);
}

TEST_CASE("truncation preserves the final EOS") {
    const TokenSequence seq = tokenize("cat dog sun red gun", toy_vocab(), 4);
    CHECK(seq.length() == 4);
    CHECK(seq.ids[0] == 62);
    CHECK(seq.ids[3] == 63);
    CHECK(seq.eos_index == 3);
}

TEST_CASE("detokenize inverts tokenize on canonical text") {
    const char* texts[] = {"cat dog", "ab", "gun sun no", "cat 5 dog", "hi - no"};
    for (const char* t : texts) {
        const TokenSequence seq = tokenize(t, toy_vocab(), 77);
        CHECK(detokenize(seq.ids, toy_vocab()) == t);
    }
    CHECK(detokenize({62, 63}, toy_vocab()) == "");
}

TEST_CASE("detokenize rejects unknown ids") {
    CHECK_THROWS_AS(detokenize({62, 999, 63}, toy_vocab()), data_error);
}

TEST_CASE("round-trip property on random toy-word texts") {
    const std::vector<std::string> words = {"cat", "dog", "gun", "sun", "red",
                                            "no",  "hi",  "ab",  "a",   "zz"};
    Lcg64 rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        std::string text;
        const int n = 1 + static_cast<int>(rng.next_below(6));
        for (int i = 0; i < n; ++i) {
            if (i) text += ' ';
            text += words[rng.next_below(words.size())];
        }
        const TokenSequence seq = tokenize(text, toy_vocab(), 77);
        CHECK(detokenize(seq.ids, toy_vocab()) == text);
        // Determinism.
        CHECK(tokenize(text, toy_vocab(), 77).ids == seq.ids);
    }
}

TEST_CASE("word splitter handles contractions, digits and punctuation") {
    const auto w1 = split_words("don't");
    CHECK(w1 == std::vector<std::string>{"don", "'t"});
    const auto w2 = split_words("a--b");
    CHECK(w2 == std::vector<std::string>{"a", "--", "b"});
    const auto w3 = split_words("12 cats");
    CHECK(w3 == std::vector<std::string>{"1", "2", "cats"});
    const auto w4 = split_words("we're fine.");
    CHECK(w4 == std::vector<std::string>{"we", "'re", "fine", "."});
    const auto w5 = split_words("'x");
    CHECK(w5 == std::vector<std::string>{"'", "x"});
}

TEST_CASE("fused end-of-word convention without a bare eow token") {
    // Minimal CLIP-convention vocab: "</w>" is fused onto the last character.
    const std::string vocab_json = R"({
        "a": 0, "b": 1, "a</w>": 2, "b</w>": 3, "ab</w>": 4,
        "<|startoftext|>": 5, "<|endoftext|>": 6})";
    const std::string merges = "#version\na b</w>\n";
    const BpeVocab v = BpeVocab::from_text(vocab_json, merges);
    CHECK_FALSE(v.separate_eow);
    // "ab" -> symbols [a, b</w>] -> merge (a, b</w>) -> ab</w>.
    const TokenSequence seq = tokenize("ab", v, 8);
    CHECK(seq.ids == std::vector<int>{5, 4, 6});
    // Single char: [a</w>].
    const TokenSequence seq2 = tokenize("a", v, 8);
    CHECK(seq2.ids == std::vector<int>{5, 2, 6});
}

TEST_CASE("vocab validation catches broken assets") {
    CHECK_THROWS_AS(BpeVocab::from_text(R"({"a": 0, "b": 0})", "#\n"), data_error);  // dup id
    CHECK_THROWS_AS(BpeVocab::from_text(R"({"a": 0, "b": 5})", "#\n"), data_error);  // sparse ids
    CHECK_THROWS_AS(
        BpeVocab::from_text(
            R"({"a": 0, "b": 1, "<|startoftext|>": 2, "<|endoftext|>": 3})", "#\na z\n"),
        data_error);  // merge product missing
    CHECK_THROWS_AS(BpeVocab::from_text(R"({"a": 0})", "#\n"), data_error);  // no specials
}
