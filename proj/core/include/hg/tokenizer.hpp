#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "hg/error.hpp"

namespace hg {

// CLIP-style byte-pair-encoding vocabulary loaded from the published asset
// layout: a JSON map {token: id} and a merges text file whose first line is a
// header and whose remaining lines are "sym1 sym2" in rank order.
//
// End-of-word convention: if the vocab contains a bare "</w>" entry, the
// marker starts as its own symbol and merges may fuse it; otherwise (the
// published CLIP assets) it is appended to the last character before merging.
struct BpeVocab {
    std::unordered_map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;
    std::map<std::pair<std::string, std::string>, int> merge_rank;
    int bos_id = -1;
    int eos_id = -1;
    int pad_id = -1;  // -1 when the vocab has no pad token
    bool separate_eow = false;

    int size() const { return static_cast<int>(id_to_token.size()); }

    static BpeVocab load(const std::string& vocab_json_path, const std::string& merges_path);
    static BpeVocab from_text(const std::string& vocab_json, const std::string& merges_text);
    void validate() const;
};

struct TokenSequence {
    std::vector<int> ids;
    int eos_index = -1;

    int length() const { return static_cast<int>(ids.size()); }
};

// Lowercases, collapses whitespace, splits words/punctuation, applies merges
// by ascending rank, frames with BOS/EOS and hard-truncates to max_positions
// (EOS forced at the last position). Symbols missing from the vocab raise
// unknown_symbol_error; there is no silent UNK.
TokenSequence tokenize(const std::string& text, const BpeVocab& vocab, int max_positions);

// Inverse byte mapping with "</w>" -> space; BOS/EOS/pad are dropped.
std::string detokenize(const std::vector<int>& ids, const BpeVocab& vocab);

// Token display strings (post-merge symbols) for attribution output;
// specials are reported verbatim.
std::string token_display(int id, const BpeVocab& vocab);

// The per-word token splitter, exposed for tests: contractions
// ('s 't 're 've 'm 'll 'd), letter runs (ASCII letters and any byte >=
// 0x80), single digits, then runs of other non-space characters.
std::vector<std::string> split_words(const std::string& canonical_text);

}  // namespace hg
