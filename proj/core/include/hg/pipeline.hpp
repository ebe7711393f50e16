#pragma once

#include <vector>

#include "hg/dataset.hpp"
#include "hg/model.hpp"
#include "hg/tokenizer.hpp"

namespace hg {

// Wraps a caller-supplied full id sequence (BOS ... EOS) as a TokenSequence.
// Pooling follows the first EOS occurrence when eos_id is given (the CLIP
// convention for duplicate EOS), otherwise the last position.
inline TokenSequence sequence_from_ids(std::vector<int> ids, int eos_id = -1) {
    if (ids.size() < 2) throw data_error("id sequence needs at least BOS and EOS");
    TokenSequence seq;
    seq.ids = std::move(ids);
    seq.eos_index = static_cast<int>(seq.ids.size()) - 1;
    if (eos_id >= 0) {
        for (size_t i = 0; i < seq.ids.size(); ++i) {
            if (seq.ids[i] == eos_id) {
                seq.eos_index = static_cast<int>(i);
                break;
            }
        }
    }
    return seq;
}

// Token sequence for a record: pre-tokenized ids win, text needs a vocab.
inline TokenSequence record_tokens(const PromptRecord& r, const BpeVocab* vocab,
                                   const EncoderConfig& config) {
    if (r.has_ids()) return sequence_from_ids(r.ids, config.eos_token_id);
    if (!vocab) throw data_error("text records require tokenizer assets (--vocab/--merges)");
    return tokenize(r.text, *vocab, config.max_positions);
}

}  // namespace hg
