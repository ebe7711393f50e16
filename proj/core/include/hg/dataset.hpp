#pragma once

#include <string>
#include <vector>

#include "hg/error.hpp"

namespace hg {

// One training/eval prompt. Either `text` (tokenized at use time) or `ids`
// (pre-tokenized, BOS/EOS included) is set; ids win when both are present.
struct PromptRecord {
    std::string text;
    std::vector<int> ids;
    bool nsfw = false;
    std::vector<std::string> categories;
    double weight = 1.0;
    std::string source;

    bool has_ids() const { return !ids.empty(); }
};

// JSONL, one record per line:
//   {"text": str | "ids": [int], "label": "benign"|"nsfw",
//    "categories": [str], "weight": float, "source": str}
// label is required; categories/weight/source are optional. weight must be
// > 0; benign records must not carry categories.
std::vector<PromptRecord> load_dataset_jsonl(const std::string& path);
std::vector<PromptRecord> parse_dataset_jsonl(const std::string& content);
void save_dataset_jsonl(const std::vector<PromptRecord>& records, const std::string& path);
std::string dataset_to_jsonl(const std::vector<PromptRecord>& records);

}  // namespace hg
