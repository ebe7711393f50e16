#include "hg/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hg {

using nlohmann::json;

namespace {

// GPT-2 byte<->unicode table: printable bytes map to themselves, the rest to
// codepoints 256+n, so every byte has a visible single-codepoint spelling.
struct ByteTable {
    std::array<int, 256> byte_to_cp{};
    std::unordered_map<int, uint8_t> cp_to_byte;

    ByteTable() {
        std::vector<int> bs;
        for (int b = int('!'); b <= int('~'); ++b) bs.push_back(b);
        for (int b = 0xA1; b <= 0xAC; ++b) bs.push_back(b);
        for (int b = 0xAE; b <= 0xFF; ++b) bs.push_back(b);
        std::vector<int> cs = bs;
        int n = 0;
        for (int b = 0; b < 256; ++b) {
            if (std::find(bs.begin(), bs.end(), b) == bs.end()) {
                bs.push_back(b);
                cs.push_back(256 + n);
                ++n;
            }
        }
        for (size_t i = 0; i < bs.size(); ++i) {
            byte_to_cp[static_cast<size_t>(bs[i])] = cs[i];
            cp_to_byte[cs[i]] = static_cast<uint8_t>(bs[i]);
        }
    }
};

const ByteTable& byte_table() {
    static const ByteTable t;
    return t;
}

std::string encode_cp_utf8(int cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

// Decodes one UTF-8 codepoint; advances i. Bad sequences raise data_error.
int decode_cp_utf8(const std::string& s, size_t& i) {
    const auto b0 = static_cast<uint8_t>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int cp, extra;
    if ((b0 & 0xE0) == 0xC0) {
        cp = b0 & 0x1F;
        extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
        cp = b0 & 0x0F;
        extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
        cp = b0 & 0x07;
        extra = 3;
    } else {
        throw data_error("tokenizer: invalid UTF-8 in token string");
    }
    if (i + static_cast<size_t>(extra) >= s.size())
        throw data_error("tokenizer: truncated UTF-8 in token string");
    for (int k = 1; k <= extra; ++k) {
        const auto b = static_cast<uint8_t>(s[i + static_cast<size_t>(k)]);
        if ((b & 0xC0) != 0x80) throw data_error("tokenizer: invalid UTF-8 continuation");
        cp = (cp << 6) | (b & 0x3F);
    }
    i += static_cast<size_t>(extra) + 1;
    return cp;
}

bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_letter_byte(char c) {
    return (c >= 'a' && c <= 'z') || static_cast<uint8_t>(c) >= 0x80;
}
bool is_digit_byte(char c) { return c >= '0' && c <= '9'; }

const char* kEow = "</w>";

}  // namespace

std::vector<std::string> split_words(const std::string& text) {
    static const std::array<const char*, 7> contractions = {"'s", "'t", "'re", "'ve",
                                                            "'m", "'ll", "'d"};
    std::vector<std::string> words;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        if (is_space_byte(text[i])) {
            ++i;
            continue;
        }
        if (text[i] == '\'') {
            bool matched = false;
            for (const char* c : contractions) {
                const size_t len = std::strlen(c);
                if (text.compare(i, len, c) == 0) {
                    words.emplace_back(text, i, len);
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        if (is_letter_byte(text[i])) {
            size_t j = i;
            while (j < n && is_letter_byte(text[j])) ++j;
            words.emplace_back(text, i, j - i);
            i = j;
            continue;
        }
        if (is_digit_byte(text[i])) {
            words.emplace_back(text, i, 1);
            ++i;
            continue;
        }
        size_t j = i;
        while (j < n && !is_space_byte(text[j]) && !is_letter_byte(text[j]) &&
               !is_digit_byte(text[j])) {
            if (text[j] == '\'' && j != i) break;
            ++j;
        }
        words.emplace_back(text, i, j - i);
        i = j;
    }
    return words;
}

BpeVocab BpeVocab::from_text(const std::string& vocab_json, const std::string& merges_text) {
    BpeVocab v;
    json j;
    try {
        j = json::parse(vocab_json);
    } catch (const json::exception& e) {
        throw data_error(std::string("vocab: bad JSON: ") + e.what());
    }
    if (!j.is_object()) throw data_error("vocab: expected a JSON object {token: id}");
    for (auto it = j.begin(); it != j.end(); ++it)
        v.token_to_id[it.key()] = it.value().get<int>();

    std::istringstream ms(merges_text);
    std::string line;
    bool first = true;
    int rank = 0;
    while (std::getline(ms, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            first = false;  // header/comment line
            continue;
        }
        if (line.empty()) continue;
        const size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
            throw data_error("merges: bad line \"" + line + "\"");
        v.merge_rank[{line.substr(0, sp), line.substr(sp + 1)}] = rank++;
    }

    auto find_id = [&](const char* tok) {
        auto it = v.token_to_id.find(tok);
        return it == v.token_to_id.end() ? -1 : it->second;
    };
    v.bos_id = find_id("<|startoftext|>");
    v.eos_id = find_id("<|endoftext|>");
    v.pad_id = find_id("<|pad|>");
    v.separate_eow = v.token_to_id.count(kEow) != 0;
    v.validate();
    return v;
}

BpeVocab BpeVocab::load(const std::string& vocab_json_path, const std::string& merges_path) {
    auto slurp = [](const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw data_error("tokenizer: cannot open \"" + path + "\"");
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    return from_text(slurp(vocab_json_path), slurp(merges_path));
}

void BpeVocab::validate() const {
    const int n = static_cast<int>(token_to_id.size());
    std::vector<const std::string*> by_id(static_cast<size_t>(n), nullptr);
    for (const auto& [tok, id] : token_to_id) {
        if (id < 0 || id >= n)
            throw data_error("vocab: id " + std::to_string(id) + " out of [0," +
                             std::to_string(n) + ")");
        if (by_id[static_cast<size_t>(id)] != nullptr)
            throw data_error("vocab: duplicate id " + std::to_string(id));
        by_id[static_cast<size_t>(id)] = &tok;
    }
    const_cast<BpeVocab*>(this)->id_to_token.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        const_cast<BpeVocab*>(this)->id_to_token[static_cast<size_t>(i)] = *by_id[static_cast<size_t>(i)];
    for (const auto& [pair, rank] : merge_rank) {
        (void)rank;
        if (token_to_id.count(pair.first + pair.second) == 0)
            throw data_error("vocab: merge product \"" + pair.first + pair.second +
                             "\" missing from vocab");
    }
    if (bos_id < 0) throw data_error("vocab: missing <|startoftext|>");
    if (eos_id < 0) throw data_error("vocab: missing <|endoftext|>");
    if (bos_id == eos_id || bos_id == pad_id || eos_id == pad_id)
        throw data_error("vocab: special ids must be distinct");
}

namespace {

std::vector<std::string> bpe_word(const std::string& word, const BpeVocab& vocab) {
    std::vector<std::string> symbols;
    for (char c : word) {
        symbols.push_back(encode_cp_utf8(byte_table().byte_to_cp[static_cast<uint8_t>(c)]));
    }
    if (symbols.empty()) return symbols;
    if (vocab.separate_eow) {
        symbols.emplace_back(kEow);
    } else {
        symbols.back() += kEow;
    }
    // Greedy lowest-rank merging; ranks are unique by construction.
    while (symbols.size() > 1) {
        int best_rank = -1;
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < symbols.size(); ++i) {
            auto it = vocab.merge_rank.find({symbols[i], symbols[i + 1]});
            if (it != vocab.merge_rank.end() && (best_rank < 0 || it->second < best_rank)) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank < 0) break;
        // Merge every non-overlapping occurrence of the chosen pair.
        const std::string lhs = symbols[best_pos];
        const std::string rhs = symbols[best_pos + 1];
        std::vector<std::string> merged;
        merged.reserve(symbols.size());
        for (size_t i = 0; i < symbols.size();) {
            if (i + 1 < symbols.size() && symbols[i] == lhs && symbols[i + 1] == rhs) {
                merged.push_back(lhs + rhs);
                i += 2;
            } else {
                merged.push_back(symbols[i]);
                ++i;
            }
        }
        symbols = std::move(merged);
    }
    return symbols;
}

}  // namespace

TokenSequence tokenize(const std::string& text, const BpeVocab& vocab, int max_positions) {
    if (max_positions < 2) throw shape_error("tokenize: max_positions must be >= 2");
    std::string canonical;
    canonical.reserve(text.size());
    for (char c : text)
        canonical.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);

    TokenSequence seq;
    seq.ids.push_back(vocab.bos_id);
    for (const std::string& word : split_words(canonical)) {
        for (const std::string& sym : bpe_word(word, vocab)) {
            auto it = vocab.token_to_id.find(sym);
            if (it == vocab.token_to_id.end())
                throw unknown_symbol_error("tokenize: symbol \"" + sym + "\" not in vocab");
            seq.ids.push_back(it->second);
        }
    }
    seq.ids.push_back(vocab.eos_id);
    if (static_cast<int>(seq.ids.size()) > max_positions) {
        seq.ids.resize(static_cast<size_t>(max_positions));
        seq.ids.back() = vocab.eos_id;
    }
    seq.eos_index = static_cast<int>(seq.ids.size()) - 1;
    return seq;
}

std::string detokenize(const std::vector<int>& ids, const BpeVocab& vocab) {
    std::string mapped;
    for (int id : ids) {
        if (id < 0 || id >= vocab.size())
            throw data_error("detokenize: id " + std::to_string(id) + " out of range");
        if (id == vocab.bos_id || id == vocab.eos_id || id == vocab.pad_id) continue;
        mapped += vocab.id_to_token[static_cast<size_t>(id)];
    }
    // "</w>" -> space, then invert the byte mapping.
    std::string spaced;
    size_t i = 0;
    while (i < mapped.size()) {
        if (mapped.compare(i, 4, kEow) == 0) {
            spaced.push_back(' ');
            i += 4;
        } else {
            spaced.push_back(mapped[i]);
            ++i;
        }
    }
    std::string out;
    i = 0;
    while (i < spaced.size()) {
        if (spaced[i] == ' ') {
            out.push_back(' ');
            ++i;
            continue;
        }
        const int cp = decode_cp_utf8(spaced, i);
        auto it = byte_table().cp_to_byte.find(cp);
        if (it == byte_table().cp_to_byte.end())
            throw data_error("detokenize: codepoint outside the byte table");
        out.push_back(static_cast<char>(it->second));
    }
    // Trim.
    size_t b = out.find_first_not_of(' ');
    size_t e = out.find_last_not_of(' ');
    if (b == std::string::npos) return "";
    return out.substr(b, e - b + 1);
}

std::string token_display(int id, const BpeVocab& vocab) {
    if (id < 0 || id >= vocab.size())
        throw data_error("token_display: id " + std::to_string(id) + " out of range");
    return vocab.id_to_token[static_cast<size_t>(id)];
}

}  // namespace hg
