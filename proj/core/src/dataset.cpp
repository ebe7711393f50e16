#include "hg/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hg {

using nlohmann::json;

std::vector<PromptRecord> parse_dataset_jsonl(const std::string& content) {
    std::vector<PromptRecord> out;
    std::istringstream ss(content);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw data_error("dataset line " + std::to_string(lineno) + ": bad JSON: " + e.what());
        }
        PromptRecord r;
        if (j.contains("ids")) r.ids = j["ids"].get<std::vector<int>>();
        if (j.contains("text")) r.text = j["text"].get<std::string>();
        if (!r.has_ids() && r.text.empty())
            throw data_error("dataset line " + std::to_string(lineno) + ": needs \"text\" or \"ids\"");
        if (!j.contains("label"))
            throw data_error("dataset line " + std::to_string(lineno) + ": missing \"label\"");
        const std::string label = j["label"].get<std::string>();
        if (label == "nsfw") r.nsfw = true;
        else if (label == "benign") r.nsfw = false;
        else throw data_error("dataset line " + std::to_string(lineno) + ": unknown label \"" + label + "\"");
        if (j.contains("categories")) r.categories = j["categories"].get<std::vector<std::string>>();
        if (!r.nsfw && !r.categories.empty())
            throw data_error("dataset line " + std::to_string(lineno) + ": benign records cannot carry categories");
        r.weight = j.value("weight", 1.0);
        if (!(r.weight > 0.0))
            throw data_error("dataset line " + std::to_string(lineno) + ": weight must be > 0");
        r.source = j.value("source", std::string());
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PromptRecord> load_dataset_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("dataset: cannot open \"" + path + "\"");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_dataset_jsonl(ss.str());
}

std::string dataset_to_jsonl(const std::vector<PromptRecord>& records) {
    std::string out;
    for (const PromptRecord& r : records) {
        json j;
        if (r.has_ids()) j["ids"] = r.ids;
        else j["text"] = r.text;
        j["label"] = r.nsfw ? "nsfw" : "benign";
        if (!r.categories.empty()) j["categories"] = r.categories;
        if (r.weight != 1.0) j["weight"] = r.weight;
        if (!r.source.empty()) j["source"] = r.source;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_dataset_jsonl(const std::vector<PromptRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("dataset: cannot open \"" + path + "\" for writing");
    f << dataset_to_jsonl(records);
    if (!f) throw data_error("dataset: write failed for \"" + path + "\"");
}

}  // namespace hg
