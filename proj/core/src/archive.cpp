#include "hg/archive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "archive serialization assumes a little-endian host");

namespace hg {

using nlohmann::json;

void TensorArchive::add(const std::string& name, std::vector<int64_t> shape,
                        std::vector<float> values) {
    int64_t count = 1;
    for (int64_t s : shape) {
        if (s < 0) throw shape_error("archive: negative dimension in " + name);
        count *= s;
    }
    if (count != static_cast<int64_t>(values.size()))
        throw shape_error("archive: shape does not match value count for " + name);
    entries_[name] = Entry{std::move(shape), std::move(values)};
}

void TensorArchive::add_matrix(const std::string& name, const Matrix& m) {
    add(name, {m.rows, m.cols}, m.data);
}

void TensorArchive::add_vector(const std::string& name, const Vector& v) {
    add(name, {v.dim()}, v.data);
}

const TensorArchive::Entry& TensorArchive::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw missing_tensor_error("archive: missing tensor \"" + name + "\"");
    return it->second;
}

Matrix TensorArchive::get_matrix(const std::string& name) const {
    const Entry& e = get(name);
    if (e.shape.size() != 2) throw shape_error("archive: tensor \"" + name + "\" is not 2-d");
    Matrix m(static_cast<int>(e.shape[0]), static_cast<int>(e.shape[1]));
    m.data = e.values;
    return m;
}

Vector TensorArchive::get_vector(const std::string& name) const {
    const Entry& e = get(name);
    if (e.shape.size() != 1) throw shape_error("archive: tensor \"" + name + "\" is not 1-d");
    Vector v(static_cast<int>(e.shape[0]));
    v.data = e.values;
    return v;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::vector<uint8_t> TensorArchive::to_bytes() const {
    json header = json::object();
    if (!metadata_json_.empty()) {
        header["__metadata__"] = json::parse(metadata_json_);
    }
    uint64_t offset = 0;
    for (const auto& [name, e] : entries_) {
        const uint64_t bytes = e.values.size() * sizeof(float);
        header[name] = {{"dtype", "f32"},
                        {"shape", e.shape},
                        {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    const std::string htext = header.dump();
    std::vector<uint8_t> out;
    out.reserve(8 + htext.size() + offset);
    const uint64_t hlen = htext.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((hlen >> (8 * i)) & 0xFF));
    out.insert(out.end(), htext.begin(), htext.end());
    for (const auto& [name, e] : entries_) {
        const size_t pos = out.size();
        out.resize(pos + e.values.size() * sizeof(float));
        std::memcpy(out.data() + pos, e.values.data(), e.values.size() * sizeof(float));
    }
    return out;
}

TensorArchive TensorArchive::from_bytes(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8) throw truncated_error("archive: file shorter than the length prefix");
    uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= static_cast<uint64_t>(bytes[static_cast<size_t>(i)]) << (8 * i);
    if (8 + hlen > bytes.size()) throw truncated_error("archive: header length exceeds file size");
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<ptrdiff_t>(hlen));
    } catch (const json::exception& e) {
        throw data_error(std::string("archive: bad header JSON: ") + e.what());
    }
    if (!header.is_object()) throw data_error("archive: header is not a JSON object");

    const size_t payload_begin = 8 + static_cast<size_t>(hlen);
    const uint64_t payload_size = bytes.size() - payload_begin;

    TensorArchive a;
    std::vector<std::pair<uint64_t, uint64_t>> spans;  // (begin, end) per tensor
    for (auto it = header.begin(); it != header.end(); ++it) {
        if (it.key() == "__metadata__") {
            a.metadata_json_ = it.value().dump();
            continue;
        }
        const json& meta = it.value();
        if (!meta.contains("dtype") || !meta.contains("shape") || !meta.contains("data_offsets"))
            throw data_error("archive: incomplete descriptor for \"" + it.key() + "\"");
        if (meta["dtype"].get<std::string>() != "f32")
            throw data_error("archive: unsupported dtype for \"" + it.key() + "\"");
        std::vector<int64_t> shape = meta["shape"].get<std::vector<int64_t>>();
        const auto offs = meta["data_offsets"].get<std::vector<uint64_t>>();
        if (offs.size() != 2 || offs[1] < offs[0])
            throw data_error("archive: bad data_offsets for \"" + it.key() + "\"");
        if (offs[1] > payload_size)
            throw truncated_error("archive: payload truncated at \"" + it.key() + "\"");
        int64_t count = 1;
        for (int64_t s : shape) count *= s;
        if (static_cast<uint64_t>(count) * sizeof(float) != offs[1] - offs[0])
            throw shape_error("archive: shape disagrees with byte span for \"" + it.key() + "\"");
        std::vector<float> values(static_cast<size_t>(count));
        std::memcpy(values.data(), bytes.data() + payload_begin + offs[0],
                    static_cast<size_t>(count) * sizeof(float));
        for (float v : values)
            if (!std::isfinite(v))
                throw nonfinite_error("archive: non-finite value in \"" + it.key() + "\"");
        a.entries_[it.key()] = Entry{std::move(shape), std::move(values)};
        spans.emplace_back(offs[0], offs[1]);
    }
    // Spans must tile the payload exactly, whatever order the header lists
    // them in.
    std::sort(spans.begin(), spans.end());
    uint64_t expected_offset = 0;
    for (const auto& [begin, end] : spans) {
        if (begin != expected_offset)
            throw data_error("archive: offsets overlap or leave gaps in the payload");
        expected_offset = end;
    }
    if (expected_offset != payload_size)
        throw data_error("archive: payload has trailing bytes not covered by offsets");
    return a;
}

void TensorArchive::save(const std::string& path) const {
    const std::vector<uint8_t> bytes = to_bytes();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("archive: cannot open \"" + path + "\" for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw data_error("archive: write failed for \"" + path + "\"");
}

TensorArchive TensorArchive::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw data_error("archive: cannot open \"" + path + "\"");
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw data_error("archive: read failed for \"" + path + "\"");
    return from_bytes(bytes);
}

uint64_t archive_checksum(const TensorArchive& a) {
    const std::vector<uint8_t> bytes = a.to_bytes();
    uint64_t h = 1469598103934665603ull;
    for (uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace hg
