#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hg/error.hpp"
#include "hg/tensor.hpp"

namespace hg {

// Single-file tensor container:
//
//   [8-byte little-endian header length][UTF-8 JSON header][raw payload]
//
// The header maps tensor names to {"dtype":"f32","shape":[...],
// "data_offsets":[begin,end]} with offsets relative to the payload start,
// ascending, non-overlapping and covering the payload exactly. A
// "__metadata__" entry carries free-form JSON. All values are f32
// little-endian.
class TensorArchive {
  public:
    struct Entry {
        std::vector<int64_t> shape;
        std::vector<float> values;
    };

    void add(const std::string& name, std::vector<int64_t> shape, std::vector<float> values);
    void add_matrix(const std::string& name, const Matrix& m);
    void add_vector(const std::string& name, const Vector& v);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    // Raises missing_tensor_error when absent.
    const Entry& get(const std::string& name) const;
    Matrix get_matrix(const std::string& name) const;
    Vector get_vector(const std::string& name) const;
    std::vector<std::string> names() const;

    // Metadata is stored as serialized JSON text to keep this header free of
    // the JSON library.
    void set_metadata_json(const std::string& json_text) { metadata_json_ = json_text; }
    const std::string& metadata_json() const { return metadata_json_; }

    void save(const std::string& path) const;
    static TensorArchive load(const std::string& path);

    // Serialized byte image (what save() writes).
    std::vector<uint8_t> to_bytes() const;
    static TensorArchive from_bytes(const std::vector<uint8_t>& bytes);

  private:
    std::map<std::string, Entry> entries_;
    std::string metadata_json_ = "{}";
};

// FNV-1a over the serialized archive image; pinned in golden tests.
uint64_t archive_checksum(const TensorArchive& a);

}  // namespace hg
