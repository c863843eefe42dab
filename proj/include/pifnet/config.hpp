#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "pifnet/common.hpp"

namespace pifnet {

// Plain structured text with dotted keys:
//   # comment
//   train.lr = 0.0001
//   model.preset = pif_a_desk
// Unknown keys are rejected after parsing (ensure_all_consumed), and the
// fully resolved configuration (defaults included) can be echoed back out.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_text(const std::string& text);
    static KeyValueConfig parse_file(const std::string& path);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    std::size_t get_size(const std::string& key, std::size_t fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);

    // Throws ConfigError if any parsed key was never consumed by a getter.
    void ensure_all_consumed() const;

    void set(const std::string& key, const std::string& value);
    // Sorted "key = value" lines.
    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace pifnet
