#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ifm {

// Flat key=value document: one key per scalar, '#' comments, order preserved.
// Doubles are written with 17 significant digits so they round-trip exactly.
class KvDocument {
  public:
    KvDocument() = default;

    static KvDocument parse(std::string_view text);
    static KvDocument load_file(const std::string& path);

    void set(std::string key, std::string value);
    void set_double(std::string key, double value);
    void set_int(std::string key, long long value);

    bool has(std::string_view key) const;
    const std::string& get(std::string_view key) const;          // throws ValidationError if absent
    double get_double(std::string_view key) const;
    long long get_int(std::string_view key) const;
    std::optional<double> get_double_opt(std::string_view key) const;

    std::string to_string() const;
    void save_file(const std::string& path) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double17(double value);

// FNV-1a 64-bit digest, used for input fingerprints in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace ifm
