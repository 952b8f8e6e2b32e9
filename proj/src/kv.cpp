#include "ifm/kv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ifm/types.hpp"

namespace ifm {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

KvDocument KvDocument::parse(std::string_view text) {
    KvDocument doc;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("kv parse error at line " + std::to_string(line_no) + ": missing '='");
        }
        std::string_view key = trim(line.substr(0, eq));
        std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError("kv parse error at line " + std::to_string(line_no) + ": empty key");
        }
        doc.entries_.emplace_back(std::string(key), std::string(value));
    }
    return doc;
}

KvDocument KvDocument::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void KvDocument::set(std::string key, std::string value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(std::move(key), std::move(value));
}

void KvDocument::set_double(std::string key, double value) { set(std::move(key), format_double17(value)); }

void KvDocument::set_int(std::string key, long long value) { set(std::move(key), std::to_string(value)); }

bool KvDocument::has(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

const std::string& KvDocument::get(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw ValidationError("missing key: " + std::string(key));
}

double KvDocument::get_double(std::string_view key) const {
    const std::string& raw = get(key);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || *end != '\0' || errno == ERANGE) {
        throw ValidationError("key '" + std::string(key) + "' is not a number: '" + raw + "'");
    }
    return v;
}

long long KvDocument::get_int(std::string_view key) const {
    const std::string& raw = get(key);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(raw.c_str(), &end, 10);
    if (end == raw.c_str() || *end != '\0' || errno == ERANGE) {
        throw ValidationError("key '" + std::string(key) + "' is not an integer: '" + raw + "'");
    }
    return v;
}

std::optional<double> KvDocument::get_double_opt(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return get_double(key);
}

std::string KvDocument::to_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

void KvDocument::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << to_string();
}

std::string format_double17(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

}  // namespace ifm
