#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace stc {

// Flat "key = value" document. '#' starts a comment, blank lines are ignored.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text);
KvMap load_kv(const std::string& path);
std::string kv_to_string(const KvMap& kv);

// file helpers shared by checkpoint/corpus writers
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace stc
