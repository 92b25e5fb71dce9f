#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace stc {

// Dense-id symbol table with the four reserved symbols at fixed positions.
struct Vocabulary {
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  std::vector<std::string> symbols;
  std::unordered_map<std::string, int> ids;

  Vocabulary() = default;
  // reserved symbols followed by the given regular symbols
  explicit Vocabulary(const std::vector<std::string>& regular);
  // reserved symbols plus n single-letter symbols starting at 'a' or 'A'
  static Vocabulary letters(int n, bool uppercase = false);

  int size() const { return static_cast<int>(symbols.size()); }
  int id(const std::string& symbol) const;  // kUnk when absent
  const std::string& symbol(int id) const;
  bool operator==(const Vocabulary& other) const { return symbols == other.symbols; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
};

}  // namespace stc
