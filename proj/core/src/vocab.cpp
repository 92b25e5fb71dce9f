#include "stc/vocab.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stc {

Vocabulary::Vocabulary(const std::vector<std::string>& regular) {
  symbols = {"<bos>", "<eos>", "<pad>", "<unk>"};
  symbols.insert(symbols.end(), regular.begin(), regular.end());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (!ids.emplace(symbols[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate vocabulary symbol: " + symbols[i]);
  }
}

Vocabulary Vocabulary::letters(int n, bool uppercase) {
  if (n < 1 || n > 26) throw std::invalid_argument("letters: n must be in [1,26]");
  std::vector<std::string> regular;
  for (int i = 0; i < n; ++i)
    regular.push_back(std::string(1, static_cast<char>((uppercase ? 'A' : 'a') + i)));
  return Vocabulary(regular);
}

int Vocabulary::id(const std::string& symbol) const {
  auto it = ids.find(symbol);
  return it == ids.end() ? kUnk : it->second;
}

const std::string& Vocabulary::symbol(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
  return symbols[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& token_ids) const {
  std::vector<std::string> out;
  out.reserve(token_ids.size());
  for (int t : token_ids) out.push_back(symbol(t));
  return out;
}

nlohmann::json Vocabulary::to_json() const { return nlohmann::json(symbols); }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  auto all = j.get<std::vector<std::string>>();
  if (all.size() < kNumReserved) throw std::invalid_argument("vocabulary json too small");
  Vocabulary v(std::vector<std::string>(all.begin() + kNumReserved, all.end()));
  if (v.symbols != all) throw std::invalid_argument("vocabulary json has bad reserved symbols");
  return v;
}

}  // namespace stc
