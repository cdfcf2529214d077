#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

namespace subcite::testkit {

/// Encyclopedia-flavoured random prose: mixed case words, clause punctuation,
/// coordinating markers, abbreviations, digits and a few non-ASCII words.
class ProseGenerator {
 public:
  explicit ProseGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string word() {
    static const std::array<const char*, 40> kWords = {
        "river", "capital", "museum", "Reef",  "Assam",  "flag",    "colour", "people",
        "built", "north",   "city",   "the",   "a",      "of",      "in",     "Zürich",
        "naïve", "Ångström", "東京",  "data",  "1981",   "2,900",   "Maya",   "seed",
        "state", "Dr.",     "e.g.",   "site",  "UNESCO", "Heritage", "world", "system",
        "coral", "largest", "Earth",  "known", "region", "X.",      "founded", "tower"};
    return kWords[pick(kWords.size())];
  }

  std::string sentence() {
    std::string out;
    const auto n = 3 + pick(14);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) {
        switch (pick(10)) {
          case 0: out += ", "; break;
          case 1: out += "; "; break;
          case 2: out += " and "; break;
          case 3: out += " which "; break;
          default: out += ' ';
        }
      }
      auto w = word();
      if (i == 0 && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
      out += w;
    }
    static const std::array<const char*, 4> kEnds = {".", ".", "?", "!"};
    return out + kEnds[pick(kEnds.size())];
  }

  std::string document(std::size_t max_sentences = 6) {
    std::string out;
    const auto n = 1 + pick(max_sentences);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += pick(8) == 0 ? "\n\n" : " ";
      out += sentence();
    }
    return out;
  }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace subcite::testkit
