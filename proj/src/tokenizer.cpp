// SPDX-License-Identifier: Apache-2.0
#include "ftmp/tokenizer.hpp"

#include <regex>
#include <sstream>
#include <utility>

namespace ftmp {

namespace {

struct Rule {
  std::regex pattern;
  const char* replacement;
};

Rule rule(const char* pattern, const char* replacement, bool icase = false) {
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (icase) flags |= std::regex::icase;
  return {std::regex(pattern, flags), replacement};
}

bool is_word_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c == '_' || c >= 0x80;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// (?i)(?<!\w)(')(?!(?:re|ve|ll|m|t|s|d|n)\b)(?=\w) -> "' "
// std::regex has no lookbehind, so this one is hand-rolled.
std::string split_leading_apostrophes(const std::string& text) {
  static constexpr std::string_view kClitics[] = {"re", "ve", "ll", "m", "t", "s", "d", "n"};
  std::string out;
  out.reserve(text.size() + 8);
  for (std::size_t i = 0; i < text.size(); ++i) {
    out.push_back(text[i]);
    if (text[i] != '\'') continue;
    if (i > 0 && is_word_char(static_cast<unsigned char>(text[i - 1]))) continue;
    if (i + 1 >= text.size() || !is_word_char(static_cast<unsigned char>(text[i + 1]))) continue;
    bool clitic = false;
    for (auto c : kClitics) {
      if (i + 1 + c.size() > text.size()) continue;
      bool same = true;
      for (std::size_t k = 0; k < c.size(); ++k)
        if (lower(text[i + 1 + k]) != c[k]) same = false;
      std::size_t end = i + 1 + c.size();
      if (same && (end == text.size() || !is_word_char(static_cast<unsigned char>(text[end])))) {
        clitic = true;
        break;
      }
    }
    if (!clitic) out.push_back(' ');
  }
  return out;
}

std::string apply(const std::vector<Rule>& rules, std::string text) {
  for (const auto& r : rules) text = std::regex_replace(text, r.pattern, r.replacement);
  return text;
}

const std::vector<Rule>& starting_quotes() {
  static const std::vector<Rule> rules = {
      rule("([`]+)", " $1 "),
      rule("^\"", "``"),
      rule("(``)", " $1 "),
      rule("([ (\\[{<])(\"|'')", "$1 `` "),
  };
  return rules;
}

const std::vector<Rule>& punctuation() {
  static const std::vector<Rule> rules = {
      rule("([^.])(\\.)([\\])}>\"' ]*)\\s*$", "$1 $2 $3 "),
      rule("([:,])([^0-9])", " $1 $2"),
      rule("([:,])$", " $1 "),
      rule("\\.{2,}", " $& "),
      rule("[;@#$%&]", " $& "),
      rule("([^.])(\\.)([\\])}>\"']*)\\s*$", "$1 $2$3 "),
      rule("[?!]", " $& "),
      rule("([^'])' ", "$1 ' "),
      rule("[*]", " $& "),
      rule("[\\]\\[(){}<>]", " $& "),
      rule("--", " -- "),
  };
  return rules;
}

const std::vector<Rule>& ending_quotes() {
  static const std::vector<Rule> rules = {
      rule("''", " '' "),
      rule("\"", " '' "),
      rule("\\s+", " "),
      rule("([^' ])('[sS]|'[mM]|'[dD]|') ", "$1 $2 "),
      rule("([^' ])('ll|'LL|'re|'RE|'ve|'VE|n't|N'T) ", "$1 $2 "),
  };
  return rules;
}

const std::vector<Rule>& contractions() {
  static const std::vector<Rule> rules = {
      rule("\\b(can)(not)\\b", " $1 $2 ", true),
      rule("\\b(d)('ye)\\b", " $1 $2 ", true),
      rule("\\b(gim)(me)\\b", " $1 $2 ", true),
      rule("\\b(gon)(na)\\b", " $1 $2 ", true),
      rule("\\b(got)(ta)\\b", " $1 $2 ", true),
      rule("\\b(lem)(me)\\b", " $1 $2 ", true),
      rule("\\b(more)('n)\\b", " $1 $2 ", true),
      rule("\\b(wan)(na)(?=\\s)", " $1 $2 ", true),
      rule(" ('t)(is)\\b", " $1 $2 ", true),
      rule(" ('t)(was)\\b", " $1 $2 ", true),
  };
  return rules;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
  std::string text = apply(starting_quotes(), std::string(input));
  text = split_leading_apostrophes(text);
  text = apply(punctuation(), std::move(text));
  text = " " + text + " ";
  text = apply(ending_quotes(), std::move(text));
  text = apply(contractions(), std::move(text));

  std::vector<std::string> tokens;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) tokens.push_back(std::move(tok));
  return tokens;
}

}  // namespace ftmp
