// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ftmp {

// Penn-Treebank-style word tokenizer following the rule cascade of NLTK's
// NLTKWordTokenizer (ASCII rules only, no sentence splitting, case kept).
// The rule list is documented in docs/tokenizer.md.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace ftmp
