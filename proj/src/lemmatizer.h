#pragma once

#include <string>
#include <string_view>

namespace involve::detail {

// Lemma of an already-lowercased word.
std::string lemmatize_lowercase(std::string_view lower);

}  // namespace involve::detail
