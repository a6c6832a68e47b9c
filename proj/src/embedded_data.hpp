#pragma once

// Bundled default data files, compiled in from data/ at configure time.

#include <string_view>

namespace litatlas::embedded {

std::string_view stopwords();
std::string_view lexicon();
std::string_view rules();

}  // namespace litatlas::embedded
