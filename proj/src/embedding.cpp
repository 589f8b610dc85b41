#include "clinrl/embedding.hpp"

#include "clinrl/error.hpp"
#include "clinrl/text.hpp"

namespace clinrl {

HashEmbedder::HashEmbedder(Eigen::Index dimension) : dimension_(dimension) {
  if (dimension_ < 2) throw Error(Errc::InvalidInput, "dimension", "must be at least 2");
}

Embedding HashEmbedder::embed(std::string_view s) {
  Embedding v = Embedding::Zero(dimension_);
  for (const auto& token : text::tokenize(s)) {
    if (text::is_stopword(token)) continue;
    const std::uint64_t h = text::fnv1a(token);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_));
    v[bucket] += ((h >> 40) & 1U) ? 1.0 : -1.0;
  }
  const double n = v.norm();
  if (n == 0.0) {
    // Text without content tokens maps to a fixed unit vector.
    v[0] = 1.0;
    return v;
  }
  return v / n;
}

}  // namespace clinrl
