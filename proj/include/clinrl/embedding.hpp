#pragma once

#include <string_view>

#include "clinrl/linalg.hpp"

namespace clinrl {

/// Text encoder returning unit-norm vectors of a fixed dimension.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual Eigen::Index dimension() const = 0;
  virtual Embedding embed(std::string_view text) = 0;
};

/// Feature-hashed bag of non-stopword tokens, L2-normalized. Each token adds
/// +-1 to one of `dimension` buckets chosen by its FNV-1a hash. Word order,
/// case, punctuation and stopwords do not affect the embedding.
class HashEmbedder final : public EmbeddingBackend {
 public:
  explicit HashEmbedder(Eigen::Index dimension = 64);

  Eigen::Index dimension() const override { return dimension_; }
  Embedding embed(std::string_view text) override;

 private:
  Eigen::Index dimension_;
};

}  // namespace clinrl
