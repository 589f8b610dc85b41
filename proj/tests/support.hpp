#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <mutex>
#include <string>
#include <unordered_map>

#include "clinrl/embedding.hpp"
#include "clinrl/error.hpp"

// Asserts that `stmt` throws clinrl::Error with the given code.
#define EXPECT_ERRC(stmt, errc)                                                         \
  do {                                                                                  \
    try {                                                                               \
      stmt;                                                                             \
      ADD_FAILURE() << "expected " << clinrl::to_string(errc) << " from " #stmt;       \
    } catch (const clinrl::Error& e_) {                                                 \
      EXPECT_EQ(e_.code(), errc) << e_.what();                                          \
    }                                                                                   \
  } while (0)

namespace clinrl::testing {

// Embeds registered texts as given vectors; anything else maps to a unit
// basis vector chosen by a running counter.
class FixedEmbedder final : public EmbeddingBackend {
 public:
  explicit FixedEmbedder(Eigen::Index dim) : dim_(dim) {}
  Eigen::Index dimension() const override { return dim_; }
  Embedding embed(std::string_view text) override {
    std::lock_guard lock(m_);
    auto it = table_.find(std::string(text));
    if (it == table_.end()) {
      Embedding v = Embedding::Zero(dim_);
      v(static_cast<Eigen::Index>(next_++ % static_cast<std::size_t>(dim_))) = 1.0;
      it = table_.emplace(std::string(text), v).first;
    }
    return it->second;
  }
  void set(const std::string& text, Embedding v) { table_[text] = v.normalized(); }

 private:
  Eigen::Index dim_;
  std::mutex m_;
  std::size_t next_ = 0;
  std::unordered_map<std::string, Embedding> table_;
};

inline Embedding unit2(double angle) {
  Embedding v(2);
  v << std::cos(angle), std::sin(angle);
  return v;
}

}  // namespace clinrl::testing
