#pragma once

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mrgs/data.hpp"
#include "mrgs/log.hpp"
#include "mrgs/numerics.hpp"

namespace testutil {

using mrgs::Index;
using mrgs::Matrix;

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Random split with train length in [min_train, max_train].
inline mrgs::SplitDataset random_split(Index n_users, Index n_items, std::mt19937_64& rng, Index min_train = 2,
                                       Index max_train = 6) {
  mrgs::SplitDataset data;
  data.n_users = n_users;
  data.n_items = n_items;
  std::uniform_int_distribution<Index> item(0, n_items - 1);
  std::uniform_int_distribution<Index> len(min_train, max_train);
  for (Index u = 0; u < n_users; ++u) {
    mrgs::UserSplit s;
    const Index n = len(rng);
    for (Index t = 0; t < n; ++t) s.train.push_back(item(rng));
    s.validation = item(rng);
    s.test = item(rng);
    data.users.push_back(s);
    data.user_tokens.push_back("u" + std::to_string(u));
  }
  for (Index i = 0; i < n_items; ++i) data.item_tokens.push_back("i" + std::to_string(i));
  return data;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mrgs_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Silences warnings for the lifetime of the object.
struct QuietWarnings {
  QuietWarnings() { mrgs::set_warning_sink([](const std::string&) {}); }
  ~QuietWarnings() {
    mrgs::set_warning_sink([](const std::string& m) { std::fprintf(stderr, "warning: %s\n", m.c_str()); });
  }
};

}  // namespace testutil
