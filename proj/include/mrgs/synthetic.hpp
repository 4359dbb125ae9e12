#pragma once

// Synthetic interaction logs with both cluster structure (each user returns
// to one home item cluster, which a co-occurrence graph exposes) and
// first-order Markov order structure (each item has a preferred successor
// anywhere in the catalog, which a sequence model exposes).

#include <cstdint>

#include "mrgs/data.hpp"

namespace mrgs {

struct SyntheticSpec {
  Index n_users = 600;
  Index n_items = 240;
  Index n_clusters = 8;
  Index min_length = 8;
  Index max_length = 20;
  double follow_prob = 0.6;   // move to the current item's successor
  double stray_prob = 0.05;   // move to a uniformly random item; otherwise home cluster
  std::uint64_t seed = 7;
};

// Tokens are "u<id>" / "i<id>"; timestamps strictly increase per user.
InteractionLog generate_structured_log(const SyntheticSpec& spec);

}  // namespace mrgs
