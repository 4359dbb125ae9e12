#include "mrgs/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mrgs/error.hpp"

namespace mrgs {

InteractionLog generate_structured_log(const SyntheticSpec& spec) {
  if (spec.n_users < 1 || spec.n_clusters < 1 || spec.n_items < 2 * spec.n_clusters ||
      spec.min_length < 1 || spec.max_length < spec.min_length) {
    throw DataError("synthetic spec: inconsistent sizes");
  }
  std::mt19937_64 rng(spec.seed);
  const Index per_cluster = spec.n_items / spec.n_clusters;

  // Items of cluster k occupy [k * per_cluster, (k + 1) * per_cluster); the
  // remainder joins the last cluster. Successors form one random cycle over
  // the whole catalog, so the order signal crosses cluster boundaries.
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(spec.n_clusters));
  for (Index i = 0; i < spec.n_items; ++i) {
    members[static_cast<std::size_t>(std::min(i / per_cluster, spec.n_clusters - 1))].push_back(i);
  }
  std::vector<Index> cycle(static_cast<std::size_t>(spec.n_items));
  std::iota(cycle.begin(), cycle.end(), Index{0});
  std::shuffle(cycle.begin(), cycle.end(), rng);
  std::vector<Index> successor(cycle.size());
  for (std::size_t k = 0; k < cycle.size(); ++k) successor[static_cast<std::size_t>(cycle[k])] = cycle[(k + 1) % cycle.size()];

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<Index> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<Index> any_item(0, spec.n_items - 1);
  std::uniform_int_distribution<Index> any_cluster(0, spec.n_clusters - 1);

  // Emit events in global time order interleaved across users so record
  // order differs from per-user order.
  struct Event {
    std::int64_t ts;
    Index user;
    Index item;
  };
  std::vector<Event> events;
  for (Index u = 0; u < spec.n_users; ++u) {
    const auto& home = members[static_cast<std::size_t>(any_cluster(rng))];
    std::uniform_int_distribution<std::size_t> in_home(0, home.size() - 1);
    Index item = home[in_home(rng)];
    const Index len = length(rng);
    std::int64_t ts = 1'000'000 + static_cast<std::int64_t>(u) * 7;
    for (Index t = 0; t < len; ++t) {
      events.push_back({ts, u, item});
      ts += 100 + static_cast<std::int64_t>(coin(rng) * 50.0);
      const double r = coin(rng);
      if (r < spec.follow_prob) {
        item = successor[static_cast<std::size_t>(item)];
      } else if (r < spec.follow_prob + spec.stray_prob) {
        item = any_item(rng);
      } else {
        item = home[in_home(rng)];
      }
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });

  InteractionLog log;
  for (const Event& e : events) {
    log.interactions.push_back(Interaction{log.users.intern("u" + std::to_string(e.user)),
                                           log.items.intern("i" + std::to_string(e.item)), e.ts});
  }
  return log;
}

}  // namespace mrgs
