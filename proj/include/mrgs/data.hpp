#pragma once

// Interaction log ingestion, minimum-count filtering, leave-one-out splits,
// dataset statistics and the versioned dataset snapshot.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mrgs/numerics.hpp"

namespace mrgs {

inline constexpr std::string_view kDataMagic = "MRGS-DATA-v1";

// Bijection between opaque string tokens and contiguous ids, ids assigned in
// first-appearance order.
class TokenIndex {
 public:
  Index intern(const std::string& token);
  Index find(const std::string& token) const;  // -1 when absent
  const std::string& token(Index id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  Index size() const noexcept { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> ids_;
};

struct Interaction {
  Index user = 0;
  Index item = 0;
  std::int64_t timestamp = 0;
};

struct InteractionLog {
  std::vector<Interaction> interactions;  // original record order
  TokenIndex users;
  TokenIndex items;

  Index n_users() const noexcept { return users.size(); }
  Index n_items() const noexcept { return items.size(); }
};

// Delimited text layout. delimiter "ws" splits on runs of blanks/tabs; any
// other value is matched literally (e.g. "\t", ",", "::").
struct InputFormat {
  std::string delimiter = "\t";
  int user_column = 0;
  int item_column = 1;
  int time_column = 2;
  bool skip_header = false;
};

InteractionLog parse_interactions(std::istream& in, const InputFormat& format = {});
InteractionLog load_interactions(const std::filesystem::path& path, const InputFormat& format = {});

enum class FilterMode { kSinglePass, kFixpoint };

// Drops users and items with fewer than `threshold` interactions and
// re-compacts both index maps in first-appearance order.
InteractionLog min_count_filter(const InteractionLog& log, std::int64_t threshold,
                                FilterMode mode = FilterMode::kFixpoint);

// Removes users with fewer than `min_length` interactions (items left without
// interactions disappear too). Returns the number of users dropped.
std::int64_t drop_short_users(InteractionLog& log, std::int64_t min_length = 3);

struct UserSplit {
  std::vector<Index> train;  // chronological
  Index validation = -1;     // second most recent
  Index test = -1;           // most recent

  std::vector<Index> full_sequence() const;
};

struct SplitDataset {
  Index n_users = 0;
  Index n_items = 0;
  std::vector<UserSplit> users;  // indexed by user id
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;

  std::uint64_t fingerprint() const;
};

// Stable sort of each user's events by timestamp (ties keep record order),
// then last -> test, second to last -> validation, rest -> train.
SplitDataset chronological_split(const InteractionLog& log);

struct DatasetStats {
  std::int64_t n_users = 0;
  std::int64_t n_items = 0;
  std::int64_t n_interactions = 0;
  double avg_length = 0.0;
};

DatasetStats compute_stats(const InteractionLog& log);

// Full preprocessing chain used by `prepare`.
struct PrepareOptions {
  std::int64_t min_count = 5;
  FilterMode mode = FilterMode::kFixpoint;
};

struct PreparedData {
  SplitDataset split;
  DatasetStats stats;
  std::int64_t dropped_short_users = 0;
  PrepareOptions options;
};

PreparedData prepare_dataset(const InteractionLog& raw, const PrepareOptions& options);

void write_snapshot(std::ostream& out, const PreparedData& data);
void write_snapshot(const std::filesystem::path& path, const PreparedData& data);
PreparedData read_snapshot(std::istream& in);
PreparedData read_snapshot(const std::filesystem::path& path);

std::string to_string(FilterMode mode);
FilterMode parse_filter_mode(const std::string& text);

}  // namespace mrgs
