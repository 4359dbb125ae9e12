#include "mrgs/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mrgs/error.hpp"
#include "mrgs/hash.hpp"

namespace mrgs {

Index TokenIndex::intern(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<Index>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

Index TokenIndex::find(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, const std::string& delimiter) {
  std::vector<std::string> fields;
  if (delimiter == "ws") {
    std::istringstream ss(line);
    std::string f;
    while (ss >> f) fields.push_back(f);
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + delimiter.size();
  }
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

// Re-indexes the kept interactions in first-appearance order.
InteractionLog compact(const InteractionLog& log, const std::vector<char>& keep) {
  InteractionLog out;
  for (std::size_t i = 0; i < log.interactions.size(); ++i) {
    if (!keep[i]) continue;
    const Interaction& x = log.interactions[i];
    out.interactions.push_back(Interaction{out.users.intern(log.users.token(x.user)),
                                           out.items.intern(log.items.token(x.item)), x.timestamp});
  }
  return out;
}

}  // namespace

InteractionLog parse_interactions(std::istream& in, const InputFormat& format) {
  const int needed = std::max({format.user_column, format.item_column, format.time_column}) + 1;
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (format.skip_header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, format.delimiter);
    if (static_cast<int>(fields.size()) < needed) {
      parse_fail(line_no, "expected at least " + std::to_string(needed) + " fields, got " +
                              std::to_string(fields.size()));
    }
    const std::string user = trim(fields[static_cast<std::size_t>(format.user_column)]);
    const std::string item = trim(fields[static_cast<std::size_t>(format.item_column)]);
    const std::string ts = trim(fields[static_cast<std::size_t>(format.time_column)]);
    if (user.empty() || item.empty()) parse_fail(line_no, "empty user or item token");
    std::int64_t stamp = 0;
    const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), stamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size()) parse_fail(line_no, "bad timestamp '" + ts + "'");
    if (stamp < 0) parse_fail(line_no, "negative timestamp");
    log.interactions.push_back(Interaction{log.users.intern(user), log.items.intern(item), stamp});
  }
  if (log.interactions.empty()) throw DataError("empty input: no interactions");
  return log;
}

InteractionLog load_interactions(const std::filesystem::path& path, const InputFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file " + path.string());
  return parse_interactions(in, format);
}

InteractionLog min_count_filter(const InteractionLog& log, std::int64_t threshold, FilterMode mode) {
  if (threshold < 1) throw DataError("min_count_filter: threshold must be >= 1");
  std::vector<char> keep(log.interactions.size(), 1);
  while (true) {
    std::vector<std::int64_t> user_count(static_cast<std::size_t>(log.n_users()), 0);
    std::vector<std::int64_t> item_count(static_cast<std::size_t>(log.n_items()), 0);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      ++user_count[static_cast<std::size_t>(log.interactions[i].user)];
      ++item_count[static_cast<std::size_t>(log.interactions[i].item)];
    }
    bool removed = false;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      const Interaction& x = log.interactions[i];
      if (user_count[static_cast<std::size_t>(x.user)] < threshold ||
          item_count[static_cast<std::size_t>(x.item)] < threshold) {
        keep[i] = 0;
        removed = true;
      }
    }
    if (!removed || mode == FilterMode::kSinglePass) break;
  }
  InteractionLog out = compact(log, keep);
  if (out.interactions.empty()) throw DataError("empty after filter: threshold " + std::to_string(threshold));
  return out;
}

std::int64_t drop_short_users(InteractionLog& log, std::int64_t min_length) {
  std::vector<std::int64_t> count(static_cast<std::size_t>(log.n_users()), 0);
  for (const auto& x : log.interactions) ++count[static_cast<std::size_t>(x.user)];
  const auto dropped = std::count_if(count.begin(), count.end(), [&](std::int64_t c) { return c < min_length; });
  if (dropped == 0) return 0;
  std::vector<char> keep(log.interactions.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    keep[i] = count[static_cast<std::size_t>(log.interactions[i].user)] >= min_length;
  }
  log = compact(log, keep);
  return dropped;
}

std::vector<Index> UserSplit::full_sequence() const {
  std::vector<Index> seq = train;
  seq.push_back(validation);
  seq.push_back(test);
  return seq;
}

std::uint64_t SplitDataset::fingerprint() const {
  std::string buf;
  buf += std::to_string(n_users) + " " + std::to_string(n_items) + "\n";
  for (const auto& u : users) {
    for (Index i : u.train) buf += std::to_string(i) + " ";
    buf += "| " + std::to_string(u.validation) + " " + std::to_string(u.test) + "\n";
  }
  return fnv1a64(buf);
}

SplitDataset chronological_split(const InteractionLog& log) {
  struct Event {
    std::int64_t timestamp;
    Index item;
  };
  std::vector<std::vector<Event>> per_user(static_cast<std::size_t>(log.n_users()));
  for (const auto& x : log.interactions) per_user[static_cast<std::size_t>(x.user)].push_back({x.timestamp, x.item});

  SplitDataset out;
  out.n_users = log.n_users();
  out.n_items = log.n_items();
  out.user_tokens = log.users.tokens();
  out.item_tokens = log.items.tokens();
  out.users.resize(per_user.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& events = per_user[u];
    if (events.size() < 3) {
      throw DataError("invariant violation: user '" + log.users.token(static_cast<Index>(u)) + "' has " +
                      std::to_string(events.size()) + " interactions, need >= 3");
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    UserSplit& s = out.users[u];
    for (std::size_t i = 0; i + 2 < events.size(); ++i) s.train.push_back(events[i].item);
    s.validation = events[events.size() - 2].item;
    s.test = events.back().item;
  }
  return out;
}

DatasetStats compute_stats(const InteractionLog& log) {
  if (log.interactions.empty()) throw DataError("empty input: no interactions");
  DatasetStats s;
  s.n_users = log.n_users();
  s.n_items = log.n_items();
  s.n_interactions = static_cast<std::int64_t>(log.interactions.size());
  s.avg_length = static_cast<double>(s.n_interactions) / static_cast<double>(s.n_users);
  return s;
}

PreparedData prepare_dataset(const InteractionLog& raw, const PrepareOptions& options) {
  PreparedData out;
  out.options = options;
  InteractionLog log = min_count_filter(raw, options.min_count, options.mode);
  out.dropped_short_users = drop_short_users(log, 3);
  if (log.interactions.empty()) throw DataError("empty after filter: no user with >= 3 interactions");
  out.stats = compute_stats(log);
  out.split = chronological_split(log);
  return out;
}

std::string to_string(FilterMode mode) { return mode == FilterMode::kFixpoint ? "fixpoint" : "single-pass"; }

FilterMode parse_filter_mode(const std::string& text) {
  if (text == "fixpoint") return FilterMode::kFixpoint;
  if (text == "single-pass") return FilterMode::kSinglePass;
  throw ParseError("unknown filter mode '" + text + "' (expected fixpoint or single-pass)");
}

// ---------------------------------------------------------------------------
// Snapshot

void write_snapshot(std::ostream& out, const PreparedData& data) {
  const SplitDataset& s = data.split;
  char avg[64];
  std::snprintf(avg, sizeof avg, "%.17g", data.stats.avg_length);
  out << kDataMagic << '\n';
  out << "stats " << data.stats.n_users << ' ' << data.stats.n_items << ' ' << data.stats.n_interactions << ' '
      << avg << '\n';
  out << "prepare min_count=" << data.options.min_count << " filter=" << to_string(data.options.mode)
      << " dropped_short_users=" << data.dropped_short_users << '\n';
  out << "fingerprint " << to_hex(s.fingerprint()) << '\n';
  out << "users " << s.n_users << '\n';
  for (const auto& t : s.user_tokens) out << t << '\n';
  out << "items " << s.n_items << '\n';
  for (const auto& t : s.item_tokens) out << t << '\n';
  out << "sequences " << s.users.size() << '\n';
  for (const auto& u : s.users) {
    out << u.validation << ' ' << u.test << ' ' << u.train.size();
    for (Index i : u.train) out << ' ' << i;
    out << '\n';
  }
  out << "end\n";
}

void write_snapshot(const std::filesystem::path& path, const PreparedData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write snapshot " + path.string());
  write_snapshot(out, data);
}

namespace {

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string("snapshot truncated before ") + what);
  return line;
}

std::int64_t expect_count(std::istream& in, const std::string& key) {
  std::istringstream ss(expect_line(in, key.c_str()));
  std::string k;
  std::int64_t n = -1;
  if (!(ss >> k >> n) || k != key || n < 0) throw ParseError("snapshot: expected '" + key + " <count>'");
  return n;
}

}  // namespace

PreparedData read_snapshot(std::istream& in) {
  PreparedData d;
  if (expect_line(in, "magic") != kDataMagic) throw ParseError("snapshot: bad magic header");
  {
    std::istringstream ss(expect_line(in, "stats"));
    std::string k;
    if (!(ss >> k >> d.stats.n_users >> d.stats.n_items >> d.stats.n_interactions >> d.stats.avg_length) ||
        k != "stats") {
      throw ParseError("snapshot: bad stats line");
    }
  }
  {
    std::istringstream ss(expect_line(in, "prepare"));
    std::string k, kv;
    ss >> k;
    if (k != "prepare") throw ParseError("snapshot: bad prepare line");
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("snapshot: bad prepare field " + kv);
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "min_count") d.options.min_count = std::stoll(val);
      else if (key == "filter") d.options.mode = parse_filter_mode(val);
      else if (key == "dropped_short_users") d.dropped_short_users = std::stoll(val);
    }
  }
  std::string stored_fp;
  {
    std::istringstream ss(expect_line(in, "fingerprint"));
    std::string k;
    if (!(ss >> k >> stored_fp) || k != "fingerprint") throw ParseError("snapshot: bad fingerprint line");
  }
  SplitDataset& s = d.split;
  s.n_users = expect_count(in, "users");
  for (Index u = 0; u < s.n_users; ++u) s.user_tokens.push_back(expect_line(in, "user token"));
  s.n_items = expect_count(in, "items");
  for (Index i = 0; i < s.n_items; ++i) s.item_tokens.push_back(expect_line(in, "item token"));
  const std::int64_t n_seq = expect_count(in, "sequences");
  if (n_seq != s.n_users) throw ParseError("snapshot: sequence count does not match user count");
  s.users.resize(static_cast<std::size_t>(n_seq));
  const auto check_item = [&](Index i) {
    if (i < 0 || i >= s.n_items) throw ParseError("snapshot: item id out of range");
    return i;
  };
  for (auto& u : s.users) {
    std::istringstream ss(expect_line(in, "sequence"));
    std::size_t len = 0;
    if (!(ss >> u.validation >> u.test >> len)) throw ParseError("snapshot: bad sequence line");
    check_item(u.validation);
    check_item(u.test);
    u.train.resize(len);
    for (auto& i : u.train) {
      if (!(ss >> i)) throw ParseError("snapshot: short sequence line");
      check_item(i);
    }
  }
  if (expect_line(in, "end") != "end") throw ParseError("snapshot: missing end marker");
  if (to_hex(s.fingerprint()) != stored_fp) throw ParseError("snapshot: fingerprint mismatch");
  return d;
}

PreparedData read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snapshot " + path.string());
  return read_snapshot(in);
}

}  // namespace mrgs
