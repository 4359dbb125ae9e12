#include "mrgs/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mrgs/hash.hpp"

namespace mrgs {

RunOutput train_and_evaluate(const SplitDataset& data, const Hyperparams& hyper, const std::string& fingerprint,
                             const EpochCallback& on_epoch, const NormalizedAdjacency* adjacency_override) {
  RunOutput out;
  out.fit = fit(data, hyper, on_epoch, adjacency_override);
  ModelConfig model = hyper.model;
  model.n_users = data.n_users;
  model.n_items = data.n_items;
  const GraphData graph = build_adjacency(data);
  const NormalizedAdjacency& adjacency = adjacency_override ? *adjacency_override : graph.adjacency;
  out.validation = evaluate(out.fit.best, model, data, adjacency, Split::kValidation, hyper.eval);
  out.test = evaluate(out.fit.best, model, data, adjacency, Split::kTest, hyper.eval);
  out.validation.config_fingerprint = fingerprint;
  out.test.config_fingerprint = fingerprint;
  return out;
}

std::string epoch_log_line(const EpochRecord& r, const std::string& fingerprint, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["loss_local"] = r.losses.local;
  j["loss_global"] = r.losses.global;
  j["loss_fused"] = r.losses.fused;
  j["loss_contrastive"] = r.losses.contrastive;
  j["loss_total"] = r.losses.total;
  j["val_hr5"] = r.validation.hr5;
  j["val_hr10"] = r.validation.hr10;
  j["val_ndcg5"] = r.validation.ndcg5;
  j["val_ndcg10"] = r.validation.ndcg10;
  j["wall_seconds"] = r.wall_seconds;
  j["config_fingerprint"] = fingerprint;
  j["seed"] = seed;
  return j.dump();
}

double AblationResult::mean_ndcg10(const std::string& variant, Split split) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.variant != variant) continue;
    sum += split == Split::kTest ? r.test.ndcg10 : r.validation.ndcg10;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

AblationResult run_ablation(const SplitDataset& data, const RunConfig& config, const AblationProgress& progress) {
  std::vector<std::uint64_t> seeds = config.seeds;
  if (seeds.empty()) seeds.push_back(config.hyper.seed);
  const std::string fingerprint = config.fingerprint();
  AblationResult result;
  for (const auto& variant : config.variants) {
    for (const auto seed : seeds) {
      Hyperparams h = ablation_variant(config.hyper, variant);
      h.seed = seed;
      const RunOutput run = train_and_evaluate(data, h, fingerprint);
      AblationRow row{variant, seed, run.fit.best_epoch, data.fingerprint(), run.validation, run.test};
      if (progress) progress(row);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string ablation_table(const AblationResult& result) {
  std::ostringstream out;
  out << "variant\tseed\tbest_epoch\tdata_fingerprint\t" << report_table_header() << '\n';
  for (const auto& r : result.rows) {
    for (const MetricsReport* m : {&r.validation, &r.test}) {
      out << r.variant << '\t' << r.seed << '\t' << r.best_epoch << '\t' << to_hex(r.data_fingerprint) << '\t'
          << report_table_row(*m) << '\n';
    }
  }
  std::vector<std::string> seen;
  for (const auto& r : result.rows) {
    bool dup = false;
    for (const auto& s : seen) dup = dup || s == r.variant;
    if (dup) continue;
    seen.push_back(r.variant);
    char buf[128];
    std::snprintf(buf, sizeof buf, "mean\t%s\tvalidation_ndcg@10\t%.6f\ttest_ndcg@10\t%.6f\n", r.variant.c_str(),
                  result.mean_ndcg10(r.variant, Split::kValidation), result.mean_ndcg10(r.variant));
    out << buf;
  }
  return out.str();
}

}  // namespace mrgs
