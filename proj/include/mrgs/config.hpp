#pragma once

// JSON run configuration. Every key has a default; unknown keys are
// rejected. The fingerprint hashes the fully resolved document, so two
// configs that differ only in omitted-vs-default keys share it.
//
// {
//   "data":   {"dataset": "<snapshot path>"},
//   "output": {"dir": "<run directory>"},
//   "model":  {"dim", "window", "graph_layers", "graph_readout": "last|mean",
//              "n_layers", "n_heads", "d_ff" (0 = 4 * dim), "dropout",
//              "attention": "causal|bidirectional", "user_state": "first|last",
//              "head": "fused|sequential|graph", "init_stddev",
//              "fusion_init": "random|pass_local"},
//   "loss":   {"alpha", "beta", "gamma", "delta", "lambda_reg", "negatives"},
//   "optim":  {"learning_rate", "beta1", "beta2", "eps"},
//   "train":  {"batch_size", "max_epochs", "patience", "seed",
//              "examples": "last|random_prefix"},
//   "eval":   {"exclude_seen", "batch_size"},
//   "ablation": {"variants": ["full", "sequential", "graph"], "seeds": [..]}
// }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrgs/trainer.hpp"

namespace mrgs {

struct RunConfig {
  std::string dataset;
  std::string output_dir = "run";
  Hyperparams hyper;
  std::vector<std::string> variants = {"full", "sequential", "graph"};
  std::vector<std::uint64_t> seeds;  // empty: the train seed only

  nlohmann::json to_json() const;
  std::string fingerprint() const;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Model-affecting settings for one ablation variant:
//   full        - config as given, fused head
//   sequential  - local objective only, sequential head, last-slot user state
//   graph       - global objective only, graph head, layer-mean readout
Hyperparams ablation_variant(const Hyperparams& base, const std::string& variant);

}  // namespace mrgs
