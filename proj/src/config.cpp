#include "mrgs/config.hpp"

#include <fstream>
#include <set>

#include "mrgs/error.hpp"
#include "mrgs/hash.hpp"

namespace mrgs {

using nlohmann::json;

nlohmann::json RunConfig::to_json() const {
  const ModelConfig& m = hyper.model;
  json j;
  j["data"] = {{"dataset", dataset}};
  j["output"] = {{"dir", output_dir}};
  j["model"] = {{"dim", m.dim},
                {"window", m.window},
                {"graph_layers", m.graph_layers},
                {"graph_readout", to_string(m.readout)},
                {"n_layers", m.encoder.n_layers},
                {"n_heads", m.encoder.n_heads},
                {"d_ff", m.encoder.d_ff},
                {"dropout", m.encoder.dropout},
                {"attention", to_string(m.encoder.attention)},
                {"user_state", to_string(m.encoder.user_state)},
                {"head", to_string(m.head)},
                {"init_stddev", m.init_stddev},
                {"fusion_init", to_string(m.fusion_init)}};
  j["loss"] = {{"alpha", hyper.weights.alpha}, {"beta", hyper.weights.beta},
               {"gamma", hyper.weights.gamma}, {"delta", hyper.weights.delta},
               {"lambda_reg", hyper.weights.lambda_reg}, {"negatives", hyper.negatives}};
  j["optim"] = {{"learning_rate", hyper.adam.learning_rate}, {"beta1", hyper.adam.beta1},
                {"beta2", hyper.adam.beta2}, {"eps", hyper.adam.eps}};
  j["train"] = {{"batch_size", hyper.batch_size}, {"max_epochs", hyper.max_epochs},
                {"patience", hyper.patience}, {"seed", hyper.seed},
                {"examples", to_string(hyper.examples)}};
  j["eval"] = {{"exclude_seen", hyper.eval.exclude_seen}, {"batch_size", hyper.eval.batch_size}};
  j["ablation"] = {{"variants", variants}, {"seeds", seeds}};
  return j;
}

std::string RunConfig::fingerprint() const { return to_hex(fnv1a64(to_json().dump())); }

namespace {

// Reads section.key into `out` when present. Type errors become ParseError.
template <class T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("config " + where + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& section, const std::string& where, std::initializer_list<const char*> known) {
  if (!section.is_object()) throw ParseError("config section '" + where + "' must be an object");
  const std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [key, _] : section.items()) {
    if (!ok.count(key)) throw ParseError("config: unknown key '" + where + "." + key + "'");
  }
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ParseError("config root must be an object");
  reject_unknown(doc, "<root>", {"data", "output", "model", "loss", "optim", "train", "eval", "ablation"});
  RunConfig rc;
  Hyperparams& h = rc.hyper;
  const json empty = json::object();
  const auto section = [&](const char* name) -> const json& { return doc.contains(name) ? doc.at(name) : empty; };

  const json& data = section("data");
  reject_unknown(data, "data", {"dataset"});
  read(data, "dataset", rc.dataset, "data");

  const json& output = section("output");
  reject_unknown(output, "output", {"dir"});
  read(output, "dir", rc.output_dir, "output");

  const json& model = section("model");
  reject_unknown(model, "model", {"dim", "window", "graph_layers", "graph_readout", "n_layers", "n_heads", "d_ff",
                                  "dropout", "attention", "user_state", "head", "init_stddev", "fusion_init"});
  read(model, "dim", h.model.dim, "model");
  read(model, "window", h.model.window, "model");
  read(model, "graph_layers", h.model.graph_layers, "model");
  read(model, "n_layers", h.model.encoder.n_layers, "model");
  read(model, "n_heads", h.model.encoder.n_heads, "model");
  Index d_ff = 0;
  read(model, "d_ff", d_ff, "model");
  read(model, "dropout", h.model.encoder.dropout, "model");
  read(model, "init_stddev", h.model.init_stddev, "model");
  std::string text;
  if (model.contains("graph_readout")) {
    read(model, "graph_readout", text, "model");
    h.model.readout = parse_graph_readout(text);
  }
  if (model.contains("attention")) {
    read(model, "attention", text, "model");
    h.model.encoder.attention = parse_attention_mode(text);
  }
  if (model.contains("user_state")) {
    read(model, "user_state", text, "model");
    h.model.encoder.user_state = parse_user_state(text);
  }
  if (model.contains("fusion_init")) {
    read(model, "fusion_init", text, "model");
    h.model.fusion_init = parse_fusion_init(text);
  }
  if (model.contains("head")) {
    read(model, "head", text, "model");
    h.model.head = parse_scoring_head(text);
  }
  h.model.encoder.dim = h.model.dim;
  h.model.encoder.d_ff = d_ff > 0 ? d_ff : 4 * h.model.dim;

  const json& loss = section("loss");
  reject_unknown(loss, "loss", {"alpha", "beta", "gamma", "delta", "lambda_reg", "negatives"});
  read(loss, "alpha", h.weights.alpha, "loss");
  read(loss, "beta", h.weights.beta, "loss");
  read(loss, "gamma", h.weights.gamma, "loss");
  read(loss, "delta", h.weights.delta, "loss");
  read(loss, "lambda_reg", h.weights.lambda_reg, "loss");
  read(loss, "negatives", h.negatives, "loss");

  const json& optim = section("optim");
  reject_unknown(optim, "optim", {"learning_rate", "beta1", "beta2", "eps"});
  read(optim, "learning_rate", h.adam.learning_rate, "optim");
  read(optim, "beta1", h.adam.beta1, "optim");
  read(optim, "beta2", h.adam.beta2, "optim");
  read(optim, "eps", h.adam.eps, "optim");

  const json& train = section("train");
  reject_unknown(train, "train", {"batch_size", "max_epochs", "patience", "seed", "examples"});
  read(train, "batch_size", h.batch_size, "train");
  read(train, "max_epochs", h.max_epochs, "train");
  read(train, "patience", h.patience, "train");
  read(train, "seed", h.seed, "train");
  if (train.contains("examples")) {
    read(train, "examples", text, "train");
    h.examples = parse_train_examples(text);
  }

  const json& eval = section("eval");
  reject_unknown(eval, "eval", {"exclude_seen", "batch_size"});
  read(eval, "exclude_seen", h.eval.exclude_seen, "eval");
  read(eval, "batch_size", h.eval.batch_size, "eval");

  const json& ablation = section("ablation");
  reject_unknown(ablation, "ablation", {"variants", "seeds"});
  read(ablation, "variants", rc.variants, "ablation");
  read(ablation, "seeds", rc.seeds, "ablation");
  for (const auto& v : rc.variants) {
    if (v != "full" && v != "sequential" && v != "graph") throw ParseError("config: unknown ablation variant '" + v + "'");
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

Hyperparams ablation_variant(const Hyperparams& base, const std::string& variant) {
  Hyperparams h = base;
  if (variant == "full") {
    h.model.head = ScoringHead::kFused;
  } else if (variant == "sequential") {
    h.weights = LossWeights{base.weights.alpha > 0.0 ? base.weights.alpha : 1.0, 0.0, 0.0, 0.0, 0.0};
    h.model.head = ScoringHead::kSequential;
    h.model.encoder.user_state = UserState::kLast;
  } else if (variant == "graph") {
    h.weights = LossWeights{0.0, base.weights.beta > 0.0 ? base.weights.beta : 1.0, 0.0, 0.0,
                            base.weights.lambda_reg};
    h.model.head = ScoringHead::kGraph;
    h.model.readout = GraphReadout::kMean;
  } else {
    throw ParseError("unknown ablation variant '" + variant + "'");
  }
  return h;
}

}  // namespace mrgs
