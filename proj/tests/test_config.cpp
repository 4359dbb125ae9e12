#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "mrgs/checkpoint.hpp"
#include "mrgs/config.hpp"
#include "mrgs/error.hpp"

using namespace mrgs;
using nlohmann::json;

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": {"dimension": 8}})")), ParseError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"extra": {}})")), ParseError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": {"dim": "eight"}})")), ParseError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"model": {"head": "mixed"}})")), ParseError);
  CHECK_THROWS_AS(parse_run_config(json::parse("[1, 2]")), ParseError);
}

TEST_CASE("defaults and derived widths") {
  const RunConfig rc = parse_run_config(json::object());
  const Hyperparams& h = rc.hyper;
  CHECK(h.model.dim == 64);
  CHECK(h.model.window == 50);
  CHECK(h.model.graph_layers == 2);
  CHECK(h.model.encoder.n_layers == 2);
  CHECK(h.model.encoder.n_heads == 2);
  CHECK(h.model.encoder.d_ff == 256);
  CHECK(h.model.encoder.dropout == 0.2);
  CHECK(h.weights.alpha == 1.0);
  CHECK(h.weights.beta == 0.1);
  CHECK(h.weights.gamma == 1.0);
  CHECK(h.weights.delta == 0.1);
  CHECK(h.weights.lambda_reg == 1e-4);
  CHECK(h.adam.learning_rate == 1e-3);
  CHECK(h.batch_size == 256);
  CHECK(h.negatives == 100);
  CHECK(h.examples == TrainExamples::kLast);

  const RunConfig narrow = parse_run_config(json::parse(R"({"model": {"dim": 16, "d_ff": 0}})"));
  CHECK(narrow.hyper.model.encoder.dim == 16);
  CHECK(narrow.hyper.model.encoder.d_ff == 64);
}

TEST_CASE("fingerprint is stable and tracks content") {
  const json doc = json::parse(R"({"model": {"dim": 16}, "train": {"seed": 3, "examples": "random_prefix"}})");
  const RunConfig a = parse_run_config(doc);
  CHECK(a.fingerprint() == parse_run_config(doc).fingerprint());
  CHECK(a.fingerprint().size() == 16);
  CHECK(parse_run_config(a.to_json()).fingerprint() == a.fingerprint());
  json changed = doc;
  changed["model"]["dim"] = 32;
  CHECK(parse_run_config(changed).fingerprint() != a.fingerprint());
}

TEST_CASE("ablation variants") {
  Hyperparams base;
  base.weights = {0.7, 0.3, 1.1, 0.4, 0.05};
  const Hyperparams seq = ablation_variant(base, "sequential");
  CHECK(seq.model.head == ScoringHead::kSequential);
  CHECK(seq.weights.alpha == 0.7);
  CHECK(seq.weights.beta == 0.0);
  CHECK(seq.weights.gamma == 0.0);
  CHECK(seq.weights.delta == 0.0);

  const Hyperparams graph = ablation_variant(base, "graph");
  CHECK(graph.model.head == ScoringHead::kGraph);
  CHECK(graph.weights.alpha == 0.0);
  CHECK(graph.weights.beta == 0.3);
  CHECK(graph.weights.gamma == 0.0);
  CHECK(graph.weights.delta == 0.0);
  CHECK(graph.weights.lambda_reg == 0.05);

  const Hyperparams full = ablation_variant(base, "full");
  CHECK(full.model.head == ScoringHead::kFused);
  CHECK(full.weights.gamma == 1.1);
  CHECK_THROWS_AS(ablation_variant(base, "half"), ParseError);
}

TEST_CASE("checkpoint round trip is exact") {
  RunConfig rc = parse_run_config(json::parse(R"({"model": {"dim": 8, "window": 3, "n_heads": 2}})"));
  rc.hyper.model.n_users = 5;
  rc.hyper.model.n_items = 7;
  const ModelParams params = init_model(rc.hyper.model, 9);
  std::ostringstream out;
  write_checkpoint(out, params, rc);
  std::istringstream in(out.str());
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.fingerprint == rc.fingerprint());
  CHECK(back.model.n_users == 5);
  CHECK(back.model.n_items == 7);
  std::vector<const Matrix*> xs, ys;
  for_each_block(params, [&](const std::string&, const Matrix& m) { xs.push_back(&m); });
  for_each_block(back.params, [&](const std::string&, const Matrix& m) { ys.push_back(&m); });
  REQUIRE(xs.size() == ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(*xs[i] == *ys[i]);

  std::ostringstream again;
  write_checkpoint(again, back.params, back.config);
  CHECK(again.str() == out.str());

  std::string text = out.str();
  std::istringstream bad("MRGS-CKPT-v0" + text.substr(kCheckpointMagic.size()));
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
}
