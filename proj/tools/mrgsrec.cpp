// mrgsrec: prepare, train, eval, ablate and verify subcommands.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "mrgs/checkpoint.hpp"
#include "mrgs/error.hpp"
#include "mrgs/experiment.hpp"
#include "mrgs/hash.hpp"
#include "mrgs/synthetic.hpp"
#include "mrgs/verify.hpp"

namespace fs = std::filesystem;
using namespace mrgs;

namespace {

struct Globals {
  unsigned threads = 1;
  bool deterministic = false;

  unsigned eval_threads() const { return deterministic ? 1u : std::max(1u, threads); }
};

void print_stats(const PreparedData& d) {
  std::cout << "users\t" << d.stats.n_users << "\nitems\t" << d.stats.n_items << "\ninteractions\t"
            << d.stats.n_interactions << "\navg_length\t" << d.stats.avg_length << "\nfilter\t"
            << to_string(d.options.mode) << "\nmin_count\t" << d.options.min_count << "\ndropped_short_users\t"
            << d.dropped_short_users << "\nfingerprint\t" << to_hex(d.split.fingerprint()) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

struct PrepareArgs {
  std::string input, output;
  std::int64_t min_count = 5;
  std::string mode = "fixpoint";
  InputFormat format;
};

int cmd_prepare(const PrepareArgs& a) {
  const InteractionLog raw = load_interactions(a.input, a.format);
  const PreparedData data = prepare_dataset(raw, {a.min_count, parse_filter_mode(a.mode)});
  write_snapshot(fs::path(a.output), data);
  print_stats(data);
  return 0;
}

struct SynthArgs {
  std::string output;
  SyntheticSpec spec;
};

int cmd_synth(const SynthArgs& a) {
  const InteractionLog log = generate_structured_log(a.spec);
  std::ofstream out = open_out(a.output);
  for (const auto& e : log.interactions) {
    out << log.users.token(e.user) << '\t' << log.items.token(e.item) << '\t' << e.timestamp << '\n';
  }
  std::cout << "wrote " << log.interactions.size() << " interactions to " << a.output << '\n';
  return 0;
}

struct RunArgs {
  std::string config, dataset, output;
  std::int64_t seed = -1;
};

RunConfig resolve_config(const RunArgs& a, const Globals& g) {
  RunConfig rc = load_run_config(a.config);
  if (!a.dataset.empty()) rc.dataset = a.dataset;
  if (!a.output.empty()) rc.output_dir = a.output;
  if (a.seed >= 0) {
    rc.hyper.seed = static_cast<std::uint64_t>(a.seed);
    rc.seeds = {};
  }
  if (rc.dataset.empty()) throw DataError("no dataset given (config data.dataset or --dataset)");
  rc.hyper.eval.threads = g.eval_threads();
  return rc;
}

int cmd_train(const RunArgs& a, const Globals& g) {
  const RunConfig rc = resolve_config(a, g);
  const PreparedData data = read_snapshot(fs::path(rc.dataset));
  const std::string fp = rc.fingerprint();
  const fs::path dir(rc.output_dir);
  std::ofstream log = open_out(dir / "train_log.jsonl");
  const RunOutput run = train_and_evaluate(data.split, rc.hyper, fp, [&](const EpochRecord& r) {
    log << epoch_log_line(r, fp, rc.hyper.seed) << '\n' << std::flush;
    std::cerr << "epoch " << r.epoch << " loss " << r.losses.total << " val ndcg@10 " << r.validation.ndcg10
              << '\n';
  });
  write_checkpoint(dir / "checkpoint.txt", run.fit.best, rc);
  std::ofstream metrics = open_out(dir / "metrics.txt");
  metrics << "seed\t" << rc.hyper.seed << "\nbest_epoch\t" << run.fit.best_epoch << '\n';
  write_report(metrics, run.validation);
  write_report(metrics, run.test);
  std::cout << "best_epoch\t" << run.fit.best_epoch << '\n' << report_table_header() << '\n'
            << report_table_row(run.validation) << '\n' << report_table_row(run.test) << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, dataset, split = "test", output, head;
  bool include_seen = false;
};

int cmd_eval(const EvalArgs& a, const Globals& g) {
  const Checkpoint ck = read_checkpoint(fs::path(a.checkpoint));
  const std::string dataset = a.dataset.empty() ? ck.config.dataset : a.dataset;
  const PreparedData data = read_snapshot(fs::path(dataset));
  if (data.split.n_users != ck.model.n_users || data.split.n_items != ck.model.n_items) {
    throw DataError("checkpoint dimensions do not match dataset " + dataset);
  }
  EvalOptions opts = ck.config.hyper.eval;
  if (a.include_seen) opts.exclude_seen = false;
  opts.threads = g.eval_threads();
  ModelConfig model = ck.model;
  if (!a.head.empty()) model.head = parse_scoring_head(a.head);
  const GraphData graph = build_adjacency(data.split);
  MetricsReport r = evaluate(ck.params, model, data.split, graph.adjacency, parse_split(a.split), opts);
  r.config_fingerprint = ck.fingerprint;
  if (!a.output.empty()) {
    std::ofstream out = open_out(a.output);
    out << "seed\t" << ck.seed << '\n';
    write_report(out, r);
  }
  std::cout << "seed\t" << ck.seed << '\n';
  write_report(std::cout, r);
  return 0;
}

int cmd_ablate(const RunArgs& a, const Globals& g) {
  const RunConfig rc = resolve_config(a, g);
  const PreparedData data = read_snapshot(fs::path(rc.dataset));
  const AblationResult result = run_ablation(data.split, rc, [](const AblationRow& r) {
    std::cerr << r.variant << " seed " << r.seed << " test ndcg@10 " << r.test.ndcg10 << '\n';
  });
  const std::string table = ablation_table(result);
  std::ofstream out = open_out(fs::path(rc.output_dir) / "ablation.tsv");
  out << "# config " << rc.fingerprint() << '\n' << table;
  std::cout << table;
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  std::vector<verify::CheckResult> all;
  for (auto&& part : {verify::gradient_suite(seed), verify::graph_oracle_suite(seed + 1),
                      verify::metric_oracle_suite(seed + 2)}) {
    all.insert(all.end(), part.begin(), part.end());
  }
  bool ok = true;
  for (const auto& c : all) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRGSRec sequential recommendation: data preparation, training and evaluation"};
  app.require_subcommand(1);
  Globals g;
  g.threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", g.threads, "Upper bound on worker threads");
  app.add_flag("--deterministic", g.deterministic, "Single-threaded evaluation and reductions");

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Filter and split a raw interaction log into a snapshot");
  prepare->add_option("input", prep.input, "Raw interaction file")->required();
  prepare->add_option("-o,--output", prep.output, "Snapshot path")->required();
  prepare->add_option("--min-count", prep.min_count, "Minimum interactions per user and item");
  prepare->add_option("--mode", prep.mode, "fixpoint or single-pass");
  prepare->add_option("--delimiter", prep.format.delimiter, "Field separator; 'ws' splits on whitespace");
  prepare->add_option("--user-col", prep.format.user_column);
  prepare->add_option("--item-col", prep.format.item_column);
  prepare->add_option("--time-col", prep.format.time_column);
  prepare->add_flag("--skip-header", prep.format.skip_header);

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Write a synthetic log with cluster and order structure");
  synth->add_option("-o,--output", syn.output, "Output TSV")->required();
  synth->add_option("--users", syn.spec.n_users);
  synth->add_option("--items", syn.spec.n_items);
  synth->add_option("--clusters", syn.spec.n_clusters);
  synth->add_option("--min-length", syn.spec.min_length);
  synth->add_option("--max-length", syn.spec.max_length);
  synth->add_option("--follow-prob", syn.spec.follow_prob);
  synth->add_option("--stray-prob", syn.spec.stray_prob);
  synth->add_option("--seed", syn.spec.seed);

  RunArgs run;
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("config", run.config, "JSON run config")->required();
    cmd->add_option("--dataset", run.dataset, "Override data.dataset");
    cmd->add_option("-o,--output", run.output, "Override output.dir");
    cmd->add_option("--seed", run.seed, "Override train.seed");
  };
  auto* train = app.add_subcommand("train", "Train one model and write checkpoint, log and metrics");
  add_run_options(train);
  auto* ablate = app.add_subcommand("ablate", "Train the full model and its single-view ablations");
  add_run_options(ablate);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the validation or test split");
  eval->add_option("checkpoint", ev.checkpoint)->required();
  eval->add_option("--dataset", ev.dataset, "Override the dataset recorded in the checkpoint");
  eval->add_option("--split", ev.split, "validation or test");
  eval->add_flag("--include-seen", ev.include_seen, "Rank previously consumed items too");
  eval->add_option("--head", ev.head, "Score with fused, sequential or graph head instead of the trained one");
  eval->add_option("-o,--output", ev.output, "Report path");

  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "Gradient, graph and metric oracle checks");
  verify->add_option("--seed", verify_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*prepare) return cmd_prepare(prep);
    if (*synth) return cmd_synth(syn);
    if (*train) return cmd_train(run, g);
    if (*eval) return cmd_eval(ev, g);
    if (*ablate) return cmd_ablate(run, g);
    if (*verify) return cmd_verify(verify_seed);
  } catch (const mrgs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
