#include "mrgs/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mrgs/error.hpp"

namespace mrgs {

void write_checkpoint(std::ostream& out, const ModelParams& params, const RunConfig& config) {
  const EmbeddingTables& e = params.embedding;
  out << kCheckpointMagic << '\n';
  out << "config " << config.to_json().dump() << '\n';
  out << "fingerprint " << config.fingerprint() << '\n';
  out << "seed " << config.hyper.seed << '\n';
  out << "dims users " << e.users.rows() << " items " << e.items.rows() - 1 << " window " << e.positions.rows()
      << " dim " << e.users.cols() << " layers " << params.encoder.size() << '\n';
  std::size_t count = 0;
  for_each_block(params, [&](const std::string&, const Matrix&) { ++count; });
  out << "blocks " << count << '\n';
  char buf[32];
  for_each_block(params, [&](const std::string& name, const Matrix& m) {
    out << "block " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  });
  out << "end\n";
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, params, config);
}

namespace {

std::istringstream line_of(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint truncated before '" + key + "'");
  if (line.compare(0, key.size() + 1, key + " ") != 0) throw ParseError("checkpoint: expected '" + key + "' line");
  return std::istringstream(line.substr(key.size() + 1));
}

}  // namespace

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw ParseError("checkpoint: bad magic header");
  Checkpoint ck;
  {
    auto ss = line_of(in, "config");
    try {
      ck.config = parse_run_config(nlohmann::json::parse(ss.str()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("checkpoint config: ") + e.what());
    }
  }
  line_of(in, "fingerprint") >> ck.fingerprint;
  line_of(in, "seed") >> ck.seed;
  Index users = 0, items = 0, window = 0, dim = 0, layers = 0;
  {
    auto ss = line_of(in, "dims");
    std::string k1, k2, k3, k4, k5;
    if (!(ss >> k1 >> users >> k2 >> items >> k3 >> window >> k4 >> dim >> k5 >> layers)) {
      throw ParseError("checkpoint: bad dims line");
    }
  }
  if (ck.fingerprint != ck.config.fingerprint()) throw ParseError("checkpoint: config fingerprint mismatch");

  ck.model = ck.config.hyper.model;
  ck.model.n_users = users;
  ck.model.n_items = items;
  if (ck.model.window != window || ck.model.dim != dim || ck.model.encoder.n_layers != layers) {
    throw ParseError("checkpoint: dims disagree with the embedded config");
  }
  // Shapes come from a fresh initialisation; values are then overwritten.
  ck.params = init_model(ck.model, 0);

  std::size_t count = 0;
  line_of(in, "blocks") >> count;
  std::size_t seen = 0;
  for_each_block(ck.params, [&](const std::string& name, Matrix& m) {
    auto ss = line_of(in, "block");
    std::string got;
    Index rows = -1, cols = -1;
    ss >> got >> rows >> cols;
    if (got != name || rows != m.rows() || cols != m.cols()) {
      throw ParseError("checkpoint: unexpected block '" + got + "' (wanted " + name + ")");
    }
    for (Index r = 0; r < rows; ++r) {
      std::string row;
      if (!std::getline(in, row)) throw ParseError("checkpoint truncated inside block " + name);
      std::istringstream rs(row);
      for (Index c = 0; c < cols; ++c) {
        if (!(rs >> m(r, c))) throw ParseError("checkpoint: short row in block " + name);
      }
    }
    ++seen;
  });
  if (seen != count) throw ParseError("checkpoint: block count mismatch");
  if (!std::getline(in, line) || line != "end") throw ParseError("checkpoint: missing end marker");
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace mrgs
