#pragma once

// "MRGS-CKPT-v1": dimensions header, the resolved run config, then every
// parameter block as a row-major text dump (17 significant digits, so values
// round-trip exactly).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "mrgs/config.hpp"
#include "mrgs/params.hpp"

namespace mrgs {

inline constexpr std::string_view kCheckpointMagic = "MRGS-CKPT-v1";

struct Checkpoint {
  RunConfig config;
  ModelParams params;
  ModelConfig model;  // config.hyper.model with n_users / n_items filled in
  std::string fingerprint;
  std::uint64_t seed = 0;
};

void write_checkpoint(std::ostream& out, const ModelParams& params, const RunConfig& config);
void write_checkpoint(const std::filesystem::path& path, const ModelParams& params, const RunConfig& config);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace mrgs
