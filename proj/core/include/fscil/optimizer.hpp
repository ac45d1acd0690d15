#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "fscil/binary_io.hpp"
#include "fscil/heads.hpp"

namespace fscil {

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  HeadsParams m;
  HeadsParams v;
  std::uint64_t step = 0;

  static OptimizerState zeros(const HeadsDims& dims);
};

/// Decoupled weight decay (param *= 1 - lr*wd) followed by a bias-corrected
/// Adam step on every parameter array.
void adamw_step(HeadsParams& params, const HeadsParams& grads, OptimizerState& state, const AdamConfig& cfg);

// OPT1: "OPT1", u64 LE step, then first moments and second moments as
// float64 LE in HeadsParams::for_each order. Dimensions come from the HDS1
// block that precedes it in a checkpoint.
void append_opt1(io::Bytes& out, const OptimizerState& state);
OptimizerState read_opt1(io::Reader& reader, const HeadsDims& dims);

struct Checkpoint {
  HeadsParams params;
  std::optional<OptimizerState> optimizer;
};

void write_checkpoint(const std::filesystem::path& path, const HeadsParams& params, const OptimizerState* state);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace fscil
