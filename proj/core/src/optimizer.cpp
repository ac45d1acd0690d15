#include "fscil/optimizer.hpp"

#include <cmath>
#include <vector>

#include "fscil/error.hpp"

namespace fscil {

namespace {

constexpr io::Magic kOptMagic{'O', 'P', 'T', '1'};

std::vector<std::span<double>> spans(HeadsParams& p) {
  std::vector<std::span<double>> out;
  p.for_each([&](std::string_view, std::span<double> s) { out.push_back(s); });
  return out;
}

std::vector<std::span<const double>> spans(const HeadsParams& p) {
  std::vector<std::span<const double>> out;
  p.for_each([&](std::string_view, std::span<const double> s) { out.push_back(s); });
  return out;
}

}  // namespace

OptimizerState OptimizerState::zeros(const HeadsDims& dims) {
  return {HeadsParams::zeros(dims), HeadsParams::zeros(dims), 0};
}

void adamw_step(HeadsParams& params, const HeadsParams& grads, OptimizerState& state, const AdamConfig& cfg) {
  if (!(params.dims() == grads.dims()) || !(params.dims() == state.m.dims()) || !(params.dims() == state.v.dims())) {
    throw ShapeError("optimizer shapes do not match the parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;

  auto p = spans(params);
  auto g = spans(grads);
  auto m = spans(state.m);
  auto v = spans(state.v);
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t i = 0; i < p[a].size(); ++i) {
      const double gi = g[a][i];
      m[a][i] = cfg.beta1 * m[a][i] + (1.0 - cfg.beta1) * gi;
      v[a][i] = cfg.beta2 * v[a][i] + (1.0 - cfg.beta2) * gi * gi;
      p[a][i] *= decay;
      p[a][i] -= cfg.lr * (m[a][i] / c1) / (std::sqrt(v[a][i] / c2) + cfg.eps);
    }
  }
}

void append_opt1(io::Bytes& out, const OptimizerState& state) {
  io::put_magic(out, kOptMagic);
  io::put_u64(out, state.step);
  for (const HeadsParams* moments : {&state.m, &state.v}) {
    moments->for_each([&](std::string_view, std::span<const double> s) {
      for (double x : s) io::put_f64(out, x);
    });
  }
}

OptimizerState read_opt1(io::Reader& reader, const HeadsDims& dims) {
  reader.expect_magic(kOptMagic, "optimizer state");
  OptimizerState state = OptimizerState::zeros(dims);
  state.step = reader.u64();
  for (HeadsParams* moments : {&state.m, &state.v}) {
    moments->for_each([&](std::string_view, std::span<double> s) {
      for (double& x : s) x = reader.f64();
    });
  }
  return state;
}

void write_checkpoint(const std::filesystem::path& path, const HeadsParams& params, const OptimizerState* state) {
  io::Bytes bytes;
  append_hds1(bytes, params);
  if (state != nullptr) append_opt1(bytes, *state);
  io::write_file(path, bytes);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const io::Bytes bytes = io::read_file(path);
  io::Reader reader(bytes);
  Checkpoint cp{read_hds1(reader), std::nullopt};
  if (!reader.at_end()) cp.optimizer = read_opt1(reader, cp.params.dims());
  if (!reader.at_end()) throw FormatError("trailing bytes after checkpoint in " + path.string());
  return cp;
}

}  // namespace fscil
