#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "fscil/binary_io.hpp"
#include "fscil/linalg.hpp"

namespace fscil {

struct HeadsDims {
  Eigen::Index n_views = 6;
  Eigen::Index feature_dim = 32;   // C
  Eigen::Index hidden = 32;        // H
  Eigen::Index point_dim = 64;     // D3
  Eigen::Index point_hidden = 32;  // H3

  void validate() const;
  bool operator==(const HeadsDims&) const = default;
};

/// Depth-feature merger: f_d = w1^T ReLU(w2^T concat(views) + b2) + b1.
struct MergerParams {
  RowMatrix w2;  // (N*C) x H
  Vector b2;     // H
  RowMatrix w1;  // H x C
  Vector b1;     // C
};

/// 3D adapter: f_p = w2^T ReLU(w1^T f3d + b1) + b2.
struct AdapterParams {
  RowMatrix w1;  // D3 x H3
  Vector b1;     // H3
  RowMatrix w2;  // H3 x C
  Vector b2;     // C
};

/// Every trainable parameter of the model. Also used as the container for
/// gradients and optimizer moments, which mirror the same shapes.
struct HeadsParams {
  MergerParams merger;
  AdapterParams adapter;

  static HeadsParams zeros(const HeadsDims& dims);

  /// Gaussian weights with sigma = 1/sqrt(fan_in), zero biases.
  static HeadsParams init(const HeadsDims& dims, std::uint64_t seed);

  HeadsDims dims() const;

  /// Visits every array in declared order (merger w2, b2, w1, b1, then
  /// adapter w1, b1, w2, b2) as a flat row-major span.
  void for_each(const std::function<void(std::string_view, std::span<double>)>& fn);
  void for_each(const std::function<void(std::string_view, std::span<const double>)>& fn) const;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

struct GradientBundle {
  HeadsParams params;
  Vector d_fd;  // gradient w.r.t. the merged depth feature
  Vector d_fp;  // gradient w.r.t. the adapted point feature (zero without SNC)

  static GradientBundle zeros(const HeadsDims& dims);
  GradientBundle& operator+=(const GradientBundle& other);
  GradientBundle& operator*=(double scale);
};

Vector merger_forward(const RowMatrix& depth_features, const MergerParams& p);
Vector adapter_forward(const Vector& point_feature, const AdapterParams& p);

/// Element-wise 0.5 * (max(fd, fp) + avg(fd, fp)).
Vector fuse(const Vector& fd, const Vector& fp);

struct FuseGrad {
  Vector d_fd;
  Vector d_fp;
};

/// Subgradient of fuse. The max branch goes to fd where fd >= fp.
FuseGrad fuse_backward(const Vector& fd, const Vector& fp, const Vector& upstream);

/// Everything backward() needs from one forward pass.
struct HeadsForward {
  std::uint64_t params_version = 0;
  bool snc = false;
  Vector concat;
  Vector merger_pre;
  Eigen::ArrayXd merger_mask;  // 1 where merger_pre > 0
  Vector fd;
  Vector point_feature;
  Vector adapter_pre;
  Eigen::ArrayXd adapter_mask;
  Vector fp;
  Vector fg;
};

/// Trainable heads with a version stamp. Any parameter mutation through
/// update() invalidates previously cached forward states.
class Heads {
 public:
  Heads(HeadsParams params, bool snc_enabled);

  /// `point_feature` is required when SNC is enabled and ignored otherwise.
  HeadsForward forward(const RowMatrix& depth_features, const Vector* point_feature) const;

  /// Backpropagates an upstream gradient on f_g (and optionally an extra
  /// gradient applied directly to f_d). Throws StaleCacheError if the cache
  /// came from different parameters.
  GradientBundle backward(const Vector& grad_fg, const HeadsForward& cache, const Vector* extra_grad_fd = nullptr) const;

  const HeadsParams& params() const { return params_; }
  void update(const std::function<void(HeadsParams&)>& mutate);
  void replace(HeadsParams params);

  bool snc_enabled() const { return snc_; }
  std::uint64_t version() const { return version_; }

 private:
  HeadsParams params_;
  bool snc_;
  std::uint64_t version_;
};

// HDS1: "HDS1", u32 LE N, C, H, D3, H3, then every parameter array as
// float64 LE in HeadsParams::for_each order.
void append_hds1(io::Bytes& out, const HeadsParams& params);
HeadsParams read_hds1(io::Reader& reader);

}  // namespace fscil
