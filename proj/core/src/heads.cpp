#include "fscil/heads.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

constexpr io::Magic kHdsMagic{'H', 'D', 'S', '1'};

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter++;
}

std::span<double> flat(RowMatrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> flat(const RowMatrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const double> flat(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

RowMatrix gaussian(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
  const double sigma = 1.0 / std::sqrt(static_cast<double>(rows));
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sigma * rng.gaussian();
  return m;
}

void check_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

void HeadsDims::validate() const {
  if (n_views <= 0 || feature_dim <= 0 || hidden <= 0 || point_dim <= 0 || point_hidden <= 0) {
    throw ConfigError("all head dimensions must be positive");
  }
}

HeadsParams HeadsParams::zeros(const HeadsDims& d) {
  d.validate();
  HeadsParams p;
  p.merger.w2 = RowMatrix::Zero(d.n_views * d.feature_dim, d.hidden);
  p.merger.b2 = Vector::Zero(d.hidden);
  p.merger.w1 = RowMatrix::Zero(d.hidden, d.feature_dim);
  p.merger.b1 = Vector::Zero(d.feature_dim);
  p.adapter.w1 = RowMatrix::Zero(d.point_dim, d.point_hidden);
  p.adapter.b1 = Vector::Zero(d.point_hidden);
  p.adapter.w2 = RowMatrix::Zero(d.point_hidden, d.feature_dim);
  p.adapter.b2 = Vector::Zero(d.feature_dim);
  return p;
}

HeadsParams HeadsParams::init(const HeadsDims& d, std::uint64_t seed) {
  HeadsParams p = zeros(d);
  SplitMix64 rng(seed);
  p.merger.w2 = gaussian(p.merger.w2.rows(), p.merger.w2.cols(), rng);
  p.merger.w1 = gaussian(p.merger.w1.rows(), p.merger.w1.cols(), rng);
  p.adapter.w1 = gaussian(p.adapter.w1.rows(), p.adapter.w1.cols(), rng);
  p.adapter.w2 = gaussian(p.adapter.w2.rows(), p.adapter.w2.cols(), rng);
  return p;
}

HeadsDims HeadsParams::dims() const {
  HeadsDims d;
  d.feature_dim = merger.w1.cols();
  d.hidden = merger.w1.rows();
  d.n_views = d.feature_dim > 0 ? merger.w2.rows() / d.feature_dim : 0;
  d.point_dim = adapter.w1.rows();
  d.point_hidden = adapter.w1.cols();
  return d;
}

void HeadsParams::for_each(const std::function<void(std::string_view, std::span<double>)>& fn) {
  fn("merger.w2", flat(merger.w2));
  fn("merger.b2", flat(merger.b2));
  fn("merger.w1", flat(merger.w1));
  fn("merger.b1", flat(merger.b1));
  fn("adapter.w1", flat(adapter.w1));
  fn("adapter.b1", flat(adapter.b1));
  fn("adapter.w2", flat(adapter.w2));
  fn("adapter.b2", flat(adapter.b2));
}

void HeadsParams::for_each(const std::function<void(std::string_view, std::span<const double>)>& fn) const {
  fn("merger.w2", flat(merger.w2));
  fn("merger.b2", flat(merger.b2));
  fn("merger.w1", flat(merger.w1));
  fn("merger.b1", flat(merger.b1));
  fn("adapter.w1", flat(adapter.w1));
  fn("adapter.b1", flat(adapter.b1));
  fn("adapter.w2", flat(adapter.w2));
  fn("adapter.b2", flat(adapter.b2));
}

std::size_t HeadsParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, std::span<const double> s) { n += s.size(); });
  return n;
}

bool HeadsParams::all_finite() const {
  bool ok = true;
  for_each([&](std::string_view, std::span<const double> s) {
    for (double v : s) ok = ok && std::isfinite(v);
  });
  return ok;
}

GradientBundle GradientBundle::zeros(const HeadsDims& d) {
  return {HeadsParams::zeros(d), Vector::Zero(d.feature_dim), Vector::Zero(d.feature_dim)};
}

GradientBundle& GradientBundle::operator+=(const GradientBundle& other) {
  std::vector<std::span<const double>> theirs;
  other.params.for_each([&](std::string_view, std::span<const double> s) { theirs.push_back(s); });
  std::size_t k = 0;
  params.for_each([&](std::string_view, std::span<double> s) {
    const auto& src = theirs[k++];
    if (src.size() != s.size()) throw ShapeError("gradient bundle shapes differ");
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += src[i];
  });
  d_fd += other.d_fd;
  d_fp += other.d_fp;
  return *this;
}

GradientBundle& GradientBundle::operator*=(double scale) {
  params.for_each([&](std::string_view, std::span<double> s) {
    for (double& v : s) v *= scale;
  });
  d_fd *= scale;
  d_fp *= scale;
  return *this;
}

Vector merger_forward(const RowMatrix& depth_features, const MergerParams& p) {
  const Eigen::Index c = p.w1.cols();
  check_dim(depth_features.cols(), c, "merger input feature dimension");
  check_dim(depth_features.rows() * c, p.w2.rows(), "merger view count times dimension");
  const Eigen::Map<const Vector> concat(depth_features.data(), depth_features.size());
  const Vector hidden = (p.w2.transpose() * concat + p.b2).cwiseMax(0.0);
  return p.w1.transpose() * hidden + p.b1;
}

Vector adapter_forward(const Vector& point_feature, const AdapterParams& p) {
  check_dim(point_feature.size(), p.w1.rows(), "adapter input dimension");
  const Vector hidden = (p.w1.transpose() * point_feature + p.b1).cwiseMax(0.0);
  return p.w2.transpose() * hidden + p.b2;
}

Vector fuse(const Vector& fd, const Vector& fp) {
  check_dim(fp.size(), fd.size(), "fuse input dimension");
  const Vector mx = fd.cwiseMax(fp);
  const Vector avg = 0.5 * (fd + fp);
  return 0.5 * (mx + avg);
}

FuseGrad fuse_backward(const Vector& fd, const Vector& fp, const Vector& upstream) {
  check_dim(fp.size(), fd.size(), "fuse input dimension");
  check_dim(upstream.size(), fd.size(), "fuse upstream dimension");
  FuseGrad g{Vector(fd.size()), Vector(fd.size())};
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    const bool fd_wins = fd(i) >= fp(i);
    g.d_fd(i) = (fd_wins ? 0.75 : 0.25) * upstream(i);
    g.d_fp(i) = (fd_wins ? 0.25 : 0.75) * upstream(i);
  }
  return g;
}

Heads::Heads(HeadsParams params, bool snc_enabled)
    : params_(std::move(params)), snc_(snc_enabled), version_(next_version()) {
  params_.dims().validate();
}

void Heads::update(const std::function<void(HeadsParams&)>& mutate) {
  mutate(params_);
  version_ = next_version();
}

void Heads::replace(HeadsParams params) {
  params_ = std::move(params);
  version_ = next_version();
}

HeadsForward Heads::forward(const RowMatrix& depth_features, const Vector* point_feature) const {
  const MergerParams& m = params_.merger;
  check_dim(depth_features.cols(), m.w1.cols(), "merger input feature dimension");
  check_dim(depth_features.rows() * m.w1.cols(), m.w2.rows(), "merger view count times dimension");

  HeadsForward s;
  s.params_version = version_;
  s.snc = snc_;
  s.concat = Eigen::Map<const Vector>(depth_features.data(), depth_features.size());
  s.merger_pre = m.w2.transpose() * s.concat + m.b2;
  s.merger_mask = (s.merger_pre.array() > 0.0).cast<double>();
  s.fd = m.w1.transpose() * (s.merger_pre.array() * s.merger_mask).matrix() + m.b1;

  if (!snc_) {
    s.fg = s.fd;
    return s;
  }
  if (point_feature == nullptr) throw ShapeError("SNC is enabled but no point feature was supplied");
  const AdapterParams& a = params_.adapter;
  check_dim(point_feature->size(), a.w1.rows(), "adapter input dimension");
  s.point_feature = *point_feature;
  s.adapter_pre = a.w1.transpose() * s.point_feature + a.b1;
  s.adapter_mask = (s.adapter_pre.array() > 0.0).cast<double>();
  s.fp = a.w2.transpose() * (s.adapter_pre.array() * s.adapter_mask).matrix() + a.b2;
  s.fg = fuse(s.fd, s.fp);
  return s;
}

GradientBundle Heads::backward(const Vector& grad_fg, const HeadsForward& cache, const Vector* extra_grad_fd) const {
  if (cache.params_version != version_ || cache.snc != snc_) {
    throw StaleCacheError("forward cache does not belong to the current parameters");
  }
  check_dim(grad_fg.size(), cache.fg.size(), "upstream gradient dimension");

  GradientBundle g = GradientBundle::zeros(params_.dims());
  if (snc_) {
    const FuseGrad fg = fuse_backward(cache.fd, cache.fp, grad_fg);
    g.d_fd = fg.d_fd;
    g.d_fp = fg.d_fp;
  } else {
    g.d_fd = grad_fg;
  }
  if (extra_grad_fd != nullptr) {
    check_dim(extra_grad_fd->size(), g.d_fd.size(), "extra depth-feature gradient dimension");
    g.d_fd += *extra_grad_fd;
  }

  const MergerParams& m = params_.merger;
  const Vector hidden = (cache.merger_pre.array() * cache.merger_mask).matrix();
  g.params.merger.w1.noalias() = hidden * g.d_fd.transpose();
  g.params.merger.b1 = g.d_fd;
  const Vector d_pre = ((m.w1 * g.d_fd).array() * cache.merger_mask).matrix();
  g.params.merger.w2.noalias() = cache.concat * d_pre.transpose();
  g.params.merger.b2 = d_pre;

  if (snc_) {
    const AdapterParams& a = params_.adapter;
    const Vector hidden_p = (cache.adapter_pre.array() * cache.adapter_mask).matrix();
    g.params.adapter.w2.noalias() = hidden_p * g.d_fp.transpose();
    g.params.adapter.b2 = g.d_fp;
    const Vector d_pre_p = ((a.w2 * g.d_fp).array() * cache.adapter_mask).matrix();
    g.params.adapter.w1.noalias() = cache.point_feature * d_pre_p.transpose();
    g.params.adapter.b1 = d_pre_p;
  }
  return g;
}

void append_hds1(io::Bytes& out, const HeadsParams& params) {
  const HeadsDims d = params.dims();
  io::put_magic(out, kHdsMagic);
  for (Eigen::Index v : {d.n_views, d.feature_dim, d.hidden, d.point_dim, d.point_hidden}) {
    io::put_u32(out, static_cast<std::uint32_t>(v));
  }
  params.for_each([&](std::string_view, std::span<const double> s) {
    for (double v : s) io::put_f64(out, v);
  });
}

HeadsParams read_hds1(io::Reader& reader) {
  reader.expect_magic(kHdsMagic, "heads checkpoint");
  HeadsDims d;
  d.n_views = reader.u32();
  d.feature_dim = reader.u32();
  d.hidden = reader.u32();
  d.point_dim = reader.u32();
  d.point_hidden = reader.u32();
  HeadsParams p = HeadsParams::zeros(d);
  p.for_each([&](std::string_view, std::span<double> s) {
    for (double& v : s) v = reader.f64();
  });
  if (!p.all_finite()) throw FormatError("heads checkpoint has non-finite parameters");
  return p;
}

}  // namespace fscil
