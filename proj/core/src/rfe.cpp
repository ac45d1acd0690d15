#include "fscil/rfe.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "fscil/error.hpp"

namespace fscil {

namespace {

constexpr io::Magic kPcvMagic{'P', 'C', 'V', '1'};
constexpr double kSignEpsilon = 1e-10;

void require_dim(const Vector& v, const PrincipalBasis& basis) {
  if (v.size() != basis.dim()) {
    throw ShapeError("feature dimension " + std::to_string(v.size()) + " does not match basis dimension " +
                     std::to_string(basis.dim()));
  }
}

double checked_norm(const Vector& v, const char* what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError(std::string(what) + " has zero or non-finite norm");
  return n;
}

}  // namespace

void PrincipalBasis::validate() const {
  if (rank() < 1 || rank() > dim()) throw FormatError("basis rank must lie in [1, C]");
  if (singular_values.size() != dim()) throw FormatError("basis must carry C singular values");
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) throw FormatError("energy fraction must lie in (0, 1]");
  if (!rows.allFinite() || !singular_values.allFinite()) throw DataError("basis has non-finite entries");
  const RowMatrix gram = rows * rows.transpose();
  if (!gram.isIdentity(1e-8)) throw DataError("basis rows are not orthonormal");
}

PrincipalBasis PrincipalBasis::full(Eigen::Index dim) {
  PrincipalBasis b;
  b.rows = RowMatrix::Identity(dim, dim);
  b.singular_values = Vector::Ones(dim);
  b.energy_fraction = 1.0;
  return b;
}

PrincipalBasis fit_basis(const RowMatrix& features, double energy_fraction) {
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) throw ConfigError("energy fraction must lie in (0, 1]");
  if (features.rows() < 1 || features.cols() < 1) throw DataError("cannot fit a basis on an empty matrix");
  if (!features.allFinite()) throw DataError("feature matrix has non-finite entries");

  const Eigen::Index c = features.cols();
  const Eigen::MatrixXd a = features;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();

  PrincipalBasis basis;
  basis.energy_fraction = energy_fraction;
  basis.singular_values = Vector::Zero(c);
  basis.singular_values.head(sv.size()) = sv;

  const double total = sv.squaredNorm();
  if (!(total > 0.0)) throw DegenerateError("feature matrix is all zeros");

  Eigen::Index m = c;
  if (energy_fraction < 1.0) {
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
      cumulative += basis.singular_values(i) * basis.singular_values(i);
      if (cumulative >= energy_fraction * total) {
        m = i + 1;
        break;
      }
    }
  }

  basis.rows = svd.matrixV().leftCols(m).transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      if (std::abs(basis.rows(i, j)) > kSignEpsilon) {
        if (basis.rows(i, j) < 0.0) basis.rows.row(i) *= -1.0;
        break;
      }
    }
  }
  return basis;
}

Vector project(const Vector& v, const PrincipalBasis& basis) {
  require_dim(v, basis);
  return basis.rows * v;
}

Vector residual(const Vector& v, const PrincipalBasis& basis) {
  require_dim(v, basis);
  return v - basis.rows.transpose() * (basis.rows * v);
}

double cosine_logit(const Vector& f, const Vector& proto) {
  if (f.size() != proto.size()) throw ShapeError("feature and prototype dimensions differ");
  return f.dot(proto) / (checked_norm(f, "feature") * checked_norm(proto, "prototype"));
}

double rcs_logit(const Vector& f, const Vector& proto, const PrincipalBasis& basis) {
  require_dim(f, basis);
  require_dim(proto, basis);
  const double denom = checked_norm(f, "feature") * checked_norm(proto, "prototype");
  return (basis.rows * f).dot(basis.rows * proto) / denom;
}

Vector logits(const Vector& f, const RowMatrix& prototypes, const PrincipalBasis* basis) {
  if (f.size() != prototypes.cols()) throw ShapeError("feature and prototype dimensions differ");
  const double fn = checked_norm(f, "feature");
  const Vector fv = basis != nullptr ? Vector(basis->rows.transpose() * project(f, *basis)) : f;
  Vector out(prototypes.rows());
  for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
    const Vector p = prototypes.row(k).transpose();
    out(k) = fv.dot(p) / (fn * checked_norm(p, "prototype"));
  }
  return out;
}

RowMatrix logits_jacobian(const Vector& f, const RowMatrix& prototypes, const PrincipalBasis* basis) {
  if (f.size() != prototypes.cols()) throw ShapeError("feature and prototype dimensions differ");
  const double fn = checked_norm(f, "feature");
  const Vector l = logits(f, prototypes, basis);
  RowMatrix jac(prototypes.rows(), f.size());
  for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
    const Vector p = prototypes.row(k).transpose();
    const double pn = checked_norm(p, "prototype");
    // With projection, d(Vf . Vp)/df = V^T V p.
    const Vector p_eff = basis != nullptr ? Vector(basis->rows.transpose() * (basis->rows * p)) : p;
    jac.row(k) = (p_eff / (fn * pn) - l(k) * f / (fn * fn)).transpose();
  }
  return jac;
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

io::Bytes encode_pcv1(const PrincipalBasis& basis) {
  basis.validate();
  io::Bytes out;
  io::put_magic(out, kPcvMagic);
  io::put_u32(out, static_cast<std::uint32_t>(basis.dim()));
  io::put_u32(out, static_cast<std::uint32_t>(basis.rank()));
  io::put_f64(out, basis.energy_fraction);
  for (Eigen::Index i = 0; i < basis.rows.size(); ++i) io::put_f64(out, basis.rows.data()[i]);
  for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i) io::put_f64(out, basis.singular_values(i));
  return out;
}

PrincipalBasis decode_pcv1(std::span<const std::uint8_t> bytes) {
  io::Reader reader(bytes);
  reader.expect_magic(kPcvMagic, "basis file");
  const std::uint32_t c = reader.u32();
  const std::uint32_t m = reader.u32();
  PrincipalBasis basis;
  basis.energy_fraction = reader.f64();
  if (reader.remaining() != (std::size_t{m} * c + c) * 8) throw FormatError("PCV1 payload size does not match header");
  basis.rows.resize(m, c);
  for (Eigen::Index i = 0; i < basis.rows.size(); ++i) basis.rows.data()[i] = reader.f64();
  basis.singular_values.resize(c);
  for (std::uint32_t i = 0; i < c; ++i) basis.singular_values(i) = reader.f64();
  basis.validate();
  return basis;
}

void write_basis(const PrincipalBasis& basis, const std::filesystem::path& path) {
  io::write_file(path, encode_pcv1(basis));
}

PrincipalBasis read_basis(const std::filesystem::path& path) { return decode_pcv1(io::read_file(path)); }

}  // namespace fscil
