#pragma once

#include <filesystem>

#include "fscil/binary_io.hpp"
#include "fscil/linalg.hpp"

namespace fscil {

struct PrincipalBasis {
  RowMatrix rows;          // M x C, orthonormal
  Vector singular_values;  // length C, non-increasing
  double energy_fraction = 0.95;

  Eigen::Index dim() const { return rows.cols(); }
  Eigen::Index rank() const { return rows.rows(); }
  void validate() const;

  /// The identity basis on C dimensions (every direction kept).
  static PrincipalBasis full(Eigen::Index dim);
};

/// SVD of the raw, uncentered feature matrix. Keeps the fewest right singular
/// vectors whose squared singular values reach `energy_fraction` of the total.
PrincipalBasis fit_basis(const RowMatrix& features, double energy_fraction);

Vector project(const Vector& v, const PrincipalBasis& basis);
Vector residual(const Vector& v, const PrincipalBasis& basis);

double cosine_logit(const Vector& f, const Vector& proto);

/// Projected dot product divided by the original, unprojected norms.
double rcs_logit(const Vector& f, const Vector& proto, const PrincipalBasis& basis);

/// Logits against every prototype row. `basis == nullptr` gives cosine logits.
Vector logits(const Vector& f, const RowMatrix& prototypes, const PrincipalBasis* basis);

/// d logits / d f as a K x C Jacobian, matching logits().
RowMatrix logits_jacobian(const Vector& f, const RowMatrix& prototypes, const PrincipalBasis* basis);

Vector softmax(const Vector& logits);

// PCV1: "PCV1", u32 LE C, u32 LE M, f64 energy_fraction, M*C f64 row-major,
// then C f64 singular values.
io::Bytes encode_pcv1(const PrincipalBasis& basis);
PrincipalBasis decode_pcv1(std::span<const std::uint8_t> bytes);
void write_basis(const PrincipalBasis& basis, const std::filesystem::path& path);
PrincipalBasis read_basis(const std::filesystem::path& path);

}  // namespace fscil
