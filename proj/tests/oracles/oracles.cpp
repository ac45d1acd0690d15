#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

SymmetricEigen jacobi_eigen(const RowMatrix& symmetric, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  RowMatrix a = symmetric;
  RowMatrix v = RowMatrix::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{Vector(n), RowMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

Vector singular_values(const RowMatrix& a) {
  const RowMatrix gram = a.transpose() * a;
  Vector ev = jacobi_eigen(gram).values;
  for (auto& x : ev) x = std::sqrt(std::max(0.0, x));
  return ev;
}

RowMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, fscil::SplitMix64& rng, double scale) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

Vector gaussian_vector(Eigen::Index n, fscil::SplitMix64& rng, double scale) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.gaussian();
  return v;
}

RowMatrix random_orthonormal_rows(Eigen::Index rows, Eigen::Index cols, fscil::SplitMix64& rng) {
  RowMatrix q(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    Vector r = gaussian_vector(cols, rng);
    // two passes of Gram-Schmidt for numerical safety
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < i; ++j) r -= r.dot(q.row(j).transpose()) * q.row(j).transpose();
    }
    q.row(i) = r.normalized().transpose();
  }
  return q;
}

RowMatrix reflected_orthonormal_rows(Eigen::Index rows, Eigen::Index cols, fscil::SplitMix64& rng, int reflections) {
  RowMatrix q = RowMatrix::Identity(cols, cols).topRows(rows);
  for (int k = 0; k < reflections; ++k) {
    const Vector v = gaussian_vector(cols, rng).normalized();
    q -= 2.0 * (q * v) * v.transpose();
  }
  return q;
}

double ScalarAdam::update(double param, double grad, double lr, double wd, double b1, double b2, double eps) {
  ++step;
  param *= 1.0 - lr * wd;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad * grad;
  const double m_hat = m / (1.0 - std::pow(b1, static_cast<double>(step)));
  const double v_hat = v / (1.0 - std::pow(b2, static_cast<double>(step)));
  return param - lr * m_hat / (std::sqrt(v_hat) + eps);
}

Tally tally(const fscil::PredictionLog& log) {
  Tally t;
  for (const auto& r : log.rows) {
    const long hit = r.true_label == r.pred_label ? 1 : 0;
    t.session[r.session].first += hit;
    t.session[r.session].second += 1;
    t.per_class[r.session][r.true_label].first += hit;
    t.per_class[r.session][r.true_label].second += 1;
    if (r.intro_session == r.session) {
      t.novel[r.session].first += hit;
      t.novel[r.session].second += 1;
      t.novel_per_class[r.session][r.true_label].first += hit;
      t.novel_per_class[r.session][r.true_label].second += 1;
    }
  }
  return t;
}

namespace {

double ratio(const std::pair<long, long>& p) { return static_cast<double>(p.first) / static_cast<double>(p.second); }

double class_mean(const std::map<std::string, std::pair<long, long>>& classes) {
  double sum = 0.0;
  for (const auto& [name, p] : classes) sum += ratio(p);
  return sum / static_cast<double>(classes.size());
}

}  // namespace

double micro(const Tally& t, std::size_t b) { return ratio(t.session.at(b)); }
double macro(const Tally& t, std::size_t b) { return class_mean(t.per_class.at(b)); }
double novel_micro(const Tally& t, std::size_t b) { return ratio(t.novel.at(b)); }
double novel_macro(const Tally& t, std::size_t b) { return class_mean(t.novel_per_class.at(b)); }

double ncacc(const Tally& t, std::size_t from, bool use_macro) {
  const std::size_t last = t.session.rbegin()->first;
  double sum = 0.0;
  for (std::size_t b = from; b <= last; ++b) sum += use_macro ? novel_macro(t, b) : novel_micro(t, b);
  return sum / static_cast<double>(last - from + 1);
}

fscil::PredictionLog random_log(std::uint64_t seed, std::size_t sessions) {
  fscil::SplitMix64 rng(seed);
  std::vector<std::string> classes;
  std::vector<std::size_t> intro;
  fscil::PredictionLog log;
  for (std::size_t b = 1; b <= sessions; ++b) {
    const std::size_t fresh = b == 1 ? 3 + rng.below(4) : 1 + rng.below(3);
    for (std::size_t k = 0; k < fresh; ++k) {
      classes.push_back("c" + std::to_string(classes.size()));
      intro.push_back(b);
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const std::size_t n = 1 + rng.below(6);
      for (std::size_t i = 0; i < n; ++i) {
        // bias towards the true class so accuracies are not all near chance
        const bool right = rng.uniform() < 0.6;
        const std::string pred = right ? classes[c] : classes[rng.below(classes.size())];
        log.rows.push_back({b, classes[c] + "/" + std::to_string(i), classes[c], pred, intro[c]});
      }
    }
  }
  return log;
}

std::vector<double> central_differences(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                        double h) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

}  // namespace oracle
