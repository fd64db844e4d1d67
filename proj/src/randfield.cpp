#include "condgpc/randfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "condgpc/io.hpp"
#include "condgpc/log.hpp"

namespace condgpc {

CovarianceKernel::CovarianceKernel(Variant v) : v_(std::move(v)) {
  for (double l : std::visit([](const auto& k) { return k.length; }, v_))
    if (!(l > 0.0)) throw std::invalid_argument("correlation length must be positive");
}

CovarianceKernel CovarianceKernel::squared_exponential(double length) {
  return CovarianceKernel(SquaredExponential{{length, length}});
}

CovarianceKernel CovarianceKernel::squared_exponential(double l1, double l2) {
  return CovarianceKernel(SquaredExponential{{l1, l2}});
}

CovarianceKernel CovarianceKernel::separable_exponential(double l1, double l2) {
  return CovarianceKernel(SeparableExponential{{l1, l2}});
}

double CovarianceKernel::length(int axis) const {
  return std::visit([axis](const auto& k) { return k.length[axis]; }, v_);
}

double CovarianceKernel::axis_factor(int axis, double d) const {
  if (std::holds_alternative<SquaredExponential>(v_)) {
    const double s = d / length(axis);
    return std::exp(-s * s);
  }
  return std::exp(-std::abs(d) / length(axis));
}

double CovarianceKernel::operator()(const Point& x, const Point& y, int dimension) const {
  double exponent = 0.0;
  const bool squared = std::holds_alternative<SquaredExponential>(v_);
  for (int a = 0; a < dimension; ++a) {
    const double s = (x[a] - y[a]) / length(a);
    exponent += squared ? s * s : std::abs(s);
  }
  return std::exp(-exponent);
}

std::string CovarianceKernel::name() const {
  return std::holds_alternative<SquaredExponential>(v_) ? "squared_exponential"
                                                         : "separable_exponential";
}

LognormalMoments lognormal_moments(double mu_k, double sigma_k) {
  if (!(mu_k > 0.0)) throw std::invalid_argument("lognormal mean must be positive");
  if (sigma_k < 0.0) throw std::invalid_argument("lognormal standard deviation is negative");
  const double r = sigma_k / mu_k;
  const double s2 = std::log1p(r * r);
  return {std::log(mu_k) - 0.5 * s2, std::sqrt(s2)};
}

double KLExpansion::cumulative_fraction(std::size_t n) const {
  n = std::min(n, size());
  return eigenvalues.head(static_cast<long>(n)).sum() / total_energy;
}

double KLExpansion::energy_fraction() const { return cumulative_fraction(size()); }

Field KLExpansion::mode(std::size_t n) const {
  const auto col = modes.col(static_cast<long>(n));
  return Field(grid, std::vector<double>(col.data(), col.data() + col.size()));
}

Field KLExpansion::mean_field() const {
  return Field(grid, std::vector<double>(mean.data(), mean.data() + mean.size()));
}

Field KLExpansion::variance_field() const {
  const Eigen::VectorXd v =
      sigma_g * sigma_g * (modes.array().square().matrix() * eigenvalues);
  return Field(grid, std::vector<double>(v.data(), v.data() + v.size()));
}

namespace {

struct Eigenpairs {
  Eigen::VectorXd values;   // descending, clipped at zero
  Eigen::MatrixXd vectors;  // Euclidean-orthonormal columns
};

Eigenpairs symmetric_eigen(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  const long n = a.rows();
  Eigenpairs out{es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
  const double top = n > 0 ? std::max(out.values[0], 0.0) : 0.0;
  if (n > 0 && out.values[n - 1] < -1e-8 * top)
    warn("discretised covariance is indefinite; clipping negative eigenvalues");
  out.values = out.values.cwiseMax(0.0);
  return out;
}

Eigen::MatrixXd weighted_kernel_1d(const CovarianceKernel& k, const Grid& g, int axis) {
  const auto n = static_cast<long>(g.count(axis));
  const double h = g.spacing(axis);
  Eigen::VectorXd sw(n);
  for (long i = 0; i < n; ++i) {
    double w = h;
    if (g.dimension() == 1 && (i == 0 || i == n - 1)) w = 0.5 * h;
    sw[i] = std::sqrt(w);
  }
  Eigen::MatrixXd a(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      a(i, j) = sw[i] * k.axis_factor(axis, g.coordinate(axis, i) - g.coordinate(axis, j)) *
                sw[j];
  return a;
}

Eigenpairs dense_eigenpairs(const CovarianceKernel& k, const Grid& g) {
  const auto n = static_cast<long>(g.size());
  Eigen::VectorXd sw(n);
  for (long p = 0; p < n; ++p) sw[p] = std::sqrt(g.weight(p));
  std::vector<Point> pts(n);
  for (long p = 0; p < n; ++p) pts[p] = g.point(p);
  Eigen::MatrixXd a(n, n);
  for (long p = 0; p < n; ++p)
    for (long q = p; q < n; ++q) a(p, q) = a(q, p) = sw[p] * k(pts[p], pts[q], g.dimension()) * sw[q];
  return symmetric_eigen(a);
}

struct ProductIndex {
  double value;
  long ix, iy;
};

std::vector<ProductIndex> product_spectrum(const Eigenpairs& ex, const Eigenpairs& ey) {
  std::vector<ProductIndex> all;
  all.reserve(ex.values.size() * ey.values.size());
  for (long a = 0; a < ex.values.size(); ++a)
    for (long b = 0; b < ey.values.size(); ++b)
      all.push_back({ex.values[a] * ey.values[b], a, b});
  std::stable_sort(all.begin(), all.end(),
                   [](const ProductIndex& l, const ProductIndex& r) { return l.value > r.value; });
  return all;
}

void check_resolution(const CovarianceKernel& k, const Grid& g) {
  for (int a = 0; a < g.dimension(); ++a) {
    if (k.length(a) / g.spacing(a) < 4.0) {
      std::ostringstream msg;
      msg << "grid resolves correlation length on axis " << a << " with only "
          << k.length(a) / g.spacing(a) << " points";
      warn(msg.str());
    }
  }
}

std::size_t choose_mode_count(const Eigen::VectorXd& spectrum, double total,
                              std::size_t positive, const KlTarget& target) {
  if (target.modes) {
    if (*target.modes == 0) throw std::invalid_argument("KL mode count must be positive");
    if (*target.modes > positive)
      throw std::invalid_argument("requested more KL modes than the discrete spectrum supports");
    return *target.modes;
  }
  if (!target.energy_fraction) throw std::invalid_argument("KL target is empty");
  const double f = *target.energy_fraction;
  if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("energy fraction must be in (0, 1]");
  double acc = 0.0;
  for (std::size_t n = 0; n < positive; ++n) {
    acc += spectrum[static_cast<long>(n)];
    if (acc >= f * total * (1.0 - 1e-12)) return n + 1;
  }
  return positive;
}

void fix_signs(Eigen::MatrixXd& modes) {
  for (long c = 0; c < modes.cols(); ++c) {
    auto col = modes.col(c);
    const double big = col.cwiseAbs().maxCoeff();
    for (long p = 0; p < col.size(); ++p) {
      if (std::abs(col[p]) > 1e-8 * big) {
        if (col[p] < 0.0) col *= -1.0;
        break;
      }
    }
  }
}

bool use_kronecker(const Grid& g, KlMethod method) {
  if (method == KlMethod::Kronecker && g.dimension() != 2)
    throw std::invalid_argument("Kronecker KL needs a 2D grid");
  return method == KlMethod::Kronecker || (method == KlMethod::Auto && g.dimension() == 2);
}

}  // namespace

Eigen::VectorXd discrete_spectrum(const CovarianceKernel& kernel, const Grid& grid,
                                  KlMethod method) {
  if (use_kronecker(grid, method)) {
    const auto all = product_spectrum(symmetric_eigen(weighted_kernel_1d(kernel, grid, 0)),
                                      symmetric_eigen(weighted_kernel_1d(kernel, grid, 1)));
    Eigen::VectorXd s(static_cast<long>(all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) s[static_cast<long>(i)] = all[i].value;
    return s;
  }
  return dense_eigenpairs(kernel, grid).values;
}

KLExpansion compute_kl(const CovarianceKernel& kernel, const Grid& grid, double sigma_g,
                       const KlTarget& target, double mean, KlMethod method) {
  if (sigma_g < 0.0) throw std::invalid_argument("sigma_g must be non-negative");
  if (target.energy_fraction && !(*target.energy_fraction > 0.0 && *target.energy_fraction <= 1.0))
    throw std::invalid_argument("energy fraction must be in (0, 1]");
  check_resolution(kernel, grid);

  KLExpansion kl;
  kl.grid = grid;
  kl.kernel = kernel;
  kl.sigma_g = sigma_g;
  kl.mean = Eigen::VectorXd::Constant(static_cast<long>(grid.size()), mean);

  const auto n_points = static_cast<long>(grid.size());
  Eigen::VectorXd inv_sqrt_w(n_points);
  for (long p = 0; p < n_points; ++p) inv_sqrt_w[p] = 1.0 / std::sqrt(grid.weight(p));

  if (use_kronecker(grid, method)) {
    const Eigenpairs ex = symmetric_eigen(weighted_kernel_1d(kernel, grid, 0));
    const Eigenpairs ey = symmetric_eigen(weighted_kernel_1d(kernel, grid, 1));
    const auto all = product_spectrum(ex, ey);
    Eigen::VectorXd spectrum(static_cast<long>(all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) spectrum[static_cast<long>(i)] = all[i].value;
    kl.total_energy = spectrum.sum();
    const double cutoff = 1e-12 * spectrum[0];
    const auto positive = static_cast<std::size_t>((spectrum.array() > cutoff).count());
    const std::size_t n = choose_mode_count(spectrum, kl.total_energy, positive, target);
    kl.eigenvalues = spectrum.head(static_cast<long>(n));
    kl.modes.resize(n_points, static_cast<long>(n));
    const long ny = static_cast<long>(grid.count(1));
    for (std::size_t m = 0; m < n; ++m) {
      const auto vx = ex.vectors.col(all[m].ix);
      const auto vy = ey.vectors.col(all[m].iy);
      for (long p = 0; p < n_points; ++p)
        kl.modes(p, static_cast<long>(m)) = vx[p / ny] * vy[p % ny] * inv_sqrt_w[p];
    }
  } else {
    const Eigenpairs e = dense_eigenpairs(kernel, grid);
    kl.total_energy = e.values.sum();
    const double cutoff = 1e-12 * e.values[0];
    const auto positive = static_cast<std::size_t>((e.values.array() > cutoff).count());
    const std::size_t n = choose_mode_count(e.values, kl.total_energy, positive, target);
    kl.eigenvalues = e.values.head(static_cast<long>(n));
    kl.modes = inv_sqrt_w.asDiagonal() * e.vectors.leftCols(static_cast<long>(n));
  }
  fix_signs(kl.modes);
  return kl;
}

Field sample_realization(const KLExpansion& kl, std::span<const double> xi) {
  if (xi.size() != kl.size())
    throw std::invalid_argument("xi length does not match the number of KL modes");
  const Eigen::Map<const Eigen::VectorXd> x(xi.data(), static_cast<long>(xi.size()));
  const Eigen::VectorXd y =
      kl.mean + kl.sigma_g * (kl.modes * (kl.eigenvalues.cwiseSqrt().cwiseProduct(x)));
  return Field(kl.grid, std::vector<double>(y.data(), y.data() + y.size()));
}

void write_spectrum_csv(const KLExpansion& kl, const std::string& path) {
  io::Table t;
  t.header = {"index", "eigenvalue", "cumulative_fraction"};
  double acc = 0.0;
  for (long n = 0; n < kl.eigenvalues.size(); ++n) {
    acc += kl.eigenvalues[n];
    t.rows.push_back({static_cast<double>(n + 1), kl.eigenvalues[n], acc / kl.total_energy});
  }
  io::write_table(t, path);
}

}  // namespace condgpc
