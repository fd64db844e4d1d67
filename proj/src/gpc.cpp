#include "condgpc/gpc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "condgpc/io.hpp"
#include "condgpc/serialize.hpp"

namespace condgpc {

double hermite(int n, double x) {
  if (n < 0) throw std::invalid_argument("hermite degree must be non-negative");
  std::vector<double> v(static_cast<std::size_t>(n) + 1);
  hermite_all(n, x, v.data());
  return v[n];
}

void hermite_all(int p, double x, double* out) {
  out[0] = 1.0;
  if (p >= 1) out[1] = x;
  for (int n = 1; n < p; ++n)
    out[n + 1] = (x * out[n] - std::sqrt(static_cast<double>(n)) * out[n - 1]) /
                 std::sqrt(static_cast<double>(n + 1));
}

std::size_t MultiIndexSet::find(std::span<const int> index) const {
  for (std::size_t k = 0; k < indices.size(); ++k)
    if (std::equal(index.begin(), index.end(), indices[k].begin(), indices[k].end())) return k;
  return indices.size();
}

namespace {

// All compositions of `total` into d parts, leading parts descending.
void compositions(std::size_t d, int total, std::vector<int>& cur, std::size_t pos,
                  std::vector<std::vector<int>>& out) {
  if (pos + 1 == d) {
    cur[pos] = total;
    out.push_back(cur);
    return;
  }
  for (int a = total; a >= 0; --a) {
    cur[pos] = a;
    compositions(d, total - a, cur, pos + 1, out);
  }
}

}  // namespace

MultiIndexSet total_degree_indices(std::size_t d, int P) {
  if (P < 0) throw std::invalid_argument("polynomial degree must be non-negative");
  MultiIndexSet s;
  s.dimension = d;
  s.degree = P;
  if (d == 0) {
    s.indices.emplace_back();
    return s;
  }
  std::vector<int> cur(d, 0);
  for (int n = 0; n <= P; ++n) compositions(d, n, cur, 0, s.indices);
  return s;
}

Eigen::VectorXd evaluate_basis(const MultiIndexSet& set, std::span<const double> xi) {
  if (xi.size() != set.dimension) throw std::invalid_argument("xi has the wrong dimension");
  const int p = set.degree;
  std::vector<double> table(set.dimension * static_cast<std::size_t>(p + 1));
  for (std::size_t k = 0; k < set.dimension; ++k) hermite_all(p, xi[k], &table[k * (p + 1)]);
  Eigen::VectorXd phi(static_cast<long>(set.size()));
  for (std::size_t b = 0; b < set.size(); ++b) {
    double v = 1.0;
    const auto& idx = set.indices[b];
    for (std::size_t k = 0; k < set.dimension; ++k)
      if (idx[k] != 0) v *= table[k * (p + 1) + idx[k]];
    phi[static_cast<long>(b)] = v;
  }
  return phi;
}

Eigen::MatrixXd basis_jacobian(const MultiIndexSet& set, std::span<const double> xi) {
  if (xi.size() != set.dimension) throw std::invalid_argument("xi has the wrong dimension");
  const int p = set.degree;
  const std::size_t stride = static_cast<std::size_t>(p + 1);
  std::vector<double> table(set.dimension * stride);
  for (std::size_t k = 0; k < set.dimension; ++k) hermite_all(p, xi[k], &table[k * stride]);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<long>(set.size()), static_cast<long>(set.dimension));
  for (std::size_t b = 0; b < set.size(); ++b) {
    const auto& idx = set.indices[b];
    for (std::size_t j = 0; j < set.dimension; ++j) {
      if (idx[j] == 0) continue;
      // orthonormal Hermite: phi_n' = sqrt(n) phi_{n-1}
      double v = std::sqrt(double(idx[j])) * table[j * stride + idx[j] - 1];
      for (std::size_t k = 0; k < set.dimension; ++k)
        if (k != j && idx[k] != 0) v *= table[k * stride + idx[k]];
      jac(static_cast<long>(b), static_cast<long>(j)) = v;
    }
  }
  return jac;
}

QuadratureRule gauss_hermite(std::size_t q) {
  if (q == 0) throw std::invalid_argument("quadrature needs at least one node");
  const long n = static_cast<long>(q);
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (long k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  Eigen::VectorXd x = es.eigenvalues();
  Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square();
  for (long k = 0; k < n / 2; ++k) {
    const long r = n - 1 - k;
    const double xs = 0.5 * (x[r] - x[k]);
    const double ws = 0.5 * (w[r] + w[k]);
    x[k] = -xs;
    x[r] = xs;
    w[k] = w[r] = ws;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  w /= w.sum();
  QuadratureRule r;
  r.dimension = 1;
  r.nodes = x.transpose();
  r.weights = w;
  r.tag = "gauss-hermite-" + std::to_string(q);
  return r;
}

namespace {

// Appends the tensor product of 1D rules, scaled by `coef`, into `acc`.
void accumulate_tensor(const std::vector<const QuadratureRule*>& rules, double coef,
                       std::map<std::vector<double>, double>& acc) {
  const std::size_t d = rules.size();
  std::vector<std::size_t> pos(d, 0);
  std::vector<double> x(d);
  while (true) {
    double w = coef;
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = rules[k]->nodes(0, static_cast<long>(pos[k]));
      w *= rules[k]->weights[static_cast<long>(pos[k])];
    }
    acc[x] += w;
    std::size_t k = d;
    while (k > 0) {
      --k;
      if (++pos[k] < rules[k]->size()) break;
      pos[k] = 0;
      if (k == 0) return;
    }
    if (d == 0) return;
  }
}

QuadratureRule from_map(std::size_t d, const std::map<std::vector<double>, double>& acc,
                        std::string tag) {
  std::vector<std::pair<std::vector<double>, double>> kept;
  for (const auto& [x, w] : acc)
    if (std::abs(w) > 1e-15) kept.emplace_back(x, w);
  QuadratureRule r;
  r.dimension = d;
  r.nodes.resize(static_cast<long>(d), static_cast<long>(kept.size()));
  r.weights.resize(static_cast<long>(kept.size()));
  for (std::size_t m = 0; m < kept.size(); ++m) {
    for (std::size_t k = 0; k < d; ++k)
      r.nodes(static_cast<long>(k), static_cast<long>(m)) = kept[m].first[k];
    r.weights[static_cast<long>(m)] = kept[m].second;
  }
  r.tag = std::move(tag);
  return r;
}

}  // namespace

QuadratureRule gauss_hermite_tensor(std::size_t d, std::size_t q, std::size_t max_nodes) {
  if (q == 0) throw std::invalid_argument("tensor rule needs q >= 1");
  double count = 1.0;
  for (std::size_t k = 0; k < d; ++k) count *= static_cast<double>(q);
  if (count > static_cast<double>(max_nodes)) {
    std::ostringstream msg;
    msg << "tensor rule with " << q << "^" << d << " nodes exceeds the budget of " << max_nodes;
    throw std::length_error(msg.str());
  }
  const QuadratureRule one = gauss_hermite(q);
  const std::size_t total = static_cast<std::size_t>(count);
  QuadratureRule r;
  r.dimension = d;
  r.nodes.resize(static_cast<long>(d), static_cast<long>(total));
  r.weights.resize(static_cast<long>(total));
  std::vector<std::size_t> pos(d, 0);
  for (std::size_t m = 0; m < total; ++m) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      r.nodes(static_cast<long>(k), static_cast<long>(m)) = one.nodes(0, static_cast<long>(pos[k]));
      w *= one.weights[static_cast<long>(pos[k])];
    }
    r.weights[static_cast<long>(m)] = w;
    for (std::size_t k = d; k-- > 0;) {
      if (++pos[k] < q) break;
      pos[k] = 0;
    }
  }
  r.tag = "tensor-q" + std::to_string(q);
  return r;
}

QuadratureRule smolyak_sparse(std::size_t d, std::size_t level) {
  if (level == 0) throw std::invalid_argument("Smolyak level must be >= 1");
  if (d == 0) return gauss_hermite_tensor(0, 1);
  std::vector<QuadratureRule> rules;
  for (std::size_t i = 1; i <= level; ++i) rules.push_back(gauss_hermite(2 * i - 1));

  const std::size_t top = level + d - 1;
  const std::size_t bottom = std::max(d, level);
  std::map<std::vector<double>, double> acc;
  std::vector<std::size_t> idx(d, 1);
  // Walk all i >= 1 with |i| <= top; keep those with |i| >= bottom.
  while (true) {
    std::size_t sum = 0;
    for (auto v : idx) sum += v;
    if (sum >= bottom && sum <= top) {
      const std::size_t j = top - sum;
      double binom = 1.0;
      for (std::size_t t = 0; t < j; ++t) binom = binom * double(d - 1 - t) / double(t + 1);
      const double coef = (j % 2 == 0 ? 1.0 : -1.0) * binom;
      std::vector<const QuadratureRule*> parts;
      for (auto v : idx) parts.push_back(&rules[v - 1]);
      accumulate_tensor(parts, coef, acc);
    }
    std::size_t k = 0;
    for (; k < d; ++k) {
      ++idx[k];
      std::size_t s = 0;
      for (auto v : idx) s += v;
      if (s <= top) break;
      idx[k] = 1;
    }
    if (k == d) break;
  }
  return from_map(d, acc, "smolyak-l" + std::to_string(level));
}

QuadratureRule default_rule(std::size_t d, int P) {
  if (d <= 6) return gauss_hermite_tensor(d, static_cast<std::size_t>(P) + 1);
  return smolyak_sparse(d, static_cast<std::size_t>(P) + 1);
}

GpcSurrogate::GpcSurrogate(Grid grid, MultiIndexSet indices, Eigen::MatrixXd coefficients,
                           std::string rule_tag, std::size_t rule_nodes,
                           std::string ckl_fingerprint)
    : grid_(std::move(grid)),
      indices_(std::move(indices)),
      coeffs_(std::move(coefficients)),
      rule_tag_(std::move(rule_tag)),
      rule_nodes_(rule_nodes),
      fingerprint_(std::move(ckl_fingerprint)) {
  if (static_cast<std::size_t>(coeffs_.rows()) != grid_.size() ||
      static_cast<std::size_t>(coeffs_.cols()) != indices_.size())
    throw std::invalid_argument("coefficient matrix must be grid points x basis size");
}

Field GpcSurrogate::coefficient(std::size_t k) const {
  const auto c = coeffs_.col(static_cast<long>(k));
  return Field(grid_, std::vector<double>(c.data(), c.data() + c.size()));
}

Field GpcSurrogate::mean() const { return coefficient(0); }

Field GpcSurrogate::variance() const {
  Field v(grid_, 0.0);
  for (long p = 0; p < coeffs_.rows(); ++p)
    v[static_cast<std::size_t>(p)] = coeffs_.row(p).tail(coeffs_.cols() - 1).squaredNorm();
  return v;
}

Field GpcSurrogate::eval(std::span<const double> xi) const {
  const Eigen::VectorXd u = coeffs_ * evaluate_basis(indices_, xi);
  return Field(grid_, std::vector<double>(u.data(), u.data() + u.size()));
}

double GpcSurrogate::eval_at(const Point& x, std::span<const double> xi) const {
  const Point loc[1] = {x};
  return make_probe(*this, loc).eval(xi)[0];
}

Eigen::VectorXd PointProbe::eval(std::span<const double> xi) const {
  return coefficients * evaluate_basis(indices, xi);
}

Eigen::MatrixXd PointProbe::jacobian(std::span<const double> xi) const {
  return coefficients * basis_jacobian(indices, xi);
}

PointProbe make_probe(const GpcSurrogate& s, std::span<const Point> locations) {
  PointProbe probe;
  probe.indices = s.indices();
  const long nb = static_cast<long>(s.indices().size());
  probe.coefficients.resize(static_cast<long>(locations.size()), nb);
  std::vector<Field> fields;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (!s.grid().contains(locations[i])) throw std::out_of_range("probe location outside domain");
    const auto snap = s.grid().nearest(locations[i]);
    if (snap.distance == 0.0) {
      probe.coefficients.row(static_cast<long>(i)) =
          s.coefficients().row(static_cast<long>(snap.index));
      continue;
    }
    if (fields.empty())
      for (long k = 0; k < nb; ++k) fields.push_back(s.coefficient(static_cast<std::size_t>(k)));
    for (long k = 0; k < nb; ++k)
      probe.coefficients(static_cast<long>(i), k) = interpolate(fields[k], locations[i]);
  }
  return probe;
}

GpcSurrogate build_surrogate(const Grid& grid, const ForwardMap& forward, int P,
                             const QuadratureRule& rule, unsigned threads) {
  MultiIndexSet set = total_degree_indices(rule.dimension, P);
  const std::size_t nodes = rule.size();
  const long np = static_cast<long>(grid.size());
  const long nb = static_cast<long>(set.size());

  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(np, nb);
  // Fixed chunk size keeps the summation order independent of `threads`.
  constexpr std::size_t kChunk = 128;
  Eigen::MatrixXd u(np, static_cast<long>(kChunk));
  Eigen::MatrixXd phi_w(static_cast<long>(kChunk), nb);
  threads = std::max(1u, threads);

  for (std::size_t start = 0; start < nodes; start += kChunk) {
    const std::size_t count = std::min(kChunk, nodes - start);
    std::vector<std::exception_ptr> failures(count);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      for (std::size_t k = next++; k < count; k = next++) {
        const std::size_t m = start + k;
        try {
          const auto xi = rule.node(m);
          const Field f = forward(xi);
          if (!(f.grid() == grid)) throw std::invalid_argument("forward map returned a field on another grid");
          for (long p = 0; p < np; ++p) u(p, static_cast<long>(k)) = f[static_cast<std::size_t>(p)];
          phi_w.row(static_cast<long>(k)) =
              evaluate_basis(set, xi).transpose() * rule.weights[static_cast<long>(m)];
        } catch (...) {
          failures[k] = std::current_exception();
        }
      }
    };
    const unsigned n_workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (n_workers <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    for (std::size_t k = 0; k < count; ++k) {
      if (!failures[k]) continue;
      std::ostringstream msg;
      msg << "forward solve failed at quadrature node " << (start + k) << " (xi =";
      for (double v : rule.node(start + k)) msg << ' ' << v;
      msg << ")";
      try {
        std::rethrow_exception(failures[k]);
      } catch (const std::exception& e) {
        msg << ": " << e.what();
      }
      throw std::runtime_error(msg.str());
    }
    coeffs.noalias() += u.leftCols(static_cast<long>(count)) * phi_w.topRows(static_cast<long>(count));
  }
  return GpcSurrogate(grid, std::move(set), std::move(coeffs), rule.tag, nodes);
}

GpcSurrogate build_surrogate(const ConditionalKL& ckl, const BoundaryConditions& bc, int P,
                             const QuadratureRule& rule, unsigned threads) {
  if (rule.dimension != ckl.dimension())
    throw std::invalid_argument("quadrature dimension differs from the reduced dimension");
  ForwardMap forward = [&](std::span<const double> xi) {
    return solve(sample_conditional(ckl, xi).kappa, bc);
  };
  GpcSurrogate s = build_surrogate(ckl.grid(), forward, P, rule, threads);
  return GpcSurrogate(s.grid(), s.indices(), s.coefficients(), rule.tag, rule.size(),
                      ckl.fingerprint());
}

namespace {

std::string coefficient_name(std::size_t k) {
  std::ostringstream s;
  s << "c" << std::setw(4) << std::setfill('0') << k << ".csv";
  return s.str();
}

}  // namespace

void save_surrogate(const GpcSurrogate& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "coefficients");
  io::Table t;
  t.header.push_back("k");
  for (std::size_t k = 0; k < s.dimension(); ++k) t.header.push_back("i" + std::to_string(k + 1));
  for (std::size_t b = 0; b < s.indices().size(); ++b) {
    std::vector<double> row{static_cast<double>(b)};
    for (int v : s.indices()[b]) row.push_back(v);
    t.rows.push_back(std::move(row));
  }
  io::write_table(t, dir / "indices.csv");
  for (std::size_t b = 0; b < s.indices().size(); ++b)
    write_field_csv(s.coefficient(b), (dir / "coefficients" / coefficient_name(b)).string());
  nlohmann::json meta;
  meta["dimension"] = s.dimension();
  meta["degree"] = s.degree();
  meta["basis_size"] = s.indices().size();
  meta["rule"] = s.rule_tag();
  meta["rule_nodes"] = s.rule_nodes();
  meta["ckl_fingerprint"] = s.ckl_fingerprint();
  meta["grid"] = grid_to_json(s.grid());
  io::write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

GpcSurrogate load_surrogate(const std::filesystem::path& dir) {
  const auto meta = nlohmann::json::parse(io::read_text(dir / "metadata.json"));
  const Grid grid = grid_from_json(meta.at("grid"));
  MultiIndexSet set;
  set.dimension = meta.at("dimension").get<std::size_t>();
  set.degree = meta.at("degree").get<int>();
  const auto t = io::read_table(dir / "indices.csv");
  for (const auto& row : t.rows) {
    std::vector<int> idx;
    for (std::size_t k = 1; k < row.size(); ++k) idx.push_back(static_cast<int>(row[k]));
    set.indices.push_back(std::move(idx));
  }
  Eigen::MatrixXd coeffs(static_cast<long>(grid.size()), static_cast<long>(set.size()));
  for (std::size_t b = 0; b < set.size(); ++b) {
    const Field f = read_field_csv(grid, (dir / "coefficients" / coefficient_name(b)).string());
    for (std::size_t p = 0; p < grid.size(); ++p) coeffs(static_cast<long>(p), static_cast<long>(b)) = f[p];
  }
  return GpcSurrogate(grid, std::move(set), std::move(coeffs), meta.at("rule").get<std::string>(),
                      meta.at("rule_nodes").get<std::size_t>(),
                      meta.at("ckl_fingerprint").get<std::string>());
}

}  // namespace condgpc
