#include "tfem/amg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace tfem {

void orthonormalize(NearNullspace& ns) {
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < ns.k; ++j) {
      auto vj = ns.vector(j);
      for (int i = 0; i < j; ++i) {
        auto vi = ns.vector(i);
        axpy(-dot(vi, vj), vi, vj);
      }
      const double nrm = norm2(vj);
      if (nrm > 0.0)
        for (double& x : vj) x /= nrm;
    }
  }
}

NearNullspace constant_nullspace(Index n) {
  NearNullspace ns;
  ns.n = n;
  ns.k = 1;
  ns.data.assign(static_cast<std::size_t>(n), n > 0 ? 1.0 / std::sqrt(static_cast<double>(n)) : 0.0);
  return ns;
}

NearNullspace rigid_body_modes(std::span<const Vec3> node_coords, int block_size, RigidModes modes,
                               bool orthonormal) {
  if (block_size != 3) throw ValidationError("rigid_body_modes: requires a 3-vector space");
  const Index nodes = static_cast<Index>(node_coords.size());
  Vec3 c{0.0, 0.0, 0.0};
  for (const Vec3& x : node_coords) c = c + x;
  if (nodes > 0) c = (1.0 / nodes) * c;
  NearNullspace ns;
  ns.n = 3 * nodes;
  ns.k = modes == RigidModes::full ? 6 : 3;
  ns.data.assign(static_cast<std::size_t>(ns.n) * ns.k, 0.0);
  for (Index a = 0; a < nodes; ++a) {
    const Vec3 d = node_coords[a] - c;
    for (int t = 0; t < 3; ++t) ns.vector(t)[3 * a + t] = 1.0;
    if (modes == RigidModes::full) {
      // rotations about x, y, z
      ns.vector(3)[3 * a + 1] = -d[2];
      ns.vector(3)[3 * a + 2] = d[1];
      ns.vector(4)[3 * a + 0] = d[2];
      ns.vector(4)[3 * a + 2] = -d[0];
      ns.vector(5)[3 * a + 0] = -d[1];
      ns.vector(5)[3 * a + 1] = d[0];
    }
  }
  if (orthonormal) orthonormalize(ns);
  return ns;
}

AmgOptions classical_defaults() {
  AmgOptions o;
  o.strength_threshold = 0.25;
  o.smoother.type = SmootherType::gauss_seidel;
  return o;
}

AmgOptions smoothed_aggregation_defaults(int degree) {
  AmgOptions o;
  o.strength_threshold = degree >= 2 ? 0.08 : 0.04;
  o.smoother.type = SmootherType::chebyshev;
  o.smoother.chebyshev.degree = 2;
  o.smoother.eig_iterations = 30;
  return o;
}

// ---------------------------------------------------------------------------
// Classical coarsening

CsrMatrix classical_strength(const CsrMatrix& a, double theta) {
  CsrMatrix s;
  s.rows = s.cols = a.rows;
  s.row_ptr.assign(static_cast<std::size_t>(a.rows) + 1, 0);
  for (Index i = 0; i < a.rows; ++i) {
    double mx = 0.0;
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      if (a.col[k] != i) mx = std::max(mx, std::abs(a.val[k]));
    if (mx > 0.0) {
      for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        if (a.col[k] != i && std::abs(a.val[k]) >= theta * mx) {
          s.col.push_back(a.col[k]);
          s.val.push_back(1.0);
        }
      }
    }
    s.row_ptr[i + 1] = static_cast<std::int64_t>(s.col.size());
  }
  return s;
}

CoarseSplitting ruge_stueben_splitting(const CsrMatrix& strength, bool second_pass) {
  enum : char { undecided = 0, coarse = 1, fine = 2 };
  const Index n = strength.rows;
  const CsrMatrix st = transpose(strength);  // row i: points that strongly depend on i
  std::vector<Index> lambda(static_cast<std::size_t>(n));
  std::vector<char> state(static_cast<std::size_t>(n), undecided);
  // Undecided points sit in doubly linked buckets keyed by measure.
  Index max_measure = 0;
  for (Index i = 0; i < n; ++i) {
    lambda[i] = static_cast<Index>(st.row_ptr[i + 1] - st.row_ptr[i]);
    // Each dependent turning F adds one, so a measure at most doubles.
    max_measure = std::max(max_measure, 2 * lambda[i]);
  }
  std::vector<Index> head(static_cast<std::size_t>(max_measure) + 1, -1);
  std::vector<Index> next(static_cast<std::size_t>(n), -1), prev(static_cast<std::size_t>(n), -1);
  auto insert = [&](Index i) {
    const Index b = lambda[i];
    prev[i] = -1;
    next[i] = head[b];
    if (head[b] >= 0) prev[head[b]] = i;
    head[b] = i;
  };
  auto remove = [&](Index i) {
    if (prev[i] >= 0) next[prev[i]] = next[i];
    else head[lambda[i]] = next[i];
    if (next[i] >= 0) prev[next[i]] = prev[i];
  };
  for (Index i = n - 1; i >= 0; --i) {
    if (lambda[i] == 0 && strength.row_ptr[i + 1] == strength.row_ptr[i]) {
      state[i] = fine;  // isolated
    } else {
      insert(i);
    }
  }
  Index top = max_measure;
  while (true) {
    while (top > 0 && head[top] < 0) --top;
    if (top == 0) break;
    const Index i = head[top];
    remove(i);
    state[i] = coarse;
    for (Index j : st.row_cols(i)) {
      if (state[j] != undecided) continue;
      remove(j);
      state[j] = fine;
      for (Index k : strength.row_cols(j)) {
        if (state[k] != undecided) continue;
        remove(k);
        ++lambda[k];
        insert(k);
        top = std::max(top, lambda[k]);
      }
    }
    for (Index j : strength.row_cols(i)) {
      if (state[j] == undecided && lambda[j] > 0) {
        remove(j);
        --lambda[j];
        insert(j);
      }
    }
  }
  // Points influencing nobody: coarse only if they would otherwise have no
  // strong coarse neighbour to interpolate from.
  for (Index i = 0; i < n; ++i) {
    if (state[i] != undecided) continue;
    bool has_c = false;
    for (Index j : strength.row_cols(i)) has_c = has_c || state[j] == coarse;
    state[i] = (has_c || strength.row_cols(i).empty()) ? fine : coarse;
  }
  if (second_pass) {
    // Every strong F-F pair must share a strong C point; otherwise promote
    // the neighbour, or the point itself when a second neighbour fails too.
    std::vector<Index> marker(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
      if (state[i] != fine) continue;
      for (Index j : strength.row_cols(i))
        if (state[j] == coarse) marker[j] = i;
      Index tentative = -1;
      for (Index j : strength.row_cols(i)) {
        if (state[j] != fine || j == tentative) continue;
        bool common = false;
        for (Index k : strength.row_cols(j)) common = common || marker[k] == i;
        if (common) continue;
        if (tentative >= 0) {
          state[i] = coarse;
          tentative = -1;
          break;
        }
        tentative = j;
        marker[j] = i;
      }
      if (tentative >= 0) state[tentative] = coarse;
    }
  }
  CoarseSplitting split;
  split.is_coarse.resize(static_cast<std::size_t>(n));
  split.coarse_index.assign(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    split.is_coarse[i] = state[i] == coarse;
    if (split.is_coarse[i]) split.coarse_index[i] = split.num_coarse++;
  }
  return split;
}

CsrMatrix direct_interpolation(const CsrMatrix& a, const CsrMatrix& strength, const CoarseSplitting& split) {
  CsrMatrix p;
  p.rows = a.rows;
  p.cols = split.num_coarse;
  p.row_ptr.assign(static_cast<std::size_t>(a.rows) + 1, 0);
  std::vector<char> strong(static_cast<std::size_t>(a.rows), 0);
  for (Index i = 0; i < a.rows; ++i) {
    if (split.is_coarse[i]) {
      p.col.push_back(split.coarse_index[i]);
      p.val.push_back(1.0);
      p.row_ptr[i + 1] = static_cast<std::int64_t>(p.col.size());
      continue;
    }
    for (Index j : strength.row_cols(i)) strong[j] = 1;
    double diag = 0.0, neg_all = 0.0, pos_all = 0.0, neg_c = 0.0, pos_c = 0.0;
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const Index j = a.col[k];
      const double v = a.val[k];
      if (j == i) {
        diag = v;
        continue;
      }
      (v < 0 ? neg_all : pos_all) += v;
      if (strong[j] && split.is_coarse[j]) (v < 0 ? neg_c : pos_c) += v;
    }
    const double alpha = neg_c != 0.0 ? neg_all / neg_c : 0.0;
    double beta = 0.0;
    if (pos_c != 0.0) {
      beta = pos_all / pos_c;
    } else {
      diag += pos_all;
    }
    if (diag != 0.0) {
      for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        const Index j = a.col[k];
        if (j == i || !strong[j] || !split.is_coarse[j]) continue;
        const double v = a.val[k];
        const double w = -(v < 0 ? alpha : beta) * v / diag;
        if (w != 0.0) {
          p.col.push_back(split.coarse_index[j]);
          p.val.push_back(w);
        }
      }
    }
    // Coarse indices follow fine ordering, so each row is already sorted.
    p.row_ptr[i + 1] = static_cast<std::int64_t>(p.col.size());
    for (Index j : strength.row_cols(i)) strong[j] = 0;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

// Scalar node graph of a block matrix: entry (I, J) is the Frobenius norm of
// block (I, J).
CsrMatrix condense(const CsrMatrix& a, int b) {
  if (b == 1) {
    CsrMatrix c = a;
    for (double& v : c.val) v = std::abs(v);
    return c;
  }
  const Index nodes = a.rows / b;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(a.nnz()));
  for (Index i = 0; i < a.rows; ++i)
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      trips.push_back({i / b, a.col[k] / b, a.val[k] * a.val[k]});
  CsrMatrix c = csr_from_triplets(nodes, nodes, std::move(trips));
  for (double& v : c.val) v = std::sqrt(v);
  return c;
}

}  // namespace

std::vector<Index> aggregate_nodes(const CsrMatrix& a, int block_size, double theta, Index* num_aggregates) {
  const CsrMatrix c = condense(a, block_size);
  const Index nodes = c.rows;
  const Vector d = c.diagonal();
  // Strong neighbour lists.
  std::vector<std::vector<Index>> nbr(static_cast<std::size_t>(nodes));
  for (Index i = 0; i < nodes; ++i) {
    for (std::int64_t k = c.row_ptr[i]; k < c.row_ptr[i + 1]; ++k) {
      const Index j = c.col[k];
      if (j != i && c.val[k] > 0.0 && c.val[k] >= theta * std::sqrt(d[i] * d[j])) nbr[i].push_back(j);
    }
  }
  std::vector<Index> agg(static_cast<std::size_t>(nodes), -1);
  Index count = 0;
  // Phase 1: seed aggregates from nodes whose whole neighbourhood is free.
  for (Index i = 0; i < nodes; ++i) {
    if (agg[i] >= 0 || nbr[i].empty()) continue;
    bool free = true;
    for (Index j : nbr[i]) free = free && agg[j] < 0;
    if (!free) continue;
    agg[i] = count;
    for (Index j : nbr[i]) agg[j] = count;
    ++count;
  }
  // Phase 2: attach leftovers to the strongest neighbouring phase-1 aggregate.
  const std::vector<Index> seeded = agg;
  for (Index i = 0; i < nodes; ++i) {
    if (agg[i] >= 0) continue;
    double best = -1.0;
    for (std::int64_t k = c.row_ptr[i]; k < c.row_ptr[i + 1]; ++k) {
      const Index j = c.col[k];
      if (j == i || seeded[j] < 0) continue;
      if (std::find(nbr[i].begin(), nbr[i].end(), j) == nbr[i].end()) continue;
      if (c.val[k] > best) {
        best = c.val[k];
        agg[i] = seeded[j];
      }
    }
  }
  // Phase 3: whatever is still free groups with its free strong neighbours.
  for (Index i = 0; i < nodes; ++i) {
    if (agg[i] >= 0 || nbr[i].empty()) continue;
    std::vector<Index> members{i};
    for (Index j : nbr[i])
      if (agg[j] < 0) members.push_back(j);
    if (members.size() < 2) continue;
    for (Index j : members) agg[j] = count;
    ++count;
  }
  if (num_aggregates != nullptr) *num_aggregates = count;
  return agg;
}

// ---------------------------------------------------------------------------
// Hierarchy

namespace {

void prepare_smoother(AmgHierarchy::Level& lv, const SmootherSpec& spec) {
  lv.inv_diag = lv.a.diagonal();
  for (Index i = 0; i < lv.a.rows; ++i) {
    if (!(lv.inv_diag[i] > 0.0)) {
      throw SolverError("amg: nonpositive diagonal entry " + std::to_string(lv.inv_diag[i]) + " in row " +
                        std::to_string(i));
    }
    lv.inv_diag[i] = 1.0 / lv.inv_diag[i];
  }
  if (spec.type == SmootherType::chebyshev) {
    lv.lambda_max = spec.eig_factor * estimate_lambda_max(lv.a, lv.inv_diag, spec.eig_iterations);
  }
}

}  // namespace

void AmgHierarchy::finalize() {
  for (std::size_t l = 0; l + 1 < levels_.size(); ++l) prepare_smoother(levels_[l], options_.smoother);
  const CsrMatrix& ac = levels_.back().a;
  if (ac.rows > options_.max_dense) {
    throw SolverError("amg: coarsest level has " + std::to_string(ac.rows) + " rows, above the dense limit " +
                      std::to_string(options_.max_dense));
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(ac.rows, ac.rows);
  for (Index i = 0; i < ac.rows; ++i)
    for (std::int64_t k = ac.row_ptr[i]; k < ac.row_ptr[i + 1]; ++k) dense(i, ac.col[k]) += ac.val[k];
  if (ac.rows == 0) {
    coarse_kind_ = "empty";
    return;
  }
  coarse_llt_.compute(dense);
  if (coarse_llt_.info() == Eigen::Success) {
    coarse_kind_ = "cholesky";
    return;
  }
  coarse_ldlt_.compute(dense);
  const double scale = dense.diagonal().cwiseAbs().maxCoeff();
  if (coarse_ldlt_.info() == Eigen::Success &&
      coarse_ldlt_.vectorD().cwiseAbs().minCoeff() > 1e-12 * scale) {
    coarse_kind_ = "ldlt";
    return;
  }
  // Singular coarse operator (e.g. no constraints): pseudo-inverse.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (dense + dense.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cut = 1e-12 * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = ev.unaryExpr([cut](double v) { return std::abs(v) > cut ? 1.0 / v : 0.0; });
  coarse_pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  coarse_kind_ = "pseudo-inverse";
}

void AmgHierarchy::smooth(const Level& lv, std::span<double> x, std::span<const double> b, bool pre) const {
  const SmootherSpec& s = options_.smoother;
  switch (s.type) {
    case SmootherType::gauss_seidel:
      gauss_seidel_smoother(lv.a, x, b, s.sweeps,
                            s.symmetric ? SweepDirection::symmetric
                                        : (pre ? SweepDirection::forward : SweepDirection::backward),
                            num_threads());
      break;
    case SmootherType::chebyshev:
      for (int k = 0; k < s.sweeps; ++k) chebyshev_smoother(lv.a, lv.inv_diag, lv.lambda_max, s.chebyshev, x, b);
      break;
    case SmootherType::jacobi:
      for (int k = 0; k < s.sweeps; ++k) {
        Vector r(x.size());
        residual(lv.a, x, b, r);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += s.jacobi_omega * lv.inv_diag[i] * r[i];
      }
      break;
  }
}

void AmgHierarchy::cycle(std::size_t l, std::span<const double> r, std::span<double> z) const {
  const Level& lv = levels_[l];
  if (l + 1 == levels_.size()) {
    if (lv.a.rows == 0) return;
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), lv.a.rows);
    Eigen::Map<Eigen::VectorXd> zv(z.data(), lv.a.rows);
    if (coarse_kind_ == "cholesky") {
      zv = coarse_llt_.solve(rv);
    } else if (coarse_kind_ == "ldlt") {
      zv = coarse_ldlt_.solve(rv);
    } else {
      zv = coarse_pinv_ * rv;
    }
    return;
  }
  std::fill(z.begin(), z.end(), 0.0);
  smooth(lv, z, r, true);
  Vector res(r.size());
  residual(lv.a, z, r, res);
  const Level& next = levels_[l + 1];
  Vector rc(static_cast<std::size_t>(next.a.rows)), ec(rc.size());
  spmv(lv.r, res, rc);
  cycle(l + 1, rc, ec);
  Vector corr(r.size());
  spmv(lv.p, ec, corr);
  axpy(1.0, corr, z);
  smooth(lv, z, r, false);
}

void AmgHierarchy::apply(std::span<const double> r, std::span<double> z) const {
  if (r.size() != static_cast<std::size_t>(size()) || z.size() != r.size()) {
    throw ValidationError("amg: dimension mismatch");
  }
  cycle(0, r, z);
}

Vector vcycle(const AmgHierarchy& h, std::span<const double> r) {
  Vector z(r.size());
  h.apply(r, z);
  return z;
}

std::vector<AmgLevelInfo> AmgHierarchy::level_info() const {
  std::vector<AmgLevelInfo> out;
  for (const Level& lv : levels_) out.push_back({lv.a.rows, lv.a.nnz(), lv.a.block_size});
  return out;
}

double AmgHierarchy::operator_complexity() const {
  if (levels_.empty() || levels_.front().a.nnz() == 0) return 0.0;
  double sum = 0.0;
  for (const Level& lv : levels_) sum += static_cast<double>(lv.a.nnz());
  return sum / static_cast<double>(levels_.front().a.nnz());
}

double AmgHierarchy::grid_complexity() const {
  if (levels_.empty() || levels_.front().a.rows == 0) return 0.0;
  double sum = 0.0;
  for (const Level& lv : levels_) sum += lv.a.rows;
  return sum / levels_.front().a.rows;
}

std::string AmgHierarchy::diagnostics() const {
  std::ostringstream os;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const Level& lv = levels_[l];
    os << "{\"level\": " << l << ", \"size\": " << lv.a.rows << ", \"nnz\": " << lv.a.nnz()
       << ", \"block_size\": " << lv.a.block_size;
    if (options_.smoother.type == SmootherType::chebyshev && l + 1 < levels_.size())
      os << ", \"lambda_max\": " << lv.lambda_max;
    os << "}\n";
  }
  os << "{\"levels\": " << levels_.size() << ", \"grid_complexity\": " << grid_complexity()
     << ", \"operator_complexity\": " << operator_complexity() << ", \"coarse_solver\": \"" << coarse_kind_
     << "\"}\n";
  return os.str();
}

namespace {

// Removes entries below 1e-14 of their row's largest magnitude; these are
// cancellation residue of the triple product.
void drop_negligible(CsrMatrix& a) {
  std::int64_t out = 0;
  std::int64_t start = 0;
  for (Index i = 0; i < a.rows; ++i) {
    const std::int64_t end = a.row_ptr[i + 1];
    double mx = 0.0;
    for (std::int64_t k = start; k < end; ++k) mx = std::max(mx, std::abs(a.val[k]));
    for (std::int64_t k = start; k < end; ++k) {
      if (a.col[k] != i && std::abs(a.val[k]) <= 1e-14 * mx) continue;
      a.col[out] = a.col[k];
      a.val[out] = a.val[k];
      ++out;
    }
    start = end;
    a.row_ptr[i + 1] = out;
  }
  a.col.resize(static_cast<std::size_t>(out));
  a.val.resize(static_cast<std::size_t>(out));
  a.symmetric_structure = false;
}

void truncate_rows(CsrMatrix& p, double factor, int max_elements) {
  std::int64_t out = 0;
  std::int64_t start = 0;
  std::vector<double> mags;
  for (Index i = 0; i < p.rows; ++i) {
    const std::int64_t end = p.row_ptr[i + 1];
    double mx = 0.0, sum = 0.0, kept = 0.0;
    mags.clear();
    for (std::int64_t k = start; k < end; ++k) {
      mx = std::max(mx, std::abs(p.val[k]));
      sum += p.val[k];
      mags.push_back(std::abs(p.val[k]));
    }
    double cut = factor * mx;
    std::int64_t budget = end - start;
    if (max_elements > 0 && static_cast<std::int64_t>(mags.size()) > max_elements) {
      std::nth_element(mags.begin(), mags.begin() + (max_elements - 1), mags.end(), std::greater<>());
      cut = std::max(cut, mags[max_elements - 1]);
      budget = max_elements;
    }
    const std::int64_t first = out;
    for (std::int64_t k = start; k < end; ++k) {
      // ties at the cut are taken in column order until the budget is spent
      if (std::abs(p.val[k]) < cut || out - first >= budget) continue;
      p.col[out] = p.col[k];
      p.val[out] = p.val[k];
      kept += p.val[k];
      ++out;
    }
    if (kept != 0.0)
      for (std::int64_t k = first; k < out; ++k) p.val[k] *= sum / kept;
    start = end;
    p.row_ptr[i + 1] = out;
  }
  p.col.resize(static_cast<std::size_t>(out));
  p.val.resize(static_cast<std::size_t>(out));
}

void check_square(const CsrMatrix& a) {
  if (a.rows != a.cols) throw ValidationError("amg: matrix must be square");
}

void check_progress(Index n, Index nc, std::size_t level) {
  if (nc > 0 && static_cast<double>(nc) > 0.9 * n) {
    throw SolverError("amg: coarsening stagnated at level " + std::to_string(level) + " (" + std::to_string(n) +
                      " -> " + std::to_string(nc) + " unknowns)");
  }
}

}  // namespace

AmgHierarchy build_classical(const CsrMatrix& a, const AmgOptions& options) {
  check_square(a);
  if (a.block_size != 1) throw ValidationError("amg: classical coarsening requires a scalar operator");
  AmgHierarchy h;
  h.options_ = options;
  h.levels_.push_back({a, {}, {}, {}, 0.0});
  while (h.levels_.back().a.rows > options.coarse_size &&
         static_cast<int>(h.levels_.size()) < options.max_levels) {
    AmgHierarchy::Level& lv = h.levels_.back();
    const CsrMatrix s = classical_strength(lv.a, options.strength_threshold);
    const int level = static_cast<int>(h.levels_.size()) - 1;
    const CoarseSplitting split = ruge_stueben_splitting(s, level < options.second_pass_levels);
    if (split.num_coarse == 0) break;
    check_progress(lv.a.rows, split.num_coarse, h.levels_.size() - 1);
    lv.p = direct_interpolation(lv.a, s, split);
    if (options.truncation > 0.0 || options.max_interp_elements > 0) {
      truncate_rows(lv.p, options.truncation, options.max_interp_elements);
    }
    lv.r = transpose(lv.p);
    CsrMatrix coarse = galerkin_product(lv.a, lv.p);
    drop_negligible(coarse);
    coarse.block_size = 1;
    h.levels_.push_back({std::move(coarse), {}, {}, {}, 0.0});
  }
  h.finalize();
  return h;
}

AmgHierarchy build_smoothed_aggregation(const CsrMatrix& a, const NearNullspace& nullspace,
                                        const AmgOptions& options) {
  check_square(a);
  if (nullspace.n != a.rows) throw ValidationError("amg: nullspace length does not match the operator");
  if (nullspace.k < 1) throw ValidationError("amg: empty nullspace");
  if (a.rows % a.block_size != 0) throw ValidationError("amg: size not a multiple of the block size");

  AmgHierarchy h;
  h.options_ = options;
  h.levels_.push_back({a, {}, {}, {}, 0.0});
  NearNullspace ns = nullspace;
  // Rows eliminated by Dirichlet conditions carry no near-nullspace content.
  for (Index i = 0; i < a.rows; ++i) {
    bool decoupled = true;
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1] && decoupled; ++k)
      decoupled = a.col[k] == i || a.val[k] == 0.0;
    if (decoupled)
      for (int j = 0; j < ns.k; ++j) ns.vector(j)[i] = 0.0;
  }

  while (h.levels_.back().a.rows > options.coarse_size &&
         static_cast<int>(h.levels_.size()) < options.max_levels) {
    AmgHierarchy::Level& lv = h.levels_.back();
    const int b = lv.a.block_size;
    const int k = ns.k;
    Index n_agg = 0;
    std::vector<Index> agg = aggregate_nodes(lv.a, b, options.strength_threshold, &n_agg);
    const Index nodes = lv.a.rows / b;

    // Aggregates too small to hold the nullspace are dissolved.
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_agg));
    for (Index i = 0; i < nodes; ++i)
      if (agg[i] >= 0) members[agg[i]].push_back(i);
    std::vector<Index> renum(static_cast<std::size_t>(n_agg), -1);
    Index kept = 0;
    for (Index g = 0; g < n_agg; ++g)
      if (static_cast<int>(members[g].size()) * b >= k) renum[g] = kept++;
    if (kept == 0) break;
    const Index nc = kept * k;
    check_progress(lv.a.rows, nc, h.levels_.size() - 1);

    // Tentative prolongator and coarse nullspace from local QR.
    std::vector<Triplet> trips;
    NearNullspace coarse_ns;
    coarse_ns.n = nc;
    coarse_ns.k = k;
    coarse_ns.data.assign(static_cast<std::size_t>(nc) * k, 0.0);
    for (Index g = 0; g < n_agg; ++g) {
      if (renum[g] < 0) continue;
      const auto& mem = members[g];
      const Eigen::Index m = static_cast<Eigen::Index>(mem.size()) * b;
      Eigen::MatrixXd local(m, k);
      for (std::size_t q = 0; q < mem.size(); ++q)
        for (int c = 0; c < b; ++c)
          for (int j = 0; j < k; ++j) local(static_cast<Eigen::Index>(q) * b + c, j) = ns.vector(j)[mem[q] * b + c];
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(local);
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
      const Eigen::MatrixXd r = q.transpose() * local;
      const Index base = renum[g] * k;
      for (std::size_t qi = 0; qi < mem.size(); ++qi)
        for (int c = 0; c < b; ++c)
          for (int j = 0; j < k; ++j) {
            const double v = q(static_cast<Eigen::Index>(qi) * b + c, j);
            if (v != 0.0) trips.push_back({mem[qi] * b + c, base + j, v});
          }
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) coarse_ns.vector(j)[base + i] = r(i, j);
    }
    const CsrMatrix t = csr_from_triplets(lv.a.rows, nc, std::move(trips));

    // P = (I - omega D^{-1} A) T
    Vector inv_diag = lv.a.diagonal();
    for (double& d : inv_diag) {
      if (!(d > 0.0)) throw SolverError("amg: nonpositive diagonal entry in smoothed aggregation");
      d = 1.0 / d;
    }
    const double lmax = estimate_lambda_max(lv.a, inv_diag, options.smoother.eig_iterations);
    const double omega = 4.0 / (3.0 * lmax);
    CsrMatrix at = multiply(lv.a, t);
    std::vector<Triplet> ptrips;
    ptrips.reserve(static_cast<std::size_t>(at.nnz() + t.nnz()));
    for (Index i = 0; i < lv.a.rows; ++i) {
      for (std::int64_t q = t.row_ptr[i]; q < t.row_ptr[i + 1]; ++q) ptrips.push_back({i, t.col[q], t.val[q]});
      for (std::int64_t q = at.row_ptr[i]; q < at.row_ptr[i + 1]; ++q)
        ptrips.push_back({i, at.col[q], -omega * inv_diag[i] * at.val[q]});
    }
    lv.p = csr_from_triplets(lv.a.rows, nc, std::move(ptrips));
    lv.r = transpose(lv.p);
    CsrMatrix coarse = galerkin_product(lv.a, lv.p);
    coarse.block_size = k;
    ns = std::move(coarse_ns);
    h.levels_.push_back({std::move(coarse), {}, {}, {}, 0.0});
  }
  h.finalize();
  return h;
}

}  // namespace tfem
