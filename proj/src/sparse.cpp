#include "tfem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace tfem {

std::int64_t CsrMatrix::find(Index i, Index j) const {
  auto first = col.begin() + row_ptr[i];
  auto last = col.begin() + row_ptr[i + 1];
  auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return -1;
  return it - col.begin();
}

double CsrMatrix::at(Index i, Index j) const {
  const std::int64_t k = find(i, j);
  return k < 0 ? 0.0 : val[k];
}

Vector CsrMatrix::diagonal() const {
  Vector d(static_cast<std::size_t>(rows), 0.0);
  for (Index i = 0; i < rows; ++i) d[i] = at(i, i);
  return d;
}

void CsrMatrix::validate() const {
  if (rows < 0 || cols < 0) throw ValidationError("csr: negative dimensions");
  if (row_ptr.size() != static_cast<std::size_t>(rows) + 1 || row_ptr.front() != 0 ||
      row_ptr.back() != static_cast<std::int64_t>(col.size()) || col.size() != val.size()) {
    throw ValidationError("csr: inconsistent array sizes");
  }
  for (Index i = 0; i < rows; ++i) {
    if (row_ptr[i + 1] < row_ptr[i]) throw ValidationError("csr: row offsets decrease");
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col[k] < 0 || col[k] >= cols) throw ValidationError("csr: column index out of range");
      if (k > row_ptr[i] && col[k] <= col[k - 1]) {
        throw ValidationError("csr: columns not strictly increasing in row " + std::to_string(i));
      }
    }
  }
  if (symmetric_structure) {
    if (rows != cols) throw ValidationError("csr: symmetric structure on a rectangular matrix");
    for (Index i = 0; i < rows; ++i)
      for (Index j : row_cols(i))
        if (find(j, i) < 0) throw ValidationError("csr: structure flagged symmetric but is not");
  }
}

void CsrMatrix::zero_values() { std::fill(val.begin(), val.end(), 0.0); }

CsrMatrix csr_from_triplets(Index rows, Index cols, std::vector<Triplet> entries) {
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw ValidationError("csr: triplet index out of range");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0 && entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col) {
      m.val.back() += entries[k].value;
      continue;
    }
    m.col.push_back(entries[k].col);
    m.val.push_back(entries[k].value);
    ++m.row_ptr[entries[k].row + 1];
  }
  for (Index i = 0; i < rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  return m;
}

CsrMatrix identity_matrix(Index n) {
  CsrMatrix m;
  m.rows = m.cols = n;
  m.symmetric_structure = true;
  m.row_ptr.resize(static_cast<std::size_t>(n) + 1);
  m.col.resize(static_cast<std::size_t>(n));
  m.val.assign(static_cast<std::size_t>(n), 1.0);
  for (Index i = 0; i <= n; ++i) m.row_ptr[i] = i;
  for (Index i = 0; i < n; ++i) m.col[i] = i;
  return m;
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != static_cast<std::size_t>(a.cols) || y.size() != static_cast<std::size_t>(a.rows)) {
    throw ValidationError("spmv: dimension mismatch (" + std::to_string(a.rows) + "x" +
                          std::to_string(a.cols) + " times " + std::to_string(x.size()) + ")");
  }
  const std::int64_t* rp = a.row_ptr.data();
  const Index* ci = a.col.data();
  const double* v = a.val.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::int64_t k = rp[i]; k < rp[i + 1]; ++k) s += v[k] * x[ci[k]];
    y[i] = s;
  }
}

Vector spmv(const CsrMatrix& a, std::span<const double> x) {
  Vector y(static_cast<std::size_t>(a.rows));
  spmv(a, x, y);
  return y;
}

void residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b,
              std::span<double> r) {
  spmv(a, x, r);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < a.rows; ++i) r[i] = b[i] - r[i];
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t;
  t.rows = a.cols;
  t.cols = a.rows;
  t.block_size = 1;
  t.symmetric_structure = a.symmetric_structure;
  t.row_ptr.assign(static_cast<std::size_t>(t.rows) + 1, 0);
  for (Index j : a.col) ++t.row_ptr[j + 1];
  for (Index i = 0; i < t.rows; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col.resize(a.col.size());
  t.val.resize(a.val.size());
  std::vector<std::int64_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows of A visited in order keep the transposed columns sorted.
  for (Index i = 0; i < a.rows; ++i) {
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const std::int64_t dst = fill[a.col[k]]++;
      t.col[dst] = i;
      t.val[dst] = a.val[k];
    }
  }
  return t;
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols != b.rows) throw ValidationError("multiply: dimension mismatch");
  CsrMatrix c;
  c.rows = a.rows;
  c.cols = b.cols;
  c.row_ptr.assign(static_cast<std::size_t>(c.rows) + 1, 0);
  std::vector<std::int64_t> marker(static_cast<std::size_t>(b.cols), -1);
  std::vector<double> acc(static_cast<std::size_t>(b.cols), 0.0);
  std::vector<Index> row_cols;
  for (Index i = 0; i < a.rows; ++i) {
    row_cols.clear();
    for (std::int64_t ka = a.row_ptr[i]; ka < a.row_ptr[i + 1]; ++ka) {
      const Index k = a.col[ka];
      const double av = a.val[ka];
      for (std::int64_t kb = b.row_ptr[k]; kb < b.row_ptr[k + 1]; ++kb) {
        const Index j = b.col[kb];
        if (marker[j] != i) {
          marker[j] = i;
          acc[j] = 0.0;
          row_cols.push_back(j);
        }
        acc[j] += av * b.val[kb];
      }
    }
    std::sort(row_cols.begin(), row_cols.end());
    for (Index j : row_cols) {
      c.col.push_back(j);
      c.val.push_back(acc[j]);
    }
    c.row_ptr[i + 1] = static_cast<std::int64_t>(c.col.size());
  }
  return c;
}

CsrMatrix galerkin_product(const CsrMatrix& a, const CsrMatrix& p) {
  if (a.rows != a.cols || a.cols != p.rows) throw ValidationError("galerkin_product: dimension mismatch");
  // Row I of P^T A P accumulated directly from the rows of A touched by column I of P.
  const CsrMatrix r = transpose(p);
  CsrMatrix c;
  c.rows = c.cols = p.cols;
  c.row_ptr.assign(static_cast<std::size_t>(c.rows) + 1, 0);
  c.col.reserve(static_cast<std::size_t>(std::max<std::int64_t>(4 * r.nnz(), 1)));
  c.val.reserve(c.col.capacity());
  std::vector<Index> marker(static_cast<std::size_t>(p.cols), -1);
  std::vector<double> acc(static_cast<std::size_t>(p.cols), 0.0);
  std::vector<Index> row_cols;
  for (Index ci = 0; ci < r.rows; ++ci) {
    row_cols.clear();
    for (std::int64_t kr = r.row_ptr[ci]; kr < r.row_ptr[ci + 1]; ++kr) {
      const Index i = r.col[kr];
      const double rv = r.val[kr];
      for (std::int64_t ka = a.row_ptr[i]; ka < a.row_ptr[i + 1]; ++ka) {
        const Index k = a.col[ka];
        const double ra = rv * a.val[ka];
        for (std::int64_t kp = p.row_ptr[k]; kp < p.row_ptr[k + 1]; ++kp) {
          const Index j = p.col[kp];
          if (marker[j] != ci) {
            marker[j] = ci;
            acc[j] = 0.0;
            row_cols.push_back(j);
          }
          acc[j] += ra * p.val[kp];
        }
      }
    }
    std::sort(row_cols.begin(), row_cols.end());
    for (Index j : row_cols) {
      c.col.push_back(j);
      c.val.push_back(acc[j]);
    }
    c.row_ptr[ci + 1] = static_cast<std::int64_t>(c.col.size());
  }
  c.symmetric_structure = a.symmetric_structure;
  return c;
}

double frobenius_norm(const CsrMatrix& a) { return norm2(a.val); }

double inf_norm(const CsrMatrix& a) {
  double m = 0.0;
  for (Index i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (double v : a.row_vals(i)) s += std::abs(v);
    m = std::max(m, s);
  }
  return m;
}

void write_matrix_market(const CsrMatrix& a, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < a.rows; ++i)
    for (std::int64_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      out << i + 1 << ' ' << a.col[k] + 1 << ' ' << a.val[k] << '\n';
}

void write_matrix_market(const CsrMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  write_matrix_market(a, out);
}

CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("matrix market: empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
  };
  if (tag != "%%MatrixMarket" || lower(object) != "matrix" || lower(format) != "coordinate") {
    throw ValidationError("matrix market: expected a coordinate matrix banner");
  }
  field = lower(field);
  symmetry = lower(symmetry);
  if (field != "real" && field != "integer") throw ValidationError("matrix market: unsupported field " + field);
  if (symmetry != "general" && symmetry != "symmetric") {
    throw ValidationError("matrix market: unsupported symmetry " + symmetry);
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream size_line(line);
  long long rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols >> entries)) throw ValidationError("matrix market: bad size line");
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(symmetry == "symmetric" ? 2 * entries : entries));
  for (long long k = 0; k < entries; ++k) {
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw ValidationError("matrix market: truncated entry list");
    trips.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), v});
    if (symmetry == "symmetric" && i != j) trips.push_back({static_cast<Index>(j - 1), static_cast<Index>(i - 1), v});
  }
  return csr_from_triplets(static_cast<Index>(rows), static_cast<Index>(cols), std::move(trips));
}

CsrMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_matrix_market(in);
}

}  // namespace tfem
