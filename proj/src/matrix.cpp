#include "pavesage/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pavesage/error.hpp"

namespace pavesage {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix payload of " + std::to_string(data_.size()) +
                     " values does not fit shape " + shape_string());
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  DenseMatrix out(n, m);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m) throw ShapeError("ragged row literal");
    std::copy(row.begin(), row.end(), out.row(r++).begin());
  }
  return out;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
  return DenseMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const DenseMatrix& a, const DenseMatrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  DenseMatrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_bt", a, b);
  return matmul(a, transpose(b));
}

DenseMatrix matmul_at(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_at", a, b);
  DenseMatrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* arow = a.row(r).data();
    const double* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = arow[i];
      if (ari == 0.0) continue;
      double* orow = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += ari * brow[j];
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(DenseMatrix& acc, const DenseMatrix& b) {
  if (acc.rows() != b.rows() || acc.cols() != b.cols()) shape_mismatch("add", acc, b);
  auto dst = acc.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& upstream) {
  if (x.rows() != upstream.rows() || x.cols() != upstream.cols())
    shape_mismatch("relu_backward", x, upstream);
  DenseMatrix out(x.rows(), x.cols());
  auto xv = x.values();
  auto uv = upstream.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? uv[i] : 0.0;
  return out;
}

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) shape_mismatch("concat_cols", a, b);
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

std::pair<DenseMatrix, DenseMatrix> split_cols(const DenseMatrix& ab, std::size_t left_cols) {
  if (left_cols > ab.cols()) {
    throw ShapeError("split_cols: seam " + std::to_string(left_cols) + " beyond " +
                     ab.shape_string());
  }
  DenseMatrix left(ab.rows(), left_cols);
  DenseMatrix right(ab.rows(), ab.cols() - left_cols);
  for (std::size_t r = 0; r < ab.rows(); ++r) {
    auto src = ab.row(r);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(left_cols), left.row(r).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(left_cols), src.end(), right.row(r).begin());
  }
  return {std::move(left), std::move(right)};
}

DenseMatrix mean_rows(const DenseMatrix& x, std::span<const std::vector<std::size_t>> groups) {
  DenseMatrix out(groups.size(), x.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (members.empty()) continue;
    auto dst = out.row(g);
    // Running mean m_j = m_{j-1} + (x_j - m_{j-1}) / j: repeated copies of a
    // row leave every difference at exactly zero, so the mean is that row.
    std::size_t j = 0;
    for (std::size_t idx : members) {
      if (idx >= x.rows()) {
        throw IndexError("mean_rows: row index " + std::to_string(idx) + " out of range for " +
                         x.shape_string());
      }
      auto src = x.row(idx);
      ++j;
      if (j == 1) {
        std::copy(src.begin(), src.end(), dst.begin());
        continue;
      }
      const double inv = 1.0 / static_cast<double>(j);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += (src[c] - dst[c]) * inv;
    }
  }
  return out;
}

DenseMatrix mean_rows_backward(const DenseMatrix& upstream,
                               std::span<const std::vector<std::size_t>> groups,
                               std::size_t x_rows) {
  if (upstream.rows() != groups.size()) {
    throw ShapeError("mean_rows_backward: upstream has " + std::to_string(upstream.rows()) +
                     " rows for " + std::to_string(groups.size()) + " groups");
  }
  DenseMatrix out(x_rows, upstream.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (members.empty()) continue;
    const double inv = 1.0 / static_cast<double>(members.size());
    auto src = upstream.row(g);
    for (std::size_t idx : members) {
      if (idx >= x_rows) throw IndexError("mean_rows_backward: row index out of range");
      auto dst = out.row(idx);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c] * inv;
    }
  }
  return out;
}

DenseMatrix gather_rows(const DenseMatrix& x, std::span<const std::size_t> index) {
  DenseMatrix out(index.size(), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) {
      throw IndexError("gather_rows: row index " + std::to_string(index[i]) +
                       " out of range for " + x.shape_string());
    }
    auto src = x.row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

DenseMatrix gather_rows_backward(const DenseMatrix& upstream, std::span<const std::size_t> index,
                                 std::size_t x_rows) {
  if (upstream.rows() != index.size()) throw ShapeError("gather_rows_backward: row count mismatch");
  DenseMatrix out(x_rows, upstream.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x_rows) throw IndexError("gather_rows_backward: row index out of range");
    auto dst = out.row(index[i]);
    auto src = upstream.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  return out;
}

LossGrad mse_loss(const DenseMatrix& pred, const DenseMatrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    shape_mismatch("mse_loss", pred, target);
  if (pred.size() == 0) throw ShapeError("mse_loss: empty input");
  const auto n = static_cast<double>(pred.size());
  LossGrad out{0.0, DenseMatrix(pred.rows(), pred.cols())};
  auto p = pred.values();
  auto t = target.values();
  auto g = out.grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    out.loss += d * d;
    g[i] = 2.0 * d / n;
  }
  out.loss /= n;
  return out;
}

GradCheckResult grad_check(const ScalarFunction& f, const DenseMatrix& point, double h) {
  DenseMatrix analytic;
  const double f0 = f(point, &analytic);
  if (!std::isfinite(f0)) throw NumericError("grad_check: function is non-finite at the base point");
  if (analytic.rows() != point.rows() || analytic.cols() != point.cols()) {
    throw ShapeError("grad_check: gradient shape " + analytic.shape_string() +
                     " differs from point shape " + point.shape_string());
  }

  GradCheckResult result;
  DenseMatrix probe = point;
  auto pv = probe.values();
  auto av = analytic.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double orig = pv[i];
    pv[i] = orig + h;
    const double fp = f(probe, nullptr);
    pv[i] = orig - h;
    const double fm = f(probe, nullptr);
    pv[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: function is non-finite near entry " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double err = std::abs(av[i] - numeric) / std::max(1e-8, std::abs(av[i]) + std::abs(numeric));
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace pavesage
