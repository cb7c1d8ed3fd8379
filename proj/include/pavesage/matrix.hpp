#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pavesage {

/// Row-major dense matrix of doubles. The single numeric container for
/// features, parameters, embeddings and gradients.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Row-wise literal, e.g. DenseMatrix::from_rows({{1, 2}, {3, 4}}).
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);
  static DenseMatrix column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A value together with the gradient of some scalar with respect to it.
struct GradPair {
  DenseMatrix value;
  DenseMatrix grad;
};

// Forward primitives ---------------------------------------------------------

/// a · b, accumulated row by row in ascending k.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a · bᵀ without materialising the transpose.
DenseMatrix matmul_bt(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ · b without materialising the transpose.
DenseMatrix matmul_at(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
void add_inplace(DenseMatrix& acc, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);

DenseMatrix relu(const DenseMatrix& x);
/// Gradient of relu at x given the upstream gradient; zero where x <= 0.
DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& upstream);

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b);
/// Inverse of concat_cols: left block has `left_cols` columns.
std::pair<DenseMatrix, DenseMatrix> split_cols(const DenseMatrix& ab, std::size_t left_cols);

/// Row g of the result is the arithmetic mean of x's rows listed in
/// groups[g]; an empty group yields a zero row.
DenseMatrix mean_rows(const DenseMatrix& x, std::span<const std::vector<std::size_t>> groups);
/// Scatters upstream row g to every member of groups[g], scaled by 1/|g|.
DenseMatrix mean_rows_backward(const DenseMatrix& upstream,
                               std::span<const std::vector<std::size_t>> groups,
                               std::size_t x_rows);

/// Selects rows of x by index (repeats allowed).
DenseMatrix gather_rows(const DenseMatrix& x, std::span<const std::size_t> index);
/// Adjoint of gather_rows: accumulates upstream rows into an x_rows-row matrix.
DenseMatrix gather_rows_backward(const DenseMatrix& upstream, std::span<const std::size_t> index,
                                 std::size_t x_rows);

struct LossGrad {
  double loss = 0.0;
  DenseMatrix grad;  // d loss / d pred
};

/// Mean squared error over all entries, with gradient 2(pred − target)/n.
LossGrad mse_loss(const DenseMatrix& pred, const DenseMatrix& target);

// Gradient checking ------------------------------------------------------------

/// A differentiable scalar function: returns the value and, when `want_grad`
/// is set, the analytic gradient with respect to the argument.
using ScalarFunction = std::function<double(const DenseMatrix& point, DenseMatrix* grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

/// Compares the analytic gradient of f at `point` with central differences
/// of step h. Per entry the error is |a − n| / max(1e-8, |a| + |n|); the
/// maximum is returned. Throws NumericError if f is non-finite anywhere it
/// is evaluated.
GradCheckResult grad_check(const ScalarFunction& f, const DenseMatrix& point, double h = 1e-5);

}  // namespace pavesage
