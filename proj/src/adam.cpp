#include "pavesage/adam.hpp"

#include <cmath>

#include "pavesage/error.hpp"

namespace pavesage {

void Adam::step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const DenseMatrix* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam: parameter layout changed between steps");

  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    if (p.size() != g.size() || p.size() != m.size()) {
      throw ShapeError("Adam: gradient " + grads[i]->shape_string() + " does not match parameter " +
                       params[i]->shape_string());
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

}  // namespace pavesage
