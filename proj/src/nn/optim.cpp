#include "kgsum/nn/optim.hpp"

#include <cmath>

namespace kgsum::nn {

double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (Parameter* p : params) p->grad *= scale;
  }
  return norm;
}

void Adam::step(const std::vector<Parameter*>& params) {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (Parameter* p : params) {
    if (p->adam_m.size() == 0) {
      p->adam_m = Matrix::Zero(p->value.rows(), p->value.cols());
      p->adam_v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * p->grad;
    p->adam_v = cfg_.beta2 * p->adam_v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
    Matrix mhat = p->adam_m / bc1;
    Matrix vhat = p->adam_v / bc2;
    p->value -= cfg_.lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + cfg_.eps).matrix());
  }
}

}  // namespace kgsum::nn
