#pragma once

#include <Eigen/Dense>

namespace mmlc {

// Argmax with ties resolved toward the lowest index. Every label decision
// in the toolkit routes through this rule.
inline int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp();
  return shifted / shifted.sum();
}

}  // namespace mmlc
