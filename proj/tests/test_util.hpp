#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "polypnet/rng.hpp"
#include "polypnet/tensor.hpp"

namespace testutil {

// Reference oracles live here, independent of the library paths they check.

/// Naive triple-loop matrix product.
inline polypnet::Tensor matmul_oracle(const polypnet::Tensor& a, const polypnet::Tensor& b) {
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t t = 0; t < k; ++t) {
        out[i * n + j] += a[i * k + t] * b[t * n + j];
      }
    }
  }
  return polypnet::Tensor({m, n}, out);
}

/// Tie-corrected pairwise comparison statistic (positives vs negatives).
inline double mann_whitney_auc(const std::vector<double>& scores,
                               const std::vector<double>& labels) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0.0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        total += 1.0;
      } else if (scores[i] == scores[j]) {
        total += 0.5;
      }
    }
  }
  return total / static_cast<double>(pairs);
}

/// Central finite difference of `loss` w.r.t. one scalar.
inline double central_diff(double& x, const std::function<double()>& loss, double step = 1e-5) {
  const double saved = x;
  x = saved + step;
  const double up = loss();
  x = saved - step;
  const double down = loss();
  x = saved;
  return (up - down) / (2.0 * step);
}

/// Relative-error gradient comparison with a small floor for near-zero pairs.
inline bool grad_close(double analytic, double numeric, double tol = 1e-4) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) <= tol * scale;
}

/// Checks every element of every listed parameter against finite differences.
/// `loss` must re-run the forward pass. Returns the worst relative error.
inline double check_gradients(const std::vector<polypnet::Tensor*>& params,
                              const std::vector<const polypnet::Tensor*>& grads,
                              const std::function<double()>& loss, double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->size(); ++i) {
      const double numeric = central_diff((*params[p])[i], loss, step);
      const double analytic = (*grads[p])[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("polypnet-" + tag + "-" + std::to_string(counter_++) + "-" +
             std::to_string(static_cast<unsigned>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace testutil
