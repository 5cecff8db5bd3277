#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixflow/error.hpp"

namespace mixflow {

// Squared-exponential kernel on the [0,1] sparsity domain.
struct GpKernel {
  double length_scale = 0.1;
  double sigma_f = 1.0;

  double operator()(double x, double y) const;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;  // clamped at zero against round-off
};

// Zero-mean Gaussian-process regression. The Gram solve goes through a
// Cholesky factorization; a factorization failure reports the noise level it
// failed at instead of silently regularizing.
class GaussianProcess {
 public:
  explicit GaussianProcess(GpKernel kernel = GpKernel{}, double noise = 1e-8);

  void add_sample(double x, double y);
  void clear();
  std::size_t size() const { return xs_.size(); }
  const std::vector<double>& inputs() const { return xs_; }
  const std::vector<double>& outputs() const { return ys_; }

  Posterior posterior(double x) const;
  double ucb(double x, double omega) const;

  double noise() const { return noise_; }
  void set_noise(double noise) { noise_ = noise; dirty_ = true; }

 private:
  void refit() const;

  GpKernel kernel_;
  double noise_;
  std::vector<double> xs_;
  std::vector<double> ys_;

  mutable bool dirty_ = true;
  mutable Eigen::LLT<Eigen::MatrixXd> llt_;  // factor of K + noise^2 I
  mutable Eigen::VectorXd alpha_;            // (K + noise^2 I)^-1 y
};

struct OptimizeSettings {
  GpKernel kernel;
  double noise = 1e-8;
  double omega = 2.0;
  bool omega_schedule = false;  // omega_t = sqrt(2 ln(t^2 pi^2 / 0.6))
  int iterations = 30;          // total objective evaluations, initial design included
  double grid_step = 1e-3;
  std::vector<double> initial_design = {0.0, 0.05, 0.2, 1.0};
  std::uint64_t seed = 0;
};

struct TracePoint {
  int iter = 0;      // 1-based evaluation index
  double p = 0.0;
  double objective = 0.0;
  double mean = 0.0;      // posterior at p before sampling it
  double variance = 0.0;
  double ucb = 0.0;
};

struct OptimizeResult {
  double best_p = 0.0;
  double best_objective = 0.0;
  std::vector<TracePoint> trace;
  bool aborted = false;      // objective failed; trace holds what completed
  std::string abort_reason;
};

using Objective = std::function<double(double)>;

// GP-UCB search over p in [0,1]: evaluate the initial design, then repeatedly
// fit the posterior (objective values standardized internally), take the grid
// argmax of mean + omega * sqrt(variance) with ties toward smaller p, and
// sample there. Returns the best sampled point.
OptimizeResult optimize(const Objective& objective, const OptimizeSettings& settings);

std::string trace_csv(const std::vector<TracePoint>& trace);

// Child-process objective: writes the candidate p to the command's stdin,
// expects "L" or "mAP C" on stdout and exit status 0. C combines via
// L = mAP + gamma * C.
Objective make_external_objective(const std::string& command, double gamma);

// Built-in smooth stand-in for a retrained-accuracy curve.
struct SyntheticObjective {
  double a_inf = 0.72;
  double c = 0.2;
  double k = 20.0;
  double gamma = 0.01;
  double param_share = 1.0;  // N_i / total params for the compression term

  double operator()(double p) const;
};

}  // namespace mixflow
