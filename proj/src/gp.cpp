#include "mixflow/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace mixflow {

double GpKernel::operator()(double x, double y) const {
  const double d = x - y;
  return sigma_f * sigma_f * std::exp(-d * d / (2.0 * length_scale * length_scale));
}

GaussianProcess::GaussianProcess(GpKernel kernel, double noise) : kernel_(kernel), noise_(noise) {
  if (noise_ < 0.0) throw Error(ErrorCode::kInvalidInput, "noise must be >= 0");
}

void GaussianProcess::add_sample(double x, double y) {
  if (x < 0.0 || x > 1.0) throw Error(ErrorCode::kInvalidInput, "sample input outside [0, 1]");
  xs_.push_back(x);
  ys_.push_back(y);
  dirty_ = true;
}

void GaussianProcess::clear() {
  xs_.clear();
  ys_.clear();
  dirty_ = true;
}

void GaussianProcess::refit() const {
  const Eigen::Index n = Eigen::Index(xs_.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) gram(i, j) = kernel_(xs_[std::size_t(i)], xs_[std::size_t(j)]);
  gram.diagonal().array() += noise_ * noise_;

  llt_.compute(gram);
  if (llt_.info() != Eigen::Success) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", noise_);
    throw Error(ErrorCode::kNumeric,
                std::string("Gram matrix is not positive definite at noise ") + buf);
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = ys_[std::size_t(i)];
  alpha_ = llt_.solve(y);
  dirty_ = false;
}

Posterior GaussianProcess::posterior(double x) const {
  Posterior post;
  if (xs_.empty()) {
    post.mean = 0.0;
    post.variance = kernel_(x, x);
    return post;
  }
  if (dirty_) refit();

  const Eigen::Index n = Eigen::Index(xs_.size());
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i) kx(i) = kernel_(x, xs_[std::size_t(i)]);

  post.mean = kx.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(kx);
  post.variance = std::max(0.0, kernel_(x, x) - v.squaredNorm());
  return post;
}

double GaussianProcess::ucb(double x, double omega) const {
  if (omega < 0.0) throw Error(ErrorCode::kInvalidInput, "omega must be >= 0");
  const Posterior post = posterior(x);
  return post.mean + omega * std::sqrt(post.variance);
}

namespace {

double omega_at(const OptimizeSettings& s, int t) {
  if (!s.omega_schedule) return s.omega;
  // Standard GP-UCB schedule with delta = 0.1.
  const double pi2 = M_PI * M_PI;
  return std::sqrt(2.0 * std::log(double(t) * double(t) * pi2 / (6.0 * 0.1)));
}

struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  static Standardizer fit(const std::vector<double>& ys) {
    Standardizer st;
    if (ys.size() < 2) return st;
    double sum = 0.0;
    for (double y : ys) sum += y;
    st.mean = sum / double(ys.size());
    double var = 0.0;
    for (double y : ys) var += (y - st.mean) * (y - st.mean);
    const double sd = std::sqrt(var / double(ys.size()));
    st.scale = sd > 1e-12 ? sd : 1.0;
    return st;
  }
};

}  // namespace

OptimizeResult optimize(const Objective& objective, const OptimizeSettings& settings) {
  if (settings.iterations < 1) throw Error(ErrorCode::kInvalidInput, "need at least one iteration");

  OptimizeResult result;
  std::vector<double> xs;
  std::vector<double> ys;

  // Re-sampling a converged argmax adds no information for a deterministic
  // objective but makes the Gram matrix exactly singular, so the fit set
  // drops exact-duplicate inputs.
  const auto fit_gp = [&](GaussianProcess& gp, const Standardizer& st) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      bool seen = false;
      for (std::size_t j = 0; j < i; ++j) {
        if (xs[j] == xs[i]) {
          seen = true;
          break;
        }
      }
      if (!seen) gp.add_sample(xs[i], (ys[i] - st.mean) / st.scale);
    }
  };

  const auto record = [&](int iter, double p, const Posterior& post, double omega) -> bool {
    double value = 0.0;
    try {
      value = objective(p);
    } catch (const std::exception& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      return false;
    }
    xs.push_back(p);
    ys.push_back(value);
    TracePoint tp;
    tp.iter = iter;
    tp.p = p;
    tp.objective = value;
    tp.mean = post.mean;
    tp.variance = post.variance;
    tp.ucb = post.mean + omega * std::sqrt(post.variance);
    result.trace.push_back(tp);
    return true;
  };

  GpKernel kernel = settings.kernel;
  int iter = 0;
  bool alive = true;

  for (double p : settings.initial_design) {
    if (iter >= settings.iterations || !alive) break;
    ++iter;
    // Posterior relative to what has been seen so far, on the raw scale.
    GaussianProcess gp(kernel, settings.noise);
    const Standardizer st = Standardizer::fit(ys);
    fit_gp(gp, st);
    Posterior post = gp.posterior(p);
    post.mean = post.mean * st.scale + st.mean;
    post.variance = post.variance * st.scale * st.scale;
    alive = record(iter, p, post, omega_at(settings, iter));
  }

  while (iter < settings.iterations && alive) {
    ++iter;
    const Standardizer st = Standardizer::fit(ys);
    GaussianProcess gp(kernel, settings.noise);
    fit_gp(gp, st);

    const double omega = omega_at(settings, iter);
    double best_p = 0.0;
    double best_ucb = -1e300;
    Posterior best_post;
    const std::int64_t steps = std::int64_t(std::llround(1.0 / settings.grid_step));
    for (std::int64_t g = 0; g <= steps; ++g) {
      const double p = std::min(1.0, double(g) * settings.grid_step);
      const Posterior post = gp.posterior(p);
      const double v = post.mean + omega * std::sqrt(post.variance);
      if (v > best_ucb) {  // strict: ties keep the smaller p
        best_ucb = v;
        best_p = p;
        best_post = post;
      }
    }
    best_post.mean = best_post.mean * st.scale + st.mean;
    best_post.variance = best_post.variance * st.scale * st.scale;
    alive = record(iter, best_p, best_post, omega);
  }

  if (xs.empty()) {
    if (!result.aborted) {
      result.aborted = true;
      result.abort_reason = "no evaluations completed";
    }
    return result;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (ys[i] > ys[best]) best = i;
  }
  result.best_p = xs[best];
  result.best_objective = ys[best];
  return result;
}

std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::ostringstream csv;
  csv << "iter,p,L,mean,var,ucb\n";
  char buf[160];
  for (const auto& t : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g,%.6g,%.6g\n", t.iter, t.p, t.objective,
                  t.mean, t.variance, t.ucb);
    csv << buf;
  }
  return csv.str();
}

namespace {

// Runs `command` through the shell with `input` on stdin; returns stdout.
// Nonzero exit status is an evaluation failure.
std::string run_child(const std::string& command, const std::string& input) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw Error(ErrorCode::kInvalidInput, "cannot create pipes for the objective command");

  const pid_t pid = fork();
  if (pid < 0) throw Error(ErrorCode::kInvalidInput, "cannot fork the objective command");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  ssize_t written = write(in_pipe[1], input.data(), input.size());
  (void)written;
  close(in_pipe[1]);

  std::string output;
  char buf[4096];
  ssize_t got;
  while ((got = read(out_pipe[0], buf, sizeof(buf))) > 0) output.append(buf, std::size_t(got));
  close(out_pipe[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw Error(ErrorCode::kInvalidInput,
                "objective command failed with status " +
                    std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  return output;
}

}  // namespace

Objective make_external_objective(const std::string& command, double gamma) {
  return [command, gamma](double p) -> double {
    char input[64];
    std::snprintf(input, sizeof(input), "%.9f\n", p);
    const std::string output = run_child(command, input);
    std::istringstream ss(output);
    double first = 0.0;
    if (!(ss >> first))
      throw Error(ErrorCode::kInvalidInput, "objective command printed no number");
    double second = 0.0;
    if (ss >> second) return first + gamma * second;  // "mAP C" pair
    return first;
  };
}

double SyntheticObjective::operator()(double p) const {
  const double accuracy = a_inf - c * std::exp(-k * p);
  const double compression = 32.0 / (1.0 + 7.0 * p) * param_share;
  return accuracy + gamma * compression;
}

}  // namespace mixflow
