#include "leafnav/paths.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "leafnav/geometry.hpp"
#include "leafnav/io.hpp"
#include "leafnav/rng.hpp"

namespace leafnav {

namespace {

constexpr double kStallThreshold = 1e-12;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

PathStep make_step(const NetParams& params, std::span<const double> x, double dist,
                   std::span<const double> log_probs_prev) {
  PathStep step;
  step.dist = dist;
  const std::vector<double> log_probs = log_softmax(forward(params, x));
  const auto best = std::max_element(log_probs.begin(), log_probs.end());
  step.pred = static_cast<int>(best - log_probs.begin());
  step.max_prob = std::exp(*best);
  step.step_kl =
      log_probs_prev.empty() ? 0.0 : kl_from_log_probs(log_probs, log_probs_prev);
  step.soft_rank = spectrum(local_data_matrix(params, x)).soft_rank;
  return step;
}

}  // namespace

std::string to_string(PathStatus status) {
  switch (status) {
    case PathStatus::Converged: return "converged";
    case PathStatus::Exhausted: return "exhausted";
    case PathStatus::Stalled: return "stalled";
  }
  return "unknown";
}

PathRecord horizontal_path(const NetParams& params, std::span<const double> source,
                           std::span<const double> destination, double alpha, int max_steps,
                           double stop_tol) {
  if (source.size() != destination.size())
    throw std::runtime_error("horizontal_path: source/destination dimension mismatch");
  if (static_cast<int>(source.size()) != params.input_dim())
    throw std::runtime_error("horizontal_path: point dimension does not match net");
  if (alpha <= 0.0) throw std::runtime_error("horizontal_path: alpha must be > 0");
  if (max_steps < 0) throw std::runtime_error("horizontal_path: max_steps must be >= 0");

  PathRecord rec;
  rec.alpha = alpha;
  rec.max_steps = max_steps;
  rec.stop_tol = stop_tol;

  std::vector<double> x(source.begin(), source.end());
  double dist = distance(x, destination);
  rec.points.push_back(x);
  rec.steps.push_back(make_step(params, x, dist, {}));
  if (dist <= stop_tol) {
    rec.status = PathStatus::Converged;
    return rec;
  }

  std::vector<double> pointing(x.size());
  for (int t = 1; t <= max_steps; ++t) {
    const InputJacobian jac = input_jacobian(params, x);
    for (std::size_t k = 0; k < x.size(); ++k) pointing[k] = destination[k] - x[k];
    const std::vector<double> v = project_onto_distribution(pointing, jac);
    const double vnorm = norm(v);
    if (vnorm < kStallThreshold) {
      rec.status = PathStatus::Stalled;
      return rec;
    }
    const std::vector<double> log_probs_prev = log_softmax(forward(params, x));
    const double prev_dist = dist;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += alpha * v[k] / vnorm;
    dist = distance(x, destination);
    rec.points.push_back(x);
    rec.steps.push_back(make_step(params, x, dist, log_probs_prev));
    if (dist > prev_dist && alpha <= prev_dist) rec.monotone_violations.push_back(t);
    if (dist <= stop_tol) {
      rec.status = PathStatus::Converged;
      return rec;
    }
  }
  rec.status = PathStatus::Exhausted;
  return rec;
}

PathRecord kernel_walk(const NetParams& params, std::span<const double> x0,
                       std::uint64_t seed, double alpha, int max_steps) {
  if (static_cast<int>(x0.size()) != params.input_dim())
    throw std::runtime_error("kernel_walk: point dimension does not match net");
  if (alpha <= 0.0) throw std::runtime_error("kernel_walk: alpha must be > 0");

  PathRecord rec;
  rec.alpha = alpha;
  rec.max_steps = max_steps;
  rec.seed = seed;

  Rng rng = Rng::stream(seed, "kernel_walk");
  std::vector<double> direction = rng.gaussian_vector(x0.size());
  const double dnorm = norm(direction);
  for (auto& v : direction) v /= dnorm;

  std::vector<double> x(x0.begin(), x0.end());
  rec.points.push_back(x);
  rec.steps.push_back(make_step(params, x, 0.0, {}));

  for (int t = 1; t <= max_steps; ++t) {
    const InputJacobian jac = input_jacobian(params, x);
    const std::vector<double> v = project_onto_kernel(direction, jac);
    const double vnorm = norm(v);
    if (vnorm < kStallThreshold) {
      rec.status = PathStatus::Stalled;
      return rec;
    }
    const std::vector<double> log_probs_prev = log_softmax(forward(params, x));
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += alpha * v[k] / vnorm;
    rec.points.push_back(x);
    rec.steps.push_back(make_step(params, x, distance(x, x0), log_probs_prev));
  }
  rec.status = PathStatus::Exhausted;
  return rec;
}

std::vector<double> kernel_noise(const NetParams& params, std::span<const double> x,
                                 std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "kernel_noise");
  const InputJacobian jac = input_jacobian(params, x);
  for (int attempt = 0; attempt < 16; ++attempt) {
    const std::vector<double> r = rng.gaussian_vector(x.size());
    std::vector<double> v = project_onto_kernel(r, jac);
    const double vnorm = norm(v);
    if (vnorm > 1e-9) {
      for (auto& c : v) c /= vnorm;
      return v;
    }
  }
  throw std::runtime_error("kernel_noise: kernel projection vanished repeatedly");
}

Strip path_to_strip(const PathRecord& record, int stride) {
  const int n = record.points.empty() ? 0 : static_cast<int>(record.points.front().size());
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n)
    throw std::runtime_error("path_to_strip: dimension " + std::to_string(n) +
                             " is not a perfect square; pass an explicit layout");
  return path_to_strip(record, stride, side, side);
}

Strip path_to_strip(const PathRecord& record, int stride, int rows, int cols) {
  if (record.points.empty()) throw std::runtime_error("path_to_strip: empty record");
  if (stride < 1) throw std::runtime_error("path_to_strip: stride must be >= 1");
  const std::size_t n = record.points.front().size();
  if (std::size_t(rows) * std::size_t(cols) != n)
    throw std::runtime_error("path_to_strip: layout does not match point dimension");

  std::vector<int> frames;
  for (std::size_t t = 0; t < record.points.size(); t += stride)
    frames.push_back(static_cast<int>(t));

  Strip strip;
  const int f = static_cast<int>(frames.size());
  strip.height = rows;
  strip.width = f * cols + (f - 1);  // 1-pixel separator between frames
  strip.pixels.assign(std::size_t(strip.width) * rows, 255);

  for (int fi = 0; fi < f; ++fi) {
    const int t = frames[fi];
    const auto& point = record.points[std::size_t(t)];
    const int x_off = fi * (cols + 1);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double v = std::clamp(point[std::size_t(r) * cols + c], 0.0, 1.0);
        strip.pixels[std::size_t(r) * strip.width + x_off + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    strip.frame_t.push_back(t);
    strip.frame_max_prob.push_back(record.steps[std::size_t(t)].max_prob);
  }
  return strip;
}

void save_path_csv(const PathRecord& record, const std::filesystem::path& path) {
  std::string out = "t,dist,pred,maxp,step_kl,soft_rank\n";
  for (std::size_t t = 0; t < record.steps.size(); ++t) {
    const PathStep& s = record.steps[t];
    out += std::to_string(t);
    out += ',';
    out += format_double(s.dist);
    out += ',';
    out += std::to_string(s.pred);
    out += ',';
    out += format_double(s.max_prob);
    out += ',';
    out += format_double(s.step_kl);
    out += ',';
    out += std::to_string(s.soft_rank);
    out += '\n';
  }
  atomic_write_text(path, out);
}

void save_path_points(const PathRecord& record, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf;
  const std::uint64_t steps = record.points.empty() ? 0 : record.points.size() - 1;
  const std::uint64_t n = record.points.empty() ? 0 : record.points.front().size();
  append_u64le(buf, steps);
  append_u64le(buf, n);
  for (const auto& point : record.points)
    for (double v : point) append_f64le(buf, v);
  atomic_write_bytes(path, buf);
}

void save_strip_csv(const Strip& strip, const std::filesystem::path& path) {
  std::string out = "frame,t,maxp\n";
  for (std::size_t i = 0; i < strip.frame_t.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(strip.frame_t[i]);
    out += ',';
    out += format_double(strip.frame_max_prob[i]);
    out += '\n';
  }
  atomic_write_text(path, out);
}

}  // namespace leafnav
