#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "leafnav/net.hpp"

namespace leafnav {

enum class PathStatus { Converged, Exhausted, Stalled };
std::string to_string(PathStatus status);

struct PathStep {
  double dist = 0.0;     // to the destination (horizontal) / from the start (walk)
  int pred = 0;          // argmax class
  double max_prob = 0.0;
  double step_kl = 0.0;  // KL(p(x_t) || p(x_{t-1})), 0 at t=0
  int soft_rank = 0;     // of G(x_t, w)
};

struct PathRecord {
  std::vector<std::vector<double>> points;  // x_0 .. x_T
  std::vector<PathStep> steps;              // one entry per point
  PathStatus status = PathStatus::Exhausted;
  double alpha = 0.0;
  int max_steps = 0;
  std::uint64_t seed = 0;
  double stop_tol = 0.0;
  // Steps where the distance to the destination grew although the step was
  // taken and alpha <= previous distance; expected empty, logged not fixed.
  std::vector<int> monotone_violations;
};

// Algorithm: at each point project d - x onto D_x (the row space of the
// input Jacobian) and step alpha along the normalized projection. Halts
// "converged" at dist <= stop_tol, "stalled" below the 1e-12 projection
// floor, "exhausted" after max_steps. Non-convergence is a status: paths
// from off-leaf starts are expected to fail to reach the destination.
PathRecord horizontal_path(const NetParams& params, std::span<const double> source,
                           std::span<const double> destination, double alpha, int max_steps,
                           double stop_tol);

// One fixed random unit direction from the seed, re-projected onto
// ker G(x_t,w) at every step: crosses leaves while predictions stay put.
PathRecord kernel_walk(const NetParams& params, std::span<const double> x0,
                       std::uint64_t seed, double alpha, int max_steps);

// A unit vector in ker G at x, from the given stream; used to leave the
// data leaf before an off-leaf path experiment.
std::vector<double> kernel_noise(const NetParams& params, std::span<const double> x,
                                 std::uint64_t seed);

struct Strip {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 1 byte per pixel
  std::vector<int> frame_t;
  std::vector<double> frame_max_prob;
};

// Renders every stride-th point side by side (values clipped to [0,1],
// 1-pixel white separators). rows*cols must equal the point dimension;
// the two-argument form requires a perfect square.
Strip path_to_strip(const PathRecord& record, int stride);
Strip path_to_strip(const PathRecord& record, int stride, int rows, int cols);

void save_path_csv(const PathRecord& record, const std::filesystem::path& path);
// Flat binary sidecar: u64 T, u64 n, then (T+1)*n little-endian doubles.
void save_path_points(const PathRecord& record, const std::filesystem::path& path);
void save_strip_csv(const Strip& strip, const std::filesystem::path& path);

}  // namespace leafnav
