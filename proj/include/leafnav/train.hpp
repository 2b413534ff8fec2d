#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "leafnav/dataset.hpp"
#include "leafnav/net.hpp"

namespace leafnav {

class Rng;

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 60;
  int epochs = 10;
  std::uint64_t seed = 0;
  int trace_every = 5;  // batches between trace-of-G measurements
};

struct TraceRow {
  std::uint64_t step = 0;  // SGD updates completed before the measurement
  double trace = 0.0;      // mean over the batch of tr G(x,w)
  double trace_ema = 0.0;  // exponential moving average, decay 0.99
  double loss = 0.0;       // batch mean cross-entropy
};

struct TraceLog {
  std::vector<TraceRow> rows;
  double ema = std::numeric_limits<double>::quiet_NaN();
};

struct Checkpoint {
  std::uint64_t step = 0;
  NetParams params;
  TrainConfig config;
  std::uint64_t dataset_fingerprint = 0;
};

// Stable -s_y + log sum_j e^{s_j}; equals -log_softmax(scores)[y].
double cross_entropy(std::span<const double> scores, int label);

// One pass over the dataset: reshuffles from the rng, steps
// w <- w - lr * mean-batch-gradient, and every trace_every batches appends
// the batch's mean tr G(x,w) (measured before the update).
void sgd_epoch(NetParams& params, const Dataset& data, const TrainConfig& cfg, Rng& rng,
               std::uint64_t& step, TraceLog& log);

double dataset_accuracy(const NetParams& params, const Dataset& data);
double dataset_mean_loss(const NetParams& params, const Dataset& data);

// Versioned binary with trailing CRC32; parameters round-trip bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_trace_csv(const TraceLog& log, const std::filesystem::path& path);

// Picks the epoch (index into epoch_end_steps) whose smoothed trace has
// come back down nearest its initial value from above -- the paper's rule
// for choosing a partially trained model after the trace peak.
int select_checkpoint_epoch(const TraceLog& log,
                            const std::vector<std::uint64_t>& epoch_end_steps);

}  // namespace leafnav
