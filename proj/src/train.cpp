#include "leafnav/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "leafnav/geometry.hpp"
#include "leafnav/io.hpp"
#include "leafnav/rng.hpp"

namespace leafnav {

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'E', 'A', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kEmaDecay = 0.99;

}  // namespace

double cross_entropy(std::span<const double> scores, int label) {
  if (label < 0 || label >= static_cast<int>(scores.size()))
    throw std::runtime_error("cross_entropy: label " + std::to_string(label) +
                             " out of range [0," + std::to_string(scores.size()) + ")");
  return -log_softmax(scores)[label];
}

void sgd_epoch(NetParams& params, const Dataset& data, const TrainConfig& cfg, Rng& rng,
               std::uint64_t& step, TraceLog& log) {
  if (data.size() == 0) throw std::runtime_error("sgd_epoch: empty dataset");
  if (cfg.batch_size < 1) throw std::runtime_error("sgd_epoch: batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0))
    throw std::runtime_error("sgd_epoch: learning rate must be finite and >= 0");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  const std::size_t n = data.size();
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
    const std::size_t stop = std::min(n, start + cfg.batch_size);
    const double inv_batch = 1.0 / static_cast<double>(stop - start);

    const bool measure = cfg.trace_every > 0 && batch_index % cfg.trace_every == 0;
    double batch_trace = 0.0;
    double batch_loss = 0.0;

    NetParams grad = NetParams::zeros(params.layer_dims);
    for (std::size_t k = start; k < stop; ++k) {
      const auto x = data.image(order[k]);
      const int y = data.labels[order[k]];
      grad.axpy(inv_batch, param_gradient(params, x, y));
      if (measure) {
        batch_trace += inv_batch * local_data_matrix(params, x).trace();
        batch_loss += inv_batch * cross_entropy(forward(params, x), y);
      }
    }

    if (measure) {
      log.ema = std::isnan(log.ema) ? batch_trace
                                    : kEmaDecay * log.ema + (1.0 - kEmaDecay) * batch_trace;
      log.rows.push_back({step, batch_trace, log.ema, batch_loss});
    }

    params.axpy(-cfg.learning_rate, grad);
    ++step;
  }
}

double dataset_accuracy(const NetParams& params, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> scores = forward(params, data.image(i));
    const auto best = std::max_element(scores.begin(), scores.end());
    if (static_cast<int>(best - scores.begin()) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double dataset_mean_loss(const NetParams& params, const Dataset& data) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    loss += cross_entropy(forward(params, data.image(i)), data.labels[i]);
  return data.size() ? loss / static_cast<double>(data.size()) : 0.0;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 8);
  append_u32le(buf, kCheckpointVersion);
  append_u64le(buf, ckpt.step);
  append_u64le(buf, ckpt.dataset_fingerprint);
  append_f64le(buf, ckpt.config.learning_rate);
  append_u32le(buf, static_cast<std::uint32_t>(ckpt.config.batch_size));
  append_u32le(buf, static_cast<std::uint32_t>(ckpt.config.epochs));
  append_u64le(buf, ckpt.config.seed);
  append_u32le(buf, static_cast<std::uint32_t>(ckpt.config.trace_every));
  append_u32le(buf, static_cast<std::uint32_t>(ckpt.params.layer_dims.size()));
  for (int d : ckpt.params.layer_dims) append_u32le(buf, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < ckpt.params.weights.size(); ++l) {
    for (double v : ckpt.params.weights[l]) append_f64le(buf, v);
    for (double v : ckpt.params.biases[l]) append_f64le(buf, v);
  }
  append_u32le(buf, crc32({buf.data(), buf.size()}));
  atomic_write_bytes(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> buf = read_file_bytes(path);
  if (buf.size() < 12)
    throw std::runtime_error("corrupt checkpoint (truncated): " + path.string());
  if (!std::equal(kCheckpointMagic, kCheckpointMagic + 8, buf.begin()))
    throw std::runtime_error("not a checkpoint file: " + path.string());
  const std::uint32_t stored_crc = read_u32le(buf, buf.size() - 4);
  if (crc32({buf.data(), buf.size() - 4}) != stored_crc)
    throw std::runtime_error("checkpoint checksum mismatch (corrupt or truncated): " +
                             path.string());
  const std::uint32_t version = read_u32le(buf, 8);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " (expected " + std::to_string(kCheckpointVersion) +
                             "): " + path.string());

  std::size_t off = 12;
  auto need = [&](std::size_t bytes) {
    if (off + bytes > buf.size() - 4)
      throw std::runtime_error("corrupt checkpoint (truncated): " + path.string());
  };

  Checkpoint ckpt;
  need(8);
  ckpt.step = read_u64le(buf, off);
  off += 8;
  need(8);
  ckpt.dataset_fingerprint = read_u64le(buf, off);
  off += 8;
  need(8 + 4 + 4 + 8 + 4);
  ckpt.config.learning_rate = read_f64le(buf, off);
  off += 8;
  ckpt.config.batch_size = static_cast<int>(read_u32le(buf, off));
  off += 4;
  ckpt.config.epochs = static_cast<int>(read_u32le(buf, off));
  off += 4;
  ckpt.config.seed = read_u64le(buf, off);
  off += 8;
  ckpt.config.trace_every = static_cast<int>(read_u32le(buf, off));
  off += 4;
  need(4);
  const std::uint32_t num_dims = read_u32le(buf, off);
  off += 4;
  if (num_dims < 2 || num_dims > 64)
    throw std::runtime_error("corrupt checkpoint (bad layer count): " + path.string());
  std::vector<int> dims(num_dims);
  for (auto& d : dims) {
    need(4);
    d = static_cast<int>(read_u32le(buf, off));
    off += 4;
    if (d < 1) throw std::runtime_error("corrupt checkpoint (bad layer dim): " + path.string());
  }
  ckpt.params = NetParams::zeros(dims);
  for (std::size_t l = 0; l < ckpt.params.weights.size(); ++l) {
    for (auto& v : ckpt.params.weights[l]) {
      need(8);
      v = read_f64le(buf, off);
      off += 8;
    }
    for (auto& v : ckpt.params.biases[l]) {
      need(8);
      v = read_f64le(buf, off);
      off += 8;
    }
  }
  if (off != buf.size() - 4)
    throw std::runtime_error("corrupt checkpoint (trailing bytes): " + path.string());
  return ckpt;
}

void save_trace_csv(const TraceLog& log, const std::filesystem::path& path) {
  std::string out = "step,trace,trace_ema,loss\n";
  for (const auto& row : log.rows) {
    out += std::to_string(row.step);
    out += ',';
    out += format_double(row.trace);
    out += ',';
    out += format_double(row.trace_ema);
    out += ',';
    out += format_double(row.loss);
    out += '\n';
  }
  atomic_write_text(path, out);
}

int select_checkpoint_epoch(const TraceLog& log,
                            const std::vector<std::uint64_t>& epoch_end_steps) {
  if (epoch_end_steps.empty()) throw std::runtime_error("select_checkpoint_epoch: no epochs");
  if (log.rows.empty()) return static_cast<int>(epoch_end_steps.size()) - 1;

  const double initial = log.rows.front().trace_ema;
  std::size_t peak_row = 0;
  for (std::size_t r = 1; r < log.rows.size(); ++r)
    if (log.rows[r].trace_ema > log.rows[peak_row].trace_ema) peak_row = r;
  const std::uint64_t peak_step = log.rows[peak_row].step;

  // EMA value in force at the end of each epoch.
  auto ema_at = [&](std::uint64_t step) {
    double v = initial;
    for (const auto& row : log.rows) {
      if (row.step > step) break;
      v = row.trace_ema;
    }
    return v;
  };

  int best = -1;
  double best_gap = 0.0;
  for (std::size_t e = 0; e < epoch_end_steps.size(); ++e) {
    if (epoch_end_steps[e] <= peak_step) continue;
    const double ema = ema_at(epoch_end_steps[e]);
    if (ema < initial) continue;
    const double gap = ema - initial;
    if (best < 0 || gap < best_gap) {
      best = static_cast<int>(e);
      best_gap = gap;
    }
  }
  if (best >= 0) return best;

  // Nothing after the peak stayed above the initial value; take whatever
  // post-peak epoch lands closest to it.
  for (std::size_t e = 0; e < epoch_end_steps.size(); ++e) {
    if (epoch_end_steps[e] <= peak_step) continue;
    const double gap = std::abs(ema_at(epoch_end_steps[e]) - initial);
    if (best < 0 || gap < best_gap) {
      best = static_cast<int>(e);
      best_gap = gap;
    }
  }
  return best >= 0 ? best : static_cast<int>(epoch_end_steps.size()) - 1;
}

}  // namespace leafnav
