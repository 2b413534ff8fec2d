// leafnav: local data matrices of a ReLU classifier and paths on the
// induced foliation. One binary, subcommands below; every run writes a
// manifest.json that `replay` can re-execute bit-identically.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "leafnav/dataset.hpp"
#include "leafnav/geometry.hpp"
#include "leafnav/io.hpp"
#include "leafnav/net.hpp"
#include "leafnav/paths.hpp"
#include "leafnav/rng.hpp"
#include "leafnav/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace leafnav;

namespace {

// Exit code contract: 0 success, 1 usage, 2 I/O, 3 property-suite failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SuiteFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunContext {
  std::string subcommand;
  std::vector<std::string> argv;
  fs::path outdir;
  json flags = json::object();
  json input_digests = json::object();
  std::vector<std::string> artifacts;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void note_input(const fs::path& path) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(file_digest(path)));
    input_digests[path.string()] = hex;
  }

  fs::path artifact(const std::string& name) {
    fs::path p = outdir / name;
    artifacts.push_back(p.string());
    return p;
  }

  void write_manifest() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m;
    m["subcommand"] = subcommand;
    m["argv"] = argv;
    m["flags"] = flags;
    m["seed"] = seed;
    m["input_digests"] = input_digests;
    m["artifacts"] = artifacts;
    m["outdir"] = outdir.string();
    m["duration_seconds"] = secs;
    atomic_write_text(outdir / "manifest.json", m.dump(2) + "\n");
  }
};

struct DataFlags {
  bool synthetic = false;
  std::string images_path;
  std::string labels_path;
  int classes = 10;
  int synth_classes = 10;
  int synth_per_class = 1000;
  int synth_dim = 64;
  double synth_spread = 0.05;
  std::uint64_t synth_seed = 1;
  std::uint64_t limit = 0;  // 0 = all

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--synthetic", synthetic, "use the hermetic synthetic fixture");
    cmd->add_option("--images", images_path, "IDX image file");
    cmd->add_option("--labels", labels_path, "IDX label file");
    cmd->add_option("--classes", classes, "class count for IDX data")->capture_default_str();
    cmd->add_option("--synth-classes", synth_classes)->capture_default_str();
    cmd->add_option("--synth-per-class", synth_per_class)->capture_default_str();
    cmd->add_option("--synth-dim", synth_dim)->capture_default_str();
    cmd->add_option("--synth-spread", synth_spread)->capture_default_str();
    cmd->add_option("--synth-seed", synth_seed)->capture_default_str();
    cmd->add_option("--limit", limit, "use only the first N examples (0 = all)")
        ->capture_default_str();
  }

  Dataset load(RunContext& ctx) const {
    Dataset data;
    if (synthetic) {
      if (!images_path.empty() || !labels_path.empty())
        throw UsageError("--synthetic conflicts with --images/--labels");
      data = synth_blobs(synth_classes, synth_per_class, synth_dim, synth_spread, synth_seed);
    } else {
      if (images_path.empty() || labels_path.empty())
        throw UsageError("need --images and --labels, or --synthetic");
      ctx.note_input(images_path);
      ctx.note_input(labels_path);
      data = make_dataset(load_idx_images(images_path), load_idx_labels(labels_path), classes);
    }
    if (limit > 0 && limit < data.size()) {
      data.pixels.resize(limit * static_cast<std::size_t>(data.input_dim));
      data.labels.resize(limit);
    }
    return data;
  }

  json to_json() const {
    return {{"synthetic", synthetic},       {"images", images_path},
            {"labels", labels_path},        {"classes", classes},
            {"synth_classes", synth_classes}, {"synth_per_class", synth_per_class},
            {"synth_dim", synth_dim},       {"synth_spread", synth_spread},
            {"synth_seed", synth_seed},     {"limit", limit}};
  }
};

fs::path resolve_outdir(const std::string& flag_value) {
  if (const char* env = std::getenv("LEAFNAV_OUTDIR"); env && *env) return fs::path(env);
  return fs::path(flag_value);
}

Checkpoint load_checkpoint_input(RunContext& ctx, const std::string& path) {
  if (path.empty()) throw UsageError("this subcommand needs --checkpoint");
  ctx.note_input(path);
  return load_checkpoint(path);
}

std::vector<int> parse_dims(const std::string& s) {
  std::vector<int> dims;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    dims.push_back(std::stoi(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return dims;
}

std::string padded_index(std::uint64_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05llu", static_cast<unsigned long long>(idx));
  return buf;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  DataFlags data;
  TrainConfig cfg;
  std::vector<int> hidden = {128};
  std::string outdir = "out";
};

void run_train(const TrainOpts& opts, RunContext& ctx) {
  Dataset data = opts.data.load(ctx);
  TrainConfig cfg = opts.cfg;
  std::printf("config: lr=%g batch=%d epochs=%d seed=%llu trace_every=%d\n", cfg.learning_rate,
              cfg.batch_size, cfg.epochs, static_cast<unsigned long long>(cfg.seed),
              cfg.trace_every);
  std::printf("dataset: %zu examples, n=%d, C=%d\n", data.size(), data.input_dim,
              data.num_classes);

  std::vector<int> dims;
  dims.push_back(data.input_dim);
  for (int h : opts.hidden)
    if (h > 0) dims.push_back(h);
  dims.push_back(data.num_classes);

  Rng init_rng = Rng::stream(cfg.seed, "net_init");
  NetParams params = NetParams::random_init(dims, init_rng);
  Rng shuffle_rng = Rng::stream(cfg.seed, "train_shuffle");

  TraceLog log;
  std::uint64_t step = 0;
  std::vector<std::uint64_t> epoch_end_steps;
  const std::uint64_t fingerprint = data.fingerprint();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    sgd_epoch(params, data, cfg, shuffle_rng, step, log);
    epoch_end_steps.push_back(step);
    Checkpoint ckpt{step, params, cfg, fingerprint};
    char name[48];
    std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.bin", epoch + 1);
    save_checkpoint(ckpt, ctx.artifact(name));
    const double acc = dataset_accuracy(params, data);
    const double ema = log.rows.empty() ? 0.0 : log.rows.back().trace_ema;
    std::printf("epoch %d: step=%llu acc=%.4f trace_ema=%.6g\n", epoch + 1,
                static_cast<unsigned long long>(step), acc, ema);
  }
  save_trace_csv(log, ctx.artifact("trace.csv"));

  if (!epoch_end_steps.empty()) {
    const int sel = select_checkpoint_epoch(log, epoch_end_steps);
    char name[48];
    std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.bin", sel + 1);
    fs::copy_file(ctx.outdir / name, ctx.outdir / "ckpt_selected.bin.tmp",
                  fs::copy_options::overwrite_existing);
    fs::rename(ctx.outdir / "ckpt_selected.bin.tmp", ctx.outdir / "ckpt_selected.bin");
    ctx.artifacts.push_back((ctx.outdir / "ckpt_selected.bin").string());
    std::printf("selected checkpoint: epoch %d (%s)\n", sel + 1, name);
  }
}

// ---------------------------------------------------------------------------
// check

struct CheckOpts {
  std::string checkpoint;
  std::string dims = "20,16,8";
  int points = 50;
  std::uint64_t seed = 0;
  std::string outdir = "out";
};

void run_check(const CheckOpts& opts, RunContext& ctx) {
  if (opts.points < 1) throw UsageError("--points must be >= 1");

  NetParams params;
  if (!opts.checkpoint.empty()) {
    params = load_checkpoint_input(ctx, opts.checkpoint).params;
  } else {
    std::vector<int> dims = parse_dims(opts.dims);
    Rng rng = Rng::stream(opts.seed, "check_net");
    params = NetParams::random_init(dims, rng);
  }
  const int n = params.input_dim();
  const int classes = params.num_classes();

  struct Suite {
    const char* name;
    int failures = 0;
    double worst = 0.0;
  };
  Suite suites[] = {{"finite_params"}, {"psd"},        {"rank_bound"},
                    {"score_identity"}, {"trace_identity"}, {"kernel_annihilation"},
                    {"projection"}};
  Suite& s_finite = suites[0];
  Suite& s_psd = suites[1];
  Suite& s_rank = suites[2];
  Suite& s_eq5 = suites[3];
  Suite& s_trace = suites[4];
  Suite& s_kernel = suites[5];
  Suite& s_proj = suites[6];

  if (!params.all_finite()) s_finite.failures = 1;

  Rng rng = Rng::stream(opts.seed, "check_points");
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto nrm = [&](std::span<const double> a) { return std::sqrt(dot(a, a)); };

  for (int pt = 0; s_finite.failures == 0 && pt < opts.points; ++pt) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.next_double();

    const InputJacobian jac = input_jacobian(params, x);
    FactoredPSD g;
    g.weights = jac.probs;
    g.factors = jac.rows;
    const Spectrum spec = spectrum(g);
    const double lmax = spec.eigenvalues.empty() ? 0.0 : spec.eigenvalues.front();

    if (spec.eigenvalues.back() < -1e-10 * lmax) {
      ++s_psd.failures;
      s_psd.worst = std::min(s_psd.worst, spec.eigenvalues.back());
    }
    if (spec.soft_rank > classes - 1) ++s_rank.failures;

    std::vector<double> weighted_sum(n, 0.0);
    double max_row = 0.0;
    for (int i = 0; i < classes; ++i) {
      max_row = std::max(max_row, nrm(jac.rows[i]));
      for (int k = 0; k < n; ++k) weighted_sum[k] += jac.probs[i] * jac.rows[i][k];
    }
    const double eq5 = nrm(weighted_sum);
    if (eq5 > 1e-8 * std::max(max_row, 1e-30)) {
      ++s_eq5.failures;
      s_eq5.worst = std::max(s_eq5.worst, eq5 / std::max(max_row, 1e-30));
    }

    double lsum = 0.0;
    for (double l : spec.eigenvalues) lsum += l;
    if (std::abs(lsum - spec.trace) > 1e-10 * std::max(spec.trace, 1e-30)) ++s_trace.failures;

    std::vector<double> v(n);
    for (auto& c : v) c = rng.next_gaussian();
    const std::vector<double> pv = project_onto_distribution(v, jac);
    std::vector<double> kv(n);
    for (int k = 0; k < n; ++k) kv[k] = v[k] - pv[k];
    const std::vector<double> gkv = g.apply(kv);
    if (nrm(gkv) > 1e-8 * std::max(lmax, 1e-30) * std::max(nrm(kv), 1e-30)) ++s_kernel.failures;

    const std::vector<double> ppv = project_onto_distribution(pv, jac);
    double idem = 0.0;
    for (int k = 0; k < n; ++k) idem += (ppv[k] - pv[k]) * (ppv[k] - pv[k]);
    const bool idem_ok = std::sqrt(idem) <= 1e-9 * std::max(nrm(pv), 1e-30);
    const double pyth =
        std::abs(dot(v, v) - (dot(pv, pv) + dot(kv, kv))) / std::max(dot(v, v), 1e-30);
    std::vector<double> u(n);
    for (auto& c : u) c = rng.next_gaussian();
    const std::vector<double> pu = project_onto_distribution(u, jac);
    const double adj = std::abs(dot(pu, v) - dot(u, pv)) /
                       std::max(1.0, std::max(nrm(u) * nrm(v), 1e-30));
    if (!idem_ok || pyth > 1e-9 || adj > 1e-9 || nrm(pv) > nrm(v) * (1.0 + 1e-12))
      ++s_proj.failures;
  }

  bool all_ok = true;
  for (const Suite& s : suites) {
    const bool ok = s.failures == 0;
    all_ok = all_ok && ok;
    std::printf("[%s] %s%s\n", ok ? "PASS" : "FAIL", s.name,
                ok ? "" : (" (" + std::to_string(s.failures) + " failures)").c_str());
  }
  if (!all_ok) {
    if (s_finite.failures > 0)
      throw SuiteFailure("property suite failed: finite-ness violation in parameters");
    throw SuiteFailure("property suite failed");
  }
  std::printf("all property suites passed (%d points, n=%d, C=%d)\n", opts.points, n, classes);
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumOpts {
  DataFlags data;
  std::string checkpoint;
  int points = 20;
  std::vector<std::uint64_t> indices;
  std::string outdir = "out";
};

void run_spectrum(const SpectrumOpts& opts, RunContext& ctx) {
  const Checkpoint ckpt = load_checkpoint_input(ctx, opts.checkpoint);
  Dataset data = opts.data.load(ctx);
  if (data.input_dim != ckpt.params.input_dim())
    throw UsageError("dataset dimension does not match checkpoint");

  std::vector<std::uint64_t> ids = opts.indices;
  if (ids.empty())
    for (int i = 0; i < opts.points && std::size_t(i) < data.size(); ++i) ids.push_back(i);

  const int classes = ckpt.params.num_classes();
  std::string csv = "point_id";
  for (int i = 1; i <= classes; ++i) csv += ",lambda_" + std::to_string(i);
  csv += ",trace,soft_rank\n";
  for (std::uint64_t id : ids) {
    if (id >= data.size()) throw UsageError("point index out of range: " + std::to_string(id));
    const Spectrum spec = spectrum(local_data_matrix(ckpt.params, data.image(id)));
    csv += std::to_string(id);
    for (double l : spec.eigenvalues) csv += "," + format_double(l);
    csv += "," + format_double(spec.trace) + "," + std::to_string(spec.soft_rank) + "\n";
  }
  atomic_write_text(ctx.artifact("spectra.csv"), csv);
  std::printf("wrote spectra for %zu points\n", ids.size());
}

// ---------------------------------------------------------------------------
// path

struct PathOpts {
  DataFlags data;
  std::string checkpoint;
  std::uint64_t src = 0;
  std::uint64_t dst = 0;
  double alpha = 0.1;
  int steps = 5000;
  double stop_tol = -1.0;  // <0: 0.1 * initial distance
  double off_leaf_noise = 0.0;
  std::uint64_t noise_seed = 0;
  int stride = 500;
  std::string outdir = "out";
};

void run_path(const PathOpts& opts, RunContext& ctx) {
  const Checkpoint ckpt = load_checkpoint_input(ctx, opts.checkpoint);
  Dataset data = opts.data.load(ctx);
  if (data.input_dim != ckpt.params.input_dim())
    throw UsageError("dataset dimension does not match checkpoint");
  if (opts.src >= data.size() || opts.dst >= data.size())
    throw UsageError("--src/--dst index out of range");

  std::vector<double> source(data.image(opts.src).begin(), data.image(opts.src).end());
  const auto dspan = data.image(opts.dst);
  const std::vector<double> destination(dspan.begin(), dspan.end());

  double initial = 0.0;
  for (std::size_t k = 0; k < source.size(); ++k)
    initial += (source[k] - destination[k]) * (source[k] - destination[k]);
  initial = std::sqrt(initial);
  const double stop_tol = opts.stop_tol >= 0.0 ? opts.stop_tol : 0.1 * initial;

  if (opts.off_leaf_noise > 0.0) {
    const std::vector<double> dir = kernel_noise(ckpt.params, source, opts.noise_seed);
    for (std::size_t k = 0; k < source.size(); ++k)
      source[k] += opts.off_leaf_noise * dir[k];
    std::printf("off-leaf start: kernel noise of norm %g applied\n", opts.off_leaf_noise);
  }

  const PathRecord rec = horizontal_path(ckpt.params, source, destination, opts.alpha,
                                         opts.steps, stop_tol);
  const std::string tag = padded_index(opts.src) + "_" + padded_index(opts.dst);
  save_path_csv(rec, ctx.artifact("path_" + tag + ".csv"));
  save_path_points(rec, ctx.artifact("path_" + tag + ".bin"));
  const int rows = static_cast<int>(std::lround(std::sqrt(double(data.input_dim))));
  if (rows * rows == data.input_dim) {
    const Strip strip = path_to_strip(rec, std::max(1, opts.stride));
    write_pgm(ctx.artifact("path_" + tag + ".pgm"), strip.width, strip.height, strip.pixels);
    save_strip_csv(strip, ctx.artifact("path_" + tag + "_frames.csv"));
  }
  std::printf("path %s: status=%s steps=%zu initial=%.6g final=%.6g stop_tol=%.6g\n",
              tag.c_str(), to_string(rec.status).c_str(), rec.points.size() - 1, initial,
              rec.steps.back().dist, stop_tol);
  if (!rec.monotone_violations.empty())
    std::printf("note: %zu non-monotone steps (first at t=%d)\n",
                rec.monotone_violations.size(), rec.monotone_violations.front());
}

// ---------------------------------------------------------------------------
// noise (kernel walk)

struct NoiseOpts {
  DataFlags data;
  std::string checkpoint;
  std::uint64_t idx = 0;
  double alpha = 0.1;
  int steps = 1000;
  std::uint64_t seed = 0;
  int stride = 100;
  std::string outdir = "out";
};

void run_noise(const NoiseOpts& opts, RunContext& ctx) {
  const Checkpoint ckpt = load_checkpoint_input(ctx, opts.checkpoint);
  Dataset data = opts.data.load(ctx);
  if (data.input_dim != ckpt.params.input_dim())
    throw UsageError("dataset dimension does not match checkpoint");
  if (opts.idx >= data.size()) throw UsageError("--idx out of range");

  const PathRecord rec =
      kernel_walk(ckpt.params, data.image(opts.idx), opts.seed, opts.alpha, opts.steps);
  const std::string tag = padded_index(opts.idx);
  save_path_csv(rec, ctx.artifact("noise_" + tag + ".csv"));
  save_path_points(rec, ctx.artifact("noise_" + tag + ".bin"));
  const int rows = static_cast<int>(std::lround(std::sqrt(double(data.input_dim))));
  if (rows * rows == data.input_dim) {
    const Strip strip = path_to_strip(rec, std::max(1, opts.stride));
    write_pgm(ctx.artifact("noise_" + tag + ".pgm"), strip.width, strip.height, strip.pixels);
    save_strip_csv(strip, ctx.artifact("noise_" + tag + "_frames.csv"));
  }
  const PathStep& last = rec.steps.back();
  std::printf("walk %s: status=%s steps=%zu pred(x0)=%d pred(xT)=%d maxp(xT)=%.4f dist=%.4f\n",
              tag.c_str(), to_string(rec.status).c_str(), rec.points.size() - 1,
              rec.steps.front().pred, last.pred, last.max_prob, last.dist);
}

// ---------------------------------------------------------------------------
// involutivity

struct InvolOpts {
  DataFlags data;
  std::string checkpoint;
  int points = 20;
  std::string pairs = "all";
  double h = 1e-4;
  int retries = 6;
  std::string space = "x";
  std::string outdir = "out";
};

void run_involutivity(const InvolOpts& opts, RunContext& ctx) {
  if (opts.points < 1) throw UsageError("--points must be >= 1");
  if (opts.space != "x" && opts.space != "w") throw UsageError("--space must be x or w");
  const Checkpoint ckpt = load_checkpoint_input(ctx, opts.checkpoint);
  Dataset data = opts.data.load(ctx);
  if (data.input_dim != ckpt.params.input_dim())
    throw UsageError("dataset dimension does not match checkpoint");

  const int classes = ckpt.params.num_classes();
  std::vector<std::pair<int, int>> pairs;
  if (opts.pairs == "all") {
    for (int i = 0; i < classes; ++i)
      for (int j = i + 1; j < classes; ++j) pairs.emplace_back(i, j);
  } else {
    const auto comma = opts.pairs.find(',');
    if (comma == std::string::npos) throw UsageError("--pairs needs 'all' or 'i,j'");
    pairs.emplace_back(std::stoi(opts.pairs.substr(0, comma)),
                       std::stoi(opts.pairs.substr(comma + 1)));
  }

  std::string csv = "point_id,i,j,in_span,out_span,rel_residual\n";
  double max_rel = 0.0;
  int unresolved = 0;
  const int num_points = std::min<std::size_t>(opts.points, data.size());
  for (int pt = 0; pt < num_points; ++pt) {
    for (const auto& [i, j] : pairs) {
      std::optional<BracketResidual> res;
      double h = opts.h;
      for (int attempt = 0; attempt <= opts.retries; ++attempt) {
        try {
          if (opts.space == "x")
            res = involutivity_residual(ckpt.params, data.image(pt), i, j, h);
          else
            res = param_involutivity_residual(ckpt.params, data.image(pt), i, j, h);
          break;
        } catch (const std::runtime_error& e) {
          if (std::string(e.what()).find("region crossing") == std::string::npos) throw;
          h *= 0.5;
        }
      }
      if (!res) {
        ++unresolved;
        std::printf("warning: point %d pair (%d,%d) unresolved after retries\n", pt, i, j);
        continue;
      }
      csv += std::to_string(pt) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
             format_double(res->in_span) + "," + format_double(res->out_of_span) + "," +
             format_double(res->relative) + "\n";
      max_rel = std::max(max_rel, res->relative);
    }
  }
  atomic_write_text(ctx.artifact(opts.space == "x" ? "involutivity.csv"
                                                   : "involutivity_param.csv"),
                    csv);
  std::printf("space=%s points=%d pairs=%zu max_rel_residual=%.6g unresolved=%d\n",
              opts.space.c_str(), num_points, pairs.size(), max_rel, unresolved);
}

// ---------------------------------------------------------------------------
// dispatch

int dispatch(std::vector<std::string> args);

void run_replay(const std::string& manifest_path, const std::string& outdir_override) {
  const auto bytes = read_file_bytes(manifest_path);
  json m = json::parse(bytes.begin(), bytes.end());
  std::vector<std::string> args = m.at("argv").get<std::vector<std::string>>();
  if (!outdir_override.empty()) {
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
      if (args[i] == "--outdir") args[i + 1] = outdir_override;
    if (std::find(args.begin(), args.end(), "--outdir") == args.end()) {
      args.push_back("--outdir");
      args.push_back(outdir_override);
    }
  }
  std::printf("replaying: %s\n", m.at("subcommand").get<std::string>().c_str());
  const int rc = dispatch(std::move(args));
  if (rc != 0) throw SuiteFailure("replayed run exited with code " + std::to_string(rc));
}

int dispatch(std::vector<std::string> args) {
  CLI::App app{"local data matrix toolkit for ReLU classifiers"};
  app.require_subcommand(1);

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "SGD training with trace-of-G monitoring");
  train_opts.data.add_to(train_cmd);
  train_cmd->add_option("--lr", train_opts.cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch", train_opts.cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--epochs", train_opts.cfg.epochs)->capture_default_str();
  train_cmd->add_option("--seed", train_opts.cfg.seed)->capture_default_str();
  train_cmd->add_option("--trace-every", train_opts.cfg.trace_every)->capture_default_str();
  train_cmd->add_option("--hidden", train_opts.hidden, "hidden layer sizes")
      ->capture_default_str();
  train_cmd->add_option("--outdir", train_opts.outdir)->capture_default_str();

  CheckOpts check_opts;
  auto* check_cmd = app.add_subcommand("check", "spectral/kernel/projection property suites");
  check_cmd->add_option("--checkpoint", check_opts.checkpoint);
  check_cmd->add_option("--dims", check_opts.dims, "random net layout when no checkpoint")
      ->capture_default_str();
  check_cmd->add_option("--points", check_opts.points)->capture_default_str();
  check_cmd->add_option("--seed", check_opts.seed)->capture_default_str();
  check_cmd->add_option("--outdir", check_opts.outdir)->capture_default_str();

  SpectrumOpts spectrum_opts;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "spectra of G at dataset points");
  spectrum_opts.data.add_to(spectrum_cmd);
  spectrum_cmd->add_option("--checkpoint", spectrum_opts.checkpoint);
  spectrum_cmd->add_option("--points", spectrum_opts.points)->capture_default_str();
  spectrum_cmd->add_option("--indices", spectrum_opts.indices);
  spectrum_cmd->add_option("--outdir", spectrum_opts.outdir)->capture_default_str();

  PathOpts path_opts;
  auto* path_cmd = app.add_subcommand("path", "horizontal path between two dataset points");
  path_opts.data.add_to(path_cmd);
  path_cmd->add_option("--checkpoint", path_opts.checkpoint);
  path_cmd->add_option("--src", path_opts.src)->required();
  path_cmd->add_option("--dst", path_opts.dst)->required();
  path_cmd->add_option("--alpha", path_opts.alpha)->capture_default_str();
  path_cmd->add_option("--steps", path_opts.steps)->capture_default_str();
  path_cmd->add_option("--stop-tol", path_opts.stop_tol,
                       "absolute stop tolerance (default 0.1 * initial distance)");
  path_cmd->add_option("--off-leaf-noise", path_opts.off_leaf_noise,
                       "kernel-direction noise norm applied to the source")
      ->capture_default_str();
  path_cmd->add_option("--noise-seed", path_opts.noise_seed)->capture_default_str();
  path_cmd->add_option("--stride", path_opts.stride)->capture_default_str();
  path_cmd->add_option("--outdir", path_opts.outdir)->capture_default_str();

  NoiseOpts noise_opts;
  auto* noise_cmd = app.add_subcommand("noise", "kernel walk across leaves from a point");
  noise_opts.data.add_to(noise_cmd);
  noise_cmd->add_option("--checkpoint", noise_opts.checkpoint);
  noise_cmd->add_option("--idx", noise_opts.idx)->required();
  noise_cmd->add_option("--alpha", noise_opts.alpha)->capture_default_str();
  noise_cmd->add_option("--steps", noise_opts.steps)->capture_default_str();
  noise_cmd->add_option("--seed", noise_opts.seed)->capture_default_str();
  noise_cmd->add_option("--stride", noise_opts.stride)->capture_default_str();
  noise_cmd->add_option("--outdir", noise_opts.outdir)->capture_default_str();

  InvolOpts invol_opts;
  auto* invol_cmd = app.add_subcommand("involutivity", "Lie bracket residuals of D_x");
  invol_opts.data.add_to(invol_cmd);
  invol_cmd->add_option("--checkpoint", invol_opts.checkpoint);
  invol_cmd->add_option("--points", invol_opts.points)->capture_default_str();
  invol_cmd->add_option("--pairs", invol_opts.pairs, "'all' or 'i,j'")->capture_default_str();
  invol_cmd->add_option("--fd-step", invol_opts.h)->capture_default_str();
  invol_cmd->add_option("--retries", invol_opts.retries)->capture_default_str();
  invol_cmd->add_option("--space", invol_opts.space, "x (data) or w (parameters)")
      ->capture_default_str();
  invol_cmd->add_option("--outdir", invol_opts.outdir)->capture_default_str();

  std::string replay_manifest, replay_outdir;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a recorded manifest");
  replay_cmd->add_option("--manifest", replay_manifest)->required();
  replay_cmd->add_option("--outdir", replay_outdir, "override the recorded output directory");

  std::vector<const char*> argv_c;
  argv_c.push_back("leafnav");
  for (const auto& a : args) argv_c.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv_c.size()), argv_c.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage
  }

  RunContext ctx;
  ctx.argv = args;
  try {
    if (*replay_cmd) {
      run_replay(replay_manifest, replay_outdir);
      return 0;
    }
    if (*train_cmd) {
      ctx.subcommand = "train";
      ctx.outdir = resolve_outdir(train_opts.outdir);
      ctx.seed = train_opts.cfg.seed;
      ctx.flags = train_opts.data.to_json();
      ctx.flags["lr"] = train_opts.cfg.learning_rate;
      ctx.flags["batch"] = train_opts.cfg.batch_size;
      ctx.flags["epochs"] = train_opts.cfg.epochs;
      ctx.flags["trace_every"] = train_opts.cfg.trace_every;
      ctx.flags["hidden"] = train_opts.hidden;
      fs::create_directories(ctx.outdir);
      run_train(train_opts, ctx);
    } else if (*check_cmd) {
      ctx.subcommand = "check";
      ctx.outdir = resolve_outdir(check_opts.outdir);
      ctx.seed = check_opts.seed;
      ctx.flags = {{"checkpoint", check_opts.checkpoint},
                   {"dims", check_opts.dims},
                   {"points", check_opts.points}};
      fs::create_directories(ctx.outdir);
      run_check(check_opts, ctx);
    } else if (*spectrum_cmd) {
      ctx.subcommand = "spectrum";
      ctx.outdir = resolve_outdir(spectrum_opts.outdir);
      ctx.flags = spectrum_opts.data.to_json();
      ctx.flags["checkpoint"] = spectrum_opts.checkpoint;
      ctx.flags["points"] = spectrum_opts.points;
      fs::create_directories(ctx.outdir);
      run_spectrum(spectrum_opts, ctx);
    } else if (*path_cmd) {
      ctx.subcommand = "path";
      ctx.outdir = resolve_outdir(path_opts.outdir);
      ctx.seed = path_opts.noise_seed;
      ctx.flags = path_opts.data.to_json();
      ctx.flags["checkpoint"] = path_opts.checkpoint;
      ctx.flags["src"] = path_opts.src;
      ctx.flags["dst"] = path_opts.dst;
      ctx.flags["alpha"] = path_opts.alpha;
      ctx.flags["steps"] = path_opts.steps;
      ctx.flags["stop_tol"] = path_opts.stop_tol;
      ctx.flags["off_leaf_noise"] = path_opts.off_leaf_noise;
      ctx.flags["stride"] = path_opts.stride;
      fs::create_directories(ctx.outdir);
      run_path(path_opts, ctx);
    } else if (*noise_cmd) {
      ctx.subcommand = "noise";
      ctx.outdir = resolve_outdir(noise_opts.outdir);
      ctx.seed = noise_opts.seed;
      ctx.flags = noise_opts.data.to_json();
      ctx.flags["checkpoint"] = noise_opts.checkpoint;
      ctx.flags["idx"] = noise_opts.idx;
      ctx.flags["alpha"] = noise_opts.alpha;
      ctx.flags["steps"] = noise_opts.steps;
      ctx.flags["stride"] = noise_opts.stride;
      fs::create_directories(ctx.outdir);
      run_noise(noise_opts, ctx);
    } else if (*invol_cmd) {
      ctx.subcommand = "involutivity";
      ctx.outdir = resolve_outdir(invol_opts.outdir);
      ctx.flags = invol_opts.data.to_json();
      ctx.flags["checkpoint"] = invol_opts.checkpoint;
      ctx.flags["points"] = invol_opts.points;
      ctx.flags["pairs"] = invol_opts.pairs;
      ctx.flags["h"] = invol_opts.h;
      ctx.flags["space"] = invol_opts.space;
      fs::create_directories(ctx.outdir);
      run_involutivity(invol_opts, ctx);
    }
    ctx.write_manifest();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const SuiteFailure& e) {
    std::fprintf(stderr, "%s\n", e.what());
    if (!ctx.subcommand.empty()) ctx.write_manifest();
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;  // I/O or data error
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(std::move(args));
}
