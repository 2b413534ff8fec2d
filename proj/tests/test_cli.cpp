#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>

#include "leafnav/dataset.hpp"
#include "leafnav/io.hpp"
#include "leafnav/net.hpp"
#include "leafnav/rng.hpp"
#include "leafnav/train.hpp"

using namespace leafnav;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(LEAFNAV_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) res.output.append(buf, got);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "leafnav_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string tiny_synth_flags() {
  return "--synthetic --synth-classes 3 --synth-per-class 20 --synth-dim 9 "
         "--synth-spread 0.05 --synth-seed 5";
}

}  // namespace

TEST_CASE("exit codes: usage errors are 1") {
  CHECK(run_cli("definitely-not-a-subcommand").code == 1);
  CHECK(run_cli("train --no-such-flag").code == 1);
  CHECK(run_cli("check --points 0").code == 1);
  CHECK(run_cli("").code == 1);
}

TEST_CASE("exit codes: missing files are 2") {
  const CliResult res =
      run_cli("train --images /nonexistent/images.idx --labels /nonexistent/labels.idx");
  CHECK(res.code == 2);
}

TEST_CASE("exit codes: NaN-injected checkpoint fails the suite with 3") {
  const fs::path dir = fresh_dir("nan_ckpt");
  Rng rng(3);
  Checkpoint ckpt;
  ckpt.params = NetParams::random_init({6, 4, 3}, rng);
  ckpt.params.weights[0][2] = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(ckpt, dir / "bad.bin");
  const CliResult res = run_cli("check --checkpoint " + (dir / "bad.bin").string() +
                                " --points 3 --outdir " + (dir / "out").string());
  CHECK(res.code == 3);
  CHECK(res.output.find("finite") != std::string::npos);
}

TEST_CASE("check passes on a fresh random net") {
  const fs::path dir = fresh_dir("check_ok");
  const CliResult res =
      run_cli("check --points 10 --seed 2 --outdir " + (dir / "out").string());
  CHECK(res.code == 0);
  CHECK(res.output.find("all property suites passed") != std::string::npos);
}

TEST_CASE("train echoes the paper defaults") {
  const fs::path dir = fresh_dir("defaults");
  const CliResult res = run_cli("train " + tiny_synth_flags() + " --epochs 1 --outdir " +
                                (dir / "out").string());
  CHECK(res.code == 0);
  CHECK(res.output.find("lr=0.01") != std::string::npos);
  CHECK(res.output.find("batch=60") != std::string::npos);
}

TEST_CASE("train with lr 0 leaves the initialization untouched") {
  const fs::path dir = fresh_dir("lr0");
  const CliResult res = run_cli("train " + tiny_synth_flags() +
                                " --lr 0 --epochs 2 --seed 9 --hidden 5 --outdir " +
                                (dir / "out").string());
  REQUIRE(res.code == 0);
  const Checkpoint ckpt = load_checkpoint(dir / "out" / "ckpt_epoch_002.bin");

  Rng init = Rng::stream(9, "net_init");
  const NetParams want = NetParams::random_init({9, 5, 3}, init);
  CHECK(ckpt.params.weights == want.weights);
  CHECK(ckpt.params.biases == want.biases);
}

TEST_CASE("manifest replay reproduces artifacts byte for byte") {
  const fs::path dir = fresh_dir("replay");
  const fs::path out_a = dir / "a";
  const fs::path out_b = dir / "b";
  const CliResult first = run_cli("train " + tiny_synth_flags() +
                                  " --epochs 2 --seed 4 --hidden 6 --trace-every 1 --outdir " +
                                  out_a.string());
  REQUIRE(first.code == 0);
  REQUIRE(fs::exists(out_a / "manifest.json"));

  const CliResult second = run_cli("replay --manifest " + (out_a / "manifest.json").string() +
                                   " --outdir " + out_b.string());
  REQUIRE(second.code == 0);

  for (const char* name : {"trace.csv", "ckpt_epoch_001.bin", "ckpt_epoch_002.bin",
                           "ckpt_selected.bin"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(out_b / name));
    CHECK(read_file_bytes(out_a / name) == read_file_bytes(out_b / name));
  }
}

TEST_CASE("noise and spectrum subcommands produce their artifacts") {
  const fs::path dir = fresh_dir("experiments");
  const fs::path out = dir / "train";
  REQUIRE(run_cli("train " + tiny_synth_flags() + " --epochs 2 --seed 6 --hidden 6 --outdir " +
                  out.string())
              .code == 0);
  const std::string ckpt = (out / "ckpt_selected.bin").string();

  const fs::path nout = dir / "noise";
  const CliResult noise =
      run_cli("noise " + tiny_synth_flags() + " --checkpoint " + ckpt +
              " --idx 1 --steps 20 --alpha 0.05 --stride 5 --outdir " + nout.string());
  CHECK(noise.code == 0);
  CHECK(fs::exists(nout / "noise_00001.csv"));
  CHECK(fs::exists(nout / "noise_00001.pgm"));
  CHECK(fs::exists(nout / "noise_00001_frames.csv"));
  CHECK(fs::exists(nout / "manifest.json"));

  const fs::path sout = dir / "spectrum";
  const CliResult spec = run_cli("spectrum " + tiny_synth_flags() + " --checkpoint " + ckpt +
                                 " --points 5 --outdir " + sout.string());
  CHECK(spec.code == 0);
  const auto bytes = read_file_bytes(sout / "spectra.csv");
  const std::string csv(bytes.begin(), bytes.end());
  CHECK(csv.rfind("point_id,lambda_1,lambda_2,lambda_3,trace,soft_rank\n", 0) == 0);

  const fs::path pout = dir / "path";
  const CliResult path =
      run_cli("path " + tiny_synth_flags() + " --checkpoint " + ckpt +
              " --src 0 --dst 25 --alpha 0.05 --steps 50 --stride 10 --outdir " +
              pout.string());
  CHECK(path.code == 0);
  CHECK(fs::exists(pout / "path_00000_00025.csv"));
  CHECK(path.output.find("status=") != std::string::npos);

  const CliResult bad_idx = run_cli("path " + tiny_synth_flags() + " --checkpoint " + ckpt +
                                    " --src 0 --dst 9999 --outdir " + pout.string());
  CHECK(bad_idx.code == 1);
}

TEST_CASE("involutivity subcommand reports residuals in both spaces") {
  const fs::path dir = fresh_dir("invol");
  const fs::path out = dir / "train";
  REQUIRE(run_cli("train " + tiny_synth_flags() + " --epochs 1 --seed 8 --hidden 5 --outdir " +
                  out.string())
              .code == 0);
  const std::string ckpt = (out / "ckpt_selected.bin").string();

  const CliResult res_x =
      run_cli("involutivity " + tiny_synth_flags() + " --checkpoint " + ckpt +
              " --points 2 --pairs all --outdir " + (dir / "x").string());
  CHECK(res_x.code == 0);
  CHECK(res_x.output.find("max_rel_residual=") != std::string::npos);
  CHECK(fs::exists(dir / "x" / "involutivity.csv"));

  const CliResult res_w =
      run_cli("involutivity " + tiny_synth_flags() + " --checkpoint " + ckpt +
              " --points 1 --pairs 0,1 --space w --outdir " + (dir / "w").string());
  CHECK(res_w.code == 0);
  CHECK(fs::exists(dir / "w" / "involutivity_param.csv"));
}

TEST_CASE("default synthetic fixture trains past 95% in 20 epochs") {
  const fs::path dir = fresh_dir("fixture_regression");
  const CliResult res =
      run_cli("train --synthetic --epochs 20 --seed 1 --outdir " + (dir / "out").string());
  REQUIRE(res.code == 0);
  const Checkpoint ckpt = load_checkpoint(dir / "out" / "ckpt_epoch_020.bin");
  // the default fixture: 10 classes, 1000 per class, 64 dims, spread 0.05, seed 1
  const Dataset data = synth_blobs(10, 1000, 64, 0.05, 1);
  CHECK(dataset_accuracy(ckpt.params, data) > 0.95);
}

TEST_CASE("LEAFNAV_OUTDIR env var overrides --outdir") {
  const fs::path dir = fresh_dir("envvar");
  const fs::path flag_dir = dir / "flag";
  const fs::path env_dir = dir / "env";
  const std::string cmd = "LEAFNAV_OUTDIR=" + env_dir.string() + " " +
                          std::string(LEAFNAV_CLI_PATH) + " train " + tiny_synth_flags() +
                          " --epochs 1 --outdir " + flag_dir.string() + " >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(env_dir / "manifest.json"));
  CHECK_FALSE(fs::exists(flag_dir / "manifest.json"));
}
