#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lstego/image.hpp"
#include "lstego/synth.hpp"

#ifndef LSTEGO_CLI
#error "LSTEGO_CLI must point at the command-line binary"
#endif

namespace fs = std::filesystem;
using namespace lstego;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + LSTEGO_CLI + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lstego_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "covers");
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string cover(const std::string& name, std::uint64_t seed, int size) {
    const auto p = dir_ / "covers" / name;
    write_png(p.string(), resize_bilinear(synth::generate_scene(seed, 64), size, size));
    return p.string();
  }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, BaselineEmbedExtractRoundtrip) {
  const auto c = cover("a.png", 1, 128);
  const auto r = run("embed --method dwtdctsvd --cover " + c + " --secret 'some secrets' --out " + (dir_ / "st").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto m = read_json(dir_ / "st" / "manifest.json");
  EXPECT_EQ(m["method"], "dwtdctsvd");
  ASSERT_EQ(m["rows"].size(), 1u);
  EXPECT_EQ(m["rows"][0]["status"], "ok");
  const std::string stego = m["rows"][0]["stego"];
  EXPECT_EQ(read_png(stego).height, 128);

  const auto e = run("extract --method dwtdctsvd --input " + stego + " --out " + (dir_ / "ex.json").string());
  ASSERT_EQ(e.code, 0) << e.out;
  const auto x = read_json(dir_ / "ex.json");
  EXPECT_EQ(x["rows"][0]["secret_hex"], m["secret_hex"]);
  EXPECT_EQ(x["rows"][0]["ascii"], "some secrets");
}

TEST_F(Cli, BatchIsolatesCorruptFiles) {
  cover("a.png", 1, 64);
  cover("b.png", 2, 64);
  std::ofstream(dir_ / "covers" / "broken.png") << "\x89PNG\r\n\x1a\n not really";
  const auto r = run("embed --method dwtdctsvd --length 32 --secret-bits 10110011101100111011001110110011 --cover " +
                     (dir_ / "covers").string() + " --out " + (dir_ / "st").string());
  EXPECT_NE(r.code, 0);
  const auto m = read_json(dir_ / "st" / "manifest.json");
  ASSERT_EQ(m["rows"].size(), 3u);
  int ok = 0, bad = 0;
  for (const auto& row : m["rows"]) {
    if (row["status"] == "ok") ++ok;
    else {
      ++bad;
      EXPECT_NE(row["cover"].get<std::string>().find("broken"), std::string::npos);
    }
  }
  EXPECT_EQ(ok, 2);
  EXPECT_EQ(bad, 1);
  // the good stegos still decode
  const auto e = run("extract --method dwtdctsvd --length 32 --input " + (dir_ / "st").string() + " --out " +
                     (dir_ / "ex.json").string());
  ASSERT_EQ(e.code, 0) << e.out;
  for (const auto& row : read_json(dir_ / "ex.json")["rows"]) EXPECT_EQ(row["secret_hex"], m["secret_hex"]);
}

TEST_F(Cli, CapacityExceededIsAnErrorRow) {
  const auto c = cover("tiny.png", 1, 16);
  const auto r = run("embed --method dwtdctsvd --cover " + c + " --secret hi --out " + (dir_ / "st").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(read_json(dir_ / "st" / "manifest.json")["rows"][0]["status"], "error");
}

TEST_F(Cli, EnvironmentOverridesConfig) {
  const auto c = cover("a.png", 3, 64);
  const auto base = run("embed --method dwtdctsvd --length 32 --secret-hex deadbeef --cover " + c + " --out " +
                        (dir_ / "a").string());
  ASSERT_EQ(base.code, 0) << base.out;
  const auto env = "LSTEGO_BASELINE__QUANT_STEP=60";
  const auto over = run("embed --method dwtdctsvd --length 32 --secret-hex deadbeef --cover " + c + " --out " +
                            (dir_ / "b").string(),
                        env);
  ASSERT_EQ(over.code, 0) << over.out;
  EXPECT_NE(read_png((dir_ / "a" / "a_stego.png").string()), read_png((dir_ / "b" / "a_stego.png").string()));
  const auto e = run("extract --method dwtdctsvd --length 32 --input " + (dir_ / "b" / "a_stego.png").string() +
                         " --out " + (dir_ / "ex.json").string(),
                     env);
  ASSERT_EQ(e.code, 0);
  EXPECT_EQ(read_json(dir_ / "ex.json")["rows"][0]["secret_hex"], "deadbeef");
  // unknown keys are configuration errors
  const auto bad = run("embed --method dwtdctsvd --secret x --cover " + c + " --out " + (dir_ / "c").string(),
                       "LSTEGO_BASELINE__NOPE=1");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("unknown config key"), std::string::npos);
}

TEST_F(Cli, MissingModelIsConfigurationError) {
  const auto c = cover("a.png", 1, 64);
  const auto r = run("extract --input " + c);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--model"), std::string::npos);
}

TEST_F(Cli, PerturbAndEvaluateBaseline) {
  const auto c = cover("a.png", 4, 64);
  const auto p = run("perturb --input " + c + " --kind jpeg_compression --severity 5 --seed 1 --out " +
                     (dir_ / "j.png").string());
  ASSERT_EQ(p.code, 0) << p.out;
  EXPECT_NE(read_png((dir_ / "j.png").string()), read_png(c));
  EXPECT_NE(run("perturb --input " + c + " --kind nonsense --out " + (dir_ / "x.png").string()).code, 0);

  cover("b.png", 5, 64);
  const auto stem = (dir_ / "rep").string();
  const auto e1 = run("evaluate --method dwtdctsvd --length 32 --data " + (dir_ / "covers").string() + " --seed 3 --out " + stem);
  ASSERT_EQ(e1.code, 0) << e1.out;
  std::ifstream f1(stem + ".csv");
  const std::string csv1((std::istreambuf_iterator<char>(f1)), {});
  ASSERT_EQ(run("evaluate --method dwtdctsvd --length 32 --data " + (dir_ / "covers").string() + " --seed 3 --out " + stem).code, 0);
  std::ifstream f2(stem + ".csv");
  EXPECT_EQ(csv1, std::string((std::istreambuf_iterator<char>(f2)), {}));
  EXPECT_EQ(read_json(stem + ".json")["count"], 2);
}

TEST_F(Cli, LearnedPipelineEndToEnd) {
  // tiny settings, only checks plumbing
  const std::string cfg = (dir_ / "tiny.json").string();
  std::ofstream(cfg) << R"({
    "data": {"resolution": 32, "train_count": 32, "val_count": 4, "test_count": 3},
    "autoencoder": {"steps": 10, "batch": 4, "perceptual_steps": 3, "calibration_images": 16, "min_images": 16},
    "stego": {"secret_length": 32, "use_ecc": true, "batch": 4, "max_steps": 4, "val_every": 2, "val_images": 4,
              "checkpoint_every": 2, "decoder_blocks": [1, 1, 1]}
  })";
  const auto ae = (dir_ / "ae.lsa").string(), model = (dir_ / "m.lsm").string();
  const auto a = run("train-ae --config " + cfg + " --out " + ae);
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("held-out reconstruction PSNR"), std::string::npos);
  const auto t = run("train-stega --config " + cfg + " --ae " + ae + " --out " + model);
  ASSERT_EQ(t.code, 0) << t.out;
  EXPECT_TRUE(fs::exists(model + ".log.csv"));
  // resuming picks up the checkpoint and finishes
  EXPECT_EQ(run("train-stega --config " + cfg + " --ae " + ae + " --resume " + model + ".ckpt --out " + model).code, 0);

  const auto c = cover("a.png", 9, 48);
  const auto e = run("embed --model " + model + " --cover " + c + " --secret-bits 10110 --out " + (dir_ / "st").string());
  ASSERT_EQ(e.code, 0) << e.out;
  const auto m = read_json(dir_ / "st" / "manifest.json");
  EXPECT_EQ(m["channel_bits"], 32);
  EXPECT_EQ(m["data_bits"], 5);
  EXPECT_EQ(read_png((dir_ / "st" / "a_stego.png").string()).height, 32);
  const auto x = run("extract --model " + model + " --input " + (dir_ / "st").string() + " --out " + (dir_ / "ex.json").string());
  ASSERT_EQ(x.code, 0) << x.out;
  const auto row = read_json(dir_ / "ex.json")["rows"][0];
  EXPECT_TRUE(row.contains("ecc_corrected"));
  EXPECT_EQ(row["channel_hex"].get<std::string>().size(), 8u);
  EXPECT_GE(row["confidence"].get<double>(), 0.0);
  const auto ev = run("evaluate --model " + model + " --config " + cfg + " --out " + (dir_ / "rep").string());
  ASSERT_EQ(ev.code, 0) << ev.out;
  EXPECT_EQ(read_json(dir_ / "rep.json")["count"], 3);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("frobnicate").code, 0);
  const auto c = cover("a.png", 1, 64);
  EXPECT_NE(run("embed --method dwtdctsvd --cover " + c + " --secret a --secret-hex ff --out " + (dir_ / "o").string()).code, 0);
  EXPECT_NE(run("sweep --axis colour --values 1,2 --out " + (dir_ / "sw").string()).code, 0);
}
