#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "msq/serialize.hpp"
#include "msq/tensor_io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace msq {
namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("msq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}), 3);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"frobnicate"}), 3);
  EXPECT_EQ(run({"--out", p("q.json"), "quantize", "--input", p("missing.bin")}), 2);
  EXPECT_FALSE(fs::exists(p("q.json")));
  EXPECT_EQ(run({"characterize", "--device", "NOPE"}), 3);
  EXPECT_EQ(run({"characterize", "--device", "XCZU4CG"}), 3);
  EXPECT_EQ(run({"--format", "xml", "report"}), 3);
}

TEST_F(Cli, QuantizeThenEmulate) {
  Rng rng(1);
  write_matrix(p("w.bin"), oracle::spread_matrix(12, 20, rng));
  Matrix2D acts(5, 20);
  for (double& v : acts.data()) v = rng.uniform(0.0, 2.0);
  write_matrix(p("a.bin"), acts);

  ASSERT_EQ(run({"--out", p("layer.json"), "quantize", "--input", p("w.bin"), "--pr-sp2", "0.5", "--values",
                 p("wq.bin")}),
            0)
      << err_.str();
  const Json doc = parse_json(read_file(p("layer.json")), "layer");
  EXPECT_EQ(doc.at("summary").at("sp2_rows"), 6);
  const auto layer = quantized_layer_from_json(doc);
  const auto wq = read_matrix(p("wq.bin"));
  const auto deq = dequantize_weights(layer);
  for (std::size_t i = 0; i < wq.size(); ++i)
    EXPECT_EQ(wq.data()[i], static_cast<double>(static_cast<float>(deq.data()[i])));

  ASSERT_EQ(run({"--out", p("y.bin"), "emulate", "--layer", p("layer.json"), "--acts", p("a.bin"), "--act-clip",
                 "2", "--blk-out-sp2", "4", "--blk-out-fixed", "4"}),
            0)
      << err_.str();
  const auto stats = parse_json(read_file(p("y.bin.stats.json")), "stats");
  EXPECT_EQ(stats.at("macs_fixed"), 5 * 20 * 6);
  EXPECT_EQ(stats.at("macs_sp2"), 5 * 20 * 6);
  EXPECT_TRUE(stats.contains("est_gops"));

  const auto y = read_matrix(p("y.bin"));
  const auto codes = quantize_activations(read_matrix(p("a.bin")), ActQuant{4, 2.0});
  const auto want = oracle::gemm_bt(dequantize_activations(codes), deq);
  for (std::size_t i = 0; i < y.size(); ++i)
    EXPECT_NEAR(y.data()[i], want.data()[i], 1e-6 * (1 + std::abs(want.data()[i])));

  // A shape mismatch is an input error and leaves nothing behind.
  write_matrix(p("narrow.bin"), Matrix2D(5, 7, 0.5));
  EXPECT_EQ(run({"--out", p("z.bin"), "emulate", "--layer", p("layer.json"), "--acts", p("narrow.bin")}), 2);
  EXPECT_FALSE(fs::exists(p("z.bin")));
  EXPECT_FALSE(fs::exists(p("z.bin.stats.json")));
}

TEST_F(Cli, PartitionPrintsAssignments) {
  write_matrix(p("w.bin"), Matrix2D(3, 2, std::vector<double>{0, 4, 0, 1, 0, 2}));
  ASSERT_EQ(run({"partition", "--input", p("w.bin"), "--pr-sp2", "0.34"}), 0) << err_.str();
  const auto j = parse_json(out_.str(), "out");
  EXPECT_EQ(j.at("assignments"), Json({"fixed", "sp2", "fixed"}));
  EXPECT_EQ(run({"partition", "--input", p("w.bin"), "--pr-sp2", "2"}), 3);
}

TEST_F(Cli, ConfigFilesMergeAndFlagsWin) {
  Rng rng(2);
  write_matrix(p("w.bin"), oracle::spread_matrix(10, 8, rng));
  write_file_atomic(p("a.json"), R"({"pr_sp2": 0.2, "fixed_bits": 5})");
  write_file_atomic(p("b.json"), R"({"pr_sp2": 0.8})");
  ASSERT_EQ(run({"--config", p("a.json"), "--config", p("b.json"), "--out", p("l.json"), "quantize", "--input",
                 p("w.bin")}),
            0);
  auto j = parse_json(read_file(p("l.json")), "l");
  EXPECT_EQ(j.at("summary").at("sp2_rows"), 8);
  EXPECT_EQ(j.at("schemes").at("fixed").at("bits"), 5);
  ASSERT_EQ(run({"--config", p("a.json"), "--out", p("l.json"), "quantize", "--input", p("w.bin"), "--pr-sp2",
                 "0.5"}),
            0);
  j = parse_json(read_file(p("l.json")), "l");
  EXPECT_EQ(j.at("summary").at("sp2_rows"), 5);

  write_file_atomic(p("bad.json"), "[1, 2");
  EXPECT_EQ(run({"--config", p("bad.json"), "--out", p("x.json"), "quantize", "--input", p("w.bin")}), 3);
  write_file_atomic(p("bits.json"), R"({"fixed_bits": 1})");
  EXPECT_EQ(run({"--config", p("bits.json"), "--out", p("x.json"), "quantize", "--input", p("w.bin")}), 3);
  EXPECT_FALSE(fs::exists(p("x.json")));
}

TEST_F(Cli, TrainWritesCompleteDirectory) {
  write_file_atomic(p("t.json"), R"({"epochs": 4, "hidden": [8], "data": {"train_samples": 200, "eval_samples": 100}})");
  const auto out = p("run");
  ASSERT_EQ(run({"--seed", "5", "--config", p("t.json"), "--out", out, "train"}), 0) << err_.str();
  for (const char* f : {"model.json", "metrics.csv", "baseline_metrics.csv", "layer_0.weights.bin",
                        "layer_0.quantized.json", "layer_1.partition.json", "layer_1.inputs.bin"})
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  EXPECT_FALSE(fs::exists(out + ".partial"));
  const auto csv = read_file(fs::path(out) / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,float_acc,quant_acc");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);

  // Same seed, same bytes.
  const auto first = read_file(fs::path(out) / "layer_0.quantized.json");
  ASSERT_EQ(run({"--seed", "5", "--config", p("t.json"), "--out", out, "train"}), 0);
  EXPECT_EQ(read_file(fs::path(out) / "layer_0.quantized.json"), first);

  // Report joins metrics with emulation stats.
  const Json model = parse_json(read_file(fs::path(out) / "model.json"), "model");
  const auto clip = model.at("layers")[1].at("act_clip").get<double>();
  ASSERT_EQ(run({"--out", p("y1.bin"), "emulate", "--layer", out + "/layer_1.quantized.json", "--acts",
                 out + "/layer_1.inputs.bin", "--act-clip", format_double(clip)}),
            0)
      << err_.str();
  ASSERT_EQ(run({"--out", p("r.csv"), "report", "--metrics", out + "/metrics.csv", "--stats", p("y1.bin.stats.json")}),
            0)
      << err_.str();
  const auto report = read_file(p("r.csv"));
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 2);
  EXPECT_NE(report.find("layer_1"), std::string::npos);
  ASSERT_EQ(run({"--format", "json", "report", "--stats", p("y1.bin.stats.json")}), 0);
  EXPECT_EQ(parse_json(out_.str(), "r").at("rows").size(), 1u);
}

TEST_F(Cli, TrainFailuresLeaveNoOutput) {
  write_file_atomic(p("t.json"), R"({"epochs": 2, "learning_rate": 1e200, "quantize": false})");
  EXPECT_EQ(run({"--seed", "1", "--config", p("t.json"), "--out", p("run"), "train"}), 4);
  EXPECT_FALSE(fs::exists(p("run")));
  EXPECT_FALSE(fs::exists(p("run.partial")));
  write_file_atomic(p("e.json"), R"({"epochs": "x"})");
  EXPECT_EQ(run({"--seed", "1", "--config", p("e.json"), "--out", p("run"), "train"}), 3);
  EXPECT_EQ(run({"--out", p("run"), "train"}), 3);  // no seed
}

TEST_F(Cli, CharacterizeShippedDevices) {
  ASSERT_EQ(run({"--format", "json", "characterize", "--device", "XC7Z020"}), 0) << err_.str();
  auto j = parse_json(out_.str(), "c");
  EXPECT_EQ(j.at("selection").at("blk_out_fixed"), 16);
  EXPECT_EQ(j.at("selection").at("blk_out_sp2"), 24);
  ASSERT_EQ(run({"--out", p("frag.json"), "characterize", "--device", "XC7Z045"}), 0);
  EXPECT_NE(out_.str().find("selected: fixed/sp2 = 16:32"), std::string::npos);
  j = parse_json(read_file(p("frag.json")), "frag");
  EXPECT_DOUBLE_EQ(j.at("pr_sp2").get<double>(), 2.0 / 3.0);

  // The fragment feeds emulate as a config.
  Rng rng(3);
  write_matrix(p("w.bin"), oracle::spread_matrix(48, 16, rng));
  write_matrix(p("a.bin"), Matrix2D(4, 16, 0.5));
  ASSERT_EQ(run({"--config", p("frag.json"), "--out", p("l.json"), "quantize", "--input", p("w.bin")}), 0);
  ASSERT_EQ(run({"--config", p("frag.json"), "--out", p("y.bin"), "emulate", "--layer", p("l.json"), "--acts",
                 p("a.bin")}),
            0)
      << err_.str();
  const auto s = parse_json(read_file(p("y.bin.stats.json")), "s");
  EXPECT_EQ(s.at("tile").at("bat"), 4);
  EXPECT_EQ(s.at("macs_sp2"), 4 * 16 * 32);
  EXPECT_DOUBLE_EQ(s.at("utilization").get<double>(), 1.0);

  EXPECT_EQ(run({"characterize", "--device", "XC7Z020", "--lut-cap", "0.1"}), 3);
}

TEST_F(Cli, ReportEmpty) {
  ASSERT_EQ(run({"report"}), 0);
  const auto text = out_.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  write_file_atomic(p("m.csv"), "nope\n");
  EXPECT_EQ(run({"report", "--metrics", p("m.csv")}), 2);
}

}  // namespace
}  // namespace msq
