#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "strnet/cli.hpp"

namespace fs = std::filesystem;
using namespace strnet;

namespace {

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"strnet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("strnet_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_config(const std::string& path, const std::string& extra = "") {
  std::ofstream out(path);
  out << "seed = 5\nT = 8\nC = 8\nbody.joints = 4\nbody.vertices = 12\n"
      << "data.sequences = 2\ndata.frames = 16\ntrain.epochs = 1\ntrain.batch = 4\n"
      << "reg.hidden = 16\n"
      << extra;
}

}  // namespace

TEST(Cli, SynthIsDeterministicPerSeed) {
  TempDir dir("synth");
  write_config(dir.file("run.cfg"));
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--seed", "7",
                 "--out", dir.file("a.bin")}),
            0);
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--seed", "7",
                 "--out", dir.file("b.bin")}),
            0);
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--seed", "8",
                 "--out", dir.file("c.bin")}),
            0);
  EXPECT_EQ(read_bytes(dir.file("a.bin")), read_bytes(dir.file("b.bin")));
  EXPECT_NE(read_bytes(dir.file("a.bin")), read_bytes(dir.file("c.bin")));
}

TEST(Cli, SynthZeroSequencesWritesValidEmptyDataset) {
  TempDir dir("synth0");
  write_config(dir.file("run.cfg"), "data.sequences = 0\n");
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("empty.bin")}), 0);
  Dataset ds = Dataset::load(dir.file("empty.bin"));
  EXPECT_TRUE(ds.windows.empty());
  EXPECT_EQ(ds.channels, 8u);
}

TEST(Cli, SynthRejectsWindowsLongerThanSequences) {
  TempDir dir("synthbad");
  write_config(dir.file("run.cfg"), "data.frames = 4\n");
  EXPECT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("x.bin")}), 1);
}

TEST(Cli, ConfigValidationFailsBeforeCompute) {
  TempDir dir("cfg");
  write_config(dir.file("bad_t.cfg"), "");
  {
    std::ofstream out(dir.file("bad_t.cfg"));
    out << "T = 10\nC = 8\n";  // not divisible by 4
  }
  EXPECT_EQ(cli({"synth", "--config", dir.file("bad_t.cfg"), "--out", dir.file("x.bin")}), 1);

  {
    std::ofstream out(dir.file("unknown.cfg"));
    out << "T = 8\nnot.a.key = 3\n";
  }
  EXPECT_EQ(cli({"synth", "--config", dir.file("unknown.cfg"), "--out", dir.file("x.bin")}), 1);
}

TEST(Cli, TrainZeroEpochsEqualsInitialization) {
  TempDir dir("train0");
  write_config(dir.file("run.cfg"), "train.epochs = 0\n");
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds.bin")}), 0);
  ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--out", dir.file("ckpt.bin")}),
            0);

  Dataset ds = Dataset::load(dir.file("ds.bin"));
  RunConfig cfg = load_config(dir.file("run.cfg"));
  StrModel fresh(cfg.model_config(), ds.asset(), cfg.seed);
  StrModel loaded(cfg.model_config(), ds.asset(), cfg.seed);
  load_checkpoint(dir.file("ckpt.bin"), loaded);
  for (std::size_t i = 0; i < fresh.store().size(); ++i)
    EXPECT_EQ(fresh.store().values(i), loaded.store().values(i));
}

TEST(Cli, ResumeContinuesEpochNumbering) {
  TempDir dir("resume");
  write_config(dir.file("run.cfg"));
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds.bin")}), 0);
  ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--out", dir.file("c1.bin")}),
            0);
  ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--checkpoint", dir.file("c1.bin"), "--out", dir.file("c2.bin"),
                 "--log", dir.file("c2.log.csv")}),
            0);
  std::string log = read_bytes(dir.file("c2.log.csv"));
  EXPECT_NE(log.find("\n2,"), std::string::npos);  // epoch numbering continued at 2
  EXPECT_EQ(log.find("\n1,"), std::string::npos);
}

TEST(Cli, EvalIsDeterministicAndGtOracleIsZero) {
  TempDir dir("eval");
  write_config(dir.file("run.cfg"));
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds.bin")}), 0);
  ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--out", dir.file("ckpt.bin")}),
            0);
  ASSERT_EQ(cli({"eval", "--config", dir.file("run.cfg"), "--checkpoint", dir.file("ckpt.bin"),
                 "--dataset", dir.file("ds.bin"), "--out", dir.file("m1.csv")}),
            0);
  ASSERT_EQ(cli({"eval", "--config", dir.file("run.cfg"), "--checkpoint", dir.file("ckpt.bin"),
                 "--dataset", dir.file("ds.bin"), "--out", dir.file("m2.csv")}),
            0);
  EXPECT_EQ(read_bytes(dir.file("m1.csv")), read_bytes(dir.file("m2.csv")));

  write_config(dir.file("oracle.cfg"), "eval.gt_oracle = true\n");
  ASSERT_EQ(cli({"eval", "--config", dir.file("oracle.cfg"), "--checkpoint",
                 dir.file("ckpt.bin"), "--dataset", dir.file("ds.bin"), "--out",
                 dir.file("m0.csv")}),
            0);
  std::string csv = read_bytes(dir.file("m0.csv"));
  std::istringstream ss(csv);
  std::string header, row;
  std::getline(ss, header);
  std::getline(ss, row);
  double a, b, c, d;
  int n;
  ASSERT_EQ(std::sscanf(row.c_str(), "%lf,%lf,%lf,%lf,%d", &a, &b, &c, &d, &n), 5);
  EXPECT_NEAR(a, 0.0, 1e-9);
  EXPECT_NEAR(b, 0.0, 1e-9);
  EXPECT_NEAR(c, 0.0, 1e-9);
  EXPECT_NEAR(d, 0.0, 1e-9);
}

TEST(Cli, EvalOnEmptyDatasetIsAnErrorNotZeros) {
  TempDir dir("evalempty");
  write_config(dir.file("run.cfg"));
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds.bin")}), 0);
  ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--out", dir.file("ckpt.bin")}),
            0);
  write_config(dir.file("empty.cfg"), "data.sequences = 0\n");
  ASSERT_EQ(cli({"synth", "--config", dir.file("empty.cfg"), "--out", dir.file("none.bin")}), 0);
  EXPECT_EQ(cli({"eval", "--config", dir.file("run.cfg"), "--checkpoint", dir.file("ckpt.bin"),
                 "--dataset", dir.file("none.bin"), "--out", dir.file("m.csv")}),
            1);
}

TEST(Cli, AblateEmitsTableRowSet) {
  TempDir dir("ablate");
  write_config(dir.file("run.cfg"));
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds.bin")}), 0);
  ASSERT_EQ(cli({"ablate", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--out", dir.file("ab.csv")}),
            0);
  std::string csv = read_bytes(dir.file("ab.csv"));
  EXPECT_EQ(csv.find("variant,pa_mpjpe,accel_err\n"), 0u);
  for (const char* v : {"full", "no_ttr", "no_ste", "no_ste_time", "no_ste_freq", "no_self",
                        "no_cross"})
    EXPECT_NE(csv.find(std::string("\n") + v + "," ), std::string::npos) << v;
  std::size_t rows = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(rows, 8u);  // header + 6 ablations + full

  // a single variant can be requested
  ASSERT_EQ(cli({"ablate", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds.bin"),
                 "--variant", "no_ttr", "--out", dir.file("one.csv")}),
            0);
  std::string one = read_bytes(dir.file("one.csv"));
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 2);
  EXPECT_NE(one.find("no_ttr,"), std::string::npos);
}

TEST(Cli, PlotSeriesShapeAndOracles) {
  TempDir dir("plot");
  // fabricate a dataset whose gt joints move at constant velocity
  const std::size_t t_len = 8, c_len = 8, joints = 4;
  Dataset ds;
  ds.seq_len = t_len;
  ds.channels = c_len;
  ds.joints = joints;
  ds.vertices = 12;
  ds.asset_seed = 1234;
  for (int f = 0; f < 9; ++f) {
    FeatureWindow w;
    w.features = Tensor::zeros({t_len, c_len});
    std::vector<double> j(joints * 3);
    for (std::size_t k = 0; k < joints; ++k)
      for (int a = 0; a < 3; ++a) j[k * 3 + a] = double(k) * 0.1 + 0.05 * a * f;
    w.gt_joints3d = Tensor({joints, 3}, std::move(j));
    w.gt_joints2d = Tensor::zeros({joints, 2});
    w.gt_theta = Tensor::zeros({joints, 3});
    w.gt_beta = Tensor::zeros({10});
    w.gt_cam = Tensor({3}, {1.0, 0.0, 0.0});
    w.seq_id = 0;
    w.frame_index = f;
    ds.windows.push_back(std::move(w));
  }
  ds.save(dir.file("ds.bin"));

  write_config(dir.file("run.cfg"), "eval.gt_oracle = true\n");
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("synth.bin")}), 0);
  ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("synth.bin"),
                 "--out", dir.file("ckpt.bin")}),
            0);
  ASSERT_EQ(cli({"plot", "--config", dir.file("run.cfg"), "--checkpoint", dir.file("ckpt.bin"),
                 "--dataset", dir.file("ds.bin"), "--out", dir.file("series.csv")}),
            0);

  std::string csv = read_bytes(dir.file("series.csv"));
  EXPECT_EQ(csv.find("frame,pred_accel_err,gt_accel_magnitude\n"), 0u);
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::size_t rows = 0;
  while (std::getline(ss, line)) {
    int frame;
    double pred, mag;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%lf,%lf", &frame, &pred, &mag), 3);
    EXPECT_NEAR(pred, 0.0, 1e-12);  // oracle predictions are perfect
    EXPECT_NEAR(mag, 0.0, 1e-12);   // constant-velocity ground truth
    ++rows;
  }
  EXPECT_EQ(rows, 9u - 2u);  // frames - 2

  // too-short sequences are rejected
  Dataset tiny = ds;
  tiny.windows.resize(2);
  tiny.save(dir.file("short.bin"));
  EXPECT_EQ(cli({"plot", "--config", dir.file("run.cfg"), "--checkpoint", dir.file("ckpt.bin"),
                 "--dataset", dir.file("short.bin"), "--out", dir.file("s.csv")}),
            1);
}

TEST(Cli, FullPipelineIsByteIdenticalAcrossRuns) {
  TempDir dir("determ");
  write_config(dir.file("run.cfg"), "data.noise_sigma = 0.02\ndata.dropout_prob = 0.5\n");
  for (const char* tag : {"x", "y"}) {
    std::string t(tag);
    ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds_" + t)}), 0);
    ASSERT_EQ(cli({"train", "--config", dir.file("run.cfg"), "--dataset", dir.file("ds_" + t),
                   "--out", dir.file("ck_" + t)}),
              0);
    ASSERT_EQ(cli({"eval", "--config", dir.file("run.cfg"), "--checkpoint", dir.file("ck_" + t),
                   "--dataset", dir.file("ds_" + t), "--out", dir.file("m_" + t)}),
              0);
  }
  EXPECT_EQ(read_bytes(dir.file("ds_x")), read_bytes(dir.file("ds_y")));
  EXPECT_EQ(read_bytes(dir.file("ck_x")), read_bytes(dir.file("ck_y")));
  EXPECT_EQ(read_bytes(dir.file("m_x")), read_bytes(dir.file("m_y")));
}

TEST(Cli, ContainerChecksumCatchesCorruption) {
  TempDir dir("corrupt");
  write_config(dir.file("run.cfg"));
  ASSERT_EQ(cli({"synth", "--config", dir.file("run.cfg"), "--out", dir.file("ds.bin")}), 0);
  std::string bytes = read_bytes(dir.file("ds.bin"));
  bytes[bytes.size() / 2] ^= 0x40;
  {
    std::ofstream out(dir.file("bad.bin"), std::ios::binary);
    out << bytes;
  }
  EXPECT_THROW(Dataset::load(dir.file("bad.bin")), IoError);
}
