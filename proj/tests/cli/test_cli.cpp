#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "indcal/cli.hpp"
#include "indcal/serialization.hpp"

namespace fs = std::filesystem;
using indcal::Json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = indcal::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static fs::path root;
  static fs::path data;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "indcal-cli-tests";
    fs::remove_all(root);
    data = root / "data";
    ASSERT_EQ(run({"gen", "--kind", "heteroscedastic", "--n", "600", "--dim", "3", "--seed", "7",
                   "--out", data.string()})
                  .code,
              0);
    indcal::write_text_file(root / "train.json",
                            R"({"hidden": [8, 8], "epochs": 3, "batch_size": 64})");
  }

  static std::vector<std::string> train_args(const fs::path& out, const std::string& alpha) {
    return {"train", "--train", (data / "train.csv").string(), "--val", (data / "val.csv").string(),
            "--config", (root / "train.json").string(), "--alpha", alpha, "--seed", "1", "--out",
            out.string()};
  }
};

fs::path Cli::root;
fs::path Cli::data;

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
  const fs::path again = root / "gen-again";
  ASSERT_EQ(run({"gen", "--kind", "heteroscedastic", "--n", "600", "--dim", "3", "--seed", "7",
                 "--out", again.string()})
                .code,
            0);
  for (const char* name : {"train.csv", "val.csv", "test.csv", "generator.json"}) {
    EXPECT_EQ(slurp(data / name), slurp(again / name)) << name;
  }
  EXPECT_EQ(lines(slurp(data / "train.csv")).size(), 361u);
  EXPECT_EQ(lines(slurp(data / "val.csv")).size(), 121u);
}

TEST_F(Cli, ExitCodes) {
  const Outcome bad_kind = run({"gen", "--kind", "spiral", "--out", (root / "x").string()});
  EXPECT_EQ(bad_kind.code, 2);
  EXPECT_NE(bad_kind.err.find("kind"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"train", "--val", (data / "val.csv").string()}).code, 2);
  EXPECT_EQ(run({"train", "--train", (root / "none.csv").string()}).code, 2);
  EXPECT_EQ(run({"gen", "--bogus-flag"}).code, 2);
  // A well-formed request that fails at run time: checkpoint width does not match the data.
  const fs::path other = root / "wide";
  ASSERT_EQ(run({"gen", "--kind", "heteroscedastic", "--n", "200", "--dim", "5", "--out",
                 other.string()})
                .code,
            0);
  const fs::path model = root / "exit-model";
  ASSERT_EQ(run(train_args(model, "0.5")).code, 0);
  EXPECT_EQ(run({"eval", "--checkpoint", (model / "checkpoint.json").string(), "--data",
                 (other / "test.csv").string(), "--out", (root / "exit-eval").string()})
                .code,
            1);
}

TEST_F(Cli, TrainWritesArtifacts) {
  const fs::path out = root / "train-a1";
  const Outcome r = run(train_args(out, "1.0"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "history.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "epoch,train_paic,train_nll,train_combined,val_paic,val_nll,val_combined");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f[6], f[5]);
    EXPECT_EQ(f[3], f[2]);
  }
  const Json cert = indcal::read_json_file(out / "certificate.json");
  for (const char* key : {"epsilon", "empirical_violation", "gamma", "n", "bound"}) {
    EXPECT_TRUE(cert.contains(key)) << key;
  }
  EXPECT_EQ(cert.at("n").get<int>(), 120);
  EXPECT_NO_THROW(indcal::load_checkpoint(out / "checkpoint.json"));
}

TEST_F(Cli, EvalDefaultsAndRecalibration) {
  const fs::path model = root / "eval-model";
  ASSERT_EQ(run(train_args(model, "0.5")).code, 0);
  const fs::path out = root / "eval";
  const Outcome r = run({"eval", "--checkpoint", (model / "checkpoint.json").string(), "--data",
                     (data / "test.csv").string(), "--val", (data / "val.csv").string(),
                     "--recalibrate", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json report = indcal::read_json_file(out / "report.json");
  std::vector<double> deltas;
  for (const auto& p : report.at("adversarial_curve")) deltas.push_back(p.at("delta").get<double>());
  EXPECT_EQ(deltas, (std::vector<double>{0.1, 0.2, 0.4, 0.6, 0.8, 1.0}));
  ASSERT_TRUE(report.contains("recalibration"));
  const Json& pairs = report.at("recalibration").at("pairs");
  EXPECT_TRUE(pairs.at("average_w1").contains("before"));
  EXPECT_TRUE(pairs.at("average_w1").contains("after"));
  EXPECT_EQ(pairs.at("adversarial_curve").size(), 6u);
  EXPECT_TRUE(fs::exists(out / "curve.csv"));
  EXPECT_TRUE(fs::exists(out / "groups.csv"));
  EXPECT_TRUE(fs::exists(out / "curve_recalibrated.csv"));
  EXPECT_NO_THROW(indcal::load_checkpoint(out / "checkpoint_recalibrated.json"));
  // --recalibrate without --val is a usage error.
  EXPECT_EQ(run({"eval", "--checkpoint", (model / "checkpoint.json").string(), "--data",
                 (data / "test.csv").string(), "--recalibrate", "--out", out.string()})
                .code,
            2);
}

TEST_F(Cli, SweepIsResumable) {
  const fs::path cfg = root / "sweep.json";
  indcal::write_text_file(cfg, R"({"alphas": [0.5, 1.0], "seeds": [0, 1],
    "train": {"hidden": [8, 8], "epochs": 2, "batch_size": 64}})");
  const fs::path out = root / "sweep";
  const std::vector<std::string> args{"sweep", "--train", (data / "train.csv").string(), "--val",
                                      (data / "val.csv").string(), "--test",
                                      (data / "test.csv").string(), "--config", cfg.string(),
                                      "--jobs", "2", "--out", out.string()};
  const Outcome first = run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  const auto rows = lines(slurp(out / "summary.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "alpha,seed,nll,mean_sigma,worst_group_err,worst_interp_err");
  const fs::path report = out / "alpha-0.5" / "seed-1" / "report.json";
  ASSERT_TRUE(fs::exists(report));
  const auto stamp = fs::last_write_time(report);
  const Outcome second = run(args);
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(fs::last_write_time(report), stamp);
  EXPECT_EQ(slurp(out / "summary.csv"), [&] {
    std::string s;
    for (const auto& l : rows) s += l + "\n";
    return s;
  }());
  indcal::write_text_file(root / "bad-sweep.json", R"({"alpha": [0.5]})");
  EXPECT_EQ(run({"sweep", "--train", (data / "train.csv").string(), "--val",
                 (data / "val.csv").string(), "--test", (data / "test.csv").string(), "--config",
                 (root / "bad-sweep.json").string(), "--out", (root / "bad-sweep").string()})
                .code,
            2);
}

TEST_F(Cli, SimulateIsDeterministic) {
  const fs::path credit = root / "credit";
  ASSERT_EQ(run({"gen", "--kind", "credit", "--n", "800", "--seed", "3", "--out", credit.string()}).code,
            0);
  const fs::path game = root / "game.json";
  indcal::write_text_file(game, R"({"refit_interval": 100,
    "psi": {"hidden": [8], "steps_per_refit": 20, "batch_size": 32}})");
  const auto args = [&](const fs::path& out) {
    return std::vector<std::string>{"simulate", "--oracle", (credit / "generator.json").string(),
                                    "--stream", (credit / "test.csv").string(), "--generator",
                                    (credit / "generator.json").string(), "--config", game.string(),
                                    "--seed", "4", "--out", out.string()};
  };
  const Outcome a = run(args(root / "sim-a"));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(run(args(root / "sim-b")).code, 0);
  EXPECT_EQ(slurp(root / "sim-a" / "game_trace.csv"), slurp(root / "sim-b" / "game_trace.csv"));
  const Json summary = indcal::read_json_file(root / "sim-a" / "game_summary.json");
  ASSERT_EQ(summary.at("phases").size(), 2u);
  EXPECT_EQ(summary.at("phases")[0].at("phase"), "random");
  EXPECT_EQ(summary.at("phases")[1].at("phase"), "rational");
  EXPECT_EQ(lines(slurp(root / "sim-a" / "game_trace.csv")).size(), 1u + 2u * 160u);
  // Without a y0 source the game is not defined.
  EXPECT_EQ(run({"simulate", "--oracle", (credit / "generator.json").string(), "--stream",
                 (credit / "test.csv").string(), "--out", (root / "sim-c").string()})
                .code,
            2);
}

TEST_F(Cli, MarkovTable) {
  const fs::path model = root / "markov-model";
  ASSERT_EQ(run(train_args(model, "0.5")).code, 0);
  const fs::path out = root / "markov";
  const Outcome r = run({"markov", "--checkpoint", (model / "checkpoint.json").string(), "--data",
                     (data / "test.csv").string(), "--k", "1,2,4", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "markov.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "k,empirical,bound_avg,bound_paic");
  const auto last = fields(rows[3]);
  EXPECT_EQ(last[0], "4");
  EXPECT_EQ(last[2], "0.5");
  EXPECT_EQ(last[3], "0.25");
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const fs::path env_out = root / "env-out";
  ::setenv("INDCAL_OUT_DIR", env_out.string().c_str(), 1);
  const Outcome r = run({"gen", "--kind", "toy", "--n", "100"});
  const fs::path flag_out = root / "flag-out";
  const Outcome f = run({"gen", "--kind", "toy", "--n", "100", "--out", flag_out.string()});
  ::unsetenv("INDCAL_OUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_out / "train.csv"));
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_TRUE(fs::exists(flag_out / "train.csv"));
}
