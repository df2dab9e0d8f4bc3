#include "dpplearn_cli/cli.hpp"

#include "dpplearn/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using Json = nlohmann::json;
using dpplearn::cli::run;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dpplearn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string write_json(const std::string& name, const Json& j) { return write(name, j.dump(2)); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

Json discrete_config() {
  return Json{{"schema_version", 1},
              {"model",
               {{"type", "discrete-gaussian"},
                {"lattice", {{"counts", {5, 5}}, {"spacing", 1.0}, {"origin", {-2.0, -2.0}}}}}},
              {"theta", {{"gamma", 1.0}, {"sigma", 0.3}}},
              {"simulate", {{"samples", 20}}},
              {"fit", {{"init", {{"gamma", 1.0}, {"sigma", 0.5}}}, {"proposal_scales", 0.2}}}};
}

TEST_F(CliTest, SimulateIsDeterministicGivenSeed) {
  const auto cfg = write_json("c.json", discrete_config());
  ASSERT_EQ(call({"simulate", "--config", cfg, "--seed", "7", "--out", path("a")}), 0) << err_.str();
  ASSERT_EQ(call({"simulate", "--config", cfg, "--seed", "7", "--out", path("b")}), 0) << err_.str();
  EXPECT_EQ(slurp(path("a/samples.csv")), slurp(path("b/samples.csv")));
  ASSERT_EQ(call({"simulate", "--config", cfg, "--seed", "8", "--out", path("c")}), 0);
  EXPECT_NE(slurp(path("a/samples.csv")), slurp(path("c/samples.csv")));

  const Json s = Json::parse(slurp(path("a/simulate.json")));
  EXPECT_EQ(s["config"]["run"]["seed"], 7);
  EXPECT_EQ(s["config"]["schema_version"], 1);
  EXPECT_FALSE(s["version"].get<std::string>().empty());
  EXPECT_TRUE(s["result"].contains("analytic_cardinality"));
  EXPECT_EQ(dpplearn::io::read_point_patterns(path("a/samples.csv")).samples.size(), 20u);
}

TEST_F(CliTest, SimulateZeroSamplesWritesHeaderOnly) {
  Json c = discrete_config();
  c["simulate"]["samples"] = 0;
  ASSERT_EQ(call({"simulate", "--config", write_json("c.json", c), "--out", path("o")}), 0) << err_.str();
  EXPECT_EQ(slurp(path("o/samples.csv")), "sample_id,x1,x2\n");
}

TEST_F(CliTest, SimulateScenarioOneCardinality) {
  const Json c{{"schema_version", 1},
               {"model", {{"type", "continuous-gaussian"}, {"dim", 2}}},
               {"theta", {{"alpha", 1000.0}, {"rho", 1.0}, {"sigma", 1.0}}},
               {"simulate", {{"samples", 10}}}};
  ASSERT_EQ(call({"simulate", "--config", write_json("c.json", c), "--seed", "3", "--out", path("o")}), 0)
      << err_.str();
  const Json s = Json::parse(slurp(path("o/simulate.json")));
  EXPECT_NEAR(s["result"]["mean_cardinality"].get<double>(), 18.0, 3.0);
  EXPECT_NEAR(s["result"]["analytic_cardinality"].get<double>(), 17.52, 0.01);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  Json c = discrete_config();
  c.erase("schema_version");
  EXPECT_EQ(call({"simulate", "--config", write_json("a.json", c), "--out", path("o")}), 2);
  c["schema_version"] = 99;
  EXPECT_EQ(call({"simulate", "--config", write_json("b.json", c), "--out", path("o")}), 2);
  EXPECT_EQ(call({"simulate", "--config", write("bad.json", "{not json"), "--out", path("o")}), 2);
  EXPECT_EQ(call({"simulate", "--config", path("missing.json")}), 2);
  EXPECT_EQ(call({"fit", "--bogus-flag"}), 2);
  EXPECT_EQ(call({}), 2);

  const auto good = write_json("g.json", discrete_config());
  ASSERT_EQ(call({"simulate", "--config", good, "--out", path("d")}), 0);
  EXPECT_EQ(call({"fit", "--config", good, "--data", path("d/samples.csv"), "--sampler", "gibbs", "--out",
                  path("f")}),
            2);
  EXPECT_NE(err_.str().find("sampler"), std::string::npos);
}

TEST_F(CliTest, BoundedMhTraceEqualsExactMhTrace) {
  const auto cfg = write_json("c.json", discrete_config());
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  const std::string data = path("d/samples.csv");
  ASSERT_EQ(call({"fit", "--config", cfg, "--data", data, "--sampler", "mh", "--iters", "300", "--seed", "5", "--out",
                  path("mh")}),
            0)
      << err_.str();
  ASSERT_EQ(call({"fit", "--config", cfg, "--data", data, "--sampler", "bounded-mh", "--iters", "300", "--seed", "5",
                  "--out", path("bmh")}),
            0)
      << err_.str();
  const auto a = dpplearn::io::read_chain(path("mh/chain_0.csv"));
  const auto b = dpplearn::io::read_chain(path("bmh/chain_0.csv"));
  EXPECT_EQ(a.chain.samples, b.chain.samples);
  EXPECT_EQ(a.chain.accepted, b.chain.accepted);
}

TEST_F(CliTest, FitSummaryHasPsrfAcrossChains) {
  const auto cfg = write_json("c.json", discrete_config());
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  ASSERT_EQ(call({"fit", "--config", cfg, "--data", path("d/samples.csv"), "--sampler", "slice", "--chains", "3",
                  "--iters", "200", "--burnin", "50", "--out", path("f")}),
            0)
      << err_.str();
  for (int c = 0; c < 3; ++c) EXPECT_TRUE(fs::exists(path("f/chain_" + std::to_string(c) + ".csv")));
  const Json s = Json::parse(slurp(path("f/summary.json")));
  const auto& p = s["posterior"];
  EXPECT_TRUE(p.contains("average_psrf"));
  EXPECT_EQ(p["chains"].size(), 3u);
  for (const char* n : {"gamma_1", "gamma_2", "sigma_1", "sigma_2"}) {
    ASSERT_TRUE(p["parameters"].contains(n)) << n;
    EXPECT_EQ(p["parameters"][n]["n"], 3 * 150);
    EXPECT_LE(p["parameters"][n]["q05"].get<double>(), p["parameters"][n]["q95"].get<double>());
  }
  EXPECT_EQ(s["config"]["run"]["chains"], 3);
  EXPECT_GT(s["runtime_seconds"].get<double>(), 0.0);
}

TEST_F(CliTest, MleFromTwoSeedsReportsTwoStationaryPoints) {
  Json c = discrete_config();
  c["fit"]["mle"] = {{"tolerance", 1e-2}};
  const auto cfg = write_json("c.json", c);
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  ASSERT_EQ(call({"fit", "--config", cfg, "--data", path("d/samples.csv"), "--sampler", "mle", "--chains", "2",
                  "--iters", "3000", "--out", path("m")}),
            0)
      << err_.str();
  const Json s = Json::parse(slurp(path("m/summary.json")));
  ASSERT_EQ(s["mle"].size(), 2u);
  for (const auto& r : s["mle"]) {
    EXPECT_TRUE(std::isfinite(r["log_likelihood"].get<double>()));
    EXPECT_TRUE(r["converged"].get<bool>()) << r["stop_reason"];
  }
  EXPECT_NEAR(s["mle"][0]["log_likelihood"].get<double>(), s["mle"][1]["log_likelihood"].get<double>(), 1e-3);
  EXPECT_TRUE(fs::exists(path("m/mle_1.csv")));
}

TEST_F(CliTest, MomentsRejectsEmptyTrace) {
  const auto cfg = write_json("c.json", discrete_config());
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  const auto trace = write("t.csv", "iter,gamma_1,gamma_2,sigma_1,sigma_2,log_post,accepted\n");
  EXPECT_EQ(call({"moments", "--config", cfg, "--data", path("d/samples.csv"), "--trace", trace, "--out", path("o")}),
            2);
}

TEST_F(CliTest, MomentsContinuousFourthOrder) {
  const Json c{{"schema_version", 1},
               {"model", {{"type", "continuous-gaussian"}, {"dim", 2}}},
               {"theta", {{"alpha", 1000.0}, {"rho", 1.0}, {"sigma", 1.0}}},
               {"simulate", {{"samples", 10}}},
               {"moments", {{"orders", {0, 2, 4}}}}};
  const auto cfg = write_json("c.json", c);
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  const auto trace = write("t.csv",
                           "iter,alpha,rho,sigma,log_post,accepted\n"
                           "0,1000,1,1,0,1\n1,900,1.1,0.9,0,1\n2,1100,0.95,1.05,0,1\n");
  ASSERT_EQ(call({"moments", "--config", cfg, "--data", path("d/samples.csv"), "--trace", trace, "--out", path("o")}),
            0)
      << err_.str();
  const Json s = Json::parse(slurp(path("o/moments.json")));
  ASSERT_EQ(s["reports"].size(), 5u);  // order 0 once, orders 2 and 4 per dimension
  EXPECT_EQ(s["reports"][4]["order"], 4);
  EXPECT_TRUE(fs::exists(path("o/moments.csv")));
}

TEST_F(CliTest, ClassifyNeedsTwoClasses) {
  Json c = discrete_config();
  const auto cfg = write_json("c.json", c);
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  c["classes"] = Json::array({{{"name", "only"}, {"data", path("d/samples.csv")}}});
  EXPECT_EQ(call({"classify-loo", "--config", write_json("k.json", c), "--out", path("o")}), 2);
}

TEST_F(CliTest, ClassifySeparatesDiscreteClasses) {
  Json a = discrete_config();
  a["theta"] = {{"gamma", 2.0}, {"sigma", 0.05}};
  a["simulate"]["samples"] = 4;
  Json b = discrete_config();
  b["theta"] = {{"gamma", 2.0}, {"sigma", 2.0}};
  b["simulate"]["samples"] = 4;
  ASSERT_EQ(call({"simulate", "--config", write_json("a.json", a), "--seed", "1", "--out", path("a")}), 0);
  ASSERT_EQ(call({"simulate", "--config", write_json("b.json", b), "--seed", "2", "--out", path("b")}), 0);
  Json c = discrete_config();
  c["classes"] = Json::array({{{"name", "loose"}, {"data", path("a/samples.csv")}},
                              {{"name", "repulsive"}, {"data", path("b/samples.csv")}}});
  ASSERT_EQ(call({"classify-loo", "--config", write_json("k.json", c), "--sampler", "slice", "--iters", "150",
                  "--burnin", "50", "--out", path("o")}),
            0)
      << err_.str();
  const Json s = Json::parse(slurp(path("o/classify.json")));
  EXPECT_EQ(s["folds"].size(), 8u);
  EXPECT_GE(s["accuracy"].get<double>(), 0.75);
  EXPECT_TRUE(s["classes"].contains("loose"));
}

TEST_F(CliTest, BoundedStepUnresolvedExitsFour) {
  const Json c{{"schema_version", 1},
               {"model", {{"type", "continuous-gaussian"}, {"dim", 2}}},
               {"theta", {{"alpha", 1000.0}, {"rho", 1.0}, {"sigma", 1.0}}},
               {"simulate", {{"samples", 3}}},
               {"fit", {{"init", {{"alpha", 1000.0}, {"rho", 1.0}, {"sigma", 1.0}}}, {"initial_M", 2}, {"max_M", 2}}}};
  const auto cfg = write_json("c.json", c);
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", path("d")}), 0);
  EXPECT_EQ(call({"fit", "--config", cfg, "--data", path("d/samples.csv"), "--sampler", "bounded-mh", "--iters", "20",
                  "--out", path("f")}),
            4)
      << err_.str();
}

std::string features_csv() {
  // 8 items; color separates item 7 strongly, other blocks are uninformative noise
  std::string s = "item_id,subcategory,feature_block,v1,v2\n";
  const double color[8][2] = {{0, 0}, {0.1, 0}, {0, 0.1}, {0.1, 0.1}, {0.05, 0.05}, {0.02, 0.08}, {0.08, 0.02}, {3, 3}};
  for (int i = 0; i < 8; ++i) {
    s += "i" + std::to_string(i) + ",toy,color," + std::to_string(color[i][0]) + "," + std::to_string(color[i][1]) + "\n";
    s += "i" + std::to_string(i) + ",toy,sift," + std::to_string(0.3 * (i % 3)) + "," + std::to_string(0.2 * (i % 2)) + "\n";
  }
  return s;
}

TEST_F(CliTest, ImageDiversityConditionalAndPlainModes) {
  const auto feats = write("f.csv", features_csv());
  const auto ann = write("a.csv", "subcategory,a1,a2,b\ntoy,i0,i1,i7\ntoy,i2,i3,i7\ntoy,i4,i5,i7\n");
  const auto topk = write("t.csv", "subcategory,i1,i2,i3\ntoy,i0,i3,i7\ntoy,i1,i2,i7\n");
  Json c{{"schema_version", 1}, {"image_diversity", {{"features", feats}, {"annotations", ann}, {"mode", "conditional"}}}};
  ASSERT_EQ(call({"image-diversity", "--config", write_json("c.json", c), "--iters", "100", "--out", path("o")}), 0)
      << err_.str();
  EXPECT_TRUE(fs::exists(path("o/sigma_all_chain0.csv")));
  const Json s = Json::parse(slurp(path("o/summary.json")));
  EXPECT_TRUE(s["categories"]["all"]["parameters"].contains("sigma_color"));

  c["image_diversity"]["mode"] = "plain-kdpp";
  c["image_diversity"]["topk"] = topk;
  ASSERT_EQ(call({"image-diversity", "--config", write_json("p.json", c), "--iters", "50", "--out", path("p")}), 0)
      << err_.str();

  c["image_diversity"]["mode"] = "conditional";
  c["image_diversity"]["annotations"] = write("bad.csv", "subcategory,a1,a2,b\ntoy,i0,i1,nope\n");
  EXPECT_EQ(call({"image-diversity", "--config", write_json("b.json", c), "--iters", "10", "--out", path("b")}), 2);
}

TEST_F(CliTest, VersionAndHelp) {
  EXPECT_EQ(call({"--version"}), 0);
  EXPECT_EQ(out_.str(), dpplearn::cli::version() + "\n");
  EXPECT_EQ(call({"--help"}), 0);
  EXPECT_NE(out_.str().find("classify-loo"), std::string::npos);
}

}  // namespace
