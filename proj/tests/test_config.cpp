#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "badr/config.hpp"

using namespace badr;
using nlohmann::json;

namespace {

// The message of the Error thrown while parsing `j`, or "" if none was thrown.
std::string parse_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsFromAnEmptyObject) {
  const Config c = parse_config(json::object());
  EXPECT_EQ(c.solver.name, "badr-gd");
  EXPECT_FALSE(c.solver.gamma);
  EXPECT_EQ(c.metric.kind, MetricKind::individual_fairness);
  EXPECT_EQ(c.model.kind, LossKind::logistic);
  ASSERT_TRUE(c.eval.train_frac);
  EXPECT_EQ(*c.eval.train_frac, 0.7);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(parse_error({{"metric", {{"name", "bogus"}}}}).find("config: metric.name: unknown metric 'bogus'"),
            std::string::npos);
  EXPECT_NE(parse_error({{"solver", {{"iters", -3}}}}).find("solver.iters"), std::string::npos);
  EXPECT_NE(parse_error({{"solver", {{"gamma", "fast"}}}}).find("solver.gamma"), std::string::npos);
  EXPECT_NE(parse_error({{"data", {{"colour", 1}}}}).find("data.colour"), std::string::npos);
  EXPECT_NE(parse_error({{"extra", {}}}).find("extra"), std::string::npos);
  EXPECT_NE(parse_error({{"eval", {{"train_frac", 1.5}}}}).find("eval.train_frac"), std::string::npos);
  EXPECT_NE(parse_error({{"data", {{"source", "csv"}}}}).find("data.path"), std::string::npos);
  EXPECT_NE(parse_error({{"solver", {{"name", "adam"}}}}).find("solver.name"), std::string::npos);
}

TEST(Config, AutoAndExplicitStepsizes) {
  const Config c = parse_config({{"solver", {{"tau", 0.5}, {"rho_dual", "auto"}, {"gamma", 0.01}}}});
  EXPECT_EQ(*c.solver.tau, 0.5);
  EXPECT_FALSE(c.solver.rho_dual);
  const auto [train, test] = build_problems(c);
  const BadrConfig cfg = badr_config(c, train);
  EXPECT_EQ(cfg.tau, 0.5);
  EXPECT_DOUBLE_EQ(cfg.rho_dual, 1.0 / train.smoothness);
  EXPECT_EQ(cfg.gamma, 0.01);
  EXPECT_EQ(train.ds().n() + test.ds().n(), 200u);

  const Config flat = parse_config({{"model", {{"reg", 0.0}}}});
  EXPECT_THROW(badr_config(flat, build_problems(flat).first), Error);
}

TEST(Config, NullSplitUsesAllRows) {
  const Config c = parse_config({{"eval", {{"train_frac", nullptr}}}});
  EXPECT_FALSE(c.eval.train_frac);
  const auto [train, test] = build_problems(c);
  EXPECT_EQ(train.ds().n(), 200u);
  EXPECT_EQ(train.data, test.data);
}

TEST(Config, CsvPathIsRelativeToTheConfigFile) {
  const auto dir = std::filesystem::path(testing::TempDir()) / "badr_cfg";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "d.csv") << "x,g,y\n1,a,1\n2,a,-1\n3,b,1\n4,b,-1\n";
  std::ofstream(dir / "c.json") << R"({"data": {"source": "csv", "path": "d.csv", "target": "y", "sensitive": ["g"]}})";
  const Config c = load_config(dir / "c.json");
  const Dataset ds = load_dataset(c);
  EXPECT_EQ(ds.n(), 4u);
  EXPECT_EQ(ds.num_groups(), 2u);

  std::ofstream(dir / "broken.json") << "{\"data\": ";
  EXPECT_THROW(load_config(dir / "broken.json"), Error);
  EXPECT_THROW(load_config(dir / "missing.json"), Error);
}
