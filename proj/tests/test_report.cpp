#include <gtest/gtest.h>

#include "bagsim/report.hpp"
#include "support.hpp"

using namespace bagsim;
using namespace testing_support;

TEST(ReportJson, InferenceResultFields) {
  auto r = run_inference(noisy_or(), {{2, true}}, Technique::LW, {0.05, 100000, {}}, 1);
  auto j = to_json(r);
  for (const char* key : {"technique", "converged", "timed_out", "n_raw", "n_eff", "acceptance_rate", "posteriors",
                          "trace"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_FALSE(j.contains("wall_ms"));
  EXPECT_TRUE(to_json(r, true).contains("wall_ms"));
  EXPECT_FALSE(to_json(r, false, false).contains("trace"));
  EXPECT_EQ(j["technique"], "LW");
  ASSERT_EQ(j["posteriors"].size(), 3u);
  EXPECT_EQ(j["posteriors"][0]["id"], 0);
  EXPECT_EQ(j["posteriors"][0]["p"].get<double>(), r.at(0).p_hat);  // full precision
  EXPECT_EQ(j["trace"].size(), r.trace.size());
}

TEST(ReportJson, ExactMap) {
  auto j = to_json(exact_access(noisy_or()));
  EXPECT_EQ(j["technique"], "exact");
  EXPECT_NEAR(j["posteriors"][2]["p"].get<double>(), 0.6, 1e-15);
}

TEST(ReportJson, Violation) {
  auto vs = validate(AttackGraph({leaf(0, 1.0), or_node(1)}, {{1, 0}}));
  ASSERT_FALSE(vs.empty());
  auto j = to_json(vs.front());
  EXPECT_TRUE(j.contains("kind"));
  EXPECT_TRUE(j.contains("nodes"));
}

TEST(ReportTable, FourDecimals) {
  const auto t = posterior_table(noisy_or(), exact_access(noisy_or()));
  EXPECT_NE(t.find("0.6000"), std::string::npos) << t;
  EXPECT_NE(t.find("0.5000"), std::string::npos);
  EXPECT_EQ(t.find("0.60000"), std::string::npos);
  const auto s = sensitivity_table(noisy_or(), sensitivity_report(noisy_or(), 2, {}));
  EXPECT_NE(s.find("0.4000"), std::string::npos) << s;
}
