#include <gtest/gtest.h>

#include "diffnea/gradcheck.hpp"

namespace diffnea {
namespace {

TEST(Gradcheck, AllVariantsAgreeWithFiniteDifferences) {
  GradcheckConfig cfg;
  cfg.states = 4;
  cfg.seed = 3;
  cfg.hidden = {8, 8};
  const GradcheckReport report = run_gradcheck(cfg);
  EXPECT_EQ(report.cases.size(), 12u);
  for (const GradcheckCase& c : report.cases) {
    EXPECT_TRUE(c.passed()) << to_string(c.system) << "/" << to_string(c.actuator) << " " << c.max_rel_error;
    EXPECT_GT(c.params, 32u - 1);
  }
  EXPECT_TRUE(report.passed());
  EXPECT_TRUE(report.to_json().contains("cases"));
}

}  // namespace
}  // namespace diffnea
