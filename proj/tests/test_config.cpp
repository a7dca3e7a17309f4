#include <gtest/gtest.h>

#include "fmprior/config.hpp"
#include "support.hpp"

namespace fmprior {
namespace {

using testing::error_code_of;

TEST(RunConfig, TextOverridesDefaults) {
  RunConfig c;
  apply_config_text(c,
                    "# prior\n"
                    "denoiser.widths = 64, 32\n"
                    "schedule.sigma_max=2.5   # trailing comment\n"
                    "\n"
                    "match.mode = mask-proper\n"
                    "match.sds_signed = true\n"
                    "deform.template = icosphere\n"
                    "seed = 18446744073709551615\n");
  EXPECT_EQ(c.denoiser.widths, (std::vector<int>{64, 32}));
  EXPECT_EQ(c.schedule.sigma_max, 2.5);
  EXPECT_EQ(c.match.mode, ZeroShotMode::kMaskProper);
  EXPECT_TRUE(c.match.sds_signed);
  EXPECT_EQ(c.deform.kind, TemplateKind::kIcosphere);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.get("match.k"), "30");
}

TEST(RunConfig, ErrorsNameTheLine) {
  RunConfig c;
  try {
    apply_config_text(c, "seed = 1\nmatch.nope = 3\n", "run.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    EXPECT_NE(e.detail().find("run.cfg:2"), std::string::npos);
    EXPECT_NE(e.detail().find("match.nope"), std::string::npos);
  }
  EXPECT_EQ(error_code_of([&] { apply_config_text(c, "match.k = thirty\n"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] { apply_config_text(c, "match.alpha\n"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] { apply_config_text(c, "match.alpha = 0.1x\n"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] { apply_override(c, "seed"); }), ErrorCode::kInvalidArgument);
}

TEST(RunConfig, ResolvedTextRoundTrips) {
  RunConfig c;
  apply_override(c, "match.alpha=0.1234567890123");
  apply_override(c, "schedule.sigma_min = 1e-3");
  RunConfig d;
  apply_config_text(d, c.to_text());
  EXPECT_EQ(d.resolved(), c.resolved());
  EXPECT_EQ(d.match.alpha, 0.1234567890123);
  EXPECT_EQ(c.resolved().size(), RunConfig::keys().size());
}

TEST(RunConfig, ValidateCatchesInconsistentSections) {
  RunConfig c;
  c.validate();
  c.match.features.output_dim = 10;  // below k
  EXPECT_EQ(error_code_of([&] { c.validate(); }), ErrorCode::kInvalidArgument);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(x)), x);
}

}  // namespace
}  // namespace fmprior
