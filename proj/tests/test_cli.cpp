#include <gtest/gtest.h>

#include "cli.hpp"
#include "fmprior/io.hpp"
#include "fmprior/mesh.hpp"
#include "manifest.hpp"
#include "support.hpp"

namespace fmprior {
namespace {

using testing::TempDir;

int fm(std::vector<std::string> args) {
  args.insert(args.begin(), "fmprior");
  return cli::run(args);
}

// Tiny end-to-end settings: order-6 maps on a level-1 icosphere family.
const std::vector<std::string> kSmall = {
    "--set", "deform.template=icosphere", "--set", "deform.level=2",       "--set", "deform.epsilon=0.05",
    "--set", "dataset.shapes=4",         "--set", "dataset.k=6",           "--set", "denoiser.order=6",
    "--set", "denoiser.widths=16,16",    "--set", "train.epochs=3",        "--set", "train.batch_size=2",
    "--set", "match.k=6",                "--set", "match.feature_widths=16", "--set", "match.feature_dim=8",
    "--set", "match.hks_count=4",        "--set", "match.steps=6",         "--set", "match.mask_every=3",
    "--set", "match.mask_samples=4",     "--set", "match.eval_zoomout_target=12", "--set", "match.theta_init=fan-in"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(fm({}), 2);
  EXPECT_EQ(fm({"frobnicate"}), 2);
  EXPECT_EQ(fm({"match", "--mesh1", "/nonexistent.off"}), 2);
  TempDir dir;
  EXPECT_EQ(fm({"synth-data", "--out", dir.path().string(), "--set", "no.such.key=1"}), 2);
  EXPECT_EQ(fm({"synth-data", "--out", dir.path().string(), "--set", "match.k=1"}), 2);
  EXPECT_EQ(fm({"--help"}), 0);
}

TEST(Cli, DataErrorsExitWithThree) {
  TempDir dir;
  const auto bad = dir.write("bad.pmap", "nope");
  const auto mesh = dir.write("m.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  EXPECT_EQ(fm({"eval", "--pred", bad.string(), "--gt", "identity", "--mesh2", mesh.string()}), 3);
}

TEST(Cli, EvalOfGroundTruthIsZero) {
  TempDir dir;
  const auto mesh = testing::grid_mesh(3, 3);
  write_off(mesh, dir / "m.off");
  save_pmap(identity_map(mesh.num_vertices()), dir / "gt.pmap");
  ASSERT_EQ(fm({"eval", "--pred", (dir / "gt.pmap").string(), "--gt", (dir / "gt.pmap").string(), "--mesh2",
                (dir / "m.off").string(), "--out", (dir / "ev").string()}),
            0);
  const auto report = cli::read_json(dir / "ev" / "eval.json");
  EXPECT_EQ(report["geodesic_error"]["mean"].get<double>(), 0.0);
  EXPECT_EQ(read_file(dir / "ev" / "curve.csv").substr(0, 23), "threshold,fraction\n0,1\n");
}

TEST(Cli, PipelineIsReproducible) {
  TempDir dir;
  auto run_all = [&](const std::string& tag) {
    const std::string root = (dir / tag).string();
    ASSERT_EQ(fm(with_small({"synth-data", "--out", root + "/data"})), 0);
    ASSERT_EQ(fm(with_small({"build-dataset", "--manifest", root + "/data/manifest.json", "--out", root + "/ds"})), 0);
    ASSERT_EQ(fm(with_small({"train", "--dataset", root + "/ds/dataset.json", "--out", root + "/ck.sgm"})), 0);
    ASSERT_EQ(fm(with_small({"sample", "--checkpoint", root + "/ck.sgm", "--count", "2", "--steps", "5", "--out",
                             root + "/samples"})),
              0);
    ASSERT_EQ(fm(with_small({"match", "--mesh1", root + "/data/shapes/shape_00000.off", "--mesh2",
                             root + "/data/shapes/shape_00001.off", "--checkpoint", root + "/ck.sgm", "--gt",
                             "identity", "--out", root + "/match"})),
              0);
  };
  // Reports embed input paths, so both runs use the same directory.
  run_all("run");
  std::filesystem::rename(dir / "run", dir / "a");
  run_all("run");
  std::filesystem::rename(dir / "run", dir / "b");
  for (const char* rel : {"data/shapes/shape_00003.off", "ds/maps/map_00002.fmat", "ck.sgm", "ck.sgm.loss.csv",
                          "samples/sample_001.fmat", "samples/sample_000_step_0005.ppm", "samples/samples.json",
                          "match/fmap.fmat", "match/pmap.pmap", "match/mask.fmat", "match/report.json"})
    EXPECT_EQ(read_file(dir / "a" / rel), read_file(dir / "b" / rel)) << rel;

  const auto report = cli::read_json(dir / "a" / "match" / "report.json");
  EXPECT_EQ(report["config"]["match.k"], "6");
  EXPECT_EQ(report["loss"]["total"].size(), 6u);
  EXPECT_TRUE(report.contains("geodesic_error"));
}

TEST(Cli, MatchOfIdenticalMeshesIsWithinAnEdge) {
  TempDir dir;
  ASSERT_EQ(fm(with_small({"synth-data", "--out", (dir / "data").string()})), 0);
  const std::string shape = (dir / "data" / "shapes" / "shape_00000.off").string();
  ASSERT_EQ(fm(with_small({"match", "--mesh1", shape, "--mesh2", shape, "--set", "match.mode=proper", "--gt",
                           "identity", "--out", (dir / "m").string()})),
            0);
  const auto mesh = load_mesh(shape);
  const double err = cli::read_json(dir / "m" / "report.json")["geodesic_error"]["mean"].get<double>();
  EXPECT_LT(err * std::sqrt(mesh.total_area()), mesh.mean_edge_length());
}

TEST(Cli, AblateAndBaselineTablesDoNotDependOnJobs) {
  TempDir dir;
  const std::string root = dir.path().string();
  ASSERT_EQ(fm(with_small({"synth-data", "--out", root + "/data"})), 0);
  ASSERT_EQ(fm(with_small({"build-dataset", "--manifest", root + "/data/manifest.json", "--out", root + "/ds"})), 0);
  ASSERT_EQ(fm(with_small({"train", "--dataset", root + "/ds/dataset.json", "--out", root + "/ck.sgm"})), 0);
  for (const char* jobs : {"1", "2"}) {
    ASSERT_EQ(fm(with_small({"ablate", "--pairs", root + "/data/manifest.json", "--checkpoint", root + "/ck.sgm",
                             "--modes", "vanilla-sds,full", "--jobs", jobs, "--out", root + "/ab" + jobs})),
              0);
    ASSERT_EQ(fm(with_small({"baseline", "--pairs", root + "/data/manifest.json", "--checkpoint", root + "/ck.sgm",
                             "--mask", "laplacian,distilled", "--jobs", jobs, "--out", root + "/bl" + jobs})),
              0);
  }
  EXPECT_EQ(read_file(dir / "ab1" / "ablation.json"), read_file(dir / "ab2" / "ablation.json"));
  EXPECT_EQ(read_file(dir / "bl1" / "baseline.csv"), read_file(dir / "bl2" / "baseline.csv"));
  const auto table = cli::read_json(dir / "ab1" / "ablation.json");
  EXPECT_EQ(table["pairs"].size(), 2u);
  EXPECT_EQ(table["summary"][1]["method"], "full");
}

}  // namespace
}  // namespace fmprior
