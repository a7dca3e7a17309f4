// Acceptance runner: one pass/fail line per criterion.
//
//   fmprior_acceptance [--work DIR] [N ...]
//
// With no numbers every criterion runs in order.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "acceptance.hpp"

namespace {

using namespace fmprior::acceptance;

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)(const Context&);
};

const Criterion kCriteria[] = {
    {1, "gradient fidelity", gradient_fidelity},
    {2, "linear-Gaussian mask oracle", gaussian_mask_oracle},
    {3, "score oracle", score_oracle},
    {4, "spectral correctness", spectral_correctness},
    {5, "FMReg solve", fmreg_solve},
    {6, "end-to-end synthetic benchmark", end_to_end},
    {7, "lambda-scaling", lambda_scaling},
    {8, "sign flip", sign_flip},
    {9, "determinism", determinism},
};

int usage() {
  std::fprintf(stderr, "usage: fmprior_acceptance [--work DIR] [1-9 ...]\n");
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.work = std::filesystem::current_path() / "acceptance_work";
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work") {
      if (++i == argc) return usage();
      ctx.work = argv[i];
    } else if (arg.size() == 1 && arg[0] >= '1' && arg[0] <= '9') {
      selected.push_back(arg[0] - '0');
    } else {
      return usage();
    }
  }
  if (selected.empty())
    for (const auto& c : kCriteria) selected.push_back(c.id);
  std::filesystem::create_directories(ctx.work);

  int failures = 0;
  for (int id : selected) {
    const Criterion& c = kCriteria[id - 1];
    const Stopwatch clock;
    Outcome out;
    try {
      out = c.run(ctx);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d (%s): %s  %s [%.1fs]\n", c.id, c.name, out.pass ? "PASS" : "FAIL", out.detail.c_str(),
                clock.seconds());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
