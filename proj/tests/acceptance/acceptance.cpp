#include <cstdio>
#include <cstdlib>
#include <string>

#include "tpp/verify.hpp"

// Runs the thirteen acceptance criteria and prints one line per criterion.
// Optional argument: RNG seed (default 1).
int main(int argc, char** argv) {
  tpp::verify::Config cfg;
  if (argc > 1) cfg.seed = std::strtoull(argv[1], nullptr, 10);

  std::vector<std::string> only;
  for (const auto& s : tpp::verify::suites())
    if (s.criterion > 0) only.push_back(s.name);

  int failed = 0;
  for (const auto& r : tpp::verify::run(cfg, only)) {
    std::printf("criterion %2d %-24s %s  %s %.4g (budget %.4g), %.3g s of %.3g s\n", r.criterion, r.name.c_str(),
                r.pass ? "PASS" : "FAIL", r.metric.c_str(), r.measured, r.budget, r.seconds, r.time_limit);
    if (!r.pass) {
      std::printf("    %s\n", r.detail.c_str());
      ++failed;
    }
  }
  std::printf("%zu criteria, %d failed\n", only.size(), failed);
  return failed == 0 ? 0 : 1;
}
