// Runs the acceptance criteria at full size. With no arguments every criterion runs; otherwise
// the arguments name criteria by number or suite name. One PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "refwalk/verify.hpp"

int main(int argc, char** argv) {
  using namespace refwalk;
  std::vector<const verify::Suite*> chosen;
  for (int i = 1; i < argc; ++i) {
    const verify::Suite* s = verify::find_suite(argv[i]);
    if (!s) {
      std::fprintf(stderr, "unknown criterion: %s\n", argv[i]);
      return 2;
    }
    chosen.push_back(s);
  }
  if (chosen.empty()) {
    for (const auto& s : verify::suites()) chosen.push_back(&s);
  }
  verify::Settings settings;
  settings.seed = 20261019;
  if (const char* t = std::getenv("REFWALK_THREADS")) settings.threads = std::max(1, std::atoi(t));

  int failures = 0;
  for (const verify::Suite* s : chosen) {
    const auto start = std::chrono::steady_clock::now();
    bool passed = false;
    std::string detail;
    try {
      const verify::SuiteReport report = s->run(settings);
      passed = report.passed();
      detail = report.summary() + "\n" + report.to_json().dump(2);
    } catch (const std::exception& ex) {
      detail = std::string("error: ") + ex.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < s->time_limit_seconds;
    passed = passed && in_time;
    failures += !passed;
    std::printf("criterion %d (%s): %s in %.1f s (limit %.0f s)\n", s->criterion, s->name.c_str(), passed ? "PASS" : "FAIL",
                seconds, s->time_limit_seconds);
    std::printf("%s\n", detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
