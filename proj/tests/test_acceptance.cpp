// Acceptance runner: executes every verification scenario in order and prints
// one pass/fail line each. Exits nonzero if any scenario fails, so the test
// harness treats the whole gate as a single test.
#include <cstdio>
#include <vector>

#include "dwm/checks.hpp"

int main() {
  const std::vector<dwm::CheckResult> results = dwm::run_all_checks();
  int passed = 0;
  for (const dwm::CheckResult& r : results) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    passed += r.pass ? 1 : 0;
  }
  std::printf("%d/%zu scenarios passed\n", passed, results.size());
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
