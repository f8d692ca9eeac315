#ifndef RQL_TESTS_HELPERS_HPP
#define RQL_TESTS_HELPERS_HPP

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace rql::test {

// Pearson chi-square statistic against a uniform expectation.
inline double chi_square_uniform(const std::vector<int64_t>& counts) {
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  const double expected = static_cast<double>(total) /
                          static_cast<double>(counts.size());
  double stat = 0.0;
  for (int64_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

// Critical value at significance 0.01 via the Wilson-Hilferty cube
// approximation (well under 1% off for df >= 2).
inline double chi_square_critical_01(int df) {
  const double z = 2.3263478740408408;  // Phi^-1(0.99)
  const double a = 2.0 / (9.0 * df);
  const double c = 1.0 - a + z * std::sqrt(a);
  return df * c * c * c;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("rql_test_" + tag + "_" + std::to_string(counter++) + "_" +
                    std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rql::test

#endif  // RQL_TESTS_HELPERS_HPP
