#ifndef RQL_METRICS_HPP
#define RQL_METRICS_HPP

#include <fstream>
#include <string>
#include <vector>

namespace rql {

// Deterministic shortest-round-trip formatting so CSV output is
// byte-reproducible for identical runs.
std::string csv_double(double v);

// CSV file with a schema version comment on the first line and a header row
// on the second.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::string& header);
  void row(const std::vector<std::string>& cells);
  void flush();

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace rql

#endif  // RQL_METRICS_HPP
