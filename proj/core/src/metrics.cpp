#include "rql/metrics.hpp"

#include <charconv>

#include "rql/errors.hpp"

namespace rql {

std::string csv_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::string& schema,
                     const std::string& header)
    : out_(path), path_(path) {
  if (!out_) throw IoError("cannot open " + path + " for writing");
  out_ << "# " << schema << "\n" << header << "\n";
  out_.flush();
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ",";
    out_ << cells[i];
  }
  out_ << "\n";
  out_.flush();
  if (!out_) throw IoError("failed writing " + path_);
}

void CsvWriter::flush() { out_.flush(); }

}  // namespace rql
