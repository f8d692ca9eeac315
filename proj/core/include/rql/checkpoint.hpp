#ifndef RQL_CHECKPOINT_HPP
#define RQL_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>

#include "rql/network.hpp"
#include "rql/tensor.hpp"

namespace rql {

// Versioned binary container of named records (tensors with shape headers
// and raw little-endian data, plus scalar and string metadata). The exact
// byte layout is documented in docs/checkpoint-format.md; round-trips are
// bit-exact.
class CheckpointWriter {
 public:
  explicit CheckpointWriter(const std::string& path);
  ~CheckpointWriter();

  void write_tensor(const std::string& name, const TensorF& t);
  void write_u64(const std::string& name, uint64_t v);
  void write_f64(const std::string& name, double v);
  void write_string(const std::string& name, const std::string& v);

  // One record per entry under `prefix/`, plus `prefix/__version`.
  void write_params(const std::string& prefix, const ParamsF& params);

  void close();

 private:
  struct Impl;
  Impl* impl_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  bool has(const std::string& name) const;
  const TensorF& tensor(const std::string& name) const;
  uint64_t u64(const std::string& name) const;
  double f64(const std::string& name) const;
  const std::string& str(const std::string& name) const;

  // Reassembles a parameter set whose entry names and shapes must match the
  // given layout (typically Network::zero_params()).
  ParamsF read_params(const std::string& prefix, const ParamsF& layout) const;

 private:
  std::map<std::string, TensorF> tensors_;
  std::map<std::string, uint64_t> u64s_;
  std::map<std::string, double> f64s_;
  std::map<std::string, std::string> strings_;
};

}  // namespace rql

#endif  // RQL_CHECKPOINT_HPP
