#include "rql/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "rql/errors.hpp"

// Format (all integers little-endian, see docs/checkpoint-format.md):
//   8-byte magic "RQLCKPT1", then records until EOF:
//     u32 name_len, name bytes,
//     u8 kind (1 = f32 tensor, 2 = u64, 3 = f64, 4 = string),
//     tensor: u32 rank, u32 dims[rank], f32 data[prod(dims)]
//     u64/f64: 8 bytes
//     string: u64 len, bytes

namespace rql {

namespace {

constexpr char kMagic[8] = {'R', 'Q', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr uint8_t kKindTensorF32 = 1;
constexpr uint8_t kKindU64 = 2;
constexpr uint8_t kKindF64 = 3;
constexpr uint8_t kKindString = 4;

template <typename T>
void put(std::ofstream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

struct CheckpointWriter::Impl {
  std::ofstream out;
  std::string path;

  void name(const std::string& n) {
    put<uint32_t>(out, static_cast<uint32_t>(n.size()));
    out.write(n.data(), static_cast<std::streamsize>(n.size()));
  }
};

CheckpointWriter::CheckpointWriter(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw IoError("cannot open checkpoint " + path + " for writing");
  impl_->out.write(kMagic, sizeof(kMagic));
}

CheckpointWriter::~CheckpointWriter() {
  close();
  delete impl_;
}

void CheckpointWriter::close() {
  if (impl_->out.is_open()) {
    impl_->out.flush();
    if (!impl_->out) throw IoError("failed writing checkpoint " + impl_->path);
    impl_->out.close();
  }
}

void CheckpointWriter::write_tensor(const std::string& name, const TensorF& t) {
  impl_->name(name);
  put<uint8_t>(impl_->out, kKindTensorF32);
  put<uint32_t>(impl_->out, static_cast<uint32_t>(t.rank()));
  for (int a = 0; a < t.rank(); ++a) {
    put<uint32_t>(impl_->out, static_cast<uint32_t>(t.dim(a)));
  }
  impl_->out.write(reinterpret_cast<const char*>(t.data()),
                   static_cast<std::streamsize>(t.size() * sizeof(float)));
}

void CheckpointWriter::write_u64(const std::string& name, uint64_t v) {
  impl_->name(name);
  put<uint8_t>(impl_->out, kKindU64);
  put<uint64_t>(impl_->out, v);
}

void CheckpointWriter::write_f64(const std::string& name, double v) {
  impl_->name(name);
  put<uint8_t>(impl_->out, kKindF64);
  put<double>(impl_->out, v);
}

void CheckpointWriter::write_string(const std::string& name, const std::string& v) {
  impl_->name(name);
  put<uint8_t>(impl_->out, kKindString);
  put<uint64_t>(impl_->out, v.size());
  impl_->out.write(v.data(), static_cast<std::streamsize>(v.size()));
}

void CheckpointWriter::write_params(const std::string& prefix, const ParamsF& params) {
  for (const auto& e : params.entries) {
    write_tensor(prefix + "/" + e.name, e.tensor);
  }
  write_u64(prefix + "/__version", params.version);
}

CheckpointReader::CheckpointReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path + " is not an rql checkpoint (bad magic)");
  }
  while (true) {
    const auto name_len = get<uint32_t>(in);
    if (in.eof()) break;
    if (!in || name_len > (1u << 20)) {
      throw IoError("corrupt checkpoint " + path + ": bad record name");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto kind = get<uint8_t>(in);
    if (!in) throw IoError("corrupt checkpoint " + path + ": truncated record");
    switch (kind) {
      case kKindTensorF32: {
        const auto rank = get<uint32_t>(in);
        if (!in || rank > 8) throw IoError("corrupt checkpoint: bad tensor rank");
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(get<uint32_t>(in));
        TensorF t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!in) throw IoError("corrupt checkpoint: truncated tensor " + name);
        tensors_.emplace(name, std::move(t));
        break;
      }
      case kKindU64:
        u64s_[name] = get<uint64_t>(in);
        break;
      case kKindF64:
        f64s_[name] = get<double>(in);
        break;
      case kKindString: {
        const auto len = get<uint64_t>(in);
        if (!in || len > (1ull << 30)) throw IoError("corrupt checkpoint: bad string");
        std::string v(static_cast<size_t>(len), '\0');
        in.read(v.data(), static_cast<std::streamsize>(len));
        strings_[name] = std::move(v);
        break;
      }
      default:
        throw IoError("corrupt checkpoint " + path + ": unknown record kind " +
                      std::to_string(kind));
    }
    if (!in) throw IoError("corrupt checkpoint " + path + ": truncated record");
  }
}

bool CheckpointReader::has(const std::string& name) const {
  return tensors_.count(name) || u64s_.count(name) || f64s_.count(name) ||
         strings_.count(name);
}

const TensorF& CheckpointReader::tensor(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw IoError("checkpoint misses tensor " + name);
  return it->second;
}

uint64_t CheckpointReader::u64(const std::string& name) const {
  const auto it = u64s_.find(name);
  if (it == u64s_.end()) throw IoError("checkpoint misses value " + name);
  return it->second;
}

double CheckpointReader::f64(const std::string& name) const {
  const auto it = f64s_.find(name);
  if (it == f64s_.end()) throw IoError("checkpoint misses value " + name);
  return it->second;
}

const std::string& CheckpointReader::str(const std::string& name) const {
  const auto it = strings_.find(name);
  if (it == strings_.end()) throw IoError("checkpoint misses string " + name);
  return it->second;
}

ParamsF CheckpointReader::read_params(const std::string& prefix,
                                      const ParamsF& layout) const {
  ParamsF out = layout;
  for (auto& e : out.entries) {
    const TensorF& stored = tensor(prefix + "/" + e.name);
    if (!stored.same_shape(e.tensor)) {
      throw IoError("checkpoint tensor " + prefix + "/" + e.name + " has shape " +
                    stored.shape_string() + ", expected " + e.tensor.shape_string());
    }
    e.tensor = stored;
  }
  out.version = u64(prefix + "/__version");
  return out;
}

}  // namespace rql
