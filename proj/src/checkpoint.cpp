#include "tslab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "tslab/errors.hpp"

namespace tslab {

namespace {

using Kind = CheckpointError::Kind;

template <class T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <class T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n, "tensor name");
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(std::vector<float>& out) {
    need(out.size() * 4, "tensor payload");
    for (float& f : out) {
      std::uint32_t bits = get_le<std::uint32_t>("tensor payload");
      f = std::bit_cast<float>(bits);
    }
  }

  const std::string& path() const { return path_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(Kind::truncated, "checkpoint " + path_ + " is truncated while reading " + what);
    }
  }

  std::vector<char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uintmax_t checkpoint_size(const ModelParams& params) {
  std::uintmax_t n = kCheckpointHeaderBytes;
  for (const auto& [name, t] : params) n += kCheckpointEntryOverhead + name.size() + 8 * t.rank() + 4 * t.numel();
  return n;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::vector<char> out;
  out.reserve(checkpoint_size(params));
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CheckpointError(Kind::io, "tensor name too long: " + name.substr(0, 32) + "...");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (float f : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError(Kind::io, "cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError(Kind::io, "failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError(Kind::io, "cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(Kind::bad_magic, path.string() + " is not a checkpoint (bad magic bytes)");
  }
  Reader in(std::vector<char>(bytes.begin() + 4, bytes.end()), path.string());
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::bad_version, "checkpoint " + path.string() + " has version " +
                                                 std::to_string(version) + ", expected " +
                                                 std::to_string(kCheckpointVersion));
  }
  const auto count = in.get_le<std::uint32_t>("tensor count");
  ModelParams params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get_le<std::uint16_t>("name length");
    std::string name = in.get_string(name_len);
    const auto ndim = in.get_le<std::uint8_t>("rank");
    Shape shape(ndim);
    for (auto& d : shape) {
      const auto v = in.get_le<std::uint64_t>("dims");
      if (v == 0 || v > (1ULL << 32)) {
        throw CheckpointError(Kind::shape_mismatch, "tensor '" + name + "' has invalid dimension " + std::to_string(v));
      }
      d = static_cast<std::size_t>(v);
    }
    std::vector<float> values(shape_numel(shape));
    in.get_floats(values);
    params.insert_or_assign(std::move(name), Tensor::from(std::move(shape), std::move(values), true));
  }
  return params;
}

void validate_params(const ModelParams& params, const ModelConfig& config) {
  const auto specs = param_shapes(config);
  for (const auto& spec : specs) {
    auto it = params.find(spec.name);
    if (it == params.end()) {
      throw CheckpointError(Kind::missing_tensor, "weights lack tensor '" + spec.name + "' required by config '" +
                                                      config.tier_name + "'");
    }
    if (it->second.shape() != spec.shape) {
      throw CheckpointError(Kind::shape_mismatch, "tensor '" + spec.name + "' has shape " +
                                                      shape_str(it->second.shape()) + ", config expects " +
                                                      shape_str(spec.shape));
    }
  }
  if (params.size() != specs.size()) {
    for (const auto& [name, t] : params) {
      bool known = false;
      for (const auto& spec : specs) known = known || spec.name == name;
      if (!known) {
        throw CheckpointError(Kind::unknown_tensor, "tensor '" + name + "' is not part of config '" +
                                                        config.tier_name + "'");
      }
    }
  }
}

}  // namespace tslab
