#include "wait/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "wait/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace wait {

namespace {

constexpr char kMagic[8] = {'W', 'A', 'I', 'T', 'C', 'K', 'P', '1'};
constexpr int kMaxRank = 8;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint: " + path.string());
  return v;
}

std::string get_string(std::ifstream& in, std::uint64_t len,
                       const std::filesystem::path& path) {
  if (len > (1ull << 30)) throw DataError("implausible string length in " + path.string());
  std::string s(static_cast<std::size_t>(len), '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint: " + path.string());
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& nt : tensors)
    if (nt.first == name) return &nt.second;
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ckpt.version);
  put<std::uint64_t>(out, ckpt.arch_hash);
  put<std::uint32_t>(out, ckpt.epoch);
  put<std::uint64_t>(out, ckpt.config_text.size());
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel()) * 8);
  }
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path.string());

  Checkpoint ckpt;
  ckpt.version = get<std::uint32_t>(in, path);
  if (ckpt.version != 1)
    throw DataError("unsupported checkpoint version in " + path.string());
  ckpt.arch_hash = get<std::uint64_t>(in, path);
  ckpt.epoch = get<std::uint32_t>(in, path);
  ckpt.config_text = get_string(in, get<std::uint64_t>(in, path), path);

  const auto count = get<std::uint32_t>(in, path);
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > kMaxRank) throw DataError("implausible tensor rank in " + path.string());
    std::vector<int> shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = get<std::int32_t>(in, path);
      if (d < 1 || numel > (1ll << 40) / d)
        throw DataError("implausible tensor shape in " + path.string());
      numel *= d;
    }
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(numel) * 8);
    if (!in) throw DataError("truncated checkpoint: " + path.string());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace wait
