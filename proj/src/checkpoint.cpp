#include "mran/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "mran/error.hpp"

namespace mran {

namespace {

constexpr char kMagic[8] = {'M', 'R', 'A', 'N', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw ParseError("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw ParseError("checkpoint truncated");
  return s;
}

void write_doubles(std::ostream& os, std::span<const double> v) {
  for (double d : v) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
  }
}

void read_doubles(std::istream& is, std::span<double> v) {
  for (double& d : v) {
    const uint64_t bits = read_u64(is);
    std::memcpy(&d, &bits, 8);
  }
}

}  // namespace

void save_checkpoint(const MranModel& model, const std::string& config_echo,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint file: " + path);
  os.write(kMagic, 8);
  write_string(os, config_echo);
  const auto named = model.named_params();
  write_u64(os, named.size());
  for (const auto& [name, p] : named) {
    write_string(os, name);
    write_u64(os, static_cast<uint64_t>(p.ndim()));
    for (int d : p.shape()) write_u64(os, static_cast<uint64_t>(d));
    write_doubles(os, p.values());
  }
  if (!os) throw Error("checkpoint write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read checkpoint file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError("not a checkpoint file: " + path);
  Checkpoint ck;
  ck.config_echo = read_string(is);
  const uint64_t count = read_u64(is);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(is);
    const uint64_t ndim = read_u64(is);
    std::vector<int> shape;
    for (uint64_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(read_u64(is)));
    Tensor t = Tensor::zeros(shape);
    read_doubles(is, t.values());
    if (!is) throw ParseError("checkpoint truncated: " + path);
    ck.params.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void load_checkpoint(MranModel& model, const std::string& path, std::string* config_echo) {
  Checkpoint ck = read_checkpoint(path);
  auto named = model.named_params();
  if (named.size() != ck.params.size())
    throw ValidationError("checkpoint parameter count does not match model");
  for (size_t i = 0; i < named.size(); ++i) {
    if (named[i].first != ck.params[i].first)
      throw ValidationError("checkpoint parameter '" + ck.params[i].first +
                            "' does not match model parameter '" + named[i].first + "'");
    if (named[i].second.shape() != ck.params[i].second.shape())
      throw ValidationError("checkpoint shape mismatch for '" + named[i].first + "'");
    std::copy(ck.params[i].second.values().begin(), ck.params[i].second.values().end(),
              named[i].second.values().begin());
  }
  if (config_echo) *config_echo = ck.config_echo;
}

}  // namespace mran
