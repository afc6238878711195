#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "riskval/errors.hpp"
#include "riskval/mlp.hpp"

namespace riskval {
namespace {

constexpr std::array<char, 8> kMagic = {'R', 'V', 'M', 'L', 'P', '0', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw InputError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_u64(out, net.layer_sizes().size());
  for (Eigen::Index s : net.layer_sizes()) write_u64(out, static_cast<std::uint64_t>(s));
  write_u64(out, static_cast<std::uint64_t>(net.num_parameters()));
  out.write(reinterpret_cast<const char*>(net.parameters().data()),
            static_cast<std::streamsize>(net.num_parameters() * static_cast<Eigen::Index>(sizeof(double))));
  if (!out) throw InputError("failed writing " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw InputError("not a network checkpoint: " + path.string());
  const std::uint64_t n = read_u64(in);
  if (n < 2 || n > 1024) throw InputError("implausible layer count in checkpoint");
  std::vector<Eigen::Index> sizes;
  for (std::uint64_t i = 0; i < n; ++i) sizes.push_back(static_cast<Eigen::Index>(read_u64(in)));
  Mlp net(sizes);
  if (read_u64(in) != static_cast<std::uint64_t>(net.num_parameters())) throw InputError("checkpoint parameter count mismatch");
  if (!in.read(reinterpret_cast<char*>(net.parameters().data()),
               static_cast<std::streamsize>(net.num_parameters() * static_cast<Eigen::Index>(sizeof(double))))) {
    throw InputError("truncated checkpoint");
  }
  return net;
}

}  // namespace riskval
