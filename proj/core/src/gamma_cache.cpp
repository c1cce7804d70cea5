#include <bit>
#include <cstring>
#include <fstream>

#include "ssb/error.hpp"
#include "ssb/wavelet.hpp"

namespace ssb {

namespace {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'S', 'B', 'G', 'A', 'M', 'M', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) fail(ErrorCode::IoError, "truncated gamma cache");
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) fail(ErrorCode::IoError, "truncated gamma cache");
  return v;
}

}  // namespace

void save_gamma(const std::string& path, const std::vector<GammaTensor>& gammas) {
  require(!gammas.empty(), ErrorCode::InvalidArgument, "nothing to save");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(gammas.size()));
  const auto& first = gammas.front();
  put_u32(out, static_cast<std::uint32_t>(first.factors.size()));
  put_u32(out, static_cast<std::uint32_t>(first.n_from));
  for (const auto& g : gammas) put_u32(out, static_cast<std::uint32_t>(g.n_to));
  for (const auto& f : first.factors) put_u32(out, static_cast<std::uint32_t>(f.cells));
  for (const auto& g : gammas) {
    put_f64(out, g.log_volume_from);
    put_f64(out, g.log_volume_to);
    put_f64(out, g.log_normalizer);
  }
  for (const auto& g : gammas)
    for (const auto& f : g.factors) {
      const auto dense = f.dense();
      out.write(reinterpret_cast<const char*>(dense.data()), static_cast<std::streamsize>(dense.size() * sizeof(double)));
    }
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

std::vector<GammaTensor> load_gamma(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) fail(ErrorCode::IoError, path + " is not a gamma cache");
  if (get_u32(in) != kVersion) fail(ErrorCode::IoError, "unsupported gamma cache version");
  const std::uint32_t intervals = get_u32(in);
  const std::uint32_t nfac = get_u32(in);
  std::vector<int> n(intervals + 1);
  for (auto& v : n) v = static_cast<int>(get_u32(in));
  std::vector<int> cells(nfac);
  for (auto& v : cells) v = static_cast<int>(get_u32(in));

  std::vector<GammaTensor> out(intervals);
  for (std::uint32_t k = 0; k < intervals; ++k) {
    out[k].n_from = n[k];
    out[k].n_to = n[k + 1];
    out[k].log_volume_from = get_f64(in);
    out[k].log_volume_to = get_f64(in);
    out[k].log_normalizer = get_f64(in);
  }
  for (std::uint32_t k = 0; k < intervals; ++k) {
    std::vector<std::vector<double>> dense(nfac);
    for (std::uint32_t f = 0; f < nfac; ++f) {
      dense[f].resize(static_cast<std::size_t>(n[k]) * n[k + 1] * cells[f] * cells[f]);
      in.read(reinterpret_cast<char*>(dense[f].data()), static_cast<std::streamsize>(dense[f].size() * sizeof(double)));
      if (!in) fail(ErrorCode::IoError, "truncated gamma cache");
    }
    set_gamma_factors(out[k], std::move(dense), cells);
  }
  return out;
}

}  // namespace ssb
