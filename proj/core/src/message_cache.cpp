#include <bit>
#include <cstring>
#include <fstream>

#include "ssb/error.hpp"
#include "ssb/message_passing.hpp"

namespace ssb {

namespace {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'S', 'B', 'M', 'S', 'G', 'S', '1'};

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) fail(ErrorCode::IoError, "truncated message cache");
  return v;
}

void put_block(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_block(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(ErrorCode::IoError, "truncated message cache");
}

}  // namespace

void save_messages(const std::string& path, const MessageState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out.write(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(state.steps()));
  put_u32(out, static_cast<std::uint32_t>(state.cells()));
  put_u32(out, static_cast<std::uint32_t>(state.iterations));
  for (const auto& l : state.left) put_u32(out, static_cast<std::uint32_t>(l.rows()));
  for (int k = 0; k < state.steps(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    put_block(out, state.left[ks].data(), static_cast<std::size_t>(state.left[ks].size()));
    put_block(out, state.right[ks].data(), static_cast<std::size_t>(state.right[ks].size()));
    put_block(out, state.log_beta[ks].data(), static_cast<std::size_t>(state.log_beta[ks].size()));
    put_block(out, state.log_gamma[ks].data(), static_cast<std::size_t>(state.log_gamma[ks].size()));
  }
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

MessageState load_messages(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) fail(ErrorCode::IoError, path + " is not a message cache");
  const int steps = static_cast<int>(get_u32(in));
  const int cells = static_cast<int>(get_u32(in));
  MessageState st;
  st.iterations = static_cast<int>(get_u32(in));
  std::vector<int> n(static_cast<std::size_t>(steps));
  for (auto& v : n) v = static_cast<int>(get_u32(in));
  for (int k = 0; k < steps; ++k) {
    const int rows = n[static_cast<std::size_t>(k)];
    MessageMatrix l(rows, cells), r(rows, cells);
    get_block(in, l.data(), static_cast<std::size_t>(l.size()));
    get_block(in, r.data(), static_cast<std::size_t>(r.size()));
    st.left.push_back(std::move(l));
    st.right.push_back(std::move(r));
    Vector b(rows), g(rows);
    get_block(in, b.data(), static_cast<std::size_t>(rows));
    get_block(in, g.data(), static_cast<std::size_t>(rows));
    st.log_beta.push_back(std::move(b));
    st.log_gamma.push_back(std::move(g));
  }
  return st;
}

}  // namespace ssb
