#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "fsa/csr_graph.hpp"

namespace fsa {

/// Parses whitespace-separated "u v" pairs, one per line. Blank lines and
/// lines whose first non-space character is '#' are skipped. N = 1 + max id.
inline CsrGraph parse_edge_list(std::istream& in, bool make_undirected) {
  std::vector<Edge> edges;
  std::int64_t max_id = -1;
  std::string line;
  std::size_t lineno = 0;
  auto skip_ws = [](std::string_view s, std::size_t i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    return i;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    std::size_t i = skip_ws(s, 0);
    if (i == s.size() || s[i] == '#') continue;
    std::array<std::int64_t, 2> ids{};
    for (auto& id : ids) {
      i = skip_ws(s, i);
      auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), id);
      if (ec != std::errc{} || ptr == s.data() + i) throw ParseError("edge list: expected two node ids", lineno);
      if (id < 0 || static_cast<std::uint64_t>(id) >= kMaxNodes)
        throw ParseError("edge list: node id out of range", lineno);
      i = static_cast<std::size_t>(ptr - s.data());
    }
    if (skip_ws(s, i) != s.size()) throw ParseError("edge list: trailing characters", lineno);
    max_id = std::max({max_id, ids[0], ids[1]});
    edges.emplace_back(ids[0], ids[1]);
  }
  if (edges.empty()) throw ParseError("edge list: no edges", 0);
  return build_csr(edges, static_cast<std::size_t>(max_id + 1), make_undirected);
}

inline CsrGraph load_edge_list(const std::string& path, bool make_undirected) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open edge list: " + path);
  return parse_edge_list(in, make_undirected);
}

/// Writes every stored CSR entry as "u v".
inline void write_edge_list(const CsrGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write edge list: " + path);
  for (const auto& [u, v] : edge_list(g)) out << u << ' ' << v << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Binary cache: "FSA1", N (u64 LE), rowptr[N+1] (u32 LE), col[E] (i32 LE).
namespace detail {
inline void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, bytes);
}
inline std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char buf[8] = {};
  if (!in.read(reinterpret_cast<char*>(buf), bytes)) throw ParseError("csr cache: truncated file", 0);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
  return v;
}
}  // namespace detail

inline void save_csr_binary(const CsrGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write csr cache: " + path);
  out.write("FSA1", 4);
  detail::put_le(out, g.num_nodes(), 8);
  for (auto r : g.rowptr()) detail::put_le(out, r, 4);
  for (auto c : g.col()) detail::put_le(out, static_cast<std::uint32_t>(c), 4);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline CsrGraph load_csr_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open csr cache: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FSA1", 4) != 0) throw ParseError("csr cache: bad magic", 0);
  const std::uint64_t n = detail::get_le(in, 8);
  if (n == 0 || n > kMaxNodes) throw ParseError("csr cache: bad node count", 0);
  std::vector<std::uint32_t> rowptr(n + 1);
  for (auto& r : rowptr) r = static_cast<std::uint32_t>(detail::get_le(in, 4));
  std::vector<NodeId> col(rowptr.back());
  for (auto& c : col) c = static_cast<NodeId>(static_cast<std::uint32_t>(detail::get_le(in, 4)));
  try {
    return CsrGraph(std::move(rowptr), std::move(col));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("csr cache: ") + e.what(), 0);
  }
}

}  // namespace fsa
