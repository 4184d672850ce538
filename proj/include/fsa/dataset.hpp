#pragma once

#include <charconv>
#include <initializer_list>
#include <stdexcept>
#include <type_traits>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fsa/csr_graph.hpp"
#include "fsa/features.hpp"
#include "fsa/generators.hpp"
#include "fsa/graph_io.hpp"

// Dataset spec strings name a graph reproducibly:
//   synth:powerlaw:N=100000,deg=20,exp=2.1,seed=42
//   synth:uniform:N=10000,deg=25,seed=7
//   edgelist:<path>      (made undirected)
//   csr:<path>           (binary cache written by `fsa gen --format csr`)

namespace fsa {

namespace detail {

inline std::map<std::string, std::string> parse_kv(std::string_view s, const std::string& spec) {
  std::map<std::string, std::string> kv;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const std::string_view item = s.substr(0, comma);
    const auto eq = item.find('=');
    require(eq != std::string_view::npos && eq > 0, "dataset '" + spec + "': expected key=value, got '" +
                                                        std::string(item) + "'");
    kv.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return kv;
}

template <class V>
V kv_get(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& spec) {
  auto it = kv.find(key);
  require(it != kv.end(), "dataset '" + spec + "': missing '" + key + "'");
  const std::string& text = it->second;
  V v{};
  if constexpr (std::is_floating_point_v<V>) {
    std::size_t used = 0;
    try {
      v = static_cast<V>(std::stod(text, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == text.size() && used > 0, "dataset '" + spec + "': bad number for '" + key + "'");
  } else {
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    require(ec == std::errc{} && p == text.data() + text.size(), "dataset '" + spec + "': bad integer for '" + key + "'");
  }
  return v;
}

inline void require_keys(const std::map<std::string, std::string>& kv, std::initializer_list<std::string_view> allowed,
                         const std::string& spec) {
  for (const auto& [k, _] : kv) {
    bool ok = false;
    for (auto a : allowed) ok |= (k == a);
    require(ok, "dataset '" + spec + "': unknown key '" + k + "'");
  }
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
  return h;
}

}  // namespace detail

inline CsrGraph load_graph(const std::string& spec) {
  constexpr std::string_view pl = "synth:powerlaw:", un = "synth:uniform:", el = "edgelist:", cs = "csr:";
  std::string_view s = spec;
  if (s.starts_with(pl)) {
    auto kv = detail::parse_kv(s.substr(pl.size()), spec);
    detail::require_keys(kv, {"N", "deg", "exp", "seed"}, spec);
    return gen_power_law(detail::kv_get<std::uint64_t>(kv, "N", spec), detail::kv_get<double>(kv, "deg", spec),
                         kv.count("exp") ? detail::kv_get<double>(kv, "exp", spec) : 2.1,
                         kv.count("seed") ? detail::kv_get<std::uint64_t>(kv, "seed", spec) : 42);
  }
  if (s.starts_with(un)) {
    auto kv = detail::parse_kv(s.substr(un.size()), spec);
    detail::require_keys(kv, {"N", "deg", "seed"}, spec);
    return gen_uniform(detail::kv_get<std::uint64_t>(kv, "N", spec), detail::kv_get<std::uint64_t>(kv, "deg", spec),
                       kv.count("seed") ? detail::kv_get<std::uint64_t>(kv, "seed", spec) : 42);
  }
  if (s.starts_with(el)) return load_edge_list(std::string(s.substr(el.size())), true);
  if (s.starts_with(cs)) return load_csr_binary(std::string(s.substr(cs.size())));
  throw InvalidArgument("unknown dataset spec '" + spec +
                        "' (expected synth:powerlaw:..., synth:uniform:..., edgelist:<path> or csr:<path>)");
}

/// Graph plus synthetic features and separable labels, all deterministic in
/// the spec string.
template <class T>
struct Dataset {
  std::string spec;
  CsrGraph graph;
  FeatureMatrix<T> features;
  std::vector<std::int32_t> labels;
  std::size_t classes = 0;
};

template <class T>
Dataset<T> make_dataset(CsrGraph graph, std::string spec, std::size_t d_feat, std::size_t classes) {
  detail::require(d_feat >= 1 && classes >= 1, "dataset: d_feat and classes must be >= 1");
  const std::uint64_t seed = detail::fnv1a(spec);
  Dataset<T> ds{std::move(spec), std::move(graph), {}, {}, classes};
  ds.features = random_features<T>(ds.graph.num_nodes(), d_feat, seed);
  ds.labels = projection_labels(ds.features, classes, seed ^ 0x1ABE1ULL);
  return ds;
}

template <class T>
Dataset<T> load_dataset(const std::string& spec, std::size_t d_feat, std::size_t classes) {
  return make_dataset<T>(load_graph(spec), spec, d_feat, classes);
}

}  // namespace fsa
