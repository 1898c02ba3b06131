#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <string>

#include "biaslens/corpus.hpp"
#include "biaslens/error.hpp"

namespace biaslens {

/// Which first-order value e_{w:c} an explicit view exposes.
enum class ExplicitKind { ppmi, init_glove, esg, eglove };

inline std::string to_string(ExplicitKind k) {
  switch (k) {
    case ExplicitKind::ppmi: return "ppmi";
    case ExplicitKind::init_glove: return "init_glove";
    case ExplicitKind::esg: return "esg";
    case ExplicitKind::eglove: return "eglove";
  }
  return "?";
}

inline ExplicitKind parse_explicit_kind(const std::string& s) {
  if (s == "ppmi") return ExplicitKind::ppmi;
  if (s == "init_glove") return ExplicitKind::init_glove;
  if (s == "esg") return ExplicitKind::esg;
  if (s == "eglove") return ExplicitKind::eglove;
  throw ConfigError("unknown explicit representation '" + s + "'");
}

/// A |W|-dimensional first-order representation with row access. value()
/// returns nullopt for cells the view leaves undefined (unobserved cells of
/// init_glove); every other kind is total.
template <class V>
concept ExplicitView = requires(const V& v, WordId w) {
  { v.kind() } -> std::same_as<ExplicitKind>;
  { v.dimension() } -> std::convertible_to<std::size_t>;
  { v.value(w, w) } -> std::same_as<std::optional<double>>;
};

}  // namespace biaslens
