#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cftrag/cuckoo_index.hpp"
#include "cftrag/error.hpp"
#include "cftrag/forest.hpp"

namespace cftrag {

inline constexpr std::size_t kDefaultContextDepth = 3;

struct Occurrence {
  NodeAddress address;
  std::vector<std::string> up;
  std::vector<std::string> down;

  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

struct EntityContext {
  std::string label;
  std::vector<Occurrence> occurrences;  // block-list order

  friend bool operator==(const EntityContext&, const EntityContext&) = default;
};

struct ContextBundle {
  std::string query_text;
  std::vector<EntityContext> contexts;
  std::vector<std::string> missing;

  friend bool operator==(const ContextBundle&, const ContextBundle&) = default;
};

namespace detail {

inline Occurrence make_occurrence(const Forest& forest, NodeAddress addr, std::size_t n) {
  if (!forest.contains(addr)) {
    throw StaleAddress(Forest::describe(addr) + " is not in the forest; index and forest do not match");
  }
  auto chain = hierarchy_chain(forest, addr, n);
  return Occurrence{addr, std::move(chain.up), std::move(chain.down)};
}

inline std::string join_query(std::span<const std::string> entities) {
  std::string text;
  for (const auto& e : entities) {
    if (!text.empty()) text += ' ';
    text += e;
  }
  return text;
}

}  // namespace detail

/// Context generation over any retriever. `locate(label)` returns the
/// entity's addresses, or nullopt when the entity is unknown.
template <typename Locate>
ContextBundle generate_context_with(Locate&& locate, const Forest& forest, std::span<const std::string> entities,
                                    std::size_t n, std::optional<std::string> query_text = std::nullopt) {
  if (n == 0) throw std::invalid_argument("context depth must be at least 1");
  ContextBundle bundle;
  bundle.query_text = query_text ? std::move(*query_text) : detail::join_query(entities);
  for (const auto& entity : entities) {
    std::optional<std::vector<NodeAddress>> addrs = locate(entity);
    if (!addrs || addrs->empty()) {
      bundle.missing.push_back(entity);
      continue;
    }
    EntityContext ctx{entity, {}};
    ctx.occurrences.reserve(addrs->size());
    for (const auto& a : *addrs) ctx.occurrences.push_back(detail::make_occurrence(forest, a, n));
    bundle.contexts.push_back(std::move(ctx));
  }
  return bundle;
}

/// Looks each entity up in the cuckoo index (raising its temperature), then
/// walks its block list and collects up to `n` ancestors and descendants for
/// every occurrence.
template <std::size_t S, std::size_t B>
ContextBundle generate_context(BasicCuckooIndex<S, B>& index, const Forest& forest,
                               std::span<const std::string> entities, std::size_t n = kDefaultContextDepth,
                               std::optional<std::string> query_text = std::nullopt) {
  if (n == 0) throw std::invalid_argument("context depth must be at least 1");
  ContextBundle bundle;
  bundle.query_text = query_text ? std::move(*query_text) : detail::join_query(entities);
  for (const auto& entity : entities) {
    const auto found = index.lookup_and_touch(entity);
    if (!found) {
      bundle.missing.push_back(entity);
      continue;
    }
    EntityContext ctx{entity, {}};
    const auto& head = index.head(*found);
    ctx.occurrences.reserve(head.count);
    for (auto b = head.first; b; b = index.block(b).next) {
      for (const auto& addr : index.block(b).view()) ctx.occurrences.push_back(detail::make_occurrence(forest, addr, n));
    }
    bundle.contexts.push_back(std::move(ctx));
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Prompt rendering

inline constexpr std::string_view kDefaultSystemPrompt =
    "You are a helpful assistant. Answer the question using the hierarchical context below.";

inline constexpr std::string_view kDefaultTemplate =
    "The upward hierarchical relationship of entity {entity} are: {up}. "
    "The downward hierarchical relationship of entity {entity} are: {down}.";

/// "B", "B and C", "B, C and D"; an empty list renders as "none".
inline std::string join_labels(std::span<const std::string> labels) {
  if (labels.empty()) return "none";
  std::string out = labels[0];
  for (std::size_t i = 1; i < labels.size(); ++i) {
    out += (i + 1 == labels.size()) ? " and " : ", ";
    out += labels[i];
  }
  return out;
}

inline void validate_template(std::string_view tmpl) {
  for (std::string_view p : {"{entity}", "{up}", "{down}"}) {
    if (tmpl.find(p) == std::string_view::npos) {
      throw BadTemplate("prompt template is missing the " + std::string(p) + " placeholder");
    }
  }
}

inline std::string render_line(std::string_view tmpl, std::string_view entity, const Occurrence& occ) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      if (tmpl.substr(i, 8) == "{entity}") {
        out += entity;
        i += 8;
        continue;
      }
      if (tmpl.substr(i, 4) == "{up}") {
        out += join_labels(occ.up);
        i += 4;
        continue;
      }
      if (tmpl.substr(i, 6) == "{down}") {
        out += join_labels(occ.down);
        i += 6;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

/// System prompt, one template line per occurrence, then the query; each
/// followed by a newline.
inline std::string render_prompt(const ContextBundle& bundle, std::string_view system_prompt = kDefaultSystemPrompt,
                                 std::string_view tmpl = kDefaultTemplate) {
  validate_template(tmpl);
  std::string out;
  out += system_prompt;
  out += '\n';
  for (const auto& ctx : bundle.contexts) {
    for (const auto& occ : ctx.occurrences) {
      out += render_line(tmpl, ctx.label, occ);
      out += '\n';
    }
  }
  out += bundle.query_text;
  out += '\n';
  return out;
}

}  // namespace cftrag
