#include "nnkgc/cli/explain.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include "nnkgc/errors.hpp"
#include "nnkgc/text/tokenizer.hpp"
#include "nnkgc/train/ranking.hpp"
#include "nnkgc/train/trainer.hpp"

namespace nnkgc::cli {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::optional<std::size_t> parse_id(std::string_view s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] void not_found(std::string_view kind, std::string_view query,
                            const std::vector<std::string>& candidates) {
  const std::string q = lower(query);
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& c : candidates) ranked.emplace_back(edit_distance(q, lower(c)), c);
  std::sort(ranked.begin(), ranked.end());
  std::string msg = "unknown " + std::string(kind) + " '" + std::string(query) + "'";
  if (!ranked.empty()) {
    msg += "; did you mean:";
    std::set<std::string> shown;
    for (const auto& [d, name] : ranked) {
      if (shown.size() == 5) break;
      if (shown.insert(name).second) msg += " '" + name + "'";
    }
  }
  throw LookupError(msg);
}

}  // namespace

std::vector<std::string> highlight_tokens(std::string_view text, std::string_view target) {
  const auto target_words = text::split_words(target);
  const std::set<std::string> wanted(target_words.begin(), target_words.end());
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& w : text::split_words(text))
    if (wanted.contains(w) && seen.insert(w).second) out.push_back(w);
  return out;
}

kg::EntityId resolve_entity(const kg::KnowledgeGraph& kg, std::string_view query) {
  if (auto id = kg.find_entity(query)) return *id;
  const std::string q = lower(query);
  for (const auto& e : kg.entities())
    if (lower(e.name) == q) return *kg.find_entity(e.key);
  if (auto id = parse_id(query); id && *id < kg.entity_count()) return static_cast<kg::EntityId>(*id);
  std::vector<std::string> names;
  for (const auto& e : kg.entities()) names.push_back(e.name.empty() ? e.key : e.name);
  not_found("entity", query, names);
}

kg::RelationId resolve_relation(const kg::KnowledgeGraph& kg, std::string_view query) {
  if (auto id = kg.find_relation(query)) return *id;
  const std::string q = lower(query);
  std::vector<std::string> names;
  for (kg::RelationId r = 0; r < kg.relation_count(); ++r) {
    if (lower(kg.relation_phrase(r)) == q || lower(kg.relation_key(r)) == q) return r;
    names.push_back(kg.relation_key(r));
  }
  if (auto id = parse_id(query); id && *id < kg.relation_count()) return static_cast<kg::RelationId>(*id);
  not_found("relation", query, names);
}

ExplanationReport explain(const train::Model& model, const kg::KnowledgeGraph& kg, kg::EntityId head,
                          kg::RelationId relation, std::size_t top_n, std::optional<kg::EntityId> gold) {
  if (head >= kg.entity_count()) throw LookupError("unknown head id " + std::to_string(head));
  if (relation >= kg.relation_count()) throw LookupError("unknown relation id " + std::to_string(relation));
  const auto known = kg.true_tails(head, relation);
  if (!gold && !known.empty()) gold = known.front();

  ExplanationReport report;
  const auto& h = kg.entity(head);
  report.head_key = h.key;
  report.head_name = h.name;
  report.head_description = h.description;
  report.relation = kg.relation_phrase(relation);

  const ad::Tensor tails = model.all_tail_embeddings();
  train::Query query{head, relation, gold.value_or(head), false};
  const auto scored = train::score_query(model, kg, query, train::eval_neighborhood_seed(model.config()), tails);
  const auto& scores = scored.scores;

  auto make_entry = [&](kg::EntityId e) {
    ScoredEntity s;
    s.id = e;
    s.key = kg.entity(e).key;
    s.name = kg.entity(e).name;
    s.score = scores[e];
    s.rank = train::rank_tail(scores, e, known);
    s.is_gold = gold && *gold == e;
    return s;
  };

  // Other known answers are filtered from the prediction list, as in evaluation.
  std::vector<kg::EntityId> order;
  for (kg::EntityId e = 0; e < kg.entity_count(); ++e) {
    const bool filtered = std::binary_search(known.begin(), known.end(), e) && !(gold && *gold == e);
    if (!filtered) order.push_back(e);
  }
  std::stable_sort(order.begin(), order.end(), [&](kg::EntityId a, kg::EntityId b) {
    return scores[a] > scores[b];
  });
  for (std::size_t i = 0; i < std::min(top_n, order.size()); ++i) {
    report.predictions.push_back(make_entry(order[i]));
    report.gold_in_top = report.gold_in_top || report.predictions.back().is_gold;
  }
  if (gold) report.gold = make_entry(*gold);

  const auto& sub = scored.encoding.subgraphs.front();
  const auto& attention = scored.encoding.head_attention.front();
  report.truncated_neighborhood = sub.truncated;
  report.empty_neighborhood = sub.size() <= 1;
  const std::string top_name = report.predictions.empty() ? std::string() : report.predictions.front().name;
  const std::string gold_name = report.gold ? report.gold->name : std::string();
  for (std::size_t i = 1; i < sub.size(); ++i) {
    NeighborEntry n;
    n.id = sub.nodes[i];
    const auto& rec = kg.entity(n.id);
    n.key = rec.key;
    n.name = rec.name;
    n.description = rec.description;
    n.hop = sub.hop_of[i];
    n.degree = kg.incidences(n.id).size();
    if (!attention.empty()) n.attention = attention[i];
    for (const auto& inc : kg.incidences(n.id)) {
      auto it = std::find(sub.nodes.begin(), sub.nodes.end(), inc.other);
      if (it == sub.nodes.end()) continue;
      const auto j = static_cast<std::size_t>(it - sub.nodes.begin());
      if (sub.hop_of[j] >= n.hop) continue;
      // inc is seen from the neighbor; phrase it from the entity it was reached from.
      const kg::RelationId r = inc.relation;
      n.relation = inc.outgoing ? "inverse " + kg.relation_phrase(r) : kg.relation_phrase(r);
      n.via = kg.entity(inc.other).name;
      break;
    }
    const std::string text = rec.name + " " + rec.description;
    if (!top_name.empty()) n.highlights = highlight_tokens(text, top_name);
    if (!gold_name.empty()) n.gold_highlights = highlight_tokens(text, gold_name);
    report.neighbors.push_back(std::move(n));
  }
  std::stable_sort(report.neighbors.begin(), report.neighbors.end(),
                   [](const NeighborEntry& a, const NeighborEntry& b) {
                     if (a.attention && b.attention && *a.attention != *b.attention)
                       return *a.attention > *b.attention;
                     if (a.hop != b.hop) return a.hop < b.hop;
                     return a.degree > b.degree;
                   });
  return report;
}

void render_text(const ExplanationReport& r, std::ostream& out) {
  char buf[32];
  auto fmt = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return std::string(buf);
  };
  out << "Head: " << r.head_name << " (" << r.head_key << ")\n";
  if (!r.head_description.empty()) out << "Description: " << r.head_description << "\n";
  out << "Relation: " << r.relation << "\n";
  out << "Predicted tails:\n";
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    const auto& p = r.predictions[i];
    out << "  " << i + 1 << ". " << p.name << " (" << p.key << ") score=" << fmt(p.score)
        << (p.is_gold ? "  [gold]" : "") << "\n";
  }
  if (r.gold) {
    out << "Gold tail: " << r.gold->name << " (" << r.gold->key << ") score=" << fmt(r.gold->score)
        << " rank=" << r.gold->rank << (r.gold_in_top ? "" : "  (not in top predictions)") << "\n";
  } else {
    out << "Gold tail: none known\n";
  }
  if (r.empty_neighborhood) {
    out << "Neighbors: none (empty neighborhood)\n";
    return;
  }
  out << "Neighbors" << (r.truncated_neighborhood ? " (sampled)" : "") << ":\n";
  for (const auto& n : r.neighbors) {
    out << "  - " << n.name << " (" << n.key << ") hop=" << n.hop;
    if (n.attention) out << " attention=" << fmt(*n.attention);
    if (!n.relation.empty()) out << " relation=\"" << n.relation << "\" via " << n.via;
    out << "\n";
    if (!n.description.empty()) out << "      " << n.description << "\n";
    if (!n.highlights.empty()) {
      out << "      highlights:";
      for (const auto& w : n.highlights) out << ' ' << w;
      out << "\n";
    }
  }
}

nlohmann::json to_json(const ExplanationReport& r) {
  auto entity = [](const ScoredEntity& s) {
    return nlohmann::json{{"id", s.id}, {"key", s.key}, {"name", s.name},
                          {"score", s.score}, {"rank", s.rank}, {"is_gold", s.is_gold}};
  };
  nlohmann::json j;
  j["head"] = {{"key", r.head_key}, {"name", r.head_name}, {"description", r.head_description}};
  j["relation"] = r.relation;
  j["predictions"] = nlohmann::json::array();
  for (const auto& p : r.predictions) j["predictions"].push_back(entity(p));
  j["gold"] = r.gold ? entity(*r.gold) : nlohmann::json(nullptr);
  j["gold_in_top"] = r.gold_in_top;
  j["empty_neighborhood"] = r.empty_neighborhood;
  j["truncated_neighborhood"] = r.truncated_neighborhood;
  j["neighbors"] = nlohmann::json::array();
  for (const auto& n : r.neighbors) {
    nlohmann::json e{{"id", n.id},          {"key", n.key},
                     {"name", n.name},      {"description", n.description},
                     {"hop", n.hop},        {"degree", n.degree},
                     {"relation", n.relation}, {"via", n.via},
                     {"highlights", n.highlights}, {"gold_highlights", n.gold_highlights}};
    e["attention"] = n.attention ? nlohmann::json(*n.attention) : nlohmann::json(nullptr);
    j["neighbors"].push_back(std::move(e));
  }
  return j;
}

}  // namespace nnkgc::cli
