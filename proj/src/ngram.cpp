#include "eqprior/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace eqprior {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kNoMass = 1e-12;

std::size_t kind_index(PhraseKind k) { return k == PhraseKind::Left ? 0 : 1; }
PhraseKind kind_at(std::size_t i) { return i == 0 ? PhraseKind::Left : PhraseKind::Right; }

}  // namespace

double SgtFit::smoothed(double r) const { return std::exp(intercept + slope * std::log(r)); }

std::uint64_t CountsOfCounts::at(std::uint64_t r) const {
  auto it = n.find(r);
  return it == n.end() ? 0 : it->second;
}

CountsOfCounts CountsOfCounts::from(std::map<std::uint64_t, std::uint64_t> n) {
  CountsOfCounts out;
  out.n = std::move(n);
  if (out.n.size() < 2) return out;

  // Z_r = N_r / (0.5 (t - q)) with q, t the neighbouring observed counts.
  std::vector<double> xs, ys;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> rs(out.n.begin(), out.n.end());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double r = static_cast<double>(rs[i].first);
    const double q = i == 0 ? 0.0 : static_cast<double>(rs[i - 1].first);
    const double t = i + 1 < rs.size() ? static_cast<double>(rs[i + 1].first) : 2.0 * r - q;
    const double z = static_cast<double>(rs[i].second) / (0.5 * (t - q));
    xs.push_back(std::log(r));
    ys.push_back(std::log(z));
  }
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0) return out;
  out.sgt.valid = true;
  out.sgt.slope = sxy / sxx;
  out.sgt.intercept = my - out.sgt.slope * mx;
  return out;
}

double good_turing_count(std::uint64_t count, const CountsOfCounts& table) {
  if (count == 0) throw std::invalid_argument("Good-Turing count needs C >= 1");
  const auto nc = table.at(count);
  const auto nc1 = table.at(count + 1);
  const double c = static_cast<double>(count);
  if (nc > 0 && nc1 > 0) return (c + 1.0) * static_cast<double>(nc1) / static_cast<double>(nc);
  if (table.sgt.valid) return (c + 1.0) * table.sgt.smoothed(c + 1.0) / table.sgt.smoothed(c);
  return c;
}

// ---------------------------------------------------------------------------

NGramModel NGramModel::train(std::span<const ExprTree> trees, int order, int k_backoff,
                             std::span<const std::string> extra_vocabulary) {
  if (trees.empty()) throw DataError("cannot train a language model on an empty corpus");
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  if (k_backoff < 0) throw ConfigError("back-off threshold k must be >= 0");

  NGramModel model;
  model.order_ = order;
  model.k_backoff_ = k_backoff;
  std::set<std::string> vocab(extra_vocabulary.begin(), extra_vocabulary.end());
  for (std::size_t k = 0; k < 2; ++k) {
    model.tables_[k].resize(model.max_context(kind_at(k)) + 1);
  }

  for (const auto& tree : trees) {
    for (auto& ph : extract_phrases(tree, order)) {
      for (const auto& w : ph.words) vocab.insert(w);
      auto& tables = model.tables_[kind_index(ph.kind)];
      const auto ctx = ph.context();
      for (std::size_t m = 0; m <= ctx.size(); ++m) {
        const auto sub = ctx.last(m);
        auto& contexts = tables[m].contexts;
        auto it = contexts.find(sub);
        if (it == contexts.end()) {
          it = contexts.emplace(std::vector<std::string>(sub.begin(), sub.end()), ContextStats{}).first;
        }
        ++it->second.targets[ph.target()];
        ++it->second.total;
      }
    }
  }
  model.vocabulary_.assign(vocab.begin(), vocab.end());
  model.finalize();
  return model;
}

bool NGramModel::in_vocabulary(std::string_view token) const {
  return std::binary_search(vocabulary_.begin(), vocabulary_.end(), token,
                            [](const auto& a, const auto& b) { return std::string_view(a) < std::string_view(b); });
}

std::size_t NGramModel::max_context(PhraseKind kind) const {
  return kind == PhraseKind::Left ? static_cast<std::size_t>(order_ - 1)
                                  : static_cast<std::size_t>(order_);
}

NGramModel NGramModel::with_vocabulary(std::span<const std::string> extra) const {
  NGramModel copy = *this;
  std::set<std::string> vocab(vocabulary_.begin(), vocabulary_.end());
  vocab.insert(extra.begin(), extra.end());
  if (vocab.size() == vocabulary_.size()) return copy;
  copy.vocabulary_.assign(vocab.begin(), vocab.end());
  copy.finalize();
  return copy;
}

NGramModel NGramModel::without_top_order() const {
  NGramModel copy = *this;
  for (auto& tables : copy.tables_) tables.back() = Table{};
  copy.finalize();
  return copy;
}

const NGramModel::Table* NGramModel::table(PhraseKind kind, std::size_t m) const {
  const auto& tables = tables_[kind_index(kind)];
  return m < tables.size() ? &tables[m] : nullptr;
}

double NGramModel::discount(PhraseKind kind, std::size_t context_length, std::uint64_t count) const {
  const Table* t = table(kind, context_length);
  if (!t || count == 0) return 1.0;
  const double d = good_turing_count(count, t->coc) / static_cast<double>(count);
  if (!(d > 0.0)) return 1.0;
  return std::min(d, 1.0);
}

double NGramModel::direct(PhraseKind kind, const ContextStats& st, std::size_t m,
                          std::uint64_t c) const {
  return st.scale * discount(kind, m, c) * static_cast<double>(c) / static_cast<double>(st.total);
}

void NGramModel::finalize() {
  for (std::size_t k = 0; k < 2; ++k) finalize_kind(kind_at(k));
}

void NGramModel::finalize_kind(PhraseKind kind) {
  const auto ki = kind_index(kind);
  auto& tables = tables_[ki];
  const auto k = static_cast<std::uint64_t>(k_backoff_);
  unigram_[ki] = Unigram{};

  for (std::size_t m = 0; m < tables.size(); ++m) {
    Table& t = tables[m];
    std::map<std::uint64_t, std::uint64_t> n;
    for (const auto& [ctx, st] : t.contexts) {
      for (const auto& [w, c] : st.targets) ++n[c];
    }
    t.coc = CountsOfCounts::from(std::move(n));

    for (auto& [ctx, st] : t.contexts) {
      st.scale = 1.0;
      st.alpha = 1.0;
      double seen = 0.0;
      std::size_t used = 0;
      for (const auto& [w, c] : st.targets) {
        if (c > k) {
          seen += direct(kind, st, m, c);
          ++used;
        }
      }
      st.beta = std::max(0.0, 1.0 - seen);

      std::vector<std::string_view> rest;
      for (const auto& w : vocabulary_) {
        auto it = st.targets.find(w);
        if (it == st.targets.end() || it->second <= k) rest.push_back(w);
      }

      if (m == 0) {
        if (rest.empty()) {
          if (seen > 0) st.scale = 1.0 / seen;
          st.beta = 0.0;
          continue;
        }
        double reserved = st.beta;
        if (reserved <= kNoMass) {
          // Nothing left after discounting: fall back to the Good-Turing
          // estimate of the unseen mass, N_1 / N.
          const auto n1 = t.coc.at(1);
          reserved = n1 > 0 ? static_cast<double>(n1) / static_cast<double>(st.total)
                            : 1.0 / static_cast<double>(st.total + 1);
          reserved = std::min(reserved, 0.5);
        }
        if (used > 0) st.scale = (1.0 - reserved) / seen;
        else reserved = 1.0;
        st.beta = reserved;
        unigram_[ki].unseen_each = reserved / static_cast<double>(rest.size());
        continue;
      }

      const std::span<const std::string> shorter = std::span<const std::string>(ctx).subspan(1);
      double denom = 0.0;
      for (auto w : rest) denom += prob(kind, shorter, w);
      if (!rest.empty() && denom > 0.0) {
        st.alpha = st.beta / denom;
      } else {
        st.alpha = 0.0;
        if (seen > 0) st.scale = 1.0 / seen;
        st.beta = 0.0;
      }
    }
  }
}

double NGramModel::prob(PhraseKind kind, std::span<const std::string> ctx,
                        std::string_view target) const {
  const auto k = static_cast<std::uint64_t>(k_backoff_);
  while (true) {
    const std::size_t m = ctx.size();
    const Table* t = table(kind, m);
    if (m == 0) {
      if (!t || t->contexts.empty()) return 1.0 / static_cast<double>(vocabulary_.size());
      const ContextStats& st = t->contexts.begin()->second;
      auto it = st.targets.find(target);
      if (it != st.targets.end() && it->second > k) return direct(kind, st, 0, it->second);
      return unigram_[kind_index(kind)].unseen_each;
    }
    auto found = t ? t->contexts.find(ctx) : decltype(t->contexts.end()){};
    if (!t || found == t->contexts.end()) {
      ctx = ctx.subspan(1);
      continue;
    }
    const ContextStats& st = found->second;
    auto it = st.targets.find(target);
    if (it != st.targets.end() && it->second > k) return direct(kind, st, m, it->second);
    return st.alpha * prob(kind, ctx.subspan(1), target);
  }
}

double NGramModel::probability(PhraseKind kind, std::span<const std::string> context,
                               std::string_view target) const {
  if (!in_vocabulary(target)) throw OutOfVocabulary(std::string(target));
  const auto limit = max_context(kind);
  if (context.size() > limit) context = context.last(limit);
  return prob(kind, context, target);
}

std::uint64_t NGramModel::count(PhraseKind kind, std::span<const std::string> context,
                                std::string_view target) const {
  const Table* t = table(kind, context.size());
  if (!t) return 0;
  auto it = t->contexts.find(context);
  if (it == t->contexts.end()) return 0;
  auto jt = it->second.targets.find(target);
  return jt == it->second.targets.end() ? 0 : jt->second;
}

std::uint64_t NGramModel::context_count(PhraseKind kind, std::span<const std::string> context) const {
  const Table* t = table(kind, context.size());
  if (!t) return 0;
  auto it = t->contexts.find(context);
  return it == t->contexts.end() ? 0 : it->second.total;
}

double NGramModel::backoff_weight(PhraseKind kind, std::span<const std::string> context) const {
  const Table* t = table(kind, context.size());
  if (!t || context.empty()) return 1.0;
  auto it = t->contexts.find(context);
  return it == t->contexts.end() ? 1.0 : it->second.alpha;
}

double NGramModel::leftover_mass(PhraseKind kind, std::span<const std::string> context) const {
  const Table* t = table(kind, context.size());
  if (!t) return 1.0;
  auto it = t->contexts.find(context);
  return it == t->contexts.end() ? 1.0 : it->second.beta;
}

const CountsOfCounts& NGramModel::counts_of_counts(PhraseKind kind, std::size_t context_length) const {
  const Table* t = table(kind, context_length);
  if (!t) throw std::out_of_range("no table for context length " + std::to_string(context_length));
  return t->coc;
}

std::vector<std::vector<std::string>> NGramModel::observed_contexts(PhraseKind kind) const {
  std::vector<std::vector<std::string>> out;
  for (const auto& t : tables_[kind_index(kind)]) {
    for (const auto& [ctx, st] : t.contexts) out.push_back(ctx);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string NGramModel::to_json() const {
  nlohmann::json j;
  j["format"] = "eqprior.ngram";
  j["version"] = kFormatVersion;
  j["order"] = order_;
  j["k_backoff"] = k_backoff_;
  j["vocabulary"] = vocabulary_;
  j["meta"] = metadata_;
  for (std::size_t ki = 0; ki < 2; ++ki) {
    nlohmann::json tables = nlohmann::json::array();
    const auto& ts = tables_[ki];
    for (std::size_t m = 0; m < ts.size(); ++m) {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& [ctx, st] : ts[m].contexts) {
        for (const auto& [w, c] : st.targets) rows.push_back({ctx, w, c});
      }
      nlohmann::json coc = nlohmann::json::array();
      for (const auto& [r, nr] : ts[m].coc.n) coc.push_back({r, nr});
      tables.push_back({{"context_length", m},
                        {"counts", rows},
                        {"counts_of_counts", coc},
                        {"sgt", {{"valid", ts[m].coc.sgt.valid},
                                 {"intercept", ts[m].coc.sgt.intercept},
                                 {"slope", ts[m].coc.sgt.slope}}}});
    }
    j["tables"][std::string(to_string(kind_at(ki)))] = std::move(tables);
  }
  return j.dump(1);
}

NGramModel NGramModel::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "eqprior.ngram") throw DataError("not an eqprior n-gram model");
  if (j.value("version", 0) != kFormatVersion) {
    throw DataError("unsupported model version " + std::to_string(j.value("version", 0)));
  }
  try {
    NGramModel model;
    model.order_ = j.at("order").get<int>();
    model.k_backoff_ = j.at("k_backoff").get<int>();
    if (model.order_ < 1 || model.k_backoff_ < 0) throw DataError("bad order or k in model");
    model.vocabulary_ = j.at("vocabulary").get<std::vector<std::string>>();
    if (j.contains("meta")) model.metadata_ = j.at("meta").get<std::map<std::string, std::string>>();
    std::sort(model.vocabulary_.begin(), model.vocabulary_.end());
    for (std::size_t ki = 0; ki < 2; ++ki) {
      const auto kind = kind_at(ki);
      auto& tables = model.tables_[ki];
      tables.resize(model.max_context(kind) + 1);
      for (const auto& tj : j.at("tables").at(std::string(to_string(kind)))) {
        const auto m = tj.at("context_length").get<std::size_t>();
        if (m >= tables.size()) throw DataError("context length beyond model order");
        for (const auto& row : tj.at("counts")) {
          auto ctx = row.at(0).get<std::vector<std::string>>();
          if (ctx.size() != m) throw DataError("context length mismatch in model table");
          const auto w = row.at(1).get<std::string>();
          const auto c = row.at(2).get<std::uint64_t>();
          auto& st = tables[m].contexts[ctx];
          st.targets[w] += c;
          st.total += c;
        }
      }
    }
    model.finalize();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model to " + path.string());
  out << to_json() << '\n';
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double log_prior(const NGramModel& model, const ExprTree& tree) {
  double lp = 0.0;
  for (const auto& ph : extract_phrases(tree, model.order())) {
    lp += std::log(model.probability(ph.kind, ph.context(), ph.target()));
  }
  return lp;
}

}  // namespace eqprior
