#include "lfpw/dividing_lines.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lfpw/error.hpp"
#include "lfpw/syntax.hpp"

namespace lfpw {

const char* to_string(PropertyKind k) {
  switch (k) {
    case PropertyKind::OP: return "OP";
    case PropertyKind::sOP: return "sOP";
    case PropertyKind::IP: return "IP";
    case PropertyKind::TP2: return "TP2";
  }
  return "?";
}

PropertyKind parse_kind(const std::string& s) {
  std::string u;
  for (char c : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "OP") return PropertyKind::OP;
  if (u == "SOP") return PropertyKind::sOP;
  if (u == "IP") return PropertyKind::IP;
  if (u == "TP2") return PropertyKind::TP2;
  throw FormatError("unknown property kind '" + s + "'");
}

BudgetTracker::BudgetTracker(const Budget& b) : budget_(b), start_(std::chrono::steady_clock::now()) {}

void BudgetTracker::tick() {
  ++nodes_;
  if (budget_.nodes && nodes_ > *budget_.nodes) {
    throw BudgetExhausted("node budget of " + std::to_string(*budget_.nodes) + " exhausted");
  }
  if (budget_.wall && (nodes_ & 255U) == 0 && std::chrono::steady_clock::now() - start_ > *budget_.wall) {
    throw BudgetExhausted("time budget of " + std::to_string(budget_.wall->count()) + " ms exhausted");
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::ordered_json tuples_json(const std::vector<Tuple>& ts) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& t : ts) out.push_back(t);
  return out;
}

std::vector<Tuple> tuples_from(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) return {};
  if (!j[field].is_array()) throw FormatError(std::string("certificate field \"") + field + "\" must be a list");
  std::vector<Tuple> out;
  for (const auto& t : j[field]) {
    if (!t.is_array()) throw FormatError(std::string("certificate field \"") + field + "\" must hold tuples");
    Tuple tup;
    for (const auto& e : t) {
      if (!e.is_number_integer() || e.get<long long>() < 0) throw FormatError("certificate entries must be naturals");
      tup.push_back(e.get<Element>());
    }
    out.push_back(std::move(tup));
  }
  return out;
}

}  // namespace

std::string certificate_to_json(const PropertyCertificate& c, const PartitionedFormula* phi, int indent) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["n"] = c.n;
  j["structure"] = c.structure;
  if (phi != nullptr) {
    j["formula"] = render(phi->formula);
    j["x"] = phi->x;
    j["y"] = phi->y;
  }
  j["a"] = tuples_json(c.a);
  j["b"] = tuples_json(c.b);
  return j.dump(indent);
}

PropertyCertificate certificate_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed certificate JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() || !j.contains("n") ||
      !j["n"].is_number_integer()) {
    throw FormatError("certificate needs \"kind\" and \"n\"");
  }
  PropertyCertificate c;
  c.kind = parse_kind(j["kind"].get<std::string>());
  if (j["n"].get<long long>() < 1) throw FormatError("certificate n must be positive");
  c.n = j["n"].get<std::size_t>();
  c.structure = j.value("structure", std::string());
  c.a = tuples_from(j, "a");
  c.b = tuples_from(j, "b");
  return c;
}

// ---------------------------------------------------------------------------
// Bounds

namespace {

constexpr std::uint64_t kSaturated = std::uint64_t{1} << 62;

std::uint64_t sat_pow(std::uint64_t base, std::size_t e) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (base != 0 && r > kSaturated / base) return kSaturated;
    r *= base;
  }
  return r;
}

}  // namespace

std::size_t trivial_bound(PropertyKind kind, std::size_t universe, std::size_t x_width, std::size_t y_width) {
  const std::uint64_t mx = sat_pow(universe, x_width);
  const std::uint64_t my = sat_pow(universe, y_width);
  auto clamp = [](std::uint64_t v) { return static_cast<std::size_t>(std::min<std::uint64_t>(v, 1U << 30)); };
  switch (kind) {
    case PropertyKind::OP: return clamp(std::min(mx, my));
    case PropertyKind::sOP: return clamp(std::min(my, mx + 1));
    case PropertyKind::IP: {
      std::size_t n = 0;
      while (n + 1 <= mx && n + 1 < 62 && (std::uint64_t{1} << (n + 1)) <= my) ++n;
      return n;
    }
    case PropertyKind::TP2: {
      if (mx == 0 || my == 0) return 0;
      std::size_t n = 1;
      while (sat_pow(n + 1, n + 1) <= mx && n + 1 <= my) ++n;
      return n;
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Detector

namespace {

void check_partition(const PartitionedFormula& phi) {
  std::set<std::string> xs(phi.x.begin(), phi.x.end());
  std::set<std::string> ys(phi.y.begin(), phi.y.end());
  if (xs.size() != phi.x.size() || ys.size() != phi.y.size()) throw SignatureError("partition repeats a variable");
  for (const auto& v : xs) {
    if (ys.count(v) != 0) throw SignatureError("variable " + v + " is in both parts of the partition");
  }
  for (const auto& v : free_variables(phi.formula)) {
    if (xs.count(v) == 0 && ys.count(v) == 0) throw SignatureError("free variable " + v + " is not partitioned");
  }
}

std::vector<std::uint32_t> classify(const std::vector<Bitset>& sets) {
  std::map<std::vector<Bitset::Word>, std::uint32_t> ids;
  std::vector<std::uint32_t> out(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::vector<Bitset::Word> key(sets[i].data(), sets[i].data() + sets[i].word_count());
    auto [it, fresh] = ids.emplace(std::move(key), static_cast<std::uint32_t>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

constexpr std::uint64_t kIncidenceLimit = std::uint64_t{1} << 28;

}  // namespace

Detector::Detector(PartitionedFormula phi, const FiniteStructure& m)
    : phi_(std::move(phi)), name_(m.name()), m_(m.size()) {
  check_partition(phi_);
  nx_ = tuple_space(m_, phi_.x.size());
  ny_ = tuple_space(m_, phi_.y.size());
  if (nx_ > kIncidenceLimit / std::max<std::uint64_t>(ny_, 1)) {
    throw EvalError("incidence matrix " + std::to_string(nx_) + " x " + std::to_string(ny_) + " is too large");
  }
  std::vector<std::string> vars = phi_.x;
  vars.insert(vars.end(), phi_.y.begin(), phi_.y.end());
  Evaluator e(m);
  const Relation r = e.satisfying(phi_.formula, vars);
  rows_.assign(static_cast<std::size_t>(nx_), Bitset(static_cast<std::size_t>(ny_)));
  cols_.assign(static_cast<std::size_t>(ny_), Bitset(static_cast<std::size_t>(nx_)));
  for (auto code : r.codes()) {
    const auto xa = code / ny_;
    const auto yb = code % ny_;
    rows_[xa].set(static_cast<std::size_t>(yb));
    cols_[yb].set(static_cast<std::size_t>(xa));
  }
  row_class_ = classify(rows_);
  col_class_ = classify(cols_);
}

Tuple Detector::x_tuple(std::uint64_t code) const { return decode_tuple(code, phi_.x.size(), m_); }
Tuple Detector::y_tuple(std::uint64_t code) const { return decode_tuple(code, phi_.y.size(), m_); }

std::optional<PropertyCertificate> Detector::detect(PropertyKind kind, std::size_t n, const Budget& budget) {
  if (n == 0) throw EvalError("n must be at least 1");
  if (n > trivial_bound(kind, m_, phi_.x.size(), phi_.y.size())) return std::nullopt;
  BudgetTracker t(budget);
  switch (kind) {
    case PropertyKind::OP: return detect_op(n, t);
    case PropertyKind::IP: return detect_ip(n, t);
    case PropertyKind::sOP: return detect_sop(n, t);
    case PropertyKind::TP2: return detect_tp2(n, t);
  }
  return std::nullopt;
}

std::optional<PropertyCertificate> Detector::detect_op(std::size_t n, BudgetTracker& t) {
  std::vector<std::vector<bool>> pattern(n, std::vector<bool>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) pattern[j][i] = i < j;
  }
  return detect_a_first(PropertyKind::OP, n, pattern, t);
}

std::optional<PropertyCertificate> Detector::detect_ip(std::size_t n, BudgetTracker& t) {
  const std::size_t slots = std::size_t{1} << n;
  std::vector<std::vector<bool>> pattern(slots, std::vector<bool>(n));
  for (std::size_t j = 0; j < slots; ++j) {
    for (std::size_t i = 0; i < n; ++i) pattern[j][i] = ((j >> i) & 1U) != 0;
  }
  return detect_a_first(PropertyKind::IP, n, pattern, t);
}

std::optional<PropertyCertificate> Detector::detect_a_first(PropertyKind kind, std::size_t n,
                                                            const std::vector<std::vector<bool>>& pattern,
                                                            BudgetTracker& t) {
  const std::size_t slots = pattern.size();
  const std::uint32_t classes = row_class_.empty() ? 0 : *std::max_element(row_class_.begin(), row_class_.end()) + 1;
  std::vector<std::uint64_t> chosen(n);
  std::vector<Bitset> final_sets;

  std::function<bool(std::size_t, const std::vector<Bitset>&)> dfs = [&](std::size_t i,
                                                                         const std::vector<Bitset>& cand) {
    t.tick();
    if (i == n) {
      final_sets = cand;
      return true;
    }
    std::vector<char> tried(classes, 0);
    std::vector<Bitset> next(slots);
    for (std::uint64_t a = 0; a < nx_; ++a) {
      const auto cls = row_class_[a];
      if (tried[cls]) continue;
      tried[cls] = 1;
      bool ok = true;
      for (std::size_t s = 0; s < slots && ok; ++s) {
        next[s] = cand[s];
        if (pattern[s][i]) {
          next[s] &= rows_[a];
        } else {
          next[s].subtract(rows_[a]);
        }
        ok = next[s].any();
      }
      if (!ok) continue;
      chosen[i] = a;
      if (dfs(i + 1, next)) return true;
    }
    return false;
  };

  std::vector<Bitset> start(slots, Bitset(static_cast<std::size_t>(ny_), true));
  if (!dfs(0, start)) return std::nullopt;
  PropertyCertificate c;
  c.kind = kind;
  c.n = n;
  c.structure = name_;
  for (auto a : chosen) c.a.push_back(x_tuple(a));
  for (const auto& s : final_sets) c.b.push_back(y_tuple(s.find_first()));
  return c;
}

std::optional<PropertyCertificate> Detector::detect_sop(std::size_t n, BudgetTracker& t) {
  const std::uint32_t classes = col_class_.empty() ? 0 : *std::max_element(col_class_.begin(), col_class_.end()) + 1;
  std::vector<const Bitset*> sets(classes, nullptr);
  for (std::uint64_t y = 0; y < ny_; ++y) {
    if (sets[col_class_[y]] == nullptr) sets[col_class_[y]] = &cols_[y];
  }
  std::vector<std::size_t> count(classes);
  for (std::uint32_t c = 0; c < classes; ++c) count[c] = sets[c]->count();
  auto proper_subset = [&](std::uint32_t a, std::uint32_t b) {
    return count[a] < count[b] && sets[a]->is_subset_of(*sets[b]);
  };
  // longest[c]: length of the longest strict chain starting at class c
  std::vector<std::uint32_t> order(classes);
  for (std::uint32_t c = 0; c < classes; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return count[a] > count[b]; });
  std::vector<std::size_t> longest(classes, 1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto c = order[i];
    for (std::size_t j = 0; j < i; ++j) {
      const auto d = order[j];
      t.tick();
      if (longest[d] + 1 > longest[c] && proper_subset(c, d)) longest[c] = longest[d] + 1;
    }
  }
  PropertyCertificate cert;
  cert.kind = PropertyKind::sOP;
  cert.n = n;
  cert.structure = name_;
  std::optional<std::uint32_t> prev;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t need = n - step;
    bool found = false;
    for (std::uint64_t y = 0; y < ny_; ++y) {
      const auto c = col_class_[y];
      if (longest[c] < need) continue;
      if (prev && !proper_subset(*prev, c)) continue;
      cert.b.push_back(y_tuple(y));
      prev = c;
      found = true;
      break;
    }
    if (!found) return std::nullopt;
  }
  return cert;
}

std::optional<PropertyCertificate> Detector::detect_tp2(std::size_t n, BudgetTracker& t) {
  const std::size_t positions = n * n;
  const std::uint32_t classes = col_class_.empty() ? 0 : *std::max_element(col_class_.begin(), col_class_.end()) + 1;
  std::vector<std::uint64_t> chosen(positions);
  std::vector<Bitset> final_paths;

  std::function<bool(std::size_t, const std::vector<Bitset>&)> dfs = [&](std::size_t pos,
                                                                         const std::vector<Bitset>& paths) {
    t.tick();
    if (pos == positions) {
      final_paths = paths;
      return true;
    }
    const std::size_t i = pos / n;
    const std::size_t j = pos % n;
    std::vector<char> tried(classes, 0);
    for (std::uint64_t y = 0; y < ny_; ++y) {
      const auto cls = col_class_[y];
      if (tried[cls]) continue;
      tried[cls] = 1;
      const Bitset& s = cols_[y];
      if (s.none()) continue;
      bool ok = true;
      for (std::size_t jj = 0; jj < j && ok; ++jj) ok = !cols_[chosen[i * n + jj]].intersects(s);
      for (std::size_t g = 0; g < paths.size() && ok; ++g) ok = paths[g].intersects(s);
      if (!ok) continue;
      chosen[pos] = y;
      if (j + 1 < n) {
        if (dfs(pos + 1, paths)) return true;
        continue;
      }
      std::vector<Bitset> extended;
      extended.reserve(paths.size() * n);
      for (const auto& g : paths) {
        for (std::size_t jj = 0; jj < n; ++jj) extended.push_back(g & cols_[chosen[i * n + jj]]);
      }
      if (dfs(pos + 1, extended)) return true;
    }
    return false;
  };

  if (!dfs(0, {Bitset(static_cast<std::size_t>(nx_), true)})) return std::nullopt;
  PropertyCertificate c;
  c.kind = PropertyKind::TP2;
  c.n = n;
  c.structure = name_;
  for (auto y : chosen) c.b.push_back(y_tuple(y));
  for (const auto& p : final_paths) c.a.push_back(x_tuple(p.find_first()));
  return c;
}

std::optional<PropertyCertificate> detect(PropertyKind kind, const PartitionedFormula& phi, const FiniteStructure& m,
                                          std::size_t n, const Budget& budget) {
  Detector d(phi, m);
  return d.detect(kind, n, budget);
}

// ---------------------------------------------------------------------------
// Verification

namespace {

class Checker {
 public:
  Checker(const PartitionedFormula& phi, const FiniteStructure& m) : phi_(phi), m_(m), e_(m) {}

  bool holds(const Tuple& a, const Tuple& b) {
    Valuation v;
    for (std::size_t i = 0; i < phi_.x.size(); ++i) v.elements[phi_.x[i]] = a[i];
    for (std::size_t i = 0; i < phi_.y.size(); ++i) v.elements[phi_.y[i]] = b[i];
    return e_.eval(phi_.formula, v);
  }

  // phi(M^x; b) by sweeping every x-tuple.
  std::vector<bool> sweep(const Tuple& b) {
    const auto nx = tuple_space(m_.size(), phi_.x.size());
    std::vector<bool> out(static_cast<std::size_t>(nx));
    for (std::uint64_t c = 0; c < nx; ++c) out[c] = holds(decode_tuple(c, phi_.x.size(), m_.size()), b);
    return out;
  }

 private:
  const PartitionedFormula& phi_;
  const FiniteStructure& m_;
  Evaluator e_;
};

void check_payload(const std::vector<Tuple>& ts, std::size_t count, std::size_t width, std::size_t universe,
                   const char* what) {
  if (ts.size() != count) {
    throw FormatError(std::string("certificate needs ") + std::to_string(count) + " " + what + "-tuples, has " +
                      std::to_string(ts.size()));
  }
  for (const auto& t : ts) {
    if (t.size() != width) throw FormatError(std::string("certificate ") + what + "-tuple has the wrong width");
    for (Element e : t) {
      if (e >= universe) throw FormatError("certificate entry " + std::to_string(e) + " is outside the universe");
    }
  }
}

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

bool verify_witness(const PropertyCertificate& c, const PartitionedFormula& phi, const FiniteStructure& m) {
  check_partition(phi);
  if (c.n == 0) throw FormatError("certificate n must be positive");
  const std::size_t p = phi.x.size();
  const std::size_t q = phi.y.size();
  const std::size_t n = c.n;
  Checker chk(phi, m);
  switch (c.kind) {
    case PropertyKind::OP: {
      check_payload(c.a, n, p, m.size(), "a");
      check_payload(c.b, n, q, m.size(), "b");
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (chk.holds(c.a[i], c.b[j]) != (i < j)) return false;
        }
      }
      return true;
    }
    case PropertyKind::sOP: {
      check_payload(c.a, 0, p, m.size(), "a");
      check_payload(c.b, n, q, m.size(), "b");
      std::vector<bool> prev = chk.sweep(c.b[0]);
      for (std::size_t i = 1; i < n; ++i) {
        std::vector<bool> cur = chk.sweep(c.b[i]);
        bool grew = false;
        for (std::size_t k = 0; k < cur.size(); ++k) {
          if (prev[k] && !cur[k]) return false;
          if (cur[k] && !prev[k]) grew = true;
        }
        if (!grew) return false;
        prev = std::move(cur);
      }
      return true;
    }
    case PropertyKind::IP: {
      if (n >= 20) throw FormatError("IP certificate n is too large");
      check_payload(c.a, n, p, m.size(), "a");
      check_payload(c.b, std::size_t{1} << n, q, m.size(), "b");
      for (std::size_t j = 0; j < c.b.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
          if (chk.holds(c.a[i], c.b[j]) != (((j >> i) & 1U) != 0)) return false;
        }
      }
      return true;
    }
    case PropertyKind::TP2: {
      if (n > 6) throw FormatError("TP2 certificate n is too large");
      check_payload(c.b, n * n, q, m.size(), "b");
      check_payload(c.a, ipow(n, n), p, m.size(), "a");
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<bool>> sets;
        for (std::size_t j = 0; j < n; ++j) sets.push_back(chk.sweep(c.b[i * n + j]));
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t k = j + 1; k < n; ++k) {
            for (std::size_t x = 0; x < sets[j].size(); ++x) {
              if (sets[j][x] && sets[k][x]) return false;
            }
          }
        }
      }
      for (std::size_t f = 0; f < c.a.size(); ++f) {
        std::size_t rest = f;
        std::vector<std::size_t> path(n);
        for (std::size_t i = n; i-- > 0;) {
          path[i] = rest % n;
          rest /= n;
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (!chk.holds(c.a[f], c.b[i * n + path[i]])) return false;
        }
      }
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Sentences

std::vector<std::string> block_names(const std::vector<std::string>& vars, std::size_t i) {
  std::vector<std::string> out;
  for (const auto& v : vars) {
    const bool digit_end = !v.empty() && std::isdigit(static_cast<unsigned char>(v.back()));
    out.push_back(v + (digit_end ? "_" : "") + std::to_string(i));
  }
  return out;
}

namespace {

class Instantiator {
 public:
  explicit Instantiator(const PartitionedFormula& phi) : phi_(phi) {}

  FormulaPtr at(const std::vector<std::string>& xs, const std::vector<std::string>& ys) const {
    std::map<std::string, std::string> ren;
    for (std::size_t i = 0; i < xs.size(); ++i) ren[phi_.x[i]] = xs[i];
    for (std::size_t i = 0; i < ys.size(); ++i) ren[phi_.y[i]] = ys[i];
    return rename_variables(phi_.formula, ren);
  }

 private:
  const PartitionedFormula& phi_;
};

std::vector<std::string> concat_blocks(const std::vector<std::vector<std::string>>& blocks) {
  std::vector<std::string> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

FormulaPtr build_property_sentence(PropertyKind kind, const PartitionedFormula& phi, std::size_t n) {
  check_partition(phi);
  if (n == 0) throw FormatError("n must be at least 1");
  if (kind == PropertyKind::IP && n > 3) throw FormatError("IP sentences are capped at n = 3");
  if (kind == PropertyKind::TP2 && n > 2) throw FormatError("TP2 sentences are capped at n = 2");
  const Instantiator inst(phi);
  std::vector<FormulaPtr> parts;
  switch (kind) {
    case PropertyKind::OP: {
      std::vector<std::vector<std::string>> as;
      std::vector<std::vector<std::string>> bs;
      for (std::size_t i = 1; i <= n; ++i) as.push_back(block_names(phi.x, i));
      for (std::size_t j = 1; j <= n; ++j) bs.push_back(block_names(phi.y, j));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          FormulaPtr lit = inst.at(as[i], bs[j]);
          parts.push_back(i < j ? lit : Formula::negation(lit));
        }
      }
      std::vector<std::string> vars = concat_blocks(as);
      const auto bv = concat_blocks(bs);
      vars.insert(vars.end(), bv.begin(), bv.end());
      return exists_all(vars, conjunction(parts));
    }
    case PropertyKind::sOP: {
      std::vector<std::vector<std::string>> bs;
      for (std::size_t j = 1; j <= n; ++j) bs.push_back(block_names(phi.y, j));
      const auto all_b = concat_blocks(bs);
      std::vector<std::string> xs = phi.x;
      if (std::any_of(xs.begin(), xs.end(),
                      [&](const auto& v) { return std::find(all_b.begin(), all_b.end(), v) != all_b.end(); })) {
        xs = block_names(phi.x, 0);
      }
      for (std::size_t i = 0; i + 1 < n; ++i) {
        FormulaPtr lo = inst.at(xs, bs[i]);
        FormulaPtr hi = inst.at(xs, bs[i + 1]);
        parts.push_back(Formula::conj(forall_all(xs, Formula::implies(lo, hi)),
                                      exists_all(xs, Formula::conj(hi, Formula::negation(lo)))));
      }
      return exists_all(all_b, conjunction(parts));
    }
    case PropertyKind::IP: {
      std::vector<std::vector<std::string>> as;
      std::vector<std::vector<std::string>> bs;
      for (std::size_t i = 1; i <= n; ++i) as.push_back(block_names(phi.x, i));
      for (std::size_t j = 1; j <= (std::size_t{1} << n); ++j) bs.push_back(block_names(phi.y, j));
      for (std::size_t j = 0; j < bs.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
          FormulaPtr lit = inst.at(as[i], bs[j]);
          parts.push_back(((j >> i) & 1U) ? lit : Formula::negation(lit));
        }
      }
      std::vector<std::string> vars = concat_blocks(as);
      const auto bv = concat_blocks(bs);
      vars.insert(vars.end(), bv.begin(), bv.end());
      return exists_all(vars, conjunction(parts));
    }
    case PropertyKind::TP2: {
      std::vector<std::vector<std::string>> bs;
      for (std::size_t t = 1; t <= n * n; ++t) bs.push_back(block_names(phi.y, t));
      const auto all_b = concat_blocks(bs);
      const auto xs = block_names(phi.x, 0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t k = j + 1; k < n; ++k) {
            parts.push_back(Formula::negation(
                exists_all(xs, Formula::conj(inst.at(xs, bs[i * n + j]), inst.at(xs, bs[i * n + k])))));
          }
        }
      }
      const std::size_t paths = ipow(n, n);
      for (std::size_t f = 0; f < paths; ++f) {
        std::size_t rest = f;
        std::vector<std::size_t> path(n);
        for (std::size_t i = n; i-- > 0;) {
          path[i] = rest % n;
          rest /= n;
        }
        std::vector<FormulaPtr> lits;
        for (std::size_t i = 0; i < n; ++i) lits.push_back(inst.at(xs, bs[i * n + path[i]]));
        parts.push_back(exists_all(xs, conjunction(lits)));
      }
      return exists_all(all_b, conjunction(parts));
    }
  }
  throw FormatError("unknown property kind");
}

// ---------------------------------------------------------------------------
// Transformers

std::optional<PropertyCertificate> sop_to_op(const PropertyCertificate& c, const PartitionedFormula& phi,
                                             const FiniteStructure& m) {
  if (c.kind != PropertyKind::sOP) throw FormatError("sop_to_op needs an sOP certificate");
  Detector d(phi, m);
  std::vector<const Bitset*> sets;
  for (const auto& b : c.b) sets.push_back(&d.column(encode_tuple(b, m.size())));
  PropertyCertificate out;
  out.kind = PropertyKind::OP;
  out.structure = c.structure;
  for (std::size_t i = 0; i + 1 < c.n; ++i) {
    const Bitset diff = difference(*sets[i + 1], *sets[i]);
    const auto x = diff.find_first();
    if (x == Bitset::npos) throw EvalError("sOP certificate is not strictly increasing");
    out.a.push_back(decode_tuple(x, phi.x.size(), m.size()));
  }
  Bitset outside = *sets.back();
  outside.complement();
  const auto last = outside.find_first();
  if (last != Bitset::npos) {
    out.a.push_back(decode_tuple(last, phi.x.size(), m.size()));
    out.b = c.b;
    out.n = c.n;
    return out;
  }
  if (c.n == 1) return std::nullopt;
  out.n = c.n - 1;
  out.b.assign(c.b.begin(), c.b.end() - 1);
  return out;
}

PropertyCertificate ip_to_op(const PropertyCertificate& c) {
  if (c.kind != PropertyKind::IP) throw FormatError("ip_to_op needs an IP certificate");
  if (c.b.size() != (std::size_t{1} << c.n) || c.a.size() != c.n) throw FormatError("malformed IP certificate");
  PropertyCertificate out;
  out.kind = PropertyKind::OP;
  out.n = c.n;
  out.structure = c.structure;
  out.a = c.a;
  for (std::size_t j = 0; j < c.n; ++j) out.b.push_back(c.b[(std::size_t{1} << j) - 1]);
  return out;
}

std::optional<PropertyCertificate> tp2_to_ip_transposed(const PropertyCertificate& c, const PartitionedFormula& phi,
                                                        const FiniteStructure& m) {
  if (c.kind != PropertyKind::TP2) throw FormatError("tp2_to_ip_transposed needs a TP2 certificate");
  const std::size_t n = c.n;
  if (c.b.size() != n * n || c.a.size() != ipow(n, n)) throw FormatError("malformed TP2 certificate");
  PropertyCertificate out;
  out.kind = PropertyKind::IP;
  out.n = n;
  out.structure = c.structure;
  for (std::size_t i = 0; i < n; ++i) out.a.push_back(c.b[i * n]);
  if (n == 1) {
    Detector d(phi, m);
    Bitset outside = d.column(encode_tuple(c.b[0], m.size()));
    outside.complement();
    const auto x = outside.find_first();
    if (x == Bitset::npos) return std::nullopt;
    out.b = {decode_tuple(x, phi.x.size(), m.size()), c.a[0]};
    return out;
  }
  for (std::size_t j = 0; j < (std::size_t{1} << n); ++j) {
    // f_J(i) = first column if i is in J, second column otherwise
    std::size_t f = 0;
    for (std::size_t i = 0; i < n; ++i) f = f * n + (((j >> i) & 1U) ? 0 : 1);
    out.b.push_back(c.a[f]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profiles

namespace {

void collect_requirements(const FormulaPtr& f, std::set<std::string>& out) {
  if (!f) return;
  if (f->kind() == Connective::Atom && f->derived()) {
    for (const auto& r : f->derived()->required_relations()) out.insert(r);
  }
  collect_requirements(f->left(), out);
  collect_requirements(f->right(), out);
}

bool applicable(const FormulaPtr& f, const FiniteStructure& m) {
  std::set<std::string> need = free_relation_symbols(f);
  collect_requirements(f, need);
  for (const auto& r : need) {
    if (m.find(r) == nullptr) return false;
  }
  return true;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

const char* to_string(GrowthVerdict v) {
  return v == GrowthVerdict::UnboundedWithinPrefix ? "unbounded-within-prefix" : "plateaued";
}

GrowthVerdict growth_verdict(const std::vector<std::size_t>& column) {
  if (column.size() < 2) return GrowthVerdict::Plateaued;
  // running maximum: the family-level value at each prefix
  std::vector<std::size_t> best(column.size());
  std::size_t first_max = 0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    best[i] = i == 0 ? column[0] : std::max(best[i - 1], column[i]);
    if (best[i] > best[first_max]) first_max = i;
  }
  if (best.back() == best.front()) return GrowthVerdict::Plateaued;
  return first_max >= column.size() / 2 ? GrowthVerdict::UnboundedWithinPrefix : GrowthVerdict::Plateaued;
}

std::vector<std::size_t> FamilyProfile::column(std::size_t formula, std::size_t kind) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(cell(r, formula, kind).max_n);
  return out;
}

std::vector<std::size_t> FamilyProfile::closure_column(std::size_t index) const {
  std::vector<std::size_t> out;
  for (const auto& row : rows) out.push_back(row.closures[index].value_or(0));
  return out;
}

std::string FamilyProfile::to_csv() const {
  std::ostringstream out;
  out << "structure,size";
  for (const auto& f : formula_names) {
    for (auto k : kinds) out << "," << csv_field(f + ":" + to_string(k));
  }
  for (const auto& c : closure_names) out << "," << csv_field("closure:" + c);
  out << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << csv_field(rows[r].structure) << "," << rows[r].size;
    for (std::size_t f = 0; f < formula_names.size(); ++f) {
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        const auto& c = cell(r, f, k);
        out << ",";
        if (!c.applicable) {
          out << "n/a";
          continue;
        }
        out << c.max_n;
        if (c.budget_exhausted) out << "?";
      }
    }
    for (const auto& c : rows[r].closures) {
      out << ",";
      if (c) {
        out << *c;
      } else {
        out << "n/a";
      }
    }
    out << "\n";
  }
  out << "verdict,";
  for (std::size_t f = 0; f < formula_names.size(); ++f) {
    for (std::size_t k = 0; k < kinds.size(); ++k) out << "," << to_string(growth_verdict(column(f, k)));
  }
  for (std::size_t c = 0; c < closure_names.size(); ++c) out << "," << to_string(growth_verdict(closure_column(c)));
  out << "\n";
  return out.str();
}

FamilyProfile profile_family(const std::string& family_name, const std::vector<FiniteStructure>& family,
                             const std::vector<NamedFormula>& formulas, const std::vector<PropertyKind>& kinds,
                             std::size_t n_cap, const Budget& budget, const std::vector<NamedBody>& closures,
                             unsigned threads) {
  FamilyProfile prof;
  prof.family = family_name;
  prof.kinds = kinds;
  for (const auto& f : formulas) prof.formula_names.push_back(f.name);
  for (const auto& c : closures) prof.closure_names.push_back(c.name);
  prof.rows.resize(family.size());
  for (std::size_t r = 0; r < family.size(); ++r) {
    prof.rows[r].structure = family[r].name();
    prof.rows[r].size = family[r].size();
    prof.rows[r].cells.resize(formulas.size() * kinds.size());
    prof.rows[r].closures.resize(closures.size());
  }

  // One task per (structure, formula) and per (structure, closure body).
  const std::size_t per_row = formulas.size() + closures.size();
  const std::size_t tasks = family.size() * per_row;
  auto run = [&](std::size_t task) {
    const std::size_t r = task / per_row;
    const std::size_t slot = task % per_row;
    const FiniteStructure& m = family[r];
    if (slot >= formulas.size()) {
      const auto& body = closures[slot - formulas.size()].body;
      std::set<std::string> need = free_relation_symbols(body.body);
      need.erase(body.relvar);
      collect_requirements(body.body, need);
      for (const auto& r : need) {
        if (m.find(r) == nullptr) return;
      }
      prof.rows[r].closures[slot - formulas.size()] = closure_ordinal(body, m);
      return;
    }
    const auto& phi = formulas[slot].phi;
    if (!applicable(phi.formula, m)) {
      for (std::size_t k = 0; k < kinds.size(); ++k) prof.rows[r].cells[slot * kinds.size() + k].applicable = false;
      return;
    }
    Detector d(phi, m);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      ProfileCell& cell = prof.rows[r].cells[slot * kinds.size() + k];
      for (std::size_t n = 1; n <= n_cap; ++n) {
        std::optional<PropertyCertificate> cert;
        try {
          cert = d.detect(kinds[k], n, budget);
        } catch (const BudgetExhausted&) {
          cell.budget_exhausted = true;
          break;
        }
        if (!cert) break;
        cell.max_n = n;
        cell.certificate = std::move(cert);
        cell.capped = n == n_cap;
      }
    }
  };

  unsigned workers = threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(tasks, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        run(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return prof;
}

}  // namespace lfpw
