#include "lfpw/family.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <random>
#include <set>

#include "lfpw/error.hpp"

namespace lfpw {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::size_t parse_count(const std::string& s, const std::string& context) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw FormatError("bad number '" + s + "' in family spec " + context);
  }
  return static_cast<std::size_t>(std::stoull(s));
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& context) {
  std::vector<std::size_t> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const std::size_t lo = parse_count(trim(text.substr(0, dots)), context);
    const std::size_t hi = parse_count(trim(text.substr(dots + 2)), context);
    if (lo > hi) throw FormatError("empty range in family spec " + context);
    for (std::size_t n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string part = trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    out.push_back(parse_count(part, context));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

FamilyKind kind_from_name(const std::string& name, const std::string& context) {
  if (name == "pure" || name == "pure-set") return FamilyKind::PureSet;
  if (name == "succ" || name == "successor") return FamilyKind::Successor;
  if (name == "linord" || name == "linear-order") return FamilyKind::LinearOrder;
  if (name == "paley") return FamilyKind::Paley;
  if (name == "rg" || name == "random-graph") return FamilyKind::RandomGraph;
  throw FormatError("unknown family kind '" + name + "' in " + context);
}

// Splits "A, B" at the top-level comma.
std::pair<std::string, std::string> split_union_args(const std::string& inner, const std::string& context) {
  int depth = 0;
  std::size_t split = std::string::npos;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] == '(') ++depth;
    if (inner[i] == ')') --depth;
    if (depth != 0 || inner[i] != ',') continue;
    // A comma inside a size list ("paley:5,13") is followed by a digit.
    std::size_t j = i + 1;
    while (j < inner.size() && std::isspace(static_cast<unsigned char>(inner[j]))) ++j;
    if (j < inner.size() && std::isdigit(static_cast<unsigned char>(inner[j]))) continue;
    split = i;
    break;
  }
  if (split == std::string::npos) throw FormatError("union needs two family specs: " + context);
  return {trim(inner.substr(0, split)), trim(inner.substr(split + 1))};
}

std::string sizes_to_string(const std::vector<std::size_t>& sizes) {
  bool contiguous = sizes.size() > 1;
  for (std::size_t i = 1; i < sizes.size(); ++i) contiguous = contiguous && sizes[i] == sizes[i - 1] + 1;
  if (contiguous) return std::to_string(sizes.front()) + ".." + std::to_string(sizes.back());
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i != 0) out += ",";
    out += std::to_string(sizes[i]);
  }
  return out;
}

std::string suffixed(const std::string& base, const std::set<std::string>& taken) {
  if (taken.count(base) == 0) return base;
  for (int k = 2;; ++k) {
    std::string candidate = base + "_" + std::to_string(k);
    if (taken.count(candidate) == 0) return candidate;
  }
}

}  // namespace

const char* family_prefix(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::PureSet: return "pure";
    case FamilyKind::Successor: return "succ";
    case FamilyKind::LinearOrder: return "linord";
    case FamilyKind::Paley: return "paley";
    case FamilyKind::RandomGraph: return "rg";
    case FamilyKind::Union: return "union";
  }
  return "?";
}

bool is_prime(std::uint64_t q) {
  if (q < 2) return false;
  for (std::uint64_t d = 2; d * d <= q; ++d) {
    if (q % d == 0) return false;
  }
  return true;
}

FamilySpec FamilySpec::parse(std::string_view raw) {
  const std::string text = trim(raw);
  FamilySpec spec;
  if (text.rfind("union(", 0) == 0) {
    if (text.back() != ')') throw FormatError("unterminated union in family spec " + text);
    auto [a, b] = split_union_args(text.substr(6, text.size() - 7), text);
    spec.kind = FamilyKind::Union;
    spec.left = std::make_shared<FamilySpec>(parse(a));
    spec.right = std::make_shared<FamilySpec>(parse(b));
    return spec;
  }
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) throw FormatError("family spec needs 'kind:sizes': " + text);
  spec.kind = kind_from_name(trim(text.substr(0, colon)), text);
  std::string rest = text.substr(colon + 1);
  if (const std::size_t opt = rest.find(':'); opt != std::string::npos) {
    const std::string option = trim(rest.substr(opt + 1));
    rest = rest.substr(0, opt);
    if (option.rfind("seed=", 0) != 0) throw FormatError("unknown family option '" + option + "' in " + text);
    spec.seed = parse_count(option.substr(5), text);
  }
  spec.sizes = parse_sizes(trim(rest), text);
  if (spec.sizes.empty()) throw FormatError("no sizes in family spec " + text);
  for (std::size_t n : spec.sizes) {
    if (n == 0) throw FormatError("structure sizes must be positive: " + text);
    if (spec.kind == FamilyKind::Paley && (!is_prime(n) || n % 4 != 1)) {
      throw FormatError("paley size " + std::to_string(n) + " is not a prime congruent to 1 mod 4");
    }
  }
  return spec;
}

std::string FamilySpec::to_string() const {
  if (kind == FamilyKind::Union) return "union(" + left->to_string() + ", " + right->to_string() + ")";
  std::string out = std::string(family_prefix(kind)) + ":" + sizes_to_string(sizes);
  if (kind == FamilyKind::RandomGraph) out += ":seed=" + std::to_string(seed);
  return out;
}

FiniteStructure pure_set(std::size_t n) { return FiniteStructure("pure:" + std::to_string(n), n); }

FiniteStructure successor_structure(std::size_t n) {
  FiniteStructure m("succ:" + std::to_string(n), n);
  Relation s(2, n);
  for (Element i = 0; i + 1 < n; ++i) s.insert({i, i + 1});
  m.add_relation("S", std::move(s));
  return m;
}

FiniteStructure linear_order(std::size_t n) {
  FiniteStructure m("linord:" + std::to_string(n), n);
  Relation lt(2, n);
  for (Element i = 0; i < n; ++i) {
    for (Element j = i + 1; j < n; ++j) lt.insert({i, j});
  }
  m.add_relation("<", std::move(lt));
  return m;
}

FiniteStructure paley_graph(std::size_t q) {
  if (!is_prime(q) || q % 4 != 1) {
    throw FormatError("paley size " + std::to_string(q) + " is not a prime congruent to 1 mod 4");
  }
  std::vector<bool> residue(q, false);
  for (std::size_t r = 1; r < q; ++r) residue[(r * r) % q] = true;
  FiniteStructure m("paley:" + std::to_string(q), q);
  Relation e(2, q);
  for (Element a = 0; a < q; ++a) {
    for (Element b = 0; b < q; ++b) {
      if (a != b && residue[(a + q - b) % q]) e.insert({a, b});
    }
  }
  m.add_relation("E", std::move(e));
  return m;
}

FiniteStructure random_graph(std::size_t n, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n)};
  std::mt19937_64 rng(seq);
  FiniteStructure m("rg:" + std::to_string(n) + ":seed=" + std::to_string(seed), n);
  Relation e(2, n);
  for (Element a = 0; a < n; ++a) {
    for (Element b = a + 1; b < n; ++b) {
      if ((rng() >> 63) != 0) {
        e.insert({a, b});
        e.insert({b, a});
      }
    }
  }
  m.add_relation("E", std::move(e));
  return m;
}

FiniteStructure disjoint_union(const FiniteStructure& m, const FiniteStructure& m2) {
  const std::size_t n = m.size() + m2.size();
  FiniteStructure u("union(" + m.name() + ", " + m2.name() + ")", n);
  std::set<std::string> taken;
  auto shifted = [&](const Relation& r, Element offset) {
    Relation out(r.arity(), n);
    for (Tuple t : r.tuples()) {
      for (auto& e : t) e += offset;
      out.insert(t);
    }
    return out;
  };
  for (const auto& [name, r] : m.relations()) {
    u.add_relation(name, shifted(r, 0));
    taken.insert(name);
  }
  for (const auto& [name, r] : m2.relations()) {
    const std::string target = suffixed(name, taken);
    u.add_relation(target, shifted(r, static_cast<Element>(m.size())));
    taken.insert(target);
  }
  Relation left(1, n);
  Relation right(1, n);
  for (Element i = 0; i < n; ++i) (i < m.size() ? left : right).insert({i});
  const std::string lname = suffixed("L", taken);
  taken.insert(lname);
  const std::string rname = suffixed("R", taken);
  u.add_relation(lname, std::move(left));
  u.add_relation(rname, std::move(right));
  return u;
}

std::vector<FiniteStructure> generate_family(const FamilySpec& spec) {
  std::vector<FiniteStructure> out;
  if (spec.kind == FamilyKind::Union) {
    const auto a = generate_family(*spec.left);
    const auto b = generate_family(*spec.right);
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) out.push_back(disjoint_union(a[i], b[i]));
    return out;
  }
  for (std::size_t n : spec.sizes) {
    switch (spec.kind) {
      case FamilyKind::PureSet: out.push_back(pure_set(n)); break;
      case FamilyKind::Successor: out.push_back(successor_structure(n)); break;
      case FamilyKind::LinearOrder: out.push_back(linear_order(n)); break;
      case FamilyKind::Paley: out.push_back(paley_graph(n)); break;
      case FamilyKind::RandomGraph: out.push_back(random_graph(n, spec.seed)); break;
      case FamilyKind::Union: break;
    }
  }
  return out;
}

FiniteStructure resolve_structure(const std::string& text) {
  const std::string t = trim(text);
  std::error_code ec;
  if (!t.empty() && (t.front() == '{' || std::filesystem::is_regular_file(t, ec))) return load_structure(t);
  const FamilySpec spec = FamilySpec::parse(t);
  auto members = generate_family(spec);
  if (members.size() != 1) throw FormatError("structure spec " + t + " must denote exactly one structure");
  return std::move(members.front());
}

}  // namespace lfpw
