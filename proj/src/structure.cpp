#include "lfpw/structure.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lfpw/error.hpp"

namespace lfpw {

namespace {
constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 26;
}

std::uint64_t tuple_space(std::size_t universe, std::size_t arity) {
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < arity; ++i) {
    if (universe != 0 && space > (std::numeric_limits<std::uint64_t>::max() >> 1) / universe) {
      throw EvalError("tuple space " + std::to_string(universe) + "^" + std::to_string(arity) + " is too large");
    }
    space *= universe;
  }
  return space;
}

std::uint64_t encode_tuple(const Tuple& t, std::size_t universe) {
  std::uint64_t code = 0;
  for (Element e : t) code = code * universe + e;
  return code;
}

Tuple decode_tuple(std::uint64_t code, std::size_t arity, std::size_t universe) {
  Tuple t(arity);
  for (std::size_t i = arity; i-- > 0;) {
    t[i] = static_cast<Element>(code % universe);
    code /= universe;
  }
  return t;
}

Relation::Relation(std::size_t arity, std::size_t universe)
    : arity_(arity), universe_(universe), space_(tuple_space(universe, arity)) {
  use_dense_ = space_ <= kDenseLimit;
  if (use_dense_) dense_ = Bitset(static_cast<std::size_t>(space_));
}

Relation Relation::from_codes(std::size_t arity, std::size_t universe, std::vector<std::uint64_t> codes) {
  Relation r(arity, universe);
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  if (!codes.empty() && codes.back() >= r.space_) throw EvalError("tuple code out of range");
  if (r.use_dense_) {
    for (auto c : codes) r.dense_.set(static_cast<std::size_t>(c));
  }
  r.codes_ = std::move(codes);
  return r;
}

void Relation::insert(const Tuple& t) {
  if (t.size() != arity_) throw EvalError("tuple of length " + std::to_string(t.size()) + " in relation of arity " +
                                          std::to_string(arity_));
  for (Element e : t) {
    if (e >= universe_) throw EvalError("tuple entry " + std::to_string(e) + " outside universe");
  }
  insert_code(encode_tuple(t, universe_));
}

void Relation::insert_code(std::uint64_t code) {
  if (code >= space_) throw EvalError("tuple code out of range");
  if (use_dense_ && !dense_.insert(static_cast<std::size_t>(code))) return;
  if (codes_.empty() || codes_.back() < code) {
    codes_.push_back(code);
    return;
  }
  auto it = std::lower_bound(codes_.begin(), codes_.end(), code);
  if (it != codes_.end() && *it == code) return;
  codes_.insert(it, code);
}

bool Relation::contains(const Tuple& t) const {
  if (t.size() != arity_) return false;
  for (Element e : t) {
    if (e >= universe_) return false;
  }
  return contains_code(encode_tuple(t, universe_));
}

bool Relation::contains_code(std::uint64_t code) const {
  if (code >= space_) return false;
  if (use_dense_) return dense_.test(static_cast<std::size_t>(code));
  return std::binary_search(codes_.begin(), codes_.end(), code);
}

std::vector<Tuple> Relation::tuples() const {
  std::vector<Tuple> out;
  out.reserve(codes_.size());
  for (auto c : codes_) out.push_back(decode_tuple(c, arity_, universe_));
  return out;
}

FiniteStructure::FiniteStructure(std::string name, std::size_t size) : name_(std::move(name)), size_(size) {
  if (size == 0) throw FormatError("structure universe must be nonempty");
}

void FiniteStructure::add_relation(const std::string& name, Relation r) {
  if (name.empty()) throw FormatError("empty relation name");
  if (relations_.count(name) != 0) throw FormatError("duplicate relation " + name);
  if (r.universe() != size_) throw FormatError("relation " + name + " built over a different universe");
  if (r.arity() == 0) throw FormatError("relation " + name + " must have positive arity");
  relations_.emplace(name, std::move(r));
}

const Relation* FiniteStructure::find(const std::string& name) const {
  auto it = relations_.find(name);
  return it == relations_.end() ? nullptr : &it->second;
}

const Relation& FiniteStructure::relation(const std::string& name) const {
  const Relation* r = find(name);
  if (r == nullptr) throw EvalError("structure " + name_ + " has no relation " + name);
  return *r;
}

Signature FiniteStructure::signature() const {
  Signature sig;
  for (const auto& [name, r] : relations_) sig.add(name, r.arity());
  return sig;
}

FiniteStructure parse_structure_json(std::string_view text, const std::string& default_name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed structure JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("structure JSON must be an object");
  if (!j.contains("size") || !j["size"].is_number_integer()) throw FormatError("structure needs an integer \"size\"");
  const auto size = j["size"].get<long long>();
  if (size < 1) throw FormatError("structure size must be at least 1");
  std::string name = default_name;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw FormatError("\"name\" must be a string");
    name = j["name"].get<std::string>();
  }
  FiniteStructure m(name, static_cast<std::size_t>(size));

  std::map<std::string, std::size_t> declared;
  if (j.contains("arities")) {
    if (!j["arities"].is_object()) throw FormatError("\"arities\" must be an object");
    for (const auto& [rel, a] : j["arities"].items()) {
      if (!a.is_number_integer() || a.get<long long>() < 1) throw FormatError("bad arity for " + rel);
      declared[rel] = a.get<std::size_t>();
    }
  }
  const nlohmann::json rels = j.value("relations", nlohmann::json::object());
  if (!rels.is_object()) throw FormatError("\"relations\" must be an object");
  for (const auto& [rel, tuples] : rels.items()) {
    if (!tuples.is_array()) throw FormatError("relation " + rel + " must be a list of tuples");
    std::size_t arity = 0;
    if (auto it = declared.find(rel); it != declared.end()) {
      arity = it->second;
    } else if (!tuples.empty() && tuples[0].is_array()) {
      arity = tuples[0].size();
    }
    if (arity == 0) throw FormatError("cannot determine arity of relation " + rel + " (declare it in \"arities\")");
    Relation r(arity, m.size());
    for (const auto& t : tuples) {
      if (!t.is_array()) throw FormatError("relation " + rel + " contains a non-list tuple");
      if (t.size() != arity) {
        throw FormatError("arity mismatch in relation " + rel + ": expected " + std::to_string(arity) + ", got " +
                          std::to_string(t.size()));
      }
      Tuple tup;
      for (const auto& e : t) {
        if (!e.is_number_integer()) throw FormatError("relation " + rel + " has a non-integer entry");
        const auto v = e.get<long long>();
        if (v < 0 || v >= size) {
          throw FormatError("entry " + std::to_string(v) + " in relation " + rel + " is outside 0.." +
                            std::to_string(size - 1));
        }
        tup.push_back(static_cast<Element>(v));
      }
      r.insert(tup);
    }
    m.add_relation(rel, std::move(r));
  }
  for (const auto& [rel, a] : declared) {
    if (m.find(rel) == nullptr) m.add_relation(rel, Relation(a, m.size()));
  }
  return m;
}

std::string structure_to_json(const FiniteStructure& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name();
  j["size"] = m.size();
  nlohmann::ordered_json rels = nlohmann::ordered_json::object();
  nlohmann::ordered_json arities = nlohmann::ordered_json::object();
  for (const auto& [name, r] : m.relations()) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& t : r.tuples()) list.push_back(t);
    rels[name] = std::move(list);
    arities[name] = r.arity();
  }
  j["relations"] = std::move(rels);
  j["arities"] = std::move(arities);
  return j.dump();
}

FiniteStructure load_structure(const std::string& path_or_text) {
  std::error_code ec;
  if (!path_or_text.empty() && path_or_text.front() != '{' && std::filesystem::is_regular_file(path_or_text, ec)) {
    std::ifstream in(path_or_text);
    if (!in) throw FormatError("cannot read " + path_or_text);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_structure_json(buf.str(), std::filesystem::path(path_or_text).stem().string());
  }
  return parse_structure_json(path_or_text);
}

void save_structure(const FiniteStructure& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << structure_to_json(m) << "\n";
}

}  // namespace lfpw
