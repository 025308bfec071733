#pragma once

// Finite relational structures over the universe {0, ..., n-1}.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lfpw/bitset.hpp"
#include "lfpw/formula.hpp"

namespace lfpw {

using Element = std::uint32_t;
using Tuple = std::vector<Element>;

// Row-major code of a tuple: t[0]*n^(k-1) + ... + t[k-1]. Numeric order of
// codes is lexicographic order of tuples.
std::uint64_t encode_tuple(const Tuple& t, std::size_t universe);
Tuple decode_tuple(std::uint64_t code, std::size_t arity, std::size_t universe);
// universe^arity, throwing EvalError when it does not fit in 63 bits.
std::uint64_t tuple_space(std::size_t universe, std::size_t arity);

class Relation {
 public:
  Relation() = default;
  Relation(std::size_t arity, std::size_t universe);
  static Relation from_codes(std::size_t arity, std::size_t universe, std::vector<std::uint64_t> codes);

  std::size_t arity() const { return arity_; }
  std::size_t universe() const { return universe_; }
  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }

  void insert(const Tuple& t);
  void insert_code(std::uint64_t code);
  bool contains(const Tuple& t) const;
  bool contains_code(std::uint64_t code) const;

  // Sorted, duplicate-free.
  const std::vector<std::uint64_t>& codes() const { return codes_; }
  std::vector<Tuple> tuples() const;

  // Membership bitset over the whole tuple space (only for small spaces).
  bool has_dense() const { return use_dense_; }
  const Bitset& dense() const { return dense_; }

  friend bool operator==(const Relation& a, const Relation& b) {
    return a.arity_ == b.arity_ && a.universe_ == b.universe_ && a.codes_ == b.codes_;
  }

 private:
  std::size_t arity_ = 0;
  std::size_t universe_ = 0;
  std::uint64_t space_ = 0;
  bool use_dense_ = false;
  std::vector<std::uint64_t> codes_;
  Bitset dense_;
};

class FiniteStructure {
 public:
  FiniteStructure() = default;
  // Throws FormatError when size is 0.
  FiniteStructure(std::string name, std::size_t size);

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  std::size_t size() const { return size_; }

  // Throws FormatError on duplicate names or universe mismatch.
  void add_relation(const std::string& name, Relation r);
  const Relation* find(const std::string& name) const;
  // Throws EvalError when absent.
  const Relation& relation(const std::string& name) const;
  const std::map<std::string, Relation>& relations() const { return relations_; }
  Signature signature() const;

 private:
  std::string name_;
  std::size_t size_ = 0;
  std::map<std::string, Relation> relations_;
};

// JSON format: {"name": str?, "size": int, "relations": {name: [[int,...],...]},
// "arities": {name: int}?}. "arities" is needed only for empty relations.
// Throws FormatError.
FiniteStructure parse_structure_json(std::string_view text, const std::string& default_name = "structure");
std::string structure_to_json(const FiniteStructure& m);
// Reads a file if path names one, otherwise parses the argument as JSON text.
FiniteStructure load_structure(const std::string& path_or_text);
void save_structure(const FiniteStructure& m, const std::string& path);

}  // namespace lfpw
