#pragma once

// Structure families: pure sets, successor and linear orders, Paley graphs,
// seeded random graphs, and index-paired disjoint unions.
//
// Compact spec strings:
//   pure:1..5   succ:2..20   linord:2,4,8   paley:5,13,17   rg:8..16:seed=7
//   union(succ:2..10, linord:2..10)

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lfpw/structure.hpp"

namespace lfpw {

enum class FamilyKind { PureSet, Successor, LinearOrder, Paley, RandomGraph, Union };

struct FamilySpec {
  FamilyKind kind = FamilyKind::PureSet;
  std::vector<std::size_t> sizes;
  std::uint64_t seed = 0;
  std::shared_ptr<const FamilySpec> left;
  std::shared_ptr<const FamilySpec> right;

  // Throws FormatError on malformed text, empty ranges, or invalid Paley sizes.
  static FamilySpec parse(std::string_view text);
  std::string to_string() const;
};

const char* family_prefix(FamilyKind kind);

bool is_prime(std::uint64_t q);

// Single members. Names follow the spec syntax with one size, e.g. "linord:4".
FiniteStructure pure_set(std::size_t n);
FiniteStructure successor_structure(std::size_t n);
FiniteStructure linear_order(std::size_t n);
// Throws FormatError unless q is a prime with q = 1 mod 4.
FiniteStructure paley_graph(std::size_t q);
FiniteStructure random_graph(std::size_t n, std::uint64_t seed);

// Universe |m| + |m2|; m2's elements shift by |m|. Relations of m2 whose
// names collide with m's get the suffix "_2" (then "_3", ...). Unary markers
// L and R (suffixed the same way on collision) mark the two sides.
FiniteStructure disjoint_union(const FiniteStructure& m, const FiniteStructure& m2);

// Deterministic given the spec. Unions pair members by index.
std::vector<FiniteStructure> generate_family(const FamilySpec& spec);

// A structure from a file path, JSON text, or a one-member family spec.
FiniteStructure resolve_structure(const std::string& text);

}  // namespace lfpw
