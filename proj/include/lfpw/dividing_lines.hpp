#pragma once

// OP(n), sOP(n), IP(n) and TP2(n) for a partitioned formula in a finite
// structure: exhaustive detection, independent verification, the defining
// sentences, certificate transformers and family profiles.
//
// Payload layout of a certificate (tuples are x- or y-tuples of phi):
//   OP   a = a_1..a_n, b = b_1..b_n           phi(a_i;b_j) iff i < j
//   sOP  b = b_1..b_n                          phi(M;b_1) < ... < phi(M;b_n) (strict inclusions)
//   IP   a = a_1..a_n, b[J] for J in 0..2^n-1  phi(a_i;b[J]) iff bit i-1 of J is set
//        (J as a bitmask, i.e. the subset with index 1+J)
//   TP2  b[(i-1)*n + (j-1)] = b_{i,j},          rows pairwise inconsistent,
//        a[f] for f = (f(1),...,f(n)) in lexicographic order, satisfying every b_{i,f(i)}
//
// Enumeration order for "least" witnesses: tuples compare by row-major code.
// OP and IP compare (a_1,...,a_n) first, each b then being the least fitting
// tuple; sOP compares (b_1,...,b_n); TP2 compares the b_{i,j} in row-major
// order, each a_f then being the least fitting tuple.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lfpw/evaluator.hpp"
#include "lfpw/formula.hpp"
#include "lfpw/structure.hpp"

namespace lfpw {

enum class PropertyKind { OP, sOP, IP, TP2 };

const char* to_string(PropertyKind k);
// Accepts OP, sOP, IP, TP2 (case-insensitive). Throws FormatError.
PropertyKind parse_kind(const std::string& s);

struct Budget {
  std::optional<std::chrono::milliseconds> wall;
  std::optional<std::uint64_t> nodes;
};

// Tracks one search against a Budget; tick() throws BudgetExhausted.
class BudgetTracker {
 public:
  explicit BudgetTracker(const Budget& b);
  void tick();
  std::uint64_t nodes() const { return nodes_; }

 private:
  Budget budget_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t nodes_ = 0;
};

struct PropertyCertificate {
  PropertyKind kind = PropertyKind::OP;
  std::size_t n = 0;
  std::string structure;
  std::vector<Tuple> a;
  std::vector<Tuple> b;

  friend bool operator==(const PropertyCertificate&, const PropertyCertificate&) = default;
};

// {"kind","n","structure","a","b"} plus optional "formula","x","y" describing phi.
std::string certificate_to_json(const PropertyCertificate& c, const PartitionedFormula* phi = nullptr, int indent = -1);
// Throws FormatError.
PropertyCertificate certificate_from_json(const std::string& text);

// Largest n not excluded by counting alone (n^n a-tuples for TP2, 2^n
// b-tuples for IP, distinct tuples for OP, distinct sets for sOP).
std::size_t trivial_bound(PropertyKind kind, std::size_t universe, std::size_t x_width, std::size_t y_width);

// Incidence bitsets of phi in M and the search procedures over them.
class Detector {
 public:
  // Evaluates phi once over M^x times M^y. Throws EvalError if that space is too large.
  Detector(PartitionedFormula phi, const FiniteStructure& m);

  // nullopt only after an exhaustive search; throws BudgetExhausted otherwise.
  std::optional<PropertyCertificate> detect(PropertyKind kind, std::size_t n, const Budget& budget = {});

  const PartitionedFormula& formula() const { return phi_; }
  std::uint64_t x_count() const { return nx_; }
  std::uint64_t y_count() const { return ny_; }
  // phi(M^x; b) as a bitset over x-codes.
  const Bitset& column(std::uint64_t y_code) const { return cols_[y_code]; }
  // phi(a; M^y) as a bitset over y-codes.
  const Bitset& row(std::uint64_t x_code) const { return rows_[x_code]; }

 private:
  std::optional<PropertyCertificate> detect_op(std::size_t n, BudgetTracker& t);
  std::optional<PropertyCertificate> detect_ip(std::size_t n, BudgetTracker& t);
  std::optional<PropertyCertificate> detect_sop(std::size_t n, BudgetTracker& t);
  std::optional<PropertyCertificate> detect_tp2(std::size_t n, BudgetTracker& t);
  // a-first search shared by OP and IP: pattern[s] lists, for each candidate
  // slot s, which a-indices must satisfy phi.
  std::optional<PropertyCertificate> detect_a_first(PropertyKind kind, std::size_t n,
                                                    const std::vector<std::vector<bool>>& pattern, BudgetTracker& t);
  Tuple x_tuple(std::uint64_t code) const;
  Tuple y_tuple(std::uint64_t code) const;

  PartitionedFormula phi_;
  std::string name_;
  std::size_t m_;
  std::uint64_t nx_ = 0;
  std::uint64_t ny_ = 0;
  std::vector<Bitset> rows_;
  std::vector<Bitset> cols_;
  std::vector<std::uint32_t> row_class_;
  std::vector<std::uint32_t> col_class_;
};

std::optional<PropertyCertificate> detect(PropertyKind kind, const PartitionedFormula& phi, const FiniteStructure& m,
                                          std::size_t n, const Budget& budget = {});

// Re-evaluates every defining condition with the evaluator. Throws
// FormatError on a malformed payload (wrong counts or tuple widths).
bool verify_witness(const PropertyCertificate& c, const PartitionedFormula& phi, const FiniteStructure& m);

// Caps: IP n <= 3, TP2 n <= 2. Throws FormatError above the cap or for n = 0.
FormulaPtr build_property_sentence(PropertyKind kind, const PartitionedFormula& phi, std::size_t n);

// Variables of the i-th copy (1-based) of vars inside property sentences.
std::vector<std::string> block_names(const std::vector<std::string>& vars, std::size_t i);

// Certificate transformers. Each result still has to pass verify_witness.
//  sOP(n) -> OP(n) when some x-tuple lies outside phi(M;b_n), otherwise OP(n-1)
//  (nullopt for n = 1 in that case).
std::optional<PropertyCertificate> sop_to_op(const PropertyCertificate& c, const PartitionedFormula& phi,
                                             const FiniteStructure& m);
PropertyCertificate ip_to_op(const PropertyCertificate& c);
// TP2(n) for phi(x;y) -> IP(n) for phi(y;x). For n = 1 this needs an x-tuple
// outside phi(M;b_{1,1}); nullopt if there is none.
std::optional<PropertyCertificate> tp2_to_ip_transposed(const PropertyCertificate& c, const PartitionedFormula& phi,
                                                        const FiniteStructure& m);

// ---------------------------------------------------------------------------
// Family profiles

struct NamedFormula {
  std::string name;
  PartitionedFormula phi;
};

struct NamedBody {
  std::string name;
  LfpBody body;
};

struct ProfileCell {
  bool applicable = true;        // false when the structure lacks a relation phi uses
  std::size_t max_n = 0;
  std::optional<PropertyCertificate> certificate;
  bool budget_exhausted = false; // max_n is then a lower bound
  bool capped = false;           // a certificate exists at n_cap
};

struct ProfileRow {
  std::string structure;
  std::size_t size = 0;
  // cells[f * kinds.size() + k]
  std::vector<ProfileCell> cells;
  std::vector<std::optional<std::size_t>> closures;
};

struct FamilyProfile {
  std::string family;
  std::vector<std::string> formula_names;
  std::vector<PropertyKind> kinds;
  std::vector<std::string> closure_names;
  std::vector<ProfileRow> rows;

  const ProfileCell& cell(std::size_t row, std::size_t formula, std::size_t kind) const {
    return rows[row].cells[formula * kinds.size() + kind];
  }
  std::vector<std::size_t> column(std::size_t formula, std::size_t kind) const;
  std::vector<std::size_t> closure_column(std::size_t index) const;
  std::string to_csv() const;
};

enum class GrowthVerdict { UnboundedWithinPrefix, Plateaued };

const char* to_string(GrowthVerdict v);

// Heuristic reading of a finite prefix, applied to the running maximum of the
// column: not constant, and its maximum first reached in the second half.
GrowthVerdict growth_verdict(const std::vector<std::size_t>& column);

// Cells run on up to `threads` workers (0 = hardware concurrency); the result
// does not depend on the thread count.
FamilyProfile profile_family(const std::string& family_name, const std::vector<FiniteStructure>& family,
                             const std::vector<NamedFormula>& formulas, const std::vector<PropertyKind>& kinds,
                             std::size_t n_cap, const Budget& budget, const std::vector<NamedBody>& closures = {},
                             unsigned threads = 0);

}  // namespace lfpw
