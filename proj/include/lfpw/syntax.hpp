#pragma once

// Parsing, rendering and syntactic transformations of formulas.
//
// Concrete grammar (whitespace-insensitive):
//
//   formula := "true" | "false" | atom | "!" formula | "(" formula ")"
//            | formula "&" formula | formula "|" formula | formula "->" formula
//            | ("A" | "E") var ["."] formula
//            | "[lfp" RelVar "(" vars ")" "." formula "]" "(" vars ")"
//            | macro "(" vars ")"
//   atom    := Rel "(" vars ")" | var "=" var | var "<" var
//
// Precedence is ! > & > | > ->, "->" associates to the right, quantifiers
// extend as far right as possible. "x < y" is the binary relation named "<".

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lfpw/formula.hpp"

namespace lfpw {

enum class Polarity { Absent, Positive, Negative, Mixed };

const char* to_string(Polarity p);

// Free first-order variables in order of first occurrence.
std::vector<std::string> free_variables(const FormulaPtr& f);

// Relation symbols used free in f (not bound by an enclosing lfp), sorted.
std::set<std::string> free_relation_symbols(const FormulaPtr& f);

// Every first-order variable name occurring in f, bound or free.
std::set<std::string> variable_names(const FormulaPtr& f);

// Polarity of the relation variable v; implication antecedents count as one negation.
Polarity polarity(const FormulaPtr& f, const std::string& v);

// name', name'', ... : the first variant of base not in used.
std::string fresh_name(const std::string& base, const std::set<std::string>& used);

// Capture-avoiding renaming of free first-order variables.
FormulaPtr rename_variables(const FormulaPtr& f, const std::map<std::string, std::string>& renaming);

// Replaces every atom v(t) by g with params bound to t. Bound variables of f
// that would capture free variables of g are renamed.
FormulaPtr substitute_relation(const FormulaPtr& f, const std::string& v, const FormulaPtr& g,
                               const std::vector<std::string>& params);

std::string render(const FormulaPtr& f);

struct Macro {
  std::vector<std::string> params;
  FormulaPtr body;
};

class MacroTable {
 public:
  // Throws ParseError on malformed definitions. Later definitions may call earlier ones.
  void define(const std::string& name, const std::vector<std::string>& params, std::string_view body_text);
  void define(const std::string& name, Macro macro);
  const Macro* find(const std::string& name) const;
  bool empty() const { return macros_.empty(); }
  std::vector<std::string> names() const;

  // Expands a call: the macro body with its parameters renamed to args.
  FormulaPtr expand(const std::string& name, const std::vector<std::string>& args) const;

 private:
  std::map<std::string, Macro> macros_;
};

struct ParseOptions {
  // Relation variables that may occur free (for bodies handed to the evaluator).
  std::vector<RelationSymbol> free_relation_variables;
  const MacroTable* macros = nullptr;
  // When false, relation symbols are not checked against the signature
  // (macro bodies; formulas whose signature is not yet known).
  bool check_signature = true;
};

// Throws ParseError, SignatureError or PolarityError.
FormulaPtr parse_formula(std::string_view text, const Signature& sig, const ParseOptions& options = {});

// Checks arities against sig, declared relation variables, and positivity of
// every lfp-bound variable. Throws SignatureError or PolarityError.
void validate(const FormulaPtr& f, const Signature& sig,
              const std::vector<RelationSymbol>& free_relation_variables = {});

// Only the lfp conditions of validate (binding arity, positivity, and arity
// of atoms over lfp-bound variables); other symbols are not checked.
void check_lfp_nodes(const FormulaPtr& f);

bool is_first_order(const FormulaPtr& f);

}  // namespace lfpw
