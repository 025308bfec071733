#include "lfpw/constructions.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "lfpw/error.hpp"

namespace lfpw {

namespace {

FormulaPtr instance(const PartitionedFormula& phi, const std::vector<std::string>& xs,
                    const std::vector<std::string>& ys) {
  std::map<std::string, std::string> ren;
  for (std::size_t i = 0; i < xs.size(); ++i) ren[phi.x[i]] = xs[i];
  for (std::size_t i = 0; i < ys.size(); ++i) ren[phi.y[i]] = ys[i];
  return rename_variables(phi.formula, ren);
}

bool overlaps(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const auto& v) { return std::find(b.begin(), b.end(), v) != b.end(); });
}

FormulaPtr rebuild_binary(Connective kind, FormulaPtr a, FormulaPtr b) {
  switch (kind) {
    case Connective::And: return Formula::conj(std::move(a), std::move(b));
    case Connective::Or: return Formula::disj(std::move(a), std::move(b));
    default: return Formula::implies(std::move(a), std::move(b));
  }
}

std::vector<std::string> numbered(const std::string& base, std::size_t k) {
  if (k == 1) return {base};
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= k; ++i) out.push_back(base + std::to_string(i));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Preorders

PreorderFormula containment_preorder(const PartitionedFormula& phi) {
  const auto y1 = block_names(phi.y, 1);
  const auto y2 = block_names(phi.y, 2);
  auto xs = phi.x;
  if (overlaps(xs, y1) || overlaps(xs, y2)) xs = block_names(phi.x, 0);
  FormulaPtr f = forall_all(xs, Formula::implies(instance(phi, xs, y1), instance(phi, xs, y2)));
  return PreorderFormula{PartitionedFormula{f, y1, y2}, false};
}

LfpBody height_formula(const PreorderFormula& lambda, const std::string& relvar) {
  const std::size_t k = lambda.width();
  const auto ys = numbered("y", k);
  std::vector<std::string> yp;
  for (const auto& v : ys) yp.push_back(v + "'");
  const PartitionedFormula& l = lambda.formula;
  const FormulaPtr below = instance(l, yp, ys);
  const FormulaPtr above = instance(l, ys, yp);
  FormulaPtr body =
      forall_all(yp, Formula::implies(Formula::conj(below, Formula::negation(above)), Formula::atom(relvar, yp)));
  return LfpBody{body, relvar, ys};
}

StagePreorder::StagePreorder(LfpBody body) : body_(std::move(body)), name_("Stage_" + body_.relvar) {}

Relation StagePreorder::materialize(const FiniteStructure& m) const {
  const std::size_t k = body_.vars.size();
  const auto space = tuple_space(m.size(), k);
  if (space > (std::uint64_t{1} << 14)) throw EvalError("stage preorder over " + std::to_string(space) + " tuples is too large");
  Evaluator e(m);
  const StageTable table = e.stages(body_);
  std::vector<std::int64_t> stage(static_cast<std::size_t>(space), -1);
  for (std::size_t i = 0; i < table.stage.size(); ++i) stage[table.fixpoint.codes()[i]] = table.stage[i];
  std::vector<std::uint64_t> codes;
  for (std::uint64_t b = 0; b < space; ++b) {
    for (std::uint64_t c = 0; c < space; ++c) {
      const bool related = stage[c] < 0 || (stage[b] >= 0 && stage[b] <= stage[c]);
      if (related) codes.push_back(b * space + c);
    }
  }
  return Relation::from_codes(2 * k, m.size(), std::move(codes));
}

std::vector<std::string> StagePreorder::required_relations() const {
  std::set<std::string> syms = free_relation_symbols(body_.body);
  syms.erase(body_.relvar);
  return {syms.begin(), syms.end()};
}

PreorderFormula stage_preorder_formula(const LfpBody& body) {
  const Polarity p = polarity(body.body, body.relvar);
  if (p == Polarity::Negative || p == Polarity::Mixed) {
    throw PolarityError("relation variable " + body.relvar + " occurs " + to_string(p) + "ly in the body");
  }
  for (const auto& v : free_variables(body.body)) {
    if (std::find(body.vars.begin(), body.vars.end(), v) == body.vars.end()) {
      throw EvalError("stage preorder body has the free parameter " + v);
    }
  }
  const std::size_t k = body.vars.size();
  const auto us = numbered("u", k);
  const auto ws = numbered("w", k);
  std::vector<std::string> args = us;
  args.insert(args.end(), ws.begin(), ws.end());
  auto rel = std::make_shared<const StagePreorder>(body);
  return PreorderFormula{PartitionedFormula{Formula::derived_atom(rel, args), us, ws}, true};
}

PropertyCertificate sop_from_preorder_chain(const PreorderFormula& lambda, const FiniteStructure& m,
                                            const std::vector<Tuple>& chain) {
  if (chain.empty()) throw EvalError("empty chain");
  const auto& l = lambda.formula;
  Evaluator e(m);
  auto holds = [&](const Tuple& b, const Tuple& c) {
    Valuation v;
    for (std::size_t i = 0; i < l.x.size(); ++i) v.elements[l.x[i]] = b.at(i);
    for (std::size_t i = 0; i < l.y.size(); ++i) v.elements[l.y[i]] = c.at(i);
    return e.eval(l.formula, v);
  };
  for (const auto& t : chain) {
    if (t.size() != lambda.width()) throw EvalError("chain tuple has the wrong width");
  }
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (!holds(chain[i], chain[i + 1]) || holds(chain[i + 1], chain[i])) {
      throw EvalError("chain is not strictly increasing at position " + std::to_string(i + 1));
    }
  }
  PropertyCertificate c;
  c.kind = PropertyKind::sOP;
  c.n = chain.size();
  c.structure = m.name();
  c.b = chain;
  return c;
}

std::vector<Tuple> longest_preorder_chain(const PreorderFormula& lambda, const FiniteStructure& m) {
  Detector d(lambda.formula, m);
  const auto size = static_cast<std::size_t>(d.x_count());
  auto strict = [&](std::size_t b, std::size_t c) { return d.row(b).test(c) && !d.row(c).test(b); };
  std::vector<std::size_t> below(size);
  for (std::size_t c = 0; c < size; ++c) below[c] = d.column(c).count();
  std::vector<std::size_t> order(size);
  for (std::size_t i = 0; i < size; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return below[a] > below[b]; });
  // longest[c]: longest strict chain starting at c
  std::vector<std::size_t> longest(size, 1);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (longest[order[j]] + 1 > longest[order[i]] && strict(order[i], order[j])) {
        longest[order[i]] = longest[order[j]] + 1;
      }
    }
  }
  std::vector<Tuple> chain;
  if (size == 0) return chain;
  const std::size_t best = *std::max_element(longest.begin(), longest.end());
  std::optional<std::size_t> prev;
  for (std::size_t need = best; need > 0; --need) {
    for (std::size_t c = 0; c < size; ++c) {
      if (longest[c] >= need && (!prev || strict(*prev, c))) {
        chain.push_back(decode_tuple(c, lambda.width(), m.size()));
        prev = c;
        break;
      }
    }
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Arithmetic

namespace {

ArithmeticLibrary build_arithmetic() {
  ArithmeticLibrary lib;
  MacroTable& t = lib.macros;
  t.define("succ", {"x", "y"}, "x < y & !(E w. x < w & w < y)");
  t.define("zero", {"x"}, "!(E w. w < x)");
  t.define("one", {"x"}, "E w. zero(w) & succ(w,x)");
  t.define("plus", {"a", "b", "c"},
           "[lfp P(a,b,c). (zero(b) & a = c) | (E b2. E c2. succ(b2,b) & succ(c2,c) & P(a,b2,c2))](a,b,c)");
  t.define("times", {"a", "b", "c"},
           "[lfp T(a,b,c). (zero(b) & zero(c)) | (E b2. E c2. succ(b2,b) & T(a,b2,c2) & plus(c2,a,c))](a,b,c)");
  t.define("exp", {"a", "b", "c"},
           "[lfp X(a,b,c). (zero(b) & one(c)) | (E b2. E c2. succ(b2,b) & X(a,b2,c2) & times(c2,a,c))](a,b,c)");
  t.define("pow2", {"x", "p"},
           "[lfp Q(x,p). (one(x) & one(p)) | (E x1. E p1. succ(x1,x) & Q(x1,p1) & plus(p1,p1,p))](x,p)");
  t.define("odd", {"o"}, "E h. E e. plus(h,h,e) & succ(e,o)");
  t.define("bit", {"x", "y"},
           "E p. pow2(x,p) & (E t. E r. r < p & plus(t,r,y) & (E o. odd(o) & times(o,p,t)))");
  t.define("factor", {"x", "y", "z"},
           "!zero(x) & !zero(y) & !one(y) & (E p. exp(y,z,p) & (E q. times(q,p,x)))"
           " & !(E z1. E p2. succ(z,z1) & exp(y,z1,p2) & (E q. times(q,p2,x)))");
  lib.plus = t.expand("plus", {"x", "y", "z"});
  lib.times = t.expand("times", {"x", "y", "z"});
  lib.exp = t.expand("exp", {"x", "y", "z"});
  lib.bit = PartitionedFormula{t.expand("bit", {"x", "y"}), {"x"}, {"y"}};
  lib.factor = PartitionedFormula{t.expand("factor", {"x", "y", "z"}), {"x"}, {"y", "z"}};
  return lib;
}

}  // namespace

const ArithmeticLibrary& arithmetic_library() {
  static const ArithmeticLibrary lib = build_arithmetic();
  return lib;
}

// ---------------------------------------------------------------------------
// Interpretation and relativization

namespace {

class Interpreter {
 public:
  explicit Interpreter(const PreorderFormula& lambda) : lambda_(lambda) {}

  std::vector<std::string> block(const std::string& v) const {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= lambda_.width(); ++i) out.push_back(v + "_" + std::to_string(i));
    return out;
  }

  // relvars: lfp-bound relation variables in scope; their atoms expand blockwise.
  FormulaPtr apply(const FormulaPtr& f, const std::set<std::string>& relvars = {}) const {
    switch (f->kind()) {
      case Connective::True:
      case Connective::False: return f;
      case Connective::Atom: {
        if (!f->derived() && relvars.count(f->symbol()) != 0) return Formula::atom(f->symbol(), blocks(f->args()));
        if (f->derived() || f->symbol() != "<" || f->args().size() != 2) {
          throw SignatureError("interpret accepts only < and =, found " + f->symbol());
        }
        return Formula::conj(lam(f->args()[0], f->args()[1]), Formula::negation(lam(f->args()[1], f->args()[0])));
      }
      case Connective::Equal:
        return Formula::conj(lam(f->args()[0], f->args()[1]), lam(f->args()[1], f->args()[0]));
      case Connective::Not: return Formula::negation(apply(f->left(), relvars));
      case Connective::And:
      case Connective::Or:
      case Connective::Implies: return rebuild_binary(f->kind(), apply(f->left(), relvars), apply(f->right(), relvars));
      case Connective::Forall: return forall_all(block(f->variable()), apply(f->body(), relvars));
      case Connective::Exists: return exists_all(block(f->variable()), apply(f->body(), relvars));
      case Connective::Lfp: {
        auto inner = relvars;
        inner.insert(f->symbol());
        return Formula::lfp(f->symbol(), blocks(f->bound()), apply(f->body(), inner), blocks(f->args()));
      }
    }
    return f;
  }

 private:
  FormulaPtr lam(const std::string& v, const std::string& w) const {
    return instance(lambda_.formula, block(v), block(w));
  }

  std::vector<std::string> blocks(const std::vector<std::string>& vs) const {
    std::vector<std::string> out;
    for (const auto& v : vs) {
      const auto b = block(v);
      out.insert(out.end(), b.begin(), b.end());
    }
    return out;
  }

  const PreorderFormula& lambda_;
};

FormulaPtr relativize_inner(const FormulaPtr& f, const std::string& marker) {
  switch (f->kind()) {
    case Connective::Not: return Formula::negation(relativize_inner(f->left(), marker));
    case Connective::And:
    case Connective::Or:
    case Connective::Implies:
      return rebuild_binary(f->kind(), relativize_inner(f->left(), marker), relativize_inner(f->right(), marker));
    case Connective::Exists:
      return Formula::exists(f->variable(), Formula::conj(Formula::atom(marker, {f->variable()}),
                                                          relativize_inner(f->body(), marker)));
    case Connective::Forall:
      return Formula::forall(f->variable(), Formula::implies(Formula::atom(marker, {f->variable()}),
                                                             relativize_inner(f->body(), marker)));
    case Connective::Lfp: {
      std::vector<FormulaPtr> guards;
      for (const auto& v : f->bound()) guards.push_back(Formula::atom(marker, {v}));
      guards.push_back(relativize_inner(f->body(), marker));
      return Formula::lfp(f->symbol(), f->bound(), conjunction(guards), f->args());
    }
    default: return f;
  }
}

}  // namespace

PartitionedFormula interpret(const PartitionedFormula& phi, const PreorderFormula& lambda) {
  if (lambda.width() == 0 || lambda.formula.y.size() != lambda.width()) {
    throw SignatureError("preorder parts must have the same positive width");
  }
  const Interpreter in(lambda);
  PartitionedFormula out;
  out.formula = in.apply(phi.formula);
  for (const auto& v : phi.x) {
    const auto b = in.block(v);
    out.x.insert(out.x.end(), b.begin(), b.end());
  }
  for (const auto& v : phi.y) {
    const auto b = in.block(v);
    out.y.insert(out.y.end(), b.begin(), b.end());
  }
  return out;
}

FormulaPtr relativize(const FormulaPtr& f, const std::string& marker) {
  const FormulaPtr inner = relativize_inner(f, marker);
  const auto free = free_variables(f);
  if (free.empty()) return inner;
  std::vector<FormulaPtr> parts;
  for (const auto& v : free) parts.push_back(Formula::atom(marker, {v}));
  parts.push_back(inner);
  return conjunction(parts);
}

PartitionedFormula relativize(const PartitionedFormula& phi, const std::string& marker) {
  return PartitionedFormula{relativize(phi.formula, marker), phi.x, phi.y};
}

// ---------------------------------------------------------------------------
// phi_eta and indiscernibles

std::vector<std::string> phi_eta_block(const PartitionedFormula& phi, std::size_t i) { return block_names(phi.y, i); }

FormulaPtr build_phi_eta(const PartitionedFormula& phi, const std::vector<std::size_t>& eta, std::size_t k) {
  if (k == 0) throw FormatError("k must be at least 1");
  std::vector<bool> in(k + 1, false);
  for (auto i : eta) {
    if (i < 1 || i > k) throw FormatError("eta index " + std::to_string(i) + " is outside 1.." + std::to_string(k));
    in[i] = true;
  }
  std::vector<FormulaPtr> parts;
  for (std::size_t i = 1; i <= k; ++i) {
    const auto ys = phi_eta_block(phi, i);
    if (overlaps(phi.x, ys)) throw FormatError("x variables collide with the y-block names");
    FormulaPtr lit = instance(phi, phi.x, ys);
    parts.push_back(in[i] ? lit : Formula::negation(lit));
  }
  return conjunction(parts);
}

namespace {

// Lexicographic search over increasing position sets of length r in [0, len)
// on which every test of the family gives one value on all k-subsets.
// found(positions) returns true to stop.
class IndiscernibleSearch {
 public:
  using Truth = std::function<bool(std::size_t, const std::vector<std::size_t>&)>;
  using Found = std::function<bool(const std::vector<std::size_t>&)>;

  IndiscernibleSearch(std::size_t len, std::size_t r, std::size_t k, std::size_t tests, Truth truth,
                      BudgetTracker& tracker)
      : len_(len), r_(r), k_(k), tests_(tests), truth_(std::move(truth)), tracker_(tracker) {}

  bool run(const Found& found) {
    found_ = &found;
    std::vector<std::size_t> chosen;
    std::vector<signed char> values(tests_, -1);
    return dfs(chosen, 0, values);
  }

 private:
  bool value(std::size_t t, const std::vector<std::size_t>& pos) {
    std::vector<std::size_t> key{t};
    key.insert(key.end(), pos.begin(), pos.end());
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const bool v = truth_(t, pos);
    cache_.emplace(std::move(key), v);
    return v;
  }

  // Every k-subset of chosen that ends at chosen.back() agrees with values.
  bool consistent(const std::vector<std::size_t>& chosen, std::vector<signed char>& values) {
    if (k_ == 0 || chosen.size() < k_) return true;
    const std::size_t head = chosen.size() - 1;
    std::vector<std::size_t> pick(k_ - 1);
    for (std::size_t i = 0; i + 1 < k_; ++i) pick[i] = i;
    for (;;) {
      std::vector<std::size_t> pos;
      for (auto p : pick) pos.push_back(chosen[p]);
      pos.push_back(chosen[head]);
      for (std::size_t t = 0; t < tests_; ++t) {
        const signed char v = value(t, pos) ? 1 : 0;
        if (values[t] < 0) {
          values[t] = v;
        } else if (values[t] != v) {
          return false;
        }
      }
      // next (k-1)-combination of [0, head)
      std::size_t i = k_ - 1;
      while (i > 0 && pick[i - 1] == head - (k_ - 1) + (i - 1)) --i;
      if (i == 0) return true;
      ++pick[i - 1];
      for (std::size_t j = i; j < k_ - 1; ++j) pick[j] = pick[j - 1] + 1;
    }
  }

  bool dfs(std::vector<std::size_t>& chosen, std::size_t from, const std::vector<signed char>& values) {
    tracker_.tick();
    if (chosen.size() == r_) return (*found_)(chosen);
    for (std::size_t i = from; i + (r_ - chosen.size()) <= len_; ++i) {
      chosen.push_back(i);
      std::vector<signed char> next = values;
      if (consistent(chosen, next) && dfs(chosen, i + 1, next)) return true;
      chosen.pop_back();
    }
    return false;
  }

  std::size_t len_;
  std::size_t r_;
  std::size_t k_;
  std::size_t tests_;
  Truth truth_;
  BudgetTracker& tracker_;
  const Found* found_ = nullptr;
  std::map<std::vector<std::size_t>, bool> cache_;
};

}  // namespace

std::optional<IndiscernibleResult> extract_indiscernible(const FiniteStructure& m,
                                                          const std::vector<FormulaPtr>& delta,
                                                          const std::vector<std::string>& vars,
                                                          const std::vector<Element>& seq, std::size_t r,
                                                          Budget budget) {
  if (r > seq.size()) throw EvalError("target length exceeds the sequence length");
  for (const auto& d : delta) {
    for (const auto& v : free_variables(d)) {
      if (std::find(vars.begin(), vars.end(), v) == vars.end()) {
        throw EvalError("formula " + render(d) + " has the free variable " + v + " outside the given variables");
      }
    }
  }
  for (auto e : seq) {
    if (e >= m.size()) throw EvalError("sequence element " + std::to_string(e) + " is outside the universe");
  }
  Evaluator e(m);
  auto truth = [&](std::size_t t, const std::vector<std::size_t>& pos) {
    Valuation v;
    for (std::size_t i = 0; i < vars.size(); ++i) v.elements[vars[i]] = seq[pos[i]];
    return e.eval(delta[t], v);
  };
  BudgetTracker tracker(budget);
  IndiscernibleSearch search(seq.size(), r, vars.size(), delta.size(), truth, tracker);
  std::optional<IndiscernibleResult> result;
  search.run([&](const std::vector<std::size_t>& pos) {
    IndiscernibleResult res;
    res.positions = pos;
    for (auto p : pos) res.subsequence.push_back(seq[p]);
    result = std::move(res);
    return true;
  });
  return result;
}

// ---------------------------------------------------------------------------
// IP from OP

namespace {

Bitset realize(const std::vector<const Bitset*>& cols, std::size_t eta, std::size_t nx) {
  Bitset s(nx, true);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if ((eta >> i) & 1U) {
      s &= *cols[i];
    } else {
      s.subtract(*cols[i]);
    }
  }
  return s;
}

std::vector<std::size_t> eta_indices(std::size_t eta, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) {
    if ((eta >> i) & 1U) out.push_back(i + 1);
  }
  return out;
}

std::string eta_text(std::size_t eta, std::size_t k) {
  std::string s = "{";
  for (auto i : eta_indices(eta, k)) s += (s.size() > 1 ? "," : "") + std::to_string(i);
  return s + "}";
}

bool strict_chain(const std::vector<Bitset>& sets) {
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    if (!sets[i].is_subset_of(sets[i + 1]) || sets[i] == sets[i + 1]) return false;
  }
  return true;
}

}  // namespace

IpDerivation derive_ip_witness(const PartitionedFormula& phi, const FiniteStructure& m, std::size_t k, std::size_t n,
                               const PropertyCertificate& op_witness, Budget budget) {
  if (k == 0 || n == 0) throw EvalError("k and N must be at least 1");
  if (k > 16) throw EvalError("k is too large");
  if (op_witness.kind != PropertyKind::OP) throw EvalError("derivation needs an OP certificate");
  if (op_witness.n < k * n) {
    throw EvalError("OP witness of length " + std::to_string(op_witness.n) + " is shorter than k*N = " +
                    std::to_string(k * n));
  }
  if (!verify_witness(op_witness, phi, m)) throw EvalError("OP witness does not verify");

  Detector det(phi, m);
  const auto nx = static_cast<std::size_t>(det.x_count());
  std::vector<const Bitset*> bcols;
  for (const auto& b : op_witness.b) bcols.push_back(&det.column(encode_tuple(b, m.size())));
  const std::size_t etas = std::size_t{1} << k;

  // Delta_k: test eta holds of positions p iff some x realizes eta over b_p.
  auto truth = [&](std::size_t eta, const std::vector<std::size_t>& pos) {
    std::vector<const Bitset*> cols;
    for (auto p : pos) cols.push_back(bcols[p]);
    return realize(cols, eta, nx).any();
  };

  BudgetTracker tracker(budget);
  IndiscernibleSearch search(op_witness.n, k * n, k, etas, truth, tracker);
  IpDerivation out;
  std::optional<std::vector<std::size_t>> first;
  std::vector<bool> first_selected;
  search.run([&](const std::vector<std::size_t>& pos) {
    std::vector<const Bitset*> cs;
    for (std::size_t i = 0; i < k; ++i) cs.push_back(bcols[pos[i * n]]);
    std::vector<bool> selected(etas);
    std::vector<std::size_t> witness(etas);
    bool all = true;
    for (std::size_t eta = 0; eta < etas; ++eta) {
      const Bitset s = realize(cs, eta, nx);
      witness[eta] = s.find_first();
      selected[eta] = witness[eta] != Bitset::npos;
      all = all && selected[eta];
    }
    if (!first) {
      first = pos;
      first_selected = selected;
    }
    if (!all) return false;
    PropertyCertificate c;
    c.kind = PropertyKind::IP;
    c.n = k;
    c.structure = m.name();
    for (std::size_t i = 0; i < k; ++i) c.a.push_back(op_witness.b[pos[i * n]]);
    for (std::size_t eta = 0; eta < etas; ++eta) c.b.push_back(decode_tuple(witness[eta], phi.x.size(), m.size()));
    out.certificate = std::move(c);
    return true;
  });
  if (out.certificate) {
    if (!verify_witness(*out.certificate, phi.transposed(), m)) throw EvalError("derived IP certificate does not verify");
    out.message = "every eta is selected";
    return out;
  }
  if (!first) {
    out.message = "no Delta_k-indiscernible subsequence of length " + std::to_string(k * n) + " in the OP witness";
    return out;
  }

  const auto& pos = *first;
  for (std::size_t eta = 0; eta < etas; ++eta) {
    if (!first_selected[eta]) {
      out.failed_eta = eta_indices(eta, k);
      out.message = "eta " + eta_text(eta, k) + " is not selected";
      break;
    }
  }

  // A selected eta and an unselected eta' differing by swapping j and j+1
  // yield a chain for psi = (shared literals) & phi(x; y at eta''s member of {j, j+1}).
  std::vector<std::vector<std::string>> blocks;
  for (std::size_t i = 1; i <= k; ++i) blocks.push_back(phi_eta_block(phi, i));
  std::vector<std::string> all_y;
  for (const auto& b : blocks) all_y.insert(all_y.end(), b.begin(), b.end());
  if (overlaps(phi.x, all_y)) return out;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    for (std::size_t eta = 0; eta < etas; ++eta) {
      if (((eta >> j) & 1U) == ((eta >> (j + 1)) & 1U)) continue;
      const std::size_t eta2 = eta ^ (std::size_t{3} << j);
      if (!first_selected[eta] || first_selected[eta2]) continue;
      const std::size_t keep = ((eta2 >> j) & 1U) ? j : j + 1;
      std::vector<FormulaPtr> lits;
      for (std::size_t i = 0; i < k; ++i) {
        if (i != keep && (i == j || i == j + 1)) continue;
        FormulaPtr lit = instance(phi, phi.x, blocks[i]);
        lits.push_back(((eta2 >> i) & 1U) ? lit : Formula::negation(lit));
      }
      PartitionedFormula psi{conjunction(lits), phi.x, all_y};

      // candidate tuples: (c_j, c_{j+1}) replaced by (b_{jN+t}, b_{jN+t+1})
      std::vector<std::vector<std::size_t>> rows;
      std::vector<Bitset> sets;
      for (std::size_t t = 0; t < n; ++t) {
        std::vector<std::size_t> row;
        for (std::size_t i = 0; i < k; ++i) row.push_back(pos[i * n]);
        row[j] = pos[j * n + t];
        row[j + 1] = pos[j * n + t + 1];
        Bitset s(nx, true);
        for (std::size_t i = 0; i < k; ++i) {
          if (i != keep && (i == j || i == j + 1)) continue;
          if ((eta2 >> i) & 1U) {
            s &= *bcols[row[i]];
          } else {
            s.subtract(*bcols[row[i]]);
          }
        }
        rows.push_back(std::move(row));
        sets.push_back(std::move(s));
      }
      if (!strict_chain(sets)) {
        std::reverse(rows.begin(), rows.end());
        std::reverse(sets.begin(), sets.end());
      }
      std::optional<PropertyCertificate> chain;
      if (strict_chain(sets)) {
        PropertyCertificate c;
        c.kind = PropertyKind::sOP;
        c.n = n;
        c.structure = m.name();
        for (const auto& row : rows) {
          Tuple t;
          for (auto p : row) t.insert(t.end(), op_witness.b[p].begin(), op_witness.b[p].end());
          c.b.push_back(std::move(t));
        }
        chain = std::move(c);
      } else {
        try {
          chain = detect(PropertyKind::sOP, psi, m, n, budget);
        } catch (const EvalError&) {
          chain.reset();
        }
      }
      if (chain && verify_witness(*chain, psi, m)) {
        out.chain = std::move(chain);
        out.chain_formula = psi;
        out.message += "; eta " + eta_text(eta, k) + " is selected but " + eta_text(eta2, k) +
                       " is not, and psi = " + render(psi.formula) + " has a chain of length " + std::to_string(n);
        return out;
      }
    }
  }
  return out;
}

}  // namespace lfpw
