#include "lfpw/evaluator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <type_traits>
#include <utility>

#include "lfpw/error.hpp"
#include "lfpw/syntax.hpp"

namespace lfpw {

// ---------------------------------------------------------------------------
// StageTable

std::optional<std::size_t> StageTable::stage_of(const Tuple& t) const {
  if (t.size() != vars.size()) return std::nullopt;
  for (Element e : t) {
    if (e >= universe) return std::nullopt;
  }
  const auto code = encode_tuple(t, universe);
  const auto& codes = fixpoint.codes();
  auto it = std::lower_bound(codes.begin(), codes.end(), code);
  if (it == codes.end() || *it != code) return std::nullopt;
  return stage[static_cast<std::size_t>(it - codes.begin())];
}

Relation StageTable::stage_set(std::size_t k) const {
  std::vector<std::uint64_t> out;
  const auto& codes = fixpoint.codes();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (stage[i] <= k) out.push_back(codes[i]);
  }
  return Relation::from_codes(vars.size(), universe, std::move(out));
}

std::vector<Tuple> StageTable::level(std::size_t k) const {
  std::vector<Tuple> out;
  const auto& codes = fixpoint.codes();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (stage[i] == k) out.push_back(decode_tuple(codes[i], vars.size(), universe));
  }
  return out;
}

namespace detail {

// Non-owning callable reference; continuations return false to stop.
template <typename Sig>
class FnRef;

template <typename R, typename... A>
class FnRef<R(A...)> {
 public:
  template <typename F, typename = std::enable_if_t<!std::is_same_v<std::decay_t<F>, FnRef>>>
  FnRef(F&& f)  // NOLINT(google-explicit-constructor)
      : obj_(const_cast<void*>(static_cast<const void*>(&f))),
        call_([](void* o, A... a) -> R { return (*static_cast<std::remove_reference_t<F>*>(o))(a...); }) {}
  R operator()(A... a) const { return call_(obj_, a...); }

 private:
  void* obj_;
  R (*call_)(void*, A...);
};

using Cont = FnRef<bool()>;

struct IndexedRelation {
  Relation rel;
  std::uint64_t id = 0;
  // bound-position mask -> key over bound positions -> matching codes
  std::map<std::uint32_t, std::unordered_map<std::uint64_t, std::vector<std::uint64_t>>> indexes;

  const std::unordered_map<std::uint64_t, std::vector<std::uint64_t>>& index(std::uint32_t mask) {
    auto it = indexes.find(mask);
    if (it != indexes.end()) return it->second;
    auto& idx = indexes[mask];
    const std::size_t k = rel.arity();
    const std::size_t n = rel.universe();
    std::vector<Element> digits(k);
    for (auto code : rel.codes()) {
      std::uint64_t c = code;
      for (std::size_t i = k; i-- > 0;) {
        digits[i] = static_cast<Element>(c % n);
        c /= n;
      }
      std::uint64_t key = 0;
      for (std::size_t i = 0; i < k; ++i) {
        if ((mask >> i) & 1U) key = key * n + digits[i];
      }
      idx[key].push_back(code);
    }
    return idx;
  }
};

using RelPtr = std::shared_ptr<IndexedRelation>;

enum class NK { True, False, Atom, Eq, Not, And, Or, Exists, Forall, Lfp };

struct Node {
  NK kind = NK::True;
  std::vector<int> args;
  std::vector<Node*> kids;
  std::vector<int> vars;
  std::vector<int> free;      // sorted
  std::vector<int> free_rel;  // sorted
  RelPtr fixed;               // static or derived atom
  int relslot = -1;           // relation-variable atom, or the variable bound by Lfp
  // Lfp
  std::string key;
  std::vector<int> params;         // ordered by variable name
  std::vector<int> key_rels;       // ordered by relation-variable name
  std::vector<Node*> static_terms;
  std::vector<Node*> linear_terms;
  std::vector<Node*> other_terms;
};

struct Compiled {
  std::deque<Node> nodes;
  Node* root = nullptr;
  std::map<std::string, int> free_vars;
  std::map<std::string, int> free_rels;
  std::map<std::string, int> extra_vars;
  FormulaPtr hold;
};

namespace {

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> minus(const std::vector<int>& a, std::vector<int> b) {
  std::sort(b.begin(), b.end());
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool contains(const std::vector<int>& sorted, int x) { return std::binary_search(sorted.begin(), sorted.end(), x); }

constexpr std::uint64_t kFixpointSpaceLimit = std::uint64_t{1} << 28;
constexpr std::size_t kMaxArity = 32;

}  // namespace

class Engine {
 public:
  Engine(const FiniteStructure& m, EvalOptions options) : m_(m), n_(m.size()), options_(options) {}

  // ---------------------------------------------------------------- compile

  Compiled& compile(const FormulaPtr& f, const Valuation& v, bool cache) {
    std::string ckey;
    if (cache) {
      ckey = std::to_string(reinterpret_cast<std::uintptr_t>(f.get()));
      for (const auto& [name, r] : v.relations) ckey += "|" + name + "/" + std::to_string(r.arity());
      auto it = compiled_.find(ckey);
      if (it != compiled_.end()) return *it->second;
      if (compiled_.size() > 512) compiled_.clear();
    }
    auto c = std::make_unique<Compiled>();
    c->hold = f;
    for (const auto& [name, r] : v.relations) {
      const int slot = new_relslot(name, r.arity());
      c->free_rels[name] = slot;
    }
    Scope scope{*c, {}, {}};
    c->root = build(f, scope);
    if (!cache) {
      scratch_ = std::move(c);
      return *scratch_;
    }
    auto& ref = *c;
    compiled_[ckey] = std::move(c);
    return ref;
  }

  int extra_var(Compiled& c, const std::string& name) {
    auto it = c.extra_vars.find(name);
    if (it != c.extra_vars.end()) return it->second;
    const int slot = new_slot(name);
    c.extra_vars[name] = slot;
    return slot;
  }

  // ---------------------------------------------------------------- binding

  void bind_relations(const Compiled& c, const Valuation& v) {
    for (const auto& [name, slot] : c.free_rels) {
      const Relation& r = v.relations.at(name);
      if (r.universe() != n_) throw EvalError("relation variable " + name + " is over a different universe");
      rel_env_[slot] = make_rel(r);
    }
  }

  void reset() {
    std::fill(env_.begin(), env_.end(), -1);
    for (auto& r : rel_env_) r.reset();
  }

  std::vector<std::int32_t>& env() { return env_; }

  // ---------------------------------------------------------------- evaluation

  bool holds(const Node& n) {
    switch (n.kind) {
      case NK::True: return true;
      case NK::False: return false;
      case NK::Atom: {
        IndexedRelation& r = atom_relation(n);
        return r.rel.contains_code(bound_code(n.args));
      }
      case NK::Eq: return env_[n.args[0]] == env_[n.args[1]];
      case NK::Not: return !holds(*n.kids[0]);
      case NK::And:
        for (const Node* k : n.kids) {
          if (!holds(*k)) return false;
        }
        return true;
      case NK::Or:
        for (const Node* k : n.kids) {
          if (holds(*k)) return true;
        }
        return false;
      case NK::Exists: {
        bool found = false;
        solve(*n.kids[0], [&] {
          found = true;
          return false;
        });
        return found;
      }
      case NK::Forall: return forall_holds(n);
      case NK::Lfp: {
        RelPtr r = fixpoint(n);
        return r->rel.contains_code(bound_code(n.args));
      }
    }
    return false;
  }

  bool solve(const Node& n, Cont k) {
    if (all_bound(n.free)) return holds(n) ? k() : true;
    switch (n.kind) {
      case NK::True:
      case NK::False:
        return n.kind == NK::True ? k() : true;
      case NK::Atom: {
        RelPtr r = atom_relation_ptr(n);
        return match(*r, n.args, k);
      }
      case NK::Eq: {
        const int a = n.args[0];
        const int b = n.args[1];
        if (env_[a] >= 0 || env_[b] >= 0) {
          const int unbound = env_[a] >= 0 ? b : a;
          env_[unbound] = env_[a] >= 0 ? env_[a] : env_[b];
          const bool r = k();
          env_[unbound] = -1;
          return r;
        }
        for (std::size_t v = 0; v < n_; ++v) {
          env_[a] = env_[b] = static_cast<std::int32_t>(v);
          if (!k()) {
            env_[a] = env_[b] = -1;
            return false;
          }
        }
        env_[a] = env_[b] = -1;
        return true;
      }
      case NK::Not: {
        const auto ub = unbound(n.free);
        return for_each_assignment(ub, [&] { return holds(*n.kids[0]) ? true : k(); });
      }
      case NK::Forall: {
        const auto ub = unbound(n.free);
        return for_each_assignment(ub, [&] { return forall_holds(n) ? k() : true; });
      }
      case NK::And: {
        std::vector<char> done(n.kids.size(), 0);
        return solve_conj(n.kids, done, n.kids.size(), k);
      }
      case NK::Exists: {
        const auto ub = unbound(n.free);
        std::vector<std::uint64_t> codes;
        solve(*n.kids[0], [&] {
          codes.push_back(code_of(ub));
          return true;
        });
        return emit_codes(ub, codes, k);
      }
      case NK::Or: {
        const auto ub = unbound(n.free);
        std::vector<std::uint64_t> codes;
        for (const Node* kid : n.kids) {
          std::vector<int> missing;
          for (int s : ub) {
            if (!contains(kid->free, s)) missing.push_back(s);
          }
          solve(*kid, [&] {
            for_each_assignment(missing, [&] {
              codes.push_back(code_of(ub));
              return true;
            });
            return true;
          });
        }
        return emit_codes(ub, codes, k);
      }
      case NK::Lfp: {
        std::vector<int> ub;
        for (int p : n.params) {
          if (env_[p] < 0) ub.push_back(p);
        }
        return for_each_assignment(ub, [&] {
          RelPtr r = fixpoint(n);
          return match(*r, n.args, k);
        });
      }
    }
    return true;
  }

  // Satisfying assignments of slots (distinct, currently unbound) as a bitset over n^|slots|.
  Bitset collect(const Node& n, const std::vector<int>& slots) {
    const std::uint64_t space = tuple_space(n_, slots.size());
    if (space > kFixpointSpaceLimit) throw EvalError("tuple space too large to enumerate");
    Bitset out(static_cast<std::size_t>(space));
    std::vector<int> missing;
    for (int s : slots) {
      if (!contains(n.free, s)) missing.push_back(s);
    }
    solve(n, [&] {
      for_each_assignment(missing, [&] {
        out.set(static_cast<std::size_t>(code_of(slots)));
        return true;
      });
      return true;
    });
    return out;
  }

  // Iterates the operator of an Lfp node with its parameters bound.
  Bitset iterate(const Node& n, Iteration mode, std::vector<Bitset>* levels) {
    const std::size_t k = n.vars.size();
    const std::uint64_t space = tuple_space(n_, k);
    if (space > kFixpointSpaceLimit) throw EvalError("fixed-point tuple space too large");
    const Node& body = *n.kids[0];
    RelPtr saved = rel_env_[n.relslot];
    Bitset cur(static_cast<std::size_t>(space));
    auto bind = [&](const Bitset& b) { rel_env_[n.relslot] = make_rel(k, b); };
    auto record = [&](const Bitset& delta) {
      if (levels != nullptr) levels->push_back(delta);
    };
    try {
      bind(cur);
      Bitset next = collect(body, n.vars);
      if (next.none()) {
        rel_env_[n.relslot] = saved;
        return cur;
      }
      record(next);
      cur = next;
      if (mode == Iteration::Naive) {
        for (;;) {
          bind(cur);
          next = collect(body, n.vars);
          if (next == cur) break;
          if (!cur.is_subset_of(next)) throw EvalError("operator is not monotone");
          record(difference(next, cur));
          cur = std::move(next);
        }
      } else {
        Bitset delta = cur;
        for (;;) {
          Bitset add(static_cast<std::size_t>(space));
          if (!n.linear_terms.empty()) {
            bind(delta);
            for (const Node* t : n.linear_terms) add |= collect(*t, n.vars);
          }
          if (!n.other_terms.empty()) {
            bind(cur);
            for (const Node* t : n.other_terms) add |= collect(*t, n.vars);
          }
          add.subtract(cur);
          if (add.none()) break;
          record(add);
          cur |= add;
          delta = std::move(add);
        }
      }
    } catch (...) {
      rel_env_[n.relslot] = saved;
      throw;
    }
    rel_env_[n.relslot] = saved;
    return cur;
  }

  RelPtr make_rel(const Relation& r) {
    auto p = std::make_shared<IndexedRelation>();
    p->rel = r;
    p->id = ++rel_counter_;
    return p;
  }

  RelPtr make_rel(std::size_t arity, const Bitset& b) {
    std::vector<std::uint64_t> codes;
    codes.reserve(b.count());
    b.for_each([&](std::size_t i) { codes.push_back(i); });
    auto p = std::make_shared<IndexedRelation>();
    p->rel = Relation::from_codes(arity, n_, std::move(codes));
    p->id = ++rel_counter_;
    return p;
  }

  std::size_t slot_count() const { return env_.size(); }

 private:
  struct Scope {
    Compiled& c;
    std::vector<std::pair<std::string, int>> vars;
    std::vector<std::pair<std::string, int>> rels;
  };

  int new_slot(const std::string& name) {
    env_.push_back(-1);
    slot_names_.push_back(name);
    return static_cast<int>(env_.size() - 1);
  }

  int new_relslot(const std::string& name, std::size_t arity) {
    rel_env_.emplace_back();
    rel_names_.push_back(name);
    rel_arity_.push_back(arity);
    return static_cast<int>(rel_env_.size() - 1);
  }

  int lookup_var(Scope& s, const std::string& name) {
    for (auto it = s.vars.rbegin(); it != s.vars.rend(); ++it) {
      if (it->first == name) return it->second;
    }
    auto it = s.c.free_vars.find(name);
    if (it != s.c.free_vars.end()) return it->second;
    const int slot = new_slot(name);
    s.c.free_vars[name] = slot;
    return slot;
  }

  int lookup_rel(Scope& s, const std::string& name) {
    for (auto it = s.rels.rbegin(); it != s.rels.rend(); ++it) {
      if (it->first == name) return it->second;
    }
    auto it = s.c.free_rels.find(name);
    return it == s.c.free_rels.end() ? -1 : it->second;
  }

  Node* node(Scope& s, NK kind) {
    s.c.nodes.emplace_back();
    s.c.nodes.back().kind = kind;
    return &s.c.nodes.back();
  }

  RelPtr static_relation(const std::string& name) {
    auto it = static_.find(name);
    if (it != static_.end()) return it->second;
    const Relation* r = m_.find(name);
    if (r == nullptr) throw EvalError("structure " + m_.name() + " has no relation " + name);
    RelPtr p = make_rel(*r);
    static_[name] = p;
    return p;
  }

  RelPtr derived_relation(const std::shared_ptr<const DerivedRelation>& d) {
    auto it = derived_.find(d.get());
    if (it != derived_.end()) return it->second.second;
    Relation r = d->materialize(m_);
    if (r.arity() != d->arity() || r.universe() != n_) throw EvalError("derived relation " + d->name() + " is malformed");
    RelPtr p = make_rel(r);
    derived_[d.get()] = {d, p};
    return p;
  }

  void flatten_into(NK kind, Node* child, std::vector<Node*>& out) {
    if (child->kind == kind) {
      for (Node* k : child->kids) out.push_back(k);
    } else {
      out.push_back(child);
    }
  }

  void finish_nary(Node* n) {
    for (const Node* k : n->kids) {
      n->free = sorted_union(n->free, k->free);
      n->free_rel = sorted_union(n->free_rel, k->free_rel);
    }
  }

  Node* build(const FormulaPtr& f, Scope& s) {
    switch (f->kind()) {
      case Connective::True: return node(s, NK::True);
      case Connective::False: return node(s, NK::False);
      case Connective::Equal: {
        Node* n = node(s, NK::Eq);
        n->args = {lookup_var(s, f->args()[0]), lookup_var(s, f->args()[1])};
        n->free = n->args;
        std::sort(n->free.begin(), n->free.end());
        n->free.erase(std::unique(n->free.begin(), n->free.end()), n->free.end());
        return n;
      }
      case Connective::Atom: {
        Node* n = node(s, NK::Atom);
        if (f->args().size() > kMaxArity) throw EvalError("atom arity too large");
        for (const auto& a : f->args()) n->args.push_back(lookup_var(s, a));
        n->free = n->args;
        std::sort(n->free.begin(), n->free.end());
        n->free.erase(std::unique(n->free.begin(), n->free.end()), n->free.end());
        const int rs = f->derived() ? -1 : lookup_rel(s, f->symbol());
        std::size_t arity = 0;
        if (rs >= 0) {
          n->relslot = rs;
          n->free_rel = {rs};
          arity = rel_arity_[rs];
        } else if (f->derived()) {
          n->fixed = derived_relation(f->derived());
          arity = f->derived()->arity();
        } else {
          n->fixed = static_relation(f->symbol());
          arity = n->fixed->rel.arity();
        }
        if (arity != f->args().size()) {
          throw EvalError("arity mismatch for " + f->symbol() + ": expected " + std::to_string(arity) + ", got " +
                          std::to_string(f->args().size()));
        }
        return n;
      }
      case Connective::Not: {
        Node* n = node(s, NK::Not);
        n->kids = {build(f->left(), s)};
        finish_nary(n);
        return n;
      }
      case Connective::And:
      case Connective::Or:
      case Connective::Implies: {
        const NK kind = f->kind() == Connective::And ? NK::And : NK::Or;
        Node* n = node(s, kind);
        Node* l = build(f->left(), s);
        if (f->kind() == Connective::Implies) {
          Node* neg = node(s, NK::Not);
          neg->kids = {l};
          finish_nary(neg);
          l = neg;
        }
        Node* r = build(f->right(), s);
        flatten_into(kind, l, n->kids);
        flatten_into(kind, r, n->kids);
        finish_nary(n);
        return n;
      }
      case Connective::Forall:
      case Connective::Exists: {
        const NK kind = f->kind() == Connective::Forall ? NK::Forall : NK::Exists;
        Node* n = node(s, kind);
        FormulaPtr cur = f;
        std::size_t pushed = 0;
        while (cur->kind() == f->kind()) {
          const int slot = new_slot(cur->variable());
          s.vars.emplace_back(cur->variable(), slot);
          n->vars.push_back(slot);
          ++pushed;
          cur = cur->body();
        }
        n->kids = {build(cur, s)};
        s.vars.resize(s.vars.size() - pushed);
        n->free = minus(n->kids[0]->free, n->vars);
        n->free_rel = n->kids[0]->free_rel;
        return n;
      }
      case Connective::Lfp: return build_lfp(f, s);
    }
    throw EvalError("unknown formula kind");
  }

  Node* build_lfp(const FormulaPtr& f, Scope& s) {
    const Polarity p = polarity(f->body(), f->symbol());
    if (p == Polarity::Negative || p == Polarity::Mixed) {
      throw PolarityError("relation variable " + f->symbol() + " occurs " + to_string(p) + "ly in lfp body");
    }
    if (f->bound().size() != f->args().size() || f->bound().empty() || f->bound().size() > kMaxArity) {
      throw EvalError("lfp over " + f->symbol() + " has mismatched arity");
    }
    Node* n = node(s, NK::Lfp);
    for (const auto& a : f->args()) n->args.push_back(lookup_var(s, a));
    const int rs = new_relslot(f->symbol(), f->bound().size());
    n->relslot = rs;
    for (const auto& b : f->bound()) {
      const int slot = new_slot(b);
      n->vars.push_back(slot);
    }
    for (std::size_t i = 0; i < f->bound().size(); ++i) s.vars.emplace_back(f->bound()[i], n->vars[i]);
    s.rels.emplace_back(f->symbol(), rs);
    Node* body = build(f->body(), s);
    s.rels.pop_back();
    s.vars.resize(s.vars.size() - f->bound().size());
    n->kids = {body};

    n->params = minus(body->free, n->vars);
    std::sort(n->params.begin(), n->params.end(),
              [&](int a, int b) { return slot_names_[a] < slot_names_[b]; });
    n->free_rel = minus(body->free_rel, {rs});
    n->key_rels = n->free_rel;
    std::sort(n->key_rels.begin(), n->key_rels.end(),
              [&](int a, int b) { return rel_names_[a] < rel_names_[b]; });
    std::vector<int> argset = n->args;
    std::sort(argset.begin(), argset.end());
    argset.erase(std::unique(argset.begin(), argset.end()), argset.end());
    std::vector<int> sorted_params = n->params;
    std::sort(sorted_params.begin(), sorted_params.end());
    n->free = sorted_union(sorted_params, argset);

    std::string bound;
    for (std::size_t i = 0; i < f->bound().size(); ++i) bound += (i ? "," : "") + f->bound()[i];
    n->key = "[lfp " + f->symbol() + "(" + bound + "). " + render(f->body()) + "]";

    std::vector<Node*> terms;
    flatten_into(NK::Or, body, terms);
    for (Node* t : terms) {
      bool nonlinear = false;
      const int occ = occurrences(*t, rs, false, nonlinear);
      if (occ == 0) {
        n->static_terms.push_back(t);
      } else if (occ == 1 && !nonlinear) {
        n->linear_terms.push_back(t);
      } else {
        n->other_terms.push_back(t);
      }
    }
    return n;
  }

  static int occurrences(const Node& n, int rs, bool under, bool& nonlinear) {
    if (!contains(n.free_rel, rs) && !(n.kind == NK::Atom && n.relslot == rs)) return 0;
    switch (n.kind) {
      case NK::Atom:
        if (n.relslot != rs) return 0;
        if (under) nonlinear = true;
        return 1;
      case NK::And:
      case NK::Or:
      case NK::Exists: {
        int total = 0;
        for (const Node* k : n.kids) total += occurrences(*k, rs, under, nonlinear);
        return total;
      }
      default: {
        int total = 0;
        for (const Node* k : n.kids) total += occurrences(*k, rs, true, nonlinear);
        if (total == 0 && n.kind == NK::Lfp) return 0;
        return total;
      }
    }
  }

  // ---------------------------------------------------------------- helpers

  bool all_bound(const std::vector<int>& slots) const {
    for (int s : slots) {
      if (env_[s] < 0) return false;
    }
    return true;
  }

  std::vector<int> unbound(const std::vector<int>& slots) const {
    std::vector<int> out;
    for (int s : slots) {
      if (env_[s] < 0) out.push_back(s);
    }
    return out;
  }

  std::uint64_t code_of(const std::vector<int>& slots) const {
    std::uint64_t c = 0;
    for (int s : slots) c = c * n_ + static_cast<std::uint64_t>(env_[s]);
    return c;
  }

  std::uint64_t bound_code(const std::vector<int>& args) const { return code_of(args); }

  template <typename F>
  bool for_each_assignment(const std::vector<int>& slots, F&& f) {
    if (slots.empty()) return f();
    for (int s : slots) env_[s] = 0;
    bool keep = true;
    for (;;) {
      if (!f()) {
        keep = false;
        break;
      }
      std::size_t i = slots.size();
      bool advanced = false;
      while (i > 0) {
        --i;
        if (static_cast<std::size_t>(++env_[slots[i]]) < n_) {
          advanced = true;
          break;
        }
        env_[slots[i]] = 0;
      }
      if (!advanced) break;
    }
    for (int s : slots) env_[s] = -1;
    return keep;
  }

  bool emit_codes(const std::vector<int>& slots, std::vector<std::uint64_t>& codes, Cont k) {
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    bool keep = true;
    for (auto code : codes) {
      std::uint64_t c = code;
      for (std::size_t i = slots.size(); i-- > 0;) {
        env_[slots[i]] = static_cast<std::int32_t>(c % n_);
        c /= n_;
      }
      if (!k()) {
        keep = false;
        break;
      }
    }
    for (int s : slots) env_[s] = -1;
    return keep;
  }

  bool forall_holds(const Node& n) {
    bool all = true;
    for_each_assignment(n.vars, [&] {
      if (!holds(*n.kids[0])) {
        all = false;
        return false;
      }
      return true;
    });
    return all;
  }

  IndexedRelation& atom_relation(const Node& n) { return *atom_relation_ptr(n); }

  RelPtr atom_relation_ptr(const Node& n) {
    if (n.relslot >= 0) {
      const RelPtr& r = rel_env_[n.relslot];
      if (!r) throw EvalError("relation variable " + rel_names_[n.relslot] + " is unbound");
      return r;
    }
    return n.fixed;
  }

  bool emit_tuple(const std::vector<int>& args, std::uint64_t code, Cont k) {
    std::array<std::int32_t, kMaxArity> vals{};
    const std::size_t ar = args.size();
    for (std::size_t i = ar; i-- > 0;) {
      vals[i] = static_cast<std::int32_t>(code % n_);
      code /= n_;
    }
    std::array<int, kMaxArity> set{};
    std::size_t nset = 0;
    bool ok = true;
    for (std::size_t i = 0; i < ar; ++i) {
      const int s = args[i];
      if (env_[s] < 0) {
        env_[s] = vals[i];
        set[nset++] = s;
      } else if (env_[s] != vals[i]) {
        ok = false;
        break;
      }
    }
    const bool keep = ok ? k() : true;
    for (std::size_t j = 0; j < nset; ++j) env_[set[j]] = -1;
    return keep;
  }

  bool match(IndexedRelation& r, const std::vector<int>& args, Cont k) {
    std::uint32_t mask = 0;
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (env_[args[i]] >= 0) {
        mask |= 1U << i;
        key = key * n_ + static_cast<std::uint64_t>(env_[args[i]]);
      }
    }
    const std::uint32_t full = args.size() >= 32 ? ~0U : ((1U << args.size()) - 1);
    if (mask == full) return r.rel.contains_code(code_of(args)) ? k() : true;
    if (mask == 0) {
      for (auto code : r.rel.codes()) {
        if (!emit_tuple(args, code, k)) return false;
      }
      return true;
    }
    const auto& idx = r.index(mask);
    auto it = idx.find(key);
    if (it == idx.end()) return true;
    for (auto code : it->second) {
      if (!emit_tuple(args, code, k)) return false;
    }
    return true;
  }

  double estimate(const Node& n) {
    const double m = static_cast<double>(n_);
    const auto ub = unbound(n.free);
    const double enumerate = std::pow(m, static_cast<double>(ub.size()));
    switch (n.kind) {
      case NK::True:
      case NK::False: return 0;
      case NK::Eq: return ub.size() == 1 ? 1 : m;
      case NK::Atom: {
        const RelPtr r = atom_relation_ptr(n);
        const double bound_positions = static_cast<double>(n.free.size() - ub.size());
        return static_cast<double>(r->rel.size()) / std::pow(m, bound_positions);
      }
      case NK::Lfp: {
        bool params_bound = true;
        for (int p : n.params) params_bound = params_bound && env_[p] >= 0;
        if (!params_bound) return 2 * enumerate;
        const RelPtr r = fixpoint(n);
        std::size_t bound_args = 0;
        for (int a : n.free) {
          if (env_[a] >= 0 && std::find(n.args.begin(), n.args.end(), a) != n.args.end()) ++bound_args;
        }
        return static_cast<double>(r->rel.size()) / std::pow(m, static_cast<double>(bound_args));
      }
      case NK::Exists:
      case NK::Or:
      case NK::And: return 0.5 * enumerate;
      case NK::Not:
      case NK::Forall: return 2 * enumerate;
    }
    return enumerate;
  }

  bool solve_conj(const std::vector<Node*>& cs, std::vector<char>& done, std::size_t remaining, Cont k) {
    std::vector<std::size_t> marked;
    auto unmark = [&] {
      for (auto i : marked) done[i] = 0;
    };
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (done[i] || !all_bound(cs[i]->free)) continue;
      done[i] = 1;
      marked.push_back(i);
      if (!holds(*cs[i])) {
        unmark();
        return true;
      }
    }
    remaining -= marked.size();
    if (remaining == 0) {
      unmark();
      return k();
    }
    std::size_t best = cs.size();
    double best_cost = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (done[i]) continue;
      const double c = estimate(*cs[i]);
      if (best == cs.size() || c < best_cost) {
        best = i;
        best_cost = c;
      }
    }
    done[best] = 1;
    marked.push_back(best);
    const bool r = solve(*cs[best], [&] { return solve_conj(cs, done, remaining - 1, k); });
    unmark();
    return r;
  }

 public:
  RelPtr fixpoint(const Node& n) {
    std::string key = n.key;
    key += "|";
    for (int p : n.params) {
      key += slot_names_[p];
      key += "=";
      key += std::to_string(env_[p]);
      key += ",";
    }
    key += "|";
    for (int r : n.key_rels) {
      const RelPtr& rel = rel_env_[r];
      if (!rel) throw EvalError("relation variable " + rel_names_[r] + " is unbound");
      key += rel_names_[r] + "#" + std::to_string(rel->id) + ",";
    }
    auto it = lfp_cache_.find(key);
    if (it != lfp_cache_.end()) return it->second;
    if (lfp_cache_.size() > 200000) lfp_cache_.clear();
    Bitset result = iterate(n, options_.iteration, nullptr);
    RelPtr p = make_rel(n.vars.size(), result);
    lfp_cache_[key] = p;
    return p;
  }

  const std::string& slot_name(int s) const { return slot_names_[s]; }

  void maybe_compact() {
    if (env_.size() < (1U << 20)) return;
    compiled_.clear();
    scratch_.reset();
    env_.clear();
    slot_names_.clear();
    rel_env_.clear();
    rel_names_.clear();
    rel_arity_.clear();
  }

 private:
  const FiniteStructure& m_;
  std::size_t n_;
  EvalOptions options_;
  std::vector<std::int32_t> env_;
  std::vector<std::string> slot_names_;
  std::vector<RelPtr> rel_env_;
  std::vector<std::string> rel_names_;
  std::vector<std::size_t> rel_arity_;
  std::uint64_t rel_counter_ = 0;
  std::map<std::string, RelPtr> static_;
  std::map<const DerivedRelation*, std::pair<std::shared_ptr<const DerivedRelation>, RelPtr>> derived_;
  std::unordered_map<std::string, RelPtr> lfp_cache_;
  std::map<std::string, std::unique_ptr<Compiled>> compiled_;
  std::unique_ptr<Compiled> scratch_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluator

namespace {

void check_relations(const Valuation& v) {
  for (const auto& [name, r] : v.relations) {
    if (r.arity() == 0) throw EvalError("relation variable " + name + " has arity 0");
  }
}

}  // namespace

Evaluator::Evaluator(const FiniteStructure& m, EvalOptions options)
    : m_(m), options_(options), engine_(std::make_unique<detail::Engine>(m, options)) {}

Evaluator::~Evaluator() = default;

bool Evaluator::eval(const FormulaPtr& f, const Valuation& v) {
  check_relations(v);
  engine_->maybe_compact();
  detail::Compiled& c = engine_->compile(f, v, true);
  try {
    for (const auto& [name, slot] : c.free_vars) {
      auto it = v.elements.find(name);
      if (it == v.elements.end()) throw EvalError("free variable " + name + " is unbound");
      if (it->second >= m_.size()) throw EvalError("value of " + name + " is outside the universe");
      engine_->env()[slot] = static_cast<std::int32_t>(it->second);
    }
    engine_->bind_relations(c, v);
    const bool r = engine_->holds(*c.root);
    engine_->reset();
    return r;
  } catch (...) {
    engine_->reset();
    throw;
  }
}

Relation Evaluator::satisfying(const FormulaPtr& f, const std::vector<std::string>& vars, const Valuation& v) {
  check_relations(v);
  std::set<std::string> distinct(vars.begin(), vars.end());
  if (distinct.size() != vars.size()) throw EvalError("satisfying: repeated variable");
  engine_->maybe_compact();
  detail::Compiled& c = engine_->compile(f, v, true);
  std::vector<int> slots;
  for (const auto& name : vars) {
    auto it = c.free_vars.find(name);
    slots.push_back(it != c.free_vars.end() ? it->second : engine_->extra_var(c, name));
  }
  try {
    for (const auto& [name, slot] : c.free_vars) {
      if (distinct.count(name) != 0) continue;
      auto it = v.elements.find(name);
      if (it == v.elements.end()) throw EvalError("free variable " + name + " is unbound");
      if (it->second >= m_.size()) throw EvalError("value of " + name + " is outside the universe");
      engine_->env()[slot] = static_cast<std::int32_t>(it->second);
    }
    engine_->bind_relations(c, v);
    Bitset b = engine_->collect(*c.root, slots);
    engine_->reset();
    std::vector<std::uint64_t> codes;
    b.for_each([&](std::size_t i) { codes.push_back(i); });
    return Relation::from_codes(vars.size(), m_.size(), std::move(codes));
  } catch (...) {
    engine_->reset();
    throw;
  }
}

Relation Evaluator::gamma(const LfpBody& b, const Relation& x, const Valuation& v) {
  if (x.arity() != b.vars.size()) throw EvalError("gamma: relation arity does not match the lfp variables");
  Valuation w = v;
  w.relations[b.relvar] = x;
  return satisfying(b.body, b.vars, w);
}

StageTable Evaluator::stages(const LfpBody& b, const Valuation& v) { return stages(b, v, options_.iteration); }

StageTable Evaluator::stages(const LfpBody& b, const Valuation& v, Iteration iteration) {
  check_relations(v);
  engine_->maybe_compact();
  FormulaPtr f = b.applied_to(b.vars);
  detail::Compiled& c = engine_->compile(f, v, false);
  const detail::Node& root = *c.root;
  StageTable t;
  t.relvar = b.relvar;
  t.vars = b.vars;
  t.universe = m_.size();
  try {
    for (int p : root.params) {
      const std::string& name = engine_->slot_name(p);
      auto it = v.elements.find(name);
      if (it == v.elements.end()) throw EvalError("free variable " + name + " of the lfp body is unbound");
      if (it->second >= m_.size()) throw EvalError("value of " + name + " is outside the universe");
      engine_->env()[p] = static_cast<std::int32_t>(it->second);
    }
    engine_->bind_relations(c, v);
    std::vector<Bitset> levels;
    Bitset fix = engine_->iterate(root, iteration, &levels);
    engine_->reset();
    std::vector<std::uint64_t> codes;
    fix.for_each([&](std::size_t i) { codes.push_back(i); });
    t.fixpoint = Relation::from_codes(b.vars.size(), m_.size(), codes);
    t.stage.assign(codes.size(), 0);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      levels[k].for_each([&](std::size_t i) {
        auto pos = std::lower_bound(codes.begin(), codes.end(), static_cast<std::uint64_t>(i)) - codes.begin();
        t.stage[static_cast<std::size_t>(pos)] = static_cast<std::uint32_t>(k + 1);
      });
    }
    t.closure = levels.size();
  } catch (...) {
    engine_->reset();
    throw;
  }
  return t;
}

bool eval(const FormulaPtr& f, const FiniteStructure& m, const Valuation& v) {
  Evaluator e(m);
  return e.eval(f, v);
}

StageTable lfp_stages(const LfpBody& b, const FiniteStructure& m, const Valuation& v, Iteration iteration) {
  Evaluator e(m);
  return e.stages(b, v, iteration);
}

std::size_t closure_ordinal(const LfpBody& b, const FiniteStructure& m, const Valuation& v) {
  return lfp_stages(b, m, v).closure;
}

Relation stage_comparison(const StageTable& table) {
  const std::size_t k = table.vars.size();
  const std::uint64_t space = tuple_space(table.universe, k);
  Relation out(2 * k, table.universe);
  std::vector<std::uint64_t> codes;
  const auto& fix = table.fixpoint.codes();
  for (std::size_t i = 0; i < fix.size(); ++i) {
    for (std::size_t j = 0; j < fix.size(); ++j) {
      if (table.stage[i] <= table.stage[j]) codes.push_back(fix[i] * space + fix[j]);
    }
  }
  return Relation::from_codes(2 * k, table.universe, std::move(codes));
}

Relation stage_comparison(const LfpBody& b, const FiniteStructure& m, const Valuation& v) {
  return stage_comparison(lfp_stages(b, m, v));
}

FormulaPtr unfold_lfp(const LfpBody& b, std::size_t k) {
  FormulaPtr theta = Formula::truth(false);
  for (std::size_t i = 0; i < k; ++i) theta = substitute_relation(b.body, b.relvar, theta, b.vars);
  return theta;
}

std::optional<std::size_t> unfold_over_family(const LfpBody& b, const std::vector<FiniteStructure>& family,
                                              std::size_t max_k) {
  std::vector<std::unique_ptr<Evaluator>> evals;
  std::vector<Relation> prev;
  FormulaPtr theta = Formula::truth(false);
  for (const auto& m : family) {
    evals.push_back(std::make_unique<Evaluator>(m));
    prev.push_back(evals.back()->satisfying(theta, b.vars));
  }
  for (std::size_t k = 0; k <= max_k; ++k) {
    theta = substitute_relation(b.body, b.relvar, theta, b.vars);
    bool stable = true;
    for (std::size_t i = 0; i < family.size(); ++i) {
      Relation next = evals[i]->satisfying(theta, b.vars);
      if (!(next == prev[i])) stable = false;
      prev[i] = std::move(next);
    }
    if (stable) return k;
  }
  return std::nullopt;
}

}  // namespace lfpw
