// lfpw: command-line front end for the LFP workbench.
//
// Exit codes: 0 ok, 1 property not found (detect, verify), 2 usage, parse or
// evaluation error, 3 budget exhausted.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfpw/constructions.hpp"
#include "lfpw/dividing_lines.hpp"
#include "lfpw/error.hpp"
#include "lfpw/evaluator.hpp"
#include "lfpw/family.hpp"
#include "lfpw/syntax.hpp"

namespace fs = std::filesystem;
using namespace lfpw;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::optional<long long> budget_ms;
  std::optional<std::uint64_t> budget_nodes;
  std::optional<std::uint64_t> seed;
  std::string out;
};

Budget budget_of(const Globals& g) {
  Budget b;
  if (g.budget_ms) b.wall = std::chrono::milliseconds(*g.budget_ms);
  b.nodes = g.budget_nodes;
  return b;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(g.out, std::ios::binary);
  if (!out) throw FormatError("cannot write " + g.out);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// Formula text or a .lfp file: "def name(params) := body" lines define
// macros, '#' starts a comment, the remaining lines form the formula. The
// arithmetic macros (succ, plus, times, exp, bit, factor, ...) are predefined.
struct FormulaSource {
  MacroTable macros = arithmetic_library().macros;
  std::string formula;
};

FormulaSource read_formula_source(const std::string& text_or_path) {
  FormulaSource src;
  std::string text = text_or_path;
  std::error_code ec;
  if (fs::is_regular_file(text_or_path, ec)) text = read_file(text_or_path);
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    line = line.substr(start);
    if (line.rfind("def ", 0) == 0) {
      const auto open = line.find('(');
      const auto close = line.find(')');
      const auto assign = line.find(":=");
      if (open == std::string::npos || close == std::string::npos || assign == std::string::npos || close > assign) {
        throw FormatError("malformed definition: " + line);
      }
      std::string name = line.substr(4, open - 4);
      name.erase(name.find_last_not_of(' ') + 1);
      std::vector<std::string> params;
      std::stringstream ps(line.substr(open + 1, close - open - 1));
      std::string p;
      while (std::getline(ps, p, ',')) {
        p.erase(0, p.find_first_not_of(' '));
        p.erase(p.find_last_not_of(' ') + 1);
        if (!p.empty()) params.push_back(p);
      }
      src.macros.define(name, params, line.substr(assign + 2));
      continue;
    }
    if (!src.formula.empty()) src.formula += ' ';
    src.formula += line;
  }
  if (src.formula.empty()) throw FormatError("no formula given");
  return src;
}

FormulaPtr load_formula(const std::string& text_or_path, const Signature* sig) {
  const FormulaSource src = read_formula_source(text_or_path);
  ParseOptions opts;
  opts.macros = &src.macros;
  opts.check_signature = sig != nullptr;
  return parse_formula(src.formula, sig ? *sig : Signature{}, opts);
}

std::string with_seed(const std::string& spec, const Globals& g) {
  if (!g.seed || spec.find("seed=") != std::string::npos || spec.rfind("rg:", 0) != 0) return spec;
  return spec + ":seed=" + std::to_string(*g.seed);
}

Valuation bindings(const std::vector<std::string>& binds, std::size_t universe) {
  Valuation v;
  for (const auto& b : binds) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw FormatError("binding must look like var=element: " + b);
    unsigned long e = 0;
    try {
      e = std::stoul(b.substr(eq + 1));
    } catch (const std::exception&) {
      throw FormatError("binding must look like var=element: " + b);
    }
    if (e >= universe) throw FormatError("element " + std::to_string(e) + " is outside the universe");
    v.elements[b.substr(0, eq)] = static_cast<Element>(e);
  }
  return v;
}

LfpBody top_lfp(const FormulaPtr& f) {
  if (f->kind() != Connective::Lfp) throw FormatError("expected an lfp formula, got " + render(f));
  return LfpBody{f->body(), f->symbol(), f->bound()};
}

PartitionedFormula partition(const FormulaPtr& f, const std::vector<std::string>& x, const std::vector<std::string>& y) {
  if (x.empty() && y.empty()) return PartitionedFormula::with_default_split(f);
  return PartitionedFormula::make(f, x, y);
}

std::string tuple_text(const Tuple& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + std::to_string(t[i]);
  return s + ")";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_stem(const std::string& family) {
  std::string s;
  for (char c : family) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s;
}

// ---------------------------------------------------------------------------
// profile

struct ProfileConfig {
  std::vector<std::string> families;
  std::vector<NamedFormula> formulas;
  std::vector<NamedBody> closures;
  std::vector<PropertyKind> kinds;
  std::size_t n_cap = 4;
  std::map<PropertyKind, std::size_t> kind_caps;
  Budget budget;
  unsigned threads = 0;
};

std::vector<std::string> string_list(const nlohmann::json& j, const char* field) {
  std::vector<std::string> out;
  if (!j.contains(field)) return out;
  for (const auto& e : j[field]) out.push_back(e.get<std::string>());
  return out;
}

ProfileConfig parse_config(const std::string& text, const Globals& g) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed config: ") + e.what());
  }
  ProfileConfig c;
  try {
    MacroTable macros = arithmetic_library().macros;
    if (j.contains("macros")) {
      for (const auto& m : j["macros"]) {
        macros.define(m.at("name").get<std::string>(), string_list(m, "params"), m.at("body").get<std::string>());
      }
    }
    ParseOptions opts;
    opts.check_signature = false;
    opts.macros = &macros;
    auto parse_body = [&](const nlohmann::json& b) {
      ParseOptions bo = opts;
      const std::vector<std::string> vars = string_list(b, "vars");
      const std::string relvar = b.at("relvar").get<std::string>();
      bo.free_relation_variables.push_back({relvar, vars.size()});
      return LfpBody{parse_formula(b.at("body").get<std::string>(), Signature{}, bo), relvar, vars};
    };
    for (const auto& f : j.at("families")) c.families.push_back(with_seed(f.get<std::string>(), g));
    for (const auto& f : j.at("formulas")) {
      NamedFormula nf;
      nf.name = f.at("name").get<std::string>();
      if (f.contains("stage_preorder")) {
        nf.phi = stage_preorder_formula(parse_body(f["stage_preorder"])).formula;
      } else {
        const FormulaPtr phi = parse_formula(f.at("formula").get<std::string>(), Signature{}, opts);
        nf.phi = partition(phi, string_list(f, "x"), string_list(f, "y"));
      }
      c.formulas.push_back(std::move(nf));
    }
    if (j.contains("closures")) {
      for (const auto& b : j["closures"]) c.closures.push_back(NamedBody{b.at("name").get<std::string>(), parse_body(b)});
    }
    for (const auto& k : string_list(j, "kinds")) c.kinds.push_back(parse_kind(k));
    if (c.kinds.empty()) c.kinds = {PropertyKind::OP, PropertyKind::sOP, PropertyKind::IP, PropertyKind::TP2};
    c.n_cap = j.value("n_cap", std::size_t{4});
    if (c.n_cap == 0) throw FormatError("n_cap must be positive");
    if (j.contains("kind_caps")) {
      for (const auto& [k, v] : j["kind_caps"].items()) c.kind_caps[parse_kind(k)] = v.get<std::size_t>();
    }
    if (j.contains("budget_ms")) c.budget.wall = std::chrono::milliseconds(j["budget_ms"].get<long long>());
    if (j.contains("budget_nodes")) c.budget.nodes = j["budget_nodes"].get<std::uint64_t>();
    c.threads = j.value("threads", 0U);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad config field: ") + e.what());
  }
  if (g.budget_ms) c.budget.wall = std::chrono::milliseconds(*g.budget_ms);
  if (g.budget_nodes) c.budget.nodes = g.budget_nodes;
  return c;
}

int run_profile(const std::string& config_path, const Globals& g) {
  const std::string text = read_file(config_path);
  const ProfileConfig cfg = parse_config(text, g);
  const fs::path out_dir = g.out.empty() ? fs::path("profile-out") : fs::path(g.out);
  fs::create_directories(out_dir);

  nlohmann::ordered_json report;
  report["tool"] = "lfpw";
  report["version"] = kVersion;
  report["config"] = fs::path(config_path).filename().string();
  report["config_hash"] = hex64(fnv1a(text + "|seed=" + (g.seed ? std::to_string(*g.seed) : "")));
  report["seed"] = g.seed ? nlohmann::ordered_json(*g.seed) : nlohmann::ordered_json(nullptr);
  report["n_cap"] = cfg.n_cap;
  nlohmann::ordered_json fams = nlohmann::ordered_json::array();

  for (const auto& spec_text : cfg.families) {
    const FamilySpec spec = FamilySpec::parse(spec_text);
    const auto family = generate_family(spec);
    // kinds with their own caps are profiled separately, then merged
    FamilyProfile prof = profile_family(spec_text, family, cfg.formulas, cfg.kinds, cfg.n_cap, cfg.budget, cfg.closures,
                                        cfg.threads);
    for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
      auto cap = cfg.kind_caps.find(cfg.kinds[k]);
      if (cap == cfg.kind_caps.end() || cap->second >= cfg.n_cap) continue;
      FamilyProfile part =
          profile_family(spec_text, family, cfg.formulas, {cfg.kinds[k]}, cap->second, cfg.budget, {}, cfg.threads);
      for (std::size_t r = 0; r < prof.rows.size(); ++r) {
        for (std::size_t f = 0; f < cfg.formulas.size(); ++f) {
          prof.rows[r].cells[f * cfg.kinds.size() + k] = part.rows[r].cells[f];
        }
      }
    }
    const std::string stem = file_stem(spec_text);
    {
      std::ofstream csv(out_dir / (stem + ".csv"), std::ios::binary);
      csv << prof.to_csv();
    }
    nlohmann::ordered_json fj;
    fj["family"] = spec_text;
    fj["csv"] = stem + ".csv";
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < cfg.formulas.size(); ++f) {
      for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
        nlohmann::ordered_json col;
        col["formula"] = cfg.formulas[f].name;
        col["kind"] = to_string(cfg.kinds[k]);
        nlohmann::ordered_json values = nlohmann::ordered_json::array();
        nlohmann::ordered_json certs = nlohmann::ordered_json::array();
        bool applicable = true;
        bool verified = true;
        for (std::size_t r = 0; r < prof.rows.size(); ++r) {
          const ProfileCell& cell = prof.cell(r, f, k);
          applicable = applicable && cell.applicable;
          nlohmann::ordered_json v;
          v["structure"] = prof.rows[r].structure;
          v["max_n"] = cell.applicable ? nlohmann::ordered_json(cell.max_n) : nlohmann::ordered_json(nullptr);
          if (cell.budget_exhausted) v["budget_exhausted"] = true;
          if (cell.capped) v["capped"] = true;
          values.push_back(v);
          if (cell.certificate) {
            const bool ok = verify_witness(*cell.certificate, cfg.formulas[f].phi, family[r]);
            verified = verified && ok;
            certs.push_back(nlohmann::ordered_json::parse(certificate_to_json(*cell.certificate)));
          }
        }
        col["applicable"] = applicable;
        col["values"] = values;
        col["verdict"] = applicable ? to_string(growth_verdict(prof.column(f, k))) : "n/a";
        col["certificates_verified"] = verified;
        col["certificates"] = certs;
        cols.push_back(col);
      }
    }
    fj["columns"] = cols;
    nlohmann::ordered_json closures = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < cfg.closures.size(); ++c) {
      nlohmann::ordered_json cj;
      cj["name"] = cfg.closures[c].name;
      nlohmann::ordered_json values = nlohmann::ordered_json::array();
      bool applicable = true;
      for (const auto& row : prof.rows) {
        values.push_back(row.closures[c] ? nlohmann::ordered_json(*row.closures[c]) : nlohmann::ordered_json(nullptr));
        applicable = applicable && row.closures[c].has_value();
      }
      cj["values"] = values;
      cj["verdict"] = applicable ? to_string(growth_verdict(prof.closure_column(c))) : "n/a";
      closures.push_back(cj);
    }
    fj["closures"] = closures;
    fams.push_back(fj);
    std::cerr << "profiled " << spec_text << "\n";
  }
  report["families"] = fams;
  std::ofstream rep(out_dir / "report.json", std::ios::binary);
  rep << report.dump(2) << "\n";
  std::cout << (out_dir / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lfpw: least fixed-point logic workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  Globals g;
  long long budget_ms = 0;
  std::uint64_t budget_nodes = 0;
  std::uint64_t seed = 0;
  auto* ms_opt = app.add_option("--budget-ms", budget_ms, "wall-clock budget per search (ms)")->check(CLI::PositiveNumber);
  auto* nodes_opt = app.add_option("--budget-nodes", budget_nodes, "node budget per search")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for rg families without an explicit seed");
  app.add_option("--out", g.out, "output file (directory for profile and generate)");

  std::string structure;
  std::string formula;
  std::vector<std::string> binds;
  std::vector<std::string> xs;
  std::vector<std::string> ys;
  std::string kind;
  std::size_t n = 1;
  std::string family;
  std::string cert_path;
  std::size_t k = 0;
  std::size_t max_k = 0;
  std::string config;

  auto* eval = app.add_subcommand("eval", "evaluate a formula (lists satisfying tuples if variables are left free)");
  eval->add_option("--structure,-s", structure, "structure file, JSON text or one-member family spec")->required();
  eval->add_option("--formula,-f", formula, "formula text or .lfp file")->required();
  eval->add_option("--bind,-b", binds, "variable binding var=element");

  auto* stages = app.add_subcommand("stages", "list the stages of an lfp formula");
  stages->add_option("--structure,-s", structure)->required();
  stages->add_option("--formula,-f", formula)->required();
  stages->add_option("--bind,-b", binds);

  auto* closure = app.add_subcommand("closure", "closure ordinal of an lfp formula");
  auto* closure_s = closure->add_option("--structure,-s", structure);
  auto* closure_fam = closure->add_option("--family", family, "family spec, one line per member");
  closure_s->excludes(closure_fam);
  closure->add_option("--formula,-f", formula)->required();

  auto* det = app.add_subcommand("detect", "search for an OP/sOP/IP/TP2 witness");
  det->add_option("--kind,-k", kind, "OP, sOP, IP or TP2")->required();
  det->add_option("--n,-n", n, "parameter n")->required()->check(CLI::PositiveNumber);
  det->add_option("--structure,-s", structure)->required();
  det->add_option("--formula,-f", formula)->required();
  det->add_option("--x", xs, "object variables (default: first free variable)")->delimiter(',');
  det->add_option("--y", ys, "parameter variables")->delimiter(',');

  auto* ver = app.add_subcommand("verify", "re-check a certificate");
  ver->add_option("--certificate,-c", cert_path, "certificate JSON file")->required();
  ver->add_option("--structure,-s", structure)->required();
  ver->add_option("--formula,-f", formula, "defaults to the formula stored in the certificate");
  ver->add_option("--x", xs)->delimiter(',');
  ver->add_option("--y", ys)->delimiter(',');

  auto* unf = app.add_subcommand("unfold", "unfold an lfp formula into first-order stages");
  unf->add_option("--formula,-f", formula)->required();
  auto* unf_k = unf->add_option("--k", k, "print theta_k");
  auto* unf_fam = unf->add_option("--family", family, "find the least k stable over a family");
  unf->add_option("--max-k", max_k, "search bound with --family")->default_val(64);
  unf_k->excludes(unf_fam);

  auto* prof = app.add_subcommand("profile", "run a family profile from a JSON config");
  prof->add_option("--config,-c", config)->required();

  auto* gen = app.add_subcommand("generate", "write the members of a family as JSON");
  gen->add_option("--family", family)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*ms_opt) g.budget_ms = budget_ms;
  if (*nodes_opt) g.budget_nodes = budget_nodes;
  if (*seed_opt) g.seed = seed;

  try {
    if (*eval) {
      const FiniteStructure m = resolve_structure(with_seed(structure, g));
      const Signature sig = m.signature();
      const FormulaPtr f = load_formula(formula, &sig);
      const Valuation v = bindings(binds, m.size());
      std::vector<std::string> open;
      for (const auto& var : free_variables(f)) {
        if (v.elements.count(var) == 0) open.push_back(var);
      }
      if (open.empty()) {
        emit(g, lfpw::eval(f, m, v) ? "true" : "false");
        return 0;
      }
      Evaluator e(m);
      std::string text = "# (";
      for (std::size_t i = 0; i < open.size(); ++i) text += (i ? "," : "") + open[i];
      text += ")\n";
      for (const auto& t : e.satisfying(f, open, v).tuples()) text += tuple_text(t) + "\n";
      emit(g, text);
      return 0;
    }
    if (*stages) {
      const FiniteStructure m = resolve_structure(with_seed(structure, g));
      const Signature sig = m.signature();
      const LfpBody body = top_lfp(load_formula(formula, &sig));
      const StageTable t = lfp_stages(body, m, bindings(binds, m.size()));
      std::string text;
      for (std::size_t s = 1; s <= t.closure; ++s) {
        text += "stage " + std::to_string(s) + ":";
        for (const auto& tup : t.level(s)) text += " " + tuple_text(tup);
        text += "\n";
      }
      text += "closure " + std::to_string(t.closure) + "\n";
      emit(g, text);
      return 0;
    }
    if (*closure) {
      std::vector<FiniteStructure> members;
      if (!family.empty()) {
        members = generate_family(FamilySpec::parse(with_seed(family, g)));
      } else if (!structure.empty()) {
        members.push_back(resolve_structure(with_seed(structure, g)));
      } else {
        throw FormatError("closure needs --structure or --family");
      }
      const Signature sig = members.front().signature();
      const LfpBody body = top_lfp(load_formula(formula, &sig));
      std::string text;
      for (const auto& m : members) {
        text += (members.size() > 1 ? m.name() + " " : "") + std::to_string(closure_ordinal(body, m)) + "\n";
      }
      emit(g, text);
      return 0;
    }
    if (*det) {
      const FiniteStructure m = resolve_structure(with_seed(structure, g));
      const Signature sig = m.signature();
      const PartitionedFormula phi = partition(load_formula(formula, &sig), xs, ys);
      const auto c = detect(parse_kind(kind), phi, m, n, budget_of(g));
      if (!c) {
        std::cerr << "no " << kind << "(" << n << ") witness in " << m.name() << "\n";
        return 1;
      }
      emit(g, certificate_to_json(*c, &phi, 2));
      return 0;
    }
    if (*ver) {
      const FiniteStructure m = resolve_structure(with_seed(structure, g));
      const Signature sig = m.signature();
      const std::string text = read_file(cert_path);
      const PropertyCertificate c = certificate_from_json(text);
      std::string ftext = formula;
      auto stored = nlohmann::json::parse(text);
      if (ftext.empty()) {
        if (!stored.contains("formula")) throw FormatError("certificate has no formula; pass --formula");
        ftext = stored["formula"].get<std::string>();
      }
      if (xs.empty() && ys.empty() && stored.contains("x") && stored.contains("y")) {
        xs = stored["x"].get<std::vector<std::string>>();
        ys = stored["y"].get<std::vector<std::string>>();
      }
      const PartitionedFormula phi = partition(load_formula(ftext, &sig), xs, ys);
      const bool ok = verify_witness(c, phi, m);
      emit(g, ok ? "valid" : "invalid");
      return ok ? 0 : 1;
    }
    if (*unf) {
      if (!family.empty()) {
        const auto members = generate_family(FamilySpec::parse(with_seed(family, g)));
        const Signature sig = members.front().signature();
        const LfpBody body = top_lfp(load_formula(formula, &sig));
        const auto r = unfold_over_family(body, members, max_k);
        if (!r) {
          emit(g, "none");
          return 1;
        }
        emit(g, std::to_string(*r));
        return 0;
      }
      if (!*unf_k) throw FormatError("unfold needs --k or --family");
      const LfpBody body = top_lfp(load_formula(formula, nullptr));
      emit(g, render(unfold_lfp(body, k)));
      return 0;
    }
    if (*prof) return run_profile(config, g);
    if (*gen) {
      const auto members = generate_family(FamilySpec::parse(with_seed(family, g)));
      if (g.out.empty()) {
        for (const auto& m : members) std::cout << structure_to_json(m) << "\n";
        return 0;
      }
      fs::create_directories(g.out);
      for (const auto& m : members) save_structure(m, (fs::path(g.out) / (file_stem(m.name()) + ".json")).string());
      return 0;
    }
  } catch (const BudgetExhausted& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
