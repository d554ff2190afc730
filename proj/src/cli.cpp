#include "curvedbody/cli.hpp"

#include "curvedbody/poisson.hpp"
#include "curvedbody/su2.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <climits>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace cb::cli {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Expression evaluation

class ExpressionParser {
 public:
  explicit ExpressionParser(const std::string& text) : s_(text) {}

  double parse() {
    const double v = expression();
    skip_space();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    if (!std::isfinite(v)) fail("expression is not finite");
    return v;
  }

  size_t position() const { return pos_; }

 private:
  [[noreturn]] void fail(const std::string& why) { throw Error(ErrorKind::ParseError, why); }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_word(std::string_view w) {
    skip_space();
    if (s_.compare(pos_, w.size(), w) == 0) {
      pos_ += w.size();
      return true;
    }
    return false;
  }

  double expression() {
    double v = term();
    for (;;) {
      if (accept('+'))
        v += term();
      else if (accept('-'))
        v -= term();
      else
        return v;
    }
  }

  double term() {
    double v = factor();
    for (;;) {
      if (accept('*'))
        v *= factor();
      else if (accept('/'))
        v /= factor();
      else
        return v;
    }
  }

  double factor() {
    if (accept('-')) return -factor();
    if (accept('+')) return factor();
    const double base = primary();
    if (accept('^')) return std::pow(base, factor());
    return base;
  }

  double primary() {
    skip_space();
    if (pos_ >= s_.size()) fail("expression ends early");
    if (accept('(')) {
      const double v = expression();
      if (!accept(')')) fail("missing ')'");
      return v;
    }
    if (accept_word("pi") || accept_word("\xCF\x80")) return kPi;
    static const std::pair<std::string_view, double (*)(double)> functions[] = {
        {"sqrt", [](double x) { return std::sqrt(x); }},
        {"sin", [](double x) { return std::sin(x); }},
        {"cos", [](double x) { return std::cos(x); }},
        {"tan", [](double x) { return std::tan(x); }},
    };
    for (const auto& [name, fn] : functions) {
      const size_t save = pos_;
      if (accept_word(name)) {
        if (accept('(')) {
          const double v = expression();
          if (!accept(')')) fail("missing ')'");
          return fn(v);
        }
        pos_ = save;
      }
    }
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    double v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) fail("expected a number");
    pos_ += static_cast<size_t>(ptr - first);
    return v;
  }

  const std::string& s_;
  size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

// ---------------------------------------------------------------------------
// Config reading

const std::vector<std::string> kSectionOrder = {"manifold", "body",       "potential", "initial",
                                                "integrator", "tolerances", "actions",   "outputs"};

const std::map<std::string, std::vector<std::string>> kSectionKeys = {
    {"manifold", {"name", "R", "L"}},
    {"body", {"mode", "coordinates", "signature", "m", "I", "J"}},
    {"potential",
     {"kind", "kappa", "alpha", "alpha_hat", "beta_hat", "radial", "kx", "ky", "krho", "keps", "table_u", "table_v"}},
    {"initial", {"q", "p", "qdot"}},
    {"integrator", {"method", "dt", "steps", "output_every", "composition", "newton_tol", "max_iterations", "projection"}},
    {"tolerances", {"energy", "cyclic", "constraint", "closed_form"}},
    {"actions", {"n_max", "tolerance", "branch"}},
    {"outputs", {"directory", "formats"}},
};

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) { spec_.source = std::move(source); lex(text); }

  ScenarioSpec finish() {
    for (const auto& e : spec_.entries)
      if (e.section != "initial") apply(e);
    resolve();
    std::stable_sort(diags_.begin(), diags_.end(), [](const Diagnostic& a, const Diagnostic& b) {
      const int la = a.line > 0 ? a.line : INT_MAX, lb = b.line > 0 ? b.line : INT_MAX;
      return la != lb ? la < lb : a.column < b.column;
    });
    if (!diags_.empty()) throw ConfigError(diags_);
    return std::move(spec_);
  }

 private:
  void parse_error(int line, int col, const std::string& msg) {
    diags_.push_back({ErrorKind::ParseError, line, col, "", msg});
  }
  void invalid(const ConfigEntry& e, const std::string& msg) {
    diags_.push_back({ErrorKind::ValidationError, e.line, value_column(e), e.section + "." + e.key, msg});
  }
  void invalid(const std::string& field, const std::string& msg) {
    diags_.push_back({ErrorKind::ValidationError, 0, 0, field, msg});
  }

  int value_column(const ConfigEntry& e) const {
    auto it = columns_.find(&e - spec_.entries.data());
    return it == columns_.end() ? 0 : it->second;
  }

  void lex(const std::string& text) {
    std::string section;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (line == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.erase(0, 3);
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      const auto hash = raw.find('#');
      const std::string body = raw.substr(0, hash);
      const std::string t = trim(body);
      if (t.empty()) continue;
      const int first = static_cast<int>(body.find_first_not_of(" \t")) + 1;
      if (t.front() == '[') {
        if (t.back() != ']') {
          parse_error(line, first + static_cast<int>(t.size()), "section header must end with ']'");
          continue;
        }
        section = trim(std::string_view(t).substr(1, t.size() - 2));
        if (!kSectionKeys.count(section)) {
          diags_.push_back({ErrorKind::ValidationError, line, first + 1, section,
                            "unknown section; allowed: " + join(kSectionOrder)});
          section = "?";
        }
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        parse_error(line, first, "expected 'key = value'");
        continue;
      }
      if (section.empty()) {
        parse_error(line, first, "key outside of any section");
        continue;
      }
      const std::string key = trim(std::string_view(body).substr(0, eq));
      const std::string value = trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) {
        parse_error(line, first, "missing key before '='");
        continue;
      }
      if (value.empty()) {
        parse_error(line, static_cast<int>(eq) + 2, "missing value after '='");
        continue;
      }
      if (section == "?") continue;
      const int vcol = static_cast<int>(body.find_first_not_of(" \t", eq + 1)) + 1;
      if (!seen.insert(section + "." + key).second) {
        diags_.push_back({ErrorKind::ValidationError, line, first, section + "." + key, "key set twice"});
        continue;
      }
      columns_[static_cast<long>(spec_.entries.size())] = vcol;
      key_columns_[static_cast<long>(spec_.entries.size())] = first;
      spec_.entries.push_back({section, key, value, line});
    }
  }

  std::optional<double> number(const ConfigEntry& e, const std::string& text, int offset = 0) {
    ExpressionParser p(text);
    try {
      return p.parse();
    } catch (const Error& err) {
      std::string why = err.what();
      why = why.substr(why.find(": ") + 2);
      parse_error(e.line, value_column(e) + offset + static_cast<int>(p.position()),
                  e.section + "." + e.key + ": " + why);
      return std::nullopt;
    }
  }

  std::optional<std::vector<double>> numbers(const ConfigEntry& e) {
    std::vector<double> out;
    bool ok = true;
    size_t start = 0;
    int depth = 0;
    for (size_t i = 0; i <= e.value.size(); ++i) {
      if (i < e.value.size()) {
        const char c = e.value[i];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c != ',' || depth > 0) continue;
      }
      const std::string item = e.value.substr(start, i - start);
      const auto lead = item.find_first_not_of(" \t");
      if (lead == std::string::npos) {
        parse_error(e.line, value_column(e) + static_cast<int>(start), e.section + "." + e.key + ": empty list item");
        ok = false;
      } else if (auto v = number(e, item.substr(lead), static_cast<int>(start + lead))) {
        out.push_back(*v);
      } else {
        ok = false;
      }
      start = i + 1;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<long> integer(const ConfigEntry& e) {
    auto v = number(e, e.value);
    if (!v) return std::nullopt;
    if (std::floor(*v) != *v || std::abs(*v) > 9e15) {
      invalid(e, "must be an integer");
      return std::nullopt;
    }
    return static_cast<long>(*v);
  }

  std::optional<bool> boolean(const ConfigEntry& e) {
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    invalid(e, "expected on/off");
    return std::nullopt;
  }

  bool choice(const ConfigEntry& e, std::initializer_list<const char*> allowed) {
    std::vector<std::string> names;
    for (const char* a : allowed) {
      if (e.value == a) return true;
      names.emplace_back(a);
    }
    invalid(e, "unknown value '" + e.value + "'; allowed: " + join(names));
    return false;
  }

  void positive(const ConfigEntry& e, double& target) {
    if (auto v = number(e, e.value)) {
      if (!(*v > 0))
        invalid(e, e.key + " must be positive");
      else
        target = *v;
    }
  }

  void real(const ConfigEntry& e, double& target) {
    if (auto v = number(e, e.value)) target = *v;
  }

  void apply(const ConfigEntry& e) {
    const auto& keys = kSectionKeys.at(e.section);
    if (std::find(keys.begin(), keys.end(), e.key) == keys.end()) {
      diags_.push_back({ErrorKind::ValidationError, e.line, key_columns_.at(&e - spec_.entries.data()),
                        e.section + "." + e.key, "unknown key; allowed: " + join(keys)});
      return;
    }
    auto& s = spec_;
    if (e.section == "manifold") {
      if (e.key == "name") {
        if (choice(e, {"sphere2", "pseudosphere2", "torus2", "sphere3"})) s.manifold.name = e.value;
      } else if (e.key == "R") {
        positive(e, s.manifold.R);
      } else {
        positive(e, s.manifold.L);
      }
    } else if (e.section == "body") {
      if (e.key == "mode") {
        if (choice(e, {"gyroscopic", "affine"})) s.body.mode = e.value;
      } else if (e.key == "coordinates") {
        if (choice(e, {"xy", "polar"})) s.body.coordinates = e.value;
      } else if (e.key == "signature") {
        if (choice(e, {"riemannian", "lorentz"})) s.body.signature = e.value;
      } else if (e.key == "m") {
        positive(e, s.body.m);
      } else if (e.key == "I") {
        positive(e, s.body.I);
      } else if (auto v = numbers(e)) {
        for (double x : *v)
          if (!(x > 0)) invalid(e, "J entries must be positive");
        s.body.J = *v;
      }
    } else if (e.section == "potential") {
      auto& v = s.potential;
      if (e.key == "kind" || e.key == "radial") {
        try {
          (e.key == "kind" ? v.kind : v.radial) = potential_from_name(e.value);
        } catch (const Error& err) {
          std::string why = err.what();
          invalid(e, why.substr(why.find(": ") + 2));
        }
      } else if (e.key == "table_u" || e.key == "table_v") {
        if (auto xs = numbers(e)) (e.key == "table_u" ? v.table_u : v.table_v) = *xs;
      } else {
        double* target = e.key == "kappa"       ? &v.kappa
                         : e.key == "alpha"     ? &v.alpha
                         : e.key == "alpha_hat" ? &v.alpha_hat
                         : e.key == "beta_hat"  ? &v.beta_hat
                         : e.key == "kx"        ? &v.kx
                         : e.key == "ky"        ? &v.ky
                         : e.key == "krho"      ? &v.krho
                                                : &v.keps;
        real(e, *target);
      }
    } else if (e.section == "integrator") {
      auto& o = s.integrator.options;
      if (e.key == "method") {
        if (choice(e, {"implicit_midpoint", "rk4"})) o.method = method_from_name(e.value);
      } else if (e.key == "dt") {
        positive(e, o.dt);
        s.integrator.dt_from_default = false;
      } else if (e.key == "newton_tol") {
        positive(e, o.newton_tol);
      } else if (e.key == "projection") {
        if (auto b = boolean(e)) s.integrator.projection = *b;
      } else if (auto n = integer(e)) {
        if (e.key == "composition") {
          if (*n != 1 && *n != 3)
            invalid(e, "composition must be 1 or 3");
          else
            o.composition = static_cast<int>(*n);
        } else if (*n <= 0) {
          invalid(e, e.key + " must be positive");
        } else if (e.key == "steps") {
          o.steps = *n;
        } else if (e.key == "output_every") {
          o.output_every = *n;
        } else {
          o.max_iterations = static_cast<int>(*n);
        }
      }
    } else if (e.section == "tolerances") {
      double t = 0;
      positive(e, t);
      if (t > 0) {
        auto& tol = s.tolerances;
        (e.key == "energy" ? tol.energy : e.key == "cyclic" ? tol.cyclic : e.key == "constraint" ? tol.constraint
                                                                                                 : tol.closed_form) = t;
      }
    } else if (e.section == "actions") {
      if (e.key == "n_max") {
        if (auto n = integer(e)) {
          if (*n < 1 || *n > 20)
            invalid(e, "n_max must lie in 1..20");
          else
            s.actions.n_max = static_cast<int>(*n);
        }
      } else if (e.key == "tolerance") {
        positive(e, s.actions.tolerance);
      } else if (choice(e, {"auto", "libration", "rotation"})) {
        s.actions.branch = e.value == "auto"        ? action_angle::Branch::Auto
                           : e.value == "libration" ? action_angle::Branch::Libration
                                                    : action_angle::Branch::Rotation;
      }
    } else if (e.section == "outputs") {
      if (e.key == "directory") {
        s.outputs.directory = e.value;
      } else {
        std::vector<std::string> formats;
        std::stringstream ss(e.value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          item = trim(item);
          if (item != "csv" && item != "json" && item != "text")
            invalid(e, "unknown format '" + item + "'; allowed: csv, json, text");
          else
            formats.push_back(item);
        }
        s.outputs.formats = formats;
      }
    }
  }

  std::optional<ScenarioKind> resolve_kind() {
    const auto& m = spec_.manifold;
    const auto& b = spec_.body;
    const bool affine = b.mode == "affine";
    if (b.signature == "lorentz" && (m.name != "pseudosphere2" || affine))
      invalid("body.signature", "the Lorentz-type model exists only for pseudosphere gyroscopes");
    if (b.coordinates == "polar" && (m.name != "sphere2" || !affine))
      invalid("body.coordinates", "polar internal coordinates exist only for affine bodies on sphere2");
    if (m.name == "sphere2")
      return !affine ? ScenarioKind::SphereGyro
                     : (b.coordinates == "polar" ? ScenarioKind::SphereAffinePolar : ScenarioKind::SphereAffineXY);
    if (m.name == "pseudosphere2")
      return affine ? ScenarioKind::PseudosphereAffine
                    : (b.signature == "lorentz" ? ScenarioKind::PseudosphereGyroLorentz : ScenarioKind::PseudosphereGyro);
    if (m.name == "torus2") return affine ? ScenarioKind::TorusAffine : ScenarioKind::TorusGyro;
    if (affine) {
      invalid("body.mode", "affine bodies are not available on sphere3");
      return std::nullopt;
    }
    return ScenarioKind::S3Gyro;
  }

  static std::string strip_kind(const Error& err) {
    std::string why = err.what();
    const auto colon = why.find(": ");
    return colon == std::string::npos ? why : why.substr(colon + 2);
  }

  void resolve() {
    auto& s = spec_;
    const size_t before = diags_.size();
    if (s.manifold.name == "torus2" && !(s.manifold.L > s.manifold.R)) invalid("manifold.L", "L must exceed R");

    const bool has_I = std::any_of(s.entries.begin(), s.entries.end(),
                                   [](const ConfigEntry& e) { return e.section == "body" && e.key == "I"; });
    if (!s.body.J.empty()) {
      const size_t want = s.manifold.name == "sphere3" ? 3 : 2;
      if (has_I) {
        invalid("body.J", "set either I or J, not both");
      } else if (s.body.J.size() != want) {
        invalid("body.J", fmt::format("J needs {} diagonal entries on {}", want, s.manifold.name));
      } else if (s.body.mode == "affine") {
        const auto [lo, hi] = std::minmax_element(s.body.J.begin(), s.body.J.end());
        if (*hi - *lo > 1e-12 * *hi)
          invalid("body.J", "affine scenarios need an isotropic J");
        else
          s.body.I = s.body.J.front();
      } else {
        s.body.I = 0;
        for (double x : s.body.J) s.body.I += x;
      }
    }

    const auto kind = resolve_kind();
    if (!kind) {
      apply_initial_errors_only();
      return;
    }
    if (diags_.size() != before) {
      // Key names and syntax of [initial] can still be checked on a scenario of the same kind.
      resolve_initial(Scenario(*kind, 1.0, 2.0, InertiaSpec{}), false);
      return;
    }

    std::optional<Scenario> sc;
    try {
      sc.emplace(s.scenario());
    } catch (const Error& err) {
      invalid("manifold", strip_kind(err));
      return;
    }
    try {
      check_potential_compatible(s.potential, *sc);
      prepare_potential(s.potential);
    } catch (const Error& err) {
      invalid("potential.kind", strip_kind(err));
    }
    resolve_initial(*sc);
  }

  void apply_initial_errors_only() {
    for (const auto& e : spec_.entries)
      if (e.section == "initial" && (e.key == "q" || e.key == "p" || e.key == "qdot")) numbers(e);
  }

  void resolve_initial(const Scenario& sc, bool admissibility = true) {
    auto& s = spec_;
    const int n = sc.dim();
    const auto& names = sc.coordinate_names();
    VecX q = VecX::Zero(n), p = VecX::Zero(n), qdot = VecX::Zero(n);
    bool has_p = false, has_qdot = false;
    std::vector<std::string> allowed = {"q", "p", "qdot"};
    for (const auto& nm : names) {
      allowed.push_back(nm);
      allowed.push_back("p_" + nm);
      allowed.push_back(nm + "_dot");
    }
    const size_t before = diags_.size();
    for (const auto& e : s.entries) {
      if (e.section != "initial") continue;
      auto vec_key = [&](VecX& target) {
        if (auto v = numbers(e)) {
          if (static_cast<int>(v->size()) != n)
            invalid(e, fmt::format("expected {} values ({})", n, join(names)));
          else
            target = Eigen::Map<const VecX>(v->data(), n);
        }
      };
      if (e.key == "q") {
        vec_key(q);
        continue;
      }
      if (e.key == "p") {
        vec_key(p);
        has_p = true;
        continue;
      }
      if (e.key == "qdot") {
        vec_key(qdot);
        has_qdot = true;
        continue;
      }
      bool matched = false;
      for (int i = 0; i < n && !matched; ++i) {
        VecX* target = nullptr;
        if (e.key == names[i]) target = &q;
        if (e.key == "p_" + names[i]) {
          target = &p;
          has_p = true;
        }
        if (e.key == names[i] + "_dot") {
          target = &qdot;
          has_qdot = true;
        }
        if (target) {
          matched = true;
          if (auto v = number(e, e.value)) (*target)(i) = *v;
        }
      }
      if (!matched) invalid(e, "unknown key for " + std::string(to_string(sc.kind())) + "; allowed: " + join(allowed));
    }
    if (has_p && has_qdot) invalid("initial", "give either momenta or velocities, not both");
    if (diags_.size() != before || !admissibility) return;
    try {
      sc.check(q);
    } catch (const Error& err) {
      invalid("initial.q", "initial state is not admissible: " + strip_kind(err));
      return;
    }
    s.initial.q = q;
    s.initial.from_velocity = has_qdot;
    s.initial.p = has_qdot ? legendre(sc, q, qdot) : p;
  }

  ScenarioSpec spec_;
  std::vector<Diagnostic> diags_;
  std::map<long, int> columns_;
  std::map<long, int> key_columns_;
};

// ---------------------------------------------------------------------------
// Output helpers

std::string number_text(double v) {
  if (!std::isfinite(v)) return "null";
  return fmt::format("{:.17g}", v);
}

void dump_into(const Json& j, int indent, int level, std::string& out) {
  indent = std::max(indent, 0);
  const std::string pad(static_cast<size_t>(indent * (level + 1)), ' ');
  const std::string close(static_cast<size_t>(indent * level), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += std::string(",") + nl;
        first = false;
        out += pad + Json(it.key()).dump() + (indent > 0 ? ": " : ":");
        dump_into(it.value(), indent, level + 1, out);
      }
      out += nl + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& x) { return x.is_primitive(); });
      if (flat) {
        out += "[";
        for (size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_into(j[i], indent, level + 1, out);
        }
        out += "]";
        return;
      }
      out += "[";
      out += nl;
      for (size_t i = 0; i < j.size(); ++i) {
        if (i) out += std::string(",") + nl;
        out += pad;
        dump_into(j[i], indent, level + 1, out);
      }
      out += nl + close + "]";
      return;
    }
    case Json::value_t::number_float:
      out += number_text(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

Json vec_json(const VecX& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::filesystem::path output_dir(const std::optional<ScenarioSpec>& spec, const RunOptions& o) {
  if (o.out_dir) return *o.out_dir;
  if (spec) return spec->outputs.directory;
  return "runs";
}

void emit(RunResult& r, const std::filesystem::path& dir, const std::string& stem, bool json, bool text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
  if (json) {
    write_file(dir / (stem + ".json"), dump_json(r.report) + "\n");
    r.files.push_back(dir / (stem + ".json"));
  }
  if (text) {
    write_file(dir / (stem + ".txt"), r.text);
    r.files.push_back(dir / (stem + ".txt"));
  }
}

struct Check {
  std::string name;
  double value = 0;
  double limit = 0;
  bool pass() const { return std::isfinite(value) && value < limit; }
};

Json checks_json(const std::vector<Check>& checks) {
  Json a = Json::array();
  for (const auto& c : checks)
    a.push_back(Json{{"quantity", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass()}});
  return a;
}

std::string checks_text(const std::vector<Check>& checks) {
  std::string out = fmt::format("{:<34} {:>24} {:>12} {}\n", "check", "value", "limit", "result");
  for (const auto& c : checks)
    out += fmt::format("{:<34} {:>24.17g} {:>12.3g} {}\n", c.name, c.value, c.limit, c.pass() ? "pass" : "FAIL");
  return out;
}

const char* branch_name(action_angle::Branch b) {
  switch (b) {
    case action_angle::Branch::Libration:
      return "libration";
    case action_angle::Branch::Rotation:
      return "rotation";
    default:
      return "auto";
  }
}

std::string header(const char* command, const std::string& source, unsigned seed) {
  return fmt::format("curvedbody {}\nconfig: {}\nseed: {}\n\n", command, source, seed);
}

// ---------------------------------------------------------------------------
// verify suites

struct SuiteRow {
  std::string name;
  double max_error = 0;
  double tolerance = 0;
  bool pass() const { return std::isfinite(max_error) && max_error <= tolerance; }
};

struct SuiteResult {
  std::string suite, chart;
  int samples = 0;
  std::vector<SuiteRow> rows;
  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const SuiteRow& r) { return r.pass(); });
  }
};

Geometry verify_geometry(const std::string& chart, double R, double L) {
  if (chart == "torsion") return poisson::torsion_test_geometry();
  return Geometry(chart_from_name(chart, R, L));
}

std::optional<double> expected_scalar_curvature(const Chart& c, const VecX& x) {
  switch (c.kind) {
    case ChartKind::Sphere2:
      return 2 / (c.R * c.R);
    case ChartKind::Pseudosphere2:
      return -2 / (c.R * c.R);
    case ChartKind::Sphere3:
      return 6 / (c.R * c.R);
    case ChartKind::Torus2:
      return 2 * std::cos(x(0)) / (c.R * (c.L + c.R * std::cos(x(0))));
    case ChartKind::Flat:
      return 0.0;
    default:
      return std::nullopt;
  }
}

SuiteResult geometry_suite(const std::string& chart, double R, double L, int samples, unsigned seed) {
  const Geometry g = verify_geometry(chart, R, L);
  std::mt19937_64 rng(seed);
  const int n = g.dim();
  SuiteRow curv{"scalar curvature (relative)", 0, 1e-8};
  SuiteRow compat{"metric compatibility |nabla g|", 0, 1e-9};
  SuiteRow recon{"Levi-Civita + contortion = Gamma", 0, 1e-10};
  SuiteRow skew{"contortion skew K_ijk + K_jik", 0, 1e-10};
  for (int s = 0; s < samples; ++s) {
    const VecX x = poisson::sample_state(g, rng).head(n);
    if (g.is_levi_civita()) {
      if (auto want = expected_scalar_curvature(g.chart(), x)) {
        const double scale = std::max(std::abs(*want), 1 / (R * R));
        curv.max_error = std::max(curv.max_error, std::abs(g.scalar_curvature(x) - *want) / scale);
      }
    }
    if (g.is_metric_compatible())
      compat.max_error = std::max(compat.max_error, metric_compatibility_residual(g, x));
    if (!g.is_levi_civita()) {
      const auto tc = torsion_contortion_at(g, x);
      recon.max_error = std::max(recon.max_error, tc.reconstruction_residual);
      skew.max_error = std::max(skew.max_error, tc.contortion_skew_residual);
    }
  }
  SuiteResult r{"geometry", chart, samples, {}};
  if (g.is_levi_civita() && expected_scalar_curvature(g.chart(), VecX::Zero(n))) r.rows.push_back(curv);
  r.rows.push_back(compat);
  if (!g.is_levi_civita()) {
    r.rows.push_back(recon);
    r.rows.push_back(skew);
  }
  if (g.chart().kind == ChartKind::Sphere3) {
    const auto m = su2::s3_metric_check(R, samples, seed);
    r.rows.push_back({"S3 metric: left vs right frames", m.left_vs_right, 1e-10});
    r.rows.push_back({"S3 metric: frames vs closed form", m.left_vs_closed_form, 1e-10});
    r.rows.push_back({"S3 metric: embedding vs closed form", m.embedding_vs_closed_form, 1e-8});
  }
  return r;
}

SuiteResult from_bracket_report(const std::string& suite, const poisson::BracketReport& b) {
  SuiteResult r{suite, b.chart, b.samples, {}};
  for (const auto& row : b.rows) r.rows.push_back({row.name, row.max_error, row.tolerance});
  return r;
}

SuiteResult su2_flow_suite(double R, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  su2::MomentumPair s0;
  s0.S = Vec3(u(rng), u(rng), u(rng));
  s0.Srl = Vec3(u(rng), u(rng), u(rng));
  const su2::BodyParams bp{1.0, 1.0, R};
  const long steps = 10000;
  const auto flow = su2::momentum_flow(s0, bp, 1e-3, steps, steps);
  SuiteResult r{"su2", "sphere3", 1, {}};
  r.rows.push_back({"flow drift |S(R)|", flow.max_rel_drift_S_norm, 1e-8});
  r.rows.push_back({"flow drift |S_rl|", flow.max_rel_drift_Srl_norm, 1e-8});
  r.rows.push_back({"flow drift conserved vector", flow.max_rel_drift_conserved, 1e-8});
  return r;
}

Json suite_json(const SuiteResult& s) {
  Json rows = Json::array();
  for (const auto& row : s.rows)
    rows.push_back(
        Json{{"name", row.name}, {"max_error", row.max_error}, {"tolerance", row.tolerance}, {"pass", row.pass()}});
  return Json{{"suite", s.suite}, {"chart", s.chart}, {"samples", s.samples}, {"pass", s.pass()}, {"rows", rows}};
}

std::string suite_text(const SuiteResult& s) {
  std::string out = fmt::format("[{} / {}] samples={} {}\n", s.suite, s.chart, s.samples, s.pass() ? "pass" : "FAIL");
  for (const auto& row : s.rows)
    out += fmt::format("  {:<48} {:>12.4e} <= {:<8.1e} {}\n", row.name, row.max_error, row.tolerance,
                       row.pass() ? "pass" : "FAIL");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string Diagnostic::format() const {
  std::string where = line > 0 ? fmt::format("{}:{}: ", line, column) : std::string();
  return where + to_string(kind) + (field.empty() ? std::string() : " [" + field + "]") + ": " + message;
}

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : Error(std::any_of(diagnostics.begin(), diagnostics.end(),
                        [](const Diagnostic& d) { return d.kind == ErrorKind::ParseError; })
                ? ErrorKind::ParseError
                : ErrorKind::ValidationError,
            [&] {
              std::string msg = fmt::format("{} problem(s) in configuration", diagnostics.size());
              for (const auto& d : diagnostics) msg += "\n  " + d.format();
              return msg;
            }()),
      diagnostics_(std::move(diagnostics)) {}

bool OutputsSection::wants(const std::string& format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

ScenarioKind ScenarioSpec::kind() const {
  const bool affine = body.mode == "affine";
  if (manifold.name == "sphere2")
    return !affine ? ScenarioKind::SphereGyro
                   : (body.coordinates == "polar" ? ScenarioKind::SphereAffinePolar : ScenarioKind::SphereAffineXY);
  if (manifold.name == "pseudosphere2")
    return affine ? ScenarioKind::PseudosphereAffine
                  : (body.signature == "lorentz" ? ScenarioKind::PseudosphereGyroLorentz : ScenarioKind::PseudosphereGyro);
  if (manifold.name == "torus2") return affine ? ScenarioKind::TorusAffine : ScenarioKind::TorusGyro;
  return ScenarioKind::S3Gyro;
}

Scenario ScenarioSpec::scenario() const {
  InertiaSpec in;
  in.m = body.m;
  in.I = body.I;
  return Scenario(kind(), manifold.R, manifold.L, in);
}

HamiltonianSystem ScenarioSpec::system() const { return HamiltonianSystem(scenario(), potential); }

double evaluate_expression(const std::string& text, int* column) {
  ExpressionParser p(text);
  try {
    return p.parse();
  } catch (...) {
    if (column) *column = static_cast<int>(p.position());
    throw;
  }
}

ScenarioSpec parse_config_text(const std::string& text, const std::string& source) {
  return ConfigReader(text, source).finish();
}

ScenarioSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({{ErrorKind::ParseError, 0, 0, "", "cannot open configuration file " + path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string write_config(const ScenarioSpec& spec) {
  std::string out;
  for (const auto& section : kSectionOrder) {
    bool opened = false;
    for (const auto& e : spec.entries) {
      if (e.section != section) continue;
      if (!opened) {
        out += (out.empty() ? "" : "\n") + std::string("[") + section + "]\n";
        opened = true;
      }
      out += e.key + " = " + e.value + "\n";
    }
  }
  return out;
}

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump_into(j, indent, 0, out);
  return out;
}

std::string trajectory_csv(const Scenario& scenario, const Trajectory& tr) {
  const auto& names = scenario.coordinate_names();
  std::string out = "t";
  for (const auto& n : names) out += "," + n;
  for (const auto& n : names) out += ",p_" + n;
  out += ",E\n";
  for (size_t k = 0; k < tr.t.size(); ++k) {
    out += number_text(tr.t[k]);
    for (Eigen::Index i = 0; i < tr.q[k].size(); ++i) out += "," + number_text(tr.q[k](i));
    for (Eigen::Index i = 0; i < tr.p[k].size(); ++i) out += "," + number_text(tr.p[k](i));
    out += "," + number_text(tr.E[k]) + "\n";
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, "write to " + path.string() + " failed");
}

void configure_logging() {
  const char* env = std::getenv("CURVEDBODY_LOG");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (env) {
    const std::string v = env;
    if (v == "error")
      level = spdlog::level::err;
    else if (v == "warn")
      level = spdlog::level::warn;
    else if (v == "info")
      level = spdlog::level::info;
    else if (v == "debug")
      level = spdlog::level::debug;
    else
      spdlog::warn("CURVEDBODY_LOG='{}' is not one of error, warn, info, debug", v);
  }
  spdlog::set_level(level);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
      return ExitCode::ParseFailure;
    case ErrorKind::ValidationError:
    case ErrorKind::BadParams:
      return ExitCode::ValidationFailure;
    default:
      return ExitCode::RuntimeFailure;
  }
}

// ---------------------------------------------------------------------------
// Commands

RunResult run_simulate(const ScenarioSpec& spec, const RunOptions& options) {
  const HamiltonianSystem sys = spec.system();
  const Scenario& sc = sys.scenario();
  const VecX& q0 = spec.initial.q;
  const VecX& p0 = spec.initial.p;
  IntegratorOptions opt = spec.integrator.options;
  const double E0 = sys.hamiltonian(q0, p0);
  if (spec.integrator.dt_from_default) opt.dt = sys.characteristic_time(E0) / 1000;
  spdlog::info("simulate {}: dt={} steps={} method={}", to_string(sc.kind()), opt.dt, opt.steps, to_string(opt.method));

  const auto start = std::chrono::steady_clock::now();
  const Trajectory tr = integrate(sys, q0, p0, opt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::vector<Check> checks;
  if (spec.tolerances.energy) checks.push_back({"max relative energy drift", tr.max_rel_energy_drift, *spec.tolerances.energy});
  if (spec.tolerances.cyclic) checks.push_back({"max cyclic momentum drift", tr.max_abs_cyclic_drift, *spec.tolerances.cyclic});
  if (spec.tolerances.constraint)
    checks.push_back({"max constraint residual", tr.max_constraint_residual, *spec.tolerances.constraint});
  const bool tol_ok = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });

  RunResult r;
  r.exit_code = tr.stopped_at_singularity ? ExitCode::RuntimeFailure : tol_ok ? ExitCode::Ok : ExitCode::ToleranceBreach;
  const std::string status = r.exit_code == ExitCode::Ok ? "pass" : tr.stopped_at_singularity ? "stopped" : "fail";

  Json conservation = Json::array();
  for (const auto& c : tr.conservation)
    conservation.push_back(
        Json{{"quantity", c.quantity}, {"initial", c.initial}, {"final", c.final}, {"max_rel_drift", c.max_rel_drift}});
  Json names = Json::array();
  for (const auto& n : sc.coordinate_names()) names.push_back(n);

  r.report = Json{
      {"command", "simulate"},
      {"status", status},
      {"seed", options.seed},
      {"config", spec.source},
      {"scenario", to_string(sc.kind())},
      {"potential", to_string(spec.potential.kind)},
      {"coordinates", names},
      {"integrator",
       Json{{"method", to_string(opt.method)},
            {"dt", opt.dt},
            {"steps", opt.steps},
            {"output_every", opt.output_every},
            {"composition", opt.composition},
            {"projection", spec.integrator.projection}}},
      {"initial", Json{{"q", vec_json(q0)}, {"p", vec_json(p0)}, {"E", E0}}},
      {"conservation", conservation},
      {"max_rel_energy_drift", tr.max_rel_energy_drift},
      {"max_abs_cyclic_drift", tr.max_abs_cyclic_drift},
      {"max_constraint_residual", tr.max_constraint_residual},
      {"stats",
       Json{{"steps_taken", tr.steps_taken},
            {"fixed_point_iterations", tr.fixed_point_iterations},
            {"stopped_at_singularity", tr.stopped_at_singularity},
            {"stop_reason", tr.stop_reason}}},
      {"tolerances", checks_json(checks)},
  };

  std::string text = header("simulate", spec.source, options.seed);
  text += fmt::format("scenario: {}\npotential: {}\nmethod: {} dt={:.6g} steps={} composition={}\n\n",
                      to_string(sc.kind()), to_string(spec.potential.kind), to_string(opt.method), opt.dt, opt.steps,
                      opt.composition);
  text += "conservation\n";
  text += fmt::format("{:<10} {:>24} {:>24} {:>14}\n", "quantity", "initial", "final", "max rel drift");
  for (const auto& c : tr.conservation)
    text += fmt::format("{:<10} {:>24.17g} {:>24.17g} {:>14.4e}\n", c.quantity, c.initial, c.final, c.max_rel_drift);
  text += fmt::format("\nmax constraint residual: {:.4e}\n", tr.max_constraint_residual);
  text += fmt::format("steps taken: {}  fixed-point iterations: {}\n", tr.steps_taken, tr.fixed_point_iterations);
  if (tr.stopped_at_singularity) text += "stopped: " + tr.stop_reason + "\n";
  text += fmt::format("wall time: {:.3f} s\n", wall);
  if (!checks.empty()) text += "\n" + checks_text(checks);
  text += "\nstatus: " + status + "\n";
  r.text = text;

  const auto dir = output_dir(spec, options);
  if (spec.outputs.wants("csv")) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string());
    write_file(dir / "trajectory.csv", trajectory_csv(sc, tr));
    r.files.push_back(dir / "trajectory.csv");
  }
  emit(r, dir, "report", spec.outputs.wants("json"), spec.outputs.wants("text"));
  return r;
}

RunResult run_actions(const ScenarioSpec& spec, const RunOptions& options) {
  namespace aa = action_angle;
  const aa::SeparableSpec sep(spec.scenario(), spec.potential, options.allow_unbounded);
  const aa::ActionSpectrum sp = sep.spectrum(spec.initial.q, spec.initial.p);
  const aa::Branch branch = spec.actions.branch == aa::Branch::Auto ? sp.radial_branch : spec.actions.branch;
  const aa::DegeneracyReport deg =
      aa::frequencies_and_degeneracy(sep, sp.J, spec.actions.n_max, spec.actions.tolerance, branch);

  std::vector<Check> checks;
  Json closed = nullptr;
  const Scenario& sc = sep.scenario();
  const double I = sc.inertia().I, m = sc.inertia().m, R = sc.R();
  const bool residue_class = spec.potential.kind == PotentialKind::Zero ||
                             spec.potential.kind == PotentialKind::CosPolyCentrifugal;
  if (sc.kind() == ScenarioKind::SphereGyro && residue_class && std::abs(I - m * R * R) <= 1e-12 * I) {
    const auto cf = aa::spherical_gyro_closed_form(sp.E, sp.J(1), sp.J(2), I, spec.potential.alpha_hat,
                                                   spec.potential.beta_hat);
    const double rel = std::abs(sp.J(0) - cf.J_theta) / std::max(std::abs(cf.J_theta), 1e-300);
    checks.push_back({"J_theta vs residue closed form", rel, spec.tolerances.closed_form.value_or(1e-6)});
    closed = Json{{"region", cf.region}, {"J_theta", cf.J_theta}, {"J_theta_quadrature", sp.J(0)}, {"rel_diff", rel}};
  }
  const bool ok = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });

  RunResult r;
  r.exit_code = ok ? ExitCode::Ok : ExitCode::ToleranceBreach;
  Json actions = Json::array(), freqs = Json::array(), rels = Json::array();
  for (size_t i = 0; i < sp.names.size(); ++i) {
    actions.push_back(Json{{"name", sp.names[i]}, {"J", sp.J(static_cast<Eigen::Index>(i))}});
    freqs.push_back(Json{{"name", deg.names[i]},
                         {"nu", deg.nu(static_cast<Eigen::Index>(i))},
                         {"omega", deg.omega(static_cast<Eigen::Index>(i))}});
  }
  for (const auto& rel : deg.relations)
    rels.push_back(Json{{"n", rel.n}, {"residual", rel.residual}, {"accidental", rel.accidental}});

  r.report = Json{
      {"command", "actions"},
      {"status", ok ? "pass" : "fail"},
      {"seed", options.seed},
      {"config", spec.source},
      {"scenario", to_string(sc.kind())},
      {"potential", to_string(spec.potential.kind)},
      {"E", sp.E},
      {"radial_branch", branch_name(branch)},
      {"actions", actions},
      {"cyclic", Json{{"ell", sp.cyclic.ell}, {"s", sp.cyclic.s}, {"j", sp.cyclic.j}}},
      {"stage_constants", Json{{"E", sp.stages.E}, {"c1", sp.stages.c1}, {"c2", sp.stages.c2}}},
      {"frequencies", freqs},
      {"relations", rels},
      {"degeneracy", deg.degeneracy},
      {"n_max", spec.actions.n_max},
      {"closed_form", closed},
      {"tolerances", checks_json(checks)},
  };

  std::string text = header("actions", spec.source, options.seed);
  text += fmt::format("scenario: {}\npotential: {}\nE = {:.17g}\nradial branch: {}\n\n", to_string(sc.kind()),
                      to_string(spec.potential.kind), sp.E, branch_name(branch));
  text += fmt::format("{:<8} {:>24} {:>24} {:>24}\n", "action", "J", "nu", "omega");
  for (size_t i = 0; i < sp.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    text += fmt::format("{:<8} {:>24.17g} {:>24.17g} {:>24.17g}\n", sp.names[i], sp.J(k), deg.nu(k), deg.omega(k));
  }
  text += fmt::format("\ndegeneracy table (|n_i| <= {}, tolerance {:.1e})\n", spec.actions.n_max, spec.actions.tolerance);
  text += fmt::format("{:<32} {:>12} {}\n", "n", "residual", "kind");
  for (const auto& rel : deg.relations) {
    std::vector<std::string> parts;
    for (int x : rel.n) parts.push_back(std::to_string(x));
    text += fmt::format("{:<32} {:>12.3e} {}\n", "(" + join(parts) + ")", rel.residual,
                        rel.accidental ? "accidental" : "identical");
  }
  text += fmt::format("degeneracy: {}\n", deg.degeneracy);
  if (!closed.is_null())
    text += fmt::format("\nresidue closed form ({}): J_theta {:.17g}, quadrature {:.17g}\n",
                        closed["region"].get<std::string>(), closed["J_theta"].get<double>(), sp.J(0));
  if (!checks.empty()) text += "\n" + checks_text(checks);
  text += std::string("\nstatus: ") + (ok ? "pass" : "fail") + "\n";
  r.text = text;
  emit(r, output_dir(spec, options), "actions", spec.outputs.wants("json"), spec.outputs.wants("text"));
  return r;
}

RunResult run_verify(const std::optional<ScenarioSpec>& spec, const RunOptions& options) {
  const std::string suite = options.suite.empty() ? "all" : options.suite;
  if (suite != "all" && suite != "geometry" && suite != "poisson" && suite != "su2")
    throw Error(ErrorKind::ValidationError, "unknown suite '" + suite + "'; allowed: geometry, poisson, su2, all");
  const double R = spec ? spec->manifold.R : 1.0;
  const double L = spec && spec->manifold.L > 0 ? spec->manifold.L : 2.5 * R;

  const std::vector<std::string> all_charts = {"sphere2", "pseudosphere2", "torus2", "sphere3", "flat3", "torsion"};
  std::vector<std::string> charts = all_charts;
  if (!options.chart.empty()) {
    if (std::find(all_charts.begin(), all_charts.end(), options.chart) == all_charts.end() &&
        options.chart != "flat2")
      throw Error(ErrorKind::ValidationError,
                  "unknown chart '" + options.chart + "'; allowed: " + join(all_charts) + ", flat2");
    charts = {options.chart};
  }

  std::vector<SuiteResult> results;
  if (suite == "all" || suite == "geometry")
    for (const auto& c : charts) results.push_back(geometry_suite(c, R, L, options.samples > 0 ? options.samples : 100, options.seed));
  if (suite == "all" || suite == "poisson") {
    const int samples = options.samples > 0 ? options.samples : 200;
    for (const auto& c : charts) {
      spdlog::info("poisson tables on {}", c);
      const Geometry g = verify_geometry(c, R, L);
      auto rep = poisson::verify_tables(g, samples, options.seed, 1e-7, 50, 1e-6, options.threads);
      rep.chart = c;
      results.push_back(from_bracket_report("poisson", rep));
    }
  }
  if ((suite == "all" || suite == "su2") &&
      (options.chart.empty() || options.chart == "sphere3")) {
    const int samples = options.samples > 0 ? options.samples : 50;
    auto rep = poisson::verify_su2_tables(R, samples, options.seed);
    rep.chart = "sphere3";
    results.push_back(from_bracket_report("su2", rep));
    results.push_back(su2_flow_suite(R, options.seed));
  }
  if (results.empty())
    throw Error(ErrorKind::ValidationError, "suite '" + suite + "' has nothing to check on chart '" + options.chart + "'");

  const bool ok = std::all_of(results.begin(), results.end(), [](const SuiteResult& s) { return s.pass(); });
  RunResult r;
  r.exit_code = ok ? ExitCode::Ok : ExitCode::ToleranceBreach;
  Json suites = Json::array();
  std::string text = header("verify", spec ? spec->source : "-", options.seed);
  for (const auto& s : results) {
    suites.push_back(suite_json(s));
    text += suite_text(s) + "\n";
  }
  text += std::string("status: ") + (ok ? "pass" : "fail") + "\n";
  r.report = Json{{"command", "verify"},
                  {"status", ok ? "pass" : "fail"},
                  {"seed", options.seed},
                  {"config", spec ? Json(spec->source) : Json(nullptr)},
                  {"suite", suite},
                  {"R", R},
                  {"L", L},
                  {"results", suites}};
  r.text = text;
  const bool json = !spec || spec->outputs.wants("json");
  const bool txt = !spec || spec->outputs.wants("text");
  emit(r, output_dir(spec, options), "verify", json, txt);
  return r;
}

RunResult run_bertrand(const std::optional<ScenarioSpec>& spec, const RunOptions& options) {
  namespace aa = action_angle;
  std::vector<std::string> charts;
  if (!options.chart.empty())
    charts = {options.chart};
  else if (spec)
    charts = {spec->manifold.name};
  else
    charts = {"sphere2", "pseudosphere2"};
  for (const auto& c : charts)
    if (c != "sphere2" && c != "pseudosphere2")
      throw Error(ErrorKind::ValidationError, "bertrand runs on sphere2 or pseudosphere2, not '" + c + "'");

  std::optional<PotentialKind> chosen;
  if (!options.potential.empty())
    chosen = potential_from_name(options.potential);
  else if (spec && spec->potential.kind != PotentialKind::Zero)
    chosen = spec->potential.kind;

  const double R = spec ? spec->manifold.R : 1.0;
  const int samples = options.samples > 0 ? options.samples : 50;
  std::vector<aa::BertrandReport> reports;
  for (const auto& c : charts) {
    const bool sphere = c == "sphere2";
    std::vector<PotentialKind> kinds;
    if (chosen)
      kinds = {*chosen};
    else if (sphere)
      kinds = {PotentialKind::SphereOscillator, PotentialKind::SphereKepler, PotentialKind::ControlTanCubed};
    else
      kinds = {PotentialKind::PseudoOscillator, PotentialKind::PseudoKepler};
    for (auto k : kinds) {
      double strength = 1.0;
      if (spec && spec->potential.kind == k) {
        const bool kepler = k == PotentialKind::SphereKepler || k == PotentialKind::PseudoKepler;
        const double v = kepler ? spec->potential.alpha : spec->potential.kappa;
        if (v > 0) strength = v;
      }
      spdlog::info("bertrand {} {}", c, to_string(k));
      reports.push_back(aa::bertrand_closure(sphere ? ChartKind::Sphere2 : ChartKind::Pseudosphere2, k, samples,
                                             options.seed, R, strength, options.threads));
    }
  }

  const bool ok = std::all_of(reports.begin(), reports.end(), [](const aa::BertrandReport& b) { return b.pass(); });
  RunResult r;
  r.exit_code = ok ? ExitCode::Ok : ExitCode::ToleranceBreach;
  Json runs = Json::array();
  std::string text = header("bertrand", spec ? spec->source : "-", options.seed);
  for (const auto& b : reports) {
    Json table = Json::array();
    text += fmt::format("[{} / {}] {} closed {}/{} {}\n", b.chart, b.potential, b.bertrand ? "bertrand" : "control",
                        b.closed, b.samples.size(), b.pass() ? "pass" : "FAIL");
    text += fmt::format("  {:>14} {:>14} {:>20} {:>7} {:>12} {}\n", "E", "ell", "dphi/2pi", "p/q", "distance", "closed");
    for (const auto& s : b.samples) {
      table.push_back(Json{{"E", s.E},
                           {"ell", s.ell},
                           {"ratio", s.ratio},
                           {"p", s.p},
                           {"q", s.q},
                           {"distance", s.distance},
                           {"closed", s.closed}});
      text += fmt::format("  {:>14.8g} {:>14.8g} {:>20.15f} {:>7} {:>12.3e} {}\n", s.E, s.ell, s.ratio,
                          fmt::format("{}/{}", s.p, s.q), s.distance, s.closed ? "yes" : "no");
    }
    if (!b.threshold_check.empty())
      text += fmt::format("  above threshold: {} ({})\n", b.threshold_check, b.threshold_ok ? "pass" : "FAIL");
    text += "\n";
    runs.push_back(Json{{"chart", b.chart},
                        {"potential", b.potential},
                        {"bertrand", b.bertrand},
                        {"closed", b.closed},
                        {"samples", static_cast<int>(b.samples.size())},
                        {"threshold_check", b.threshold_check},
                        {"threshold_ok", b.threshold_ok},
                        {"pass", b.pass()},
                        {"table", table}});
  }
  text += std::string("status: ") + (ok ? "pass" : "fail") + "\n";
  r.report = Json{{"command", "bertrand"},
                  {"status", ok ? "pass" : "fail"},
                  {"seed", options.seed},
                  {"config", spec ? Json(spec->source) : Json(nullptr)},
                  {"R", R},
                  {"runs", runs}};
  r.text = text;
  const bool json = !spec || spec->outputs.wants("json");
  const bool txt = !spec || spec->outputs.wants("text");
  emit(r, output_dir(spec, options), "bertrand", json, txt);
  return r;
}

}  // namespace cb::cli
