#include "homlab/experiments.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "homlab/statistics.hpp"
#include "homlab/svg_plot.hpp"
#include "homlab/worker_pool.hpp"

#ifndef HOMLAB_VERSION
#define HOMLAB_VERSION "0.0.0"
#endif

namespace homlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::estimate: return "estimate";
    case ExperimentKind::isotropy_corollary: return "isotropy_corollary";
    case ExperimentKind::anisotropic_gap: return "anisotropic_gap";
    case ExperimentKind::subadditivity_audit: return "subadditivity_audit";
    case ExperimentKind::stationarity_audit: return "stationarity_audit";
    case ExperimentKind::triangle_audit: return "triangle_audit";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::estimate, ExperimentKind::isotropy_corollary, ExperimentKind::anisotropic_gap,
                 ExperimentKind::subadditivity_audit, ExperimentKind::stationarity_audit,
                 ExperimentKind::triangle_audit})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class SchemaReader {
 public:
  explicit SchemaReader(const std::string& text) : text_(text) {}

  int line_of(const std::string& key) const {
    const std::string needle = "\"" + key + "\"";
    std::size_t pos = text_.find(needle);
    while (pos != std::string::npos) {
      std::size_t after = pos + needle.size();
      while (after < text_.size() && std::isspace(static_cast<unsigned char>(text_[after]))) ++after;
      if (after < text_.size() && text_[after] == ':') break;
      pos = text_.find(needle, pos + 1);
    }
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const int line = line_of(key);
    throw SchemaError(what, line);
  }

  void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(where, "'" + where + "' must be an object");
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (const char* a : keys) known = known || k == a;
      if (!known) fail(k, "unknown key '" + k + "' in '" + where + "'");
    }
  }

  std::int64_t integer(const json& obj, const std::string& key, std::int64_t def, std::int64_t lo,
                       std::int64_t hi) const {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(key, "'" + key + "' must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi)
      fail(key, "'" + key + "' must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  double number(const json& obj, const std::string& key, double def) const {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(key, "'" + key + "' must be a number");
    return v.get<double>();
  }

  bool boolean(const json& obj, const std::string& key, bool def) const {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(key, "'" + key + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& def) const {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(key, "'" + key + "' must be a string");
    return v.get<std::string>();
  }

  const json& required(const json& obj, const std::string& key, const std::string& where) const {
    if (!obj.contains(key)) fail(where, "missing required key '" + key + "' in '" + where + "'");
    return obj.at(key);
  }

 private:
  const std::string& text_;
};

UnitDirection parse_direction(const SchemaReader& sr, const json& v, int d) {
  if (!v.is_array() || static_cast<int>(v.size()) != d)
    sr.fail("directions", "each direction must be an array of " + std::to_string(d) + " numbers");
  bool integral = true;
  std::vector<double> x;
  for (const json& c : v) {
    if (!c.is_number()) sr.fail("directions", "direction components must be numbers");
    integral = integral && c.is_number_integer();
    x.push_back(c.get<double>());
  }
  try {
    if (integral) {
      std::vector<std::int64_t> k;
      for (const json& c : v) k.push_back(c.get<std::int64_t>());
      return UnitDirection::from_integer(k);
    }
    return UnitDirection::snap(x);
  } catch (const std::exception& e) {
    sr.fail("directions", std::string("invalid direction: ") + e.what());
  }
}

json direction_json(const UnitDirection& nu) {
  json a = json::array();
  for (int i = 0; i < nu.dim(); ++i) a.push_back(nu.integer()[i]);
  return a;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0;
    std::smatch m;
    const std::string what = e.what();
    if (std::regex_search(what, m, std::regex("line ([0-9]+)"))) line = std::stoi(m[1]);
    throw SchemaError(std::string("malformed JSON: ") + what, line);
  }
  const SchemaReader sr(text);
  if (!root.is_object()) throw SchemaError("config must be a JSON object", 1);
  sr.allow_keys(root, "config",
                {"schema", "name", "experiment", "field", "geometry", "labels", "seeds", "bc", "stencil", "solver",
                 "audit", "output"});
  if (!root.contains("schema")) throw SchemaError("missing required key 'schema'", 1);
  if (sr.integer(root, "schema", 0, 0, 1000) != 1) sr.fail("schema", "unsupported schema version (expected 1)");

  ExperimentConfig cfg;
  try {
    cfg.kind = experiment_kind_from_string(sr.string(root, "experiment", ""));
  } catch (const ConfigError& e) {
    if (!root.contains("experiment")) throw SchemaError("missing required key 'experiment'", 1);
    sr.fail("experiment", e.what());
  }
  cfg.name = sr.string(root, "name", to_string(cfg.kind));

  // field
  const json& f = sr.required(root, "field", "config");
  sr.allow_keys(f, "field", {"family", "seed", "params", "labels", "label_table", "c"});
  try {
    cfg.field.family = field_family_from_string(sr.string(f, "family", ""));
  } catch (const ConfigError& e) {
    sr.fail("family", e.what());
  }
  cfg.field.num_labels = static_cast<int>(sr.integer(f, "labels", 2, 2, 16));
  cfg.field.c = sr.number(f, "c", 0.0);
  if (f.contains("params")) {
    const json& p = f.at("params");
    sr.allow_keys(p, "params", {"value", "period", "axis", "v0", "v1", "lo", "hi", "psi_coeff", "base"});
    cfg.field.value = sr.number(p, "value", cfg.field.value);
    cfg.field.period = static_cast<int>(sr.integer(p, "period", cfg.field.period, 1, 1 << 20));
    cfg.field.axis = static_cast<int>(sr.integer(p, "axis", cfg.field.axis, 0, 2));
    cfg.field.v0 = sr.number(p, "v0", cfg.field.v0);
    cfg.field.v1 = sr.number(p, "v1", cfg.field.v1);
    cfg.field.lo = sr.number(p, "lo", cfg.field.lo);
    cfg.field.hi = sr.number(p, "hi", cfg.field.hi);
    cfg.field.psi_coeff = sr.number(p, "psi_coeff", cfg.field.psi_coeff);
    if (p.contains("base")) {
      try {
        cfg.field.base = field_family_from_string(sr.string(p, "base", ""));
      } catch (const ConfigError& e) {
        sr.fail("base", e.what());
      }
    }
  }
  if (f.contains("label_table")) {
    const json& t = f.at("label_table");
    const int K = cfg.field.num_labels;
    if (!t.is_array() || static_cast<int>(t.size()) != K)
      sr.fail("label_table", "label_table must be a " + std::to_string(K) + "x" + std::to_string(K) + " array");
    for (const json& row : t) {
      if (!row.is_array() || static_cast<int>(row.size()) != K)
        sr.fail("label_table", "label_table rows must have " + std::to_string(K) + " entries");
      for (const json& x : row) {
        if (!x.is_number()) sr.fail("label_table", "label_table entries must be numbers");
        cfg.field.label_table.push_back(x.get<double>());
      }
    }
  }
  try {
    (void)make_field(cfg.field, 0);
  } catch (const ConfigError& e) {
    sr.fail("field", std::string("invalid field: ") + e.what());
  }

  // geometry
  const json& g = sr.required(root, "geometry", "config");
  sr.allow_keys(g, "geometry", {"d", "directions", "t", "x0"});
  cfg.d = static_cast<int>(sr.integer(g, "d", 2, 2, 3));
  const json& dirs = sr.required(g, "directions", "geometry");
  if (!dirs.is_array() || dirs.empty()) sr.fail("directions", "'directions' must be a nonempty array");
  for (const json& v : dirs) cfg.directions.push_back(parse_direction(sr, v, cfg.d));
  if (cfg.kind == ExperimentKind::subadditivity_audit)
    for (const UnitDirection& nu : cfg.directions)
      if (!nu.is_rational()) sr.fail("directions", "subadditivity_audit needs rational directions, got " + nu.to_string());
  const json& ts = sr.required(g, "t", "geometry");
  if (!ts.is_array() || ts.empty()) sr.fail("t", "'t' must be a nonempty array of side lengths");
  for (const json& v : ts) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1 || v.get<std::int64_t>() > 4096)
      sr.fail("t", "side lengths must be integers in [1, 4096]");
    cfg.t_schedule.push_back(v.get<int>());
  }
  for (std::size_t i = 1; i < cfg.t_schedule.size(); ++i)
    if (cfg.t_schedule[i] <= cfg.t_schedule[i - 1]) sr.fail("t", "'t' must be strictly increasing");
  const bool estimate_like = cfg.kind == ExperimentKind::estimate ||
                             cfg.kind == ExperimentKind::isotropy_corollary ||
                             cfg.kind == ExperimentKind::anisotropic_gap;
  if (estimate_like && cfg.t_schedule.size() < 3) sr.fail("t", "'t' needs at least three values");
  if (g.contains("x0")) {
    const json& x = g.at("x0");
    if (!x.is_array() || static_cast<int>(x.size()) != cfg.d) sr.fail("x0", "'x0' must have d components");
    Vec v{};
    for (int i = 0; i < cfg.d; ++i) {
      if (!x[i].is_number()) sr.fail("x0", "'x0' components must be numbers");
      v[i] = x[i].get<double>();
    }
    cfg.x0 = v;
  }

  // labels
  const int K = cfg.field.num_labels;
  if (root.contains("labels")) {
    const json& l = root.at("labels");
    if (!l.is_array() || l.empty()) sr.fail("labels", "'labels' must be a nonempty array of [a, b] pairs");
    for (const json& pr : l) {
      if (!pr.is_array() || pr.size() != 2 || !pr[0].is_number_integer() || !pr[1].is_number_integer())
        sr.fail("labels", "label pairs must be [a, b] integer arrays");
      const int a = pr[0].get<int>(), b = pr[1].get<int>();
      if (a == b || a < 0 || b < 0 || a >= K || b >= K)
        sr.fail("labels", "label pairs need two distinct labels below field.labels");
      cfg.label_pairs.emplace_back(a, b);
    }
  } else {
    cfg.label_pairs.emplace_back(0, 1);
  }

  // seeds
  if (root.contains("seeds")) {
    const json& s = root.at("seeds");
    if (s.is_array()) {
      for (const json& v : s) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
          sr.fail("seeds", "seeds must be nonnegative integers");
        cfg.seeds.push_back(v.get<std::uint64_t>());
      }
    } else if (s.is_object()) {
      sr.allow_keys(s, "seeds", {"first", "count"});
      const auto first = sr.integer(s, "first", 1, 0, INT64_MAX);
      const auto count = sr.integer(s, "count", 1, 1, 1 << 20);
      for (std::int64_t i = 0; i < count; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(first + i));
    } else {
      sr.fail("seeds", "'seeds' must be an array or {\"first\", \"count\"}");
    }
    if (cfg.seeds.empty()) sr.fail("seeds", "'seeds' must not be empty");
  } else {
    cfg.seeds.push_back(f.contains("seed") ? static_cast<std::uint64_t>(sr.integer(f, "seed", 1, 0, INT64_MAX)) : 1);
  }

  // boundary conditions
  if (cfg.kind == ExperimentKind::isotropy_corollary || cfg.kind == ExperimentKind::anisotropic_gap) {
    cfg.bcs = {BcMode::full, BcMode::top_bottom};
  }
  if (root.contains("bc")) {
    const json& b = root.at("bc");
    std::vector<std::string> names;
    if (b.is_string()) names.push_back(b.get<std::string>());
    else if (b.is_array())
      for (const json& x : b) {
        if (!x.is_string()) sr.fail("bc", "'bc' entries must be strings");
        names.push_back(x.get<std::string>());
      }
    else sr.fail("bc", "'bc' must be a string or an array of strings");
    std::vector<BcMode> modes;
    for (const std::string& n : names) {
      try {
        modes.push_back(bc_mode_from_string(n));
      } catch (const ConfigError& e) {
        sr.fail("bc", e.what());
      }
    }
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
    if (modes.empty()) sr.fail("bc", "'bc' must not be empty");
    if (!cfg.bcs.empty() && modes.size() != 2)
      sr.fail("bc", "this experiment compares both boundary modes");
    cfg.bcs = modes;
  }
  if (cfg.bcs.empty()) cfg.bcs = {BcMode::full};

  // stencil
  if (root.contains("stencil")) {
    const json& s = root.at("stencil");
    sr.allow_keys(s, "stencil", {"radius", "collar"});
    cfg.stencil_radius = static_cast<int>(sr.integer(s, "radius", 1, 1, 2));
    cfg.collar_width = static_cast<int>(sr.integer(s, "collar", 0, 0, 64));
  }

  // solver
  cfg.solver = K == 2 ? SolverKind::mincut : SolverKind::alpha;
  if (root.contains("solver")) {
    const json& s = root.at("solver");
    sr.allow_keys(s, "solver", {"kind", "max_sweeps", "metric_override"});
    if (s.contains("kind")) {
      try {
        cfg.solver = solver_kind_from_string(sr.string(s, "kind", ""));
      } catch (const ConfigError& e) {
        sr.fail("kind", e.what());
      }
    }
    cfg.max_sweeps = static_cast<int>(sr.integer(s, "max_sweeps", 20, 1, 10000));
    cfg.metric_override = sr.boolean(s, "metric_override", false);
  }
  if (cfg.solver == SolverKind::mincut && K != 2) sr.fail("kind", "the mincut solver needs exactly two labels");

  // audit
  if (root.contains("audit")) {
    const json& a = root.at("audit");
    sr.allow_keys(a, "audit",
                  {"bc_monotone", "expect", "expect_tolerance", "variance_decrease", "shift_tolerance_se",
                   "tolerance", "full_min", "topbottom_max", "boxes", "max_side", "pairs", "max_shift",
                   "families", "rng_seed"});
    AuditSettings& au = cfg.audit;
    au.bc_monotone = sr.boolean(a, "bc_monotone", au.bc_monotone);
    if (a.contains("expect")) au.expect = sr.number(a, "expect", 0.0);
    au.expect_tolerance = sr.number(a, "expect_tolerance", au.expect_tolerance);
    au.variance_decrease = sr.boolean(a, "variance_decrease", au.variance_decrease);
    au.shift_tolerance_se = sr.number(a, "shift_tolerance_se", au.shift_tolerance_se);
    au.tolerance = sr.number(a, "tolerance", au.tolerance);
    au.full_min = sr.number(a, "full_min", au.full_min);
    au.topbottom_max = sr.number(a, "topbottom_max", au.topbottom_max);
    au.boxes = static_cast<int>(sr.integer(a, "boxes", au.boxes, 1, 100000));
    au.max_side = static_cast<int>(sr.integer(a, "max_side", au.max_side, 2, 256));
    au.pairs = static_cast<int>(sr.integer(a, "pairs", au.pairs, 1, 100000));
    au.max_shift = static_cast<int>(sr.integer(a, "max_shift", au.max_shift, 0, 1 << 20));
    au.rng_seed = static_cast<std::uint64_t>(sr.integer(a, "rng_seed", 1, 0, INT64_MAX));
    if (a.contains("families")) {
      const json& fam = a.at("families");
      if (!fam.is_array()) sr.fail("families", "'families' must be an array of family names");
      for (const json& x : fam) {
        if (!x.is_string()) sr.fail("families", "'families' must be an array of family names");
        try {
          (void)field_family_from_string(x.get<std::string>());
        } catch (const ConfigError& e) {
          sr.fail("families", e.what());
        }
        au.families.push_back(x.get<std::string>());
      }
    }
  }
  if (cfg.kind == ExperimentKind::triangle_audit && K < 3) sr.fail("labels", "triangle_audit needs field.labels >= 3");
  cfg.output = sr.string(root, "output", "results/" + cfg.name);

  // Normalized form: every default spelled out.
  json e;
  e["schema"] = 1;
  e["name"] = cfg.name;
  e["experiment"] = to_string(cfg.kind);
  json fe;
  fe["family"] = to_string(cfg.field.family);
  fe["labels"] = cfg.field.num_labels;
  fe["c"] = cfg.field.c;
  fe["params"] = {{"value", cfg.field.value}, {"period", cfg.field.period}, {"axis", cfg.field.axis},
                  {"v0", cfg.field.v0},       {"v1", cfg.field.v1},         {"lo", cfg.field.lo},
                  {"hi", cfg.field.hi},       {"psi_coeff", cfg.field.psi_coeff},
                  {"base", to_string(cfg.field.base)}};
  if (!cfg.field.label_table.empty()) {
    json t = json::array();
    for (int i = 0; i < K; ++i)
      t.push_back(std::vector<double>(cfg.field.label_table.begin() + i * K, cfg.field.label_table.begin() + (i + 1) * K));
    fe["label_table"] = t;
  }
  e["field"] = fe;
  json ge;
  ge["d"] = cfg.d;
  ge["directions"] = json::array();
  for (const UnitDirection& nu : cfg.directions) ge["directions"].push_back(direction_json(nu));
  ge["t"] = cfg.t_schedule;
  if (cfg.x0) ge["x0"] = std::vector<double>(cfg.x0->begin(), cfg.x0->begin() + cfg.d);
  e["geometry"] = ge;
  e["labels"] = json::array();
  for (auto [a, b] : cfg.label_pairs) e["labels"].push_back({a, b});
  e["seeds"] = cfg.seeds;
  e["bc"] = json::array();
  for (BcMode m : cfg.bcs) e["bc"].push_back(to_string(m));
  e["stencil"] = {{"radius", cfg.stencil_radius}, {"collar", cfg.collar_width}};
  e["solver"] = {{"kind", to_string(cfg.solver)}, {"max_sweeps", cfg.max_sweeps},
                 {"metric_override", cfg.metric_override}};
  const AuditSettings& au = cfg.audit;
  json ae = {{"bc_monotone", au.bc_monotone},
             {"expect_tolerance", au.expect_tolerance},
             {"variance_decrease", au.variance_decrease},
             {"shift_tolerance_se", au.shift_tolerance_se},
             {"tolerance", au.tolerance},
             {"full_min", au.full_min},
             {"topbottom_max", au.topbottom_max},
             {"boxes", au.boxes},
             {"max_side", au.max_side},
             {"pairs", au.pairs},
             {"max_shift", au.max_shift},
             {"families", au.families},
             {"rng_seed", au.rng_seed}};
  if (au.expect) ae["expect"] = *au.expect;
  e["audit"] = ae;
  e["output"] = cfg.output;
  cfg.effective = e;
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read config file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_seed_override(ExperimentConfig& cfg, const std::string& list) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item.empty()) continue;
    if (!std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw SchemaError("HOMLAB_SEED_OVERRIDE must be a comma separated list of seeds", 0);
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw SchemaError("HOMLAB_SEED_OVERRIDE is empty", 0);
  cfg.seeds = seeds;
  cfg.effective["seeds"] = seeds;
}

std::string strip_wall_ms(const std::string& csv) {
  std::stringstream in(csv);
  std::string line, out;
  int col = -1;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (first) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == "wall_ms") col = static_cast<int>(i);
      first = false;
    }
    if (col >= 0 && col < static_cast<int>(cells.size())) cells.erase(cells.begin() + col);
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct JobOutput {
  std::vector<EstimateRecord> records;
  std::vector<std::string> row;  // audit.csv cells
  std::vector<std::int64_t> raw_ints;
  bool pass = true;
};

struct Job {
  std::string id;
  std::string group;  // "centered", "shifted", "audit"
  std::function<JobOutput()> fn;
};

struct JobState {
  std::string status = "skipped";
  std::string error;
  int error_code = 0;
  JobOutput out;
};

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string direction_tag(const UnitDirection& nu) {
  std::string s;
  for (int i = 0; i < nu.dim(); ++i) s += (i ? "," : "") + std::to_string(nu.integer()[i]);
  return s;
}

EstimateParams params_for(const ExperimentConfig& cfg, const UnitDirection& nu, int a, int b, BcMode bc) {
  EstimateParams p;
  p.field = cfg.field;
  p.seeds = cfg.seeds;
  p.d = cfg.d;
  p.direction = nu;
  p.a = a;
  p.b = b;
  p.t_schedule = cfg.t_schedule;
  p.bc = bc;
  p.stencil_radius = cfg.stencil_radius;
  p.collar_width = cfg.collar_width;
  p.solver = cfg.solver;
  p.max_sweeps = cfg.max_sweeps;
  p.metric_override = cfg.metric_override;
  p.workers = 1;
  return p;
}

std::string csv_header(int d) {
  std::string h = "family,seed,nu_x,nu_y";
  if (d == 3) h += ",nu_z";
  return h + ",a,b,t,bc,stencil,solver,raw,normalized,exact,wall_ms\n";
}

std::string csv_row(const EstimateRecord& r, int d) {
  std::string s = r.family + "," + std::to_string(r.seed);
  for (int i = 0; i < d; ++i) s += "," + g17(r.direction[i]);
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.stats.wall_ms);
  s += "," + std::to_string(r.a) + "," + std::to_string(r.b) + "," + std::to_string(r.t) + "," + to_string(r.bc) +
       "," + r.stencil + "," + to_string(r.solver) + "," + g17(r.raw) + "," + g17(r.normalized) + "," +
       (r.exact ? "1" : "0") + "," + wall + "\n";
  return s;
}

json report_json(const ConvergenceReport& r) {
  auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"t", r.t},
          {"mean", r.mean},
          {"variance", r.variance},
          {"count", r.count},
          {"diff_slope", finite(r.diff_slope)},
          {"variance_slope", finite(r.variance_slope)},
          {"estimate", r.estimate},
          {"bootstrap_se", r.bootstrap_se},
          {"ci", {r.ci_lo, r.ci_hi}},
          {"exact", r.exact}};
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << data;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Estimate-like experiments: one job per (direction, labels, bc, t, seed),
// plus shifted-cube jobs when x0 is configured.
std::vector<Job> estimate_jobs(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  auto add = [&](bool shifted) {
    for (const UnitDirection& nu : cfg.directions)
      for (auto [a, b] : cfg.label_pairs)
        for (BcMode bc : cfg.bcs)
          for (int t : cfg.t_schedule)
            for (std::uint64_t seed : seeds) {
              const EstimateParams p = params_for(cfg, nu, a, b, bc);
              Vec want{}, center{};
              if (shifted)
                for (int j = 0; j < cfg.d; ++j) {
                  want[j] = t * (*cfg.x0)[j];
                  center[j] = std::nearbyint(want[j]);
                }
              const std::string id = std::string(shifted ? "shifted" : "centered") + ";nu=" + direction_tag(nu) +
                                     ";ab=" + std::to_string(a) + "," + std::to_string(b) + ";bc=" + to_string(bc) +
                                     ";t=" + std::to_string(t) + ";seed=" + std::to_string(seed);
              jobs.push_back({id, shifted ? "shifted" : "centered", [p, seed, t, center, want, d = cfg.d] {
                                JobOutput o;
                                EstimateRecord r = solve_any(make_cell_spec(p, seed, t, center));
                                for (int j = 0; j < d; ++j) r.center_offset[j] = center[j] - want[j];
                                o.raw_ints.push_back(r.raw_int);
                                o.records.push_back(std::move(r));
                                return o;
                              }});
            }
  };
  add(false);
  if (cfg.x0) add(true);
  return jobs;
}

std::vector<Job> triangle_jobs(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  const int K = cfg.field.num_labels;
  const int t = cfg.t_schedule.back();
  for (const UnitDirection& nu : cfg.directions)
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) {
        if (a == b) continue;
        for (std::uint64_t seed : seeds) {
          const EstimateParams p = params_for(cfg, nu, a, b, cfg.bcs.front());
          const std::string id = "triangle;nu=" + direction_tag(nu) + ";ab=" + std::to_string(a) + "," +
                                 std::to_string(b) + ";t=" + std::to_string(t) + ";seed=" + std::to_string(seed);
          jobs.push_back({id, "centered", [p, seed, t] {
                            JobOutput o;
                            EstimateRecord r = solve_any(make_cell_spec(p, seed, t, Vec{}));
                            o.raw_ints.push_back(r.raw_int);
                            o.records.push_back(std::move(r));
                            return o;
                          }});
        }
      }
  return jobs;
}

// Random partition of [lo, hi) into `pieces` intervals of length >= min_len.
std::vector<std::int64_t> cut_points(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi, int pieces,
                                     std::int64_t min_len) {
  std::vector<std::int64_t> cuts{lo, hi};
  const std::int64_t slack = (hi - lo) - pieces * min_len;
  std::vector<std::int64_t> extra(pieces, 0);
  for (std::int64_t s = 0; s < slack; ++s) ++extra[std::uniform_int_distribution<int>(0, pieces - 1)(rng)];
  std::int64_t x = lo;
  cuts = {lo};
  for (int i = 0; i < pieces; ++i) {
    x += min_len + extra[i];
    cuts.push_back(x);
  }
  return cuts;
}

std::vector<Job> subadditivity_jobs(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  std::mt19937_64 rng(cfg.audit.rng_seed);
  const int d = cfg.d;
  const FieldConfig fc = cfg.field;
  const Stencil stencil = crofton_stencil(cfg.stencil_radius, d, make_field(fc, 0).profile());
  const std::int64_t min_len = std::max<std::int64_t>(2, stencil.reach());
  for (int i = 0; i < cfg.audit.boxes; ++i) {
    const UnitDirection nu = cfg.directions[static_cast<std::size_t>(i) % cfg.directions.size()];
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(i) % cfg.seeds.size()];
    int pieces = std::uniform_int_distribution<int>(0, 1)(rng) ? 4 : 2;
    IntervalBox box;
    std::vector<IntervalBox> parts;
    if (d == 2) {
      const std::int64_t len = std::uniform_int_distribution<std::int64_t>(
          std::min<std::int64_t>(cfg.audit.max_side, pieces * min_len), cfg.audit.max_side)(rng);
      if (len < pieces * min_len) pieces = 2;
      const std::int64_t lo = std::uniform_int_distribution<std::int64_t>(-16, 16)(rng);
      box.lo = {lo};
      box.hi = {lo + std::max(len, 2 * min_len)};
      const auto cuts = cut_points(rng, box.lo[0], box.hi[0], pieces, min_len);
      for (int k = 0; k < pieces; ++k) parts.push_back({{cuts[k]}, {cuts[k + 1]}});
    } else {
      // Aspect ratio at most 4.
      std::int64_t len[2];
      len[0] = std::uniform_int_distribution<std::int64_t>(2 * min_len, cfg.audit.max_side)(rng);
      const std::int64_t lo1 = std::max<std::int64_t>(2 * min_len, (len[0] + 3) / 4);
      len[1] = std::uniform_int_distribution<std::int64_t>(lo1, std::max(lo1, std::min<std::int64_t>(cfg.audit.max_side, 4 * len[0])))(rng);
      box.lo = {std::uniform_int_distribution<std::int64_t>(-8, 8)(rng),
                std::uniform_int_distribution<std::int64_t>(-8, 8)(rng)};
      box.hi = {box.lo[0] + len[0], box.lo[1] + len[1]};
      const auto c0 = cut_points(rng, box.lo[0], box.hi[0], 2, min_len);
      if (pieces == 4) {
        const auto c1 = cut_points(rng, box.lo[1], box.hi[1], 2, min_len);
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y) parts.push_back({{c0[x], c1[y]}, {c0[x + 1], c1[y + 1]}});
      } else {
        for (int x = 0; x < 2; ++x) parts.push_back({{c0[x], box.lo[1]}, {c0[x + 1], box.hi[1]}});
      }
    }
    const auto [a, b] = cfg.label_pairs.front();
    std::string id = "mu;nu=" + direction_tag(nu) + ";seed=" + std::to_string(seed) + ";box=";
    for (int j = 0; j < d - 1; ++j) id += (j ? ":" : "") + std::to_string(box.lo[j]) + "_" + std::to_string(box.hi[j]);
    id += ";pieces=" + std::to_string(parts.size()) + ";i=" + std::to_string(i);
    jobs.push_back({id, "audit", [=, solver = cfg.solver, sweeps = cfg.max_sweeps, a = a, b = b] {
                      const SurfaceTensionField field = make_field(fc, seed);
                      const MuResult whole = mu_process(box, nu, a, b, field, stencil, solver, sweeps);
                      JobOutput o;
                      o.raw_ints.push_back(whole.raw_int);
                      std::int64_t sum = 0;
                      double sum_value = 0.0;
                      for (const IntervalBox& part : parts) {
                        const MuResult r = mu_process(part, nu, a, b, field, stencil, solver, sweeps);
                        o.raw_ints.push_back(r.raw_int);
                        sum += r.raw_int;
                        sum_value += r.value;
                      }
                      o.pass = whole.raw_int <= sum;
                      std::string lo, hi;
                      for (int j = 0; j < d - 1; ++j) {
                        lo += (j ? ":" : "") + std::to_string(box.lo[j]);
                        hi += (j ? ":" : "") + std::to_string(box.hi[j]);
                      }
                      o.row = {std::to_string(seed), direction_tag(nu), lo, hi, std::to_string(parts.size()),
                               std::to_string(whole.raw_int), std::to_string(sum), g17(whole.value), g17(sum_value),
                               o.pass ? "1" : "0"};
                      return o;
                    }});
  }
  return jobs;
}

std::vector<Job> stationarity_jobs(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  std::mt19937_64 rng(cfg.audit.rng_seed);
  const int d = cfg.d;
  std::vector<std::string> families = cfg.audit.families;
  if (families.empty()) families.push_back(to_string(cfg.field.family));
  const int t = cfg.t_schedule.front();
  const int S = cfg.audit.max_shift;
  for (const std::string& fam : families) {
    FieldConfig fc = cfg.field;
    fc.family = field_family_from_string(fam);
    for (int i = 0; i < cfg.audit.pairs; ++i) {
      const UnitDirection nu = cfg.directions[static_cast<std::size_t>(i) % cfg.directions.size()];
      const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(i) % cfg.seeds.size()];
      IVec z{};
      for (int j = 0; j < d; ++j) z[j] = std::uniform_int_distribution<std::int64_t>(-S, S)(rng);
      std::vector<std::int64_t> zz(d - 1);
      for (auto& v : zz) v = std::uniform_int_distribution<std::int64_t>(-8, 8)(rng);
      std::string id = "stationarity;family=" + fam + ";nu=" + direction_tag(nu) + ";seed=" + std::to_string(seed) + ";z=";
      for (int j = 0; j < d; ++j) id += (j ? "," : "") + std::to_string(z[j]);
      id += ";i=" + std::to_string(i);
      const auto [a, b] = cfg.label_pairs.front();
      const EstimateParams p0 = [&] {
        EstimateParams q = params_for(cfg, nu, a, b, cfg.bcs.front());
        q.field = fc;
        return q;
      }();
      jobs.push_back({id, "audit", [=] {
                        JobOutput o;
                        Vec zc{};
                        for (int j = 0; j < d; ++j) zc[j] = static_cast<double>(z[j]);
                        const LatticeProblem moved = build_problem(make_cell_spec(p0, seed, t, zc));
                        CellProblemSpec base = make_cell_spec(p0, seed, t, Vec{});
                        base.field = base.field.shifted(z);
                        const LatticeProblem pb = build_problem(base);
                        const std::int64_t r1 = solve(moved, p0.solver, p0.max_sweeps, p0.metric_override).value_int;
                        const std::int64_t r2 = solve(pb, p0.solver, p0.max_sweeps, p0.metric_override).value_int;
                        o.raw_ints = {r1, r2};
                        o.pass = r1 == r2;
                        std::string mu1, mu2;
                        if (nu.is_rational()) {
                          const SurfaceTensionField f = make_field(fc, seed);
                          const Stencil st = stencil_for(p0);
                          IntervalBox box;
                          for (int j = 0; j < d - 1; ++j) {
                            box.lo.push_back(0);
                            box.hi.push_back(4);
                          }
                          const MuResult m1 = mu_process(box.translated(zz), nu, a, b, f, st, p0.solver, p0.max_sweeps);
                          const MuResult m2 =
                              mu_process(box, nu, a, b, f.shifted(lattice_shift(nu, zz)), st, p0.solver, p0.max_sweeps);
                          o.raw_ints.push_back(m1.raw_int);
                          o.raw_ints.push_back(m2.raw_int);
                          o.pass = o.pass && m1.raw_int == m2.raw_int;
                          mu1 = std::to_string(m1.raw_int);
                          mu2 = std::to_string(m2.raw_int);
                        }
                        std::string zs;
                        for (int j = 0; j < d; ++j) zs += (j ? ":" : "") + std::to_string(z[j]);
                        o.row = {fam, std::to_string(seed), direction_tag(nu), zs, std::to_string(r1),
                                 std::to_string(r2), mu1, mu2, o.pass ? "1" : "0"};
                        return o;
                      }});
    }
  }
  return jobs;
}

struct Audit {
  std::string name;
  bool pass = true;
  json detail;
};

struct GroupKey {
  std::string nu;
  int a, b;
  BcMode bc;
  auto operator<=>(const GroupKey&) const = default;
};

std::map<GroupKey, std::vector<EstimateRecord>> group_records(const std::vector<EstimateRecord>& records) {
  std::map<GroupKey, std::vector<EstimateRecord>> g;
  for (const EstimateRecord& r : records) g[{direction_tag(r.direction), r.a, r.b, r.bc}].push_back(r);
  return g;
}

std::vector<double> values_at(const std::vector<EstimateRecord>& v, int t) {
  std::vector<double> out;
  for (const EstimateRecord& r : v)
    if (r.t == t) out.push_back(r.normalized);
  return out;
}

std::vector<Audit> estimate_audits(const ExperimentConfig& cfg, const std::vector<EstimateRecord>& centered,
                                   const std::vector<EstimateRecord>& shifted, json& groups_out) {
  std::vector<Audit> audits;
  const auto groups = group_records(centered);
  const auto sgroups = group_records(shifted);
  const int tmax = cfg.t_schedule.back();

  groups_out = json::array();
  for (const auto& [k, recs] : groups) {
    json g = {{"direction", k.nu}, {"a", k.a}, {"b", k.b}, {"bc", to_string(k.bc)},
              {"report", report_json(summarize(recs))}};
    if (auto it = sgroups.find(k); it != sgroups.end()) g["shifted_report"] = report_json(summarize(it->second));
    groups_out.push_back(g);
  }

  if (cfg.audit.bc_monotone && cfg.bcs.size() == 2) {
    Audit a{"bc_monotone", true, json::array()};
    std::map<std::tuple<std::string, int, int, int, std::uint64_t>, std::int64_t> full;
    for (const EstimateRecord& r : centered)
      if (r.bc == BcMode::full) full[{direction_tag(r.direction), r.a, r.b, r.t, r.seed}] = r.raw_int;
    for (const EstimateRecord& r : centered) {
      if (r.bc != BcMode::top_bottom) continue;
      auto it = full.find({direction_tag(r.direction), r.a, r.b, r.t, r.seed});
      if (it != full.end() && r.raw_int > it->second) {
        a.pass = false;
        a.detail.push_back({{"direction", direction_tag(r.direction)}, {"t", r.t}, {"seed", r.seed}});
      }
    }
    audits.push_back(a);
  }
  if (cfg.audit.expect) {
    Audit a{"expect", true, json::array()};
    for (const EstimateRecord& r : centered)
      if (std::abs(r.normalized - *cfg.audit.expect) > cfg.audit.expect_tolerance) {
        a.pass = false;
        a.detail.push_back({{"direction", direction_tag(r.direction)}, {"t", r.t}, {"seed", r.seed},
                            {"bc", to_string(r.bc)}, {"normalized", r.normalized}});
      }
    audits.push_back(a);
  }
  if (cfg.audit.variance_decrease) {
    Audit a{"variance_decrease", true, json::array()};
    for (const auto& [k, recs] : groups) {
      const double v0 = sample_variance(values_at(recs, cfg.t_schedule.front()));
      const double v1 = sample_variance(values_at(recs, tmax));
      const bool ok = v1 < v0;
      a.pass = a.pass && ok;
      a.detail.push_back({{"direction", k.nu}, {"bc", to_string(k.bc)}, {"variance_first", v0}, {"variance_last", v1},
                          {"pass", ok}});
    }
    audits.push_back(a);
  }
  if (cfg.x0) {
    Audit a{"shifted_consistency", true, json::array()};
    for (const auto& [k, recs] : groups) {
      auto it = sgroups.find(k);
      if (it == sgroups.end()) continue;
      const auto c = values_at(recs, tmax), s = values_at(it->second, tmax);
      const double diff = std::abs(mean(c) - mean(s));
      const double se = std::sqrt(standard_error(c) * standard_error(c) + standard_error(s) * standard_error(s));
      const bool ok = diff <= cfg.audit.shift_tolerance_se * se;
      a.pass = a.pass && ok;
      a.detail.push_back({{"direction", k.nu}, {"bc", to_string(k.bc)}, {"mean_centered", mean(c)},
                          {"mean_shifted", mean(s)}, {"pooled_se", se}, {"pass", ok}});
    }
    audits.push_back(a);
  }
  if (cfg.kind == ExperimentKind::isotropy_corollary || cfg.kind == ExperimentKind::anisotropic_gap) {
    Audit a{cfg.kind == ExperimentKind::isotropy_corollary ? "isotropy" : "anisotropic_gap", true, json::array()};
    for (const auto& [k, recs] : groups) {
      if (k.bc != BcMode::full) continue;
      auto it = groups.find({k.nu, k.a, k.b, BcMode::top_bottom});
      if (it == groups.end()) continue;
      const double f = mean(values_at(recs, tmax)), tb = mean(values_at(it->second, tmax));
      bool ok;
      json det = {{"direction", k.nu}, {"a", k.a}, {"b", k.b}, {"t", tmax}, {"full", f}, {"top_bottom", tb}};
      if (cfg.kind == ExperimentKind::isotropy_corollary) {
        const double rel = std::abs(f - tb) / f;
        ok = rel <= cfg.audit.tolerance;
        det["relative_gap"] = rel;
      } else {
        ok = f >= cfg.audit.full_min && tb <= cfg.audit.topbottom_max;
      }
      det["pass"] = ok;
      a.pass = a.pass && ok;
      a.detail.push_back(det);
    }
    audits.push_back(a);
  }
  return audits;
}

struct RunResult {
  int code = kExitOk;
  std::vector<std::string> job_ids;
  std::vector<JobState> states;
  std::vector<std::string> outputs;
};

RunResult execute(const ExperimentConfig& cfg, const fs::path& out_dir, int workers, std::ostream& log, bool quiet) {
  std::vector<Job> jobs;
  switch (cfg.kind) {
    case ExperimentKind::estimate:
    case ExperimentKind::isotropy_corollary:
    case ExperimentKind::anisotropic_gap: jobs = estimate_jobs(cfg); break;
    case ExperimentKind::triangle_audit: jobs = triangle_jobs(cfg); break;
    case ExperimentKind::subadditivity_audit: jobs = subadditivity_jobs(cfg); break;
    case ExperimentKind::stationarity_audit: jobs = stationarity_jobs(cfg); break;
  }

  RunResult res;
  res.states.resize(jobs.size());
  std::atomic<bool> abort{false};
  std::atomic<std::size_t> done{0};
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    if (abort) return;
    JobState& st = res.states[i];
    try {
      st.out = jobs[i].fn();
      st.status = "ok";
    } catch (const CapacityError& e) {
      st.status = "failed";
      st.error = e.what();
      st.error_code = kExitCapacity;
      abort = true;
    } catch (const std::exception& e) {
      st.status = "failed";
      st.error = e.what();
      st.error_code = kExitSchema;
      abort = true;
    }
    const std::size_t n = ++done;
    if (!quiet && (n % 50 == 0 || n == jobs.size())) log << "  " << n << "/" << jobs.size() << " jobs\n";
  });
  for (const Job& j : jobs) res.job_ids.push_back(j.id);

  std::vector<EstimateRecord> centered, shifted;
  std::vector<std::vector<std::string>> rows;
  bool jobs_pass = true;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const JobState& st = res.states[i];
    if (st.status == "failed") {
      log << "job " << jobs[i].id << " failed: " << st.error << "\n";
      res.code = std::max(res.code, st.error_code);
    }
    if (st.status != "ok") continue;
    auto& dst = jobs[i].group == "shifted" ? shifted : centered;
    dst.insert(dst.end(), st.out.records.begin(), st.out.records.end());
    if (!st.out.row.empty()) rows.push_back(st.out.row);
    jobs_pass = jobs_pass && st.out.pass;
  }

  fs::create_directories(out_dir);
  const int d = cfg.d;
  if (!rows.empty() || cfg.kind == ExperimentKind::subadditivity_audit ||
      cfg.kind == ExperimentKind::stationarity_audit) {
    std::string csv;
    if (cfg.kind == ExperimentKind::subadditivity_audit)
      csv = "seed,nu,box_lo,box_hi,pieces,mu_raw_int,sum_raw_int,mu,sum,pass\n";
    else
      csv = "family,seed,nu,z,raw_shifted_cube,raw_shifted_field,mu_shifted_box,mu_shifted_field,pass\n";
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) csv += (c ? "," : "") + r[c];
      csv += "\n";
    }
    write_file(out_dir / "audit.csv", csv);
    res.outputs.push_back("audit.csv");
  } else {
    std::string csv = csv_header(d);
    for (const EstimateRecord& r : centered) csv += csv_row(r, d);
    write_file(out_dir / "records.csv", csv);
    res.outputs.push_back("records.csv");
    if (cfg.x0) {
      std::string s = csv_header(d);
      for (const EstimateRecord& r : shifted) s += csv_row(r, d);
      write_file(out_dir / "shifted.csv", s);
      res.outputs.push_back("shifted.csv");
    }
  }

  json report;
  report["experiment"] = to_string(cfg.kind);
  report["name"] = cfg.name;
  std::vector<Audit> audits;
  if (cfg.kind == ExperimentKind::estimate || cfg.kind == ExperimentKind::isotropy_corollary ||
      cfg.kind == ExperimentKind::anisotropic_gap) {
    json groups;
    audits = estimate_audits(cfg, centered, shifted, groups);
    report["groups"] = groups;
  } else if (cfg.kind == ExperimentKind::triangle_audit) {
    Audit a{"triangle", true, json::array()};
    for (const UnitDirection& nu : cfg.directions) {
      std::vector<EstimateRecord> mine;
      for (const EstimateRecord& r : centered)
        if (r.direction == nu) mine.push_back(r);
      if (mine.empty()) continue;
      const EstimateParams p = params_for(cfg, nu, 0, 1, cfg.bcs.front());
      const TriangleReport tr = evaluate_triangle(p, mine);
      json checks = json::array();
      for (const TriangleCheck& c : tr.checks)
        checks.push_back({{"a", c.a}, {"b", c.b}, {"c", c.c}, {"lhs", c.lhs}, {"rhs", c.rhs},
                          {"tolerance", c.tolerance}, {"pass", c.pass}});
      a.detail.push_back({{"direction", direction_tag(nu)}, {"g", tr.g}, {"se", tr.se}, {"gap", tr.gap},
                          {"checks", checks}, {"pass", tr.pass}});
      a.pass = a.pass && tr.pass;
    }
    audits.push_back(a);
  } else {
    Audit a{cfg.kind == ExperimentKind::subadditivity_audit ? "subadditivity" : "stationarity", jobs_pass,
            {{"checked", rows.size()}}};
    audits.push_back(a);
  }
  bool all_pass = true;
  json aj = json::array();
  for (const Audit& a : audits) {
    aj.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    all_pass = all_pass && a.pass;
    if (!quiet) log << "audit " << a.name << ": " << (a.pass ? "pass" : "FAIL") << "\n";
  }
  report["audits"] = aj;
  report["pass"] = all_pass;
  write_file(out_dir / "report.json", report.dump(2) + "\n");
  res.outputs.push_back("report.json");
  if (res.code == kExitOk && !all_pass) res.code = kExitAuditFailed;
  return res;
}

std::vector<std::string> list_dir(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir).generic_string());
  std::sort(out.begin(), out.end());
  return out;
}

int exit_for_schema(const SchemaError& e, const std::string& source, std::ostream& log) {
  log << source;
  if (e.line > 0) log << ":" << e.line;
  log << ": error: " << e.what() << "\n";
  return kExitSchema;
}

std::optional<std::string> env_seed_override() {
  const char* v = std::getenv("HOMLAB_SEED_OVERRIDE");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace

int run_experiment(const fs::path& config_path, const RunOptions& options, std::ostream& log) {
  ExperimentConfig cfg;
  std::optional<std::string> override_list;
  try {
    cfg = load_config(config_path);
    override_list = env_seed_override();
    if (override_list) apply_seed_override(cfg, *override_list);
  } catch (const SchemaError& e) {
    return exit_for_schema(e, config_path.string(), log);
  }
  const fs::path out = options.out ? *options.out : fs::path(cfg.output);
  const int workers =
      options.workers > 0 ? options.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::string started = iso_now();
  if (!options.quiet) log << "running " << to_string(cfg.kind) << " '" << cfg.name << "' -> " << out.string() << "\n";

  RunResult res;
  try {
    res = execute(cfg, out, workers, log, options.quiet);
  } catch (const CapacityError& e) {
    log << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitSchema;
  }

  json m;
  m["artifact"] = "homlab";
  m["version"] = HOMLAB_VERSION;
  m["schema"] = 1;
  m["config_path"] = fs::absolute(config_path).lexically_normal().string();
  m["config_hash"] = sha256_hex(cfg.effective.dump());
  m["config"] = cfg.effective;
  m["seed_override"] = override_list ? json(*override_list) : json(nullptr);
  m["workers"] = workers;
  m["started"] = started;
  m["finished"] = iso_now();
  json jobs = json::array();
  for (std::size_t i = 0; i < res.job_ids.size(); ++i) {
    json j = {{"id", res.job_ids[i]}, {"status", res.states[i].status}};
    if (res.states[i].status == "ok") j["raw_int"] = res.states[i].out.raw_ints;
    if (!res.states[i].error.empty()) j["error"] = res.states[i].error;
    jobs.push_back(j);
  }
  m["jobs"] = jobs;
  m["exit_code"] = res.code;
  std::vector<std::string> files = list_dir(out);
  files.push_back("manifest.json");
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  m["outputs"] = files;
  write_file(out / "manifest.json", m.dump(2) + "\n");
  if (!options.quiet) log << "exit " << res.code << "\n";
  return res.code;
}

int replay_manifest(const fs::path& manifest_path, int workers, std::ostream& log) {
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const std::exception& e) {
    log << manifest_path.string() << ": error: " << e.what() << "\n";
    return kExitSchema;
  }
  if (!m.is_object() || !m.contains("jobs") || !m.contains("config")) {
    log << manifest_path.string() << ": error: not a run manifest\n";
    return kExitSchema;
  }

  ExperimentConfig cfg;
  try {
    const std::string cpath = m.value("config_path", "");
    if (!cpath.empty() && fs::exists(cpath)) {
      cfg = load_config(cpath);
    } else {
      log << "original config not found, using the embedded copy\n";
      cfg = parse_config(m.at("config").dump());
    }
    if (auto env = env_seed_override()) apply_seed_override(cfg, *env);
    else if (m.contains("seed_override") && m.at("seed_override").is_string())
      apply_seed_override(cfg, m.at("seed_override").get<std::string>());
  } catch (const SchemaError& e) {
    return exit_for_schema(e, m.value("config_path", "config"), log);
  }
  if (sha256_hex(cfg.effective.dump()) != m.value("config_hash", ""))
    log << "note: config hash differs from the manifest\n";

  static std::atomic<int> counter{0};
  const fs::path tmp = fs::temp_directory_path() /
                       ("homlab-replay-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(tmp);
  if (workers <= 0) workers = m.value("workers", 1);
  RunResult res;
  try {
    res = execute(cfg, tmp, workers, log, true);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    fs::remove_all(tmp);
    return kExitAuditFailed;
  }

  std::map<std::string, json> old;
  for (const json& j : m.at("jobs")) old[j.value("id", "")] = j.contains("raw_int") ? j.at("raw_int") : json(nullptr);
  std::vector<std::string> divergent;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < res.job_ids.size(); ++i) {
    const std::string& id = res.job_ids[i];
    seen.insert(id);
    auto it = old.find(id);
    const json now = res.states[i].status == "ok" ? json(res.states[i].out.raw_ints) : json(nullptr);
    if (it == old.end() || it->second != now) divergent.push_back(id);
  }
  for (const auto& [id, v] : old)
    if (!seen.count(id)) divergent.push_back(id);

  const fs::path orig_dir = manifest_path.parent_path();
  for (const std::string& f : res.outputs) {
    if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
    const fs::path a = orig_dir / f;
    if (!fs::exists(a) || strip_wall_ms(read_file(a)) != strip_wall_ms(read_file(tmp / f)))
      divergent.push_back("file:" + f);
  }
  fs::remove_all(tmp);

  if (!divergent.empty()) {
    log << "replay mismatch in " << divergent.size() << " item(s):\n";
    for (const std::string& id : divergent) log << "  " << id << "\n";
    return kExitAuditFailed;
  }
  log << "replay ok: " << res.job_ids.size() << " jobs reproduced\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Plotting

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw SchemaError("missing CSV column '" + name + "'", 1);
  }
};

CsvTable read_csv(const fs::path& p) {
  CsvTable t;
  std::stringstream in(read_file(p));
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

struct Curve {
  std::map<int, std::vector<double>> by_t;
};

std::string safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  return s;
}

}  // namespace

int plot_results(const fs::path& dir, std::ostream& log) {
  const fs::path records = dir / "records.csv";
  if (!fs::exists(records)) {
    log << dir.string() << ": error: no records.csv to plot\n";
    return kExitSchema;
  }
  CsvTable tab;
  std::optional<CsvTable> shifted;
  try {
    tab = read_csv(records);
    if (fs::exists(dir / "shifted.csv")) shifted = read_csv(dir / "shifted.csv");
    if (tab.rows.empty()) throw SchemaError("records.csv has no records", 2);
    (void)tab.col("normalized");
  } catch (const SchemaError& e) {
    return exit_for_schema(e, records.string(), log);
  }

  const bool d3 = std::find(tab.header.begin(), tab.header.end(), "nu_z") != tab.header.end();
  // key: (direction, a, b) -> series name -> curve
  std::map<std::string, std::map<std::string, Curve>> curves;
  auto ingest = [&](const CsvTable& t, const std::string& suffix) {
    const int cx = t.col("nu_x"), cy = t.col("nu_y"), ca = t.col("a"), cb = t.col("b"), ct = t.col("t"),
              cbc = t.col("bc"), cn = t.col("normalized");
    const int cz = d3 ? t.col("nu_z") : -1;
    for (const auto& r : t.rows) {
      if (static_cast<int>(r.size()) < static_cast<int>(t.header.size())) continue;
      char nu[96];
      if (d3)
        std::snprintf(nu, sizeof nu, "%.4g_%.4g_%.4g", std::stod(r[cx]), std::stod(r[cy]), std::stod(r[cz]));
      else
        std::snprintf(nu, sizeof nu, "%.4g_%.4g", std::stod(r[cx]), std::stod(r[cy]));
      const std::string key = std::string(nu) + "_" + r[ca] + "-" + r[cb];
      curves[key][r[cbc] + suffix].by_t[std::stoi(r[ct])].push_back(std::stod(r[cn]));
    }
  };
  try {
    ingest(tab, "");
    if (shifted) ingest(*shifted, " shifted");
  } catch (const std::exception& e) {
    log << records.string() << ": error: malformed records: " << e.what() << "\n";
    return kExitSchema;
  }

  std::vector<std::string> written;
  std::vector<PlotSeries> variance_series;
  std::vector<BarGroup> bars;
  for (const auto& [key, series] : curves) {
    std::vector<PlotSeries> lines;
    BarGroup bg;
    bg.label = key;
    for (const auto& [name, c] : series) {
      PlotSeries s, v;
      s.label = name;
      v.label = key + " " + name;
      for (const auto& [t, vals] : c.by_t) {
        const double mu = mean(vals), se = standard_error(vals);
        s.x.push_back(t);
        s.y.push_back(mu);
        s.lo.push_back(mu - 1.96 * se);
        s.hi.push_back(mu + 1.96 * se);
        v.x.push_back(t);
        v.y.push_back(sample_variance(vals));
      }
      lines.push_back(s);
      variance_series.push_back(v);
      if (name.find("shifted") == std::string::npos && !s.y.empty()) {
        bg.bars.push_back(name);
        bg.values.push_back(s.y.back());
      }
    }
    const std::string file = "convergence_" + safe(key) + ".svg";
    write_file(dir / file, line_chart_svg("normalized minimum, " + key, "t", "m / t^(d-1)", lines, true, false));
    written.push_back(file);
    bars.push_back(bg);
  }
  write_file(dir / "variance.svg", line_chart_svg("variance over seeds", "t", "sample variance", variance_series, true, true));
  written.push_back("variance.svg");
  write_file(dir / "bc_gap.svg", bar_chart_svg("largest-t mean by boundary mode", "m / t^(d-1)", bars));
  written.push_back("bc_gap.svg");

  const fs::path mpath = dir / "manifest.json";
  if (fs::exists(mpath)) {
    try {
      json m = json::parse(read_file(mpath));
      std::vector<std::string> files = list_dir(dir);
      m["outputs"] = files;
      write_file(mpath, m.dump(2) + "\n");
    } catch (const std::exception& e) {
      log << "warning: could not update manifest: " << e.what() << "\n";
    }
  }
  for (const std::string& f : written) log << "wrote " << (dir / f).string() << "\n";
  return kExitOk;
}

}  // namespace homlab
