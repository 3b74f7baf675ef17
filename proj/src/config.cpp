#include "gpstc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "gpstc/errors.hpp"

namespace gpstc {

namespace {

// Keys with a default; keys absent from this table are required.
const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"plant.dt", "0.2"},
      {"plant.a", "0.5"},
      {"plant.b", "1"},
      {"cost.kind", "exponential"},
      {"cost.Q", "identity"},
      {"cost.gamma", "0"},
      {"cost.M", "10"},
      {"gp.alpha", "1"},
      {"gp.lengthscales", "1"},
      {"gp.noise_variance", "1e-4"},
      {"gp.optimize", "true"},
      {"gp.optimize_noise", "false"},
      {"gp.restarts", "3"},
      {"gp.max_snr", "500"},
      {"gp.iterations", "200"},
      {"gp.cap", "400"},
      {"vi.n_ite", "15"},
      {"vi.discount", "0.98"},
      {"vi.width_factor", "1.5"},
      {"vi.ridge", "1e-8"},
      {"vi.tolerance", "1e-4"},
      {"vi.tie_tolerance", "1e-6"},
      {"loop.episodes", "10"},
      {"loop.rounds", "40"},
      {"loop.epsilon", "0.3"},
      {"loop.epsilon_final", "none"},
      {"out", "run"},
      {"simulate.horizon", "100"},
      {"simulate.radius", "0.3"},
      {"simulate.random_inits", "0"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Collects field-level problems while the typed config is assembled.
class Reader {
 public:
  explicit Reader(const std::map<std::string, std::string>& v) : v_(v) {}

  std::vector<std::string> problems;

  bool has(const std::string& key) const { return v_.count(key) != 0; }

  std::optional<std::string> text(const std::string& key) {
    auto it = v_.find(key);
    if (it == v_.end()) {
      problems.push_back(key + ": required field is missing");
      return std::nullopt;
    }
    return it->second;
  }

  std::optional<double> real(const std::string& key) {
    auto t = text(key);
    if (!t) return std::nullopt;
    auto v = to_double(*t);
    if (!v) problems.push_back(key + ": '" + *t + "' is not a number");
    return v;
  }

  std::optional<long long> integer(const std::string& key) {
    auto t = text(key);
    if (!t) return std::nullopt;
    long long v = 0;
    auto res = std::from_chars(t->data(), t->data() + t->size(), v);
    if (res.ec != std::errc() || res.ptr != t->data() + t->size()) {
      problems.push_back(key + ": '" + *t + "' is not an integer");
      return std::nullopt;
    }
    return v;
  }

  std::optional<bool> boolean(const std::string& key) {
    auto t = text(key);
    if (!t) return std::nullopt;
    if (*t == "true" || *t == "1" || *t == "yes") return true;
    if (*t == "false" || *t == "0" || *t == "no") return false;
    problems.push_back(key + ": '" + *t + "' is not a boolean");
    return std::nullopt;
  }

  std::optional<Eigen::VectorXd> vector(const std::string& key) {
    auto t = text(key);
    if (!t) return std::nullopt;
    std::vector<double> vals;
    std::stringstream ss(*t);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto v = to_double(trim(item));
      if (!v) {
        problems.push_back(key + ": '" + *t + "' is not a comma-separated list of numbers");
        return std::nullopt;
      }
      vals.push_back(*v);
    }
    if (vals.empty()) {
      problems.push_back(key + ": empty list");
      return std::nullopt;
    }
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }

  // Vector of length n; a single value is broadcast.
  std::optional<Eigen::VectorXd> vector_of(const std::string& key, Eigen::Index n) {
    auto v = vector(key);
    if (!v) return std::nullopt;
    if (v->size() == 1 && n > 1) return Eigen::VectorXd::Constant(n, (*v)[0]);
    if (v->size() != n) {
      problems.push_back(key + ": expected " + std::to_string(n) + " values, got " + std::to_string(v->size()));
      return std::nullopt;
    }
    return v;
  }

  void require(bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  }

 private:
  static std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
  }

  const std::map<std::string, std::string>& v_;
};

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "preset",          "plant",          "plant.dt",          "plant.a",          "plant.b",
      "input.lower",     "input.upper",    "grid.state_lower",  "grid.state_upper", "grid.state_spacing",
      "grid.input_lower", "grid.input_upper", "grid.input_spacing", "cost.kind",     "cost.Q",
      "cost.gamma",      "cost.M",         "gp.alpha",          "gp.lengthscales",  "gp.noise_variance",
      "gp.optimize",     "gp.optimize_noise", "gp.restarts",    "gp.max_snr",    "gp.iterations",    "gp.cap",
      "vi.n_ite",        "vi.discount",    "vi.width_factor",   "vi.ridge",         "vi.tolerance",
      "vi.tie_tolerance", "loop.episodes", "loop.rounds",       "loop.epsilon",     "loop.epsilon_final",
      "loop.seed",       "x_init",         "out",               "simulate.horizon", "simulate.radius",
      "simulate.random_inits"};
  return keys;
}

std::map<std::string, std::string> preset_values(const std::string& name) {
  if (name == "pendulum-paper") {
    return {{"plant", "pendulum"},
            {"plant.dt", "0.2"},
            {"input.lower", "-1.5"},
            {"input.upper", "1.5"},
            {"grid.state_lower", "-1.5,-1.5"},
            {"grid.state_upper", "1.5,1.5"},
            {"grid.state_spacing", "0.3"},
            {"grid.input_spacing", "0.3"},
            {"cost.kind", "exponential"},
            {"cost.Q", "identity"},
            {"cost.gamma", "0"},
            {"cost.M", "10"},
            {"x_init", "1.0,0.2"},
            {"loop.episodes", "10"}};
  }
  throw ValidationError({"preset: unknown preset '" + name + "' (known: pendulum-paper)"});
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::vector<std::string> problems;
  const auto& keys = config_keys();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      problems.push_back(key + ": unknown key (line " + std::to_string(lineno) + ")");
      continue;
    }
    if (!out.emplace(key, value).second) problems.push_back(key + ": repeated key (line " + std::to_string(lineno) + ")");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

ExperimentConfig resolve_config(std::map<std::string, std::string> raw,
                                const std::map<std::string, std::string>& overrides) {
  for (const auto& [k, v] : overrides) raw[k] = v;
  std::map<std::string, std::string> values;
  if (auto it = raw.find("preset"); it != raw.end()) {
    values = preset_values(it->second);
    raw.erase(it);
  }
  for (const auto& [k, v] : raw) values[k] = v;
  for (const auto& [k, v] : defaults()) values.emplace(k, v);
  const auto& keys = config_keys();
  std::vector<std::string> unknown;
  for (const auto& [k, v] : values)
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) unknown.push_back(k + ": unknown key");
  if (!unknown.empty()) throw ValidationError(std::move(unknown));

  ExperimentConfig cfg;
  Reader r(values);
  TrainConfig& t = cfg.train;

  // Plant.
  Eigen::Index nx = 0, nu = 0;
  const auto plant = r.text("plant");
  const auto in_lo = r.vector("input.lower");
  const auto in_hi = r.vector("input.upper");
  if (plant) {
    if (*plant == "pendulum") {
      nx = 2;
      nu = 1;
      const auto dt = r.real("plant.dt");
      r.require(!dt || *dt > 0.0, "plant.dt: must be positive");
      t.plant = make_pendulum(dt && *dt > 0.0 ? *dt : 0.2);
    } else if (*plant == "linear") {
      nx = 1;
      nu = 1;
      const auto a = r.real("plant.a");
      const auto b = r.real("plant.b");
      t.plant = make_linear(a.value_or(0.5), b.value_or(1.0));
    } else {
      r.problems.push_back("plant: unknown plant '" + *plant + "' (pendulum, linear)");
    }
  }
  if (nu > 0 && in_lo && in_hi) {
    if (in_lo->size() != nu || in_hi->size() != nu) {
      r.problems.push_back("input.lower/input.upper: expected " + std::to_string(nu) + " values");
    } else if ((in_lo->array() > 0.0).any() || (in_hi->array() < 0.0).any()) {
      r.problems.push_back("input.lower/input.upper: the input box must contain 0");
    } else {
      t.plant.input_lower = *in_lo;
      t.plant.input_upper = *in_hi;
    }
  }

  // Grid.
  const auto s_lo = nx ? r.vector_of("grid.state_lower", nx) : r.vector("grid.state_lower");
  const auto s_hi = nx ? r.vector_of("grid.state_upper", nx) : r.vector("grid.state_upper");
  const auto s_sp = r.real("grid.state_spacing");
  const auto i_sp = r.real("grid.input_spacing");
  const auto cost_m = r.integer("cost.M");
  r.require(!s_sp || *s_sp > 0.0, "grid.state_spacing: must be positive");
  r.require(!i_sp || *i_sp > 0.0, "grid.input_spacing: must be positive");
  r.require(!cost_m || *cost_m >= 1, "cost.M: must be at least 1");
  std::optional<Eigen::VectorXd> gi_lo, gi_hi;
  if (nu > 0) {
    gi_lo = r.has("grid.input_lower") ? r.vector_of("grid.input_lower", nu) : in_lo;
    gi_hi = r.has("grid.input_upper") ? r.vector_of("grid.input_upper", nu) : in_hi;
  }
  if (s_lo && s_hi && s_sp && *s_sp > 0.0 && gi_lo && gi_hi && i_sp && *i_sp > 0.0 && cost_m && *cost_m >= 1 &&
      s_lo->size() == s_hi->size() && gi_lo->size() == gi_hi->size()) {
    if ((s_lo->array() > s_hi->array()).any() || (gi_lo->array() > gi_hi->array()).any()) {
      r.problems.push_back("grid: lower bounds must not exceed upper bounds");
    } else {
      t.grid = RepresentativeGrid::regular(*s_lo, *s_hi, *s_sp, *gi_lo, *gi_hi, *i_sp, static_cast<int>(*cost_m));
      if (in_lo && in_hi && nu > 0 && in_lo->size() == nu) {
        try {
          t.grid.validate(t.plant.input_lower, t.plant.input_upper);
        } catch (const Error& e) {
          r.problems.push_back(std::string("grid: ") + e.what());
        }
      }
    }
  }

  // Cost.
  const auto kind = r.text("cost.kind");
  if (kind) {
    if (*kind == "exponential") t.cost.stage_kind = StageCostKind::Exponential;
    else if (*kind == "quadratic") t.cost.stage_kind = StageCostKind::Quadratic;
    else r.problems.push_back("cost.kind: must be 'exponential' or 'quadratic'");
  }
  if (auto q = r.text("cost.Q"); q && nx > 0) {
    if (*q == "identity") {
      t.cost.Q = Eigen::MatrixXd::Identity(nx, nx);
    } else if (auto v = r.vector("cost.Q")) {
      if (v->size() == nx) {
        t.cost.Q = v->asDiagonal();
      } else if (v->size() == nx * nx) {
        t.cost.Q = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            v->data(), nx, nx);
      } else {
        r.problems.push_back("cost.Q: expected 'identity', " + std::to_string(nx) + " diagonal values or " +
                             std::to_string(nx * nx) + " row-major values");
      }
    }
  }
  if (auto g = r.real("cost.gamma")) {
    r.require(*g >= 0.0, "cost.gamma: must be non-negative");
    t.cost.gamma = *g;
  }
  if (cost_m) t.cost.M = static_cast<int>(*cost_m);
  if (t.cost.Q.size() > 0) {
    try {
      t.cost.validate();
    } catch (const Error& e) {
      r.problems.push_back(std::string("cost: ") + e.what());
    }
  }

  // GP.
  if (nx > 0) {
    Hyperparams h;
    if (auto a = r.real("gp.alpha")) {
      r.require(*a > 0.0, "gp.alpha: must be positive");
      h.signal_amplitude = *a;
    }
    if (auto l = r.vector_of("gp.lengthscales", nx + nu)) {
      r.require((l->array() > 0.0).all(), "gp.lengthscales: must be positive");
      h.lengthscales = *l;
    }
    std::optional<Eigen::VectorXd> noise = r.vector_of("gp.noise_variance", nx);
    if (noise) r.require((noise->array() > 0.0).all(), "gp.noise_variance: must be positive");
    if (noise && (noise->array() == (*noise)[0]).all()) {
      h.noise_variance = (*noise)[0];
      t.gp.init = {h};
    } else if (noise) {
      t.gp.init.assign(static_cast<std::size_t>(nx), h);
      for (Eigen::Index i = 0; i < nx; ++i) t.gp.init[static_cast<std::size_t>(i)].noise_variance = (*noise)[i];
    } else {
      t.gp.init = {h};
    }
  }
  if (auto o = r.boolean("gp.optimize")) t.gp.fit.optimize = *o;
  if (auto o = r.boolean("gp.optimize_noise")) t.gp.fit.optimize_noise = *o;
  if (auto n = r.integer("gp.restarts")) {
    r.require(*n >= 0, "gp.restarts: must be non-negative");
    t.gp.fit.restarts = static_cast<int>(*n);
  }
  if (auto x = r.real("gp.max_snr")) {
    r.require(*x >= 0.0, "gp.max_snr: must be non-negative (0 disables the cap)");
    t.gp.fit.max_snr = *x;
  }
  if (auto n = r.integer("gp.iterations")) {
    r.require(*n >= 0, "gp.iterations: must be non-negative");
    t.gp.fit.max_iterations = static_cast<int>(*n);
  }
  if (auto n = r.integer("gp.cap")) {
    r.require(*n >= 1, "gp.cap: must be at least 1");
    t.gp.cap = static_cast<std::size_t>(std::max(1LL, *n));
  }

  // Value iteration.
  if (auto n = r.integer("vi.n_ite")) {
    r.require(*n >= 0, "vi.n_ite: must be non-negative");
    t.vi.n_ite = static_cast<int>(*n);
  }
  if (auto d = r.real("vi.discount")) {
    r.require(*d > 0.0 && *d <= 1.0, "vi.discount: must lie in (0, 1]");
    t.vi.discount = *d;
  }
  if (auto w = r.real("vi.width_factor")) {
    r.require(*w > 0.0, "vi.width_factor: must be positive");
    t.vi.width_factor = *w;
  }
  if (auto x = r.real("vi.ridge")) {
    r.require(*x >= 0.0, "vi.ridge: must be non-negative");
    t.vi.ridge = *x;
  }
  if (auto x = r.real("vi.tolerance")) {
    r.require(*x >= 0.0, "vi.tolerance: must be non-negative");
    t.vi.tolerance = *x;
  }
  if (auto x = r.real("vi.tie_tolerance")) {
    r.require(*x >= 0.0, "vi.tie_tolerance: must be non-negative");
    t.vi.tie_tolerance = *x;
  }

  // Loop.
  if (auto n = r.integer("loop.episodes")) {
    r.require(*n >= 0, "loop.episodes: must be non-negative");
    t.loop.episodes = static_cast<int>(*n);
  }
  if (auto n = r.integer("loop.rounds")) {
    r.require(*n >= 1, "loop.rounds: must be at least 1");
    t.loop.rounds = static_cast<int>(*n);
  }
  if (auto e = r.real("loop.epsilon")) {
    r.require(*e >= 0.0 && *e < 1.0, "loop.epsilon: must lie in [0, 1)");
    t.loop.epsilon = *e;
  }
  if (auto ef = r.text("loop.epsilon_final"); ef && *ef != "none") {
    if (auto e = r.real("loop.epsilon_final")) {
      r.require(*e >= 0.0 && *e < 1.0, "loop.epsilon_final: must lie in [0, 1)");
      t.loop.epsilon_final = *e;
    }
  }
  if (auto s = r.integer("loop.seed")) {
    r.require(*s >= 0, "loop.seed: must be non-negative");
    t.loop.seed = static_cast<std::uint64_t>(std::max(0LL, *s));
  }
  if (auto x = nx ? r.vector_of("x_init", nx) : r.vector("x_init")) t.x_init = *x;

  // Output and simulation.
  if (auto o = r.text("out")) cfg.out_dir = *o;
  if (auto h = r.integer("simulate.horizon")) {
    r.require(*h >= 1, "simulate.horizon: must be at least 1");
    cfg.horizon = static_cast<int>(*h);
  }
  if (auto x = r.real("simulate.radius")) {
    r.require(*x >= 0.0, "simulate.radius: must be non-negative");
    cfg.init_radius = *x;
  }
  if (auto n = r.integer("simulate.random_inits")) {
    r.require(*n >= 0, "simulate.random_inits: must be non-negative");
    cfg.random_inits = static_cast<int>(*n);
  }

  if (!r.problems.empty()) throw ValidationError(std::move(r.problems));
  cfg.values = std::move(values);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return resolve_config(parse_config_text(ss.str()), overrides);
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const auto& key : config_keys()) {
    auto it = cfg.values.find(key);
    if (it != cfg.values.end()) out << key << " = " << it->second << '\n';
  }
  return out.str();
}

}  // namespace gpstc
