#include "collusion/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "collusion/formats.h"

namespace collusion {
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kDefaultHorizon = 2'000'000;
constexpr std::int64_t kDefaultWindow = 100'000;
constexpr int kMaxSweepAxes = 2;

void CheckKeys(const Json& j, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidInput(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) {
      std::string list;
      for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
      throw InvalidInput("unknown key '" + key + "' in " + where +
                         " (allowed: " + list + ")");
    }
  }
}

std::string Key(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double GetNumber(const Json& j, const std::string& where, const char* key,
                 std::optional<double> fallback) {
  if (!j.contains(key)) {
    if (!fallback) throw InvalidInput("missing required key " + Key(where, key));
    return *fallback;
  }
  const Json& v = j.at(key);
  if (!v.is_number()) throw InvalidInput(Key(where, key) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw InvalidInput(Key(where, key) + " must be finite");
  return x;
}

std::int64_t GetInt(const Json& j, const std::string& where, const char* key,
                    std::optional<std::int64_t> fallback) {
  if (!j.contains(key)) {
    if (!fallback) throw InvalidInput("missing required key " + Key(where, key));
    return *fallback;
  }
  const Json& v = j.at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e18) {
      return static_cast<std::int64_t>(x);
    }
  }
  throw InvalidInput(Key(where, key) + " must be an integer");
}

std::string GetString(const Json& j, const std::string& where, const char* key,
                      std::optional<std::string> fallback) {
  if (!j.contains(key)) {
    if (!fallback) throw InvalidInput("missing required key " + Key(where, key));
    return *fallback;
  }
  if (!j.at(key).is_string()) {
    throw InvalidInput(Key(where, key) + " must be a string");
  }
  return j.at(key).get<std::string>();
}

std::vector<double> GetVector(const Json& j, const std::string& where,
                              const char* key) {
  if (!j.contains(key)) throw InvalidInput("missing required key " + Key(where, key));
  const Json& v = j.at(key);
  if (!v.is_array()) throw InvalidInput(Key(where, key) + " must be a list");
  std::vector<double> out;
  for (const Json& x : v) {
    if (!x.is_number()) {
      throw InvalidInput(Key(where, key) + " must hold only numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

std::optional<double> GetOptionalNumber(const Json& j, const std::string& where,
                                        const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return GetNumber(j, where, key, std::nullopt);
}

Json OptionalToJson(const std::optional<double>& x) {
  return x ? Json(*x) : Json(nullptr);
}

// Parses the game section, filling `resolved` with every field.
void ParseGame(const Json& j, ExperimentConfig& cfg, Json& resolved) {
  const std::string where = "game";
  if (!j.is_object()) throw InvalidInput("game must be an object");
  const std::string model = GetString(j, where, "model", std::nullopt);
  resolved = Json::object();
  resolved["model"] = model;
  auto interval = [&](double lo, double hi) {
    if (j.contains("interval")) {
      const std::vector<double> v = GetVector(j, where, "interval");
      if (v.size() != 2) throw InvalidInput("game.interval must be [lo, hi]");
      lo = v[0];
      hi = v[1];
    }
    resolved["interval"] = {lo, hi};
    return PriceInterval{lo, hi};
  };
  if (model == "logit") {
    CheckKeys(j, where, {"model", "costs", "quality", "outside_quality",
                         "differentiation", "interval"});
    const std::vector<double> costs = GetVector(j, where, "costs");
    const std::vector<double> quality = GetVector(j, where, "quality");
    const double outside = GetNumber(j, where, "outside_quality", 0.0);
    const double mu = GetNumber(j, where, "differentiation", 0.25);
    Require(!costs.empty() && !quality.empty(), "game.costs and game.quality must be nonempty");
    resolved["costs"] = costs;
    resolved["quality"] = quality;
    resolved["outside_quality"] = outside;
    resolved["differentiation"] = mu;
    const PriceInterval iv =
        interval(*std::min_element(costs.begin(), costs.end()),
                 2.0 * *std::max_element(quality.begin(), quality.end()));
    cfg.market.emplace(costs, LogitDemand{quality, outside, mu}, iv);
  } else if (model == "all_or_nothing") {
    CheckKeys(j, where, {"model", "costs", "max_demand", "interval"});
    const std::vector<double> costs = GetVector(j, where, "costs");
    const double d = GetNumber(j, where, "max_demand", 1.0);
    resolved["costs"] = costs;
    resolved["max_demand"] = d;
    const PriceInterval iv = interval(0.0, 1.0);
    cfg.market.emplace(costs, AllOrNothingDemand{d}, iv);
  } else if (model == "linear") {
    CheckKeys(j, where, {"model", "costs", "intercept", "own_slope",
                         "cross_slope", "interval"});
    const std::vector<double> costs = GetVector(j, where, "costs");
    const double a = GetNumber(j, where, "intercept", std::nullopt);
    const double b = GetNumber(j, where, "own_slope", std::nullopt);
    const double c = GetNumber(j, where, "cross_slope", 0.0);
    if (!j.contains("interval")) {
      throw InvalidInput("missing required key game.interval for linear demand");
    }
    resolved["costs"] = costs;
    resolved["intercept"] = a;
    resolved["own_slope"] = b;
    resolved["cross_slope"] = c;
    const PriceInterval iv = interval(0.0, 0.0);
    cfg.market.emplace(costs, LinearDemand{a, b, c}, iv);
  } else if (model == "matrix") {
    CheckKeys(j, where, {"model", "action_counts", "payoffs"});
    std::vector<int> counts;
    for (double x : GetVector(j, where, "action_counts")) {
      Require(x == std::floor(x) && x >= 1,
              "game.action_counts must hold positive integers");
      counts.push_back(static_cast<int>(x));
    }
    const std::vector<double> payoffs = GetVector(j, where, "payoffs");
    resolved["action_counts"] = counts;
    resolved["payoffs"] = payoffs;
    cfg.matrix.emplace(counts, payoffs);
  } else {
    throw InvalidInput("game.model must be one of logit, all_or_nothing, "
                       "linear, matrix (got '" + model + "')");
  }
}

AgentSpec ParseAgent(const Json& j, const std::string& where, Json& resolved) {
  if (!j.is_object()) throw InvalidInput(where + " must be an object");
  const std::string type = GetString(j, where, "type", std::nullopt);
  resolved = Json::object();
  resolved["type"] = type;
  AgentSpec spec;
  if (type == "q_learning") {
    CheckKeys(j, where, {"type", "alpha", "delta", "exploration", "state",
                         "q_init", "update"});
    QLearningSpec q;
    q.learning_rate = GetNumber(j, where, "alpha", q.learning_rate);
    q.discount = GetNumber(j, where, "delta", q.discount);
    Json explore = Json::object();
    if (j.contains("exploration")) {
      const Json& e = j.at("exploration");
      const std::string ew = where + ".exploration";
      const std::string kind = GetString(e, ew, "kind", "decay");
      if (kind == "decay") {
        CheckKeys(e, ew, {"kind", "beta"});
        q.exploration = ExplorationSchedule::Decay(GetNumber(e, ew, "beta", 4e-6));
      } else if (kind == "constant") {
        CheckKeys(e, ew, {"kind", "epsilon"});
        q.exploration =
            ExplorationSchedule::Constant(GetNumber(e, ew, "epsilon", std::nullopt));
      } else {
        throw InvalidInput(ew + ".kind must be decay or constant");
      }
    }
    if (q.exploration.kind == ExplorationSchedule::Kind::kDecay) {
      explore = {{"kind", "decay"}, {"beta", q.exploration.beta}};
    } else {
      explore = {{"kind", "constant"}, {"epsilon", q.exploration.epsilon}};
    }
    const std::string state = GetString(j, where, "state", "last_joint_prices");
    if (state == "last_joint_prices") {
      q.state_mode = StateMode::kLastJointPrices;
    } else if (state == "own_last_price") {
      q.state_mode = StateMode::kOwnLastPrice;
    } else if (state == "stateless") {
      q.state_mode = StateMode::kStateless;
    } else {
      throw InvalidInput(where + ".state must be last_joint_prices, "
                         "own_last_price or stateless");
    }
    const std::string init = GetString(j, where, "q_init", "uniform_opponent");
    if (init == "uniform_opponent") {
      q.q_init = QInit::kUniformOpponent;
    } else if (init == "zeros") {
      q.q_init = QInit::kZeros;
    } else {
      throw InvalidInput(where + ".q_init must be uniform_opponent or zeros");
    }
    const std::string update = GetString(j, where, "update", "asynchronous");
    if (update == "asynchronous") {
      q.update_mode = UpdateMode::kAsynchronous;
    } else if (update == "synchronous") {
      q.update_mode = UpdateMode::kSynchronous;
    } else {
      throw InvalidInput(where + ".update must be asynchronous or synchronous");
    }
    resolved["alpha"] = q.learning_rate;
    resolved["delta"] = q.discount;
    resolved["exploration"] = explore;
    resolved["state"] = state;
    resolved["q_init"] = init;
    resolved["update"] = update;
    spec = q;
  } else if (type == "exp3") {
    CheckKeys(j, where, {"type", "eta", "gamma", "reward_lo", "reward_hi"});
    Exp3Spec e;
    e.eta = GetOptionalNumber(j, where, "eta");
    e.gamma = GetNumber(j, where, "gamma", e.gamma);
    e.reward_lo = GetOptionalNumber(j, where, "reward_lo");
    e.reward_hi = GetOptionalNumber(j, where, "reward_hi");
    resolved["eta"] = OptionalToJson(e.eta);
    resolved["gamma"] = e.gamma;
    resolved["reward_lo"] = OptionalToJson(e.reward_lo);
    resolved["reward_hi"] = OptionalToJson(e.reward_hi);
    spec = e;
  } else if (type == "ucb") {
    CheckKeys(j, where, {"type", "c"});
    UcbSpec u;
    u.width = GetNumber(j, where, "c", u.width);
    resolved["c"] = u.width;
    spec = u;
  } else if (type == "constant") {
    CheckKeys(j, where, {"type", "action"});
    ConstantSpec c;
    c.action = static_cast<int>(GetInt(j, where, "action", std::nullopt));
    resolved["action"] = c.action;
    spec = c;
  } else if (type == "gradient") {
    throw InvalidInput(where + ": gradient agents use continuous prices and "
                       "are not supported in grid experiments");
  } else {
    throw InvalidInput(where + ".type must be q_learning, exp3, ucb or "
                       "constant (got '" + type + "')");
  }
  try {
    ValidateAgentSpec(spec);
  } catch (const InvalidInput& e) {
    throw InvalidInput(where + ": " + e.what());
  }
  return spec;
}

Retention ParseRetention(const std::string& name) {
  if (name == "all") return Retention::kAll;
  if (name == "summaries-only") return Retention::kSummariesOnly;
  if (name == "every-k") return Retention::kEveryK;
  throw InvalidInput("output.retention must be all, summaries-only or every-k");
}

std::string DefaultOutputRoot() {
  const char* env = std::getenv("COLLUSION_OUT");
  return env != nullptr && *env != '\0' ? env : "runs";
}

int NumPlayers(const ExperimentConfig& cfg) {
  return cfg.market ? cfg.market->num_firms() : cfg.matrix->num_players();
}

std::string CellName(std::uint64_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "cell-%03llu",
                static_cast<unsigned long long>(index));
  return buffer;
}

std::string OptionalCell(const std::optional<double>& x) {
  return x ? FormatDouble(*x) : std::string();
}

std::string CsvCell(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

const char* RetentionName(Retention retention) {
  switch (retention) {
    case Retention::kAll:
      return "all";
    case Retention::kSummariesOnly:
      return "summaries-only";
    case Retention::kEveryK:
      return "every-k";
  }
  return "all";
}

ExperimentConfig ParseConfig(const Json& j, bool require_agents) {
  CheckKeys(j, "config", {"name", "cell_index", "game", "grid", "agent",
                          "agents", "simulation", "seeds", "sweep", "output"});
  ExperimentConfig cfg;
  Json& r = cfg.resolved;
  r = Json::object();

  cfg.name = GetString(j, "", "name", "experiment");
  Require(!cfg.name.empty() && cfg.name.find('/') == std::string::npos &&
              cfg.name != "." && cfg.name != "..",
          "name must be a nonempty plain directory name");
  r["name"] = cfg.name;
  const std::int64_t cell = GetInt(j, "", "cell_index", 0);
  Require(cell >= 0, "cell_index must be >= 0");
  cfg.cell_index = static_cast<std::uint64_t>(cell);
  r["cell_index"] = cfg.cell_index;

  if (!j.contains("game")) throw InvalidInput("missing required key game");
  ParseGame(j.at("game"), cfg, r["game"]);
  const int n = NumPlayers(cfg);

  const Json grid = j.value("grid", Json::object());
  CheckKeys(grid, "grid", {"points", "bounds", "xi"});
  cfg.grid.points = static_cast<int>(GetInt(grid, "grid", "points", 15));
  Require(cfg.grid.points >= 2, "grid.points must be >= 2");
  const std::string bounds = GetString(grid, "grid", "bounds", "equilibria");
  if (bounds == "equilibria") {
    cfg.grid.bounds = GridBounds::kEquilibria;
  } else if (bounds == "interval") {
    cfg.grid.bounds = GridBounds::kInterval;
  } else {
    throw InvalidInput("grid.bounds must be equilibria or interval");
  }
  cfg.grid.xi = GetNumber(grid, "grid", "xi", 0.1);
  Require(cfg.grid.xi >= 0.0, "grid.xi must be >= 0");
  r["grid"] = {{"points", cfg.grid.points}, {"bounds", bounds},
               {"xi", cfg.grid.xi}};

  if (j.contains("agent") && j.contains("agents")) {
    throw InvalidInput("give either agent (replicated to every firm) or "
                       "agents (one per firm), not both");
  }
  r["agents"] = Json::array();
  if (j.contains("agent")) {
    Json resolved;
    const AgentSpec spec = ParseAgent(j.at("agent"), "agent", resolved);
    for (int i = 0; i < n; ++i) {
      cfg.agents.push_back(spec);
      r["agents"].push_back(resolved);
    }
  } else if (j.contains("agents")) {
    const Json& list = j.at("agents");
    if (!list.is_array()) throw InvalidInput("agents must be a list");
    if (static_cast<int>(list.size()) != n) {
      throw InvalidInput("agents has " + std::to_string(list.size()) +
                         " entries but the game has " + std::to_string(n) +
                         " firms");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      Json resolved;
      cfg.agents.push_back(
          ParseAgent(list[i], "agents[" + std::to_string(i) + "]", resolved));
      r["agents"].push_back(resolved);
    }
  } else if (require_agents) {
    throw InvalidInput("missing required key agent or agents");
  }
  if (cfg.matrix) {
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
      if (const auto* c = std::get_if<ConstantSpec>(&cfg.agents[i])) {
        Require(c->action < cfg.matrix->num_actions(static_cast<int>(i)),
                "agents[" + std::to_string(i) + "].action exceeds the action count");
      }
    }
  } else {
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
      if (const auto* c = std::get_if<ConstantSpec>(&cfg.agents[i])) {
        Require(c->action < cfg.grid.points,
                "agents[" + std::to_string(i) + "].action exceeds grid.points");
      }
    }
  }

  const Json sim = j.value("simulation", Json::object());
  CheckKeys(sim, "simulation",
            {"horizon", "convergence_window", "tail_window", "noise_sigma"});
  cfg.horizon = GetInt(sim, "simulation", "horizon", kDefaultHorizon);
  Require(cfg.horizon >= 0, "simulation.horizon must be >= 0");
  cfg.convergence_window =
      GetInt(sim, "simulation", "convergence_window",
             std::min(kDefaultWindow, std::max<std::int64_t>(1, cfg.horizon)));
  Require(cfg.convergence_window >= 1,
          "simulation.convergence_window must be >= 1");
  Require(cfg.horizon == 0 || cfg.convergence_window <= cfg.horizon,
          "simulation.convergence_window (" +
              std::to_string(cfg.convergence_window) +
              ") must be <= simulation.horizon (" +
              std::to_string(cfg.horizon) + ")");
  cfg.tail_window = GetInt(sim, "simulation", "tail_window", 0);
  Require(cfg.tail_window >= 0, "simulation.tail_window must be >= 0");
  cfg.noise_sigma = GetNumber(sim, "simulation", "noise_sigma", 0.0);
  Require(cfg.noise_sigma >= 0.0, "simulation.noise_sigma must be >= 0");
  r["simulation"] = {{"horizon", cfg.horizon},
                     {"convergence_window", cfg.convergence_window},
                     {"tail_window", cfg.tail_window},
                     {"noise_sigma", cfg.noise_sigma}};

  const Json seeds = j.value("seeds", Json{{"base", 0}, {"count", 1}});
  if (seeds.is_array()) {
    for (const Json& s : seeds) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
        throw InvalidInput("seeds must hold nonnegative integers");
      }
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    CheckKeys(seeds, "seeds", {"base", "count"});
    const std::int64_t base = GetInt(seeds, "seeds", "base", 0);
    const std::int64_t count = GetInt(seeds, "seeds", "count", 1);
    Require(base >= 0, "seeds.base must be >= 0");
    Require(count >= 1, "seeds.count must be >= 1");
    for (std::int64_t k = 0; k < count; ++k) {
      cfg.seeds.push_back(static_cast<std::uint64_t>(base + k));
    }
  }
  Require(!cfg.seeds.empty(), "seeds must name at least one seed");
  Require(std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() ==
              cfg.seeds.size(),
          "seeds must be distinct");
  r["seeds"] = cfg.seeds;

  r["sweep"] = Json::array();
  if (j.contains("sweep")) {
    const Json& sweep = j.at("sweep");
    if (!sweep.is_array()) throw InvalidInput("sweep must be a list of axes");
    if (sweep.size() > static_cast<std::size_t>(kMaxSweepAxes)) {
      throw InvalidInput("sweep has " + std::to_string(sweep.size()) +
                         " axes; at most 2 are supported");
    }
    for (std::size_t a = 0; a < sweep.size(); ++a) {
      const std::string where = "sweep[" + std::to_string(a) + "]";
      CheckKeys(sweep[a], where, {"param", "values"});
      SweepAxis axis;
      axis.param = GetString(sweep[a], where, "param", std::nullopt);
      if (!sweep[a].contains("values") || !sweep[a].at("values").is_array() ||
          sweep[a].at("values").empty()) {
        throw InvalidInput(where + ".values must be a nonempty list");
      }
      for (const Json& v : sweep[a].at("values")) axis.values.push_back(v);
      r["sweep"].push_back({{"param", axis.param}, {"values", axis.values}});
      cfg.sweep.push_back(std::move(axis));
    }
  }

  const Json output = j.value("output", Json::object());
  CheckKeys(output, "output", {"dir", "retention", "every_k"});
  cfg.out_dir = GetString(output, "output", "dir", DefaultOutputRoot());
  cfg.retention = ParseRetention(GetString(
      output, "output", "retention",
      cfg.sweep.empty() ? "all" : "summaries-only"));
  cfg.every_k = static_cast<int>(GetInt(output, "output", "every_k", 1));
  Require(cfg.every_k >= 1, "output.every_k must be >= 1");
  r["output"] = {{"dir", cfg.out_dir},
                 {"retention", RetentionName(cfg.retention)},
                 {"every_k", cfg.every_k}};

  // Every sweep cell must itself be a valid config.
  if (!cfg.sweep.empty()) ExpandSweep(cfg);
  return cfg;
}

ExperimentConfig LoadConfig(const std::string& path, bool require_agents) {
  Json j;
  try {
    j = Json::parse(ReadFile(path));
  } catch (const Json::parse_error& e) {
    throw InvalidInput("cannot parse " + path + ": " + e.what());
  }
  return ParseConfig(j, require_agents);
}

void SetPath(Json& doc, const std::string& path, const Json& value) {
  std::vector<std::string> parts;
  std::stringstream in(path);
  std::string part;
  while (std::getline(in, part, '.')) {
    Require(!part.empty(), "sweep param '" + path + "' has an empty segment");
    parts.push_back(part);
  }
  Require(!parts.empty(), "sweep param must be nonempty");

  std::function<void(Json&, std::size_t)> set = [&](Json& node, std::size_t k) {
    const std::string& key = parts[k];
    const bool last = k + 1 == parts.size();
    if (node.is_array()) {
      const bool numeric = std::all_of(key.begin(), key.end(), ::isdigit);
      if (numeric) {
        const std::size_t idx = std::stoul(key);
        Require(idx < node.size(), "sweep param '" + path + "' index out of range");
        if (last) {
          node[idx] = value;
        } else {
          set(node[idx], k + 1);
        }
      } else {
        Require(!node.empty(), "sweep param '" + path + "' addresses an empty list");
        for (Json& element : node) set(element, k);
      }
      return;
    }
    Require(node.is_object(), "sweep param '" + path + "' does not name a config key");
    if (last) {
      node[key] = value;
      return;
    }
    Require(node.contains(key),
            "sweep param '" + path + "': no key '" + key + "'");
    set(node[key], k + 1);
  };
  set(doc, 0);
}

std::vector<Cell> ExpandSweep(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  if (config.sweep.empty()) {
    Cell cell;
    cell.index = static_cast<int>(config.cell_index);
    cell.config = config;
    cells.push_back(std::move(cell));
    return cells;
  }
  std::size_t total = 1;
  for (const SweepAxis& axis : config.sweep) total *= axis.values.size();
  for (std::size_t c = 0; c < total; ++c) {
    Json doc = config.resolved;
    doc["sweep"] = Json::array();
    doc["cell_index"] = c;
    Cell cell;
    cell.index = static_cast<int>(c);
    // First axis slowest.
    std::size_t rest = c;
    std::vector<std::size_t> picks(config.sweep.size());
    for (std::size_t a = config.sweep.size(); a-- > 0;) {
      picks[a] = rest % config.sweep[a].values.size();
      rest /= config.sweep[a].values.size();
    }
    for (std::size_t a = 0; a < config.sweep.size(); ++a) {
      const Json& v = config.sweep[a].values[picks[a]];
      SetPath(doc, config.sweep[a].param, v);
      cell.assignment.emplace_back(config.sweep[a].param, v);
    }
    try {
      cell.config = ParseConfig(doc);
    } catch (const InvalidInput& e) {
      throw InvalidInput("sweep cell " + std::to_string(c) + ": " + e.what());
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

PreparedGame PrepareGame(const ExperimentConfig& config) {
  if (config.matrix) {
    return PreparedGame{StageGame(*config.matrix), Benchmarks{}, false};
  }
  const MarketGame& game = *config.market;
  const Benchmarks bench = ComputeBenchmarks(game);
  if (!bench.converged) {
    throw std::runtime_error(
        "benchmark solver did not converge (Nash residual " +
        FormatDouble(bench.nash_residual) + ", monopoly residual " +
        FormatDouble(bench.monopoly_residual) + "); the collusion index needs "
        "both benchmarks");
  }
  double lo = game.interval().lo, hi = game.interval().hi;
  if (config.grid.bounds == GridBounds::kEquilibria) {
    const double nash = *std::min_element(bench.nash.begin(), bench.nash.end());
    const double mono =
        *std::max_element(bench.monopoly.begin(), bench.monopoly.end());
    const auto [blo, bhi] = BoundGridToEquilibria(nash, mono, config.grid.xi);
    lo = std::max(lo, blo);
    hi = std::min(hi, bhi);
  }
  return PreparedGame{StageGame(game, MakeGrid(lo, hi, config.grid.points)),
                      bench, true};
}

std::uint64_t RunSeed(const ExperimentConfig& config,
                      std::uint64_t seed_value) {
  return MixSeed(seed_value, config.cell_index);
}

SimConfig MakeSimConfig(const ExperimentConfig& config,
                        const PreparedGame& game, std::uint64_t seed_value) {
  Require(static_cast<int>(config.agents.size()) == game.stage.num_players(),
          "config has no agents for every firm");
  SimConfig sim{game.stage, config.agents, config.horizon};
  sim.convergence_window = config.convergence_window;
  sim.tail_window = config.tail_window;
  sim.noise_sigma = config.noise_sigma;
  sim.seed = RunSeed(config, seed_value);
  return sim;
}

Json RunConfig(const ExperimentConfig& cell_config, std::uint64_t seed_value) {
  Json doc = cell_config.resolved;
  doc["seeds"] = Json::array({seed_value});
  doc["sweep"] = Json::array();
  return doc;
}

std::string ExperimentDir(const ExperimentConfig& config) {
  return (fs::path(config.out_dir) / config.name).string();
}

std::string RunDir(const ExperimentConfig& cell_config,
                   std::uint64_t seed_value) {
  return (fs::path(ExperimentDir(cell_config)) /
          CellName(cell_config.cell_index) /
          ("seed-" + std::to_string(seed_value)))
      .string();
}

Stat Describe(const std::vector<double>& values) {
  Stat s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  s.mean = mean;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

ExperimentReport RunExperiment(const ExperimentConfig& config,
                               const RunOptions& options) {
  Require(!config.agents.empty(), "experiment needs agents");
  const std::vector<Cell> cells = ExpandSweep(config);
  ExperimentReport report;
  report.dir = ExperimentDir(config);
  fs::create_directories(report.dir);

  const std::string echo_path = (fs::path(report.dir) / "resolved-config.json").string();
  if (fs::exists(echo_path)) {
    const Json previous = Json::parse(ReadFile(echo_path));
    if (previous != config.resolved) {
      throw InvalidInput("experiment directory " + report.dir +
                         " holds results of a different configuration");
    }
  } else {
    WriteFileAtomic(echo_path, config.resolved.dump(2) + "\n");
  }

  std::vector<PreparedGame> prepared;
  for (const Cell& cell : cells) prepared.push_back(PrepareGame(cell.config));

  struct Job {
    int cell;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t k = 0; k < config.seeds.size(); ++k) {
      jobs.push_back({static_cast<int>(c), k});
    }
  }
  report.runs.resize(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto work = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Cell& cell = cells[jobs[j].cell];
      const PreparedGame& game = prepared[jobs[j].cell];
      const std::uint64_t seed = config.seeds[jobs[j].seed_index];
      RunRecord& run = report.runs[j];
      run.cell = cell.index;
      run.seed = seed;
      run.dir = RunDir(cell.config, seed);
      try {
        const fs::path dir(run.dir);
        const Json run_config = RunConfig(cell.config, seed);
        const fs::path summary_path = dir / "summary.csv";
        if (fs::exists(summary_path)) {
          const Json previous =
              Json::parse(ReadFile((dir / "resolved-config.json").string()));
          if (previous != run_config) {
            throw InvalidInput("existing run at " + run.dir +
                               " was produced by a different configuration");
          }
          std::istringstream in(ReadFile(summary_path.string()));
          run.summary = ReadSummaryCsv(in);
          run.reused = true;
          run.has_trace = fs::exists(dir / "trace.jsonl");
        } else {
          const bool keep_trace =
              config.retention == Retention::kAll ||
              (config.retention == Retention::kEveryK &&
               jobs[j].seed_index % config.every_k == 0);
          const SimConfig sim = MakeSimConfig(cell.config, game, seed);
          const EpisodeResult result =
              SimulateEpisode(sim, {.record_trace = keep_trace});
          run.summary = Summarize(result, game.benchmarks, seed);
          fs::create_directories(dir);
          WriteFileAtomic((dir / "resolved-config.json").string(),
                          run_config.dump(2) + "\n");
          if (keep_trace) {
            WriteFileAtomic((dir / "trace.jsonl").string(),
                            [&](std::ostream& out) {
                              WriteTraceJsonl(out, result.trace);
                            });
          }
          // Written last: its presence marks the run complete.
          WriteFileAtomic(summary_path.string(), [&](std::ostream& out) {
            WriteSummaryCsv(out, run.summary);
          });
          run.has_trace = keep_trace;
        }
        if (options.log != nullptr) {
          std::lock_guard<std::mutex> lock(log_mutex);
          *options.log << (run.reused ? "reused   " : "finished ") << run.dir
                       << " (" << TerminationName(run.summary.termination)
                       << ", " << run.summary.stages << " stages)\n";
        }
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const int workers = std::max(
      1, std::min<int>(options.workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  std::string failures;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j].empty()) {
      failures += "\n  " + report.runs[j].dir + ": " + errors[j];
    }
  }
  if (!failures.empty()) throw std::runtime_error("runs failed:" + failures);

  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellReport cr;
    cr.cell = cells[c].index;
    cr.assignment = cells[c].assignment;
    cr.nash = prepared[c].benchmarks.nash;
    cr.monopoly = prepared[c].benchmarks.monopoly;
    std::vector<double> all, converged, stages;
    for (const RunRecord& run : report.runs) {
      if (run.cell != cr.cell) continue;
      ++cr.runs;
      if (run.reused) {
        ++report.reused;
      } else {
        ++report.computed;
      }
      const MetricsSummary& s = run.summary;
      if (prepared[c].has_benchmarks) all.push_back(s.delta_mean);
      if (s.converged_at) {
        ++cr.converged;
        stages.push_back(static_cast<double>(*s.converged_at));
        if (prepared[c].has_benchmarks) converged.push_back(s.delta_mean);
      }
    }
    cr.delta_all = Describe(all);
    cr.delta_converged = Describe(converged);
    cr.mean_convergence_stage = Describe(stages).mean;
    report.cells.push_back(std::move(cr));
  }
  WriteFileAtomic((fs::path(report.dir) / "report.csv").string(),
                  [&](std::ostream& out) { WriteReportCsv(out, report); });
  return report;
}

void WriteReportCsv(std::ostream& out, const ExperimentReport& report) {
  std::size_t n = 0;
  for (const CellReport& c : report.cells) n = std::max(n, c.nash.size());
  out << "cell";
  if (!report.cells.empty()) {
    for (const auto& [param, value] : report.cells[0].assignment) {
      out << ',' << CsvCell(param);
    }
  }
  out << ",runs,converged,fraction_converged,mean_convergence_stage,"
         "delta_mean_all,delta_sd_all,delta_mean_converged,"
         "delta_sd_converged";
  for (std::size_t i = 0; i < n; ++i) out << ",nash_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",monopoly_" << i;
  out << '\n';
  for (const CellReport& c : report.cells) {
    out << c.cell;
    for (const auto& [param, value] : c.assignment) {
      out << ',' << CsvCell(value.dump());
    }
    out << ',' << c.runs << ',' << c.converged << ','
        << FormatDouble(c.runs > 0 ? static_cast<double>(c.converged) / c.runs
                                   : 0.0)
        << ',' << OptionalCell(c.mean_convergence_stage) << ','
        << OptionalCell(c.delta_all.mean) << ',' << OptionalCell(c.delta_all.sd)
        << ',' << OptionalCell(c.delta_converged.mean) << ','
        << OptionalCell(c.delta_converged.sd);
    for (std::size_t i = 0; i < n; ++i) {
      out << ',' << (i < c.nash.size() ? FormatDouble(c.nash[i]) : "");
    }
    for (std::size_t i = 0; i < n; ++i) {
      out << ',' << (i < c.monopoly.size() ? FormatDouble(c.monopoly[i]) : "");
    }
    out << '\n';
  }
}

std::string FormatReportTable(const ExperimentReport& report) {
  auto num = [](const std::optional<double>& x, const char* fmt) {
    if (!x) return std::string("-");
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, fmt, *x);
    return std::string(buffer);
  };
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof line, "%-6s %-28s %5s %9s %12s %17s %17s\n",
                "cell", "assignment", "runs", "converged", "mean stage",
                "delta (all)", "delta (conv.)");
  out << line;
  for (const CellReport& c : report.cells) {
    std::string assignment;
    for (const auto& [param, value] : c.assignment) {
      if (!assignment.empty()) assignment += ' ';
      assignment += param + "=" + value.dump();
    }
    if (assignment.empty()) assignment = "-";
    const std::string all = num(c.delta_all.mean, "%.4f") + " +/- " +
                            num(c.delta_all.sd, "%.4f");
    const std::string conv = num(c.delta_converged.mean, "%.4f") + " +/- " +
                             num(c.delta_converged.sd, "%.4f");
    std::snprintf(line, sizeof line, "%-6d %-28s %5d %4d/%-4d %12s %17s %17s\n",
                  c.cell, assignment.c_str(), c.runs, c.converged, c.runs,
                  num(c.mean_convergence_stage, "%.0f").c_str(), all.c_str(),
                  conv.c_str());
    out << line;
  }
  if (!report.cells.empty() && !report.cells[0].nash.empty()) {
    out << "benchmarks (cell " << report.cells[0].cell << "): nash";
    for (double p : report.cells[0].nash) out << ' ' << FormatDouble(p);
    out << "; monopoly";
    for (double p : report.cells[0].monopoly) out << ' ' << FormatDouble(p);
    out << '\n';
  }
  out << "runs computed " << report.computed << ", reused " << report.reused
      << "; artifacts in " << report.dir << '\n';
  return out.str();
}

std::vector<RunAnalysis> AnalyzeArtifacts(const std::string& path,
                                          double tail_fraction) {
  Require(fs::exists(path), "no artifacts at " + path);
  std::vector<fs::path> dirs;
  if (fs::is_regular_file(fs::path(path) / "summary.csv")) {
    dirs.emplace_back(path);
  } else {
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().filename() == "summary.csv") {
        dirs.push_back(entry.path().parent_path());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  Require(!dirs.empty(), "no run summaries under " + path);

  std::vector<RunAnalysis> out;
  for (const fs::path& dir : dirs) {
    RunAnalysis a;
    a.dir = dir.string();
    {
      std::istringstream in(ReadFile((dir / "summary.csv").string()));
      a.persisted = ReadSummaryCsv(in);
    }
    const fs::path trace_path = dir / "trace.jsonl";
    a.has_trace = fs::exists(trace_path);
    if (a.has_trace) {
      const ExperimentConfig cfg =
          LoadConfig((dir / "resolved-config.json").string());
      const PreparedGame game = PrepareGame(cfg);
      std::ifstream in(trace_path);
      const Trace trace = ReadTraceJsonl(in);
      const SimConfig sim = MakeSimConfig(cfg, game, a.persisted.seed);
      const MetricsSummary recomputed = SummarizeTrace(
          trace, game.stage, EffectiveTailWindow(sim), game.benchmarks,
          a.persisted.seed, a.persisted.clamped_rewards);
      a.summary_matches = recomputed == a.persisted;
      const DiscreteGame& table = game.stage.table();
      for (int i = 0; i < table.num_players(); ++i) {
        const auto [lo, hi] = table.PayoffRange(i);
        a.payoff_range = std::max(a.payoff_range, hi - lo);
        if (!trace.empty()) a.regret.push_back(ComputeRegret(trace, game.stage, i));
      }
      if (std::floor(tail_fraction * static_cast<double>(trace.size())) >= 1) {
        a.cce_violation = CheckCce(
            table, EmpiricalJointDistribution(trace, table, tail_fraction));
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

ProbeResult RunProbe(const ExperimentConfig& config, std::uint64_t seed_value,
                     int length) {
  Require(config.sweep.empty(), "probe takes a config without a sweep");
  const PreparedGame game = PrepareGame(config);
  const SimConfig sim = MakeSimConfig(config, game, seed_value);
  const EpisodeResult result = SimulateEpisode(sim, {.record_trace = false});
  return DeviationProbe(result, sim, length);
}

}  // namespace collusion
