#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/error.hpp"
#include "ogmd/game.hpp"
#include "ogmd/util.hpp"

namespace ogmd {

/// One synchronous round as recorded by the runners: the pre-step state, the
/// mixed duals, the value feedback and the stepsizes in force. Bandit runs
/// additionally carry the drawn direction, the query radius and the played
/// (perturbed) actions.
struct TrajectoryRound {
  int t = 0;
  ActionProfile actions;                     // x_{i,t}
  std::vector<Eigen::VectorXd> duals;        // λ_{i,t}
  std::vector<Eigen::VectorXd> mixed_duals;  // λ̃_{i,t}
  std::vector<double> costs;                 // J value feedback per player
  std::vector<Eigen::VectorXd> constraints;  // g value feedback per player
  double alpha = 1.0, beta = 1.0, gamma = 1.0;
  // bandit-only
  std::vector<int> direction;        // signed-axis index in [0, 2 n_i)
  std::vector<double> query_radius;  // δ_{i,t}
  ActionProfile played_actions;      // x̂_{i,t}
};

/// Round-by-round record of a run; the unit of persistence and replay.
/// The CSV serialization is fixed-width (players with n_i below the maximum
/// leave cells empty), self-describing through its first comment line, and
/// byte-deterministic: doubles print as %.17g, so writing and re-reading a
/// log reproduces the exact in-memory values.
class TrajectoryLog {
 public:
  TrajectoryLog() = default;
  TrajectoryLog(std::vector<int> dims, int constraint_dim, bool bandit, std::uint64_t seed)
      : dims_(std::move(dims)), m_(constraint_dim), bandit_(bandit), seed_(seed) {}

  int n_players() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& action_dims() const { return dims_; }
  int constraint_dim() const { return m_; }
  bool is_bandit() const { return bandit_; }
  std::uint64_t seed() const { return seed_; }

  int rounds() const { return static_cast<int>(rounds_.size()); }
  const std::vector<TrajectoryRound>& data() const { return rounds_; }
  const TrajectoryRound& round(int t) const {  // t is 1-based
    if (t < 1 || t > rounds()) throw LogIntegrityError("round index out of range");
    return rounds_[static_cast<std::size_t>(t - 1)];
  }

  /// Actions the metrics run on: the perturbed query profile for bandit
  /// logs, the base profile otherwise.
  const ActionProfile& played(int t) const {
    const TrajectoryRound& r = round(t);
    return bandit_ ? r.played_actions : r.actions;
  }

  void add_round(TrajectoryRound r) {
    if (r.t != rounds() + 1) throw LogIntegrityError("rounds must be appended in order");
    rounds_.push_back(std::move(r));
  }

  void to_csv(std::ostream& out) const {
    int k = max_dim();
    out << "# ogmd-trajectory v1 players=" << n_players() << " m=" << m_
        << " bandit=" << (bandit_ ? 1 : 0) << " seed=" << seed_ << " dims=";
    for (std::size_t i = 0; i < dims_.size(); ++i)
      out << (i ? "," : "") << dims_[i];
    out << "\n";
    out << "t,i,alpha,beta,gamma,cost";
    for (int j = 0; j < k; ++j) out << ",x" << j;
    for (int j = 0; j < m_; ++j) out << ",lam" << j;
    for (int j = 0; j < m_; ++j) out << ",lmix" << j;
    for (int j = 0; j < m_; ++j) out << ",g" << j;
    if (bandit_) {
      out << ",w,delta";
      for (int j = 0; j < k; ++j) out << ",q" << j;
    }
    out << "\n";
    for (const auto& r : rounds_) {
      for (int i = 0; i < n_players(); ++i) {
        std::size_t ii = static_cast<std::size_t>(i);
        out << r.t << ',' << (i + 1) << ',' << format_double(r.alpha) << ','
            << format_double(r.beta) << ',' << format_double(r.gamma) << ','
            << format_double(r.costs[ii]);
        write_block(out, r.actions[ii], k);
        write_block(out, r.duals[ii], m_);
        write_block(out, r.mixed_duals[ii], m_);
        write_block(out, r.constraints[ii], m_);
        if (bandit_) {
          out << ',' << r.direction[ii] << ',' << format_double(r.query_radius[ii]);
          write_block(out, r.played_actions[ii], k);
        }
        out << "\n";
      }
    }
  }

  std::string to_csv_string() const {
    std::ostringstream out;
    to_csv(out);
    return out.str();
  }

  static TrajectoryLog from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ogmd-trajectory v1 ", 0) != 0)
      throw LogIntegrityError("trajectory file lacks the v1 meta line");
    TrajectoryLog log;
    {
      std::istringstream meta(line.substr(2));
      std::string token;
      int players = 0;
      while (meta >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        std::string key = token.substr(0, eq), value = token.substr(eq + 1);
        if (key == "players") players = std::stoi(value);
        if (key == "m") log.m_ = std::stoi(value);
        if (key == "bandit") log.bandit_ = value == "1";
        if (key == "seed") log.seed_ = std::stoull(value);
        if (key == "dims") {
          std::istringstream ds(value);
          std::string d;
          while (std::getline(ds, d, ',')) log.dims_.push_back(std::stoi(d));
        }
      }
      if (players <= 0 || static_cast<int>(log.dims_.size()) != players || log.m_ <= 0)
        throw LogIntegrityError("trajectory meta line is inconsistent");
    }
    if (!std::getline(in, line)) throw LogIntegrityError("trajectory file lacks a header");

    const int n = log.n_players();
    const int k = log.max_dim();
    TrajectoryRound current;
    int filled = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells = split_csv(line);
      std::size_t expected = 6 + static_cast<std::size_t>(k + 3 * log.m_) +
                             (log.bandit_ ? 2 + static_cast<std::size_t>(k) : 0);
      if (cells.size() != expected) throw LogIntegrityError("trajectory row has wrong arity");
      int t = std::stoi(cells[0]);
      int player = std::stoi(cells[1]) - 1;
      if (player != filled) throw LogIntegrityError("trajectory rows out of order");
      if (filled == 0) {
        current = TrajectoryRound{};
        current.t = t;
        current.alpha = std::stod(cells[2]);
        current.beta = std::stod(cells[3]);
        current.gamma = std::stod(cells[4]);
        current.actions.resize(static_cast<std::size_t>(n));
        current.duals.resize(static_cast<std::size_t>(n));
        current.mixed_duals.resize(static_cast<std::size_t>(n));
        current.costs.resize(static_cast<std::size_t>(n));
        current.constraints.resize(static_cast<std::size_t>(n));
        if (log.bandit_) {
          current.direction.resize(static_cast<std::size_t>(n));
          current.query_radius.resize(static_cast<std::size_t>(n));
          current.played_actions.resize(static_cast<std::size_t>(n));
        }
      } else if (t != current.t) {
        throw LogIntegrityError("trajectory round index changed mid-round");
      }
      std::size_t ii = static_cast<std::size_t>(player);
      int ni = log.dims_[ii];
      std::size_t at = 5;
      current.costs[ii] = std::stod(cells[at++]);
      current.actions[ii] = read_block(cells, at, ni, k);
      current.duals[ii] = read_block(cells, at, log.m_, log.m_);
      current.mixed_duals[ii] = read_block(cells, at, log.m_, log.m_);
      current.constraints[ii] = read_block(cells, at, log.m_, log.m_);
      if (log.bandit_) {
        current.direction[ii] = std::stoi(cells[at++]);
        current.query_radius[ii] = std::stod(cells[at++]);
        current.played_actions[ii] = read_block(cells, at, ni, k);
      }
      if (++filled == n) {
        filled = 0;
        log.add_round(std::move(current));
        current = TrajectoryRound{};
      }
    }
    if (filled != 0) throw LogIntegrityError("trajectory file ends mid-round");
    return log;
  }

 private:
  int max_dim() const {
    int k = 0;
    for (int d : dims_) k = std::max(k, d);
    return k;
  }

  static void write_block(std::ostream& out, const Eigen::VectorXd& v, int width) {
    for (int j = 0; j < width; ++j) {
      out << ',';
      if (j < v.size()) out << format_double(v[j]);
    }
  }

  static Eigen::VectorXd read_block(const std::vector<std::string>& cells, std::size_t& at,
                                    int used, int width) {
    Eigen::VectorXd v(used);
    for (int j = 0; j < width; ++j, ++at) {
      if (j < used) {
        if (cells[at].empty()) throw LogIntegrityError("missing value in trajectory row");
        v[j] = std::stod(cells[at]);
      }
    }
    return v;
  }

  static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(std::move(cell));
        cell.clear();
      } else {
        cell.push_back(c);
      }
    }
    cells.push_back(std::move(cell));
    return cells;
  }

  std::vector<int> dims_;
  int m_ = 0;
  bool bandit_ = false;
  std::uint64_t seed_ = 0;
  std::vector<TrajectoryRound> rounds_;
};

/// Run manifest: everything needed to rebuild the experiment and verify the
/// persisted logs. Serialized as manifest.json next to the trajectory CSVs.
struct RunManifest {
  int schema_version = 1;
  std::string library_version;
  nlohmann::json config;
  std::string config_hash;
  std::string learner;  // "full" | "bandit"
  int horizon = 0;
  double sigma = 0.0, L = 0.0, M = 0.0, mu_limit = 0.0, lambda_cap = 0.0;
  std::string rng;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> logs;  // (filename, fnv1a64 hex)

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["library_version"] = library_version;
    j["config"] = config;
    j["config_hash"] = config_hash;
    j["learner"] = learner;
    j["horizon"] = horizon;
    j["bounds"] = {{"sigma", sigma}, {"L", L}, {"M", M},
                   {"mu_limit", mu_limit}, {"lambda_cap", lambda_cap}};
    j["rng"] = rng;
    j["seeds"] = seeds;
    nlohmann::json logs_json = nlohmann::json::array();
    for (const auto& [name, hash] : logs)
      logs_json.push_back({{"file", name}, {"fnv1a64", hash}});
    j["logs"] = logs_json;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
      m.schema_version = j.at("schema_version").get<int>();
      m.library_version = j.at("library_version").get<std::string>();
      m.config = j.at("config");
      m.config_hash = j.at("config_hash").get<std::string>();
      m.learner = j.at("learner").get<std::string>();
      m.horizon = j.at("horizon").get<int>();
      m.sigma = j.at("bounds").at("sigma").get<double>();
      m.L = j.at("bounds").at("L").get<double>();
      m.M = j.at("bounds").at("M").get<double>();
      m.mu_limit = j.at("bounds").at("mu_limit").get<double>();
      m.lambda_cap = j.at("bounds").at("lambda_cap").get<double>();
      m.rng = j.at("rng").get<std::string>();
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      for (const auto& entry : j.at("logs"))
        m.logs.emplace_back(entry.at("file").get<std::string>(),
                            entry.at("fnv1a64").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw LogIntegrityError(std::string("manifest parse failure: ") + e.what());
    }
    if (m.schema_version != 1) throw LogIntegrityError("unsupported manifest schema version");
    return m;
  }
};

}  // namespace ogmd
