#include "stas/envs/trajectory_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stas/core/errors.hpp"

namespace stas::envs {

namespace {

constexpr const char* kMagic = "stas-trajectory";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

double parse_hex(const std::string& token) {
  double v = 0.0;
  auto r = std::from_chars(token.data(), token.data() + token.size(), v, std::chars_format::hex);
  if (r.ec != std::errc() || r.ptr != token.data() + token.size()) {
    throw FormatError("bad float '" + token + "'");
  }
  return v;
}

std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trajectory record truncated");
  return line;
}

// Reads "<key> <value>" and returns the value text.
std::string field(std::istream& in, const std::string& key) {
  const std::string line = next_line(in);
  if (line.rfind(key + " ", 0) != 0) throw FormatError("expected '" + key + "', got '" + line + "'");
  return line.substr(key.size() + 1);
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("bad integer '" + s + "'");
  return v;
}

}  // namespace

void write_trajectory(std::ostream& out, const Trajectory& tr) {
  const std::size_t steps = tr.length();
  out << kMagic << ' ' << kVersion << '\n'
      << "scenario " << tr.scenario << '\n'
      << "agents " << tr.agents << '\n'
      << "steps " << steps << '\n'
      << "state_dim " << tr.state_dim << '\n'
      << "action_count " << tr.action_count << '\n'
      << "seed " << tr.seed << '\n'
      << "config_hash " << tr.config_hash << '\n'
      << "return " << hex(tr.episodic_return) << '\n'
      << "success " << (tr.success ? 1 : 0) << '\n';
  const std::size_t row = tr.agents * tr.state_dim;
  for (std::size_t t = 0; t < steps; ++t) {
    out << "s " << t;
    for (std::size_t k = 0; k < row; ++k) out << ' ' << hex(tr.states[t * row + k]);
    out << "\na " << t;
    for (std::size_t i = 0; i < tr.agents; ++i) out << ' ' << tr.action(t, i);
    out << '\n';
    if (tr.per_step_true_rewards) out << "r " << t << ' ' << hex((*tr.per_step_true_rewards)[t]) << '\n';
  }
  out << "end\n";
}

std::optional<Trajectory> read_trajectory(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) break;
  }
  if (!in) return std::nullopt;
  if (line != std::string(kMagic) + " " + std::to_string(kVersion)) {
    throw FormatError("not a trajectory record: '" + line + "'");
  }
  Trajectory tr;
  tr.scenario = field(in, "scenario");
  tr.agents = to_u64(field(in, "agents"));
  const std::size_t steps = to_u64(field(in, "steps"));
  tr.state_dim = to_u64(field(in, "state_dim"));
  tr.action_count = to_u64(field(in, "action_count"));
  tr.seed = to_u64(field(in, "seed"));
  tr.config_hash = field(in, "config_hash");
  tr.episodic_return = parse_hex(field(in, "return"));
  tr.success = to_u64(field(in, "success")) != 0;

  const std::size_t row = tr.agents * tr.state_dim;
  tr.states.reserve(steps * row);
  tr.actions.reserve(steps * tr.agents);
  for (std::size_t t = 0; t < steps; ++t) {
    std::istringstream s(next_line(in));
    std::string tag, token;
    std::size_t index = 0;
    if (!(s >> tag >> index) || tag != "s" || index != t) throw FormatError("bad state record");
    for (std::size_t k = 0; k < row; ++k) {
      if (!(s >> token)) throw FormatError("short state record");
      tr.states.push_back(parse_hex(token));
    }
    std::istringstream a(next_line(in));
    if (!(a >> tag >> index) || tag != "a" || index != t) throw FormatError("bad action record");
    for (std::size_t i = 0; i < tr.agents; ++i) {
      int act = 0;
      if (!(a >> act)) throw FormatError("short action record");
      if (act < 0 || static_cast<std::size_t>(act) >= tr.action_count) {
        throw FormatError("action out of range");
      }
      tr.actions.push_back(act);
    }
    if (in.peek() == 'r') {
      std::istringstream r(next_line(in));
      if (!(r >> tag >> index >> token) || index != t) throw FormatError("bad reward record");
      if (!tr.per_step_true_rewards) {
        if (t != 0) throw FormatError("reward records must cover every step");
        tr.per_step_true_rewards.emplace();
      }
      tr.per_step_true_rewards->push_back(parse_hex(token));
    } else if (tr.per_step_true_rewards) {
      throw FormatError("reward records must cover every step");
    }
  }
  if (next_line(in) != "end") throw FormatError("missing end marker");
  return tr;
}

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  for (const auto& t : trajectories) write_trajectory(out, t);
  if (!out) throw FormatError("write failed for " + path);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<Trajectory> out;
  while (auto t = read_trajectory(in)) out.push_back(std::move(*t));
  return out;
}

}  // namespace stas::envs
