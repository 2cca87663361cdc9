#include "stas/eval/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <yaml-cpp/yaml.h>

#include "stas/core/errors.hpp"
#include "stas/core/init.hpp"
#include "stas/core/ops.hpp"
#include "stas/core/random.hpp"
#include "stas/trainer/config_io.hpp"

namespace stas::eval {

const char* to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::Planted: return "planted";
    case SyntheticKind::SingleCell: return "single_cell";
    case SyntheticKind::Zero: return "zero";
  }
  return "?";
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "planted") return SyntheticKind::Planted;
  if (name == "single_cell") return SyntheticKind::SingleCell;
  if (name == "zero") return SyntheticKind::Zero;
  throw ConfigError("synthetic.kind", "unknown kind '" + name + "'");
}

namespace {

SyntheticEpisode make_episode(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticEpisode ep;
  auto& tr = ep.trajectory;
  tr.scenario = "synthetic";
  tr.agents = spec.agents;
  tr.state_dim = SyntheticSpec::kStateDim;
  tr.action_count = SyntheticSpec::kActions;
  tr.seed = seed;
  const std::size_t cells = spec.steps * spec.agents;
  tr.states.resize(cells * SyntheticSpec::kStateDim);
  tr.actions.resize(cells);
  ep.rewards.assign(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    double* s = tr.states.data() + c * SyntheticSpec::kStateDim;
    for (std::size_t k = 0; k < SyntheticSpec::kStateDim; ++k) s[k] = rng.uniform();
    tr.actions[c] = static_cast<int>(rng.uniform_int(SyntheticSpec::kActions));
    const bool hit = tr.actions[c] == 0;
    switch (spec.kind) {
      case SyntheticKind::Planted: ep.rewards[c] = hit && s[0] > 0.5 && s[1] > 0.5 ? 1.0 : 0.0; break;
      case SyntheticKind::SingleCell: ep.rewards[c] = c == 0 && hit ? 1.0 : 0.0; break;
      case SyntheticKind::Zero: break;
    }
  }
  // Rewards are 0 or 1, so the sum is exact.
  double sum = 0.0;
  for (double r : ep.rewards) sum += r;
  tr.episodic_return = sum;
  tr.success = sum > 0.0;
  return ep;
}

std::vector<const envs::Trajectory*> pointers(const std::vector<SyntheticEpisode>& eps) {
  std::vector<const envs::Trajectory*> out;
  for (const auto& e : eps) out.push_back(&e.trajectory);
  return out;
}

double split_loss(const decomposer::Decomposer& model, const std::vector<SyntheticEpisode>& eps,
                  std::size_t k, Rng& rng) {
  if (eps.empty()) return 0.0;
  const auto batch = pointers(eps);
  const auto credits = model.predict_credits(batch, k, rng);
  double sum = 0.0;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const double d = credits[e].total - eps[e].trajectory.episodic_return;
    sum += d * d;
  }
  return sum / static_cast<double>(eps.size());
}

}  // namespace

SyntheticTask SyntheticTask::generate(const SyntheticSpec& spec) {
  if (spec.agents == 0) throw ConfigError("synthetic.agents", "must be at least 1");
  if (spec.steps == 0) throw ConfigError("synthetic.steps", "must be at least 1");
  if (spec.train_episodes == 0) throw ConfigError("synthetic.train_episodes", "must be at least 1");
  SyntheticTask task;
  task.spec = spec;
  for (std::size_t e = 0; e < spec.train_episodes; ++e) {
    task.train.push_back(make_episode(spec, derive_seed(derive_seed(spec.seed, 0), e)));
  }
  for (std::size_t e = 0; e < spec.heldout_episodes; ++e) {
    task.heldout.push_back(make_episode(spec, derive_seed(derive_seed(spec.seed, 1), e)));
  }
  return task;
}

SyntheticReport run_synthetic(const SyntheticTask& task, const SyntheticTraining& training) {
  decomposer::DecomposerConfig mc = training.model;
  mc.state_dim = SyntheticSpec::kStateDim;
  mc.action_count = SyntheticSpec::kActions;
  mc.horizon = task.spec.steps;
  mc.validate();
  decomposer::Decomposer model(mc, derive_seed(training.seed, 10));
  auto params = model.parameters();
  auto opt = OptimizerState::for_params(params, training.optimizer);
  Rng rng(derive_seed(training.seed, 11));

  SyntheticReport report;
  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch_size = std::min(training.batch, task.train.size());
  std::vector<const envs::Trajectory*> batch(batch_size);
  while (report.steps < training.max_steps) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (training.time_budget_seconds > 0.0 && elapsed >= training.time_budget_seconds) break;
    if (training.decay_learning_rate) {
      double progress = static_cast<double>(report.steps) / static_cast<double>(training.max_steps);
      if (training.time_budget_seconds > 0.0) {
        progress = std::max(progress, elapsed / training.time_budget_seconds);
      }
      opt.config.learning_rate = training.optimizer.learning_rate * (1.0 - progress);
    }
    for (auto& b : batch) b = &task.train[rng.uniform_int(task.train.size())].trajectory;
    Tape tape;
    const Tensor loss = model.decomposition_loss(tape, batch, mc.k_samples, rng);
    optimizer_step(params, backward(loss, tape), opt);
    ++report.steps;
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::size_t k = training.eval_k ? training.eval_k : mc.k_samples;
  Rng eval_rng(derive_seed(training.seed, 12));
  report.final_loss = split_loss(model, task.train, k, eval_rng);
  report.heldout_loss = split_loss(model, task.heldout, k, eval_rng);

  if (!task.heldout.empty()) {
    report.heldout_credits = model.predict_credits(pointers(task.heldout), k, eval_rng);
    std::vector<double> x, y;
    std::size_t top = 0;
    for (std::size_t e = 0; e < task.heldout.size(); ++e) {
      const auto& m = report.heldout_credits[e];
      x.insert(x.end(), m.values.begin(), m.values.end());
      y.insert(y.end(), task.heldout[e].rewards.begin(), task.heldout[e].rewards.end());
      bool strict = true;
      for (std::size_t c = 1; c < m.values.size(); ++c) strict = strict && m.values[0] > m.values[c];
      if (strict) ++top;
    }
    report.correlation = pearson(x, y);
    report.first_cell_top_fraction = static_cast<double>(top) / static_cast<double>(task.heldout.size());
  }
  return report;
}

void write_synthetic_csv(std::ostream& out, const SyntheticTask& task, const SyntheticReport& report,
                         const std::string& config_hash) {
  out << "# config_hash=" << config_hash << '\n';
  out << "episode,t,agent,credit,true_reward\n";
  char buf[96];
  for (std::size_t e = 0; e < report.heldout_credits.size(); ++e) {
    const auto& m = report.heldout_credits[e];
    for (std::size_t t = 0; t < m.steps; ++t)
      for (std::size_t i = 0; i < m.agents; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", m.at(t, i), task.heldout[e].rewards[t * m.agents + i]);
        out << e << ',' << t << ',' << i << ',' << buf << '\n';
      }
  }
}

namespace {

template <class T>
T scalar(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, "malformed value");
  }
}

YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config", std::string("YAML syntax: ") + e.what());
  }
}

SyntheticConfig build(YAML::Node root, const std::vector<std::string>& overrides) {
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("", "config must be a mapping of sections");
  std::vector<std::string> model_overrides;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError(o, "override must look like section.key=value");
    }
    if (o.substr(0, dot) == "synthetic") {
      if (!root["synthetic"]) root["synthetic"] = YAML::Node(YAML::NodeType::Map);
      root["synthetic"][o.substr(dot + 1, eq - dot - 1)] = load_yaml(o.substr(eq + 1));
    } else {
      model_overrides.push_back(o);
    }
  }

  SyntheticConfig c;
  YAML::Node model_root(YAML::NodeType::Map);
  for (auto it = root.begin(); it != root.end(); ++it) {
    const auto name = it->first.as<std::string>();
    if (name == "synthetic") continue;
    if (name != "decomposer") throw ConfigError(name, "unknown section");
    model_root[name] = it->second;
  }
  if (const YAML::Node syn = root["synthetic"]) {
    if (!syn.IsMap()) throw ConfigError("synthetic", "section must be a mapping");
    for (auto it = syn.begin(); it != syn.end(); ++it) {
      const auto key = it->first.as<std::string>();
      const std::string f = "synthetic." + key;
      const YAML::Node v = it->second;
      if (key == "kind") c.spec.kind = synthetic_kind_from_string(scalar<std::string>(v, f));
      else if (key == "agents") c.spec.agents = scalar<std::size_t>(v, f);
      else if (key == "steps") c.spec.steps = scalar<std::size_t>(v, f);
      else if (key == "train_episodes") c.spec.train_episodes = scalar<std::size_t>(v, f);
      else if (key == "heldout_episodes") c.spec.heldout_episodes = scalar<std::size_t>(v, f);
      else if (key == "seed") c.spec.seed = c.training.seed = scalar<std::uint64_t>(v, f);
      else if (key == "batch") c.training.batch = scalar<std::size_t>(v, f);
      else if (key == "max_steps") c.training.max_steps = scalar<std::size_t>(v, f);
      else if (key == "time_budget_seconds") c.training.time_budget_seconds = scalar<double>(v, f);
      else if (key == "eval_k") c.training.eval_k = scalar<std::size_t>(v, f);
      else if (key == "decay_learning_rate") c.training.decay_learning_rate = scalar<bool>(v, f);
      else throw ConfigError(f, "unknown key");
    }
  }
  // The decomposer keys share the training-config parser.
  model_root["env"]["scenario"] = "alice_bob";
  YAML::Emitter em;
  em << model_root;
  const auto tc = trainer::parse_train_config(em.c_str(), model_overrides);
  c.training.model = tc.decomposer;
  c.training.optimizer = tc.decomposer_optimizer;
  c.training.model.state_dim = SyntheticSpec::kStateDim;
  c.training.model.action_count = SyntheticSpec::kActions;
  c.training.model.horizon = c.spec.steps;
  if (c.spec.agents == 0) throw ConfigError("synthetic.agents", "must be at least 1");
  if (c.spec.steps == 0) throw ConfigError("synthetic.steps", "must be at least 1");
  if (c.spec.train_episodes == 0) throw ConfigError("synthetic.train_episodes", "must be at least 1");
  if (c.training.batch == 0) throw ConfigError("synthetic.batch", "must be at least 1");
  c.training.model.validate();
  return c;
}

}  // namespace

SyntheticConfig parse_synthetic_config(const std::string& text, const std::vector<std::string>& overrides) {
  return build(load_yaml(text), overrides);
}

SyntheticConfig load_synthetic_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return build(load_yaml(ss.str()), overrides);
}

std::string synthetic_config_hash(const SyntheticConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "kind=" << to_string(c.spec.kind) << " agents=" << c.spec.agents << " steps=" << c.spec.steps
    << " train=" << c.spec.train_episodes << " heldout=" << c.spec.heldout_episodes
    << " seed=" << c.spec.seed << " batch=" << c.training.batch << " max_steps=" << c.training.max_steps
    << " budget=" << c.training.time_budget_seconds << " decay=" << c.training.decay_learning_rate << " eval_k=" << c.training.eval_k
    << " lr=" << c.training.optimizer.learning_rate << " clip=" << c.training.optimizer.max_grad_norm
    << " k=" << c.training.model.k_samples << ' ' << c.training.model.describe_architecture();
  return hex64(fnv1a64(s.str()));
}

}  // namespace stas::eval
