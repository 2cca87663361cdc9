#include "stas/trainer/config_io.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/init.hpp"

namespace stas::trainer {

namespace {

using envs::Scenario;

struct Field {
  std::string section;
  std::string key;
  // Which scenarios list this key in a snapshot; empty means all.
  std::vector<Scenario> only;
  std::function<void(TrainConfig&, const YAML::Node&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T scalar_as(const YAML::Node& node, const std::string& field, const char* what) {
  if (!node.IsScalar()) throw ConfigError(field, std::string("expected ") + what);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, std::string("expected ") + what + ", got '" + node.Scalar() + "'");
  }
}

template <class Get>
Field size_field(std::string section, std::string key, Get get, std::vector<Scenario> only = {}) {
  return {std::move(section), std::move(key), std::move(only),
          [get](TrainConfig& c, const YAML::Node& n, const std::string& f) {
            const long long v = scalar_as<long long>(n, f, "a non-negative integer");
            if (v < 0) throw ConfigError(f, "must be non-negative");
            get(c) = static_cast<std::size_t>(v);
          },
          [get](const TrainConfig& c) { return std::to_string(get(const_cast<TrainConfig&>(c))); }};
}

template <class Get>
Field double_field(std::string section, std::string key, Get get, std::vector<Scenario> only = {}) {
  return {std::move(section), std::move(key), std::move(only),
          [get](TrainConfig& c, const YAML::Node& n, const std::string& f) {
            get(c) = scalar_as<double>(n, f, "a number");
          },
          [get](const TrainConfig& c) { return shortest(get(const_cast<TrainConfig&>(c))); }};
}

template <class Get>
Field bool_field(std::string section, std::string key, Get get) {
  return {std::move(section), std::move(key), {},
          [get](TrainConfig& c, const YAML::Node& n, const std::string& f) {
            get(c) = scalar_as<bool>(n, f, "true or false");
          },
          [get](const TrainConfig& c) {
            return std::string(get(const_cast<TrainConfig&>(c)) ? "true" : "false");
          }};
}

template <class Get, class Parse, class Show>
Field enum_field(std::string section, std::string key, Get get, Parse parse, Show show) {
  return {std::move(section), std::move(key), {},
          [get, parse](TrainConfig& c, const YAML::Node& n, const std::string& f) {
            const auto name = scalar_as<std::string>(n, f, "a name");
            try {
              get(c) = parse(name);
            } catch (const ConfigError& e) {
              throw ConfigError(f, "unknown value '" + name + "'");
            }
          },
          [get, show](const TrainConfig& c) {
            return std::string(show(get(const_cast<TrainConfig&>(c))));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    const std::vector<Scenario> grid{Scenario::AliceBob};
    const std::vector<Scenario> particle{Scenario::CooperativeNavigation, Scenario::PredatorPrey};
    const std::vector<Scenario> pp{Scenario::PredatorPrey};
    const std::vector<Scenario> cn{Scenario::CooperativeNavigation};
    std::vector<Field> f;
    // env.scenario is handled separately: it picks the base defaults.
    f.push_back(size_field("env", "agents", [](TrainConfig& c) -> auto& { return c.env.agents; }));
    f.push_back(size_field("env", "horizon", [](TrainConfig& c) -> auto& { return c.env.horizon; }));
    f.push_back(double_field("env", "gamma", [](TrainConfig& c) -> auto& { return c.env.gamma; }));
    f.push_back(double_field("env", "wall_penalty",
                             [](TrainConfig& c) -> auto& { return c.env.alice_bob.wall_penalty; }, grid));
    f.push_back(double_field("env", "treasure_bonus",
                             [](TrainConfig& c) -> auto& { return c.env.alice_bob.treasure_bonus; },
                             grid));
    f.push_back(double_field("env", "damping",
                             [](TrainConfig& c) -> auto& { return c.env.particle.damping; }, particle));
    f.push_back(double_field("env", "thrust",
                             [](TrainConfig& c) -> auto& { return c.env.particle.thrust; }, particle));
    f.push_back(double_field("env", "agent_radius",
                             [](TrainConfig& c) -> auto& { return c.env.particle.agent_radius; },
                             particle));
    f.push_back(double_field("env", "collision_penalty",
                             [](TrainConfig& c) -> auto& { return c.env.particle.collision_penalty; },
                             cn));
    f.push_back(size_field("env", "landmarks",
                           [](TrainConfig& c) -> auto& { return c.env.particle.landmarks; }, cn));
    f.push_back(double_field("env", "cover_radius",
                             [](TrainConfig& c) -> auto& { return c.env.particle.cover_radius; }, cn));
    f.push_back(size_field("env", "preys", [](TrainConfig& c) -> auto& { return c.env.particle.preys; },
                           pp));
    f.push_back(double_field("env", "prey_thrust",
                             [](TrainConfig& c) -> auto& { return c.env.particle.prey_thrust; }, pp));
    f.push_back(double_field("env", "capture_radius",
                             [](TrainConfig& c) -> auto& { return c.env.particle.capture_radius; }, pp));
    f.push_back(double_field("env", "capture_bonus",
                             [](TrainConfig& c) -> auto& { return c.env.particle.capture_bonus; }, pp));
    f.push_back(double_field("env", "distance_penalty",
                             [](TrainConfig& c) -> auto& { return c.env.particle.distance_penalty; },
                             pp));

    auto dec = [](auto member) {
      return [member](TrainConfig& c) -> auto& { return c.decomposer.*member; };
    };
    using DC = decomposer::DecomposerConfig;
    f.push_back(size_field("decomposer", "d_model", dec(&DC::d_model)));
    f.push_back(size_field("decomposer", "heads", dec(&DC::heads)));
    f.push_back(size_field("decomposer", "ff_width", dec(&DC::ff_width)));
    f.push_back(size_field("decomposer", "layers", dec(&DC::layers)));
    f.push_back(size_field("decomposer", "k_samples", dec(&DC::k_samples)));
    f.push_back(enum_field(
        "decomposer", "mask_mode", dec(&DC::mask_mode),
        [](const std::string& s) { return mask_mode_from_string(s); },
        [](MaskMode m) { return to_string(m); }));
    f.push_back(enum_field(
        "decomposer", "sampling", dec(&DC::sampling),
        [](const std::string& s) { return decomposer::coalition_sampling_from_string(s); },
        [](decomposer::CoalitionSampling m) { return decomposer::to_string(m); }));
    f.push_back(bool_field("decomposer", "resample_per_step", dec(&DC::resample_per_step)));
    f.push_back(enum_field(
        "decomposer", "positional", dec(&DC::positional),
        [](const std::string& s) { return decomposer::positional_encoding_from_string(s); },
        [](decomposer::PositionalEncoding m) { return decomposer::to_string(m); }));
    f.push_back(double_field("decomposer", "learning_rate",
                             [](TrainConfig& c) -> auto& { return c.decomposer_optimizer.learning_rate; }));
    f.push_back(double_field("decomposer", "max_grad_norm",
                             [](TrainConfig& c) -> auto& { return c.decomposer_optimizer.max_grad_norm; }));

    auto pol = [](auto member) {
      return [member](TrainConfig& c) -> auto& { return c.policy.*member; };
    };
    using PC = policy::PolicyConfig;
    f.push_back(size_field("policy", "hidden", pol(&PC::hidden)));
    f.push_back(double_field("policy", "lambda", pol(&PC::lambda)));
    f.push_back(double_field("policy", "clip", pol(&PC::clip)));
    f.push_back(size_field("policy", "epochs", pol(&PC::epochs)));
    f.push_back(size_field("policy", "minibatch_size", pol(&PC::minibatch_size)));
    f.push_back(double_field("policy", "entropy_coef", pol(&PC::entropy_coef)));
    f.push_back(double_field("policy", "value_coef", pol(&PC::value_coef)));
    f.push_back(double_field("policy", "actor_lr",
                             [](TrainConfig& c) -> auto& { return c.policy.actor_optimizer.learning_rate; }));
    f.push_back(double_field("policy", "actor_max_grad_norm",
                             [](TrainConfig& c) -> auto& { return c.policy.actor_optimizer.max_grad_norm; }));
    f.push_back(double_field("policy", "critic_lr",
                             [](TrainConfig& c) -> auto& { return c.policy.critic_optimizer.learning_rate; }));
    f.push_back(double_field("policy", "critic_max_grad_norm",
                             [](TrainConfig& c) -> auto& { return c.policy.critic_optimizer.max_grad_norm; }));

    auto tr = [](auto member) { return [member](TrainConfig& c) -> auto& { return c.*member; }; };
    f.push_back(Field{"trainer", "seed", {},
                      [](TrainConfig& c, const YAML::Node& n, const std::string& k) {
                        c.seed = scalar_as<std::uint64_t>(n, k, "a non-negative integer");
                      },
                      [](const TrainConfig& c) { return std::to_string(c.seed); }});
    f.push_back(size_field("trainer", "iterations", tr(&TrainConfig::iterations)));
    f.push_back(size_field("trainer", "episodes_per_iteration", tr(&TrainConfig::episodes_per_iteration)));
    f.push_back(size_field("trainer", "decomposer_every", tr(&TrainConfig::decomposer_every)));
    f.push_back(size_field("trainer", "max_inner_epochs", tr(&TrainConfig::max_inner_epochs)));
    f.push_back(double_field("trainer", "plateau_tolerance", tr(&TrainConfig::plateau_tolerance)));
    f.push_back(size_field("trainer", "plateau_patience", tr(&TrainConfig::plateau_patience)));
    f.push_back(size_field("trainer", "policy_batch", tr(&TrainConfig::policy_batch)));
    f.push_back(size_field("trainer", "decomposer_batch", tr(&TrainConfig::decomposer_batch)));
    f.push_back(size_field("trainer", "buffer_capacity", tr(&TrainConfig::buffer_capacity)));
    f.push_back(size_field("trainer", "warmup_episodes", tr(&TrainConfig::warmup_episodes)));
    f.push_back(enum_field(
        "trainer", "credit_mode", tr(&TrainConfig::credit_mode),
        [](const std::string& s) { return credit_mode_from_string(s); },
        [](CreditMode m) { return to_string(m); }));
    f.push_back(bool_field("trainer", "paper_faithful", tr(&TrainConfig::paper_faithful)));
    f.push_back(size_field("trainer", "moving_average", tr(&TrainConfig::moving_average)));
    f.push_back(size_field("trainer", "checkpoint_every", tr(&TrainConfig::checkpoint_every)));
    return f;
  }();
  return table;
}

const char* const kSections[] = {"env", "decomposer", "policy", "trainer"};

YAML::Node parse_yaml(const std::string& text, const std::string& what) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(what, std::string("YAML syntax: ") + e.what());
  }
}

void apply_override(YAML::Node& root, const std::string& item) {
  const auto eq = item.find('=');
  const auto dot = item.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError(item, "override must look like section.key=value");
  }
  const std::string section = item.substr(0, dot);
  const std::string key = item.substr(dot + 1, eq - dot - 1);
  YAML::Node value = parse_yaml(item.substr(eq + 1), section + "." + key);
  if (!root[section]) root[section] = YAML::Node(YAML::NodeType::Map);
  root[section][key] = value;
}

TrainConfig build(YAML::Node root, const std::vector<std::string>& overrides,
                  const std::filesystem::path& base_dir) {
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("", "config must be a mapping of sections");
  for (const auto& o : overrides) apply_override(root, o);

  for (auto it = root.begin(); it != root.end(); ++it) {
    const auto name = it->first.as<std::string>();
    bool known = false;
    for (const char* s : kSections) known = known || name == s;
    if (!known) throw ConfigError(name, "unknown section");
    if (!it->second.IsMap()) throw ConfigError(name, "section must be a mapping");
  }

  const YAML::Node env = root["env"];
  if (!env || !env["scenario"]) throw ConfigError("env.scenario", "missing");
  const auto scenario = envs::scenario_from_string(scalar_as<std::string>(env["scenario"], "env.scenario", "a name"));

  TrainConfig c;
  switch (scenario) {
    case Scenario::AliceBob: c.env = envs::EnvConfig::alice_bob_default(); break;
    case Scenario::CooperativeNavigation: c.env = envs::EnvConfig::cooperative_navigation(); break;
    case Scenario::PredatorPrey: c.env = envs::EnvConfig::predator_prey(); break;
  }

  bool warmup_given = false;
  for (const char* section : kSections) {
    const YAML::Node node = root[section];
    if (!node) continue;
    for (auto it = node.begin(); it != node.end(); ++it) {
      const auto key = it->first.as<std::string>();
      const std::string name = std::string(section) + "." + key;
      if (name == "env.scenario") continue;
      if (name == "env.layout") {
        c.env.alice_bob.layout = scalar_as<std::string>(it->second, name, "layout text");
        continue;
      }
      if (name == "env.layout_file") {
        auto path = std::filesystem::path(scalar_as<std::string>(it->second, name, "a path"));
        if (path.is_relative()) path = base_dir / path;
        std::ifstream in(path);
        if (!in) throw ConfigError(name, "cannot open " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        c.env.alice_bob.layout = ss.str();
        continue;
      }
      const Field* match = nullptr;
      for (const Field& f : fields()) {
        if (f.section == section && f.key == key) match = &f;
      }
      if (!match) throw ConfigError(name, "unknown key");
      match->set(c, it->second, name);
      if (name == "trainer.warmup_episodes") warmup_given = true;
    }
  }
  if (c.paper_faithful && !warmup_given) c.warmup_episodes = 0;
  c.resolve();
  c.validate();
  return c;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, const std::vector<std::string>& overrides) {
  return build(parse_yaml(text, "config"), overrides, std::filesystem::current_path());
}

TrainConfig load_train_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return build(parse_yaml(ss.str(), "config"), overrides,
               std::filesystem::absolute(path).parent_path());
}

std::string to_yaml(const TrainConfig& config) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  for (const char* section : kSections) {
    out << YAML::Key << section << YAML::Value << YAML::BeginMap;
    if (std::string(section) == "env") {
      out << YAML::Key << "scenario" << YAML::Value << envs::to_string(config.env.scenario);
    }
    for (const Field& f : fields()) {
      if (f.section != section) continue;
      if (!f.only.empty() &&
          std::find(f.only.begin(), f.only.end(), config.env.scenario) == f.only.end()) {
        continue;
      }
      out << YAML::Key << f.key << YAML::Value << f.get(config);
    }
    if (std::string(section) == "env" && !config.env.alice_bob.layout.empty() &&
        config.env.scenario == Scenario::AliceBob) {
      out << YAML::Key << "layout" << YAML::Value << YAML::Literal << config.env.alice_bob.layout;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const TrainConfig& config) { return hex64(fnv1a64(to_yaml(config))); }

}  // namespace stas::trainer
