#include "repa/harness/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "repa/errors.hpp"

namespace repa::harness {

namespace {

using degrade::Kind;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, value);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("config: " + key + " = '" + text + "' is not a number");
  return value;
}

std::string format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config: " + key + " = '" + text + "' is not a boolean");
}

struct Field {
  std::string section, key, doc;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string&)> set;
  std::string path() const { return section + "." + key; }
};

template <class T>
Field number(std::string section, std::string key, std::string doc, T ExperimentConfig::*member) {
  return {std::move(section), std::move(key), std::move(doc),
          [member](const ExperimentConfig& c) { return format(c.*member); },
          [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          }};
}

// Member of a nested struct.
template <class S, class T>
Field nested(std::string section, std::string key, std::string doc, S ExperimentConfig::*outer, T S::*member) {
  return {std::move(section), std::move(key), std::move(doc),
          [outer, member](const ExperimentConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return format((c.*outer).*member);
            else if constexpr (std::is_same_v<T, std::string>) return (c.*outer).*member;
            else if constexpr (std::is_floating_point_v<T>) return format(static_cast<double>((c.*outer).*member));
            else return format(static_cast<std::uint64_t>((c.*outer).*member));
          },
          [outer, member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(k, v);
            else if constexpr (std::is_same_v<T, std::string>) (c.*outer).*member = v;
            else (c.*outer).*member = parse_number<T>(k, v);
          }};
}

template <class T>
std::string join(const std::vector<T>& items, auto&& name) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + std::string(name(items[i]));
  return out;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    using C = ExperimentConfig;
    std::vector<Field> f;
    f.push_back(number("data", "seed", "sprite generator seed of the training split", &C::data_seed));
    f.push_back(number("data", "train", "training images", &C::train_images));
    f.push_back(number("data", "heldout", "held-out images (separate stream)", &C::heldout_images));
    f.push_back(number("data", "eval_seed", "seed of the evaluation images", &C::eval_seed));
    f.push_back(number("data", "images", "evaluation images per task", &C::images));
    f.push_back(number("data", "tuning_seed", "seed of the tuning images (kappa/lambda selection)", &C::tuning_seed));
    f.push_back(number("data", "tuning_images", "tuning images", &C::tuning_images));

    f.push_back(nested("encoder", "patch", "patch side in pixels", &C::encoder, &nets::EncoderConfig::patch));
    f.push_back(nested("encoder", "pool", "average-pooling factor inside a patch", &C::encoder,
                       &nets::EncoderConfig::pool));
    f.push_back(nested("encoder", "feature_dim", "feature dimension D1", &C::encoder,
                       &nets::EncoderConfig::feature_dim));
    f.push_back(nested("encoder", "normalize", "unit-normalize patch features", &C::encoder,
                       &nets::EncoderConfig::normalize));
    f.push_back(nested("encoder", "seed", "projection seed", &C::encoder, &nets::EncoderConfig::seed));

    f.push_back(nested("autoencoder", "hidden", "hidden width", &C::autoencoder, &nets::AutoencoderConfig::hidden));
    f.push_back(nested("autoencoder", "latent", "latent dimension (must equal the flow state size)", &C::autoencoder,
                       &nets::AutoencoderConfig::latent));
    f.push_back(nested("autoencoder", "steps", "training steps", &C::ae_train, &train::AeTrainConfig::steps));
    f.push_back(nested("autoencoder", "batch", "batch size", &C::ae_train, &train::AeTrainConfig::batch));
    f.push_back(nested("autoencoder", "lr", "Adam learning rate", &C::ae_train, &train::AeTrainConfig::lr));
    f.push_back(nested("autoencoder", "seed", "initialization and batching seed", &C::ae_train,
                       &train::AeTrainConfig::seed));

    f.push_back(nested("flow", "token_dim", "token dimension D2", &C::flow, &nets::VelocityConfig::token_dim));
    f.push_back(nested("flow", "blocks", "residual blocks", &C::flow, &nets::VelocityConfig::blocks));
    f.push_back(nested("flow", "tap", "block whose output is the internal representation", &C::flow,
                       &nets::VelocityConfig::tap));
    f.push_back(nested("flow", "hidden", "per-token perceptron width", &C::flow, &nets::VelocityConfig::hidden));
    f.push_back(nested("flow", "time_features", "time embedding width", &C::flow,
                       &nets::VelocityConfig::time_features));
    f.push_back(number("flow", "head_hidden", "projection head hidden width", &C::head_hidden));
    f.push_back(nested("flow", "steps", "training steps", &C::flow_train, &train::TrainConfig::steps));
    f.push_back(nested("flow", "batch", "batch size", &C::flow_train, &train::TrainConfig::batch));
    f.push_back(nested("flow", "lr", "Adam learning rate", &C::flow_train, &train::TrainConfig::lr));
    f.push_back(nested("flow", "seed", "initialization and batching seed", &C::flow_train,
                       &train::TrainConfig::seed));
    f.push_back(nested("flow", "w_repa", "weight of the alignment loss", &C::flow_train,
                       &train::TrainConfig::w_repa));
    f.push_back(nested("flow", "schedule", "interpolant schedule (linear|cosine)", &C::flow_train,
                       &train::TrainConfig::schedule));

    f.push_back({"checkpoints", "dir", "directory of trained models",
                 [](const C& c) { return c.checkpoint_dir.string(); },
                 [](C& c, const std::string&, const std::string& v) { c.checkpoint_dir = v; }});

    f.push_back(number("solver", "steps", "discretization steps T", &C::solver_steps));
    f.push_back({"solver", "schedule", "measurement step size rule (snr|inverse-norm)",
                 [](const C& c) { return std::string(solve::schedule_name(c.step_schedule)); },
                 [](C& c, const std::string&, const std::string& v) { c.step_schedule = solve::parse_schedule(v); }});
    f.push_back({"solver", "proxy", "proxy representation (measurement|denoised)",
                 [](const C& c) { return std::string(solve::proxy_name(c.proxy)); },
                 [](C& c, const std::string&, const std::string& v) { c.proxy = solve::parse_proxy(v); }});
    f.push_back(number("solver", "gamma", "ReSample noise mixing", &C::gamma));
    f.push_back(number("solver", "inner_iterations", "ReSample consistency iterations", &C::inner_iterations));
    f.push_back(number("solver", "inner_step", "ReSample consistency step", &C::inner_step));
    f.push_back({"solver", "reevaluate", "regularizer gradient at the post-measurement state",
                 [](const C& c) { return format(c.reevaluate); },
                 [](C& c, const std::string& k, const std::string& v) { c.reevaluate = parse_bool(k, v); }});
    f.push_back(number("solver", "seed", "base seed; image i uses a derived stream", &C::solver_seed));

    f.push_back({"experiment", "tasks", "comma-separated degradations",
                 [](const C& c) { return join(c.tasks, degrade::kind_name); },
                 [](C& c, const std::string&, const std::string& v) {
                   c.tasks.clear();
                   for (const auto& s : split(v)) c.tasks.push_back(degrade::parse_kind(s));
                 }});
    f.push_back({"experiment", "methods", "comma-separated methods, solver[+repa|+feature]",
                 [](const C& c) { return join(c.methods, [](const Method& m) { return m.name(); }); },
                 [](C& c, const std::string&, const std::string& v) {
                   c.methods.clear();
                   for (const auto& s : split(v)) c.methods.push_back(Method::parse(s));
                 }});
    f.push_back(number("experiment", "noise_seed", "measurement noise seed", &C::noise_seed));
    f.push_back(number("experiment", "threads", "worker threads for per-image runs", &C::threads));
    f.push_back({"experiment", "output", "output directory",
                 [](const C& c) { return c.output.string(); },
                 [](C& c, const std::string&, const std::string& v) { c.output = v; }});
    f.push_back({"experiment", "sweep_steps", "step counts of the step sweep",
                 [](const C& c) { return join(c.sweep_steps, [](std::size_t s) { return std::to_string(s); }); },
                 [](C& c, const std::string& k, const std::string& v) {
                   c.sweep_steps.clear();
                   for (const auto& s : split(v)) c.sweep_steps.push_back(parse_number<std::size_t>(k, s));
                 }});
    f.push_back(number("experiment", "sweep_images", "images per step-sweep point", &C::sweep_images));
    f.push_back({"experiment", "sweep_task", "degradation of the step sweep",
                 [](const C& c) { return std::string(degrade::kind_name(c.sweep_task)); },
                 [](C& c, const std::string&, const std::string& v) { c.sweep_task = degrade::parse_kind(v); }});
    f.push_back({"experiment", "sweep_solver", "solver of the step sweep (compared with and without +repa)",
                 [](const C& c) { return std::string(solve::solver_name(c.sweep_solver)); },
                 [](C& c, const std::string&, const std::string& v) { c.sweep_solver = solve::parse_solver(v); }});

    for (Kind k : {Kind::gaussblur, Kind::superres, Kind::boxinpaint, Kind::motionblur}) {
      const std::string sec = "task." + std::string(degrade::kind_name(k));
      f.push_back({sec, "kappa", "measurement step scale",
                   [k](const C& c) { return format(c.task(k).kappa); },
                   [k](C& c, const std::string& key, const std::string& v) {
                     c.task_params[k].kappa = parse_number<double>(key, v);
                   }});
      f.push_back({sec, "lambda", "regularizer step for methods with +repa or +feature",
                   [k](const C& c) { return format(c.task(k).lambda); },
                   [k](C& c, const std::string& key, const std::string& v) {
                     c.task_params[k].lambda = parse_number<double>(key, v);
                   }});
      f.push_back({sec, "noise", "measurement noise standard deviation",
                   [k](const C& c) { return format(c.task(k).noise); },
                   [k](C& c, const std::string& key, const std::string& v) {
                     c.task_params[k].noise = parse_number<double>(key, v);
                   }});
    }
    return f;
  }();
  return all;
}

}  // namespace

std::string Method::name() const {
  std::string s(solve::solver_name(kind));
  if (regularizer) s += *regularizer == solve::Regularizer::repa ? "+repa" : "+feature";
  return s;
}

Method Method::parse(std::string_view text) {
  Method m;
  const auto plus = text.find('+');
  m.kind = solve::parse_solver(trim(text.substr(0, plus)));
  if (plus != std::string_view::npos) {
    const std::string reg = trim(text.substr(plus + 1));
    if (reg == "repa") m.regularizer = solve::Regularizer::repa;
    else if (reg == "feature") m.regularizer = solve::Regularizer::feature_space;
    else throw ConfigError("method '" + std::string(text) + "': unknown regularizer (expected +repa or +feature)");
  }
  return m;
}

ExperimentConfig::ExperimentConfig() {
  task_params[Kind::gaussblur] = {0.25, 0.3, 0.01};
  task_params[Kind::superres] = {2.0, 0.3, 0.01};
  task_params[Kind::boxinpaint] = {1.0, 0.3, 0.01};
  task_params[Kind::motionblur] = {0.25, 0.3, 0.01};
  methods = {Method::parse("latent-dps"), Method::parse("latent-dps+repa"), Method::parse("resample"),
             Method::parse("resample+repa")};
  flow_train.tap = flow.tap;
}

const TaskParams& ExperimentConfig::task(Kind kind) const {
  const auto it = task_params.find(kind);
  if (it == task_params.end()) throw ConfigError("no parameters for task " + std::string(degrade::kind_name(kind)));
  return it->second;
}

solve::SolverConfig ExperimentConfig::solver(const Method& method, Kind kind, std::size_t steps) const {
  solve::SolverConfig c;
  c.kind = method.kind;
  c.steps = steps;
  c.schedule = step_schedule;
  c.kappa = task(kind).kappa;
  c.lambda = method.regularizer ? task(kind).lambda : 0.0;
  c.regularizer = method.regularizer.value_or(solve::Regularizer::repa);
  c.proxy = proxy;
  if (method.kind == solve::SolverKind::resample) c.resample_steps = solve::default_resample_steps(steps);
  c.gamma = gamma;
  c.inner_iterations = inner_iterations;
  c.inner_step = inner_step;
  c.reevaluate_regularizer = reevaluate;
  c.seed = solver_seed;
  return c;
}

nets::HeadConfig ExperimentConfig::head() const {
  return nets::HeadConfig{flow.token_dim, encoder.feature_dim, head_hidden, false};
}

void ExperimentConfig::validate() const {
  if (images == 0 || train_images == 0 || heldout_images == 0) throw ConfigError("config: image counts must be > 0");
  if (tasks.empty() || methods.empty()) throw ConfigError("config: experiment needs tasks and methods");
  if (threads == 0) throw ConfigError("config: threads must be >= 1");
  if (solver_steps == 0 || sweep_steps.empty() || sweep_images == 0) throw ConfigError("config: empty step settings");
  for (std::size_t s : sweep_steps)
    if (s == 0) throw ConfigError("config: sweep step counts must be positive");
  if (autoencoder.latent != flow.state_size()) {
    throw ConfigError("config: autoencoder.latent " + std::to_string(autoencoder.latent) +
                      " must equal the flow state size " + std::to_string(flow.state_size()));
  }
  if (encoder.height != autoencoder.height || encoder.width != autoencoder.width) {
    throw ConfigError("config: encoder and autoencoder image sizes differ");
  }
  if (encoder.tokens() != flow.tokens()) {
    throw ConfigError("config: encoder has " + std::to_string(encoder.tokens()) + " patches, flow has " +
                      std::to_string(flow.tokens()) + " tokens");
  }
  encoder.validate();
  flow.validate();
  train::TrainConfig t = flow_train;
  t.tap = flow.tap;
  t.validate();
  for (const auto& [kind, p] : task_params) {
    if (!(p.kappa > 0.0) || !(p.lambda >= 0.0) || !(p.noise >= 0.0)) {
      throw ConfigError("config: task." + std::string(degrade::kind_name(kind)) + " needs kappa > 0, lambda >= 0, noise >= 0");
    }
  }
  if (sweep_solver == solve::SolverKind::pixel_dps) throw ConfigError("config: sweep_solver pixel_dps needs a pixel-space prior");
  for (const auto& m : methods) {
    // The harness decodes every state through the autoencoder.
    if (m.kind == solve::SolverKind::pixel_dps) throw ConfigError("config: method " + m.name() + " needs a pixel-space prior");
    solver(m, tasks.front(), solver_steps).validate();
  }
}

ExperimentConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      const auto& all = fields();
      const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.path() == path; });
      if (it == all.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      it->set(c, path, trim(value.data()));
    }
  }
  c.flow_train.tap = c.flow.tap;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.path() + " = " + f.get(config) + "\n";
  return out;
}

std::string config_template(const ExperimentConfig& config) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + f.section + "]\n";
      section = f.section;
    }
    out += "; " + f.doc + "\n" + f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace repa::harness
