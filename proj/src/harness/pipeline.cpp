#include "repa/harness/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "repa/errors.hpp"
#include "repa/harness/hashing.hpp"
#include "repa/harness/image_io.hpp"
#include "repa/nets/checkpoint.hpp"
#include "repa/theory/alignment.hpp"
#include "repa/train/dataset.hpp"

namespace repa::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string weight_tag(double w) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, w);
  return std::string(buf, r.ptr);
}

std::string filtered_hash(const ExperimentConfig& config, const std::vector<std::string>& prefixes,
                          const std::string& extra) {
  std::istringstream in(canonical_config(config));
  std::string line, kept;
  while (std::getline(in, line)) {
    for (const auto& p : prefixes) {
      if (line.rfind(p, 0) == 0) {
        kept += line + "\n";
        break;
      }
    }
  }
  return nets::sha256_hex(kept + extra);
}

const std::vector<std::string> kAeKeys{"data.seed ", "data.train ", "data.heldout ", "autoencoder."};

std::string image_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%05zu.%s", i, ext);
  return buf;
}

std::vector<Tensor> as_images(std::vector<Tensor> images, const ExperimentConfig& c) {
  for (auto& x : images) x = x.reshaped({c.encoder.height, c.encoder.width});
  return images;
}

std::string stage_hash(const fs::path& stem, const std::string& expected, const char* what) {
  if (!fs::exists(fs::path(stem).concat(".json"))) {
    throw ConfigError(std::string(what) + " checkpoint missing: " + stem.string() + ".json");
  }
  const auto info = nets::read_manifest(stem);
  if (info.meta.value("training_hash", std::string()) != expected) {
    throw ConfigError(std::string(what) + " checkpoint " + stem.string() +
                      " was trained with different settings; retrain it");
  }
  return info.hash;
}

bool fresh(const fs::path& stem, const std::string& expected) {
  try {
    if (!fs::exists(fs::path(stem).concat(".json"))) return false;
    return nets::read_manifest(stem).meta.value("training_hash", std::string()) == expected;
  } catch (const ConfigError&) {
    return false;
  }
}

// Wall time sits beside the checkpoint, not in its metadata, so manifests
// stay bit-reproducible.
void write_timing(const fs::path& stem, double seconds) {
  std::ofstream out(fs::path(stem).concat(".time.json"));
  out << json{{"seconds", seconds}}.dump() << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double training_seconds(const fs::path& stem) {
  std::ifstream in(fs::path(stem).concat(".time.json"));
  if (!in) return -1.0;
  try {
    return json::parse(in).at("seconds").get<double>();
  } catch (const json::exception&) {
    return -1.0;
  }
}

fs::path gen_dataset(const fs::path& dir, std::uint64_t seed, std::size_t count) {
  if (count == 0) throw ConfigError("gen-data: count must be positive");
  fs::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor x = train::make_sprite(seed, i);
    write_pgm(dir / image_name(i, "pgm"), x);
    write_raw(dir / image_name(i, "f64"), x);
    files.push_back({{"index", i},
                     {"pgm", image_name(i, "pgm")},
                     {"raw", image_name(i, "f64")},
                     {"sha256", file_hash(dir / image_name(i, "f64"))}});
  }
  const json manifest{{"generator", "textured-sprites"},
                      {"generator_version", train::kSpriteGeneratorVersion},
                      {"seed", seed},
                      {"count", count},
                      {"height", 32},
                      {"width", 32},
                      {"files", files}};
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path);
  out << manifest.dump(2) << '\n';
  if (!out) throw ConfigError("cannot write " + path.string());
  return path;
}

Tensor training_rows(const ExperimentConfig& c) {
  return train::stack_rows(train::make_sprites(c.data_seed, c.train_images));
}

Tensor heldout_rows(const ExperimentConfig& c) {
  return train::stack_rows(train::make_sprites(train::heldout_seed(c.data_seed), c.heldout_images));
}

std::vector<Tensor> heldout_images(const ExperimentConfig& c) {
  return as_images(train::make_sprites(train::heldout_seed(c.data_seed), c.heldout_images), c);
}

std::vector<Tensor> eval_images(const ExperimentConfig& c) {
  return as_images(train::make_sprites(c.eval_seed, c.images), c);
}

std::vector<Tensor> tuning_images(const ExperimentConfig& c) {
  return as_images(train::make_sprites(c.tuning_seed, c.tuning_images), c);
}

std::string autoencoder_training_hash(const ExperimentConfig& c) { return filtered_hash(c, kAeKeys, ""); }

std::string flow_training_hash(const ExperimentConfig& c, double w_repa) {
  auto keys = kAeKeys;
  keys.insert(keys.end(), {"encoder.", "flow.token_dim", "flow.blocks", "flow.tap", "flow.hidden ",
                           "flow.time_features", "flow.head_hidden", "flow.steps", "flow.batch", "flow.lr",
                           "flow.seed", "flow.schedule"});
  return filtered_hash(c, keys, "w_repa = " + weight_tag(w_repa) + "\n");
}

fs::path autoencoder_stem(const ExperimentConfig& c) { return c.checkpoint_dir / "autoencoder"; }
fs::path flow_stem(const ExperimentConfig& c, double w) { return c.checkpoint_dir / ("flow_w" + weight_tag(w)); }
fs::path head_stem(const ExperimentConfig& c, double w) { return c.checkpoint_dir / ("head_w" + weight_tag(w)); }

nets::ModelPrior Models::prior() const {
  return nets::ModelPrior(flow, schedule::InterpolantSchedule::by_name(schedule), {ae.config().latent});
}

std::string Models::provenance() const {
  return "autoencoder=" + short_hash(ae_hash) + " flow=" + short_hash(flow_hash) + " head=" + short_hash(head_hash);
}

std::string train_autoencoder_stage(const ExperimentConfig& c, const Log& log) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  const Tensor train_x = training_rows(c), held = heldout_rows(c);
  const auto every = std::max<std::size_t>(1, c.ae_train.steps / 10);
  const auto progress = [&](const train::StepRecord& r) {
    if (log && r.step % every == 0) log("autoencoder step " + std::to_string(r.step) + " loss " + std::to_string(r.total));
  };
  auto out = train::train_autoencoder(c.ae_train, c.autoencoder, train_x, held, progress);
  const json meta{{"training_hash", autoencoder_training_hash(c)},
                  {"median_heldout_psnr", out.median_psnr},
                  {"steps", c.ae_train.steps}};
  fs::create_directories(c.checkpoint_dir);
  nets::save_model(autoencoder_stem(c), out.ae, meta);
  out.log.write_csv(c.checkpoint_dir / "autoencoder_log.csv");
  write_timing(autoencoder_stem(c), seconds_since(start));
  if (log) log("autoencoder median held-out PSNR " + std::to_string(out.median_psnr) + " dB");
  return nets::read_manifest(autoencoder_stem(c)).hash;
}

nets::Autoencoder load_autoencoder(const ExperimentConfig& c, std::string* hash) {
  const std::string h = stage_hash(autoencoder_stem(c), autoencoder_training_hash(c), "autoencoder");
  if (hash) *hash = h;
  return nets::load_autoencoder(autoencoder_stem(c));
}

std::string train_flow_stage(const ExperimentConfig& c, double w_repa, const Log& log) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  const nets::Autoencoder ae = load_autoencoder(c);
  const nets::FeatureEncoder encoder(c.encoder);
  const Tensor images = training_rows(c);
  train::FlowData data;
  data.train = train::encode_rows(ae, images);
  data.heldout = train::encode_rows(ae, heldout_rows(c));
  const std::size_t n = encoder.tokens(), d1 = encoder.feature_dim();
  data.train_features = Tensor({images.dim(0), n * d1});
  for (std::size_t i = 0; i < images.dim(0); ++i) {
    const Tensor f = encoder.encode(train::row(images, i, {c.encoder.height, c.encoder.width})).rows;
    std::copy(f.vec().begin(), f.vec().end(), data.train_features.ptr() + i * n * d1);
  }
  train::TrainConfig tc = c.flow_train;
  tc.w_repa = w_repa;
  tc.tap = c.flow.tap;
  const auto every = std::max<std::size_t>(1, tc.steps / 10);
  const auto progress = [&](const train::StepRecord& r) {
    if (log && r.step % every == 0) {
      log("flow(w=" + weight_tag(w_repa) + ") step " + std::to_string(r.step) + " flow " + std::to_string(r.flow) +
          " repa " + std::to_string(r.repa));
    }
  };
  auto out = train::train_flow(tc, c.flow, c.head(), data, progress);
  const json meta{{"training_hash", flow_training_hash(c, w_repa)},
                  {"w_repa", w_repa},
                  {"heldout_initial", out.log.heldout_initial},
                  {"heldout_final", out.log.heldout_final}};
  fs::create_directories(c.checkpoint_dir);
  nets::save_model(flow_stem(c, w_repa), out.model, meta);
  nets::save_model(head_stem(c, w_repa), out.head, meta);
  out.log.write_csv(c.checkpoint_dir / ("flow_w" + weight_tag(w_repa) + "_log.csv"));
  write_timing(flow_stem(c, w_repa), seconds_since(start));
  return nets::read_manifest(flow_stem(c, w_repa)).hash;
}

Models load_models(const ExperimentConfig& c, double w_repa) {
  c.validate();
  std::string ae_hash;
  nets::Autoencoder ae = load_autoencoder(c, &ae_hash);
  const std::string expected = flow_training_hash(c, w_repa);
  const std::string flow_hash = stage_hash(flow_stem(c, w_repa), expected, "flow");
  const std::string head_hash = stage_hash(head_stem(c, w_repa), expected, "head");
  Models m{std::move(ae), nets::load_velocity(flow_stem(c, w_repa)), nets::load_head(head_stem(c, w_repa)),
           nets::FeatureEncoder(c.encoder), w_repa, c.flow_train.schedule, ae_hash, flow_hash, head_hash};
  if (m.flow.config().state_size() != m.ae.config().latent || m.head.config().input_dim != m.flow.config().token_dim) {
    throw ConfigError("checkpoints disagree on shapes");
  }
  return m;
}

Models ensure_models(const ExperimentConfig& c, double w_repa, const Log& log) {
  if (!fresh(autoencoder_stem(c), autoencoder_training_hash(c))) {
    if (log) log("training autoencoder");
    train_autoencoder_stage(c, log);
  }
  const std::string expected = flow_training_hash(c, w_repa);
  if (!fresh(flow_stem(c, w_repa), expected) || !fresh(head_stem(c, w_repa), expected)) {
    if (log) log("training flow with w_repa=" + weight_tag(w_repa));
    train_flow_stage(c, w_repa, log);
  }
  return load_models(c, w_repa);
}

double mean_mis_repa(const Models& m, const std::vector<Tensor>& images, double t) {
  if (images.empty()) throw ShapeError("mean_mis_repa: no images");
  const theory::DiffEncoder de(m.flow, schedule::InterpolantSchedule::by_name(m.schedule), &m.ae);
  double total = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) total += theory::mis_repa(images[i], t, de, m.head, m.encoder, i);
  return total / static_cast<double>(images.size());
}

}  // namespace repa::harness
