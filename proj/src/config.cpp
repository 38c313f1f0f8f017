#include "pvg4d/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace pvg4d {

namespace {

std::string where(const std::string& source, const YAML::Mark& m) {
  if (m.is_null()) return source;
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

class MapReader {
 public:
  MapReader(const YAML::Node& node, std::string source, std::string path)
      : node_(node), source_(std::move(source)), path_(std::move(path)) {
    if (!node_.IsMap()) fail(node_, "expected a mapping");
  }

  ~MapReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, "bad value for '" + qualified(key) + "'");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_[key];
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ConfigError(where(source_, n.Mark()) + ": " + msg);
  }

 private:
  YAML::Node node_;
  std::string source_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_lr(MapReader& r, LearningRates& lr) {
  r.get("position", lr.position);
  r.get("position_final", lr.position_final);
  r.get("rotation", lr.rotation);
  r.get("log_scale", lr.log_scale);
  r.get("opacity", lr.opacity);
  r.get("color", lr.color);
  r.get("velocity", lr.velocity);
  r.get("tau", lr.tau);
  r.get("log_beta", lr.log_beta);
  r.get("delta_t", lr.delta_t);
  r.get("uncertainty", lr.uncertainty);
}

void read_train(MapReader& r, ExperimentConfig& c) {
  TrainConfig& t = c.train;
  r.get("iters", t.total_iters);
  r.get("distill_period", t.distill_period);
  r.get("resolution_schedule", c.resolution_factors);
  r.get("l1_weight", t.l1_weight);
  r.get("ssim_weight", t.ssim_weight);
  r.get("prune_interval", t.prune_interval);
  r.get("prune_threshold", t.prune_threshold);
  r.get("holdout_eval_period", t.holdout_eval_period);
  r.get("eval_factor", t.eval_factor);
  r.get("initial_uncertainty", t.initial_uncertainty);
  r.get("initial_delta_t", t.initial_delta_t);
  r.get("distill_brackets", t.distill_brackets);
  if (YAML::Node d = r.child("distill")) {
    MapReader dr(d, r.source(), r.qualified("distill"));
    dr.get("omega_f", t.distill.omega_f);
    dr.get("lambda_f", t.distill.lambda_f);
    dr.get("omega_tv", t.distill.omega_tv);
  }
  if (YAML::Node lr = r.child("lr")) {
    MapReader lrr(lr, r.source(), r.qualified("lr"));
    read_lr(lrr, t.lr);
  }
}

void read_oracle(MapReader& r, OracleConfig& o) {
  std::string preset = o.name;
  r.get("preset", preset);
  if (preset != o.name) {
    try {
      o = oracle_preset(preset);
    } catch (const std::invalid_argument& e) {
      r.fail(r.child("preset"), e.what());
    }
  }
  r.get("hidden_s", o.hidden_s);
  r.get("pose_jitter_rotation", o.pose_jitter_rotation);
  r.get("pose_jitter_translation", o.pose_jitter_translation);
  r.get("color_noise_sigma", o.color_noise_sigma);
  r.get("mover_warp_px", o.mover_warp_px);
  r.get("mover_blur_sigma", o.mover_blur_sigma);
  r.get("seed", o.seed);
  if (YAML::Node patches = r.child("warp_patches")) {
    if (!patches.IsSequence()) r.fail(patches, "warp_patches must be a list of [x0, y0, x1, y1, dx, dy]");
    o.warp_patches.clear();
    for (const YAML::Node& p : patches) {
      if (!p.IsSequence() || p.size() != 6) r.fail(p, "warp patch must be [x0, y0, x1, y1, dx, dy]");
      try {
        o.warp_patches.push_back({p[0].as<int>(), p[1].as<int>(), p[2].as<int>(), p[3].as<int>(),
                                  Vec2(p[4].as<double>(), p[5].as<double>())});
      } catch (const YAML::Exception&) {
        r.fail(p, "bad warp patch values");
      }
    }
  }
}

Arm read_arm(MapReader& r, const YAML::Node& n) {
  try {
    return parse_arm(n.as<std::string>());
  } catch (const std::exception& e) {
    r.fail(n, e.what());
  }
}

}  // namespace

TrainConfig ExperimentConfig::train_config(Arm a) const {
  TrainConfig t = train;
  t.schedule = equal_split_schedule(resolution_factors, train.total_iters);
  t.seed = seed;
  return config_for_arm(t, a);
}

void ExperimentConfig::validate() const {
  expand_scene(scene);
  if (arms.empty()) throw std::invalid_argument("arms list is empty");
  if (resolution_factors.empty()) throw std::invalid_argument("resolution_schedule is empty");
  if (!(holdout_fraction > 0 && holdout_fraction <= 1)) throw std::invalid_argument("holdout_fraction must be in (0, 1]");
  train_config().validate();
  oracle.validate();
}

ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(source, e.mark) + ": " + e.msg);
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  {
    MapReader r(root, source, "");
    r.get("scene", c.scene);
    r.get("capture", c.capture_dir);
    r.get("seed", c.seed);
    r.get("out", c.out);
    r.get("holdout_fraction", c.holdout_fraction);
    if (YAML::Node a = r.child("arm")) c.arm = read_arm(r, a);
    if (YAML::Node as = r.child("arms")) {
      if (!as.IsSequence()) r.fail(as, "arms must be a list");
      c.arms.clear();
      for (const YAML::Node& a : as) c.arms.push_back(read_arm(r, a));
    }
    if (YAML::Node n = r.child("init")) {
      MapReader ir(n, source, "init");
      ir.get("position_noise", c.init.position_noise);
      ir.get("initial_opacity", c.init.initial_opacity);
      ir.get("mover_lifespan", c.init.mover_lifespan);
      ir.get("velocity_from_flow", c.init.velocity_from_flow);
    }
    if (YAML::Node n = r.child("train")) {
      MapReader tr(n, source, "train");
      read_train(tr, c);
    }
    if (YAML::Node n = r.child("oracle")) {
      MapReader orr(n, source, "oracle");
      read_oracle(orr, c.oracle);
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "scene" << YAML::Value << c.scene;
  e << YAML::Key << "capture" << YAML::Value << c.capture_dir;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "out" << YAML::Value << c.out;
  e << YAML::Key << "holdout_fraction" << YAML::Value << c.holdout_fraction;
  e << YAML::Key << "arm" << YAML::Value << arm_name(c.arm);
  e << YAML::Key << "arms" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Arm a : c.arms) e << arm_name(a);
  e << YAML::EndSeq;

  e << YAML::Key << "init" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "position_noise" << YAML::Value << c.init.position_noise;
  e << YAML::Key << "initial_opacity" << YAML::Value << c.init.initial_opacity;
  e << YAML::Key << "mover_lifespan" << YAML::Value << c.init.mover_lifespan;
  e << YAML::Key << "velocity_from_flow" << YAML::Value << c.init.velocity_from_flow;
  e << YAML::EndMap;

  const TrainConfig& t = c.train;
  e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "iters" << YAML::Value << t.total_iters;
  e << YAML::Key << "distill_period" << YAML::Value << t.distill_period;
  e << YAML::Key << "resolution_schedule" << YAML::Value << YAML::Flow << c.resolution_factors;
  e << YAML::Key << "l1_weight" << YAML::Value << t.l1_weight;
  e << YAML::Key << "ssim_weight" << YAML::Value << t.ssim_weight;
  e << YAML::Key << "prune_interval" << YAML::Value << t.prune_interval;
  e << YAML::Key << "prune_threshold" << YAML::Value << t.prune_threshold;
  e << YAML::Key << "holdout_eval_period" << YAML::Value << t.holdout_eval_period;
  e << YAML::Key << "eval_factor" << YAML::Value << t.eval_factor;
  e << YAML::Key << "initial_uncertainty" << YAML::Value << t.initial_uncertainty;
  e << YAML::Key << "initial_delta_t" << YAML::Value << t.initial_delta_t;
  e << YAML::Key << "distill_brackets" << YAML::Value << YAML::Flow << t.distill_brackets;
  e << YAML::Key << "distill" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "omega_f" << YAML::Value << t.distill.omega_f;
  e << YAML::Key << "lambda_f" << YAML::Value << t.distill.lambda_f;
  e << YAML::Key << "omega_tv" << YAML::Value << t.distill.omega_tv;
  e << YAML::EndMap;
  const LearningRates& lr = t.lr;
  e << YAML::Key << "lr" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "position" << YAML::Value << lr.position;
  e << YAML::Key << "position_final" << YAML::Value << lr.position_final;
  e << YAML::Key << "rotation" << YAML::Value << lr.rotation;
  e << YAML::Key << "log_scale" << YAML::Value << lr.log_scale;
  e << YAML::Key << "opacity" << YAML::Value << lr.opacity;
  e << YAML::Key << "color" << YAML::Value << lr.color;
  e << YAML::Key << "velocity" << YAML::Value << lr.velocity;
  e << YAML::Key << "tau" << YAML::Value << lr.tau;
  e << YAML::Key << "log_beta" << YAML::Value << lr.log_beta;
  e << YAML::Key << "delta_t" << YAML::Value << lr.delta_t;
  e << YAML::Key << "uncertainty" << YAML::Value << lr.uncertainty;
  e << YAML::EndMap;
  e << YAML::EndMap;

  const OracleConfig& o = c.oracle;
  e << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "preset" << YAML::Value << o.name;
  e << YAML::Key << "hidden_s" << YAML::Value << o.hidden_s;
  e << YAML::Key << "pose_jitter_rotation" << YAML::Value << o.pose_jitter_rotation;
  e << YAML::Key << "pose_jitter_translation" << YAML::Value << o.pose_jitter_translation;
  e << YAML::Key << "color_noise_sigma" << YAML::Value << o.color_noise_sigma;
  e << YAML::Key << "mover_warp_px" << YAML::Value << o.mover_warp_px;
  e << YAML::Key << "mover_blur_sigma" << YAML::Value << o.mover_blur_sigma;
  e << YAML::Key << "seed" << YAML::Value << o.seed;
  e << YAML::Key << "warp_patches" << YAML::Value << YAML::BeginSeq;
  for (const WarpPatch& p : o.warp_patches)
    e << YAML::Flow << YAML::BeginSeq << p.x0 << p.y0 << p.x1 << p.y1 << p.displacement.x() << p.displacement.y()
      << YAML::EndSeq;
  e << YAML::EndSeq;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot write config file");
  out << emit_config(cfg);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw std::invalid_argument("'" + item + "' is not an integer in list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

std::vector<Arm> parse_arm_list(const std::string& text) {
  std::vector<Arm> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_arm(item));
  if (out.empty()) throw std::invalid_argument("empty arm list");
  return out;
}

std::vector<std::string> expand_scene(const std::string& scene) {
  if (scene == "fastmover-6") {
    std::vector<std::string> all;
    for (const BenchmarkScene& b : fastmover6()) all.push_back(b.name);
    return all;
  }
  benchmark_scene(scene);
  return {scene};
}

BenchmarkScene benchmark_scene(const std::string& name) {
  if (name == "panning") return panning_scene();
  for (const BenchmarkScene& b : fastmover6())
    if (b.name == name) return b;
  throw std::invalid_argument("unknown scene '" + name + "' (fastmover-6, fastmover-6:1..6, panning)");
}

}  // namespace pvg4d
