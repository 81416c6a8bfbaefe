#include "wmr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "wmr/errors.hpp"

namespace wmr {

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.smoother = SmootherConfig::defaults(standard_rig());
  return c;
}

void PipelineConfig::validate() const {
  tracker.validate();
  smoother.validate(standard_rig());
  ground.validate();
  retarget.validate();
  synth.validate();
}

namespace {

std::string fmt(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::vector<double> parse_numbers(const std::string& v) {
  std::vector<double> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) {
    double x = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) throw std::invalid_argument(tok);
    out.push_back(x);
  }
  return out;
}

struct Entry {
  std::string section;
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;  // throws std::exception on bad input
};

double one(const std::string& v) {
  const auto n = parse_numbers(v);
  if (n.size() != 1) throw std::invalid_argument("expected one number");
  return n[0];
}

int integer(const std::string& v) {
  const double x = one(v);
  if (x != static_cast<double>(static_cast<int>(x))) throw std::invalid_argument("expected an integer");
  return static_cast<int>(x);
}

Entry num(const char* s, const char* k, double& ref) {
  return {s, k, [&ref] { return fmt(ref); }, [&ref](const std::string& v) { ref = one(v); }};
}

Entry whole(const char* s, const char* k, int& ref) {
  return {s, k, [&ref] { return std::to_string(ref); }, [&ref](const std::string& v) { ref = integer(v); }};
}

Entry seed(const char* s, const char* k, std::uint64_t& ref) {
  return {s, k, [&ref] { return std::to_string(ref); },
          [&ref](const std::string& v) {
            std::uint64_t x = 0;
            const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
            if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw std::invalid_argument("seed");
            ref = x;
          }};
}

Entry boolean(const char* s, const char* k, bool& ref) {
  return {s, k, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref](const std::string& v) {
            if (v == "true") ref = true;
            else if (v == "false") ref = false;
            else throw std::invalid_argument("expected true or false");
          }};
}

Entry text(const char* s, const char* k, std::string& ref) {
  return {s, k, [&ref] { return ref; },
          [&ref](const std::string& v) {
            if (v.empty()) throw std::invalid_argument("empty value");
            ref = v;
          }};
}

Entry vec3(const char* s, const char* k, Vec3& ref) {
  return {s, k, [&ref] { return fmt(ref.x()) + " " + fmt(ref.y()) + " " + fmt(ref.z()); },
          [&ref](const std::string& v) {
            const auto n = parse_numbers(v);
            if (n.size() != 3) throw std::invalid_argument("expected 3 numbers");
            ref = Vec3(n[0], n[1], n[2]);
          }};
}

Entry mat3(const char* s, const char* k, Mat3& ref) {
  return {s, k,
          [&ref] {
            std::string out;
            for (int r = 0; r < 3; ++r) {
              for (int c = 0; c < 3; ++c) out += (out.empty() ? "" : " ") + fmt(ref(r, c));
            }
            return out;
          },
          [&ref](const std::string& v) {
            const auto n = parse_numbers(v);
            if (n.size() != 9) throw std::invalid_argument("expected 9 numbers");
            for (int r = 0; r < 3; ++r) {
              for (int c = 0; c < 3; ++c) ref(r, c) = n[3 * r + c];
            }
          }};
}

Entry list(const char* s, const char* k, std::vector<double>& ref, size_t size) {
  return {s, k,
          [&ref] {
            std::string out;
            for (double x : ref) out += (out.empty() ? "" : " ") + fmt(x);
            return out;
          },
          [&ref, size](const std::string& v) {
            auto n = parse_numbers(v);
            if (n.size() != size) throw std::invalid_argument("expected " + std::to_string(size) + " numbers");
            ref = std::move(n);
          }};
}

Entry lock_stat(LockStatistic& ref) {
  return {"lock", "statistic", [&ref] { return std::string(ref == LockStatistic::Mean ? "mean" : "median"); },
          [&ref](const std::string& v) {
            if (v == "mean") ref = LockStatistic::Mean;
            else if (v == "median") ref = LockStatistic::Median;
            else throw std::invalid_argument("expected mean or median");
          }};
}

void adam_entries(std::vector<Entry>& e, const char* s, AdamConfig& a) {
  e.push_back(num(s, "adam_lr", a.lr));
  e.push_back(num(s, "adam_beta1", a.beta1));
  e.push_back(num(s, "adam_beta2", a.beta2));
  e.push_back(num(s, "adam_eps", a.eps));
  e.push_back(whole(s, "adam_iters", a.iters));
}

std::vector<Entry> entries(PipelineConfig& c) {
  std::vector<Entry> e;
  e.push_back(num("tracker", "iou_gate", c.tracker.iou_gate));
  e.push_back(whole("tracker", "max_age", c.tracker.max_age));
  e.push_back(whole("tracker", "min_hits", c.tracker.min_hits));
  e.push_back(num("tracker", "process_noise", c.tracker.noise.process_noise));
  e.push_back(num("tracker", "observation_noise", c.tracker.noise.observation_noise));

  e.push_back(lock_stat(c.lock));

  SmootherConfig& s = c.smoother;
  e.push_back(whole("smoother", "window_len", s.window_len));
  e.push_back(whole("smoother", "overlap", s.overlap));
  e.push_back(num("smoother", "lambda_latent", s.lambda_latent));
  e.push_back(num("smoother", "lambda_root", s.lambda_root));
  e.push_back(num("smoother", "lambda_bound", s.lambda_bound));
  e.push_back(num("smoother", "lambda_v", s.lambda_v));
  e.push_back(num("smoother", "lambda_a", s.lambda_a));
  e.push_back(num("smoother", "lambda_omega", s.lambda_omega));
  e.push_back(num("smoother", "lambda_alpha", s.lambda_alpha));
  e.push_back(num("smoother", "charbonnier_beta", s.charbonnier_beta));
  e.push_back(num("smoother", "charbonnier_eps", s.charbonnier_eps));
  e.push_back(list("smoother", "joint_weights", s.joint_weights, kRigJoints));
  adam_entries(e, "smoother", s.adam);

  GroundConfig& g = c.ground;
  e.push_back(num("ground", "sigma_h", g.contact.sigma_h));
  e.push_back(num("ground", "k_contact", g.contact.k_contact));
  e.push_back(num("ground", "ground_height", g.contact.ground_height));
  e.push_back(boolean("ground", "estimate_ground", g.estimate_ground));
  e.push_back(whole("ground", "ground_window", g.ground_window));
  e.push_back(num("ground", "ground_quantile", g.ground_quantile));
  e.push_back(num("ground", "lambda_phy", g.lambda_phy));
  e.push_back(num("ground", "lambda_aux", g.lambda_aux));
  e.push_back(num("ground", "w_vel", g.w_vel));
  e.push_back(num("ground", "w_acc", g.w_acc));
  e.push_back(vec3("ground", "aniso_w", g.aniso_w));
  adam_entries(e, "ground", g.adam);

  RetargetConfig& r = c.retarget;
  e.push_back(text("retarget", "robot_model", c.robot_model));
  e.push_back(text("retarget", "joint_map", c.joint_map));
  e.push_back(mat3("retarget", "flip", r.flip));
  e.push_back(num("retarget", "height_ratio", r.height_ratio));
  e.push_back(num("retarget", "damping", r.ik.damping));
  e.push_back(whole("retarget", "max_iters", r.ik.max_iters));
  e.push_back(num("retarget", "tol_pos", r.ik.tol_pos));
  e.push_back(num("retarget", "tol_rot", r.ik.tol_rot));
  e.push_back(num("retarget", "ee_weight", r.ee_weight));
  e.push_back(num("retarget", "mid_weight", r.mid_weight));

  SyntheticScenario& y = c.synth;
  e.push_back(whole("synth", "frames", y.frames));
  e.push_back(num("synth", "frame_rate", y.frame_rate));
  e.push_back(whole("synth", "subjects", y.subjects));
  e.push_back(num("synth", "stride", y.gait.stride));
  e.push_back(num("synth", "cadence", y.gait.cadence));
  e.push_back(num("synth", "clearance", y.gait.clearance));
  e.push_back(num("synth", "arm_swing", y.gait.arm_swing));
  e.push_back(num("synth", "noise_latent", y.noise.latent));
  e.push_back(num("synth", "noise_root", y.noise.root));
  e.push_back(num("synth", "noise_bbox", y.noise.bbox));
  e.push_back(num("synth", "noise_scale", y.noise.scale));
  e.push_back(num("synth", "noise_shape", y.noise.shape));
  e.push_back(num("synth", "spacing", y.spacing));
  e.push_back(num("synth", "camera_distance", y.camera_distance));
  e.push_back(num("synth", "camera_height", y.camera_height));
  e.push_back(num("synth", "focal", y.focal));
  e.push_back(num("synth", "cx", y.cx));
  e.push_back(num("synth", "cy", y.cy));
  e.push_back(seed("synth", "seed", y.seed));
  return e;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string dump_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  std::string out;
  std::string section;
  for (const Entry& e : entries(copy)) {
    if (e.section != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + e.section + "]\n";
      section = e.section;
    }
    out += e.key + " = " + e.get() + "\n";
  }
  return out;
}

PipelineConfig parse_config(std::string_view text_in) {
  PipelineConfig cfg = PipelineConfig::defaults();
  std::vector<Entry> table = entries(cfg);
  std::map<std::pair<std::string, std::string>, Entry*> index;
  std::set<std::string> sections;
  for (Entry& e : table) {
    index[{e.section, e.key}] = &e;
    sections.insert(e.section);
  }
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in{std::string(text_in)};
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string l = trim(raw);
    if (l.empty()) continue;
    const std::string where = "config line " + std::to_string(line) + ": ";
    if (l.front() == '[') {
      if (l.back() != ']') throw ValidationError(where + "unterminated section header");
      section = trim(l.substr(1, l.size() - 2));
      if (!sections.count(section)) throw ValidationError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected 'key = value'");
    if (section.empty()) throw ValidationError(where + "key outside of a section");
    const std::string key = trim(l.substr(0, eq));
    const std::string value = trim(l.substr(eq + 1));
    const auto it = index.find({section, key});
    if (it == index.end()) throw ValidationError(where + "unknown key '" + key + "' in stage [" + section + "]");
    if (!seen.insert({section, key}).second) {
      throw ValidationError(where + "duplicate key '" + key + "' in stage [" + section + "]");
    }
    try {
      it->second->set(value);
    } catch (const std::exception& ex) {
      throw ValidationError(where + "bad value for '" + key + "' in stage [" + section + "]: " + ex.what());
    }
  }
  for (const Entry& e : table) {
    if (!seen.count({e.section, e.key})) {
      throw ValidationError("config is missing key '" + e.key + "' for stage [" + e.section + "]");
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

RobotModel resolve_robot_model(const PipelineConfig& cfg) {
  return cfg.robot_model == "builtin" ? default_robot_model() : load_robot_model(cfg.robot_model);
}

JointMap resolve_joint_map(const PipelineConfig& cfg) {
  return cfg.joint_map == "builtin" ? parse_joint_map(default_joint_map_text()) : load_joint_map(cfg.joint_map);
}

}  // namespace wmr
