// wmr: batch command-line front end for the motion pipeline.
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wmr/errors.hpp"
#include "wmr/metrics.hpp"
#include "wmr/pipeline.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace wmr;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string input;
  std::string output;
  std::string config;
  std::string report;
  std::string truth;
  std::string runtimes;
  std::optional<std::uint64_t> seed;
  bool dump_defaults = false;
};

// Thrown with the stage name so the top level can prefix it to the message.
struct StageFailure {
  std::string stage;
  std::string message;
  int code;
};

template <class F>
auto tagged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw StageFailure{stage, e.what(), kExitValidation};
  } catch (const NumericalError& e) {
    throw StageFailure{stage, e.what(), kExitNumerical};
  }
}

PipelineConfig load_settings(const Options& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig::defaults() : load_config(o.config);
  if (o.seed) cfg.synth.seed = *o.seed;
  cfg.validate();
  return cfg;
}

MotionFile read_input(const Options& o) {
  if (o.input.empty()) throw ValidationError("--input is required");
  return load_motion(o.input);
}

void write_output(const Options& o, const MotionFile& m) {
  if (o.output.empty()) {
    write_motion(std::cout, m);
  } else {
    save_motion(o.output, m);
  }
}

json stage_json(const StageInfo& info) {
  json j;
  j["stage"] = info.stage;
  j["seconds"] = info.seconds;
  json v = json::object();
  for (const auto& [k, x] : info.values) v[k] = x;
  j["values"] = v;
  return j;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << j.dump(2) << "\n";
}

void write_report(const Options& o, const std::vector<StageInfo>& infos) {
  if (o.report.empty()) return;
  json j = json::array();
  for (const auto& i : infos) j.push_back(stage_json(i));
  write_json(o.report, j);
}

json metrics_json(const std::vector<MetricsReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json j;
    j["subject"] = r.subject;
    j["truth_subject"] = r.truth_subject;
    j["frames"] = r.frames;
    j["mean_acceleration"] = r.mean_acceleration;
    j["foot_slide"] = r.foot_slide;
    j["max_penetration"] = r.max_penetration;
    j["rmse"] = r.rmse;
    json rt = json::object();
    for (const auto& [k, x] : r.runtimes) rt[k] = x;
    j["runtimes"] = rt;
    out.push_back(j);
  }
  return out;
}

std::vector<MetricsReport> metrics_with_runtimes(const MotionFile& result, const MotionFile& truth,
                                                 const std::vector<StageInfo>& infos) {
  auto reports = compute_metrics(result, truth, standard_rig(), standard_decoder());
  for (auto& r : reports) {
    for (const auto& i : infos) r.runtimes[i.stage] = i.seconds;
  }
  return reports;
}

std::vector<StageInfo> read_runtimes(const std::string& path) {
  std::vector<StageInfo> infos;
  if (path.empty()) return infos;
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open report '" + path + "'");
  try {
    const json j = json::parse(f);
    for (const auto& s : j) infos.push_back({s.at("stage").get<std::string>(), s.at("seconds").get<double>(), {}});
  } catch (const json::exception& e) {
    throw ValidationError("report '" + path + "' is malformed: " + e.what());
  }
  return infos;
}

using StageFn = std::function<MotionFile(const MotionFile&, const PipelineConfig&, StageInfo*)>;

StageFn stage_fn(const std::string& name) {
  if (name == "track") return [](const MotionFile& m, const PipelineConfig& c, StageInfo* i) { return run_track(m, c.tracker, i); };
  if (name == "lock") return [](const MotionFile& m, const PipelineConfig& c, StageInfo* i) { return run_lock(m, c.lock, i); };
  if (name == "smooth") return [](const MotionFile& m, const PipelineConfig& c, StageInfo* i) { return run_smooth(m, c.smoother, i); };
  if (name == "ground") return [](const MotionFile& m, const PipelineConfig& c, StageInfo* i) { return run_ground(m, c.ground, i); };
  return [](const MotionFile& m, const PipelineConfig& c, StageInfo* i) {
    return run_retarget(m, resolve_robot_model(c), resolve_joint_map(c), c.retarget, i);
  };
}

const std::vector<std::string> kStages{"track", "lock", "smooth", "ground", "retarget"};

void cmd_stage(const std::string& name, const Options& o) {
  const PipelineConfig cfg = tagged("config", [&] { return load_settings(o); });
  const MotionFile in = tagged("io", [&] { return read_input(o); });
  StageInfo info;
  const MotionFile out = tagged(name, [&] { return stage_fn(name)(in, cfg, &info); });
  tagged("io", [&] {
    write_output(o, out);
    write_report(o, {info});
    return 0;
  });
}

void cmd_synth(const Options& o) {
  const PipelineConfig cfg = tagged("config", [&] { return load_settings(o); });
  const SynthOutput s = tagged("synth", [&] { return synth_generate(cfg.synth); });
  tagged("io", [&] {
    write_output(o, s.corrupted);
    if (!o.truth.empty()) save_motion(o.truth, s.truth);
    return 0;
  });
}

void cmd_pipeline(const Options& o) {
  const PipelineConfig cfg = tagged("config", [&] { return load_settings(o); });
  std::optional<MotionFile> truth;
  MotionFile m;
  if (o.input.empty()) {
    SynthOutput s = tagged("synth", [&] { return synth_generate(cfg.synth); });
    m = std::move(s.corrupted);
    truth = std::move(s.truth);
  } else {
    m = tagged("io", [&] { return read_input(o); });
  }
  std::vector<StageInfo> infos;
  for (const auto& name : kStages) {
    StageInfo info;
    m = tagged(name, [&] { return stage_fn(name)(m, cfg, &info); });
    infos.push_back(info);
  }
  tagged("io", [&] {
    write_output(o, m);
    if (o.input.empty() && !o.truth.empty()) save_motion(o.truth, *truth);
    write_report(o, infos);
    return 0;
  });
}

void cmd_metrics(const Options& o) {
  if (o.truth.empty()) throw StageFailure{"metrics", "--truth is required", kExitValidation};
  const MotionFile result = tagged("io", [&] { return read_input(o); });
  const MotionFile truth = tagged("io", [&] { return load_motion(o.truth); });
  const auto infos = tagged("io", [&] { return read_runtimes(o.runtimes); });
  const auto reports = tagged("metrics", [&] { return metrics_with_runtimes(result, truth, infos); });
  tagged("io", [&] {
    write_json(o.output, metrics_json(reports));
    if (!o.report.empty()) write_json(o.report, metrics_json(reports));
    return 0;
  });
}

void cmd_config(const Options& o) {
  const std::string text =
      o.dump_defaults ? dump_config(PipelineConfig::defaults())
                      : dump_config(tagged("config", [&] { return load_settings(o); }));
  if (o.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(o.output);
    if (!f) throw StageFailure{"io", "cannot write '" + o.output + "'", kExitValidation};
    f << text;
  }
}

void common_flags(CLI::App* sub, Options& o, bool input = true) {
  if (input) sub->add_option("--input,-i", o.input, "input motion file");
  sub->add_option("--output,-o", o.output, "output file (stdout if omitted)");
  sub->add_option("--config,-c", o.config, "config file (built-in defaults if omitted)");
  sub->add_option("--seed", o.seed, "overrides [synth] seed");
  sub->add_option("--report", o.report, "write per-stage timings and summaries as JSON");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wmr: world-coordinate human motion to humanoid robot retargeting"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic walk (corrupted copy to --output)");
  common_flags(synth, o, false);
  synth->add_option("--truth", o.truth, "also write the ground truth here");

  for (const auto& name : kStages) common_flags(app.add_subcommand(name, "run the " + name + " stage"), o);

  auto* pipeline = app.add_subcommand("pipeline", "run every stage; synthesizes the input if --input is absent");
  common_flags(pipeline, o);
  pipeline->add_option("--truth", o.truth, "where to write the synthesized ground truth");

  auto* metrics = app.add_subcommand("metrics", "compare a result against ground truth");
  common_flags(metrics, o);
  metrics->add_option("--truth", o.truth, "ground-truth motion file");
  metrics->add_option("--runtimes", o.runtimes, "stage report whose timings to include");

  auto* config = app.add_subcommand("config", "print the configuration");
  config->add_flag("--dump-defaults", o.dump_defaults, "print every default setting");
  config->add_option("--config,-c", o.config, "config file to check and print");
  config->add_option("--output,-o", o.output, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth") {
      cmd_synth(o);
    } else if (name == "pipeline") {
      cmd_pipeline(o);
    } else if (name == "metrics") {
      cmd_metrics(o);
    } else if (name == "config") {
      cmd_config(o);
    } else {
      cmd_stage(name, o);
    }
  } catch (const StageFailure& f) {
    std::cerr << "wmr " << name << ": [" << f.stage << "] " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "wmr " << name << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
