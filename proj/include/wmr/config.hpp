#pragma once

#include <string>
#include <string_view>

#include "wmr/consistency.hpp"
#include "wmr/ground.hpp"
#include "wmr/retarget.hpp"
#include "wmr/smoother.hpp"
#include "wmr/synth.hpp"
#include "wmr/tracker.hpp"

namespace wmr {

/// Settings of every stage. The text form is a sectioned key-value file:
///   [section]
///   key = value          # vectors and matrices are space-separated, matrices row-major
/// A config file must set every key of every section; `dump_config` prints a complete one.
struct PipelineConfig {
  TrackerConfig tracker;
  LockStatistic lock = LockStatistic::Mean;
  SmootherConfig smoother;
  GroundConfig ground;
  RetargetConfig retarget;
  std::string robot_model = "builtin";  // path, or the bundled model
  std::string joint_map = "builtin";    // path, or the bundled map
  SyntheticScenario synth;

  static PipelineConfig defaults();
  void validate() const;
};

std::string dump_config(const PipelineConfig& cfg);
/// Throws ValidationError naming the stage and key for missing, unknown, duplicate or
/// unparsable entries.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::string& path);

RobotModel resolve_robot_model(const PipelineConfig& cfg);
JointMap resolve_joint_map(const PipelineConfig& cfg);

}  // namespace wmr
