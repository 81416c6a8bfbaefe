#pragma once

#include <map>
#include <string>
#include <vector>

#include "wmr/config.hpp"
#include "wmr/motion_io.hpp"

namespace wmr {

/// Timing and summary numbers of one stage run, for --report.
struct StageInfo {
  std::string stage;
  double seconds = 0.0;
  std::map<std::string, double> values;
};

/// Assigns subject ids by tracking the boxes of each frame. Unconfirmed tracks are dropped;
/// confirmed tracks keep all their frames and are renumbered 0.. by creation order.
MotionFile run_track(const MotionFile& in, const TrackerConfig& cfg, StageInfo* info = nullptr);
/// Replaces each subject's shape and scale with its temporal statistic.
MotionFile run_lock(const MotionFile& in, LockStatistic stat, StageInfo* info = nullptr);
/// Sliding-window smoothing per subject. World fields, now stale, are dropped.
MotionFile run_smooth(const MotionFile& in, const SmootherConfig& cfg, StageInfo* info = nullptr);
/// Contact-aware world root per subject; fills the world fields.
MotionFile run_ground(const MotionFile& in, const GroundConfig& cfg, StageInfo* info = nullptr);
/// Robot joint angles per subject from the grounded motion; appends robot_frame records.
MotionFile run_retarget(const MotionFile& in, const RobotModel& model, const JointMap& map,
                        const RetargetConfig& cfg, StageInfo* info = nullptr);

/// track, lock, smooth, ground and retarget in sequence.
MotionFile run_pipeline(const MotionFile& in, const PipelineConfig& cfg,
                        std::vector<StageInfo>* infos = nullptr);

}  // namespace wmr
