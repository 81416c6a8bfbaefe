#include "wmr/pipeline.hpp"

#include <chrono>
#include <map>

#include "wmr/errors.hpp"

namespace wmr {

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Records of one subject, checked for strictly increasing frame indices.
std::vector<MotionRecord> subject_track(const MotionFile& m, int id, const char* stage) {
  std::vector<MotionRecord> out;
  for (const MotionRecord* r : subject_records(m, id)) {
    if (!out.empty() && r->pred.frame_index <= out.back().pred.frame_index) {
      throw ValidationError(std::string(stage) + ": subject " + std::to_string(id) +
                            " has repeated or unordered frame indices");
    }
    out.push_back(*r);
  }
  return out;
}

std::vector<int> tracked_subjects(const MotionFile& m, const char* stage) {
  const std::vector<int> ids = subject_ids(m);
  for (int id : ids) {
    if (id < 0) throw ValidationError(std::string(stage) + ": input has untracked records (subject_id -1)");
  }
  return ids;
}

std::vector<FramePrediction> predictions(const std::vector<MotionRecord>& recs) {
  std::vector<FramePrediction> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(r.pred);
  return out;
}

MotionFile with_records(const MotionFile& in, std::vector<MotionRecord> recs) {
  MotionFile out;
  out.header = in.header;
  out.frames = std::move(recs);
  out.robot_frames = in.robot_frames;
  sort_records(out);
  return out;
}

}  // namespace

MotionFile run_track(const MotionFile& in, const TrackerConfig& cfg, StageInfo* info) {
  const Stopwatch sw;
  cfg.validate();
  TrackerSession session;
  std::map<int, std::vector<const MotionRecord*>> by_frame;
  for (const auto& r : in.frames) by_frame[r.pred.frame_index].push_back(&r);
  for (const auto& [frame, recs] : by_frame) {
    std::vector<FramePrediction> dets;
    for (const MotionRecord* r : recs) dets.push_back(r->pred);
    tracker_step(session, dets, cfg);
  }
  const std::vector<Track> tracks = tracker_finish(session);
  std::vector<MotionRecord> out;
  for (size_t k = 0; k < tracks.size(); ++k) {
    for (const FramePrediction& p : tracks[k].frames) {
      MotionRecord r;
      r.subject_id = static_cast<int>(k);
      r.pred = p;
      out.push_back(std::move(r));
    }
  }
  MotionFile res;
  res.header = in.header;
  res.frames = std::move(out);
  sort_records(res);
  if (info) {
    info->stage = "track";
    info->values["detections"] = static_cast<double>(in.frames.size());
    info->values["tracks_created"] = session.next_id;
    info->values["tracks_confirmed"] = static_cast<double>(tracks.size());
    info->values["records_out"] = static_cast<double>(res.frames.size());
    info->seconds = sw.seconds();
  }
  return res;
}

MotionFile run_lock(const MotionFile& in, LockStatistic stat, StageInfo* info) {
  const Stopwatch sw;
  std::vector<MotionRecord> out;
  for (int id : tracked_subjects(in, "lock")) {
    std::vector<MotionRecord> recs = subject_track(in, id, "lock");
    const auto preds = predictions(recs);
    const LockedIdentity locked = lock_identity(preds, stat);
    const auto applied = apply_locked(preds, locked);
    for (size_t t = 0; t < recs.size(); ++t) recs[t].pred = applied[t];
    if (info) info->values["gamma_subject_" + std::to_string(id)] = locked.gamma_final;
    out.insert(out.end(), recs.begin(), recs.end());
  }
  MotionFile res = with_records(in, std::move(out));
  if (info) {
    info->stage = "lock";
    info->seconds = sw.seconds();
  }
  return res;
}

MotionFile run_smooth(const MotionFile& in, const SmootherConfig& cfg, StageInfo* info) {
  const Stopwatch sw;
  const SkeletonRig& rig = standard_rig();
  cfg.validate(rig);
  std::vector<MotionRecord> out;
  for (int id : tracked_subjects(in, "smooth")) {
    std::vector<MotionRecord> recs = subject_track(in, id, "smooth");
    SmoothReport report;
    const auto smoothed = smooth_track(predictions(recs), rig, standard_decoder(), cfg, &report);
    for (size_t t = 0; t < recs.size(); ++t) {
      recs[t].pred = smoothed[t];
      recs[t].world.reset();
    }
    if (info) {
      double first = 0.0, last = 0.0;
      for (const auto& w : report.windows) {
        first += w.loss_history.front();
        last += w.loss_history.back();
      }
      const std::string s = "_subject_" + std::to_string(id);
      info->values["windows" + s] = static_cast<double>(report.windows.size());
      info->values["loss_initial" + s] = first;
      info->values["loss_final" + s] = last;
    }
    out.insert(out.end(), recs.begin(), recs.end());
  }
  MotionFile res = with_records(in, std::move(out));
  if (info) {
    info->stage = "smooth";
    info->seconds = sw.seconds();
  }
  return res;
}

MotionFile run_ground(const MotionFile& in, const GroundConfig& cfg, StageInfo* info) {
  const Stopwatch sw;
  cfg.validate();
  std::vector<MotionRecord> out;
  for (int id : tracked_subjects(in, "ground")) {
    std::vector<MotionRecord> recs = subject_track(in, id, "ground");
    const GroundResult g = optimize_root(predictions(recs), standard_rig(), standard_decoder(), cfg);
    for (size_t t = 0; t < recs.size(); ++t) {
      WorldRoot w;
      w.translation = g.trajectory[t];
      w.rotation = g.root_rotation[t];
      w.ground_height = g.ground_height;
      w.contact = g.contacts[t].p_c;
      recs[t].world = w;
    }
    if (info) {
      const std::string s = "_subject_" + std::to_string(id);
      info->values["energy_initial" + s] = g.initial_energy.total;
      info->values["energy_final" + s] = g.final_energy.total;
      info->values["ground_height" + s] = g.ground_height;
    }
    out.insert(out.end(), recs.begin(), recs.end());
  }
  MotionFile res = with_records(in, std::move(out));
  if (info) {
    info->stage = "ground";
    info->seconds = sw.seconds();
  }
  return res;
}

MotionFile run_retarget(const MotionFile& in, const RobotModel& model, const JointMap& map,
                        const RetargetConfig& cfg, StageInfo* info) {
  const Stopwatch sw;
  const std::vector<int> ids = tracked_subjects(in, "retarget");
  std::vector<std::vector<MotionRecord>> tracks;
  for (int id : ids) {
    tracks.push_back(subject_track(in, id, "retarget"));
    for (const auto& r : tracks.back()) {
      if (!r.world) throw ValidationError("retarget: subject " + std::to_string(id) + " is not grounded (run ground first)");
    }
  }
  std::vector<RetargetedMotion> results(ids.size());
  std::vector<std::string> errors(ids.size());
  std::vector<int> kinds(ids.size(), 0);
  // Subjects are independent; each sequence is warm-started frame by frame.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(ids.size()); ++k) {
    try {
      const auto& recs = tracks[k];
      std::vector<Vec3> roots;
      for (const auto& r : recs) roots.push_back(r.world->translation);
      results[k] = retarget_sequence(predictions(recs), roots, recs.front().world->ground_height,
                                     standard_rig(), standard_decoder(), model, map, cfg);
    } catch (const NumericalError& e) {
      errors[k] = e.what();
      kinds[k] = 2;
    } catch (const std::exception& e) {
      errors[k] = e.what();
      kinds[k] = 1;
    }
  }
  for (size_t k = 0; k < ids.size(); ++k) {
    if (kinds[k] == 2) throw NumericalError(errors[k]);
    if (kinds[k] == 1) throw ValidationError(errors[k]);
  }

  MotionFile res = in;
  res.header.robot = model.name;
  res.header.robot_joints = model.dof_names();
  res.robot_frames.clear();
  double worst_ee = 0.0;
  for (size_t k = 0; k < ids.size(); ++k) {
    for (const RetargetedFrame& f : results[k].frames) {
      RobotRecord r;
      r.frame_index = f.frame_index;
      r.subject_id = ids[k];
      r.root_rotation = f.root_rotation;
      r.root_translation = f.root_translation;
      r.joint_angles = f.q;
      res.robot_frames.push_back(std::move(r));
      for (double e : f.stage2.ee_error) worst_ee = std::max(worst_ee, e);
    }
    if (info) info->values["height_ratio_subject_" + std::to_string(ids[k])] = results[k].height_ratio;
  }
  sort_records(res);
  if (info) {
    info->stage = "retarget";
    info->values["max_end_effector_error"] = worst_ee;
    info->seconds = sw.seconds();
  }
  return res;
}

MotionFile run_pipeline(const MotionFile& in, const PipelineConfig& cfg, std::vector<StageInfo>* infos) {
  cfg.validate();
  const RobotModel model = resolve_robot_model(cfg);
  const JointMap map = resolve_joint_map(cfg);
  StageInfo i1, i2, i3, i4, i5;
  MotionFile m = run_track(in, cfg.tracker, &i1);
  m = run_lock(m, cfg.lock, &i2);
  m = run_smooth(m, cfg.smoother, &i3);
  m = run_ground(m, cfg.ground, &i4);
  m = run_retarget(m, model, map, cfg.retarget, &i5);
  if (infos) *infos = {i1, i2, i3, i4, i5};
  return m;
}

}  // namespace wmr
