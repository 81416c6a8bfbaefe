#include "wmr/consistency.hpp"

#include <algorithm>

#include "wmr/errors.hpp"

namespace wmr {

namespace {

double median_of(std::vector<double> v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

// Summing in sorted order makes the result independent of frame order bit for bit.
double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

LockedIdentity lock_identity(std::span<const FramePrediction> frames, LockStatistic stat) {
  if (frames.empty()) throw ValidationError("lock_identity: empty track");
  const Eigen::Index ds = frames.front().beta_shape.size();
  for (const auto& f : frames) {
    if (f.beta_shape.size() != ds) throw ValidationError("lock_identity: beta_shape dimension varies");
    if (!(f.gamma_scale > 0.0)) throw ValidationError("lock_identity: gamma_scale must be positive");
  }

  LockedIdentity id;
  id.beta_final.resize(ds);
  std::vector<double> col(frames.size());
  auto reduce = [&]() { return stat == LockStatistic::Mean ? sorted_mean(col) : median_of(col); };
  for (Eigen::Index k = 0; k < ds; ++k) {
    for (size_t t = 0; t < frames.size(); ++t) col[t] = frames[t].beta_shape[k];
    id.beta_final[k] = reduce();
  }
  for (size_t t = 0; t < frames.size(); ++t) col[t] = frames[t].gamma_scale;
  id.gamma_final = reduce();
  return id;
}

std::vector<FramePrediction> apply_locked(std::span<const FramePrediction> frames,
                                          const LockedIdentity& id) {
  std::vector<FramePrediction> out(frames.begin(), frames.end());
  for (auto& f : out) {
    f.beta_shape = id.beta_final;
    f.gamma_scale = id.gamma_final;
  }
  return out;
}

}  // namespace wmr
