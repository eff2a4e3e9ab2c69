// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
// Set GEOREF_EXT_SEQUENCE to a directory holding scans/, refmap.bin (with its
// sidecar) and gt.txt to run the optional external-sequence check.

#include "georef/error.hpp"
#include "georef/evalmetrics.hpp"
#include "georef/io.hpp"
#include "georef/pipeline.hpp"
#include "georef/posegraph.hpp"
#include "georef/registration.hpp"
#include "georef/synth.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>

using namespace georef;
using georef::test::Gen;
using georef::test::kDeg;

namespace {

int failures = 0;

template <class... Args>
std::string strf(const char* fmt, Args... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string out(static_cast<std::size_t>(n), '\0');
  std::snprintf(out.data(), out.size() + 1, fmt, args...);
  return out;
}

void report(const char* id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%-5s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Trajectory estimated(const RunResult& r) {
  Trajectory t;
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) t.push_back({i, r.trajectory[i].pose});
  return t;
}

Trajectory prefix(const Trajectory& t, std::size_t n) { return {t.begin(), t.begin() + static_cast<long>(n)}; }

double final_error(const RunResult& r, const Trajectory& gt) {
  return (r.trajectory.back().pose.translation() - gt[r.trajectory.size() - 1].pose.translation()).norm();
}

double rotation_deg(const Pose& a, const Pose& b) { return rotation_angle(a.rotation().inverse() * b.rotation()) / kDeg; }

struct City {
  SyntheticWorld world = test::city_world();
  ReferenceMap reference = build_world_reference_map(world);
  std::vector<PointCloud> clouds = test::simulate_all(world, world.trajectory.size());
};

void external_sequence() {
  const char* dir = std::getenv("GEOREF_EXT_SEQUENCE");
  if (dir == nullptr || *dir == '\0') {
    std::printf("AC1   SKIP  external sequence not supplied (GEOREF_EXT_SEQUENCE unset); not gating\n");
    return;
  }
  const std::filesystem::path root(dir);
  try {
    const ReferenceMap reference = read_reference_map(root / "refmap.bin");
    const Trajectory gt = read_trajectory(root / "gt.txt");
    std::vector<PointCloud> clouds;
    for (const auto& f : list_scan_files(root / "scans")) clouds.push_back(read_cloud(f));
    if (clouds.size() != gt.size()) throw Error(strf("%zu scans but %zu ground-truth poses", clouds.size(), gt.size()));
    PipelineConfig config;
    if (std::filesystem::exists(root / "config.cfg")) config = load_pipeline_config((root / "config.cfg").string());
    const RunResult r = run(reference, clouds, gt.front().pose, config);
    Trajectory est = estimated(r);
    for (std::size_t i = 0; i < est.size(); ++i) est[i].index = gt[i].index;
    const AteResult a = ate(est, gt, AteMode::kFirstFrame);
    report("AC1", a.mean < 2.0, strf("external sequence, %zu frames: mean ATE %.3f m (limit 2 m)", est.size(), a.mean));
  } catch (const std::exception& e) {
    report("AC1", false, std::string("external sequence: ") + e.what());
  }
}

void registration_oracle() {
  const test::OracleScene scene = test::oracle_scene();
  const PointCloud clean = test::subsample(scene.stored, 10000);
  Gen gen(2024);
  PointCloud noisy = clean;
  for (std::size_t i = 0; i < noisy.size(); i += 5) noisy[i] += 10.0 * gen.unit();

  const auto trial = [&](const PointCloud& src, double t_limit, double r_limit, const char* id, const char* label) {
    double worst_t = 0.0;
    double worst_r = 0.0;
    int ok = 0;
    for (int i = 0; i < 100; ++i) {
      const RegistrationResult r = icp_align(src, scene.map, gen.perturbation(0.5, 5.0 * kDeg));
      const double et = r.pose.translation().norm();
      const double er = rotation_deg(r.pose, Pose::Identity());
      worst_t = std::max(worst_t, et);
      worst_r = std::max(worst_r, er);
      if (r.valid && et <= t_limit && er <= r_limit) ++ok;
    }
    report(id, ok == 100,
           strf("icp %s (%zu pts): %d/100 within %.0f cm / %.1f deg, worst %.2e m / %.2e deg", label,
                       src.size(), ok, 100 * t_limit, r_limit, worst_t, worst_r));
  };
  trial(clean, 0.01, 0.1, "AC5a", "clean scene");
  trial(noisy, 0.02, 0.2, "AC5b", "20% 10 m outliers");
}

void gating_gap(const City& city) {
  const Trajectory& gt = city.world.trajectory;
  const std::vector<double> lens = path_lengths(gt);
  std::size_t c = 0;
  while (lens[c] < 200.0) ++c;
  const Vec2 center = gt[c].pose.translation().head<2>();
  const Vec2 dir = (gt[c + 1].pose.translation() - gt[c - 1].pose.translation()).head<2>().normalized();
  const auto along = [&](const Vec3& global) { return (global.head<2>() - center).dot(dir); };

  ReferenceMap gapped = city.reference;
  std::erase_if(gapped.points, [&](const Vec3& p) { return std::abs(along(p + gapped.origin_offset)) <= 25.0; });
  const std::size_t frames = c + 80;
  const RunResult r = run(gapped, {city.clouds.begin(), city.clouds.begin() + static_cast<long>(frames)}, gt[0].pose);

  bool gating_exact = true;
  std::size_t first = frames;
  std::size_t last = 0;
  std::size_t ungated = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    const FrameResult& f = r.trajectory[i];
    if (f.static_frame) continue;
    if (f.s2m_used != (f.s2m_inlier_ratio > 0.5)) gating_exact = false;
    if (!f.s2m_used) {
      first = std::min(first, i);
      last = std::max(last, i);
      ++ungated;
    }
  }
  const bool contiguous = ungated > 0 && last - first + 1 == ungated;
  const bool inside = ungated > 0 && std::abs(along(gt[first].pose.translation())) <= 25.0 &&
                      std::abs(along(gt[last].pose.translation())) <= 25.0 && first <= c && c <= last;
  double gap_max = 0.0;
  for (std::size_t i = first; ungated > 0 && i <= last; ++i) {
    gap_max = std::max(gap_max, (r.trajectory[i].pose.translation() - gt[i].pose.translation()).norm());
  }
  const double end_error = ungated > 0 ? (r.trajectory[last].pose.translation() - gt[last].pose.translation()).norm()
                                       : std::numeric_limits<double>::infinity();
  report("AC6", gating_exact && contiguous && inside && end_error <= 1.0,
         strf("50 m prior gap: s2m off exactly when ratio <= 0.5: %s; %zu ungated frames %zu..%zu "
                     "(one run inside the gap: %s); end-of-gap error %.3f m, max in gap %.3f m (limit 1 m)",
                     gating_exact ? "yes" : "no", ungated, first, last, contiguous && inside ? "yes" : "no", end_error,
                     gap_max));
}

void posegraph_oracle() {
  // Tukey on the far absolute measurement plus Cauchy on the relative one.
  double oracle = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double x = -2.0; x <= 12.0; x += 1e-5) {
    const double cost = tukey_loss((x - 10.0) * (x - 10.0), 1.0) + cauchy_loss(x * x, 1.0);
    if (cost < best) {
      best = cost;
      oracle = x;
    }
  }
  Gen gen(77);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Pose prev = gen.pose(100.0, 3.0);
    const Pose delta = gen.pose(2.0, 0.3);
    const Pose p = prev * delta;
    const Vec3 dir = gen.unit();
    const AbsoluteConstraint abs{Pose(p.translation() + 10.0 * dir, p.rotation())};
    const FrameOptimizationResult r = optimize_frame(p, abs, RelativeConstraint{prev, delta});
    const Vec3 d = r.pose.translation() - p.translation();
    const double along = d.dot(dir);
    worst = std::max({worst, std::abs(along - oracle), (d - along * dir).norm()});
  }
  report("AC7", std::abs(oracle) <= 1e-3 && worst <= 1e-3,
         strf("conflicting constraints: grid-search minimizer %.1e m, optimize_frame worst deviation "
                     "%.2e m over 50 poses (limit 1e-3)",
                     oracle, worst));
}

void metric_oracles() {
  Trajectory line;
  for (std::size_t i = 0; i <= 1000; ++i) line.push_back({i, Pose::FromTranslation({static_cast<double>(i), 0, 0})});

  Trajectory scaled = line;
  for (auto& e : scaled) e.pose = Pose::FromTranslation(1.01 * e.pose.translation());
  const RteResult s = kitti_rte(scaled, line);
  report("AC8a", std::abs(s.translational_percent - 1.0) <= 0.1,
         strf("rte on 1.01x scale: %.6f %% (1.0 +/- 0.1)", s.translational_percent));

  Trajectory biased = line;
  const double bias = 0.01;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Pose motion = line[i - 1].pose.inverse() * line[i].pose;
    const double step = motion.translation().norm();
    biased[i].pose = biased[i - 1].pose * motion * Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(bias * step * kDeg, Vec3::UnitZ())));
  }
  const RteResult y = kitti_rte(biased, line);
  report("AC8b", std::abs(y.rotational_deg_per_m - bias) <= 0.1 * bias,
         strf("rte on 0.01 deg/m yaw bias: %.6f deg/m (+/- 10 %%)", y.rotational_deg_per_m));

  const std::size_t n = 100;
  const Trajectory gt = prefix(line, n);
  Trajectory est = gt;
  est[n / 2].pose = Pose::FromTranslation(est[n / 2].pose.translation() + Vec3(0, 1, 0));
  const AteResult a = ate(est, gt);
  report("AC8c", a.mean == 1.0 / static_cast<double>(n) && a.max == 1.0,
         strf("ate with one 1 m offset in %zu frames: mean %.17g max %.17g (expect 1/N, 1)", n, a.mean, a.max));
}

void mme_ordering(const City& city, const RunResult& full) {
  const Trajectory& gt = city.world.trajectory;
  const std::vector<double> lens = path_lengths(gt);
  std::size_t c = 0;
  while (lens[c] < 500.0) ++c;
  const Eigen::Vector2d crop = gt[c].pose.translation().head<2>();

  std::vector<Pose> est_poses, noisy_poses, true_poses;
  Rng rng(4242);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    est_poses.push_back(full.trajectory[i].pose);
    true_poses.push_back(gt[i].pose);
    const Vec3 dt(0.1 * rng.normal(), 0.1 * rng.normal(), 0.1 * rng.normal());
    const Vec3 dr(rng.normal(), rng.normal(), rng.normal());
    noisy_poses.push_back(Pose(gt[i].pose.translation() + dt, gt[i].pose.rotation() * so3_exp(0.5 * kDeg * dr)));
  }
  const MmeResult est = mme(mme_preprocess(city.clouds, est_poses, crop));
  const MmeResult noisy = mme(mme_preprocess(city.clouds, noisy_poses, crop));
  const MmeResult truth = mme(mme_preprocess(city.clouds, true_poses, crop));
  report("AC9", est.mean_entropy < noisy.mean_entropy,
         strf("mme in 100 m crop: pipeline %.4f < noisy ground truth %.4f (exact ground truth %.4f)",
                     est.mean_entropy, noisy.mean_entropy, truth.mean_entropy));
}

void invariant_suites(const City& city) {
  Gen gen(10);
  int bad = 0;

  // Voxel map: capacity, spacing, key consistency and trim against brute force.
  {
    VoxelMap map;
    PointCloud pts;
    for (int i = 0; i < 30000; ++i) pts.push_back(gen.vec(-8.0, 8.0) * (i % 3 ? 1.0 : 0.2));
    map.insert(pts);
    const double s = map.params().voxel_size;
    for (const auto& [key, bucket] : map.buckets()) {
      if (bucket.size() > map.params().max_points_per_voxel) ++bad;
      for (std::size_t i = 0; i < bucket.size(); ++i) {
        if (!(voxel_key(bucket[i], s) == key)) ++bad;
        for (std::size_t j = i + 1; j < bucket.size(); ++j) {
          if ((bucket[i] - bucket[j]).norm() < map.params().min_point_distance) ++bad;
        }
      }
    }
    const Vec3 center = gen.vec(-3.0, 3.0);
    std::size_t expected = 0;
    for (const auto& kv : map.buckets()) expected += (voxel_center(kv.first, s) - center).norm() > 5.0;
    if (map.trim(center, 5.0) != expected) ++bad;
    for (const auto& kv : map.buckets()) bad += (voxel_center(kv.first, s) - center).norm() > 5.0;
  }
  const int voxel_bad = bad;

  // Point Jacobian vs central differences on the left perturbation.
  double jac_rel = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Pose pose = gen.pose(50.0, 3.0);
    const Vec3 p = gen.vec(-30.0, 30.0);
    const Eigen::Matrix<double, 3, 6> j = point_jacobian(pose, p);
    Eigen::Matrix<double, 3, 6> fd;
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      fd.col(k) = (se3_exp(Twist::FromVector(d)) * pose * p - se3_exp(Twist::FromVector(-d)) * pose * p) / (2 * h);
    }
    jac_rel = std::max(jac_rel, (fd - j).norm() / j.norm());
  }

  // Slerp endpoints and se3 round trips.
  double slerp_err = 0.0;
  double log_exp = 0.0;
  double exp_log = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Quat q0 = gen.rotation(3.1);
    const Quat q1 = gen.rotation(3.1);
    slerp_err = std::max({slerp_err, rotation_angle(slerp(q0, q1, 0.0).inverse() * q0),
                          rotation_angle(slerp(q0, q1, 1.0).inverse() * q1)});
    Twist v;
    v.rho = gen.vec(-100.0, 100.0);
    v.theta = gen.unit() * gen.uniform(0.0, 3.1);
    log_exp = std::max(log_exp, (se3_log(se3_exp(v)).vector() - v.vector()).norm());
    const Pose t = gen.pose(100.0, 3.1);
    const Pose back = se3_exp(se3_log(t));
    exp_log = std::max(exp_log, (back.translation() - t.translation()).norm() + rotation_angle(back.rotation().inverse() * t.rotation()));
  }

  // Two identical runs.
  const std::vector<PointCloud> head(city.clouds.begin(), city.clouds.begin() + 60);
  const RunResult a = run(city.reference, head, city.world.trajectory[0].pose);
  const RunResult b = run(city.reference, head, city.world.trajectory[0].pose);
  bool identical = a.map == b.map;
  for (std::size_t i = 0; i < head.size(); ++i) {
    identical = identical && a.trajectory[i].pose.translation() == b.trajectory[i].pose.translation() &&
                a.trajectory[i].pose.rotation().coeffs() == b.trajectory[i].pose.rotation().coeffs();
  }

  report("AC10a", voxel_bad == 0, strf("voxel map capacity/spacing/trim invariants: %d violations", voxel_bad));
  report("AC10b", jac_rel <= 1e-6, strf("point Jacobian vs central differences: max relative %.2e (limit 1e-6)", jac_rel));
  report("AC10c", slerp_err <= 1e-12, strf("slerp endpoint identities: max %.2e rad", slerp_err));
  report("AC10d", log_exp <= 1e-9 && exp_log <= 1e-9,
         strf("se3 round trips: log(exp) %.2e, exp(log) %.2e (limit 1e-9)", log_exp, exp_log));
  report("AC10e", identical, strf("two 60-frame runs bit-identical: %s", identical ? "yes" : "no"));
}

}  // namespace

int main() {
  try {
    external_sequence();

    auto t0 = std::chrono::steady_clock::now();
    const City city;
    const Trajectory& gt = city.world.trajectory;
    std::printf("      city: %zu frames, %.0f m loop, %zu reference points, simulated in %.1f s\n", gt.size(),
                path_lengths(gt).back(), city.reference.points.size(), seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    const RunResult full = run(city.reference, city.clouds, gt[0].pose);
    const double runtime = seconds_since(t0);
    const Trajectory est = estimated(full);
    const AteResult a = ate(est, gt, AteMode::kFirstFrame);
    const AteResult a_none = ate(est, gt, AteMode::kNone);
    const AteResult a_um = ate(est, gt, AteMode::kUmeyama);
    report("AC2", gt.size() >= 500 && path_lengths(gt).back() >= 1000.0 && a.mean <= 0.3 && a.max <= 1.0 && runtime <= 300.0,
           strf("full pipeline: ATE first_frame mean %.3f max %.3f m (limits 0.3 / 1.0); none %.3f / %.3f; "
                       "umeyama %.3f / %.3f; runtime %.1f s (limit 300)",
                       a.mean, a.max, a_none.mean, a_none.max, a_um.mean, a_um.max, runtime));

    PipelineConfig s2s_only;
    s2s_only.use_scan_to_map = false;
    const RunResult odo = run(city.reference, city.clouds, gt[0].pose, s2s_only);
    const double e_full = final_error(full, gt);
    const double e_odo = final_error(odo, gt);
    report("AC3", e_odo >= 3.0 * e_full,
           strf("final-frame error: scan-to-scan only %.3f m vs full %.3f m, ratio %.1f (limit 3)", e_odo,
                       e_full, e_odo / e_full));

    {
      const Vec3 offset(10000.0, 20000.0, 0.0);
      const SyntheticWorld shifted = shifted_world(city.world, offset);
      const ReferenceMap reference = build_world_reference_map(shifted);
      const std::vector<PointCloud> clouds = test::simulate_all(shifted, shifted.trajectory.size());
      const RunResult r = run(reference, clouds, shifted.trajectory[0].pose);
      const AteResult g = ate(estimated(r), shifted.trajectory, AteMode::kNone);
      const Vec3 start = r.trajectory.front().pose.translation();
      report("AC4", g.mean <= 0.3 && (start.head<2>() - offset.head<2>()).norm() < 1000.0,
             strf("global offset (10000, 20000): output starts at (%.1f, %.1f), unaligned ATE mean %.3f "
                         "max %.3f m (limit 0.3)",
                         start.x(), start.y(), g.mean, g.max));
    }

    registration_oracle();
    gating_gap(city);
    posegraph_oracle();
    metric_oracles();
    mme_ordering(city, full);
    invariant_suites(city);
  } catch (const std::exception& e) {
    std::printf("ERROR %s\n", e.what());
    return 2;
  }
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}
