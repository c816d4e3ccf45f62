#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "photonsync/clock_model.hpp"
#include "photonsync/random.hpp"
#include "photonsync/scenario.hpp"
#include "photonsync/timetag.hpp"

namespace photonsync {

/// One package index worth of generated data: the matched Alice and Bob
/// packages plus the surviving true pairs whose Bob tag lies in `bob`.
struct GeneratedPackage {
  std::uint64_t index = 0;
  DataPackage alice;
  DataPackage bob;
  std::vector<GroundTruth::Pair> pairs;
};

/// Streams a session package by package. Three homogeneous Poisson
/// processes run in true time: pairs at r_C (Bob's photon kept with
/// probability transmission_T), extra Alice singles at r_A - r_C, and extra
/// Bob singles at (r_B - r_C)*T + r_dark. Each detection gets Gaussian
/// jitter of sigma_det/sqrt(2); Bob's detections are mapped through the
/// clock model. Output is a pure function of the config.
class SessionGenerator {
 public:
  explicit SessionGenerator(const ScenarioConfig& config);

  std::optional<GeneratedPackage> next();

  std::uint64_t package_count() const { return count_; }
  Ticks package_ticks() const { return package_ticks_; }
  const GroundTruth& truth() const { return truth_; }
  const ScenarioConfig& config() const { return config_; }

 private:
  void advance_chunk();
  bool ready(std::uint64_t k) const;

  ScenarioConfig config_;
  Ticks package_ticks_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t next_index_ = 0;
  double sigma_arm_ = 0.0;
  double margin_ = 0.0;
  double horizon_ = 0.0;
  double t_end_ = 0.0;
  std::shared_ptr<const NoisePath> noise_;
  GroundTruth truth_;

  Rng pair_rng_, alice_rng_, bob_rng_, jitter_a_, jitter_b_, thin_rng_;
  double next_pair_ = 0, next_alice_ = 0, next_bob_ = 0;
  double rate_pair_ = 0, rate_alice_ = 0, rate_bob_ = 0;

  std::vector<Ticks> alice_pending_;
  std::vector<Ticks> bob_pending_;
  std::vector<GroundTruth::Pair> pair_pending_;
};

struct Session {
  PackageStream alice{Party::Alice, {}};
  PackageStream bob{Party::Bob, {}};
  GroundTruth truth;  // pair_times filled
};

/// Materialises a whole session. Throws ConfigError on invalid configs.
Session generate_session(const ScenarioConfig& config);

/// The surviving generated pairs present in both streams, as
/// (alice, bob-local) timestamps, bypassing any estimation. Only pairs whose
/// true timing difference is within `window_s` are returned.
std::vector<std::pair<Ticks, Ticks>> coincidence_oracle(
    const GroundTruth& truth, const PackageStream& alice, const PackageStream& bob,
    double window_s = std::numeric_limits<double>::infinity());

}  // namespace photonsync
