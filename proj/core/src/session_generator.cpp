#include "photonsync/session_generator.hpp"

#include <algorithm>
#include <cmath>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double first_arrival(Rng& rng, double rate, double from) {
  return rate > 0 ? from + rng.exponential(rate) : kInf;
}

template <typename T, typename Key>
std::vector<T> take_below(std::vector<T>& pending, Ticks limit, Key key) {
  auto mid = std::partition(pending.begin(), pending.end(),
                            [&](const T& v) { return key(v) < limit; });
  std::vector<T> out(pending.begin(), mid);
  pending.erase(pending.begin(), mid);
  std::sort(out.begin(), out.end(), [&](const T& a, const T& b) { return key(a) < key(b); });
  return out;
}

}  // namespace

SessionGenerator::SessionGenerator(const ScenarioConfig& config)
    : config_(config),
      pair_rng_(config.seed, 1),
      alice_rng_(config.seed, 2),
      bob_rng_(config.seed, 3),
      jitter_a_(config.seed, 4),
      jitter_b_(config.seed, 5),
      thin_rng_(config.seed, 6) {
  config_.validate();
  package_ticks_ = std::llround(config_.T_A * kTicksPerSecond);
  count_ = static_cast<std::uint64_t>(std::floor(config_.duration / config_.T_A + 1e-9));
  sigma_arm_ = config_.sigma_det / std::sqrt(2.0);
  margin_ = 12.0 * sigma_arm_ + 1e-9;

  const double session = static_cast<double>(count_) * config_.T_A;
  const ClockModel& clock = config_.clock;
  // First pass at the window edges with a noiseless clock, then refine once
  // the noise path exists (it only moves the edges by the excursion).
  double t_lo = std::min(0.0, true_time(clock, 0.0)) - margin_ - 1e-3;
  double t_hi = std::max(session, true_time(clock, session)) + margin_ + 1e-3;
  noise_ = std::make_shared<NoisePath>(clock.rw_sigma, t_lo - 1.0, t_hi + 1.0, config_.seed);
  truth_ = GroundTruth(clock, noise_);
  t_lo = std::min(0.0, truth_.true_time_of_local(0.0)) - margin_;
  t_end_ = std::max(session, truth_.true_time_of_local(session)) + margin_;

  horizon_ = t_lo;
  rate_pair_ = config_.r_C;
  rate_alice_ = config_.r_A - config_.r_C;
  rate_bob_ = (config_.r_B - config_.r_C) * config_.transmission_T + config_.r_dark;
  next_pair_ = first_arrival(pair_rng_, rate_pair_, horizon_);
  next_alice_ = first_arrival(alice_rng_, rate_alice_, horizon_);
  next_bob_ = first_arrival(bob_rng_, rate_bob_, horizon_);
}

bool SessionGenerator::ready(std::uint64_t k) const {
  if (horizon_ >= t_end_) return true;
  const double edge = static_cast<double>(k + 1) * config_.T_A;
  return horizon_ >= edge + margin_ && horizon_ >= truth_.true_time_of_local(edge) + margin_;
}

void SessionGenerator::advance_chunk() {
  const double end = std::min(horizon_ + config_.T_A, t_end_);
  const Ticks limit = static_cast<Ticks>(count_) * package_ticks_;
  const double sa = sigma_arm_;
  auto bob_local = [&](double tb) {
    return std::llround(tb * kTicksPerSecond + truth_.true_offset(tb) * kTicksPerSecond);
  };

  while (next_pair_ < end) {
    const double e = next_pair_;
    const double ta = e + sa * jitter_a_.normal();
    const Ticks a = std::llround(ta * kTicksPerSecond);
    const bool kept = thin_rng_.uniform() < config_.transmission_T;
    const bool a_in = a >= 0 && a < limit;
    if (a_in) alice_pending_.push_back(a);
    if (kept) {
      const double tb = e + sa * jitter_b_.normal();
      const Ticks b = bob_local(tb);
      if (b >= 0 && b < limit) {
        bob_pending_.push_back(b);
        if (a_in) pair_pending_.push_back({a, b, std::llround(tb * kTicksPerSecond)});
      }
    }
    next_pair_ += pair_rng_.exponential(rate_pair_);
  }
  while (next_alice_ < end) {
    const Ticks a = std::llround((next_alice_ + sa * jitter_a_.normal()) * kTicksPerSecond);
    if (a >= 0 && a < limit) alice_pending_.push_back(a);
    next_alice_ += alice_rng_.exponential(rate_alice_);
  }
  while (next_bob_ < end) {
    const Ticks b = bob_local(next_bob_ + sa * jitter_b_.normal());
    if (b >= 0 && b < limit) bob_pending_.push_back(b);
    next_bob_ += bob_rng_.exponential(rate_bob_);
  }
  horizon_ = end;
}

std::optional<GeneratedPackage> SessionGenerator::next() {
  if (next_index_ >= count_) return std::nullopt;
  const std::uint64_t k = next_index_;
  while (!ready(k)) advance_chunk();

  const Ticks start = static_cast<Ticks>(k) * package_ticks_;
  const Ticks stop = start + package_ticks_;
  auto same = [](Ticks t) { return t; };
  auto to_tags = [](const std::vector<Ticks>& ts, Party party) {
    std::vector<TimeTag> tags;
    tags.reserve(ts.size());
    for (Ticks t : ts) tags.push_back({t, default_channel(party)});
    return tags;
  };

  GeneratedPackage out;
  out.index = k;
  out.alice = DataPackage(k, start, package_ticks_, to_tags(take_below(alice_pending_, stop, same), Party::Alice));
  out.bob = DataPackage(k, start, package_ticks_, to_tags(take_below(bob_pending_, stop, same), Party::Bob));
  out.pairs = take_below(pair_pending_, stop, [](const GroundTruth::Pair& p) { return p.bob; });
  ++next_index_;
  return out;
}

Session generate_session(const ScenarioConfig& config) {
  SessionGenerator gen(config);
  Session s;
  s.truth = gen.truth();
  s.alice.packages.reserve(gen.package_count());
  s.bob.packages.reserve(gen.package_count());
  while (auto p = gen.next()) {
    s.alice.packages.push_back(std::move(p->alice));
    s.bob.packages.push_back(std::move(p->bob));
    s.truth.pair_times.insert(s.truth.pair_times.end(), p->pairs.begin(), p->pairs.end());
  }
  return s;
}

std::vector<std::pair<Ticks, Ticks>> coincidence_oracle(const GroundTruth& truth,
                                                        const PackageStream& alice,
                                                        const PackageStream& bob, double window_s) {
  auto contains = [](const PackageStream& s, Ticks t) {
    auto it = std::upper_bound(s.packages.begin(), s.packages.end(), t,
                               [](Ticks v, const DataPackage& p) { return v < p.end(); });
    if (it == s.packages.end() || t < it->start()) return false;
    const auto tags = it->tags();
    auto hit = std::lower_bound(tags.begin(), tags.end(), t,
                                [](const TimeTag& tag, Ticks v) { return tag.timestamp < v; });
    return hit != tags.end() && hit->timestamp == t;
  };
  const double window_ticks = window_s * kTicksPerSecond;
  std::vector<std::pair<Ticks, Ticks>> out;
  for (const auto& p : truth.pair_times) {
    if (std::abs(static_cast<double>(p.bob_true - p.alice)) > window_ticks) continue;
    if (contains(alice, p.alice) && contains(bob, p.bob)) out.emplace_back(p.alice, p.bob);
  }
  return out;
}

}  // namespace photonsync
