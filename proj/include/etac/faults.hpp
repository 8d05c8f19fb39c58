#pragma once

// Time-varying communication-weight disturbances and actuator fault signals.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "etac/numerics.hpp"

namespace etac {

/// xoshiro256** seeded through splitmix64. Fixed algorithm so that seeded
/// runs are bit-reproducible across platforms and standard libraries.
class Xoshiro256 {
 public:
  static constexpr const char* kId = "xoshiro256starstar/splitmix64";

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
};

inline std::vector<double> sample_frequencies(std::uint64_t seed, std::size_t count) {
  Xoshiro256 rng(seed);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(rng.uniform());
  return out;
}

enum class Waveform { Sin, Cos, Constant };

inline const char* to_string(Waveform w) {
  switch (w) {
    case Waveform::Sin:
      return "sin";
    case Waveform::Cos:
      return "cos";
    case Waveform::Constant:
      return "constant";
  }
  return "?";
}

inline Waveform waveform_from_string(const std::string& s) {
  if (s == "sin") return Waveform::Sin;
  if (s == "cos") return Waveform::Cos;
  if (s == "constant") return Waveform::Constant;
  throw ConfigError("unknown waveform '" + s + "'");
}

struct Signal {
  Waveform waveform = Waveform::Sin;
  double amplitude = 0.0;
  double frequency = 0.0;  // rad/s
  double phase = 0.0;

  double value(double t) const {
    switch (waveform) {
      case Waveform::Sin:
        return amplitude * std::sin(frequency * t + phase);
      case Waveform::Cos:
        return amplitude * std::cos(frequency * t + phase);
      case Waveform::Constant:
        return amplitude;
    }
    return 0.0;
  }

  double rate(double t) const {
    switch (waveform) {
      case Waveform::Sin:
        return amplitude * frequency * std::cos(frequency * t + phase);
      case Waveform::Cos:
        return -amplitude * frequency * std::sin(frequency * t + phase);
      case Waveform::Constant:
        return 0.0;
    }
    return 0.0;
  }
};

/// One communication-weight disturbance channel.
using CommFaultSpec = Signal;

/// Per-input-channel actuator fault of one agent.
struct ActuatorFaultSpec {
  std::vector<Signal> channels;
};

inline double comm_delta(const CommFaultSpec& spec, double t) { return spec.value(t); }

inline Vector actuator_fault(const ActuatorFaultSpec& spec, double t) {
  Vector out(static_cast<Eigen::Index>(spec.channels.size()));
  for (std::size_t k = 0; k < spec.channels.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = spec.channels[k].value(t);
  }
  return out;
}

inline Vector actuator_fault_rate(const ActuatorFaultSpec& spec, double t) {
  Vector out(static_cast<Eigen::Index>(spec.channels.size()));
  for (std::size_t k = 0; k < spec.channels.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = spec.channels[k].rate(t);
  }
  return out;
}

/// All fault signals of a scenario. Disabled classes evaluate to zero.
struct FaultSet {
  std::map<std::string, CommFaultSpec> comm;
  std::vector<ActuatorFaultSpec> actuator;  // indexed by follower
  bool comm_enabled = true;
  bool actuator_enabled = true;

  /// Unknown or empty channel ids are fault-free.
  double delta(const std::string& channel, double t) const {
    if (!comm_enabled || channel.empty()) return 0.0;
    auto it = comm.find(channel);
    return it == comm.end() ? 0.0 : comm_delta(it->second, t);
  }

  double amplitude(const std::string& channel) const {
    if (!comm_enabled || channel.empty()) return 0.0;
    auto it = comm.find(channel);
    return it == comm.end() ? 0.0 : std::abs(it->second.amplitude);
  }

  Vector actuator_value(std::size_t agent, Eigen::Index inputs, double t) const {
    if (!actuator_enabled || agent >= actuator.size()) return Vector::Zero(inputs);
    Vector v = actuator_fault(actuator[agent], t);
    if (v.size() != inputs) {
      throw DimensionError("actuator fault of agent " + std::to_string(agent + 1) + " has " +
                           std::to_string(v.size()) + " channels, plant has " +
                           std::to_string(inputs) + " inputs");
    }
    return v;
  }
};

}  // namespace etac
