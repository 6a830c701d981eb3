#ifndef MACLDP_EVENT_SIM_HPP
#define MACLDP_EVENT_SIM_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "macldp/core.hpp"
#include "macldp/random.hpp"

namespace macldp {

/// Source of message arrival times: a Poisson stream or an explicit script.
///
/// Both variants carry a RandomSource; the scripted one uses it only for the
/// ALOHA channel picks.
class ArrivalStream {
 public:
  static ArrivalStream poisson(double lambda, RandomSource src);
  /// Throws InvalidArgument unless times are positive and strictly increasing.
  static ArrivalStream scripted(std::vector<double> times, RandomSource picks = RandomSource(0, 1));

  /// Next arrival time, or nullopt when a script is exhausted.
  std::optional<double> next();
  RandomSource& rng() { return rng_; }
  bool is_scripted() const { return scripted_; }

 private:
  ArrivalStream(bool scripted, double lambda, std::vector<double> times, RandomSource src);

  bool scripted_;
  double lambda_;
  std::vector<double> times_;
  std::size_t cursor_ = 0;
  double clock_ = 0.0;
  RandomSource rng_;
};

/// Newline-delimited decimal arrival times.
std::vector<double> read_arrival_times(std::istream& is);

enum class Outcome { Delivered, Destroyed };

/// Full output of one discrete-event run on [0, horizon].
struct Trace {
  Params params;
  Protocol protocol = Protocol::Csma;
  double horizon = 0.0;
  std::vector<double> arrivals;    // arrival times <= horizon
  std::vector<double> admissions;  // admission times <= horizon
  std::vector<Outcome> outcomes;   // one per admission
  std::vector<StepRecord> steps;   // one per admission, first gap measured from 0
  Counts counts;
};

/// Runs the protocol on [0, horizon]. ALOHA fates of messages admitted before
/// the horizon are settled by simulating on to horizon + 1.
Trace simulate(const Params& p, Protocol proto, ArrivalStream arrivals, double horizon);

/// Channels occupied at `time`; a message occupies [admission, admission + 1).
int busy_channels(const Trace& tr, double time);

nlohmann::json trace_to_json(const Trace& tr);
Trace trace_from_json(const nlohmann::json& j);

}  // namespace macldp

#endif  // MACLDP_EVENT_SIM_HPP
