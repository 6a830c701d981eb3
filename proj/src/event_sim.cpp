#include "macldp/event_sim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <queue>
#include <string>

#include <fmt/format.h>

namespace macldp {

ArrivalStream::ArrivalStream(bool scripted, double lambda, std::vector<double> times,
                             RandomSource src)
    : scripted_(scripted), lambda_(lambda), times_(std::move(times)), rng_(std::move(src)) {}

ArrivalStream ArrivalStream::poisson(double lambda, RandomSource src) {
  validate_params(Params{lambda, 1});
  return ArrivalStream(false, lambda, {}, std::move(src));
}

ArrivalStream ArrivalStream::scripted(std::vector<double> times, RandomSource picks) {
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !(times[i] > prev) || (i == 0 && !(times[i] > 0.0))) {
      throw InvalidArgument(
          fmt::format("scripted arrivals must be positive and strictly increasing (entry {})", i + 1));
    }
    prev = times[i];
  }
  return ArrivalStream(true, 0.0, std::move(times), std::move(picks));
}

std::optional<double> ArrivalStream::next() {
  if (scripted_) {
    if (cursor_ >= times_.size()) return std::nullopt;
    return times_[cursor_++];
  }
  clock_ += next_interarrival(rng_, lambda_);
  return clock_;
}

std::vector<double> read_arrival_times(std::istream& is) {
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      std::size_t used = 0;
      double v = std::stod(line.substr(first), &used);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidArgument(fmt::format("arrival file line {}: not a number", lineno));
    }
  }
  return out;
}

namespace {

enum class EventKind { Completion = 0, Arrival = 1 };

struct Event {
  double time;
  EventKind kind;
  int channel;

  // Min-heap on time; completions before arrivals at equal times.
  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    return static_cast<int>(kind) > static_cast<int>(o.kind);
  }
};

struct Message {
  double admitted;
  bool destroyed = false;
};

}  // namespace

Trace simulate(const Params& params, Protocol proto, ArrivalStream arrivals, double horizon) {
  const Params p = validate_params(params);
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidArgument("horizon must be positive and finite");
  }

  Trace tr;
  tr.params = p;
  tr.protocol = proto;
  tr.horizon = horizon;

  const double stop = proto == Protocol::Aloha ? horizon + 1.0 : horizon;

  std::vector<int> occupant(p.kappa, -1);  // message index per channel
  std::vector<Message> messages;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;

  auto schedule_arrival = [&] {
    if (auto t = arrivals.next(); t && *t <= stop) {
      queue.push(Event{*t, EventKind::Arrival, -1});
    }
  };
  schedule_arrival();

  std::int64_t attempts_since_admission = 0;
  double last_admission = 0.0;

  while (!queue.empty()) {
    const Event ev = queue.top();
    queue.pop();

    if (ev.kind == EventKind::Completion) {
      occupant[ev.channel] = -1;
      continue;
    }

    const bool observed = ev.time <= horizon;
    if (observed) {
      tr.arrivals.push_back(ev.time);
      ++attempts_since_admission;
    }

    int channel = -1;
    if (proto == Protocol::Csma) {
      auto it = std::find(occupant.begin(), occupant.end(), -1);
      if (it != occupant.end()) channel = static_cast<int>(it - occupant.begin());
    } else {
      const int pick = arrivals.rng().index(p.kappa);
      if (occupant[pick] == -1) {
        channel = pick;
      } else {
        messages[occupant[pick]].destroyed = true;
      }
    }

    if (channel >= 0) {
      occupant[channel] = static_cast<int>(messages.size());
      messages.push_back(Message{ev.time});
      queue.push(Event{ev.time + 1.0, EventKind::Completion, channel});
      if (observed) {
        tr.admissions.push_back(ev.time);
        tr.steps.push_back(StepRecord{attempts_since_admission, ev.time - last_admission});
        attempts_since_admission = 0;
        last_admission = ev.time;
      }
    }
    schedule_arrival();
  }

  tr.outcomes.reserve(tr.admissions.size());
  std::int64_t delivered = 0;
  for (std::size_t i = 0; i < tr.admissions.size(); ++i) {
    const bool ok = !messages[i].destroyed;
    tr.outcomes.push_back(ok ? Outcome::Delivered : Outcome::Destroyed);
    delivered += ok ? 1 : 0;
  }
  tr.counts.attempts_total = static_cast<std::int64_t>(tr.arrivals.size());
  tr.counts.potential_successes = static_cast<std::int64_t>(tr.admissions.size());
  tr.counts.successes_total = delivered;
  return tr;
}

int busy_channels(const Trace& tr, double time) {
  if (time < 0.0 || time > tr.horizon) {
    throw InvalidArgument(fmt::format("query time {} outside [0, {}]", time, tr.horizon));
  }
  // Admissions are sorted; only those in (time - 1, time] are in service.
  auto hi = std::upper_bound(tr.admissions.begin(), tr.admissions.end(), time);
  auto lo = std::upper_bound(tr.admissions.begin(), hi, time - 1.0);
  return static_cast<int>(hi - lo);
}

nlohmann::json trace_to_json(const Trace& tr) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["params"] = {{"lambda", tr.params.lambda}, {"kappa", tr.params.kappa}};
  j["protocol"] = std::string(to_string(tr.protocol));
  j["horizon"] = tr.horizon;
  j["arrivals"] = tr.arrivals;
  j["admissions"] = tr.admissions;
  auto& outs = j["outcomes"] = nlohmann::json::array();
  for (auto o : tr.outcomes) outs.push_back(o == Outcome::Delivered ? "delivered" : "destroyed");
  auto& steps = j["steps"] = nlohmann::json::array();
  for (const auto& s : tr.steps) steps.push_back({{"attempts", s.attempts}, {"gap", s.gap}});
  j["counts"] = {{"attempts", tr.counts.attempts_total},
                 {"successes", tr.counts.successes_total},
                 {"potential_successes", tr.counts.potential_successes}};
  return j;
}

Trace trace_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != 1) throw InvalidArgument("unsupported trace schema_version");
  Trace tr;
  tr.params.lambda = j.at("params").at("lambda").get<double>();
  tr.params.kappa = j.at("params").at("kappa").get<int>();
  tr.protocol = parse_protocol(j.at("protocol").get<std::string>());
  tr.horizon = j.at("horizon").get<double>();
  tr.arrivals = j.at("arrivals").get<std::vector<double>>();
  tr.admissions = j.at("admissions").get<std::vector<double>>();
  for (const auto& o : j.at("outcomes")) {
    tr.outcomes.push_back(o.get<std::string>() == "delivered" ? Outcome::Delivered
                                                              : Outcome::Destroyed);
  }
  for (const auto& s : j.at("steps")) {
    tr.steps.push_back(StepRecord{s.at("attempts").get<std::int64_t>(), s.at("gap").get<double>()});
  }
  const auto& c = j.at("counts");
  tr.counts = Counts{c.at("attempts").get<std::int64_t>(), c.at("successes").get<std::int64_t>(),
                     c.at("potential_successes").get<std::int64_t>()};
  return tr;
}

}  // namespace macldp
