#include "macldp/core.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "macldp/random.hpp"

namespace macldp {

Params validate_params(const Params& p) {
  if (std::isnan(p.lambda) || std::isinf(p.lambda)) {
    throw InvalidArgument("lambda must be finite");
  }
  if (p.lambda <= 0.0) {
    throw InvalidArgument("lambda must be positive");
  }
  if (p.kappa < 1) {
    throw InvalidArgument("kappa must be at least 1");
  }
  return p;
}

std::string_view to_string(Protocol proto) {
  return proto == Protocol::Aloha ? "aloha" : "csma";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "aloha" || name == "ALOHA") return Protocol::Aloha;
  if (name == "csma" || name == "CSMA") return Protocol::Csma;
  throw InvalidArgument(fmt::format("unknown protocol '{}'", name));
}

HistoryWindow::HistoryWindow(int kappa, std::vector<double> gaps)
    : gaps_(std::move(gaps)) {
  if (kappa < 1) throw InvalidArgument("kappa must be at least 1");
  if (static_cast<int>(gaps_.size()) != kappa - 1) {
    throw InvalidArgument(fmt::format("history window needs {} gaps, got {}",
                                      kappa - 1, gaps_.size()));
  }
  for (double g : gaps_) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw InvalidArgument("history gaps must be positive and finite");
    }
  }
}

HistoryWindow HistoryWindow::sentinel(int kappa) {
  if (kappa < 1) throw InvalidArgument("kappa must be at least 1");
  return HistoryWindow(kappa, std::vector<double>(kappa - 1, kSentinelGap));
}

double HistoryWindow::sum() const {
  double s = 0.0;
  for (double g : gaps_) s += g;
  return s;
}

void HistoryWindow::push(double gap) {
  if (gaps_.empty()) return;
  for (std::size_t i = 0; i + 1 < gaps_.size(); ++i) gaps_[i] = gaps_[i + 1];
  gaps_.back() = gap;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_steps_csv(std::ostream& os, std::span<const StepRecord> steps) {
  os << "index,attempts,gap\n";
  std::size_t i = 1;
  for (const auto& s : steps) {
    os << i++ << ',' << s.attempts << ',' << format_double(s.gap) << '\n';
  }
}

std::vector<StepRecord> read_steps_csv(std::istream& is) {
  std::vector<StepRecord> out;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "index,attempts,gap") {
        throw InvalidArgument(fmt::format("line {}: expected header 'index,attempts,gap'", lineno));
      }
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string idx, att, gap;
    if (!std::getline(row, idx, ',') || !std::getline(row, att, ',') || !std::getline(row, gap)) {
      throw InvalidArgument(fmt::format("line {}: malformed step record", lineno));
    }
    StepRecord rec;
    try {
      rec.attempts = std::stoll(att);
      rec.gap = std::stod(gap);
    } catch (const std::exception&) {
      throw InvalidArgument(fmt::format("line {}: malformed step record", lineno));
    }
    if (rec.attempts < 1 || !(rec.gap > 0.0)) {
      throw InvalidArgument(fmt::format("line {}: attempts must be >= 1 and gap > 0", lineno));
    }
    out.push_back(rec);
  }
  return out;
}

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  engine_.seed(seq);
}

double RandomSource::uniform() { return std::generate_canonical<double, 53>(engine_); }

double RandomSource::exponential(double rate) {
  // 1 - U lies in (0, 1], so the log is finite.
  return -std::log1p(-uniform()) / rate;
}

std::int64_t RandomSource::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine_);
}

int RandomSource::index(int n) {
  std::uniform_int_distribution<int> dist(0, n - 1);
  return dist(engine_);
}

double next_interarrival(RandomSource& src, double lambda) { return src.exponential(lambda); }

}  // namespace macldp
