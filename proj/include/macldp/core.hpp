#ifndef MACLDP_CORE_HPP
#define MACLDP_CORE_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace macldp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Arrival intensity and channel count. Service time is the time unit.
struct Params {
  double lambda = 1.0;
  int kappa = 1;

  friend bool operator==(const Params&, const Params&) = default;
};

/// Returns `p` unchanged, or throws InvalidArgument naming the violated bound.
Params validate_params(const Params& p);

enum class Protocol { Aloha, Csma };

std::string_view to_string(Protocol proto);
Protocol parse_protocol(std::string_view name);

/// One step of the admission chain: attempts in an inter-admission interval
/// (the admitted one included) and the interval length.
struct StepRecord {
  std::int64_t attempts = 1;
  double gap = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Gap value standing in for "no admission in the window". Anything >= 1 makes
/// gamma vanish and drops every beta term that reaches past the newest gap.
inline constexpr double kSentinelGap = 2.0;

/// The kappa-1 most recent admission gaps, oldest first.
///
/// Index convention used throughout the kernels: gaps()[kappa-2] is the newest
/// gap (the t_{kappa-1} of the transition formulas), gaps()[0] the oldest
/// (t_1). Partial sums "reaching back" from the most recent admission are
/// therefore accumulated from the back of the vector.
class HistoryWindow {
 public:
  HistoryWindow() = default;
  HistoryWindow(int kappa, std::vector<double> gaps);

  /// Window of a system whose last kappa-1 admission gaps are all sentinels.
  static HistoryWindow sentinel(int kappa);

  int kappa() const { return static_cast<int>(gaps_.size()) + 1; }
  std::span<const double> gaps() const { return gaps_; }
  double sum() const;

  /// Drops the oldest gap and appends `gap` as the newest.
  void push(double gap);

  friend bool operator==(const HistoryWindow&, const HistoryWindow&) = default;

 private:
  std::vector<double> gaps_;
};

/// Counting processes at a fixed time t.
struct Counts {
  std::int64_t attempts_total = 0;       // A(t)
  std::int64_t successes_total = 0;      // S(t)
  std::int64_t potential_successes = 0;  // admissions up to t (ALOHA)

  friend bool operator==(const Counts&, const Counts&) = default;
};

// StepRecord CSV: header `index,attempts,gap`, 1-based index, gap at 17
// significant digits.
void write_steps_csv(std::ostream& os, std::span<const StepRecord> steps);
std::vector<StepRecord> read_steps_csv(std::istream& is);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

}  // namespace macldp

#endif  // MACLDP_CORE_HPP
