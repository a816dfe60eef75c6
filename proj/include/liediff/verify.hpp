#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "liediff/lie.hpp"

namespace liediff
{

struct VerifyRow
{
  std::string property;
  double value = 0.0;
  double threshold = 0.0;
  /// True when the property requires value > threshold (a strict gap),
  /// false when it requires value < threshold (an error bound).
  bool lower_bound = false;
  bool pass = false;
};

struct VerifyReport
{
  std::vector<VerifyRow> rows;

  std::size_t failures() const;
};

/// Fault injection for mutation testing of the suite itself.
struct VerifyFaults
{
  /// Use the right Jacobian wherever the SO(3) left Jacobian is required.
  bool so3_left_is_right = false;
};

/// Number of rows every report carries.
constexpr std::size_t kVerifyRowCount = 18;

VerifyReport verify_suite(std::uint64_t seed, const VerifyFaults& faults = {});

/// One JSON object per row.
void write_verify_report(std::ostream& out, const VerifyReport& report);

}  // namespace liediff
