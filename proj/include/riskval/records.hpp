#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace riskval {

/// One metric observation of one run. Non-finite values are kept.
struct RunRecord {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::string loss_kind;
  double alpha = 0.0;
  std::string metric_name;
  double metric_value = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline constexpr std::string_view kRecordCsvHeader = "seed,iteration,loss_kind,alpha,metric_name,metric_value";

/// Shortest round-trip decimal form; non-finite values become nan, inf, -inf.
std::string format_number(double value);
/// Inverse of format_number; throws InputError on anything else.
double parse_number(std::string_view text);

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
void write_records_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records);
/// Throws InputError naming the 1-based line number of the first malformed row.
std::vector<RunRecord> read_records_csv(std::istream& in);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);

}  // namespace riskval
