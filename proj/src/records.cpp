#include "riskval/records.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "riskval/errors.hpp"

namespace riskval {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw InternalError("number formatting failed");
  return std::string(buf.data(), end);
}

double parse_number(std::string_view text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw InputError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << kRecordCsvHeader << '\n';
  for (const RunRecord& r : records) {
    out << r.seed << ',' << r.iteration << ',' << r.loss_kind << ',' << format_number(r.alpha) << ',' << r.metric_name
        << ',' << format_number(r.metric_value) << '\n';
  }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  write_records_csv(out, records);
}

namespace {

std::uint64_t parse_count(std::string_view text) {
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw InputError("not a nonnegative integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::vector<RunRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kRecordCsvHeader) throw InputError("line 1: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      cols.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    cols.push_back(rest);
    try {
      if (cols.size() != 6) throw InputError("expected 6 columns, found " + std::to_string(cols.size()));
      records.push_back({parse_count(cols[0]), parse_count(cols[1]), std::string(cols[2]), parse_number(cols[3]),
                         std::string(cols[4]), parse_number(cols[5])});
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw InputError("line 1: missing header");
  return records;
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  return read_records_csv(in);
}

}  // namespace riskval
