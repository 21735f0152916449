#include "storarb/market_data.hpp"

#include <algorithm>
#include <bitset>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>

#include <fmt/format.h>
#include <json.hpp>

#include "storarb/errors.hpp"

namespace storarb {
namespace {

using std::chrono::day;
using std::chrono::month;
using std::chrono::year;
using std::chrono::year_month_day;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_date_view(std::string_view s, year_month_day& out) {
  // YYYY-MM-DD
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y, m, d;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
      !parse_int(s.substr(8, 2), d)) {
    return false;
  }
  out = year_month_day{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  return out.ok();
}

// YYYY-MM-DDTHH:MM[:SS] with 'T' or a space as separator.  Minutes and
// seconds must be zero.
bool parse_timestamp(std::string_view s, Timestamp& out) {
  if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return false;
  if (!parse_date_view(s.substr(0, 10), out.date)) return false;
  int minute = 0, second = 0;
  if (!parse_int(s.substr(11, 2), out.hour) || !parse_int(s.substr(14, 2), minute)) return false;
  if (s.size() == 19) {
    if (s[16] != ':' || !parse_int(s.substr(17, 2), second)) return false;
  } else if (s.size() != 16) {
    return false;
  }
  return out.hour >= 0 && out.hour < kHoursPerDay && minute == 0 && second == 0;
}

}  // namespace

std::string format_date(year_month_day date) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()),
                     static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
}

year_month_day parse_date(const std::string& text) {
  year_month_day out;
  if (!parse_date_view(trim(text), out)) {
    throw DataError(DataError::Kind::MalformedRow, fmt::format("invalid date '{}'", text));
  }
  return out;
}

std::string format_timestamp(const Timestamp& ts) {
  return fmt::format("{}T{:02d}:00", format_date(ts.date), ts.hour);
}

std::vector<PriceRecord> parse_price_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  {
    std::string header(trim(line));
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    std::transform(header.begin(), header.end(), header.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (header != "timestamp,price") {
      throw DataError(DataError::Kind::MalformedRow,
                      fmt::format("expected header 'timestamp,price', found '{}'", line), 0);
    }
  }
  std::vector<PriceRecord> records;
  std::map<Timestamp, long> seen;
  long row = 0;
  while (std::getline(in, line)) {
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    ++row;
    const auto comma = text.find(',');
    if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
      throw DataError(DataError::Kind::MalformedRow,
                      fmt::format("row {}: expected 2 columns in '{}'", row, text), row);
    }
    PriceRecord rec;
    if (!parse_timestamp(trim(text.substr(0, comma)), rec.timestamp)) {
      throw DataError(DataError::Kind::MalformedRow,
                      fmt::format("row {}: invalid timestamp '{}'", row, text.substr(0, comma)),
                      row);
    }
    const std::string_view price = trim(text.substr(comma + 1));
    const char* first = price.data();
    if (!price.empty() && price.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, price.data() + price.size(), rec.price);
    if (price.empty() || ec != std::errc() || ptr != price.data() + price.size() ||
        !std::isfinite(rec.price)) {
      throw DataError(DataError::Kind::MalformedRow,
                      fmt::format("row {}: non-numeric price '{}'", row, price), row);
    }
    const auto [it, inserted] = seen.emplace(rec.timestamp, row);
    if (!inserted) {
      throw DataError(DataError::Kind::DuplicateTimestamp,
                      fmt::format("row {}: timestamp {} already seen at row {}", row,
                                  format_timestamp(rec.timestamp), it->second),
                      row);
    }
    records.push_back(rec);
  }
  return records;
}

std::vector<PriceRecord> read_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Io, fmt::format("cannot open price file '{}'", path));
  return parse_price_csv(in);
}

void write_price_csv(std::ostream& out, const std::vector<PriceRecord>& records) {
  out << "timestamp,price\n";
  for (const auto& rec : records) {
    out << fmt::format("{},{}\n", format_timestamp(rec.timestamp), rec.price);
  }
}

DayGrouping group_days(const std::vector<PriceRecord>& records) {
  struct Bucket {
    std::bitset<kHoursPerDay> hours;
    int count = 0;
    PriceDay day;
  };
  std::map<year_month_day, Bucket> buckets;
  for (const auto& rec : records) {
    Bucket& bucket = buckets[rec.timestamp.date];
    bucket.day.date = rec.timestamp.date;
    bucket.hours.set(static_cast<std::size_t>(rec.timestamp.hour));
    bucket.day.prices(rec.timestamp.hour) = rec.price;
    ++bucket.count;
  }
  DayGrouping out;
  for (auto& [date, bucket] : buckets) {
    if (bucket.count == kHoursPerDay && bucket.hours.all()) {
      out.days.push_back(bucket.day);
    } else {
      ++out.dropped;
    }
  }
  return out;
}

std::vector<PriceRecord> to_records(const std::vector<PriceDay>& days) {
  std::vector<PriceRecord> out;
  out.reserve(days.size() * kHoursPerDay);
  for (const auto& d : days) {
    for (int h = 0; h < kHoursPerDay; ++h) out.push_back({{d.date, h}, d.prices(h)});
  }
  return out;
}

Dataset split_by_years(const std::vector<PriceDay>& days, const std::set<int>& train_years,
                       const std::set<int>& test_years) {
  for (int y : train_years) {
    if (test_years.count(y)) {
      throw std::invalid_argument(fmt::format("year {} is in both train and test sets", y));
    }
  }
  Dataset out;
  for (const auto& d : days) {
    const int y = static_cast<int>(d.date.year());
    if (train_years.count(y)) {
      out.train_days.push_back(d);
    } else if (test_years.count(y)) {
      out.test_days.push_back(d);
    }
  }
  if (out.train_days.empty()) {
    throw DataError(DataError::Kind::EmptyTrainSet, "no complete days in the training years");
  }
  return out;
}

Eigen::MatrixXd day_matrix(const std::vector<PriceDay>& days) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(days.size()), kHoursPerDay);
  for (std::size_t i = 0; i < days.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = days[i].prices.transpose();
  }
  return out;
}

std::string diagnostics_json(const DayGrouping& grouping) {
  nlohmann::ordered_json j;
  j["days_kept"] = grouping.days.size();
  j["days_dropped"] = grouping.dropped;
  return j.dump();
}

void write_day_cache(std::ostream& out, const std::vector<PriceDay>& days, long dropped) {
  nlohmann::ordered_json j;
  j["format"] = "storarb-days";
  j["version"] = 1;
  j["days_kept"] = days.size();
  j["days_dropped"] = dropped;
  auto& arr = j["days"] = nlohmann::ordered_json::array();
  for (const auto& d : days) {
    arr.push_back({{"date", format_date(d.date)},
                   {"prices", std::vector<double>(d.prices.begin(), d.prices.end())}});
  }
  out << j.dump(1) << '\n';
}

std::vector<PriceDay> read_day_cache(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::Io, fmt::format("day cache is not valid JSON: {}", e.what()));
  }
  if (j.value("format", "") != "storarb-days" || j.value("version", 0) != 1) {
    throw DataError(DataError::Kind::Io, "unrecognised day cache format");
  }
  std::vector<PriceDay> days;
  for (const auto& entry : j.at("days")) {
    PriceDay d;
    d.date = parse_date(entry.at("date").get<std::string>());
    const auto prices = entry.at("prices").get<std::vector<double>>();
    if (prices.size() != kHoursPerDay) {
      throw DataError(DataError::Kind::Io,
                      fmt::format("day {} in cache has {} prices", format_date(d.date), prices.size()));
    }
    for (int h = 0; h < kHoursPerDay; ++h) d.prices(h) = prices[static_cast<std::size_t>(h)];
    days.push_back(d);
  }
  return days;
}

}  // namespace storarb
