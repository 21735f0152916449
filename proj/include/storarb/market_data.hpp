// Hourly price ingestion: CSV parsing, 24-hour day assembly and the
// train/test split by calendar year.
#ifndef STORARB_MARKET_DATA_HPP
#define STORARB_MARKET_DATA_HPP

#include <chrono>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace storarb {

inline constexpr int kHoursPerDay = 24;

/// Naive local market time at hour resolution.
struct Timestamp {
  std::chrono::year_month_day date;
  int hour = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

struct PriceRecord {
  Timestamp timestamp;
  double price = 0.0;  // $/MWh, may be negative

  friend bool operator==(const PriceRecord&, const PriceRecord&) = default;
};

struct PriceDay {
  std::chrono::year_month_day date;
  Eigen::Matrix<double, kHoursPerDay, 1> prices;
};

struct Dataset {
  std::vector<PriceDay> train_days;
  std::vector<PriceDay> test_days;
};

struct DayGrouping {
  std::vector<PriceDay> days;
  long dropped = 0;  // calendar dates without exactly the hours 0..23
};

std::string format_date(std::chrono::year_month_day date);
std::chrono::year_month_day parse_date(const std::string& text);
std::string format_timestamp(const Timestamp& ts);

/// Reads `timestamp,price` CSV text (header required).  Throws DataError with
/// the 1-based data row on malformed rows, non-numeric prices and duplicate
/// timestamps.
std::vector<PriceRecord> parse_price_csv(std::istream& in);
std::vector<PriceRecord> read_price_csv(const std::string& path);

void write_price_csv(std::ostream& out, const std::vector<PriceRecord>& records);

DayGrouping group_days(const std::vector<PriceRecord>& records);

std::vector<PriceRecord> to_records(const std::vector<PriceDay>& days);

/// Membership by calendar year; order is preserved.  Throws
/// std::invalid_argument when the year sets overlap and DataError
/// (EmptyTrainSet) when no training day remains.
Dataset split_by_years(const std::vector<PriceDay>& days, const std::set<int>& train_years,
                       const std::set<int>& test_years);

/// Stacks days into an (m x 24) sample matrix, one row per day.
Eigen::MatrixXd day_matrix(const std::vector<PriceDay>& days);

/// {"days_kept": n, "days_dropped": m}
std::string diagnostics_json(const DayGrouping& grouping);

/// Day cache used between CLI stages: a JSON document with one entry per day.
void write_day_cache(std::ostream& out, const std::vector<PriceDay>& days, long dropped);
std::vector<PriceDay> read_day_cache(std::istream& in);

}  // namespace storarb

#endif  // STORARB_MARKET_DATA_HPP
