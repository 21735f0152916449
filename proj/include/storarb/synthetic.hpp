// Deterministic synthetic hourly prices with a daily double peak, seasonal
// level, noise and occasional spikes.  Used by the shipped demo dataset and
// by the tests; no real market data is needed to run the pipeline.
#ifndef STORARB_SYNTHETIC_HPP
#define STORARB_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "storarb/market_data.hpp"

namespace storarb {

/// Per-year character of the generated market.
struct YearRegime {
  int year = 2019;
  double level = 35.0;       // average price, $/MWh
  double spread = 1.0;       // multiplies the intraday shape
  double noise = 0.12;       // hourly noise relative to the level
  double spike_rate = 0.06;  // probability of a price spike per day
  double flat_rate = 0.1;    // probability of a day without the evening peak
};

struct SyntheticOptions {
  std::uint64_t seed = 20190101;
  std::vector<YearRegime> years;
  // drop hour 2 on the second Sunday of March (spring-forward day)
  bool drop_dst_hour = true;
};

/// 2019-2021 ordinary, 2022 volatile, 2023 calm.
SyntheticOptions default_synthetic_options();

std::vector<PriceRecord> generate_synthetic(const SyntheticOptions& options);

}  // namespace storarb

#endif  // STORARB_SYNTHETIC_HPP
