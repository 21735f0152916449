#include "storarb/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace storarb {
namespace {

using namespace std::chrono;

double bump(double h, double centre, double width) {
  const double u = (h - centre) / width;
  return std::exp(-0.5 * u * u);
}

// Normalised intraday profile: night trough, morning shoulder, evening peak.
double shape(int hour) {
  const double h = hour;
  return 1.0 - 0.35 * bump(h, 3.5, 2.5) + 0.25 * bump(h, 8.0, 1.5) + 0.55 * bump(h, 18.5, 2.0);
}

bool spring_forward(year_month_day d) {
  if (d.month() != March) return false;
  const year_month_weekday second_sunday{d.year() / March / Sunday[2]};
  return sys_days{d} == sys_days{second_sunday};
}

}  // namespace

SyntheticOptions default_synthetic_options() {
  SyntheticOptions o;
  o.years = {
      {2019, 34.0, 1.0, 0.12, 0.06, 0.10},
      {2020, 30.0, 0.9, 0.12, 0.05, 0.10},
      {2021, 38.0, 1.1, 0.13, 0.07, 0.10},
      {2022, 70.0, 1.6, 0.25, 0.15, 0.15},
      {2023, 30.0, 0.9, 0.05, 0.01, 0.03},
  };
  return o;
}

std::vector<PriceRecord> generate_synthetic(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  std::vector<PriceRecord> out;
  for (const YearRegime& regime : options.years) {
    const sys_days first{year{regime.year} / January / 1};
    const sys_days last{year{regime.year} / December / 31};
    double carry = 0.0;  // day-to-day level persistence
    for (sys_days day = first; day <= last; day += days{1}) {
      const year_month_day date{day};
      const double doy = (day - first).count();
      // winter and summer highs
      const double season = 1.0 + 0.15 * std::cos(4.0 * std::numbers::pi * (doy - 15.0) / 365.0);
      carry = 0.7 * carry + 0.3 * normal(rng);
      const double level = regime.level * season * std::exp(0.15 * carry);
      // some days the evening peak never shows up (mild weather, high renewables)
      const double day_spread = regime.spread * (uniform(rng) < regime.flat_rate ? 0.2 : 1.0 + 0.25 * normal(rng));
      const bool spike = uniform(rng) < regime.spike_rate;
      const int spike_hour = static_cast<int>(uniform(rng) * kHoursPerDay);
      const double spike_size = level * (1.0 + 3.0 * uniform(rng));
      for (int h = 0; h < kHoursPerDay; ++h) {
        double price = level * (1.0 + day_spread * (shape(h) - 1.0)) +
                       regime.noise * level * normal(rng);
        if (spike && std::abs(h - spike_hour) <= 1) price += spike_size * (h == spike_hour ? 1.0 : 0.4);
        if (options.drop_dst_hour && h == 2 && spring_forward(date)) continue;
        out.push_back({{date, h}, std::round(price * 100.0) / 100.0});
      }
    }
  }
  return out;
}

}  // namespace storarb
