#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tardis {

// Two-level time-of-use schedule. The peak window is half-open
// [start_hour, end_hour) in site-local hours and may wrap midnight.
// start_hour == end_hour means flat pricing at the off-peak rate.
struct PriceSchedule {
  double off_peak_rate = 0.0;  // $/kWh, may be <= 0
  double peak_rate = 0.0;      // $/kWh, may be <= 0
  double peak_start_hour = 0.0;
  double peak_end_hour = 0.0;

  void validate() const {
    if (peak_start_hour < 0 || peak_start_hour >= 24 || peak_end_hour < 0 ||
        peak_end_hour >= 24)
      throw std::invalid_argument("price schedule: peak hours must lie in [0, 24)");
  }
};

struct Site {
  std::string name;
  int node_count = 1;
  double power_budget_kw = 1.0;
  int utc_offset_minutes = 0;
  PriceSchedule schedule;

  void validate() const {
    if (node_count < 1)
      throw std::invalid_argument("site " + name + ": node_count < 1");
    if (power_budget_kw <= 0)
      throw std::invalid_argument("site " + name + ": power_budget_kw <= 0");
    schedule.validate();
  }
};

// Site-local hour of day in [0, 24) for a UTC epoch time.
inline double local_hour(const Site& site, double t_utc_seconds) {
  double local = t_utc_seconds + site.utc_offset_minutes * 60.0;
  double sec = std::fmod(local, 86400.0);
  if (sec < 0) sec += 86400.0;
  return sec / 3600.0;
}

inline bool is_peak(const Site& site, double t_utc_seconds) {
  const PriceSchedule& s = site.schedule;
  if (s.peak_start_hour == s.peak_end_hour) return false;  // flat pricing
  double h = local_hour(site, t_utc_seconds);
  if (s.peak_start_hour < s.peak_end_hour)
    return h >= s.peak_start_hour && h < s.peak_end_hour;
  return h >= s.peak_start_hour || h < s.peak_end_hour;  // wraps midnight
}

inline double rate_at(const Site& site, double t_utc_seconds) {
  return is_peak(site, t_utc_seconds) ? site.schedule.peak_rate
                                      : site.schedule.off_peak_rate;
}

// The default three-site configuration: staggered East/West/South time zones
// with a 3x peak/off-peak differential. Node counts and budgets are supplied
// by the caller.
inline std::vector<Site> three_site_reference_config(int node_count = 64,
                                                     double power_budget_kw = 1e9) {
  std::vector<Site> sites(3);
  sites[0].name = "A";
  sites[0].utc_offset_minutes = -300;
  sites[0].schedule = {0.12, 0.36, 6.0, 22.0};
  sites[1].name = "B";
  sites[1].utc_offset_minutes = -480;
  sites[1].schedule = {0.10, 0.30, 5.0, 21.0};
  sites[2].name = "C";
  sites[2].utc_offset_minutes = -360;
  sites[2].schedule = {0.08, 0.24, 3.0, 19.0};
  for (auto& s : sites) {
    s.node_count = node_count;
    s.power_budget_kw = power_budget_kw;
    s.validate();
  }
  return sites;
}

}  // namespace tardis
