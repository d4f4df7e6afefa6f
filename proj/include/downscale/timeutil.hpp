#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace dsc {

// All timestamps are whole UTC hours since 1970-01-01T00Z ("epoch hours").
using EpochHour = std::int64_t;

inline EpochHour epoch_hour(int year, unsigned month, unsigned day, unsigned hour = 0) {
    using namespace std::chrono;
    const sys_days d = year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                      std::chrono::day{day}};
    return static_cast<EpochHour>(d.time_since_epoch().count()) * 24 + hour;
}

inline EpochHour year_start(int year) { return epoch_hour(year, 1, 1, 0); }

// First hour of the month following the one containing t.
inline EpochHour next_month_start(EpochHour t) {
    using namespace std::chrono;
    const sys_days d{days{t / 24}};
    year_month_day ymd{d};
    year_month ym = ymd.year() / ymd.month() + months{1};
    return static_cast<EpochHour>(sys_days{ym / 1}.time_since_epoch().count()) * 24;
}

inline EpochHour month_start(EpochHour t) {
    using namespace std::chrono;
    const sys_days d{days{t / 24}};
    year_month_day ymd{d};
    return static_cast<EpochHour>(sys_days{ymd.year() / ymd.month() / 1}.time_since_epoch().count()) * 24;
}

inline std::string format_hour(EpochHour t) {
    using namespace std::chrono;
    const sys_days d{days{t / 24}};
    year_month_day ymd{d};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(t % 24 + (t % 24 < 0 ? 24 : 0)));
    return buf;
}

// Half-open hour interval [begin, end).
struct HourRange {
    EpochHour begin = 0;
    EpochHour end = 0;

    std::int64_t count() const { return end - begin; }
    bool contains(EpochHour t) const { return t >= begin && t < end; }
    bool empty() const { return end <= begin; }
};

// Inclusive year span A..B mapped to hours.
inline HourRange year_range(int first_year, int last_year) {
    return {year_start(first_year), year_start(last_year + 1)};
}

}  // namespace dsc
