#pragma once

#include <chrono>
#include <cstdio>
#include <string>

#include "h2dispatch/errors.hpp"

namespace h2d {

struct CivilDate {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31
};

// Parses strict ISO "YYYY-MM-DD"; throws IoError on malformed or invalid dates.
inline CivilDate parse_iso_date(const std::string& s) {
    int y = 0, m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) != 3 || s.size() != 10)
        throw IoError("malformed ISO date: '" + s + "'");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                    std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) throw IoError("invalid calendar date: '" + s + "'");
    return {y, m, d};
}

inline std::chrono::sys_days to_sys_days(const CivilDate& cd) {
    return std::chrono::sys_days{std::chrono::year_month_day{
        std::chrono::year{cd.year}, std::chrono::month{unsigned(cd.month)},
        std::chrono::day{unsigned(cd.day)}}};
}

// 1..366
inline int day_of_year(const CivilDate& cd) {
    auto jan1 = std::chrono::sys_days{std::chrono::year_month_day{
        std::chrono::year{cd.year}, std::chrono::month{1}, std::chrono::day{1}}};
    return int((to_sys_days(cd) - jan1).count()) + 1;
}

// ISO weekday, 1 = Monday .. 7 = Sunday
inline int weekday_iso(const CivilDate& cd) {
    return int(std::chrono::weekday{to_sys_days(cd)}.iso_encoding());
}

// Maps a day-of-year to a week index 1..52 (days 365/366 fold into week 52).
inline int week_of_day(int day) {
    int w = (day - 1) / 7 + 1;
    return w > 52 ? 52 : w;
}

} // namespace h2d
