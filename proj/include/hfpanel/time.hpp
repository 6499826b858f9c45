#pragma once
// Time machinery: microsecond UTC timestamps, civil-date arithmetic,
// DST-aware New York local time, and the NYSE trading calendar
// (holidays, special closures, 13:00-close half days).

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hfpanel {

using UtcMicros = int64_t;  // microseconds since 1970-01-01 00:00:00 UTC

constexpr int64_t kMicrosPerSec = 1'000'000;
constexpr int64_t kMicrosPerMin = 60 * kMicrosPerSec;
constexpr int64_t kMicrosPerHour = 60 * kMicrosPerMin;
constexpr int64_t kMicrosPerDay = 24 * kMicrosPerHour;

// ---- civil date <-> day number (days since 1970-01-01) ----

struct CivilDate {
    int y = 1970;
    int m = 1;  // 1..12
    int d = 1;  // 1..31
    friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

inline int32_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<int32_t>(doe) - 719468;
}

inline CivilDate civil_from_days(int32_t z) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
}

inline int32_t days_from_civil(const CivilDate& c) { return days_from_civil(c.y, c.m, c.d); }

// 0 = Sunday .. 6 = Saturday
inline int weekday_of(int32_t day_number) {
    int w = static_cast<int>((day_number + 4) % 7);
    return w < 0 ? w + 7 : w;
}

// n-th (1-based) given weekday of a month, as day-of-month.
inline int nth_weekday_dom(int year, int month, int weekday, int n) {
    int32_t first = days_from_civil(year, month, 1);
    int w = weekday_of(first);
    int dom = 1 + (weekday - w + 7) % 7 + 7 * (n - 1);
    return dom;
}

inline int last_weekday_dom(int year, int month, int weekday) {
    static const int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int len = mdays[month - 1] + (month == 2 && (year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)));
    int32_t last = days_from_civil(year, month, len);
    int w = weekday_of(last);
    return len - (w - weekday + 7) % 7;
}

// Gregorian Easter Sunday (anonymous computus), for Good Friday.
inline CivilDate easter_sunday(int year) {
    int a = year % 19, b = year / 100, c = year % 100;
    int d = b / 4, e = b % 4, f = (b + 8) / 25, g = (b - f + 1) / 3;
    int h = (19 * a + b - d - g + 15) % 30;
    int i = c / 4, k = c % 4;
    int l = (32 + 2 * e + 2 * i - h - k) % 7;
    int m = (a + 11 * h + 22 * l) / 451;
    int month = (h + l - 7 * m + 114) / 31;
    int day = ((h + l - 7 * m + 114) % 31) + 1;
    return {year, month, day};
}

// ---- New York local time (US Eastern, post-2007 DST rules) ----

// DST runs from 02:00 local on the second Sunday of March until 02:00 local on
// the first Sunday of November. Trading-relevant times sit far from the 2 am
// switch, so the boundary approximation (switch at 07:00/06:00 UTC) is exact here.
inline bool ny_is_dst(UtcMicros t) {
    int32_t day = static_cast<int32_t>(t >= 0 ? t / kMicrosPerDay
                                              : (t - (kMicrosPerDay - 1)) / kMicrosPerDay);
    CivilDate cd = civil_from_days(day);
    int32_t dst_start = days_from_civil(cd.y, 3, nth_weekday_dom(cd.y, 3, 0, 2));
    int32_t dst_end = days_from_civil(cd.y, 11, nth_weekday_dom(cd.y, 11, 0, 1));
    UtcMicros start_utc = static_cast<UtcMicros>(dst_start) * kMicrosPerDay + 7 * kMicrosPerHour;
    UtcMicros end_utc = static_cast<UtcMicros>(dst_end) * kMicrosPerDay + 6 * kMicrosPerHour;
    return t >= start_utc && t < end_utc;
}

inline int64_t ny_offset_micros(UtcMicros t) {
    return (ny_is_dst(t) ? -4 : -5) * kMicrosPerHour;
}

// Wall-clock decomposition of a timestamp in New York local time.
struct NyTime {
    CivilDate date;
    int hour = 0;
    int minute = 0;
    int second = 0;
    int micro = 0;
    int32_t day_number = 0;           // civil day number of the local date
    int64_t micros_since_midnight = 0;
};

inline NyTime ny_time(UtcMicros t) {
    UtcMicros local = t + ny_offset_micros(t);
    int32_t day = static_cast<int32_t>(local >= 0 ? local / kMicrosPerDay
                                                  : (local - (kMicrosPerDay - 1)) / kMicrosPerDay);
    int64_t rem = local - static_cast<UtcMicros>(day) * kMicrosPerDay;
    NyTime out;
    out.date = civil_from_days(day);
    out.day_number = day;
    out.micros_since_midnight = rem;
    out.hour = static_cast<int>(rem / kMicrosPerHour);
    rem %= kMicrosPerHour;
    out.minute = static_cast<int>(rem / kMicrosPerMin);
    rem %= kMicrosPerMin;
    out.second = static_cast<int>(rem / kMicrosPerSec);
    out.micro = static_cast<int>(rem % kMicrosPerSec);
    return out;
}

// Inverse: New York wall-clock -> UTC. Safe for daytime times (no 2 am ambiguity).
inline UtcMicros utc_from_ny(const CivilDate& date, int hour, int minute, int second = 0,
                             int micro = 0) {
    UtcMicros naive = static_cast<UtcMicros>(days_from_civil(date)) * kMicrosPerDay +
                      hour * kMicrosPerHour + minute * kMicrosPerMin +
                      second * kMicrosPerSec + micro;
    // Guess the offset from the naive instant, then correct once.
    UtcMicros guess = naive + 5 * kMicrosPerHour;
    int64_t off = ny_offset_micros(guess);
    UtcMicros utc = naive - off;
    int64_t off2 = ny_offset_micros(utc);
    if (off2 != off) utc = naive - off2;
    return utc;
}

// ---- NYSE trading calendar ----

struct TradingCalendar {
    std::set<int32_t> holidays;    // extra full closures (beyond weekends + rules)
    std::set<int32_t> half_days;   // 13:00 close
    int year_lo = 1998;
    int year_hi = 2035;

    static TradingCalendar usual() {
        TradingCalendar cal;
        for (int y = cal.year_lo; y <= cal.year_hi; ++y) cal.add_rule_year(y);
        // Special closures: national days of mourning.
        cal.holidays.insert(days_from_civil(2018, 12, 5));
        cal.holidays.insert(days_from_civil(2025, 1, 9));
        return cal;
    }

    void add_rule_year(int y) {
        auto obs = [&](int month, int dom) {
            int32_t d = days_from_civil(y, month, dom);
            int w = weekday_of(d);
            if (w == 0) return d + 1;  // Sunday -> Monday
            if (w == 6) return d - 1;  // Saturday -> Friday
            return d;
        };
        // New Year's Day: Sunday -> Monday; Saturday -> not observed.
        {
            int32_t d = days_from_civil(y, 1, 1);
            int w = weekday_of(d);
            if (w == 0) holidays.insert(d + 1);
            else if (w != 6) holidays.insert(d);
        }
        holidays.insert(days_from_civil(y, 1, nth_weekday_dom(y, 1, 1, 3)));   // MLK
        holidays.insert(days_from_civil(y, 2, nth_weekday_dom(y, 2, 1, 3)));   // Washington
        holidays.insert(days_from_civil(easter_sunday(y)) - 2);                // Good Friday
        holidays.insert(days_from_civil(y, 5, last_weekday_dom(y, 5, 1)));     // Memorial Day
        if (y >= 2022) holidays.insert(obs(6, 19));                            // Juneteenth
        holidays.insert(obs(7, 4));                                            // Independence Day
        holidays.insert(days_from_civil(y, 9, nth_weekday_dom(y, 9, 1, 1)));   // Labor Day
        int32_t thanks = days_from_civil(y, 11, nth_weekday_dom(y, 11, 4, 4));
        holidays.insert(thanks);
        holidays.insert(obs(12, 25));                                          // Christmas

        // Half days: day after Thanksgiving; Jul 3 and Dec 24 when they are
        // trading weekdays (i.e. not themselves shifted into full holidays).
        maybe_half(thanks + 1);
        maybe_half(days_from_civil(y, 7, 3));
        maybe_half(days_from_civil(y, 12, 24));
    }

    void maybe_half(int32_t d) {
        int w = weekday_of(d);
        if (w == 0 || w == 6) return;
        if (holidays.count(d)) return;
        half_days.insert(d);
    }

    bool is_trading_day(int32_t day_number) const {
        int w = weekday_of(day_number);
        if (w == 0 || w == 6) return false;
        return holidays.count(day_number) == 0;
    }

    bool is_half_day(int32_t day_number) const { return half_days.count(day_number) != 0; }

    // Session close in micros-since-midnight local time.
    int64_t session_close(int32_t day_number) const {
        return is_half_day(day_number) ? 13 * kMicrosPerHour : 16 * kMicrosPerHour;
    }
    static constexpr int64_t session_open() { return 9 * kMicrosPerHour + 30 * kMicrosPerMin; }

    double session_hours(int32_t day_number) const {
        return static_cast<double>(session_close(day_number) - session_open()) /
               static_cast<double>(kMicrosPerHour);
    }

    // Number of trading days strictly between two trading days.
    int trading_days_between(int32_t a, int32_t b) const {
        if (b <= a) return 0;
        int n = 0;
        for (int32_t d = a + 1; d < b; ++d)
            if (is_trading_day(d)) ++n;
        return n;
    }

    int32_t next_trading_day(int32_t day_number) const {
        int32_t d = day_number + 1;
        while (!is_trading_day(d)) ++d;
        return d;
    }
};

// ---- parsing / formatting ----

// Accepts "YYYY-MM-DD HH:MM:SS[.ffffff]" (also 'T' separator); interpreted as UTC.
inline std::optional<UtcMicros> parse_timestamp(std::string_view s) {
    auto num = [&](size_t pos, size_t len, int& out) -> bool {
        if (pos + len > s.size()) return false;
        auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        return res.ec == std::errc() && res.ptr == s.data() + pos + len;
    };
    int y, mo, d, h, mi, se;
    if (s.size() < 19) return std::nullopt;
    if (!num(0, 4, y) || s[4] != '-' || !num(5, 2, mo) || s[7] != '-' || !num(8, 2, d))
        return std::nullopt;
    if (s[10] != ' ' && s[10] != 'T') return std::nullopt;
    if (!num(11, 2, h) || s[13] != ':' || !num(14, 2, mi) || s[16] != ':' || !num(17, 2, se))
        return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
        return std::nullopt;
    int64_t micro = 0;
    if (s.size() > 19) {
        if (s[19] != '.') return std::nullopt;
        int64_t scale = 100000;
        size_t i = 20;
        if (i >= s.size()) return std::nullopt;
        for (; i < s.size() && scale > 0; ++i) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            micro += (s[i] - '0') * scale;
            scale /= 10;
        }
        if (i != s.size()) return std::nullopt;  // more than 6 fractional digits
    }
    return static_cast<UtcMicros>(days_from_civil(y, mo, d)) * kMicrosPerDay +
           h * kMicrosPerHour + mi * kMicrosPerMin + se * kMicrosPerSec + micro;
}

inline std::optional<int32_t> parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y, m, d;
    auto num = [&](size_t pos, size_t len, int& out) {
        auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        return res.ec == std::errc();
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    return days_from_civil(y, m, d);
}

inline std::string format_date(int32_t day_number) {
    CivilDate c = civil_from_days(day_number);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", c.y, c.m, c.d);
    return buf;
}

inline std::string format_timestamp_utc(UtcMicros t) {
    int32_t day = static_cast<int32_t>(t >= 0 ? t / kMicrosPerDay
                                              : (t - (kMicrosPerDay - 1)) / kMicrosPerDay);
    int64_t rem = t - static_cast<UtcMicros>(day) * kMicrosPerDay;
    CivilDate c = civil_from_days(day);
    int h = static_cast<int>(rem / kMicrosPerHour);
    rem %= kMicrosPerHour;
    int mi = static_cast<int>(rem / kMicrosPerMin);
    rem %= kMicrosPerMin;
    int se = static_cast<int>(rem / kMicrosPerSec);
    int us = static_cast<int>(rem % kMicrosPerSec);
    char buf[40];
    // Whole seconds round-trip through parse_timestamp without a suffix.
    if (us == 0)
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", c.y, c.m, c.d, h, mi, se);
    else
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d.%06d", c.y, c.m, c.d, h,
                      mi, se, us);
    return buf;
}

}  // namespace hfpanel
