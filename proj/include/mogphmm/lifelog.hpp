#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mogphmm/dataset.hpp"
#include "mogphmm/errors.hpp"
#include "mogphmm/gp_tree.hpp"

namespace mogphmm {

using Date = std::chrono::year_month_day;

inline std::optional<Date> parse_iso_date(std::string_view text)
{
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
        if (ec != std::errc{} || p != text.data() + pos + len) {
            return std::nullopt;
        }
        return v;
    };
    auto y = num(0, 4);
    auto m = num(5, 2);
    auto d = num(8, 2);
    if (!y || !m || !d || *m < 1 || *d < 1) {
        return std::nullopt;
    }
    Date const date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) {
        return std::nullopt;
    }
    return date;
}

inline std::string format_iso_date(const Date& date)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

inline Date add_days(const Date& date, int days)
{
    return Date{std::chrono::sys_days{date} + std::chrono::days{days}};
}

constexpr std::size_t kFeatureCount = 3;

// One day of aggregated activity.
struct ActivityRecord {
    Date date{};
    double steps = 0.0;
    double distance = 0.0; // meters
    double duration = 0.0; // seconds

    [[nodiscard]] std::array<double, kFeatureCount> features() const { return {steps, distance, duration}; }

    friend bool operator==(const ActivityRecord&, const ActivityRecord&) = default;
};

// Returns an empty string when the record is valid, else the reason.
inline std::string record_problem(const ActivityRecord& r)
{
    for (double v : {r.steps, r.distance, r.duration}) {
        if (!std::isfinite(v)) {
            return "non-finite value";
        }
        if (v < 0.0) {
            return "negative value";
        }
    }
    if (r.duration == 0.0 && (r.steps > 0.0 || r.distance > 0.0)) {
        return "zero duration with non-zero steps or distance";
    }
    return {};
}

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

// Time-ordered days of one participant, optionally labeled with scores 1..5.
struct LabeledSequence {
    std::string participant_id;
    std::vector<ActivityRecord> records;
    std::optional<std::vector<int>> labels;

    [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
    [[nodiscard]] bool has_labels() const noexcept { return labels.has_value(); }

    [[nodiscard]] FeatureMatrix features() const
    {
        FeatureMatrix x(kFeatureCount);
        x.reserve(records.size());
        for (const ActivityRecord& r : records) {
            auto const f = r.features();
            x.push_back(f);
        }
        return x;
    }

    [[nodiscard]] const std::vector<int>& require_labels() const
    {
        if (!labels) {
            throw DataError("sequence '" + participant_id + "' has no labels");
        }
        return *labels;
    }

    void validate() const
    {
        for (std::size_t i = 0; i < records.size(); ++i) {
            std::string const problem = record_problem(records[i]);
            if (!problem.empty()) {
                throw DataError("record " + std::to_string(i) + ": " + problem);
            }
            if (i > 0 && !(std::chrono::sys_days{records[i - 1].date} < std::chrono::sys_days{records[i].date})) {
                throw DataError("record " + std::to_string(i) + ": dates must be strictly increasing");
            }
        }
        if (labels) {
            if (labels->size() != records.size()) {
                throw DataError("label count does not match record count");
            }
            for (std::size_t i = 0; i < labels->size(); ++i) {
                if ((*labels)[i] < kMinScore || (*labels)[i] > kMaxScore) {
                    throw DataError("record " + std::to_string(i) + ": label outside 1..5");
                }
            }
        }
    }

    friend bool operator==(const LabeledSequence&, const LabeledSequence&) = default;
};

inline LabeledDataset to_dataset(const LabeledSequence& seq)
{
    return LabeledDataset{seq.features(), seq.require_labels()};
}

// Ordinal labeling: score = 1 + number of thresholds the weighted activity
// index meets (>=). The default index is daily steps.
struct LabelRule {
    std::vector<double> thresholds{3000.0, 6000.0, 9000.0, 12000.0};
    std::array<double, kFeatureCount> weights{1.0, 0.0, 0.0}; // steps, distance, duration

    [[nodiscard]] int score_count() const noexcept { return static_cast<int>(thresholds.size()) + 1; }

    void validate() const
    {
        if (thresholds.empty() || static_cast<int>(thresholds.size()) > kMaxScore - 1) {
            throw ConfigError("label rule needs between 1 and 4 thresholds");
        }
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (!std::isfinite(thresholds[i])) {
                throw ConfigError("label rule thresholds must be finite");
            }
            if (i > 0 && !(thresholds[i - 1] < thresholds[i])) {
                throw ConfigError("label rule thresholds must be strictly increasing");
            }
        }
        for (double w : weights) {
            if (!std::isfinite(w)) {
                throw ConfigError("label rule weights must be finite");
            }
        }
    }

    [[nodiscard]] double activity_index(const ActivityRecord& r) const noexcept
    {
        return weights[0] * r.steps + weights[1] * r.distance + weights[2] * r.duration;
    }

    [[nodiscard]] int score(const ActivityRecord& r) const noexcept
    {
        double const index = activity_index(r);
        int s = 1;
        for (double t : thresholds) {
            s += index >= t ? 1 : 0;
        }
        return s;
    }

    friend bool operator==(const LabelRule&, const LabelRule&) = default;
};

inline int label_record(const ActivityRecord& record, const LabelRule& rule)
{
    rule.validate();
    return rule.score(record);
}

inline std::vector<int> label_sequence(const LabeledSequence& seq, const LabelRule& rule)
{
    rule.validate();
    std::vector<int> labels;
    labels.reserve(seq.size());
    for (const ActivityRecord& r : seq.records) {
        labels.push_back(rule.score(r));
    }
    return labels;
}

// ---------------------------------------------------------------------------
// CSV: date,steps,distance_m,duration_s[,label]

inline constexpr std::string_view kCsvHeader = "date,steps,distance_m,duration_s";
inline constexpr std::string_view kCsvHeaderLabeled = "date,steps,distance_m,duration_s,label";

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t const comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

} // namespace detail

inline LabeledSequence read_csv(std::istream& in, const std::string& source, std::string participant_id = {})
{
    LabeledSequence seq;
    seq.participant_id = std::move(participant_id);
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> DataError {
        return DataError(source + ":" + std::to_string(line_no) + ": " + what);
    };

    bool labeled = false;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) {
            view.remove_prefix(3);
        }
        view = detail::trim(view);
        if (!header_seen) {
            if (view == kCsvHeader) {
                labeled = false;
            } else if (view == kCsvHeaderLabeled) {
                labeled = true;
            } else {
                throw fail("expected header '" + std::string(kCsvHeader) + "[,label]'");
            }
            header_seen = true;
            if (labeled) {
                seq.labels.emplace();
            }
            continue;
        }
        if (view.empty()) {
            continue;
        }
        auto fields = detail::split_commas(view);
        std::size_t const expected = labeled ? 5 : 4;
        if (fields.size() != expected) {
            throw fail("expected " + std::to_string(expected) + " columns, found " + std::to_string(fields.size()));
        }
        ActivityRecord rec;
        auto date = parse_iso_date(detail::trim(fields[0]));
        if (!date) {
            throw fail("bad ISO-8601 date '" + std::string(fields[0]) + "'");
        }
        rec.date = *date;
        double* targets[] = {&rec.steps, &rec.distance, &rec.duration};
        static constexpr std::string_view names[] = {"steps", "distance_m", "duration_s"};
        for (std::size_t c = 0; c < 3; ++c) {
            std::string_view const f = detail::trim(fields[c + 1]);
            double v = 0.0;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc{} || p != f.data() + f.size() || !std::isfinite(v)) {
                throw fail("non-numeric " + std::string(names[c]) + " '" + std::string(f) + "'");
            }
            if (v < 0.0) {
                throw fail("negative " + std::string(names[c]));
            }
            *targets[c] = v;
        }
        std::string const problem = record_problem(rec);
        if (!problem.empty()) {
            throw fail(problem);
        }
        if (!seq.records.empty() &&
            !(std::chrono::sys_days{seq.records.back().date} < std::chrono::sys_days{rec.date})) {
            throw fail("date is not after the previous row's date");
        }
        if (labeled) {
            std::string_view const f = detail::trim(fields[4]);
            int label = 0;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
            if (f.empty() || ec != std::errc{} || p != f.data() + f.size() || label < kMinScore ||
                label > kMaxScore) {
                throw fail("label must be an integer in 1..5, got '" + std::string(f) + "'");
            }
            seq.labels->push_back(label);
        }
        seq.records.push_back(rec);
    }
    if (!header_seen) {
        line_no = 1;
        throw fail("missing header");
    }
    return seq;
}

inline LabeledSequence load_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    return read_csv(in, path.string(), path.stem().string());
}

inline void write_csv(const LabeledSequence& seq, std::ostream& out)
{
    out << (seq.labels ? kCsvHeaderLabeled : kCsvHeader) << '\n';
    for (std::size_t i = 0; i < seq.records.size(); ++i) {
        const ActivityRecord& r = seq.records[i];
        out << format_iso_date(r.date) << ',' << format_double(r.steps) << ',' << format_double(r.distance) << ','
            << format_double(r.duration);
        if (seq.labels) {
            out << ',' << (*seq.labels)[i];
        }
        out << '\n';
    }
}

inline void save_csv(const LabeledSequence& seq, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    write_csv(seq, out);
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

} // namespace mogphmm
