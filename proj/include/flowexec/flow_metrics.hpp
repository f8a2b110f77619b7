#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"

namespace flowexec {

enum class TradeKind { Execution, LimitAtTouch };

struct TradeRecord {
    long long index = 0;
    double signed_volume = 0.0;  // > 0 buy, < 0 sell
    TradeKind kind = TradeKind::Execution;
};

enum class TradeFilter { ExecutionOnly, IncludeTouch };

inline bool accepts(TradeFilter f, TradeKind k) {
    return k == TradeKind::Execution || f == TradeFilter::IncludeTouch;
}

// ---------------------------------------------------------------------------
// EWMA imbalance: I <- e^{-beta |V|} I + (1 - e^{-beta |V|}) sgn V

class EwmaImbalance {
public:
    explicit EwmaImbalance(double beta, double i0 = 0.0) : beta_(beta), value_(i0) {
        if (!(beta > 0.0)) throw DomainError("ewma: beta must be > 0");
        if (!(i0 >= -1.0 && i0 <= 1.0)) throw DomainError("ewma: initial value must lie in [-1, 1]");
    }

    double update(double signed_volume, long long record = -1) {
        if (signed_volume == 0.0 || !std::isfinite(signed_volume)) {
            throw DataError("ewma: zero or non-finite volume in record " + std::to_string(record), record);
        }
        const double w = -std::expm1(-beta_ * std::abs(signed_volume));
        const double s = signed_volume > 0.0 ? 1.0 : -1.0;
        value_ += w * (s - value_);
        return value_;
    }

    double value() const { return value_; }
    double beta() const { return beta_; }

private:
    double beta_;
    double value_;
};

/// beta = a / V_daily.
inline double ewma_beta(double a, double daily_volume) {
    if (!(a > 0.0) || !(daily_volume > 0.0)) throw DomainError("ewma: need a > 0 and daily volume > 0");
    return a / daily_volume;
}

struct ImbalanceSeries {
    double beta = 0.0;
    std::vector<long long> index;  // record index; the initial value carries -1
    std::vector<double> values;    // values[0] = I_0

    void write_csv(std::ostream& out) const {
        CsvWriter csv(out, {"k", "index", "I"});
        for (std::size_t k = 0; k < values.size(); ++k) csv.row(k, index[k], values[k]);
    }
};

template <class Range>
ImbalanceSeries ewma_imbalance(const Range& trades, double beta, double i0 = 0.0) {
    EwmaImbalance e(beta, i0);
    ImbalanceSeries s;
    s.beta = beta;
    s.index.push_back(-1);
    s.values.push_back(i0);
    for (const TradeRecord& t : trades) {
        s.index.push_back(t.index);
        s.values.push_back(e.update(t.signed_volume, t.index));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Volume buckets

struct Bucket {
    double buy = 0.0;
    double sell = 0.0;
    long long end_index = 0;  // record that completed the bucket
};

/// Fills buckets of absolute volume V in arrival order; a trade that crosses a
/// boundary is split pro rata, its sign kept on every piece.
class BucketAccumulator {
public:
    explicit BucketAccumulator(double bucket_volume) : v_(bucket_volume) {
        if (!(bucket_volume > 0.0)) throw DomainError("buckets: volume must be > 0");
    }

    /// Completed buckets are appended to `done`.
    void add(double signed_volume, long long index, std::vector<Bucket>& done) {
        if (signed_volume == 0.0 || !std::isfinite(signed_volume)) {
            throw DataError("buckets: zero or non-finite volume in record " + std::to_string(index), index);
        }
        const bool buy = signed_volume > 0.0;
        double left = std::abs(signed_volume);
        while (left > 0.0) {
            const double room = v_ - (cur_.buy + cur_.sell);
            if (left >= room) {
                (buy ? cur_.buy : cur_.sell) += room;
                left -= room;
                cur_.end_index = index;
                done.push_back(cur_);
                cur_ = Bucket{};
            } else {
                (buy ? cur_.buy : cur_.sell) += left;
                left = 0.0;
            }
        }
    }

    double bucket_volume() const { return v_; }
    const Bucket& partial() const { return cur_; }

private:
    double v_;
    Bucket cur_;
};

struct BucketSeries {
    double bucket_volume = 0.0;
    std::vector<Bucket> buckets;

    std::size_t size() const { return buckets.size(); }
    /// 2 V^B / V - 1
    double imbalance(std::size_t l) const { return 2.0 * buckets[l].buy / bucket_volume - 1.0; }
    std::vector<double> imbalances() const {
        std::vector<double> out(buckets.size());
        for (std::size_t l = 0; l < out.size(); ++l) out[l] = imbalance(l);
        return out;
    }
};

template <class Range>
BucketSeries bucket_imbalance(const Range& trades, double bucket_volume) {
    BucketAccumulator acc(bucket_volume);
    BucketSeries s;
    s.bucket_volume = bucket_volume;
    for (const TradeRecord& t : trades) acc.add(t.signed_volume, t.index, s.buckets);
    return s;
}

/// VPIN_l = (1/n) sum_{k=l-n}^{l-1} |I_k| for l = n..L, buckets numbered from 0.
/// Entry r of the result is VPIN_{n+r}; empty when fewer than n buckets.
inline std::vector<double> vpin(const BucketSeries& s, std::size_t n) {
    if (n < 1) throw DomainError("vpin: window must be >= 1");
    std::vector<double> out;
    if (s.size() < n) return out;
    const auto abs_i = s.imbalances();
    for (std::size_t l = n; l <= s.size(); ++l) {
        double sum = 0.0;
        for (std::size_t k = l - n; k < l; ++k) sum += std::abs(abs_i[k]);
        out.push_back(sum / static_cast<double>(n));
    }
    return out;
}

/// One row per completed bucket l: imbalance and VPIN_l (blank for l < n).
inline void write_bucket_csv(std::ostream& out, const BucketSeries& s, std::size_t n) {
    const auto v = vpin(s, n);
    CsvWriter csv(out, {"l", "end_index", "imbalance", "vpin"});
    for (std::size_t l = 0; l < s.size(); ++l) {
        if (l >= n && l - n < v.size()) {
            csv.row(l, s.buckets[l].end_index, s.imbalance(l), v[l - n]);
        } else {
            csv.row(l, s.buckets[l].end_index, s.imbalance(l), "");
        }
    }
}

// ---------------------------------------------------------------------------
// Trade CSV: index,signed_volume[,kind], optional header line.

class TradeReader {
public:
    explicit TradeReader(std::istream& in, TradeFilter filter = TradeFilter::ExecutionOnly)
        : in_(in), filter_(filter) {}

    /// Next accepted record, or nullopt at end of input.
    std::optional<TradeRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            if (!seen_data_ && is_header(line)) {
                seen_data_ = true;
                continue;
            }
            seen_data_ = true;
            TradeRecord r = parse(line);
            if (accepts(filter_, r.kind)) return r;
        }
        if (in_.bad()) throw DataError("trades: read failure after line " + std::to_string(line_no_), line_no_);
        return std::nullopt;
    }

    long long line() const { return line_no_; }

    /// Single-pass iteration.
    class iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = TradeRecord;
        using difference_type = std::ptrdiff_t;
        using pointer = const TradeRecord*;
        using reference = const TradeRecord&;
        iterator() = default;
        explicit iterator(TradeReader* r) : r_(r) { ++*this; }
        const TradeRecord& operator*() const { return cur_; }
        const TradeRecord* operator->() const { return &cur_; }
        iterator& operator++() {
            auto n = r_->next();
            if (n) cur_ = *n;
            else r_ = nullptr;
            return *this;
        }
        bool operator==(const iterator& o) const { return r_ == o.r_; }

    private:
        TradeReader* r_ = nullptr;
        TradeRecord cur_;
    };
    iterator begin() { return iterator(this); }
    iterator end() { return iterator(); }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    }

    static bool is_header(const std::string& line) {
        const auto first = trim(std::string_view(line).substr(0, line.find(',')));
        long long v = 0;
        auto [p, ec] = std::from_chars(first.data(), first.data() + first.size(), v);
        return ec != std::errc() || p != first.data() + first.size();
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("trades: line " + std::to_string(line_no_) + ": " + what, line_no_);
    }

    TradeRecord parse(const std::string& line) const {
        std::vector<std::string_view> f;
        std::string_view rest(line);
        while (true) {
            const auto c = rest.find(',');
            f.push_back(trim(rest.substr(0, c)));
            if (c == std::string_view::npos) break;
            rest.remove_prefix(c + 1);
        }
        if (f.size() < 2 || f.size() > 3) fail("expected index,signed_volume[,kind]");
        TradeRecord r;
        auto [p1, e1] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), r.index);
        if (e1 != std::errc() || p1 != f[0].data() + f[0].size()) fail("bad index '" + std::string(f[0]) + "'");
        auto [p2, e2] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), r.signed_volume);
        if (e2 != std::errc() || p2 != f[1].data() + f[1].size() || !std::isfinite(r.signed_volume)) {
            fail("bad volume '" + std::string(f[1]) + "'");
        }
        if (r.signed_volume == 0.0) fail("zero volume");
        if (f.size() == 3 && !f[2].empty()) {
            if (f[2] == "execution") r.kind = TradeKind::Execution;
            else if (f[2] == "limit_at_touch") r.kind = TradeKind::LimitAtTouch;
            else fail("unknown kind '" + std::string(f[2]) + "'");
        }
        return r;
    }

    std::istream& in_;
    TradeFilter filter_;
    long long line_no_ = 0;
    bool seen_data_ = false;
};

/// Streams every accepted record of `path` through fn.
template <class Fn>
void ingest_trades(const std::string& path, TradeFilter filter, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("trades: cannot open '" + path + "'", 0);
    TradeReader reader(in, filter);
    while (auto r = reader.next()) fn(*r);
}

}  // namespace flowexec
