#pragma once

#include <charconv>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace flowexec {

/// Locale-independent CSV emitter: single header row, ',' separator, '.' decimal
/// point, shortest round-trip formatting for doubles.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out) {
        bool first = true;
        for (auto h : header) {
            if (!first) out_ << ',';
            out_ << h;
            first = false;
        }
        out_ << '\n';
    }

    template <class... Ts>
    void row(const Ts&... fields) {
        bool first = true;
        ((emit(fields, first)), ...);
        out_ << '\n';
    }

    static std::string format(double v) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

private:
    template <class T>
    void emit(const T& v, bool& first) {
        if (!first) out_ << ',';
        first = false;
        if constexpr (std::is_floating_point_v<T>) {
            out_ << format(static_cast<double>(v));
        } else if constexpr (std::is_integral_v<T>) {
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof buf, v);
            out_.write(buf, res.ptr - buf);
        } else {
            out_ << v;
        }
    }

    std::ostream& out_;
};

}  // namespace flowexec
