#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace atree {

// Error hierarchy. Every failure the library reports derives from atree::error so
// callers (the CLI in particular) can map categories onto exit codes.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class empty_input_error : public error {
public:
    using error::error;
};

class malformed_input_error : public error {
public:
    using error::error;
};

class capacity_error : public error {
public:
    using error::error;
};

class constraint_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

class missing_sample_error : public error {
public:
    using error::error;
};

// Raised by the cost-model selectors when no candidate satisfies the constraint.
// best_achievable carries the smallest latency (ns) or size (bytes) on offer.
class infeasible_error : public error {
public:
    infeasible_error(const std::string& what, double best_achievable)
        : error(what), best_achievable_(best_achievable) {}

    double best_achievable() const noexcept { return best_achievable_; }

private:
    double best_achievable_;
};

// Keys are 64-bit integers or 64-bit floats.
template <typename T>
concept IndexKey = (std::integral<T> || std::floating_point<T>) && sizeof(T) == 8;

// Signed distance (a - b) as a double. Integer keys are subtracted in their own
// domain first so spans below 2^53 stay exact.
template <IndexKey Key>
constexpr double key_delta(Key a, Key b) noexcept {
    if constexpr (std::floating_point<Key>) {
        return static_cast<double>(a) - static_cast<double>(b);
    } else {
        using U = std::make_unsigned_t<Key>;
        if (a >= b) {
            return static_cast<double>(static_cast<U>(static_cast<U>(a) - static_cast<U>(b)));
        }
        return -static_cast<double>(static_cast<U>(static_cast<U>(b) - static_cast<U>(a)));
    }
}

template <IndexKey Key>
constexpr bool key_is_valid(Key k) noexcept {
    if constexpr (std::floating_point<Key>) {
        return std::isfinite(k);
    } else {
        return true;
    }
}

// Interpolated positions are real valued and compared against integer locations.
// This absorbs floating-point rounding in the slope product; it is far below one
// location, so it never admits a deviation that a real error bound would reject.
inline constexpr double kLocationSlack = 1e-6;

// Maximum |predicted - true| location distance a segment may exhibit.
class ErrorThreshold {
public:
    constexpr ErrorThreshold() = default;
    constexpr explicit ErrorThreshold(std::uint64_t value) : value_(value) {}

    constexpr std::uint64_t value() const noexcept { return value_; }
    constexpr double as_real() const noexcept { return static_cast<double>(value_); }

    friend constexpr auto operator<=>(ErrorThreshold, ErrorThreshold) = default;

private:
    std::uint64_t value_ = 0;
};

namespace detail {

// log_base(x) with the convention that arguments <= 1 cost nothing.
inline double floored_log(double x, double base) noexcept {
    if (!(x > 1.0)) {
        return 0.0;
    }
    return std::log(x) / std::log(base);
}

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) noexcept {
    return a / b + (a % b != 0 ? 1 : 0);
}

}  // namespace detail

}  // namespace atree
