#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/model.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace stagedur {

/// (s_1, a_1, s_2, ..., a_{t-1}, s_t); its length is t.
struct History {
    SignalIndex first_signal = 0;
    std::vector<std::pair<ActionIndex, SignalIndex>> steps;

    History() = default;
    explicit History(SignalIndex first) : first_signal(first) {}

    std::size_t length() const noexcept { return 1 + steps.size(); }
    SignalIndex last_signal() const noexcept {
        return steps.empty() ? first_signal : steps.back().second;
    }

    History extended(ActionIndex a, SignalIndex s) const {
        History h = *this;
        h.steps.emplace_back(a, s);
        return h;
    }

    /// First `t` coordinates: a history of length t.
    History prefix(std::size_t t) const {
        History h(first_signal);
        h.steps.assign(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(t - 1));
        return h;
    }

    auto operator<=>(const History&) const = default;
    bool operator==(const History&) const = default;
};

/// Canonical integer key of a history: its length plus base-|A||S| digits.
struct HistoryKey {
    std::uint32_t length = 0;
    std::uint64_t code = 0;
    bool operator==(const HistoryKey&) const = default;
};

struct HistoryKeyHash {
    std::size_t operator()(const HistoryKey& k) const noexcept {
        return std::hash<std::uint64_t>{}(k.code * 0x9E3779B97F4A7C15ull ^ k.length);
    }
};

class HistoryCodec {
public:
    HistoryCodec(std::size_t num_actions, std::size_t num_signals)
        : num_actions_(num_actions), num_signals_(num_signals) {}

    HistoryKey encode(const History& h) const {
        const std::uint64_t base = num_actions_ * num_signals_;
        std::uint64_t code = h.first_signal;
        for (auto [a, s] : h.steps) {
            if (code > (UINT64_MAX - (base - 1)) / base)
                throw Error(ErrorCode::BudgetExceeded, "history too long for the integer encoding");
            code = code * base + a * num_signals_ + s;
        }
        return {static_cast<std::uint32_t>(h.length()), code};
    }

    History decode(const HistoryKey& key) const {
        const std::uint64_t base = num_actions_ * num_signals_;
        History h;
        h.steps.resize(key.length - 1);
        std::uint64_t code = key.code;
        for (std::size_t i = key.length - 1; i-- > 0;) {
            std::uint64_t digit = code % base;
            code /= base;
            h.steps[i] = {digit / num_signals_, digit % num_signals_};
        }
        h.first_signal = code;
        return h;
    }

private:
    std::size_t num_actions_;
    std::size_t num_signals_;
};

} // namespace stagedur

namespace stagedur {

/**
 * Dense index of a history among all histories ordered by length, then by
 * code. A bijection onto the nonnegative integers while it fits in 64 bits.
 */
inline std::uint64_t history_dense_index(const History& h, std::size_t num_actions,
                                         std::size_t num_signals) {
    const HistoryKey key = HistoryCodec(num_actions, num_signals).encode(h);
    const std::uint64_t base = num_actions * num_signals;
    std::uint64_t offset = 0, layer = num_signals;
    for (std::uint32_t l = 1; l < key.length; ++l) {
        offset += layer;
        layer *= base;
    }
    return offset + key.code;
}

} // namespace stagedur
