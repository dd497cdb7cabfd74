#pragma once

#include "stagedur/stagedur.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

namespace stagedur::testing {

/// Builds a model from dense tensors with generated names.
inline PomdpModel make_model(std::size_t ns, std::size_t na, std::vector<SignalIndex> signal_map,
                             std::vector<double> payoff, std::vector<double> transition,
                             std::vector<double> init) {
    ModelData d;
    std::size_t nz = 0;
    for (auto z : signal_map) nz = std::max(nz, z + 1);
    for (std::size_t i = 0; i < ns; ++i) d.states.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < na; ++i) d.actions.push_back("u" + std::to_string(i));
    for (std::size_t i = 0; i < nz; ++i) d.signals.push_back("z" + std::to_string(i));
    d.signal_map = std::move(signal_map);
    d.payoff = std::move(payoff);
    d.transition = std::move(transition);
    d.init = std::move(init);
    return validate_model(std::move(d));
}

/// Two states swapping every stage whatever the action; payoff 1 in the first, 0 in the second.
inline PomdpModel cycling_model() {
    return make_model(2, 1, {0, 1}, {1, 0}, {0, 1, 1, 0}, {1, 0});
}

/// Payoff 1 at stage 1, 0 forever after, for every action.
inline PomdpModel one_then_zero_model() {
    return make_model(2, 2, {0, 0}, {1, 1, 0, 0}, {0, 1, 0, 1, 0, 1, 0, 1}, {1, 0});
}

/// Error code of the exception thrown by f, or nullopt.
template <class F>
std::optional<ErrorCode> error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

} // namespace stagedur::testing
