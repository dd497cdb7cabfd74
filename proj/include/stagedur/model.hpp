#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace stagedur {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;
using SignalIndex = std::size_t;

/// Tolerance on every probability vector that enters or leaves the library.
inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr std::size_t kNoSignal = std::numeric_limits<std::size_t>::max();

/// Stage duration h in (0, 1].
class StageDuration {
public:
    explicit StageDuration(double h) : h_(h) {
        if (!(h > 0.0 && h <= 1.0))
            throw Error(ErrorCode::InvalidArgument,
                        "stage duration must lie in (0,1], got " + format_real(h));
    }
    double value() const noexcept { return h_; }

private:
    double h_;
};

/// A probability vector over the action set.
class MixedAction {
public:
    explicit MixedAction(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty())
            throw Error(ErrorCode::InvalidArgument, "mixed action over an empty action set");
        double sum = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw Error(ErrorCode::NegativeProbability,
                            "mixed action weight " + format_real(w));
            sum += w;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance)
            throw Error(ErrorCode::InvalidArgument,
                        "mixed action sums to " + format_real(sum));
    }

    static MixedAction pure(std::size_t num_actions, ActionIndex a) {
        std::vector<double> w(num_actions, 0.0);
        w.at(a) = 1.0;
        return MixedAction(std::move(w));
    }

    static MixedAction uniform(std::size_t num_actions) {
        return MixedAction(std::vector<double>(num_actions, 1.0 / double(num_actions)),
                           Normalize{});
    }

    /// Rescales nonnegative weights to sum one. Throws on a zero total.
    static MixedAction normalized(std::vector<double> weights) {
        return MixedAction(std::move(weights), Normalize{});
    }

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](ActionIndex a) const { return weights_[a]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    bool operator==(const MixedAction&) const = default;

private:
    struct Normalize {};
    MixedAction(std::vector<double> weights, Normalize) : weights_(std::move(weights)) {
        double sum = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw Error(ErrorCode::NegativeProbability,
                            "mixed action weight " + format_real(w));
            sum += w;
        }
        if (weights_.empty() || !(sum > 0.0))
            throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero mixed action");
        for (double& w : weights_) w /= sum;
    }

    std::vector<double> weights_;
};

/**
 * Unvalidated model contents. All tensors are dense and indexed by the
 * position of the names in `states`, `actions` and `signals`:
 * payoff[s * |A| + a], transition[(s * |A| + a) * |S| + s'].
 */
struct ModelData {
    std::vector<std::string> states;
    std::vector<std::string> actions;
    std::vector<std::string> signals;
    std::vector<SignalIndex> signal_map;
    std::vector<double> payoff;
    std::vector<double> transition;
    std::vector<double> init;

    bool operator==(const ModelData&) const = default;
};

class PomdpModel;
struct SourcePositions;
PomdpModel validate_model(ModelData raw, const SourcePositions* where = nullptr);

/// A validated, immutable finite POMDP with deterministic signals.
class PomdpModel {
public:
    std::size_t num_states() const noexcept { return d_.states.size(); }
    std::size_t num_actions() const noexcept { return d_.actions.size(); }
    std::size_t num_signals() const noexcept { return d_.signals.size(); }

    SignalIndex signal(StateIndex s) const { return d_.signal_map[s]; }
    double payoff(StateIndex s, ActionIndex a) const { return d_.payoff[s * num_actions() + a]; }
    double init(StateIndex s) const { return d_.init[s]; }
    double transition(StateIndex s, ActionIndex a, StateIndex next) const {
        return d_.transition[(s * num_actions() + a) * num_states() + next];
    }
    std::span<const double> transition_row(StateIndex s, ActionIndex a) const {
        return {d_.transition.data() + (s * num_actions() + a) * num_states(), num_states()};
    }
    std::span<const double> init_distribution() const { return d_.init; }

    /// M = max |g(s, a)|, cached at validation.
    double payoff_bound() const noexcept { return payoff_bound_; }

    const std::string& state_name(StateIndex s) const { return d_.states[s]; }
    const std::string& action_name(ActionIndex a) const { return d_.actions[a]; }
    const std::string& signal_name(SignalIndex z) const { return d_.signals[z]; }

    const ModelData& data() const noexcept { return d_; }

    bool operator==(const PomdpModel& other) const { return d_ == other.d_; }

private:
    friend PomdpModel validate_model(ModelData raw, const SourcePositions* where);
    explicit PomdpModel(ModelData d) : d_(std::move(d)) {
        for (double g : d_.payoff) payoff_bound_ = std::max(payoff_bound_, std::abs(g));
    }

    ModelData d_;
    double payoff_bound_ = 0.0;
};

namespace detail {

inline void check_unique_names(const std::vector<std::string>& names, const char* what) {
    if (names.empty())
        throw Error(ErrorCode::InvalidArgument, std::string("empty ") + what + " set");
    std::unordered_set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second)
            throw Error(ErrorCode::InvalidArgument,
                        std::string("duplicate ") + what + " name '" + n + "'");
}

} // namespace detail

/// Line and column of a token in a source text; line 0 means no position.
struct SourcePos {
    std::size_t line = 0;
    std::size_t column = 0;
};

/// Where each entry of a ModelData came from, filled by the text parser.
struct SourcePositions {
    std::vector<SourcePos> state;   // declaration, per state
    std::vector<SourcePos> payoff;  // per (state, action)
    std::vector<SourcePos> row;     // first entry of each transition row
    std::vector<SourcePos> entry;   // per (state, action, next)
    std::vector<SourcePos> init;    // per state
    SourcePos init_section;
};

/**
 * Checks every model invariant and returns the immutable model.
 *
 * Transition rows and the initial distribution must be nonnegative and sum to
 * one within kProbabilityTolerance; every state needs a signal; payoffs must
 * be finite. Nothing is renormalized here (see normalize_model). With `where`,
 * errors carry the position of the offending entry.
 */
inline PomdpModel validate_model(ModelData raw, const SourcePositions* where) {
    detail::check_unique_names(raw.states, "state");
    detail::check_unique_names(raw.actions, "action");
    detail::check_unique_names(raw.signals, "signal");
    const std::size_t ns = raw.states.size(), na = raw.actions.size();

    if (raw.signal_map.size() != ns || raw.payoff.size() != ns * na ||
        raw.transition.size() != ns * na * ns || raw.init.size() != ns)
        throw Error(ErrorCode::InvalidArgument, "tensor sizes do not match the declared sets");

    auto fail = [&](ErrorCode code, SourcePos pos, const std::string& detail) -> Error {
        if (where && pos.line > 0) return Error(code, pos.line, pos.column, detail);
        return Error(code, detail);
    };
    auto at = [&](const std::vector<SourcePos> SourcePositions::*field, std::size_t i) {
        return where && i < (where->*field).size() ? (where->*field)[i] : SourcePos{};
    };

    for (StateIndex s = 0; s < ns; ++s) {
        if (raw.signal_map[s] == kNoSignal)
            throw fail(ErrorCode::MissingSignal, at(&SourcePositions::state, s),
                       "state '" + raw.states[s] + "' has no signal");
        if (raw.signal_map[s] >= raw.signals.size())
            throw Error(ErrorCode::InvalidArgument,
                        "state '" + raw.states[s] + "' maps to an undeclared signal");
    }

    for (StateIndex s = 0; s < ns; ++s)
        for (ActionIndex a = 0; a < na; ++a)
            if (!std::isfinite(raw.payoff[s * na + a]))
                throw fail(ErrorCode::NonFinitePayoff, at(&SourcePositions::payoff, s * na + a),
                           "state '" + raw.states[s] + "' action '" + raw.actions[a] + "'");

    for (StateIndex s = 0; s < ns; ++s) {
        for (ActionIndex a = 0; a < na; ++a) {
            double sum = 0.0;
            for (StateIndex t = 0; t < ns; ++t) {
                const std::size_t i = (s * na + a) * ns + t;
                double p = raw.transition[i];
                if (!(p >= 0.0) || !std::isfinite(p))
                    throw fail(ErrorCode::NegativeProbability, at(&SourcePositions::entry, i),
                               "transition state '" + raw.states[s] + "' action '" + raw.actions[a] +
                                   "' next '" + raw.states[t] + "' has probability " + format_real(p));
                sum += p;
            }
            if (std::abs(sum - 1.0) > kProbabilityTolerance)
                throw fail(ErrorCode::RowNotStochastic, at(&SourcePositions::row, s * na + a),
                           "state '" + raw.states[s] + "' action '" + raw.actions[a] + "' sums to " +
                               format_real(sum));
        }
    }

    double init_sum = 0.0;
    for (StateIndex s = 0; s < ns; ++s) {
        double p = raw.init[s];
        if (!(p >= 0.0) || !std::isfinite(p))
            throw fail(ErrorCode::NegativeProbability, at(&SourcePositions::init, s),
                       "init state '" + raw.states[s] + "' has probability " + format_real(p));
        init_sum += p;
    }
    if (std::abs(init_sum - 1.0) > kProbabilityTolerance)
        throw fail(ErrorCode::InitNotStochastic, where ? where->init_section : SourcePos{},
                   "init sums to " + format_real(init_sum));

    return PomdpModel(std::move(raw));
}

/// Explicit renormalization of transition rows and init; rows summing to zero are left alone.
inline ModelData normalize_model(ModelData raw) {
    const std::size_t ns = raw.states.size(), na = raw.actions.size();
    auto rescale = [](double* first, std::size_t n) {
        double sum = std::accumulate(first, first + n, 0.0);
        if (sum > 0.0)
            for (std::size_t i = 0; i < n; ++i) first[i] /= sum;
    };
    if (raw.transition.size() == ns * na * ns)
        for (std::size_t row = 0; row < ns * na; ++row) rescale(raw.transition.data() + row * ns, ns);
    if (raw.init.size() == ns) rescale(raw.init.data(), ns);
    return raw;
}

/// G_h: every transition row becomes h P(.|s,a) + (1-h) delta_s.
inline PomdpModel stage_duration_transform(const PomdpModel& m, StageDuration h) {
    ModelData d = m.data();
    const double hv = h.value();
    const std::size_t ns = m.num_states(), na = m.num_actions();
    for (StateIndex s = 0; s < ns; ++s)
        for (ActionIndex a = 0; a < na; ++a)
            for (StateIndex t = 0; t < ns; ++t) {
                double& p = d.transition[(s * na + a) * ns + t];
                p = hv * p + (t == s ? 1.0 - hv : 0.0);
            }
    return validate_model(std::move(d));
}

/// G_{h1} seen as a model with stage duration `relative` over the base `base` = G_{h2}.
struct RebasedModel {
    PomdpModel base;
    StageDuration relative;
};

/**
 * Re-expresses G_{h1} relative to G_{h2} for h1 < h2, using
 * P_{h1} = (1 - h1/h2) Id + (h1/h2) P_{h2}.
 *
 * `m_h1` must actually be a stage-duration-h1 model, i.e. every diagonal
 * transition entry is at least 1 - h1; otherwise NotStageDurationModel.
 */
inline RebasedModel rescale_stage_duration(const PomdpModel& m_h1, StageDuration h1,
                                           StageDuration h2) {
    if (!(h1.value() < h2.value()))
        throw Error(ErrorCode::BadOrder, "need h1 < h2, got h1=" + format_real(h1.value()) +
                                             " h2=" + format_real(h2.value()));
    const double up = h2.value() / h1.value();
    ModelData d = m_h1.data();
    const std::size_t ns = m_h1.num_states(), na = m_h1.num_actions();
    for (StateIndex s = 0; s < ns; ++s) {
        for (ActionIndex a = 0; a < na; ++a) {
            double* row = d.transition.data() + (s * na + a) * ns;
            double off = 0.0;
            for (StateIndex t = 0; t < ns; ++t) {
                if (t == s) continue;
                row[t] *= up;
                off += row[t];
            }
            double diag = 1.0 - off;
            if (diag < -kProbabilityTolerance)
                throw Error(ErrorCode::NotStageDurationModel,
                            "state '" + m_h1.state_name(s) + "' action '" + m_h1.action_name(a) +
                                "' leaves with probability above h1");
            row[s] = std::max(diag, 0.0);
        }
    }
    return RebasedModel{validate_model(std::move(d)), StageDuration(h1.value() / h2.value())};
}

/// True iff the signal map is injective, so every signal reveals the state.
inline bool is_fully_observed(const PomdpModel& m) {
    std::vector<bool> used(m.num_signals(), false);
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        if (used[m.signal(s)]) return false;
        used[m.signal(s)] = true;
    }
    return true;
}

} // namespace stagedur
