#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/model.hpp"
#include "stagedur/rng.hpp"
#include "stagedur/strategy.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

namespace stagedur {

/// Epoch lengths N_1..N_k and boundaries T_0 = 0, T_i = N_1 + ... + N_i.
struct EpochSample {
    std::vector<std::size_t> lengths;
    std::vector<std::size_t> boundaries;
};

/// Geometric(h) on {1, 2, ...} by inverse CDF: ceil(ln U / ln(1-h)), U in (0,1].
inline std::size_t sample_geometric(Rng& rng, StageDuration h) {
    if (h.value() >= 1.0) return 1;
    const double u = uniform_open_closed(rng);
    const double n = std::ceil(std::log(u) / std::log1p(-h.value()));
    return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

inline EpochSample sample_epochs(StageDuration h, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    EpochSample out;
    out.lengths.reserve(k);
    out.boundaries.reserve(k + 1);
    out.boundaries.push_back(0);
    for (std::size_t i = 0; i < k; ++i) {
        out.lengths.push_back(sample_geometric(rng, h));
        out.boundaries.push_back(out.boundaries.back() + out.lengths.back());
    }
    return out;
}

/// P(N >= m) = (1-h)^(m-1).
inline double geometric_tail(StageDuration h, std::size_t m) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "geometric tail needs m >= 1");
    return std::pow(1.0 - h.value(), double(m - 1));
}

/**
 * One play of G_h on the extended space. Index j-1 holds stage j: the state
 * w'_j, the signal s'_j = f(w'_j), the action a'_j, and the mark X_j telling
 * whether the transition closing stage j was drawn from P.
 */
struct ExtendedTrajectory {
    std::vector<StateIndex> states;
    std::vector<SignalIndex> signals;
    std::vector<ActionIndex> actions;
    std::vector<unsigned char> marks;

    std::size_t length() const noexcept { return states.size(); }
};

/// Steps one play of G_h at a time; the caller owns the random stream.
class GhStepper {
public:
    struct Stage {
        StateIndex state;
        SignalIndex signal;
        ActionIndex action;
        bool moved;
    };

    GhStepper(const PomdpModel& m, const Strategy& sigma, StageDuration h, Rng& rng)
        : m_(&m), h_(h.value()), rng_(&rng) {
        state_ = sample_index(rng, m.init_distribution());
        cursor_ = sigma.cursor(m.signal(state_));
    }

    Stage step() {
        Stage st{state_, m_->signal(state_), 0, false};
        const MixedAction mixed = cursor_->act();
        st.action = sample_index(*rng_, mixed.weights());
        st.moved = bernoulli(*rng_, h_);
        if (st.moved) state_ = sample_index(*rng_, m_->transition_row(state_, st.action));
        cursor_->observe(st.action, m_->signal(state_));
        return st;
    }

private:
    const PomdpModel* m_;
    double h_;
    Rng* rng_;
    StateIndex state_;
    std::unique_ptr<StrategyCursor> cursor_;
};

/// Simulates `horizon` stages of G_h with base model `m`, consuming `rng`.
inline ExtendedTrajectory simulate_gh(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                      std::size_t horizon, Rng& rng) {
    if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1");
    ExtendedTrajectory tr;
    tr.states.reserve(horizon);
    tr.signals.reserve(horizon);
    tr.actions.reserve(horizon);
    tr.marks.reserve(horizon);
    GhStepper play(m, sigma, h, rng);
    for (std::size_t j = 0; j < horizon; ++j) {
        const auto st = play.step();
        tr.states.push_back(st.state);
        tr.signals.push_back(st.signal);
        tr.actions.push_back(st.action);
        tr.marks.push_back(st.moved ? 1 : 0);
    }
    return tr;
}

inline ExtendedTrajectory simulate_gh(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                      std::size_t horizon, std::uint64_t seed) {
    Rng rng(seed);
    return simulate_gh(m, sigma, h, horizon, rng);
}

/**
 * E[M^(N-1)] for N ~ Geometric(h), in closed form h (I - (1-h) M)^{-1}.
 * Solved with partial pivoting; the residual must stay below 1e-10.
 */
inline Eigen::MatrixXd epoch_memory_operator(const Eigen::MatrixXd& transition, StageDuration h) {
    const auto n = transition.rows();
    if (transition.cols() != n)
        throw Error(ErrorCode::InvalidArgument, "epoch operator needs a square matrix");
    const double hv = h.value();
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - (1.0 - hv) * transition;
    const Eigen::MatrixXd rhs = hv * Eigen::MatrixXd::Identity(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::MatrixXd out = lu.solve(rhs);
    const double residual = (system * out - rhs).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > 1e-10)
        throw Error(ErrorCode::SingularSystem,
                    "epoch operator residual " + format_real(residual));
    return out;
}

} // namespace stagedur
