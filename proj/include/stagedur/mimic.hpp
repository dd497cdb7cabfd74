#pragma once

#include "stagedur/epoch.hpp"
#include "stagedur/errors.hpp"
#include "stagedur/history.hpp"
#include "stagedur/model.hpp"
#include "stagedur/parallel.hpp"
#include "stagedur/rng.hpp"
#include "stagedur/strategy.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace stagedur {

/// Same shape as a G_1 history; holds (s'_1, a'_{T_1}, s'_{T_1+1}, ..., s'_{T_{k-1}+1}).
using FilteredHistory = History;

/// Keeps the epoch-boundary coordinates of the first k epochs of a G_h play.
inline FilteredHistory filter_trajectory(const ExtendedTrajectory& traj, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    if (traj.length() == 0) throw Error(ErrorCode::InsufficientEpochs, "empty trajectory");
    FilteredHistory eta(traj.signals.front());
    for (std::size_t j = 0; j < traj.length() && eta.length() < k; ++j) {
        if (!traj.marks[j]) continue;
        // j is T_i - 1 in 0-based indexing; the next stage starts epoch i + 1.
        if (j + 1 >= traj.length()) break;
        eta.steps.emplace_back(traj.actions[j], traj.signals[j + 1]);
    }
    if (eta.length() < k)
        throw Error(ErrorCode::InsufficientEpochs, "need " + std::to_string(k) + " epochs, found " +
                                                       std::to_string(eta.length()));
    return eta;
}

/// Smallest N with (1-h)^N <= 1e-9, the default per-epoch truncation.
inline std::size_t default_truncation(StageDuration h) {
    if (h.value() >= 1.0) return 1;
    const double n = std::ceil(std::log(1e-9) / std::log1p(-h.value()));
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

/// Bound on the total variation lost by truncating k epochs at n_max stages.
inline double truncation_bound(StageDuration h, std::size_t k, std::size_t n_max) {
    return 2.0 * double(k) * std::pow(1.0 - h.value(), double(n_max));
}

namespace detail {

using Node = MemoryProcess::Node;
/// Mass over (memory node, state) at the start of an epoch.
using Frontier = std::map<std::pair<Node, StateIndex>, double>;
/// Mass over (memory node, state, closing action) at the end of an epoch.
using Closed = std::map<std::tuple<Node, StateIndex, ActionIndex>, double>;

/**
 * Runs one epoch of G_h from a frontier: the state is frozen, the memory
 * moves on the repeated signal, and the epoch closes at each stage with
 * probability h. Implementations differ in how the geometric sum is done.
 */
class EpochPropagator {
public:
    virtual ~EpochPropagator() = default;
    virtual NodeDistribution start(SignalIndex s) = 0;
    virtual NodeDistribution next(Node q, ActionIndex a, SignalIndex s) = 0;
    virtual Closed close_epoch(const PomdpModel& m, const Frontier& frontier) = 0;
};

/// Sums the epoch stage by stage up to n_max stages; works for any memory process.
class TruncatedPropagator final : public EpochPropagator {
public:
    TruncatedPropagator(std::unique_ptr<MemoryProcess> memory, StageDuration h, std::size_t n_max,
                        std::size_t budget)
        : memory_(std::move(memory)), h_(h.value()), n_max_(n_max), budget_(budget) {}

    NodeDistribution start(SignalIndex s) override { return memory_->start(s); }
    NodeDistribution next(Node q, ActionIndex a, SignalIndex s) override {
        return memory_->next(q, a, s);
    }

    Closed close_epoch(const PomdpModel& m, const Frontier& frontier) override {
        Closed closed;
        Frontier inner = frontier;
        for (std::size_t n = 1; n <= n_max_ && !inner.empty(); ++n) {
            Frontier next_inner;
            for (const auto& [key, mass] : inner) {
                const auto [q, state] = key;
                const MixedAction mixed = memory_->act(q);
                const SignalIndex s = m.signal(state);
                for (ActionIndex a = 0; a < mixed.size(); ++a) {
                    if (mixed[a] <= 0.0) continue;
                    closed[{q, state, a}] += mass * mixed[a] * h_;
                    if (n == n_max_ || h_ >= 1.0) continue;
                    for (auto [q2, p] : memory_->next(q, a, s))
                        next_inner[{q2, state}] += mass * mixed[a] * (1.0 - h_) * p;
                }
                if (++work_ > budget_)
                    throw Error(ErrorCode::BudgetExceeded,
                                "epoch enumeration exceeded budget " + std::to_string(budget_));
            }
            inner = std::move(next_inner);
        }
        return closed;
    }

private:
    std::unique_ptr<MemoryProcess> memory_;
    double h_;
    std::size_t n_max_;
    std::size_t budget_;
    std::size_t work_ = 0;
};

/// Exact epoch for a finite-state controller through the epoch memory operator.
class ClosedFormPropagator final : public EpochPropagator {
public:
    ClosedFormPropagator(const FiniteStateController& fsc, StageDuration h)
        : fsc_(fsc), memory_(fsc_) {
        const auto nq = static_cast<Eigen::Index>(fsc_.num_memory());
        for (SignalIndex s = 0; s < fsc_.num_signals(); ++s) {
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nq, nq);
            for (Eigen::Index q = 0; q < nq; ++q)
                for (ActionIndex a = 0; a < fsc_.num_actions(); ++a) {
                    const double w = fsc_.rule(q)[a];
                    if (w <= 0.0) continue;
                    for (Eigen::Index n = 0; n < nq; ++n) M(q, n) += w * fsc_.update(q, a, s, n);
                }
            operators_.push_back(epoch_memory_operator(M, h));
        }
    }
    ClosedFormPropagator(const ClosedFormPropagator&) = delete;

    NodeDistribution start(SignalIndex s) override { return memory_.start(s); }
    NodeDistribution next(Node q, ActionIndex a, SignalIndex s) override {
        return memory_.next(q, a, s);
    }

    Closed close_epoch(const PomdpModel& m, const Frontier& frontier) override {
        Closed closed;
        for (const auto& [key, mass] : frontier) {
            const auto [q, state] = key;
            const Eigen::MatrixXd& E = operators_[m.signal(state)];
            for (Eigen::Index q_end = 0; q_end < E.cols(); ++q_end) {
                const double w = mass * E(q, q_end);
                if (w <= 0.0) continue;
                const MixedAction& rule = fsc_.rule(q_end);
                for (ActionIndex a = 0; a < rule.size(); ++a)
                    if (rule[a] > 0.0) closed[{static_cast<Node>(q_end), state, a}] += w * rule[a];
            }
        }
        return closed;
    }

    const Eigen::MatrixXd& epoch_operator(SignalIndex s) const { return operators_[s]; }

private:
    FiniteStateController fsc_;
    ControllerMemory memory_;
    std::vector<Eigen::MatrixXd> operators_;
};

inline Frontier initial_frontier(const PomdpModel& m, EpochPropagator& prop, SignalIndex first) {
    Frontier f;
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        if (m.init(s) <= 0.0 || m.signal(s) != first) continue;
        for (auto [q, p] : prop.start(first)) f[{q, s}] += m.init(s) * p;
    }
    return f;
}

/// Conditions closed epochs on (a, s) and opens the next epoch.
inline Frontier advance_frontier(const PomdpModel& m, EpochPropagator& prop, const Closed& closed,
                                 ActionIndex action, SignalIndex signal) {
    Frontier f;
    for (const auto& [key, mass] : closed) {
        const auto [q, state, a] = key;
        if (a != action) continue;
        NodeDistribution nodes;
        bool fetched = false;
        for (StateIndex t = 0; t < m.num_states(); ++t) {
            const double p = m.transition(state, a, t);
            if (p <= 0.0 || m.signal(t) != signal) continue;
            if (!fetched) {
                nodes = prop.next(q, a, signal);
                fetched = true;
            }
            for (auto [q2, pq] : nodes) f[{q2, t}] += mass * p * pq;
        }
    }
    return f;
}

inline double total_mass(const Frontier& f) {
    double t = 0.0;
    for (const auto& kv : f) t += kv.second;
    return t;
}

} // namespace detail

/// sigma-hat at one filtered history, with the joint law it was computed from.
struct MimicResult {
    MixedAction action;
    /// P^h(H^fil_k = eta, w'_{T_k} = state, a'_{T_k} = a) at [state * |A| + a].
    std::vector<double> joint;
    double conditioning_mass = 0.0;
    double error_bound = 0.0;
    bool fallback = false;
    /// False when the conditioning mass is under ten times the truncation bound.
    bool reliable = true;
};

namespace detail {

inline MimicResult mimic_from_propagator(const PomdpModel& m, EpochPropagator& prop,
                                         const FilteredHistory& eta, double error_bound) {
    const std::size_t na = m.num_actions();
    Frontier f = initial_frontier(m, prop, eta.first_signal);
    Closed closed = prop.close_epoch(m, f);
    for (auto [a, s] : eta.steps) {
        f = advance_frontier(m, prop, closed, a, s);
        closed = prop.close_epoch(m, f);
    }
    std::vector<double> joint(m.num_states() * na, 0.0);
    std::vector<double> by_action(na, 0.0);
    double mass = 0.0;
    for (const auto& [key, w] : closed) {
        const auto [q, state, a] = key;
        joint[state * na + a] += w;
        by_action[a] += w;
        mass += w;
    }
    const bool null_event = !(mass > 0.0);
    MimicResult out{null_event ? MixedAction::uniform(na) : MixedAction::normalized(by_action),
                    std::move(joint), mass, error_bound, null_event, true};
    out.reliable = !(mass < 10.0 * error_bound);
    return out;
}

} // namespace detail

/**
 * sigma-hat(eta)(a) = P^h_sigma(a'_{T_k} = a | H^fil_k = eta) by enumerating
 * every G_h play compatible with eta, each epoch cut at n_max stages. Null
 * events get the uniform mixed action.
 */
inline MimicResult mimic_action_exact(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                      const FilteredHistory& eta, std::size_t n_max,
                                      std::size_t budget = kDefaultEnumerationBudget) {
    if (n_max < 1) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 1");
    detail::TruncatedPropagator prop(sigma.memory(), h, n_max, budget);
    const double bound = h.value() >= 1.0 ? 0.0 : truncation_bound(h, eta.length(), n_max);
    return detail::mimic_from_propagator(m, prop, eta, bound);
}

/// Same quantity for a finite-state controller, with no truncation.
inline MimicResult mimic_action_closed_form(const PomdpModel& m, const FiniteStateController& sigma,
                                            StageDuration h, const FilteredHistory& eta) {
    detail::ClosedFormPropagator prop(sigma, h);
    return detail::mimic_from_propagator(m, prop, eta, 0.0);
}

/**
 * sigma-hat of a controller, itself a controller on the same memory: before
 * each action the memory takes a geometric number of in-epoch steps, folded
 * into init and update by the epoch memory operator of the current signal.
 * Its behavior agrees with sigma-hat on every history of positive probability.
 */
inline FiniteStateController mimic_controller(const FiniteStateController& sigma, StageDuration h) {
    detail::ClosedFormPropagator prop(sigma, h);
    const std::size_t nq = sigma.num_memory(), na = sigma.num_actions(), nz = sigma.num_signals();
    auto fold = [&](const double* row, SignalIndex s) {
        const Eigen::MatrixXd& E = prop.epoch_operator(s);
        std::vector<double> out(nq, 0.0);
        double total = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
            if (row[q] <= 0.0) continue;
            for (std::size_t n = 0; n < nq; ++n) out[n] += row[q] * E(q, n);
        }
        for (double& x : out) {
            x = std::max(x, 0.0);
            total += x;
        }
        for (double& x : out) x /= total;
        return out;
    };
    std::vector<std::vector<double>> init;
    for (SignalIndex s = 0; s < nz; ++s) init.push_back(fold(sigma.init(s).data(), s));
    std::vector<double> update(nq * na * nz * nq);
    std::vector<double> row(nq);
    for (std::size_t q = 0; q < nq; ++q)
        for (ActionIndex a = 0; a < na; ++a)
            for (SignalIndex s = 0; s < nz; ++s) {
                for (std::size_t n = 0; n < nq; ++n) row[n] = sigma.update(q, a, s, n);
                auto folded = fold(row.data(), s);
                std::copy(folded.begin(), folded.end(),
                          update.begin() + static_cast<std::ptrdiff_t>(((q * na + a) * nz + s) * nq));
            }
    std::vector<MixedAction> rules;
    std::vector<std::string> names;
    for (std::size_t q = 0; q < nq; ++q) {
        rules.push_back(sigma.rule(q));
        names.push_back(sigma.memory_name(q));
    }
    return FiniteStateController(nz, std::move(init), std::move(rules), std::move(update),
                                 std::move(names));
}

/// Monte Carlo estimate of sigma-hat(eta) by rejection on the filtered history.
struct MixedActionEstimate {
    std::vector<double> weights;
    std::vector<double> std_error;
    std::size_t samples = 0;
    std::size_t accepted = 0;
    double acceptance_rate() const { return samples ? double(accepted) / double(samples) : 0.0; }
};

inline MixedActionEstimate mimic_action_mc(const PomdpModel& m, const Strategy& sigma,
                                           StageDuration h, const FilteredHistory& eta,
                                           std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
    const std::size_t k = eta.length();
    std::vector<long> outcome(n_samples, -1);
    parallel_for(n_samples, [&](std::size_t i) {
        Rng rng = make_stream(seed, i);
        StateIndex state = sample_index(rng, m.init_distribution());
        if (m.signal(state) != eta.first_signal) return;
        auto cursor = sigma.cursor(eta.first_signal);
        std::size_t epoch = 1;
        for (;;) {
            const MixedAction mixed = cursor->act();
            const ActionIndex a = sample_index(rng, mixed.weights());
            if (bernoulli(rng, h.value())) {
                if (epoch == k) {
                    outcome[i] = static_cast<long>(a);
                    return;
                }
                const auto [want_a, want_s] = eta.steps[epoch - 1];
                if (a != want_a) return;
                state = sample_index(rng, m.transition_row(state, a));
                if (m.signal(state) != want_s) return;
                ++epoch;
            }
            cursor->observe(a, m.signal(state));
        }
    });
    MixedActionEstimate est;
    est.samples = n_samples;
    est.weights.assign(m.num_actions(), 0.0);
    for (long o : outcome)
        if (o >= 0) {
            ++est.accepted;
            est.weights[static_cast<std::size_t>(o)] += 1.0;
        }
    if (est.accepted == 0)
        throw Error(ErrorCode::NoAcceptedSamples,
                    "no simulated play matched the filtered history in " +
                        std::to_string(n_samples) + " samples");
    const double n = double(est.accepted);
    for (auto& w : est.weights) w /= n;
    for (double p : est.weights) est.std_error.push_back(std::sqrt(p * (1.0 - p) / n));
    return est;
}

enum class MimicPath {
    Auto,      ///< closed form when the source has a controller form, else truncated
    Truncated, ///< always enumerate epochs up to n_max stages
};

/**
 * The mimicking strategy sigma-hat for G_1, built lazily from a G_h source.
 * act() is memoized behind a mutex, so one instance can be queried from
 * several threads.
 */
class MimicStrategy final : public Strategy {
public:
    MimicStrategy(PomdpModel model, std::shared_ptr<const Strategy> source, StageDuration h,
                  std::size_t n_max, MimicPath path = MimicPath::Auto,
                  std::size_t budget = kDefaultEnumerationBudget)
        : model_(std::move(model)), source_(std::move(source)), h_(h), n_max_(n_max),
          budget_(budget) {
        if (n_max_ < 1) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 1");
        if (path == MimicPath::Auto) {
            if (auto fsc = source_->to_controller(model_.num_signals()))
                controller_ = std::make_shared<const FiniteStateController>(std::move(*fsc));
        }
    }

    std::size_t num_actions() const override { return model_.num_actions(); }
    StageDuration stage_duration() const noexcept { return h_; }
    std::size_t truncation() const noexcept { return n_max_; }
    bool exact() const noexcept { return controller_ != nullptr; }

    MimicResult evaluate(const FilteredHistory& eta) const {
        if (controller_) return mimic_action_closed_form(model_, *controller_, h_, eta);
        return mimic_action_exact(model_, *source_, h_, eta, n_max_, budget_);
    }

    MixedAction act(const History& eta) const override {
        const HistoryKey key = HistoryCodec(model_.num_actions(), model_.num_signals()).encode(eta);
        {
            std::lock_guard lock(mutex_);
            if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        }
        MixedAction result = evaluate(eta).action;
        std::lock_guard lock(mutex_);
        if (memo_.size() < budget_) memo_.emplace(key, result);
        return result;
    }

    /// Incremental filter over (memory, state); one epoch of work per step.
    std::unique_ptr<StrategyCursor> cursor(SignalIndex first) const override {
        std::shared_ptr<detail::EpochPropagator> prop;
        if (controller_)
            prop = std::make_shared<detail::ClosedFormPropagator>(*controller_, h_);
        else
            prop = std::make_shared<detail::TruncatedPropagator>(source_->memory(), h_, n_max_,
                                                                 SIZE_MAX);
        return std::make_unique<Cursor>(model_, std::move(prop), first);
    }

    std::optional<FiniteStateController> to_controller(std::size_t num_signals) const override {
        if (!controller_ || num_signals != model_.num_signals()) return std::nullopt;
        return mimic_controller(*controller_, h_);
    }

private:
    /// Clones share the propagator (and its lazily built memory); not thread safe across clones.
    class Cursor final : public StrategyCursor {
    public:
        Cursor(const PomdpModel& m, std::shared_ptr<detail::EpochPropagator> prop, SignalIndex first)
            : m_(&m), prop_(std::move(prop)) {
            frontier_ = detail::initial_frontier(*m_, *prop_, first);
            refresh();
        }
        MixedAction act() const override { return action_; }
        void observe(ActionIndex a, SignalIndex s) override {
            frontier_ = detail::advance_frontier(*m_, *prop_, closed_, a, s);
            refresh();
        }
        std::unique_ptr<StrategyCursor> clone() const override {
            return std::make_unique<Cursor>(*this);
        }

    private:
        void refresh() {
            const double total = detail::total_mass(frontier_);
            if (total > 0.0)
                for (auto& kv : frontier_) kv.second /= total;
            closed_ = prop_->close_epoch(*m_, frontier_);
            std::vector<double> w(m_->num_actions(), 0.0);
            double mass = 0.0;
            for (const auto& [key, p] : closed_) {
                w[std::get<2>(key)] += p;
                mass += p;
            }
            action_ = mass > 0.0 ? MixedAction::normalized(std::move(w))
                                 : MixedAction::uniform(m_->num_actions());
        }

        const PomdpModel* m_;
        std::shared_ptr<detail::EpochPropagator> prop_;
        detail::Frontier frontier_;
        detail::Closed closed_;
        MixedAction action_ = MixedAction::pure(1, 0);
    };

    PomdpModel model_;
    std::shared_ptr<const Strategy> source_;
    StageDuration h_;
    std::size_t n_max_;
    std::size_t budget_;
    std::shared_ptr<const FiniteStateController> controller_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<HistoryKey, MixedAction, HistoryKeyHash> memo_;
};

inline MimicStrategy build_mimic_strategy(const PomdpModel& m, std::shared_ptr<const Strategy> sigma,
                                          StageDuration h, std::size_t n_max,
                                          MimicPath path = MimicPath::Auto) {
    return MimicStrategy(m, std::move(sigma), h, n_max, path);
}

/// Non-owning overload; `sigma` must outlive the returned strategy.
inline MimicStrategy build_mimic_strategy(const PomdpModel& m, const Strategy& sigma,
                                          StageDuration h, std::size_t n_max,
                                          MimicPath path = MimicPath::Auto) {
    return MimicStrategy(m, std::shared_ptr<const Strategy>(&sigma, [](const Strategy*) {}), h,
                         n_max, path);
}

} // namespace stagedur
