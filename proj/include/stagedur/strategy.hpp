#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/history.hpp"
#include "stagedur/model.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace stagedur {

/**
 * Incremental view of a strategy along one play: act() is the mixed action
 * at the current history, observe() appends the played action and the next
 * signal. Cursors are deterministic; sampling happens in the simulator.
 */
class StrategyCursor {
public:
    virtual ~StrategyCursor() = default;
    virtual MixedAction act() const = 0;
    virtual void observe(ActionIndex a, SignalIndex s) = 0;
    virtual std::unique_ptr<StrategyCursor> clone() const = 0;
    /// Cursors with equal keys behave identically on every continuation.
    virtual std::optional<std::uint64_t> merge_key() const { return std::nullopt; }
};

struct NodeWeight {
    std::uint32_t node;
    double prob;
};
using NodeDistribution = std::vector<NodeWeight>;

/**
 * A strategy as a (possibly lazily built) controller: internal nodes, a mixed
 * action per node and a stochastic node update on (action, signal). Unlike a
 * cursor, the node carries the internal randomness explicitly, which lets
 * enumerators merge paths that share a node. Instances are single-owner and
 * not thread safe.
 */
class MemoryProcess {
public:
    using Node = std::uint32_t;
    virtual ~MemoryProcess() = default;
    virtual NodeDistribution start(SignalIndex s) = 0;
    virtual const MixedAction& act(Node q) = 0;
    virtual NodeDistribution next(Node q, ActionIndex a, SignalIndex s) = 0;
};

class FiniteStateController;

/// Behavior strategy: a map from histories to mixed actions. Implementations are immutable.
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::size_t num_actions() const = 0;
    virtual MixedAction act(const History& history) const = 0;

    virtual std::unique_ptr<StrategyCursor> cursor(SignalIndex first) const;
    virtual std::unique_ptr<MemoryProcess> memory() const;
    /// Exact finite-state form over `num_signals` signals, when the strategy has one.
    virtual std::optional<FiniteStateController> to_controller(std::size_t num_signals) const;
};

/// Cursor that replays the full history through Strategy::act.
class HistoryCursor final : public StrategyCursor {
public:
    HistoryCursor(const Strategy& strategy, SignalIndex first)
        : strategy_(&strategy), history_(first) {}
    MixedAction act() const override { return strategy_->act(history_); }
    void observe(ActionIndex a, SignalIndex s) override { history_.steps.emplace_back(a, s); }
    std::unique_ptr<StrategyCursor> clone() const override {
        return std::make_unique<HistoryCursor>(*this);
    }

private:
    const Strategy* strategy_;
    History history_;
};

/// Memory process whose nodes are interned cursors; deterministic updates.
class CursorMemory final : public MemoryProcess {
public:
    explicit CursorMemory(const Strategy& strategy) : strategy_(&strategy) {}

    NodeDistribution start(SignalIndex s) override {
        return {{intern(strategy_->cursor(s)), 1.0}};
    }
    const MixedAction& act(Node q) override { return actions_[q]; }
    NodeDistribution next(Node q, ActionIndex a, SignalIndex s) override {
        const std::uint64_t edge = (std::uint64_t(q) << 32) | (a << 16) | s;
        if (auto it = edges_.find(edge); it != edges_.end()) return {{it->second, 1.0}};
        auto c = cursors_[q]->clone();
        c->observe(a, s);
        Node n = intern(std::move(c));
        edges_.emplace(edge, n);
        return {{n, 1.0}};
    }

private:
    Node intern(std::unique_ptr<StrategyCursor> c) {
        auto key = c->merge_key();
        if (key)
            if (auto it = by_key_.find(*key); it != by_key_.end()) return it->second;
        const Node n = static_cast<Node>(cursors_.size());
        actions_.push_back(c->act());
        cursors_.push_back(std::move(c));
        if (key) by_key_.emplace(*key, n);
        return n;
    }

    const Strategy* strategy_;
    std::vector<std::unique_ptr<StrategyCursor>> cursors_;
    std::vector<MixedAction> actions_;
    std::unordered_map<std::uint64_t, Node> by_key_;
    std::unordered_map<std::uint64_t, Node> edges_;
};

inline std::unique_ptr<StrategyCursor> Strategy::cursor(SignalIndex first) const {
    return std::make_unique<HistoryCursor>(*this, first);
}

inline std::unique_ptr<MemoryProcess> Strategy::memory() const {
    return std::make_unique<CursorMemory>(*this);
}

/**
 * Finite-state controller: memory Q, initial memory law per first signal,
 * a mixed action per memory state and a stochastic update Q x A x S -> Delta(Q).
 *
 * As a behavior strategy, act(history) averages the action rule over the
 * posterior of the memory given the observed history (actions included).
 */
class FiniteStateController final : public Strategy {
public:
    /// init[s][q]; update indexed [((q * |A| + a) * |S| + s) * |Q| + q'].
    FiniteStateController(std::size_t num_signals, std::vector<std::vector<double>> init,
                          std::vector<MixedAction> action_rule, std::vector<double> update,
                          std::vector<std::string> memory_names = {})
        : num_signals_(num_signals), init_(std::move(init)), rule_(std::move(action_rule)),
          update_(std::move(update)), names_(std::move(memory_names)) {
        const std::size_t nq = rule_.size();
        if (nq == 0) throw Error(ErrorCode::InvalidArgument, "controller without memory states");
        num_actions_ = rule_.front().size();
        for (const auto& r : rule_)
            if (r.size() != num_actions_)
                throw Error(ErrorCode::InvalidArgument, "action rules over different action sets");
        if (init_.size() != num_signals_)
            throw Error(ErrorCode::InvalidArgument, "controller init needs one row per signal");
        for (const auto& row : init_) check_row(row.data(), row.size(), "init");
        if (update_.size() != nq * num_actions_ * num_signals_ * nq)
            throw Error(ErrorCode::InvalidArgument, "controller update tensor has the wrong size");
        for (std::size_t r = 0; r < nq * num_actions_ * num_signals_; ++r)
            check_row(update_.data() + r * nq, nq, "update");
        if (names_.empty())
            for (std::size_t q = 0; q < nq; ++q) names_.push_back("q" + std::to_string(q));
        if (names_.size() != nq)
            throw Error(ErrorCode::InvalidArgument, "memory names do not match the memory size");
    }

    /// Deterministic controller: init_memory[s], next_memory[(q * |A| + a) * |S| + s].
    static FiniteStateController deterministic(std::size_t num_signals,
                                               const std::vector<std::size_t>& init_memory,
                                               std::vector<MixedAction> action_rule,
                                               const std::vector<std::size_t>& next_memory) {
        const std::size_t nq = action_rule.size();
        std::vector<std::vector<double>> init(num_signals, std::vector<double>(nq, 0.0));
        for (std::size_t s = 0; s < num_signals; ++s) init[s].at(init_memory.at(s)) = 1.0;
        std::vector<double> update(next_memory.size() * nq, 0.0);
        for (std::size_t r = 0; r < next_memory.size(); ++r) update[r * nq + next_memory[r]] = 1.0;
        return FiniteStateController(num_signals, std::move(init), std::move(action_rule),
                                     std::move(update));
    }

    std::size_t num_actions() const override { return num_actions_; }
    std::size_t num_signals() const noexcept { return num_signals_; }
    std::size_t num_memory() const noexcept { return rule_.size(); }

    const std::vector<double>& init(SignalIndex s) const { return init_[s]; }
    const MixedAction& rule(std::size_t q) const { return rule_[q]; }
    double update(std::size_t q, ActionIndex a, SignalIndex s, std::size_t next) const {
        return update_[((q * num_actions_ + a) * num_signals_ + s) * num_memory() + next];
    }
    const std::string& memory_name(std::size_t q) const { return names_[q]; }

    /// Posterior over memory after `observe`; restarts from init on `start`.
    std::vector<double> start_belief(SignalIndex s) const { return init_.at(s); }

    /**
     * One filtering step. If the action has probability zero under the
     * current belief, the action likelihood is dropped for this step.
     */
    std::vector<double> advance_belief(const std::vector<double>& belief, ActionIndex a,
                                       SignalIndex s) const {
        const std::size_t nq = num_memory();
        std::vector<double> out(nq, 0.0);
        double total = 0.0;
        for (int pass = 0; pass < 2 && total <= 0.0; ++pass) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t q = 0; q < nq; ++q) {
                double w = belief[q] * (pass == 0 ? rule_[q][a] : 1.0);
                if (w <= 0.0) continue;
                for (std::size_t n = 0; n < nq; ++n) out[n] += w * update(q, a, s, n);
            }
            total = 0.0;
            for (double x : out) total += x;
        }
        for (double& x : out) x /= total;
        return out;
    }

    MixedAction act_from_belief(const std::vector<double>& belief) const {
        std::vector<double> w(num_actions_, 0.0);
        for (std::size_t q = 0; q < num_memory(); ++q)
            if (belief[q] > 0.0)
                for (ActionIndex a = 0; a < num_actions_; ++a) w[a] += belief[q] * rule_[q][a];
        return MixedAction::normalized(std::move(w));
    }

    MixedAction act(const History& h) const override {
        auto b = start_belief(h.first_signal);
        for (auto [a, s] : h.steps) b = advance_belief(b, a, s);
        return act_from_belief(b);
    }

    std::unique_ptr<StrategyCursor> cursor(SignalIndex first) const override;
    std::unique_ptr<MemoryProcess> memory() const override;
    std::optional<FiniteStateController> to_controller(std::size_t num_signals) const override;

private:
    static void check_row(const double* row, std::size_t n, const char* what) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(row[i] >= 0.0))
                throw Error(ErrorCode::NegativeProbability,
                            std::string("controller ") + what + " entry " + format_real(row[i]));
            sum += row[i];
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance)
            throw Error(ErrorCode::RowNotStochastic,
                        std::string("controller ") + what + " row sums to " + format_real(sum));
    }

    std::size_t num_signals_;
    std::size_t num_actions_ = 0;
    std::vector<std::vector<double>> init_;
    std::vector<MixedAction> rule_;
    std::vector<double> update_;
    std::vector<std::string> names_;
};

class ControllerCursor final : public StrategyCursor {
public:
    ControllerCursor(const FiniteStateController& fsc, SignalIndex first)
        : fsc_(&fsc), belief_(fsc.start_belief(first)) {}
    MixedAction act() const override { return fsc_->act_from_belief(belief_); }
    void observe(ActionIndex a, SignalIndex s) override {
        belief_ = fsc_->advance_belief(belief_, a, s);
    }
    std::unique_ptr<StrategyCursor> clone() const override {
        return std::make_unique<ControllerCursor>(*this);
    }

private:
    const FiniteStateController* fsc_;
    std::vector<double> belief_;
};

/// Memory process with the controller's own memory states as nodes.
class ControllerMemory final : public MemoryProcess {
public:
    explicit ControllerMemory(const FiniteStateController& fsc) : fsc_(&fsc) {}
    NodeDistribution start(SignalIndex s) override {
        NodeDistribution out;
        const auto& row = fsc_->init(s);
        for (std::size_t q = 0; q < row.size(); ++q)
            if (row[q] > 0.0) out.push_back({static_cast<Node>(q), row[q]});
        return out;
    }
    const MixedAction& act(Node q) override { return fsc_->rule(q); }
    NodeDistribution next(Node q, ActionIndex a, SignalIndex s) override {
        NodeDistribution out;
        for (std::size_t n = 0; n < fsc_->num_memory(); ++n) {
            double p = fsc_->update(q, a, s, n);
            if (p > 0.0) out.push_back({static_cast<Node>(n), p});
        }
        return out;
    }

private:
    const FiniteStateController* fsc_;
};

inline std::unique_ptr<StrategyCursor> FiniteStateController::cursor(SignalIndex first) const {
    return std::make_unique<ControllerCursor>(*this, first);
}

inline std::unique_ptr<MemoryProcess> FiniteStateController::memory() const {
    return std::make_unique<ControllerMemory>(*this);
}

inline std::optional<FiniteStateController> Strategy::to_controller(std::size_t) const {
    return std::nullopt;
}

inline std::optional<FiniteStateController>
FiniteStateController::to_controller(std::size_t num_signals) const {
    if (num_signals != num_signals_)
        throw Error(ErrorCode::InvalidArgument, "controller built for " +
                                                    std::to_string(num_signals_) + " signals, model has " +
                                                    std::to_string(num_signals));
    return *this;
}

/// Signal-blind cyclic sequence of mixed actions: stage t plays actions[(t-1) mod L].
class SequenceStrategy final : public Strategy {
public:
    explicit SequenceStrategy(std::vector<MixedAction> actions) : actions_(std::move(actions)) {
        if (actions_.empty()) throw Error(ErrorCode::InvalidArgument, "empty action sequence");
        for (const auto& a : actions_)
            if (a.size() != actions_.front().size())
                throw Error(ErrorCode::InvalidArgument, "sequence mixes action set sizes");
    }

    static SequenceStrategy uniform(std::size_t num_actions) {
        return SequenceStrategy({MixedAction::uniform(num_actions)});
    }

    std::size_t num_actions() const override { return actions_.front().size(); }
    std::size_t period() const noexcept { return actions_.size(); }
    const MixedAction& at_stage(std::size_t t) const { return actions_[(t - 1) % period()]; }

    MixedAction act(const History& h) const override { return at_stage(h.length()); }

    std::unique_ptr<StrategyCursor> cursor(SignalIndex) const override {
        return std::make_unique<Cursor>(*this);
    }

    std::optional<FiniteStateController> to_controller(std::size_t num_signals) const override {
        return controller_for(num_signals);
    }

    /// Memory Z_L with q -> q+1 mod L regardless of what is observed.
    FiniteStateController controller_for(std::size_t num_signals) const {
        const std::size_t nq = period(), na = num_actions();
        std::vector<std::size_t> next(nq * na * num_signals);
        for (std::size_t q = 0; q < nq; ++q)
            for (std::size_t r = 0; r < na * num_signals; ++r) next[q * na * num_signals + r] = (q + 1) % nq;
        return FiniteStateController::deterministic(
            num_signals, std::vector<std::size_t>(num_signals, 0), actions_, next);
    }

private:
    class Cursor final : public StrategyCursor {
    public:
        explicit Cursor(const SequenceStrategy& seq) : seq_(&seq) {}
        MixedAction act() const override { return seq_->actions_[pos_]; }
        void observe(ActionIndex, SignalIndex) override { pos_ = (pos_ + 1) % seq_->period(); }
        std::unique_ptr<StrategyCursor> clone() const override {
            return std::make_unique<Cursor>(*this);
        }
        std::optional<std::uint64_t> merge_key() const override { return pos_; }

    private:
        const SequenceStrategy* seq_;
        std::size_t pos_ = 0;
    };

    std::vector<MixedAction> actions_;
};

/**
 * Lookup table on histories of length <= depth; histories missing from the
 * table, or longer than depth, get the default mixed action.
 */
class TableStrategy final : public Strategy {
public:
    TableStrategy(std::size_t num_actions, std::size_t num_signals, std::size_t depth,
                  std::map<History, MixedAction> table, MixedAction fallback)
        : num_actions_(num_actions), num_signals_(num_signals), depth_(depth),
          table_(std::move(table)), default_(std::move(fallback)) {
        if (default_.size() != num_actions_)
            throw Error(ErrorCode::InvalidArgument, "table default has the wrong action count");
        for (const auto& [h, act] : table_)
            if (act.size() != num_actions_ || h.length() > depth_)
                throw Error(ErrorCode::InvalidArgument, "table entry outside the declared shape");
    }

    std::size_t num_actions() const override { return num_actions_; }
    std::size_t depth() const noexcept { return depth_; }

    MixedAction act(const History& h) const override {
        if (h.length() > depth_) return default_;
        auto it = table_.find(h);
        return it == table_.end() ? default_ : it->second;
    }

    std::unique_ptr<StrategyCursor> cursor(SignalIndex first) const override {
        return std::make_unique<Cursor>(*this, first);
    }

private:
    class Cursor final : public StrategyCursor {
    public:
        Cursor(const TableStrategy& t, SignalIndex first) : t_(&t), history_(first) {
            deep_ = history_.length() > t_->depth_;
        }
        MixedAction act() const override { return deep_ ? t_->default_ : t_->act(history_); }
        void observe(ActionIndex a, SignalIndex s) override {
            if (deep_) return;
            history_.steps.emplace_back(a, s);
            if (history_.length() > t_->depth_) {
                deep_ = true;
                history_.steps.clear();
            }
        }
        std::unique_ptr<StrategyCursor> clone() const override {
            return std::make_unique<Cursor>(*this);
        }
        std::optional<std::uint64_t> merge_key() const override {
            if (deep_) return UINT64_MAX;
            return history_dense_index(history_, t_->num_actions_, t_->num_signals_);
        }

    private:
        const TableStrategy* t_;
        History history_;
        bool deep_ = false;
    };

    std::size_t num_actions_;
    std::size_t num_signals_;
    std::size_t depth_;
    std::map<History, MixedAction> table_;
    MixedAction default_;
};

/// Exact joint law of (history of a given length, current state).
struct HistoryStateMass {
    History history;
    StateIndex state;
    double prob;
};

struct HistoryDistribution {
    std::vector<HistoryStateMass> entries; ///< sorted by (history, state)

    double total() const {
        double t = 0.0;
        for (const auto& e : entries) t += e.prob;
        return t;
    }

    double mass(const History& h, StateIndex s) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(&h, s),
                                   [](const HistoryStateMass& e, const auto& key) {
                                       if (e.history != *key.first) return e.history < *key.first;
                                       return e.state < key.second;
                                   });
        if (it == entries.end() || it->history != h || it->state != s) return 0.0;
        return it->prob;
    }
};

inline constexpr std::size_t kDefaultEnumerationBudget = 10'000'000;

/**
 * Enumerates the law of (s_1, a_1, ..., s_depth) together with the state at
 * stage `depth`, by applying Strategy::act to every reachable history.
 */
inline HistoryDistribution exact_history_distribution(const PomdpModel& m, const Strategy& sigma,
                                                      std::size_t depth,
                                                      std::size_t budget = kDefaultEnumerationBudget) {
    if (depth < 1) throw Error(ErrorCode::InvalidArgument, "depth must be at least 1");
    const std::size_t ns = m.num_states(), na = m.num_actions(), nz = m.num_signals();
    double worst = double(ns);
    for (std::size_t t = 1; t < depth; ++t) worst *= double(na * nz);
    if (worst > double(budget))
        throw Error(ErrorCode::BudgetExceeded,
                    "depth " + std::to_string(depth) + " needs up to " + format_real(worst) +
                        " entries, budget " + std::to_string(budget));

    std::map<History, std::vector<double>> layer;
    for (StateIndex s = 0; s < ns; ++s) {
        if (m.init(s) <= 0.0) continue;
        auto& v = layer[History(m.signal(s))];
        v.resize(ns, 0.0);
        v[s] += m.init(s);
    }
    for (std::size_t t = 1; t < depth; ++t) {
        std::map<History, std::vector<double>> next;
        for (const auto& [h, masses] : layer) {
            const MixedAction mixed = sigma.act(h);
            for (ActionIndex a = 0; a < na; ++a) {
                if (mixed[a] <= 0.0) continue;
                for (StateIndex s = 0; s < ns; ++s) {
                    if (masses[s] <= 0.0) continue;
                    const double w = masses[s] * mixed[a];
                    for (StateIndex t2 = 0; t2 < ns; ++t2) {
                        const double p = m.transition(s, a, t2);
                        if (p <= 0.0) continue;
                        auto& v = next[h.extended(a, m.signal(t2))];
                        v.resize(ns, 0.0);
                        v[t2] += w * p;
                    }
                }
            }
        }
        layer = std::move(next);
    }

    HistoryDistribution out;
    for (auto& [h, masses] : layer)
        for (StateIndex s = 0; s < ns; ++s)
            if (masses[s] > 0.0) out.entries.push_back({h, s, masses[s]});
    return out;
}

} // namespace stagedur
