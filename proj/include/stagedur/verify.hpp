#pragma once

#include "stagedur/epoch.hpp"
#include "stagedur/errors.hpp"
#include "stagedur/evaluate.hpp"
#include "stagedur/format.hpp"
#include "stagedur/mimic.hpp"
#include "stagedur/model.hpp"
#include "stagedur/parallel.hpp"
#include "stagedur/rng.hpp"
#include "stagedur/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace stagedur {

/// Outcome of one numerical check. `passed` is a function of the stored numbers.
struct CheckReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double tolerance = 0.0;
    /// When set, the check is lhs - rhs <= tolerance instead of |lhs - rhs| <= tolerance.
    bool one_sided = false;
    bool passed = false;
    std::vector<std::pair<std::string, double>> quantities;
    std::vector<std::pair<std::string, std::string>> metadata;

    double difference() const { return one_sided ? lhs - rhs : std::abs(lhs - rhs); }
    bool recompute_pass() const { return difference() <= tolerance; }
    void finish() { passed = recompute_pass(); }

    double quantity(const std::string& key) const {
        for (const auto& [k, v] : quantities)
            if (k == key) return v;
        throw Error(ErrorCode::UnknownName, "report '" + name + "' has no quantity '" + key + "'");
    }
};

inline std::string format_report(const CheckReport& r) {
    std::string out = std::string(r.passed ? "PASS " : "FAIL ") + r.name +
                      " lhs=" + format_real(r.lhs) + " rhs=" + format_real(r.rhs) +
                      (r.one_sided ? " excess=" : " diff=") + format_real(r.difference()) +
                      " tol=" + format_real(r.tolerance);
    for (const auto& [k, v] : r.quantities) out += " " + k + "=" + format_real(v);
    for (const auto& [k, v] : r.metadata) out += " " + k + "=" + v;
    return out;
}

// ---------------------------------------------------------------------------
// Bundled models and strategies

/// The three-state, one-signal example: alternating a, b keeps payoff 1; any slip is absorbed.
inline PomdpModel figure1_model() {
    ModelData d;
    d.states = {"w1", "w2", "w3"};
    d.actions = {"a", "b"};
    d.signals = {"s1"};
    d.signal_map = {0, 0, 0};
    d.payoff = {1, 1, 1, 1, 0, 0};
    d.transition.assign(3 * 2 * 3, 0.0);
    auto set = [&](StateIndex s, ActionIndex a, StateIndex t) { d.transition[(s * 2 + a) * 3 + t] = 1.0; };
    set(0, 0, 1);
    set(0, 1, 2);
    set(1, 1, 0);
    set(1, 0, 2);
    set(2, 0, 2);
    set(2, 1, 2);
    d.init = {1, 0, 0};
    return validate_model(std::move(d));
}

struct RandomModelShape {
    std::size_t states = 3;
    std::size_t actions = 2;
    std::size_t signals = 2;
    /// Optional fixed signal map; drawn at random (onto) when empty.
    std::vector<SignalIndex> signal_map;
    /// Each transition entry is zeroed with this probability (the row keeps one entry).
    double sparsity = 0.0;
};

/// Seeded random model with payoffs in [0,1]; the same seed gives the same model on every platform.
inline PomdpModel random_model(const RandomModelShape& shape, std::uint64_t seed) {
    const std::size_t ns = shape.states, na = shape.actions, nz = shape.signals;
    if (ns < 1 || na < 1 || nz < 1 || nz > ns)
        throw Error(ErrorCode::InvalidArgument, "random model needs 1 <= signals <= states");
    Rng rng = make_stream(seed, 0);
    ModelData d;
    for (std::size_t i = 0; i < ns; ++i) d.states.push_back("w" + std::to_string(i + 1));
    for (std::size_t i = 0; i < na; ++i) d.actions.push_back(std::string(1, char('a' + i % 26)) + (i >= 26 ? std::to_string(i) : ""));
    for (std::size_t i = 0; i < nz; ++i) d.signals.push_back("s" + std::to_string(i + 1));
    if (!shape.signal_map.empty()) {
        d.signal_map = shape.signal_map;
    } else {
        for (std::size_t s = 0; s < ns; ++s)
            d.signal_map.push_back(s < nz ? s : static_cast<SignalIndex>(rng() % nz));
    }
    for (std::size_t i = 0; i < ns * na; ++i) d.payoff.push_back(uniform01(rng));
    auto draw_row = [&](std::size_t n) {
        std::vector<double> row(n);
        double sum = 0.0;
        const std::size_t keep = static_cast<std::size_t>(rng() % n);
        for (std::size_t t = 0; t < n; ++t) {
            const bool zero = t != keep && shape.sparsity > 0.0 && bernoulli(rng, shape.sparsity);
            row[t] = zero ? 0.0 : 0.05 + uniform01(rng);
            sum += row[t];
        }
        for (double& x : row) x /= sum;
        return row;
    };
    for (std::size_t i = 0; i < ns * na; ++i) {
        auto row = draw_row(ns);
        d.transition.insert(d.transition.end(), row.begin(), row.end());
    }
    d.init = draw_row(ns);
    return validate_model(std::move(d));
}

/// Fully observed: one signal per state.
inline PomdpModel random_fully_observed_model(std::size_t states, std::size_t actions,
                                              std::uint64_t seed, double sparsity = 0.0) {
    RandomModelShape shape{states, actions, states, {}, sparsity};
    for (std::size_t s = 0; s < states; ++s) shape.signal_map.push_back(s);
    return random_model(shape, seed);
}

inline PomdpModel bundled_fully_observed_model() { return random_fully_observed_model(3, 2, 11, 0.3); }

inline PomdpModel bundled_random_pomdp() {
    return random_model(RandomModelShape{3, 2, 2, {0, 0, 1}, 0.0}, 7);
}

/// Constant payoff c on a copy of m.
inline PomdpModel with_constant_payoff(const PomdpModel& m, double c) {
    ModelData d = m.data();
    std::fill(d.payoff.begin(), d.payoff.end(), c);
    return validate_model(std::move(d));
}

struct NamedStrategy {
    std::string name;
    std::shared_ptr<const Strategy> strategy;
};

struct BundledCase {
    std::string name;
    PomdpModel model;
    std::vector<NamedStrategy> strategies;
    std::vector<std::pair<std::string, FiniteStateController>> controllers;
};

/// Two-node controller that alternates a and b whatever it observes.
inline FiniteStateController alternating_controller(std::size_t num_signals) {
    std::vector<std::size_t> next;
    for (std::size_t q = 0; q < 2; ++q)
        for (std::size_t r = 0; r < 2 * num_signals; ++r) next.push_back(1 - q);
    return FiniteStateController::deterministic(num_signals, std::vector<std::size_t>(num_signals, 0),
                                                {MixedAction::pure(2, 0), MixedAction::pure(2, 1)},
                                                next);
}

/// Memory = last signal, with a fixed mixed action per signal.
inline FiniteStateController reactive_controller() {
    std::vector<std::size_t> next;
    for (std::size_t q = 0; q < 2; ++q)
        for (ActionIndex a = 0; a < 2; ++a)
            for (SignalIndex s = 0; s < 2; ++s) next.push_back(s);
    return FiniteStateController::deterministic(2, {0, 1},
                                                {MixedAction({0.8, 0.2}), MixedAction({0.3, 0.7})},
                                                next);
}

/// Three memory nodes with randomized updates that depend on the action and signal.
inline FiniteStateController stochastic_memory_controller(std::size_t num_signals) {
    const std::size_t nq = 3, na = 2;
    std::vector<std::vector<double>> init(num_signals, std::vector<double>(nq, 0.0));
    for (std::size_t s = 0; s < num_signals; ++s) {
        init[s][s % nq] = 0.6;
        init[s][(s + 1) % nq] = 0.4;
    }
    std::vector<MixedAction> rule{MixedAction({0.9, 0.1}), MixedAction({0.5, 0.5}),
                                  MixedAction({0.2, 0.8})};
    std::vector<double> update;
    for (std::size_t q = 0; q < nq; ++q)
        for (ActionIndex a = 0; a < na; ++a)
            for (SignalIndex s = 0; s < num_signals; ++s) {
                std::vector<double> row(nq, 0.1);
                row[(q + a + s + 1) % nq] = 0.8;
                update.insert(update.end(), row.begin(), row.end());
            }
    return FiniteStateController(num_signals, std::move(init), std::move(rule), std::move(update));
}

/// A depth-2 table that answers the first signal and reacts to the first action.
inline TableStrategy bundled_table_strategy(std::size_t num_signals) {
    std::map<History, MixedAction> table;
    for (SignalIndex s = 0; s < num_signals; ++s) {
        table.emplace(History(s), MixedAction::pure(2, s % 2));
        for (ActionIndex a = 0; a < 2; ++a)
            for (SignalIndex s2 = 0; s2 < num_signals; ++s2)
                table.emplace(History(s).extended(a, s2), MixedAction::pure(2, 1 - a));
    }
    return TableStrategy(2, num_signals, 2, std::move(table), MixedAction({0.4, 0.6}));
}

/// The sequence (a, b, a, b, ...).
inline SequenceStrategy alternating_sequence() {
    return SequenceStrategy({MixedAction::pure(2, 0), MixedAction::pure(2, 1)});
}

inline std::vector<BundledCase> bundled_cases() {
    std::vector<BundledCase> out;
    auto add = [&](std::string name, PomdpModel m, std::vector<std::pair<std::string, FiniteStateController>> fscs) {
        const std::size_t nz = m.num_signals();
        BundledCase c{std::move(name), std::move(m), {}, std::move(fscs)};
        c.strategies.push_back({"seq_ab", std::make_shared<SequenceStrategy>(alternating_sequence())});
        c.strategies.push_back({"uniform", std::make_shared<SequenceStrategy>(SequenceStrategy::uniform(2))});
        c.strategies.push_back({"table", std::make_shared<TableStrategy>(bundled_table_strategy(nz))});
        for (const auto& [n, f] : c.controllers)
            c.strategies.push_back({n, std::make_shared<FiniteStateController>(f)});
        out.push_back(std::move(c));
    };
    add("figure1", figure1_model(),
        {{"alternating", alternating_controller(1)}, {"stochastic", stochastic_memory_controller(1)}});
    add("random_pomdp", bundled_random_pomdp(),
        {{"reactive", reactive_controller()}, {"stochastic", stochastic_memory_controller(2)}});
    const PomdpModel fo = bundled_fully_observed_model();
    add("fully_observed", fo, {{"stochastic", stochastic_memory_controller(fo.num_signals())}});
    return out;
}

// ---------------------------------------------------------------------------
// First-epoch-boundary lemmas

/// P^h(H^fil_k = eta, w_{T_k} = state, a_{T_k} = a), keyed by (eta, state, a).
struct FilteredJointLaw {
    std::map<std::tuple<History, StateIndex, ActionIndex>, double> mass;
    /// Mass of plays still inside the first k epochs when the enumeration stopped.
    double leftover = 0.0;
    std::size_t stages = 0;
};

/**
 * Stage-by-stage enumeration of G_h: every stage either closes the current
 * epoch (probability h, the state moves by P) or repeats it. Stops after
 * k * n_max stages; whatever has not closed epoch k by then is `leftover`.
 */
inline FilteredJointLaw filtered_joint_law(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                           std::size_t k, std::size_t n_max,
                                           std::size_t budget = kDefaultEnumerationBudget) {
    if (k < 1 || n_max < 1) throw Error(ErrorCode::InvalidArgument, "need k >= 1 and n_max >= 1");
    const double hv = h.value();
    auto memory = sigma.memory();
    using Key = std::tuple<History, MemoryProcess::Node, StateIndex>;
    std::map<Key, double> layer;
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (m.init(s) > 0.0)
            for (auto [q, p] : memory->start(m.signal(s)))
                layer[{History(m.signal(s)), q, s}] += m.init(s) * p;

    FilteredJointLaw out;
    std::size_t work = 0;
    const std::size_t max_stages = k * n_max;
    for (std::size_t t = 0; t < max_stages && !layer.empty(); ++t) {
        std::map<Key, double> next;
        for (const auto& [key, mass] : layer) {
            const auto& [eta, q, s] = key;
            const MixedAction mixed = memory->act(q);
            for (ActionIndex a = 0; a < mixed.size(); ++a) {
                if (mixed[a] <= 0.0) continue;
                const double w = mass * mixed[a];
                if (eta.length() == k) {
                    out.mass[{eta, s, a}] += w * hv;
                } else {
                    for (StateIndex s2 = 0; s2 < m.num_states(); ++s2) {
                        const double p = m.transition(s, a, s2);
                        if (p <= 0.0) continue;
                        const SignalIndex z = m.signal(s2);
                        const History eta2 = eta.extended(a, z);
                        for (auto [q2, pq] : memory->next(q, a, z)) next[{eta2, q2, s2}] += w * hv * p * pq;
                    }
                }
                if (hv < 1.0)
                    for (auto [q2, pq] : memory->next(q, a, m.signal(s)))
                        next[{eta, q2, s}] += w * (1.0 - hv) * pq;
            }
            if (++work > budget)
                throw Error(ErrorCode::BudgetExceeded,
                            "filtered enumeration exceeded budget " + std::to_string(budget));
        }
        layer = std::move(next);
        out.stages = t + 1;
    }
    for (const auto& kv : layer) out.leftover += kv.second;
    return out;
}

/**
 * The marginal-matching identity: the law of (eta_k, w_k, a_k) under sigma-hat
 * in G_1 against the law of (H^fil_k, w_{T_k}, a_{T_k}) under sigma in G_h.
 * Left side: exact history law under sigma-hat times sigma-hat(eta). Right
 * side: filtered_joint_law. The reported discrepancy is the larger of the
 * gap in E[g] and the largest entrywise gap.
 */
inline CheckReport check_marginal_lemma(const PomdpModel& m, std::shared_ptr<const Strategy> sigma,
                                        StageDuration h, std::size_t k, std::size_t n_max,
                                        MimicPath path = MimicPath::Auto,
                                        std::size_t budget = kDefaultEnumerationBudget) {
    const MimicStrategy mimic(m, sigma, h, n_max, path, budget);
    const HistoryDistribution hist = exact_history_distribution(m, mimic, k, budget);
    std::map<std::tuple<History, StateIndex, ActionIndex>, double> left;
    for (const auto& e : hist.entries) {
        const MixedAction act = mimic.act(e.history);
        for (ActionIndex a = 0; a < act.size(); ++a)
            if (act[a] > 0.0) left[{e.history, e.state, a}] += e.prob * act[a];
    }
    const FilteredJointLaw right = filtered_joint_law(m, *sigma, h, k, n_max, budget);

    double max_entry = 0.0, g_left = 0.0, g_right = 0.0;
    for (const auto& [key, p] : left) {
        g_left += p * m.payoff(std::get<1>(key), std::get<2>(key));
        auto it = right.mass.find(key);
        max_entry = std::max(max_entry, std::abs(p - (it == right.mass.end() ? 0.0 : it->second)));
    }
    for (const auto& [key, p] : right.mass) {
        g_right += p * m.payoff(std::get<1>(key), std::get<2>(key));
        if (!left.count(key)) max_entry = std::max(max_entry, p);
    }
    const double left_bound =
        mimic.exact() || h.value() >= 1.0 ? 0.0 : truncation_bound(h, k, n_max);
    const double scale = std::max(1.0, m.payoff_bound());

    CheckReport r;
    r.name = "marginal_lemma";
    r.lhs = std::max(std::abs(g_left - g_right), max_entry);
    r.rhs = 0.0;
    r.one_sided = true;
    r.tolerance = (left_bound + right.leftover) * scale + 1e-9;
    r.quantities = {{"payoff_left", g_left},
                    {"payoff_right", g_right},
                    {"max_joint_diff", max_entry},
                    {"left_truncation_bound", left_bound},
                    {"right_leftover", right.leftover},
                    {"k", double(k)},
                    {"h", h.value()},
                    {"n_max", double(n_max)}};
    r.metadata = {{"path", mimic.exact() ? "closed_form" : "truncated"}};
    r.finish();
    return r;
}

/**
 * Epoch sums against boundary payoffs: E[sum over epoch k of g] against
 * (1/h) E[g(w_{T_k}, a_{T_k})], each from its own random streams. At h = 1
 * the two are the same functional of the same stage, and share streams.
 */
inline CheckReport check_epoch_sum_lemma(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                         std::size_t k, std::size_t n_traj, std::uint64_t seed) {
    if (k < 1 || n_traj < 2) throw Error(ErrorCode::InvalidArgument, "need k >= 1 and n_traj >= 2");
    const double hv = h.value();
    const std::uint64_t seed_b = hv >= 1.0 ? seed : split_seed(seed, 0x5eedb);
    std::vector<double> a_samples(n_traj), b_samples(n_traj);
    parallel_for(n_traj, [&](std::size_t i) {
        {
            Rng rng = make_stream(seed, i);
            GhStepper play(m, sigma, h, rng);
            double sum = 0.0;
            for (std::size_t closed = 0; closed < k;) {
                const auto st = play.step();
                if (closed + 1 == k) sum += m.payoff(st.state, st.action);
                if (st.moved) ++closed;
            }
            a_samples[i] = sum;
        }
        {
            Rng rng = make_stream(seed_b, i);
            GhStepper play(m, sigma, h, rng);
            for (std::size_t closed = 0;;) {
                const auto st = play.step();
                if (st.moved && ++closed == k) {
                    b_samples[i] = m.payoff(st.state, st.action) / hv;
                    break;
                }
            }
        }
    });
    auto mean_se = [](const std::vector<double>& x) {
        const double n = double(x.size());
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        return std::pair{mean, std::sqrt(var / (n - 1.0) / n)};
    };
    const auto [ma, sa] = mean_se(a_samples);
    const auto [mb, sb] = mean_se(b_samples);
    CheckReport r;
    r.name = "epoch_sum_lemma";
    r.lhs = ma;
    r.rhs = mb;
    r.tolerance = 3.0 * std::sqrt(sa * sa + sb * sb) + 1e-9;
    r.quantities = {{"se_lhs", sa}, {"se_rhs", sb}, {"k", double(k)}, {"h", hv}, {"n_traj", double(n_traj)}};
    r.metadata = {{"seed", std::to_string(seed)}};
    r.finish();
    return r;
}

/**
 * Cesaro means at the deterministic time t_K = floor(K/h) against the
 * epoch-time means (h/K) sum_{j <= T_K} g, paired on each trajectory.
 */
inline CheckReport check_cesaro_alignment(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                          std::size_t K, std::size_t n_traj, std::uint64_t seed) {
    if (K < 10) throw Error(ErrorCode::InvalidArgument, "alignment check needs K >= 10");
    if (n_traj < 2) throw Error(ErrorCode::InvalidArgument, "need n_traj >= 2");
    const double hv = h.value();
    const auto t_K = static_cast<std::size_t>(std::floor(double(K) / hv));
    std::vector<double> x(n_traj), y(n_traj);
    parallel_for(n_traj, [&](std::size_t i) {
        Rng rng = make_stream(seed, i);
        GhStepper play(m, sigma, h, rng);
        double sum = 0.0;
        std::size_t closed = 0;
        bool have_x = false, have_y = false;
        for (std::size_t j = 1; !(have_x && have_y); ++j) {
            const auto st = play.step();
            sum += m.payoff(st.state, st.action);
            if (j == t_K) {
                x[i] = sum / double(t_K);
                have_x = true;
            }
            if (st.moved && ++closed == K) {
                y[i] = hv / double(K) * sum;
                have_y = true;
            }
        }
    });
    double mx = 0.0, my = 0.0, md = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) {
        mx += x[i];
        my += y[i];
        md += x[i] - y[i];
    }
    const double n = double(n_traj);
    mx /= n;
    my /= n;
    md /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) var += (x[i] - y[i] - md) * (x[i] - y[i] - md);
    const double se = std::sqrt(var / (n - 1.0) / n);
    const double M = m.payoff_bound();
    const double rate = M * (std::sqrt((1.0 - hv) / double(K)) + hv / double(K));

    CheckReport r;
    r.name = "cesaro_alignment";
    r.lhs = mx;
    r.rhs = my;
    r.tolerance = rate + 3.0 * se + 1e-12;
    r.quantities = {{"rate_bound", rate}, {"se", se}, {"t_K", double(t_K)}, {"K", double(K)}, {"h", hv}};
    r.metadata = {{"seed", std::to_string(seed)}};
    r.finish();
    return r;
}

// ---------------------------------------------------------------------------
// Sequences

struct SubsequenceOptions {
    double window_fraction = 0.2;
    /// Negative means M * (largest |x_{n+1} - x_n| over the trailing window).
    double tolerance = -1.0;
};

/**
 * Trailing-minimum proxies of x_1..x_N and of the subsequence x_{n_1}, x_{n_2},
 * ... (indices 1-based), both taken over the index window (N - w, N] with
 * w = ceil(window_fraction * N). Indices must increase with gaps at most M,
 * starting at most M, and reach within M of N. Every window point is then
 * within M - 1 steps of a kept index, so the two proxies differ by at most
 * M times the largest step inside the window.
 */
inline CheckReport check_liminf_subsequence(const std::function<double(std::size_t)>& x,
                                            std::size_t n_terms,
                                            const std::vector<std::size_t>& indices, std::size_t M,
                                            const SubsequenceOptions& opt = {}) {
    if (n_terms < 2 || indices.empty() || M < 1)
        throw Error(ErrorCode::InvalidArgument, "need n_terms >= 2, indices and M >= 1");
    if (!(opt.window_fraction > 0.0 && opt.window_fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "window fraction must lie in (0,1]");
    std::size_t prev = 0;
    for (std::size_t n : indices) {
        if (n <= prev || n - prev > M)
            throw Error(ErrorCode::GapBoundViolated,
                        "index " + std::to_string(n) + " after " + std::to_string(prev) +
                            " breaks the gap bound " + std::to_string(M));
        prev = n;
    }
    std::size_t last = 0;
    for (std::size_t n : indices)
        if (n <= n_terms) last = n;
    if (n_terms - last >= M)
        throw Error(ErrorCode::GapBoundViolated,
                    "last index " + std::to_string(last) + " is M or more before " + std::to_string(n_terms));

    const std::size_t w = std::min(n_terms, std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(opt.window_fraction * double(n_terms)))));
    if (w < M)
        throw Error(ErrorCode::InvalidArgument, "trailing window of " + std::to_string(w) +
                                                    " terms is narrower than the gap bound");
    const std::size_t start = n_terms - w + 1;
    std::vector<double> window(w);
    for (std::size_t n = start; n <= n_terms; ++n) window[n - start] = x(n);
    double full_min = window.front(), sub_min = std::numeric_limits<double>::infinity();
    double max_step = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < w; ++i) {
        full_min = std::min(full_min, window[i]);
        if (i + 1 < w) max_step = std::max(max_step, std::abs(window[i + 1] - window[i]));
    }
    for (std::size_t n : indices)
        if (n >= start && n <= n_terms) {
            sub_min = std::min(sub_min, window[n - start]);
            ++kept;
        }

    CheckReport r;
    r.name = "liminf_subsequence";
    r.lhs = full_min;
    r.rhs = sub_min;
    r.tolerance = opt.tolerance >= 0.0 ? opt.tolerance : double(M) * max_step;
    r.quantities = {{"max_step", max_step}, {"M", double(M)}, {"n_terms", double(n_terms)},
                    {"window", double(w)}, {"subsequence_terms", double(kept)}};
    r.finish();
    return r;
}

// ---------------------------------------------------------------------------
// Long-run payoffs

inline constexpr double kTheoremTolerance = 1e-6;

/// R(sigma, h) against R(sigma-hat, 1), both exact on product chains.
inline CheckReport check_theorem_main(const PomdpModel& m, const FiniteStateController& sigma,
                                      StageDuration h) {
    const FiniteStateController mimic = mimic_controller(sigma, h);
    CheckReport r;
    r.name = "theorem_main";
    r.lhs = longrun_average_exact_fsc(m, sigma, h).value;
    r.rhs = longrun_average_exact_fsc(m, mimic, StageDuration(1.0)).value;
    r.tolerance = kTheoremTolerance;
    r.quantities = {{"h", h.value()}};
    r.metadata = {{"path", "exact"}};
    r.finish();
    return r;
}

/**
 * Same comparison for a source without a controller form: sigma-hat on the
 * truncated path, both averages by Monte Carlo at the given horizon.
 */
inline CheckReport check_theorem_mc(const PomdpModel& m, std::shared_ptr<const Strategy> sigma,
                                    StageDuration h, std::size_t horizon, std::size_t n_traj,
                                    std::uint64_t seed) {
    const MimicStrategy mimic(m, sigma, h, default_truncation(h), MimicPath::Truncated);
    const PayoffEstimate lhs = longrun_average_mc(m, *sigma, h, horizon, n_traj, seed);
    const std::size_t mimic_horizon =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(double(horizon) * h.value())));
    const PayoffEstimate rhs =
        longrun_average_mc(m, mimic, StageDuration(1.0), mimic_horizon, n_traj, split_seed(seed, 1));
    CheckReport r;
    r.name = "theorem_main";
    r.lhs = lhs.value;
    r.rhs = rhs.value;
    r.tolerance = 3.0 * std::hypot(lhs.std_error, rhs.std_error) + 1e-9;
    r.quantities = {{"h", h.value()}, {"se_lhs", lhs.std_error}, {"se_rhs", rhs.std_error},
                    {"horizon", double(horizon)}, {"mimic_horizon", double(mimic_horizon)}};
    r.metadata = {{"path", "monte_carlo"}, {"seed", std::to_string(seed)}};
    r.finish();
    return r;
}

/**
 * R(sigma, h1) against R(sigma-hat, h2), where sigma-hat mimics sigma across
 * the relative stage duration h1/h2 on the model rebased at h2.
 */
inline CheckReport check_corollary_rescale(const PomdpModel& m, const FiniteStateController& sigma,
                                           StageDuration h1, StageDuration h2) {
    const PomdpModel m_h1 = stage_duration_transform(m, h1);
    const RebasedModel rebased = rescale_stage_duration(m_h1, h1, h2);
    const FiniteStateController mimic = mimic_controller(sigma, rebased.relative);
    CheckReport r;
    r.name = "corollary_rescale";
    r.lhs = longrun_average_exact_fsc(m, sigma, h1).value;
    r.rhs = longrun_average_exact_fsc(rebased.base, mimic, StageDuration(1.0)).value;
    r.tolerance = kTheoremTolerance;
    r.quantities = {{"h1", h1.value()},
                    {"h2", h2.value()},
                    {"direct_rhs", longrun_average_exact_fsc(m, mimic, h2).value}};
    r.finish();
    return r;
}

struct MonotonicityResult {
    CheckReport report;
    std::vector<PayoffEstimate> values;
};

/**
 * Asymptotic value estimates along an increasing h grid. The check is
 * one-sided: the largest drop V(h_i) - V(h_{i+1}) against the sum of all
 * reported diagnostics plus 1e-3. `spread` is max V - min V.
 */
inline MonotonicityResult check_monotonicity(const PomdpModel& m, const std::vector<double>& h_grid,
                                             const std::vector<double>& lambda_grid,
                                             std::size_t grid_resolution,
                                             const ValueIterationOptions& opt = {}) {
    if (h_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty h grid");
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (!(h_grid[i] > h_grid[i - 1]))
            throw Error(ErrorCode::InvalidArgument, "h grid must be increasing");
    MonotonicityResult out;
    out.values.resize(h_grid.size());
    parallel_for(h_grid.size(), [&](std::size_t i) {
        out.values[i] =
            asymptotic_value_estimate(m, StageDuration(h_grid[i]), lambda_grid, grid_resolution, opt);
    });
    double slack = 1e-3, drop = -std::numeric_limits<double>::infinity();
    double lo = out.values.front().value, hi = lo;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        slack += out.values[i].bound;
        lo = std::min(lo, out.values[i].value);
        hi = std::max(hi, out.values[i].value);
        if (i > 0) drop = std::max(drop, out.values[i - 1].value - out.values[i].value);
    }
    CheckReport& r = out.report;
    r.name = "monotonicity";
    r.lhs = h_grid.size() > 1 ? drop : 0.0;
    r.rhs = 0.0;
    r.one_sided = true;
    r.tolerance = slack;
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        r.quantities.push_back({"V(" + format_real(h_grid[i]) + ")", out.values[i].value});
        r.quantities.push_back({"trend(" + format_real(h_grid[i]) + ")", out.values[i].trend});
    }
    r.quantities.push_back({"spread", hi - lo});
    r.quantities.push_back({"slack", slack});
    r.metadata = {{"grid_resolution", std::to_string(grid_resolution)}};
    r.finish();
    return out;
}

/// V_lambda(h) against V_{lambda / (1 + lambda - lambda h)}(1) by tabular value iteration.
inline CheckReport check_fully_observed_identity(const PomdpModel& m, double lambda, StageDuration h,
                                                 const ValueIterationOptions& opt = {}) {
    if (!is_fully_observed(m))
        throw Error(ErrorCode::NotFullyObserved, "the signal map is not injective");
    const double lambda1 = lambda / (1.0 + lambda - lambda * h.value());
    const PayoffEstimate lhs = discounted_value_estimate(m, lambda, h, 2, opt);
    const PayoffEstimate rhs = discounted_value_estimate(m, lambda1, StageDuration(1.0), 2, opt);
    CheckReport r;
    r.name = "fully_observed_identity";
    r.lhs = lhs.value;
    r.rhs = rhs.value;
    r.tolerance = 2.0 * opt.tolerance;
    r.quantities = {{"lambda", lambda}, {"h", h.value()}, {"lambda_at_1", lambda1},
                    {"bound_lhs", lhs.bound}, {"bound_rhs", rhs.bound}};
    r.finish();
    return r;
}

// ---------------------------------------------------------------------------
// Suites

enum class Suite { All, Theorem, Lemmas, Example, FullyObserved };

inline Suite parse_suite(const std::string& name) {
    if (name == "all") return Suite::All;
    if (name == "theorem") return Suite::Theorem;
    if (name == "lemmas") return Suite::Lemmas;
    if (name == "example") return Suite::Example;
    if (name == "fully-observed") return Suite::FullyObserved;
    throw Error(ErrorCode::UnknownName, "unknown suite '" + name + "'");
}

struct SuiteOptions {
    std::uint64_t seed = 20240611;
    std::size_t n_traj = 10'000;
    std::size_t grid_resolution = 24;
};

namespace detail {

inline CheckReport tagged(CheckReport r, const std::string& tag) {
    r.name += "/" + tag;
    return r;
}

inline std::vector<CheckReport> run_theorem_suite() {
    std::vector<CheckReport> out;
    for (const auto& c : bundled_cases())
        for (const auto& [name, fsc] : c.controllers)
            for (double h : {0.25, 0.5}) {
                out.push_back(tagged(check_theorem_main(c.model, fsc, StageDuration(h)),
                                     c.name + "/" + name + "/h=" + format_real(h)));
                out.push_back(tagged(check_corollary_rescale(c.model, fsc, StageDuration(h / 2), StageDuration(h)),
                                     c.name + "/" + name + "/h2=" + format_real(h)));
            }
    return out;
}

inline std::vector<CheckReport> run_lemma_suite(const SuiteOptions& opt) {
    std::vector<CheckReport> out;
    std::uint64_t job = 0;
    for (const auto& c : bundled_cases())
        for (const auto& s : c.strategies)
            for (double h : {0.3, 0.5, 0.7})
                for (std::size_t k = 1; k <= 3; ++k) {
                    const StageDuration hd(h);
                    const std::string tag = c.name + "/" + s.name + "/h=" + format_real(h) +
                                            "/k=" + std::to_string(k);
                    out.push_back(tagged(
                        check_marginal_lemma(c.model, s.strategy, hd, k, default_truncation(hd)), tag));
                    out.push_back(tagged(check_epoch_sum_lemma(c.model, *s.strategy, hd, k, opt.n_traj,
                                                               split_seed(opt.seed, job++)),
                                         tag));
                }
    const PomdpModel fig1 = figure1_model();
    const SequenceStrategy ab = alternating_sequence();
    out.push_back(tagged(check_cesaro_alignment(fig1, ab, StageDuration(0.5), 400, opt.n_traj,
                                                split_seed(opt.seed, job++)),
                         "figure1/seq_ab/h=0.5/K=400"));
    std::vector<std::size_t> even;
    for (std::size_t n = 2; n <= 100'000; n += 2) even.push_back(n);
    out.push_back(tagged(check_liminf_subsequence([](std::size_t n) { return std::sin(std::sqrt(double(n))); },
                                                  100'000, even, 2),
                         "sin_sqrt/M=2"));
    return out;
}

inline std::vector<CheckReport> run_example_suite(const SuiteOptions& opt) {
    std::vector<CheckReport> out;
    const PomdpModel fig1 = figure1_model();
    const FiniteStateController alt = alternating_controller(1);
    for (double h : {1.0, 0.5}) {
        CheckReport r;
        r.name = "figure1_average/h=" + format_real(h);
        r.lhs = longrun_average_exact_fsc(fig1, alt, StageDuration(h)).value;
        r.rhs = h >= 1.0 ? 1.0 : 0.0;
        r.tolerance = 1e-9;
        r.metadata = {{"strategy", "alternating"}};
        r.finish();
        out.push_back(r);
    }
    auto mono = check_monotonicity(fig1, {0.25, 0.5, 0.75, 1.0}, default_lambda_grid(),
                                   opt.grid_resolution);
    out.push_back(tagged(mono.report, "figure1"));
    return out;
}

inline std::vector<CheckReport> run_fully_observed_suite(const SuiteOptions& opt) {
    std::vector<CheckReport> out;
    const PomdpModel fo = bundled_fully_observed_model();
    for (double lambda : {0.1, 0.01})
        for (double h : {0.3, 0.7})
            out.push_back(tagged(check_fully_observed_identity(fo, lambda, StageDuration(h)),
                                 "lambda=" + format_real(lambda) + "/h=" + format_real(h)));
    auto mono = check_monotonicity(fo, {0.25, 0.5, 0.75, 1.0}, default_lambda_grid(),
                                   opt.grid_resolution);
    out.push_back(tagged(mono.report, "fully_observed"));
    CheckReport flat;
    flat.name = "constant_value/fully_observed";
    flat.lhs = mono.report.quantity("spread");
    flat.rhs = 0.0;
    flat.one_sided = true;
    flat.tolerance = mono.report.quantity("slack");
    flat.finish();
    out.push_back(flat);
    return out;
}

} // namespace detail

/// Runs a suite on the bundled models; reports come back sorted by name.
inline std::vector<CheckReport> run_suite(Suite suite, const SuiteOptions& opt = {}) {
    std::vector<CheckReport> out;
    auto take = [&](std::vector<CheckReport> part) {
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    };
    if (suite == Suite::All || suite == Suite::Theorem) take(detail::run_theorem_suite());
    if (suite == Suite::All || suite == Suite::Lemmas) take(detail::run_lemma_suite(opt));
    if (suite == Suite::All || suite == Suite::Example) take(detail::run_example_suite(opt));
    if (suite == Suite::All || suite == Suite::FullyObserved) take(detail::run_fully_observed_suite(opt));
    std::stable_sort(out.begin(), out.end(),
                     [](const CheckReport& a, const CheckReport& b) { return a.name < b.name; });
    return out;
}

} // namespace stagedur
