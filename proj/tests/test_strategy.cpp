#include "support.hpp"

#include <cmath>
#include <set>

using namespace stagedur;
using stagedur::testing::error_of;

namespace {

History hist(SignalIndex first, std::vector<std::pair<ActionIndex, SignalIndex>> steps) {
    History h(first);
    h.steps = std::move(steps);
    return h;
}

void expect_same(const MixedAction& x, const MixedAction& y, double tol = 1e-12) {
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t a = 0; a < x.size(); ++a) EXPECT_NEAR(x[a], y[a], tol);
}

} // namespace

TEST(HistoryShape, LengthAndPrefix) {
    const History h = hist(0, {{1, 0}, {0, 1}});
    EXPECT_EQ(h.length(), 3u);
    EXPECT_EQ(h.last_signal(), 1u);
    EXPECT_EQ(h.prefix(2), hist(0, {{1, 0}}));
    EXPECT_EQ(h.prefix(1).length(), 1u);
}

TEST(HistoryShape, CodecRoundTripAndDenseIndexIsInjective) {
    const HistoryCodec codec(2, 3);
    std::set<std::uint64_t> seen;
    std::vector<History> layer{History(0), History(1), History(2)};
    for (std::size_t len = 1; len <= 4; ++len) {
        std::vector<History> next;
        for (const auto& h : layer) {
            EXPECT_EQ(codec.decode(codec.encode(h)), h);
            EXPECT_TRUE(seen.insert(history_dense_index(h, 2, 3)).second);
            for (ActionIndex a = 0; a < 2; ++a)
                for (SignalIndex s = 0; s < 3; ++s) next.push_back(h.extended(a, s));
        }
        layer = std::move(next);
    }
}

TEST(Sequence, AlternatingAtLengthThreeIsA) {
    const SequenceStrategy ab = alternating_sequence();
    expect_same(ab.act(hist(0, {{0, 0}, {1, 0}})), MixedAction::pure(2, 0));
    expect_same(ab.act(hist(0, {{0, 0}})), MixedAction::pure(2, 1));
}

TEST(Controller, SingleNodeUniform) {
    const auto fsc = FiniteStateController::deterministic(2, {0, 0}, {MixedAction::uniform(3)},
                                                         std::vector<std::size_t>(3 * 2, 0));
    for (const auto& h : {hist(0, {}), hist(1, {{2, 0}, {1, 1}})})
        expect_same(fsc.act(h), MixedAction::uniform(3));
}

TEST(Controller, RejectsBadRows) {
    std::vector<double> update(2 * 2 * 1 * 2, 0.5);
    update[0] = 0.6;
    EXPECT_EQ(error_of([&] {
                  FiniteStateController(1, {{1.0, 0.0}}, {MixedAction::pure(2, 0), MixedAction::pure(2, 1)},
                                        update);
              }),
              ErrorCode::RowNotStochastic);
}

TEST(Controller, SequenceControllerMatchesSequence) {
    const SequenceStrategy seq({MixedAction({0.2, 0.8}), MixedAction::pure(2, 0), MixedAction::pure(2, 1)});
    const FiniteStateController fsc = seq.controller_for(2);
    History h(1);
    for (int t = 0; t < 7; ++t) {
        expect_same(fsc.act(h), seq.act(h));
        h = h.extended(t % 2, (t / 2) % 2);
    }
}

TEST(Controller, BeliefFilteringUsesActions) {
    // Memory is a hidden coin; node 0 plays a, node 1 plays b; memory never moves.
    const FiniteStateController fsc(1, {{0.5, 0.5}}, {MixedAction::pure(2, 0), MixedAction::pure(2, 1)},
                                    {1, 0, 1, 0, 0, 1, 0, 1});
    expect_same(fsc.act(History(0)), MixedAction({0.5, 0.5}));
    // Having seen a, the memory must be node 0.
    expect_same(fsc.act(hist(0, {{0, 0}})), MixedAction::pure(2, 0));
    expect_same(fsc.act(hist(0, {{1, 0}, {1, 0}})), MixedAction::pure(2, 1));
}

TEST(Table, FallsBackBeyondDepth) {
    const TableStrategy t = bundled_table_strategy(2);
    expect_same(t.act(History(1)), MixedAction::pure(2, 1));
    expect_same(t.act(hist(0, {{0, 1}})), MixedAction::pure(2, 1));
    expect_same(t.act(hist(0, {{0, 1}, {0, 0}})), MixedAction({0.4, 0.6}));
}

TEST(Cursors, AgreeWithAct) {
    const PomdpModel m = bundled_random_pomdp();
    for (const auto& c : bundled_cases()) {
        if (c.name != "random_pomdp") continue;
        for (const auto& s : c.strategies) {
            Rng rng(5);
            for (int rep = 0; rep < 20; ++rep) {
                History h(rng() % 2);
                auto cur = s.strategy->cursor(h.first_signal);
                for (int t = 0; t < 6; ++t) {
                    expect_same(cur->act(), s.strategy->act(h), 1e-12);
                    const ActionIndex a = rng() % 2;
                    const SignalIndex z = rng() % 2;
                    cur->observe(a, z);
                    h = h.extended(a, z);
                }
            }
        }
    }
}

TEST(HistoryLaw, DepthOneIsInitialDraw) {
    const PomdpModel m = bundled_random_pomdp();
    const HistoryDistribution d = exact_history_distribution(m, alternating_sequence(), 1);
    for (StateIndex s = 0; s < m.num_states(); ++s)
        EXPECT_DOUBLE_EQ(d.mass(History(m.signal(s)), s), m.init(s));
}

TEST(HistoryLaw, Figure1DepthTwo) {
    const HistoryDistribution d =
        exact_history_distribution(figure1_model(), SequenceStrategy({MixedAction::pure(2, 0)}), 2);
    ASSERT_EQ(d.entries.size(), 1u);
    EXPECT_EQ(d.entries[0].history, hist(0, {{0, 0}}));
    EXPECT_EQ(d.entries[0].state, 1u);
    EXPECT_EQ(d.entries[0].prob, 1.0);
}

TEST(HistoryLaw, NormalizedAndMarginallyConsistent) {
    for (const auto& c : bundled_cases())
        for (const auto& s : c.strategies) {
            const HistoryDistribution d2 = exact_history_distribution(c.model, *s.strategy, 2);
            const HistoryDistribution d3 = exact_history_distribution(c.model, *s.strategy, 3);
            EXPECT_NEAR(d3.total(), 1.0, 1e-10);
            std::map<History, double> folded;
            for (const auto& e : d3.entries) folded[e.history.prefix(2)] += e.prob;
            std::map<History, double> direct;
            for (const auto& e : d2.entries) direct[e.history] += e.prob;
            ASSERT_EQ(folded.size(), direct.size()) << c.name << "/" << s.name;
            for (const auto& [h, p] : direct) EXPECT_NEAR(folded[h], p, 1e-10);
        }
}

TEST(HistoryLaw, MatchesSimulationFrequencies) {
    const PomdpModel m = bundled_random_pomdp();
    const FiniteStateController fsc = reactive_controller();
    const HistoryDistribution exact = exact_history_distribution(m, fsc, 3);
    const std::size_t n = 40'000;
    std::map<History, double> counts;
    for (std::size_t i = 0; i < n; ++i) {
        const ExtendedTrajectory tr = simulate_gh(m, fsc, StageDuration(1.0), 3, split_seed(17, i));
        History h(tr.signals[0]);
        for (int j = 0; j < 2; ++j) h = h.extended(tr.actions[j], tr.signals[j + 1]);
        counts[h] += 1.0;
    }
    std::map<History, double> p;
    for (const auto& e : exact.entries) p[e.history] += e.prob;
    for (const auto& [h, q] : p) {
        const double se = std::sqrt(q * (1 - q) / double(n));
        EXPECT_NEAR(counts[h] / double(n), q, 3.0 * se + 1e-12);
    }
}

TEST(HistoryLaw, BudgetIsEnforced) {
    EXPECT_EQ(error_of([] { exact_history_distribution(bundled_random_pomdp(), alternating_sequence(), 12, 1000); }),
              ErrorCode::BudgetExceeded);
}
