#include "support.hpp"

#include <cmath>

using namespace stagedur;

namespace {

Eigen::MatrixXd series_oracle(const Eigen::MatrixXd& M, double h, int terms) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(M.rows(), M.cols());
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(M.rows(), M.cols());
    double w = h;
    for (int m = 1; m <= terms; ++m) {
        sum += w * power;
        power = power * M;
        w *= 1.0 - h;
    }
    return sum;
}

Eigen::MatrixXd random_stochastic(std::size_t n, Rng& rng) {
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += M(i, j) = uniform01(rng);
        M.row(i) /= s;
    }
    return M;
}

} // namespace

TEST(Epochs, DegenerateAtOne) {
    const EpochSample e = sample_epochs(StageDuration(1.0), 50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(e.lengths[i], 1u);
        EXPECT_EQ(e.boundaries[i + 1], i + 1);
    }
}

TEST(Epochs, BoundariesArePrefixSums) {
    const EpochSample e = sample_epochs(StageDuration(0.3), 1000, 8);
    EXPECT_EQ(e.boundaries.front(), 0u);
    for (std::size_t i = 0; i < e.lengths.size(); ++i) {
        EXPECT_GE(e.lengths[i], 1u);
        EXPECT_EQ(e.boundaries[i + 1] - e.boundaries[i], e.lengths[i]);
    }
}

TEST(Epochs, MeanAndVarianceAtHalf) {
    const std::size_t n = 100'000;
    const EpochSample e = sample_epochs(StageDuration(0.5), n, 11);
    double mean = 0.0, m2 = 0.0;
    for (auto x : e.lengths) mean += double(x);
    mean /= double(n);
    for (auto x : e.lengths) m2 += (double(x) - mean) * (double(x) - mean);
    const double var = m2 / double(n - 1);
    EXPECT_NEAR(mean, 2.0, 3.0 * std::sqrt(2.0 / double(n)));
    // Var of the sample variance: (mu4 - sigma^4) / n, mu4 = sigma^4 (9 + h^2 / (1-h)) = 38 at h = 1/2.
    EXPECT_NEAR(var, 2.0, 3.0 * std::sqrt((38.0 - 4.0) / double(n)));
}

TEST(Epochs, BoundaryMoments) {
    // T_k over 20000 replicas of 5 epochs at h = 0.4: mean k/h, variance k(1-h)/h^2.
    const double h = 0.4;
    const std::size_t reps = 20'000, k = 5;
    double mean = 0.0, m2 = 0.0;
    std::vector<double> t(reps);
    for (std::size_t r = 0; r < reps; ++r) t[r] = double(sample_epochs(StageDuration(h), k, split_seed(4, r)).boundaries[k]);
    for (double x : t) mean += x;
    mean /= double(reps);
    for (double x : t) m2 += (x - mean) * (x - mean);
    const double var = m2 / double(reps - 1);
    const double true_var = double(k) * (1 - h) / (h * h);
    EXPECT_NEAR(mean, double(k) / h, 3.0 * std::sqrt(true_var / double(reps)));
    EXPECT_NEAR(var, true_var, 0.05 * true_var);
}

TEST(Epochs, GeometricTail) {
    EXPECT_EQ(geometric_tail(StageDuration(0.3), 1), 1.0);
    EXPECT_DOUBLE_EQ(geometric_tail(StageDuration(0.5), 3), 0.25);
    EXPECT_EQ(geometric_tail(StageDuration(1.0), 2), 0.0);
    EXPECT_THROW(geometric_tail(StageDuration(0.5), 0), Error);
}

TEST(Simulation, FreezeContractAndSignals) {
    const PomdpModel m = figure1_model();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const ExtendedTrajectory tr = simulate_gh(m, alternating_sequence(), StageDuration(0.5), 200, seed);
        ASSERT_EQ(tr.length(), 200u);
        for (std::size_t j = 0; j + 1 < tr.length(); ++j) {
            if (!tr.marks[j]) {
                EXPECT_EQ(tr.states[j + 1], tr.states[j]);
            }
            EXPECT_EQ(tr.signals[j], m.signal(tr.states[j]));
        }
    }
}

TEST(Simulation, AllMarksAtOne) {
    const ExtendedTrajectory tr =
        simulate_gh(bundled_random_pomdp(), reactive_controller(), StageDuration(1.0), 500, 1);
    for (auto x : tr.marks) EXPECT_EQ(x, 1);
}

TEST(Simulation, MarkFrequency) {
    const std::size_t T = 200'000;
    const ExtendedTrajectory tr =
        simulate_gh(bundled_random_pomdp(), reactive_controller(), StageDuration(0.35), T, 21);
    double f = 0.0;
    for (auto x : tr.marks) f += x;
    f /= double(T);
    EXPECT_NEAR(f, 0.35, 3.0 * std::sqrt(0.35 * 0.65 / double(T)));
}

TEST(Simulation, ReproducibleBySeed) {
    const auto a = simulate_gh(figure1_model(), SequenceStrategy::uniform(2), StageDuration(0.5), 100, 77);
    const auto b = simulate_gh(figure1_model(), SequenceStrategy::uniform(2), StageDuration(0.5), 100, 77);
    EXPECT_EQ(a.actions, b.actions);
    EXPECT_EQ(a.marks, b.marks);
    EXPECT_EQ(a.states, b.states);
}

TEST(EpochOperator, FixedPoints) {
    Rng rng(2);
    const Eigen::MatrixXd M = random_stochastic(4, rng);
    EXPECT_TRUE(epoch_memory_operator(Eigen::MatrixXd::Identity(3, 3), StageDuration(0.3))
                    .isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));
    EXPECT_LT((epoch_memory_operator(M, StageDuration(1.0)) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(),
              1e-15);
}

TEST(EpochOperator, SwapMatrixSeries) {
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    const Eigen::MatrixXd E = epoch_memory_operator(swap, StageDuration(0.5));
    EXPECT_LT((E - series_oracle(swap, 0.5, 60)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(E(0, 0), 2.0 / 3.0, 1e-15);
}

TEST(EpochOperator, RandomMatricesAgainstSeries) {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd M = random_stochastic(5, rng);
        for (double h : {0.3, 0.7}) {
            const Eigen::MatrixXd E = epoch_memory_operator(M, StageDuration(h));
            const int terms = 40;
            // The truncated series misses at most (1-h)^terms in every row.
            EXPECT_LT((E - series_oracle(M, h, terms)).cwiseAbs().maxCoeff(),
                      std::pow(1.0 - h, terms) + 1e-12);
            for (Eigen::Index i = 0; i < E.rows(); ++i) EXPECT_NEAR(E.row(i).sum(), 1.0, 1e-10);
        }
    }
}
