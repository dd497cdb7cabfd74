#pragma once

#include "stagedur/epoch.hpp"
#include "stagedur/errors.hpp"
#include "stagedur/markov_chain.hpp"
#include "stagedur/model.hpp"
#include "stagedur/parallel.hpp"
#include "stagedur/rng.hpp"
#include "stagedur/strategy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace stagedur {

enum class EstimateMode {
    Exact,       ///< closed form or linear solve
    Truncated,   ///< exact up to a horizon, `bound` covers the tail
    MonteCarlo,  ///< sample mean with `std_error`
    Approximate, ///< discretized; `bound` is a diagnostic, not a guarantee
};

inline const char* mode_name(EstimateMode mode) {
    switch (mode) {
    case EstimateMode::Exact: return "exact";
    case EstimateMode::Truncated: return "truncated";
    case EstimateMode::MonteCarlo: return "monte_carlo";
    case EstimateMode::Approximate: return "approximate";
    }
    return "unknown";
}

struct PayoffEstimate {
    double value = 0.0;
    EstimateMode mode = EstimateMode::Exact;
    double bound = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::size_t horizon = 0;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    /// Minimum of the Cesaro means over the trailing 20% of checkpoints (Monte Carlo averages).
    double liminf_proxy = std::numeric_limits<double>::quiet_NaN();
    /// Slope of the value against lambda between the last two grid points.
    double trend = std::numeric_limits<double>::quiet_NaN();
};

/// The chain on states x memory induced by a controller in G_h.
struct ProductChain {
    Eigen::MatrixXd transition;
    Eigen::VectorXd reward;
    Eigen::VectorXd init;
    std::size_t num_memory = 0;
};

inline ProductChain build_product_chain(const PomdpModel& m, const FiniteStateController& fsc,
                                        StageDuration h) {
    if (fsc.num_actions() != m.num_actions() || fsc.num_signals() != m.num_signals())
        throw Error(ErrorCode::InvalidArgument, "controller does not match the model");
    const PomdpModel gh = stage_duration_transform(m, h);
    const std::size_t ns = m.num_states(), nq = fsc.num_memory();
    const auto n = static_cast<Eigen::Index>(ns * nq);
    ProductChain c{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
                   nq};
    for (StateIndex s = 0; s < ns; ++s) {
        for (std::size_t q = 0; q < nq; ++q) {
            const auto row = static_cast<Eigen::Index>(s * nq + q);
            c.init(row) = m.init(s) * fsc.init(m.signal(s))[q];
            for (ActionIndex a = 0; a < m.num_actions(); ++a) {
                const double w = fsc.rule(q)[a];
                if (w <= 0.0) continue;
                c.reward(row) += w * m.payoff(s, a);
                for (StateIndex t = 0; t < ns; ++t) {
                    const double p = gh.transition(s, a, t);
                    if (p <= 0.0) continue;
                    for (std::size_t q2 = 0; q2 < nq; ++q2) {
                        const double u = fsc.update(q, a, m.signal(t), q2);
                        if (u > 0.0) c.transition(row, static_cast<Eigen::Index>(t * nq + q2)) += w * p * u;
                    }
                }
            }
        }
    }
    return c;
}

/// R(sigma, h) for a finite-state controller, exactly, on the product chain.
inline PayoffEstimate longrun_average_exact_fsc(const PomdpModel& m, const FiniteStateController& fsc,
                                                StageDuration h) {
    const ProductChain c = build_product_chain(m, fsc, h);
    PayoffEstimate est;
    est.value = cesaro_average(c.transition, c.reward, c.init).value;
    est.mode = EstimateMode::Exact;
    return est;
}

/// Discount weights lambda h (1 - lambda h)^(i-1), i = 1..n.
inline std::vector<double> stage_duration_discount_weights(double lambda, StageDuration h,
                                                           std::size_t n) {
    std::vector<double> w(n);
    const double rate = lambda * h.value();
    double f = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = rate * f;
        f *= 1.0 - rate;
    }
    return w;
}

/// Plain discount weights lambda (1 - lambda)^(i-1), i = 1..n.
inline std::vector<double> discount_weights(double lambda, std::size_t n) {
    return stage_duration_discount_weights(lambda, StageDuration(1.0), n);
}

enum class DiscountMethod { Exact, MonteCarlo };

struct DiscountOptions {
    DiscountMethod method = DiscountMethod::Exact;
    double tail_tolerance = 1e-10;
    std::size_t trajectories = 10'000;
    std::uint64_t seed = 1;
    std::size_t budget = kDefaultEnumerationBudget;
};

namespace detail {

/// Smallest T with M (1 - rate)^T <= tol.
inline std::size_t discount_horizon(double rate, double payoff_bound, double tol) {
    if (payoff_bound <= 0.0 || rate >= 1.0) return 1;
    const double t = std::ceil(std::log(tol / payoff_bound) / std::log1p(-rate));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(t, 1.0)));
}

} // namespace detail

/**
 * E^h_sigma[ lambda h sum_i (1 - lambda h)^(i-1) g(w_i, a_i) ].
 *
 * Exact: a linear solve when sigma has a controller form, otherwise a
 * forward enumeration over (memory node, state) up to the horizon where the
 * tail M (1 - lambda h)^T drops under `tail_tolerance`.
 */
inline PayoffEstimate discounted_payoff(const PomdpModel& m, const Strategy& sigma, double lambda,
                                        StageDuration h, const DiscountOptions& opt = {}) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "lambda must lie in (0,1]");
    const double rate = lambda * h.value();
    const double beta = 1.0 - rate;
    const std::size_t horizon = detail::discount_horizon(rate, m.payoff_bound(), opt.tail_tolerance);
    PayoffEstimate est;
    est.lambda = lambda;

    if (opt.method == DiscountMethod::MonteCarlo) {
        std::vector<double> sums(opt.trajectories);
        parallel_for(opt.trajectories, [&](std::size_t i) {
            Rng rng = make_stream(opt.seed, i);
            const ExtendedTrajectory tr = simulate_gh(m, sigma, h, horizon, rng);
            double total = 0.0, f = rate;
            for (std::size_t j = 0; j < tr.length(); ++j) {
                total += f * m.payoff(tr.states[j], tr.actions[j]);
                f *= beta;
            }
            sums[i] = total;
        });
        const double n = double(opt.trajectories);
        const double mean = std::accumulate(sums.begin(), sums.end(), 0.0) / n;
        double var = 0.0;
        for (double x : sums) var += (x - mean) * (x - mean);
        var = opt.trajectories > 1 ? var / (n - 1.0) : 0.0;
        est.value = mean;
        est.mode = EstimateMode::MonteCarlo;
        est.std_error = std::sqrt(var / n);
        est.samples = opt.trajectories;
        est.horizon = horizon;
        est.bound = m.payoff_bound() * std::pow(beta, double(horizon));
        return est;
    }

    if (auto fsc = sigma.to_controller(m.num_signals())) {
        const ProductChain c = build_product_chain(m, *fsc, h);
        const auto n = c.transition.rows();
        const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - beta * c.transition;
        const Eigen::VectorXd v = detail::checked_solve(A, rate * c.reward, "discounted payoff");
        est.value = c.init.dot(v);
        est.mode = EstimateMode::Exact;
        return est;
    }

    // Forward law over (node, state), merging paths that share a memory node.
    const PomdpModel gh = stage_duration_transform(m, h);
    auto memory = sigma.memory();
    std::map<std::pair<MemoryProcess::Node, StateIndex>, double> layer;
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (m.init(s) > 0.0)
            for (auto [q, p] : memory->start(m.signal(s))) layer[{q, s}] += m.init(s) * p;
    double value = 0.0, f = rate;
    std::size_t work = 0;
    for (std::size_t i = 0; i < horizon; ++i) {
        std::map<std::pair<MemoryProcess::Node, StateIndex>, double> next;
        for (const auto& [key, mass] : layer) {
            const auto [q, s] = key;
            const MixedAction mixed = memory->act(q);
            for (ActionIndex a = 0; a < mixed.size(); ++a) {
                if (mixed[a] <= 0.0) continue;
                value += f * mass * mixed[a] * m.payoff(s, a);
                if (i + 1 == horizon) continue;
                for (StateIndex t = 0; t < m.num_states(); ++t) {
                    const double p = gh.transition(s, a, t);
                    if (p <= 0.0) continue;
                    for (auto [q2, pq] : memory->next(q, a, m.signal(t)))
                        next[{q2, t}] += mass * mixed[a] * p * pq;
                }
            }
            if (++work > opt.budget)
                throw Error(ErrorCode::BudgetExceeded,
                            "discounted enumeration exceeded budget " + std::to_string(opt.budget));
        }
        layer = std::move(next);
        f *= beta;
    }
    est.value = value;
    est.mode = EstimateMode::Truncated;
    est.horizon = horizon;
    est.bound = m.payoff_bound() * std::pow(beta, double(horizon));
    return est;
}

/// Trailing-window minimum; the window is the last ceil(fraction * n) terms.
inline double liminf_trailing(std::span<const double> seq, double window_fraction = 0.2) {
    if (seq.empty()) throw Error(ErrorCode::InvalidArgument, "liminf of an empty sequence");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "window fraction must lie in (0,1]");
    const std::size_t w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(window_fraction * double(seq.size()))));
    return *std::min_element(seq.end() - static_cast<std::ptrdiff_t>(w), seq.end());
}

struct AverageOptions {
    std::size_t checkpoints = 100;
    double window_fraction = 0.2;
};

/**
 * Monte Carlo E^h_sigma[(1/T) sum_{i<=T} g] at T = horizon. The Cesaro means
 * are also recorded at evenly spaced checkpoints; their minimum over the
 * trailing window is reported as the liminf proxy.
 */
inline PayoffEstimate longrun_average_mc(const PomdpModel& m, const Strategy& sigma, StageDuration h,
                                         std::size_t horizon, std::size_t n_traj,
                                         std::uint64_t seed, const AverageOptions& opt = {}) {
    if (horizon < 1 || n_traj < 1)
        throw Error(ErrorCode::InvalidArgument, "horizon and trajectory count must be positive");
    const std::size_t nc = std::min(opt.checkpoints, horizon);
    std::vector<std::size_t> marks(nc);
    for (std::size_t c = 0; c < nc; ++c) marks[c] = (c + 1) * horizon / nc;
    std::vector<std::vector<double>> means(n_traj, std::vector<double>(nc));
    parallel_for(n_traj, [&](std::size_t i) {
        Rng rng = make_stream(seed, i);
        const ExtendedTrajectory tr = simulate_gh(m, sigma, h, horizon, rng);
        double total = 0.0;
        std::size_t c = 0;
        for (std::size_t j = 0; j < horizon; ++j) {
            total += m.payoff(tr.states[j], tr.actions[j]);
            while (c < nc && marks[c] == j + 1) means[i][c++] = total / double(j + 1);
        }
    });
    std::vector<double> curve(nc, 0.0);
    for (const auto& row : means)
        for (std::size_t c = 0; c < nc; ++c) curve[c] += row[c];
    for (double& x : curve) x /= double(n_traj);
    double var = 0.0;
    for (const auto& row : means) var += (row.back() - curve.back()) * (row.back() - curve.back());
    var = n_traj > 1 ? var / double(n_traj - 1) : 0.0;

    PayoffEstimate est;
    est.value = curve.back();
    est.mode = EstimateMode::MonteCarlo;
    est.std_error = std::sqrt(var / double(n_traj));
    est.samples = n_traj;
    est.horizon = horizon;
    est.liminf_proxy = liminf_trailing(curve, opt.window_fraction);
    return est;
}

struct BeliefState {
    std::vector<double> probs;
};

/// Bayes filter through P(.|w, a) and the deterministic signal.
inline BeliefState belief_update(const PomdpModel& m, const BeliefState& b, ActionIndex a,
                                 SignalIndex s) {
    std::vector<double> out(m.num_states(), 0.0);
    double total = 0.0;
    for (StateIndex w = 0; w < m.num_states(); ++w) {
        if (b.probs[w] <= 0.0) continue;
        for (StateIndex t = 0; t < m.num_states(); ++t) {
            if (m.signal(t) != s) continue;
            const double p = b.probs[w] * m.transition(w, a, t);
            out[t] += p;
            total += p;
        }
    }
    if (!(total > 0.0))
        throw Error(ErrorCode::ImpossibleObservation,
                    "signal '" + m.signal_name(s) + "' after action '" + m.action_name(a) +
                        "' has probability zero");
    for (double& x : out) x /= total;
    return {std::move(out)};
}

enum class BeliefProjection {
    /// Barycentric weights on the lattice simplex containing the belief.
    Interpolate,
    /// Nearest lattice point by largest-remainder rounding.
    Nearest,
};

struct ValueIterationOptions {
    /// Stop once the contraction bound residual * beta / (1 - beta) is at most this.
    double tolerance = 1e-9;
    std::size_t max_sweeps = 5'000'000;
    BeliefProjection projection = BeliefProjection::Interpolate;
};

namespace detail {

/// Regular simplex lattice: all points with coordinates in {0, 1/r, ..., 1}.
class SimplexLattice {
public:
    SimplexLattice(std::size_t dim, std::size_t resolution) : dim_(dim), r_(resolution) {
        std::vector<int> p(dim_, 0);
        build(p, 0, static_cast<int>(r_));
    }

    std::size_t size() const noexcept { return points_.size(); }
    std::vector<double> belief(std::size_t i) const {
        std::vector<double> b(dim_);
        for (std::size_t k = 0; k < dim_; ++k) b[k] = double(points_[i][k]) / double(r_);
        return b;
    }

    /// Nearest lattice point by largest-remainder rounding.
    std::size_t project(const std::vector<double>& b) const {
        std::vector<int> p(dim_);
        std::vector<std::pair<double, std::size_t>> rem(dim_);
        int used = 0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const double x = std::max(0.0, b[k]) * double(r_);
            p[k] = static_cast<int>(std::floor(x));
            rem[k] = {x - p[k], k};
            used += p[k];
        }
        std::stable_sort(rem.begin(), rem.end(),
                         [](const auto& l, const auto& r) { return l.first > r.first; });
        for (std::size_t k = 0; used < static_cast<int>(r_); ++k, ++used) ++p[rem[k % dim_].second];
        for (std::size_t k = dim_; used > static_cast<int>(r_); ++k) {
            auto& c = p[rem[dim_ - 1 - (k % dim_)].second];
            if (c > 0) {
                --c;
                --used;
            }
        }
        return index_.at(p);
    }

    /**
     * Freudenthal triangulation in cumulative coordinates y_i = r * sum_{j>=i} b_j:
     * the belief is a convex combination of at most dim lattice points.
     */
    std::vector<std::pair<std::size_t, double>> interpolate(const std::vector<double>& b) const {
        std::vector<double> y(dim_);
        double tail = 0.0;
        for (std::size_t i = dim_; i-- > 0;) {
            tail += std::max(0.0, b[i]);
            y[i] = tail;
        }
        const double total = y[0];
        std::vector<long> v(dim_);
        std::vector<double> frac(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            const double yi = std::min(double(r_), double(r_) * y[i] / total);
            v[i] = static_cast<long>(std::floor(yi));
            frac[i] = yi - double(v[i]);
        }
        v[0] = static_cast<long>(r_);
        frac[0] = 0.0;
        std::vector<std::size_t> order;
        for (std::size_t i = 1; i < dim_; ++i) order.push_back(i);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t l, std::size_t r) { return frac[l] > frac[r]; });

        std::vector<std::pair<std::size_t, double>> out;
        auto emit = [&](double w) {
            if (w <= 0.0) return;
            std::vector<int> x(dim_);
            for (std::size_t i = 0; i < dim_; ++i)
                x[i] = static_cast<int>(v[i] - (i + 1 < dim_ ? v[i + 1] : 0));
            out.emplace_back(index_.at(x), w);
        };
        emit(1.0 - (order.empty() ? 0.0 : frac[order.front()]));
        for (std::size_t k = 0; k < order.size(); ++k) {
            ++v[order[k]];
            emit(frac[order[k]] - (k + 1 < order.size() ? frac[order[k + 1]] : 0.0));
        }
        return out;
    }

private:
    void build(std::vector<int>& p, std::size_t k, int left) {
        if (k + 1 == dim_) {
            p[k] = left;
            index_.emplace(p, points_.size());
            points_.push_back(p);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            p[k] = v;
            build(p, k + 1, left - v);
        }
    }

    std::size_t dim_;
    std::size_t r_;
    std::vector<std::vector<int>> points_;
    std::map<std::vector<int>, std::size_t> index_;
};

inline double stopping_bound(double residual, double beta) {
    return residual * beta / (1.0 - beta);
}

} // namespace detail

/**
 * Estimate of V_lambda(h) = sup_sigma E^h_sigma[lambda h sum (1 - lambda h)^(i-1) g].
 *
 * Fully observed models: tabular value iteration, mode Exact, `bound` is the
 * stopping bound. Otherwise value iteration on a simplex lattice of beliefs,
 * each Bayes update placed back on the lattice by `opt.projection`; mode
 * Approximate, and `bound` only covers the stopping rule, not the
 * discretization.
 */
inline PayoffEstimate discounted_value_estimate(const PomdpModel& m, double lambda, StageDuration h,
                                                std::size_t grid_resolution,
                                                const ValueIterationOptions& opt = {}) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "lambda must lie in (0,1]");
    if (grid_resolution < 2) throw Error(ErrorCode::InvalidArgument, "grid resolution must be >= 2");
    const PomdpModel gh = stage_duration_transform(m, h);
    const double rate = lambda * h.value(), beta = 1.0 - rate;
    const std::size_t ns = m.num_states(), na = m.num_actions(), nz = m.num_signals();
    PayoffEstimate est;
    est.lambda = lambda;

    if (is_fully_observed(m)) {
        std::vector<double> v(ns, 0.0), nv(ns);
        for (std::size_t sweep = 1;; ++sweep) {
            double residual = 0.0;
            for (StateIndex s = 0; s < ns; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (ActionIndex a = 0; a < na; ++a) {
                    double q = rate * m.payoff(s, a);
                    for (StateIndex t = 0; t < ns; ++t) q += beta * gh.transition(s, a, t) * v[t];
                    best = std::max(best, q);
                }
                nv[s] = best;
                residual = std::max(residual, std::abs(nv[s] - v[s]));
            }
            v.swap(nv);
            const double bound = detail::stopping_bound(residual, beta);
            if (bound <= opt.tolerance || residual == 0.0) {
                est.bound = bound;
                est.horizon = sweep;
                break;
            }
            if (sweep >= opt.max_sweeps)
                throw Error(ErrorCode::NotConverged,
                            "value iteration stopped after " + std::to_string(sweep) + " sweeps");
        }
        est.value = 0.0;
        for (StateIndex s = 0; s < ns; ++s) est.value += m.init(s) * v[s];
        est.mode = EstimateMode::Exact;
        return est;
    }

    const detail::SimplexLattice lattice(ns, grid_resolution);
    const std::size_t np = lattice.size();
    struct Branch {
        double prob;
        std::size_t next;
    };
    auto place = [&](const std::vector<double>& b) {
        if (opt.projection == BeliefProjection::Nearest)
            return std::vector<std::pair<std::size_t, double>>{{lattice.project(b), 1.0}};
        return lattice.interpolate(b);
    };
    std::vector<double> reward(np * na, 0.0);
    std::vector<std::vector<Branch>> branches(np * na);
    for (std::size_t i = 0; i < np; ++i) {
        const std::vector<double> b = lattice.belief(i);
        for (ActionIndex a = 0; a < na; ++a) {
            for (StateIndex s = 0; s < ns; ++s) reward[i * na + a] += b[s] * m.payoff(s, a);
            for (SignalIndex z = 0; z < nz; ++z) {
                std::vector<double> u(ns, 0.0);
                double total = 0.0;
                for (StateIndex s = 0; s < ns; ++s) {
                    if (b[s] <= 0.0) continue;
                    for (StateIndex t = 0; t < ns; ++t)
                        if (gh.signal(t) == z) u[t] += b[s] * gh.transition(s, a, t);
                }
                for (double x : u) total += x;
                if (total <= 0.0) continue;
                for (double& x : u) x /= total;
                for (auto [idx, w] : place(u)) branches[i * na + a].push_back({total * w, idx});
            }
        }
    }

    std::vector<double> v(np, 0.0), nv(np);
    for (std::size_t sweep = 1;; ++sweep) {
        double residual = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (ActionIndex a = 0; a < na; ++a) {
                double q = rate * reward[i * na + a];
                for (const Branch& br : branches[i * na + a]) q += beta * br.prob * v[br.next];
                best = std::max(best, q);
            }
            nv[i] = best;
            residual = std::max(residual, std::abs(nv[i] - v[i]));
        }
        v.swap(nv);
        const double bound = detail::stopping_bound(residual, beta);
        if (bound <= opt.tolerance || residual == 0.0) {
            est.bound = bound;
            est.horizon = sweep;
            break;
        }
        if (sweep >= opt.max_sweeps)
            throw Error(ErrorCode::NotConverged,
                        "value iteration stopped after " + std::to_string(sweep) + " sweeps");
    }

    est.value = 0.0;
    for (SignalIndex z = 0; z < nz; ++z) {
        std::vector<double> b(ns, 0.0);
        double pz = 0.0;
        for (StateIndex s = 0; s < ns; ++s)
            if (m.signal(s) == z) {
                b[s] = m.init(s);
                pz += m.init(s);
            }
        if (pz <= 0.0) continue;
        for (double& x : b) x /= pz;
        for (auto [idx, w] : place(b)) est.value += pz * w * v[idx];
    }
    est.mode = EstimateMode::Approximate;
    return est;
}

inline const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid{0.1, 0.05, 0.02, 0.01, 0.005};
    return grid;
}

/**
 * V(h) estimated as the discounted value at the last (smallest) lambda.
 * `trend` is the slope dV/dlambda between the last two grid points; `bound`
 * adds the linear extrapolation distance to lambda = 0 and the last stopping
 * bound. Always mode Approximate.
 */
inline PayoffEstimate asymptotic_value_estimate(const PomdpModel& m, StageDuration h,
                                                const std::vector<double>& lambda_grid,
                                                std::size_t grid_resolution,
                                                const ValueIterationOptions& opt = {}) {
    if (lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0))
            throw Error(ErrorCode::InvalidArgument, "lambda grid must be positive");
        if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1]))
            throw Error(ErrorCode::InvalidArgument, "lambda grid must be strictly decreasing");
    }
    std::vector<PayoffEstimate> values;
    for (double lambda : lambda_grid)
        values.push_back(discounted_value_estimate(m, lambda, h, grid_resolution, opt));
    PayoffEstimate est = values.back();
    est.mode = EstimateMode::Approximate;
    est.trend = 0.0;
    if (values.size() >= 2) {
        const PayoffEstimate& prev = values[values.size() - 2];
        const double dl = prev.lambda - est.lambda;
        est.trend = (prev.value - est.value) / dl;
        est.bound += std::abs(est.trend) * est.lambda;
    }
    return est;
}

} // namespace stagedur
