#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace stagedur {

/// Cesaro limit of the expected average reward of a finite Markov chain.
struct ChainAverage {
    double value = 0.0;
    std::vector<std::vector<std::size_t>> closed_classes;
    std::vector<double> class_probability; ///< probability of ending in each closed class
    std::vector<double> class_gain;        ///< stationary average reward inside each class
};

namespace detail {

/// Strongly connected components of the support graph of P (Tarjan).
inline std::vector<std::vector<std::size_t>> strong_components(const Eigen::MatrixXd& P) {
    const std::size_t n = static_cast<std::size_t>(P.rows());
    std::vector<long> index(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> out;
    long counter = 0;
    std::function<void(std::size_t)> visit = [&](std::size_t v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (std::size_t w = 0; w < n; ++w) {
            if (P(v, w) <= 0.0) continue;
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<std::size_t> comp;
            std::size_t w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w);
            } while (w != v);
            std::sort(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
    };
    for (std::size_t v = 0; v < n; ++v)
        if (index[v] < 0) visit(v);
    return out;
}

inline Eigen::VectorXd checked_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                     const char* what) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(b);
    const double residual = (A * x - b).cwiseAbs().maxCoeff();
    if (!x.allFinite() || residual > 1e-9)
        throw Error(ErrorCode::SingularSystem,
                    std::string(what) + " residual " + format_real(residual));
    return x;
}

} // namespace detail

/**
 * lim (1/T) sum_{t<=T} E[r(X_t)] for the chain with transition matrix P and
 * initial law `init`: stationary laws of the closed classes weighted by the
 * absorption probabilities from the initial law.
 */
inline ChainAverage cesaro_average(const Eigen::MatrixXd& P, const Eigen::VectorXd& reward,
                                   const Eigen::VectorXd& init) {
    const std::size_t n = static_cast<std::size_t>(P.rows());
    ChainAverage out;
    std::vector<long> class_of(n, -1);
    for (auto& comp : detail::strong_components(P)) {
        bool closed = true;
        for (std::size_t v : comp)
            for (std::size_t w = 0; w < n && closed; ++w)
                if (P(v, w) > 0.0 && !std::binary_search(comp.begin(), comp.end(), w))
                    closed = false;
        if (!closed) continue;
        for (std::size_t v : comp) class_of[v] = static_cast<long>(out.closed_classes.size());
        out.closed_classes.push_back(std::move(comp));
    }

    for (const auto& comp : out.closed_classes) {
        const auto c = static_cast<Eigen::Index>(comp.size());
        Eigen::MatrixXd A(c, c);
        for (Eigen::Index i = 0; i < c; ++i)
            for (Eigen::Index j = 0; j < c; ++j)
                A(i, j) = P(comp[j], comp[i]) - (i == j ? 1.0 : 0.0);
        A.row(c - 1).setOnes();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(c);
        b(c - 1) = 1.0;
        Eigen::VectorXd pi = detail::checked_solve(A, b, "stationary law");
        double gain = 0.0;
        for (Eigen::Index i = 0; i < c; ++i) gain += pi(i) * reward(comp[i]);
        out.class_gain.push_back(gain);
    }

    std::vector<std::size_t> transient;
    for (std::size_t v = 0; v < n; ++v)
        if (class_of[v] < 0) transient.push_back(v);
    const std::size_t nc = out.closed_classes.size();
    out.class_probability.assign(nc, 0.0);
    for (std::size_t v = 0; v < n; ++v)
        if (class_of[v] >= 0) out.class_probability[class_of[v]] += init(v);

    if (!transient.empty()) {
        const auto t = static_cast<Eigen::Index>(transient.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(t, t);
        for (Eigen::Index i = 0; i < t; ++i)
            for (Eigen::Index j = 0; j < t; ++j) A(i, j) -= P(transient[i], transient[j]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        for (std::size_t k = 0; k < nc; ++k) {
            Eigen::VectorXd b = Eigen::VectorXd::Zero(t);
            for (Eigen::Index i = 0; i < t; ++i)
                for (std::size_t v : out.closed_classes[k]) b(i) += P(transient[i], v);
            Eigen::VectorXd x = lu.solve(b);
            const double residual = (A * x - b).cwiseAbs().maxCoeff();
            if (!x.allFinite() || residual > 1e-9)
                throw Error(ErrorCode::SingularSystem,
                            "absorption residual " + format_real(residual));
            for (Eigen::Index i = 0; i < t; ++i) out.class_probability[k] += init(transient[i]) * x(i);
        }
    }

    for (std::size_t k = 0; k < nc; ++k) out.value += out.class_probability[k] * out.class_gain[k];
    return out;
}

} // namespace stagedur
