// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "stagedur/stagedur.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace stagedur;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string num(double x) { return format_real(x); }

std::vector<History> all_histories(std::size_t na, std::size_t nz, std::size_t max_len) {
    std::vector<History> out, layer;
    for (SignalIndex s = 0; s < nz; ++s) layer.emplace_back(s);
    for (std::size_t len = 1; len <= max_len; ++len) {
        out.insert(out.end(), layer.begin(), layer.end());
        std::vector<History> next;
        for (const auto& h : layer)
            for (ActionIndex a = 0; a < na; ++a)
                for (SignalIndex s = 0; s < nz; ++s) next.push_back(h.extended(a, s));
        layer = std::move(next);
    }
    return out;
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

// 1 ------------------------------------------------------------------------
Outcome stage_duration_algebra() {
    Outcome o;
    Rng rng = make_stream(kSeed, 1);
    double worst = 0.0;
    bool identity_exact = true;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const PomdpModel m = random_model({4, 2, 2, {0, 0, 1, 1}, 0.2}, split_seed(kSeed, i));
        double h1 = 0.01 + 0.99 * uniform01(rng), h2 = 0.01 + 0.99 * uniform01(rng);
        if (h1 > h2) std::swap(h1, h2);
        const PomdpModel direct = stage_duration_transform(m, StageDuration(h1));
        const PomdpModel nested =
            stage_duration_transform(stage_duration_transform(m, StageDuration(h2)), StageDuration(h1 / h2));
        const auto& x = direct.data().transition;
        const auto& y = nested.data().transition;
        for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(x[j] - y[j]));
        identity_exact = identity_exact && stage_duration_transform(m, StageDuration(1.0)).data() == m.data();
    }
    o.require(worst <= 1e-12, "composition gap " + num(worst));
    o.require(identity_exact, "transform at h=1 changed a model");
    o.detail = "max composition gap " + num(worst) + (o.pass ? "" : "; " + o.detail);
    return o;
}

// 2 ------------------------------------------------------------------------
/// Central moments of Geometric(h) on {1,2,...} by direct summation.
std::pair<double, double> geometric_central_moments(double h) {
    const double mean = 1.0 / h;
    double m2 = 0.0, m4 = 0.0, p = h;
    for (int n = 1; n <= 20'000 && p > 0.0; ++n) {
        const double d = n - mean;
        m2 += p * d * d;
        m4 += p * d * d * d * d;
        p *= 1.0 - h;
    }
    return {m2, m4};
}

Outcome epoch_moments() {
    Outcome o;
    const std::size_t n = 100'000;
    std::ostringstream d;
    for (double h : {0.2, 0.5, 0.8}) {
        const EpochSample e = sample_epochs(StageDuration(h), n, split_seed(kSeed, std::uint64_t(h * 100)));
        double mean = 0.0, tail = 0.0;
        for (auto x : e.lengths) {
            mean += double(x);
            tail += x >= 3 ? 1.0 : 0.0;
        }
        mean /= double(n);
        tail /= double(n);
        double var = 0.0;
        for (auto x : e.lengths) var += (double(x) - mean) * (double(x) - mean);
        var /= double(n - 1);
        const auto [m2, m4] = geometric_central_moments(h);
        const double true_var = (1.0 - h) / (h * h);
        const double se_mean = std::sqrt(true_var / double(n));
        const double se_var = std::sqrt((m4 - m2 * m2) / double(n));
        const double p3 = (1.0 - h) * (1.0 - h);
        const double se_tail = std::sqrt(p3 * (1.0 - p3) / double(n));
        o.require(std::abs(mean - 1.0 / h) <= 3.0 * se_mean, "mean at h=" + num(h));
        o.require(std::abs(var - true_var) <= 3.0 * se_var, "variance at h=" + num(h));
        o.require(std::abs(tail - p3) <= 3.0 * se_tail, "P(N>=3) at h=" + num(h));
        o.require(std::abs(m2 - true_var) <= 1e-9 * true_var, "series variance oracle at h=" + num(h));
        d << " h=" << num(h) << ": mean " << num(mean) << " var " << num(var) << " P(N>=3) " << num(tail) << ";";
    }
    if (o.pass) o.detail = d.str();
    return o;
}

// 3 ------------------------------------------------------------------------
Outcome epoch_operator() {
    Outcome o;
    Rng rng = make_stream(kSeed, 3);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::MatrixXd M = random_stochastic(2 + rep % 5, rng);
        for (double h : {0.3, 0.7}) {
            const Eigen::MatrixXd E = epoch_memory_operator(M, StageDuration(h));
            Eigen::MatrixXd series = Eigen::MatrixXd::Zero(M.rows(), M.cols());
            Eigen::MatrixXd power = Eigen::MatrixXd::Identity(M.rows(), M.cols());
            double w = h;
            for (int m = 1; m <= 200; ++m) {
                series += w * power;
                power = power * M;
                w *= 1.0 - h;
            }
            worst = std::max(worst, (E - series).cwiseAbs().maxCoeff());
        }
    }
    o.require(worst <= 1e-9, "gap " + num(worst));
    if (o.pass) o.detail = "max gap to 200-term series " + num(worst);
    return o;
}

// 4 ------------------------------------------------------------------------
Outcome mimic_identity_at_one() {
    Outcome o;
    double worst = 0.0;
    std::size_t compared = 0, null_histories = 0;
    for (const auto& c : bundled_cases())
        for (const auto& s : c.strategies) {
            const MimicStrategy mimic(c.model, s.strategy, StageDuration(1.0), 1, MimicPath::Truncated);
            for (const auto& eta : all_histories(c.model.num_actions(), c.model.num_signals(), 4)) {
                const MimicResult r = mimic.evaluate(eta);
                if (r.fallback) {
                    ++null_histories;
                    continue;
                }
                const MixedAction y = s.strategy->act(eta);
                for (ActionIndex a = 0; a < y.size(); ++a) worst = std::max(worst, std::abs(r.action[a] - y[a]));
                ++compared;
            }
        }
    o.require(worst <= 1e-12, "gap " + num(worst));
    o.require(compared > 0, "no history compared");
    if (o.pass)
        o.detail = std::to_string(compared) + " histories, max gap " + num(worst) + ", " +
                   std::to_string(null_histories) + " probability-zero histories skipped";
    return o;
}

// 5 ------------------------------------------------------------------------
Outcome state_blind_closed_form() {
    Outcome o;
    double oracle = 0.0, w = 0.5;
    for (int n = 1; n <= 200; ++n) {
        if (n % 2 == 1) oracle += w;
        w *= 0.5;
    }
    const PomdpModel m = figure1_model();
    const SequenceStrategy ab = alternating_sequence();
    const double exact = mimic_action_exact(m, ab, StageDuration(0.5), History(0), 200).action[0];
    const MixedActionEstimate mc = mimic_action_mc(m, ab, StageDuration(0.5), History(0), 100'000, kSeed);
    o.require(std::abs(oracle - 2.0 / 3.0) <= 1e-12, "oracle " + num(oracle));
    o.require(std::abs(exact - oracle) <= 1e-9, "exact " + num(exact));
    o.require(std::abs(mc.weights[0] - oracle) <= 3.0 * mc.std_error[0],
              "monte carlo " + num(mc.weights[0]) + " se " + num(mc.std_error[0]));
    if (o.pass)
        o.detail = "exact " + num(exact) + ", monte carlo " + num(mc.weights[0]) + " +- " + num(mc.std_error[0]);
    return o;
}

// 6, 7 ---------------------------------------------------------------------
Outcome marginal_lemma() {
    Outcome o;
    std::size_t n = 0;
    double worst_ratio = 0.0;
    for (const auto& c : bundled_cases())
        for (const auto& s : c.strategies)
            for (double h : {0.3, 0.5, 0.7})
                for (std::size_t k = 1; k <= 3; ++k) {
                    const StageDuration hd(h);
                    const CheckReport r = check_marginal_lemma(c.model, s.strategy, hd, k, default_truncation(hd));
                    ++n;
                    worst_ratio = std::max(worst_ratio, r.difference() / r.tolerance);
                    o.require(r.passed, c.name + "/" + s.name + " h=" + num(h) + " k=" + std::to_string(k));
                }
    if (o.pass) o.detail = std::to_string(n) + " cases, worst gap/tolerance " + num(worst_ratio);
    return o;
}

Outcome epoch_sum_lemma() {
    Outcome o;
    std::size_t n = 0;
    double worst_ratio = 0.0;
    std::uint64_t job = 0;
    for (const auto& c : bundled_cases())
        for (const auto& s : c.strategies)
            for (double h : {0.3, 0.5, 0.7})
                for (std::size_t k = 1; k <= 3; ++k) {
                    const CheckReport r = check_epoch_sum_lemma(c.model, *s.strategy, StageDuration(h), k, 10'000,
                                                                split_seed(kSeed, job++));
                    ++n;
                    worst_ratio = std::max(worst_ratio, r.difference() / r.tolerance);
                    o.require(r.passed, c.name + "/" + s.name + " h=" + num(h) + " k=" + std::to_string(k) + " " +
                                            format_report(r));
                }
    if (o.pass) o.detail = std::to_string(n) + " cases, worst gap/tolerance " + num(worst_ratio);
    return o;
}

// 8 ------------------------------------------------------------------------
Outcome cesaro_alignment() {
    Outcome o;
    const CheckReport r =
        check_cesaro_alignment(figure1_model(), alternating_sequence(), StageDuration(0.5), 400, 10'000, kSeed);
    const double M = 1.0, K = 400.0, h = 0.5;
    const double declared = M * (std::sqrt((1.0 - h) / K) + h / K);
    o.require(r.passed, format_report(r));
    o.require(r.tolerance <= declared + 3.0 * r.quantity("se") + 1e-9, "tolerance wider than declared");
    if (o.pass) o.detail = "diff " + num(r.difference()) + " tol " + num(r.tolerance);
    return o;
}

// 9 ------------------------------------------------------------------------
Outcome theorem_end_to_end() {
    Outcome o;
    double worst = 0.0;
    std::size_t n = 0;
    for (const auto& c : bundled_cases()) {
        if (c.name == "fully_observed") continue;
        for (const auto& [name, fsc] : c.controllers)
            for (double h : {0.25, 0.5}) {
                const CheckReport r = check_theorem_main(c.model, fsc, StageDuration(h));
                worst = std::max(worst, r.difference());
                ++n;
                o.require(r.difference() <= 1e-6, c.name + "/" + name + " h=" + num(h) + " " + format_report(r));
            }
    }
    if (o.pass) o.detail = std::to_string(n) + " controller cases, max |R(sigma,h) - R(mimic,1)| " + num(worst);
    return o;
}

// 10 -----------------------------------------------------------------------
Outcome fully_observed_identity() {
    Outcome o;
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const PomdpModel m = random_fully_observed_model(2 + i % 4, 2 + i % 2, split_seed(kSeed, 100 + i), 0.3);
        for (double lambda : {0.1, 0.01})
            for (double h : {0.3, 0.7}) {
                const CheckReport r = check_fully_observed_identity(m, lambda, StageDuration(h));
                worst = std::max(worst, r.difference());
            }
    }
    o.require(worst <= 1e-8, "gap " + num(worst));
    if (o.pass) o.detail = "80 cases, max gap " + num(worst);
    return o;
}

// 11 -----------------------------------------------------------------------
Outcome figure1_discontinuity() {
    Outcome o;
    const PomdpModel m = figure1_model();
    const double at_one = longrun_average_exact_fsc(m, alternating_controller(1), StageDuration(1.0)).value;
    const PayoffEstimate v = asymptotic_value_estimate(m, StageDuration(0.5), default_lambda_grid(), 24);
    double best = -1.0;
    for (const auto& c : bundled_cases()) {
        if (c.name != "figure1") continue;
        for (const auto& s : c.strategies)
            if (auto fsc = s.strategy->to_controller(m.num_signals()))
                best = std::max(best, longrun_average_exact_fsc(m, *fsc, StageDuration(0.5)).value);
    }
    o.require(at_one >= 0.999, "average at h=1 " + num(at_one));
    o.require(v.value <= 0.1, "value estimate at h=0.5 " + num(v.value));
    o.require(std::abs(best) <= 1e-9, "best bundled average at h=0.5 " + num(best));
    if (o.pass)
        o.detail = "R(alternating,1)=" + num(at_one) + ", V(0.5) estimate " + num(v.value) + ", best R(.,0.5)=" +
                   num(best);
    return o;
}

// 12 -----------------------------------------------------------------------
Outcome monotonicity_sweep() {
    Outcome o;
    const std::vector<double> hs{0.25, 0.5, 0.75, 1.0};
    const MonotonicityResult fig = check_monotonicity(figure1_model(), hs, default_lambda_grid(), 24);
    const MonotonicityResult fo = check_monotonicity(bundled_fully_observed_model(), hs, default_lambda_grid(), 24);
    o.require(fig.report.passed, format_report(fig.report));
    o.require(fo.report.passed, format_report(fo.report));
    o.require(fo.report.quantity("spread") <= fo.report.quantity("slack"), "fully observed values not flat");
    std::ostringstream d;
    d << "figure1";
    for (const auto& v : fig.values) d << ' ' << num(v.value);
    d << "; fully observed spread " << num(fo.report.quantity("spread"));
    if (o.pass) o.detail = d.str();
    return o;
}

// 13 -----------------------------------------------------------------------
Outcome parser_corpus() {
    Outcome o;
    const fs::path root = STAGEDUR_GOLDEN_DIR;
    std::size_t valid = 0, invalid = 0;
    for (const auto& e : fs::directory_iterator(root / "valid")) {
        if (e.path().extension() != ".pomdp") continue;
        ++valid;
        try {
            const PomdpModel m = parse_pomdp(read_text_file(e.path().string()));
            const std::string text = serialize_pomdp(m);
            const PomdpModel again = parse_pomdp(text);
            o.require(again.data() == m.data() && serialize_pomdp(again) == text,
                      "round trip " + e.path().filename().string());
        } catch (const Error& err) {
            o.require(false, e.path().filename().string() + ": " + err.what());
        }
    }
    for (const auto& e : fs::directory_iterator(root / "invalid")) {
        if (e.path().extension() != ".pomdp") continue;
        ++invalid;
        fs::path golden = e.path();
        golden.replace_extension(".err");
        std::string expected = read_text_file(golden.string());
        while (!expected.empty() && expected.back() == '\n') expected.pop_back();
        try {
            parse_pomdp(read_text_file(e.path().string()));
            o.require(false, e.path().filename().string() + " parsed");
        } catch (const Error& err) {
            o.require(std::string(err.what()) == expected && err.line() > 0,
                      e.path().filename().string() + " gave '" + err.what() + "'");
        }
    }
    o.require(valid >= 10 && invalid >= 10, "corpus too small");
    if (o.pass) o.detail = std::to_string(valid) + " valid, " + std::to_string(invalid) + " invalid";
    return o;
}

// 14 -----------------------------------------------------------------------
Outcome liminf_subsequence() {
    Outcome o;
    Rng rng = make_stream(kSeed, 14);
    std::size_t n = 0;
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t M = 1 + rep % 6;
        const double a = 0.3 + uniform01(rng), b = 6.28 * uniform01(rng), c = uniform01(rng);
        std::function<double(std::size_t)> x;
        switch (rep % 4) {
        case 0: x = [=](std::size_t k) { return std::sin(a * std::sqrt(double(k)) + b); }; break;
        case 1: x = [=](std::size_t k) { return std::cos(a * std::log(double(k)) + b) + c / double(k); }; break;
        case 2: x = [=](std::size_t k) { return c + 1.0 / std::sqrt(double(k)); }; break;
        default: x = [=](std::size_t k) { return std::sin(a * std::pow(double(k), 0.4)) * (1 + 1.0 / double(k)); };
        }
        // Random gaps in [1, M], first index at most M.
        std::vector<std::size_t> idx;
        std::size_t at = 0;
        const std::size_t N = 50'000;
        while (at < N) {
            at += 1 + static_cast<std::size_t>(uniform01(rng) * double(M));
            idx.push_back(at);
        }
        const CheckReport r = check_liminf_subsequence(x, N, idx, M);
        ++n;
        o.require(r.passed, format_report(r));
    }
    std::vector<std::size_t> even;
    for (std::size_t k = 2; k <= 100'000; k += 2) even.push_back(k);
    const CheckReport s = check_liminf_subsequence([](std::size_t k) { return std::sin(std::sqrt(double(k))); },
                                                   100'000, even, 2);
    o.require(s.passed, format_report(s));
    if (o.pass) o.detail = std::to_string(n + 1) + " sequences, sin(sqrt n) proxies " + num(s.lhs) + " / " + num(s.rhs);
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0 means no runtime limit
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "stage-duration algebra", 1.0, stage_duration_algebra},
        {2, "epoch-process moments", 5.0, epoch_moments},
        {3, "epoch operator", 1.0, epoch_operator},
        {4, "mimic identity at h=1", 0.0, mimic_identity_at_one},
        {5, "state-blind closed form", 5.0, state_blind_closed_form},
        {6, "marginal-matching lemma", 30.0, marginal_lemma},
        {7, "epoch-sum lemma", 30.0, epoch_sum_lemma},
        {8, "Cesaro alignment", 30.0, cesaro_alignment},
        {9, "long-run average equality", 120.0, theorem_end_to_end},
        {10, "fully-observed identity", 10.0, fully_observed_identity},
        {11, "figure1 discontinuity", 60.0, figure1_discontinuity},
        {12, "monotonicity sweep", 300.0, monotonicity_sweep},
        {13, "parser and serializer corpus", 0.0, parser_corpus},
        {14, "liminf-subsequence utility", 0.0, liminf_subsequence},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("threw ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_seconds > 0.0 && secs > c.limit_seconds) {
            o.pass = false;
            o.detail += "; runtime over " + num(c.limit_seconds) + " s";
        }
        std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
