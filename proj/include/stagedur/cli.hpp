#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/evaluate.hpp"
#include "stagedur/format.hpp"
#include "stagedur/io.hpp"
#include "stagedur/mimic.hpp"
#include "stagedur/model.hpp"
#include "stagedur/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace stagedur {

namespace detail {

inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

inline std::vector<double> parse_real_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        double v = 0.0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc{} || res.ptr != item.data() + item.size())
            throw Error(ErrorCode::InvalidArgument,
                        std::string("invalid number '") + item + "' in " + what);
        out.push_back(v);
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, std::string("empty ") + what);
    return out;
}

inline PomdpModel load_model(const std::string& path, bool normalize = false) {
    const std::string text = read_text_file(path);
    try {
        return parse_pomdp(text, normalize);
    } catch (const Error& e) {
        throw e.in_file(path);
    }
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    f << text;
}

inline std::uint64_t fresh_seed() {
    std::random_device rd;
    return (std::uint64_t(rd()) << 32) ^ rd();
}

inline std::string describe(const PayoffEstimate& e) {
    std::string s = "value=" + format_real(e.value) + " mode=" + mode_name(e.mode);
    if (e.mode == EstimateMode::MonteCarlo)
        s += " std_error=" + format_real(e.std_error) + " n=" + std::to_string(e.samples);
    if (e.mode == EstimateMode::Truncated || e.mode == EstimateMode::Approximate || e.bound > 0.0)
        s += " bound=" + format_real(e.bound);
    if (e.horizon) s += " horizon=" + std::to_string(e.horizon);
    if (!std::isnan(e.lambda)) s += " lambda=" + format_real(e.lambda);
    if (!std::isnan(e.liminf_proxy)) s += " liminf_proxy=" + format_real(e.liminf_proxy);
    if (!std::isnan(e.trend)) s += " trend=" + format_real(e.trend);
    return s;
}

} // namespace detail

/**
 * Command-line entry point. Exit codes: 0 success, 1 a verification check
 * failed, 2 usage, input or evaluation errors (reported as `error: ...`).
 */
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace detail;
    CLI::App app{"Stage-duration POMDP toolkit: transform, mimic, evaluate and verify."};
    app.name("stagedur");
    app.set_help_flag("--help", "Print help and exit");
    app.require_subcommand(1);

    std::string file, output, strategy_spec, suite = "all", h_grid_text, csv_path;
    std::string lambda_grid_text;
    double h = 1.0;
    bool normalize = false, average = false;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> mc;
    std::size_t horizon = 10'000, resolution = 24, n_max = 0, trajectories = 10'000;
    std::vector<std::string> history_tokens;
    std::string example_name;

    auto* validate = app.add_subcommand("validate", "Parse and validate a model file");
    validate->add_option("file", file, "Model file")->required();
    validate->add_flag("--normalize", normalize, "Renormalize rows and init before validation");

    auto* transform = app.add_subcommand("transform", "Write the stage-duration transform G_h");
    transform->add_option("file", file, "Model file")->required();
    transform->add_option("--h", h, "Stage duration in (0,1]")->required();
    transform->add_option("-o,--output", output, "Output file (default stdout)");

    auto* mimic = app.add_subcommand("mimic", "Print sigma-hat at one filtered history");
    mimic->add_option("file", file, "Model file")->required();
    mimic->add_option("--h", h, "Stage duration in (0,1]")->required();
    mimic->add_option("--strategy", strategy_spec, "seq:a,b | fsc:<file> | uniform")->required();
    mimic->add_option("--history", history_tokens, "First signal, then action signal pairs")
        ->required()
        ->expected(1, -1);
    mimic->add_option("--n-max", n_max, "Per-epoch truncation (default: tail under 1e-9)");
    mimic->add_option("--mc", mc, "Also estimate by rejection sampling with this many plays");
    mimic->add_option("--seed", seed, "Seed for --mc");

    auto* evaluate = app.add_subcommand("evaluate", "Discounted or long-run average payoff");
    evaluate->add_option("file", file, "Model file")->required();
    evaluate->add_option("--h", h, "Stage duration in (0,1]")->required();
    evaluate->add_option("--strategy", strategy_spec, "seq:a,b | fsc:<file> | uniform")->required();
    auto* lambda_opt = evaluate->add_option("--lambda", lambda, "Discount in (0,1]");
    auto* average_opt = evaluate->add_flag("--average", average, "Long-run average payoff");
    lambda_opt->excludes(average_opt);
    evaluate->add_option("--mc", mc, "Monte Carlo with this many trajectories");
    evaluate->add_option("--horizon", horizon, "Monte Carlo horizon for --average");
    evaluate->add_option("--seed", seed, "Seed for Monte Carlo (printed when generated)");

    auto* sweep = app.add_subcommand("sweep", "Asymptotic value estimates along an h grid");
    sweep->add_option("file", file, "Model file")->required();
    sweep->add_option("--h-grid", h_grid_text, "Comma-separated stage durations")->required();
    sweep->add_option("--lambda-grid", lambda_grid_text, "Comma-separated decreasing discounts");
    sweep->add_option("--resolution", resolution, "Belief lattice resolution");
    sweep->add_option("--csv", csv_path, "CSV output file (default stdout)");

    auto* verify = app.add_subcommand("verify", "Run the verification suite on the bundled models");
    verify->add_option("--suite", suite, "all | theorem | lemmas | example | fully-observed")
        ->check(CLI::IsMember({"all", "theorem", "lemmas", "example", "fully-observed"}));
    verify->add_option("--seed", seed, "Master seed");
    verify->add_option("--trajectories", trajectories, "Monte Carlo trajectories per check");

    auto* example = app.add_subcommand("example", "Write a bundled model");
    example->add_option("name", example_name, "fig1")->required()->check(CLI::IsMember({"fig1"}));
    example->add_option("-o,--output", output, "Output file (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (validate->parsed()) {
            const PomdpModel m = load_model(file, normalize);
            out << "ok: " << m.num_states() << " states, " << m.num_actions() << " actions, "
                << m.num_signals() << " signals"
                << (is_fully_observed(m) ? ", fully observed" : "") << "\n";
            return 0;
        }
        if (transform->parsed()) {
            const PomdpModel m = load_model(file);
            write_output(output, serialize_pomdp(stage_duration_transform(m, StageDuration(h))), out);
            return 0;
        }
        if (mimic->parsed()) {
            const PomdpModel m = load_model(file);
            const StageDuration hd(h);
            auto sigma = parse_strategy_spec(strategy_spec, m);
            std::vector<std::string> tokens;
            for (const auto& t : history_tokens) {
                std::stringstream in(t);
                std::string piece;
                while (in >> piece) tokens.push_back(piece);
            }
            const History eta = parse_history_tokens(tokens, m);
            const MimicStrategy strategy(m, sigma, hd, n_max ? n_max : default_truncation(hd));
            const MimicResult r = strategy.evaluate(eta);
            for (ActionIndex a = 0; a < m.num_actions(); ++a)
                out << m.action_name(a) << " " << format_real(r.action[a]) << "\n";
            out << "path=" << (strategy.exact() ? "closed_form" : "truncated")
                << " error_bound=" << format_real(r.error_bound)
                << " conditioning_mass=" << format_real(r.conditioning_mass)
                << (r.fallback ? " fallback=uniform" : "") << (r.reliable ? "" : " unreliable") << "\n";
            if (mc) {
                const std::uint64_t s = seed ? *seed : fresh_seed();
                const MixedActionEstimate est = mimic_action_mc(m, *sigma, hd, eta, *mc, s);
                out << "mc seed=" << s << " accepted=" << est.accepted << "/" << est.samples;
                for (ActionIndex a = 0; a < m.num_actions(); ++a)
                    out << " " << m.action_name(a) << "=" << format_real(est.weights[a]) << "+-"
                        << format_real(est.std_error[a]);
                out << "\n";
            }
            return 0;
        }
        if (evaluate->parsed()) {
            const PomdpModel m = load_model(file);
            const StageDuration hd(h);
            auto sigma = parse_strategy_spec(strategy_spec, m);
            if (!lambda && !average) {
                err << "error: evaluate needs --lambda or --average\n";
                return kExitUsage;
            }
            PayoffEstimate est;
            std::optional<std::uint64_t> used_seed;
            if (lambda) {
                DiscountOptions opt;
                if (mc) {
                    opt.method = DiscountMethod::MonteCarlo;
                    opt.trajectories = *mc;
                    used_seed = opt.seed = seed ? *seed : fresh_seed();
                }
                est = discounted_payoff(m, *sigma, *lambda, hd, opt);
            } else if (auto fsc = sigma->to_controller(m.num_signals()); fsc && !mc) {
                est = longrun_average_exact_fsc(m, *fsc, hd);
            } else {
                used_seed = seed ? *seed : fresh_seed();
                est = longrun_average_mc(m, *sigma, hd, horizon, mc ? *mc : 1000, *used_seed);
            }
            out << describe(est);
            if (used_seed) out << " seed=" << *used_seed;
            out << "\n";
            return 0;
        }
        if (sweep->parsed()) {
            const PomdpModel m = load_model(file);
            const std::vector<double> hs = parse_real_list(h_grid_text, "--h-grid");
            const std::vector<double> lambdas = lambda_grid_text.empty()
                                                    ? default_lambda_grid()
                                                    : parse_real_list(lambda_grid_text, "--lambda-grid");
            std::vector<SweepRow> rows(hs.size());
            parallel_for(hs.size(), [&](std::size_t i) {
                const PayoffEstimate e =
                    asymptotic_value_estimate(m, StageDuration(hs[i]), lambdas, resolution);
                rows[i] = SweepRow{hs[i], e.lambda, e.value, mode_name(e.mode),
                                   "bound=" + format_real(e.bound) + ";trend=" + format_real(e.trend),
                                   std::nullopt};
            });
            std::ostringstream csv;
            write_sweep_csv(csv, rows);
            write_output(csv_path, csv.str(), out);
            return 0;
        }
        if (verify->parsed()) {
            SuiteOptions opt;
            if (seed) opt.seed = *seed;
            opt.n_traj = trajectories;
            const auto reports = run_suite(parse_suite(suite), opt);
            std::size_t failed = 0;
            for (const auto& r : reports) {
                out << format_report(r) << "\n";
                failed += r.passed ? 0 : 1;
            }
            out << reports.size() - failed << "/" << reports.size() << " checks passed, seed="
                << opt.seed << "\n";
            return failed ? kExitCheckFailed : 0;
        }
        if (example->parsed()) {
            write_output(output, serialize_pomdp(figure1_model()), out);
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace stagedur
