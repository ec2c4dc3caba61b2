// Front end for the message-sparse controller pipeline: synthesize a gain,
// factor it into an encoder/decoder pair, replay it against sampled noise,
// and compare the three sparsity objectives on the built-in drone instance.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lrc/io.hpp"
#include "lrc/simulate.hpp"
#include "lrc/synthesis.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;

struct Cli {
    std::string problem_path;
    std::string gain_path;
    std::string factorization_path;
    std::string objective;
    std::string out_dir = ".";
    double delta = -1.0;
    double epsilon = -1.0;
    int iters = -1;
    std::int64_t seed = -1;
    int draws = 40;
    int horizon_override = -1;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void apply_option_flags(const Cli& cli, lrc::SolverOptions& opts) {
    if (cli.delta >= 0.0) opts.delta = cli.delta;
    if (cli.epsilon >= 0.0) opts.epsilon = cli.epsilon;
    if (cli.iters >= 0) opts.max_reweight_iters = cli.iters;
    if (cli.seed >= 0) opts.seed = static_cast<std::uint64_t>(cli.seed);
    const char* verbose = std::getenv("LRC_VERBOSE");
    if (verbose != nullptr && std::string(verbose) != "0" && std::string(verbose) != "") opts.verbose = true;
}

lrc::Objective parse_objective(const std::string& name) {
    if (name == "rank") return lrc::Objective::MessageRank;
    if (name == "sensor") return lrc::Objective::SensorNorm;
    if (name == "actuator") return lrc::Objective::ActuatorNorm;
    if (name == "multipair") return lrc::Objective::MultiPairRank;
    throw lrc::ParseError("unknown objective '" + name + "'");
}

// Keeps only the first `horizon` steps of a loaded problem.  Constraint sets
// beyond the new final time are dropped, so terminal waypoints disappear;
// this is a scaling knob for quick runs, not an equivalent problem.
void truncate_horizon(lrc::SynthesisProblem& p, int horizon) {
    if (horizon < 1 || horizon > p.system.T) throw lrc::DimensionError("horizon override must lie in [1, T]");
    p.system.T = horizon;
    p.system.A.resize(horizon);
    p.system.B.resize(horizon);
    p.system.C.resize(horizon + 1);
    p.safety.X.resize(horizon);
    p.safety.U.resize(horizon);
    p.safety.W.resize(horizon);
    p.safety.V.resize(horizon);
    p.validate();
}

std::string ensure_out_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
    return dir;
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

lrc::RunManifest make_manifest(const char* subcommand, const std::string& input, const Cli& cli,
                               const lrc::SolverOptions& opts) {
    lrc::RunManifest m;
    m.subcommand = subcommand;
    m.input_path = input;
    m.output_dir = cli.out_dir;
    m.delta = opts.delta;
    m.epsilon = opts.epsilon;
    m.iterations = opts.max_reweight_iters;
    m.seed = opts.seed;
    return m;
}

int cmd_synthesize(const Cli& cli) {
    lrc::SynthesisProblem p = lrc::load_problem(cli.problem_path);
    if (cli.horizon_override > 0) truncate_horizon(p, cli.horizon_override);
    if (!cli.objective.empty()) p.objective = parse_objective(cli.objective);
    apply_option_flags(cli, p.options);

    const auto start = std::chrono::steady_clock::now();
    const lrc::SynthesisResult res = lrc::synthesize(p);
    const double wall = seconds_since(start);

    const std::string dir = ensure_out_dir(cli.out_dir);
    lrc::save_result(res, join(dir, "result.json"));
    lrc::save_gain(res.K, join(dir, "gain.json"));
    lrc::write_values_csv(join(dir, "spectrum.csv"), "sigma", res.singular_values);
    lrc::RunManifest m = make_manifest("synthesize", cli.problem_path, cli, p.options);
    m.add_artifact(dir, "result.json");
    m.add_artifact(dir, "gain.json");
    m.add_artifact(dir, "spectrum.csv");
    if (!res.group_norms.empty()) {
        lrc::Vector g = Eigen::Map<const lrc::Vector>(res.group_norms.data(),
                                                      static_cast<lrc::Index>(res.group_norms.size()));
        lrc::write_values_csv(join(dir, "group_norms.csv"), "row_norm", g);
        m.add_artifact(dir, "group_norms.csv");
    }
    lrc::save_manifest(m, join(dir, "manifest.json"));

    std::cout << "objective:      " << lrc::objective_name(res.objective) << "\n"
              << "messages:       " << res.message_count << "\n"
              << "reweight passes: " << res.reweight_iterations << "\n"
              << "solver status:  " << lrc::to_string(res.solver_status) << "\n"
              << "eq residual:    " << res.eq_residual << "\n"
              << "solve time:     " << wall << " s\n"
              << "artifacts in:   " << dir << "\n";
    return kExitOk;
}

int cmd_factorize(const Cli& cli) {
    const lrc::BlockLowerTriangular K = lrc::load_gain(cli.gain_path);
    // Same relative threshold the synthesis counts use, so a synthesized
    // gain factors into exactly message_count rows by default.
    double eps = lrc::SolverOptions().epsilon;
    if (cli.epsilon >= 0.0) eps = cli.epsilon;

    const auto start = std::chrono::steady_clock::now();
    const lrc::CausalFactorization f = lrc::causal_factorize(K, eps);
    const double wall = seconds_since(start);

    const std::string dir = ensure_out_dir(cli.out_dir);
    lrc::save_factorization(f, join(dir, "factorization.json"));
    lrc::SolverOptions opts;
    opts.epsilon = eps;
    lrc::RunManifest m = make_manifest("factorize", cli.gain_path, cli, opts);
    m.add_artifact(dir, "factorization.json");
    lrc::save_manifest(m, join(dir, "manifest.json"));

    std::cout << "band:     " << f.band << "\n";
    std::cout << "schedule:";
    for (int t : f.times) std::cout << " " << t;
    std::cout << "\n"
              << "time:     " << wall << " s\n"
              << "artifacts in: " << dir << "\n";
    return kExitOk;
}

int cmd_simulate(const Cli& cli) {
    lrc::SynthesisProblem p = lrc::load_problem(cli.problem_path);
    if (cli.horizon_override > 0) truncate_horizon(p, cli.horizon_override);
    lrc::SolverOptions opts = p.options;
    apply_option_flags(cli, opts);
    if (cli.draws < 0) throw lrc::ParseError("--draws must be nonnegative");

    const lrc::CausalFactorization f = lrc::load_factorization(cli.factorization_path, p.system.T);
    if (f.n_u != p.system.n_u || f.n_y != p.system.n_y ||
        f.D.rows() != (p.system.T + 1) * p.system.n_u || f.E.cols() != (p.system.T + 1) * p.system.n_y) {
        throw lrc::DimensionError("factorization does not match the problem dimensions");
    }

    const std::string dir = ensure_out_dir(cli.out_dir);
    lrc::RunManifest m = make_manifest("simulate", cli.problem_path, cli, opts);
    m.iterations = cli.draws;

    lrc::Json report;
    report["draws_per_mode"] = cli.draws;
    lrc::Json per_draw = lrc::Json::array();
    std::string positions = "mode,draw,t,x1,x2\n";
    double worst = std::numeric_limits<double>::infinity();
    int failures = 0;
    int total_messages = 0;

    const std::pair<lrc::NoiseMode, const char*> modes[] = {{lrc::NoiseMode::Uniform, "uniform"},
                                                            {lrc::NoiseMode::Vertex, "vertex"}};
    for (const auto& [mode, mode_name] : modes) {
        // Distinct seeds per mode keep the two batches independent.
        const std::uint64_t mode_seed = opts.seed + (mode == lrc::NoiseMode::Vertex ? 1 : 0);
        const std::vector<lrc::NoiseDraw> draws = lrc::sample_noise(p, mode, cli.draws, mode_seed);
        for (int d = 0; d < cli.draws; ++d) {
            const lrc::NoiseDraw& noise = draws[static_cast<size_t>(d)];
            const lrc::Trajectory traj = lrc::simulate_distributed(p, f, noise.x0, noise.w, noise.v);
            const lrc::SafetyReport safety = lrc::check_safety(p, traj);

            char name[64];
            std::snprintf(name, sizeof(name), "traj_%s_%02d.csv", mode_name, d);
            lrc::write_trajectory_csv(traj, join(dir, name));
            m.add_artifact(dir, name);
            std::snprintf(name, sizeof(name), "messages_%s_%02d.csv", mode_name, d);
            lrc::write_messages_csv(traj.message_log, join(dir, name));
            m.add_artifact(dir, name);

            for (lrc::Index t = 0; t < traj.x.cols(); ++t) {
                positions += std::string(mode_name) + "," + std::to_string(d) + "," + std::to_string(t) + "," +
                             lrc::io_detail::fmt(traj.x(0, t)) + "," + lrc::io_detail::fmt(traj.x(1, t)) + "\n";
            }
            worst = std::min(worst, safety.worst_margin);
            failures += safety.pass ? 0 : 1;
            total_messages += static_cast<int>(traj.message_log.entries.size());
            per_draw.push_back(lrc::Json{{"mode", mode_name},
                                         {"draw", d},
                                         {"pass", safety.pass},
                                         {"worst_margin", safety.worst_margin},
                                         {"messages", traj.message_log.entries.size()}});
        }
    }

    const bool pass = failures == 0;
    report["per_draw"] = std::move(per_draw);
    report["pass"] = pass;
    report["failures"] = failures;
    report["worst_margin"] = cli.draws > 0 ? worst : 0.0;
    report["messages_per_rollout"] = f.band;
    lrc::io_detail::write_file(join(dir, "positions.csv"), positions);
    m.add_artifact(dir, "positions.csv");
    lrc::io_detail::write_file(join(dir, "safety_report.json"), report.dump(2) + "\n");
    m.add_artifact(dir, "safety_report.json");
    lrc::save_manifest(m, join(dir, "manifest.json"));

    std::cout << "draws:        " << 2 * cli.draws << " (" << cli.draws << " uniform + " << cli.draws << " vertex)\n"
              << "messages:     " << f.band << " per rollout (" << total_messages << " total)\n"
              << "safety:       " << (pass ? "pass" : "FAIL") << " (" << failures << " violating draws)\n";
    if (cli.draws > 0) std::cout << "worst margin: " << report["worst_margin"].get<double>() << "\n";
    std::cout << "artifacts in: " << dir << "\n";
    return pass ? kExitOk : kExitInfeasible;
}

int cmd_benchmark(const Cli& cli) {
    const int horizon = cli.horizon_override > 0 ? cli.horizon_override : 20;
    const lrc::Objective objectives[] = {lrc::Objective::MessageRank, lrc::Objective::SensorNorm,
                                         lrc::Objective::ActuatorNorm};
    int counts[3] = {0, 0, 0};
    double times[3] = {0.0, 0.0, 0.0};
    std::exception_ptr errors[3] = {nullptr, nullptr, nullptr};

    lrc::SolverOptions opts;
    {
        lrc::SynthesisProblem probe = lrc::drone_benchmark_problem(horizon);
        apply_option_flags(cli, probe.options);
        opts = probe.options;
    }
    // The three objectives are independent solves over the same instance;
    // run them concurrently when the machine has cores to spare.
    auto run_one = [&](int i) {
        try {
            lrc::SynthesisProblem p = lrc::drone_benchmark_problem(horizon);
            p.objective = objectives[i];
            apply_option_flags(cli, p.options);
            const auto start = std::chrono::steady_clock::now();
            const lrc::SynthesisResult res = lrc::synthesize(p);
            times[i] = seconds_since(start);
            counts[i] = res.message_count;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (std::thread::hardware_concurrency() >= 3) {
        std::vector<std::thread> workers;
        for (int i = 0; i < 3; ++i) workers.emplace_back(run_one, i);
        for (auto& w : workers) w.join();
    } else {
        for (int i = 0; i < 3; ++i) run_one(i);
    }
    for (int i = 0; i < 3; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        std::cout << lrc::objective_name(objectives[i]) << ": " << counts[i] << " messages in " << times[i] << " s\n";
    }

    auto reduction = [&](int baseline) {
        return baseline > 0 ? 100.0 * (baseline - counts[0]) / baseline : 0.0;
    };
    const double vs_sensor = reduction(counts[1]);
    const double vs_actuator = reduction(counts[2]);

    std::printf("\n%-10s %10s %12s %16s\n", "objective", "messages", "solve (s)", "reduction vs it");
    std::printf("%-10s %10d %12.2f %16s\n", "rank", counts[0], times[0], "-");
    std::printf("%-10s %10d %12.2f %15.2f%%\n", "sensor", counts[1], times[1], vs_sensor);
    std::printf("%-10s %10d %12.2f %15.2f%%\n", "actuator", counts[2], times[2], vs_actuator);
    std::printf("\nrank objective sends %.2f%%-%.2f%% fewer messages than the norm baselines\n",
                std::min(vs_sensor, vs_actuator), std::max(vs_sensor, vs_actuator));

    const std::string dir = ensure_out_dir(cli.out_dir);
    lrc::Json j;
    j["horizon"] = horizon;
    j["messages"] = {{"rank", counts[0]}, {"sensor", counts[1]}, {"actuator", counts[2]}};
    j["reduction_percent"] = {{"vs_sensor", vs_sensor}, {"vs_actuator", vs_actuator}};
    j["ordering_consistent"] = counts[0] <= counts[1] && counts[0] <= counts[2];
    lrc::io_detail::write_file(join(dir, "benchmark.json"), j.dump(2) + "\n");
    lrc::RunManifest m = make_manifest("benchmark", "(built-in drone instance)", cli, opts);
    m.add_artifact(dir, "benchmark.json");
    lrc::save_manifest(m, join(dir, "manifest.json"));
    std::cout << "artifacts in: " << dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimum-message safe controller toolkit"};
    app.require_subcommand(1);
    app.footer("Set LRC_VERBOSE=1 to stream solver progress to stderr.");
    Cli cli;

    auto add_solver_flags = [&](CLI::App* sub) {
        sub->add_option("--delta", cli.delta, "reweighting smoothing parameter");
        sub->add_option("--epsilon", cli.epsilon, "numerical rank threshold");
        sub->add_option("--iters", cli.iters, "maximum reweighting passes");
        sub->add_option("--seed", cli.seed, "random seed");
        sub->add_option("--out", cli.out_dir, "output directory (default: current)");
        sub->add_option("--horizon-override", cli.horizon_override, "shorten the horizon for quick runs");
    };

    CLI::App* synth = app.add_subcommand("synthesize", "solve for a message-sparse safe controller");
    synth->add_option("problem", cli.problem_path, "problem JSON file")->required();
    synth->add_option("--objective", cli.objective, "rank | sensor | actuator | multipair")
        ->check(CLI::IsMember({"rank", "sensor", "actuator", "multipair"}));
    add_solver_flags(synth);

    CLI::App* fact = app.add_subcommand("factorize", "split a gain into encoder/decoder with a send schedule");
    fact->add_option("gain", cli.gain_path, "gain JSON file")->required();
    fact->add_option("--epsilon", cli.epsilon, "numerical rank threshold");
    fact->add_option("--out", cli.out_dir, "output directory (default: current)");

    CLI::App* sim = app.add_subcommand("simulate", "replay the message-passing controller against sampled noise");
    sim->add_option("problem", cli.problem_path, "problem JSON file")->required();
    sim->add_option("factorization", cli.factorization_path, "factorization JSON file")->required();
    sim->add_option("--draws", cli.draws, "noise draws per mode (uniform and vertex)");
    add_solver_flags(sim);

    CLI::App* bench = app.add_subcommand("benchmark", "compare the three objectives on the drone instance");
    add_solver_flags(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (synth->parsed()) return cmd_synthesize(cli);
        if (fact->parsed()) return cmd_factorize(cli);
        if (sim->parsed()) return cmd_simulate(cli);
        if (bench->parsed()) return cmd_benchmark(cli);
    } catch (const lrc::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const lrc::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const lrc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitInput;
}
