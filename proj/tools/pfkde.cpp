// pfkde command-line front end.
//
// Every subcommand reads one JSON config, wires seeds and thread caps, runs
// the corresponding library operation, and writes CSV/JSON artifacts into an
// output directory. Reruns with the same config are byte-identical.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 acceptance-check failure in verify modes.

#include "pfkde/pfkde.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace pfkde;

struct CliOptions {
    std::string config_path;
    std::string out_dir;                // empty means config/default
    std::optional<std::uint64_t> seed;  // --seed override
    int threads = 0;                    // 0 means hardware default
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file: " + path);
    }
    return json::parse(in);
}

/// Seed precedence: --seed flag, then PFKDE_SEED, then the config field,
/// then a fixed default so every run is reproducible without any input.
std::uint64_t resolve_seed(const CliOptions& opt, const json& cfg) {
    if (opt.seed) return *opt.seed;
    if (const char* env = std::getenv("PFKDE_SEED")) {
        return std::stoull(env);
    }
    if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
    return 1;
}

std::filesystem::path resolve_out_dir(const CliOptions& opt, const json& cfg) {
    std::filesystem::path dir;
    if (!opt.out_dir.empty()) {
        dir = opt.out_dir;
    } else if (cfg.contains("output")) {
        dir = cfg.at("output").get<std::string>();
    } else {
        dir = ".";
    }
    std::filesystem::create_directories(dir);
    return dir;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) {
        throw std::invalid_argument("cannot open output file: " + path.string());
    }
    return os;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

LinearGaussianModel model_from_config(const json& cfg) {
    if (!cfg.contains("model")) {
        throw std::invalid_argument("config is missing \"model\"");
    }
    return model_from_json(cfg.at("model"));
}

BandwidthSchedule schedule_from_config(const json& cfg, int dim) {
    BandwidthSchedule s;
    s.dim = dim;
    if (cfg.contains("schedule")) {
        const json& j = cfg.at("schedule");
        if (j.contains("alpha")) s.alpha = j.at("alpha").get<double>();
        if (j.contains("beta")) s.beta = j.at("beta").get<int>();
        if (j.contains("m")) s.deriv_order = j.at("m").get<int>();
    }
    if (s.alpha <= 0.0 || s.beta < 1 || s.deriv_order < 0) {
        throw std::invalid_argument("schedule requires alpha > 0, beta >= 1, m >= 0");
    }
    return s;
}

Kernel kernel_from_config(const json& cfg, int dim) {
    const std::string name =
        cfg.contains("kernel") ? cfg.at("kernel").get<std::string>() : "gaussian";
    return make_kernel(name, dim);
}

int int_field(const json& cfg, const char* key, int fallback) {
    return cfg.contains(key) ? cfg.at(key).get<int>() : fallback;
}

/// Tensor grid over [lo, hi] with `points` nodes per axis, last coordinate
/// fastest. d = 1 collapses to an ordinary 1-D grid.
std::vector<Vector> tensor_grid(const Vector& lo, const Vector& hi, int points) {
    const int d = static_cast<int>(lo.size());
    if (points < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
    long long total = 1;
    for (int j = 0; j < d; ++j) total *= points;
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (long long k = 0; k < total; ++k) {
        Vector x(d);
        for (int j = 0; j < d; ++j) {
            x(j) = lo(j) + (hi(j) - lo(j)) * idx[static_cast<std::size_t>(j)] /
                               (points - 1);
        }
        out.push_back(std::move(x));
        for (int j = d - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < points) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    return out;
}

int cmd_simulate(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const auto model = model_from_config(cfg);
    const int T = int_field(cfg, "T", 100);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);

    const auto traj = simulate_trajectory(to_state_space(model), T, seed);
    auto os = open_out(out_dir / "trajectory.csv");
    write_trajectory_csv(traj, os);
    return 0;
}

int cmd_filter(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const auto model = model_from_config(cfg);
    const int T = int_field(cfg, "T", 100);
    const int n = int_field(cfg, "particles", 1000);
    const bool keep = cfg.contains("keep_intermediate")
                          ? cfg.at("keep_intermediate").get<bool>()
                          : true;
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);

    // One base seed drives both the synthetic trajectory and the filter so a
    // config fully determines the artifact set.
    RngStream root(seed);
    const auto ssm = to_state_space(model);
    const auto traj = simulate_trajectory(ssm, T, root.derive(1).seed());
    const auto run = run_filter(ssm, traj.observations, n, root.derive(2).seed(), keep);
    const auto beliefs = kalman_run(model, traj.observations, kalman_initial(model));

    {
        auto os = open_out(out_dir / "trajectory.csv");
        write_trajectory_csv(traj, os);
    }
    {
        auto os = open_out(out_dir / "filter_run.csv");
        write_filter_run_csv(run, os);
    }
    {
        auto os = open_out(out_dir / "filter_summary.csv");
        write_filter_summary_csv(run, os);
    }
    write_json_file(out_dir / "kalman.json", kalman_to_json(beliefs.back()));
    return 0;
}

int cmd_kde(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const auto model = model_from_config(cfg);
    const int d = model.dim();
    const int T = int_field(cfg, "T", 100);
    const int n = int_field(cfg, "particles", 1000);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);
    const auto schedule = schedule_from_config(cfg, d);
    const auto kernel = kernel_from_config(cfg, d);

    RngStream root(seed);
    const auto ssm = to_state_space(model);
    const auto traj = simulate_trajectory(ssm, T, root.derive(1).seed());
    const auto run = run_filter(ssm, traj.observations, n, root.derive(2).seed(), false);
    const auto est = build_estimate(run.steps.back().resampled, kernel,
                                    bandwidth(schedule, n));

    // Evaluation grid: explicit in the config, otherwise a Kalman envelope
    // (one-dimensional models only).
    Vector lo(d), hi(d);
    int points = 0;
    if (cfg.contains("grid")) {
        const json& g = cfg.at("grid");
        const auto vlo = g.at("lo").get<std::vector<double>>();
        const auto vhi = g.at("hi").get<std::vector<double>>();
        if (static_cast<int>(vlo.size()) != d || static_cast<int>(vhi.size()) != d) {
            throw std::invalid_argument("grid lo/hi must have one entry per dimension");
        }
        for (int j = 0; j < d; ++j) {
            lo(j) = vlo[static_cast<std::size_t>(j)];
            hi(j) = vhi[static_cast<std::size_t>(j)];
        }
        points = g.contains("points") ? g.at("points").get<int>() : 201;
    } else if (d == 1) {
        const auto beliefs = kalman_run(model, traj.observations, kalman_initial(model));
        const auto [a, b] = kalman_envelope(beliefs);
        lo(0) = a;
        hi(0) = b;
        points = 512;
    } else {
        throw std::invalid_argument("kde: multivariate configs must supply \"grid\"");
    }

    const auto grid = tensor_grid(lo, hi, points);
    const auto values = eval_estimate(est, grid);
    std::vector<double> deriv;
    if (schedule.deriv_order > 0) {
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        if (cfg.contains("deriv_index")) {
            idx = cfg.at("deriv_index").get<std::vector<int>>();
        } else if (d == 1) {
            idx[0] = schedule.deriv_order;
        } else {
            throw std::invalid_argument("kde: multivariate derivative needs \"deriv_index\"");
        }
        deriv = eval_derivative_estimate(est, idx, grid);
    }
    auto os = open_out(out_dir / "density.csv");
    write_density_csv(grid, values, deriv, os);
    return 0;
}

int cmd_mise(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const auto model = model_from_config(cfg);
    const int T = int_field(cfg, "T", 10);
    const int reps = int_field(cfg, "replications", 100);
    const auto counts = cfg.at("particle_counts").get<std::vector<long long>>();
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);
    const auto schedule = schedule_from_config(cfg, model.dim());
    const auto kernel = kernel_from_config(cfg, model.dim());

    const auto report =
        mise_monte_carlo(model, kernel, schedule, counts, T, reps, seed, opt.threads);
    write_json_file(out_dir / "mise_report.json", mise_report_to_json(report));
    auto os = open_out(out_dir / "mise_reps.csv");
    write_mise_reps_csv(report, os);
    return 0;
}

int cmd_bounds(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const auto model = model_from_config(cfg);
    if (model.dim() != 1) {
        throw std::invalid_argument("bounds: implemented for one-dimensional models");
    }
    const int T = int_field(cfg, "T", 10);
    const int grid_points = int_field(cfg, "grid_points", 2048);
    const auto counts = cfg.at("particle_counts").get<std::vector<long long>>();
    if (counts.empty()) {
        throw std::invalid_argument("bounds: particle_counts is empty");
    }
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);
    const auto schedule = schedule_from_config(cfg, 1);
    const auto kernel = kernel_from_config(cfg, 1);

    RngStream root(seed);
    const auto ssm = to_state_space(model);
    const auto traj = simulate_trajectory(ssm, T, root.derive(1).seed());
    const auto beliefs = kalman_run(model, traj.observations, kalman_initial(model));

    // Exact normalizers from the grid oracle, one per assimilation step.
    const auto [glo, ghi] = kalman_envelope(beliefs);
    const KalmanBelief prior = kalman_initial(model);
    const double prior_sd = std::sqrt(prior.sigma(0, 0));
    const auto initial = make_grid_density(
        [&](double x) {
            const double z = (x - prior.mu(0)) / prior_sd;
            return -0.5 * z * z - std::log(prior_sd) -
                   0.5 * std::log(2.0 * 3.14159265358979323846);
        },
        glo, ghi, grid_points);
    const auto grid_steps = grid_filter_run(ssm, traj.observations, initial, opt.threads);
    std::vector<double> normalizers;
    normalizers.reserve(grid_steps.size());
    for (const auto& s : grid_steps) normalizers.push_back(s.normalizer);

    const double gsup = gaussian_observation_sup(model.R);
    const std::vector<double> gsups(normalizers.size(), gsup);
    const auto kb = gaussian_Kb_constants(model.Q, schedule.beta);
    const auto c_seq = ct_recursion(gsups, normalizers);
    const auto L_seq = Lt_recursion(gsups, kb.L_Kb, normalizers);

    std::vector<int> didx(1, schedule.deriv_order);
    const auto constants = kernel_l2_norms(kernel, {didx});
    const double knorm = schedule.deriv_order == 0 ? constants.l2_norm
                                                   : constants.deriv_l2_norm.at(didx);

    BoundReport report;
    report.c_sequence = c_seq;
    report.L_sequence = L_seq;
    for (std::size_t t = 0; t < L_seq.size(); ++t) {
        report.C_sequence.push_back(
            theorem_bound(constants.A, L_seq[t], schedule.alpha, schedule.beta, 1,
                          schedule.deriv_order, c_seq[t + 1], knorm, counts.front())
                .C);
    }
    for (long long n : counts) {
        const auto tb = theorem_bound(constants.A, L_seq.back(), schedule.alpha,
                                      schedule.beta, 1, schedule.deriv_order,
                                      c_seq.back(), knorm, n);
        report.bound_values.emplace_back(n, tb.bound);
    }
    report.inputs = {{"A", constants.A},
                     {"L_Kb", kb.L_Kb},
                     {"lambda_min", kb.lambda_min},
                     {"alpha", schedule.alpha},
                     {"beta", schedule.beta},
                     {"m", schedule.deriv_order},
                     {"kernel_norm", knorm},
                     {"g_sup", gsup},
                     {"T", T},
                     {"seed", seed}};
    write_json_file(out_dir / "bound_report.json", bound_report_to_json(report));
    return 0;
}

int cmd_verify_kernel(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const int d = int_field(cfg, "dim", 1);
    const int ell = int_field(cfg, "order", 1);
    const int beta = int_field(cfg, "beta", 1);
    const auto out_dir = resolve_out_dir(opt, cfg);
    const auto kernel = kernel_from_config(cfg, d);

    const auto order = verify_order(kernel, ell);
    auto constants = kernel_l2_norms(kernel, {});
    constants.A = estimate_A_constant(kernel, beta);

    json j;
    j["kernel"] = kernel.name;
    j["dim"] = d;
    j["constants"] = kernel_constants_to_json(constants);
    j["order_check"] = {{"ell", order.ell},
                        {"integral", order.integral},
                        {"passed", order.passed}};
    json moments = json::array();
    for (const auto& [idx, value] : order.moments) {
        moments.push_back({{"index", idx}, {"value", value}});
    }
    j["order_check"]["moments"] = moments;
    write_json_file(out_dir / "kernel_report.json", j);

    if (!order.passed) {
        std::cerr << "verify-kernel: order " << ell << " check failed for "
                  << kernel.name << " (d=" << d << ")\n";
        return 4;
    }
    return 0;
}

int cmd_lemma3(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const auto omegas = cfg.at("omega_grid").get<std::vector<double>>();
    const long long n = cfg.at("n").get<long long>();
    const int reps = int_field(cfg, "replications", 10000);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);

    // Standard normal reference sample; phi(w) = exp(-w^2/2).
    const auto sampler = [](RngStream& rng) { return rng.normal(); };
    const auto phi = [](double w) {
        return std::complex<double>(std::exp(-0.5 * w * w), 0.0);
    };
    const auto report = verify_lemma3(sampler, phi, omegas, n, reps, seed);
    write_json_file(out_dir / "lemma3_report.json", lemma3_report_to_json(report));

    if (!report.passed) {
        std::cerr << "lemma3: at least one identity left its 4-standard-error band\n";
        return 4;
    }
    return 0;
}

int cmd_table_vi(const CliOptions& opt) {
    const json cfg = load_config(opt.config_path);
    LinearGaussianModel model;
    if (cfg.contains("model")) {
        model = model_from_json(cfg.at("model"));
    } else {
        model.F = Matrix::Identity(2, 2);
        model.H = 2.0 * Matrix::Identity(2, 2);
        model.Q = 2.0 * Matrix::Identity(2, 2);
        model.R = Matrix::Identity(2, 2);
        model.mu0 = Vector::Zero(2);
        model.Sigma0 = Matrix::Identity(2, 2);
        model.validate();
    }
    const int d = model.dim();
    const int T = int_field(cfg, "T", 100);
    const int grid_points = int_field(cfg, "grid_points", 101);
    std::vector<long long> counts{10, 100, 1000};
    if (cfg.contains("particle_counts")) {
        counts = cfg.at("particle_counts").get<std::vector<long long>>();
    }
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const auto out_dir = resolve_out_dir(opt, cfg);
    const auto schedule = schedule_from_config(cfg, d);
    const auto kernel = kernel_from_config(cfg, d);
    const auto ssm = to_state_space(model);

    auto os = open_out(out_dir / "table_vi.csv");
    os << "n";
    for (int j = 1; j <= d; ++j) os << ",mu_hat_" << j;
    for (int j = 1; j <= d; ++j) os << ",mu_" << j;
    for (int j = 1; j <= d; ++j)
        for (int k = j; k <= d; ++k) os << ",sigma_hat_" << j << k;
    for (int j = 1; j <= d; ++j)
        for (int k = j; k <= d; ++k) os << ",sigma_" << j << k;
    os << "\n";

    ParticleCloud final_cloud;
    long long final_n = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        // Each row is an independent experiment: fresh trajectory, fresh
        // filter, like the source table whose row means are unrelated.
        RngStream row = RngStream(seed).derive(static_cast<std::uint64_t>(i));
        const auto traj = simulate_trajectory(ssm, T, row.derive(1).seed());
        const auto beliefs = kalman_run(model, traj.observations, kalman_initial(model));
        const auto run = run_filter(ssm, traj.observations,
                                    static_cast<int>(counts[i]),
                                    row.derive(2).seed(), false);
        const Vector mu_hat = cloud_mean(run.steps.back().resampled);
        const Matrix sig_hat = cloud_covariance(run.steps.back().resampled);
        const auto& kf = beliefs.back();

        os << counts[i];
        for (int j = 0; j < d; ++j) os << "," << num_str(mu_hat(j));
        for (int j = 0; j < d; ++j) os << "," << num_str(kf.mu(j));
        for (int j = 0; j < d; ++j)
            for (int k = j; k < d; ++k) os << "," << num_str(sig_hat(j, k));
        for (int j = 0; j < d; ++j)
            for (int k = j; k < d; ++k) os << "," << num_str(kf.sigma(j, k));
        os << "\n";

        if (counts[i] >= final_n) {
            final_n = counts[i];
            final_cloud = run.steps.back().resampled;
        }
    }

    // Density surface of the last filtering distribution for the largest
    // particle count, on a tensor grid around the cloud moments.
    const auto est = build_estimate(final_cloud, kernel, bandwidth(schedule, final_n));
    const Vector mu = cloud_mean(final_cloud);
    const Matrix sig = cloud_covariance(final_cloud);
    Vector lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
        const double spread = 4.0 * std::sqrt(std::max(sig(j, j), 1e-12));
        lo(j) = mu(j) - spread;
        hi(j) = mu(j) + spread;
    }
    const auto grid = tensor_grid(lo, hi, grid_points);
    const auto values = eval_estimate(est, grid);
    auto osd = open_out(out_dir / "fig2_density.csv");
    write_density_csv(grid, values, {}, osd);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"particle-filter kernel density estimation toolkit"};
    app.require_subcommand(1);

    CliOptions opt;
    std::uint64_t seed_arg = 0;
    bool seed_set = false;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON config file")->required();
        sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed_arg, "seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", opt.threads, "worker thread cap (0 = hardware)");
    };

    const std::vector<std::pair<std::string, int (*)(const CliOptions&)>> commands = {
        {"simulate", cmd_simulate},   {"filter", cmd_filter},
        {"kde", cmd_kde},             {"mise", cmd_mise},
        {"bounds", cmd_bounds},       {"verify-kernel", cmd_verify_kernel},
        {"lemma3", cmd_lemma3},       {"table-vi", cmd_table_vi}};
    for (const auto& [name, fn] : commands) {
        add_common(app.add_subcommand(name));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (seed_set) opt.seed = seed_arg;

    try {
        for (const auto& [name, fn] : commands) {
            if (app.get_subcommand(name)->parsed()) return fn(opt);
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
