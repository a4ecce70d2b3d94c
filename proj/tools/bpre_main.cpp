// Batch front door: model configs in, CSV tables + JSON manifests out.
// Exit codes: 0 success, 1 validation/usage error, 2 numeric-guard error.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpre/bpre.hpp"
#include "bpre/model_config.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

struct CommonArgs {
    std::string model_path;
    std::string out_dir = ".";
    int k = 1;
    std::uint64_t seed = 1;
    long long replicates = 100000;
    int cap = 4096;
};

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
    return buf;
}

json base_manifest(const std::string& subcommand, const bpre::EnvironmentModel& model,
                   const CommonArgs& common) {
    json m;
    m["subcommand"] = subcommand;
    m["model"] = {{"label", model.label()}, {"hash", bpre::model_hash(model)}};
    m["seed"] = common.seed;
    m["version"] = kVersion;
    m["generated_at"] = iso_timestamp();
    m["parameters"] = json::object();
    return m;
}

void write_manifest(const json& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << manifest.dump(2) << "\n";
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    bpre::require(out.good(), bpre::errc::config_error, "cannot write " + path.string());
    return out;
}

std::string regime_name(bpre::RateRegime r) {
    return r == bpre::RateRegime::linear ? "linear" : "smooth";
}

std::string regime_name(bpre::ConstantEstimate::Regime r) {
    switch (r) {
        case bpre::ConstantEstimate::Regime::sub: return "sub";
        case bpre::ConstantEstimate::Regime::crit: return "crit";
        case bpre::ConstantEstimate::Regime::super: return "super";
    }
    return "?";
}

int run_rates(const CommonArgs& common, int grid) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const bpre::CriticalConstants constants = bpre::critical_constants(model, common.k);
    const double mu = constants.mu;

    auto out = open_output(std::filesystem::path(common.out_dir) / "rates.csv");
    bpre::CsvWriter csv(out, {"theta", "chi_star", "lambda_star", "i_k", "regime",
                              "lambda_theta"});
    for (int i = 0; i < grid; ++i) {
        const double theta =
            mu * (0.02 + 0.96 * static_cast<double>(i) / std::max(1, grid - 1));
        const bpre::RatePoint pt = bpre::chi_star(model, constants, theta);
        const double ik = bpre::bansaye_rate(model, constants, theta);
        csv.field(pt.theta)
            .field(pt.chi_star)
            .field(pt.lambda_star)
            .field(ik)
            .field(regime_name(pt.regime))
            .field(pt.lambda_theta);
        csv.end_row();
    }

    json manifest = base_manifest("rates", model, common);
    manifest["parameters"] = {{"k", common.k}, {"grid", grid}};
    manifest["constants"] = {{"k", constants.k},           {"gamma_k", constants.gamma_k},
                             {"r_k", constants.r_k},       {"a_k", constants.a_k},
                             {"theta_k", constants.theta_k}, {"mu", constants.mu},
                             {"rho_k", constants.rho_k}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "rates_manifest.json");
    return 0;
}

int run_qtable(const CommonArgs& common, int depth) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const int J = std::min(depth, common.cap);
    const bpre::TruncatedKernel kernel = bpre::annealed_kernel(model, common.cap);
    const bpre::QTable table = bpre::q_table(kernel, model, common.k, J);
    auto out = open_output(std::filesystem::path(common.out_dir) / "qtable.csv");
    table.to_csv(out);
    json manifest = base_manifest("qtable", model, common);
    manifest["parameters"] = {{"k", common.k}, {"cap", common.cap}, {"depth", J}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "qtable_manifest.json");
    return 0;
}

int run_hmoments(const CommonArgs& common, double r, const std::vector<int>& ns) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    auto out = open_output(std::filesystem::path(common.out_dir) / "hmoments.csv");
    bpre::CsvWriter csv(out, {"n", "estimate", "stderr", "tilt", "replicates"});
    for (const int n : ns) {
        const bpre::McEstimate est =
            bpre::estimate_harmonic(model, common.k, n, r, common.replicates, common.seed);
        csv.field(n).field(est.mean).field(est.std_error).field(est.tilt).field(est.replicates);
        csv.end_row();
    }
    json manifest = base_manifest("hmoments", model, common);
    manifest["parameters"] = {{"k", common.k}, {"r", r}, {"n", ns},
                              {"replicates", common.replicates}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "hmoments_manifest.json");
    return 0;
}

int run_deviation(const CommonArgs& common, double theta, const std::vector<int>& ns,
                  std::optional<double> tilt) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const bpre::CriticalConstants constants = bpre::critical_constants(model, common.k);
    const double lambda = tilt ? *tilt : bpre::default_tilt(model, constants, theta);
    auto out = open_output(std::filesystem::path(common.out_dir) / "deviation.csv");
    bpre::CsvWriter csv(out, {"n", "estimate", "stderr", "tilt", "replicates"});
    for (const int n : ns) {
        const bpre::McEstimate est = bpre::estimate_lower_deviation(
            model, common.k, n, theta, lambda, common.replicates, common.seed);
        if (est.degenerate)
            std::cerr << "warning: DegenerateIndicator: no replicate hit the event at n = "
                      << n << "\n";
        csv.field(n).field(est.mean).field(est.std_error).field(est.tilt).field(est.replicates);
        csv.end_row();
    }
    json manifest = base_manifest("deviation", model, common);
    manifest["parameters"] = {{"k", common.k}, {"theta", theta}, {"tilt", lambda},
                              {"n", ns},       {"replicates", common.replicates}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "deviation_manifest.json");
    return 0;
}

int run_constants(const CommonArgs& common, std::optional<double> r_opt, int depth) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const double r_k = bpre::solve_r_k(model, common.k);
    bpre::LaplaceMcParams params;
    params.paths = common.replicates;
    params.seed = common.seed;

    bpre::ConstantEstimate est;
    double r = r_opt.value_or(r_k);
    if (!r_opt || std::abs(r - r_k) <= 1e-9 * std::max(1.0, r_k)) {
        est = bpre::constant_crit(model, common.k, params);
        r = r_k;
    } else if (r > r_k) {
        const bpre::TruncatedKernel kernel = bpre::annealed_kernel(model, common.cap);
        const bpre::QTable table =
            bpre::q_table(kernel, model, common.k, std::min(depth, common.cap));
        est = bpre::constant_super(table, r, r_k);
    } else {
        est = bpre::constant_sub(model, common.k, r, params);
    }

    auto out = open_output(std::filesystem::path(common.out_dir) / "constants.csv");
    bpre::CsvWriter csv(out, {"regime", "r", "value", "error", "method"});
    csv.field(regime_name(est.regime)).field(r).field(est.value).field(est.error).field(
        est.method);
    csv.end_row();
    json manifest = base_manifest("constants", model, common);
    manifest["parameters"] = {{"k", common.k},
                              {"r", r},
                              {"replicates", common.replicates},
                              {"depth", depth},
                              {"cap", common.cap}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "constants_manifest.json");
    return 0;
}

int run_identity(const CommonArgs& common, int depth) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const bpre::TruncatedKernel kernel =
        bpre::annealed_kernel(model, std::min(common.cap, 1024));
    const bpre::QTable table =
        bpre::q_table(kernel, model, common.k, std::min(depth, kernel.cap()));
    bpre::LaplaceMcParams params;
    params.paths = common.replicates;
    params.seed = common.seed;
    const bpre::IdentityResult res = bpre::identity_check(model, common.k, table, params);

    json report = {{"lhs", res.lhs},
                   {"rhs", res.rhs},
                   {"lhs_stderr", res.lhs_std_error},
                   {"rhs_stderr", res.rhs_std_error},
                   {"diff", res.diff},
                   {"sigma", res.diff_std_error},
                   {"numeric_bound", res.numeric_bound},
                   {"pass", res.pass}};
    auto out = open_output(std::filesystem::path(common.out_dir) / "identity.json");
    out << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    json manifest = base_manifest("identity", model, common);
    manifest["parameters"] = {{"k", common.k}, {"replicates", common.replicates},
                              {"depth", depth}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "identity_manifest.json");
    return 0;
}

int run_clt(const CommonArgs& common, const std::vector<int>& ns, int m_extra) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const auto reports =
        bpre::clt_series(model, common.k, ns, m_extra, common.replicates, common.seed);
    auto out = open_output(std::filesystem::path(common.out_dir) / "clt.csv");
    bpre::CsvWriter csv(out, {"n", "distance", "bound", "samples"});
    for (const auto& rep : reports) {
        csv.field(rep.n).field(rep.distance).field(rep.bound).field(rep.samples);
        csv.end_row();
    }
    json manifest = base_manifest("clt", model, common);
    manifest["parameters"] = {{"k", common.k}, {"n", ns}, {"m_extra", m_extra},
                              {"samples", common.replicates}};
    manifest["caveat"] = "W approximated by W_{n+m_extra}; residual depth bias unbounded";
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "clt_manifest.json");
    return 0;
}

int run_ratio(const CommonArgs& common, const std::vector<int>& ns, double a, double p) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const bpre::CriticalConstants constants = bpre::critical_constants(model, common.k);
    const double order = p <= 2.0 ? p - 1.0 : p / 2.0;
    const char* regime = order > constants.r_k    ? "super"
                         : order < constants.r_k ? "sub"
                                                 : "crit";
    auto out = open_output(std::filesystem::path(common.out_dir) / "ratio.csv");
    bpre::CsvWriter csv(out, {"n", "estimate", "stderr", "bound", "regime"});
    for (const int n : ns) {
        const bpre::RatioDeviation dev =
            bpre::ratio_deviation(model, common.k, n, a, p, common.replicates, common.seed);
        csv.field(n)
            .field(dev.estimate.mean)
            .field(dev.estimate.std_error)
            .field(dev.bound)
            .field(std::string(regime));
        csv.end_row();
    }
    json manifest = base_manifest("ratio", model, common);
    manifest["parameters"] = {{"k", common.k}, {"n", ns}, {"a", a}, {"p", p},
                              {"replicates", common.replicates}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "ratio_manifest.json");
    return 0;
}

int run_simulate(const CommonArgs& common, int horizon, double tilt) {
    const bpre::EnvironmentModel model = bpre::load_model(common.model_path);
    const bpre::TiltedEnvironment tilted(model, tilt);

    // per-generation mean of W_j, folded block by block
    const long long nblocks =
        (common.replicates + bpre::kMcBlockSize - 1) / bpre::kMcBlockSize;
    struct Block {
        std::vector<double> sum, sum_sq;
    };
    std::vector<Block> blocks(static_cast<std::size_t>(nblocks));
    bpre::parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bi) {
        Block block;
        block.sum.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
        block.sum_sq.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
        const long long first = static_cast<long long>(bi) * bpre::kMcBlockSize;
        const long long stop = std::min(common.replicates, first + bpre::kMcBlockSize);
        for (long long i = first; i < stop; ++i) {
            bpre::Rng rng = bpre::substream(common.seed, static_cast<std::uint64_t>(i));
            const bpre::Trajectory traj = bpre::simulate(tilted, common.k, horizon, rng);
            for (int j = 0; j <= horizon; ++j) {
                const double w =
                    static_cast<double>(traj.z[static_cast<std::size_t>(j)]) /
                    static_cast<double>(common.k) * std::exp(-traj.path.log_pi_at(j));
                block.sum[static_cast<std::size_t>(j)] += w;
                block.sum_sq[static_cast<std::size_t>(j)] += w * w;
            }
        }
        blocks[bi] = std::move(block);
    });

    auto out = open_output(std::filesystem::path(common.out_dir) / "simulate.csv");
    bpre::CsvWriter csv(out, {"n", "estimate", "stderr", "tilt", "replicates"});
    const double nrep = static_cast<double>(common.replicates);
    for (int j = 0; j <= horizon; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& b : blocks) {
            sum += b.sum[static_cast<std::size_t>(j)];
            sum_sq += b.sum_sq[static_cast<std::size_t>(j)];
        }
        const double mean = sum / nrep;
        const double var = std::max(0.0, (sum_sq - sum * sum / nrep) / (nrep - 1.0));
        csv.field(j)
            .field(mean)
            .field(std::sqrt(var / nrep))
            .field(tilt)
            .field(common.replicates);
        csv.end_row();
    }
    json manifest = base_manifest("simulate", model, common);
    manifest["parameters"] = {{"k", common.k}, {"n", horizon}, {"tilt", tilt},
                              {"replicates", common.replicates}};
    write_manifest(manifest, std::filesystem::path(common.out_dir) / "simulate_manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Harmonic moments and lower large deviations of supercritical "
                 "branching processes in i.i.d. random environments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonArgs common;
    std::vector<int> ns;
    double r = 1.0, theta = 0.25, a = 0.4, p = 2.0, tilt_value = 0.0;
    int grid = 100, depth = 2000, m_extra = 25, horizon = 20;
    std::optional<double> tilt_opt, r_opt;

    auto add_common = [&](CLI::App* cmd, bool needs_model = true) {
        auto* opt = cmd->add_option("--model", common.model_path, "model config (JSON)");
        if (needs_model) opt->required();
        cmd->add_option("--k", common.k, "initial population size");
        cmd->add_option("--seed", common.seed, "base seed for counter-derived substreams");
        cmd->add_option("--replicates", common.replicates, "Monte Carlo replicates");
        cmd->add_option("--cap", common.cap, "population cap of the exact kernel");
        cmd->add_option("--out", common.out_dir, "output directory");
    };

    auto* rates = app.add_subcommand("rates", "rate function table with constants header");
    add_common(rates);
    rates->add_option("--grid", grid, "theta grid points");

    auto* qtable = app.add_subcommand("qtable", "small-value coefficients q_{k,j}");
    add_common(qtable);
    qtable->add_option("--depth", depth, "table depth J");

    auto* hmoments = app.add_subcommand("hmoments", "Monte Carlo harmonic moments");
    add_common(hmoments);
    hmoments->add_option("--r", r, "harmonic order");
    hmoments->add_option("--n", ns, "generations (repeatable)")->required();

    auto* deviation = app.add_subcommand("deviation", "lower-deviation probabilities");
    add_common(deviation);
    deviation->add_option("--theta", theta, "deviation slope")->required();
    deviation->add_option("--n", ns, "generations (repeatable)")->required();
    double tilt_in = 0.0;
    auto* tilt_flag = deviation->add_option("--tilt", tilt_in, "environment tilt (<= 0)");

    auto* constants = app.add_subcommand("constants", "limit constants C(k,r)");
    add_common(constants);
    double r_in = 0.0;
    auto* r_flag = constants->add_option("--r", r_in, "order (defaults to r_k)");
    constants->add_option("--depth", depth, "q-table depth for the super regime");

    auto* identity = app.add_subcommand("identity", "critical-constant identity check");
    add_common(identity);
    identity->add_option("--depth", depth, "q-table depth");

    auto* clt = app.add_subcommand("clt", "CLT convergence-rate diagnostics");
    add_common(clt);
    clt->add_option("--n", ns, "generations (repeatable)")->required();
    clt->add_option("--m-extra", m_extra, "extra generations approximating W");

    auto* ratio = app.add_subcommand("ratio", "ratio-deviation probabilities and bound");
    add_common(ratio);
    ratio->add_option("--n", ns, "generations (repeatable)")->required();
    ratio->add_option("--a", a, "deviation level");
    ratio->add_option("--p", p, "moment order");

    auto* simulate = app.add_subcommand("simulate", "trajectory summary (mean W_n)");
    add_common(simulate);
    simulate->add_option("--n", horizon, "horizon")->required();
    simulate->add_option("--tilt", tilt_value, "environment tilt (<= 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        std::filesystem::create_directories(common.out_dir);
        if (*rates) return run_rates(common, grid);
        if (*qtable) return run_qtable(common, depth);
        if (*hmoments) return run_hmoments(common, r, ns);
        if (*deviation) {
            if (*tilt_flag) tilt_opt = tilt_in;
            return run_deviation(common, theta, ns, tilt_opt);
        }
        if (*constants) {
            if (*r_flag) r_opt = r_in;
            return run_constants(common, r_opt, depth);
        }
        if (*identity) return run_identity(common, depth);
        if (*clt) return run_clt(common, ns, m_extra);
        if (*ratio) return run_ratio(common, ns, a, p);
        if (*simulate) return run_simulate(common, horizon, tilt_value);
    } catch (const bpre::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == bpre::error_class::numeric_guard ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
