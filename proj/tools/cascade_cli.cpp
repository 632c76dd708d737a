// cascade: command-line driver for the mean-field and Monte-Carlo engines.
//
//   cascade meanfield --config run.cfg
//   cascade critical  --config run.cfg --tol 1e-3 --threads 4
//   cascade heatmap   --config run.cfg --resolution 0.05 --out-dir out/
//
// Every command writes its CSV files plus manifest.txt into the output
// directory. Outputs depend only on the config and the seed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cascade/cascade.hpp"

namespace fs = std::filesystem;
using namespace cascade;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t threads = 1;
    std::optional<double> resolution;
    std::optional<double> tol;
    std::vector<std::string> edges;  // K=path
    bool export_edges = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CascadeError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig load(const Options& o) {
    auto cfg = parse_config(read_file(o.config_path));
    if (o.seed) cfg.seed = *o.seed;
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.tol) {
        if (!(*o.tol > 0.0 && *o.tol < 1.0)) throw CascadeError("--tol must be in (0,1)");
        cfg.tol = *o.tol;
    }
    if (o.resolution) {
        const double inv = 1.0 / *o.resolution;
        if (!(*o.resolution > 0.0) || std::abs(inv - std::round(inv)) > 1e-9)
            throw CascadeError("--resolution must divide 1 evenly");
        cfg.heatmap_resolution = *o.resolution;
    }
    for (const auto& e : o.edges) {
        const auto eq = e.find('=');
        if (eq == std::string::npos) throw CascadeError("--edges expects K=path, got " + e);
        const auto k = std::stoul(e.substr(0, eq));
        if (k >= cfg.networks.size()) throw CascadeError("--edges network index out of range: " + e);
        cfg.networks[k].topology = EdgeListFile{e.substr(eq + 1)};
    }
    return cfg;
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    std::ofstream f(fs::path(cfg.out_dir) / name);
    if (!f) throw CascadeError("cannot write " + (fs::path(cfg.out_dir) / name).string());
    return f;
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& files) {
    auto f = open_out(cfg, "manifest.txt");
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
    f << "version = " << kVersion << '\n';
    f << "command = " << command << '\n';
    f << "config_hash = " << hash << '\n';
    f << "engine = " << (cfg.engine == Engine::MeanField ? "meanfield" : "montecarlo") << '\n';
    if (cfg.engine == Engine::MonteCarlo) {
        f << "seed = " << cfg.seed << '\n';
        f << "replicate_seeds = " << cfg.seed << ".." << cfg.seed + cfg.runs - 1 << '\n';
    }
    f << "outputs =";
    for (const auto& x : files) f << ' ' << x;
    f << "\n\n# normalized config\n" << emit_config(cfg);
}

/// Pre-sample the replicate batch when it fits in memory, else sample on demand.
RunnerFactory make_factory(const RunConfig& cfg, std::size_t threads) {
    if (cfg.engine == Engine::MeanField) {
        for (const auto& n : cfg.networks)
            if (!is_complete(n.topology)) throw CascadeError("the mean-field engine supports complete topology only");
        return [cfg](const CouplingStrategy& s) { return mean_field_runner(cfg.networks, s, cfg.max_steps); };
    }
    double bytes = 0.0;
    for (const auto& n : cfg.networks) {
        double degree = 0.0;
        if (const auto* er = std::get_if<ErdosRenyi>(&n.topology)) degree = er->mean_degree;
        if (const auto* ba = std::get_if<BarabasiAlbert>(&n.topology)) degree = ba->mean_degree;
        bytes += static_cast<double>(n.node_count) * (28.0 + 4.0 * degree);
    }
    if (bytes * static_cast<double>(cfg.runs) < 1.5e9) {
        auto systems = prepare_systems(cfg.networks, cfg.seed, cfg.runs, threads);
        return [cfg, systems](const CouplingStrategy& s) { return monte_carlo_runner(systems, s, cfg.max_steps); };
    }
    return [cfg](const CouplingStrategy& s) {
        return monte_carlo_runner(cfg.networks, s, cfg.seed, cfg.runs, cfg.max_steps);
    };
}

void maybe_export_edges(const RunConfig& cfg, const Options& o, std::vector<std::string>& files) {
    if (!o.export_edges) return;
    const auto sys = mc_prepare(cfg.networks, cfg.seed);
    for (std::size_t k = 0; k < sys.size(); ++k) {
        const auto name = "edges_" + std::to_string(k) + ".txt";
        auto f = open_out(cfg, name);
        write_edge_list(f, sys.pop[k].adj);
        files.push_back(name);
    }
}

std::string strategy_name(const CouplingStrategy& s) {
    if (const auto* f = std::get_if<FixedCoupling>(&s)) {
        std::ostringstream os;
        os << "fcc";
        if (f->matrix.size() == 2) os << ':' << f->matrix.alpha() << ':' << f->matrix.beta();
        return os.str();
    }
    return std::holds_alternative<SizeBasedDynamic>(s) ? "sbd" : "swo";
}

AttackSpec need_attack(const RunConfig& cfg) {
    if (cfg.attack.empty()) throw CascadeError("this command needs 'attack' in the config");
    return AttackSpec{cfg.attack};
}

int cmd_meanfield(const Options& o) {
    const auto cfg = load(o);
    const auto tr = mf_run(cfg.networks, need_attack(cfg), cfg.strategy, cfg.max_steps);
    {
        auto f = open_out(cfg, "trajectory.csv");
        write_trajectory_csv(f, tr);
    }
    write_manifest(cfg, "meanfield", {"trajectory.csv"});
    std::cout << "outcome " << to_string(tr.outcome) << "\nsteps " << tr.steps_taken << "\nsurviving";
    for (double x : tr.surviving_fraction) std::cout << ' ' << x;
    std::cout << "\nsystem_surviving " << tr.system_surviving_fraction << '\n';
    return 0;
}

int cmd_simulate(const Options& o) {
    const auto cfg = load(o);
    const auto attack = need_attack(cfg);
    std::vector<SimOutcome> out(cfg.runs);
    parallel_for(cfg.runs, o.threads, [&](std::size_t i) {
        out[i] = mc_run(cfg.networks, attack, cfg.strategy, cfg.seed + i, i == 0, cfg.max_steps);
    });
    std::vector<std::string> files{"runs.csv", "trajectory.csv"};
    {
        auto f = open_out(cfg, "runs.csv");
        f.precision(17);
        f << "seed,outcome,steps,system_fraction";
        for (std::size_t k = 0; k < cfg.networks.size(); ++k) f << ",fraction_" << k;
        f << '\n';
        for (std::size_t i = 0; i < out.size(); ++i) {
            f << cfg.seed + i << ',' << to_string(out[i].outcome) << ',' << out[i].steps << ','
              << out[i].system_surviving_fraction;
            for (double x : out[i].surviving_fraction) f << ',' << x;
            f << '\n';
        }
    }
    {
        auto f = open_out(cfg, "trajectory.csv");
        write_trajectory_header(f);
        write_trajectory_rows(f, out[0].trajectory);
    }
    maybe_export_edges(cfg, o, files);
    write_manifest(cfg, "simulate", files);
    double mean = 0.0;
    std::size_t broke = 0;
    for (const auto& r : out) {
        mean += r.system_surviving_fraction;
        broke += r.breakdown;
    }
    std::cout << "runs " << out.size() << "\nmean_surviving " << mean / static_cast<double>(out.size())
              << "\nbreakdowns " << broke << '\n';
    return 0;
}

int cmd_critical(const Options& o) {
    const auto cfg = load(o);
    const auto factory = make_factory(cfg, o.threads);
    const auto r = critical_attack_size(factory(cfg.strategy), cfg.attack_shape, cfg.tol, o.threads);
    {
        auto f = open_out(cfg, "critical.csv");
        f.precision(17);
        f << "strategy,critical_size,no_breakdown,tol,n_runs\n";
        f << strategy_name(cfg.strategy) << ',' << r.size << ',' << r.no_breakdown << ',' << cfg.tol << ','
          << (cfg.engine == Engine::MeanField ? 1 : cfg.runs) << '\n';
    }
    std::vector<std::string> files{"critical.csv"};
    maybe_export_edges(cfg, o, files);
    write_manifest(cfg, "critical", files);
    std::printf("critical_size %.6f%s\n", r.size, r.no_breakdown ? " (no breakdown at full attack)" : "");
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto cfg = load(o);
    if (cfg.sweep.empty()) throw CascadeError("sweep needs 'sweep' in the config");
    const auto r = attack_sweep(make_factory(cfg, o.threads)(cfg.strategy), cfg.attack_shape, cfg.sweep, o.threads);
    {
        auto f = open_out(cfg, "sweep.csv");
        write_sweep_csv(f, r);
    }
    write_manifest(cfg, "sweep", {"sweep.csv"});
    for (std::size_t i = 0; i < r.attack.size(); ++i)
        std::printf("%.4f %.6f %.6f\n", r.attack[i], r.mean[i], r.stddev[i]);
    return 0;
}

int cmd_heatmap(const Options& o) {
    const auto cfg = load(o);
    if (cfg.networks.size() != 2) throw CascadeError("heatmap needs exactly two networks");
    const auto h = fcc_grid_sweep(make_factory(cfg, o.threads), cfg.attack_shape, cfg.heatmap_resolution,
                                  cfg.heatmap_clip, cfg.tol, o.threads);
    {
        auto f = open_out(cfg, "heatmap.csv");
        write_heatmap_csv(f, h);
    }
    write_manifest(cfg, "heatmap", {"heatmap.csv"});
    const auto b = h.best();
    std::printf("cells %zu\nbest alpha %.4f beta %.4f critical_size %.6f\n", h.cells.size(), b.alpha, b.beta,
                b.critical);
    return 0;
}

int cmd_compare(const Options& o) {
    const auto cfg = load(o);
    auto list = cfg.compare;
    if (list.empty()) {
        const auto n = cfg.networks.size();
        list.push_back({"sbd", SizeBasedDynamic{}});
        list.push_back({"swo", std::holds_alternative<StepwiseOptimization>(cfg.strategy)
                                   ? cfg.strategy
                                   : CouplingStrategy{StepwiseOptimization{CouplingBounds::unit(n)}}});
        if (n == 2) list.push_back({"fcc:0.5:0.5", FixedCoupling{CouplingMatrix::two_network(0.5, 0.5)}});
    }
    const auto reports =
        compare_strategies(make_factory(cfg, o.threads), list, cfg.attack_shape, cfg.sweep, cfg.tol, o.threads);
    {
        auto f = open_out(cfg, "compare.csv");
        write_comparison_csv(f, reports);
    }
    write_manifest(cfg, "compare", {"compare.csv"});
    for (const auto& r : reports)
        std::printf("%-16s critical_size %.6f%s\n", r.name.c_str(), r.critical.size,
                    r.critical.no_breakdown ? " (no breakdown)" : "");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascading failures in interdependent load-carrying networks"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Run configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the base seed");
        sub->add_option("--out-dir", o.out_dir, "Override the output directory");
        sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--resolution", o.resolution, "Heatmap grid step");
        sub->add_option("--tol", o.tol, "Bisection tolerance");
        sub->add_option("--edges", o.edges, "Read network K's topology from an edge list (K=path)");
        sub->add_flag("--export-edges", o.export_edges, "Write the sampled graphs of the first replicate");
    };

    int rc = 0;
    auto bind = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub);
        sub->callback([&rc, &o, fn] { rc = fn(o); });
    };
    bind("meanfield", "Single mean-field trajectory at the configured attack", cmd_meanfield);
    bind("simulate", "Monte-Carlo batch at the configured attack", cmd_simulate);
    bind("critical", "Critical attack size by bisection", cmd_critical);
    bind("sweep", "Surviving fraction over the attack grid", cmd_sweep);
    bind("heatmap", "Critical attack size over the FCC (alpha, beta) grid", cmd_heatmap);
    bind("compare", "Strategy comparison table", cmd_compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return rc;
}
