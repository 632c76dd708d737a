#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("cascade_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Result {
    int status;
    std::string out;
    std::string err;
};

Result run(const std::string& args) {
    static int counter = 0;
    const auto base = workdir() / ("call" + std::to_string(counter++));
    const std::string cmd = std::string("\"") + CASCADE_CLI_PATH + "\" " + args + " > \"" + base.string() +
                            ".out\" 2> \"" + base.string() + ".err\"";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(base.string() + ".out"), slurp(base.string() + ".err")};
}

fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = workdir() / name;
    std::ofstream(p) << text;
    return p;
}

std::string two_uniform(std::size_t nodes) {
    const auto n = std::to_string(nodes);
    return "networks = 2\n"
           "net.0.nodes = " + n + "\nnet.0.load = point:75\nnet.0.space = uniform:20:180\n"
           "net.1.nodes = " + n + "\nnet.1.load = point:75\nnet.1.space = uniform:20:180\n";
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string out_dir(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST(Cli, MeanFieldSmallAttackHasOneStep) {
    // 5% of A spreads 1.97 per survivor, below the smallest free space of 20.
    const auto cfg = write_config("case1.cfg", two_uniform(1000000) + "attack = 0.05,0\nstrategy = sbd\n");
    const auto r = run("meanfield --config " + cfg.string() + " --out-dir " + out_dir("case1"));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("outcome NoCascade"), std::string::npos) << r.out;
    const auto traj = slurp(workdir() / "case1" / "trajectory.csv");
    EXPECT_EQ(traj.substr(0, traj.find('\n')), "t,network,f,n_alive,F,Q_step,Q_cum");
    EXPECT_EQ(lines(traj), 3u);  // header plus t=0 for each network
    const auto manifest = slurp(workdir() / "case1" / "manifest.txt");
    EXPECT_NE(manifest.find("config_hash = "), std::string::npos);
    EXPECT_NE(manifest.find("version = "), std::string::npos);
}

TEST(Cli, HeatmapAtFivePercentHas441Rows) {
    const auto cfg = write_config("heat.cfg", two_uniform(10000) + "attack_shape = 1,1\ntol = 0.01\n");
    const auto r = run("heatmap --config " + cfg.string() + " --resolution 0.05 --threads 2 --out-dir " +
                       out_dir("heat"));
    ASSERT_EQ(r.status, 0) << r.err;
    const auto csv = slurp(workdir() / "heat" / "heatmap.csv");
    EXPECT_EQ(lines(csv), 442u);
    EXPECT_NE(r.out.find("cells 441"), std::string::npos);
}

TEST(Cli, SameSeedGivesIdenticalFiles) {
    const auto cfg = write_config("mc.cfg", "networks = 2\n"
                                            "net.0.nodes = 3000\nnet.0.load = point:75\nnet.0.space = uniform:20:180\n"
                                            "net.0.topology = er:10\n"
                                            "net.1.nodes = 3000\nnet.1.load = point:75\nnet.1.space = uniform:40:280\n"
                                            "net.1.topology = ba:10\n"
                                            "attack = 0.4,0\nsweep = 0:0.8:0.2\nstrategy = swo\n"
                                            "engine = montecarlo\nruns = 4\nseed = 7\n");
    for (const std::string cmd : {"simulate", "sweep"}) {
        const auto a = run(cmd + " --config " + cfg.string() + " --threads 3 --out-dir " + out_dir(cmd + "_a"));
        const auto b = run(cmd + " --config " + cfg.string() + " --threads 1 --out-dir " + out_dir(cmd + "_b"));
        const auto c = run(cmd + " --config " + cfg.string() + " --seed 8 --out-dir " + out_dir(cmd + "_c"));
        ASSERT_EQ(a.status, 0) << a.err;
        ASSERT_EQ(b.status, 0) << b.err;
        ASSERT_EQ(c.status, 0) << c.err;
        EXPECT_EQ(a.out, b.out);
        bool any_differs = false;
        for (const auto& e : fs::directory_iterator(workdir() / (cmd + "_a"))) {
            const auto name = e.path().filename();
            if (name.extension() != ".csv") continue;
            EXPECT_EQ(slurp(e.path()), slurp(workdir() / (cmd + "_b") / name)) << name;
            any_differs |= slurp(e.path()) != slurp(workdir() / (cmd + "_c") / name);
        }
        EXPECT_TRUE(any_differs) << cmd;
    }
}

TEST(Cli, ExportedEdgesReproduceTheRun) {
    const auto cfg = write_config("edges.cfg", "networks = 2\n"
                                               "net.0.nodes = 2000\nnet.0.load = point:75\nnet.0.space = uniform:20:180\n"
                                               "net.0.topology = er:8\n"
                                               "net.1.nodes = 2000\nnet.1.load = point:75\nnet.1.space = uniform:20:180\n"
                                               "net.1.topology = er:8\n"
                                               "attack = 0.3,0\nengine = montecarlo\nruns = 1\n");
    const auto a = run("simulate --export-edges --config " + cfg.string() + " --out-dir " + out_dir("ex_a"));
    ASSERT_EQ(a.status, 0) << a.err;
    const auto e0 = (workdir() / "ex_a" / "edges_0.txt").string();
    const auto e1 = (workdir() / "ex_a" / "edges_1.txt").string();
    const auto b = run("simulate --config " + cfg.string() + " --edges 0=" + e0 + " --edges 1=" + e1 +
                       " --out-dir " + out_dir("ex_b"));
    ASSERT_EQ(b.status, 0) << b.err;
    EXPECT_EQ(slurp(workdir() / "ex_a" / "trajectory.csv"), slurp(workdir() / "ex_b" / "trajectory.csv"));
}

TEST(Cli, ErrorsExitNonzeroWithDiagnostic) {
    const auto range = write_config("range.cfg", two_uniform(100) + "strategy = fcc\nstrategy.matrix = 1.3,-0.3;0.5,0.5\n");
    auto r = run("critical --config " + range.string() + " --out-dir " + out_dir("bad"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("range error"), std::string::npos) << r.err;

    const auto unknown = write_config("unknown.cfg", two_uniform(100) + "atack = 0.5,0\n");
    r = run("meanfield --config " + unknown.string() + " --out-dir " + out_dir("bad"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("line 8"), std::string::npos) << r.err;

    const auto no_attack = write_config("noattack.cfg", two_uniform(100));
    r = run("meanfield --config " + no_attack.string() + " --out-dir " + out_dir("bad"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("attack"), std::string::npos) << r.err;

    EXPECT_NE(run("meanfield --config " + (workdir() / "missing.cfg").string()).status, 0);
    EXPECT_NE(run("heatmap --config " + no_attack.string() + " --resolution 0.3").status, 0);
    EXPECT_NE(run("").status, 0);
}
