#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = mira::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "mira3d-cli-test";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("exit codes")
    {
        CHECK(run({}).code == mira::cli::kExitUsage);
        CHECK(run({"fixed-points", "--A", "0", "--B", "0.1", "--C", "-1", "--bogus"}).code == mira::cli::kExitUsage);
        CHECK(run({"nonsense"}).code == mira::cli::kExitUsage);
        CHECK(run({"curves", "--curve", "XX", "--B", "0.1", "--range", "0:1:3"}).code == mira::cli::kExitUsage);
        CHECK(run({"--version"}).code == mira::cli::kExitOk);
        // B = 0 has no inverse.
        const Result r = run({"manifold", "--A", "0", "--B", "0", "--C", "-1.5"});
        CHECK(r.code == mira::cli::kExitNumeric);
        CHECK(r.err.find("error") != std::string::npos);
    }

    TEST_CASE("fixed-points table")
    {
        const Result r = run({"fixed-points", "--A", "0", "--B", "0.1", "--C", "-1.3"});
        REQUIRE(r.code == 0);
        std::istringstream in(r.out);
        std::string line;
        std::getline(in, line);
        CHECK(line.rfind("# form\tx\ty\tz", 0) == 0);
        std::getline(in, line);
        CHECK(line.rfind("shifted O+\t0\t0\t0\t", 0) == 0);
        std::getline(in, line);
        CHECK(line.rfind("shifted O-\t", 0) == 0);

        const Result m = run({"fixed-points", "--M1", "0.5", "--M2", "0", "--B", "0.1"});
        REQUIRE(m.code == 0);
        CHECK(m.out.find("original O+") != std::string::npos);
        CHECK(run({"fixed-points", "--M1", "0.5", "--B", "0.1"}).code == mira::cli::kExitUsage);
    }

    TEST_CASE("config file, with command-line flags taking precedence")
    {
        const fs::path cfg = scratch("point.cfg");
        {
            std::ofstream f(cfg);
            f << "# shifted point\nA = 0\nB=0.1\nC=-0.5\n";
        }
        const Result a = run({"fixed-points", "--config", cfg.string()});
        const Result b = run({"fixed-points", "--A", "0", "--B", "0.1", "--C", "-0.5"});
        REQUIRE(a.code == 0);
        CHECK(a.out == b.out);
        const Result c = run({"fixed-points", "--config", cfg.string(), "--C", "-1.3"});
        const Result d = run({"fixed-points", "--A", "0", "--B", "0.1", "--C", "-1.3"});
        CHECK(c.out == d.out);
        CHECK(c.out != a.out);
        CHECK(run({"fixed-points", "--config", scratch("missing.cfg").string()}).code == mira::cli::kExitUsage);
    }

    TEST_CASE("convert-params round trip")
    {
        const Result r = run({"convert-params", "--A", "0.5", "--B", "0.5", "--C", "-1.6"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("# M1\tM2\tB\torigin") == 0);
    }

    TEST_CASE("sweep-lyap output is byte-identical across worker counts and reruns")
    {
        const std::vector<std::string> base{"sweep-lyap", "--B",          "0.5",        "--A",      "0",
                                            "--C",        "0",            "--axis1",    "A=0.3:0.7:4",
                                            "--axis2",    "C=-1.85:-1.6:3", "--transient", "1000",
                                            "--iterations", "10000"};
        std::vector<std::string> files;
        for (const char* threads : {"1", "8", "1"}) {
            const fs::path prefix = scratch(std::string("sweep-") + threads + "-" + std::to_string(files.size()));
            auto args = base;
            args.insert(args.end(), {"--threads", threads, "--out", prefix.string()});
            const Result r = run(args);
            REQUIRE(r.code == 0);
            std::string all;
            for (const char* ext : {".ppm", ".csv", ".meta"}) {
                REQUIRE(fs::exists(prefix.string() + ext));
                all += slurp(prefix.string() + ext);
            }
            files.push_back(all);
        }
        CHECK(files[0] == files[1]);
        CHECK(files[0] == files[2]);
        CHECK(files[0].rfind("P6\n# mira3d v1\n4 3\n255\n", 0) == 0);
    }

    TEST_CASE("lyap and event-scan tables")
    {
        const Result l = run({"lyap", "--A", "0", "--B", "0.1", "--C", "-0.5", "--iterations", "20000"});
        REQUIRE(l.code == 0);
        CHECK(l.out.find("Periodic") != std::string::npos);

        const Result s = run({"event-scan", "--A", "0", "--B", "0.1", "--C", "0", "--range", "-0.95:-1.05:11",
                              "--predicate", "regime", "--iterations", "20000", "--policy", "fresh"});
        REQUIRE(s.code == 0);
        CHECK(s.out.rfind("# param\tfrom\tto\n", 0) == 0);
        CHECK(s.out.find("Periodic") != std::string::npos);
        CHECK(run({"event-scan", "--B", "0.1", "--range", "0:1:3", "--predicate", "nope"}).code
              == mira::cli::kExitUsage);
        // The scanned parameter needs no base value of its own.
        const Result t = run({"tree", "--A", "0", "--B", "0.1", "--range", "-1.2:-1.3:3", "--points", "10"});
        CHECK(t.code == 0);
        CHECK(t.out.rfind("# param\tx\n", 0) == 0);
    }

    TEST_CASE("orbit find reports the period and type")
    {
        const Result r = run({"orbit", "find", "--A", "0", "--B", "0.1", "--C", "-1.3", "--q", "4", "--guess",
                              "0.431863,0.287578,-0.789265"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("(3,0)") != std::string::npos);
    }
}
