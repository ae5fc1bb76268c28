#include <filesystem>
#include <fstream>
#include <sstream>

#include "bridgekit/cli.hpp"
#include "bridgekit/data.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using bridgekit::cli::run_command;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("verify passes on both variants") {
    const Run r = run({"verify"});
    CHECK(r.code == 0);
    for (const char* v : {"selfrdb ", "regular "})
        for (const char* T : {" 4 ", " 32 ", " 256 "}) {
            const bool found = r.out.find(std::string(v)) != std::string::npos && r.out.find(T) != std::string::npos;
            CHECK(found);
        }
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(run({"verify", "schedule", "--quiet"}).code == 0);
}

TEST_CASE("errors are single categorized lines") {
    const Run r = run({"train", "--set", "lamda1=3"});
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error: config: ", 0) == 0);
    CHECK(r.err.find("lamda1") != std::string::npos);
    CHECK(r.err.find("no_soft_prior") != std::string::npos);  // key docs follow

    const Run u = run({"sample", "--input", "x"});
    CHECK(u.code == 2);
    CHECK(u.err.rfind("error: usage: ", 0) == 0);

    const Run io = run({"eval", "--ref", "/nonexistent/a.brtk", "--test", "/nonexistent/b.brtk"});
    CHECK(io.code == 1);
    CHECK(io.err.rfind("error: io: ", 0) == 0);

    CHECK(run({"verify", "everything"}).code == 2);
}

TEST_CASE("schedule export") {
    const Run r = run({"schedule", "export", "--T", "4", "--variant", "regular"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,g,s2,mu_x0,mu_y,sigma2");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("data, train, sample, eval pipeline") {
    const fs::path dir = fs::temp_directory_path() / "bridgekit_cli_pipeline";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string stem = (dir / "g").string();
    REQUIRE(run({"data", "make", "--task", "gauss2gauss", "--n", "200", "--seed", "4", "--out", stem}).code == 0);
    const auto ds = bridgekit::load_dataset(stem);
    CHECK(ds.x0.batch() == 200);

    const std::string run_dir = (dir / "run").string();
    const Run t = run({"train", "--set", "data=" + stem, "--set", "T=8", "--set", "net=mlp", "--set", "steps=6",
                       "--set", "batch_size=16", "--out-dir", run_dir});
    REQUIRE(t.code == 0);
    CHECK(fs::exists(dir / "run" / "config.resolved"));
    CHECK(fs::exists(dir / "run" / "metrics.csv"));
    const std::string ck = (dir / "run" / "checkpoint.brck").string();

    const std::string ys = stem + ".test.y.brtk", xs = stem + ".test.x0.brtk";
    const std::string s1 = (dir / "s1.brtk").string(), s2 = (dir / "s2.brtk").string();
    REQUIRE(run({"sample", "--checkpoint", ck, "--input", ys, "--output", s1, "--seed", "9"}).code == 0);
    REQUIRE(run({"sample", "--checkpoint", ck, "--input", ys, "--output", s2, "--seed", "9", "--emit-trajectory"})
                .code == 0);
    CHECK(slurp(s1) == slurp(s2));
    CHECK(fs::exists(s2 + ".t8.brtk"));
    CHECK(fs::exists(s2 + ".t0.brtk"));
    CHECK(slurp(s2 + ".t0.brtk") == slurp(s2));

    const std::string rep = (dir / "r.csv").string(), base = (dir / "b.csv").string();
    REQUIRE(run({"eval", "--ref", xs, "--test", ys, "--report", base}).code == 0);
    const Run e = run({"eval", "--ref", xs, "--test", s1, "--report", rep, "--baseline", base});
    REQUIRE(e.code == 0);
    const std::string csv = slurp(rep);
    CHECK(csv.rfind("index,psnr,ssim\n", 0) == 0);
    CHECK(csv.find("# psnr ") != std::string::npos);
    CHECK(csv.find("# p_value ") != std::string::npos);

    // Resume extends the run in place.
    const Run again = run({"train", "--resume", ck, "--set", "steps=8"});
    CHECK(again.code == 0);
    fs::remove_all(dir);
}
