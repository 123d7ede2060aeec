#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

#include "eauwseg/cli.hpp"
#include "eauwseg/dataset.hpp"
#include "support.hpp"

using namespace eauwseg;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "eauwseg");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> gen_args(const fs::path& out) {
    return {"gen-data", "--n", "4", "--n-val", "2", "--n-test", "2", "--size", "32", "--seed", "9", "--out", out.string()};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code two") {
    auto r = cli({"gen-data", "--bogus", "1", "--out", "x"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--bogus") != std::string::npos);
    CHECK(r.err.find("--out") != std::string::npos);
    CHECK(cli({"nonsense"}).code == 2);
    CHECK(cli({"train", "--out", "x"}).code == 2);
    const auto help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("gen-data") != std::string::npos);
    CHECK(help.out.find("ablation") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
    const auto data = testutil::temp_dir("cli_keys_data");
    REQUIRE(cli(gen_args(data)).code == 0);
    const auto r = cli({"train", "--manifest", data.string(), "--out", (data / "run").string(), "--set", "colour=red"});
    CHECK(r.code != 0);
    CHECK(r.err.find("colour") != std::string::npos);
}

TEST_CASE("gen-data is deterministic and refuses to overwrite") {
    const auto a = testutil::temp_dir("cli_gen_a");
    const auto b = testutil::temp_dir("cli_gen_b");
    REQUIRE(cli(gen_args(a)).code == 0);
    REQUIRE(cli(gen_args(b)).code == 0);
    const auto ta = tree(a), tb = tree(b);
    CHECK(ta.size() > 8);
    CHECK(ta == tb);
    const auto again = cli(gen_args(a));
    CHECK(again.code == 2);
    CHECK(again.err.find("--force") != std::string::npos);
    auto forced = gen_args(a);
    forced.push_back("--force");
    CHECK(cli(forced).code == 0);
}

TEST_CASE("missing inputs are runtime errors") {
    const auto out = testutil::temp_dir("cli_missing");
    const auto r = cli({"eval", "--checkpoint", (out / "none.bin").string(), "--manifest", (out / "nowhere").string(),
                        "--out", (out / "e").string()});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
}

TEST_CASE("pipeline smoke run") {
    const auto root = testutil::temp_dir("cli_pipe");
    const auto data = root / "data";
    REQUIRE(cli(gen_args(data)).code == 0);
    const auto anno = cli({"gen-anno", "--manifest", data.string(), "--kinds", "bpanno,box"});
    REQUIRE(anno.code == 0);
    CHECK(load_manifest(data).train[0].annotations.count("bpanno") == 1);

    {
        std::ofstream cfg(root / "cfg.txt");
        cfg << "epochs=2\nbatch_size=2\nbase_channels=4\ndepth=2\nembed_dim=8\nseed=3\n";
    }
    const auto train = cli({"train", "--config", (root / "cfg.txt").string(), "--manifest", data.string(), "--out",
                            (root / "run").string()});
    REQUIRE(train.code == 0);
    CHECK(train.out.find("best val dice") != std::string::npos);
    for (const char* f : {"config.txt", "loss_log.csv", "checkpoint.bin", "loss_curve.svg", "run_config.txt"}) {
        CHECK(fs::exists(root / "run" / f));
    }

    const auto ev = cli({"eval", "--checkpoint", (root / "run" / "checkpoint.bin").string(), "--manifest",
                         data.string(), "--split", "test", "--out", (root / "eval").string()});
    REQUIRE(ev.code == 0);
    const auto metrics = lines(root / "eval" / "metrics.csv");
    REQUIRE(metrics.size() == 4);
    CHECK(metrics[3].rfind("mean,", 0) == 0);

    const auto tm = cli({"trimap", "--checkpoint-a", (root / "run" / "checkpoint.bin").string(), "--checkpoint-b",
                         (root / "run" / "checkpoint.bin").string(), "--manifest", data.string(), "--widths", "1,2",
                         "--out", (root / "trimap").string()});
    REQUIRE(tm.code == 0);
    CHECK(lines(root / "trimap" / "trimap.csv").size() == 3);
    CHECK(fs::exists(root / "trimap" / "trimap_jaccard.svg"));

    const auto cr = cli({"cost-report", "--manifest", data.string(), "--out", (root / "cost").string()});
    REQUIRE(cr.code == 0);
    CHECK(fs::exists(root / "cost" / "cost.csv"));
    CHECK(cr.out.find("bpanno") != std::string::npos);
}

TEST_CASE("the installed binary reports usage through its exit status") {
    const std::string bin = EAUWSEG_CLI_PATH;
    REQUIRE(fs::exists(bin));
    const auto log = testutil::temp_dir("cli_bin") / "out.txt";
    int status = std::system(("\"" + bin + "\" frobnicate > \"" + log.string() + "\" 2>&1").c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 2);
    status = std::system(("\"" + bin + "\" --help > \"" + log.string() + "\" 2>&1").c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(slurp(log).find("cost-report") != std::string::npos);
}

}
