#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using ::testing::StartsWith;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / ("scalefit_cli_test_" + std::to_string(getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        ASSERT_EQ(run("synth --base 1024 --out " + path("runs.csv")).code, 0);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static std::string path(const std::string& name) { return (dir_ / name).string(); }

    // stdout only; stderr goes to a file next to the inputs.
    static Result run(const std::string& args, const std::string& env = "") {
        const std::string cmd = env + " \"" SCALEFIT_CLI "\" " + args + " 2>" + path("stderr.txt");
        Result r;
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) return r;
        std::array<char, 4096> buf{};
        std::size_t n = 0;
        while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
        const int status = pclose(pipe);
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return r;
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("schedule --no-such-flag").code, 1);
    EXPECT_EQ(run("noise li 1 2").code, 1);
    EXPECT_EQ(run("report --input " + path("missing.csv")).code, 2);
    EXPECT_THAT(slurp(path("stderr.txt")), HasSubstr("ingest"));
    EXPECT_EQ(run("noise crit -1 1").code, 2);
}

TEST_F(Cli, ScheduleCsv) {
    const auto r = run("schedule --eta-max 0.01 --total-tokens 2^24 --warmup-tokens 2^20 --decay cosine --floor 0.1 "
                       "--emit csv --batch-size 2^20");
    ASSERT_EQ(r.code, 0);
    EXPECT_THAT(r.out, StartsWith("step,tokens,lr\n1,1048576,0.01\n"));
    const auto last = r.out.substr(r.out.rfind('\n', r.out.size() - 2) + 1);
    EXPECT_THAT(last, StartsWith("16,16777216,"));
    EXPECT_NEAR(std::stod(last.substr(last.rfind(',') + 1)), 0.001, 1e-15);
}

TEST_F(Cli, NoiseAndMup) {
    EXPECT_EQ(run("noise li 0.01 2^20 2^24").out, "0.004705882352941177\n");
    EXPECT_EQ(std::stod(run("noise crit 1e9 1e4").out), 1e5);
    const auto j = nlohmann::json::parse(run("mup --d-model 2048 --base 1024").out);
    EXPECT_EQ(j["width_ratio"], 2.0);
    EXPECT_EQ(j["multipliers"]["hidden"]["lr_multiplier"], 0.5);
}

TEST_F(Cli, SynthIsReproducible) {
    {
        std::ofstream spec(path("noisy.json"));
        spec << R"({"noise_sigma": 0.01, "seed": 3})";
    }
    const std::string noisy = "synth --base 1024 --spec " + path("noisy.json");
    const auto a = run(noisy + " --seed 9");
    const auto b = run(noisy + " --seed 9");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, run(noisy + " --seed 10").out);
    EXPECT_NE(a.out, run(noisy).out);
    EXPECT_EQ(run("synth --base 1024").out, slurp(path("runs.csv")));
}

TEST_F(Cli, ReportIsByteIdentical) {
    const auto a = run("report --refine --input " + path("runs.csv"));
    const auto b = run("report --refine --input " + path("runs.csv"));
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto j = nlohmann::json::parse(a.out);
    EXPECT_NEAR(j["consolidated"]["b_crit"]["alpha_hat"].get<double>(), 1.0, 1e-3);
}

TEST_F(Cli, ReportViews) {
    EXPECT_EQ(run("report --refine --warnings --input " + path("runs.csv")).out, "[]\n");
    const auto rows = nlohmann::json::parse(run("report --plot-data sensitivity --input " + path("runs.csv")).out);
    ASSERT_FALSE(rows.empty());
    EXPECT_TRUE(rows[0].contains("series"));
    EXPECT_EQ(run("report --plot-data nonsense --input " + path("runs.csv")).code, 1);
}

TEST_F(Cli, FitSurgeVariantAlias) {
    const auto r = run("fit-surge --variant eps --input " + path("runs.csv"));
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    for (const auto& f : j["fits"]) EXPECT_EQ(f["variant"], "eps_floor");
    EXPECT_EQ(j["fits"].size(), 6u);
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
    {
        std::ofstream c(path("config.json"));
        c << R"({"input": ")" << path("runs.csv") << R"(", "refine": true, "target_tokens": "2^40"})";
    }
    const auto from_config = nlohmann::json::parse(run("--config " + path("config.json") + " extrapolate").out);
    EXPECT_EQ(from_config["t_target"], std::exp2(40.0));
    const auto overridden =
        nlohmann::json::parse(run("--config " + path("config.json") + " extrapolate --target-tokens 2^38").out);
    EXPECT_EQ(overridden["t_target"], std::exp2(38.0));
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
    const auto out = dir_ / "env_out";
    const auto r = run("report --refine --input " + path("runs.csv"), "SCALEFIT_OUT=" + out.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(fs::exists(out / "report.json"));
    EXPECT_TRUE(fs::exists(out / "b_crit_law.json"));

    const auto flag = dir_ / "flag_out";
    run("report --refine --out " + flag.string() + " --input " + path("runs.csv"), "SCALEFIT_OUT=" + out.string());
    EXPECT_TRUE(fs::exists(flag / "report.json"));
    EXPECT_EQ(slurp((out / "report.json").string()), slurp((flag / "report.json").string()));
}
