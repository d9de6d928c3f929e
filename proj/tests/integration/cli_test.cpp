#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("mogphmm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    CliRun run(const std::string& args) const
    {
        fs::path const err = dir_ / "stderr.txt";
        std::string const cmd = std::string(MOGPHMM_CLI_PATH) + " " + args + " 2>" + err.string() + " >/dev/null";
        int const status = std::system(cmd.c_str());
        CliRun r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.err = slurp(err);
        return r;
    }

    [[nodiscard]] fs::path path(const std::string& name) const { return dir_ / name; }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static void write(const fs::path& p, const std::string& text)
    {
        std::ofstream(p, std::ios::binary) << text;
    }

    // Small budget so the pipeline runs in seconds.
    void write_fast_config() const
    {
        write(path("fast.json"), R"({"evolution":{"population_size":30,"max_evaluations":600},)"
                                 R"("samples_per_class":40,"folds":5,"noise":{"grid":[0.0,0.1]}})");
    }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, PrintDefaultConfigIsValidJson)
{
    fs::path const out = path("default.json");
    std::string const cmd = std::string(MOGPHMM_CLI_PATH) + " --print-default-config >" + out.string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    auto const j = nlohmann::json::parse(slurp(out));
    EXPECT_EQ(j.at("evolution").at("population_size"), 100);
    EXPECT_EQ(j.at("evolution").at("max_evaluations"), 80000);
    EXPECT_EQ(j.at("folds"), 10);
}

TEST_F(Cli, SynthIsByteIdenticalAcrossRuns)
{
    ASSERT_EQ(run("synth --seed 3 --out " + path("a.csv").string()).code, 0);
    ASSERT_EQ(run("synth --seed 3 --out " + path("b.csv").string()).code, 0);
    std::string const a = slurp(path("a.csv"));
    EXPECT_EQ(a, slurp(path("b.csv")));
    std::size_t lines = 0;
    for (char c : a) {
        lines += c == '\n' ? 1 : 0;
    }
    EXPECT_EQ(lines, 1001u);
    EXPECT_TRUE(fs::exists(path("a.csv.manifest.json")));
}

TEST_F(Cli, FallbackPoolWarningInManifest)
{
    write(path("raw.csv"), "date,steps,distance_m,duration_s,label\n"
                           "2016-01-01,1000,700,550,1\n"
                           "2016-01-02,1200,800,650,1\n"
                           "2016-01-03,7000,5000,4000,3\n");
    CliRun const r = run("synth --raw " + path("raw.csv").string() + " --samples-per-class 5 --out " +
                      path("syn.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    auto const m = nlohmann::json::parse(slurp(path("syn.csv.manifest.json")));
    std::string const warnings = m.at("warnings").dump();
    EXPECT_NE(warnings.find("class 2"), std::string::npos);
    EXPECT_NE(warnings.find("global duration pool"), std::string::npos);
    EXPECT_EQ(m.at("inputs").size(), 1u);
}

TEST_F(Cli, CorruptCsvExitsWithDataErrorAndRowNumber)
{
    write(path("bad.csv"), "date,steps,distance_m,duration_s\n2016-01-01,10,7,5\n2016-01-02,ten,7,5\n");
    CliRun const r = run("synth --raw " + path("bad.csv").string() + " --out " + path("syn.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bad.csv:3:"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("syn.csv")));
}

TEST_F(Cli, MissingInputIsDataError)
{
    EXPECT_EQ(run("train " + path("none.csv").string() + " --out " + path("m.json").string()).code, 2);
}

TEST_F(Cli, BadConfigExitsThree)
{
    write(path("bad.json"), R"({"folds": 1})");
    EXPECT_EQ(run("synth --config " + path("bad.json").string() + " --out " + path("s.csv").string()).code, 3);
    write(path("broken.json"), "{not json");
    EXPECT_EQ(run("synth --config " + path("broken.json").string() + " --out " + path("s.csv").string()).code, 3);
}

TEST_F(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(run("synth").code, 1);
    EXPECT_EQ(run("no-such-command").code, 1);
}

TEST_F(Cli, FullPipelineAndOneDayPredict)
{
    write_fast_config();
    std::string const cfg = " --config " + path("fast.json").string();
    ASSERT_EQ(run("demo-data --out " + path("demo.csv").string()).code, 0);
    std::string const demo_before = slurp(path("demo.csv"));
    ASSERT_EQ(run("synth" + cfg + " --raw " + path("demo.csv").string() + " --out " + path("syn.csv").string()).code,
              0);
    CliRun const t = run("train " + path("syn.csv").string() + cfg + " --out " + path("model.json").string());
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_TRUE(fs::exists(path("model.class1.log.csv")));
    ASSERT_EQ(run("fit-hmm " + path("demo.csv").string() + cfg + " --model " + path("model.json").string() +
                  " --out " + path("hmm.json").string())
                  .code,
              0);
    CliRun const p = run("predict " + path("demo.csv").string() + " --model " + path("model.json").string() +
                      " --hmm " + path("hmm.json").string() + " --out " + path("pred.csv").string());
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(slurp(path("demo.csv")), demo_before);
    std::string const pred = slurp(path("pred.csv"));
    EXPECT_EQ(pred.substr(0, pred.find('\n')), "date,observation,predicted_state,label,match");

    write(path("one.csv"), "date,steps,distance_m,duration_s\n2016-05-05,8000,6000,4500\n");
    ASSERT_EQ(run("predict " + path("one.csv").string() + " --model " + path("model.json").string() + " --hmm " +
                  path("hmm.json").string() + " --out " + path("one_pred.csv").string())
                  .code,
              0);
    std::string const one = slurp(path("one_pred.csv"));
    EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 2);
    EXPECT_EQ(one.rfind("date,observation,predicted_state\n2016-05-05,", 0), 0u) << one;
}

TEST_F(Cli, PredictRejectsMismatchedModels)
{
    write_fast_config();
    std::string const cfg = " --config " + path("fast.json").string();
    ASSERT_EQ(run("synth" + cfg + " --out " + path("syn.csv").string()).code, 0);
    ASSERT_EQ(run("train " + path("syn.csv").string() + cfg + " --out " + path("model.json").string()).code, 0);
    write(path("hmm.json"), R"({"version":1,"K":1,"M":2,"pi":[1],"A":[[1]],"B":[[0.5,0.5]],"alpha":0})");
    write(path("one.csv"), "date,steps,distance_m,duration_s\n2016-05-05,8000,6000,4500\n");
    CliRun const r = run("predict " + path("one.csv").string() + " --model " + path("model.json").string() +
                      " --hmm " + path("hmm.json").string() + " --out " + path("p.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("M=2"), std::string::npos) << r.err;
}

TEST_F(Cli, ExperimentWritesReportsAndManifest)
{
    write_fast_config();
    CliRun const r = run("experiment --config " + path("fast.json").string() + " --threads 1 --out " +
                      path("exp").string());
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"report.csv", "summary.csv", "rankings.csv", "predictions.csv", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(path("exp") / f)) << f;
    }
    EXPECT_EQ(slurp(path("exp") / "summary.csv").substr(0, 40), "participant,lambda,model,mean_error,rank");
    auto const m = nlohmann::json::parse(slurp(path("exp") / "manifest.json"));
    EXPECT_EQ(m.at("command"), "experiment");
    EXPECT_EQ(m.at("config").at("folds"), 5);
}
