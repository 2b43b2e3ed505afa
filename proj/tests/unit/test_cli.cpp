#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = PMN_FIXTURE_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("pmn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    int run(const std::string& args, const std::string& stdout_file = "out.txt") {
        const std::string cmd = std::string("\"") + PMN_CLI_PATH + "\" " + args + " > \"" +
                                (dir / stdout_file).string() + "\" 2> \"" + (dir / "err.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }
    std::string q(const fs::path& p) const { return "\"" + p.string() + "\""; }

    void write(const fs::path& p, const std::string& text) {
        std::ofstream out(p);
        out << text;
    }

    void make_synth(const std::string& name = "data") {
        write(dir / "spec.txt",
              "labels = 4\nseq_len = 50\nmotif_len = 6\ngroup = 0,1 @ 0.4\nconditional = 2>3\n"
              "train_count = 120\nvalid_count = 40\ntest_count = 40\n");
        ASSERT_EQ(run("--seed 3 synth " + q(dir / "spec.txt") + " " + q(dir / name)), 0);
    }
};

TEST_F(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("--precision f16 gradcheck"), 2);
    EXPECT_EQ(run("synth " + q(dir / "missing.txt") + " " + q(dir / "o")), 2);
    write(dir / "bad.txt", "labels = 4\nwibble = 3\n");
    EXPECT_EQ(run("synth " + q(dir / "bad.txt") + " " + q(dir / "o")), 2);
    EXPECT_NE(slurp(dir / "err.txt").find("wibble"), std::string::npos);
}

TEST_F(Cli, CorruptCheckpointExitsWithOne) {
    make_synth();
    write(dir / "junk.ckpt", "PMN1 not really a checkpoint at all");
    EXPECT_EQ(run("eval " + q(dir / "junk.ckpt") + " " + q(dir / "data")), 1);
}

TEST_F(Cli, SynthIsDeterministic) {
    make_synth("a");
    make_synth("b");
    for (auto f : {"train.tsv", "valid.tsv", "test.tsv", "labels.txt", "ground_truth.tsv"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    EXPECT_TRUE(fs::exists(dir / "a" / "stats.tsv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "synth_spec.txt"));
}

TEST_F(Cli, BuildMatchesGoldenFixture) {
    const fs::path f = kFixtures / "build";
    ASSERT_EQ(run("build " + q(f / "peaks.tsv") + " " + q(f / "labels.txt") + " " + q(f / "genome.fa") + " " +
                  q(dir / "ds")),
              0);
    for (auto part : {"train", "valid", "test"}) {
        EXPECT_EQ(slurp(dir / "ds" / (std::string(part) + ".tsv")),
                  slurp(f / ("expected_" + std::string(part) + ".tsv")))
            << part;
    }
    EXPECT_NE(slurp(dir / "err.txt").find("skipped 1 peaks"), std::string::npos);
    EXPECT_NE(slurp(dir / "ds" / "build_config.txt").find("peaks_below_threshold = 1"), std::string::npos);
}

TEST_F(Cli, BuildOptionsAndErrors) {
    const fs::path f = kFixtures / "build";
    const std::string inputs = q(f / "peaks.tsv") + " " + q(f / "labels.txt") + " " + q(f / "genome.fa");
    ASSERT_EQ(run("build " + inputs + " " + q(dir / "w100") + " --window 100 --stride 25"), 0);
    std::istringstream rows(slurp(dir / "w100" / "train.tsv"));
    std::string line;
    std::size_t count = 0;
    while (std::getline(rows, line)) {
        if (line[0] == '#') continue;
        std::istringstream fields(line);
        std::string chrom, start, seq;
        std::getline(fields, chrom, '\t');
        std::getline(fields, start, '\t');
        std::getline(fields, seq, '\t');
        EXPECT_EQ(seq.size(), 100u);
        ++count;
    }
    EXPECT_GT(count, 0u);

    ASSERT_EQ(run("build " + inputs + " " + q(dir / "none") + " --score-threshold 100"), 0);
    EXPECT_NE(slurp(dir / "err.txt").find("no window has a positive label"), std::string::npos);
    EXPECT_EQ(slurp(dir / "none" / "train.tsv"), "#chrom\tstart\tsequence\tpositive_indices\n");

    write(dir / "bad_peaks.tsv", "A\tchr2\t10\t20\t1.0\nA\tchr2\tten\t20\t1.0\n");
    EXPECT_EQ(run("build " + q(dir / "bad_peaks.tsv") + " " + q(f / "labels.txt") + " " + q(f / "genome.fa") +
                  " " + q(dir / "bad")),
              2);
    EXPECT_NE(slurp(dir / "err.txt").find(":2:"), std::string::npos);
}

TEST_F(Cli, SynthLabelListAndEmptySplit) {
    write(dir / "spec.txt", "labels = 8\nseq_len = 80\ntrain_count = 30\nvalid_count = 10\ntest_count = 0\n");
    ASSERT_EQ(run("synth " + q(dir / "spec.txt") + " " + q(dir / "d")), 0);
    std::istringstream names(slurp(dir / "d" / "labels.txt"));
    std::string name;
    std::size_t n = 0;
    while (std::getline(names, name)) ++n;
    EXPECT_EQ(n, 8u);
    EXPECT_EQ(slurp(dir / "d" / "test.tsv"), "#chrom\tstart\tsequence\tpositive_indices\n");
}

TEST_F(Cli, TrainEvalAndClusterRoundTrip) {
    make_synth();
    write(dir / "train.txt", "batch_size = 16\nepochs = 2\nconv_channels = 8,8\nconv_widths = 5,3\nhops = 2\n");
    ASSERT_EQ(run("--seed 2 train " + q(dir / "data") + " " + q(dir / "train.txt") + " " + q(dir / "run")), 0);
    for (auto f : {"epoch_log.csv", "effective_config.txt", "summary.txt", "best.ckpt", "last.ckpt"}) {
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    }
    ASSERT_EQ(run("eval " + q(dir / "run") + " " + q(dir / "data") + " --out " + q(dir / "ev")), 0);
    EXPECT_TRUE(fs::exists(dir / "ev" / "report.tsv"));
    EXPECT_TRUE(fs::exists(dir / "ev" / "per_label.tsv"));

    ASSERT_EQ(run("cluster " + q(dir / "run" / "best.ckpt") + " --k 4 --groups " +
                  q(dir / "data" / "ground_truth.tsv"), "cluster.txt"), 0);
    const std::string out = slurp(dir / "cluster.txt");
    // With one cluster per label no planted pair can share a cluster.
    EXPECT_NE(out.find("pair_recovery_score\t0"), std::string::npos);
    EXPECT_NE(out.find("cluster_count\t4"), std::string::npos);
}

TEST_F(Cli, UntrainedCheckpointScoresNearChance) {
    write(dir / "spec.txt", "labels = 3\nseq_len = 40\nmotif_len = 6\ntrain_count = 50\nvalid_count = 50\n"
                            "test_count = 1500\n");
    ASSERT_EQ(run("synth " + q(dir / "spec.txt") + " " + q(dir / "data")), 0);
    write(dir / "model.txt", "conv_channels = 8,8\nconv_widths = 5,3\nhops = 2\n");
    ASSERT_EQ(run("init " + q(dir / "model.txt") + " " + q(dir / "data") + " " + q(dir / "init.ckpt")), 0);
    ASSERT_EQ(run("eval " + q(dir / "init.ckpt") + " " + q(dir / "data") + " --out " + q(dir / "ev")), 0);
    std::istringstream report(slurp(dir / "ev" / "report.tsv"));
    std::string line;
    double mean = -1;
    while (std::getline(report, line)) {
        std::istringstream f(line);
        std::string model, subset, metric, value;
        std::getline(f, model, '\t');
        std::getline(f, subset, '\t');
        std::getline(f, metric, '\t');
        std::getline(f, value, '\t');
        if (subset == "all" && metric == "auroc") {
            mean = std::stod(value);
            break;
        }
    }
    EXPECT_NEAR(mean, 0.5, 0.05);
}

TEST_F(Cli, BaselineComparisonReportsTTest) {
    make_synth();
    write(dir / "m.txt", "conv_channels = 8,8\nconv_widths = 5,3\nhops = 2\n");
    ASSERT_EQ(run("--seed 1 init " + q(dir / "m.txt") + " " + q(dir / "data") + " " + q(dir / "a.ckpt")), 0);
    ASSERT_EQ(run("--seed 2 init " + q(dir / "m.txt") + " " + q(dir / "data") + " " + q(dir / "b.ckpt")), 0);
    ASSERT_EQ(run("eval " + q(dir / "a.ckpt") + " " + q(dir / "data") + " --baseline " + q(dir / "b.ckpt"),
                  "eval.txt"),
              0);
    const std::string out = slurp(dir / "eval.txt");
    EXPECT_NE(out.find("t_test"), std::string::npos) << out;
}

TEST_F(Cli, GradcheckSingleVariantPasses) {
    ASSERT_EQ(run("gradcheck --seeds 1 --variant pmn", "grad.txt"), 0);
    const std::string out = slurp(dir / "grad.txt");
    EXPECT_NE(out.find("pass"), std::string::npos);
    EXPECT_EQ(out.find("FAIL"), std::string::npos);
}

}  // namespace
