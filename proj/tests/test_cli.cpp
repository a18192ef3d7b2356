#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::path(CHNST_TEST_WORK_DIR) / (std::string("cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    fs::path write_config(const std::string& text) const {
        const fs::path p = dir_ / "config.ini";
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }

    Result invoke(const std::string& args) const {
        const std::string cmd = std::string("\"") + CHNST_CLI_PATH + "\" " + args + " > \"" +
                                (dir_ / "stdout.txt").string() + "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(dir_ / "stdout.txt");
        r.err = slurp(dir_ / "stderr.txt");
        return r;
    }

    Result invoke(const std::string& sub, const fs::path& config, const fs::path& output) const {
        return invoke(sub + " --config \"" + config.string() + "\" --output \"" + output.string() + "\"");
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidateDefaultModel) {
    const auto r = invoke("validate --config \"" + write_config("# defaults\n").string() + "\"");
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    for (const char* tag : {"(A1)", "(A2)", "(A3)", "(A4)"}) EXPECT_NE(r.out.find(tag), std::string::npos) << tag;
    EXPECT_EQ(r.out.find("violated"), std::string::npos);
}

TEST_F(Cli, ValidateNegativeGamma) {
    const auto r = invoke("validate --config \"" + write_config("[model]\ngamma = -1\n").string() + "\"");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("(A1) violated"), std::string::npos) << r.out;
}

TEST_F(Cli, MalformedConfigIsUsageError) {
    const auto r = invoke("validate --config \"" + write_config("[mesh]\nbsae = 8\n").string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 2, column 1"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(invoke("").code, 2);
    EXPECT_EQ(invoke("simulate --config x").code, 2);
    EXPECT_EQ(invoke("run").code, 2);
    EXPECT_EQ(invoke("run --config \"" + (dir_ / "missing.ini").string() + "\"").code, 2);
    EXPECT_EQ(invoke("run --config \"" + write_config("[mesh]\nbase = 2\n").string() + "\"").code, 2);
}

TEST_F(Cli, RunWritesDiagnosticsAndSnapshots) {
    const auto cfg = write_config("[time]\nsteps = 10\n[output]\nsnapshot_stride = 5\nformats = csv, vtk\n");
    const auto r = invoke("run", cfg, dir_ / "a");
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir_ / "a" / "diagnostics.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "step,time,mass,kinetic,internal,total_energy,entropy,tau_dissipation,d_num,newton_iters,min_theta");
    std::vector<double> mass;
    for (std::string line; std::getline(in, line);) {
        std::stringstream ss(line);
        std::string f;
        for (int k = 0; k < 3; ++k) std::getline(ss, f, ',');
        mass.push_back(std::stod(f));
    }
    ASSERT_EQ(mass.size(), 11u);
    for (double m : mass) EXPECT_NEAR(m, mass[0], 1e-10);

    int snapshots = 0;
    for (const auto& e : fs::directory_iterator(dir_ / "a")) snapshots += e.path().extension() == ".vtk";
    EXPECT_EQ(snapshots, 3);
    for (int s : {0, 5, 10}) EXPECT_TRUE(fs::exists(dir_ / "a" / ("snapshot_" + std::to_string(s) + ".vtk")));

    ASSERT_EQ(invoke("run", cfg, dir_ / "b").code, 0);
    EXPECT_EQ(slurp(dir_ / "a" / "diagnostics.csv"), slurp(dir_ / "b" / "diagnostics.csv"));
}

TEST_F(Cli, RunSolverFailureExitsOne) {
    const auto r = invoke("run", write_config("[mesh]\nbase = 4\n[time]\nsteps = 2\n[scheme]\ntheta_floor = 5\n"),
                          dir_ / "out");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("step 1"), std::string::npos) << r.err;
}

TEST_F(Cli, RunRefusesInvalidModel) {
    const auto r = invoke("run", write_config("[model]\nmobility_cross = 0.2\n"), dir_ / "out");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("(A3) violated"), std::string::npos) << r.err;
}

TEST_F(Cli, ConvergeNeedsTwoLevels) {
    const auto r = invoke("converge", write_config("[converge]\nlevels = 1\n"), dir_ / "out");
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, ConvergeWritesTables) {
    const auto r = invoke("converge", write_config("[mesh]\nbase = 4\n[time]\nsteps = 2\n[converge]\nlevels = 2\n"),
                          dir_ / "out");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("eoc gate not evaluated"), std::string::npos) << r.out;
    const std::string csv = slurp(dir_ / "out" / "eoc_table.csv");
    EXPECT_EQ(csv.substr(0, csv.find(',')), "k");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    const std::string txt = slurp(dir_ / "out" / "eoc_table.txt");
    for (const char* col : {"e^phi", "e^mu", "e^grad(theta)", "e^grad(u)"})
        EXPECT_NE(txt.find(col), std::string::npos) << col;
}
