#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args)
{
    const std::string cmd = std::string(DENSOPT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() /
              ("densopt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string out() const { return " --out-dir " + dir.string(); }

    fs::path dir;
};

} // namespace

TEST_F(Cli, HelpAndUsageErrors)
{
    EXPECT_EQ(cli("--help"), 0);
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("no-such-command"), 2);
    EXPECT_EQ(cli("eig"), 2);
    EXPECT_EQ(cli("eig " + (dir / "missing.txt").string() + out()), 2);
}

TEST_F(Cli, CorpusEigExportPostprocess)
{
    ASSERT_EQ(cli("make-corpus " + dir.string() + " --mesh 8 --cells-1d 40" + out()), 0);
    const auto disk = dir / "2d" / "2d_disk_r0.36.txt";
    ASSERT_TRUE(fs::exists(disk));
    EXPECT_EQ(cli("eig " + disk.string() + " --k 3" + out()), 0);
    EXPECT_TRUE(fs::exists(dir / "spectrum.txt"));
    EXPECT_TRUE(fs::exists(dir / "eig_manifest.json"));

    EXPECT_EQ(cli("export " + disk.string() + " --format ppm --output " + (dir / "d.pgm").string() + out()), 0);
    EXPECT_EQ(slurp(dir / "d.pgm").substr(0, 2), "P5");
    EXPECT_EQ(cli("export " + disk.string() + " --format tiff" + out()), 2);

    EXPECT_EQ(cli("postprocess " + disk.string() + " --k 2" + out()), 0);
    EXPECT_TRUE(fs::exists(dir / "postprocess.txt"));

    // 1D files against a 2D audit: dimension mismatch
    EXPECT_EQ(cli("audit-bounds " + (dir / "1d").string() + " --N 2" + out()), 2);
    EXPECT_EQ(cli("audit-bounds " + (dir / "1d").string() + " --N 1 --kmax 3" + out()), 0);
    const auto audit = slurp(dir / "audit.csv");
    EXPECT_EQ(audit.substr(0, audit.find('\n')), "name,N,k,mu,mass,sup_norm,bound,margin,polya,violation");
}

TEST_F(Cli, OptimizeWritesDeterministicSummary)
{
    const std::string args = "optimize --k 1 --mesh 8 --max-iters 5" + out();
    ASSERT_EQ(cli(args), 0);
    const auto first = slurp(dir / "summary_k1.csv");
    ASSERT_FALSE(first.empty());
    EXPECT_TRUE(fs::exists(dir / "density_k1.txt"));
    EXPECT_TRUE(fs::exists(dir / "report_k1.json"));
    ASSERT_EQ(cli(args), 0);
    EXPECT_EQ(slurp(dir / "summary_k1.csv"), first);
}
