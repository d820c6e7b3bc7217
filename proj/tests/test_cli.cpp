#include "drr/dataset.hpp"
#include "drr/persistence.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

using namespace drr;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("drr_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    CliRun run(const std::string& args) const
    {
        const std::string out = path("stdout.txt"), err = path("stderr.txt");
        const std::string cmd = std::string(DRR_CLI_PATH) + " " + args + " > " + out + " 2> " + err;
        const int status = std::system(cmd.c_str());
        CliRun r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    std::string fast_fit() const { return "--folds 3 --max-train 200 --cv-max-rows 100 --threads 1"; }

    fs::path dir_;
};

Matrix load_plain(const std::string& file, bool header = false)
{
    CsvOptions o;
    o.has_header = header;
    return load_csv(file, o).data.values();
}

} // namespace

TEST_F(CliTest, FitThenReconstructParabola)
{
    save_csv(path("p.csv"), drr::test::parabola(300));
    auto fit = run("fit -i " + path("p.csv") + " -m " + path("p.drr") + " --report " + path("r.csv") + " " +
                   fast_fit());
    ASSERT_EQ(fit.code, 0) << fit.err;
    EXPECT_TRUE(fs::exists(path("p.drr")));
    EXPECT_EQ(slurp(path("r.csv")).rfind("dim,score_variance,residual_variance,sigma,gamma,cv_mse", 0), 0u);

    auto rec = run("reconstruct -i " + path("p.csv") + " -m " + path("p.drr") + " --k 1 -o " + path("rec.csv"));
    ASSERT_EQ(rec.code, 0) << rec.err;
    const Matrix X = drr::test::parabola(300);
    const Matrix R = load_plain(path("rec.csv"));
    ASSERT_EQ(R.rows(), X.rows());
    EXPECT_LT((R - X).cwiseAbs().mean(), 1e-3);
}

TEST_F(CliTest, TransformInvertRoundTrip)
{
    const Matrix X = drr::test::curved_data(150, 3, 2);
    save_csv(path("x.csv"), X);
    ASSERT_EQ(run("fit -i " + path("x.csv") + " -m " + path("x.drr") + " " + fast_fit()).code, 0);
    ASSERT_EQ(run("transform -i " + path("x.csv") + " -m " + path("x.drr") + " -o " + path("z.csv")).code, 0);
    ASSERT_EQ(run("invert -i " + path("z.csv") + " -m " + path("x.drr") + " -o " + path("back.csv")).code, 0);
    EXPECT_LT(drr::test::max_abs(load_plain(path("back.csv")) - X), 1e-8);
}

TEST_F(CliTest, WrongColumnCountFailsWithMessage)
{
    save_csv(path("x.csv"), drr::test::gaussian(60, 4, 1));
    save_csv(path("y.csv"), drr::test::gaussian(10, 3, 2));
    ASSERT_EQ(run("fit -i " + path("x.csv") + " -m " + path("x.drr") + " --method pca").code, 0);
    auto r = run("transform -i " + path("y.csv") + " -m " + path("x.drr"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("d = "), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownSubcommandAndMissingInputFail)
{
    EXPECT_NE(run("frobnicate").code, 0);
    auto r = run("fit -i " + path("absent.csv") + " -m " + path("m.drr"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("drr_cli: error:"), std::string::npos) << r.err;
}

TEST_F(CliTest, SameSeedGivesIdenticalModels)
{
    save_csv(path("x.csv"), drr::test::curved_data(200, 3, 4));
    for (const char* name : {"a.drr", "b.drr"})
        ASSERT_EQ(run("fit -i " + path("x.csv") + " -m " + path(name) + " --seed 9 " + fast_fit()).code, 0);
    EXPECT_EQ(slurp(path("a.drr")), slurp(path("b.drr")));
}

TEST_F(CliTest, ConfigFileAppliesAndFlagsWin)
{
    save_csv(path("x.csv"), drr::test::curved_data(120, 3, 5));
    {
        std::ofstream cfg(path("c.ini"));
        cfg << "method = ppa\ndegree = 2\nthreads = 1\n";
    }
    ASSERT_EQ(run("fit --config " + path("c.ini") + " -i " + path("x.csv") + " -m " + path("a.drr")).code, 0);
    EXPECT_TRUE(std::holds_alternative<PpaModel>(load_model(path("a.drr"))));
    EXPECT_EQ(std::get<PpaModel>(load_model(path("a.drr"))).degree, 2);

    ASSERT_EQ(run("fit --config " + path("c.ini") + " --method pca -i " + path("x.csv") + " -m " + path("b.drr")).code,
              0);
    EXPECT_TRUE(std::holds_alternative<PcaModel>(load_model(path("b.drr"))));
}

TEST_F(CliTest, WrittenConfigReproducesSettings)
{
    save_csv(path("x.csv"), drr::test::curved_data(120, 3, 6));
    ASSERT_EQ(run("fit -i " + path("x.csv") + " -m " + path("a.drr") + " --method ppa --degree 2 --gamma-grid 0.5,2 "
                  "--write-config " + path("w.ini")).code,
              0);
    const std::string text = slurp(path("w.ini"));
    EXPECT_NE(text.find("degree"), std::string::npos) << text;
    ASSERT_EQ(run("fit --config " + path("w.ini") + " -m " + path("b.drr")).code, 0);
    EXPECT_EQ(slurp(path("a.drr")), slurp(path("b.drr")));
}

TEST_F(CliTest, GenerateManifold)
{
    auto r = run("gen-manifold --manifold difficult --samples 500 --seed 3 -o " + path("m.csv") + " --latent-output " +
                 path("uv.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const Matrix M = load_plain(path("m.csv"), true);
    EXPECT_EQ(M.rows(), 500);
    EXPECT_EQ(M.cols(), 3);
    EXPECT_EQ(load_plain(path("uv.csv"), true).cols(), 2);
    EXPECT_NE(run("gen-manifold -o " + path("n.csv")).code, 0);
}

TEST_F(CliTest, EvalReconstructionComparesModels)
{
    save_csv(path("x.csv"), drr::test::curved_data(200, 3, 7));
    ASSERT_EQ(run("fit -i " + path("x.csv") + " -m " + path("pca.drr") + " --method pca").code, 0);
    ASSERT_EQ(run("fit -i " + path("x.csv") + " -m " + path("drr.drr") + " " + fast_fit()).code, 0);
    auto r = run("eval-reconstruction -i " + path("x.csv") + " -m " + path("pca.drr") + " -m " + path("drr.drr"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("model,method,k,mae,mse,relative_mae,relative_mse", 0), 0u) << r.out;
    EXPECT_NE(r.out.find("drr"), std::string::npos);
}

TEST_F(CliTest, EvalClassifyRuns)
{
    Matrix D(200, 4);
    D.leftCols(3) = drr::test::gaussian(200, 3, 8);
    for (Index i = 0; i < 200; ++i) {
        D(i, 3) = static_cast<double>(i % 2);
        D(i, 0) += 3.0 * D(i, 3);
    }
    save_csv(path("l.csv"), D);
    auto r = run("eval-classify -i " + path("l.csv") + " --methods pca --train-size 100 --test-size 100 --seeds 2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST_F(CliTest, EvalRetrieveBuiltInTask)
{
    auto r = run("eval-retrieve --methods pca --ks 2,3 --samples 300 --seeds 1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}
