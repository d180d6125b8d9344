#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "tvparx/io.hpp"
#include "tvparx/tvparx.hpp"

#ifndef TVPARX_CLI
#error "TVPARX_CLI must name the command-line binary"
#endif

using namespace tvparx;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tvparx_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args) const {
        const std::string cmd = std::string(TVPARX_CLI) + " " + args + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string& name) const {
        std::ifstream in(path(name), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream out(path(name), std::ios::binary);
        out << text;
    }

    fs::path dir_;
};

const char* kTvParams = R"({"omega":0.1,"beta":0.8,"delta_alpha":0.05,"phi_alpha":0.5,"kappa_alpha":0.1})";
const char* kParParams = R"({"omega":0.2,"beta":0.7,"delta_alpha":0.3,"phi_alpha":0,"kappa_alpha":0})";

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("fit"), 2);
    EXPECT_EQ(run("fit --input " + path("missing.csv") + " --out " + path("o.json")), 2);
    EXPECT_EQ(run("nonsense"), 2);
    write("p.json", kTvParams);
    EXPECT_EQ(run("simulate --params " + path("p.json") + " --T 1 --out " + path("s.csv")), 2);
    const auto err = read("stderr.txt");
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
    EXPECT_TRUE(Json::parse(err).contains("error"));
}

TEST_F(Cli, DataErrorsExitFour) {
    write("p.json", kTvParams);
    write("neg.csv", "y\n1\n-2\n3\n");
    EXPECT_EQ(run("filter --input " + path("neg.csv") + " --params " + path("p.json") + " --out " + path("f.csv")), 4);
    const auto err = Json::parse(read("stderr.txt"));
    EXPECT_EQ(err["error"], "NegativeCount");

    write("bad.json", "{not json");
    write("ok.csv", "y\n1\n2\n3\n");
    EXPECT_EQ(run("filter --input " + path("ok.csv") + " --params " + path("bad.json") + " --out " + path("f.csv")), 4);
    EXPECT_EQ(Json::parse(read("stderr.txt"))["error"], "ParseError");
}

TEST_F(Cli, FitThenFilterIsBitIdentical) {
    write("p.json", kTvParams);
    ASSERT_EQ(run("simulate --params " + path("p.json") + " --T 800 --seed 3 --out " + path("s.csv")), 0);
    const int rc = run("fit --input " + path("s.csv") + " --model tv-parx --starts 3 --seed 1 --threads 1 --with-path --out " +
                       path("fit.json"));
    ASSERT_TRUE(rc == 0 || rc == 3) << rc;
    ASSERT_EQ(run("filter --input " + path("s.csv") + " --params " + path("fit.json") + " --out " + path("path.csv")), 0);

    const auto report = Json::parse(read("fit.json"));
    const auto& stored = report["path"]["lambda"];
    std::istringstream csv(read("path.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line.substr(0, 22), "t,y,lambda,log_lambda,");
    std::size_t t = 0;
    while (std::getline(csv, line)) {
        std::istringstream row(line);
        std::string idx, y, lam;
        std::getline(row, idx, ',');
        std::getline(row, y, ',');
        std::getline(row, lam, ',');
        ASSERT_LT(t, stored.size());
        EXPECT_EQ(std::stod(lam), stored[t].get<double>()) << "t=" << t;
        ++t;
    }
    EXPECT_EQ(t, 800u);
}

TEST_F(Cli, FitRecoversStaticPar) {
    write("p.json", kParParams);
    ASSERT_EQ(run("simulate --params " + path("p.json") + " --T 5000 --seed 8 --with-latent --out " + path("s.csv")), 0);
    ASSERT_EQ(run("fit --input " + path("s.csv") + " --model parx --starts 2 --seed 2 --out " + path("fit.json")), 0);
    const auto r = Json::parse(read("fit.json"));
    const auto& th = r["theta_hat"];
    const auto& se = r["std_errors"]["hessian"];
    EXPECT_NEAR(th["omega"].get<double>(), 0.2, 3 * se["omega"].get<double>());
    EXPECT_NEAR(th["beta"].get<double>(), 0.7, 3 * se["beta"].get<double>());
    EXPECT_NEAR(th["delta_alpha"].get<double>(), 0.3, 3 * se["delta_alpha"].get<double>());
    EXPECT_EQ(r["k"], 3);
    EXPECT_EQ(r["model"], "parx");
}

TEST_F(Cli, FitIsThreadIndependent) {
    write("p.json", kTvParams);
    ASSERT_EQ(run("simulate --params " + path("p.json") + " --T 600 --seed 5 --out " + path("s.csv")), 0);
    const std::string base = "fit --input " + path("s.csv") + " --starts 4 --seed 9 --covariance hessian ";
    const int a = run(base + "--threads 1 --out " + path("a.json"));
    const int b = run(base + "--threads 4 --out " + path("b.json"));
    EXPECT_EQ(a, b);
    EXPECT_EQ(read("a.json"), read("b.json"));
}

TEST_F(Cli, CovariatesAndStaticGammaFlag) {
    write("p.json", R"({"omega":0.1,"beta":0.6,"delta_alpha":0.05,"phi_alpha":0.3,"kappa_alpha":0.1,
                        "psi":[0.2],"delta_gamma":[0.1,0.05],"phi_gamma":[0,0],"kappa_gamma":[0,0]})");
    std::string cov = "x:RV,x:LI,d:q\n";
    Rng rng(1);
    for (int t = 0; t < 1200; ++t) {
        cov += format_double(rng.normal()) + "," + format_double(rng.normal()) + "," + (t % 4 == 0 ? "1" : "0") + "\n";
    }
    write("cov.csv", cov);
    ASSERT_EQ(run("simulate --params " + path("p.json") + " --T 1200 --seed 2 --covariates " + path("cov.csv") +
                  " --out " + path("s.csv")),
              0);
    const int rc = run("fit --input " + path("s.csv") + " --no-tv-gamma RV,LI --starts 2 --out " + path("fit.json"));
    ASSERT_TRUE(rc == 0 || rc == 3);
    const auto r = Json::parse(read("fit.json"));
    EXPECT_EQ(r["k"], 2 + 1 + 3 + 1 + 1);
    EXPECT_EQ(r["spec"]["covariates"], Json::parse(R"(["RV","LI"])"));
    EXPECT_EQ(run("fit --input " + path("s.csv") + " --no-tv-gamma XX --out " + path("fit.json")), 2);

    write("future.csv", "x:RV,x:LI,d:q\n0.1,0.2,0\n0.3,0.4,1\n");
    EXPECT_EQ(run("forecast --input " + path("s.csv") + " --params " + path("fit.json") +
                  " --horizon 3 --paths 500 --seed 1 --future " + path("future.csv") + " --out " + path("fc.json")),
              0);
    EXPECT_EQ(Json::parse(read("fc.json"))["forecasts"].size(), 3u);
    EXPECT_EQ(run("forecast --input " + path("s.csv") + " --params " + path("fit.json") +
                  " --horizon 3 --paths 500 --out " + path("fc.json")),
              2);
}

TEST_F(Cli, ForecastIsSeedDeterministic) {
    write("p.json", kTvParams);
    ASSERT_EQ(run("simulate --params " + path("p.json") + " --T 300 --seed 1 --out " + path("s.csv")), 0);
    const std::string base = "forecast --input " + path("s.csv") + " --params " + path("p.json") +
                             " --horizon 5 --paths 2000 --seed 4 --out ";
    ASSERT_EQ(run(base + path("a.json")), 0);
    ASSERT_EQ(run(base + path("b.json")), 0);
    EXPECT_EQ(read("a.json"), read("b.json"));
}

TEST_F(Cli, NotConvergedExitsThree) {
    write("p.json", kTvParams);
    ASSERT_EQ(run("simulate --params " + path("p.json") + " --T 400 --seed 3 --out " + path("s.csv")), 0);
    EXPECT_EQ(run("fit --input " + path("s.csv") + " --starts 1 --max-iter 1 --out " + path("fit.json")), 3);
    EXPECT_EQ(Json::parse(read("stderr.txt"))["error"], "NotConverged");
    const auto r = Json::parse(read("fit.json"));
    EXPECT_EQ(r["convergence"]["converged"], false);
}

TEST_F(Cli, DegenerateDataExitsFour) {
    std::string csv = "y\n";
    for (int t = 0; t < 100; ++t) csv += "0\n";
    write("z.csv", csv);
    EXPECT_EQ(run("fit --input " + path("z.csv") + " --out " + path("fit.json")), 4);
    EXPECT_EQ(Json::parse(read("fit.json"))["convergence"]["status"], "degenerate_data");
}

TEST_F(Cli, McFormatAndThreadIndependence) {
    const std::string base = "mc --delta-list 4 --gamma-list 1 --T-list 250 --reps 3 --seed 11 ";
    ASSERT_EQ(run(base + "--threads 1 --out " + path("a.csv") + " --json " + path("a.json") + " --bands " + path("b.csv")), 0);
    ASSERT_EQ(run(base + "--threads 3 --out " + path("b.csv.out")), 0);
    const auto a = read("a.csv");
    EXPECT_EQ(a, read("b.csv.out"));
    EXPECT_EQ(a.substr(0, a.find('\n')), "delta,gamma,T,model,mean_rmse,n_ok,n_fail");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
    const auto j = Json::parse(read("a.json"));
    EXPECT_EQ(j["cells"].size(), 2u);
    EXPECT_EQ(j["reps"], 3);
    const auto bands = read("b.csv");
    EXPECT_EQ(std::count(bands.begin(), bands.end(), '\n'), 1 + 2 * 250);
}
