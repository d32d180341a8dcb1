#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "mtmerlin/coherence.hpp"
#include "mtmerlin/params_io.hpp"
#include "mtmerlin/preprocess.hpp"
#include "mtmerlin/slcs_io.hpp"
#include "test_support.hpp"

using namespace mtmerlin;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(MTMERLIN_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::slurp(log)};
}

std::string gbar_name(double g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "stack_gbar-%.4f.slcs", g);
  return buf;
}

}  // namespace

TEST_CASE("cli: simulate -> preprocess -> train -> despeckle -> evaluate") {
  testing::TempDir dir("cli_pipeline");
  const std::string d = dir / "";
  Run r = run("simulate -o " + d + "sim --size 64 --dates 3 --seed 3 --tau-sweep 0,2.5", d + "sim.log");
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const std::string s0 = d + "sim/" + gbar_name(exponential_average_coherence(3, 0.0));
  const std::string s1 = d + "sim/" + gbar_name(exponential_average_coherence(3, 2.5));
  REQUIRE(fs::exists(s0));
  REQUIRE(fs::exists(s1));
  CHECK(r.out.find("gamma_bar=") != std::string::npos);

  // Header bytes of the simulated stack.
  const std::string bytes = testing::slurp(s0);
  REQUIRE(bytes.size() == kSlcsHeaderSize + 3u * 64 * 64 * 2 * 8);
  CHECK(bytes.substr(0, 6) == std::string("SLCS\x01\x00", 6));
  CHECK(static_cast<unsigned char>(bytes[6]) == 3);
  CHECK(static_cast<unsigned char>(bytes[10]) == 64);
  CHECK(static_cast<unsigned char>(bytes[14]) == 64);
  CHECK(testing::slurp(s0 + ".meta").find("config_hash = ") != std::string::npos);

  SUBCASE("simulation is deterministic") {
    Run again = run("simulate -o " + d + "sim2 --size 64 --dates 3 --seed 3 --tau-sweep 0,2.5", d + "sim2.log");
    REQUIRE(again.code == 0);
    CHECK(testing::slurp(d + "sim2/" + fs::path(s0).filename().string()) == bytes);
    CHECK(testing::slurp(d + "sim2/" + fs::path(s1).filename().string()) == testing::slurp(s1));
  }

  SUBCASE("whitening off returns the centered input bit-exact") {
    Run p = run("preprocess -i " + s1 + " -o " + d + "off.slcs --whiten off", d + "off.log");
    REQUIRE_MESSAGE(p.code == 0, p.out);
    const ComplexStack in = read_slcs(fs::path(s1));
    const ComplexStack centered = recenter_spectrum(in, estimate_spectral_shift(in.plane(0)));
    CHECK(read_slcs(fs::path(d + "off.slcs")) == centered);
  }

  SUBCASE("full pipeline") {
    Run p = run("preprocess -i " + s1 + " -o " + d + "pre/w.slcs --ref-date 1 --whiten on --coh-window 7 --ds-quantile 0.999",
                d + "pre.log");
    REQUIRE_MESSAGE(p.code == 0, p.out);
    const auto at = [&](const char* s) { return p.out.find(s); };
    REQUIRE(at("stage=detect") != std::string::npos);
    CHECK(at("stage=detect") < at("stage=interfere"));
    CHECK(at("stage=interfere") < at("stage=whiten"));
    CHECK(at("stage=whiten") < at("stage=reinsert"));
    const ComplexStack in = read_slcs(fs::path(s1));
    const ComplexStack centered = recenter_spectrum(in, estimate_spectral_shift(in.plane(1)));
    const ComplexStack w = read_slcs(fs::path(d + "pre/w.slcs"));
    CHECK(w.plane(1).data == centered.plane(1).data);
    CHECK(w.plane(0).data != centered.plane(0).data);
    CHECK(fs::exists(d + "pre/w_coherence.slcs"));

    Run t = run("train -i " + d + "pre/w.slcs -o " + d + "net.mlp1 --epochs 5 --patch 32 --set arch.width=4 "
                "--set train.batches_per_epoch=2",
                d + "train.log");
    REQUIRE_MESSAGE(t.code == 0, t.out);
    CHECK(t.out.find("event=epoch epoch=4 loss=") != std::string::npos);
    const EstimatorParams params = read_params(fs::path(d + "net.mlp1"));
    CHECK(params.arch.in_channels == 3);
    CHECK(params.config_hash.size() == 16);
    CHECK(testing::slurp(d + "net.mlp1.loss.csv").rfind("# config_hash=" + params.config_hash, 0) == 0);

    Run ds = run("despeckle -p " + d + "net.mlp1 -i " + d + "pre/w.slcs -o " + d + "est.slcs", d + "ds.log");
    REQUIRE_MESSAGE(ds.code == 0, ds.out);
    const auto est = unpack_real_maps(read_slcs(fs::path(d + "est.slcs")));
    REQUIRE(est.size() == 1);
    for (double v : est[0].data) CHECK(v > 0.0);
    CHECK(testing::slurp(d + "est.pgm").rfind("P5\n# config_hash=", 0) == 0);

    const std::string truth = s1.substr(0, s1.size() - 5) + "_truth.slcs";
    const std::string eval_args = "evaluate --estimate " + d + "est.slcs --truth " + truth + " --set eval.ref=1 -o ";
    Run e1 = run(eval_args + d + "ev1", d + "ev1.log");
    Run e2 = run(eval_args + d + "ev2", d + "ev2.log");
    REQUIRE_MESSAGE(e1.code == 0, e1.out);
    REQUIRE(e2.code == 0);
    const std::string csv = testing::slurp(d + "ev1/psnr.csv");
    CHECK(csv.find("psnr_db,") != std::string::npos);
    CHECK(csv == testing::slurp(d + "ev2/psnr.csv"));

    SUBCASE("channel mismatch is a data error with an actionable message") {
      Run m = run("despeckle -p " + d + "net.mlp1 -i " + d + "pre/w.slcs -o " + d + "x.slcs --dates 0", d + "m.log");
      CHECK(m.code == 3);
      CHECK(m.out.find("select 3 dates or retrain") != std::string::npos);
    }
  }
}

TEST_CASE("cli: exit codes") {
  testing::TempDir dir("cli_codes");
  const std::string d = dir / "";
  REQUIRE(run("simulate -o " + d + "sim --size 32 --dates 2", d + "s.log").code == 0);
  const std::string stack = d + "sim/stack.slcs";
  CHECK(run("simulate -o " + d + "x --set scene.bogus=1", d + "a.log").code == 2);
  CHECK(run("simulate -o " + d + "x --set scene.size=abc", d + "b.log").code == 2);
  CHECK(run("frobnicate", d + "c.log").code == 2);
  {
    std::ofstream bad(d + "bad.cfg");
    bad << "scene.size = 32\nscene.size = 16\n";
  }
  Run dup = run("simulate -o " + d + "x -c " + d + "bad.cfg", d + "dup.log");
  CHECK(dup.code == 2);
  CHECK(dup.out.find("bad.cfg:2") != std::string::npos);
  {
    std::ofstream junk(d + "junk.slcs", std::ios::binary);
    junk << "not a stack";
  }
  CHECK(run("preprocess -i " + d + "junk.slcs -o " + d + "y.slcs", d + "d.log").code == 3);
  CHECK(run("train -i " + stack + " -o " + d + "n.mlp1 --epochs 20 --set train.lr=0:1e9 --set arch.width=4 "
            "--set train.batches_per_epoch=3 --patch 16",
            d + "e.log")
            .code == 4);
}
