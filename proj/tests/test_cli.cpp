// Copyright 2026 The sspd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "sspd/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "sspd_test_cli";

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args) {
  const std::string cmd = std::string(SSPD_CLI_PATH) + " " + args + " >" + (kDir / "stdout").string() + " 2>" +
                          (kDir / "stderr").string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(kDir / "stdout");
  r.err = slurp(kDir / "stderr");
  return r;
}

std::string p(const std::string& name) { return (kDir / name).string(); }

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("command line round trip") {
  fs::remove_all(kDir);
  fs::create_directories(kDir / "data");

  // Small scenes and a small network configuration keep this fast.
  for (int i = 0; i < 3; ++i) {
    const Run r = cli("synth --kind cube_field --n 1500 --extent 30 --seed " + std::to_string(i) + " --out " +
                      p("data/s" + std::to_string(i) + ".xyz"));
    REQUIRE(r.status == 0);
  }
  CHECK(sspd::read_cloud(kDir / "data/s0.xyz").size() == 1500);

  std::ofstream(kDir / "run.cfg") << "k=8\nc=8\nsubsample=600\niterations=3\nbatch_size=2\nr_cluster=3\n"
                                     "eval.fps_keypoints=48\niss.salient_radius=2\niss.nms_radius=2.5\n";

  SUBCASE("train, register, evaluate, precision, keypoints") {
    Run r = cli("train --config " + p("run.cfg") + " --data " + p("data") + " --out " + p("m.ckpt"));
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(fs::exists(kDir / "m.ckpt"));
    CHECK(count_lines(slurp(kDir / "m_log.csv")) == 4);

    // Cloud b is cloud a moved by a known transform.
    sspd::RigidTransformd tf;
    tf.rotation = sspd::rotation_z(0.3);
    tf.translation = sspd::Vector3d(1.0, -2.0, 0.5);
    sspd::write_transform(tf, kDir / "gt.txt");
    sspd::write_cloud(sspd::apply_transform(sspd::read_cloud(kDir / "data/s0.xyz"), tf), kDir / "b.xyz");

    r = cli("register --ckpt " + p("m.ckpt") + " --cloud-a " + p("data/s0.xyz") + " --cloud-b " + p("b.xyz") +
            " --gt " + p("gt.txt") + " --detector fps --config " + p("run.cfg") + " --out " + p("reg.csv"));
    REQUIRE_MESSAGE(r.status == 0, r.err);
    std::istringstream values(r.out);
    int numbers = 0;
    for (double v; values >> v;) ++numbers;
    CHECK(numbers == 12);
    CHECK(slurp(kDir / "reg.csv").starts_with("pair_id,rte_m,rre_deg,success,iterations,inliers\n"));

    std::ofstream(kDir / "pairs.csv") << "cloud_a,cloud_b,gt_file\ndata/s0.xyz,b.xyz,gt.txt\n"
                                         "data/s0.xyz,b.xyz,gt.txt\n";
    r = cli("evaluate --ckpt " + p("m.ckpt") + " --pairs " + p("pairs.csv") + " --detector fps --config " +
            p("run.cfg") + " --out " + p("eval.csv"));
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(r.out.find("/2 pairs registered successfully") != std::string::npos);
    CHECK(count_lines(slurp(kDir / "eval.csv")) == 3);

    r = cli("precision --ckpt " + p("m.ckpt") + " --pairs " + p("pairs.csv") + " --thresholds 0.5,1,2 --detector fps" +
            " --config " + p("run.cfg") + " --out " + p("prec.csv"));
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(slurp(kDir / "prec.csv").starts_with("threshold_m,precision\n0.5,"));
    CHECK(cli("precision --ckpt " + p("m.ckpt") + " --pairs " + p("pairs.csv") + " --thresholds 2,1 --out " +
              p("prec.csv"))
              .status != 0);

    r = cli("keypoints --cloud " + p("data/s0.xyz") + " --detector fps --config " + p("run.cfg") + " --out " +
            p("kp.csv"));
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(count_lines(slurp(kDir / "kp.csv")) == 49);
  }

  SUBCASE("gradcheck") {
    const Run r = cli("gradcheck");
    CHECK_MESSAGE(r.status == 0, r.out);
    CHECK(r.out.find("all passed") != std::string::npos);
  }

  SUBCASE("errors print ERROR and exit nonzero") {
    const auto fails = [](const Run& r) {
      CHECK(r.status != 0);
      CHECK(r.err.starts_with("ERROR:"));
    };
    fails(cli(""));
    fails(cli("frobnicate"));
    fails(cli("synth --kind forest --out " + p("x.xyz")));
    fails(cli("synth --n 0 --out " + p("x.xyz")));
    fails(cli("keypoints --cloud " + p("missing.xyz") + " --detector fps --out " + p("kp.csv")));
    fails(cli("keypoints --cloud " + p("data/s0.xyz") + " --detector sift --out " + p("kp.csv")));
    std::ofstream(kDir / "bad.cfg") << "k=8\nwhat=1\n";
    const Run bad = cli("train --config " + p("bad.cfg") + " --data " + p("data") + " --out " + p("m2.ckpt"));
    fails(bad);
    CHECK(bad.err.find(":2: unknown key") != std::string::npos);
    std::ofstream(kDir / "junk.ckpt") << "not a checkpoint";
    fails(cli("register --ckpt " + p("junk.ckpt") + " --cloud-a " + p("data/s0.xyz") + " --cloud-b " +
              p("data/s1.xyz") + " --detector fps --out " + p("r.csv")));
    fails(cli("train --config " + p("run.cfg") + " --data " + p("nowhere") + " --out " + p("m3.ckpt")));
  }

  fs::remove_all(kDir);
}
