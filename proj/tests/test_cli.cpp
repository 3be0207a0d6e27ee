#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string cli = USM_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_smoke_config(const std::string& path) {
  std::ofstream out(path);
  out << R"([simulator]
users = 80
items = 40
authors = 8
impressions_per_user = 15
survey_show_prob = 0.7
[model]
backbone_dims = [12, 8]
head_dims = [4, 1]
embedding_dim = 4
hash_bits = 6
[train]
epochs = 1
batch_size = 64
[experiment]
seeds = [1]
arms = ["baseline", "debias"]
[ranking]
n_requests = 20
n_candidates = 10
)";
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 2") {
  CHECK(run("") == 2);
  CHECK(run("simulate --bogus-flag x") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("train --data nowhere_at_all --arm baseline") == 2);
}

TEST_CASE("cli: simulate, train, evaluate pipeline") {
  const std::string dir = "test_cli_run";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_smoke_config(dir + "/cfg.toml");

  CHECK(run("simulate --config " + dir + "/cfg.toml --seed 1 --out " + dir +
            "/data") == 0);
  CHECK(fs::exists(dir + "/data/train.jsonl"));
  CHECK(fs::exists(dir + "/data/eval.jsonl"));
  CHECK(fs::exists(dir + "/data/oracle.jsonl"));
  CHECK(fs::exists(dir + "/data/manifest.json"));

  // debias arm without a submit model: usage error naming the dependency
  CHECK(run("train --config " + dir + "/cfg.toml --data " + dir +
            "/data --arm debias --seed 1 --models " + dir + "/models") == 2);

  CHECK(run("train --config " + dir + "/cfg.toml --data " + dir +
            "/data --arm submit --seed 1 --models " + dir + "/models") == 0);
  CHECK(run("train --config " + dir + "/cfg.toml --data " + dir +
            "/data --arm baseline --seed 1 --models " + dir + "/models") == 0);
  CHECK(run("train --config " + dir + "/cfg.toml --data " + dir +
            "/data --arm debias --seed 1 --models " + dir + "/models") == 0);
  CHECK(fs::exists(dir + "/models/baseline_seed1.bin"));
  CHECK(fs::exists(dir + "/models/debias_seed1.bin"));

  CHECK(run("evaluate --config " + dir + "/cfg.toml --data " + dir +
            "/data --models " + dir + "/models --arms baseline,debias "
            "--seed 1 --out " + dir + "/report") == 0);
  CHECK(fs::exists(dir + "/report/report.csv"));

  CHECK(run("abtest --config " + dir + "/cfg.toml --arms baseline,debias "
            "--models " + dir + "/models --seed 1 --out " + dir +
            "/ab.csv") == 0);
  CHECK(fs::exists(dir + "/ab.csv"));

  CHECK(run("feature-importance --model " + dir +
            "/models/baseline_seed1.bin --data " + dir + "/data") == 0);

  CHECK(run("grad-check --topology lhuc_se --seed 1 --batch 4 --coords 60") ==
        0);

  // rank: build a minimal request file
  {
    std::ofstream req(dir + "/requests.json");
    req << R"({"requests":[{"user":{"user_id":1,"attrs":{"language":0,)"
        << R"("region":1,"device":0,"activity":0.3}},"weights":)"
        << R"({"inappropriate":-2.0},"candidates":[)"
        << R"({"item_id":1,"author_id":3,"other_score":0.1},)"
        << R"({"item_id":2,"author_id":4,"other_score":0.2}]}]})";
  }
  CHECK(run("rank --model " + dir + "/models/baseline_seed1.bin --requests " +
            dir + "/requests.json -k 1 --out " + dir + "/ranked.json") == 0);
  CHECK(fs::exists(dir + "/ranked.json"));

  fs::remove_all(dir);
}
