#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "prefcf/cli.hpp"
#include "prefcf/config.hpp"
#include "prefcf/error.hpp"
#include "prefcf/persist.hpp"
#include "prefcf/rating_table.hpp"

namespace fs = std::filesystem;
using namespace prefcf;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("prefcf-test-" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name, const std::string& content = {}) const {
    const auto p = path / name;
    if (!content.empty()) std::ofstream(p) << content;
    return p.string();
  }
};

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kMovieLens =
    "196\t242\t3\t881250949\n"
    "186\t302\t3\t891717742\n"
    "22\t377\t1\t878887116\n"
    "244\t51\t2\t880606923\n"
    "166\t346\t1\t886397596\n"
    "298\t474\t4\t884182806\n"
    "115\t265\t2\t881171488\n"
    "253\t465\t5\t891628467\n"
    "305\t451\t3\t886324817\n"
    "6\t86\t3\t883603013\n";

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("empty configuration keeps the defaults") {
    RunConfig c;
    std::istringstream in("# nothing here\n\n   \n");
    parse_config(c, in);
    CHECK(c.model == ModelKind::dm);
    CHECK(c.seed == 42);
    CHECK(c.params.dm.k_x == 5);
    CHECK(c.params.dm.k_p == 3);
    CHECK(c.params.dm.k_r == 10);
    CHECK(c.params.sigma == 1.0);
    CHECK(c.params.schedule.has_value());
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("every key is accepted") {
    CHECK(config_keys().size() == 26);
    RunConfig c;
    for (auto key : config_keys()) {
      std::string value = "2";
      if (key == "model") value = "mp";
      else if (key == "mode") value = "expected";
      else if (key == "anneal") value = "true";
      else if (key == "given_selection") value = "seeded-random";
      else if (key == "tol" || key == "fold_in_tol" || key == "beta_start" || key == "perturbation")
        value = "0.5";
      else if (key == "beta_max") value = "1";
      CHECK_NOTHROW(apply_setting(c, key, value));
    }
    CHECK(c.model == ModelKind::mp);
    CHECK(c.params.mp_k_y == 2);
    CHECK(c.given_selection == GivenSelection::seeded_random);
  }

  TEST_CASE("values are parsed and validated") {
    RunConfig c;
    std::istringstream in("k_x = 4  # item classes\nsigma=0.25\nanneal=false\nmodel=bc\n");
    parse_config(c, in);
    CHECK(c.params.dm.k_x == 4);
    CHECK(c.params.sigma == 0.25);
    CHECK_FALSE(c.params.schedule.has_value());
    CHECK(c.model == ModelKind::bc);

    apply_setting(c, "sigma", "0");
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("errors name the key and the line") {
    RunConfig c;
    try {
      apply_setting(c, "k_x", "three");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("k_x") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_setting(c, "colour", "red"), ConfigError);
    CHECK_THROWS_AS(apply_assignment(c, "no equals sign"), ConfigError);
    std::istringstream in("seed=1\n\nbogus=2\n");
    try {
      parse_config(c, in);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
      CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config_file(c, "/nonexistent/prefcf.conf"), IoError);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"convert"}).code == 2);
    CHECK(run({"convert", "--input", "x", "--wat"}).code == 2);
    CHECK(run({"--help"}).code == 0);
  }

  TEST_CASE("library failures exit with 1") {
    const auto r = run({"convert", "--input", "/nonexistent/u.data"});
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
    TempDir d;
    const auto data = d.file("u.data", kMovieLens);
    CHECK(run({"convert", "--input", data, "--format", "spreadsheet"}).code == 1);
    CHECK(run({"train", "--data", data, "--format", "movielens-100k", "--out",
               d.file("m.json"), "--set", "sigma=0"})
              .code == 1);
    CHECK(run({"train", "--data", data, "--format", "movielens-100k", "--out",
               d.file("m.json"), "--set", "nonsense=1"})
              .code == 1);
  }

  TEST_CASE("convert movielens to canonical tsv") {
    TempDir d;
    const auto data = d.file("u.data", kMovieLens);
    const auto r = run({"convert", "--input", data});
    REQUIRE(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 11);
    CHECK(ls[0] == "# scale=5");
    CHECK(ls[1] == "196\t242\t3");
    CHECK(ls[10] == "6\t86\t3");

    const auto out = d.file("u.tsv");
    REQUIRE(run({"convert", "--input", data, "--output", out}).code == 0);
    CHECK(slurp(out) == r.out);
    const auto table = load_dataset(out, DataFormat::canonical_tsv);
    CHECK(table.size() == 10);
  }

  TEST_CASE("train, then predict from the saved model") {
    TempDir d;
    const auto data = d.file("synth.tsv");
    REQUIRE(run({"synth", "--users", "30", "--items", "12", "--ratings-per-user", "6", "--out",
                 data})
                .code == 0);
    const auto model = d.file("dm.json");
    const auto r = run({"train", "--data", data, "--out", model, "--set", "max_iters=20"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("trained dm on 30 users, 12 items, ", 0) == 0);
    const auto saved = load_model_file(model);
    const auto& p = std::get<DmParams>(saved.params);
    CHECK(p.k_x == 5);
    CHECK(p.k_p == 3);
    CHECK(p.k_r == 10);
    CHECK(p.k_pref == 5);

    const auto table = load_dataset(data, DataFormat::canonical_tsv);
    const auto l0 = table.item_label(0), l1 = table.item_label(1), l2 = table.item_label(2);
    const auto observed = d.file("obs.txt", "# me\n" + l0 + " 5\n" + l1 + " 2\n");
    const auto pr = run({"predict", "--model", model, "--observed", observed, "--items",
                         l1 + "," + l2});
    REQUIRE(pr.code == 0);
    const auto ls = lines(pr.out);
    REQUIRE(ls.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto tab = ls[i].find('\t');
      REQUIRE(tab != std::string::npos);
      CHECK(ls[i].substr(0, tab) == (i == 0 ? l1 : l2));
      const double v = std::stod(ls[i].substr(tab + 1));
      CHECK(v >= 1.0);
      CHECK(v <= 5.0);
      CHECK(ls[i].size() - tab - 1 == 6);  // four decimals
    }
    CHECK(run({"predict", "--model", model, "--observed", observed, "--items", "no-such-item"})
              .code == 1);

    const auto mem = run({"predict", "--memory", "pcc", "--data", data, "--observed", observed,
                          "--items", l2});
    CHECK(mem.code == 0);
    CHECK(lines(mem.out).size() == 1);
    CHECK(run({"predict", "--memory", "dm", "--data", data, "--observed", observed, "--items",
               l2})
              .code == 1);
    CHECK(run({"predict", "--model", model, "--memory", "pd", "--observed", observed}).code == 2);
  }

  TEST_CASE("config file, --set and --seed precedence") {
    TempDir d;
    const auto data = d.file("synth.tsv");
    REQUIRE(run({"synth", "--users", "20", "--items", "10", "--ratings-per-user", "5", "--out",
                 data})
                .code == 0);
    const auto conf = d.file("run.conf", "model=am\nam_k=2\nmax_iters=5\nseed=3\n");
    const auto m1 = d.file("a.json");
    REQUIRE(run({"train", "--data", data, "--out", m1, "--config", conf}).code == 0);
    CHECK(load_model_file(m1).kind == ModelKind::am);
    CHECK(std::get<AmParams>(load_model_file(m1).params).k == 2);

    const auto m2 = d.file("b.json");
    REQUIRE(run({"train", "--data", data, "--out", m2, "--config", conf, "--set", "am_k=3"})
                .code == 0);
    CHECK(std::get<AmParams>(load_model_file(m2).params).k == 3);

    // --seed beats the file's seed; seed 3 from the file equals --seed 3.
    const auto m3 = d.file("c.json"), m4 = d.file("d.json");
    REQUIRE(run({"train", "--data", data, "--out", m3, "--config", conf, "--set", "seed=9",
                 "--seed", "3"})
                .code == 0);
    CHECK(slurp(m3) == slurp(m1));
    REQUIRE(run({"train", "--data", data, "--out", m4, "--config", conf, "--seed", "4"}).code ==
            0);
    CHECK(slurp(m4) != slurp(m1));
  }

  TEST_CASE("evaluate all eight models") {
    TempDir d;
    const auto data = d.file("synth.tsv");
    REQUIRE(run({"synth", "--users", "60", "--items", "40", "--ratings-per-user", "25", "--out",
                 data})
                .code == 0);
    const auto r = run({"evaluate", "--data", data, "--models", "dm,baseline,mp,am,bc,pd,pcc,vs",
                        "--train-users", "40", "--set", "max_iters=5", "--set", "anneal=false",
                        "--set", "mp_max_pairs=30"});
    REQUIRE(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 25);
    CHECK(ls[0] == "model\ttrain_users\tgiven\tmae\tn_pred\tn_abstain\tseconds");
    CHECK(ls[1].rfind("dm\t40\t5\t", 0) == 0);
    CHECK(ls[3].rfind("dm\t40\t20\t", 0) == 0);
    CHECK(ls[24].rfind("vs\t40\t20\t", 0) == 0);
    for (std::size_t i = 1; i < ls.size(); ++i) {
      CHECK(ls[i].find("failed") == std::string::npos);
      CHECK(ls[i].substr(ls[i].size() - 3) == "\tNA");
    }
    CHECK(run({"evaluate", "--data", data, "--train-users", "60"}).code == 1);
    CHECK(run({"evaluate", "--data", data}).code == 2);
  }

  TEST_CASE("synth is deterministic in its seed") {
    const auto a = run({"synth", "--users", "15", "--items", "25", "--seed", "5"});
    const auto b = run({"synth", "--users", "15", "--items", "25", "--seed", "5"});
    const auto c = run({"synth", "--users", "15", "--items", "25", "--seed", "6"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
    CHECK(lines(a.out).size() == 1 + 15 * 20);
    CHECK(run({"synth", "--generator", "random", "--users", "10", "--items", "25"}).code == 0);
    CHECK(run({"synth", "--generator", "lumpy"}).code == 1);
  }
}
