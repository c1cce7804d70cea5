#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "ssb/marginals.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "ssb_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(SSB_CLI_PATH) + " " + args + " > " + at("last.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("generate presets give the documented shapes") {
  REQUIRE(run("generate --preset matern -o " + at("gen1")) == 0);
  const ssb::Dataset d = ssb::load_snapshots(at("gen1/data.csv"));
  CHECK(d.snapshots.steps() == 21);
  CHECK(d.snapshots.size(0) == 20);
  CHECK(d.snapshots.dim() == 1);
  CHECK(d.truth.has_value());

  REQUIRE(run("generate --preset matern2d -o " + at("gen2")) == 0);
  const ssb::Dataset d2 = ssb::load_snapshots(at("gen2/data.csv"));
  CHECK(d2.snapshots.steps() == 21);
  CHECK(d2.snapshots.size(0) == 25);
  CHECK(d2.snapshots.dim() == 2);

  const json echo = read_json(at("gen2/config.json"));
  CHECK(echo["config"]["preset"] == "matern2d");
  CHECK(echo["shape"]["n"] == 25);
}

TEST_CASE("generate is reproducible and records the config hash") {
  REQUIRE(run("generate --preset tristable -s seeds.data=4 -o " + at("rep1")) == 0);
  REQUIRE(run("generate --preset tristable -s seeds.data=4 -o " + at("rep2")) == 0);
  CHECK(slurp(at("rep1/data.csv")) == slurp(at("rep2/data.csv")));
  const std::string echo = slurp(at("rep1/config.json"));
  REQUIRE(run("generate --preset tristable -s seeds.data=4 -o " + at("rep1")) == 0);
  CHECK(slurp(at("rep1/config.json")) == echo);
  const std::string hash = read_json(at("rep1/config.json"))["config_hash"];
  CHECK(hash.size() == 16);
  CHECK(slurp(at("rep1/data.csv")).starts_with("# config_hash=" + hash + "\n"));
  REQUIRE(run("generate --preset tristable -s seeds.data=5 -o " + at("rep3")) == 0);
  CHECK(slurp(at("rep1/data.csv")) != slurp(at("rep3/data.csv")));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run("generate -s dataset.name=nope -o " + at("bad")) == 2);
  CHECK(run("solve -s no.such.key=1") == 2);
  CHECK(run("solve -s kernel.c=0") == 2);
  CHECK(run("solve -s kernel.nu=abc") == 2);
  CHECK(run("solve --preset nope") == 2);
  CHECK(run("solve -i " + at("missing.csv")) == 2);
  CHECK(run("solve -c " + at("missing.cfg")) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("config layering: preset < file < flags") {
  write(at("run.cfg"), "# comment\npreset = petal\nkernel.c = 2   # trailing\nsolver.tol = 1e-6\n");
  REQUIRE(run("solve --dry-run -c " + at("run.cfg") + " -s kernel.c=3 -o " + at("dry")) == 0);
  const json j = json::parse(slurp(at("last.log")));
  CHECK(j["config"]["kernel.c"] == "3");
  CHECK(j["config"]["solver.tol"] == "1e-6");
  CHECK(j["config"]["kernel.nu"] == "1.5");
  CHECK(j["config"]["basis.M"] == "20");
  CHECK(j["config"]["kernel.lengthscale"] == "3");
  // dry runs write nothing
  CHECK_FALSE(fs::exists(at("dry")));

  REQUIRE(run("solve --dry-run --preset petal") == 0);
  const json p = json::parse(slurp(at("last.log")));
  CHECK(p["config"]["kernel.c"] == "0.5");
  CHECK(p["config"]["basis.M"] == "20");
}

TEST_CASE("solve on a tiny feasible instance") {
  const std::string common = "-s dataset.n=3 -s grid.K=2 -s basis.M=32 -s kernel.lengthscale=1 -o " + at("tiny");
  REQUIRE(run("solve " + common) == 0);
  const json r = read_json(at("tiny/solve_report.json"));
  CHECK(r["converged"] == true);
  CHECK(r["max_tv"].get<double>() < 1e-8);
  CHECK(r.contains("config_hash"));
  CHECK(fs::exists(at("tiny/gamma.bin")));
  CHECK(fs::exists(at("tiny/messages.bin")));
  const std::string gamma = slurp(at("tiny/gamma.bin")), msgs = slurp(at("tiny/messages.bin"));
  REQUIRE(run("solve " + common) == 0);
  CHECK(slurp(at("tiny/gamma.bin")) == gamma);
  CHECK(slurp(at("tiny/messages.bin")) == msgs);

  // sampling picks up the cache
  REQUIRE(run("sample " + common + " -s sample.n=7 -s seeds.sample=3") == 0);
  CHECK(slurp(at("last.log")).find("cached") != std::string::npos);
  const std::string first = slurp(at("tiny/samples.csv"));
  REQUIRE(run("sample " + common + " -s sample.n=7 -s seeds.sample=3") == 0);
  CHECK(slurp(at("tiny/samples.csv")) == first);

  std::istringstream in(first);
  std::string line;
  std::set<std::string> ids;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.starts_with('#') || line.starts_with("sample")) continue;
    ids.insert(line.substr(0, line.find(',')));
    ++rows;
  }
  CHECK(ids.size() == 7);
  CHECK(rows == 7 * 3);

  REQUIRE(run("argmax " + common) == 0);
  CHECK(fs::exists(at("tiny/argmax.csv")));
}

TEST_CASE("disconnected supports exit with 3") {
  write(at("far.csv"), "t_index,dim_0\n0,0.0\n0,0.1\n1,40.0\n1,40.1\n");
  CHECK(run("solve -i " + at("far.csv") + " -s grid.horizon=0.01 -s basis.M=4 -o " + at("far")) == 3);
}

TEST_CASE("zero samples write only the header") {
  REQUIRE(run("sample -s dataset.n=3 -s grid.K=2 -s sample.n=0 -o " + at("zero")) == 0);
  std::istringstream in(slurp(at("zero/samples.csv")));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].starts_with("# config_hash="));
  CHECK(lines[1] == "sample,t_index,support,dim_0");
}

TEST_CASE("oracle check on the small OU fixture") {
  REQUIRE(run("oracle-check -s kernel.nu=0.5 -s grid.K=3 -s dataset.n=3 -o " + at("oracle")) == 0);
  const json j = read_json(at("oracle/oracle_check.json"));
  CHECK(j["max_iterate_gap"].get<double>() < 1e-10);
  CHECK(j["pass"] == true);
  CHECK(j["iterations"] == 10);
}

TEST_CASE("evaluate") {
  write(at("cloud.csv"), "dim_0,dim_1\n0.0,1.0\n2.0,3.0\n-1.0,0.5\n");
  REQUIRE(run("evaluate -s evaluate.mode=cloud -s evaluate.predicted=" + at("cloud.csv") +
              " -s evaluate.reference=" + at("cloud.csv") + " -o " + at("eval")) == 0);
  const json j = read_json(at("eval/metrics.json"));
  CHECK(j["cloud"]["w1"] == 0.0);
  CHECK(j["cloud"]["mmd_gauss"] == 0.0);
  CHECK(j["cloud"]["mmd_id"] == 0.0);

  write(at("empty.csv"), "dim_0,dim_1\n");
  CHECK(run("evaluate -s evaluate.mode=cloud -s evaluate.predicted=" + at("empty.csv") +
            " -s evaluate.reference=" + at("cloud.csv") + " -o " + at("eval")) == 4);

  // tracking needs labels
  write(at("nolabels.csv"), "t_index,dim_0\n0,0.0\n1,1.0\n");
  write(at("paths.csv"), "sample,t_index,support,dim_0\n0,0,0,0.0\n0,1,0,1.0\n");
  CHECK(run("evaluate -i " + at("nolabels.csv") + " -s evaluate.samples=" + at("paths.csv") + " -o " + at("eval")) == 4);

  // truth scored against itself
  write(at("labels.csv"), "t_index,dim_0,label\n0,0.0,0\n0,5.0,1\n1,1.0,0\n1,6.0,1\n");
  write(at("truth_paths.csv"), "sample,t_index,support,dim_0\n0,0,0,0.0\n0,1,0,1.0\n1,0,1,5.0\n1,1,1,6.0\n");
  REQUIRE(run("evaluate -i " + at("labels.csv") + " -s evaluate.samples=" + at("truth_paths.csv") + " -o " +
              at("eval")) == 0);
  const json t = read_json(at("eval/metrics.json"));
  CHECK(t["tracking"]["jump_p"] == 0.0);
  CHECK(t["tracking"]["traj_acc"] == 1.0);
}

TEST_CASE("lot and bench") {
  REQUIRE(run("generate -s dataset.n=15 -s grid.K=3 -o " + at("lotdata")) == 0);
  REQUIRE(run("lot -i " + at("lotdata/data.csv") + " -s lot.j=2 -s basis.M=8 -o " + at("lot")) == 0);
  const json j = read_json(at("lot/lot.json"));
  CHECK(j["score"]["w1"].get<double>() > 0.0);
  CHECK(j.contains("interpolation_w1"));
  CHECK(ssb::load_snapshots(at("lotdata/data.csv")).snapshots.size(2) == 15);
  CHECK(run("lot -i " + at("lotdata/data.csv") + " -s lot.j=0 -o " + at("lot")) == 2);

  REQUIRE(run("bench -s bench.M=4,9 -s bench.d=1,2 -s bench.iters=1 -o " + at("bench")) == 0);
  std::istringstream in(slurp(at("bench/bench.csv")));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.starts_with('#')) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "M,d=1,d=2");
  CHECK(rows[1].starts_with("4,"));
  CHECK(rows[2].starts_with("9,"));
}
