#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "afem/mesh_io.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("afem_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = "cd '" + scratch().string() + "' && '" AFEM_CLI_PATH "' " + args + " > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& row) {
  std::vector<std::string> out;
  std::stringstream ss(row);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Tag balance of an XML document without DTDs; returns the number of
// <polyline> elements or -1 when the document is not well formed.
int svg_polylines(const std::string& doc) {
  std::vector<std::string> stack;
  int polylines = 0;
  bool root_seen = false;
  std::size_t i = 0;
  while ((i = doc.find('<', i)) != std::string::npos) {
    if (doc.compare(i, 4, "<!--") == 0) {
      const auto e = doc.find("-->", i);
      if (e == std::string::npos) return -1;
      i = e + 3;
      continue;
    }
    const auto e = doc.find('>', i);
    if (e == std::string::npos) return -1;
    std::string tag = doc.substr(i + 1, e - i - 1);
    i = e + 1;
    if (tag.empty()) return -1;
    if (tag[0] == '?') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return -1;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) {
      if (root_seen || name != "svg") return -1;
      root_seen = true;
    }
    if (name == "polyline") ++polylines;
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty() ? polylines : -1;
}

}  // namespace

TEST_CASE("svg checker") {
  CHECK(svg_polylines("<svg><polyline points=\"1,2\"/><g><polyline/></g></svg>") == 2);
  CHECK(svg_polylines("<svg><g></svg>") == -1);
  CHECK(svg_polylines("<html></html>") == -1);
}

TEST_CASE("run writes the artifacts") {
  const Outcome o = cli("run --problem poisson-square --theta 0.5 --max-iters 10 --out run1");
  REQUIRE(o.code == 0);
  const fs::path dir = scratch() / "run1";
  const auto rows = lines(slurp(dir / "run.csv"));
  REQUIRE(rows.size() == 11);
  const auto header = split(rows[0]);
  CHECK(header[0] == "k");
  CHECK(header[1] == "elements");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto f = split(rows[k]);
    CHECK(f.size() == header.size());
    CHECK(f[0] == std::to_string(k - 1));
  }
  const auto last = split(rows.back());
  const afem::Mesh mesh = afem::read_mesh_file((dir / "mesh.txt").string());
  CHECK(std::to_string(mesh.num_elements()) == last[1]);
  const auto sol = lines(slurp(dir / "solution.txt"));
  REQUIRE_FALSE(sol.empty());
  CHECK(sol[0] == "mesh mesh.txt");
  CHECK(std::to_string(sol.size() - 1) == last[3]);
  const std::string constants = slurp(dir / "constants.txt");
  CHECK(constants.find("# problem = poisson-square") != std::string::npos);
  CHECK(constants.find("C_E=") != std::string::npos);
  CHECK(lines(slurp(dir / "estimator.csv")).size() == mesh.num_elements() + 1);
  CHECK(o.out.find("poisson-square: 10 iterations") != std::string::npos);
}

TEST_CASE("same configuration and seed give identical logs") {
  write_file(scratch() / "det.cfg", "problem = chow-lshape-singular\nmax_iters = 12\nseed = 5\n");
  REQUIRE(cli("run --config det.cfg --out detA").code == 0);
  REQUIRE(cli("run --config det.cfg --out detB").code == 0);
  for (const char* f : {"run.csv", "constants.txt", "mesh.txt", "solution.txt"})
    CHECK_MESSAGE(slurp(scratch() / "detA" / f) == slurp(scratch() / "detB" / f), f);
  // flags override the file
  REQUIRE(cli("run --config det.cfg --max-iters 3 --out detC").code == 0);
  CHECK(lines(slurp(scratch() / "detC" / "run.csv")).size() == 4);
}

TEST_CASE("uniform mode") {
  REQUIRE(cli("run --mode uniform --problem poisson-lshape-singular --max-iters 5 --out uni").code == 0);
  const auto rows = lines(slurp(scratch() / "uni" / "run.csv"));
  REQUIRE(rows.size() == 6);
  for (std::size_t k = 2; k < rows.size(); ++k)
    CHECK(std::stoi(split(rows[k])[1]) == 2 * std::stoi(split(rows[k - 1])[1]));
}

TEST_CASE("exit codes") {
  SUBCASE("config errors leave no artifacts") {
    for (const std::string args : {"run --theta 2 --out bad1", "run --problem no-such-problem --out bad1",
                                   "run --max-iters x --out bad1", "run --bogus --out bad1", "run --mode sideways --out bad1"}) {
      const Outcome o = cli(args);
      CHECK_MESSAGE(o.code == 2, args);
      CHECK_MESSAGE(!fs::exists(scratch() / "bad1"), args);
    }
    write_file(scratch() / "unknown.cfg", "theta = 0.5\ncolour = blue\n");
    const Outcome o = cli("run --config unknown.cfg --out bad1");
    CHECK(o.code == 2);
    CHECK(o.err.find("line 2: unknown configuration key 'colour'") != std::string::npos);
    CHECK(cli("run --config missing.cfg --out bad1").code == 2);
    CHECK(cli("").code == 2);
  }
  SUBCASE("solver failure") {
    write_file(scratch() / "newton.cfg", "problem = chow-lshape-singular\nmax_newton = 1\nnewton_tol = 1e-14\n");
    const Outcome o = cli("run --config newton.cfg --out fail3");
    CHECK(o.code == 3);
    CHECK(o.err.find("solver failure") != std::string::npos);
    // the log written so far stays parseable
    const auto rows = lines(slurp(scratch() / "fail3" / "run.csv"));
    REQUIRE_FALSE(rows.empty());
    CHECK(rows[0].rfind("k,elements,", 0) == 0);
  }
  SUBCASE("refine failure") {
    const Outcome o = cli("run --problem poisson-square --n-bisect 200 --out fail4");
    CHECK(o.code == 4);
    CHECK(o.err.find("refine failure") != std::string::npos);
  }
  SUBCASE("help") { CHECK(cli("--help").code == 0); }
}

TEST_CASE("verify") {
  const Outcome ok = cli("verify --problem poisson-square");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS square:overlay-inequality") != std::string::npos);
  CHECK(ok.out.find("PASS contraction") != std::string::npos);
  CHECK(ok.out.find(" 0 failed") != std::string::npos);

  const Outcome broken = cli("verify --problem poisson-square --fault jump-sign");
  CHECK(broken.code == 1);
  CHECK(broken.out.find("FAIL jump-consistency") != std::string::npos);
  // checks that never look at jumps still pass
  CHECK(broken.out.find("PASS dorfler-minimality") != std::string::npos);
  CHECK(broken.out.find("PASS energy-sandwich") != std::string::npos);
}

TEST_CASE("study") {
  const Outcome o = cli("study --problem poisson-square --max-iters 8 --out st");
  REQUIRE(o.code == 0);
  const fs::path dir = scratch() / "st";
  const int polylines = svg_polylines(slurp(dir / "study.svg"));
  CHECK(polylines >= 2);
  const auto rows = lines(slurp(dir / "study.csv"));
  REQUIRE(rows.size() == 17);
  CHECK(rows[0] == "series,k,elements_excess,eta,h1_error,energy_error");
  const std::string slopes = slurp(dir / "slopes.txt");
  CHECK(slopes.find("adaptive.eta_slope=") != std::string::npos);
  CHECK(slopes.find("uniform.eta_slope=") != std::string::npos);

  SUBCASE("identical configurations give identical curves") {
    write_file(scratch() / "same.cfg", "problem = chow-lshape-singular\nmode = adaptive\nmax_iters = 9\n");
    REQUIRE(cli("study --config-a same.cfg --config-b same.cfg --out same").code == 0);
    const auto r = lines(slurp(scratch() / "same" / "study.csv"));
    REQUIRE(r.size() == 19);
    for (std::size_t k = 1; k <= 9; ++k) CHECK(r[k] == r[k + 9]);
  }
  SUBCASE("different problems are rejected") {
    write_file(scratch() / "pa.cfg", "problem = poisson-square\n");
    write_file(scratch() / "pb.cfg", "problem = chow-square-smooth\n");
    CHECK(cli("study --config-a pa.cfg --config-b pb.cfg --out mismatch").code == 2);
    CHECK_FALSE(fs::exists(scratch() / "mismatch"));
  }
}

TEST_CASE("mesh-info") {
  const Outcome o = cli("mesh-info --problem chow-lshape-singular --uniform 3");
  CHECK(o.code == 0);
  CHECK(o.out.find("elements 48\n") != std::string::npos);
  CHECK(o.out.find("conforming yes") != std::string::npos);
  CHECK(o.out.find("area 3\n") != std::string::npos);
  write_file(scratch() / "broken.mesh", "not a mesh\n");
  CHECK(cli("mesh-info --mesh broken.mesh").code == 4);
}
