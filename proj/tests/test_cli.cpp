#include "octsim/io.hpp"
#include "octsim/validate.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace octsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("octsim_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const TempDir& tmp, const std::string& args, const std::string& env = "") {
  const fs::path out = tmp.path / "stdout.txt";
  const fs::path err = tmp.path / "stderr.txt";
  const std::string cmd =
      env + " \"" OCTSIM_CLI_PATH "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json shipped(const std::string& name) {
  std::ifstream in(fs::path(OCTSIM_CONFIG_DIR) / name);
  return json::parse(in);
}

fs::path write_config(const TempDir& tmp, const std::string& name, const json& j) {
  const fs::path p = tmp.path / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

json small_blob_config() {
  return json::parse(R"({
    "units": {"c": 1.0},
    "phantom": {"kind": "nondispersive",
                "field": {"type": "blobs", "blobs": [{"center": [0.1, 0.0, 0.3], "width": 0.3, "amplitude": 1.0}]}},
    "geometry": {"d": 100.0, "R": 10.0, "delta": 2.0,
                 "mirrors": {"r0": -6.0, "dr": 0.25, "count": 32},
                 "directions": {"grid": [3, 3], "max_tan": 0.2}},
    "pulse": {"kind": "gaussian-cosine", "center_freq": 8.0, "bandwidth": 4.0}
  })");
}

/// Every file of a dataset directory, name -> bytes.
std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("phantom from a minimal blob config", "[cli]") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp, "c.json", small_blob_config());
  const RunResult r = run(tmp, "phantom --config " + q(cfg) + " --out " + q(tmp.path / "ph"));
  REQUIRE(r.code == 0);
  const Dataset ds = read_dataset(tmp.path / "ph");
  CHECK(ds.kind == "phantom");
  REQUIRE(ds.arrays.size() == 1);
  CHECK(ds.arrays[0].name == "chi");
  CHECK(ds.provenance.at("tool_version") == kToolVersion);
  CHECK(ds.provenance.at("config_hash").get<std::string>().size() == 64);
}

TEST_CASE("schema violations exit 2 naming the field", "[cli]") {
  TempDir tmp;
  json bad = small_blob_config();
  bad["phantom"]["field"]["blobs"][0]["width"] = "wide";
  RunResult r = run(tmp, "phantom --config " + q(write_config(tmp, "a.json", bad)) + " --out " + q(tmp.path / "x"));
  CHECK(r.code == 2);
  CHECK(r.err.find("phantom.field.blobs[0].width") != std::string::npos);

  bad = small_blob_config();
  bad["geometry"]["mirrors"].erase("count");
  r = run(tmp, "phantom --config " + q(write_config(tmp, "b.json", bad)) + " --out " + q(tmp.path / "x"));
  CHECK(r.code == 0);  // phantom does not read the geometry
  r = run(tmp, "simulate --config " + q(tmp.path / "b.json") + " --input " + q(tmp.path / "x") + " --out " +
                   q(tmp.path / "y"));
  CHECK(r.code == 2);
  CHECK(r.err.find("geometry.mirrors") != std::string::npos);

  std::ofstream(tmp.path / "broken.json") << "{ \"units\": ";
  r = run(tmp, "phantom --config " + q(tmp.path / "broken.json") + " --out " + q(tmp.path / "x"));
  CHECK(r.code == 2);
  CHECK(!fs::exists(tmp.path / "x.tmp"));
}

TEST_CASE("layered support constraint exits 2", "[cli]") {
  TempDir tmp;
  json cfg = shipped("layered.json");
  // Thinnest layer 0.1: T must stay below 2 * 0.1 / c.
  cfg["phantom"]["boundaries"] = {3.0, 2.0, 1.9, 0.0};
  const RunResult r =
      run(tmp, "phantom --config " + q(write_config(tmp, "l.json", cfg)) + " --out " + q(tmp.path / "ph"));
  CHECK(r.code == 2);
  CHECK(r.err.find("susceptibility time-support assumption") != std::string::npos);
  CHECK(!fs::exists(tmp.path / "ph"));
}

TEST_CASE("geometry violations exit 2", "[cli]") {
  TempDir tmp;
  const fs::path good = write_config(tmp, "c.json", small_blob_config());
  REQUIRE(run(tmp, "phantom --config " + q(good) + " --out " + q(tmp.path / "ph")).code == 0);

  json cfg = small_blob_config();
  cfg["geometry"]["mirrors"]["r0"] = 5.0;  // mirrors reach beyond R
  RunResult r = run(tmp, "simulate --config " + q(write_config(tmp, "g1.json", cfg)) + " --input " +
                             q(tmp.path / "ph") + " --out " + q(tmp.path / "m"));
  CHECK(r.code == 2);

  cfg = small_blob_config();
  cfg["geometry"]["d"] = 5.0;  // detectors inside the sample region
  r = run(tmp, "simulate --config " + q(write_config(tmp, "g2.json", cfg)) + " --input " + q(tmp.path / "ph") +
                   " --out " + q(tmp.path / "m"));
  CHECK(r.code == 2);

  r = run(tmp, "simulate --config " + q(good) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "m") +
                   " --threads 0");
  CHECK(r.code == 2);
}

TEST_CASE("zero phantom gives zero measurements", "[cli]") {
  TempDir tmp;
  json cfg = small_blob_config();
  cfg["phantom"]["field"]["blobs"][0]["amplitude"] = 0.0;
  const fs::path c = write_config(tmp, "z.json", cfg);
  REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
  REQUIRE(run(tmp, "simulate --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "m"))
              .code == 0);
  const Dataset ds = read_dataset(tmp.path / "m");
  bool any = false;
  for (const auto& a : ds.arrays)
    if (a.name == "M")
      for (double v : a.data) any = any || v != 0.0;
  CHECK(ds.has("M"));
  CHECK_FALSE(any);
}

TEST_CASE("simulate output does not depend on the thread count", "[cli][property]") {
  TempDir tmp;
  for (const std::string name : {"blobs_cone.json", "dispersive.json"}) {
    const fs::path c = fs::path(OCTSIM_CONFIG_DIR) / name;
    REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
    std::map<std::string, std::string> first;
    for (int threads : {1, 2, 8}) {
      const fs::path out = tmp.path / ("m" + std::to_string(threads));
      REQUIRE(run(tmp, "simulate --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(out) +
                           " --threads " + std::to_string(threads))
                  .code == 0);
      const auto bytes = directory_bytes(out);
      if (first.empty())
        first = bytes;
      else
        CHECK(bytes == first);
    }
    // The environment override is honoured and changes nothing either.
    REQUIRE(run(tmp, "simulate --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "menv"),
                "OCTSIM_THREADS=3 OCTSIM_CONFIG=" + q(c))
                .code == 0);
    CHECK(directory_bytes(tmp.path / "menv") == first);
  }
}

TEST_CASE("provenance hash tracks every config field", "[cli]") {
  TempDir tmp;
  const json base = small_blob_config();
  auto hash_of = [&](const json& cfg) {
    const fs::path c = write_config(tmp, "h.json", cfg);
    REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
    return read_dataset(tmp.path / "ph").provenance.at("config_hash").get<std::string>();
  };
  const std::string h0 = hash_of(base);
  CHECK(hash_of(base) == h0);
  std::vector<json> variants(5, base);
  variants[0]["units"]["c"] = 1.5;
  variants[1]["phantom"]["field"]["blobs"][0]["width"] = 0.31;
  variants[2]["geometry"]["mirrors"]["count"] = 33;
  variants[3]["pulse"]["bandwidth"] = 4.5;
  variants[4]["geometry"]["directions"]["max_tan"] = 0.21;
  std::set<std::string> seen{h0};
  for (const auto& v : variants) CHECK(seen.insert(hash_of(v)).second);
  // --seed enters the configuration and therefore the hash.
  const fs::path c = write_config(tmp, "s.json", base);
  REQUIRE(run(tmp, "phantom --config " + q(c) + " --seed 99 --out " + q(tmp.path / "ps")).code == 0);
  CHECK(seen.insert(read_dataset(tmp.path / "ps").provenance.at("config_hash").get<std::string>()).second);
}

TEST_CASE("mode and data mismatches exit 3", "[cli]") {
  TempDir tmp;
  json cfg = small_blob_config();
  cfg["geometry"]["directions"] = {{"grid", {2, 2}}, {"max_tan", 0.2}};  // even grid: no e3
  const fs::path c = write_config(tmp, "c.json", cfg);
  REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
  REQUIRE(run(tmp, "simulate --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "m"))
              .code == 0);
  RunResult r = run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "m") + " --out " +
                             q(tmp.path / "r") + " --mode axial");
  CHECK(r.code == 3);
  CHECK_FALSE(r.err.empty());

  for (const std::string mode : {"dispersive", "layered", "aniso"}) {
    r = run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "m") + " --out " + q(tmp.path / "r") +
                     " --mode " + mode);
    CHECK(r.code == 3);
  }
  // A phantom is not reconstructible data.
  r = run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "r") +
                   " --mode cone");
  CHECK(r.code == 3);
  // Unknown modes are rejected by the argument parser.
  r = run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "m") + " --out " + q(tmp.path / "r") +
                   " --mode spiral");
  CHECK(r.code == 2);
}

TEST_CASE("cone reconstruction writes arrays, report and slices", "[cli]") {
  TempDir tmp;
  const fs::path c = fs::path(OCTSIM_CONFIG_DIR) / "blobs_cone.json";
  REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
  REQUIRE(run(tmp, "simulate --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "m"))
              .code == 0);
  REQUIRE(run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "m") + " --out " + q(tmp.path / "r") +
                       " --mode cone")
              .code == 0);
  const Dataset ds = read_dataset(tmp.path / "r");
  CHECK(ds.has("chi"));
  CHECK(ds.has("chi_tilde"));
  CHECK(ds.has("mask"));
  const json& report = ds.attributes.at("report");
  CHECK(report.at("imag_residual").get<double>() < 1e-8);
  CHECK(report.at("coverage").at("samples_in_cone").get<double>() > 0.0);
  CHECK(ds.provenance.at("input").at("kind") == "measurements");
  const std::string csv = slurp(tmp.path / "r" / "slice_x1x3.csv");
  CHECK(csv.find('\n') != std::string::npos);
  CHECK(csv.find(',') != std::string::npos);
}

TEST_CASE("dispersive reconstruction matches closed-form plane integrals", "[cli]") {
  TempDir tmp;
  const json cfg = shipped("dispersive.json");
  const fs::path c = fs::path(OCTSIM_CONFIG_DIR) / "dispersive.json";
  REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
  REQUIRE(run(tmp, "simulate --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "t"))
              .code == 0);
  REQUIRE(run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "t") + " --out " + q(tmp.path / "r") +
                       " --mode dispersive")
              .code == 0);
  const double gap = read_dataset(tmp.path / "t").attributes.at("plane_sampling_error").get<double>();
  CHECK(gap > 0.0);
  CHECK(gap < 0.5);

  // Plane {<theta + e3, x> = c n T} through a Gaussian blob, slice m scaled by the profile.
  const auto& blob = cfg["phantom"]["field"]["blobs"][0];
  const Vec3 ctr(blob["center"][0], blob["center"][1], blob["center"][2]);
  const double w = blob["width"];
  const double A = blob["amplitude"];
  const auto profile = cfg["phantom"]["profile"].get<std::vector<double>>();
  const double T = cfg["phantom"]["bins"]["T"];
  std::vector<Vec3> thetas;
  for (const auto& d : cfg["geometry"]["directions"]["list"]) thetas.push_back(Vec3(d[0], d[1], d[2]).normalized());

  std::istringstream in(slurp(tmp.path / "r" / "radon_bins.csv"));
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "theta_index,n,tau,value");
  std::size_t rows = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    double th, n, tau, value;
    char sep;
    std::istringstream ls(line);
    ls >> th >> sep >> n >> sep >> tau >> sep >> value;
    const Vec3 nv = thetas[static_cast<std::size_t>(th)] + kE3;
    const double off = n * T / nv.norm() - nv.normalized().dot(ctr);
    const auto m = static_cast<std::size_t>(std::floor(tau / T * static_cast<double>(profile.size())));
    const double ref = profile[m] * A * 2.0 * 3.14159265358979323846 * w * w * std::exp(-0.5 * off * off / (w * w));
    worst = std::max(worst, std::abs(value - ref));
    ++rows;
  }
  CHECK(rows > 0);
  CHECK(worst < 1e-9);
}

TEST_CASE("shipped configurations run end to end", "[cli]") {
  TempDir tmp;
  const std::vector<std::pair<std::string, std::string>> runs{{"axial_boxes.json", "axial"},
                                                              {"layered.json", "layered"},
                                                              {"anisotropic.json", "aniso"}};
  for (const auto& [name, mode] : runs) {
    INFO(name << " " << mode);
    const fs::path c = fs::path(OCTSIM_CONFIG_DIR) / name;
    REQUIRE(run(tmp, "phantom --config " + q(c) + " --out " + q(tmp.path / "ph")).code == 0);
    REQUIRE(run(tmp, "simulate --config " + q(c) + " --input " + q(tmp.path / "ph") + " --out " + q(tmp.path / "d"))
                .code == 0);
    const RunResult r = run(tmp, "reconstruct --config " + q(c) + " --input " + q(tmp.path / "d") + " --out " +
                                     q(tmp.path / "r") + " --mode " + mode);
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    bool has_csv = false;
    for (const auto& e : fs::directory_iterator(tmp.path / "r")) has_csv = has_csv || e.path().extension() == ".csv";
    CHECK(has_csv);
  }
}

TEST_CASE("validate passes and reports the far-field slope", "[cli]") {
  TempDir tmp;
  const RunResult r = run(tmp, "validate");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  const auto pos = r.out.find("farfield_decay measured=");
  REQUIRE(pos != std::string::npos);
  const double slope = std::strtod(r.out.c_str() + pos + std::string("farfield_decay measured=").size(), nullptr);
  CHECK(std::abs(slope + 1.0) < 0.1);
}

TEST_CASE("validate catches a sign flip in the Fresnel coefficients", "[cli]") {
  ValidationHooks hooks;
  hooks.fresnel = [](double a, double b) {
    FresnelCoefficients f = fresnel(a, b);
    f.rho = -f.rho;
    return f;
  };
  bool named = false;
  for (const auto& s : run_validation(hooks))
    if (!s.pass && s.name == "fresnel_identities") named = true;
  CHECK(named);
  for (const auto& s : run_validation()) CHECK(s.pass);
}

TEST_CASE("help and missing arguments", "[cli]") {
  TempDir tmp;
  CHECK(run(tmp, "--help").code == 0);
  CHECK(run(tmp, "").code == 2);
  CHECK(run(tmp, "phantom").code == 2);
  CHECK(run(tmp, "reconstruct --config x.json --input y --out z --mode cone").code == 2);
}
