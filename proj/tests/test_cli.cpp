// CLI integration tests: every subcommand is exercised as a real subprocess
// against small fixtures, and the emitted CSV/JSON is parsed back and
// cross-checked against the library run in-process.

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "leangcn/leangcn.hpp"

namespace {

namespace fs = std::filesystem;
using leangcn::io::json;

fs::path tmp_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "leangcn_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary with a shell-formatted argument string and
// captures exit code, stdout, and stderr.
RunResult run_cli(const std::string& args) {
  static int calls = 0;
  const fs::path out_file = tmp_dir() / ("stdout." + std::to_string(++calls));
  const fs::path err_file = tmp_dir() / ("stderr." + std::to_string(calls));
  const std::string cmd = std::string("\"") + LEANGCN_CLI_PATH + "\" " + args +
                          " >" + out_file.string() + " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Two-layer single-block spec shared by the cost / bench / distance-map cases.
json tiny_spec_json(const std::string& mode, std::int64_t points) {
  return json{{"mode", mode},
              {"seed", 1},
              {"input_dim", 3},
              {"points", points},
              {"blocks", json::array({json{{"layers", 2},
                                           {"k", 4},
                                           {"p", 2},
                                           {"widths", {4, 4}}}})},
              {"head", {{"hidden", {8}}, {"classes", 3}}}};
}

fs::path write_tiny_spec(const std::string& name, const std::string& mode,
                         std::int64_t points) {
  const fs::path p = tmp_dir() / name;
  spit(p, tiny_spec_json(mode, points).dump(2));
  return p;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

// ===========================================================================
// usage and error paths
// ===========================================================================

TEST_CASE("usage errors exit with code 2", "[cli]") {
  CHECK(run_cli("").code == 2);                       // subcommand required
  CHECK(run_cli("frobnicate").code == 2);             // unknown subcommand
  CHECK(run_cli("knn").code == 2);                    // missing --input
  CHECK(run_cli("cost").code == 2);                   // missing --spec
  const auto bogus = run_cli("verify-thm2 --bogus-flag 3");
  CHECK(bogus.code == 2);
}

TEST_CASE("help exits cleanly", "[cli]") {
  CHECK(run_cli("--help").code == 0);
  const auto knn_help = run_cli("knn --help");
  CHECK(knn_help.code == 0);
  CHECK(knn_help.out.find("pool") != std::string::npos);
}

TEST_CASE("broken point-cloud input is reported on stderr", "[cli]") {
  const fs::path bad = tmp_dir() / "bad.xyz";
  spit(bad, "0 0 0\nnot_a_number 1 2\n");
  const auto r = run_cli("knn --input " + bad.string() + " -k 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(r.err.find("malformed number") != std::string::npos);

  const auto missing = run_cli("knn --input " + (tmp_dir() / "nope.xyz").string());
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error:") != std::string::npos);
}

// ===========================================================================
// knn
// ===========================================================================

TEST_CASE("knn prints exact neighbor rows for a frozen cloud", "[cli]") {
  const fs::path cloud = tmp_dir() / "line.xyz";
  spit(cloud, "0\n1\n3\n");

  const auto exact = run_cli("knn --input " + cloud.string() + " -k 2");
  REQUIRE(exact.code == 0);
  CHECK(exact.out == "0,1\n1,0\n2,1\n");

  // --out writes the same rows to a file.
  const fs::path out_csv = tmp_dir() / "nbrs.csv";
  const auto saved = run_cli("knn --input " + cloud.string() + " -k 2 --out " +
                             out_csv.string());
  REQUIRE(saved.code == 0);
  CHECK(slurp(out_csv) == exact.out);

  // Layer 1 of a shared pool reproduces the exact query verbatim.
  const auto pooled = run_cli("knn --input " + cloud.string() +
                              " -k 2 -p 1 --layers 2 --layer 1 --seed 7");
  REQUIRE(pooled.code == 0);
  CHECK(pooled.out == exact.out);

  // Sampling a layer past the pool depth is a hard error.
  const auto deep = run_cli("knn --input " + cloud.string() +
                            " -k 2 -p 1 --layers 2 --layer 3");
  CHECK(deep.code == 2);
  CHECK(deep.err.find("error:") != std::string::npos);
}

// ===========================================================================
// cost
// ===========================================================================

TEST_CASE("cost report matches the in-process model", "[cli]") {
  const fs::path spec_path = write_tiny_spec("cost_spec.json", "accelerated", 64);
  const fs::path out = tmp_dir() / "cost.json";
  const auto r = run_cli("cost --spec " + spec_path.string() +
                         " --no-timestamp --out " + out.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mult ratio") != std::string::npos);  // human table printed

  const auto spec = leangcn::io::load_spec(spec_path.string());
  const auto report = leangcn::cost::network_cost(spec, 64);
  const json j = read_json(out);
  CHECK(j.at("command") == "cost");
  CHECK(j.at("points").get<std::int64_t>() == 64);
  CHECK(j.at("spec").at("mode") == "accelerated");
  CHECK(j.at("baseline").at("total_mults").get<std::uint64_t>() ==
        report.baseline.total_mults);
  CHECK(j.at("baseline").at("knn_mults").get<std::uint64_t>() ==
        report.baseline.knn_mults);
  CHECK(j.at("chosen").at("total_mults").get<std::uint64_t>() ==
        report.chosen.total_mults);
  CHECK(j.at("chosen").at("peak_act_scalars").get<std::uint64_t>() ==
        report.chosen.peak_act_scalars);
  CHECK(j.at("chosen").at("peak_act_bytes").get<std::uint64_t>() ==
        report.chosen.peak_act_bytes());
  CHECK(j.at("mult_ratio").get<double>() ==
        Catch::Approx(report.mult_ratio()).epsilon(1e-12));
  CHECK(j.at("activation_ratio").get<double>() ==
        Catch::Approx(report.activation_ratio()).epsilon(1e-12));
  CHECK(j.at("chosen").at("stages").size() == report.chosen.stages.size());
  CHECK_FALSE(j.contains("timestamp"));

  // --points overrides the spec's own count.
  const fs::path out128 = tmp_dir() / "cost128.json";
  REQUIRE(run_cli("cost --spec " + spec_path.string() +
                  " --points 128 --no-timestamp --out " + out128.string())
              .code == 0);
  const auto rep128 = leangcn::cost::network_cost(spec, 128);
  const json j128 = read_json(out128);
  CHECK(j128.at("points").get<std::int64_t>() == 128);
  CHECK(j128.at("baseline").at("total_mults").get<std::uint64_t>() ==
        rep128.baseline.total_mults);

  // No point count anywhere -> usage error.
  json no_points = tiny_spec_json("accelerated", 64);
  no_points.erase("points");
  const fs::path np = tmp_dir() / "cost_no_points.json";
  spit(np, no_points.dump(2));
  const auto bad = run_cli("cost --spec " + np.string());
  CHECK(bad.code == 2);
  CHECK(bad.err.find("point count unset") != std::string::npos);
}

// ===========================================================================
// bench
// ===========================================================================

namespace {

struct BenchLine {
  std::uint64_t points = 0;
  std::string mode;
  double median_ms = 0.0;
  std::uint64_t mults = 0;
  std::uint64_t knn_mults = 0;
  std::uint64_t modeled_bytes = 0;
  std::string ms_x_prev;
  std::string mults_x_prev;
  std::string knn_x_prev;
};

std::vector<BenchLine> parse_bench_csv(const std::string& text) {
  const auto lines = lines_of(text);
  REQUIRE(!lines.empty());
  CHECK(lines.front() ==
        "points,mode,median_ms,mults,knn_mults,modeled_bytes,"
        "ms_x_prev,mults_x_prev,knn_mults_x_prev");
  std::vector<BenchLine> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv(lines[i]);
    REQUIRE(cells.size() == 9);
    BenchLine b;
    b.points = std::stoull(cells[0]);
    b.mode = cells[1];
    b.median_ms = std::stod(cells[2]);
    b.mults = std::stoull(cells[3]);
    b.knn_mults = std::stoull(cells[4]);
    b.modeled_bytes = std::stoull(cells[5]);
    b.ms_x_prev = cells[6];
    b.mults_x_prev = cells[7];
    b.knn_x_prev = cells[8];
    rows.push_back(std::move(b));
  }
  return rows;
}

const BenchLine& find_row(const std::vector<BenchLine>& rows,
                          const std::string& mode, std::uint64_t points) {
  for (const auto& r : rows)
    if (r.mode == mode && r.points == points) return r;
  FAIL("missing bench row " << mode << "@" << points);
  return rows.front();  // unreachable
}

}  // namespace

TEST_CASE("bench emits modeled columns and doubling ratios", "[cli]") {
  const fs::path spec_path = write_tiny_spec("bench_spec.json", "accelerated", 0);
  const fs::path out = tmp_dir() / "bench.csv";
  const auto r = run_cli("bench --spec " + spec_path.string() +
                         " --points 32,64 --reps 3 --warmup 0 --seed 1 --out " +
                         out.string());
  REQUIRE(r.code == 0);

  const auto rows = parse_bench_csv(slurp(out));
  REQUIRE(rows.size() == 4);  // {baseline, accelerated} x {32, 64}

  const auto spec = leangcn::io::load_spec(spec_path.string());
  for (const std::uint64_t n : {std::uint64_t{32}, std::uint64_t{64}}) {
    const auto report = leangcn::cost::network_cost(spec, n);
    const auto& base = find_row(rows, "baseline", n);
    const auto& accel = find_row(rows, "accelerated", n);
    CHECK(base.mults == report.baseline.total_mults);
    CHECK(base.knn_mults == report.baseline.knn_mults);
    CHECK(base.modeled_bytes == report.baseline.peak_act_bytes());
    CHECK(accel.mults == report.chosen.total_mults);
    CHECK(accel.knn_mults == report.chosen.knn_mults);
    CHECK(accel.modeled_bytes == report.chosen.peak_act_bytes());
    CHECK(base.median_ms > 0.0);
    CHECK(accel.median_ms > 0.0);
  }

  // First row of each mode has blank ratio cells; the doubled size reports
  // the model ratio against the smaller run.
  for (const std::string mode : {"baseline", "accelerated"}) {
    const auto& small = find_row(rows, mode, 32);
    const auto& big = find_row(rows, mode, 64);
    CHECK(small.ms_x_prev.empty());
    CHECK(small.mults_x_prev.empty());
    CHECK(small.knn_x_prev.empty());
    REQUIRE(!big.mults_x_prev.empty());
    const double expect =
        static_cast<double>(big.mults) / static_cast<double>(small.mults);
    CHECK(std::stod(big.mults_x_prev) == Catch::Approx(expect).epsilon(1e-4));
    CHECK(std::stod(big.ms_x_prev) > 0.0);
  }

  // Fewer than three timed repetitions cannot produce a median.
  CHECK(run_cli("bench --spec " + spec_path.string() +
                " --points 32 --reps 2 --warmup 0")
            .code == 2);
  CHECK(run_cli("bench --spec " + spec_path.string() + " --points ,")
            .code == 2);
}

TEST_CASE("bench p-sweep adds one labeled row per growth step", "[cli]") {
  const fs::path spec_path = write_tiny_spec("sweep_spec.json", "accelerated", 0);
  const fs::path out = tmp_dir() / "sweep.csv";
  const auto r = run_cli("bench --spec " + spec_path.string() +
                         " --points 32 --reps 3 --warmup 0 --p-sweep --out " +
                         out.string());
  REQUIRE(r.code == 0);
  const auto rows = parse_bench_csv(slurp(out));
  // k = 4 sweeps P over {1, 2, 3, 4} on top of the two stock modes.
  REQUIRE(rows.size() == 6);
  std::vector<std::string> modes;
  for (const auto& row : rows) {
    CHECK(row.points == 32);
    modes.push_back(row.mode);
  }
  for (const std::string want :
       {"baseline", "accelerated", "accelerated-p1", "accelerated-p2",
        "accelerated-p3", "accelerated-p4"})
    CHECK(std::count(modes.begin(), modes.end(), want) == 1);
}

// ===========================================================================
// verify-thm1 / verify-thm2
// ===========================================================================

TEST_CASE("distance-bound check passes on a small protocol", "[cli]") {
  const fs::path out = tmp_dir() / "thm1.json";
  const auto r = run_cli(
      "verify-thm1 --points 16 --dim 3 --k 4 --m 4 --samples 1000 "
      "--clouds 2 --pairs 3 --seed 3 --no-timestamp --out " +
      out.string());
  REQUIRE(r.code == 0);
  const json j = read_json(out);
  CHECK(j.at("command") == "verify-thm1");
  CHECK(j.at("pairs").get<int>() == 6);
  CHECK(j.at("contained").get<int>() == 6);
  CHECK(j.at("pass_rate").get<double>() == 1.0);
  CHECK(j.at("collapse_case").at("bounds_equal").get<bool>());
  CHECK(j.at("collapse_case").at("pass").get<bool>());
  CHECK(j.at("pairs_detail").size() == 6);
  for (const auto& pd : j.at("pairs_detail")) {
    CHECK(pd.at("lower").get<double>() <= pd.at("upper").get<double>());
    CHECK(pd.at("pass").get<bool>());
  }
  CHECK(j.at("pass").get<bool>());
}

TEST_CASE("equivalence sweep verdict drives the exit code", "[cli]") {
  const fs::path out = tmp_dir() / "thm2.json";
  const auto ok = run_cli("verify-thm2 --trials 10 --seed 1 --no-timestamp --out " +
                          out.string());
  REQUIRE(ok.code == 0);
  const json j = read_json(out);
  CHECK(j.at("command") == "verify-thm2");
  CHECK(j.at("trials").get<std::uint64_t>() == 10);
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("max_rel_diff_max_agg").get<double>() < 1e-9);
  CHECK(j.at("max_rel_diff_sum_agg").get<double>() < 1e-9);

  // A tolerance below rounding error must fail, and fail loudly.
  const fs::path out_bad = tmp_dir() / "thm2_bad.json";
  const auto bad = run_cli(
      "verify-thm2 --trials 20 --tol 1e-18 --seed 1 --no-timestamp --out " +
      out_bad.string());
  CHECK(bad.code == 1);
  CHECK_FALSE(read_json(out_bad).at("pass").get<bool>());
}

// ===========================================================================
// timestamp control
// ===========================================================================

TEST_CASE("reports are byte-stable with --no-timestamp", "[cli]") {
  const fs::path a = tmp_dir() / "stamp_a.json";
  const fs::path b = tmp_dir() / "stamp_b.json";
  REQUIRE(run_cli("verify-thm2 --trials 5 --seed 2 --no-timestamp --out " +
                  a.string())
              .code == 0);
  REQUIRE(run_cli("verify-thm2 --trials 5 --seed 2 --no-timestamp --out " +
                  b.string())
              .code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK_FALSE(read_json(a).contains("timestamp"));

  const fs::path c = tmp_dir() / "stamp_c.json";
  REQUIRE(run_cli("verify-thm2 --trials 5 --seed 2 --out " + c.string()).code ==
          0);
  const json j = read_json(c);
  REQUIRE(j.contains("timestamp"));
  const auto stamp = j.at("timestamp").get<std::string>();
  REQUIRE(stamp.size() == 20);  // 2024-01-02T03:04:05Z
  CHECK(stamp[4] == '-');
  CHECK(stamp[10] == 'T');
  CHECK(stamp.back() == 'Z');
}

// ===========================================================================
// train + weights
// ===========================================================================

TEST_CASE("train writes results and a reloadable parameter blob", "[cli]") {
  json spec = json{{"mode", "accelerated"},
                   {"seed", 1},
                   {"input_dim", 3},
                   {"points", 16},
                   {"blocks", json::array({json{{"layers", 1},
                                                {"k", 4},
                                                {"p", 0},
                                                {"widths", {8}}}})},
                   {"head", {{"hidden", {8}}, {"classes", 1}}}};
  const fs::path spec_path = tmp_dir() / "train_spec.json";
  spit(spec_path, spec.dump(2));

  const json cfg = json{{"classes", 1},   {"train_size", 6}, {"test_size", 3},
                        {"cloud_points", 16}, {"epochs", 1},  {"batch", 3},
                        {"runs", 1},      {"seed", 5}};
  const fs::path cfg_path = tmp_dir() / "train_cfg.json";
  spit(cfg_path, cfg.dump(2));

  const fs::path out = tmp_dir() / "train.json";
  const fs::path blob = tmp_dir() / "trained.bin";
  const auto r = run_cli("train --spec " + spec_path.string() + " --config " +
                         cfg_path.string() + " --no-timestamp --out " +
                         out.string() + " --params-out " + blob.string());
  REQUIRE(r.code == 0);

  const json j = read_json(out);
  CHECK(j.at("command") == "train");
  CHECK(j.at("mode") == "accelerated");
  CHECK(j.at("seed").get<std::uint64_t>() == 5);
  REQUIRE(j.at("runs").size() == 1);
  // One-class data is unmissable: accuracy must be exactly 1.
  CHECK(j.at("mean_test_accuracy").get<double>() == 1.0);
  CHECK(j.at("test_accuracy_variance").get<double>() == 0.0);
  CHECK(j.at("runs")[0].at("test_accuracy").get<double>() == 1.0);
  CHECK(j.at("params_file") == blob.string());

  // The blob must reload against the spec and describe 137 scalars:
  // conv (3*8 + 3*8 + 8) + dense (8*8 + 8) + (8*1 + 1).
  const fs::path wout = tmp_dir() / "weights.json";
  const auto w = run_cli("weights --params " + blob.string() + " --spec " +
                         spec_path.string() + " --bins 8 --no-timestamp --out " +
                         wout.string());
  REQUIRE(w.code == 0);
  const json wj = read_json(wout);
  CHECK(wj.at("command") == "weights");
  CHECK(wj.at("count").get<std::uint64_t>() == 137);
  REQUIRE(wj.at("histogram").at("counts").size() == 8);
  REQUIRE(wj.at("histogram").at("edges").size() == 9);
  std::uint64_t total = 0;
  for (const auto& c : wj.at("histogram").at("counts"))
    total += c.get<std::uint64_t>();
  CHECK(total == 137);
  CHECK(wj.at("min").get<double>() <= wj.at("max").get<double>());

  // Same invocation twice -> byte-identical report (full determinism).
  const fs::path out2 = tmp_dir() / "train2.json";
  const fs::path out3 = tmp_dir() / "train3.json";
  REQUIRE(run_cli("train --spec " + spec_path.string() + " --config " +
                  cfg_path.string() + " --no-timestamp --out " + out2.string())
              .code == 0);
  REQUIRE(run_cli("train --spec " + spec_path.string() + " --config " +
                  cfg_path.string() + " --no-timestamp --out " + out3.string())
              .code == 0);
  CHECK(slurp(out2) == slurp(out3));

  // --seed overrides the config seed.
  const fs::path out4 = tmp_dir() / "train4.json";
  REQUIRE(run_cli("train --spec " + spec_path.string() + " --config " +
                  cfg_path.string() + " --seed 9 --no-timestamp --out " +
                  out4.string())
              .code == 0);
  CHECK(read_json(out4).at("seed").get<std::uint64_t>() == 9);
}

// ===========================================================================
// distance-map
// ===========================================================================

TEST_CASE("distance-map reports squared input distances at layer 0", "[cli]") {
  const fs::path spec_path = write_tiny_spec("dm_spec.json", "accelerated", 16);
  const fs::path cloud = tmp_dir() / "dm.xyz";
  spit(cloud, "0 0 0\n1 0 0\n0 2 0\n3 4 0\n");

  const fs::path out = tmp_dir() / "dm.csv";
  const auto r = run_cli("distance-map --spec " + spec_path.string() +
                         " --input " + cloud.string() +
                         " --layer 0 --anchor 2 --out " + out.string());
  REQUIRE(r.code == 0);

  const auto lines = lines_of(slurp(out));
  REQUIRE(lines.size() == 5);
  CHECK(lines.front() == "point_index,x,y,z,distance");
  // Squared distances to point 2 = (0, 2, 0).
  const double expect[4] = {4.0, 5.0, 0.0, 13.0};
  const double xs[4] = {0.0, 1.0, 0.0, 3.0};
  for (int i = 0; i < 4; ++i) {
    const auto cells = split_csv(lines[static_cast<std::size_t>(i) + 1]);
    REQUIRE(cells.size() == 5);
    CHECK(std::stoull(cells[0]) == static_cast<std::uint64_t>(i));
    CHECK(std::stod(cells[1]) == xs[i]);
    CHECK(std::stod(cells[4]) == expect[i]);
  }

  // A real conv layer still yields one non-negative value per point.
  const fs::path out2 = tmp_dir() / "dm2.csv";
  REQUIRE(run_cli("distance-map --spec " + spec_path.string() + " --input " +
                  cloud.string() + " --layer 2 --anchor 0 --out " +
                  out2.string())
              .code == 0);
  const auto deep = lines_of(slurp(out2));
  REQUIRE(deep.size() == 5);
  bool anchor_zero = false;
  for (std::size_t i = 1; i < deep.size(); ++i) {
    const auto cells = split_csv(deep[i]);
    REQUIRE(cells.size() == 5);
    const double d = std::stod(cells[4]);
    CHECK(d >= 0.0);
    if (i == 1) anchor_zero = d == 0.0;
  }
  CHECK(anchor_zero);

  // Past the network depth -> usage error.
  const auto bad = run_cli("distance-map --spec " + spec_path.string() +
                           " --input " + cloud.string() + " --layer 3");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("error:") != std::string::npos);
}
