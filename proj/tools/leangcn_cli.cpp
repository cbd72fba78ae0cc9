// Command-line front end: neighbor queries, cost reports, benchmarks,
// bound/equivalence verification, weight stats, feature distance maps, and
// synthetic-shape training.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leangcn/leangcn.hpp"

namespace {

using leangcn::io::json;

constexpr int kExitPass = 0;
constexpr int kExitVerdictFail = 1;
constexpr int kExitUsage = 2;

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void emit_json(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw leangcn::io::ParseError(out_path + ": cannot open for writing");
    out << j.dump(2) << "\n";
  }
}

struct Common {
  bool no_timestamp = false;

  void stamp(json& j) const {
    if (!no_timestamp) j["timestamp"] = iso_timestamp();
  }
};

// ---------------------------------------------------------------------------
// knn
// ---------------------------------------------------------------------------

struct KnnArgs {
  std::string input;
  std::string out;
  std::int32_t k = 10;
  std::int32_t p = 0;
  std::int32_t layers = 1;
  std::int32_t layer = 1;
  std::uint64_t seed = 1;
};

int run_knn(const KnnArgs& a) {
  const leangcn::Matrix cloud = leangcn::io::load_xyz(a.input);
  leangcn::knn::NeighborIndex nbrs;
  if (a.layers <= 1 && a.p == 0) {
    nbrs = leangcn::knn::knn_search(cloud, a.k);
  } else {
    const auto pool = leangcn::knn::build_pool(cloud, a.k, a.p, a.layers);
    nbrs = leangcn::knn::sample_neighbors(pool, a.layer, a.seed);
  }
  if (a.out.empty()) {
    for (std::size_t i = 0; i < nbrs.indices.rows(); ++i) {
      const auto row = nbrs.indices.row(i);
      for (std::size_t c = 0; c < row.size(); ++c)
        std::cout << row[c] << (c + 1 < row.size() ? ',' : '\n');
    }
  } else {
    leangcn::io::save_index_csv(a.out, nbrs.indices);
  }
  return kExitPass;
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

json stage_to_json(const leangcn::cost::StageCost& s) {
  const char* kind = "conv";
  switch (s.kind) {
    case leangcn::cost::StageKind::knn: kind = "knn"; break;
    case leangcn::cost::StageKind::pool: kind = "pool"; break;
    case leangcn::cost::StageKind::sample: kind = "sample"; break;
    case leangcn::cost::StageKind::conv: kind = "conv"; break;
    case leangcn::cost::StageKind::head: kind = "head"; break;
  }
  return {{"name", s.name},
          {"kind", kind},
          {"mults", s.mults},
          {"act_scalars", s.act_scalars}};
}

json mode_cost_to_json(const leangcn::cost::ModeCost& mc) {
  json stages = json::array();
  for (const auto& s : mc.stages) stages.push_back(stage_to_json(s));
  return {{"mode", leangcn::net::mode_name(mc.mode)},
          {"stages", stages},
          {"total_mults", mc.total_mults},
          {"knn_mults", mc.knn_mults},
          {"peak_act_scalars", mc.peak_act_scalars},
          {"peak_act_bytes", mc.peak_act_bytes()}};
}

void print_mode_table(const leangcn::cost::ModeCost& mc) {
  std::printf("  %-16s %6s %16s %16s\n", "stage", "kind", "mults",
              "act_scalars");
  for (const auto& s : mc.stages) {
    const char* kind = "conv";
    switch (s.kind) {
      case leangcn::cost::StageKind::knn: kind = "knn"; break;
      case leangcn::cost::StageKind::pool: kind = "pool"; break;
      case leangcn::cost::StageKind::sample: kind = "sample"; break;
      case leangcn::cost::StageKind::conv: kind = "conv"; break;
      case leangcn::cost::StageKind::head: kind = "head"; break;
    }
    std::printf("  %-16s %6s %16llu %16llu\n", s.name.c_str(), kind,
                static_cast<unsigned long long>(s.mults),
                static_cast<unsigned long long>(s.act_scalars));
  }
  std::printf("  %-16s %6s %16llu  (knn share %llu, peak act %llu scalars)\n",
              "total", "", static_cast<unsigned long long>(mc.total_mults),
              static_cast<unsigned long long>(mc.knn_mults),
              static_cast<unsigned long long>(mc.peak_act_scalars));
}

struct CostArgs {
  std::string spec_path;
  std::string out;
  std::int64_t points = 0;
};

int run_cost(const CostArgs& a, const Common& common) {
  const auto spec = leangcn::io::load_spec(a.spec_path);
  std::int64_t n = a.points > 0 ? a.points : spec.points;
  if (n <= 0)
    throw leangcn::io::ParseError(
        "cost: point count unset (give --points or spec \"points\")");
  const auto report =
      leangcn::cost::network_cost(spec, static_cast<std::uint64_t>(n));

  std::printf("points: %lld  mode: %s\n", static_cast<long long>(n),
              leangcn::net::mode_name(spec.mode).c_str());
  std::printf("baseline:\n");
  print_mode_table(report.baseline);
  if (spec.mode != leangcn::net::Mode::baseline) {
    std::printf("%s:\n", leangcn::net::mode_name(spec.mode).c_str());
    print_mode_table(report.chosen);
    std::printf("mult ratio %.6f  activation ratio %.6f\n",
                report.mult_ratio(), report.activation_ratio());
  }

  json j{{"command", "cost"},
         {"points", n},
         {"spec", leangcn::io::spec_to_json(spec)},
         {"baseline", mode_cost_to_json(report.baseline)},
         {"chosen", mode_cost_to_json(report.chosen)},
         {"mult_ratio", report.mult_ratio()},
         {"activation_ratio", report.activation_ratio()}};
  common.stamp(j);
  if (!a.out.empty()) emit_json(j, a.out);
  return kExitPass;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string spec_path;
  std::string out;
  std::string points;
  int reps = 10;
  int warmup = 2;
  bool p_sweep = false;
  std::uint64_t seed = 1;
};

std::vector<std::uint64_t> parse_points_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::istringstream in(s);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(static_cast<std::uint64_t>(std::stoull(cell)));
  }
  if (out.empty())
    throw leangcn::io::ParseError("bench: empty point-count list");
  return out;
}

void write_bench_csv(std::ostream& out,
                     const std::vector<leangcn::bench::BenchRow>& rows) {
  out << "points,mode,median_ms,mults,knn_mults,modeled_bytes,"
         "ms_x_prev,mults_x_prev,knn_mults_x_prev\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    // Doubling ratios against the previous point count for the same mode.
    const leangcn::bench::BenchRow* prev = nullptr;
    for (std::size_t q = r; q-- > 0;)
      if (rows[q].mode == row.mode && rows[q].points < row.points) {
        prev = &rows[q];
        break;
      }
    out << row.points << ',' << row.mode << ',' << row.median_ms << ','
        << row.mults << ',' << row.knn_mults << ',' << row.modeled_bytes
        << ',';
    if (prev) {
      out << row.median_ms / prev->median_ms << ','
          << static_cast<double>(row.mults) / static_cast<double>(prev->mults)
          << ','
          << static_cast<double>(row.knn_mults) /
                 static_cast<double>(prev->knn_mults);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

int run_bench(const BenchArgs& a) {
  auto spec = leangcn::io::load_spec(a.spec_path);
  const auto sizes = parse_points_list(a.points);
  std::vector<leangcn::bench::BenchRow> rows =
      leangcn::bench::run_bench(spec, sizes, a.warmup, a.reps, a.seed);
  if (a.p_sweep) {
    // Receptive-field growth sweep: override every block's step.
    const std::int32_t k0 = spec.blocks.front().k;
    for (const auto p : leangcn::bench::p_sweep_values(k0)) {
      leangcn::net::NetworkSpec ps = spec;
      for (auto& b : ps.blocks) b.p = p;
      if (ps.mode == leangcn::net::Mode::baseline)
        ps.mode = leangcn::net::Mode::accelerated;
      auto extra = leangcn::bench::run_bench(ps, sizes, a.warmup, a.reps, a.seed);
      for (auto& row : extra) {
        if (row.mode == "baseline") continue;  // already reported
        row.mode += "-p" + std::to_string(p);
        rows.push_back(std::move(row));
      }
    }
  }
  if (a.out.empty()) {
    write_bench_csv(std::cout, rows);
  } else {
    std::ofstream out(a.out);
    if (!out)
      throw leangcn::io::ParseError(a.out + ": cannot open for writing");
    write_bench_csv(out, rows);
  }
  return kExitPass;
}

// ---------------------------------------------------------------------------
// verify-thm1
// ---------------------------------------------------------------------------

struct Thm1Args {
  std::int64_t points = 128;
  std::int32_t dim = 3;
  std::int32_t k = 10;
  std::int32_t m = 16;
  double sigma = 0.1;
  std::uint64_t samples = 20000;
  std::int32_t clouds = 10;
  std::int32_t pairs = 10;
  double min_pass_rate = 0.99;
  std::uint64_t seed = 1;
  std::string out;
};

int run_thm1(const Thm1Args& a, const Common& common) {
  std::int32_t contained = 0;
  std::int32_t total = 0;
  json pair_reports = json::array();
  for (std::int32_t c = 0; c < a.clouds; ++c) {
    const leangcn::Matrix cloud = leangcn::bench::random_cloud(
        static_cast<std::size_t>(a.points), static_cast<std::size_t>(a.dim),
        leangcn::derive_seed(a.seed, 10, static_cast<std::uint64_t>(c)));
    leangcn::CounterRng pair_rng(a.seed, 20, static_cast<std::uint64_t>(c));
    for (std::int32_t p = 0; p < a.pairs; ++p) {
      const auto i = static_cast<std::size_t>(
          pair_rng.next_below(static_cast<std::uint64_t>(a.points)));
      std::size_t j = i;
      while (j == i)
        j = static_cast<std::size_t>(
            pair_rng.next_below(static_cast<std::uint64_t>(a.points)));
      const auto rep = leangcn::verify::check_distance_bounds(
          cloud, i, j, a.k, a.m, a.sigma, a.samples,
          leangcn::derive_seed(a.seed, 30, static_cast<std::uint64_t>(c),
                               static_cast<std::uint64_t>(p)));
      ++total;
      if (rep.pass) ++contained;
      pair_reports.push_back({{"cloud", c},
                              {"i", rep.i},
                              {"j", rep.j},
                              {"lower", rep.lower},
                              {"upper", rep.upper},
                              {"mc_mean", rep.mc_mean},
                              {"mc_se", rep.mc_se},
                              {"pass", rep.pass}});
    }
  }

  // Degenerate K=M=d=1 instance: both bounds collapse to the same value.
  leangcn::Matrix two(2, 1);
  leangcn::CounterRng crng(a.seed, 40);
  two(0, 0) = crng.next_normal();
  two(1, 0) = crng.next_normal();
  const auto collapse = leangcn::verify::check_distance_bounds(
      two, 0, 1, 1, 1, a.sigma, a.samples, leangcn::derive_seed(a.seed, 41));
  const bool collapse_equal = collapse.lower == collapse.upper;

  const double rate = static_cast<double>(contained) / total;
  const bool pass = rate >= a.min_pass_rate && collapse_equal && collapse.pass;
  std::printf("bound containment: %d/%d pairs (rate %.4f), collapse case %s\n",
              contained, total, rate,
              collapse_equal && collapse.pass ? "ok" : "FAILED");
  json j{{"command", "verify-thm1"},
         {"seed", a.seed},
         {"points", a.points},
         {"dim", a.dim},
         {"k", a.k},
         {"m", a.m},
         {"sigma", a.sigma},
         {"samples", a.samples},
         {"clouds", a.clouds},
         {"pairs_per_cloud", a.pairs},
         {"pairs", total},
         {"contained", contained},
         {"pass_rate", rate},
         {"min_pass_rate", a.min_pass_rate},
         {"collapse_case",
          {{"lower", collapse.lower},
           {"upper", collapse.upper},
           {"mc_mean", collapse.mc_mean},
           {"bounds_equal", collapse_equal},
           {"pass", collapse.pass}}},
         {"pairs_detail", pair_reports},
         {"pass", pass}};
  common.stamp(j);
  emit_json(j, a.out);
  return pass ? kExitPass : kExitVerdictFail;
}

// ---------------------------------------------------------------------------
// verify-thm2
// ---------------------------------------------------------------------------

struct Thm2Args {
  std::uint64_t trials = 100;
  std::int32_t max_n = 256;
  std::int32_t max_d = 16;
  std::int32_t max_m = 32;
  std::int32_t max_k = 20;
  double tol = 1e-9;
  std::uint64_t seed = 1;
  std::string out;
};

int run_thm2(const Thm2Args& a, const Common& common) {
  const auto rep = leangcn::verify::check_rearrangement(
      a.trials, {a.max_n, a.max_d, a.max_m, a.max_k}, a.tol, a.seed);
  std::printf(
      "rearrangement max rel diff: max-agg %.3e, sum-agg %.3e (tol %.1e) -> %s\n",
      rep.max_rel_diff_max_agg, rep.max_rel_diff_sum_agg, rep.tolerance,
      rep.pass ? "pass" : "FAIL");
  json j{{"command", "verify-thm2"},
         {"seed", a.seed},
         {"trials", rep.trials},
         {"max_n", a.max_n},
         {"max_d", a.max_d},
         {"max_m", a.max_m},
         {"max_k", a.max_k},
         {"tolerance", rep.tolerance},
         {"max_rel_diff_max_agg", rep.max_rel_diff_max_agg},
         {"max_rel_diff_sum_agg", rep.max_rel_diff_sum_agg},
         {"pass", rep.pass}};
  common.stamp(j);
  emit_json(j, a.out);
  return rep.pass ? kExitPass : kExitVerdictFail;
}

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

struct WeightsArgs {
  std::string params_path;
  std::string spec_path;
  std::size_t bins = 32;
  std::string out;
};

int run_weights(const WeightsArgs& a, const Common& common) {
  const auto spec = leangcn::io::load_spec(a.spec_path);
  const auto params = leangcn::io::load_params(a.params_path, spec);
  const auto ws = leangcn::verify::weight_stats(params, a.bins);
  std::printf(
      "weights: n=%llu mean=%.6f var=%.6f skew=%.4f exkurt=%.4f\n",
      static_cast<unsigned long long>(ws.count), ws.mean, ws.variance,
      ws.skewness, ws.excess_kurtosis);
  json j{{"command", "weights"},
         {"count", ws.count},
         {"mean", ws.mean},
         {"variance", ws.variance},
         {"skewness", ws.skewness},
         {"excess_kurtosis", ws.excess_kurtosis},
         {"min", ws.min},
         {"max", ws.max},
         {"histogram", {{"edges", ws.bin_edges}, {"counts", ws.bin_counts}}}};
  common.stamp(j);
  emit_json(j, a.out);
  return kExitPass;
}

// ---------------------------------------------------------------------------
// distance-map
// ---------------------------------------------------------------------------

struct DistanceMapArgs {
  std::string spec_path;
  std::string input;
  std::string params_path;
  std::size_t layer = 0;
  std::size_t anchor = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_distance_map(const DistanceMapArgs& a) {
  const auto spec = leangcn::io::load_spec(a.spec_path);
  const leangcn::Matrix cloud = leangcn::io::load_xyz(a.input);
  const auto params =
      a.params_path.empty()
          ? leangcn::net::init_params(spec, spec.seed, 0.1)
          : leangcn::io::load_params(a.params_path, spec);
  const auto dist = leangcn::verify::feature_distance_map(
      spec, params, cloud, a.layer, a.anchor, a.seed);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file)
      throw leangcn::io::ParseError(a.out + ": cannot open for writing");
    out = &file;
  }
  out->precision(17);
  *out << "point_index,x,y,z,distance\n";
  for (std::size_t p = 0; p < dist.size(); ++p) {
    double xyz[3] = {0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < std::min<std::size_t>(3, cloud.cols()); ++c)
      xyz[c] = cloud(p, c);
    *out << p << ',' << xyz[0] << ',' << xyz[1] << ',' << xyz[2] << ','
         << dist[p] << '\n';
  }
  return kExitPass;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string spec_path;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string params_out;
};

int run_train(const TrainArgs& a, const Common& common) {
  const auto spec = leangcn::io::load_spec(a.spec_path);
  auto cfg = leangcn::io::load_train_config(a.config_path);
  if (a.seed) cfg.seed = *a.seed;
  const auto result = leangcn::net::train_synthetic(spec, cfg);

  json runs = json::array();
  for (const auto& r : result.runs) {
    std::printf("run seed %llu: train acc %.4f, test acc %.4f, loss %.4f\n",
                static_cast<unsigned long long>(r.run_seed), r.train_accuracy,
                r.test_accuracy, r.final_epoch_loss);
    runs.push_back({{"run_seed", r.run_seed},
                    {"train_accuracy", r.train_accuracy},
                    {"test_accuracy", r.test_accuracy},
                    {"final_epoch_loss", r.final_epoch_loss}});
  }
  std::printf("mean test acc %.4f (variance %.6f) over %zu runs [%s]\n",
              result.mean_test_accuracy, result.test_accuracy_variance,
              result.runs.size(), leangcn::net::mode_name(spec.mode).c_str());
  if (!a.params_out.empty())
    leangcn::io::save_params(a.params_out, result.first_run_params);

  json j{{"command", "train"},
         {"mode", leangcn::net::mode_name(spec.mode)},
         {"seed", cfg.seed},
         {"runs", runs},
         {"mean_test_accuracy", result.mean_test_accuracy},
         {"test_accuracy_variance", result.test_accuracy_variance}};
  if (!a.params_out.empty()) j["params_file"] = a.params_out;
  common.stamp(j);
  if (!a.out.empty()) emit_json(j, a.out);
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Graph-convolution kernels for point clouds: shared neighbor pools, "
      "rearranged edge convolutions, analytic cost model, and verification "
      "harness"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("--no-timestamp", common.no_timestamp,
               "omit timestamps from report files");

  KnnArgs knn_args;
  auto* knn = app.add_subcommand("knn", "exact or pool-sampled neighbor query")->fallthrough();
  knn->add_option("--input", knn_args.input, "XYZ point cloud")->required();
  knn->add_option("--k,-k", knn_args.k, "neighbors per point");
  knn->add_option("--p,-p", knn_args.p, "pool growth step");
  knn->add_option("--layers,-n", knn_args.layers, "layers sharing the pool");
  knn->add_option("--layer,-l", knn_args.layer, "layer to sample for");
  knn->add_option("--seed", knn_args.seed, "sampling seed");
  knn->add_option("--out", knn_args.out, "output CSV (default stdout)");

  CostArgs cost_args;
  auto* cost = app.add_subcommand("cost", "analytic multiply/memory report")->fallthrough();
  cost->add_option("--spec", cost_args.spec_path, "network spec JSON")->required();
  cost->add_option("--points", cost_args.points, "point count (overrides spec)");
  cost->add_option("--out", cost_args.out, "JSON report path");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "forward-pass timing benchmark")->fallthrough();
  bench->add_option("--spec", bench_args.spec_path, "network spec JSON")->required();
  bench->add_option("--points", bench_args.points,
                    "comma-separated point counts, e.g. 512,1024,2048")
      ->required();
  bench->add_option("--reps", bench_args.reps, "timed repetitions (>= 3)");
  bench->add_option("--warmup", bench_args.warmup, "warmup passes");
  bench->add_flag("--p-sweep", bench_args.p_sweep,
                  "also sweep pool growth P in {K/4,K/2,3K/4,K}");
  bench->add_option("--seed", bench_args.seed, "cloud/init seed");
  bench->add_option("--out", bench_args.out, "output CSV (default stdout)");

  Thm1Args thm1_args;
  auto* thm1 = app.add_subcommand(
      "verify-thm1", "Monte-Carlo check of the conv distance bounds")->fallthrough();
  thm1->add_option("--points", thm1_args.points, "cloud size");
  thm1->add_option("--dim", thm1_args.dim, "input dimensionality");
  thm1->add_option("--k", thm1_args.k, "neighborhood size");
  thm1->add_option("--m", thm1_args.m, "conv output width");
  thm1->add_option("--sigma", thm1_args.sigma, "weight std-dev");
  thm1->add_option("--samples", thm1_args.samples, "Monte-Carlo draws (>= 1000)");
  thm1->add_option("--clouds", thm1_args.clouds, "random clouds");
  thm1->add_option("--pairs", thm1_args.pairs, "pairs per cloud");
  thm1->add_option("--min-pass-rate", thm1_args.min_pass_rate,
                   "required containment rate");
  thm1->add_option("--seed", thm1_args.seed, "seed");
  thm1->add_option("--out", thm1_args.out, "JSON verdict path");

  Thm2Args thm2_args;
  auto* thm2 = app.add_subcommand(
      "verify-thm2", "exactness sweep of the rearranged edge conv")->fallthrough();
  thm2->add_option("--trials", thm2_args.trials, "random instances");
  thm2->add_option("--max-n", thm2_args.max_n, "max cloud size");
  thm2->add_option("--max-d", thm2_args.max_d, "max feature dim");
  thm2->add_option("--max-m", thm2_args.max_m, "max output width");
  thm2->add_option("--max-k", thm2_args.max_k, "max neighborhood size");
  thm2->add_option("--tol", thm2_args.tol, "relative tolerance");
  thm2->add_option("--seed", thm2_args.seed, "seed");
  thm2->add_option("--out", thm2_args.out, "JSON verdict path");

  WeightsArgs weights_args;
  auto* weights =
      app.add_subcommand("weights", "moments and histogram of a parameter blob")
          ->fallthrough();
  weights->add_option("--params", weights_args.params_path, "parameter blob")
      ->required();
  weights->add_option("--spec", weights_args.spec_path, "network spec JSON")
      ->required();
  weights->add_option("--bins", weights_args.bins, "histogram bins");
  weights->add_option("--out", weights_args.out, "JSON report path");

  DistanceMapArgs dm_args;
  auto* dm = app.add_subcommand("distance-map",
                                "per-point feature-space distances to an anchor")->fallthrough();
  dm->add_option("--spec", dm_args.spec_path, "network spec JSON")->required();
  dm->add_option("--input", dm_args.input, "XYZ point cloud")->required();
  dm->add_option("--params", dm_args.params_path,
                 "parameter blob (default: seeded random init)");
  dm->add_option("--layer", dm_args.layer, "conv layer (0 = input features)");
  dm->add_option("--anchor", dm_args.anchor, "anchor point index");
  dm->add_option("--seed", dm_args.seed, "sampling seed");
  dm->add_option("--out", dm_args.out, "output CSV (default stdout)");

  TrainArgs train_args;
  auto* train =
      app.add_subcommand("train", "synthetic-shape classification training")
          ->fallthrough();
  train->add_option("--spec", train_args.spec_path, "network spec JSON")
      ->required();
  train->add_option("--config", train_args.config_path, "train config JSON")
      ->required();
  train->add_option("--seed", train_args.seed,
                    "override the config's dataset/run seed");
  train->add_option("--out", train_args.out, "JSON results path");
  train->add_option("--params-out", train_args.params_out,
                    "write first run's parameters to this blob");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (knn->parsed()) return run_knn(knn_args);
    if (cost->parsed()) return run_cost(cost_args, common);
    if (bench->parsed()) return run_bench(bench_args);
    if (thm1->parsed()) return run_thm1(thm1_args, common);
    if (thm2->parsed()) return run_thm2(thm2_args, common);
    if (weights->parsed()) return run_weights(weights_args, common);
    if (dm->parsed()) return run_distance_map(dm_args);
    if (train->parsed()) return run_train(train_args, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
