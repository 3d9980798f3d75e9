// den: estimates a model's performance disparity from proxy-embedding
// neighborhoods, and validates the estimates against labeled ground truth.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "den/den.hpp"

namespace {

using den::json;

struct CommonFlags {
  std::string neighborhood = "knn";  // knn | radius
  std::string metric = "rawlsian";   // rawlsian | stddev
  std::string grid;                  // empty = default 32-point grid
  double epsilon = den::kDefaultEpsilon;
  std::string distance = "l2";  // l2 | cosine
  std::string anchors = "all";  // all | sample:<m>
  unsigned threads = 0;         // 0 = hardware concurrency
  std::uint64_t seed = 0;
  std::string out;        // report path; stdout when empty
  std::string curve_csv;  // optional flat curve export
  std::size_t memory_budget = den::ProfileOptions{}.max_profile_entries;
  bool timestamp = false;
};

void add_analysis_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--neighborhood", f.neighborhood, "Neighborhood kind")
      ->check(CLI::IsMember({"knn", "radius"}));
  cmd->add_option("--metric", f.metric, "Disparity metric")
      ->check(CLI::IsMember({"rawlsian", "stddev"}));
  cmd->add_option("--grid", f.grid,
                  "Size grid: a count (auto spacing), or explicit ascending "
                  "values 'v1,v2,...'");
  cmd->add_option("--epsilon", f.epsilon, "Rawlsian denominator guard");
  cmd->add_option("--distance", f.distance, "Distance metric")
      ->check(CLI::IsMember({"l2", "cosine"}));
  cmd->add_option("--anchors", f.anchors,
                  "Neighborhood anchors: 'all' or 'sample:<m>'");
  cmd->add_option("--seed", f.seed, "Seed for anchor sampling");
  cmd->add_option("--memory-budget", f.memory_budget,
                  "Max distance-profile entries to materialize");
}

void add_execution_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--threads", f.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--out", f.out, "Write the report to this path");
  cmd->add_flag("--timestamp", f.timestamp,
                "Include a generation timestamp in the report (breaks "
                "byte-reproducibility)");
}

unsigned effective_threads(const CommonFlags& f) {
  if (f.threads > 0) return f.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

den::DistanceMetric parse_distance(const std::string& s) {
  return s == "cosine" ? den::DistanceMetric::Cosine
                       : den::DistanceMetric::Euclidean;
}

den::SizeKind parse_kind(const std::string& s) {
  return s == "radius" ? den::SizeKind::Radius : den::SizeKind::Knn;
}

den::DisparityMetric parse_metric(const std::string& s) {
  return s == "stddev" ? den::DisparityMetric::StdDev
                       : den::DisparityMetric::Rawlsian;
}

// Deterministic anchor subsample: partial Fisher-Yates over 0..n-1 driven
// by mt19937_64 on a dedicated substream, result sorted ascending.
std::vector<std::uint32_t> sample_anchors(std::size_t n, std::size_t m,
                                          std::uint64_t seed) {
  if (m == 0 || m > n)
    throw den::DataError("anchor sample size must be in [1, n]");
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::mt19937_64 gen(den::detail::substream_seed(seed, /*tag=*/1000));
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(gen() % (n - j));
    std::swap(idx[j], idx[pick]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Everything needed to run sweeps on one dataset with one flag set.
struct Analysis {
  den::DistanceMetric distance;
  den::SizeKind size_kind;
  den::DisparityMetric metric;
  den::SizeGrid grid;
  den::SweepOptions sweep;
  den::ProfileOptions profile_opt;
  std::optional<den::DistanceProfile> profile;  // absent => streaming
};

den::SizeGrid resolve_grid(const CommonFlags& f, den::SizeKind kind,
                           const den::Dataset& ds,
                           const std::optional<den::DistanceProfile>& profile,
                           const den::ProfileOptions& popt) {
  std::size_t count = den::kDefaultGridCount;
  if (!f.grid.empty() && f.grid.find(',') == std::string::npos &&
      f.grid.find('.') == std::string::npos) {
    try {
      count = std::stoul(f.grid);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--grid", "cannot parse '" + f.grid + "'");
    }
  } else if (!f.grid.empty()) {
    den::SizeGrid grid{kind, {}};
    std::size_t start = 0;
    while (start <= f.grid.size()) {
      const auto comma = f.grid.find(',', start);
      const auto token = f.grid.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!token.empty()) {
        try {
          grid.values.push_back(std::stod(token));
        } catch (const std::exception&) {
          throw CLI::ValidationError("--grid", "cannot parse '" + token + "'");
        }
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return grid;
  }
  if (kind == den::SizeKind::Knn) return den::default_knn_grid(ds.n, count);
  if (profile) return den::default_radius_grid(*profile, count);
  const auto [lo, hi] = den::distance_extremes(ds, parse_distance(f.distance), popt);
  return den::default_radius_grid(lo, hi, count);
}

Analysis prepare_analysis(const CommonFlags& f, const den::Dataset& ds) {
  Analysis a;
  a.distance = parse_distance(f.distance);
  a.size_kind = parse_kind(f.neighborhood);
  a.metric = parse_metric(f.metric);
  a.profile_opt.threads = effective_threads(f);
  a.profile_opt.max_profile_entries = f.memory_budget;
  a.sweep.threads = a.profile_opt.threads;
  if (f.anchors != "all") {
    if (!f.anchors.starts_with("sample:"))
      throw CLI::ValidationError("--anchors", "expected 'all' or 'sample:<m>'");
    const std::size_t m = std::stoul(f.anchors.substr(7));
    a.sweep.anchors = sample_anchors(ds.n, m, f.seed);
  }
  if (ds.n * ds.n <= f.memory_budget)
    a.profile = den::build_distance_profile(ds, a.distance, a.profile_opt);
  a.grid = resolve_grid(f, a.size_kind, ds, a.profile, a.profile_opt);
  return a;
}

den::DenCurve compute_curve(const Analysis& a, const den::Dataset& ds,
                            std::span<const double> errors, double epsilon) {
  if (a.profile)
    return den::den_curve(*a.profile, errors, a.grid, a.metric, epsilon, a.sweep);
  return den::den_curve(ds, a.distance, errors, a.grid, a.metric, epsilon,
                        a.profile_opt, a.sweep);
}

json config_echo(const CommonFlags& f, const Analysis& a) {
  // execution-only parameters (threads, out, memory budget) are not part
  // of the analysis and stay out of the report
  json cfg;
  cfg["neighborhood"] = a.size_kind == den::SizeKind::Knn ? "knn" : "radius";
  cfg["metric"] =
      a.metric == den::DisparityMetric::Rawlsian ? "rawlsian" : "stddev";
  cfg["distance"] =
      a.distance == den::DistanceMetric::Cosine ? "cosine" : "l2";
  cfg["epsilon"] = f.epsilon;
  cfg["grid"] = a.grid.values;
  cfg["anchors"] = f.anchors;
  cfg["seed"] = f.seed;
  return cfg;
}

json input_echo(const den::Bundle& bundle) {
  return {{"manifest", bundle.manifest_path.filename().string()},
          {"n", bundle.dataset.n},
          {"d", bundle.dataset.dim},
          {"digest", bundle.digest}};
}

json report_envelope(const CommonFlags& f, json input, json config, json results) {
  json report;
  report["tool"] = {{"name", "den"}, {"version", den::kVersion}};
  report["input"] = std::move(input);
  report["config"] = std::move(config);
  report["results"] = std::move(results);
  if (f.timestamp) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&tt));
    report["generated_at"] = buf;
  }
  return report;
}

void emit_report(const CommonFlags& f, const json& report) {
  if (f.out.empty())
    std::cout << report.dump(2) << "\n";
  else
    den::write_report(report, f.out);
}

void maybe_emit_curve_csv(const CommonFlags& f, const den::DenCurve& curve) {
  if (!f.curve_csv.empty())
    den::detail::write_file_bytes(f.curve_csv, den::curve_to_csv(curve));
}

// References available for ground-truth comparison: "individual" plus one
// per group partition.
std::vector<std::pair<std::string, const den::LabelColumn*>> references_of(
    const den::Dataset& ds) {
  std::vector<std::pair<std::string, const den::LabelColumn*>> refs;
  if (ds.identity) refs.emplace_back("individual", &*ds.identity);
  for (const auto& [name, col] : ds.groups)
    refs.emplace_back("group:" + name, &col);
  return refs;
}

int cmd_check(const std::string& manifest) {
  const auto bundle = den::load_bundle(manifest);
  std::cout << "ok: n=" << bundle.dataset.n << " d=" << bundle.dataset.dim
            << " identity=" << (bundle.dataset.identity ? "yes" : "no")
            << " groups=[";
  for (std::size_t g = 0; g < bundle.dataset.groups.size(); ++g)
    std::cout << (g ? "," : "") << bundle.dataset.groups[g].first;
  std::cout << "] digest=" << bundle.digest << "\n";
  return 0;
}

int cmd_curve(const CommonFlags& f, const std::string& manifest) {
  const auto bundle = den::load_bundle(manifest);
  const auto a = prepare_analysis(f, bundle.dataset);
  const auto curve =
      compute_curve(a, bundle.dataset, bundle.dataset.errors, f.epsilon);
  maybe_emit_curve_csv(f, curve);
  emit_report(f, report_envelope(f, input_echo(bundle), config_echo(f, a),
                                 {{"curve", den::curve_to_json(curve)}}));
  return 0;
}

int cmd_auc(const CommonFlags& f, const std::vector<std::string>& manifests) {
  json models = json::array();
  json inputs = json::array();
  json config;
  for (const auto& path : manifests) {
    const auto bundle = den::load_bundle(path);
    const auto a = prepare_analysis(f, bundle.dataset);
    const auto curve =
        compute_curve(a, bundle.dataset, bundle.dataset.errors, f.epsilon);
    models.push_back({{"name", bundle.manifest_path.stem().string()},
                      {"auc_den", curve.auc}});
    inputs.push_back(input_echo(bundle));
    if (config.is_null()) config = config_echo(f, a);
  }
  emit_report(f, report_envelope(f, std::move(inputs), std::move(config),
                                 {{"models", std::move(models)}}));
  return 0;
}

int cmd_estimate(const CommonFlags& f, const std::string& manifest,
                 const std::string& which_references) {
  const auto bundle = den::load_bundle(manifest);
  const den::Dataset& ds = bundle.dataset;
  const bool want_individual =
      which_references == "all" || which_references == "individual";
  const bool want_groups =
      which_references == "all" || which_references == "groups";
  if (want_individual && !ds.identity)
    throw den::DataError(
        "estimate: bundle has no identity labels (pass --references groups "
        "to use group partitions only)");
  if (want_groups && ds.groups.empty())
    throw den::DataError(
        "estimate: bundle has no group partitions (pass --references "
        "individual to use identity labels only)");

  const auto a = prepare_analysis(f, ds);
  const auto curve = compute_curve(a, ds, ds.errors, f.epsilon);
  maybe_emit_curve_csv(f, curve);

  json refs = json::object();
  for (const auto& [name, labels] : references_of(ds)) {
    if (name == "individual" && !want_individual) continue;
    if (name.starts_with("group:") && !want_groups) continue;
    const double reference =
        den::partition_disparity(ds.errors, *labels, a.metric, f.epsilon);
    refs[name] =
        den::estimation_curve_to_json(den::estimation_error_curve(curve, reference));
  }
  emit_report(f, report_envelope(f, input_echo(bundle), config_echo(f, a),
                                 {{"curve", den::curve_to_json(curve)},
                                  {"references", std::move(refs)}}));
  return 0;
}

std::vector<std::string> family_manifests(const std::string& family_path) {
  const auto dir = std::filesystem::path(family_path).parent_path();
  json index;
  try {
    index = json::parse(den::detail::read_file_bytes(family_path));
  } catch (const json::exception& e) {
    throw den::DataError(family_path + ": " + e.what());
  }
  if (!index.contains("models"))
    throw den::DataError(family_path + ": missing 'models' list");
  std::vector<std::string> out;
  for (const auto& m : index.at("models"))
    out.push_back((dir / m.at("manifest").get<std::string>()).string());
  return out;
}

int cmd_rank(const CommonFlags& f, std::vector<std::string> manifests,
             const std::string& family) {
  if (!family.empty()) {
    auto extra = family_manifests(family);
    manifests.insert(manifests.end(), extra.begin(), extra.end());
  }
  if (manifests.size() < 3)
    throw den::DataError("rank: needs at least 3 model bundles, got " +
                         std::to_string(manifests.size()));

  std::vector<den::Bundle> bundles;
  bundles.reserve(manifests.size());
  for (const auto& path : manifests) bundles.push_back(den::load_bundle(path));

  const den::Dataset& first = bundles.front().dataset;
  for (const auto& b : bundles) {
    if (b.dataset.embeddings != first.embeddings)
      throw den::DataError("rank: " + b.manifest_path.string() +
                           " uses a different embedding matrix; all models "
                           "must share one proxy space");
    bool same_labels =
        b.dataset.identity.has_value() == first.identity.has_value() &&
        b.dataset.groups.size() == first.groups.size();
    if (same_labels && first.identity)
      same_labels = b.dataset.identity->codes == first.identity->codes;
    for (std::size_t g = 0; same_labels && g < first.groups.size(); ++g)
      same_labels = b.dataset.groups[g].first == first.groups[g].first &&
                    b.dataset.groups[g].second.codes == first.groups[g].second.codes;
    if (!same_labels)
      throw den::DataError("rank: " + b.manifest_path.string() +
                           " has a different reference labeling");
  }
  const auto refs = references_of(first);
  if (refs.empty())
    throw den::DataError(
        "rank: bundles carry no identity or group labels to rank against");

  const auto a = prepare_analysis(f, first);
  std::vector<std::string> names;
  std::vector<double> aucs;
  std::vector<std::pair<std::string, std::vector<double>>> truths;
  for (const auto& [name, labels] : refs) truths.emplace_back(name, std::vector<double>{});

  json inputs = json::array();
  for (const auto& b : bundles) {
    names.push_back(b.manifest_path.stem().string());
    aucs.push_back(compute_curve(a, first, b.dataset.errors, f.epsilon).auc);
    const auto b_refs = references_of(b.dataset);
    for (std::size_t r = 0; r < refs.size(); ++r)
      truths[r].second.push_back(den::partition_disparity(
          b.dataset.errors, *b_refs[r].second, a.metric, f.epsilon));
    inputs.push_back(input_echo(b));
  }
  const auto report = den::rank_models(std::move(names), std::move(aucs),
                                       std::move(truths));
  emit_report(f, report_envelope(f, std::move(inputs), config_echo(f, a),
                                 den::rank_report_to_json(report)));
  return 0;
}

int cmd_proxy_noise(const CommonFlags& f, const std::string& manifest) {
  const auto bundle = den::load_bundle(manifest);
  const den::Dataset& ds = bundle.dataset;
  if (!ds.identity)
    throw den::DataError("proxy-noise: bundle has no identity labels");
  const auto a = prepare_analysis(f, ds);

  std::vector<std::optional<double>> auroc(ds.n);
  if (a.profile) {
    den::detail::parallel_for(ds.n, a.sweep.threads, [&](std::size_t i) {
      auroc[i] = den::per_point_retrieval_auroc(*a.profile, *ds.identity, i);
    });
  } else {
    den::scan_profile_rows(ds, a.distance, a.profile_opt,
                           [&](std::size_t i, auto order_row, auto dist_row) {
                             auroc[i] = den::retrieval_auroc_from_row(
                                 order_row, dist_row, ds.identity->codes, i);
                           });
  }
  std::vector<double> x, y;
  std::size_t undefined = 0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (!auroc[i]) {
      ++undefined;
      continue;
    }
    x.push_back(*auroc[i]);
    y.push_back(ds.errors[i]);
  }
  if (x.size() < 3)
    throw den::DataError(
        "proxy-noise: fewer than 3 datapoints have a defined retrieval "
        "auroc (identities may be singletons)");
  const auto corr = den::pearson_with_p(x, y);
  emit_report(f, report_envelope(
                     f, input_echo(bundle), config_echo(f, a),
                     {{"pearson", den::correlation_to_json(corr)},
                      {"n_used", x.size()},
                      {"n_undefined", undefined}}));
  return 0;
}

int cmd_metrics(const CommonFlags& f, const std::string& manifest) {
  const auto bundle = den::load_bundle(manifest);
  if (!bundle.run)
    throw den::DataError(
        "metrics: records carry no prediction/label columns");
  const auto& run = *bundle.run;
  json results;
  results["rmse"] = den::rmse(run.labels, run.predictions);
  results["sagr"] = den::sagr(run.labels, run.predictions);
  results["pcc"] =
      den::correlation_to_json(den::pearson_with_p(run.labels, run.predictions));
  results["ccc"] = den::ccc(run.labels, run.predictions);
  emit_report(f, report_envelope(f, input_echo(bundle), json::object(),
                                 std::move(results)));
  return 0;
}

den::SynthConfig synth_config_from_json(const json& j) {
  den::SynthConfig cfg;
  if (j.contains("n_groups")) cfg.n_groups = j.at("n_groups").get<std::size_t>();
  if (j.contains("ids_per_group"))
    cfg.ids_per_group = j.at("ids_per_group").get<std::size_t>();
  if (j.contains("samples_per_id"))
    cfg.samples_per_id = j.at("samples_per_id").get<std::size_t>();
  if (j.contains("dim")) cfg.dim = j.at("dim").get<std::size_t>();
  if (j.contains("group_sep")) cfg.group_sep = j.at("group_sep").get<double>();
  if (j.contains("id_sep")) cfg.id_sep = j.at("id_sep").get<double>();
  if (j.contains("sample_spread"))
    cfg.sample_spread = j.at("sample_spread").get<double>();
  if (j.contains("group_error_means"))
    cfg.group_error_means = j.at("group_error_means").get<std::vector<double>>();
  if (j.contains("error_noise"))
    cfg.error_noise = j.at("error_noise").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("max_points"))
    cfg.max_points = j.at("max_points").get<std::size_t>();
  return cfg;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override,
              std::optional<std::size_t> models, double low, double high,
              const std::string& format) {
  json cfg_json = json::object();
  if (!config_path.empty()) {
    try {
      cfg_json = json::parse(den::detail::read_file_bytes(config_path));
    } catch (const json::exception& e) {
      throw den::DataError(config_path + ": " + e.what());
    }
  }
  auto cfg = synth_config_from_json(cfg_json);
  if (seed_override) cfg.seed = *seed_override;
  den::SaveOptions save_opt;
  save_opt.embeddings_format = format;

  std::optional<std::size_t> n_models = models;
  if (!n_models && cfg_json.contains("family"))
    n_models = cfg_json.at("family").at("n_models").get<std::size_t>();
  if (cfg_json.contains("family")) {
    const auto& fam = cfg_json.at("family");
    if (fam.contains("low")) low = fam.at("low").get<double>();
    if (fam.contains("high")) high = fam.at("high").get<double>();
  }

  if (n_models) {
    const auto family = den::generate_model_family(cfg, *n_models, low, high);
    const auto index = den::save_model_family(out_dir, family, save_opt);
    std::cout << "wrote family of " << family.models.size() << " models (n="
              << family.dataset.n << ", d=" << family.dataset.dim << ") to "
              << index.string() << "\n";
  } else {
    const auto ds = den::generate_synthetic_dataset(cfg);
    const auto manifest = den::save_bundle(out_dir, ds, "synth", save_opt);
    std::cout << "wrote bundle (n=" << ds.n << ", d=" << ds.dim << ") to "
              << manifest.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"disparity-across-embedding-neighborhoods toolkit"};
  app.set_version_flag("--version", std::string("den ") + den::kVersion);
  app.require_subcommand(1);

  CommonFlags flags;

  std::string check_manifest;
  auto* check = app.add_subcommand("check", "Validate a dataset bundle");
  check->add_option("manifest", check_manifest, "Bundle manifest path")
      ->required();

  std::string curve_manifest;
  auto* curve = app.add_subcommand(
      "curve", "Disparity-across-neighborhoods curve for one model run");
  curve->add_option("manifest", curve_manifest, "Bundle manifest path")
      ->required();
  add_analysis_flags(curve, flags);
  add_execution_flags(curve, flags);
  curve->add_option("--curve-csv", flags.curve_csv,
                    "Also write curve points as CSV");

  std::vector<std::string> auc_manifests;
  auto* auc = app.add_subcommand("auc", "Area under the disparity curve per model");
  auc->add_option("manifests", auc_manifests, "Bundle manifest paths")
      ->required()
      ->expected(-1);
  add_analysis_flags(auc, flags);
  add_execution_flags(auc, flags);

  std::string estimate_manifest;
  std::string estimate_references = "all";
  auto* estimate = app.add_subcommand(
      "estimate", "Disparity estimation error vs labeled references");
  estimate->add_option("manifest", estimate_manifest, "Bundle manifest path")
      ->required();
  estimate->add_option("--references", estimate_references,
                       "Which references to compare against")
      ->check(CLI::IsMember({"all", "individual", "groups"}));
  add_analysis_flags(estimate, flags);
  add_execution_flags(estimate, flags);
  estimate->add_option("--curve-csv", flags.curve_csv,
                       "Also write curve points as CSV");

  std::vector<std::string> rank_manifests;
  std::string rank_family;
  auto* rank = app.add_subcommand(
      "rank", "Rank models by curve area and compare with true disparities");
  rank->add_option("manifests", rank_manifests, "Bundle manifest paths");
  rank->add_option("--family", rank_family, "family.json index written by synth");
  add_analysis_flags(rank, flags);
  add_execution_flags(rank, flags);

  std::string proxy_manifest;
  auto* proxy = app.add_subcommand(
      "proxy-noise",
      "Correlate per-datapoint retrieval quality with model error");
  proxy->add_option("manifest", proxy_manifest, "Bundle manifest path")
      ->required();
  add_analysis_flags(proxy, flags);
  add_execution_flags(proxy, flags);

  std::string metrics_manifest;
  auto* metrics = app.add_subcommand(
      "metrics", "RMSE/SAGR/PCC/CCC for a prediction/label bundle");
  metrics->add_option("manifest", metrics_manifest, "Bundle manifest path")
      ->required();
  add_execution_flags(metrics, flags);

  std::string synth_config, synth_out = ".", synth_format = "denb";
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_models;
  double synth_low = 0.0, synth_high = 0.6;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  synth->add_option("--config", synth_config, "SynthConfig JSON file");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Override the config seed");
  synth->add_option("--models", synth_models,
                    "Generate a model family of this size");
  synth->add_option("--disparity-low", synth_low, "Family planted-disparity low end");
  synth->add_option("--disparity-high", synth_high,
                    "Family planted-disparity high end");
  synth->add_option("--format", synth_format, "Embeddings file format")
      ->check(CLI::IsMember({"denb", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*check) return cmd_check(check_manifest);
    if (*curve) return cmd_curve(flags, curve_manifest);
    if (*auc) return cmd_auc(flags, auc_manifests);
    if (*estimate)
      return cmd_estimate(flags, estimate_manifest, estimate_references);
    if (*rank) return cmd_rank(flags, rank_manifests, rank_family);
    if (*proxy) return cmd_proxy_noise(flags, proxy_manifest);
    if (*metrics) return cmd_metrics(flags, metrics_manifest);
    if (*synth)
      return cmd_synth(synth_config, synth_out, synth_seed, synth_models,
                       synth_low, synth_high, synth_format);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const den::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
