#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "den/io.hpp"
#include "den/synth.hpp"
#include "test_util.hpp"

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

std::string cli_path() {
  const char* env = std::getenv("DEN_CLI");
  REQUIRE(env != nullptr);
  return env;
}

RunResult run_cli(const std::string& args, const std::filesystem::path& workdir) {
  const auto out_file = workdir / "cli_output.txt";
  const std::string cmd = cli_path() + " " + args + " > " +
                          out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  result.output.assign(std::istreambuf_iterator<char>(in), {});
  return result;
}

// n = 64 keeps the default 32-point knn grid fully populated
std::filesystem::path write_synth_bundle(const std::filesystem::path& dir,
                                         bool with_labels = true) {
  den::SynthConfig cfg;
  cfg.n_groups = 2;
  cfg.ids_per_group = 8;
  cfg.samples_per_id = 4;
  cfg.dim = 4;
  cfg.seed = 123;
  auto ds = den::generate_synthetic_dataset(cfg);
  if (!with_labels) {
    ds.identity.reset();
    ds.groups.clear();
  }
  return den::save_bundle(dir, ds, "cli_sample");
}

}  // namespace

TEST_CASE("cli: check accepts a valid bundle") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  const auto res = run_cli("check " + manifest.string(), dir.path());
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("ok:") != std::string::npos);
  CHECK(res.output.find("digest=fnv1a64:") != std::string::npos);
}

TEST_CASE("cli: check rejects a broken bundle with exit 2") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  // corrupt the binary magic
  const auto emb = dir.path() / "cli_sample_embeddings.denb";
  auto bytes = den::detail::read_file_bytes(emb);
  bytes[0] = 'Z';
  den::detail::write_file_bytes(emb, bytes);
  const auto res = run_cli("check " + manifest.string(), dir.path());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("DENB") != std::string::npos);
}

TEST_CASE("cli: unknown flag is a usage error") {
  testutil::TempDir dir;
  const auto res = run_cli("curve --no-such-flag", dir.path());
  CHECK(res.exit_code == 1);
}

TEST_CASE("cli: curve emits a 32-point report on the default grid") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  const auto report_path = dir.path() / "report.json";
  const auto res = run_cli("curve " + manifest.string() +
                               " --neighborhood knn --metric rawlsian --out " +
                               report_path.string(),
                           dir.path());
  REQUIRE(res.exit_code == 0);
  const auto report =
      nlohmann::json::parse(den::detail::read_file_bytes(report_path));
  CHECK(report.at("results").at("curve").at("points").size() == 32);
  CHECK(report.at("results").at("curve").at("metric") == "rawlsian");
  CHECK(report.at("tool").at("name") == "den");
  CHECK(report.at("config").at("neighborhood") == "knn");
  CHECK_FALSE(report.contains("generated_at"));
}

TEST_CASE("cli: curve csv export") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  const auto csv_path = dir.path() / "curve.csv";
  const auto res = run_cli("curve " + manifest.string() + " --grid 4 --out " +
                               (dir.path() / "r.json").string() +
                               " --curve-csv " + csv_path.string(),
                           dir.path());
  REQUIRE(res.exit_code == 0);
  const auto csv = den::detail::read_file_bytes(csv_path);
  CHECK(csv.starts_with("size,disparity\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 points
}

TEST_CASE("cli: estimate needs group labels unless told otherwise") {
  testutil::TempDir dir;
  den::SynthConfig cfg;
  cfg.ids_per_group = 6;
  cfg.samples_per_id = 4;
  cfg.seed = 5;
  auto ds = den::generate_synthetic_dataset(cfg);
  ds.groups.clear();  // identity only
  const auto manifest = den::save_bundle(dir.path(), ds, "no_groups");

  const auto res = run_cli("estimate " + manifest.string(), dir.path());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("group") != std::string::npos);

  const auto ok = run_cli("estimate " + manifest.string() +
                              " --references individual --out " +
                              (dir.path() / "est.json").string(),
                          dir.path());
  CHECK(ok.exit_code == 0);
  const auto report = nlohmann::json::parse(
      den::detail::read_file_bytes(dir.path() / "est.json"));
  CHECK(report.at("results").at("references").contains("individual"));
}

TEST_CASE("cli: estimate reports per-reference argmin sizes") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  const auto res = run_cli("estimate " + manifest.string() +
                               " --metric stddev --out " +
                               (dir.path() / "est.json").string(),
                           dir.path());
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(
      den::detail::read_file_bytes(dir.path() / "est.json"));
  const auto& refs = report.at("results").at("references");
  REQUIRE(refs.contains("individual"));
  REQUIRE(refs.contains("group:group"));
  for (const auto& [name, ref] : refs.items()) {
    CHECK(ref.contains("argmin_size"));
    CHECK(ref.at("points").size() == 32);
  }
}

TEST_CASE("cli: synth family then rank") {
  testutil::TempDir dir;
  const auto family_dir = dir.path() / "family";
  const auto synth_res = run_cli(
      "synth --out " + family_dir.string() + " --models 5 --seed 77", dir.path());
  REQUIRE(synth_res.exit_code == 0);
  REQUIRE(std::filesystem::exists(family_dir / "family.json"));

  const auto report_path = dir.path() / "rank.json";
  const auto rank_res = run_cli("rank --family " +
                                    (family_dir / "family.json").string() +
                                    " --out " + report_path.string(),
                                dir.path());
  REQUIRE(rank_res.exit_code == 0);
  const auto report =
      nlohmann::json::parse(den::detail::read_file_bytes(report_path));
  CHECK(report.at("results").at("models").size() == 5);
  CHECK(report.at("results").at("auc_den").size() == 5);
  const auto& refs = report.at("results").at("references");
  REQUIRE(refs.contains("individual"));
  REQUIRE(refs.contains("group:group"));
  for (const auto& [name, ref] : refs.items()) {
    CHECK(ref.at("kendall_tau").contains("coefficient"));
    CHECK(ref.at("kendall_tau").contains("p_value"));
  }
}

TEST_CASE("cli: rank rejects fewer than three models") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  const auto res = run_cli("rank " + manifest.string(), dir.path());
  CHECK(res.exit_code == 2);
}

TEST_CASE("cli: proxy-noise reports the correlation and coverage") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  const auto res = run_cli("proxy-noise " + manifest.string() + " --out " +
                               (dir.path() / "pn.json").string(),
                           dir.path());
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(
      den::detail::read_file_bytes(dir.path() / "pn.json"));
  const auto& results = report.at("results");
  CHECK(results.at("n_used").get<std::size_t>() == 64);
  CHECK(results.at("n_undefined").get<std::size_t>() == 0);
  const double r = results.at("pearson").at("coefficient").get<double>();
  CHECK(std::abs(r) <= 1.0);
}

TEST_CASE("cli: metrics on a prediction/label bundle") {
  testutil::TempDir dir;
  std::ofstream(dir.path() / "records.csv")
      << "index,prediction,label\n0,0.5,0.5\n1,0.1,0.3\n2,-0.4,-0.2\n3,0.8,0.9\n";
  std::ofstream(dir.path() / "emb.csv") << "0\n1\n2\n3\n";
  std::ofstream(dir.path() / "m.json")
      << R"({"den_bundle":1,"n":4,"d":1,"records":"records.csv",)"
      << R"("embeddings":"emb.csv","embeddings_format":"csv","task":"regression"})";
  const auto res = run_cli("metrics " + (dir.path() / "m.json").string() +
                               " --out " + (dir.path() / "metrics.json").string(),
                           dir.path());
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(
      den::detail::read_file_bytes(dir.path() / "metrics.json"));
  const auto& results = report.at("results");
  CHECK(results.at("rmse").get<double>() > 0.0);
  CHECK(results.at("sagr").get<double>() == 1.0);
  CHECK(results.at("pcc").at("coefficient").get<double>() > 0.9);
  CHECK(results.at("ccc").get<double>() > 0.8);

  SECTION("error-only bundles are rejected for metrics") {
    testutil::TempDir dir2;
    const auto manifest = write_synth_bundle(dir2.path());
    const auto bad = run_cli("metrics " + manifest.string(), dir2.path());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("prediction") != std::string::npos);
  }
}

TEST_CASE("cli: reports are byte-identical across runs and thread counts") {
  testutil::TempDir dir;
  const auto manifest = write_synth_bundle(dir.path());
  std::vector<std::string> dumps;
  for (const std::string threads : {"1", "4", "1"}) {
    const auto path = dir.path() / ("report_t" + threads + ".json");
    const auto res = run_cli("curve " + manifest.string() +
                                 " --neighborhood radius --threads " + threads +
                                 " --out " + path.string(),
                             dir.path());
    REQUIRE(res.exit_code == 0);
    dumps.push_back(den::detail::read_file_bytes(path));
  }
  CHECK(dumps[0] == dumps[1]);
  CHECK(dumps[0] == dumps[2]);
}

TEST_CASE("cli: text and binary embeddings give identical reports") {
  testutil::TempDir dir;
  den::SynthConfig cfg;
  cfg.ids_per_group = 6;
  cfg.samples_per_id = 4;
  cfg.seed = 31;
  const auto ds = den::generate_synthetic_dataset(cfg);
  den::SaveOptions csv_opt;
  csv_opt.embeddings_format = "csv";
  const auto bin_manifest = den::save_bundle(dir.path() / "bin", ds, "m");
  const auto txt_manifest = den::save_bundle(dir.path() / "txt", ds, "m", csv_opt);

  auto report_of = [&](const std::filesystem::path& manifest,
                       const std::string& name) {
    const auto out = dir.path() / name;
    const auto res =
        run_cli("curve " + manifest.string() + " --out " + out.string(),
                dir.path());
    REQUIRE(res.exit_code == 0);
    auto j = nlohmann::json::parse(den::detail::read_file_bytes(out));
    j["input"].erase("digest");  // file bytes differ; loaded data must not
    return j.dump(2);
  };
  CHECK(report_of(bin_manifest, "bin.json") == report_of(txt_manifest, "txt.json"));
}
